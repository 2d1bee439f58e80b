//! Finite-difference solvers for the gradient-constrained minimization
//! `minimize I[v] = integral of F(Dv) + g(v) over the domain`,
//! posed equivalently as a double-obstacle problem between the reverse and
//! forward boundary distances: `-dbar <= v <= d`. The gradient constraint is
//! verified, never enforced.
//!
//! Discretization: cell-centered nodes, Dirichlet zero outside the domain.
//! The quadratic part of the energy is assembled from axis edges (giving the
//! five-point operator for `F = |Z|^2/2`), with cut edges shortened to the
//! true boundary crossing so the zero boundary value is imposed at the right
//! place. Mixed second-order terms use cell-averaged differences on interior
//! cells. All supported functionals are quadratic, so the double-obstacle
//! path is an active-set projected Newton method with conjugate-gradient
//! inner solves and an Armijo backtracking safeguard; the energy never
//! increases across accepted steps.
//!
//! The penalized path replaces the obstacles by mollified ones and solves
//! the smooth Euler-Lagrange system with a damped Newton iteration.

use crate::body::ConvexBody;
use crate::distance::{DistanceField, DistanceOpts};
use crate::domain::{Domain, Location};
use crate::geom::{v, Vec2};
use crate::grid::Grid;

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("invalid functional: {0}")]
    InvalidFunctional(String),
    #[error("no interior unknowns on this grid")]
    EmptyInterior,
    #[error("line search stalled before reaching the tolerance")]
    LineSearchStalled,
    #[error(transparent)]
    Body(#[from] crate::body::BodyError),
}

/// Integrand `F(Z)`: either `|Z|^2 / 2` or `<A Z, Z> / 2` with `A` SPD.
#[derive(Debug, Clone, Copy)]
pub enum FKind {
    HalfSquare,
    QuadraticForm { a11: f64, a12: f64, a22: f64 },
}

impl FKind {
    fn coeffs(self) -> (f64, f64, f64) {
        match self {
            FKind::HalfSquare => (1.0, 0.0, 1.0),
            FKind::QuadraticForm { a11, a12, a22 } => (a11, a12, a22),
        }
    }

    pub fn eval(self, z: Vec2) -> f64 {
        let (a11, a12, a22) = self.coeffs();
        0.5 * (a11 * z.x * z.x + 2.0 * a12 * z.x * z.y + a22 * z.y * z.y)
    }
}

/// Lower-order term `g(v)`: `-tau v` or `c v^2 / 2 - tau v` with `c >= 0`.
#[derive(Debug, Clone, Copy)]
pub enum GKind {
    Linear { tau: f64 },
    Quadratic { c: f64, tau: f64 },
}

impl GKind {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            GKind::Linear { tau } => -tau * u,
            GKind::Quadratic { c, tau } => 0.5 * c * u * u - tau * u,
        }
    }

    pub fn d1(self, u: f64) -> f64 {
        match self {
            GKind::Linear { tau } => -tau,
            GKind::Quadratic { c, tau } => c * u - tau,
        }
    }

    pub fn d2(self) -> f64 {
        match self {
            GKind::Linear { .. } => 0.0,
            GKind::Quadratic { c, .. } => c,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Functional {
    pub f: FKind,
    pub g: GKind,
    /// Set when `g` lacks quadratic growth (linear `g` is accepted but the
    /// coercivity bookkeeping does not apply verbatim).
    pub growth_warning: bool,
}

impl Functional {
    pub fn new(f: FKind, g: GKind) -> Result<Functional, SolverError> {
        if let FKind::QuadraticForm { a11, a12, a22 } = f {
            if !(a11 > 0.0 && a11 * a22 - a12 * a12 > 0.0) {
                return Err(SolverError::InvalidFunctional(
                    "quadratic form must be positive definite".into(),
                ));
            }
        }
        if let GKind::Quadratic { c, .. } = g {
            if c < 0.0 {
                return Err(SolverError::InvalidFunctional(
                    "quadratic term of g must be convex".into(),
                ));
            }
        }
        let growth_warning = matches!(g, GKind::Linear { .. });
        Ok(Functional { f, g, growth_warning })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolverCfg {
    pub max_iters: usize,
    /// Relative tolerance on the sup norm of the projected gradient.
    pub tol: f64,
    /// Mollification radius for the penalized path.
    pub eps: f64,
    /// Penalty parameter.
    pub delta: f64,
}

impl SolverCfg {
    pub fn defaults() -> SolverCfg {
        SolverCfg { max_iters: 400, tol: 1e-9, eps: 0.02, delta: 1e-4 }
    }
}

/// Assembled quadratic structure of a grid restricted to a domain.
pub struct Discretization {
    pub grid: Grid,
    pub inside: Vec<bool>,
    /// Weight of the edge from (i,j) to (i+1,j) when both ends are unknowns.
    wx: Vec<f64>,
    wy: Vec<f64>,
    /// Shortened ties from interior nodes to the zero boundary value.
    cuts: Vec<(usize, f64)>,
    /// Lower-left node index of cells whose four corners are unknowns.
    cells: Vec<usize>,
}

impl Discretization {
    pub fn build(domain: &Domain, grid: Grid) -> Discretization {
        let n = grid.len();
        let (hx, hy) = (grid.hx(), grid.hy());
        let mut inside = vec![false; n];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                inside[grid.idx(i, j)] =
                    domain.contains(grid.node(i, j), 0.0) == Location::Inside;
            }
        }
        let mut wx = vec![0.0; n];
        let mut wy = vec![0.0; n];
        let mut cuts = Vec::new();
        let cut_len = |from: Vec2, to: Vec2| -> f64 {
            // Fraction of the edge inside the domain, by bisection.
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if domain.contains(from + mid * (to - from), 0.0) == Location::Inside {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let idx = grid.idx(i, j);
                if !inside[idx] {
                    continue;
                }
                let p = grid.node(i, j);
                // +x neighbor
                if i + 1 < grid.nx && inside[grid.idx(i + 1, j)] {
                    wx[idx] = hy / hx;
                } else {
                    let q = p + v(hx, 0.0);
                    let l = (cut_len(p, q) * hx).max(0.05 * hx);
                    cuts.push((idx, hy / l));
                }
                if i == 0 || !inside[grid.idx(i - 1, j)] {
                    let q = p - v(hx, 0.0);
                    let l = (cut_len(p, q) * hx).max(0.05 * hx);
                    cuts.push((idx, hy / l));
                }
                // +y neighbor
                if j + 1 < grid.ny && inside[grid.idx(i, j + 1)] {
                    wy[idx] = hx / hy;
                } else {
                    let q = p + v(0.0, hy);
                    let l = (cut_len(p, q) * hy).max(0.05 * hy);
                    cuts.push((idx, hx / l));
                }
                if j == 0 || !inside[grid.idx(i, j - 1)] {
                    let q = p - v(0.0, hy);
                    let l = (cut_len(p, q) * hy).max(0.05 * hy);
                    cuts.push((idx, hx / l));
                }
            }
        }
        let mut cells = Vec::new();
        for j in 0..grid.ny.saturating_sub(1) {
            for i in 0..grid.nx.saturating_sub(1) {
                let ids = [
                    grid.idx(i, j),
                    grid.idx(i + 1, j),
                    grid.idx(i, j + 1),
                    grid.idx(i + 1, j + 1),
                ];
                if ids.iter().all(|&k| inside[k]) {
                    cells.push(grid.idx(i, j));
                }
            }
        }
        Discretization { grid, inside, wx, wy, cuts, cells }
    }

    pub fn interior_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Discrete energy of the solver (edge quadrature of F plus midpoint
    /// quadrature of g).
    pub fn energy(&self, fun: &Functional, u: &[f64]) -> f64 {
        let g = &self.grid;
        let (a11, a12, a22) = fun.f.coeffs();
        let (hx, hy) = (g.hx(), g.hy());
        let mut e = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let idx = g.idx(i, j);
                if !self.inside[idx] {
                    continue;
                }
                if self.wx[idx] != 0.0 {
                    let d = u[g.idx(i + 1, j)] - u[idx];
                    e += 0.5 * a11 * self.wx[idx] * d * d;
                }
                if self.wy[idx] != 0.0 {
                    let d = u[g.idx(i, j + 1)] - u[idx];
                    e += 0.5 * a22 * self.wy[idx] * d * d;
                }
                e += fun.g.eval(u[idx]) * hx * hy;
            }
        }
        // Cut direction is not tracked; the isotropic average coefficient is
        // exact for HalfSquare.
        for &(idx, w) in &self.cuts {
            e += 0.25 * (a11 + a22) * w * u[idx] * u[idx];
        }
        if a12 != 0.0 {
            for &c in &self.cells {
                let (z1, z2) = self.cell_gradient(u, c);
                e += a12 * z1 * z2 * hx * hy;
            }
        }
        e
    }

    fn cell_gradient(&self, u: &[f64], cell: usize) -> (f64, f64) {
        let g = &self.grid;
        let (a, b, c, d) = (u[cell], u[cell + 1], u[cell + g.nx], u[cell + g.nx + 1]);
        ((b + d - a - c) / (2.0 * g.hx()), (c + d - a - b) / (2.0 * g.hy()))
    }

    /// Gradient of the discrete energy.
    pub fn grad(&self, fun: &Functional, u: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let (a11, a12, a22) = fun.f.coeffs();
        let (hx, hy) = (g.hx(), g.hy());
        out.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let idx = g.idx(i, j);
                if !self.inside[idx] {
                    continue;
                }
                if self.wx[idx] != 0.0 {
                    let nb = g.idx(i + 1, j);
                    let t = a11 * self.wx[idx] * (u[nb] - u[idx]);
                    out[idx] -= t;
                    out[nb] += t;
                }
                if self.wy[idx] != 0.0 {
                    let nb = g.idx(i, j + 1);
                    let t = a22 * self.wy[idx] * (u[nb] - u[idx]);
                    out[idx] -= t;
                    out[nb] += t;
                }
                out[idx] += fun.g.d1(u[idx]) * hx * hy;
            }
        }
        for &(idx, w) in &self.cuts {
            out[idx] += 0.5 * (a11 + a22) * w * u[idx];
        }
        if a12 != 0.0 {
            for &c in &self.cells {
                let (z1, z2) = self.cell_gradient(u, c);
                let s = a12 * hx * hy;
                let (gx, gy) = (s * z2 / (2.0 * hx), s * z1 / (2.0 * hy));
                out[c] += -gx - gy;
                out[c + 1] += gx - gy;
                out[c + g.nx] += -gx + gy;
                out[c + g.nx + 1] += gx + gy;
            }
        }
        for (idx, o) in out.iter_mut().enumerate() {
            if !self.inside[idx] {
                *o = 0.0;
            }
        }
    }

    /// Hessian-vector product restricted to a free set (masked coordinates
    /// act as zero).
    fn hess_apply(&self, fun: &Functional, p: &[f64], mask: &[bool], out: &mut [f64]) {
        let g = &self.grid;
        let (a11, a12, a22) = fun.f.coeffs();
        let (hx, hy) = (g.hx(), g.hy());
        let gpp = fun.g.d2();
        out.iter_mut().for_each(|x| *x = 0.0);
        let val = |idx: usize| if mask[idx] { p[idx] } else { 0.0 };
        for j in 0..g.ny {
            for i in 0..g.nx {
                let idx = g.idx(i, j);
                if !self.inside[idx] {
                    continue;
                }
                if self.wx[idx] != 0.0 {
                    let nb = g.idx(i + 1, j);
                    let t = a11 * self.wx[idx] * (val(nb) - val(idx));
                    out[idx] -= t;
                    out[nb] += t;
                }
                if self.wy[idx] != 0.0 {
                    let nb = g.idx(i, j + 1);
                    let t = a22 * self.wy[idx] * (val(nb) - val(idx));
                    out[idx] -= t;
                    out[nb] += t;
                }
                out[idx] += gpp * val(idx) * hx * hy;
            }
        }
        for &(idx, w) in &self.cuts {
            out[idx] += 0.5 * (a11 + a22) * w * val(idx);
        }
        if a12 != 0.0 {
            for &c in &self.cells {
                let ids = [c, c + 1, c + g.nx, c + g.nx + 1];
                let (a, b, cc, d) = (val(ids[0]), val(ids[1]), val(ids[2]), val(ids[3]));
                let z1 = (b + d - a - cc) / (2.0 * hx);
                let z2 = (cc + d - a - b) / (2.0 * hy);
                let s = a12 * hx * hy;
                let (gx, gy) = (s * z2 / (2.0 * hx), s * z1 / (2.0 * hy));
                out[ids[0]] += -gx - gy;
                out[ids[1]] += gx - gy;
                out[ids[2]] += -gx + gy;
                out[ids[3]] += gx + gy;
            }
        }
        for (idx, o) in out.iter_mut().enumerate() {
            if !mask[idx] {
                *o = 0.0;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveFlags {
    pub max_iters_exceeded: bool,
    pub growth_warning: bool,
}

#[derive(Clone)]
pub struct Solution {
    pub grid: Grid,
    pub u: Vec<f64>,
    pub inside: Vec<bool>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub flags: SolveFlags,
}

fn projected_gradient_norm(u: &[f64], g: &[f64], lo: &[f64], hi: &[f64], inside: &[bool]) -> f64 {
    let mut r = 0.0f64;
    for i in 0..u.len() {
        if !inside[i] {
            continue;
        }
        let bt = 1e-12 * (hi[i] - lo[i]).abs().max(1e-300);
        let pg = if u[i] <= lo[i] + bt {
            g[i].min(0.0)
        } else if u[i] >= hi[i] - bt {
            g[i].max(0.0)
        } else {
            g[i]
        };
        r = r.max(pg.abs());
    }
    r
}

fn cg_solve(
    disc: &Discretization,
    fun: &Functional,
    rhs: &[f64],
    mask: &[bool],
    x: &mut [f64],
    max_iter: usize,
    tol: f64,
) {
    let n = rhs.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let mut r: Vec<f64> = (0..n).map(|i| if mask[i] { rhs[i] } else { 0.0 }).collect();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr: f64 = r.iter().map(|&a| a * a).sum();
    let rr0 = rr;
    if rr0 == 0.0 {
        return;
    }
    for _ in 0..max_iter {
        disc.hess_apply(fun, &p, mask, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(&a, &b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            if mask[i] {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
        }
        let rr_new: f64 = r.iter().map(|&a| a * a).sum();
        if rr_new <= tol * tol * rr0 {
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = if mask[i] { r[i] + beta * p[i] } else { 0.0 };
        }
    }
}

/// Double-obstacle solve: minimize the discrete energy subject to
/// `lo <= u <= hi`, with `lo = -dbar`, `hi = d` from the distance field.
pub fn solve_double_obstacle(
    disc: &Discretization,
    fun: &Functional,
    field: &DistanceField,
    cfg: &SolverCfg,
) -> Result<Solution, SolverError> {
    assert_eq!(field.grid, disc.grid, "distance field and discretization grids differ");
    let n = disc.grid.len();
    if disc.interior_count() == 0 {
        return Err(SolverError::EmptyInterior);
    }
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for i in 0..n {
        if disc.inside[i] {
            lo[i] = -field.dbar[i];
            hi[i] = field.d[i];
        }
    }
    let mut u = vec![0.0; n];
    for i in 0..n {
        u[i] = 0.0f64.clamp(lo[i], hi[i]);
    }
    let mut g = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut mask = vec![false; n];
    disc.grad(fun, &u, &mut g);
    let g0 = g.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let tol_abs = cfg.tol * g0.max(1e-300);
    let mut energy = disc.energy(fun, &u);
    let mut iterations = 0;
    let mut flags = SolveFlags { growth_warning: fun.growth_warning, ..Default::default() };
    let mut kkt = f64::INFINITY;
    let grad_step = {
        let h2 = disc.grid.hx().min(disc.grid.hy()).powi(2);
        let (a11, _, a22) = fun.f.coeffs();
        h2 / (8.0 * a11.max(a22).max(1e-300))
    };
    while iterations < cfg.max_iters {
        disc.grad(fun, &u, &mut g);
        kkt = projected_gradient_norm(&u, &g, &lo, &hi, &disc.inside);
        if kkt <= tol_abs {
            break;
        }
        iterations += 1;
        for i in 0..n {
            let bt = 1e-12 * (hi[i] - lo[i]).abs().max(1e-300);
            mask[i] = disc.inside[i]
                && !(u[i] <= lo[i] + bt && g[i] > 0.0)
                && !(u[i] >= hi[i] - bt && g[i] < 0.0);
        }
        let rhs: Vec<f64> = g.iter().map(|&x| -x).collect();
        // Unpreconditioned CG needs O(max(nx, ny)) iterations on a Poisson-
        // like system; an undersized cap stalls the outer Newton loop.
        let cg_cap = 8 * disc.grid.nx.max(disc.grid.ny).max(64);
        cg_solve(disc, fun, &rhs, &mask, &mut dir, cg_cap, 1e-10);
        let mut accepted = false;
        for newton in [true, false] {
            let step: Vec<f64> = if newton {
                dir.clone()
            } else {
                g.iter()
                    .enumerate()
                    .map(|(i, &x)| if disc.inside[i] { -grad_step * x } else { 0.0 })
                    .collect()
            };
            let mut alpha = 1.0;
            for _ in 0..40 {
                let mut un = vec![0.0; n];
                let mut dg = 0.0;
                for i in 0..n {
                    un[i] = (u[i] + alpha * step[i]).clamp(lo[i], hi[i]);
                    dg += g[i] * (un[i] - u[i]);
                }
                let en = disc.energy(fun, &un);
                if en <= energy + 1e-4 * dg && dg < 0.0 {
                    u = un;
                    energy = en;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            // Stationary up to rounding; report the current residual.
            break;
        }
    }
    if iterations >= cfg.max_iters && kkt > tol_abs {
        flags.max_iters_exceeded = true;
    }
    disc.grad(fun, &u, &mut g);
    kkt = projected_gradient_norm(&u, &g, &lo, &hi, &disc.inside);
    Ok(Solution {
        grid: disc.grid,
        u,
        inside: disc.inside.clone(),
        lo,
        hi,
        energy,
        iterations,
        kkt_residual: kkt,
        flags,
    })
}

/// Penalty function: zero for t <= 0, `t^2 / delta^2` up to `t = delta`,
/// then the matching linear continuation `(2t - delta) / delta`.
pub fn beta(t: f64, delta: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t <= delta {
        t * t / (delta * delta)
    } else {
        (2.0 * t - delta) / delta
    }
}

fn beta_d1(t: f64, delta: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t <= delta {
        2.0 * t / (delta * delta)
    } else {
        2.0 / delta
    }
}

fn beta_anti(t: f64, delta: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t <= delta {
        t * t * t / (3.0 * delta * delta)
    } else {
        delta / 3.0 + (t * t - delta * t) / delta
    }
}

/// Mollified obstacles for the penalized path.
pub struct Obstacles {
    pub grid: Grid,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    /// Nodes of the shrunken working region where `phi < psi`.
    pub active: Vec<bool>,
    pub c1: f64,
    pub eps: f64,
    pub delta_eps: f64,
}

/// Mollify the forward and reverse distances with a compactly supported bump
/// of radius `eps` and separate them by `delta_eps = 4.5 C1 eps`, inside the
/// admissible window `(4 C1 eps, 5 C1 eps)`.
pub fn build_obstacles(
    domain: &Domain,
    body: &ConvexBody,
    field: &DistanceField,
    eps: f64,
) -> Obstacles {
    let grid = field.grid;
    let (hx, hy) = (grid.hx(), grid.hy());
    let c1 = body.gauge_bounds.1;
    let delta_eps = 4.5 * c1 * eps;
    // Discrete bump kernel on grid offsets within radius eps.
    let (rx, ry) = ((eps / hx).floor() as i64, (eps / hy).floor() as i64);
    let mut kernel = Vec::new();
    let mut total = 0.0;
    for dj in -ry..=ry {
        for di in -rx..=rx {
            let r2 = (di as f64 * hx / eps).powi(2) + (dj as f64 * hy / eps).powi(2);
            if r2 < 1.0 {
                let w = (-1.0 / (1.0 - r2)).exp();
                kernel.push((di, dj, w));
                total += w;
            }
        }
    }
    for k in &mut kernel {
        k.2 /= total;
    }
    let n = grid.len();
    let conv = |src: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for j in 0..grid.ny as i64 {
            for i in 0..grid.nx as i64 {
                let mut acc = 0.0;
                for &(di, dj, w) in &kernel {
                    let ii = (i + di).clamp(0, grid.nx as i64 - 1) as usize;
                    let jj = (j + dj).clamp(0, grid.ny as i64 - 1) as usize;
                    acc += w * src[grid.idx(ii, jj)];
                }
                out[grid.idx(i as usize, j as usize)] = acc;
            }
        }
        out
    };
    let psi = conv(&field.d);
    let dbar_moll = conv(&field.dbar);
    let mut phi = vec![0.0; n];
    let mut active = vec![false; n];
    for idx in 0..n {
        phi[idx] = -dbar_moll[idx] + delta_eps;
        active[idx] = phi[idx] < psi[idx];
    }
    // Restrict to the domain interior.
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.idx(i, j);
            if active[idx] && domain.contains(grid.node(i, j), 0.0) != Location::Inside {
                active[idx] = false;
            }
        }
    }
    Obstacles { grid, psi, phi, active, c1, eps, delta_eps }
}

/// Penalized Euler-Lagrange solve on the shrunken region, with `u = phi` as
/// the Dirichlet value on its discrete boundary layer. Damped Newton on the
/// convex penalized energy.
pub fn solve_penalized(
    fun: &Functional,
    obs: &Obstacles,
    cfg: &SolverCfg,
) -> Result<Solution, SolverError> {
    let grid = obs.grid;
    let n = grid.len();
    let (hx, hy) = (grid.hx(), grid.hy());
    let (a11, a12, a22) = fun.f.coeffs();
    if a12 != 0.0 {
        // The mixed term uses the same cell scheme as the obstacle path; for
        // clarity the penalized path supports the axis-aligned part only.
        return Err(SolverError::InvalidFunctional(
            "penalized path supports axis-aligned quadratic forms".into(),
        ));
    }
    let delta = cfg.delta;
    let mut free = vec![false; n];
    let mut pinned = vec![false; n];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.idx(i, j);
            if !obs.active[idx] {
                continue;
            }
            let edge = i == 0
                || j == 0
                || i + 1 == grid.nx
                || j + 1 == grid.ny
                || !obs.active[grid.idx(i - 1, j)]
                || !obs.active[grid.idx(i + 1, j)]
                || !obs.active[grid.idx(i, j - 1)]
                || !obs.active[grid.idx(i, j + 1)];
            if edge {
                pinned[idx] = true;
            } else {
                free[idx] = true;
            }
        }
    }
    if free.iter().all(|&b| !b) {
        return Err(SolverError::EmptyInterior);
    }
    let mut u = vec![0.0; n];
    for idx in 0..n {
        if pinned[idx] {
            u[idx] = obs.phi[idx];
        } else if free[idx] {
            u[idx] = 0.0f64.clamp(obs.phi[idx], obs.psi[idx]);
        }
    }
    let in_region = |idx: usize| free[idx] || pinned[idx];
    let (wx, wy) = (hy / hx, hx / hy);
    let energy = |u: &[f64]| -> f64 {
        let mut e = 0.0;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let idx = grid.idx(i, j);
                if !in_region(idx) {
                    continue;
                }
                if i + 1 < grid.nx && in_region(grid.idx(i + 1, j)) {
                    let d = u[grid.idx(i + 1, j)] - u[idx];
                    e += 0.5 * a11 * wx * d * d;
                }
                if j + 1 < grid.ny && in_region(grid.idx(i, j + 1)) {
                    let d = u[grid.idx(i, j + 1)] - u[idx];
                    e += 0.5 * a22 * wy * d * d;
                }
                if free[idx] {
                    e += (fun.g.eval(u[idx])
                        + beta_anti(obs.phi[idx] - u[idx], delta)
                        + beta_anti(u[idx] - obs.psi[idx], delta))
                        * hx
                        * hy;
                }
            }
        }
        e
    };
    let gradient = |u: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let idx = grid.idx(i, j);
                if !in_region(idx) {
                    continue;
                }
                if i + 1 < grid.nx && in_region(grid.idx(i + 1, j)) {
                    let nb = grid.idx(i + 1, j);
                    let t = a11 * wx * (u[nb] - u[idx]);
                    out[idx] -= t;
                    out[nb] += t;
                }
                if j + 1 < grid.ny && in_region(grid.idx(i, j + 1)) {
                    let nb = grid.idx(i, j + 1);
                    let t = a22 * wy * (u[nb] - u[idx]);
                    out[idx] -= t;
                    out[nb] += t;
                }
                if free[idx] {
                    out[idx] += (fun.g.d1(u[idx]) - beta(obs.phi[idx] - u[idx], delta)
                        + beta(u[idx] - obs.psi[idx], delta))
                        * hx
                        * hy;
                }
            }
        }
        for idx in 0..u.len() {
            if !free[idx] {
                out[idx] = 0.0;
            }
        }
    };
    let mut g = vec![0.0; n];
    gradient(&u, &mut g);
    let g0 = g.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let tol_abs = cfg.tol * g0.max(1e-300);
    let mut e = energy(&u);
    let mut iterations = 0;
    let mut flags = SolveFlags { growth_warning: fun.growth_warning, ..Default::default() };
    let mut kkt;
    loop {
        gradient(&u, &mut g);
        kkt = g.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        if kkt <= tol_abs || iterations >= cfg.max_iters {
            break;
        }
        iterations += 1;
        // CG on the Newton system with the diagonal penalty curvature.
        let diag: Vec<f64> = (0..n)
            .map(|idx| {
                if free[idx] {
                    (fun.g.d2()
                        + beta_d1(obs.phi[idx] - u[idx], delta)
                        + beta_d1(u[idx] - obs.psi[idx], delta))
                        * hx
                        * hy
                } else {
                    0.0
                }
            })
            .collect();
        let apply = |p: &[f64], out: &mut [f64]| {
            out.iter_mut().for_each(|x| *x = 0.0);
            let val = |idx: usize| if free[idx] { p[idx] } else { 0.0 };
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let idx = grid.idx(i, j);
                    if !in_region(idx) {
                        continue;
                    }
                    if i + 1 < grid.nx && in_region(grid.idx(i + 1, j)) {
                        let nb = grid.idx(i + 1, j);
                        let t = a11 * wx * (val(nb) - val(idx));
                        out[idx] -= t;
                        out[nb] += t;
                    }
                    if j + 1 < grid.ny && in_region(grid.idx(i, j + 1)) {
                        let nb = grid.idx(i, j + 1);
                        let t = a22 * wy * (val(nb) - val(idx));
                        out[idx] -= t;
                        out[nb] += t;
                    }
                    out[idx] += diag[idx] * val(idx);
                }
            }
            for idx in 0..p.len() {
                if !free[idx] {
                    out[idx] = 0.0;
                }
            }
        };
        // Inline CG (the obstacle-path helper is tied to Discretization).
        let mut p_dir = vec![0.0; n];
        {
            let rhs: Vec<f64> = g.iter().map(|&x| -x).collect();
            let mut r: Vec<f64> =
                (0..n).map(|i| if free[i] { rhs[i] } else { 0.0 }).collect();
            let mut p = r.clone();
            let mut ap = vec![0.0; n];
            let mut rr: f64 = r.iter().map(|&a| a * a).sum();
            let rr0 = rr;
            let cg_cap = 8 * grid.nx.max(grid.ny).max(100);
            for _ in 0..cg_cap {
                if rr0 == 0.0 {
                    break;
                }
                apply(&p, &mut ap);
                let pap: f64 = p.iter().zip(&ap).map(|(&a, &b)| a * b).sum();
                if pap <= 0.0 {
                    break;
                }
                let alpha = rr / pap;
                for i in 0..n {
                    if free[i] {
                        p_dir[i] += alpha * p[i];
                        r[i] -= alpha * ap[i];
                    }
                }
                let rr_new: f64 = r.iter().map(|&a| a * a).sum();
                if rr_new <= 1e-16 * rr0 {
                    break;
                }
                let bta = rr_new / rr;
                rr = rr_new;
                for i in 0..n {
                    p[i] = if free[i] { r[i] + bta * p[i] } else { 0.0 };
                }
            }
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let un: Vec<f64> =
                (0..n).map(|i| if free[i] { u[i] + alpha * p_dir[i] } else { u[i] }).collect();
            let en = energy(&un);
            if en < e {
                u = un;
                e = en;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if iterations >= cfg.max_iters && kkt > tol_abs {
        flags.max_iters_exceeded = true;
    }
    // Report with the obstacle-path conventions: bounds are the mollified
    // obstacles on the working region.
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    let inside: Vec<bool> = (0..n).map(|i| free[i] || pinned[i]).collect();
    for i in 0..n {
        if inside[i] {
            lo[i] = obs.phi[i];
            hi[i] = obs.psi[i];
        }
    }
    Ok(Solution {
        grid,
        u,
        inside,
        lo,
        hi,
        energy: e,
        iterations,
        kkt_residual: kkt,
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Outside,
    Elastic,
    PlasticPlus,
    PlasticMinus,
}

/// Contact-set classification: `P+` where `u` touches the upper obstacle,
/// `P-` on the lower one.
pub fn classify_regions(sol: &Solution, tol: f64) -> Vec<Region> {
    let n = sol.u.len();
    let mut out = vec![Region::Outside; n];
    for i in 0..n {
        if !sol.inside[i] {
            continue;
        }
        out[i] = if sol.u[i] >= sol.hi[i] - tol {
            Region::PlasticPlus
        } else if sol.u[i] <= sol.lo[i] + tol {
            Region::PlasticMinus
        } else {
            Region::Elastic
        };
    }
    out
}

/// Centered-difference gradient at nodes whose four neighbors are usable
/// (inside nodes contribute their value, others contribute zero, matching
/// the continuous extension by zero outside the domain).
pub fn centered_gradient(sol: &Solution, i: usize, j: usize) -> Option<Vec2> {
    let g = &sol.grid;
    if i == 0 || j == 0 || i + 1 >= g.nx || j + 1 >= g.ny {
        return None;
    }
    let idx = g.idx(i, j);
    if !sol.inside[idx] {
        return None;
    }
    let val = |ii: usize, jj: usize| {
        let k = g.idx(ii, jj);
        if sol.inside[k] {
            sol.u[k]
        } else {
            0.0
        }
    };
    Some(v(
        (val(i + 1, j) - val(i - 1, j)) / (2.0 * g.hx()),
        (val(i, j + 1) - val(i, j - 1)) / (2.0 * g.hy()),
    ))
}

/// True when the full five-point stencil of (i, j) lies inside.
pub fn full_stencil(sol: &Solution, i: usize, j: usize) -> bool {
    let g = &sol.grid;
    if i == 0 || j == 0 || i + 1 >= g.nx || j + 1 >= g.ny {
        return false;
    }
    [
        g.idx(i, j),
        g.idx(i - 1, j),
        g.idx(i + 1, j),
        g.idx(i, j - 1),
        g.idx(i, j + 1),
    ]
    .iter()
    .all(|&k| sol.inside[k])
}

/// Discrete Euler-Lagrange residual `-div(DF(Du)) + g'(u)` at a full-stencil
/// node.
pub fn el_residual(sol: &Solution, fun: &Functional, i: usize, j: usize) -> Option<f64> {
    if !full_stencil(sol, i, j) {
        return None;
    }
    let g = &sol.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let (a11, a12, a22) = fun.f.coeffs();
    let u = |ii: usize, jj: usize| sol.u[g.idx(ii, jj)];
    let uxx = (u(i + 1, j) - 2.0 * u(i, j) + u(i - 1, j)) / (hx * hx);
    let uyy = (u(i, j + 1) - 2.0 * u(i, j) + u(i, j - 1)) / (hy * hy);
    let uxy = if i >= 1 && j >= 1 && i + 1 < g.nx && j + 1 < g.ny && a12 != 0.0 {
        (u(i + 1, j + 1) - u(i + 1, j - 1) - u(i - 1, j + 1) + u(i - 1, j - 1)) / (4.0 * hx * hy)
    } else {
        0.0
    };
    Some(-(a11 * uxx + 2.0 * a12 * uxy + a22 * uyy) + fun.g.d1(sol.u[g.idx(i, j)]))
}

/// One stage of the smoothing pipeline.
pub struct PipelineStage {
    pub k: u32,
    pub body: ConvexBody,
    pub solution: Solution,
    /// Support-function sup-distance from the stage body to the original.
    pub hausdorff: f64,
}

pub struct PipelineResult {
    pub stages: Vec<PipelineStage>,
    /// Sup-norm differences between consecutive stage solutions.
    pub sup_diffs: Vec<f64>,
    /// Final audit: max of the original polar gauge of the discrete gradient.
    pub final_max_polar_gauge: f64,
}

/// Replace a nonsmooth body by its smooth outer approximations `B_1..B_kmax`
/// and solve the double-obstacle problem for each, auditing the original
/// gradient constraint on the last stage.
pub fn smoothing_pipeline(
    domain: &Domain,
    body: &ConvexBody,
    grid: Grid,
    fun: &Functional,
    cfg: &SolverCfg,
    k_max: u32,
    opts: &DistanceOpts,
) -> Result<PipelineResult, SolverError> {
    let disc = Discretization::build(domain, grid);
    let mut stages: Vec<PipelineStage> = Vec::new();
    let mut sup_diffs = Vec::new();
    for k in 1..=k_max {
        let bk = body.smooth_approximation(k)?;
        let field = crate::distance::sample_field(domain, &bk, grid, opts);
        let sol = solve_double_obstacle(&disc, fun, &field, cfg)?;
        let hausdorff = bk.hausdorff_distance(body);
        if let Some(prev) = stages.last() {
            let mut d = 0.0f64;
            for i in 0..sol.u.len() {
                if sol.inside[i] {
                    d = d.max((sol.u[i] - prev.solution.u[i]).abs());
                }
            }
            sup_diffs.push(d);
        }
        stages.push(PipelineStage { k, body: bk, solution: sol, hausdorff });
    }
    let last = &stages.last().expect("k_max >= 1").solution;
    let mut audit = 0.0f64;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if !full_stencil(last, i, j) {
                continue;
            }
            if let Some(z) = centered_gradient(last, i, j) {
                if z != Vec2::ZERO {
                    audit = audit.max(body.polar_gauge(z));
                }
            }
        }
    }
    Ok(PipelineResult { stages, sup_diffs, final_max_polar_gauge: audit })
}

/// Midpoint-quadrature energy with centered differences, for reporting.
pub fn report_energy(sol: &Solution, fun: &Functional) -> f64 {
    let g = &sol.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut e = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let idx = g.idx(i, j);
            if !sol.inside[idx] {
                continue;
            }
            if let Some(z) = centered_gradient(sol, i, j) {
                e += (fun.f.eval(z) + fun.g.eval(sol.u[idx])) * hx * hy;
            }
        }
    }
    e
}

/// Sup-norm difference of two solutions over cells interior to both.
pub fn sup_diff(a: &Solution, b: &Solution) -> f64 {
    assert_eq!(a.u.len(), b.u.len());
    let mut d = 0.0f64;
    for i in 0..a.u.len() {
        if a.inside[i] && b.inside[i] {
            d = d.max((a.u[i] - b.u[i]).abs());
        }
    }
    d
}

/// Count of plastic cells (either obstacle active) for summaries.
pub fn plastic_cell_count(sol: &Solution, tol: f64) -> usize {
    classify_regions(sol, tol)
        .iter()
        .filter(|r| matches!(r, Region::PlasticPlus | Region::PlasticMinus))
        .count()
}

/// Max of `polar_gauge(D_h u)` over full-stencil cells.
pub fn max_gauge_of_gradient(sol: &Solution, body: &ConvexBody) -> f64 {
    let g = &sol.grid;
    let mut m = 0.0f64;
    for j in 0..g.ny {
        for i in 0..g.nx {
            if !full_stencil(sol, i, j) {
                continue;
            }
            if let Some(z) = centered_gradient(sol, i, j) {
                if z != Vec2::ZERO {
                    m = m.max(body.polar_gauge(z));
                }
            }
        }
    }
    m
}

/// Dual plasticity indicator: `polar_gauge(D_h u) >= 1 - tol` at full-stencil
/// cells; `None` where the stencil leaves the domain.
pub fn dual_plastic(sol: &Solution, body: &ConvexBody, tol: f64) -> Vec<Option<bool>> {
    let g = &sol.grid;
    let mut out = vec![None; g.len()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            if !full_stencil(sol, i, j) {
                continue;
            }
            if let Some(z) = centered_gradient(sol, i, j) {
                let pg = if z == Vec2::ZERO { 0.0 } else { body.polar_gauge(z) };
                out[g.idx(i, j)] = Some(pg >= 1.0 - tol);
            }
        }
    }
    out
}
