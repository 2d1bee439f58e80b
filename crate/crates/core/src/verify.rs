//! Verification checks: gauge identities, distance-field consistency against
//! finite differences, and the structural properties of constrained
//! minimizers (variational inequality, contact-set signs, segment
//! plasticity, ridge separation, curvature bounds). Each check reports a
//! measured value against its threshold; a report serializes to JSON.

use serde::Serialize;

use crate::body::ConvexBody;
use crate::distance::{
    self, grad_distance, hess_distance, CellLabel, DistanceField, DistanceOpts,
};
use crate::domain::Domain;
use crate::geom::Vec2;
use crate::solver::{
    classify_regions, dual_plastic, el_residual, full_stencil, Functional,
    Region, Solution,
};

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub measured: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn bounded(name: &str, measured: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            status: if measured <= threshold { Status::Pass } else { Status::Fail },
            measured,
            threshold,
            detail: None,
        }
    }

    pub fn at_least(name: &str, measured: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            status: if measured >= threshold { Status::Pass } else { Status::Fail },
            measured,
            threshold,
            detail: None,
        }
    }

    pub fn skipped(name: &str, why: &str) -> Check {
        Check {
            name: name.into(),
            status: Status::Skipped,
            measured: f64::NAN,
            threshold: f64::NAN,
            detail: Some(why.into()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Report {
    pub fn new(checks: Vec<Check>) -> Report {
        let passed = checks.iter().all(|c| c.status != Status::Fail);
        Report { checks, passed }
    }
}

/// Deterministic low-discrepancy points in the annulus 0.2 <= |x| <= 2.
fn sample_points(n: usize, seed: u64) -> Vec<Vec2> {
    // Weyl sequence; no RNG dependency needed in the library.
    let mut pts = Vec::with_capacity(n);
    let (mut a, mut b) = (0.5 + seed as f64 * 0.123, 0.25 + seed as f64 * 0.317);
    for _ in 0..n {
        a = (a + 0.754877666246693) % 1.0;
        b = (b + 0.569840290998053) % 1.0;
        let r = 0.2 + 1.8 * a;
        let t = std::f64::consts::TAU * b;
        pts.push(r * Vec2::from_angle(t));
    }
    pts
}

/// Identity suite for a smooth strictly convex (or p-ball) body: Euler
/// relations, gradient duality, the generalized Cauchy-Schwarz inequality,
/// homogeneity, and the polar Hessian kernel. Returns the max residual over
/// the sampled points.
pub fn check_gauge_identities(body: &ConvexBody, n: usize, seed: u64, tol: f64) -> Check {
    let mut worst = 0.0f64;
    let mut detail = None;
    for x in sample_points(n, seed) {
        let g = body.gauge(x);
        let pg = body.polar_gauge(x);
        let dg = match body.grad_gauge(x) {
            Ok(d) => d,
            Err(e) => return fail_with("gauge_identities", &format!("grad_gauge: {e}")),
        };
        let dpg = match body.grad_polar_gauge(x) {
            Ok(d) => d,
            Err(e) => return fail_with("gauge_identities", &format!("grad_polar_gauge: {e}")),
        };
        let mut push = |name: &str, r: f64| {
            if r > worst {
                worst = r;
                detail = Some(format!("worst: {name} at ({:.6}, {:.6})", x.x, x.y));
            }
        };
        // Euler relations and dual unit levels.
        push("euler_primal", (dg.dot(x) - g).abs() / g);
        push("euler_polar", (dpg.dot(x) - pg).abs() / pg);
        push("polar_of_grad", (body.polar_gauge(dg) - 1.0).abs());
        push("gauge_of_polar_grad", (body.gauge(dpg) - 1.0).abs());
        // Duality of gradients: D gauge(D polar_gauge(x)) = x / polar_gauge(x).
        if let Ok(dd) = body.grad_gauge(dpg) {
            push("grad_duality", (dd - x / pg).norm() * pg / x.norm());
        }
        // Generalized Cauchy-Schwarz: <x, y> <= gauge(x) polar_gauge(y).
        for y in sample_points(8, seed ^ 0x9e37) {
            let lhs = x.dot(y);
            let rhs = g * body.polar_gauge(y);
            push("cauchy_schwarz", ((lhs - rhs).max(0.0)) / rhs.abs().max(1e-300));
        }
        // Homogeneity: gauge(2x) = 2 gauge(x); polar Hessian degree -1.
        push("homogeneity", (body.gauge(2.0 * x) - 2.0 * g).abs() / g);
        if let (Ok(h1), Ok(h2)) = (body.hess_polar_gauge(x), body.hess_polar_gauge(2.0 * x)) {
            let s = h1.trace().abs().max(1e-300);
            push("hess_homogeneity", (h2.trace() - 0.5 * h1.trace()).abs() / s);
            // Kernel: D^2 polar_gauge(x) x = 0, and the nonzero eigenvalue is
            // nonnegative.
            push("hess_kernel", h1.apply(x).norm() / (s * x.norm()));
            let (emin, _) = h1.eigenvalues();
            push("hess_psd", (-emin).max(0.0) / s);
        }
    }
    let mut c = Check::bounded("gauge_identities", worst, tol);
    c.detail = detail;
    c
}

fn fail_with(name: &str, why: &str) -> Check {
    Check {
        name: name.into(),
        status: Status::Fail,
        measured: f64::NAN,
        threshold: f64::NAN,
        detail: Some(why.into()),
    }
}

/// Compare analytic distance derivatives against centered finite differences
/// at interior sample points; returns the worst relative error.
pub fn check_distance_derivatives(
    domain: &Domain,
    body: &ConvexBody,
    pts: &[Vec2],
    fd_step: f64,
    tol: f64,
) -> Check {
    let opts = DistanceOpts::default();
    let mut worst = 0.0f64;
    let mut used = 0;
    for &x in pts {
        let (g, h) = match (grad_distance(domain, body, x, &opts), hess_distance(domain, body, x, &opts)) {
            (Ok(g), Ok(h)) => (g, h),
            _ => continue,
        };
        used += 1;
        let d = |p: Vec2| distance::boundary_gauge_distance(domain, body, p, &opts);
        let e = fd_step;
        let gx = (d(x + Vec2 { x: e, y: 0.0 }) - d(x - Vec2 { x: e, y: 0.0 })) / (2.0 * e);
        let gy = (d(x + Vec2 { x: 0.0, y: e }) - d(x - Vec2 { x: 0.0, y: e })) / (2.0 * e);
        let ge = ((g.x - gx).powi(2) + (g.y - gy).powi(2)).sqrt() / g.norm().max(1e-300);
        worst = worst.max(ge);
        let lap_fd = (d(x + Vec2 { x: e, y: 0.0 })
            + d(x - Vec2 { x: e, y: 0.0 })
            + d(x + Vec2 { x: 0.0, y: e })
            + d(x - Vec2 { x: 0.0, y: e })
            - 4.0 * d(x))
            / (e * e);
        let lap = h.trace();
        worst = worst.max((lap - lap_fd).abs() / lap.abs().max(1.0));
    }
    if used == 0 {
        return Check::skipped("distance_derivatives", "no usable sample points");
    }
    Check::bounded("distance_derivatives", worst, tol)
}

/// Discrete variational inequality: `<grad J(u), v - u> >= -tol` for random
/// box-feasible `v`. Returns the most negative pairing found.
pub fn check_variational_inequality(
    disc: &crate::solver::Discretization,
    fun: &Functional,
    sol: &Solution,
    n_trials: usize,
    seed: u64,
    tol: f64,
) -> Check {
    let n = sol.u.len();
    let mut g = vec![0.0; n];
    disc.grad(fun, &sol.u, &mut g);
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut worst = 0.0f64;
    for _ in 0..n_trials {
        let mut pairing = 0.0;
        for i in 0..n {
            if !sol.inside[i] {
                continue;
            }
            let t = next();
            let v = sol.lo[i] + t * (sol.hi[i] - sol.lo[i]);
            pairing += g[i] * (v - sol.u[i]);
        }
        worst = worst.min(pairing);
    }
    Check::at_least("variational_inequality", worst, -tol)
}

/// Sign of the Euler-Lagrange residual on the contact sets:
/// `<= tol` on P+ and `>= -tol` on P-. Measures the worst violation.
pub fn check_contact_signs(
    sol: &Solution,
    fun: &Functional,
    regions: &[Region],
    tol: f64,
) -> Check {
    let g = &sol.grid;
    let mut worst = 0.0f64;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let idx = g.idx(i, j);
            let r = match el_residual(sol, fun, i, j) {
                Some(r) => r,
                None => continue,
            };
            // Skip nodes whose stencil touches the other contact set; the
            // one-sided inequality only holds in the interior of each set.
            match regions[idx] {
                Region::PlasticPlus => worst = worst.max(r),
                Region::PlasticMinus => worst = worst.max(-r),
                _ => {}
            }
        }
    }
    Check::bounded("contact_sign", worst, tol)
}

/// Fraction of sampled points on segments `[x, y(x))` from plastic cells to
/// their closest boundary points that are themselves plastic.
pub fn check_segment_plasticity(
    domain: &Domain,
    body: &ConvexBody,
    sol: &Solution,
    regions: &[Region],
    max_cells: usize,
    tol_fraction: f64,
) -> Check {
    let g = &sol.grid;
    let opts = DistanceOpts::default();
    let mut total = 0usize;
    let mut plastic = 0usize;
    let mut seen = 0usize;
    let stride = 7usize;
    let mut count = 0usize;
    'outer: for j in (1..g.ny - 1).step_by(1) {
        for i in (1..g.nx - 1).step_by(1) {
            let idx = g.idx(i, j);
            if regions[idx] != Region::PlasticPlus {
                continue;
            }
            seen += 1;
            if seen % stride != 0 {
                continue;
            }
            count += 1;
            if count > max_cells {
                break 'outer;
            }
            let x = g.node(i, j);
            let cp = distance::closest_points(domain, body, x, &opts);
            if cp.multiplicity() != 1 {
                continue;
            }
            let y = cp.hits[0].point;
            let step = 0.5 * g.hx().min(g.hy());
            let len = x.dist(y);
            let m = (len / step).floor() as usize;
            for s in 1..m {
                let p = x + (s as f64 / m as f64) * (y - x);
                let ii = ((p.x - g.bbox[0]) / g.hx() - 0.5).round() as i64;
                let jj = ((p.y - g.bbox[2]) / g.hy() - 0.5).round() as i64;
                if ii < 0 || jj < 0 || ii as usize >= g.nx || jj as usize >= g.ny {
                    continue;
                }
                let cidx = g.idx(ii as usize, jj as usize);
                if !sol.inside[cidx] {
                    continue;
                }
                total += 1;
                if regions[cidx] == Region::PlasticPlus {
                    plastic += 1;
                }
            }
        }
    }
    if total == 0 {
        return Check::skipped("segment_plasticity", "no plastic cells sampled");
    }
    Check::at_least("segment_plasticity", plastic as f64 / total as f64, tol_fraction)
}

/// Ridge cells must stay clear of the upper contact set; measures the
/// minimal Chebyshev cell distance (capped at `min_gap + 1`).
pub fn check_ridge_gap(
    field: &DistanceField,
    regions: &[Region],
    min_gap: usize,
) -> Check {
    let g = &field.grid;
    let cap = min_gap + 1;
    let mut best = cap;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let idx = g.idx(i, j);
            if !matches!(
                field.label[idx],
                CellLabel::CurvatureRidge | CellLabel::MultiplicityRidge
            ) {
                continue;
            }
            let r = cap.min(min_gap + 1);
            let lo_i = i.saturating_sub(r);
            let lo_j = j.saturating_sub(r);
            for jj in lo_j..(j + r + 1).min(g.ny) {
                for ii in lo_i..(i + r + 1).min(g.nx) {
                    if regions[g.idx(ii, jj)] == Region::PlasticPlus {
                        let cheb = (ii as i64 - i as i64).abs().max((jj as i64 - j as i64).abs());
                        best = best.min(cheb as usize);
                    }
                }
            }
        }
    }
    Check::at_least("ridge_gap_cells", best as f64, min_gap as f64)
}

/// Gradient constraint audit: `polar_gauge(D_h u) <= 1 + slack`.
pub fn check_gradient_constraint(
    sol: &Solution,
    body: &ConvexBody,
    slack: f64,
) -> Check {
    Check::bounded(
        "gradient_constraint",
        crate::solver::max_gauge_of_gradient(sol, body),
        1.0 + slack,
    )
}

/// Lipschitz constant of functions with gradient in K°: the Euclidean norm
/// bound `max { |z| : z in K° }`.
pub fn lipschitz_bound(body: &ConvexBody) -> f64 {
    const N: usize = 2048;
    let mut m = 0.0f64;
    for i in 0..N {
        let u = Vec2::from_angle(i as f64 * std::f64::consts::TAU / N as f64);
        // Radial extent of K° in direction u is 1 / polar_gauge... of the
        // primal body's support: gauge_{K°}(u) = polar_gauge_K(u).
        m = m.max(1.0 / body.polar_gauge(u));
    }
    m
}

/// Symmetric difference between the primal contact set and the dual set
/// `{polar_gauge(D_h u) >= 1 - tol}`, as a fraction of their union; only
/// full-stencil cells participate.
pub fn check_primal_dual_plasticity(
    sol: &Solution,
    body: &ConvexBody,
    regions: &[Region],
    dual_tol: f64,
    max_fraction: f64,
) -> Check {
    let dual = dual_plastic(sol, body, dual_tol);
    let mut sym = 0usize;
    let mut union = 0usize;
    for idx in 0..sol.u.len() {
        let d = match dual[idx] {
            Some(d) => d,
            None => continue,
        };
        let p = matches!(regions[idx], Region::PlasticPlus | Region::PlasticMinus);
        if p || d {
            union += 1;
            if p != d {
                sym += 1;
            }
        }
    }
    if union == 0 {
        return Check::skipped("primal_dual_plasticity", "no plastic cells");
    }
    Check::bounded("primal_dual_plasticity", sym as f64 / union as f64, max_fraction)
}

/// Max absolute second centered differences over cells at Euclidean distance
/// at least `margin` from the boundary.
pub fn second_difference_sup(sol: &Solution, domain: &Domain, margin: f64) -> f64 {
    let g = &sol.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut m = 0.0f64;
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            if !full_stencil(sol, i, j) {
                continue;
            }
            let x = g.node(i, j);
            if domain.boundary_euclid_distance(x) < margin {
                continue;
            }
            let u = |ii: usize, jj: usize| sol.u[g.idx(ii, jj)];
            let uxx = (u(i + 1, j) - 2.0 * u(i, j) + u(i - 1, j)) / (hx * hx);
            let uyy = (u(i, j + 1) - 2.0 * u(i, j) + u(i, j - 1)) / (hy * hy);
            let uxy = (u(i + 1, j + 1) - u(i + 1, j - 1) - u(i - 1, j + 1) + u(i - 1, j - 1))
                / (4.0 * hx * hy);
            m = m.max(uxx.abs()).max(uyy.abs()).max(uxy.abs());
        }
    }
    m
}

/// Ratio test across a refinement sequence: interior second differences stay
/// bounded (C^1,1 regularity), ratios at most `max_ratio`.
pub fn check_w2inf(
    sols: &[&Solution],
    domain: &Domain,
    margin: f64,
    max_ratio: f64,
) -> Check {
    if sols.len() < 2 {
        return Check::skipped("w2inf_ratio", "need at least two refinement levels");
    }
    let sups: Vec<f64> = sols.iter().map(|s| second_difference_sup(s, domain, margin)).collect();
    let mut worst = 0.0f64;
    for w in sups.windows(2) {
        worst = worst.max(w[1] / w[0].max(1e-300));
    }
    let mut c = Check::bounded("w2inf_ratio", worst, max_ratio);
    c.detail = Some(format!("sups: {sups:?}"));
    c
}

/// Standard post-solve report for a problem.
#[allow(clippy::too_many_arguments)]
pub fn solution_report(
    domain: &Domain,
    body: &ConvexBody,
    disc: &crate::solver::Discretization,
    fun: &Functional,
    sol: &Solution,
    field: &DistanceField,
    contact_tol: f64,
    sign_tol: f64,
) -> Report {
    let regions = classify_regions(sol, contact_tol);
    let h = sol.grid.hx().max(sol.grid.hy());
    let lip = lipschitz_bound(body);
    let mut checks = vec![
        check_variational_inequality(disc, fun, sol, 20, 7, 1e-8),
        check_contact_signs(sol, fun, &regions, sign_tol),
        check_gradient_constraint(sol, body, 4.0 * h * lip),
        check_primal_dual_plasticity(sol, body, &regions, 0.05, 0.05),
        check_ridge_gap(field, &regions, 2),
    ];
    if !body.is_polygon() {
        checks.push(check_segment_plasticity(domain, body, sol, &regions, 50, 0.99));
    }
    Report::new(checks)
}
