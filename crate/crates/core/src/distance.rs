//! Anisotropic distance to the domain boundary, measured by the gauge of a
//! convex body: `dist(x) = min over boundary y of gauge(x - y)`.
//!
//! The reverse distance uses the reflected body `-K`. Derivatives follow the
//! closest-point formulas: with hit `y`, inward normal `nu` and boundary
//! curvature `kappa`,
//!
//! * `D dist = nu / polar_gauge(nu)`,
//! * `lap dist = -kappa |nu|^3 |D polar_gauge(nu)|^2
//!               / (polar_gauge(nu)^3 (1 - kappa_K dist))`,
//! * `D^2 dist = lap dist * zeta zetaᵀ` with `zeta` a unit vector
//!   perpendicular to `x - y`.
//!
//! They are valid off the ridge (the set where the closest point is not
//! unique or `kappa_K(y) dist = 1`). Inside the shadow fan of a strictly
//! reentrant corner `y`, the distance is exactly `gauge(. - y)` and its
//! derivatives are used directly; on the fan's edge rays the distance is only
//! C^1,1 and the Hessian is refused. Polygonal gauges support values and
//! closest points but no derivatives.

use crate::body::{BodyError, ConvexBody};
use crate::domain::{BoundaryFrame, CornerClass, Domain, DomainError, Location};
use crate::geom::{wrap_angle, SymMat2, Vec2};
use crate::grid::Grid;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DistanceError {
    #[error("point is outside the domain")]
    OutsideDomain,
    #[error("closest boundary point is not unique (ridge of multiplicity)")]
    MultiplicityRidge,
    #[error("curvature ridge: 1 - kappa_K * dist vanishes")]
    OnRidge,
    #[error("closest point is a corner without a shadow fan")]
    CornerHit,
    #[error("point lies on a shadow-fan edge ray; distance is only C^1,1 here")]
    OnFanBoundary,
    #[error("derivatives of the distance need a smooth strictly convex body")]
    PolygonalBody,
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy)]
pub enum Site {
    Arc { arc: usize, t: f64 },
    Corner { corner: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct Hit {
    pub point: Vec2,
    pub site: Site,
}

#[derive(Debug, Clone)]
pub struct ClosestPoints {
    pub distance: f64,
    pub hits: Vec<Hit>,
}

impl ClosestPoints {
    pub fn multiplicity(&self) -> usize {
        self.hits.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DistanceOpts {
    /// Uniform seeds per arc for the closest-point search.
    pub seeds: usize,
    /// Hits within `tol_val_rel * diam` of the minimum count as ties.
    pub tol_val_rel: f64,
    /// Tied hits closer than `cluster_rel * diam` merge into one.
    pub cluster_rel: f64,
    /// |1 - kappa_K d| below this labels a cell as curvature ridge.
    pub ridge_band: f64,
}

impl Default for DistanceOpts {
    fn default() -> DistanceOpts {
        DistanceOpts { seeds: 32, tol_val_rel: 1e-8, cluster_rel: 1e-6, ridge_band: 1e-3 }
    }
}

fn domain_diam(domain: &Domain) -> f64 {
    let b = domain.bbox;
    (b[1] - b[0]).hypot(b[3] - b[2])
}

struct Candidate {
    value: f64,
    point: Vec2,
    site: Site,
}

/// Closest boundary points of `x` in the gauge of `body`, over every arc and
/// corner. Each arc is scanned with uniform seeds; local minima are refined
/// by golden section (derivative-free, so polygonal gauges work too).
pub fn closest_points(
    domain: &Domain,
    body: &ConvexBody,
    x: Vec2,
    opts: &DistanceOpts,
) -> ClosestPoints {
    let diam = domain_diam(domain);
    let mut cands: Vec<Candidate> = Vec::new();
    for (arc_id, arc) in domain.arcs.iter().enumerate() {
        let s = opts.seeds;
        let mut fv = Vec::with_capacity(s);
        for i in 0..s {
            let t = (i as f64 + 0.5) / s as f64;
            fv.push((t, body.gauge(x - arc.point(t))));
        }
        for i in 0..s {
            let here = fv[i].1;
            let left = if i == 0 { f64::INFINITY } else { fv[i - 1].1 };
            let right = if i + 1 == s { f64::INFINITY } else { fv[i + 1].1 };
            if here <= left && here <= right {
                let lo = if i == 0 { 0.0 } else { fv[i - 1].0 };
                let hi = if i + 1 == s { 1.0 } else { fv[i + 1].0 };
                let mut t = golden_min(|t| body.gauge(x - arc.point(t)), lo, hi);
                t = polish_min(body, arc, x, t, lo, hi);
                cands.push(Candidate {
                    value: body.gauge(x - arc.point(t)),
                    point: arc.point(t),
                    site: Site::Arc { arc: arc_id, t },
                });
            }
        }
    }
    for (ci, corner) in domain.corners.iter().enumerate() {
        // Flat joins (tangent arcs) are smooth boundary points; the arc
        // minimizers already cover them.
        if matches!(corner.class, CornerClass::NonstrictReentrant) {
            continue;
        }
        cands.push(Candidate {
            value: body.gauge(x - corner.point),
            point: corner.point,
            site: Site::Corner { corner: ci },
        });
    }
    let dmin = cands.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    let tol = opts.tol_val_rel * diam;
    let cluster = opts.cluster_rel * diam;
    let mut tied: Vec<Candidate> =
        cands.into_iter().filter(|c| c.value <= dmin + tol).collect();
    // Corners win ties inside a cluster so the fan logic sees them.
    tied.sort_by_key(|c| match c.site {
        Site::Corner { .. } => 0,
        Site::Arc { .. } => 1,
    });
    let mut hits: Vec<Hit> = Vec::new();
    for c in tied {
        if hits.iter().all(|h| h.point.dist(c.point) > cluster) {
            hits.push(Hit { point: c.point, site: c.site });
        }
    }
    ClosestPoints { distance: dmin, hits }
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const R: f64 = 0.381_966_011_250_105;
    let mut m1 = lo + R * (hi - lo);
    let mut m2 = hi - R * (hi - lo);
    let mut f1 = f(m1);
    let mut f2 = f(m2);
    for _ in 0..75 {
        if f1 < f2 {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = lo + R * (hi - lo);
            f1 = f(m1);
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = hi - R * (hi - lo);
            f2 = f(m2);
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Golden section only resolves the minimizer to about sqrt(eps) because it
/// compares nearly equal values on the flat bottom. For differentiable
/// gauges, bisecting the sign of `d/dt gauge(x - y(t))` recovers full
/// precision; polygonal gauges keep the golden result.
fn polish_min(
    body: &ConvexBody,
    arc: &crate::domain::BoundaryArc,
    x: Vec2,
    t: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    if body.is_polygon() {
        return t;
    }
    let slope = |t: f64| -> Option<f64> {
        let (y, dy, _) = arc.eval(t);
        let g = body.grad_gauge(x - y).ok()?;
        Some(-g.dot(dy))
    };
    // Bracket a sign change around t inside [lo, hi].
    let mut w = 1e-7 * (hi - lo);
    let (mut a, mut b) = (t, t);
    let (mut sa, mut sb) = (0.0, 0.0);
    for _ in 0..30 {
        a = (t - w).max(lo);
        b = (t + w).min(hi);
        let (va, vb) = match (slope(a), slope(b)) {
            (Some(va), Some(vb)) => (va, vb),
            _ => return t,
        };
        if va < 0.0 && vb > 0.0 {
            sa = va;
            sb = vb;
            break;
        }
        if a <= lo && b >= hi {
            return t; // boundary minimum or no interior sign change
        }
        w *= 4.0;
    }
    if !(sa < 0.0 && sb > 0.0) {
        return t;
    }
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let vm = match slope(m) {
            Some(vm) => vm,
            None => return t,
        };
        if vm < 0.0 {
            a = m;
            sa = vm;
        } else {
            b = m;
            sb = vm;
        }
        if b - a <= f64::EPSILON * (1.0 + m.abs()) {
            break;
        }
    }
    let _ = (sa, sb);
    0.5 * (a + b)
}

/// `dist(x)` for `x` inside the domain.
pub fn distance(
    domain: &Domain,
    body: &ConvexBody,
    x: Vec2,
    opts: &DistanceOpts,
) -> Result<f64, DistanceError> {
    match domain.contains(x, 0.0) {
        Location::Outside => Err(DistanceError::OutsideDomain),
        _ => Ok(closest_points(domain, body, x, opts).distance),
    }
}

/// `min over boundary of gauge(x - y)` without the interior restriction;
/// well defined on the whole plane and used to extend obstacle fields.
pub fn boundary_gauge_distance(
    domain: &Domain,
    body: &ConvexBody,
    x: Vec2,
    opts: &DistanceOpts,
) -> f64 {
    closest_points(domain, body, x, opts).distance
}

struct HitFrame {
    frame: BoundaryFrame,
    arc: usize,
    t: f64,
}

fn unique_hit_frame(
    domain: &Domain,
    cp: &ClosestPoints,
) -> Result<Result<HitFrame, usize>, DistanceError> {
    if cp.multiplicity() != 1 {
        return Err(DistanceError::MultiplicityRidge);
    }
    match cp.hits[0].site {
        Site::Corner { corner } => Ok(Err(corner)),
        Site::Arc { arc, t } => {
            if t < 1e-9 || t > 1.0 - 1e-9 {
                // Converged onto a junction that the corner candidate missed.
                let corner = domain.corners.iter().position(|c| {
                    !matches!(c.class, CornerClass::NonstrictReentrant)
                        && c.point.dist(cp.hits[0].point) < 1e-9 * domain_diam(domain)
                });
                if let Some(ci) = corner {
                    return Ok(Err(ci));
                }
            }
            let frame = domain.boundary_frame(arc, t.clamp(1e-9, 1.0 - 1e-9))?;
            Ok(Ok(HitFrame { frame, arc, t }))
        }
    }
}

/// Inside the shadow fan of a strictly reentrant corner, classify the ray
/// direction: interior of the fan, one of its edge rays, or outside.
enum FanPosition {
    Interior,
    Edge,
    Outside,
}

fn fan_position(
    domain: &Domain,
    body: &ConvexBody,
    corner: usize,
    z: Vec2,
) -> Result<FanPosition, DistanceError> {
    let c = &domain.corners[corner];
    let (_, din, _) = domain.arcs[c.arc_in].eval(1.0);
    let (_, dout, _) = domain.arcs[c.arc_out].eval(0.0);
    let u_in = body.grad_polar_gauge(din.perp())?;
    let u_out = body.grad_polar_gauge(dout.perp())?;
    // At a reentrant corner the one-sided normals rotate clockwise from the
    // incoming side to the outgoing side; the fan is the cone swept between
    // the corresponding K-normal directions.
    let a_in = u_in.angle();
    let span = wrap_angle(a_in - u_out.angle());
    let off = wrap_angle(a_in - z.angle());
    const EDGE_TOL: f64 = 1e-7;
    if off <= EDGE_TOL || off >= std::f64::consts::TAU - EDGE_TOL || (off - span).abs() <= EDGE_TOL
    {
        Ok(FanPosition::Edge)
    } else if off < span {
        Ok(FanPosition::Interior)
    } else {
        Ok(FanPosition::Outside)
    }
}

fn require_smooth(body: &ConvexBody) -> Result<(), DistanceError> {
    if body.is_polygon() {
        Err(DistanceError::PolygonalBody)
    } else {
        Ok(())
    }
}

/// Gradient of the distance at `x` (inside, off the ridge).
pub fn grad_distance(
    domain: &Domain,
    body: &ConvexBody,
    x: Vec2,
    opts: &DistanceOpts,
) -> Result<Vec2, DistanceError> {
    require_smooth(body)?;
    if domain.contains(x, 0.0) == Location::Outside {
        return Err(DistanceError::OutsideDomain);
    }
    let cp = closest_points(domain, body, x, opts);
    match unique_hit_frame(domain, &cp)? {
        Ok(hf) => {
            let nu = hf.frame.normal;
            Ok(nu / body.polar_gauge(nu))
        }
        Err(ci) => {
            let c = &domain.corners[ci];
            if c.class != CornerClass::StrictReentrant {
                return Err(DistanceError::CornerHit);
            }
            let z = x - c.point;
            match fan_position(domain, body, ci, z)? {
                FanPosition::Interior => Ok(body.grad_gauge(z)?),
                FanPosition::Edge => Err(DistanceError::OnFanBoundary),
                FanPosition::Outside => Err(DistanceError::CornerHit),
            }
        }
    }
}

/// `1 - kappa_K(y(x)) dist(x)`; positive off the ridge, zero on the
/// curvature ridge.
pub fn ridge_residual(
    domain: &Domain,
    body: &ConvexBody,
    x: Vec2,
    opts: &DistanceOpts,
) -> Result<f64, DistanceError> {
    require_smooth(body)?;
    if domain.contains(x, 0.0) == Location::Outside {
        return Err(DistanceError::OutsideDomain);
    }
    let cp = closest_points(domain, body, x, opts);
    if cp.multiplicity() > 1 {
        return Err(DistanceError::MultiplicityRidge);
    }
    match unique_hit_frame(domain, &cp)? {
        Ok(hf) => {
            let kk = domain.k_curvature(body, hf.arc, hf.t.clamp(1e-9, 1.0 - 1e-9))?;
            Ok(1.0 - kk * cp.distance)
        }
        // A corner hit has no one-sided curvature condition in its fan.
        Err(_) => Ok(1.0),
    }
}

/// Laplacian of the distance at `x`.
pub fn laplacian_distance(
    domain: &Domain,
    body: &ConvexBody,
    x: Vec2,
    opts: &DistanceOpts,
) -> Result<f64, DistanceError> {
    hess_distance(domain, body, x, opts).map(|h| h.trace())
}

/// Hessian of the distance at `x`: rank one along the level-set tangent.
pub fn hess_distance(
    domain: &Domain,
    body: &ConvexBody,
    x: Vec2,
    opts: &DistanceOpts,
) -> Result<SymMat2, DistanceError> {
    require_smooth(body)?;
    if domain.contains(x, 0.0) == Location::Outside {
        return Err(DistanceError::OutsideDomain);
    }
    let cp = closest_points(domain, body, x, opts);
    match unique_hit_frame(domain, &cp)? {
        Ok(hf) => {
            let t = hf.t.clamp(1e-9, 1.0 - 1e-9);
            let nu = hf.frame.normal;
            let kappa = hf.frame.curvature;
            let kk = domain.k_curvature(body, hf.arc, t)?;
            let res = 1.0 - kk * cp.distance;
            if res <= 1e-9 {
                return Err(DistanceError::OnRidge);
            }
            let pg = body.polar_gauge(nu);
            let dpg = body.grad_polar_gauge(nu)?;
            let lap = -kappa * nu.norm().powi(3) * dpg.norm2() / (pg.powi(3) * res);
            let zeta = dpg.perp().unit();
            Ok(SymMat2::outer(zeta, lap))
        }
        Err(ci) => {
            let c = &domain.corners[ci];
            if c.class != CornerClass::StrictReentrant {
                return Err(DistanceError::CornerHit);
            }
            let z = x - c.point;
            match fan_position(domain, body, ci, z)? {
                FanPosition::Interior => Ok(body.hess_gauge(z)?),
                FanPosition::Edge => Err(DistanceError::OnFanBoundary),
                FanPosition::Outside => Err(DistanceError::CornerHit),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellLabel {
    Outside,
    Boundary,
    OffRidge,
    CurvatureRidge,
    MultiplicityRidge,
}

impl CellLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CellLabel::Outside => "outside",
            CellLabel::Boundary => "boundary",
            CellLabel::OffRidge => "off_ridge",
            CellLabel::CurvatureRidge => "curvature_ridge",
            CellLabel::MultiplicityRidge => "multiplicity_ridge",
        }
    }
}

#[derive(Clone)]
pub struct DistanceField {
    pub grid: Grid,
    /// Forward distance (gauge of K) and reverse distance (gauge of -K),
    /// evaluated on every cell center including exterior ones.
    pub d: Vec<f64>,
    pub dbar: Vec<f64>,
    pub label: Vec<CellLabel>,
}

impl DistanceField {
    pub fn is_inside(&self, idx: usize) -> bool {
        !matches!(self.label[idx], CellLabel::Outside | CellLabel::Boundary)
    }
}

/// Sample forward/reverse distances and ridge labels on a grid. Exterior and
/// boundary-band cells keep their (unrestricted) boundary distances but are
/// labeled accordingly.
pub fn sample_field(
    domain: &Domain,
    body: &ConvexBody,
    grid: Grid,
    opts: &DistanceOpts,
) -> DistanceField {
    let reflected = body.reflect();
    let n = grid.len();
    let mut d = vec![0.0; n];
    let mut dbar = vec![0.0; n];
    let mut label = vec![CellLabel::Outside; n];
    let diam = domain_diam(domain);
    let band = 1e-9 * diam;
    let smooth = !body.is_polygon();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.idx(i, j);
            let x = grid.node(i, j);
            let cp = closest_points(domain, body, x, opts);
            d[idx] = cp.distance;
            dbar[idx] = closest_points(domain, &reflected, x, opts).distance;
            let loc = domain.contains(x, band);
            label[idx] = match loc {
                Location::Outside => CellLabel::Outside,
                Location::Boundary => CellLabel::Boundary,
                Location::Inside => {
                    if cp.multiplicity() > 1 {
                        CellLabel::MultiplicityRidge
                    } else if smooth {
                        match unique_hit_frame(domain, &cp) {
                            Ok(Ok(hf)) => {
                                let t = hf.t.clamp(1e-9, 1.0 - 1e-9);
                                match domain.k_curvature(body, hf.arc, t) {
                                    Ok(kk) if (1.0 - kk * cp.distance).abs() <= opts.ridge_band => {
                                        CellLabel::CurvatureRidge
                                    }
                                    _ => CellLabel::OffRidge,
                                }
                            }
                            _ => CellLabel::OffRidge,
                        }
                    } else {
                        CellLabel::OffRidge
                    }
                }
            };
        }
    }
    DistanceField { grid, d, dbar, label }
}

/// Write a distance field as CSV with a `# nx ny xmin xmax ymin ymax` header.
pub fn write_field_csv<W: std::io::Write>(
    field: &DistanceField,
    mut w: W,
) -> std::io::Result<()> {
    let g = &field.grid;
    writeln!(
        w,
        "# {} {} {:.17e} {:.17e} {:.17e} {:.17e}",
        g.nx, g.ny, g.bbox[0], g.bbox[1], g.bbox[2], g.bbox[3]
    )?;
    writeln!(w, "i,j,x,y,d,dbar,label")?;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let idx = g.idx(i, j);
            let p = g.node(i, j);
            writeln!(
                w,
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                i,
                j,
                p.x,
                p.y,
                field.d[idx],
                field.dbar[idx],
                field.label[idx].as_str()
            )?;
        }
    }
    Ok(())
}
