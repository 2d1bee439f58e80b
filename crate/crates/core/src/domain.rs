//! Bounded planar domains with piecewise C^2 boundary.
//!
//! The boundary is a set of closed loops of parametrized arcs, each arc
//! mapped from t in [0, 1]. The outer loop runs counterclockwise and holes
//! run clockwise, so the (unnormalized) inward normal is always
//! `nu = tangent.perp()`. Signed curvature is taken with respect to that
//! normal: positive where the boundary curves away from the domain (a disk
//! has curvature +1 on its boundary), matching `kappa = cross(y', y'') / |y'|^3`
//! for the stored orientation.
//!
//! Arc junctions are recorded as corners with their interior opening angle;
//! smooth (tangent) joins appear with opening angle pi.

use std::f64::consts::{PI, TAU};
use std::sync::Arc as StdArc;

use crate::body::{near_degenerate, BodyError, ConvexBody};
use crate::geom::{v, Vec2};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DomainError {
    #[error("invalid domain: {0}")]
    Invalid(String),
    #[error("arc endpoints are corner points; frames are one-sided there")]
    CornerPoint,
    #[error("gauge error: {0}")]
    Body(#[from] BodyError),
}

pub trait ParamCurve: Send + Sync {
    /// Position, first and second derivative at parameter t in [0, 1].
    fn eval(&self, t: f64) -> (Vec2, Vec2, Vec2);
}

#[derive(Clone)]
pub enum ArcKind {
    Segment { p0: Vec2, p1: Vec2 },
    /// Angles in radians; traversed from `a0` to `a1`, so `a1 < a0` gives a
    /// clockwise arc.
    Circular { center: Vec2, radius: f64, a0: f64, a1: f64 },
    Parametric(StdArc<dyn ParamCurve>),
}

#[derive(Clone)]
pub struct BoundaryArc {
    pub kind: ArcKind,
}

impl BoundaryArc {
    pub fn segment(p0: Vec2, p1: Vec2) -> BoundaryArc {
        BoundaryArc { kind: ArcKind::Segment { p0, p1 } }
    }

    pub fn circular(center: Vec2, radius: f64, a0: f64, a1: f64) -> BoundaryArc {
        BoundaryArc { kind: ArcKind::Circular { center, radius, a0, a1 } }
    }

    pub fn eval(&self, t: f64) -> (Vec2, Vec2, Vec2) {
        match &self.kind {
            ArcKind::Segment { p0, p1 } => (*p0 + t * (*p1 - *p0), *p1 - *p0, Vec2::ZERO),
            ArcKind::Circular { center, radius, a0, a1 } => {
                let w = a1 - a0;
                let th = a0 + w * t;
                let u = Vec2::from_angle(th);
                (*center + *radius * u, *radius * w * u.perp(), -*radius * w * w * u)
            }
            ArcKind::Parametric(c) => c.eval(t),
        }
    }

    pub fn point(&self, t: f64) -> Vec2 {
        self.eval(t).0
    }

    pub fn is_segment(&self) -> bool {
        matches!(self.kind, ArcKind::Segment { .. })
    }

    /// Euclidean distance from `x` to this arc (used for boundary bands and
    /// containment, not for the anisotropic distance).
    pub fn euclid_distance(&self, x: Vec2) -> f64 {
        match &self.kind {
            ArcKind::Segment { p0, p1 } => {
                let d = *p1 - *p0;
                let t = ((x - *p0).dot(d) / d.norm2()).clamp(0.0, 1.0);
                (x - (*p0 + t * d)).norm()
            }
            ArcKind::Circular { center, radius, a0, a1 } => {
                let rel = x - *center;
                let ang = rel.angle();
                // Is the angle inside the traversed sector?
                let (lo, hi) = if a0 <= a1 { (*a0, *a1) } else { (*a1, *a0) };
                let mut a = ang;
                while a < lo {
                    a += TAU;
                }
                if a <= hi {
                    (rel.norm() - radius).abs()
                } else {
                    let e0 = x.dist(self.point(0.0));
                    let e1 = x.dist(self.point(1.0));
                    e0.min(e1)
                }
            }
            ArcKind::Parametric(_) => {
                let mut best = f64::INFINITY;
                let mut bt = 0.0;
                const M: usize = 64;
                for i in 0..=M {
                    let t = i as f64 / M as f64;
                    let d = x.dist(self.point(t));
                    if d < best {
                        best = d;
                        bt = t;
                    }
                }
                let (mut lo, mut hi) = ((bt - 1.0 / M as f64).max(0.0), (bt + 1.0 / M as f64).min(1.0));
                for _ in 0..60 {
                    let m1 = lo + (hi - lo) * 0.381966;
                    let m2 = hi - (hi - lo) * 0.381966;
                    if x.dist(self.point(m1)) < x.dist(self.point(m2)) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                x.dist(self.point(0.5 * (lo + hi)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerClass {
    Nonreentrant,
    NonstrictReentrant,
    StrictReentrant,
}

#[derive(Clone)]
pub struct Corner {
    pub point: Vec2,
    /// Global arc indices: the arc ending here and the arc starting here.
    pub arc_in: usize,
    pub arc_out: usize,
    /// Interior opening angle in (0, 2pi); pi at a smooth join.
    pub opening_angle: f64,
    pub class: CornerClass,
}

const CORNER_ANGLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside,
    Outside,
    Boundary,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundaryFrame {
    pub point: Vec2,
    /// Inward normal `(-y2', y1')`, not normalized.
    pub normal: Vec2,
    pub curvature: f64,
}

pub struct Domain {
    pub arcs: Vec<BoundaryArc>,
    /// Arc indices of each loop, in traversal order.
    pub loops: Vec<Vec<usize>>,
    pub corners: Vec<Corner>,
    pub bbox: [f64; 4], // xmin, xmax, ymin, ymax
}

impl Domain {
    pub fn new(loop_arcs: Vec<Vec<BoundaryArc>>) -> Result<Domain, DomainError> {
        if loop_arcs.is_empty() || loop_arcs.iter().any(|l| l.is_empty()) {
            return Err(DomainError::Invalid("domain needs at least one nonempty loop".into()));
        }
        let mut arcs = Vec::new();
        let mut loops = Vec::new();
        for la in loop_arcs {
            let base = arcs.len();
            loops.push((base..base + la.len()).collect::<Vec<_>>());
            arcs.extend(la);
        }
        let bbox = compute_bbox(&arcs);
        let scale = (bbox[1] - bbox[0]).hypot(bbox[3] - bbox[2]);
        // Loop closure.
        for lp in &loops {
            let n = lp.len();
            for i in 0..n {
                let a = &arcs[lp[i]];
                let b = &arcs[lp[(i + 1) % n]];
                if a.point(1.0).dist(b.point(0.0)) > 1e-9 * scale {
                    return Err(DomainError::Invalid("loop is not closed".into()));
                }
            }
        }
        let corners = build_corners(&arcs, &loops);
        let dom = Domain { arcs, loops, corners, bbox };
        dom.validate_orientation(scale)?;
        Ok(dom)
    }

    fn validate_orientation(&self, scale: f64) -> Result<(), DomainError> {
        for lp in &self.loops {
            let arc = &self.arcs[lp[0]];
            let (y, dy, _) = arc.eval(0.5);
            let nu = dy.perp();
            if nu.norm() == 0.0 {
                return Err(DomainError::Invalid("degenerate arc".into()));
            }
            let mut eps = 1e-3 * scale;
            let mut ok = false;
            for _ in 0..12 {
                match self.contains(y + eps * nu.unit(), 0.0) {
                    Location::Inside => {
                        ok = true;
                        break;
                    }
                    _ => eps *= 0.5,
                }
            }
            if !ok {
                return Err(DomainError::Invalid(
                    "loop orientation is wrong (inward normal probe left the domain)".into(),
                ));
            }
        }
        Ok(())
    }

    /// Euclidean distance from `x` to the boundary.
    pub fn boundary_euclid_distance(&self, x: Vec2) -> f64 {
        self.arcs.iter().map(|a| a.euclid_distance(x)).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: Vec2, boundary_tol: f64) -> Location {
        if boundary_tol > 0.0 && self.boundary_euclid_distance(x) <= boundary_tol {
            return Location::Boundary;
        }
        let mut winding = 0.0;
        for arc in &self.arcs {
            winding += arc_winding(arc, x, 0.0, 1.0, 0);
        }
        if (winding / TAU).round().abs() >= 1.0 {
            Location::Inside
        } else {
            Location::Outside
        }
    }

    pub fn boundary_frame(&self, arc_id: usize, t: f64) -> Result<BoundaryFrame, DomainError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(DomainError::Invalid("arc parameter out of range".into()));
        }
        if t < 1e-12 || t > 1.0 - 1e-12 {
            return Err(DomainError::CornerPoint);
        }
        let (y, dy, d2y) = self.arcs[arc_id].eval(t);
        let speed = dy.norm();
        Ok(BoundaryFrame {
            point: y,
            normal: dy.perp(),
            curvature: dy.cross(d2y) / (speed * speed * speed),
        })
    }

    /// `K`-normal direction at a boundary point: `D polar_gauge(nu)`.
    pub fn k_normal(&self, body: &ConvexBody, arc_id: usize, t: f64) -> Result<Vec2, DomainError> {
        let f = self.boundary_frame(arc_id, t)?;
        Ok(body.grad_polar_gauge(f.normal)?)
    }

    /// Anisotropic curvature `kappa_K = kappa * r_K(nu)`; identically zero on
    /// segments regardless of the body.
    pub fn k_curvature(
        &self,
        body: &ConvexBody,
        arc_id: usize,
        t: f64,
    ) -> Result<f64, DomainError> {
        if self.arcs[arc_id].is_segment() {
            // Frame still validates the parameter.
            self.boundary_frame(arc_id, t)?;
            return Ok(0.0);
        }
        let f = self.boundary_frame(arc_id, t)?;
        let r = body.curvature_radius(f.normal)?;
        if !r.is_finite() {
            return Err(DomainError::Body(BodyError::CurvatureDegenerate));
        }
        Ok(f.curvature * r)
    }

    /// Same value through the Hessian route:
    /// `(1/|nu|) <D^2 polar_gauge(nu) dnu/ds, nu_perp>` along the arc.
    pub fn k_curvature_hess_route(
        &self,
        body: &ConvexBody,
        arc_id: usize,
        t: f64,
    ) -> Result<f64, DomainError> {
        if self.arcs[arc_id].is_segment() {
            self.boundary_frame(arc_id, t)?;
            return Ok(0.0);
        }
        let f = self.boundary_frame(arc_id, t)?;
        let (_, dy, d2y) = self.arcs[arc_id].eval(t);
        // Reparametrize to arc length: nu' here is d(nu)/ds.
        let speed = dy.norm();
        let dnu = d2y.perp() / speed;
        let h = body.hess_polar_gauge(f.normal)?;
        Ok(h.quad(dnu, f.normal.perp()) / f.normal.norm())
    }

    /// Directions where a non-segment arc's normal falls on a degenerate
    /// normal of the body; the anisotropic curvature is unavailable there.
    pub fn degenerate_contacts(&self, body: &ConvexBody, samples: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (i, arc) in self.arcs.iter().enumerate() {
            if arc.is_segment() {
                continue;
            }
            for s in 1..samples {
                let t = s as f64 / samples as f64;
                let (_, dy, _) = arc.eval(t);
                if near_degenerate(body, dy.perp(), 1e-9) {
                    out.push((i, t));
                }
            }
        }
        out
    }
}

fn compute_bbox(arcs: &[BoundaryArc]) -> [f64; 4] {
    let mut bb = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    let mut feed = |p: Vec2| {
        bb[0] = bb[0].min(p.x);
        bb[1] = bb[1].max(p.x);
        bb[2] = bb[2].min(p.y);
        bb[3] = bb[3].max(p.y);
    };
    for arc in arcs {
        match &arc.kind {
            ArcKind::Segment { p0, p1 } => {
                feed(*p0);
                feed(*p1);
            }
            ArcKind::Circular { center, radius, a0, a1 } => {
                feed(arc.point(0.0));
                feed(arc.point(1.0));
                let (lo, hi) = if a0 <= a1 { (*a0, *a1) } else { (*a1, *a0) };
                let mut a = (lo / (PI / 2.0)).ceil() * (PI / 2.0);
                while a <= hi {
                    feed(*center + *radius * Vec2::from_angle(a));
                    a += PI / 2.0;
                }
            }
            ArcKind::Parametric(_) => {
                for i in 0..=256 {
                    feed(arc.point(i as f64 / 256.0));
                }
            }
        }
    }
    bb
}

fn build_corners(arcs: &[BoundaryArc], loops: &[Vec<usize>]) -> Vec<Corner> {
    let mut corners = Vec::new();
    for lp in loops {
        let n = lp.len();
        for i in 0..n {
            let ia = lp[i];
            let ib = lp[(i + 1) % n];
            let (_, din, _) = arcs[ia].eval(1.0);
            let (p, dout, _) = arcs[ib].eval(0.0);
            let turn = din.cross(dout).atan2(din.dot(dout));
            let opening = PI - turn;
            let class = if opening < PI - CORNER_ANGLE_TOL {
                CornerClass::Nonreentrant
            } else if opening > PI + CORNER_ANGLE_TOL {
                CornerClass::StrictReentrant
            } else {
                CornerClass::NonstrictReentrant
            };
            corners.push(Corner { point: p, arc_in: ia, arc_out: ib, opening_angle: opening, class });
        }
    }
    corners
}

/// Signed angle swept by `y(t) - x` over [t0, t1], subdividing until each
/// step turns by less than ~0.4 pi.
fn arc_winding(arc: &BoundaryArc, x: Vec2, t0: f64, t1: f64, depth: u32) -> f64 {
    const STEPS: usize = 8;
    let mut total = 0.0;
    let mut prev = arc.point(t0) - x;
    for i in 1..=STEPS {
        let t = t0 + (t1 - t0) * i as f64 / STEPS as f64;
        let cur = arc.point(t) - x;
        let d = cur.angle() - prev.angle();
        let d = if d > PI {
            d - TAU
        } else if d < -PI {
            d + TAU
        } else {
            d
        };
        if d.abs() > 0.4 * PI && depth < 24 {
            let s0 = t0 + (t1 - t0) * (i - 1) as f64 / STEPS as f64;
            total += arc_winding(arc, x, s0, t, depth + 1);
        } else {
            total += d;
        }
        prev = cur;
    }
    total
}

/// Disk domain of the given radius about the origin (boundary CCW).
pub fn disk_domain(radius: f64) -> Domain {
    Domain::new(vec![vec![BoundaryArc::circular(Vec2::ZERO, radius, 0.0, TAU)]]).unwrap()
}

/// Axis-aligned rectangle, CCW.
pub fn rectangle_domain(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Domain {
    let (a, b, c, d) = (v(xmin, ymin), v(xmax, ymin), v(xmax, ymax), v(xmin, ymax));
    Domain::new(vec![vec![
        BoundaryArc::segment(a, b),
        BoundaryArc::segment(b, c),
        BoundaryArc::segment(c, d),
        BoundaryArc::segment(d, a),
    ]])
    .unwrap()
}

/// Annulus sector between radii `r_in < r_out` and angles `a0 < a1`, with the
/// four right-angle corners rounded by tangent fillets of radius `fillet`.
/// The result is nonconvex (the inner arc curves away from the domain) with a
/// C^1 boundary of circular arcs and segments.
pub fn annulus_sector_domain(
    r_in: f64,
    r_out: f64,
    a0: f64,
    a1: f64,
    fillet: f64,
) -> Result<Domain, DomainError> {
    if !(0.0 < r_in && r_in < r_out && a0 < a1 && fillet > 0.0) {
        return Err(DomainError::Invalid("annulus sector parameters out of order".into()));
    }
    let f = fillet;
    if f >= (r_out - r_in) / 2.0 {
        return Err(DomainError::Invalid("fillet too large for the annulus width".into()));
    }
    let pho = (f / (r_out - f)).asin();
    let phi = (f / (r_in + f)).asin();
    if a1 - a0 <= 2.0 * pho.max(phi) {
        return Err(DomainError::Invalid("fillet too large for the sector angle".into()));
    }
    let u = Vec2::from_angle;
    let co1 = (r_out - f) * u(a1 - pho);
    let ci1 = (r_in + f) * u(a1 - phi);
    let ci0 = (r_in + f) * u(a0 + phi);
    let co0 = (r_out - f) * u(a0 + pho);
    let seg_hi = (r_out - f) * pho.cos();
    let seg_lo = (r_in + f) * phi.cos();
    let arcs = vec![
        BoundaryArc::circular(Vec2::ZERO, r_out, a0 + pho, a1 - pho),
        BoundaryArc::circular(co1, f, a1 - pho, a1 + PI / 2.0),
        BoundaryArc::segment(seg_hi * u(a1), seg_lo * u(a1)),
        BoundaryArc::circular(ci1, f, a1 + PI / 2.0, a1 + PI - phi),
        BoundaryArc::circular(Vec2::ZERO, r_in, a1 - phi, a0 + phi),
        BoundaryArc::circular(ci0, f, a0 + phi - PI, a0 - PI / 2.0),
        BoundaryArc::segment(seg_lo * u(a0), seg_hi * u(a0)),
        BoundaryArc::circular(co0, f, a0 - PI / 2.0, a0 + pho),
    ];
    Domain::new(vec![arcs])
}
