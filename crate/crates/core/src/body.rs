//! Convex bodies in the plane and their gauge calculus.
//!
//! A body `K` is convex, compact, with the origin in its interior. It carries
//! the Minkowski gauge `gauge(x) = inf { s > 0 : x in s K }` and the polar
//! gauge `polar_gauge(x) = sup { <x, y> : y in K }`, which is the gauge of the
//! polar body `K°`. Three representations are supported:
//!
//! * `Polygon`: vertices in counterclockwise order. Gauges are exact maxima
//!   of linear functionals; derivatives are piecewise constant and fail on
//!   the rays through vertices (primal) and edge-normal directions (polar).
//! * `Smooth`: an analytic radial profile `rho(t)` with two derivatives, so
//!   that the boundary is `rho(t) (cos t, sin t)`. Primal derivatives come
//!   from `gauge(x) = |x| / rho(angle(x))`; polar quantities go through the
//!   inverse Gauss map, found by a guarded Newton iteration on the boundary
//!   parameter.
//! * `Sampled`: tabulated radial and support profiles on uniform periodic
//!   grids, produced by `smooth_approximation`. Both primal and polar sides
//!   evaluate in O(1) by cubic Hermite interpolation.
//!
//! Degenerate directions (where the boundary curvature vanishes, e.g. the
//! axis points of `p_ball(p)` for p > 2) are recorded at construction and
//! make the polar Hessian unavailable.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use crate::geom::{angle_dist, v, wrap_angle, SymMat2, Vec2};

pub const ALIGN_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BodyError {
    #[error("invalid body: {0}")]
    Invalid(String),
    #[error("gauge derivatives are undefined at the zero vector")]
    ZeroVector,
    #[error("gauge is not differentiable on a vertex ray")]
    NondifferentiablePoint,
    #[error("normal direction is shared by a whole edge; midpoint {midpoint:?}")]
    AmbiguousNormal { midpoint: Vec2 },
    #[error("boundary curvature degenerates in this direction")]
    CurvatureDegenerate,
    #[error("inverse Gauss map did not converge")]
    GaussMapDiverged,
}

/// Radial profile of a smooth boundary: `eval(t)` returns `(rho, rho', rho'')`.
pub trait RadialProfile: Send + Sync {
    fn eval(&self, theta: f64) -> (f64, f64, f64);
}

#[derive(Debug, Clone)]
struct DiskProfile {
    r: f64,
}

impl RadialProfile for DiskProfile {
    fn eval(&self, _t: f64) -> (f64, f64, f64) {
        (self.r, 0.0, 0.0)
    }
}

#[derive(Debug, Clone)]
struct EllipseProfile {
    a: f64,
    b: f64,
}

impl RadialProfile for EllipseProfile {
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let (a2, b2) = (self.a * self.a, self.b * self.b);
        let s = t.sin();
        let q = b2 + (a2 - b2) * s * s;
        let dq = (a2 - b2) * (2.0 * t).sin();
        let d2q = 2.0 * (a2 - b2) * (2.0 * t).cos();
        let ab = self.a * self.b;
        let rho = ab / q.sqrt();
        let drho = -0.5 * ab * q.powf(-1.5) * dq;
        let d2rho = ab * (0.75 * q.powf(-2.5) * dq * dq - 0.5 * q.powf(-1.5) * d2q);
        (rho, drho, d2rho)
    }
}

#[derive(Debug, Clone)]
struct PBallProfile {
    p: f64,
}

impl RadialProfile for PBallProfile {
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let p = self.p;
        let (c, s) = (t.cos(), t.sin());
        let (ca, sa) = (c.abs(), s.abs());
        let m = ca.powf(p) + sa.powf(p);
        // Grouped so that no 0 * inf appears at the axes. For p < 2 the
        // second derivative genuinely blows up there (curvature degenerates);
        // the infinity propagates to a zero curvature radius downstream.
        let (sp1, cp1) = (sa.powf(p - 1.0), ca.powf(p - 1.0));
        let (sp2, cp2) = (sa.powf(p - 2.0), ca.powf(p - 2.0));
        let dm = p * (c * s.signum() * sp1 - s * c.signum() * cp1);
        let d2m = p * ((p - 1.0) * c * c * sp2 + (p - 1.0) * s * s * cp2 - m);
        let e = -1.0 / p;
        let rho = m.powf(e);
        let drho = e * m.powf(e - 1.0) * dm;
        let d2rho = e * (e - 1.0) * m.powf(e - 2.0) * dm * dm + e * m.powf(e - 1.0) * d2m;
        (rho, drho, d2rho)
    }
}

/// `rho(t + pi)`: profile of the reflection `-K`.
struct ReflectedProfile {
    inner: Arc<dyn RadialProfile>,
}

impl RadialProfile for ReflectedProfile {
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        self.inner.eval(t + PI)
    }
}

/// Periodic table of a function with first and second derivative samples on a
/// uniform grid over [0, 2pi). Values and first derivatives interpolate by
/// cubic Hermite; second derivatives linearly.
#[derive(Debug, Clone)]
pub struct TableProfile {
    n: usize,
    step: f64,
    val: Vec<f64>,
    dval: Vec<f64>,
    d2val: Vec<f64>,
}

impl TableProfile {
    pub fn new(val: Vec<f64>, dval: Vec<f64>, d2val: Vec<f64>) -> TableProfile {
        let n = val.len();
        assert!(n >= 8 && dval.len() == n && d2val.len() == n);
        TableProfile { n, step: TAU / n as f64, val, dval, d2val }
    }

    fn locate(&self, t: f64) -> (usize, usize, f64) {
        let u = wrap_angle(t) / self.step;
        let mut i = u as usize;
        if i >= self.n {
            i = self.n - 1;
        }
        (i, (i + 1) % self.n, u - i as f64)
    }

    fn hermite(&self, a: &[f64], da: &[f64], t: f64) -> f64 {
        let (i, j, s) = self.locate(t);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * a[i] + h01 * a[j] + self.step * (h10 * da[i] + h11 * da[j])
    }

    fn linear(&self, a: &[f64], t: f64) -> f64 {
        let (i, j, s) = self.locate(t);
        (1.0 - s) * a[i] + s * a[j]
    }
}

impl RadialProfile for TableProfile {
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        (
            self.hermite(&self.val, &self.dval, t),
            self.hermite(&self.dval, &self.d2val, t),
            self.linear(&self.d2val, t),
        )
    }
}

#[derive(Clone)]
pub enum BodyKind {
    Polygon(Polygon),
    Smooth(Smooth),
    Sampled(Sampled),
}

#[derive(Debug, Clone)]
pub struct Polygon {
    pub vertices: Vec<Vec2>,
    /// Outward edge normals (unnormalized) and support values; edge i runs
    /// from vertex i to vertex i+1.
    normals: Vec<Vec2>,
    supports: Vec<f64>,
}

#[derive(Clone)]
pub struct Smooth {
    profile: Arc<dyn RadialProfile>,
}

#[derive(Clone)]
pub struct Sampled {
    rho: Arc<TableProfile>,
    sup: Arc<TableProfile>,
}

#[derive(Clone)]
pub struct ConvexBody {
    pub kind: BodyKind,
    /// `(c_lower, c_upper)` with `c_lower |x| <= gauge(x) <= c_upper |x|`.
    pub gauge_bounds: (f64, f64),
    /// Unit directions where the boundary curvature vanishes.
    pub degenerate_normals: Vec<Vec2>,
    diameter: f64,
}

/// Value, gradient and polar Hessian of the gauge pair at a point.
#[derive(Debug, Clone, Copy)]
pub struct GaugeJet {
    pub value: f64,
    pub grad: Vec2,
    pub polar_hess: SymMat2,
}

/// Result of the inverse Gauss map on a smooth boundary.
struct SupportPoint {
    point: Vec2,
    /// Radius of curvature of the boundary there (may be infinite).
    curv_radius: f64,
}

fn profile_curv_radius(rho: f64, drho: f64, d2rho: f64) -> f64 {
    let den = rho * rho + 2.0 * drho * drho - rho * d2rho;
    let scale = rho * rho + drho * drho;
    if den.abs() < 1e-12 * scale {
        f64::INFINITY
    } else {
        scale.powf(1.5) / den
    }
}

impl Smooth {
    fn boundary(&self, t: f64) -> Vec2 {
        let (rho, _, _) = self.profile.eval(t);
        rho * Vec2::from_angle(t)
    }

    /// Maximize `<u, boundary(t)>`; the maximizer is the boundary point whose
    /// outward normal is `u`. Guarded Newton with a bisection fallback on the
    /// derivative sign; tolerance 1e-12 on the normal-alignment residual.
    fn support_point(&self, u: Vec2) -> Result<SupportPoint, BodyError> {
        let deriv = |t: f64| -> (f64, f64, Vec2) {
            let (rho, drho, d2rho) = self.profile.eval(t);
            let e = Vec2::from_angle(t);
            let ep = e.perp();
            let y1 = drho * e + rho * ep;
            let y2 = (d2rho - rho) * e + 2.0 * drho * ep;
            (u.dot(y1), u.dot(y2), y1)
        };
        const M: usize = 64;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..M {
            let t = i as f64 * TAU / M as f64;
            let g = u.dot(self.boundary(t));
            if g > best.0 {
                best = (g, t);
            }
        }
        let half = TAU / M as f64;
        let (mut lo, mut hi) = (best.1 - half, best.1 + half);
        // At a strict max of the support the derivative decreases through 0.
        let mut t = best.1;
        for _ in 0..200 {
            let (s, ds, y1) = deriv(t);
            let speed = y1.norm();
            if speed > 0.0 && (s / speed).abs() <= ALIGN_TOL {
                let (rho, drho, d2rho) = self.profile.eval(t);
                return Ok(SupportPoint {
                    point: self.boundary(t),
                    curv_radius: profile_curv_radius(rho, drho, d2rho),
                });
            }
            if s > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let newton_ok = ds < 0.0;
            let mut tn = if newton_ok { t - s / ds } else { f64::NAN };
            if !newton_ok || !(tn > lo && tn < hi) {
                tn = 0.5 * (lo + hi);
            }
            if (tn - t).abs() < 1e-16 {
                t = 0.5 * (lo + hi);
            } else {
                t = tn;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        let (s, _, y1) = deriv(t);
        // Accept a looser residual, or a maximizer bracketed down to machine
        // precision: near curvature blowups (e.g. p < 2 gauges at the axes)
        // the alignment residual is ill-conditioned even though the point
        // itself is resolved to an ulp.
        if (s / y1.norm()).abs() <= 1e-9 || hi - lo <= 8.0 * f64::EPSILON * (1.0 + t.abs()) {
            let (rho, drho, d2rho) = self.profile.eval(t);
            return Ok(SupportPoint {
                point: self.boundary(t),
                curv_radius: profile_curv_radius(rho, drho, d2rho),
            });
        }
        Err(BodyError::GaussMapDiverged)
    }
}

/// Radial profile of the polar body of a smooth body: `1 / support(t)`,
/// with derivatives through the inverse Gauss map.
struct PolarProfile {
    inner: Smooth,
}

impl RadialProfile for PolarProfile {
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let u = Vec2::from_angle(t);
        let sp = self.inner.support_point(u).expect("inverse Gauss map failed");
        let h = u.dot(sp.point);
        let dh = u.perp().dot(sp.point);
        let d2h = sp.curv_radius - h;
        let rho = 1.0 / h;
        let drho = -dh / (h * h);
        let d2rho = (2.0 * dh * dh - h * d2h) / (h * h * h);
        (rho, drho, d2rho)
    }
}

impl Polygon {
    fn new(vertices: Vec<Vec2>) -> Result<Polygon, BodyError> {
        if vertices.len() < 3 {
            return Err(BodyError::Invalid("polygon needs at least 3 vertices".into()));
        }
        let n = vertices.len();
        let scale = vertices.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let mut normals = Vec::with_capacity(n);
        let mut supports = Vec::with_capacity(n);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let e = b - a;
            let f = vertices[(i + 2) % n] - b;
            if e.cross(f) <= 1e-12 * scale * scale {
                return Err(BodyError::Invalid(
                    "vertices must be strictly convex in counterclockwise order".into(),
                ));
            }
            let nrm = v(e.y, -e.x); // outward for CCW order
            let h = nrm.dot(a);
            if h <= 1e-12 * scale * scale {
                return Err(BodyError::Invalid("origin must lie strictly inside".into()));
            }
            normals.push(nrm);
            supports.push(h);
        }
        Ok(Polygon { vertices, normals, supports })
    }

    fn gauge(&self, x: Vec2) -> f64 {
        self.normals
            .iter()
            .zip(&self.supports)
            .map(|(n, h)| n.dot(x) / h)
            .fold(0.0, f64::max)
    }

    fn grad_gauge(&self, x: Vec2) -> Result<Vec2, BodyError> {
        let (mut best, mut second, mut arg) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
        for (i, (n, h)) in self.normals.iter().zip(&self.supports).enumerate() {
            let t = n.dot(x) / h;
            if t > best {
                second = best;
                best = t;
                arg = i;
            } else if t > second {
                second = t;
            }
        }
        if best - second <= 1e-10 * best.abs().max(1e-300) {
            return Err(BodyError::NondifferentiablePoint);
        }
        Ok(self.normals[arg] / self.supports[arg])
    }

    fn polar_gauge(&self, x: Vec2) -> f64 {
        self.vertices.iter().map(|w| w.dot(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn grad_polar(&self, x: Vec2) -> Result<Vec2, BodyError> {
        let (mut best, mut second, mut arg, mut arg2) =
            (f64::NEG_INFINITY, f64::NEG_INFINITY, 0, 0);
        for (i, w) in self.vertices.iter().enumerate() {
            let t = w.dot(x);
            if t > best {
                second = best;
                arg2 = arg;
                best = t;
                arg = i;
            } else if t > second {
                second = t;
                arg2 = i;
            }
        }
        if best - second <= 1e-10 * best.abs().max(1e-300) {
            let midpoint = 0.5 * (self.vertices[arg] + self.vertices[arg2]);
            return Err(BodyError::AmbiguousNormal { midpoint });
        }
        Ok(self.vertices[arg])
    }
}

impl ConvexBody {
    pub fn polygon(vertices: Vec<Vec2>) -> Result<ConvexBody, BodyError> {
        let poly = Polygon::new(vertices)?;
        let c_lower = 1.0 / poly.vertices.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let c_upper = poly
            .normals
            .iter()
            .zip(&poly.supports)
            .map(|(n, h)| n.norm() / h)
            .fold(0.0, f64::max);
        let degenerate = poly.normals.iter().map(|n| n.unit()).collect();
        let body = ConvexBody {
            kind: BodyKind::Polygon(poly),
            gauge_bounds: (c_lower, c_upper),
            degenerate_normals: degenerate,
            diameter: 0.0,
        };
        Ok(body.with_diameter())
    }

    pub fn smooth(profile: Arc<dyn RadialProfile>) -> Result<ConvexBody, BodyError> {
        Self::smooth_with(profile, Vec::new())
    }

    fn smooth_with(
        profile: Arc<dyn RadialProfile>,
        degenerate: Vec<Vec2>,
    ) -> Result<ConvexBody, BodyError> {
        const N: usize = 4096;
        let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..N {
            let t = i as f64 * TAU / N as f64;
            let (rho, drho, d2rho) = profile.eval(t);
            if !(rho > 0.0) {
                return Err(BodyError::Invalid("radial profile must be positive".into()));
            }
            if rho * rho + 2.0 * drho * drho - rho * d2rho < -1e-9 * rho * rho {
                return Err(BodyError::Invalid("radial profile is not convex".into()));
            }
            rmin = rmin.min(rho);
            rmax = rmax.max(rho);
        }
        let body = ConvexBody {
            kind: BodyKind::Smooth(Smooth { profile }),
            gauge_bounds: (1.0 / rmax, 1.0 / rmin),
            degenerate_normals: degenerate,
            diameter: 0.0,
        };
        Ok(body.with_diameter())
    }

    pub fn disk(r: f64) -> ConvexBody {
        assert!(r > 0.0);
        let mut b = Self::smooth(Arc::new(DiskProfile { r })).unwrap();
        b.gauge_bounds = (1.0 / r, 1.0 / r);
        b
    }

    pub fn ellipse(a: f64, b: f64) -> ConvexBody {
        assert!(a > 0.0 && b > 0.0);
        let mut body = Self::smooth(Arc::new(EllipseProfile { a, b })).unwrap();
        body.gauge_bounds = (1.0 / a.max(b), 1.0 / a.min(b));
        body
    }

    /// Unit ball of the p-norm, p > 1. For p > 2 the boundary curvature
    /// vanishes at the four axis points.
    pub fn p_ball(p: f64) -> ConvexBody {
        assert!(p > 1.0, "p_ball needs p > 1");
        let degenerate = if p > 2.0 {
            vec![v(1.0, 0.0), v(0.0, 1.0), v(-1.0, 0.0), v(0.0, -1.0)]
        } else {
            Vec::new()
        };
        Self::smooth_with(Arc::new(PBallProfile { p }), degenerate).unwrap()
    }

    pub fn square(half_width: f64) -> ConvexBody {
        let w = half_width;
        Self::polygon(vec![v(w, w), v(-w, w), v(-w, -w), v(w, -w)]).unwrap()
    }

    fn with_diameter(mut self) -> ConvexBody {
        const N: usize = 1024;
        let mut d = 0.0f64;
        for i in 0..N {
            let u = Vec2::from_angle(i as f64 * PI / N as f64);
            d = d.max(self.polar_gauge(u) + self.polar_gauge(-u));
        }
        self.diameter = d;
        self
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn gauge(&self, x: Vec2) -> f64 {
        match &self.kind {
            BodyKind::Polygon(p) => p.gauge(x),
            BodyKind::Smooth(s) => {
                let r = x.norm();
                if r == 0.0 {
                    0.0
                } else {
                    r / s.profile.eval(x.angle()).0
                }
            }
            BodyKind::Sampled(s) => {
                let r = x.norm();
                if r == 0.0 {
                    0.0
                } else {
                    r / s.rho.eval(x.angle()).0
                }
            }
        }
    }

    pub fn polar_gauge(&self, x: Vec2) -> f64 {
        match &self.kind {
            BodyKind::Polygon(p) => p.polar_gauge(x),
            BodyKind::Smooth(s) => {
                let r = x.norm();
                if r == 0.0 {
                    0.0
                } else {
                    x.dot(s.support_point(x / r).expect("inverse Gauss map failed").point)
                }
            }
            BodyKind::Sampled(s) => {
                let r = x.norm();
                if r == 0.0 {
                    0.0
                } else {
                    r * s.sup.eval(x.angle()).0
                }
            }
        }
    }

    fn smooth_grad(profile: &dyn RadialProfile, x: Vec2) -> Vec2 {
        let (rho, drho, _) = profile.eval(x.angle());
        let u = x.unit();
        u / rho - (drho / (rho * rho)) * u.perp()
    }

    pub fn grad_gauge(&self, x: Vec2) -> Result<Vec2, BodyError> {
        if x == Vec2::ZERO {
            return Err(BodyError::ZeroVector);
        }
        match &self.kind {
            BodyKind::Polygon(p) => p.grad_gauge(x),
            BodyKind::Smooth(s) => Ok(Self::smooth_grad(s.profile.as_ref(), x)),
            BodyKind::Sampled(s) => Ok(Self::smooth_grad(s.rho.as_ref(), x)),
        }
    }

    /// Inverse Gauss map composed with the radial projection: the boundary
    /// point of `K` whose outward normal is `x / |x|`.
    pub fn grad_polar_gauge(&self, x: Vec2) -> Result<Vec2, BodyError> {
        if x == Vec2::ZERO {
            return Err(BodyError::ZeroVector);
        }
        match &self.kind {
            BodyKind::Polygon(p) => p.grad_polar(x),
            BodyKind::Smooth(s) => Ok(s.support_point(x.unit())?.point),
            BodyKind::Sampled(s) => {
                let t = x.angle();
                let (h, dh, _) = s.sup.eval(t);
                let u = Vec2::from_angle(t);
                Ok(h * u + dh * u.perp())
            }
        }
    }

    /// `D^2 polar_gauge(x)`: rank-one, positive along `x_perp`, kernel `x`.
    pub fn hess_polar_gauge(&self, x: Vec2) -> Result<SymMat2, BodyError> {
        if x == Vec2::ZERO {
            return Err(BodyError::ZeroVector);
        }
        let r = x.norm();
        let u = x / r;
        match &self.kind {
            BodyKind::Polygon(p) => {
                p.grad_polar(x)?;
                Ok(SymMat2::ZERO)
            }
            BodyKind::Smooth(s) => {
                let sp = s.support_point(u)?;
                if !sp.curv_radius.is_finite() {
                    return Err(BodyError::CurvatureDegenerate);
                }
                Ok(SymMat2::outer(u.perp(), sp.curv_radius / r))
            }
            BodyKind::Sampled(s) => {
                let (h, _, d2h) = s.sup.eval(x.angle());
                Ok(SymMat2::outer(u.perp(), (h + d2h) / r))
            }
        }
    }

    /// Perpendicular eigenvalue of `D^2 gauge(x)`; the kernel is `x` itself.
    pub fn gauge_hess_eig(&self, x: Vec2) -> Result<f64, BodyError> {
        if x == Vec2::ZERO {
            return Err(BodyError::ZeroVector);
        }
        let profile: &dyn RadialProfile = match &self.kind {
            BodyKind::Polygon(_) => return Err(BodyError::NondifferentiablePoint),
            BodyKind::Smooth(s) => s.profile.as_ref(),
            BodyKind::Sampled(s) => s.rho.as_ref(),
        };
        let (rho, drho, d2rho) = profile.eval(x.angle());
        let s = x.norm();
        Ok((rho * rho + 2.0 * drho * drho - rho * d2rho) / (s * rho * rho * rho))
    }

    /// `D^2 gauge(x)` as a matrix.
    pub fn hess_gauge(&self, x: Vec2) -> Result<SymMat2, BodyError> {
        let lam = self.gauge_hess_eig(x)?;
        Ok(SymMat2::outer(x.unit().perp(), lam))
    }

    pub fn gauge_jet(&self, x: Vec2) -> Result<GaugeJet, BodyError> {
        Ok(GaugeJet {
            value: self.gauge(x),
            grad: self.grad_gauge(x)?,
            polar_hess: self.hess_polar_gauge(x)?,
        })
    }

    /// Radius of curvature of the boundary of `K` at the point with outward
    /// normal `u` (infinite where the curvature vanishes).
    pub fn curvature_radius(&self, u: Vec2) -> Result<f64, BodyError> {
        if u == Vec2::ZERO {
            return Err(BodyError::ZeroVector);
        }
        match &self.kind {
            BodyKind::Polygon(p) => {
                // Zero except along the finitely many edge normals.
                match p.grad_polar(u) {
                    Ok(_) => Ok(0.0),
                    Err(BodyError::AmbiguousNormal { .. }) => Ok(f64::INFINITY),
                    Err(e) => Err(e),
                }
            }
            BodyKind::Smooth(s) => Ok(s.support_point(u.unit())?.curv_radius),
            BodyKind::Sampled(s) => {
                let (h, _, d2h) = s.sup.eval(u.angle());
                Ok(h + d2h)
            }
        }
    }

    pub fn reflect(&self) -> ConvexBody {
        let kind = match &self.kind {
            BodyKind::Polygon(p) => {
                // Negation is a half turn, so the order stays counterclockwise.
                let vs: Vec<Vec2> = p.vertices.iter().map(|&w| -w).collect();
                BodyKind::Polygon(Polygon::new(vs).unwrap())
            }
            BodyKind::Smooth(s) => BodyKind::Smooth(Smooth {
                profile: Arc::new(ReflectedProfile { inner: s.profile.clone() }),
            }),
            BodyKind::Sampled(s) => BodyKind::Sampled(Sampled {
                rho: Arc::new(shift_half_turn(&s.rho)),
                sup: Arc::new(shift_half_turn(&s.sup)),
            }),
        };
        ConvexBody {
            kind,
            gauge_bounds: self.gauge_bounds,
            degenerate_normals: self.degenerate_normals.iter().map(|&u| -u).collect(),
            diameter: self.diameter,
        }
    }

    /// Polar body `K°`. Polygons dualize exactly (edges to vertices); smooth
    /// and sampled bodies return a smooth body whose radial profile is the
    /// reciprocal support function.
    pub fn polar_body(&self) -> ConvexBody {
        match &self.kind {
            BodyKind::Polygon(p) => {
                let vs = p
                    .normals
                    .iter()
                    .zip(&p.supports)
                    .map(|(n, h)| *n / *h)
                    .collect();
                ConvexBody::polygon(vs).unwrap()
            }
            BodyKind::Smooth(s) => {
                let profile = Arc::new(PolarProfile { inner: s.clone() });
                ConvexBody::smooth(profile).unwrap()
            }
            BodyKind::Sampled(s) => {
                let n = s.sup.n;
                let mut val = Vec::with_capacity(n);
                let mut dval = Vec::with_capacity(n);
                let mut d2val = Vec::with_capacity(n);
                for i in 0..n {
                    let (h, dh, d2h) = (s.sup.val[i], s.sup.dval[i], s.sup.d2val[i]);
                    val.push(1.0 / h);
                    dval.push(-dh / (h * h));
                    d2val.push((2.0 * dh * dh - h * d2h) / (h * h * h));
                }
                let profile = Arc::new(TableProfile::new(val, dval, d2val));
                ConvexBody::smooth(profile).unwrap()
            }
        }
    }

    pub fn is_polygon(&self) -> bool {
        matches!(self.kind, BodyKind::Polygon(_))
    }

    /// True when the boundary is C^2 with strictly positive curvature, so
    /// that all gauge derivatives are available everywhere.
    pub fn is_strictly_smooth(&self) -> bool {
        let profile: &dyn RadialProfile = match &self.kind {
            BodyKind::Polygon(_) => return false,
            BodyKind::Smooth(s) => s.profile.as_ref(),
            BodyKind::Sampled(s) => s.rho.as_ref(),
        };
        const N: usize = 2048;
        let mut kappa_min = f64::INFINITY;
        let mut scale = 0.0f64;
        for i in 0..N {
            let t = i as f64 * TAU / N as f64;
            let (rho, drho, d2rho) = profile.eval(t);
            scale = scale.max(rho);
            let den = rho * rho + 2.0 * drho * drho - rho * d2rho;
            kappa_min = kappa_min.min(den / (rho * rho + drho * drho).powf(1.5));
        }
        kappa_min > 1e-6 / scale
    }

    /// Smooth strictly convex outer approximation at stage `k` (1..=10).
    ///
    /// The support function is mollified by a wrapped Gaussian and lifted by
    /// a stage offset, so `K` is contained in the result, the stages nest
    /// downward, and the support-function sup-distance to `K` is below
    /// `2^-k * diameter`. Bodies that are already smooth with strictly
    /// positive curvature are returned unchanged.
    pub fn smooth_approximation(&self, k: u32) -> Result<ConvexBody, BodyError> {
        if !(1..=10).contains(&k) {
            return Err(BodyError::Invalid("smoothing stage must be in 1..=10".into()));
        }
        if self.is_strictly_smooth() {
            return Ok(self.clone());
        }
        let diam = self.diameter;
        let t_k = 2f64.powi(-(k as i32) - 2) * diam;
        let target = 0.2 * t_k;

        // Master sample of the support function on a fine grid, marched with
        // warm starts so smooth bodies stay cheap.
        const NF: usize = 1 << 18;
        let mut h0 = vec![0.0f64; NF];
        for i in 0..NF {
            let t = i as f64 * TAU / NF as f64;
            h0[i] = self.polar_gauge(Vec2::from_angle(t));
        }

        let mut sigma = (0.5 * t_k / diam.max(1e-300)).max(1e-6).min(0.3);
        let mut result: Option<(Vec<f64>, usize, f64)> = None;
        for _ in 0..60 {
            // Stride so the working grid resolves the kernel.
            let mut stride = 1usize;
            while stride * 2 <= NF && (stride * 2) as f64 * TAU / NF as f64 <= sigma / 8.0 {
                stride *= 2;
            }
            let nc = NF / stride;
            let dt = TAU / nc as f64;
            let half = ((6.0 * sigma / dt).ceil() as usize).max(2).min(nc / 2 - 1);
            let mut kernel = Vec::with_capacity(2 * half + 1);
            let mut ksum = 0.0;
            for j in -(half as i64)..=(half as i64) {
                let s = j as f64 * dt;
                let w = (-0.5 * (s / sigma).powi(2)).exp();
                kernel.push(w);
                ksum += w;
            }
            for w in &mut kernel {
                *w /= ksum;
            }
            let mut hc = vec![0.0f64; nc];
            let mut err = 0.0f64;
            for i in 0..nc {
                let mut acc = 0.0;
                for (jj, w) in kernel.iter().enumerate() {
                    let j = jj as i64 - half as i64;
                    let idx = (((i as i64 + j).rem_euclid(nc as i64)) as usize) * stride;
                    acc += w * h0[idx];
                }
                hc[i] = acc;
                err = err.max((acc - h0[i * stride]).abs());
            }
            if err <= target {
                result = Some((hc, nc, dt));
                break;
            }
            sigma *= 0.5;
        }
        let (mut hc, nc, dt) = result.ok_or(BodyError::GaussMapDiverged)?;
        for h in &mut hc {
            *h += t_k;
        }

        // Fourth-order periodic differences for h' and h''.
        let idx = |i: i64| -> f64 { hc[i.rem_euclid(nc as i64) as usize] };
        let mut dh = vec![0.0f64; nc];
        let mut d2h = vec![0.0f64; nc];
        for i in 0..nc {
            let i = i as i64;
            dh[i as usize] =
                (8.0 * (idx(i + 1) - idx(i - 1)) - (idx(i + 2) - idx(i - 2))) / (12.0 * dt);
            d2h[i as usize] = (-30.0 * idx(i) + 16.0 * (idx(i + 1) + idx(i - 1))
                - (idx(i + 2) + idx(i - 2)))
                / (12.0 * dt * dt);
        }
        for i in 0..nc {
            if hc[i] + d2h[i] <= 0.0 {
                return Err(BodyError::Invalid(
                    "smoothing produced a non-convex support function".into(),
                ));
            }
        }

        const NTAB: usize = 8192;
        let sup = resample_uniform(&hc, &dh, &d2h, NTAB);

        // Radial profile through the boundary parametrization
        // p(t) = h u + h' u_perp, polar angle phi = t + atan2(h', h).
        let mut phi = vec![0.0f64; nc];
        let mut rho = vec![0.0f64; nc];
        let mut drho = vec![0.0f64; nc];
        for i in 0..nc {
            let t = i as f64 * dt;
            let (h, d1) = (hc[i], dh[i]);
            let r = (h * h + d1 * d1).sqrt();
            phi[i] = t + d1.atan2(h);
            rho[i] = r;
            drho[i] = r * d1 / h;
        }
        // Unwrap phi to a monotone sequence starting near phi[0].
        for i in 1..nc {
            while phi[i] < phi[i - 1] {
                phi[i] += TAU;
            }
        }
        let mut d2rho = vec![0.0f64; nc];
        for i in 0..nc {
            let (im, ip) = ((i + nc - 1) % nc, (i + 1) % nc);
            let dphi = if i == 0 {
                phi[ip] - (phi[im] - TAU)
            } else if i == nc - 1 {
                phi[ip] + TAU - phi[im]
            } else {
                phi[ip] - phi[im]
            };
            d2rho[i] = (drho[ip] - drho[im]) / dphi;
        }
        let rho_tab = resample_by_phi(&phi, &rho, &drho, &d2rho, NTAB);

        let sampled = Sampled { rho: Arc::new(rho_tab), sup: Arc::new(sup) };
        let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
        for i in 0..nc {
            rmin = rmin.min(rho[i]);
            rmax = rmax.max(rho[i]);
        }
        let body = ConvexBody {
            kind: BodyKind::Sampled(sampled),
            gauge_bounds: (1.0 / rmax, 1.0 / rmin),
            degenerate_normals: Vec::new(),
            diameter: 0.0,
        };
        Ok(body.with_diameter())
    }

    /// Sup over sampled unit directions of |support_self - support_other|;
    /// this is the Hausdorff distance for convex bodies.
    pub fn hausdorff_distance(&self, other: &ConvexBody) -> f64 {
        const N: usize = 2048;
        let mut d = 0.0f64;
        for i in 0..N {
            let u = Vec2::from_angle(i as f64 * TAU / N as f64);
            d = d.max((self.polar_gauge(u) - other.polar_gauge(u)).abs());
        }
        d
    }
}

fn shift_half_turn(t: &TableProfile) -> TableProfile {
    let n = t.n;
    let half = n / 2;
    let rot = |a: &Vec<f64>| -> Vec<f64> {
        (0..n).map(|i| a[(i + half) % n]).collect()
    };
    TableProfile::new(rot(&t.val), rot(&t.dval), rot(&t.d2val))
}

fn resample_uniform(val: &[f64], dval: &[f64], d2val: &[f64], n_out: usize) -> TableProfile {
    let n = val.len();
    if n == n_out {
        return TableProfile::new(val.to_vec(), dval.to_vec(), d2val.to_vec());
    }
    let src = TableProfile::new(val.to_vec(), dval.to_vec(), d2val.to_vec());
    let mut v0 = Vec::with_capacity(n_out);
    let mut v1 = Vec::with_capacity(n_out);
    let mut v2 = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let t = i as f64 * TAU / n_out as f64;
        let (a, b, c) = src.eval(t);
        v0.push(a);
        v1.push(b);
        v2.push(c);
    }
    TableProfile::new(v0, v1, v2)
}

/// Resample samples given at monotone angles `phi` (spanning one full turn)
/// onto a uniform grid, interpolating values with cubic Hermite.
fn resample_by_phi(
    phi: &[f64],
    val: &[f64],
    dval: &[f64],
    d2val: &[f64],
    n_out: usize,
) -> TableProfile {
    let n = phi.len();
    let base = phi[0];
    let mut v0 = Vec::with_capacity(n_out);
    let mut v1 = Vec::with_capacity(n_out);
    let mut v2 = Vec::with_capacity(n_out);
    for io in 0..n_out {
        let mut target = io as f64 * TAU / n_out as f64;
        while target < base {
            target += TAU;
        }
        while target >= base + TAU {
            target -= TAU;
        }
        // Find the bracketing interval (wrapping once past the end).
        let mut lo = 0usize;
        let mut hi = n; // sentinel: interval [phi[n-1], phi[0]+TAU]
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let pm = if mid == n { base + TAU } else { phi[mid] };
            if pm <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let i = lo % n;
        let j = (lo + 1) % n;
        let p0 = phi[lo.min(n - 1)];
        let p1 = if lo + 1 >= n { phi[0] + TAU } else { phi[lo + 1] };
        let w = p1 - p0;
        let s = ((target - p0) / w).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        v0.push(h00 * val[i] + h01 * val[j] + w * (h10 * dval[i] + h11 * dval[j]));
        v1.push((1.0 - s) * dval[i] + s * dval[j]);
        v2.push((1.0 - s) * d2val[i] + s * d2val[j]);
    }
    TableProfile::new(v0, v1, v2)
}

/// True when `u` is within `tol` (angularly) of some recorded degenerate
/// normal direction.
pub fn near_degenerate(body: &ConvexBody, u: Vec2, tol: f64) -> bool {
    let a = u.angle();
    body.degenerate_normals
        .iter()
        .any(|m| angle_dist(a, m.angle()) <= tol)
}
