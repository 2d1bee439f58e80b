//! Small fixed-size linear algebra for the plane.
//!
//! Conventions: `perp` rotates a quarter turn counterclockwise, so for a
//! curve traversed counterclockwise around a region, `tangent.perp()` points
//! into the region. Angles are radians measured from the positive x axis.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

pub const fn v(x: f64, y: f64) -> Vec2 {
    Vec2 { x, y }
}

impl Vec2 {
    pub const ZERO: Vec2 = v(0.0, 0.0);

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product `self x o`.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    /// Quarter turn counterclockwise.
    pub fn perp(self) -> Vec2 {
        v(-self.y, self.x)
    }

    pub fn unit(self) -> Vec2 {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero vector");
        self / n
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn from_angle(t: f64) -> Vec2 {
        v(t.cos(), t.sin())
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        v(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        *self = *self + o;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        v(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        v(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        v(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, o: Vec2) -> Vec2 {
        o * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        v(self.x / s, self.y / s)
    }
}

/// Symmetric 2x2 matrix, stored as (xx, xy, yy).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymMat2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymMat2 {
    pub const ZERO: SymMat2 = SymMat2 { xx: 0.0, xy: 0.0, yy: 0.0 };

    /// `s * w wᵀ` for a (not necessarily unit) vector `w`.
    pub fn outer(w: Vec2, s: f64) -> SymMat2 {
        SymMat2 { xx: s * w.x * w.x, xy: s * w.x * w.y, yy: s * w.y * w.y }
    }

    pub fn apply(self, u: Vec2) -> Vec2 {
        v(self.xx * u.x + self.xy * u.y, self.xy * u.x + self.yy * u.y)
    }

    pub fn quad(self, u: Vec2, w: Vec2) -> f64 {
        self.apply(u).dot(w)
    }

    pub fn trace(self) -> f64 {
        self.xx + self.yy
    }

    /// Eigenvalues sorted ascending.
    pub fn eigenvalues(self) -> (f64, f64) {
        let m = 0.5 * (self.xx + self.yy);
        let d = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (m - d, m + d)
    }
}

impl Add for SymMat2 {
    type Output = SymMat2;
    fn add(self, o: SymMat2) -> SymMat2 {
        SymMat2 { xx: self.xx + o.xx, xy: self.xy + o.xy, yy: self.yy + o.yy }
    }
}

impl Mul<f64> for SymMat2 {
    type Output = SymMat2;
    fn mul(self, s: f64) -> SymMat2 {
        SymMat2 { xx: self.xx * s, xy: self.xy * s, yy: self.yy * s }
    }
}

/// Wrap an angle into [0, 2pi).
pub fn wrap_angle(t: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = t % two_pi;
    if r < 0.0 {
        r + two_pi
    } else {
        r
    }
}

/// Smallest absolute difference between two angles.
pub fn angle_dist(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(std::f64::consts::TAU - d)
}
