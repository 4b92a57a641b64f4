//! Vectors, the velocity-aligned local frame of an agent and the relative
//! frame of an ordered pair of agents.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Horizontal fraction of a velocity below which the azimuth is gauged to zero.
pub const VERTICAL_GAUGE_TOL: f64 = 1e-12;
/// `sin(beta)` below which a partner is considered to lie on the `e_theta` axis.
pub const POLAR_DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("no direction: zero-length vector")]
    NoDirection,
    #[error("coincident positions")]
    CoincidentPositions,
    #[error("degenerate relative pose (partner on the polar axis)")]
    DegeneratePose,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };
    pub const X: Vec3 = Vec3 {
        x: 1.0,
        y: 0.0,
        z: 0.0,
    };
    pub const Y: Vec3 = Vec3 {
        x: 0.0,
        y: 1.0,
        z: 0.0,
    };
    pub const Z: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Cross product `self ∧ other`.
    #[inline]
    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rotation by `angle` about the global z-axis.
    pub fn rotated_z(self, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        Vec3::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Thresholds used by the frame constructions. Defaults are the module
/// constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTolerances {
    pub vertical_gauge: f64,
    pub polar_degeneracy: f64,
}

impl Default for FrameTolerances {
    fn default() -> Self {
        FrameTolerances {
            vertical_gauge: VERTICAL_GAUGE_TOL,
            polar_degeneracy: POLAR_DEGENERACY_TOL,
        }
    }
}

/// Spherical unit-vector triple attached to a velocity: `e_rho` along the
/// velocity, `e_phi` along increasing polar angle, `e_theta` along
/// increasing azimuth. Right-handed: `e_rho ∧ e_phi = e_theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub e_rho: Vec3,
    pub e_phi: Vec3,
    pub e_theta: Vec3,
}

impl LocalFrame {
    pub fn new(v: Vec3, tol: &FrameTolerances) -> Result<Self, GeometryError> {
        let speed = v.norm();
        if !(speed > 0.0) || !speed.is_finite() {
            return Err(GeometryError::NoDirection);
        }
        let horizontal = v.x.hypot(v.y);
        let cos_phi = v.z / speed;
        let sin_phi = horizontal / speed;
        // Azimuth is undefined on the vertical axis; fix it to zero there.
        let (cos_theta, sin_theta) = if horizontal <= tol.vertical_gauge * speed {
            (1.0, 0.0)
        } else {
            (v.x / horizontal, v.y / horizontal)
        };
        Ok(LocalFrame {
            e_rho: Vec3::new(sin_phi * cos_theta, sin_phi * sin_theta, cos_phi),
            e_phi: Vec3::new(cos_phi * cos_theta, cos_phi * sin_theta, -sin_phi),
            e_theta: Vec3::new(-sin_theta, cos_theta, 0.0),
        })
    }
}

/// Local frame of `v` with the default gauge tolerance.
pub fn local_frame_of(v: Vec3) -> Result<LocalFrame, GeometryError> {
    LocalFrame::new(v, &FrameTolerances::default())
}

/// Position of a partner `j` seen from agent `i`: distance, bearing unit
/// vector `k`, relative polar angle `beta` (measured from `e_theta`) and
/// relative azimuth `alpha` (measured in the `(e_rho, e_phi)` plane), plus the
/// rotated pair frame `{k, e_beta, e_alpha}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    pub d: f64,
    pub k: Vec3,
    pub cos_beta: f64,
    pub sin_beta: f64,
    pub cos_alpha: f64,
    pub sin_alpha: f64,
    pub e_beta: Vec3,
    pub e_alpha: Vec3,
    pub frame: LocalFrame,
    /// Partner lies (numerically) on agent i's `e_theta` axis, so `alpha` is
    /// undefined. `cos_alpha` is set to 0 and `sin_alpha` to 1.
    pub degenerate: bool,
}

impl RelativePose {
    pub fn new(
        x_i: Vec3,
        v_i: Vec3,
        x_j: Vec3,
        tol: &FrameTolerances,
    ) -> Result<Self, GeometryError> {
        let frame = LocalFrame::new(v_i, tol)?;
        let z = x_j - x_i;
        let d = z.norm();
        if !(d > 0.0) {
            return Err(GeometryError::CoincidentPositions);
        }
        let k = z / d;
        let cos_beta = k.dot(frame.e_theta).clamp(-1.0, 1.0);
        let sin_beta = (1.0 - cos_beta * cos_beta).max(0.0).sqrt();
        let (cos_alpha, sin_alpha, degenerate) = if sin_beta >= tol.polar_degeneracy {
            let ca = k.dot(frame.e_rho) / sin_beta;
            let sa = k.dot(frame.e_phi) / sin_beta;
            // Renormalise away the rounding in the two projections.
            let n = ca.hypot(sa);
            (ca / n, sa / n, false)
        } else {
            (0.0, 1.0, true)
        };
        let e_beta = frame.e_rho * (cos_beta * cos_alpha) + frame.e_phi * (cos_beta * sin_alpha)
            - frame.e_theta * sin_beta;
        let e_alpha = frame.e_rho * (-sin_alpha) + frame.e_phi * cos_alpha;
        Ok(RelativePose {
            d,
            k,
            cos_beta,
            sin_beta,
            cos_alpha,
            sin_alpha,
            e_beta,
            e_alpha,
            frame,
            degenerate,
        })
    }

    /// Bearing rebuilt from the two angles in the local frame.
    pub fn reconstructed_k(&self) -> Vec3 {
        self.frame.e_rho * (self.sin_beta * self.cos_alpha)
            + self.frame.e_phi * (self.sin_beta * self.sin_alpha)
            + self.frame.e_theta * self.cos_beta
    }
}

pub fn relative_pose(x_i: Vec3, v_i: Vec3, x_j: Vec3) -> Result<RelativePose, GeometryError> {
    RelativePose::new(x_i, v_i, x_j, &FrameTolerances::default())
}

/// Time derivatives of the relative angles for ballistic motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRates {
    pub beta_dot: f64,
    pub sinbeta_alpha_dot: f64,
    /// `beta_dot² + (sin(beta)·alpha_dot)²`; small values flag an imminent
    /// collision.
    pub a_squared: f64,
    /// Growth rate `(2 + omega)·(|v_j − v_i| / d)²·tau` of `a_squared` under
    /// the cooperative axis choice. Zero when there is no relative motion.
    pub gamma: f64,
}

pub fn angle_rates(
    pose: &RelativePose,
    v_i: Vec3,
    v_j: Vec3,
    omega: f64,
) -> Result<AngleRates, GeometryError> {
    if pose.degenerate {
        return Err(GeometryError::DegeneratePose);
    }
    let u = v_j - v_i;
    let beta_dot = u.dot(pose.e_beta) / pose.d;
    let sinbeta_alpha_dot = u.dot(pose.e_alpha) / pose.d;
    let a_squared = beta_dot * beta_dot + sinbeta_alpha_dot * sinbeta_alpha_dot;
    let u2 = u.norm_squared();
    let gamma = if u2 > 0.0 {
        let z = pose.k * pose.d;
        let tau = -z.dot(u) / u2;
        (2.0 + omega) * (u2 / (pose.d * pose.d)) * tau
    } else {
        0.0
    };
    Ok(AngleRates {
        beta_dot,
        sinbeta_alpha_dot,
        a_squared,
        gamma,
    })
}
