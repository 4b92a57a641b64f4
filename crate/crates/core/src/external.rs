//! Target potential, friction and noise parameters.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

/// Shape of the attracting potential around an agent's target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    /// `V(x) = ¼·(1 + |x − x_T|²)^½`
    #[default]
    Smooth,
    /// `V(x) = |x − x_T|`
    Distance,
    /// `V ≡ 0`, free flight.
    None,
}

impl std::str::FromStr for PotentialKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smooth" => Ok(PotentialKind::Smooth),
            "distance" => Ok(PotentialKind::Distance),
            "none" => Ok(PotentialKind::None),
            other => Err(format!(
                "unknown potential kind {other:?} (expected smooth, distance or none)"
            )),
        }
    }
}

/// Friction coefficient `sigma` and velocity-noise intensity `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingNoise {
    pub sigma: f64,
    pub nu: f64,
}

impl Default for DampingNoise {
    fn default() -> Self {
        DampingNoise {
            sigma: 0.25,
            nu: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialGradient {
    pub value: Vec3,
    /// Set when the gradient is undefined (distance potential at the target)
    /// and `value` was replaced by zero.
    pub singular: bool,
}

pub fn potential(kind: PotentialKind, x: Vec3, target: Vec3) -> f64 {
    let r2 = (x - target).norm_squared();
    match kind {
        PotentialKind::Smooth => 0.25 * (1.0 + r2).sqrt(),
        PotentialKind::Distance => r2.sqrt(),
        PotentialKind::None => 0.0,
    }
}

pub fn potential_gradient(kind: PotentialKind, x: Vec3, target: Vec3) -> PotentialGradient {
    let dx = x - target;
    match kind {
        PotentialKind::Smooth => PotentialGradient {
            value: dx / (4.0 * (1.0 + dx.norm_squared()).sqrt()),
            singular: false,
        },
        PotentialKind::Distance => match dx.normalized() {
            Some(dir) => PotentialGradient {
                value: dir,
                singular: false,
            },
            None => PotentialGradient {
                value: Vec3::ZERO,
                singular: true,
            },
        },
        PotentialKind::None => PotentialGradient {
            value: Vec3::ZERO,
            singular: false,
        },
    }
}

/// `−∇V(x) − σ·v`.
pub fn external_force(
    kind: PotentialKind,
    damping: &DampingNoise,
    x: Vec3,
    v: Vec3,
    target: Vec3,
) -> Vec3 {
    -potential_gradient(kind, x, target).value - v * damping.sigma
}
