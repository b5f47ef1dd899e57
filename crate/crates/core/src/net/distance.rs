use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::{invalid, Error, Result};

/// How the angular separation between two units is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngularDistance {
    /// `|ψ_i − ψ_j|`.
    #[default]
    Raw,
    /// Shorter arc around the circle, `min(d, 2π − d)`.
    Wrapped,
}

impl AngularDistance {
    fn eval(self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self {
            AngularDistance::Raw => d,
            AngularDistance::Wrapped => d.min(TAU - d),
        }
    }
}

/// `A_ij = 1 / d(ψ_i, ψ_j)` when `d ≤ cutoff`, otherwise 0.
///
/// Coincident angles would give an infinite weight and are rejected.
pub fn inverse_distance_network(
    angles: &[f64],
    cutoff: f64,
    metric: AngularDistance,
) -> Result<Network> {
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(invalid(
            "cutoff",
            format!("{cutoff} must be positive and finite"),
        ));
    }
    if let Some(bad) = angles.iter().find(|a| !(0.0..TAU).contains(*a)) {
        return Err(invalid("angles", format!("{bad} is outside [0, 2π)")));
    }
    let n = angles.len();
    let mut rows = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric.eval(angles[i], angles[j]);
            if d == 0.0 {
                return Err(Error::DuplicateAngle {
                    first: i,
                    second: j,
                    angle: angles[i],
                });
            }
            if d <= cutoff {
                let w = 1.0 / d;
                rows[i].push((j, w));
                rows[j].push((i, w));
            }
        }
    }
    Ok(Network { n, rows })
}
