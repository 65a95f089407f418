//! Artificial potential field steering.
//!
//! Each drone is pulled toward its target by a quadratic attraction and pushed
//! away from every other drone inside an anisotropic influence region. Distance
//! between drones is a Manhattan norm of the displacement normalised
//! componentwise by the influence radii `r0`, rescaled by the mean radius so
//! the boundary sits at `rho == mean(r0)`:
//!
//! ```text
//! rho(p, q) = mean(r0) * sum_i |q_i - p_i| / r0_i
//! U_att     = xi * |p - target|^2
//! U_rep     = eta / 2 * (1/rho - 1/mean(r0))^2   if rho <= mean(r0), else 0
//! ```
//!
//! With isotropic `r0` this reduces to the plain Manhattan distance.

use serde::{Deserialize, Serialize};

use crate::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApfParams {
    /// Attraction scale.
    pub xi: f64,
    /// Repulsion scale.
    pub eta: f64,
    /// Influence radii along world x, y, z (meters).
    pub r0: [f64; 3],
    /// Distances below this are clamped when evaluating repulsion.
    pub rho_min: f64,
}

impl Default for ApfParams {
    fn default() -> Self {
        Self {
            xi: 1.0,
            eta: 0.05,
            r0: [0.2, 0.2, 0.4],
            rho_min: 0.01,
        }
    }
}

impl ApfParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.xi > 0.0) {
            return Err(format!("xi must be > 0, got {}", self.xi));
        }
        if !(self.eta >= 0.0) {
            return Err(format!("eta must be >= 0, got {}", self.eta));
        }
        if !self.r0.iter().all(|&r| r > 0.0 && r.is_finite()) {
            return Err(format!("r0 components must be > 0, got {:?}", self.r0));
        }
        if !(self.rho_min > 0.0) {
            return Err(format!("rho_min must be > 0, got {}", self.rho_min));
        }
        Ok(())
    }

    /// Scalar radius of the influence boundary in `rho` units.
    pub fn effective_radius(&self) -> f64 {
        self.r0.iter().sum::<f64>() / 3.0
    }

    /// `d rho / d p` per unit of `|p_i - q_i|`.
    fn axis_weights(&self) -> Vec3 {
        let r = self.effective_radius();
        Vec3::new(r / self.r0[0], r / self.r0[1], r / self.r0[2])
    }
}

/// `xi * |drone - target|^2`.
pub fn attraction_potential(drone: &Vec3, target: &Vec3, params: &ApfParams) -> f64 {
    params.xi * (drone - target).norm_squared()
}

/// Repulsion for a scaled distance `rho`; zero outside the influence boundary.
pub fn repulsion_potential(rho: f64, params: &ApfParams) -> f64 {
    let r = params.effective_radius();
    if rho > r {
        return 0.0;
    }
    let rho = rho.max(params.rho_min);
    let k = 1.0 / rho - 1.0 / r;
    0.5 * params.eta * k * k
}

/// Anisotropic Manhattan distance between two drones.
pub fn scaled_distance(p: &Vec3, q: &Vec3, params: &ApfParams) -> f64 {
    (q - p).abs().dot(&params.axis_weights())
}

/// Whether `rho` falls inside (or on) the influence boundary.
pub fn within_influence(rho: f64, params: &ApfParams) -> bool {
    rho <= params.effective_radius()
}

/// Repulsive force on a drone at `p` from a neighbour at `q`.
///
/// Negative gradient of [`repulsion_potential`] with respect to `p`. The
/// Manhattan norm uses the sign subgradient (zero on exactly equal
/// components); inside `rho_min` the magnitude is frozen at its clamped value.
pub fn repulsion_force(p: &Vec3, q: &Vec3, params: &ApfParams) -> Vec3 {
    let rho = scaled_distance(p, q, params);
    let r = params.effective_radius();
    if rho > r || params.eta == 0.0 {
        return Vec3::zeros();
    }
    let rho_c = rho.max(params.rho_min);
    // -dU/drho
    let magnitude = params.eta * (1.0 / rho_c - 1.0 / r) / (rho_c * rho_c);
    let d = p - q;
    let grad_rho = Vec3::from_fn(|i, _| sign(d[i])).component_mul(&params.axis_weights());
    grad_rho * magnitude
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `-grad U_att` at the drone.
pub fn attraction_force(drone: &Vec3, target: &Vec3, params: &ApfParams) -> Vec3 {
    (drone - target) * (-2.0 * params.xi)
}

/// `U_sum` seen by drone `index`: its attraction plus repulsion from every other drone.
pub fn total_potential(index: usize, positions: &[Vec3], target: &Vec3, params: &ApfParams) -> f64 {
    let p = &positions[index];
    let rep: f64 = positions
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(_, q)| repulsion_potential(scaled_distance(p, q, params), params))
        .sum();
    attraction_potential(p, target, params) + rep
}

/// `-grad U_sum` with respect to drone `index`'s position.
pub fn total_force(index: usize, positions: &[Vec3], target: &Vec3, params: &ApfParams) -> Vec3 {
    let p = &positions[index];
    positions
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .fold(attraction_force(p, target, params), |acc, (_, q)| {
            acc + repulsion_force(p, q, params)
        })
}
