//! Drone → formation-target assignment.
//!
//! [`greedy_assign`] walks the targets in order and gives each one the nearest
//! drone that is still free. [`optimal_assign`] enumerates every permutation
//! and is only meant as a small-instance reference.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::{is_finite, Vec3};

/// Largest instance the exhaustive search accepts (9! permutations).
pub const MAX_OPTIMAL_SIZE: usize = 9;

#[derive(Debug, Error, PartialEq)]
pub enum AssignError {
    #[error("{targets} targets but {drones} drones")]
    LengthMismatch { targets: usize, drones: usize },
    #[error("nothing to assign")]
    Empty,
    #[error("non-finite position in input")]
    NonFinite,
    #[error("exhaustive search limited to {MAX_OPTIMAL_SIZE} agents, got {0}")]
    TooLarge(usize),
}

/// A bijection between targets and drones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `(target_index, drone_index)`, ordered by target index.
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl Assignment {
    /// Drone serving target `target`.
    pub fn drone_for(&self, target: usize) -> Option<usize> {
        self.pairs.iter().find(|&&(t, _)| t == target).map(|&(_, d)| d)
    }

    /// Target served by drone `drone`.
    pub fn target_for(&self, drone: usize) -> Option<usize> {
        self.pairs.iter().find(|&&(_, d)| d == drone).map(|&(t, _)| t)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// True when every target and every drone index in `0..n` appears once.
    pub fn is_bijection(&self, n: usize) -> bool {
        let mut t_seen = vec![false; n];
        let mut d_seen = vec![false; n];
        self.pairs.len() == n
            && self.pairs.iter().all(|&(t, d)| {
                t < n && d < n && !std::mem::replace(&mut t_seen[t], true) && !std::mem::replace(&mut d_seen[d], true)
            })
    }

    /// Sum of pair costs recomputed from positions, in target order.
    pub fn recompute_cost(&self, targets: &[Vec3], drones: &[Vec3]) -> f64 {
        self.pairs
            .iter()
            .map(|&(t, d)| euclidean_cost(&targets[t], &drones[d]))
            .sum()
    }
}

/// Straight-line distance between a target and a drone.
pub fn euclidean_cost(p: &Vec3, q: &Vec3) -> f64 {
    (q - p).norm()
}

fn check(targets: &[Vec3], drones: &[Vec3]) -> Result<(), AssignError> {
    if targets.len() != drones.len() {
        return Err(AssignError::LengthMismatch {
            targets: targets.len(),
            drones: drones.len(),
        });
    }
    if targets.is_empty() {
        return Err(AssignError::Empty);
    }
    if !targets.iter().chain(drones).all(is_finite) {
        return Err(AssignError::NonFinite);
    }
    Ok(())
}

/// Greedy nearest-available-drone assignment; ties go to the lower drone index.
pub fn greedy_assign(targets: &[Vec3], drones: &[Vec3]) -> Result<Assignment, AssignError> {
    check(targets, drones)?;
    let mut taken = vec![false; drones.len()];
    let mut pairs = Vec::with_capacity(targets.len());
    let mut total_cost = 0.0;
    for (ti, target) in targets.iter().enumerate() {
        let (di, cost) = drones
            .iter()
            .enumerate()
            .filter(|(di, _)| !taken[*di])
            .map(|(di, d)| (di, euclidean_cost(target, d)))
            .fold(None, |best: Option<(usize, f64)>, cand| match best {
                Some(b) if b.1 <= cand.1 => Some(b),
                _ => Some(cand),
            })
            .expect("one free drone per remaining target");
        taken[di] = true;
        pairs.push((ti, di));
        total_cost += cost;
    }
    Ok(Assignment { pairs, total_cost })
}

/// Minimum-total-cost bijection by exhaustive enumeration.
pub fn optimal_assign(targets: &[Vec3], drones: &[Vec3]) -> Result<Assignment, AssignError> {
    optimal_assign_with(targets, drones, Execution::default())
}

/// [`optimal_assign`] with an explicit execution mode. Branches on the drone
/// chosen for target 0 are searched independently; among equal-cost
/// permutations the lexicographically smallest wins, in either mode.
pub fn optimal_assign_with(targets: &[Vec3], drones: &[Vec3], exec: Execution) -> Result<Assignment, AssignError> {
    check(targets, drones)?;
    let n = targets.len();
    if n > MAX_OPTIMAL_SIZE {
        return Err(AssignError::TooLarge(n));
    }
    let cost: Vec<Vec<f64>> = targets
        .iter()
        .map(|t| drones.iter().map(|d| euclidean_cost(t, d)).collect())
        .collect();

    let branches = exec.map(n, |first| {
        let mut search = Search {
            cost: &cost,
            perm: vec![0; n],
            used: vec![false; n],
            best: Vec::new(),
            best_cost: f64::INFINITY,
        };
        search.perm[0] = first;
        search.used[first] = true;
        search.descend(1, cost[0][first]);
        (search.best_cost, search.best)
    });

    let (best_cost, best) = branches
        .into_iter()
        .fold((f64::INFINITY, Vec::new()), |acc, b| if b.0 < acc.0 { b } else { acc });
    let pairs: Vec<_> = best.into_iter().enumerate().collect();
    debug_assert!(best_cost.is_finite());
    let total_cost = pairs.iter().map(|&(t, d)| cost[t][d]).sum();
    Ok(Assignment { pairs, total_cost })
}

struct Search<'a> {
    cost: &'a [Vec<f64>],
    perm: Vec<usize>,
    used: Vec<bool>,
    best: Vec<usize>,
    best_cost: f64,
}

impl Search<'_> {
    // Full enumeration in lexicographic order; costs accumulate in target order.
    fn descend(&mut self, depth: usize, partial: f64) {
        let n = self.perm.len();
        if depth == n {
            if partial < self.best_cost {
                self.best_cost = partial;
                self.best.clone_from(&self.perm);
            }
            return;
        }
        for d in 0..n {
            if self.used[d] {
                continue;
            }
            self.used[d] = true;
            self.perm[depth] = d;
            self.descend(depth + 1, partial + self.cost[depth][d]);
            self.used[d] = false;
        }
    }
}
