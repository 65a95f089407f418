//! Kinematic swarm simulation.
//!
//! Drones are velocity-commanded point masses: the commanded velocity is the
//! potential-field force times a gain, capped at `v_max`, integrated with
//! explicit Euler. Landmark frames update the formation under a zero-order
//! hold; the drone ↔ body-part assignment is fixed at takeoff.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apf::{self, ApfParams};
use crate::assignment::{greedy_assign, AssignError, Assignment};
use crate::emotion::{Emotion, Rgb, UnknownEmotion};
use crate::exec::Execution;
use crate::pose::{FormationTargets, LandmarkFrame, LandmarkName, PoseError, SkeletonConfig};
use crate::{is_finite, Vec3};

/// Slack when comparing simulation time against frame timestamps.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("landmark stream is empty")]
    EmptyStream,
    #[error("no frame in the stream yields a valid formation: {0}")]
    NoValidFrame(PoseError),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Assign(#[from] AssignError),
    #[error(transparent)]
    Emotion(#[from] UnknownEmotion),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite force on drone {drone} at t={t}")]
    NonFiniteForce { drone: usize, t: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    pub v_max: f64,
    pub force_to_velocity_gain: f64,
    pub collision_radius: f64,
    pub convergence_radius: f64,
    pub max_duration: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            v_max: 1.0,
            force_to_velocity_gain: 0.5,
            collision_radius: 0.1,
            convergence_radius: 0.05,
            max_duration: 10.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("dt", self.dt),
            ("v_max", self.v_max),
            ("force_to_velocity_gain", self.force_to_velocity_gain),
            ("collision_radius", self.collision_radius),
            ("convergence_radius", self.convergence_radius),
            ("max_duration", self.max_duration),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.dt > 0.1 {
            return Err(SimError::Config(format!("dt must be <= 0.1, got {}", self.dt)));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.max_duration / self.dt - TIME_EPS).ceil() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DroneState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub color: Rgb,
    pub role: LandmarkName,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwarmState {
    pub t: f64,
    pub drones: Vec<DroneState>,
}

impl SwarmState {
    /// Stationary white drones at `positions`; roles come from `assignment`.
    pub fn at_rest(positions: &[Vec3], targets: &FormationTargets, assignment: &Assignment) -> Self {
        let drones = positions
            .iter()
            .enumerate()
            .map(|(i, &position)| DroneState {
                position,
                velocity: Vec3::zeros(),
                color: Rgb::WHITE,
                role: targets.points[assignment.target_for(i).expect("drone is assigned")].0,
            })
            .collect();
        Self { t: 0.0, drones }
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.drones.iter().map(|d| d.position).collect()
    }
}

/// Per-drone target positions under a fixed assignment.
pub fn drone_targets(targets: &FormationTargets, assignment: &Assignment, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| targets.points[assignment.target_for(i).expect("drone is assigned")].1)
        .collect()
}

/// Advances the swarm by one `dt`.
pub fn step(
    state: &SwarmState,
    targets: &FormationTargets,
    assignment: &Assignment,
    apf: &ApfParams,
    cfg: &SimConfig,
) -> Result<SwarmState, SimError> {
    step_with(
        state,
        &drone_targets(targets, assignment, state.drones.len()),
        apf,
        cfg,
        Execution::default(),
    )
}

/// [`step`] with targets already resolved per drone.
pub fn step_with(
    state: &SwarmState,
    targets: &[Vec3],
    apf: &ApfParams,
    cfg: &SimConfig,
    exec: Execution,
) -> Result<SwarmState, SimError> {
    if targets.len() != state.drones.len() {
        return Err(SimError::SizeMismatch(format!(
            "{} drones, {} targets",
            state.drones.len(),
            targets.len()
        )));
    }
    let positions = state.positions();
    let forces = exec.map(positions.len(), |i| apf::total_force(i, &positions, &targets[i], apf));

    let mut drones = Vec::with_capacity(state.drones.len());
    for (i, (d, f)) in state.drones.iter().zip(forces).enumerate() {
        if !is_finite(&f) {
            return Err(SimError::NonFiniteForce { drone: i, t: state.t });
        }
        let mut v = f * cfg.force_to_velocity_gain;
        let speed = v.norm();
        if speed > cfg.v_max {
            v *= cfg.v_max / speed;
        }
        drones.push(DroneState {
            position: d.position + v * cfg.dt,
            velocity: v,
            ..d.clone()
        });
    }
    Ok(SwarmState {
        t: state.t + cfg.dt,
        drones,
    })
}

/// Sets every drone's light ring from an emotion label.
pub fn set_swarm_color(state: &SwarmState, label: &str) -> Result<SwarmState, SimError> {
    Ok(colored(state, label.parse::<Emotion>()?))
}

pub fn colored(state: &SwarmState, emotion: Emotion) -> SwarmState {
    let mut out = state.clone();
    for d in &mut out.drones {
        d.color = emotion.color();
    }
    out
}

/// Every simulated state plus the per-drone targets active at that state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryLog {
    pub states: Vec<SwarmState>,
    pub targets: Vec<Vec<Vec3>>,
}

impl TrajectoryLog {
    pub fn push(&mut self, state: SwarmState, targets: Vec<Vec3>) {
        self.states.push(state);
        self.targets.push(targets);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub min_pairwise_distance: f64,
    /// Earliest logged time after which every drone stays within the convergence radius.
    pub time_to_converge: Option<f64>,
    pub tracking_rms: Vec<f64>,
    pub collision_count: usize,
}

impl RunMetrics {
    pub fn from_log(log: &TrajectoryLog, cfg: &SimConfig) -> Self {
        let n = log.states.first().map_or(0, |s| s.drones.len());
        let mut min_pairwise_distance = f64::INFINITY;
        let mut collision_count = 0;
        let mut sq_err = vec![0.0; n];
        let mut converged_since: Option<f64> = None;

        for (state, targets) in log.states.iter().zip(&log.targets) {
            for i in 0..n {
                for j in i + 1..n {
                    let d = (state.drones[i].position - state.drones[j].position).norm();
                    min_pairwise_distance = min_pairwise_distance.min(d);
                    if d < cfg.collision_radius {
                        collision_count += 1;
                    }
                }
            }
            let mut all_in = true;
            for (i, d) in state.drones.iter().enumerate() {
                let e = (d.position - targets[i]).norm();
                sq_err[i] += e * e;
                all_in &= e <= cfg.convergence_radius;
            }
            converged_since = match (all_in, converged_since) {
                (true, None) => Some(state.t),
                (true, since) => since,
                (false, _) => None,
            };
        }

        let count = log.states.len().max(1) as f64;
        Self {
            min_pairwise_distance: if n < 2 { 0.0 } else { min_pairwise_distance },
            time_to_converge: converged_since,
            tracking_rms: sq_err.into_iter().map(|s| (s / count).sqrt()).collect(),
            collision_count,
        }
    }
}

/// Emotion changes to apply during a run, as `(time, emotion)` sorted by time.
pub type ColorSchedule = [(f64, Emotion)];

/// Replays a landmark stream through formation, assignment and flight.
pub fn run_scenario(
    stream: &[LandmarkFrame],
    skeleton: &SkeletonConfig,
    cfg: &SimConfig,
    apf: &ApfParams,
    initial_positions: &[Vec3],
) -> Result<(TrajectoryLog, RunMetrics), SimError> {
    run_scenario_with(stream, skeleton, cfg, apf, initial_positions, &[], Execution::default())
}

/// [`run_scenario`] with an emotion color schedule and explicit execution mode.
/// Schedule times, like frame times, are relative to the first frame.
pub fn run_scenario_with(
    stream: &[LandmarkFrame],
    skeleton: &SkeletonConfig,
    cfg: &SimConfig,
    apf: &ApfParams,
    initial_positions: &[Vec3],
    colors: &ColorSchedule,
    exec: Execution,
) -> Result<(TrajectoryLog, RunMetrics), SimError> {
    cfg.validate()?;
    apf.validate().map_err(SimError::Config)?;
    let t0 = stream.first().ok_or(SimError::EmptyStream)?.t;
    if initial_positions.len() != LandmarkName::COUNT {
        return Err(SimError::SizeMismatch(format!(
            "expected {} initial positions, got {}",
            LandmarkName::COUNT,
            initial_positions.len()
        )));
    }
    if !initial_positions.iter().all(is_finite) {
        return Err(SimError::Config("non-finite initial position".into()));
    }

    let tree = skeleton.tree()?;
    let anchor = skeleton.head_anchor();
    let mut first_err = None;
    let formations: Vec<(f64, Option<FormationTargets>)> = stream
        .iter()
        .map(|f| {
            let built = crate::pose::build_formation(f, &tree, anchor, &skeleton.axis_map);
            let built = match built {
                Ok(ft) => Some(ft),
                Err(e) => {
                    log::warn!("frame at t={} skipped: {e}", f.t);
                    first_err.get_or_insert(e);
                    None
                }
            };
            (f.t - t0, built)
        })
        .collect();

    let takeoff = formations
        .iter()
        .find_map(|(_, f)| f.as_ref())
        .ok_or_else(|| SimError::NoValidFrame(first_err.take().expect("some frame failed")))?;
    let assignment = greedy_assign(&takeoff.positions(), initial_positions)?;
    log::debug!(
        "takeoff assignment {:?} cost {:.3}",
        assignment.pairs,
        assignment.total_cost
    );

    let n = initial_positions.len();
    let mut active = drone_targets(takeoff, &assignment, n);
    let mut next_frame = 0;
    let mut next_color = 0;
    let mut advance = |t: f64, active: &mut Vec<Vec3>| {
        while next_frame < formations.len() && formations[next_frame].0 <= t + TIME_EPS {
            if let Some(f) = &formations[next_frame].1 {
                *active = drone_targets(f, &assignment, n);
            }
            next_frame += 1;
        }
    };
    let mut recolor = |state: &mut SwarmState| {
        while next_color < colors.len() && colors[next_color].0 <= state.t + TIME_EPS {
            *state = colored(state, colors[next_color].1);
            next_color += 1;
        }
    };

    let mut state = SwarmState::at_rest(initial_positions, takeoff, &assignment);
    advance(0.0, &mut active);
    recolor(&mut state);
    let mut log = TrajectoryLog::default();
    log.push(state.clone(), active.clone());

    for k in 1..=cfg.steps() {
        let mut next = step_with(&state, &active, apf, cfg, exec)?;
        next.t = k as f64 * cfg.dt;
        advance(next.t, &mut active);
        recolor(&mut next);
        log.push(next.clone(), active.clone());
        state = next;
    }

    let metrics = RunMetrics::from_log(&log, cfg);
    Ok((log, metrics))
}

/// Layout of the 3×3 takeoff grid used by [`grid_start`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridStart {
    /// Offset along world −x from the formation centroid (meters).
    pub distance: f64,
    /// Column spacing along world y.
    pub lateral_spacing: f64,
    /// Row spacing along world z.
    pub vertical_spacing: f64,
    /// Uniform jitter bound of the grid centre along world y.
    pub lateral_jitter: f64,
    /// Uniform jitter bound of the grid centre along world z.
    pub vertical_jitter: f64,
}

impl Default for GridStart {
    fn default() -> Self {
        Self {
            distance: 2.0,
            lateral_spacing: 0.5,
            vertical_spacing: 0.5,
            lateral_jitter: 0.25,
            vertical_jitter: 0.25,
        }
    }
}

/// Nine drones on a 3×3 grid in the world y-z plane, `layout.distance`
/// meters in front of (−x) the formation centroid, with the grid centre
/// jittered from `seed`.
pub fn grid_start(formation: &FormationTargets, layout: &GridStart, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sym = |w: f64| if w > 0.0 { rng.random_range(-w..=w) } else { 0.0 };
    let centroid = formation.positions().iter().sum::<Vec3>() / formation.points.len() as f64;
    let center = centroid
        + Vec3::new(
            -layout.distance,
            sym(layout.lateral_jitter),
            sym(layout.vertical_jitter),
        );
    let mut out = Vec::with_capacity(9);
    for row in [1.0, 0.0, -1.0] {
        for col in [-1.0, 0.0, 1.0] {
            out.push(center + Vec3::new(0.0, col * layout.lateral_spacing, row * layout.vertical_spacing));
        }
    }
    out
}
