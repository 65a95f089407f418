//! Upper-body skeleton model and the landmark → formation transform.
//!
//! Camera-frame landmarks are re-expressed relative to the head, turned into
//! parent→child unit vectors along a fixed 8-edge tree, and re-scaled with
//! configured body-segment lengths from a chosen world-frame head anchor. The
//! result no longer depends on how far the operator stands from the camera.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{is_finite, vec3, Vec3};

/// Minimum parent→child distance (camera units) for a usable segment.
pub const MIN_SEGMENT_LEN: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PoseError {
    #[error("frame is missing landmark {0}")]
    MissingLandmark(LandmarkName),
    #[error("unknown landmark name {0:?}")]
    UnknownLandmark(String),
    #[error("landmark {0} has a non-finite coordinate")]
    NonFinite(LandmarkName),
    #[error("degenerate segment {parent}->{child}: length {length:e}")]
    DegenerateSegment {
        parent: LandmarkName,
        child: LandmarkName,
        length: f64,
    },
    #[error("segment length for {0} must be strictly positive")]
    InvalidLength(LandmarkName),
    #[error("invalid axis map: {0}")]
    InvalidAxisMap(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamp {t} is earlier than previous {prev}")]
    OutOfOrder { line: usize, t: f64, prev: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The nine tracked upper-body landmarks, in formation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkName {
    Head,
    Neck,
    Torso,
    #[serde(rename = "l_shoulder")]
    LeftShoulder,
    #[serde(rename = "r_shoulder")]
    RightShoulder,
    #[serde(rename = "l_elbow")]
    LeftElbow,
    #[serde(rename = "r_elbow")]
    RightElbow,
    #[serde(rename = "l_hand")]
    LeftHand,
    #[serde(rename = "r_hand")]
    RightHand,
}

impl LandmarkName {
    pub const ALL: [LandmarkName; 9] = [
        LandmarkName::Head,
        LandmarkName::Neck,
        LandmarkName::Torso,
        LandmarkName::LeftShoulder,
        LandmarkName::RightShoulder,
        LandmarkName::LeftElbow,
        LandmarkName::RightElbow,
        LandmarkName::LeftHand,
        LandmarkName::RightHand,
    ];
    pub const COUNT: usize = 9;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LandmarkName::Head => "head",
            LandmarkName::Neck => "neck",
            LandmarkName::Torso => "torso",
            LandmarkName::LeftShoulder => "l_shoulder",
            LandmarkName::RightShoulder => "r_shoulder",
            LandmarkName::LeftElbow => "l_elbow",
            LandmarkName::RightElbow => "r_elbow",
            LandmarkName::LeftHand => "l_hand",
            LandmarkName::RightHand => "r_hand",
        }
    }
}

impl fmt::Display for LandmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LandmarkName {
    type Err = PoseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| PoseError::UnknownLandmark(s.to_string()))
    }
}

/// Per-landmark storage indexed by [`LandmarkName`].
pub type Landmarks = [Vec3; LandmarkName::COUNT];

/// One timestamped camera-frame observation of all nine landmarks.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkFrame {
    pub t: f64,
    landmarks: Landmarks,
}

impl LandmarkFrame {
    pub fn new(t: f64, landmarks: Landmarks) -> Result<Self, PoseError> {
        for name in LandmarkName::ALL {
            if !is_finite(&landmarks[name.index()]) {
                return Err(PoseError::NonFinite(name));
            }
        }
        if !t.is_finite() {
            return Err(PoseError::Parse {
                line: 0,
                message: "non-finite timestamp".into(),
            });
        }
        Ok(Self { t, landmarks })
    }

    /// Builds a frame from named points; every one of the nine names is required.
    pub fn from_map(t: f64, points: &BTreeMap<LandmarkName, Vec3>) -> Result<Self, PoseError> {
        let mut landmarks = [Vec3::zeros(); LandmarkName::COUNT];
        for name in LandmarkName::ALL {
            landmarks[name.index()] = *points.get(&name).ok_or(PoseError::MissingLandmark(name))?;
        }
        Self::new(t, landmarks)
    }

    pub fn get(&self, name: LandmarkName) -> Vec3 {
        self.landmarks[name.index()]
    }

    pub fn landmarks(&self) -> &Landmarks {
        &self.landmarks
    }

    /// Same frame with every landmark moved by `offset`.
    pub fn translated(&self, offset: Vec3) -> Self {
        Self {
            t: self.t,
            landmarks: self.landmarks.map(|p| p + offset),
        }
    }

    /// Same frame with every landmark scaled by `k` about the head.
    pub fn scaled_about_head(&self, k: f64) -> Self {
        let head = self.get(LandmarkName::Head);
        Self {
            t: self.t,
            landmarks: self.landmarks.map(|p| head + (p - head) * k),
        }
    }
}

/// Landmarks expressed in the head-centred frame: `p' = p - h`.
pub fn to_head_frame(frame: &LandmarkFrame) -> Landmarks {
    let head = frame.get(LandmarkName::Head);
    frame.landmarks.map(|p| p - head)
}

/// Parent → child tree over the nine landmarks plus per-child segment lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonTree {
    edges: Vec<(LandmarkName, LandmarkName)>,
    lengths: [f64; LandmarkName::COUNT],
}

impl SkeletonTree {
    /// The eight canonical edges, parents always listed before their children.
    pub const EDGES: [(LandmarkName, LandmarkName); 8] = [
        (LandmarkName::Head, LandmarkName::Neck),
        (LandmarkName::Neck, LandmarkName::Torso),
        (LandmarkName::Neck, LandmarkName::LeftShoulder),
        (LandmarkName::Neck, LandmarkName::RightShoulder),
        (LandmarkName::LeftShoulder, LandmarkName::LeftElbow),
        (LandmarkName::RightShoulder, LandmarkName::RightElbow),
        (LandmarkName::LeftElbow, LandmarkName::LeftHand),
        (LandmarkName::RightElbow, LandmarkName::RightHand),
    ];

    /// Average adult proportions, in meters, keyed by the child of each edge.
    pub fn default_lengths() -> BTreeMap<LandmarkName, f64> {
        use LandmarkName::*;
        BTreeMap::from([
            (Neck, 0.25),
            (Torso, 0.45),
            (LeftShoulder, 0.20),
            (RightShoulder, 0.20),
            (LeftElbow, 0.30),
            (RightElbow, 0.30),
            (LeftHand, 0.30),
            (RightHand, 0.30),
        ])
    }

    /// Canonical tree with the given lengths; missing children fall back to defaults.
    pub fn with_lengths(overrides: &BTreeMap<LandmarkName, f64>) -> Result<Self, PoseError> {
        let mut lengths = [0.0; LandmarkName::COUNT];
        let defaults = Self::default_lengths();
        for (_, child) in Self::EDGES {
            let len = overrides
                .get(&child)
                .or_else(|| defaults.get(&child))
                .copied()
                .unwrap_or(0.0);
            if !(len.is_finite() && len > 0.0) {
                return Err(PoseError::InvalidLength(child));
            }
            lengths[child.index()] = len;
        }
        if let Some(&len) = overrides.get(&LandmarkName::Head) {
            log::warn!("ignoring segment length {len} configured for the root landmark");
        }
        Ok(Self {
            edges: Self::EDGES.to_vec(),
            lengths,
        })
    }

    pub fn edges(&self) -> &[(LandmarkName, LandmarkName)] {
        &self.edges
    }

    /// Length of the segment ending at `child`. Zero for the root.
    pub fn length(&self, child: LandmarkName) -> f64 {
        self.lengths[child.index()]
    }
}

impl Default for SkeletonTree {
    fn default() -> Self {
        Self::with_lengths(&BTreeMap::new()).expect("default lengths are valid")
    }
}

/// Parent → child unit vectors, one per edge in tree order.
pub fn unit_vectors(head_frame: &Landmarks, tree: &SkeletonTree) -> Result<Vec<Vec3>, PoseError> {
    tree.edges()
        .iter()
        .map(|&(parent, child)| {
            let d = head_frame[child.index()] - head_frame[parent.index()];
            let length = d.norm();
            if !(length > MIN_SEGMENT_LEN) {
                return Err(PoseError::DegenerateSegment { parent, child, length });
            }
            Ok(d / length)
        })
        .collect()
}

/// Camera axis selector used by [`AxisMap`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignedAxis {
    pub axis: usize,
    pub negate: bool,
}

impl SignedAxis {
    fn parse(s: &str) -> Result<Self, PoseError> {
        let (negate, rest) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let axis = match rest {
            "cam_x" => 0,
            "cam_y" => 1,
            "cam_z" => 2,
            _ => return Err(PoseError::InvalidAxisMap(format!("bad axis spec {s:?}"))),
        };
        Ok(Self { axis, negate })
    }

    fn render(self) -> String {
        format!(
            "{}cam_{}",
            if self.negate { '-' } else { '+' },
            ["x", "y", "z"][self.axis]
        )
    }
}

/// Signed permutation sending camera axes to world axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AxisMap {
    world: [SignedAxis; 3],
}

impl AxisMap {
    pub fn new(world: [SignedAxis; 3]) -> Result<Self, PoseError> {
        let mut seen = [false; 3];
        for a in world {
            if a.axis > 2 || seen[a.axis] {
                return Err(PoseError::InvalidAxisMap("axes must form a permutation".into()));
            }
            seen[a.axis] = true;
        }
        Ok(Self { world })
    }

    pub fn identity() -> Self {
        Self::new([0, 1, 2].map(|axis| SignedAxis { axis, negate: false })).unwrap()
    }

    /// The implied 3×3 matrix; rows are world axes.
    pub fn matrix(&self) -> nalgebra::Matrix3<f64> {
        let mut m = nalgebra::Matrix3::zeros();
        for (row, a) in self.world.iter().enumerate() {
            m[(row, a.axis)] = if a.negate { -1.0 } else { 1.0 };
        }
        m
    }

    pub fn apply(&self, cam: &Vec3) -> Vec3 {
        Vec3::from_fn(|row, _| {
            let a = self.world[row];
            if a.negate {
                -cam[a.axis]
            } else {
                cam[a.axis]
            }
        })
    }
}

impl Default for AxisMap {
    /// Camera (x right, y down, z depth) → world (x = depth, y = right, z = up).
    fn default() -> Self {
        Self::new([
            SignedAxis { axis: 2, negate: false },
            SignedAxis { axis: 0, negate: false },
            SignedAxis { axis: 1, negate: true },
        ])
        .unwrap()
    }
}

#[derive(Serialize, Deserialize)]
struct AxisMapRepr {
    world_x: String,
    world_y: String,
    world_z: String,
}

impl Serialize for AxisMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        AxisMapRepr {
            world_x: self.world[0].render(),
            world_y: self.world[1].render(),
            world_z: self.world[2].render(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AxisMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = AxisMapRepr::deserialize(d)?;
        let parse = |s: &str| SignedAxis::parse(s).map_err(serde::de::Error::custom);
        AxisMap::new([parse(&r.world_x)?, parse(&r.world_y)?, parse(&r.world_z)?]).map_err(serde::de::Error::custom)
    }
}

/// World-frame targets, one per landmark in [`LandmarkName::ALL`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct FormationTargets {
    pub points: Vec<(LandmarkName, Vec3)>,
    pub head_anchor: Vec3,
}

impl FormationTargets {
    pub fn get(&self, name: LandmarkName) -> Vec3 {
        self.points[name.index()].1
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.points.iter().map(|&(_, p)| p).collect()
    }
}

/// Rebuilds the formation recursively: `P_child = v * L_child + P_parent`,
/// starting from `P_head = head_anchor`.
pub fn build_formation(
    frame: &LandmarkFrame,
    tree: &SkeletonTree,
    head_anchor: Vec3,
    axis_map: &AxisMap,
) -> Result<FormationTargets, PoseError> {
    let world = to_head_frame(frame).map(|p| axis_map.apply(&p));
    let dirs = unit_vectors(&world, tree)?;

    let mut placed = [None; LandmarkName::COUNT];
    placed[LandmarkName::Head.index()] = Some(head_anchor);
    for (&(parent, child), dir) in tree.edges().iter().zip(&dirs) {
        let base = placed[parent.index()].expect("tree edges are listed parent-first");
        placed[child.index()] = Some(dir * tree.length(child) + base);
    }

    let points = LandmarkName::ALL
        .iter()
        .map(|&n| (n, placed[n.index()].expect("tree spans all landmarks")))
        .collect();
    Ok(FormationTargets { points, head_anchor })
}

/// Skeleton configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkeletonConfig {
    pub lengths: BTreeMap<LandmarkName, f64>,
    pub axis_map: AxisMap,
    pub head_anchor: [f64; 3],
}

impl Default for SkeletonConfig {
    fn default() -> Self {
        Self {
            lengths: SkeletonTree::default_lengths(),
            axis_map: AxisMap::default(),
            head_anchor: [0.0, 0.0, 2.0],
        }
    }
}

impl SkeletonConfig {
    pub fn tree(&self) -> Result<SkeletonTree, PoseError> {
        SkeletonTree::with_lengths(&self.lengths)
    }

    pub fn head_anchor(&self) -> Vec3 {
        vec3(self.head_anchor)
    }

    pub fn build(&self, frame: &LandmarkFrame) -> Result<FormationTargets, PoseError> {
        build_formation(frame, &self.tree()?, self.head_anchor(), &self.axis_map)
    }
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    t: f64,
    landmarks: BTreeMap<String, [f64; 3]>,
}

impl FrameRecord {
    fn into_frame(self) -> Result<LandmarkFrame, PoseError> {
        let mut points = BTreeMap::new();
        for (k, v) in self.landmarks {
            points.insert(k.parse::<LandmarkName>()?, vec3(v));
        }
        LandmarkFrame::from_map(self.t, &points)
    }
}

/// Serializes a frame as one landmark-stream JSON line (no trailing newline).
pub fn frame_to_json(frame: &LandmarkFrame) -> String {
    let rec = FrameRecord {
        t: frame.t,
        landmarks: LandmarkName::ALL
            .iter()
            .map(|&n| {
                let p = frame.get(n);
                (n.as_str().to_string(), [p.x, p.y, p.z])
            })
            .collect(),
    };
    serde_json::to_string(&rec).expect("finite frame serializes")
}

/// Parses one landmark-stream line.
pub fn parse_frame_line(line: &str) -> Result<LandmarkFrame, String> {
    let rec: FrameRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    rec.into_frame().map_err(|e| e.to_string())
}

/// Strict JSONL reader: any malformed line or timestamp regression is an error.
pub fn load_landmark_stream(path: impl AsRef<Path>) -> Result<Vec<LandmarkFrame>, PoseError> {
    let reader = BufReader::new(File::open(path)?);
    let mut frames: Vec<LandmarkFrame> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let frame = parse_frame_line(&line).map_err(|message| PoseError::Parse { line: lineno, message })?;
        if let Some(prev) = frames.last() {
            if frame.t < prev.t {
                return Err(PoseError::OutOfOrder {
                    line: lineno,
                    t: frame.t,
                    prev: prev.t,
                });
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Replay reader: lines that fail parsing or validation, or go back in time,
/// are skipped with a warning. Only I/O failures are errors.
pub fn load_landmark_stream_lenient(path: impl AsRef<Path>) -> Result<Vec<LandmarkFrame>, PoseError> {
    let reader = BufReader::new(File::open(path)?);
    let mut frames: Vec<LandmarkFrame> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_frame_line(&line) {
            Ok(frame) => match frames.last() {
                Some(prev) if frame.t < prev.t => {
                    log::warn!("line {}: skipping out-of-order frame at t={}", i + 1, frame.t)
                }
                _ => frames.push(frame),
            },
            Err(e) => log::warn!("line {}: skipping invalid frame: {e}", i + 1),
        }
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_1_SQRT_2;
    use std::io::Write;

    fn frame_with(head: Vec3, other: Vec3) -> LandmarkFrame {
        let mut lm = [other; 9];
        lm[0] = head;
        LandmarkFrame::new(0.0, lm).unwrap()
    }

    #[test]
    fn head_frame_subtracts_head() {
        let f = frame_with(Vec3::new(0.5, 0.5, 0.0), Vec3::new(0.5, 0.5, 0.0));
        assert!(to_head_frame(&f).iter().all(|p| *p == Vec3::zeros()));

        let f = frame_with(Vec3::new(0.5, 0.5, 0.0), Vec3::new(0.5, 0.6, 0.0));
        let neck = to_head_frame(&f)[LandmarkName::Neck.index()];
        assert_relative_eq!(neck, Vec3::new(0.0, 0.1, 0.0), epsilon = 1e-15);

        let f = frame_with(Vec3::new(0.2, 0.3, 0.1), Vec3::new(0.5, 0.1, 0.4));
        let hand = to_head_frame(&f)[LandmarkName::RightHand.index()];
        // oracle: componentwise difference
        let expected = Vec3::new(0.5 - 0.2, 0.1 - 0.3, 0.4 - 0.1);
        assert_eq!(hand, expected);
        assert_relative_eq!(hand, Vec3::new(0.3, -0.2, 0.3), epsilon = 1e-15);
    }

    fn two_point(child: Vec3, parent: Vec3) -> Result<Vec<Vec3>, PoseError> {
        let mut lm = [Vec3::zeros(); 9];
        // chain every edge off distinct offsets so only head->neck is under test
        for (k, n) in LandmarkName::ALL.iter().enumerate() {
            lm[n.index()] = Vec3::new(k as f64, 10.0 * k as f64, 0.0);
        }
        lm[LandmarkName::Head.index()] = parent;
        lm[LandmarkName::Neck.index()] = child;
        unit_vectors(&lm, &SkeletonTree::default())
    }

    #[test]
    fn unit_vector_examples() {
        let v = two_point(Vec3::new(1.0, 0.0, 0.0), Vec3::zeros()).unwrap();
        assert_eq!(v[0], Vec3::new(1.0, 0.0, 0.0));
        let v = two_point(Vec3::new(0.0, 2.0, 0.0), Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(v[0], Vec3::new(0.0, 1.0, 0.0));
        let v = two_point(Vec3::new(1.0, 1.0, 0.0), Vec3::zeros()).unwrap();
        assert_relative_eq!(v[0], Vec3::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0), epsilon = 1e-15);
        for u in &v {
            assert!((u.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn coincident_landmarks_are_degenerate() {
        let err = two_point(Vec3::new(0.3, 0.3, 0.3), Vec3::new(0.3, 0.3, 0.3)).unwrap_err();
        match err {
            PoseError::DegenerateSegment { parent, child, .. } => {
                assert_eq!((parent, child), (LandmarkName::Head, LandmarkName::Neck));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn axis_map_is_signed_permutation() {
        for m in [AxisMap::default(), AxisMap::identity()] {
            let det = m.matrix().determinant();
            assert!((det.abs() - 1.0).abs() < 1e-15);
            let v = Vec3::new(0.1, -0.7, 2.5);
            assert_eq!(m.apply(&v), m.matrix() * v);
        }
        let m = AxisMap::default();
        // image "down" is world "down"
        assert_eq!(m.apply(&Vec3::new(0.0, 1.0, 0.0)), Vec3::new(0.0, 0.0, -1.0));
        let dup = [SignedAxis { axis: 0, negate: false }; 3];
        assert!(AxisMap::new(dup).is_err());
    }

    #[test]
    fn axis_map_json_round_trip() {
        let json = r#"{"world_x":"+cam_z","world_y":"+cam_x","world_z":"-cam_y"}"#;
        let m: AxisMap = serde_json::from_str(json).unwrap();
        assert_eq!(m, AxisMap::default());
        assert_eq!(serde_json::to_string(&m).unwrap(), json);
        assert!(
            serde_json::from_str::<AxisMap>(r#"{"world_x":"+cam_x","world_y":"+cam_x","world_z":"-cam_y"}"#).is_err()
        );
    }

    #[test]
    fn collinear_neck_below_head() {
        // camera y points down, so neck lower in the image sits below the head in the world
        let mut lm = [Vec3::zeros(); 9];
        for (k, n) in LandmarkName::ALL.iter().enumerate() {
            lm[n.index()] = Vec3::new(0.1 * k as f64, 0.05 * k as f64, 0.0);
        }
        lm[0] = Vec3::new(0.5, 0.2, 0.0);
        lm[1] = Vec3::new(0.5, 0.3, 0.0);
        let frame = LandmarkFrame::new(0.0, lm).unwrap();
        let f = build_formation(
            &frame,
            &SkeletonTree::default(),
            Vec3::new(0.0, 0.0, 2.0),
            &AxisMap::default(),
        )
        .unwrap();
        assert_eq!(f.get(LandmarkName::Head), Vec3::new(0.0, 0.0, 2.0));
        assert_relative_eq!(f.get(LandmarkName::Neck), Vec3::new(0.0, 0.0, 1.75), epsilon = 1e-15);
    }

    #[test]
    fn lattice_hand_trace() {
        // identity axes, unit lengths, every edge axis-aligned
        use LandmarkName::*;
        let cam: BTreeMap<LandmarkName, Vec3> = BTreeMap::from([
            (Head, Vec3::new(0.0, 0.0, 0.0)),
            (Neck, Vec3::new(0.0, 0.0, -0.1)),
            (Torso, Vec3::new(0.0, 0.0, -0.4)),
            (LeftShoulder, Vec3::new(0.2, 0.0, -0.1)),
            (RightShoulder, Vec3::new(-0.2, 0.0, -0.1)),
            (LeftElbow, Vec3::new(0.2, 0.3, -0.1)),
            (RightElbow, Vec3::new(-0.2, 0.0, -0.5)),
            (LeftHand, Vec3::new(0.2, 0.3, 0.2)),
            (RightHand, Vec3::new(-0.7, 0.0, -0.5)),
        ]);
        let frame = LandmarkFrame::from_map(0.0, &cam).unwrap();
        let ones = LandmarkName::ALL
            .iter()
            .map(|&n| (n, 1.0))
            .filter(|(n, _)| *n != Head)
            .collect();
        let tree = SkeletonTree::with_lengths(&ones).unwrap();
        let f = build_formation(&frame, &tree, Vec3::zeros(), &AxisMap::identity()).unwrap();
        // hand trace of the recursion
        let expected: BTreeMap<LandmarkName, Vec3> = BTreeMap::from([
            (Head, Vec3::new(0.0, 0.0, 0.0)),
            (Neck, Vec3::new(0.0, 0.0, -1.0)),
            (Torso, Vec3::new(0.0, 0.0, -2.0)),
            (LeftShoulder, Vec3::new(1.0, 0.0, -1.0)),
            (RightShoulder, Vec3::new(-1.0, 0.0, -1.0)),
            (LeftElbow, Vec3::new(1.0, 1.0, -1.0)),
            (RightElbow, Vec3::new(-1.0, 0.0, -2.0)),
            (LeftHand, Vec3::new(1.0, 1.0, 0.0)),
            (RightHand, Vec3::new(-2.0, 0.0, -2.0)),
        ]);
        for (name, p) in &f.points {
            assert_eq!(*p, expected[name], "{name}");
        }
    }

    #[test]
    fn missing_length_override_uses_default_and_bad_length_rejected() {
        let t = SkeletonTree::with_lengths(&BTreeMap::from([(LandmarkName::Torso, 0.5)])).unwrap();
        assert_eq!(t.length(LandmarkName::Torso), 0.5);
        assert_eq!(t.length(LandmarkName::Neck), 0.25);
        assert!(SkeletonTree::with_lengths(&BTreeMap::from([(LandmarkName::Neck, 0.0)])).is_err());
        assert!(SkeletonTree::with_lengths(&BTreeMap::from([(LandmarkName::Neck, -1.0)])).is_err());
    }

    #[test]
    fn non_finite_frame_rejected() {
        let mut lm = [Vec3::zeros(); 9];
        lm[4] = Vec3::new(f64::NAN, 0.0, 0.0);
        assert!(matches!(
            LandmarkFrame::new(0.0, lm),
            Err(PoseError::NonFinite(LandmarkName::RightShoulder))
        ));
    }

    fn line(t: f64, skip: Option<&str>) -> String {
        let names = [
            "head",
            "neck",
            "torso",
            "l_shoulder",
            "r_shoulder",
            "l_elbow",
            "r_elbow",
            "l_hand",
            "r_hand",
        ];
        let body: Vec<String> = names
            .iter()
            .enumerate()
            .filter(|(_, n)| Some(**n) != skip)
            .map(|(k, n)| format!("\"{n}\":[{},{},0.0]", 0.1 * k as f64, 0.05 * k as f64))
            .collect();
        format!("{{\"t\":{t},\"landmarks\":{{{}}}}}", body.join(","))
    }

    fn write_lines(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn stream_loading() {
        let empty = write_lines(&[]);
        assert!(load_landmark_stream(empty.path()).unwrap().is_empty());

        let one = write_lines(&[line(0.033, None)]);
        let frames = load_landmark_stream(one.path()).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].t, 0.033);
        assert_eq!(frames[0].get(LandmarkName::Torso), Vec3::new(0.2, 0.1, 0.0));

        let missing = write_lines(&[line(0.0, None), line(0.1, Some("neck"))]);
        match load_landmark_stream(missing.path()).unwrap_err() {
            PoseError::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("neck"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }

        let backwards = write_lines(&[line(0.5, None), line(0.1, None)]);
        assert!(matches!(
            load_landmark_stream(backwards.path()),
            Err(PoseError::OutOfOrder { line: 2, .. })
        ));

        let lenient = load_landmark_stream_lenient(missing.path()).unwrap();
        assert_eq!(lenient.len(), 1);
        let lenient = load_landmark_stream_lenient(backwards.path()).unwrap();
        assert_eq!(lenient.len(), 1);
    }

    #[test]
    fn frame_json_round_trip() {
        let f = parse_frame_line(&line(1.5, None)).unwrap();
        assert_eq!(parse_frame_line(&frame_to_json(&f)).unwrap(), f);
    }
}
