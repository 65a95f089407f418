//! Parameterised gesture clips standing in for recorded landmark videos.
//!
//! Coordinates follow the usual normalised image convention: x to the right,
//! y down, z depth, roughly in `[0, 1]`. Every clip is 30 frames at 30 fps.
//! Jitter (tempo, amplitude, body scale, placement) and additive noise all
//! scale with `noise_level`, so `noise_level == 0` yields one fixed clip per
//! class.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::emotion::Emotion;
use crate::lstm::{featurize, GestureSequence, SEQUENCE_LEN};
use crate::pose::{LandmarkFrame, LandmarkName, Landmarks};
use crate::Vec3;

pub const DEFAULT_NOISE: f64 = 0.01;
pub const FRAME_RATE: f64 = 30.0;

const UPPER_ARM: f64 = 0.13;
const FOREARM: f64 = 0.12;

/// Static T-pose: arms straight out to the sides at shoulder height.
pub fn t_pose(t: f64) -> LandmarkFrame {
    use LandmarkName::*;
    let mut lm = [Vec3::zeros(); LandmarkName::COUNT];
    let mut set = |n: LandmarkName, x: f64, y: f64| lm[n.index()] = Vec3::new(x, y, 0.0);
    set(Head, 0.5, 0.2);
    set(Neck, 0.5, 0.3);
    set(Torso, 0.5, 0.55);
    set(LeftShoulder, 0.6, 0.3);
    set(RightShoulder, 0.4, 0.3);
    set(LeftElbow, 0.75, 0.3);
    set(RightElbow, 0.25, 0.3);
    set(LeftHand, 0.9, 0.3);
    set(RightHand, 0.1, 0.3);
    LandmarkFrame::new(t, lm).expect("finite")
}

/// Per-clip random variation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClipJitter {
    pub tempo: f64,
    pub phase: f64,
    pub amplitude: f64,
    pub scale: f64,
    pub offset: Vec3,
}

impl ClipJitter {
    pub const NONE: ClipJitter = ClipJitter {
        tempo: 1.0,
        phase: 0.0,
        amplitude: 1.0,
        scale: 1.0,
        offset: Vec3::new(0.0, 0.0, 0.0),
    };

    pub fn sample<R: Rng>(noise_level: f64, rng: &mut R) -> Self {
        if noise_level <= 0.0 {
            return Self::NONE;
        }
        let mut sym = |w: f64| rng.random_range(-w..=w);
        Self {
            tempo: 1.0 + sym(10.0 * noise_level),
            phase: sym(5.0 * noise_level),
            amplitude: 1.0 + sym(10.0 * noise_level),
            scale: 1.0 + sym(15.0 * noise_level),
            offset: Vec3::new(sym(5.0 * noise_level), sym(3.0 * noise_level), sym(3.0 * noise_level)),
        }
    }
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Unit direction in the image plane at `angle` radians away from straight
/// down, opening toward `side` (+1 image right, −1 image left).
fn limb(side: f64, angle: f64) -> Vec3 {
    Vec3::new(side * angle.sin(), angle.cos(), 0.0)
}

/// Noise-free pose of `emotion` at motion progress `s ∈ [0, 1]`.
pub fn template_pose(emotion: Emotion, s: f64, amplitude: f64) -> Landmarks {
    use LandmarkName::*;
    let ramp = smoothstep(s);
    let mut head = Vec3::new(0.5, 0.2, 0.0);
    let neck = Vec3::new(0.5, 0.3, 0.0);
    let torso = Vec3::new(0.5, 0.55, 0.0);
    let mut shoulders = [Vec3::new(0.6, 0.32, 0.0), Vec3::new(0.4, 0.32, 0.0)];
    let sides = [1.0, -1.0];
    let mut elbows = [Vec3::zeros(); 2];
    let mut hands = [Vec3::zeros(); 2];

    // arms hanging at the sides
    let rest = |sh: Vec3, side: f64| {
        let e = sh + limb(side, 0.15) * UPPER_ARM;
        (e, e + limb(side, 0.05) * FOREARM)
    };

    match emotion {
        Emotion::Neutral => {
            let sway = 0.01 * amplitude * (2.0 * PI * s).sin();
            head.x += sway;
            for k in 0..2 {
                (elbows[k], hands[k]) = rest(shoulders[k], sides[k]);
            }
        }
        Emotion::Happy => {
            // both arms sweep up into a V above the head
            let up = amplitude * ramp * 2.6;
            for k in 0..2 {
                let side = sides[k];
                elbows[k] = shoulders[k] + limb(side, 0.15 + up) * UPPER_ARM;
                hands[k] = elbows[k] + limb(side, 0.05 + up * 1.05) * FOREARM;
            }
        }
        Emotion::Sad => {
            // head drops, shoulders sag, hands drift in front of the belly
            head.y += 0.06 * amplitude * ramp;
            head.z -= 0.03 * amplitude * ramp;
            for k in 0..2 {
                let side = sides[k];
                shoulders[k].y += 0.03 * amplitude * ramp;
                shoulders[k].x -= side * 0.015 * amplitude * ramp;
                elbows[k] = shoulders[k] + limb(side, 0.1) * UPPER_ARM;
                hands[k] = elbows[k] + limb(side, 0.05 - 0.9 * amplitude * ramp) * FOREARM;
            }
        }
        Emotion::Angry => {
            // elbows out, forearms raised, fists shaking
            let lift = amplitude * smoothstep(2.5 * s);
            let shake = 0.35 * (2.0 * PI * 3.0 * s).sin();
            for k in 0..2 {
                let side = sides[k];
                elbows[k] = shoulders[k] + limb(side, 0.15 + 1.1 * lift) * UPPER_ARM;
                hands[k] = elbows[k] + limb(side, 0.05 + lift * (PI - 0.3 + shake)) * FOREARM;
            }
        }
        Emotion::Confused => {
            // right hand to the side of the head, left shoulder shrugs
            head.x -= 0.02 * amplitude * ramp;
            let [l, r] = [0usize, 1usize];
            shoulders[l].y -= 0.035 * amplitude * ramp;
            (elbows[l], hands[l]) = rest(shoulders[l], sides[l]);
            hands[l] = elbows[l] + limb(sides[l], 0.05 + 1.3 * amplitude * ramp) * FOREARM;
            let (re, rh) = rest(shoulders[r], sides[r]);
            let scratch_elbow = shoulders[r] + Vec3::new(-0.11, -0.04, 0.0);
            let scratch_hand = head + Vec3::new(-0.06, 0.0, 0.0);
            let w = (amplitude * ramp).min(1.0);
            elbows[r] = re.lerp(&scratch_elbow, w);
            hands[r] = rh.lerp(&scratch_hand, w);
        }
    }

    let mut lm = [Vec3::zeros(); LandmarkName::COUNT];
    lm[Head.index()] = head;
    lm[Neck.index()] = neck;
    lm[Torso.index()] = torso;
    lm[LeftShoulder.index()] = shoulders[0];
    lm[RightShoulder.index()] = shoulders[1];
    lm[LeftElbow.index()] = elbows[0];
    lm[RightElbow.index()] = elbows[1];
    lm[LeftHand.index()] = hands[0];
    lm[RightHand.index()] = hands[1];
    lm
}

/// One 30-frame clip starting at time `t0`.
pub fn generate_clip<R: Rng>(emotion: Emotion, noise_level: f64, t0: f64, rng: &mut R) -> Vec<LandmarkFrame> {
    let jitter = ClipJitter::sample(noise_level, rng);
    let noise = Normal::new(0.0, noise_level.max(0.0)).expect("valid sigma");
    (0..SEQUENCE_LEN)
        .map(|k| {
            let s = (k as f64 / (SEQUENCE_LEN - 1) as f64) * jitter.tempo + jitter.phase;
            let base = template_pose(emotion, s, jitter.amplitude);
            let head = base[LandmarkName::Head.index()];
            let lm = base.map(|p| {
                let mut q = head + (p - head) * jitter.scale + jitter.offset;
                if noise_level > 0.0 {
                    q += Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
                }
                q
            });
            LandmarkFrame::new(t0 + k as f64 / FRAME_RATE, lm).expect("finite")
        })
        .collect()
}

/// Labelled dataset with `n_per_class` sequences per emotion, classes interleaved.
pub fn generate_synthetic_dataset(n_per_class: usize, noise_level: f64, seed: u64) -> Vec<GestureSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_per_class * Emotion::COUNT);
    for _ in 0..n_per_class {
        for e in Emotion::ALL {
            let clip = generate_clip(e, noise_level, 0.0, &mut rng);
            let mut seq = featurize(&clip).expect("clip has 30 frames");
            seq.label = Some(e);
            out.push(seq);
        }
    }
    out
}

/// Back-to-back clips as one continuous landmark stream.
pub fn generate_stream(emotions: &[Emotion], noise_level: f64, seed: u64) -> Vec<LandmarkFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(emotions.len() * SEQUENCE_LEN);
    for (i, &e) in emotions.iter().enumerate() {
        let t0 = (i * SEQUENCE_LEN) as f64 / FRAME_RATE;
        out.extend(generate_clip(e, noise_level, t0, &mut rng));
    }
    out
}
