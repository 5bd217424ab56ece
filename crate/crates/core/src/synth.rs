//! Synthetic event packets with a planted motion: point features whose
//! events re-collapse onto a single location when warped with the truth.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::warp::{reference_time_of, Event, MotionModel, MotionParams, RefTimePolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub seed: u64,
    pub n_points: usize,
    pub motion: MotionParams,
    /// Seconds covered by the packet.
    pub duration: f64,
    pub events_per_point: usize,
    /// Standard deviation of the coordinate jitter.
    pub noise_std: f64,
    /// Timestamp of the start of the packet.
    pub t_start: f64,
    /// Features are drawn uniformly from `[-x, x] × [-y, y]`.
    pub extent: (f64, f64),
}

impl SyntheticScene {
    /// 400 features × 50 events over 40 ms, rotating at a random rate
    /// between 1 and 3 rad/s about a random axis.
    pub fn rotational(seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed ^ 0x5e_ed0f_0a6e);
        let axis: [f64; 3] = UnitSphere.sample(&mut rng);
        let speed = rng.gen_range(1.0..3.0);
        Self::with_motion(seed, MotionParams::rotational(axis.map(|a| a * speed)))
    }

    /// Same layout as [`Self::rotational`] with a random velocity between
    /// 0.5 and 1.5 units/s.
    pub fn translational(seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed ^ 0x7a45_1a7e);
        let dir: [f64; 3] = UnitSphere.sample(&mut rng);
        let speed = rng.gen_range(0.5..1.5);
        Self::with_motion(seed, MotionParams::translational(dir.map(|a| a * speed)))
    }

    pub fn with_motion(seed: u64, motion: MotionParams) -> Self {
        Self {
            seed,
            n_points: 400,
            motion,
            duration: 0.04,
            events_per_point: 50,
            noise_std: 0.005,
            t_start: 0.0,
            extent: (0.8, 0.6),
        }
    }

    pub fn n_events(&self) -> usize {
        self.n_points * self.events_per_point
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 || self.events_per_point == 0 {
            return Err(Error::InvalidParameter("scene needs at least one feature and one event".into()));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidParameter(format!("duration {} must be > 0", self.duration)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise_std {} must be >= 0", self.noise_std)));
        }
        if !(self.t_start.is_finite() && self.extent.0 > 0.0 && self.extent.1 > 0.0) {
            return Err(Error::InvalidParameter("scene extent must be positive".into()));
        }
        if self.motion.theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scene motion"));
        }
        Ok(())
    }
}

/// Solves `(I + dt [ω]×) X ∝ (p, 1)` and rescales to `X₃ = 1`.
fn unwarp_rotational(p: (f64, f64), dt: f64, w: [f64; 3]) -> Option<(f64, f64)> {
    let a = [
        [1.0, -dt * w[2], dt * w[1]],
        [dt * w[2], 1.0, -dt * w[0]],
        [-dt * w[1], dt * w[0], 1.0],
    ];
    let b = [p.0, p.1, 1.0];
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    let mut x = [0.0; 3];
    for (c, xc) in x.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *xc = det(&m) / d;
    }
    (x[2].abs() > 1e-9).then(|| (x[0] / x[2], x[1] / x[2]))
}

fn unwarp_translational(p: (f64, f64), dt: f64, v: [f64; 3]) -> Option<(f64, f64)> {
    let s = 1.0 + dt * v[2];
    (s.abs() > 1e-9).then(|| (p.0 * s - dt * v[0], p.1 * s - dt * v[1]))
}

/// Deterministic in `scene`. Events are sorted by time; the packet's mean
/// timestamp is the instant at which the features are sharp.
pub fn synth_events(scene: &SyntheticScene) -> Result<(Vec<Event>, MotionParams)> {
    scene.validate()?;
    let mut rng = StdRng::seed_from_u64(scene.seed);
    let features: Vec<(f64, f64)> = (0..scene.n_points)
        .map(|_| {
            (
                rng.gen_range(-scene.extent.0..=scene.extent.0),
                rng.gen_range(-scene.extent.1..=scene.extent.1),
            )
        })
        .collect();

    let spacing = scene.duration / scene.events_per_point as f64;
    let mut stamps: Vec<(f64, usize)> = Vec::with_capacity(scene.n_events());
    for f in 0..scene.n_points {
        let phase: f64 = rng.gen();
        for k in 0..scene.events_per_point {
            stamps.push((scene.t_start + (k as f64 + phase) * spacing, f));
        }
    }
    stamps.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut events: Vec<Event> = stamps.iter().map(|&(t, _)| Event::new(t, 0.0, 0.0, 1)).collect();
    let t_ref = reference_time_of(&events, RefTimePolicy::Mean);
    let jitter = Normal::new(0.0, scene.noise_std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let theta = scene.motion.theta;
    for (e, &(t, f)) in events.iter_mut().zip(&stamps) {
        let dt = t_ref - t;
        let (x, y) = match scene.motion.model {
            MotionModel::Rotational => unwarp_rotational(features[f], dt, theta),
            MotionModel::Translational => unwarp_translational(features[f], dt, theta),
        }
        .ok_or_else(|| Error::InvalidParameter("planted motion is too fast for the scene duration".into()))?;
        e.x = x + jitter.sample(&mut rng);
        e.y = y + jitter.sample(&mut rng);
        e.polarity = if rng.gen_bool(0.5) { 1 } else { -1 };
    }
    Ok((events, scene.motion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::{warp, EventPacket, WarpOptions};

    fn small(seed: u64, model: MotionModel) -> SyntheticScene {
        let mut s = match model {
            MotionModel::Rotational => SyntheticScene::rotational(seed),
            MotionModel::Translational => SyntheticScene::translational(seed),
        };
        s.n_points = 20;
        s.events_per_point = 15;
        s.noise_std = 0.0;
        s
    }

    #[test]
    fn truth_recollapses_features() {
        for model in [MotionModel::Rotational, MotionModel::Translational] {
            for seed in 0..5 {
                let scene = small(seed, model);
                let (events, truth) = synth_events(&scene).unwrap();
                assert_eq!(events.len(), 300);
                let packet = EventPacket::new(events, RefTimePolicy::Mean).unwrap();
                let w = warp(&packet, &truth, &WarpOptions::default());
                // Group warped points by the feature they landed on.
                let mut centers: Vec<(f64, f64)> = Vec::new();
                for (&x, &y) in w.points.xs.iter().zip(&w.points.ys) {
                    match centers.iter().find(|c| (c.0 - x).abs() < 1e-3 && (c.1 - y).abs() < 1e-3) {
                        Some(c) => assert!((c.0 - x).abs() < 1e-12 && (c.1 - y).abs() < 1e-12),
                        None => centers.push((x, y)),
                    }
                }
                assert_eq!(centers.len(), scene.n_points);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_events(&SyntheticScene::rotational(7)).unwrap();
        let b = synth_events(&SyntheticScene::rotational(7)).unwrap();
        assert_eq!(a, b);
        let c = synth_events(&SyntheticScene::rotational(8)).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn rotational_defaults() {
        let s = SyntheticScene::rotational(3);
        let speed = s.motion.theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((1.0..3.0).contains(&speed));
        assert_eq!(s.n_events(), 20_000);
        let (events, _) = synth_events(&s).unwrap();
        assert!(events.windows(2).all(|w| w[0].t <= w[1].t));
        assert!(events.iter().all(|e| e.t >= 0.0 && e.t <= s.duration));
    }

    #[test]
    fn invalid_scenes() {
        let mut s = SyntheticScene::rotational(0);
        s.duration = 0.0;
        assert!(synth_events(&s).is_err());
        let mut s = SyntheticScene::rotational(0);
        s.n_points = 0;
        assert!(synth_events(&s).is_err());
    }
}
