//! Events, event packets and the parametric motion warps.
//!
//! An event at normalized camera coordinates `x = (x, y, 1)` is moved to the
//! packet reference time by
//!
//! * rotation: `x' = x + (t_ref - t) ω × x`
//! * translation: `x' = x + (t_ref - t) v`
//!
//! and then perspective-projected to `(x'₀/x'₂, x'₁/x'₂)`. Jacobians of the
//! projected coordinates with respect to the three motion parameters are
//! returned alongside the points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::binning::WeightedPoints;
use crate::error::{Error, Result};

/// Events whose projective depth falls below this are excluded.
pub const PROJECTION_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// `-1` or `+1`.
    pub polarity: i8,
}

impl Event {
    pub fn new(t: f64, x: f64, y: f64, polarity: i8) -> Self {
        Self { t, x, y, polarity }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefTimePolicy {
    #[default]
    Mean,
    Midpoint,
    First,
    Last,
}

impl FromStr for RefTimePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Self::Mean),
            "midpoint" | "mid" => Ok(Self::Midpoint),
            "first" => Ok(Self::First),
            "last" => Ok(Self::Last),
            other => Err(Error::InvalidParameter(format!("unknown t_ref policy `{other}`"))),
        }
    }
}

/// Non-empty, time-sorted run of events sharing one reference time.
#[derive(Debug, Clone, PartialEq)]
pub struct EventPacket {
    events: Vec<Event>,
    t_ref: f64,
}

impl EventPacket {
    pub fn new(events: Vec<Event>, policy: RefTimePolicy) -> Result<Self> {
        validate_events(&events)?;
        let t_ref = reference_time_of(&events, policy);
        Ok(Self { events, t_ref })
    }

    pub fn with_t_ref(events: Vec<Event>, t_ref: f64) -> Result<Self> {
        validate_events(&events)?;
        let (first, last) = (events[0].t, events[events.len() - 1].t);
        if !(t_ref >= first && t_ref <= last) {
            return Err(Error::InvalidPacket(format!(
                "t_ref {t_ref} outside [{first}, {last}]"
            )));
        }
        Ok(Self { events, t_ref })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn t_ref(&self) -> f64 {
        self.t_ref
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }
}

fn validate_events(events: &[Event]) -> Result<()> {
    if events.is_empty() {
        return Err(Error::InvalidPacket("packet has no events".into()));
    }
    for (i, e) in events.iter().enumerate() {
        if !(e.t.is_finite() && e.x.is_finite() && e.y.is_finite()) {
            return Err(Error::InvalidPacket(format!("event {i} is not finite")));
        }
        if e.polarity != 1 && e.polarity != -1 {
            return Err(Error::InvalidPacket(format!(
                "event {i} has polarity {}",
                e.polarity
            )));
        }
    }
    if events.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(Error::InvalidPacket("timestamps decrease".into()));
    }
    Ok(())
}

pub(crate) fn reference_time_of(events: &[Event], policy: RefTimePolicy) -> f64 {
    let first = events[0].t;
    let last = events[events.len() - 1].t;
    match policy {
        RefTimePolicy::Mean => {
            let mean = events.iter().map(|e| e.t).sum::<f64>() / events.len() as f64;
            // Rounding can push the mean a hair outside the range.
            mean.clamp(first, last)
        }
        RefTimePolicy::Midpoint => 0.5 * (first + last),
        RefTimePolicy::First => first,
        RefTimePolicy::Last => last,
    }
}

pub fn reference_time(packet: &EventPacket, policy: RefTimePolicy) -> f64 {
    reference_time_of(packet.events(), policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionModel {
    /// Angular velocity `ω` in rad/s.
    Rotational,
    /// Linear velocity `v` in scene units per second.
    Translational,
}

impl MotionModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rotational => "rot",
            Self::Translational => "trans",
        }
    }
}

impl fmt::Display for MotionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MotionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rot" | "rotational" | "rotation" => Ok(Self::Rotational),
            "trans" | "translational" | "translation" => Ok(Self::Translational),
            other => Err(Error::InvalidParameter(format!("unknown motion model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    pub model: MotionModel,
    pub theta: [f64; 3],
}

impl MotionParams {
    pub fn rotational(omega: [f64; 3]) -> Self {
        Self {
            model: MotionModel::Rotational,
            theta: omega,
        }
    }

    pub fn translational(v: [f64; 3]) -> Self {
        Self {
            model: MotionModel::Translational,
            theta: v,
        }
    }
}

/// How each event's binning weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventWeighting {
    #[default]
    Unit,
    Polarity,
}

impl EventWeighting {
    fn weight(self, e: &Event) -> f64 {
        match self {
            Self::Unit => 1.0,
            Self::Polarity => f64::from(e.polarity),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// Divide by the third homogeneous coordinate.
    #[default]
    Perspective,
    /// Keep the first two homogeneous coordinates as they are.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WarpOptions {
    pub weighting: EventWeighting,
    pub projection: Projection,
}

/// Warped points plus `∂(x', y')/∂θ` per kept event.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpResult {
    pub points: WeightedPoints,
    /// Row 0 is `∂x'/∂θ`, row 1 is `∂y'/∂θ`.
    pub jacobian: Vec<[[f64; 3]; 2]>,
    /// Index into the packet of each kept event.
    pub kept: Vec<usize>,
    /// Events dropped by the projection guard.
    pub excluded: usize,
}

impl WarpResult {
    /// Contracts per-point gradients with the warp Jacobians: `Σ_i Jᵢᵀ gᵢ`.
    pub fn pullback(&self, gx: &[f64], gy: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for ((jac, &a), &b) in self.jacobian.iter().zip(gx).zip(gy) {
            for c in 0..3 {
                out[c] += jac[0][c] * a + jac[1][c] * b;
            }
        }
        out
    }
}

/// Homogeneous warp of a single event and `∂x'/∂θ` (3×3, row = component).
#[inline]
fn homogeneous(model: MotionModel, e: &Event, t_ref: f64, theta: &[f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let dt = t_ref - e.t;
    let (x, y) = (e.x, e.y);
    match model {
        MotionModel::Rotational => {
            let [wx, wy, wz] = *theta;
            // ω × (x, y, 1)
            let cross = [wy - wz * y, wz * x - wx, wx * y - wy * x];
            let p = [x + dt * cross[0], y + dt * cross[1], 1.0 + dt * cross[2]];
            let d = [
                [0.0, dt, -dt * y],
                [-dt, 0.0, dt * x],
                [dt * y, -dt * x, 0.0],
            ];
            (p, d)
        }
        MotionModel::Translational => {
            let [vx, vy, vz] = *theta;
            let p = [x + dt * vx, y + dt * vy, 1.0 + dt * vz];
            let d = [[dt, 0.0, 0.0], [0.0, dt, 0.0], [0.0, 0.0, dt]];
            (p, d)
        }
    }
}

/// Pre-projection homogeneous coordinates of every event.
pub fn warp_homogeneous(packet: &EventPacket, params: &MotionParams) -> Vec<[f64; 3]> {
    packet
        .events()
        .iter()
        .map(|e| homogeneous(params.model, e, packet.t_ref(), &params.theta).0)
        .collect()
}

pub fn warp(packet: &EventPacket, params: &MotionParams, opts: &WarpOptions) -> WarpResult {
    let n = packet.len();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    let mut jacobian = Vec::with_capacity(n);
    let mut kept = Vec::with_capacity(n);
    let mut excluded = 0;
    for (i, e) in packet.events().iter().enumerate() {
        let (p, d) = homogeneous(params.model, e, packet.t_ref(), &params.theta);
        let (px, py, jac) = match opts.projection {
            Projection::Perspective => {
                if p[2].abs() < PROJECTION_GUARD {
                    excluded += 1;
                    continue;
                }
                let inv = 1.0 / p[2];
                let (px, py) = (p[0] * inv, p[1] * inv);
                let mut jac = [[0.0; 3]; 2];
                for c in 0..3 {
                    jac[0][c] = inv * (d[0][c] - px * d[2][c]);
                    jac[1][c] = inv * (d[1][c] - py * d[2][c]);
                }
                (px, py, jac)
            }
            Projection::Drop => (p[0], p[1], [d[0], d[1]]),
        };
        xs.push(px);
        ys.push(py);
        ws.push(opts.weighting.weight(e));
        jacobian.push(jac);
        kept.push(i);
    }
    if excluded > 0 {
        log::debug!("projection guard excluded {excluded} of {n} events");
    }
    WarpResult {
        points: WeightedPoints { xs, ys, ws },
        jacobian,
        kept,
        excluded,
    }
}

pub fn warp_rotational(packet: &EventPacket, omega: [f64; 3], opts: &WarpOptions) -> WarpResult {
    warp(packet, &MotionParams::rotational(omega), opts)
}

pub fn warp_translational(packet: &EventPacket, v: [f64; 3], opts: &WarpOptions) -> WarpResult {
    warp(packet, &MotionParams::translational(v), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn packet_at(t: f64, x: f64, y: f64, t_ref: f64) -> EventPacket {
        let lo = t.min(t_ref);
        let hi = t.max(t_ref);
        let mut evs = vec![Event::new(lo, 0.0, 0.0, 1), Event::new(hi, 0.0, 0.0, 1)];
        let idx = if t <= t_ref { 0 } else { 1 };
        evs[idx] = Event::new(t, x, y, 1);
        EventPacket::with_t_ref(evs, t_ref).unwrap()
    }

    #[test]
    fn rotation_about_optical_axis_example() {
        let p = packet_at(0.0, 1.0, 0.0, 0.5);
        let w = warp_rotational(&p, [0.0, 0.0, 1.0], &WarpOptions::default());
        assert_abs_diff_eq!(w.points.xs[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.points.ys[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn translation_example() {
        let p = packet_at(0.0, 1.0, 1.0, 0.5);
        let w = warp_translational(&p, [2.0, 0.0, 0.0], &WarpOptions::default());
        assert_eq!((w.points.xs[0], w.points.ys[0]), (2.0, 1.0));
    }

    #[test]
    fn zero_motion_is_identity() {
        let evs: Vec<Event> = (0..10)
            .map(|i| Event::new(i as f64 * 0.01, 0.1 * i as f64 - 0.3, 0.05 * i as f64, 1))
            .collect();
        let p = EventPacket::new(evs.clone(), RefTimePolicy::Mean).unwrap();
        for model in [MotionModel::Rotational, MotionModel::Translational] {
            let w = warp(&p, &MotionParams { model, theta: [0.0; 3] }, &WarpOptions::default());
            for (i, e) in evs.iter().enumerate() {
                assert_eq!(w.points.xs[i], e.x);
                assert_eq!(w.points.ys[i], e.y);
            }
        }
        // At θ = 0 the projected rotational Jacobian is
        // dt · [[-xy, 1 + x², -y], [-(1 + y²), xy, x]].
        let w = warp_rotational(&p, [0.0; 3], &WarpOptions::default());
        let dt = p.t_ref() - evs[3].t;
        let (x, y) = (evs[3].x, evs[3].y);
        let expect = [
            [-dt * x * y, dt * (1.0 + x * x), -dt * y],
            [-dt * (1.0 + y * y), dt * x * y, dt * x],
        ];
        for r in 0..2 {
            for c in 0..3 {
                assert_abs_diff_eq!(w.jacobian[3][r][c], expect[r][c], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn reference_time_policies() {
        let evs: Vec<Event> = [0.0, 1.0, 2.0].iter().map(|&t| Event::new(t, 0.0, 0.0, 1)).collect();
        let p = EventPacket::new(evs, RefTimePolicy::Mean).unwrap();
        assert_eq!(reference_time(&p, RefTimePolicy::Mean), 1.0);
        let evs = vec![Event::new(0.0, 0.0, 0.0, 1), Event::new(4.0, 0.0, 0.0, 1)];
        let p = EventPacket::new(evs, RefTimePolicy::Midpoint).unwrap();
        assert_eq!(p.t_ref(), 2.0);
        let single = EventPacket::new(vec![Event::new(3.0, 0.0, 0.0, -1)], RefTimePolicy::Mean).unwrap();
        for policy in [RefTimePolicy::Mean, RefTimePolicy::Midpoint, RefTimePolicy::First, RefTimePolicy::Last] {
            assert_eq!(reference_time(&single, policy), 3.0);
        }
    }

    #[test]
    fn packet_validation() {
        assert!(EventPacket::new(vec![], RefTimePolicy::Mean).is_err());
        let unsorted = vec![Event::new(1.0, 0.0, 0.0, 1), Event::new(0.5, 0.0, 0.0, 1)];
        assert!(EventPacket::new(unsorted, RefTimePolicy::Mean).is_err());
        assert!(EventPacket::new(vec![Event::new(0.0, 0.0, 0.0, 0)], RefTimePolicy::Mean).is_err());
        let evs = vec![Event::new(0.0, 0.0, 0.0, 1), Event::new(1.0, 0.0, 0.0, 1)];
        assert!(EventPacket::with_t_ref(evs, 2.0).is_err());
    }

    #[test]
    fn degenerate_projection_is_excluded() {
        // dt·(ωx·y − ωy·x) = -1 makes the depth vanish.
        let p = packet_at(0.0, 1.0, 0.0, 1.0);
        let w = warp_rotational(&p, [0.0, 1.0, 0.0], &WarpOptions::default());
        assert_eq!(w.excluded, 1);
        assert_eq!(w.points.len(), 1);
        assert_eq!(w.kept, vec![1]);
    }

    #[test]
    fn polarity_weighting() {
        let evs = vec![Event::new(0.0, 0.0, 0.0, -1), Event::new(1.0, 0.0, 0.0, 1)];
        let p = EventPacket::new(evs, RefTimePolicy::Mean).unwrap();
        let opts = WarpOptions {
            weighting: EventWeighting::Polarity,
            ..Default::default()
        };
        let w = warp_rotational(&p, [0.1, 0.2, 0.3], &opts);
        assert_eq!(w.points.ws, vec![-1.0, 1.0]);
    }
}
