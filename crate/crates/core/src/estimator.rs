//! Contrast-maximization objective `θ ↦ score(bin(warp(packet, θ)))`, its
//! analytic gradient through the binning VJP, and L-BFGS ascent.

use serde::{Deserialize, Serialize};

use crate::binning::{bin_forward, bin_vjp_with_rule, AxisRule, Frame, FrameGrid, GradMode};
use crate::error::{Error, Result};
use crate::kernels::BinningKernelKind;
use crate::lbfgs::{self, LbfgsOptions, OptTrace};
use crate::objectives::ScoreKind;
use crate::warp::{warp, EventPacket, MotionModel, MotionParams, RefTimePolicy, WarpOptions, WarpResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub kernel: BinningKernelKind,
    pub mode: GradMode,
    pub score: ScoreKind,
    pub grid: FrameGrid,
    pub model: MotionModel,
    /// Policy used when packets are built for this objective.
    pub t_ref: RefTimePolicy,
    pub warp: WarpOptions,
}

impl ObjectiveConfig {
    /// Rotational model, variance score, 200×150 bins of 0.01 centred on the
    /// optical axis.
    pub fn new(kernel: BinningKernelKind, mode: GradMode) -> Self {
        Self {
            kernel,
            mode,
            score: ScoreKind::Variance,
            grid: FrameGrid::centered(200, 150, 0.01).expect("static grid is valid"),
            model: MotionModel::Rotational,
            t_ref: RefTimePolicy::Mean,
            warp: WarpOptions::default(),
        }
    }

    pub fn with_mode(mut self, mode: GradMode) -> Self {
        self.mode = mode;
        self
    }
}

/// An [`ObjectiveConfig`] with its gradient rule built once.
#[derive(Debug, Clone)]
pub struct Objective {
    cfg: ObjectiveConfig,
    rule: AxisRule,
}

impl Objective {
    pub fn new(cfg: ObjectiveConfig) -> Result<Self> {
        cfg.grid.validate()?;
        Ok(Self {
            rule: AxisRule::for_mode(cfg.kernel, &cfg.mode),
            cfg,
        })
    }

    pub fn config(&self) -> &ObjectiveConfig {
        &self.cfg
    }

    fn warp(&self, packet: &EventPacket, theta: &[f64; 3]) -> Result<WarpResult> {
        let w = warp(
            packet,
            &MotionParams {
                model: self.cfg.model,
                theta: *theta,
            },
            &self.cfg.warp,
        );
        if w.points.is_empty() && w.excluded > 0 {
            return Err(Error::DegenerateProjection(w.excluded));
        }
        Ok(w)
    }

    /// The Image of Warped Events at `theta`.
    pub fn frame(&self, packet: &EventPacket, theta: &[f64; 3]) -> Result<Frame> {
        let w = self.warp(packet, theta)?;
        bin_forward(&w.points, &self.cfg.grid, self.cfg.kernel)
    }

    pub fn value(&self, packet: &EventPacket, theta: &[f64; 3]) -> Result<f64> {
        self.cfg.score.score(&self.frame(packet, theta)?)
    }

    pub fn value_and_grad(&self, packet: &EventPacket, theta: &[f64; 3]) -> Result<(f64, [f64; 3])> {
        let w = self.warp(packet, theta)?;
        let frame = bin_forward(&w.points, &self.cfg.grid, self.cfg.kernel)?;
        let value = self.cfg.score.score(&frame)?;
        let adjoint = self.cfg.score.adjoint(&frame)?;
        let pg = bin_vjp_with_rule(&w.points, &adjoint, &self.cfg.grid, &self.rule)?;
        Ok((value, w.pullback(&pg.gx, &pg.gy)))
    }

    pub fn grad(&self, packet: &EventPacket, theta: &[f64; 3]) -> Result<[f64; 3]> {
        Ok(self.value_and_grad(packet, theta)?.1)
    }
}

pub fn objective_value(cfg: &ObjectiveConfig, packet: &EventPacket, theta: &[f64; 3]) -> Result<f64> {
    Objective::new(*cfg)?.value(packet, theta)
}

pub fn objective_grad(cfg: &ObjectiveConfig, packet: &EventPacket, theta: &[f64; 3]) -> Result<[f64; 3]> {
    Objective::new(*cfg)?.grad(packet, theta)
}

/// Maximizes the objective with L-BFGS. The trace holds score values (not
/// their negation), so they are nondecreasing.
pub fn lbfgs_maximize(
    objective: &Objective,
    packet: &EventPacket,
    theta0: [f64; 3],
    opts: &LbfgsOptions,
) -> Result<([f64; 3], OptTrace)> {
    let neg = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (v, g) = objective.value_and_grad(packet, &[x[0], x[1], x[2]])?;
        Ok((-v, g.iter().map(|gi| -gi).collect()))
    };
    let (x, mut trace) = lbfgs::minimize(neg, &theta0, opts)?;
    for it in &mut trace.iterates {
        it.value = -it.value;
    }
    Ok(([x[0], x[1], x[2]], trace))
}

/// `sqrt(mean ‖θ̂ - θ‖²)`, in °/s for the rotational model.
pub fn rms_error(estimates: &[[f64; 3]], truths: &[[f64; 3]], model: MotionModel) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch {
            what: "estimates",
            got: estimates.len(),
            expected: truths.len(),
        });
    }
    if estimates.is_empty() {
        return Err(Error::InvalidParameter("no estimates to compare".into()));
    }
    let mse = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| e.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum::<f64>()
        / estimates.len() as f64;
    let rms = mse.sqrt();
    Ok(match model {
        MotionModel::Rotational => rms.to_degrees(),
        MotionModel::Translational => rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rms_examples() {
        let t = [[0.5, -1.0, 2.0]];
        assert_eq!(rms_error(&t, &t, MotionModel::Rotational).unwrap(), 0.0);
        let e = [[1.5, -1.0, 2.0]];
        assert_abs_diff_eq!(rms_error(&e, &t, MotionModel::Rotational).unwrap(), 57.295_779_513, epsilon = 1e-8);
        let e = [[3.0, 0.0, 0.0], [0.0, 4.0, 0.0]];
        let z = [[0.0; 3]; 2];
        assert_abs_diff_eq!(rms_error(&e, &z, MotionModel::Translational).unwrap(), 12.5f64.sqrt(), epsilon = 1e-12);
        assert!(rms_error(&e, &t, MotionModel::Translational).is_err());
        assert!(rms_error(&[], &[], MotionModel::Translational).is_err());
    }
}
