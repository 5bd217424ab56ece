//! Event binning with functionally backpropagated gradients, and
//! contrast-maximization motion estimation built on top of it.

pub mod analysis;
pub mod binning;
pub mod error;
pub mod estimator;
pub mod io;
pub mod kernels;
pub mod lbfgs;
pub mod objectives;
mod quadrature;
pub mod synth;
pub mod warp;

pub use analysis::{bias_grid, compare_surrogates, degree_of_precision, fd_gradient, BiasReport, GridSpec};
pub use binning::{bin_forward, bin_jvp, bin_vjp, AxisRule, Frame, FrameGrid, GradMode, WeightedPoints};
pub use error::{Error, Result};
pub use estimator::{lbfgs_maximize, objective_grad, objective_value, rms_error, Objective, ObjectiveConfig};
pub use kernels::{BinningKernelKind, ReconKernel, ReconKernelKind, SynthesizedKernel};
pub use lbfgs::{LbfgsOptions, OptTrace, StopReason};
pub use objectives::{NbParams, ScoreKind};
pub use synth::{synth_events, SyntheticScene};
pub use warp::{Event, EventPacket, MotionModel, MotionParams, RefTimePolicy, WarpOptions};
