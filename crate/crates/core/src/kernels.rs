//! Binning kernels `k`, reconstruction kernels `l` and the synthesized kernel
//! `κ = l ∗ k` whose derivative drives the backward pass.
//!
//! All kernels are even and compactly supported. `κ` is available in closed
//! form for every binning kernel paired with the linear (tent) reconstruction
//! kernel; all other pairs are tabulated by numerical convolution on a uniform
//! grid and evaluated with cubic Hermite interpolation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::Error;
use crate::quadrature;

/// Node spacing of tabulated `κ`.
pub const TABLE_STEP: f64 = 1e-3;

/// Largest panel used when convolving kernels numerically.
const CONV_PANEL: f64 = 0.05;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Binning kernel `k` used by the primal pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningKernelKind {
    /// Indicator of `|x| < 1/2` (nearest-bin histogram).
    Rect,
    /// Tent `(1 - |x|)` on `|x| < 1` (bilinear voting).
    Linear,
    /// Standard normal density truncated to `|x| < 3/2`.
    GaussTrunc,
}

impl BinningKernelKind {
    pub const ALL: [BinningKernelKind; 3] = [Self::Rect, Self::Linear, Self::GaussTrunc];

    pub fn radius(self) -> f64 {
        match self {
            Self::Rect => 0.5,
            Self::Linear => 1.0,
            Self::GaussTrunc => 1.5,
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            Self::Rect => {
                if a < 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Linear => {
                if a < 1.0 {
                    1.0 - a
                } else {
                    0.0
                }
            }
            Self::GaussTrunc => {
                if a < 1.5 {
                    INV_SQRT_2PI * (-0.5 * x * x).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Pointwise derivative where it exists; `0` at kinks and jumps.
    ///
    /// This is what plain automatic differentiation of [`eval`](Self::eval)
    /// produces, so `Rect` yields zero everywhere.
    pub fn derivative(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            Self::Rect => 0.0,
            Self::Linear => {
                if a < 1.0 && a > 0.0 {
                    -x.signum()
                } else {
                    0.0
                }
            }
            Self::GaussTrunc => {
                if a < 1.5 {
                    -x * INV_SQRT_2PI * (-0.5 * x * x).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫ k(x) dx`. The truncated Gaussian does not have unit mass.
    pub fn mass(self) -> f64 {
        match self {
            Self::Rect | Self::Linear => 1.0,
            Self::GaussTrunc => erf(1.5 * FRAC_1_SQRT_2),
        }
    }

    /// Points where `k` or one of its derivatives is discontinuous.
    pub fn breakpoints(self) -> &'static [f64] {
        match self {
            Self::Rect => &[-0.5, 0.5],
            Self::Linear => &[-1.0, 0.0, 1.0],
            Self::GaussTrunc => &[-1.5, 1.5],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Rect => "rect",
            Self::Linear => "linear",
            Self::GaussTrunc => "gauss",
        }
    }
}

impl fmt::Display for BinningKernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BinningKernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rect" => Ok(Self::Rect),
            "linear" => Ok(Self::Linear),
            "gauss" | "gauss_trunc" | "gausstrunc" => Ok(Self::GaussTrunc),
            other => Err(Error::InvalidParameter(format!("unknown binning kernel `{other}`"))),
        }
    }
}

/// Reconstruction kernel `l` used to lift the sampled cotangent vector to a
/// continuous cotangent function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconKernelKind {
    /// Tent `max(1 - |x|, 0)`.
    Linear,
    /// Keys cubic convolution kernel (`a = -1/2`).
    Cubic,
    /// Lanczos window with `a = 2`.
    Lanczos,
}

impl ReconKernelKind {
    pub const ALL: [ReconKernelKind; 3] = [Self::Linear, Self::Cubic, Self::Lanczos];

    pub fn radius(self) -> f64 {
        match self {
            Self::Linear => 1.0,
            Self::Cubic | Self::Lanczos => 2.0,
        }
    }

    pub fn breakpoints(self) -> &'static [f64] {
        match self {
            Self::Linear => &[-1.0, 0.0, 1.0],
            Self::Cubic => &[-2.0, -1.0, 0.0, 1.0, 2.0],
            Self::Lanczos => &[-2.0, 2.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Cubic => "cubic",
            Self::Lanczos => "lanczos",
        }
    }

    fn eval_raw(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            Self::Linear => (1.0 - a).max(0.0),
            Self::Cubic => {
                if a < 1.0 {
                    (1.5 * a - 2.5) * a * a + 1.0
                } else if a < 2.0 {
                    ((2.5 - 0.5 * a) * a - 4.0) * a + 2.0
                } else {
                    0.0
                }
            }
            Self::Lanczos => {
                if a <= 2.0 {
                    sinc(x) * sinc(0.5 * x)
                } else {
                    0.0
                }
            }
        }
    }

    fn derivative_raw(self, x: f64) -> f64 {
        let a = x.abs();
        let s = x.signum();
        match self {
            Self::Linear => {
                if a < 1.0 && a > 0.0 {
                    -s
                } else {
                    0.0
                }
            }
            Self::Cubic => {
                if a < 1.0 {
                    s * (4.5 * a - 5.0) * a
                } else if a < 2.0 {
                    s * ((5.0 - 1.5 * a) * a - 4.0)
                } else {
                    0.0
                }
            }
            Self::Lanczos => {
                if a < 2.0 {
                    sinc_prime(x) * sinc(0.5 * x) + 0.5 * sinc(x) * sinc_prime(0.5 * x)
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫ l(x) dx` of the kernel as written (before any renormalization).
    pub fn raw_mass(self) -> f64 {
        match self {
            Self::Linear | Self::Cubic => 1.0,
            Self::Lanczos => {
                static MASS: OnceLock<f64> = OnceLock::new();
                *MASS.get_or_init(|| {
                    quadrature::integrate(
                        |x| Self::Lanczos.eval_raw(x),
                        -2.0,
                        2.0,
                        &[0.0],
                        1e-2,
                    )
                })
            }
        }
    }
}

impl fmt::Display for ReconKernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReconKernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "cubic" => Ok(Self::Cubic),
            "lanczos" => Ok(Self::Lanczos),
            other => Err(Error::InvalidParameter(format!(
                "unknown reconstruction kernel `{other}`"
            ))),
        }
    }
}

fn sinc(x: f64) -> f64 {
    let px = PI * x;
    if px.abs() < 1e-4 {
        let p2 = px * px;
        1.0 - p2 / 6.0 + p2 * p2 / 120.0
    } else {
        px.sin() / px
    }
}

fn sinc_prime(x: f64) -> f64 {
    if (PI * x).abs() < 1e-4 {
        // -(π²/3) x + (π⁴/30) x³
        let p2 = PI * PI;
        -p2 / 3.0 * x + p2 * p2 / 30.0 * x * x * x
    } else {
        ((PI * x).cos() - sinc(x)) / x
    }
}

/// A reconstruction kernel together with its mass normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconKernel {
    kind: ReconKernelKind,
    scale: f64,
}

impl ReconKernel {
    /// Unit-mass kernel. Lanczos is divided by its numerical mass.
    pub fn new(kind: ReconKernelKind) -> Self {
        Self {
            kind,
            scale: 1.0 / kind.raw_mass(),
        }
    }

    /// The kernel exactly as written, without renormalization.
    pub fn unnormalized(kind: ReconKernelKind) -> Self {
        Self { kind, scale: 1.0 }
    }

    pub fn kind(&self) -> ReconKernelKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.kind.radius()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.scale * self.kind.eval_raw(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.scale * self.kind.derivative_raw(x)
    }

    pub fn mass(&self) -> f64 {
        self.scale * self.kind.raw_mass()
    }

    /// Second moment `∫ x² l(x) dx`.
    pub fn second_moment(&self) -> f64 {
        let r = self.radius();
        quadrature::integrate(
            |x| x * x * self.eval(x),
            -r,
            r,
            self.kind.breakpoints(),
            1e-2,
        )
    }
}

pub fn eval_binning_kernel(kind: BinningKernelKind, x: f64) -> f64 {
    kind.eval(x)
}

pub fn eval_recon_kernel(kind: ReconKernelKind, x: f64) -> f64 {
    ReconKernel::new(kind).eval(x)
}

/// Samples of `κ` and `κ'` on `x = i * step, i = 0..=n`, covering `[0, R]`.
#[derive(Debug, Clone)]
pub struct KappaTable {
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl KappaTable {
    fn build(k: BinningKernelKind, l: &ReconKernel, radius: f64, step: f64) -> Self {
        use rayon::prelude::*;

        let n = (radius / step).ceil() as usize;
        let samples: Vec<(f64, f64)> = (0..=n)
            .into_par_iter()
            .map(|i| {
                let x = i as f64 * step;
                if x >= radius {
                    (0.0, 0.0)
                } else {
                    (convolve(k, l, x), convolve_derivative(k, l, x))
                }
            })
            .collect();
        let (values, slopes) = samples.into_iter().unzip();
        Self { step, values, slopes }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn locate(&self, a: f64) -> (usize, f64) {
        let last = self.values.len() - 2;
        let i = ((a / self.step) as usize).min(last);
        let t = (a - i as f64 * self.step) / self.step;
        (i, t)
    }

    // Cubic Hermite interpolation on |x|.
    fn eval_abs(&self, a: f64) -> f64 {
        let (i, t) = self.locate(a);
        let h = self.step;
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1
    }

    fn derivative_abs(&self, a: f64) -> f64 {
        let (i, t) = self.locate(a);
        let h = self.step;
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
        let t2 = t * t;
        let dh00 = 6.0 * t2 - 6.0 * t;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = -6.0 * t2 + 6.0 * t;
        let dh11 = 3.0 * t2 - 2.0 * t;
        (dh00 * f0 + dh01 * f1) / h + dh10 * d0 + dh11 * d1
    }
}

/// How `κ` is evaluated.
#[derive(Debug, Clone)]
pub enum KappaForm {
    ClosedForm,
    Tabulated(Arc<KappaTable>),
}

/// The synthesized kernel `κ = l ∗ k`.
#[derive(Debug, Clone)]
pub struct SynthesizedKernel {
    k_kind: BinningKernelKind,
    recon: ReconKernel,
    support_radius: f64,
    form: KappaForm,
}

impl SynthesizedKernel {
    /// Closed form when one exists, tabulated otherwise. Tables for the
    /// unit-mass reconstruction kernels are built once per process.
    pub fn new(k: BinningKernelKind, l: ReconKernelKind) -> Self {
        static TABLES: [[OnceLock<Arc<KappaTable>>; 3]; 3] = [const { [const { OnceLock::new() }; 3] }; 3];
        let recon = ReconKernel::new(l);
        if l == ReconKernelKind::Linear {
            return Self::with_recon(k, recon);
        }
        let support_radius = k.radius() + recon.radius();
        let ki = BinningKernelKind::ALL.iter().position(|&x| x == k).expect("listed kernel");
        let li = ReconKernelKind::ALL.iter().position(|&x| x == l).expect("listed kernel");
        let table = TABLES[ki][li]
            .get_or_init(|| Arc::new(KappaTable::build(k, &recon, support_radius, TABLE_STEP)))
            .clone();
        Self {
            k_kind: k,
            recon,
            support_radius,
            form: KappaForm::Tabulated(table),
        }
    }

    pub fn with_recon(k: BinningKernelKind, recon: ReconKernel) -> Self {
        let support_radius = k.radius() + recon.radius();
        let closed = recon.kind() == ReconKernelKind::Linear && recon.scale == 1.0;
        let form = if closed {
            KappaForm::ClosedForm
        } else {
            KappaForm::Tabulated(Arc::new(KappaTable::build(
                k,
                &recon,
                support_radius,
                TABLE_STEP,
            )))
        };
        Self {
            k_kind: k,
            recon,
            support_radius,
            form,
        }
    }

    /// Always tabulated, even when a closed form exists.
    pub fn tabulated(k: BinningKernelKind, recon: ReconKernel, step: f64) -> Self {
        let support_radius = k.radius() + recon.radius();
        Self {
            k_kind: k,
            recon,
            support_radius,
            form: KappaForm::Tabulated(Arc::new(KappaTable::build(
                k,
                &recon,
                support_radius,
                step,
            ))),
        }
    }

    pub fn binning_kind(&self) -> BinningKernelKind {
        self.k_kind
    }

    pub fn recon(&self) -> &ReconKernel {
        &self.recon
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn form(&self) -> &KappaForm {
        &self.form
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.form, KappaForm::ClosedForm)
    }

    /// Breakpoints of `κ`: pairwise sums of the breakpoints of `k` and `l`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .k_kind
            .breakpoints()
            .iter()
            .flat_map(|&a| self.recon.kind().breakpoints().iter().map(move |&b| a + b))
            .filter(|p| p.abs() <= self.support_radius)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    pub fn eval(&self, x: f64) -> f64 {
        let a = x.abs();
        if a >= self.support_radius {
            return 0.0;
        }
        match &self.form {
            KappaForm::ClosedForm => closed_kappa(self.k_kind, a),
            KappaForm::Tabulated(table) => table.eval_abs(a),
        }
    }

    /// `κ'(x)`; odd in `x`.
    pub fn derivative(&self, x: f64) -> f64 {
        let a = x.abs();
        if a >= self.support_radius || a == 0.0 {
            return 0.0;
        }
        let d = match &self.form {
            KappaForm::ClosedForm => closed_kappa_prime(self.k_kind, a),
            KappaForm::Tabulated(table) => table.derivative_abs(a),
        };
        if x < 0.0 {
            -d
        } else {
            d
        }
    }
}

pub fn synthesize_kappa(k: BinningKernelKind, l: ReconKernelKind) -> SynthesizedKernel {
    SynthesizedKernel::new(k, l)
}

pub fn eval_kappa(sk: &SynthesizedKernel, x: f64) -> f64 {
    sk.eval(x)
}

pub fn eval_kappa_prime(sk: &SynthesizedKernel, x: f64) -> f64 {
    sk.derivative(x)
}

// κ for l = tent, evaluated at a = |x| inside the support.
fn closed_kappa(k: BinningKernelKind, a: f64) -> f64 {
    match k {
        BinningKernelKind::Rect => {
            if a < 0.5 {
                0.75 - a * a
            } else {
                let u = 3.0 - 2.0 * a;
                u * u / 8.0
            }
        }
        BinningKernelKind::Linear => {
            if a < 1.0 {
                (4.0 + 3.0 * (a - 2.0) * a * a) / 6.0
            } else {
                let u = 2.0 - a;
                u * u * u / 6.0
            }
        }
        BinningKernelKind::GaussTrunc => {
            let e32 = erf(1.5 * FRAC_1_SQRT_2);
            let sqrt_2_over_pi = (2.0 / PI).sqrt();
            let tail = (-9.0f64 / 8.0).exp();
            let g = |u: f64| erf(u * FRAC_1_SQRT_2);
            if a < 0.5 {
                0.5 * (a - 1.0) * g(a - 1.0) - a * g(a) + 0.5 * (a + 1.0) * g(a + 1.0)
                    + (-0.5 * (a + 1.0) * (a + 1.0)).exp()
                        * ((2.0 * a).exp() - 2.0 * (a + 0.5).exp() + 1.0)
                        * INV_SQRT_2PI
            } else if a < 1.5 {
                0.5 * ((a - 1.0) * g(a - 1.0) - 2.0 * a * g(a)
                    + e32 * a
                    + e32
                    - 2.0 * sqrt_2_over_pi * (-0.5 * a * a).exp()
                    + sqrt_2_over_pi * (-0.5 * (a - 1.0) * (a - 1.0)).exp()
                    + sqrt_2_over_pi * tail)
            } else {
                0.5 * (a - 1.0) * g(a - 1.0) - 0.5 * e32 * (a - 1.0)
                    + (-0.5 * (a - 1.0) * (a - 1.0)).exp() * INV_SQRT_2PI
                    - tail * INV_SQRT_2PI
            }
        }
    }
}

// κ' at a = |x| > 0 inside the support (sign handled by the caller).
fn closed_kappa_prime(k: BinningKernelKind, a: f64) -> f64 {
    match k {
        BinningKernelKind::Rect => {
            if a < 0.5 {
                -2.0 * a
            } else {
                -0.5 * (3.0 - 2.0 * a)
            }
        }
        BinningKernelKind::Linear => {
            if a < 1.0 {
                (1.5 * a - 2.0) * a
            } else {
                let u = 2.0 - a;
                -0.5 * u * u
            }
        }
        BinningKernelKind::GaussTrunc => {
            // Second difference of the clamped Gaussian CDF.
            let g = |u: f64| erf(u.clamp(-1.5, 1.5) * FRAC_1_SQRT_2);
            0.5 * (g(a + 1.0) - 2.0 * g(a) + g(a - 1.0))
        }
    }
}

/// `κ(x) = ∫ l(y) k(x - y) dy` by piecewise Gauss-Legendre quadrature.
fn convolve(k: BinningKernelKind, l: &ReconKernel, x: f64) -> f64 {
    let r = l.radius();
    let bps = joint_breakpoints(k, l, x);
    quadrature::integrate(|y| l.eval(y) * k.eval(x - y), -r, r, &bps, CONV_PANEL)
}

/// `κ'(x) = ∫ l'(y) k(x - y) dy`, valid because every shipped `l` is Lipschitz.
fn convolve_derivative(k: BinningKernelKind, l: &ReconKernel, x: f64) -> f64 {
    let r = l.radius();
    let bps = joint_breakpoints(k, l, x);
    quadrature::integrate(|y| l.derivative(y) * k.eval(x - y), -r, r, &bps, CONV_PANEL)
}

fn joint_breakpoints(k: BinningKernelKind, l: &ReconKernel, x: f64) -> Vec<f64> {
    l.kind()
        .breakpoints()
        .iter()
        .copied()
        .chain(k.breakpoints().iter().map(|b| x - b))
        .collect()
}

/// `∫ κ(x) dx` over the full support.
pub fn kappa_mass(sk: &SynthesizedKernel) -> f64 {
    kappa_moment(sk, 0)
}

/// `∫ xⁿ κ(x) dx` over the full support, panels no wider than `1e-4`.
pub fn kappa_moment(sk: &SynthesizedKernel, n: i32) -> f64 {
    let r = sk.support_radius();
    quadrature::integrate(|x| x.powi(n) * sk.eval(x), -r, r, &kappa_cuts(sk), 1e-4)
}

pub(crate) fn kappa_cuts(sk: &SynthesizedKernel) -> Vec<f64> {
    match sk.form() {
        KappaForm::ClosedForm => sk.breakpoints(),
        KappaForm::Tabulated(t) => {
            let n = t.len() as i64 - 1;
            (-n..=n).map(|i| i as f64 * t.step()).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn binning_kernel_values() {
        assert_eq!(eval_binning_kernel(BinningKernelKind::Rect, 0.0), 1.0);
        assert_eq!(eval_binning_kernel(BinningKernelKind::Linear, 0.5), 0.5);
        assert_abs_diff_eq!(
            eval_binning_kernel(BinningKernelKind::GaussTrunc, 0.0),
            0.398_942_280_401_432_7,
            epsilon = 1e-15
        );
        assert_eq!(eval_binning_kernel(BinningKernelKind::Rect, 0.7), 0.0);
        assert_eq!(eval_binning_kernel(BinningKernelKind::Rect, 0.5), 0.0);
        assert_eq!(eval_binning_kernel(BinningKernelKind::GaussTrunc, 1.5), 0.0);
    }

    #[test]
    fn recon_kernel_values() {
        assert_eq!(eval_recon_kernel(ReconKernelKind::Linear, 0.0), 1.0);
        assert_eq!(eval_recon_kernel(ReconKernelKind::Cubic, 1.0), 0.0);
        assert_eq!(eval_recon_kernel(ReconKernelKind::Cubic, 0.0), 1.0);
        assert_abs_diff_eq!(
            ReconKernel::unnormalized(ReconKernelKind::Lanczos).eval(0.0),
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(eval_recon_kernel(ReconKernelKind::Lanczos, 2.5), 0.0);
    }

    #[test]
    fn recon_kernels_have_unit_mass() {
        for kind in ReconKernelKind::ALL {
            let l = ReconKernel::new(kind);
            let m = quadrature::integrate(|x| l.eval(x), -2.0, 2.0, kind.breakpoints(), 1e-3);
            assert_abs_diff_eq!(m, 1.0, epsilon = 1e-12);
        }
        // The raw Lanczos window is close to, but not exactly, unit mass.
        let raw = ReconKernelKind::Lanczos.raw_mass();
        assert!((raw - 1.0).abs() > 1e-4 && (raw - 1.0).abs() < 0.05, "{raw}");
    }

    #[test]
    fn recon_derivatives_match_finite_differences() {
        let h = 1e-6;
        for kind in ReconKernelKind::ALL {
            let l = ReconKernel::new(kind);
            for i in 0..400 {
                let x = -1.995 + i as f64 * 0.01;
                if kind.breakpoints().iter().any(|b| (x - b).abs() < 1e-3) {
                    continue;
                }
                let fd = (l.eval(x + h) - l.eval(x - h)) / (2.0 * h);
                assert_abs_diff_eq!(l.derivative(x), fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn closed_form_kappa_examples() {
        let rl = synthesize_kappa(BinningKernelKind::Rect, ReconKernelKind::Linear);
        assert!(rl.is_closed_form());
        assert_eq!(eval_kappa(&rl, 0.0), 0.75);
        assert_eq!(eval_kappa(&rl, 1.0), 0.125);
        assert_eq!(eval_kappa(&rl, 1.5), 0.0);
        assert_eq!(eval_kappa(&rl, -0.3), eval_kappa(&rl, 0.3));

        let ll = synthesize_kappa(BinningKernelKind::Linear, ReconKernelKind::Linear);
        assert_abs_diff_eq!(eval_kappa(&ll, 0.0), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_kappa(&ll, 1.0), 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_kappa_prime_examples() {
        let rl = synthesize_kappa(BinningKernelKind::Rect, ReconKernelKind::Linear);
        assert_eq!(eval_kappa_prime(&rl, 0.0), 0.0);
        assert_eq!(eval_kappa_prime(&rl, 0.5), -1.0);
        assert_eq!(eval_kappa_prime(&rl, 1.0), -0.5);
        assert_eq!(eval_kappa_prime(&rl, -1.0), 0.5);
    }

    #[test]
    fn support_radius_is_sum_of_radii() {
        for k in BinningKernelKind::ALL {
            for l in ReconKernelKind::ALL {
                let sk = synthesize_kappa(k, l);
                assert_eq!(sk.support_radius(), k.radius() + l.radius());
                assert_eq!(sk.eval(sk.support_radius()), 0.0);
                assert_eq!(sk.eval(-sk.support_radius() - 0.1), 0.0);
                assert_eq!(sk.is_closed_form(), l == ReconKernelKind::Linear);
            }
        }
    }

    #[test]
    fn kappa_prime_matches_finite_difference_of_kappa() {
        let h = 1e-6;
        for k in BinningKernelKind::ALL {
            for l in ReconKernelKind::ALL {
                let sk = synthesize_kappa(k, l);
                let r = sk.support_radius();
                for i in 0..=200 {
                    let x = -r + 2.0 * r * (i as f64 + 0.37) / 201.0;
                    let fd = (sk.eval(x + h) - sk.eval(x - h)) / (2.0 * h);
                    assert_abs_diff_eq!(sk.derivative(x), fd, epsilon = 2e-6);
                }
            }
        }
    }

    #[test]
    fn tabulated_agrees_with_closed_form() {
        for k in BinningKernelKind::ALL {
            let closed = synthesize_kappa(k, ReconKernelKind::Linear);
            let table = SynthesizedKernel::tabulated(
                k,
                ReconKernel::new(ReconKernelKind::Linear),
                TABLE_STEP,
            );
            for i in 0..=3000 {
                let x = -3.0 + i as f64 * 0.002;
                assert_abs_diff_eq!(closed.eval(x), table.eval(x), epsilon = 1e-6);
                assert_abs_diff_eq!(closed.derivative(x), table.derivative(x), epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn kappa_symmetry_and_derivative_antisymmetry() {
        for k in BinningKernelKind::ALL {
            for l in ReconKernelKind::ALL {
                let sk = synthesize_kappa(k, l);
                for i in 0..300 {
                    let x = i as f64 * 0.0123;
                    assert_eq!(sk.eval(x), sk.eval(-x));
                    assert_eq!(sk.derivative(x), -sk.derivative(-x));
                }
            }
        }
    }

    #[test]
    fn parses_kernel_names() {
        assert_eq!("rect".parse::<BinningKernelKind>().unwrap(), BinningKernelKind::Rect);
        assert_eq!("gauss".parse::<BinningKernelKind>().unwrap(), BinningKernelKind::GaussTrunc);
        assert_eq!("lanczos".parse::<ReconKernelKind>().unwrap(), ReconKernelKind::Lanczos);
        assert!("box".parse::<BinningKernelKind>().is_err());
    }
}
