//! Event binning: the primal histogram pass plus its forward-mode (JVP) and
//! reverse-mode (VJP) derivatives.
//!
//! The primal pass always uses the binning kernel `k`. The derivative passes
//! use a per-axis [`AxisRule`], a pair `(g, g')` of a value kernel and a
//! derivative kernel, selected by [`GradMode`]:
//!
//! | mode          | `g`              | `g'`                      |
//! |---------------|------------------|---------------------------|
//! | `Naive`       | `k`              | pointwise `k'`            |
//! | `Fbp(l)`      | `κ = l ∗ k`      | `κ'`                      |
//! | `Ste`         | `κ` (tent `l`)   | `-sgn(x)·1{|x|<1}`        |
//! | `Sigmoid(s)`  | `κ` (tent `l`)   | `s·(σ'(s(x+½)) - σ'(s(x-½)))` |
//!
//! Bins falling outside the grid are dropped, never clamped.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{BinningKernelKind, ReconKernelKind, SynthesizedKernel};

/// Geometry of a 2D frame. Bin `(u, v)` is centred at
/// `(origin.0 + u·delta, origin.1 + v·delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameGrid {
    pub width: usize,
    pub height: usize,
    pub delta: f64,
    pub origin: (f64, f64),
}

impl FrameGrid {
    pub fn new(width: usize, height: usize, delta: f64, origin: (f64, f64)) -> Result<Self> {
        let grid = Self {
            width,
            height,
            delta,
            origin,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid whose bin centres are symmetric about the coordinate origin.
    pub fn centered(width: usize, height: usize, delta: f64) -> Result<Self> {
        let ox = -0.5 * (width as f64 - 1.0) * delta;
        let oy = -0.5 * (height as f64 - 1.0) * delta;
        Self::new(width, height, delta, (ox, oy))
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidGrid(format!(
                "{}x{} has no bins",
                self.width, self.height
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidGrid(format!("bin spacing {} must be > 0", self.delta)));
        }
        if !(self.origin.0.is_finite() && self.origin.1.is_finite()) {
            return Err(Error::InvalidGrid("non-finite origin".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, u: usize, v: usize) -> (f64, f64) {
        (
            self.origin.0 + u as f64 * self.delta,
            self.origin.1 + v as f64 * self.delta,
        )
    }

    /// Row-major index of bin `(u, v)`.
    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    fn x_axis(&self) -> Grid1d {
        Grid1d {
            width: self.width,
            delta: self.delta,
            origin: self.origin.0,
        }
    }

    fn y_axis(&self) -> Grid1d {
        Grid1d {
            width: self.height,
            delta: self.delta,
            origin: self.origin.1,
        }
    }
}

/// Geometry of a 1D histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1d {
    pub width: usize,
    pub delta: f64,
    pub origin: f64,
}

impl Grid1d {
    pub fn new(width: usize, delta: f64, origin: f64) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidGrid("1D grid has no bins".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) || !origin.is_finite() {
            return Err(Error::InvalidGrid(format!("bin spacing {delta} must be > 0")));
        }
        Ok(Self {
            width,
            delta,
            origin,
        })
    }

    /// Bins whose centres lie strictly within `radius` (in bin units) of
    /// `coord`, clipped to the grid, as `(first, last, normalized position)`.
    #[inline]
    fn span(&self, coord: f64, radius: f64) -> Option<(usize, usize, f64)> {
        let s = (coord - self.origin) / self.delta;
        let lo = (s - radius).floor();
        let hi = (s + radius).ceil();
        if hi < 0.0 || lo >= self.width as f64 {
            return None;
        }
        let lo = lo.max(0.0) as usize;
        let hi = (hi as usize).min(self.width - 1);
        Some((lo, hi, s))
    }
}

/// Warped point coordinates and their binning weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedPoints {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub ws: Vec<f64>,
}

impl WeightedPoints {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, ws: Vec<f64>) -> Result<Self> {
        let pts = Self { xs, ys, ws };
        pts.validate()?;
        Ok(pts)
    }

    /// Points with unit weight.
    pub fn unit(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let ws = vec![1.0; xs.len()];
        Self::new(xs, ys, ws)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.xs.len();
        check_len("ys", self.ys.len(), n)?;
        check_len("ws", self.ws.len(), n)?;
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.xs) || !finite(&self.ys) {
            return Err(Error::NonFinite("point coordinates"));
        }
        if !finite(&self.ws) {
            return Err(Error::NonFinite("point weights"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::LengthMismatch {
            what,
            got,
            expected,
        });
    }
    Ok(())
}

/// The Image of Warped Events: bin values in row-major order (`H` rows of `W`).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub grid: FrameGrid,
    pub values: Vec<f64>,
}

impl Frame {
    pub fn zeros(grid: FrameGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: FrameGrid, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        check_len("frame values", values.len(), grid.len())?;
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[self.grid.index(u, v)]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Rows of the frame, top (`v = 0`) first.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.grid.width)
    }
}

/// Gradient rule for the backward and tangent passes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradMode {
    /// Plain derivative of the binning kernel.
    Naive,
    /// Synthesized weak derivative `κ'` with the given reconstruction kernel.
    Fbp(ReconKernelKind),
    /// Straight-through estimator.
    Ste,
    /// Sigmoid surrogate with the given slope.
    Sigmoid { slope: f64 },
}

impl GradMode {
    pub const DEFAULT_SIGMOID_SLOPE: f64 = 10.0;

    pub fn sigmoid() -> Self {
        Self::Sigmoid {
            slope: Self::DEFAULT_SIGMOID_SLOPE,
        }
    }

    pub fn fbp() -> Self {
        Self::Fbp(ReconKernelKind::Linear)
    }

    /// Parses `naive`, `fbp`, `ste` or `sigmoid`; `fbp` uses `recon`.
    pub fn parse(name: &str, recon: ReconKernelKind) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "naive" => Ok(Self::Naive),
            "fbp" => Ok(Self::Fbp(recon)),
            "ste" => Ok(Self::Ste),
            "sigmoid" => Ok(Self::sigmoid()),
            other => Err(Error::InvalidParameter(format!("unknown gradient mode `{other}`"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Naive => "naive".into(),
            Self::Fbp(l) => format!("fbp-{}", l.name()),
            Self::Ste => "ste".into(),
            Self::Sigmoid { slope } if *slope == Self::DEFAULT_SIGMOID_SLOPE => "sigmoid".into(),
            Self::Sigmoid { slope } => format!("sigmoid-{slope}"),
        }
    }
}

impl fmt::Display for GradMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum ValuePart {
    Kernel(BinningKernelKind),
    Kappa(SynthesizedKernel),
    Custom(ScalarFn),
}

#[derive(Clone)]
enum DerivPart {
    Kernel(BinningKernelKind),
    KappaPrime(SynthesizedKernel),
    Ste,
    Sigmoid(f64),
    Custom(ScalarFn),
}

/// A `(g, g')` pair applied along each axis by the derivative passes.
#[derive(Clone)]
pub struct AxisRule {
    value: ValuePart,
    deriv: DerivPart,
    radius: f64,
}

impl fmt::Debug for AxisRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AxisRule")
            .field("radius", &self.radius)
            .finish_non_exhaustive()
    }
}

impl AxisRule {
    pub fn for_mode(k: BinningKernelKind, mode: &GradMode) -> Self {
        match *mode {
            GradMode::Naive => Self {
                value: ValuePart::Kernel(k),
                deriv: DerivPart::Kernel(k),
                radius: k.radius(),
            },
            GradMode::Fbp(l) => Self::fbp(SynthesizedKernel::new(k, l)),
            GradMode::Ste => {
                let kappa = SynthesizedKernel::new(k, ReconKernelKind::Linear);
                Self {
                    radius: kappa.support_radius(),
                    value: ValuePart::Kappa(kappa),
                    deriv: DerivPart::Ste,
                }
            }
            GradMode::Sigmoid { slope } => {
                let kappa = SynthesizedKernel::new(k, ReconKernelKind::Linear);
                Self {
                    radius: kappa.support_radius(),
                    value: ValuePart::Kappa(kappa),
                    deriv: DerivPart::Sigmoid(slope),
                }
            }
        }
    }

    /// `(κ, κ')` for an already synthesized kernel.
    pub fn fbp(kappa: SynthesizedKernel) -> Self {
        Self {
            radius: kappa.support_radius(),
            value: ValuePart::Kappa(kappa.clone()),
            deriv: DerivPart::KappaPrime(kappa),
        }
    }

    /// An arbitrary pair supported on `|x| < radius`.
    pub fn custom<V, D>(value: V, deriv: D, radius: f64) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            value: ValuePart::Custom(Arc::new(value)),
            deriv: DerivPart::Custom(Arc::new(deriv)),
            radius,
        }
    }

    /// Support radius in bin units; the passes visit bins within it.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn value(&self, d: f64) -> f64 {
        match &self.value {
            ValuePart::Kernel(k) => k.eval(d),
            ValuePart::Kappa(kappa) => kappa.eval(d),
            ValuePart::Custom(f) => f(d),
        }
    }

    #[inline]
    pub fn deriv(&self, d: f64) -> f64 {
        if d.abs() >= self.radius {
            return 0.0;
        }
        match &self.deriv {
            DerivPart::Kernel(k) => k.derivative(d),
            DerivPart::KappaPrime(kappa) => kappa.derivative(d),
            DerivPart::Ste => ste_derivative(d),
            DerivPart::Sigmoid(slope) => sigmoid_derivative(d, *slope),
            DerivPart::Custom(f) => f(d),
        }
    }
}

/// `-sgn(x)` on `|x| < 1`.
pub fn ste_derivative(x: f64) -> f64 {
    if x.abs() < 1.0 && x != 0.0 {
        -x.signum()
    } else {
        0.0
    }
}

/// Derivative of the sigmoid relaxation `σ(s(x+½)) - σ(s(x-½))` of the box.
pub fn sigmoid_derivative(x: f64, slope: f64) -> f64 {
    slope * (logistic_prime(slope * (x + 0.5)) - logistic_prime(slope * (x - 0.5)))
}

fn logistic_prime(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

// Per-axis kernel samples for one point: (first bin, values, derivatives).
struct AxisTaps {
    first: usize,
    g: Vec<f64>,
    dg: Vec<f64>,
}

impl AxisTaps {
    fn new() -> Self {
        Self {
            first: 0,
            g: Vec::with_capacity(16),
            dg: Vec::with_capacity(16),
        }
    }

    /// Returns `false` when the point has no bins on this axis.
    fn fill(&mut self, axis: &Grid1d, coord: f64, rule: &AxisRule, with_deriv: bool) -> bool {
        self.g.clear();
        self.dg.clear();
        let Some((lo, hi, s)) = axis.span(coord, rule.radius()) else {
            return false;
        };
        self.first = lo;
        for u in lo..=hi {
            let d = s - u as f64;
            self.g.push(rule.value(d));
            if with_deriv {
                self.dg.push(rule.deriv(d));
            }
        }
        true
    }

    fn fill_kernel(&mut self, axis: &Grid1d, coord: f64, k: BinningKernelKind) -> bool {
        self.g.clear();
        let Some((lo, hi, s)) = axis.span(coord, k.radius()) else {
            return false;
        };
        self.first = lo;
        self.g.extend((lo..=hi).map(|u| k.eval(s - u as f64)));
        true
    }
}

/// Primal pass: `h[u,v] = Σ_i w_i k(d_x) k(d_y)`.
pub fn bin_forward(pts: &WeightedPoints, grid: &FrameGrid, k: BinningKernelKind) -> Result<Frame> {
    grid.validate()?;
    pts.validate()?;
    let (gx, gy) = (grid.x_axis(), grid.y_axis());
    let mut frame = Frame::zeros(*grid);
    let mut tx = AxisTaps::new();
    let mut ty = AxisTaps::new();
    for i in 0..pts.len() {
        if !tx.fill_kernel(&gx, pts.xs[i], k) || !ty.fill_kernel(&gy, pts.ys[i], k) {
            continue;
        }
        let w = pts.ws[i];
        for (dv, &ky) in ty.g.iter().enumerate() {
            if ky == 0.0 {
                continue;
            }
            let row = (ty.first + dv) * grid.width;
            let wy = w * ky;
            for (du, &kx) in tx.g.iter().enumerate() {
                frame.values[row + tx.first + du] += wy * kx;
            }
        }
    }
    Ok(frame)
}

/// Forward-mode tangent of the binning with the gradient rule of `mode`.
pub fn bin_jvp(
    pts: &WeightedPoints,
    tangents: (&[f64], &[f64]),
    grid: &FrameGrid,
    k: BinningKernelKind,
    mode: &GradMode,
) -> Result<Frame> {
    bin_jvp_with_rule(pts, tangents, grid, &AxisRule::for_mode(k, mode))
}

pub fn bin_jvp_with_rule(
    pts: &WeightedPoints,
    tangents: (&[f64], &[f64]),
    grid: &FrameGrid,
    rule: &AxisRule,
) -> Result<Frame> {
    grid.validate()?;
    pts.validate()?;
    let (xdot, ydot) = tangents;
    check_len("x tangents", xdot.len(), pts.len())?;
    check_len("y tangents", ydot.len(), pts.len())?;
    let inv_delta = 1.0 / grid.delta;
    let (gx, gy) = (grid.x_axis(), grid.y_axis());
    let mut out = Frame::zeros(*grid);
    let mut tx = AxisTaps::new();
    let mut ty = AxisTaps::new();
    for i in 0..pts.len() {
        if !tx.fill(&gx, pts.xs[i], rule, true) || !ty.fill(&gy, pts.ys[i], rule, true) {
            continue;
        }
        let (sx, sy) = (
            pts.ws[i] * inv_delta * xdot[i],
            pts.ws[i] * inv_delta * ydot[i],
        );
        for dv in 0..ty.g.len() {
            let row = (ty.first + dv) * grid.width;
            let (gyv, dgy) = (ty.g[dv], ty.dg[dv]);
            for du in 0..tx.g.len() {
                out.values[row + tx.first + du] += sx * tx.dg[du] * gyv + sy * tx.g[du] * dgy;
            }
        }
    }
    Ok(out)
}

/// Per-point gradients `(∂L/∂x'_i, ∂L/∂y'_i)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointGradients {
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

/// Reverse-mode adjoint of the binning with the gradient rule of `mode`.
pub fn bin_vjp(
    pts: &WeightedPoints,
    adjoint: &[f64],
    grid: &FrameGrid,
    k: BinningKernelKind,
    mode: &GradMode,
) -> Result<PointGradients> {
    bin_vjp_with_rule(pts, adjoint, grid, &AxisRule::for_mode(k, mode))
}

pub fn bin_vjp_with_rule(
    pts: &WeightedPoints,
    adjoint: &[f64],
    grid: &FrameGrid,
    rule: &AxisRule,
) -> Result<PointGradients> {
    grid.validate()?;
    pts.validate()?;
    if adjoint.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            got: adjoint.len(),
            expected: grid.len(),
        });
    }
    let inv_delta = 1.0 / grid.delta;
    let (gx, gy) = (grid.x_axis(), grid.y_axis());
    let grads: Vec<(f64, f64)> = (0..pts.len())
        .into_par_iter()
        .with_min_len(512)
        .map_init(
            || (AxisTaps::new(), AxisTaps::new()),
            |(tx, ty), i| {
                if !tx.fill(&gx, pts.xs[i], rule, true) || !ty.fill(&gy, pts.ys[i], rule, true) {
                    return (0.0, 0.0);
                }
                let (mut sx, mut sy) = (0.0, 0.0);
                for dv in 0..ty.g.len() {
                    let row = (ty.first + dv) * grid.width;
                    let (gyv, dgy) = (ty.g[dv], ty.dg[dv]);
                    for du in 0..tx.g.len() {
                        let a = adjoint[row + tx.first + du];
                        sx += a * tx.dg[du] * gyv;
                        sy += a * tx.g[du] * dgy;
                    }
                }
                let s = pts.ws[i] * inv_delta;
                (s * sx, s * sy)
            },
        )
        .collect();
    let (gx, gy) = grads.into_iter().unzip();
    Ok(PointGradients { gx, gy })
}

/// 1D primal pass `h[u] = Σ_i w_i k(d)`.
pub fn bin_forward_1d(xs: &[f64], ws: &[f64], grid: &Grid1d, k: BinningKernelKind) -> Result<Vec<f64>> {
    check_len("ws", ws.len(), xs.len())?;
    let mut out = vec![0.0; grid.width];
    let mut taps = AxisTaps::new();
    for (&x, &w) in xs.iter().zip(ws) {
        if !x.is_finite() {
            return Err(Error::NonFinite("point coordinates"));
        }
        if taps.fill_kernel(grid, x, k) {
            for (du, &kv) in taps.g.iter().enumerate() {
                out[taps.first + du] += w * kv;
            }
        }
    }
    Ok(out)
}

/// 1D tangent: `ḣ[u] = Σ_i w_i g'(d) ẋ_i / Δ`.
pub fn bin_jvp_1d(
    xs: &[f64],
    ws: &[f64],
    xdot: &[f64],
    grid: &Grid1d,
    rule: &AxisRule,
) -> Result<Vec<f64>> {
    check_len("ws", ws.len(), xs.len())?;
    check_len("x tangents", xdot.len(), xs.len())?;
    let mut out = vec![0.0; grid.width];
    let mut taps = AxisTaps::new();
    for i in 0..xs.len() {
        if taps.fill(grid, xs[i], rule, true) {
            let s = ws[i] * xdot[i] / grid.delta;
            for (du, &d) in taps.dg.iter().enumerate() {
                out[taps.first + du] += s * d;
            }
        }
    }
    Ok(out)
}

/// 1D adjoint: `g_i = Σ_u ā[u] w_i g'(d) / Δ`.
pub fn bin_vjp_1d(
    xs: &[f64],
    ws: &[f64],
    adjoint: &[f64],
    grid: &Grid1d,
    rule: &AxisRule,
) -> Result<Vec<f64>> {
    check_len("ws", ws.len(), xs.len())?;
    if adjoint.len() != grid.width {
        return Err(Error::ShapeMismatch {
            got: adjoint.len(),
            expected: grid.width,
        });
    }
    let mut taps = AxisTaps::new();
    let mut out = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        let mut g = 0.0;
        if taps.fill(grid, xs[i], rule, true) {
            for (du, &d) in taps.dg.iter().enumerate() {
                g += adjoint[taps.first + du] * d;
            }
        }
        out.push(g * ws[i] / grid.delta);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(w: usize, h: usize) -> FrameGrid {
        FrameGrid::new(w, h, 1.0, (0.0, 0.0)).unwrap()
    }

    #[test]
    fn rect_point_at_bin_center_fills_one_bin() {
        let g = grid(5, 4);
        let pts = WeightedPoints::unit(vec![2.0], vec![1.0]).unwrap();
        let f = bin_forward(&pts, &g, BinningKernelKind::Rect).unwrap();
        assert_eq!(f.get(2, 1), 1.0);
        assert_eq!(f.sum(), 1.0);
    }

    #[test]
    fn linear_point_between_centers_splits_evenly() {
        let g = grid(5, 4);
        let pts = WeightedPoints::unit(vec![2.5], vec![1.0]).unwrap();
        let f = bin_forward(&pts, &g, BinningKernelKind::Linear).unwrap();
        assert_eq!(f.get(2, 1), 0.5);
        assert_eq!(f.get(3, 1), 0.5);
        assert_eq!(f.sum(), 1.0);
    }

    #[test]
    fn empty_points_give_zero_frame() {
        let g = grid(3, 3);
        let f = bin_forward(&WeightedPoints::default(), &g, BinningKernelKind::Linear).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn paper_resolution_is_accepted() {
        let g = FrameGrid::centered(200, 150, 0.01).unwrap();
        assert_eq!(g.len(), 30_000);
        assert_abs_diff_eq!(g.center(0, 0).0, -0.995, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_grids_and_lengths() {
        assert!(matches!(FrameGrid::new(0, 3, 1.0, (0.0, 0.0)), Err(Error::InvalidGrid(_))));
        assert!(matches!(FrameGrid::new(3, 3, 0.0, (0.0, 0.0)), Err(Error::InvalidGrid(_))));
        assert!(matches!(
            WeightedPoints::new(vec![1.0], vec![], vec![1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        let g = grid(3, 3);
        let pts = WeightedPoints::unit(vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(
            bin_vjp(&pts, &[0.0; 4], &g, BinningKernelKind::Rect, &GradMode::fbp()),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(bin_jvp(&pts, (&[], &[]), &g, BinningKernelKind::Rect, &GradMode::Naive).is_err());
    }

    #[test]
    fn out_of_grid_contributions_are_dropped() {
        let g = grid(3, 3);
        let pts = WeightedPoints::unit(vec![-0.5, 10.0], vec![1.0, 1.0]).unwrap();
        let f = bin_forward(&pts, &g, BinningKernelKind::Linear).unwrap();
        assert_eq!(f.get(0, 1), 0.5);
        assert_eq!(f.sum(), 0.5);
    }

    #[test]
    fn zero_tangents_give_zero_jvp() {
        let g = grid(6, 6);
        let pts = WeightedPoints::unit(vec![2.3, 3.1], vec![2.7, 1.9]).unwrap();
        let z = [0.0, 0.0];
        let t = bin_jvp(&pts, (&z, &z), &g, BinningKernelKind::Rect, &GradMode::fbp()).unwrap();
        assert!(t.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_dimensional_fbp_examples() {
        let delta = 0.25;
        let g1 = Grid1d::new(8, delta, 0.0).unwrap();
        let rule = AxisRule::for_mode(BinningKernelKind::Rect, &GradMode::fbp());

        // Point at a bin centre: κ'(0) = 0.
        let t = bin_jvp_1d(&[3.0 * delta], &[1.0], &[1.0], &g1, &rule).unwrap();
        assert_eq!(t[3], 0.0);

        // Half a bin to the right of bin 3: κ'(0.5)/Δ = -1/Δ.
        let x = 3.0 * delta + 0.5 * delta;
        let t = bin_jvp_1d(&[x], &[1.0], &[1.0], &g1, &rule).unwrap();
        assert_abs_diff_eq!(t[3], -1.0 / delta, epsilon = 1e-12);

        let mut adj = vec![0.0; 8];
        adj[3] = 1.0;
        let g = bin_vjp_1d(&[x], &[1.0], &adj, &g1, &rule).unwrap();
        assert_abs_diff_eq!(g[0], -1.0 / delta, epsilon = 1e-12);
    }

    #[test]
    fn uniform_adjoint_at_bin_center_gives_zero_gradient() {
        let g = grid(9, 9);
        let pts = WeightedPoints::unit(vec![4.0], vec![4.0]).unwrap();
        let adj = vec![1.0; g.len()];
        for mode in [GradMode::Naive, GradMode::fbp(), GradMode::Ste, GradMode::sigmoid()] {
            for k in BinningKernelKind::ALL {
                let pg = bin_vjp(&pts, &adj, &g, k, &mode).unwrap();
                assert_abs_diff_eq!(pg.gx[0], 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(pg.gy[0], 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn naive_rect_gradient_vanishes() {
        let g = grid(10, 10);
        let pts = WeightedPoints::unit(vec![3.3, 6.1, 4.9], vec![2.2, 5.7, 7.4]).unwrap();
        let adj: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let pg = bin_vjp(&pts, &adj, &g, BinningKernelKind::Rect, &GradMode::Naive).unwrap();
        assert!(pg.gx.iter().chain(&pg.gy).all(|&v| v == 0.0));
    }

    #[test]
    fn ste_and_sigmoid_rules() {
        assert_eq!(ste_derivative(0.3), -1.0);
        assert_eq!(ste_derivative(-0.3), 1.0);
        assert_eq!(ste_derivative(1.2), 0.0);
        // Integrates to -1 against x, like the derivative of a unit-mass kernel.
        let m: f64 = (0..40_000)
            .map(|i| {
                let x = -2.0 + (i as f64 + 0.5) * 1e-4;
                x * sigmoid_derivative(x, 10.0) * 1e-4
            })
            .sum();
        assert_abs_diff_eq!(m, -1.0, epsilon = 1e-3);
        assert!(sigmoid_derivative(0.5, 10.0) < 0.0);
        assert_abs_diff_eq!(sigmoid_derivative(0.2, 10.0), -sigmoid_derivative(-0.2, 10.0), epsilon = 1e-15);
    }

    #[test]
    fn mode_labels_and_parsing() {
        assert_eq!(GradMode::parse("fbp", ReconKernelKind::Cubic).unwrap(), GradMode::Fbp(ReconKernelKind::Cubic));
        assert_eq!(GradMode::fbp().label(), "fbp-linear");
        assert_eq!(GradMode::sigmoid().label(), "sigmoid");
        assert!(GradMode::parse("adam", ReconKernelKind::Linear).is_err());
    }
}
