//! Gradient bias studies: central-difference oracles evaluated on a uniform
//! parameter grid, surrogate comparisons, and moment checks of `κ'`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::GradMode;
use crate::error::{Error, Result};
use crate::estimator::{Objective, ObjectiveConfig};
use crate::kernels::{kappa_cuts, BinningKernelKind, ReconKernelKind, SynthesizedKernel};
use crate::quadrature;
use crate::warp::EventPacket;

/// Central differences `(f(θ + s eᵢ) - f(θ - s eᵢ)) / 2s` for every component.
pub fn central_difference<F>(mut f: F, theta: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("finite-difference step {step} must be > 0")));
    }
    let mut probe = theta.to_vec();
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        probe[i] = theta[i] + step;
        let plus = f(&probe)?;
        probe[i] = theta[i] - step;
        let minus = f(&probe)?;
        probe[i] = theta[i];
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

pub fn fd_gradient(cfg: &ObjectiveConfig, packet: &EventPacket, theta: &[f64; 3], step: f64) -> Result<[f64; 3]> {
    let obj = Objective::new(*cfg)?;
    let g = central_difference(|t| obj.value(packet, &[t[0], t[1], t[2]]), theta, step)?;
    Ok([g[0], g[1], g[2]])
}

/// `n` evenly spaced samples of `[lo, hi]` along every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("grid needs at least 2 samples per axis, got {n}")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!("grid range [{lo}, {hi}] is empty")));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn axis(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.lo + i as f64 * step).collect()
    }

    /// All `nᴰ` grid points, first axis varying slowest.
    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        let axis = self.axis();
        let total = self.n.pow(dim as u32);
        (0..total)
            .map(|mut idx| {
                let mut p = vec![0.0; dim];
                for slot in p.iter_mut().rev() {
                    *slot = axis[idx % self.n];
                    idx /= self.n;
                }
                p
            })
            .collect()
    }
}

/// Analytic and finite-difference gradients at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSample {
    pub theta: Vec<f64>,
    pub analytic: Vec<f64>,
    pub fd: Vec<f64>,
}

impl BiasSample {
    pub fn bias(&self) -> impl Iterator<Item = f64> + '_ {
        self.analytic.iter().zip(&self.fd).map(|(a, f)| a - f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeBias {
    pub mode: String,
    /// One entry per grid point, in grid order.
    pub samples: Vec<BiasSample>,
}

/// Aggregate statistics of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: String,
    pub mean_abs_bias: f64,
    pub max_abs_bias: f64,
    /// Mean of `|bias| / max |G_fd|`.
    pub mean_abs_bias_normalized: f64,
    /// Fraction of components whose analytic sign matches the FD sign.
    pub sign_agreement: f64,
    /// Components counted for `sign_agreement`.
    pub signed_components: usize,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub grid: GridSpec,
    pub dim: usize,
    pub fd_step: f64,
    pub modes: Vec<ModeBias>,
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

impl BiasReport {
    pub fn evaluations(&self) -> usize {
        self.grid.n.pow(self.dim as u32)
    }

    pub fn components(&self) -> usize {
        self.dim * self.evaluations()
    }

    /// Largest `|G_fd|` over all modes and components; the normalizer of
    /// the `bias_normalized` column.
    pub fn max_abs_fd(&self) -> f64 {
        self.modes
            .iter()
            .flat_map(|m| m.samples.iter().flat_map(|s| s.fd.iter()))
            .fold(0.0f64, |acc, g| acc.max(g.abs()))
    }

    pub fn summary(&self) -> Vec<ModeSummary> {
        let max_fd = self.max_abs_fd();
        // FD components this small relative to the largest carry no sign.
        let sign_floor = 1e-12 * max_fd;
        let norm = if max_fd > 0.0 { max_fd } else { 1.0 };
        self.modes
            .iter()
            .map(|m| {
                let mut sum = 0.0;
                let mut max = 0.0f64;
                let mut count = 0;
                let mut signed = 0;
                let mut agree = 0;
                for s in &m.samples {
                    for ((a, f), b) in s.analytic.iter().zip(&s.fd).zip(s.bias()) {
                        sum += b.abs();
                        max = max.max(b.abs());
                        count += 1;
                        if f.abs() > sign_floor {
                            signed += 1;
                            if sign(*a) == sign(*f) {
                                agree += 1;
                            }
                        }
                    }
                }
                let mean = if count > 0 { sum / count as f64 } else { 0.0 };
                ModeSummary {
                    mode: m.mode.clone(),
                    mean_abs_bias: mean,
                    max_abs_bias: max,
                    mean_abs_bias_normalized: mean / norm,
                    sign_agreement: if signed > 0 { agree as f64 / signed as f64 } else { 0.0 },
                    signed_components: signed,
                    components: count,
                }
            })
            .collect()
    }

    /// Long format: one row per mode, grid point and axis.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let max_fd = self.max_abs_fd();
        let norm = if max_fd > 0.0 { max_fd } else { 1.0 };
        write!(w, "mode")?;
        for d in 1..=self.dim {
            write!(w, ",theta{d}")?;
        }
        writeln!(w, ",axis,g_analytic,g_fd,bias,bias_normalized,fd_sign")?;
        for m in &self.modes {
            for s in &m.samples {
                for (axis, ((a, f), b)) in s.analytic.iter().zip(&s.fd).zip(s.bias()).enumerate() {
                    write!(w, "{}", m.mode)?;
                    for t in &s.theta {
                        write!(w, ",{t}")?;
                    }
                    writeln!(w, ",{},{a},{f},{b},{},{}", axis + 1, b / norm, sign(*f))?;
                }
            }
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "grid": self.grid,
            "dim": self.dim,
            "fd_step": self.fd_step,
            "evaluations": self.evaluations(),
            "components": self.components(),
            "max_abs_fd": self.max_abs_fd(),
            "modes": self.summary(),
        })
    }
}

/// A named analytic gradient used by [`bias_grid_with`].
pub type GradientFn<'a> = Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'a>;

/// Bias study for an arbitrary objective of dimension `dim`. The FD oracle is
/// evaluated once per grid point and shared by every mode.
pub fn bias_grid_with<F>(
    value: F,
    modes: &[(String, GradientFn<'_>)],
    dim: usize,
    grid: &GridSpec,
    fd_step: f64,
) -> Result<BiasReport>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if dim == 0 {
        return Err(Error::InvalidParameter("bias grid needs at least one parameter".into()));
    }
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(Error::InvalidParameter(format!("finite-difference step {fd_step} must be > 0")));
    }
    let points = grid.points(dim);
    let rows: Vec<(Vec<f64>, Vec<Vec<f64>>)> = points
        .par_iter()
        .map(|theta| {
            let fd = central_difference(&value, theta, fd_step)?;
            let analytic = modes.iter().map(|(_, g)| g(theta)).collect::<Result<Vec<_>>>()?;
            Ok((fd, analytic))
        })
        .collect::<Result<_>>()?;
    let modes = modes
        .iter()
        .enumerate()
        .map(|(mi, (name, _))| ModeBias {
            mode: name.clone(),
            samples: points
                .iter()
                .zip(&rows)
                .map(|(theta, (fd, analytic))| BiasSample {
                    theta: theta.clone(),
                    analytic: analytic[mi].clone(),
                    fd: fd.clone(),
                })
                .collect(),
        })
        .collect();
    Ok(BiasReport {
        grid: *grid,
        dim,
        fd_step,
        modes,
    })
}

/// Bias study of the contrast objective over `grid³` for each mode. The
/// forward pass (and hence the FD oracle) does not depend on the mode.
pub fn bias_grid(
    cfg: &ObjectiveConfig,
    packet: &EventPacket,
    modes: &[GradMode],
    grid: &GridSpec,
    fd_step: f64,
) -> Result<BiasReport> {
    if modes.is_empty() {
        return Err(Error::InvalidParameter("bias grid needs at least one gradient mode".into()));
    }
    let base = Objective::new(*cfg)?;
    let objectives = modes
        .iter()
        .map(|m| Objective::new(cfg.with_mode(*m)))
        .collect::<Result<Vec<_>>>()?;
    let grads: Vec<(String, GradientFn<'_>)> = modes
        .iter()
        .zip(&objectives)
        .map(|(m, obj)| {
            let g: GradientFn<'_> =
                Box::new(move |t: &[f64]| Ok(obj.grad(packet, &[t[0], t[1], t[2]])?.to_vec()));
            (m.label(), g)
        })
        .collect();
    bias_grid_with(|t| base.value(packet, &[t[0], t[1], t[2]]), &grads, 3, grid, fd_step)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateRow {
    pub summary: ModeSummary,
    /// 1 for the lowest mean |bias|; absent when only one mode was run.
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateComparison {
    /// Rows in the order the modes were requested.
    pub rows: Vec<SurrogateRow>,
    pub report: BiasReport,
}

impl SurrogateComparison {
    /// Mode labels from lowest to highest mean |bias|.
    pub fn ranking(&self) -> Vec<String> {
        let mut rows: Vec<&SurrogateRow> = self.rows.iter().filter(|r| r.rank.is_some()).collect();
        rows.sort_by_key(|r| r.rank);
        rows.into_iter().map(|r| r.summary.mode.clone()).collect()
    }
}

pub fn compare_surrogates(
    cfg: &ObjectiveConfig,
    packet: &EventPacket,
    modes: &[GradMode],
    grid: &GridSpec,
    fd_step: f64,
) -> Result<SurrogateComparison> {
    let report = bias_grid(cfg, packet, modes, grid, fd_step)?;
    let summary = report.summary();
    let mut order: Vec<usize> = (0..summary.len()).collect();
    order.sort_by(|&a, &b| summary[a].mean_abs_bias.total_cmp(&summary[b].mean_abs_bias));
    let mut ranks = vec![None; summary.len()];
    if summary.len() > 1 {
        for (rank, &i) in order.iter().enumerate() {
            ranks[i] = Some(rank + 1);
        }
    }
    let rows = summary
        .into_iter()
        .zip(ranks)
        .map(|(summary, rank)| SurrogateRow { summary, rank })
        .collect();
    Ok(SurrogateComparison { rows, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRow {
    pub n: u32,
    /// `∫ xⁿ κ'(x) dx`
    pub lhs: f64,
    /// `-n ∫ xⁿ⁻¹ k(x) dx`
    pub rhs: f64,
    /// `rhs - lhs`
    pub residual: f64,
}

/// Compares the moments of `κ'` against integration by parts on `k` for
/// `n = 0..=n_max`.
pub fn degree_of_precision(k: BinningKernelKind, l: ReconKernelKind, n_max: u32) -> Vec<PrecisionRow> {
    let sk = SynthesizedKernel::new(k, l);
    let r = sk.support_radius();
    let cuts = kappa_cuts(&sk);
    (0..=n_max)
        .map(|n| {
            let lhs = quadrature::integrate(|x| x.powi(n as i32) * sk.derivative(x), -r, r, &cuts, 1e-4);
            let rhs = if n == 0 {
                0.0
            } else {
                let rk = k.radius();
                -(n as f64) * quadrature::integrate(|x| x.powi(n as i32 - 1) * k.eval(x), -rk, rk, k.breakpoints(), 1e-4)
            };
            PrecisionRow {
                n,
                lhs,
                rhs,
                residual: rhs - lhs,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn central_difference_is_exact_on_affine() {
        let a = [0.7, -2.0, 3.5];
        for step in [1e-3, 0.5, 1.0, 7.0] {
            let g = central_difference(|t| Ok(a.iter().zip(t).map(|(x, y)| x * y).sum::<f64>() + 4.0), &[1.0, -3.0, 0.25], step).unwrap();
            for (gi, ai) in g.iter().zip(&a) {
                assert_abs_diff_eq!(gi, ai, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn central_difference_cubic_truncation() {
        let g = central_difference(|t| Ok(t[0].powi(3)), &[1.0], 0.1).unwrap();
        assert_abs_diff_eq!(g[0], 3.01, epsilon = 1e-12);
        assert!(central_difference(|t| Ok(t[0]), &[1.0], 0.0).is_err());
    }

    #[test]
    fn grid_points_and_counts() {
        let g = GridSpec::new(-5.0, 5.0, 11).unwrap();
        assert_eq!(g.axis(), (-5..=5).map(f64::from).collect::<Vec<_>>());
        let pts = g.points(3);
        assert_eq!(pts.len(), 1331);
        assert_eq!(pts[0], vec![-5.0, -5.0, -5.0]);
        assert_eq!(pts[1], vec![-5.0, -5.0, -4.0]);
        assert_eq!(pts[1330], vec![5.0, 5.0, 5.0]);
        assert!(GridSpec::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn one_dimensional_grid_has_n_evaluations() {
        let grid = GridSpec::new(-1.0, 1.0, 2).unwrap();
        let grads: Vec<(String, GradientFn<'_>)> = vec![("exact".into(), Box::new(|t: &[f64]| Ok(vec![2.0 * t[0]])))];
        let r = bias_grid_with(|t| Ok(t[0] * t[0]), &grads, 1, &grid, 0.5).unwrap();
        assert_eq!(r.evaluations(), 2);
        assert_eq!(r.components(), 2);
        assert_eq!(r.modes[0].samples.len(), 2);
        // Central differences are exact on quadratics.
        assert_eq!(r.summary()[0].mean_abs_bias, 0.0);
        assert_eq!(r.summary()[0].sign_agreement, 1.0);
    }

    #[test]
    fn zero_gradient_mode_has_bias_minus_fd() {
        let grid = GridSpec::new(-2.0, 2.0, 3).unwrap();
        let grads: Vec<(String, GradientFn<'_>)> = vec![("zero".into(), Box::new(|_: &[f64]| Ok(vec![0.0, 0.0])))];
        let r = bias_grid_with(|t| Ok(t[0].powi(3) + t[1]), &grads, 2, &grid, 1.0).unwrap();
        for s in &r.modes[0].samples {
            for (b, f) in s.bias().zip(&s.fd) {
                assert_eq!(b, -f);
            }
        }
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 9);
        assert!(text.starts_with("mode,theta1,theta2,axis,g_analytic,g_fd,bias,bias_normalized,fd_sign\n"));
    }

    #[test]
    fn precision_rect_linear() {
        let rows = degree_of_precision(BinningKernelKind::Rect, ReconKernelKind::Linear, 3);
        assert_eq!(rows.len(), 4);
        for row in &rows[..3] {
            assert!(row.residual.abs() < 1e-8, "{row:?}");
        }
        assert_abs_diff_eq!(rows[3].residual, 0.5, epsilon = 1e-6);
        assert_eq!(rows[0].rhs, 0.0);
        assert!(rows[0].lhs.abs() < 1e-12);
    }
}
