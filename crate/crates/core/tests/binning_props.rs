use fbp_core::binning::{bin_forward, bin_jvp, bin_vjp, bin_vjp_with_rule, AxisRule, FrameGrid, GradMode, WeightedPoints};
use fbp_core::kernels::{BinningKernelKind, ReconKernelKind, SynthesizedKernel};
use proptest::prelude::*;

const KERNELS: [BinningKernelKind; 3] = BinningKernelKind::ALL;

fn modes() -> Vec<GradMode> {
    vec![
        GradMode::Naive,
        GradMode::Fbp(ReconKernelKind::Linear),
        GradMode::Fbp(ReconKernelKind::Cubic),
        GradMode::Fbp(ReconKernelKind::Lanczos),
        GradMode::Ste,
        GradMode::sigmoid(),
    ]
}

fn grid() -> FrameGrid {
    FrameGrid::new(12, 9, 0.1, (0.0, 0.0)).unwrap()
}

/// Points anywhere over the grid and a little beyond it.
fn points(max: usize) -> impl Strategy<Value = WeightedPoints> {
    prop::collection::vec((-0.3f64..1.4, -0.3f64..1.1, 0.1f64..2.0), 1..max).prop_map(|v| {
        let (xs, ys, ws) = v.into_iter().fold((vec![], vec![], vec![]), |mut acc, (x, y, w)| {
            acc.0.push(x);
            acc.1.push(y);
            acc.2.push(w);
            acc
        });
        WeightedPoints::new(xs, ys, ws).unwrap()
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjoint_identity(
        pts in points(30),
        seed in prop::collection::vec(-1.0f64..1.0, 200),
    ) {
        let g = grid();
        let n = pts.len();
        let xdot: Vec<f64> = (0..n).map(|i| seed[i % 200]).collect();
        let ydot: Vec<f64> = (0..n).map(|i| seed[(i + 97) % 200]).collect();
        let adj: Vec<f64> = (0..g.len()).map(|j| seed[(3 * j + 11) % 200]).collect();
        for k in KERNELS {
            for mode in modes() {
                let jvp = bin_jvp(&pts, (&xdot, &ydot), &g, k, &mode).unwrap();
                let vjp = bin_vjp(&pts, &adj, &g, k, &mode).unwrap();
                let lhs = dot(&adj, &jvp.values);
                let rhs = dot(&vjp.gx, &xdot) + dot(&vjp.gy, &ydot);
                let scale = lhs.abs().max(rhs.abs()).max(1e-12);
                prop_assert!((lhs - rhs).abs() <= 1e-9 * scale, "{k:?} {mode:?}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn forward_ignores_permutation(pts in points(40), rot in 0usize..40) {
        let g = grid();
        let n = pts.len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + rot) % n).collect();
        // Only a permutation when gcd(7, n) = 1.
        prop_assume!({ let mut s = perm.clone(); s.sort(); s.dedup(); s.len() == n });
        let shuffled = WeightedPoints::new(
            perm.iter().map(|&i| pts.xs[i]).collect(),
            perm.iter().map(|&i| pts.ys[i]).collect(),
            perm.iter().map(|&i| pts.ws[i]).collect(),
        ).unwrap();
        for k in KERNELS {
            let a = bin_forward(&pts, &g, k).unwrap();
            let b = bin_forward(&shuffled, &g, k).unwrap();
            let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn partition_of_unity_inside_grid(
        inner in prop::collection::vec((0.05f64..1.05, 0.05f64..0.75, 0.1f64..2.0), 1..30),
    ) {
        // One bin of margin keeps every footprint on the grid.
        let g = grid();
        let pts = WeightedPoints::new(
            inner.iter().map(|p| p.0).collect(),
            inner.iter().map(|p| p.1).collect(),
            inner.iter().map(|p| p.2).collect(),
        ).unwrap();
        let mass: f64 = pts.ws.iter().sum();
        for k in [BinningKernelKind::Rect, BinningKernelKind::Linear] {
            let f = bin_forward(&pts, &g, k).unwrap();
            prop_assert!((f.sum() - mass).abs() < 1e-12 * mass.max(1.0), "{k:?}: {} vs {mass}", f.sum());
        }
    }

    #[test]
    fn fbp_is_naive_gradient_of_kappa(
        pts in points(25),
        adj in prop::collection::vec(-1.0f64..1.0, 108),
        l_idx in 0usize..3,
    ) {
        let g = grid();
        let l = ReconKernelKind::ALL[l_idx];
        for k in KERNELS {
            let kappa = SynthesizedKernel::new(k, l);
            let radius = kappa.support_radius();
            let (kv, kd) = (kappa.clone(), kappa);
            let rule = AxisRule::custom(move |d| kv.eval(d), move |d| kd.derivative(d), radius);
            let reference = bin_vjp_with_rule(&pts, &adj, &g, &rule).unwrap();
            let got = bin_vjp(&pts, &adj, &g, k, &GradMode::Fbp(l)).unwrap();
            for (a, b) in got.gx.iter().chain(&got.gy).zip(reference.gx.iter().chain(&reference.gy)) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }
}

#[test]
fn forward_is_identical_across_modes() {
    // The forward pass takes no mode; the frame built inside every mode's
    // objective therefore has to agree bit for bit as well.
    use fbp_core::synth::{synth_events, SyntheticScene};
    use fbp_core::warp::{EventPacket, RefTimePolicy};
    use fbp_core::{Objective, ObjectiveConfig};
    let (events, truth) = synth_events(&SyntheticScene::rotational(4)).unwrap();
    let packet = EventPacket::new(events, RefTimePolicy::Mean).unwrap();
    let theta = [truth.theta[0] + 0.3, truth.theta[1] - 0.2, truth.theta[2]];
    for k in KERNELS {
        let reference = Objective::new(ObjectiveConfig::new(k, GradMode::Naive)).unwrap();
        let frame = reference.frame(&packet, &theta).unwrap();
        let value = reference.value(&packet, &theta).unwrap();
        for mode in modes() {
            let obj = Objective::new(ObjectiveConfig::new(k, mode)).unwrap();
            assert_eq!(obj.frame(&packet, &theta).unwrap(), frame);
            assert_eq!(obj.value(&packet, &theta).unwrap().to_bits(), value.to_bits());
            assert_eq!(obj.value_and_grad(&packet, &theta).unwrap().0.to_bits(), value.to_bits());
        }
    }
}

#[test]
fn linear_naive_matches_fd_of_forward_away_from_kinks() {
    use rand::{Rng, SeedableRng};
    let g = grid();
    let mut rng = rand::rngs::StdRng::seed_from_u64(9);
    let step = 1e-5 * g.delta;
    let k = BinningKernelKind::Linear;
    let mut checked = 0;
    while checked < 200 {
        let (x, y) = (rng.gen_range(0.1..1.0), rng.gen_range(0.1..0.7));
        let frac = |c: f64| {
            let u = c / g.delta;
            (u - u.round()).abs()
        };
        if frac(x) < 1e-3 || frac(y) < 1e-3 {
            continue;
        }
        checked += 1;
        let adj: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eval = |x: f64, y: f64| {
            let f = bin_forward(&WeightedPoints::unit(vec![x], vec![y]).unwrap(), &g, k).unwrap();
            dot(&adj, &f.values)
        };
        let fx = (eval(x + step, y) - eval(x - step, y)) / (2.0 * step);
        let fy = (eval(x, y + step) - eval(x, y - step)) / (2.0 * step);
        let pts = WeightedPoints::unit(vec![x], vec![y]).unwrap();
        let an = bin_vjp(&pts, &adj, &g, k, &GradMode::Naive).unwrap();
        for (a, f) in [(an.gx[0], fx), (an.gy[0], fy)] {
            assert!((a - f).abs() <= 1e-4 * f.abs().max(1e-3), "analytic {a} vs fd {f} at ({x}, {y})");
        }
    }
}
