//! Composite Gauss-Legendre quadrature over piecewise-smooth integrands.

// 8-point Gauss-Legendre nodes and weights on [-1, 1].
const NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_78,
    0.183_434_642_495_649_78,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_69,
    0.222_381_034_453_374_34,
    0.313_706_645_877_887_05,
    0.362_683_783_378_361_77,
    0.362_683_783_378_361_77,
    0.313_706_645_877_887_05,
    0.222_381_034_453_374_34,
    0.101_228_536_290_376_69,
];

/// Integrates `f` over `[a, b]`, splitting at every breakpoint inside the
/// interval and then into panels no wider than `max_panel`.
///
/// The integrand only has to be smooth between breakpoints; values exactly at
/// a breakpoint are never sampled.
pub(crate) fn integrate<F>(f: F, a: f64, b: f64, breakpoints: &[f64], max_panel: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    if b <= a {
        return 0.0;
    }
    let mut cuts: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    cuts.push(a);
    cuts.extend(breakpoints.iter().copied().filter(|&p| p > a && p < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let panels = ((hi - lo) / max_panel).ceil().max(1.0) as usize;
        let width = (hi - lo) / panels as f64;
        for p in 0..panels {
            let p_lo = lo + p as f64 * width;
            let half = 0.5 * width;
            let mid = p_lo + half;
            let mut s = 0.0;
            for (node, weight) in NODES.iter().zip(WEIGHTS.iter()) {
                s += weight * f(mid + half * node);
            }
            total += s * half;
        }
    }
    total
}
