//! Correlation statistics and significance tests used to compare metrics
//! against human ratings.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

mod report;
mod scatter;

pub use report::{
    evaluate_models, CellStats, Comparison, EvalOptions, EvalReport, FoldSummary, Model, ModelColumn, ModelKind,
    ReportRow, TrainingRecord,
};
pub use scatter::{export_scatter, render_scatter, ScatterFit, ScatterSummary, ScoreSeries};

/// Which correlation coefficient a procedure should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Correlation {
    #[default]
    Pearson,
    Spearman,
}

impl Correlation {
    pub fn compute(self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            Correlation::Pearson => pearson(x, y),
            Correlation::Spearman => spearman(x, y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Correlation::Pearson => "pearson",
            Correlation::Spearman => "spearman",
        }
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("series lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::Shape(format!("correlation needs at least 3 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("series contain non-finite values".into()));
    }
    Ok(())
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation of a constant series is undefined".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&ranks(x), &ranks(y))
}

/// Two-tailed p-value that two independent correlations are equal, via
/// Fisher's r-to-z transform.
pub fn fisher_rz_two_sample(r1: f64, n1: usize, r2: f64, n2: usize) -> Result<f64> {
    for (r, n) in [(r1, n1), (r2, n2)] {
        if !(r.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!("|r| must be below 1, got {r}")));
        }
        if n <= 3 {
            return Err(Error::InvalidParameter(format!("sample size must exceed 3, got {n}")));
        }
    }
    let se = (1.0 / (n1 - 3) as f64 + 1.0 / (n2 - 3) as f64).sqrt();
    let z = (r1.atanh() - r2.atanh()) / se;
    Ok(two_tailed_normal(z))
}

/// `P(|Z| ≥ |z|)` for standard normal `Z`.
pub fn two_tailed_normal(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

// Permuted statistics that tie the observed one up to rounding count as "at least as extreme".
const PERMUTATION_TIE_EPS: f64 = 1e-12;

/// Monte-Carlo permutation test of zero correlation.
///
/// Permutation `i` shuffles `y` with a ChaCha8 stream seeded by `seed` on
/// stream `i`, so results do not depend on thread scheduling. The p-value uses
/// the add-one rule and is never zero.
pub fn permutation_test_corr(x: &[f64], y: &[f64], n_perm: usize, seed: u64, statistic: Correlation) -> Result<f64> {
    if n_perm == 0 {
        return Err(Error::InvalidParameter("permutation count must be at least 1".into()));
    }
    let observed = statistic.compute(x, y)?.abs();
    // ranks are permutation-equivariant, so Spearman reduces to Pearson on ranks
    let (xs, ys) = match statistic {
        Correlation::Pearson => (x.to_vec(), y.to_vec()),
        Correlation::Spearman => (ranks(x), ranks(y)),
    };
    let hits: usize = (0..n_perm)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut shuffled = ys.clone();
            shuffled.shuffle(&mut rng);
            let stat = pearson(&xs, &shuffled).map(f64::abs).unwrap_or(0.0);
            usize::from(stat >= observed - PERMUTATION_TIE_EPS)
        })
        .sum();
    Ok((1 + hits) as f64 / (n_perm + 1) as f64)
}

/// Exact permutation p-value by enumerating all `n!` orderings of `y`
/// (the identity included). Limited to `n ≤ 10`.
pub fn permutation_test_exact(x: &[f64], y: &[f64], statistic: Correlation) -> Result<f64> {
    if x.len() > 10 {
        return Err(Error::InvalidParameter(format!("exact enumeration limited to n <= 10, got {}", x.len())));
    }
    let observed = statistic.compute(x, y)?.abs();
    let (xs, ys) = match statistic {
        Correlation::Pearson => (x.to_vec(), y.to_vec()),
        Correlation::Spearman => (ranks(x), ranks(y)),
    };
    let mut idx: Vec<usize> = (0..ys.len()).collect();
    let mut perm = vec![0.0; ys.len()];
    let (mut hits, mut total) = (0usize, 0usize);
    loop {
        for (slot, &i) in perm.iter_mut().zip(&idx) {
            *slot = ys[i];
        }
        let stat = pearson(&xs, &perm).map(f64::abs).unwrap_or(0.0);
        hits += usize::from(stat >= observed - PERMUTATION_TIE_EPS);
        total += 1;
        if !next_permutation(&mut idx) {
            break;
        }
    }
    Ok(hits as f64 / total as f64)
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("pivot has a successor");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Standardizes to mean 0 and unit sample standard deviation.
pub fn zscore(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::Shape("z-score needs at least 2 values".into()));
    }
    let m = mean(x);
    let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64;
    if var == 0.0 {
        return Err(Error::Degenerate("z-score of a constant series".into()));
    }
    let sd = var.sqrt();
    Ok(x.iter().map(|v| (v - m) / sd).collect())
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Shape("linear fit needs two aligned series of length >= 2".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate("linear fit with constant x".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn pearson_examples() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        // Σdxdy = 4, Σdx² = Σdy² = 5
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_short_series() {
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::Degenerate(_))));
        assert!(matches!(spearman(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]), Err(Error::Degenerate(_))));
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn spearman_examples() {
        let x = [0.3, 1.7, 2.2, 9.0, 15.5];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.powi(3) + v.exp()).collect();
        assert_eq!(spearman(&x, &y).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[9.0, 4.0, 1.0]).unwrap(), -1.0);
        // ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4): Σdxdy = 4.5, Σdx² = 4.5, Σdy² = 5
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-15);
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn fisher_examples() {
        assert_eq!(fisher_rz_two_sample(0.5, 40, 0.5, 90).unwrap(), 1.0);
        assert!(fisher_rz_two_sample(0.9, 10_000, -0.9, 10_000).unwrap() < 1e-300);
        assert!(fisher_rz_two_sample(1.0, 10, 0.5, 10).is_err());
        assert!(fisher_rz_two_sample(0.2, 3, 0.5, 10).is_err());
        let a = fisher_rz_two_sample(0.9487, 150, 0.9224, 150).unwrap();
        let b = fisher_rz_two_sample(0.9224, 150, 0.9487, 150).unwrap();
        assert_eq!(a, b);
    }

    // Two-tailed normal tail by Simpson quadrature of the density over [0, |z|].
    fn tail_by_quadrature(z: f64) -> f64 {
        let n = 20_000;
        let h = z.abs() / n as f64;
        let pdf = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = pdf(0.0) + pdf(z.abs());
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(i as f64 * h);
        }
        1.0 - 2.0 * s * h / 3.0
    }

    #[test]
    fn fisher_matches_quadrature() {
        for &(r1, n1, r2, n2) in &[(0.9487f64, 150usize, 0.9224, 150), (0.3, 20, 0.6, 35), (-0.2, 8, 0.4f64, 12usize)] {
            let se = (1.0 / (n1 as f64 - 3.0) + 1.0 / (n2 as f64 - 3.0)).sqrt();
            let z = (0.5 * ((1.0 + r1) / (1.0 - r1)).ln() - 0.5 * ((1.0 + r2) / (1.0 - r2)).ln()) / se;
            let want = tail_by_quadrature(z);
            let got = fisher_rz_two_sample(r1, n1, r2, n2).unwrap();
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn permutation_perfect_rank_agreement() {
        let x: Vec<f64> = (0..30).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v + 1.0).collect();
        let p = permutation_test_corr(&x, &y, 999, 11, Correlation::Spearman).unwrap();
        assert_eq!(p, 1.0 / 1000.0);
        let again = permutation_test_corr(&x, &y, 999, 11, Correlation::Spearman).unwrap();
        assert_eq!(p, again);
        assert!(permutation_test_corr(&x, &y, 0, 11, Correlation::Spearman).is_err());
    }

    #[test]
    fn permutation_null_is_roughly_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut ps: Vec<f64> = (0..60)
            .map(|rep| {
                let x: Vec<f64> = (0..25).map(|_| rng.gen()).collect();
                let y: Vec<f64> = (0..25).map(|_| rng.gen()).collect();
                permutation_test_corr(&x, &y, 199, rep, Correlation::Spearman).unwrap()
            })
            .collect();
        ps.sort_by(f64::total_cmp);
        let median = (ps[29] + ps[30]) / 2.0;
        assert!((0.3..0.7).contains(&median), "median p {median}");
        assert!(ps.iter().all(|&p| p > 0.0 && p <= 1.0));
    }

    #[test]
    fn exact_permutation_includes_identity() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let p = permutation_test_exact(&x, &x, Correlation::Pearson).unwrap();
        // identity and full reversal reach |r| = 1
        assert_eq!(p, 2.0 / 24.0);
    }

    #[test]
    fn zscore_and_fit() {
        let z = zscore(&[1.0, 5.0, 2.0, 8.0, 3.0]).unwrap();
        assert!(mean(&z).abs() < 1e-12);
        let sd = (z.iter().map(|v| v * v).sum::<f64>() / 4.0).sqrt();
        assert!((sd - 1.0).abs() < 1e-12);
        assert!(zscore(&[2.0, 2.0]).is_err());

        let (s, c) = linear_fit(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-15 && c.abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn spearman_monotone_invariance(v in proptest::collection::vec(-100.0f64..100.0, 3..30), w in proptest::collection::vec(-100.0f64..100.0, 30)) {
            let y = &w[..v.len()];
            if let Ok(base) = spearman(&v, y) {
                let t: Vec<f64> = v.iter().map(|a| (a / 10.0).exp() + 3.0 * a).collect();
                prop_assert_eq!(spearman(&t, y).unwrap(), base);
            }
        }

        #[test]
        fn pearson_affine_invariance(v in proptest::collection::vec(-100.0f64..100.0, 3..30), w in proptest::collection::vec(-100.0f64..100.0, 30), a in 0.01f64..50.0, b in -100.0f64..100.0) {
            let y = &w[..v.len()];
            if let Ok(base) = pearson(&v, y) {
                let t: Vec<f64> = v.iter().map(|x| a * x + b).collect();
                prop_assert!((pearson(&t, y).unwrap() - base).abs() <= 1e-12);
            }
        }

        #[test]
        fn permutation_add_one_rule(seed in any::<u64>(), n_perm in 1usize..50) {
            let x = [0.1, 0.5, 0.2, 0.9, 0.4, 0.3];
            let y = [1.0, 0.0, 2.0, 3.0, 0.5, 0.25];
            let p = permutation_test_corr(&x, &y, n_perm, seed, Correlation::Pearson).unwrap();
            prop_assert!(p > 0.0 && p <= 1.0);
            let scaled = p * (n_perm + 1) as f64;
            prop_assert!((scaled - scaled.round()).abs() < 1e-9);
            prop_assert!(scaled.round() >= 1.0);
        }
    }
}
