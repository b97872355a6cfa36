use statrs::distribution::{ContinuousCDF, Normal};

use crate::gibbs::LatticeDistribution;

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Kolmogorov–Smirnov distance of an ascending sample to `N(0, 1)`.
pub fn ks_normal(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let f = normal_cdf(x);
        acc.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

/// `sup_r |P(S / scale ≤ r) − Φ(r)|` for a lattice law, checked on both sides
/// of every atom.
pub fn lattice_ks(law: &LatticeDistribution, scale: f64) -> f64 {
    let mut prev = 0.0;
    let mut worst: f64 = 0.0;
    for (x, c) in law.cdf() {
        let f = normal_cdf(x / scale);
        worst = worst.max((f - prev).abs()).max((c - f).abs());
        prev = c;
    }
    worst
}

/// True when `v` decreases except for at most `allowed` upward steps.
pub fn mostly_decreasing(v: &[f64], allowed: usize) -> bool {
    v.windows(2).filter(|w| w[1] > w[0]).count() <= allowed
}

/// True when `v` never increases.
pub fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

pub fn weighted_mean(values: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (s, w) = values.fold((0.0, 0.0), |(s, tw), (w, v)| (s + w * v, tw + w));
    s / w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_quantiles_is_small() {
        let n = 2000;
        let inv = Normal::standard();
        let sample: Vec<f64> = (0..n).map(|i| inv.inverse_cdf((i as f64 + 0.5) / n as f64)).collect();
        let ks = ks_normal(&sample);
        assert!(ks <= 0.5 / n as f64 + 1e-6, "{ks}");
        let shifted: Vec<f64> = sample.iter().map(|x| x + 1.0).collect();
        assert!(ks_normal(&shifted) > 0.3);
    }

    #[test]
    fn lattice_ks_sees_atoms() {
        let law = LatticeDistribution { h: 1.0, offset: 0, probs: vec![1.0], n: 1, center: 0.0 };
        assert!((lattice_ks(&law, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn trends() {
        assert!(mostly_decreasing(&[3.0, 2.0, 2.5, 1.0], 1));
        assert!(!mostly_decreasing(&[3.0, 4.0, 2.5, 3.0], 1));
        assert!(non_increasing(&[0.0, 0.0]));
        assert!((weighted_mean([(1.0, 2.0), (3.0, 4.0)].into_iter()) - 3.5).abs() < 1e-15);
    }
}
