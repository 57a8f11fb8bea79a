use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::posterior::PosteriorModel;
use super::{Point, VariationSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimStats {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Linear interpolation between order statistics (type 7). `sorted` must be
/// ascending and non-empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and central 95% interval per column of `samples`. Returns `None`
/// with fewer than two samples.
pub fn posterior_stats(samples: &[Vec<f64>]) -> Option<Vec<DimStats>> {
    if samples.len() < 2 {
        return None;
    }
    let m = samples[0].len();
    let out = (0..m)
        .map(|j| {
            let mut col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            col.sort_by(f64::total_cmp);
            DimStats {
                mean: col.iter().sum::<f64>() / col.len() as f64,
                ci_low: quantile(&col, 0.025),
                ci_high: quantile(&col, 0.975),
            }
        })
        .collect();
    Some(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSummary {
    pub name: String,
    /// Normalized units.
    pub mean: f64,
    pub ci: [f64; 2],
    /// Original units.
    pub mean_raw: f64,
    pub ci_raw: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSummary {
    pub name: String,
    /// Share of posterior samples per category.
    pub probabilities: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDiagnostics {
    pub min_raw: f64,
    pub max_raw: f64,
    pub max_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorResult {
    pub outcome: u8,
    pub n_records: usize,
    pub n_conditioned: usize,
    pub n_samples: usize,
    pub ess: f64,
    pub ess_conditioned: f64,
    pub weights: WeightDiagnostics,
    pub continuous: Vec<ContinuousSummary>,
    pub discrete: Vec<DiscreteSummary>,
    pub samples: Vec<Point>,
}

pub fn summarize(space: &VariationSpace, model: &PosteriorModel, samples: Vec<Point>) -> PosteriorResult {
    let cols: Vec<Vec<f64>> = samples.iter().map(|p| p.continuous.clone()).collect();
    let stats = posterior_stats(&cols).unwrap_or_default();
    let continuous = space
        .continuous
        .iter()
        .zip(&stats)
        .map(|(d, s)| {
            let raw = |u: f64| d.lower + u * (d.upper - d.lower);
            ContinuousSummary {
                name: d.name.clone(),
                mean: s.mean,
                ci: [s.ci_low, s.ci_high],
                mean_raw: raw(s.mean),
                ci_raw: [raw(s.ci_low), raw(s.ci_high)],
            }
        })
        .collect();
    let discrete = space
        .discrete
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let mut counts = vec![0usize; d.categories.len()];
            for p in &samples {
                counts[p.discrete[j]] += 1;
            }
            let n = samples.len().max(1) as f64;
            DiscreteSummary {
                name: d.name.clone(),
                probabilities: d.categories.iter().cloned().zip(counts.iter().map(|&c| c as f64 / n)).collect(),
            }
        })
        .collect();
    let w = model.weights();
    PosteriorResult {
        outcome: u8::from(model.outcome()),
        n_records: model.n_records(),
        n_conditioned: model.n_conditioned(),
        n_samples: samples.len(),
        ess: model.ess(),
        ess_conditioned: model.ess_conditioned(),
        weights: WeightDiagnostics {
            min_raw: w.raw.iter().copied().fold(f64::INFINITY, f64::min),
            max_raw: w.raw.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            max_normalized: w.normalized.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        },
        continuous,
        discrete,
        samples,
    }
}

/// Text histogram of posterior samples per continuous dimension, in
/// normalized units.
pub fn render_histograms(result: &PosteriorResult, bins: usize) -> String {
    let bins = bins.max(1);
    let mut out = String::new();
    for (j, dim) in result.continuous.iter().enumerate() {
        let _ = writeln!(out, "{}  mean {:.3}  95% CI [{:.3}, {:.3}]", dim.name, dim.mean, dim.ci[0], dim.ci[1]);
        let mut counts = vec![0usize; bins];
        for p in &result.samples {
            let b = ((p.continuous[j] * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let peak = counts.iter().copied().max().unwrap_or(0).max(1);
        for (b, &c) in counts.iter().enumerate() {
            let bar = "#".repeat(c * 40 / peak);
            let _ = writeln!(out, "  [{:.2}, {:.2}) {:>6} {bar}", b as f64 / bins as f64, (b + 1) as f64 / bins as f64, c);
        }
    }
    for dim in &result.discrete {
        let _ = writeln!(out, "{}", dim.name);
        for (cat, p) in &dim.probabilities {
            let _ = writeln!(out, "  {cat:<12} {p:.3}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert!((quantile(&v, 0.025) - 1.075).abs() < 1e-12);
    }

    #[test]
    fn two_point_mean() {
        let s: Vec<Vec<f64>> = (0..100).map(|i| vec![f64::from(i % 2)]).collect();
        assert_eq!(posterior_stats(&s).unwrap()[0].mean, 0.5);
    }

    #[test]
    fn constant_samples_zero_width() {
        let s = vec![vec![0.3]; 10];
        let st = posterior_stats(&s).unwrap()[0];
        assert_eq!((st.ci_low, st.ci_high), (0.3, 0.3));
        assert!(posterior_stats(&s[..1]).is_none());
    }

    #[test]
    fn uniform_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s: Vec<Vec<f64>> = (0..10_000).map(|_| vec![rng.gen()]).collect();
        let st = posterior_stats(&s).unwrap()[0];
        assert!((st.ci_low - 0.025).abs() < 0.01 && (st.ci_high - 0.975).abs() < 0.01);
    }
}
