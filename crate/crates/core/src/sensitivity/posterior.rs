use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kde::{Density, Kde, UniformPrior};
use super::{Dataset, Point, SensitivityError};

/// How the sampling distribution of the experiments is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    /// Gaussian KDE over the observed continuous parameters, empirical
    /// frequencies over discrete categories.
    Kde,
    /// Parameters are known to be drawn from the prior; all weights are 1.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorConfig {
    pub min_records: usize,
    /// Categories with fewer conditioned records use the pooled KDE.
    pub min_category_records: usize,
    pub proposal: ProposalKind,
}

impl Default for PosteriorConfig {
    fn default() -> Self {
        Self { min_records: 10, min_category_records: 5, proposal: ProposalKind::Kde }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceWeights {
    pub raw: Vec<f64>,
    /// `raw` scaled to sum to one.
    pub normalized: Vec<f64>,
}

impl ImportanceWeights {
    fn from_raw(raw: Vec<f64>) -> Self {
        let total: f64 = raw.iter().sum();
        let normalized = raw.iter().map(|w| w / total).collect();
        Self { raw, normalized }
    }

    /// Computed from the raw weights so equal weights give exactly N.
    pub fn ess(&self) -> f64 {
        ess(&self.raw)
    }
}

/// `prior(x) / proposal(x)` at every sample.
pub fn importance_weights(
    samples: &[Vec<f64>],
    prior: &dyn Density,
    proposal: &dyn Density,
) -> Result<ImportanceWeights, SensitivityError> {
    let mut raw = Vec::with_capacity(samples.len());
    for (index, s) in samples.iter().enumerate() {
        let q = proposal.density(s);
        if !(q > 0.0 && q.is_finite()) {
            return Err(SensitivityError::ZeroProposal { index });
        }
        raw.push(prior.density(s) / q);
    }
    Ok(ImportanceWeights::from_raw(raw))
}

/// Effective sample size `(sum w)^2 / sum w^2`; for weights summing to one
/// this is `1 / sum w^2`.
pub fn ess(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

#[derive(Debug, Clone)]
struct Component {
    categories: Vec<usize>,
    prob: f64,
    kde: Option<Kde>,
    pooled: bool,
}

/// Posterior over normalized parameters given one outcome value: a
/// categorical over joint discrete categories times a per-category KDE.
#[derive(Debug, Clone)]
pub struct PosteriorModel {
    outcome: bool,
    sizes: Vec<usize>,
    n_continuous: usize,
    components: Vec<Component>,
    picker: WeightedIndex<f64>,
    weights: ImportanceWeights,
    conditioned: usize,
    ess_conditioned: f64,
}

fn joint_index(categories: &[usize], sizes: &[usize]) -> usize {
    categories.iter().zip(sizes).fold(0, |acc, (&c, &k)| acc * k + c)
}

fn joint_categories(mut index: usize, sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for (slot, &k) in out.iter_mut().zip(sizes).rev() {
        *slot = index % k;
        index /= k;
    }
    out
}

pub fn fit_posterior(dataset: &Dataset, outcome: bool, cfg: &PosteriorConfig) -> Result<PosteriorModel, SensitivityError> {
    let records = dataset.records();
    let space = dataset.space();
    let sizes: Vec<usize> = space.discrete.iter().map(|d| d.categories.len()).collect();
    let n_categories = space.category_count();
    let n_continuous = space.continuous.len();
    let outcome_code = u8::from(outcome);

    let conditioned: Vec<usize> = (0..records.len()).filter(|&i| records[i].outcome == outcome).collect();
    if conditioned.is_empty() {
        return Err(SensitivityError::NoRecords(outcome_code));
    }
    if conditioned.len() < cfg.min_records {
        return Err(SensitivityError::TooFewRecords {
            outcome: outcome_code,
            found: conditioned.len(),
            needed: cfg.min_records,
        });
    }

    let cont: Vec<Vec<f64>> = records.iter().map(|r| r.theta.continuous.clone()).collect();
    let joint: Vec<usize> = records.iter().map(|r| joint_index(&r.theta.discrete, &sizes)).collect();
    let weights = match cfg.proposal {
        ProposalKind::Uniform => importance_weights(&cont, &UniformPrior, &UniformPrior)?,
        ProposalKind::Kde => {
            let mut w = if n_continuous > 0 {
                importance_weights(&cont, &UniformPrior, &Kde::fit(&cont, None)?)?.raw
            } else {
                vec![1.0; records.len()]
            };
            if n_categories > 1 {
                let mut counts = vec![0usize; n_categories];
                for &j in &joint {
                    counts[j] += 1;
                }
                let n = records.len() as f64;
                for (wi, &j) in w.iter_mut().zip(&joint) {
                    *wi *= (1.0 / n_categories as f64) / (counts[j] as f64 / n);
                }
            }
            ImportanceWeights::from_raw(w)
        }
    };

    let cond_w: Vec<f64> = conditioned.iter().map(|&i| weights.raw[i]).collect();
    let cond_total: f64 = cond_w.iter().sum();
    let n_o = conditioned.len() as f64;
    let pooled = if n_continuous > 0 {
        let pts: Vec<Vec<f64>> = conditioned.iter().map(|&i| cont[i].clone()).collect();
        Some(Kde::fit(&pts, Some(&cond_w))?)
    } else {
        None
    };

    let mut components = Vec::with_capacity(n_categories);
    for c in 0..n_categories {
        let members: Vec<usize> = conditioned.iter().copied().filter(|&i| joint[i] == c).collect();
        let mass: f64 = members.iter().map(|&i| weights.raw[i]).sum::<f64>() / cond_total * n_o;
        let prob = (mass + 1.0) / (n_o + n_categories as f64);
        let (kde, is_pooled) = match &pooled {
            None => (None, false),
            Some(p) if members.len() < cfg.min_category_records => (Some(p.clone()), true),
            Some(_) => {
                let pts: Vec<Vec<f64>> = members.iter().map(|&i| cont[i].clone()).collect();
                let w: Vec<f64> = members.iter().map(|&i| weights.raw[i]).collect();
                (Some(Kde::fit(&pts, Some(&w))?), false)
            }
        };
        components.push(Component { categories: joint_categories(c, &sizes), prob, kde, pooled: is_pooled });
    }
    let picker = WeightedIndex::new(components.iter().map(|c| c.prob))
        .map_err(|e| SensitivityError::InvalidSpace(e.to_string()))?;
    Ok(PosteriorModel {
        outcome,
        sizes,
        n_continuous,
        components,
        picker,
        ess_conditioned: ess(&cond_w),
        weights,
        conditioned: conditioned.len(),
    })
}

impl PosteriorModel {
    pub fn outcome(&self) -> bool {
        self.outcome
    }

    /// Importance weights over every record in the dataset.
    pub fn weights(&self) -> &ImportanceWeights {
        &self.weights
    }

    pub fn ess(&self) -> f64 {
        self.weights.ess()
    }

    /// Effective size of the records that share the conditioning outcome.
    pub fn ess_conditioned(&self) -> f64 {
        self.ess_conditioned
    }

    pub fn n_records(&self) -> usize {
        self.weights.raw.len()
    }

    pub fn n_conditioned(&self) -> usize {
        self.conditioned
    }

    /// Probability of each joint discrete category, with whether it fell back
    /// to the pooled continuous density.
    pub fn categories(&self) -> impl Iterator<Item = (&[usize], f64, bool)> {
        self.components.iter().map(|c| (c.categories.as_slice(), c.prob, c.pooled))
    }

    pub fn density(&self, p: &Point) -> f64 {
        if p.continuous.len() != self.n_continuous
            || p.discrete.len() != self.sizes.len()
            || p.discrete.iter().zip(&self.sizes).any(|(&c, &k)| c >= k)
        {
            return 0.0;
        }
        let comp = &self.components[joint_index(&p.discrete, &self.sizes)];
        comp.prob * comp.kde.as_ref().map_or(1.0, |k| k.density(&p.continuous))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let comp = &self.components[self.picker.sample(rng)];
        Point {
            continuous: comp.kde.as_ref().map_or_else(Vec::new, |k| k.sample(rng)),
            discrete: comp.categories.clone(),
        }
    }
}

pub fn sample_posterior<R: Rng + ?Sized>(model: &PosteriorModel, n: usize, rng: &mut R) -> Vec<Point> {
    (0..n).map(|_| model.sample(rng)).collect()
}
