use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::StandardNormal;

use super::SensitivityError;

/// Smallest per-dimension bandwidth; applied when a dimension has no spread.
pub const BANDWIDTH_FLOOR: f64 = 1e-3;

/// A density over the unit cube.
pub trait Density {
    fn density(&self, x: &[f64]) -> f64;
}

/// Uniform density on [0, 1]^m.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPrior;

impl Density for UniformPrior {
    fn density(&self, x: &[f64]) -> f64 {
        if x.iter().all(|v| (0.0..=1.0).contains(v)) {
            1.0
        } else {
            0.0
        }
    }
}

/// Weighted product-Gaussian KDE on [0, 1]^m, reflected at both walls so no
/// mass leaks outside the cube.
#[derive(Debug, Clone)]
pub struct Kde {
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    bandwidth: Vec<f64>,
    picker: WeightedIndex<f64>,
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// One-dimensional kernel at `c` folded back into [0, 1].
fn reflected_kernel(x: f64, c: f64, h: f64) -> f64 {
    let mut s = 0.0;
    for k in -1..=1 {
        let shift = 2.0 * f64::from(k);
        s += std_normal_pdf((x - (c + shift)) / h) + std_normal_pdf((x - (shift - c)) / h);
    }
    s / h
}

/// Maps any real into [0, 1] by repeated reflection at 0 and 1.
fn fold_unit(x: f64) -> f64 {
    let y = x.rem_euclid(2.0);
    if y > 1.0 {
        2.0 - y
    } else {
        y
    }
}

impl Kde {
    /// Fits with Scott's rule per dimension, `n_eff^(-1/(m+4)) * sigma_j`,
    /// where n_eff is the Kish effective size of the weights.
    pub fn fit(points: &[Vec<f64>], weights: Option<&[f64]>) -> Result<Self, SensitivityError> {
        if points.len() < 2 {
            return Err(SensitivityError::TooFewPoints(points.len()));
        }
        let m = points[0].len();
        if points.iter().any(|p| p.len() != m) {
            return Err(SensitivityError::InvalidSpace("points differ in dimension".into()));
        }
        let raw: Vec<f64> = match weights {
            Some(w) if w.len() == points.len() => w.to_vec(),
            Some(_) => return Err(SensitivityError::InvalidSpace("weight count mismatch".into())),
            None => vec![1.0; points.len()],
        };
        if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(SensitivityError::InvalidSpace("weights must be finite and non-negative".into()));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(SensitivityError::InvalidSpace("weights sum to zero".into()));
        }
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let sum_sq: f64 = w.iter().map(|x| x * x).sum();
        let n_eff = 1.0 / sum_sq;
        let factor = n_eff.powf(-1.0 / (m as f64 + 4.0));
        let mut bandwidth = Vec::with_capacity(m);
        for j in 0..m {
            let mean: f64 = points.iter().zip(&w).map(|(p, wi)| wi * p[j]).sum();
            let var: f64 = points.iter().zip(&w).map(|(p, wi)| wi * (p[j] - mean).powi(2)).sum::<f64>()
                / (1.0 - sum_sq).max(f64::MIN_POSITIVE);
            let h = factor * var.max(0.0).sqrt();
            if h < BANDWIDTH_FLOOR {
                log::warn!("dimension {j} has bandwidth {h:.2e}; using floor {BANDWIDTH_FLOOR}");
                bandwidth.push(BANDWIDTH_FLOOR);
            } else {
                bandwidth.push(h);
            }
        }
        let picker = WeightedIndex::new(&w).map_err(|e| SensitivityError::InvalidSpace(e.to_string()))?;
        Ok(Self { centers: points.to_vec(), weights: w, bandwidth, picker })
    }

    pub fn dims(&self) -> usize {
        self.bandwidth.len()
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    /// Draws one point: a kernel by weight, a Gaussian step, then reflection.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let c = &self.centers[self.picker.sample(rng)];
        c.iter()
            .zip(&self.bandwidth)
            .map(|(&ci, &h)| {
                let z: f64 = StandardNormal.sample(rng);
                fold_unit(ci + h * z)
            })
            .collect()
    }
}

impl Density for Kde {
    fn density(&self, x: &[f64]) -> f64 {
        if x.len() != self.dims() || x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return 0.0;
        }
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * c.iter().zip(&self.bandwidth).zip(x).map(|((&ci, &h), &xi)| reflected_kernel(xi, ci, h)).product::<f64>())
            .sum()
    }
}
