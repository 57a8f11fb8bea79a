//! Which variation parameters go with success or failure: a uniform-prior
//! posterior over normalized parameters, fitted from episode outcomes with an
//! importance correction for non-uniform sampling.

mod kde;
mod posterior;
mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{pose_distance, Pose};
use crate::trajectory::{EpisodeRecord, Variation};

pub use kde::{Density, Kde, UniformPrior, BANDWIDTH_FLOOR};
pub use posterior::{
    ess, fit_posterior, importance_weights, sample_posterior, ImportanceWeights, PosteriorConfig, PosteriorModel,
    ProposalKind,
};
pub use stats::{
    posterior_stats, quantile, render_histograms, summarize, ContinuousSummary, DimStats, DiscreteSummary,
    PosteriorResult, WeightDiagnostics,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error("invalid variation space: {0}")]
    InvalidSpace(String),
    #[error("'{dim}' value {value} is outside [{lower}, {upper}]")]
    OutOfBounds { dim: String, value: f64, lower: f64, upper: f64 },
    #[error("'{dim}' has no category '{value}'")]
    UnknownCategory { dim: String, value: String },
    #[error("missing value for '{0}'")]
    MissingDim(String),
    #[error("'{dim}': {message}")]
    BadValue { dim: String, message: String },
    #[error("point has {found} continuous / {found_disc} discrete values, expected {expected} / {expected_disc}")]
    Shape { found: usize, found_disc: usize, expected: usize, expected_disc: usize },
    #[error("proposal density is zero at sample {index}")]
    ZeroProposal { index: usize },
    #[error("no records with outcome {0}")]
    NoRecords(u8),
    #[error("{found} records with outcome {outcome}, need at least {needed}")]
    TooFewRecords { outcome: u8, found: usize, needed: usize },
    #[error("need at least 2 points for a density estimate, got {0}")]
    TooFewPoints(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousDim {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    /// When set, pose-valued variations enter as their distance to this pose.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal: Option<Pose>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteDim {
    pub name: String,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationSpace {
    #[serde(default)]
    pub continuous: Vec<ContinuousDim>,
    #[serde(default)]
    pub discrete: Vec<DiscreteDim>,
}

/// A parameter vector in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPoint {
    pub continuous: Vec<f64>,
    pub discrete: Vec<String>,
}

/// A parameter vector with continuous values in [0, 1] and discrete values as
/// category indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub continuous: Vec<f64>,
    pub discrete: Vec<usize>,
}

impl VariationSpace {
    pub fn check(&self) -> Result<(), SensitivityError> {
        let mut names = std::collections::BTreeSet::new();
        for d in &self.continuous {
            if !(d.lower.is_finite() && d.upper.is_finite() && d.lower < d.upper) {
                return Err(SensitivityError::InvalidSpace(format!("'{}' needs lower < upper", d.name)));
            }
            if !names.insert(d.name.as_str()) {
                return Err(SensitivityError::InvalidSpace(format!("duplicate dimension '{}'", d.name)));
            }
        }
        for d in &self.discrete {
            if d.categories.is_empty() {
                return Err(SensitivityError::InvalidSpace(format!("'{}' has no categories", d.name)));
            }
            if !names.insert(d.name.as_str()) {
                return Err(SensitivityError::InvalidSpace(format!("duplicate dimension '{}'", d.name)));
            }
        }
        if names.is_empty() {
            return Err(SensitivityError::InvalidSpace("no dimensions".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, SensitivityError> {
        let space: Self = serde_json::from_str(text).map_err(|e| SensitivityError::InvalidSpace(e.to_string()))?;
        space.check()?;
        Ok(space)
    }

    fn check_shape(&self, cont: usize, disc: usize) -> Result<(), SensitivityError> {
        if cont != self.continuous.len() || disc != self.discrete.len() {
            return Err(SensitivityError::Shape {
                found: cont,
                found_disc: disc,
                expected: self.continuous.len(),
                expected_disc: self.discrete.len(),
            });
        }
        Ok(())
    }

    /// Number of joint discrete categories.
    pub fn category_count(&self) -> usize {
        self.discrete.iter().map(|d| d.categories.len()).product()
    }

    /// Checks a normalized point against the space.
    pub fn check_point(&self, p: &Point) -> Result<(), SensitivityError> {
        self.check_shape(p.continuous.len(), p.discrete.len())?;
        for (d, &v) in self.continuous.iter().zip(&p.continuous) {
            if !(0.0..=1.0).contains(&v) {
                return Err(SensitivityError::OutOfBounds { dim: d.name.clone(), value: v, lower: 0.0, upper: 1.0 });
            }
        }
        for (d, &c) in self.discrete.iter().zip(&p.discrete) {
            if c >= d.categories.len() {
                return Err(SensitivityError::UnknownCategory { dim: d.name.clone(), value: c.to_string() });
            }
        }
        Ok(())
    }
}

pub fn normalize(space: &VariationSpace, raw: &RawPoint) -> Result<Point, SensitivityError> {
    space.check_shape(raw.continuous.len(), raw.discrete.len())?;
    let mut continuous = Vec::with_capacity(raw.continuous.len());
    for (d, &v) in space.continuous.iter().zip(&raw.continuous) {
        if !(v >= d.lower && v <= d.upper) {
            return Err(SensitivityError::OutOfBounds { dim: d.name.clone(), value: v, lower: d.lower, upper: d.upper });
        }
        continuous.push(((v - d.lower) / (d.upper - d.lower)).clamp(0.0, 1.0));
    }
    let mut discrete = Vec::with_capacity(raw.discrete.len());
    for (d, v) in space.discrete.iter().zip(&raw.discrete) {
        let idx = d
            .categories
            .iter()
            .position(|c| c == v)
            .ok_or_else(|| SensitivityError::UnknownCategory { dim: d.name.clone(), value: v.clone() })?;
        discrete.push(idx);
    }
    Ok(Point { continuous, discrete })
}

pub fn denormalize(space: &VariationSpace, p: &Point) -> Result<RawPoint, SensitivityError> {
    space.check_point(p)?;
    Ok(RawPoint {
        continuous: space.continuous.iter().zip(&p.continuous).map(|(d, &u)| d.lower + u * (d.upper - d.lower)).collect(),
        discrete: space.discrete.iter().zip(&p.discrete).map(|(d, &c)| d.categories[c].clone()).collect(),
    })
}

/// Reads one episode's variation values in the order of the space. Poses are
/// reduced to their distance from the dimension's nominal pose.
pub fn raw_point_from_variation(
    space: &VariationSpace,
    values: &BTreeMap<String, Variation>,
) -> Result<RawPoint, SensitivityError> {
    let mut continuous = Vec::new();
    for d in &space.continuous {
        let v = values.get(&d.name).ok_or_else(|| SensitivityError::MissingDim(d.name.clone()))?;
        let bad = |message: String| SensitivityError::BadValue { dim: d.name.clone(), message };
        continuous.push(match v {
            Variation::Number(x) => *x,
            Variation::Pose(p) => {
                let nominal = d.nominal.as_ref().ok_or_else(|| bad("pose value but no nominal pose".into()))?;
                pose_distance(p, nominal, 1.0).map_err(|e| bad(e.to_string()))?
            }
            Variation::Category(s) => return Err(bad(format!("expected a number, got \"{s}\""))),
        });
    }
    let mut discrete = Vec::new();
    for d in &space.discrete {
        match values.get(&d.name) {
            Some(Variation::Category(s)) => discrete.push(s.clone()),
            Some(_) => return Err(SensitivityError::BadValue { dim: d.name.clone(), message: "expected a category".into() }),
            None => return Err(SensitivityError::MissingDim(d.name.clone())),
        }
    }
    Ok(RawPoint { continuous, discrete })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub theta: Point,
    pub outcome: bool,
}

/// Normalized (parameter, outcome) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    space: VariationSpace,
    records: Vec<Record>,
}

impl Dataset {
    pub fn new(space: VariationSpace, records: Vec<Record>) -> Result<Self, SensitivityError> {
        space.check()?;
        for r in &records {
            space.check_point(&r.theta)?;
        }
        Ok(Self { space, records })
    }

    pub fn from_episodes(space: VariationSpace, episodes: &[EpisodeRecord]) -> Result<Self, SensitivityError> {
        space.check()?;
        let records = episodes
            .iter()
            .map(|ep| {
                let raw = raw_point_from_variation(&space, &ep.variation)?;
                Ok(Record { theta: normalize(&space, &raw)?, outcome: ep.success() })
            })
            .collect::<Result<Vec<_>, SensitivityError>>()?;
        Ok(Self { space, records })
    }

    pub fn space(&self) -> &VariationSpace {
        &self.space
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use proptest::prelude::*;

    fn space() -> VariationSpace {
        VariationSpace::parse(
            r#"{"continuous": [{"name": "light", "lower": 200, "upper": 1000}],
                "discrete": [{"name": "table", "categories": ["wood", "steel"]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn endpoints_and_midpoint() {
        let s = space();
        let p = |v: f64| normalize(&s, &RawPoint { continuous: vec![v], discrete: vec!["steel".into()] }).unwrap();
        assert_eq!(p(200.0).continuous, vec![0.0]);
        assert_eq!(p(600.0).continuous, vec![0.5]);
        assert_eq!(p(1000.0).continuous, vec![1.0]);
        assert_eq!(p(600.0).discrete, vec![1]);
    }

    #[test]
    fn rejects_out_of_range() {
        let s = space();
        let raw = RawPoint { continuous: vec![1000.5], discrete: vec!["wood".into()] };
        assert!(matches!(normalize(&s, &raw), Err(SensitivityError::OutOfBounds { .. })));
        let raw = RawPoint { continuous: vec![300.0], discrete: vec!["glass".into()] };
        assert!(matches!(normalize(&s, &raw), Err(SensitivityError::UnknownCategory { .. })));
        assert!(VariationSpace::parse(r#"{"continuous": [{"name": "a", "lower": 1, "upper": 1}]}"#).is_err());
        assert!(VariationSpace::parse(r#"{"discrete": [{"name": "a", "categories": []}]}"#).is_err());
    }

    #[test]
    fn pose_variation_uses_distance_to_nominal() {
        let nominal = Pose::from_position_yaw(Vec3::new(1.0, 0.0, 0.5), 0.0);
        let s = VariationSpace {
            continuous: vec![ContinuousDim { name: "camera".into(), lower: 0.0, upper: 0.5, nominal: Some(nominal) }],
            discrete: vec![],
        };
        let moved = Pose::from_position_yaw(Vec3::new(1.1, 0.0, 0.5), 0.0);
        let values = BTreeMap::from([("camera".to_string(), Variation::Pose(moved))]);
        let raw = raw_point_from_variation(&s, &values).unwrap();
        assert!((raw.continuous[0] - 0.1).abs() < 1e-12);
        let missing = BTreeMap::new();
        assert!(matches!(raw_point_from_variation(&s, &missing), Err(SensitivityError::MissingDim(_))));
    }

    proptest! {
        #[test]
        fn normalize_round_trip(lo in -100.0..100.0f64, span in 0.001..50.0f64, u in 0.0..=1.0f64) {
            let s = VariationSpace {
                continuous: vec![ContinuousDim { name: "a".into(), lower: lo, upper: lo + span, nominal: None }],
                discrete: vec![],
            };
            let v = (lo + u * span).min(lo + span);
            let p = normalize(&s, &RawPoint { continuous: vec![v], discrete: vec![] }).unwrap();
            let back = denormalize(&s, &p).unwrap();
            prop_assert!((back.continuous[0] - v).abs() < 1e-12);
        }
    }
}
