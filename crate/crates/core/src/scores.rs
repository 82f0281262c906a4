//! Scoring functions over a finite instance space.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::distribution::FiniteDistribution;
use crate::error::{Error, Result};
use crate::extended::ExtendedReal;

/// One extended-real score per instance id, kept in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoringFunction {
    scores: IndexMap<String, ExtendedReal>,
}

impl ScoringFunction {
    /// Rejects NaN scores and repeated ids.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut scores = IndexMap::new();
        for (id, value) in pairs {
            let id = id.into();
            let score = ExtendedReal::new(value)
                .ok_or_else(|| Error::invalid(format!("score for `{id}` is NaN")))?;
            if scores.insert(id.clone(), score).is_some() {
                return Err(Error::invalid(format!("duplicate score for `{id}`")));
            }
        }
        Ok(Self { scores })
    }

    /// Scores listed in the distribution's instance order.
    pub fn for_distribution(d: &FiniteDistribution, values: &[f64]) -> Result<Self> {
        if values.len() != d.len() {
            return Err(Error::invalid(format!(
                "{} scores given for {} instances",
                values.len(),
                d.len()
            )));
        }
        Self::from_pairs(d.ids().zip(values.iter().copied()))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<ExtendedReal> {
        self.scores.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.scores.iter().map(|(k, v)| (k.as_str(), v.get()))
    }

    pub fn values(&self) -> Vec<f64> {
        self.scores.values().map(|v| v.get()).collect()
    }

    /// Applies `g` to every score. `g` must not produce NaN.
    pub fn map_values(&self, g: impl Fn(f64) -> f64) -> Self {
        let scores = self
            .scores
            .iter()
            .map(|(k, v)| {
                let mapped = ExtendedReal::new(g(v.get())).expect("score map produced NaN");
                (k.clone(), mapped)
            })
            .collect();
        Self { scores }
    }

    /// Scores in the order of `d`'s instances. Every support point must have
    /// a score and no score may name a point outside the support.
    pub fn aligned(&self, d: &FiniteDistribution) -> Result<Vec<f64>> {
        let out = d
            .ids()
            .map(|id| {
                self.get(id)
                    .map(ExtendedReal::get)
                    .ok_or_else(|| Error::MissingScore(id.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        if self.len() != d.len() {
            let extra = self
                .scores
                .keys()
                .find(|k| d.index_of(k).is_none())
                .expect("more scores than support points");
            return Err(Error::UnexpectedScore(extra.clone()));
        }
        Ok(out)
    }

    /// Whether two instances share a score.
    pub fn has_ties(&self) -> bool {
        let mut v = self.values();
        v.sort_by(|a, b| a.partial_cmp(b).expect("scores are never NaN"));
        v.windows(2).any(|w| w[0] == w[1])
    }
}
