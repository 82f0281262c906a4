//! Finite distributions on `X x {-1, +1}` and the pairwise distribution they
//! induce.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::Label;

/// Tolerance on `sum(mu) = 1`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    /// Marginal mass `mu_i = P(X = x_i)`.
    pub weight: f64,
    /// Posterior `eta(x_i) = P(Y = 1 | X = x_i)`.
    pub eta: f64,
}

#[derive(Deserialize)]
struct RawDistribution {
    instances: Vec<Instance>,
}

/// A distribution `D` over a finite instance space, given by the marginal
/// `mu` and the class probability function `eta`.
///
/// Construction enforces strictly positive weights summing to one, posteriors
/// in `[0, 1]`, distinct ids, and `0 < p < 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct FiniteDistribution {
    instances: Vec<Instance>,
    #[serde(skip)]
    p: f64,
}

impl TryFrom<RawDistribution> for FiniteDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        Self::new(raw.instances)
    }
}

impl FiniteDistribution {
    pub fn new(instances: Vec<Instance>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::distribution("instances", "support is empty"));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, inst) in instances.iter().enumerate() {
            if !seen.insert(inst.id.as_str()) {
                return Err(Error::distribution(
                    format!("instances[{i}].id"),
                    format!("duplicate id `{}`", inst.id),
                ));
            }
            if !(inst.weight > 0.0 && inst.weight.is_finite()) {
                return Err(Error::distribution(
                    format!("instances[{i}].weight"),
                    format!("weight {} must be positive and finite", inst.weight),
                ));
            }
            if !(0.0..=1.0).contains(&inst.eta) {
                return Err(Error::distribution(
                    format!("instances[{i}].eta"),
                    format!("posterior {} is outside [0, 1]", inst.eta),
                ));
            }
        }
        let total: f64 = instances.iter().map(|x| x.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::distribution(
                "weight",
                format!("weights sum to {total}, not 1"),
            ));
        }
        let p: f64 = instances.iter().map(|x| x.weight * x.eta).sum();
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::distribution(
                "eta",
                format!("positive rate p = {p} must lie strictly between 0 and 1"),
            ));
        }
        Ok(Self { instances, p })
    }

    /// Instances named `x0, x1, ...`.
    pub fn from_arrays(weights: &[f64], etas: &[f64]) -> Result<Self> {
        if weights.len() != etas.len() {
            return Err(Error::distribution(
                "instances",
                format!("{} weights but {} posteriors", weights.len(), etas.len()),
            ));
        }
        Self::new(
            weights
                .iter()
                .zip(etas)
                .enumerate()
                .map(|(i, (&weight, &eta))| Instance {
                    id: format!("x{i}"),
                    weight,
                    eta,
                })
                .collect(),
        )
    }

    /// Parses `{"instances": [{"id": .., "weight": .., "eta": ..}, ...]}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Ten instances with posteriors `0.05, 0.15, ..., 0.95` and weights
    /// proportional to `1, 2, ..., 10`.
    pub fn demo() -> Self {
        let weights: Vec<f64> = (1..=10).map(|k| k as f64 / 55.0).collect();
        let etas: Vec<f64> = (0..10).map(|k| 0.05 + 0.1 * k as f64).collect();
        Self::from_arrays(&weights, &etas).expect("demo distribution is valid")
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.instances.iter().map(|x| x.id.as_str())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.instances.iter().position(|x| x.id == id)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.instances.iter().map(|x| x.weight).collect()
    }

    pub fn etas(&self) -> Vec<f64> {
        self.instances.iter().map(|x| x.eta).collect()
    }

    /// `p = P(Y = 1) = sum_i mu_i eta_i`.
    pub fn positive_rate(&self) -> f64 {
        self.p
    }

    /// `2 p (1 - p) = P(Y != Y')`, the normaliser of every pairwise quantity.
    pub fn cross_label_mass(&self) -> f64 {
        2.0 * self.p * (1.0 - self.p)
    }

    /// `er*_rank = (1 / 2p(1-p)) sum_{i,j} mu_i mu_j min(eta_i (1 - eta_j), eta_j (1 - eta_i))`
    /// over ordered pairs, diagonal included.
    pub fn bayes_ranking_risk(&self) -> f64 {
        let mut total = 0.0;
        for a in &self.instances {
            for b in &self.instances {
                let ab = a.eta * (1.0 - b.eta);
                let ba = b.eta * (1.0 - a.eta);
                total += a.weight * b.weight * ab.min(ba);
            }
        }
        total / self.cross_label_mass()
    }

    /// The distribution of `((X, X'), sign(Y - Y'))` conditioned on `Y != Y'`.
    pub fn induce_pairwise(&self) -> PairwiseDistribution {
        let norm = self.cross_label_mass();
        let mut pairs = Vec::new();
        for (i, a) in self.instances.iter().enumerate() {
            for (j, b) in self.instances.iter().enumerate() {
                let ab = a.eta * (1.0 - b.eta);
                let ba = b.eta * (1.0 - a.eta);
                let cross = ab + ba;
                if cross == 0.0 {
                    continue;
                }
                pairs.push(Pair {
                    first: i,
                    second: j,
                    weight: a.weight * b.weight * cross / norm,
                    eta: ab / cross,
                });
            }
        }
        PairwiseDistribution { pairs }
    }

    /// `n` i.i.d. draws of `(x, y)`, reproducible from `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<(String, Label)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self
            .sample_indices(n, &mut rng)?
            .into_iter()
            .map(|(i, y)| (self.instances[i].id.clone(), y))
            .collect())
    }

    /// Like [`sample`](Self::sample) but returns support indices and draws
    /// from a caller-supplied generator.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<(usize, Label)>> {
        if n == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        let index = WeightedIndex::new(self.instances.iter().map(|x| x.weight))
            .map_err(|e| Error::distribution("weight", e.to_string()))?;
        Ok((0..n)
            .map(|_| {
                let i = index.sample(rng);
                let y = if rng.random_bool(self.instances[i].eta) {
                    Label::Positive
                } else {
                    Label::Negative
                };
                (i, y)
            })
            .collect())
    }

    /// The smallest `C` with `P_X(|eta(X) - eta_i| <= t) <= C t^alpha` for
    /// every support point `x_i` and every `t` in `t_grid`.
    ///
    /// Atoms put a floor under the left side as `t -> 0`, so no finite
    /// distribution satisfies the condition on all of `(0, 1]` for
    /// `alpha > 0`. The certificate is only claimed on the given grid.
    pub fn noise_certificate(&self, alpha: f64, t_grid: &[f64]) -> Result<NoiseCertificate> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha = {alpha} is outside [0, 1)")));
        }
        if t_grid.is_empty() {
            return Err(Error::invalid("t grid is empty"));
        }
        if let Some(t) = t_grid.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::invalid(format!("t = {t} is outside (0, 1]")));
        }
        let mut best = NoiseCertificate {
            alpha,
            constant: 0.0,
            binding_instance: String::new(),
            binding_t: t_grid[0],
            t_min: t_grid.iter().copied().fold(f64::INFINITY, f64::min),
            t_max: t_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        };
        for center in &self.instances {
            for &t in t_grid {
                let mass: f64 = self
                    .instances
                    .iter()
                    .filter(|x| (x.eta - center.eta).abs() <= t)
                    .map(|x| x.weight)
                    .sum();
                let ratio = mass / t.powf(alpha);
                if ratio > best.constant {
                    best.constant = ratio;
                    best.binding_instance = center.id.clone();
                    best.binding_t = t;
                }
            }
        }
        Ok(best)
    }
}

/// A grid-scoped NA(alpha) certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseCertificate {
    pub alpha: f64,
    pub constant: f64,
    /// The support point and radius where the constant is attained.
    pub binding_instance: String,
    pub binding_t: f64,
    /// The certificate says nothing about radii outside `[t_min, t_max]`.
    pub t_min: f64,
    pub t_max: f64,
}

/// One ordered pair `(x_i, x_j)` of the pairwise distribution. `eta` is the
/// probability that `x_i` is the positive member.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub first: usize,
    pub second: usize,
    pub weight: f64,
    pub eta: f64,
}

/// The induced distribution on ordered pairs. Pairs that never carry
/// different labels are omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDistribution {
    pairs: Vec<Pair>,
}

impl PairwiseDistribution {
    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn total_weight(&self) -> f64 {
        self.pairs.iter().map(|p| p.weight).sum()
    }

    /// `P(Y~ = 1)`; one half for every induced distribution.
    pub fn positive_rate(&self) -> f64 {
        self.pairs.iter().map(|p| p.weight * p.eta).sum()
    }

    /// `E[min(eta~, 1 - eta~)]`.
    pub fn bayes_zero_one_risk(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.weight * p.eta.min(1.0 - p.eta))
            .sum()
    }
}
