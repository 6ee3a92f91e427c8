//! Synthetic corpora with known population statistics.
//!
//! A [`SyntheticSpec`] draws every feature independently given the class,
//! which realizes exactly the conditional-independence assumption behind
//! the factorization theorem. A [`MixtureSpec`] draws each example from one
//! of two such component profiles, which induces within-class dependence
//! with closed-form D coefficients; equal components recover independence.
//!
//! [`PopulationStats`] exposes the exact probabilities of either generator
//! through the same interfaces the estimators use, so theorem-level checks
//! can run against analytic values instead of sampled counts.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, Label, SparseExample};
use crate::error::Result;
use crate::rde::{Polarity, RdeModel, Reference};
use crate::stats::{ClassPrior, DependenceCoefficients, FeatureProbs, ImbalanceVector};

/// Class-conditionally independent generator: feature j occurs with
/// probability `q_pos[j]` in positive examples and `q_neg[j]` in negative
/// ones.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub p_pos: f64,
    pub q_pos: Vec<f64>,
    pub q_neg: Vec<f64>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn n_features(&self) -> usize {
        self.q_pos.len()
    }

    /// Uniformly random occurrence probabilities in (0.05, 0.95).
    pub fn random(n_features: usize, seed: u64) -> SyntheticSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p_pos = rng.random_range(0.2..0.8);
        let q_pos = (0..n_features)
            .map(|_| rng.random_range(0.05..0.95))
            .collect();
        let q_neg = (0..n_features)
            .map(|_| rng.random_range(0.05..0.95))
            .collect();
        SyntheticSpec {
            p_pos,
            q_pos,
            q_neg,
            seed,
        }
    }

    pub fn to_mixture(&self) -> MixtureSpec {
        MixtureSpec {
            p_pos: self.p_pos,
            mix: 1.0,
            pos_a: self.q_pos.clone(),
            pos_b: self.q_pos.clone(),
            neg_a: self.q_neg.clone(),
            neg_b: self.q_neg.clone(),
            seed: self.seed,
        }
    }
}

/// Two-component mixture per class: with probability `mix` an example uses
/// the `_a` occurrence profile of its class, otherwise the `_b` profile.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    pub p_pos: f64,
    pub mix: f64,
    pub pos_a: Vec<f64>,
    pub pos_b: Vec<f64>,
    pub neg_a: Vec<f64>,
    pub neg_b: Vec<f64>,
    pub seed: u64,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl MixtureSpec {
    pub fn n_features(&self) -> usize {
        self.pos_a.len()
    }

    /// Random mixture with all probabilities in (0.05, 0.95); generically
    /// conditionally dependent with nonzero imbalance everywhere.
    pub fn random(n_features: usize, seed: u64) -> MixtureSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = |rng: &mut ChaCha8Rng| {
            (0..n_features)
                .map(|_| rng.random_range(0.05..0.95))
                .collect::<Vec<f64>>()
        };
        MixtureSpec {
            p_pos: rng.random_range(0.2..0.8),
            mix: rng.random_range(0.2..0.8),
            pos_a: q(&mut rng),
            pos_b: q(&mut rng),
            neg_a: q(&mut rng),
            neg_b: q(&mut rng),
            seed,
        }
    }

    /// Bag-of-words-like corpus profile: mostly rare features, a minority
    /// of them class-informative, plus a shared component shift that gives
    /// moderate within-class dependence.
    pub fn text_like(n_features: usize, seed: u64) -> MixtureSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pos_a = Vec::with_capacity(n_features);
        let mut pos_b = Vec::with_capacity(n_features);
        let mut neg_a = Vec::with_capacity(n_features);
        let mut neg_b = Vec::with_capacity(n_features);
        for _ in 0..n_features {
            let base = 10f64.powf(rng.random_range(-2.7..-1.1));
            // heavy-tailed informativeness: every word carries a little
            // signal, a minority carries a lot
            let effect = 0.22 * gaussian(&mut rng)
                + if rng.random::<f64>() < 0.1 {
                    0.8 * gaussian(&mut rng)
                } else {
                    0.0
                };
            let q_pos = (base * (effect / 2.0).exp()).clamp(1e-4, 0.5);
            let q_neg = (base * (-effect / 2.0).exp()).clamp(1e-4, 0.5);
            let shift = (0.55 * gaussian(&mut rng)).exp();
            pos_a.push((q_pos * shift).clamp(1e-4, 0.6));
            pos_b.push((q_pos / shift).clamp(1e-4, 0.6));
            neg_a.push((q_neg * shift).clamp(1e-4, 0.6));
            neg_b.push((q_neg / shift).clamp(1e-4, 0.6));
        }
        MixtureSpec {
            p_pos: 0.35,
            mix: 0.5,
            pos_a,
            pos_b,
            neg_a,
            neg_b,
            seed,
        }
    }

    /// Draw `n` labeled examples. Reproducible from the spec's seed; the
    /// per-example draw order is fixed.
    pub fn generate(&self, n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n_features = self.n_features();
        let mut examples = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let pos = rng.random::<f64>() < self.p_pos;
            let a = rng.random::<f64>() < self.mix;
            let q = match (pos, a) {
                (true, true) => &self.pos_a,
                (true, false) => &self.pos_b,
                (false, true) => &self.neg_a,
                (false, false) => &self.neg_b,
            };
            let mut ids = Vec::new();
            for (j, &qj) in q.iter().enumerate() {
                if rng.random::<f64>() < qj {
                    ids.push(j as u32);
                }
            }
            examples.push(SparseExample::new(ids));
            labels.push(if pos { Label::Pos } else { Label::Neg });
        }
        Dataset::new(
            examples,
            labels,
            n_features,
            format!("synthetic seed={}", self.seed),
        )
    }
}

/// Draw `n` examples from a class-conditionally independent spec.
pub fn synth_generate(spec: &SyntheticSpec, n: usize) -> Dataset {
    spec.to_mixture().generate(n)
}

/// Exact population probabilities of a mixture generator.
#[derive(Debug, Clone)]
pub struct PopulationStats {
    spec: MixtureSpec,
    p_j_pos: Vec<f64>,
    p_j_neg: Vec<f64>,
    p_j: Vec<f64>,
}

/// Closed-form population statistics; all quantities are analytic in the
/// spec parameters.
pub fn population_stats(spec: &SyntheticSpec) -> PopulationStats {
    PopulationStats::new(spec.to_mixture())
}

impl PopulationStats {
    pub fn new(spec: MixtureSpec) -> PopulationStats {
        let mixed = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(&qa, &qb)| spec.mix * qa + (1.0 - spec.mix) * qb)
                .collect()
        };
        let p_j_pos = mixed(&spec.pos_a, &spec.pos_b);
        let p_j_neg = mixed(&spec.neg_a, &spec.neg_b);
        let p_j = p_j_pos
            .iter()
            .zip(&p_j_neg)
            .map(|(&p, &q)| spec.p_pos * p + (1.0 - spec.p_pos) * q)
            .collect();
        PopulationStats {
            spec,
            p_j_pos,
            p_j_neg,
            p_j,
        }
    }

    pub fn spec(&self) -> &MixtureSpec {
        &self.spec
    }

    pub fn prior(&self) -> ClassPrior {
        ClassPrior::from_p_pos(self.spec.p_pos)
    }

    /// P(j | class)
    pub fn p_feature_given(&self, j: u32, pos: bool) -> f64 {
        if pos {
            self.p_j_pos[j as usize]
        } else {
            self.p_j_neg[j as usize]
        }
    }

    /// P(a, b | class); the diagonal collapses to the marginal.
    pub fn p_pair_given(&self, a: u32, b: u32, pos: bool) -> f64 {
        if a == b {
            return self.p_feature_given(a, pos);
        }
        let (qa, qb) = if pos {
            (&self.spec.pos_a, &self.spec.pos_b)
        } else {
            (&self.spec.neg_a, &self.spec.neg_b)
        };
        let (a, b) = (a as usize, b as usize);
        self.spec.mix * qa[a] * qa[b] + (1.0 - self.spec.mix) * qb[a] * qb[b]
    }

    /// Exact I(j); undefined only for features with zero probability.
    pub fn imbalance(&self) -> ImbalanceVector {
        let prior = self.prior();
        let alpha = prior.alpha();
        let p_pos = self.spec.p_pos;
        let values = (0..self.n_features())
            .map(|j| {
                let p_j = self.p_j[j];
                (p_j > 0.0).then(|| {
                    let joint_pos = p_pos * self.p_j_pos[j];
                    let joint_neg = (1.0 - p_pos) * self.p_j_neg[j];
                    ((joint_pos - alpha * joint_neg) / p_j).clamp(-alpha, 1.0)
                })
            })
            .collect();
        ImbalanceVector::new(values, prior)
    }

    /// Exact D(j,r|class); zero for all j != r in a pure (single
    /// component) spec.
    pub fn dependence(&self, r: u32) -> DependenceCoefficients {
        let coeff = |j: u32, pos: bool| -> f64 {
            let p_j = self.p_feature_given(j, pos);
            let p_r = self.p_feature_given(r, pos);
            if p_j == 0.0 || p_r == 0.0 {
                return 0.0;
            }
            self.p_pair_given(j, r, pos) / (p_j * p_r) - 1.0
        };
        DependenceCoefficients {
            reference: r,
            d_pos: (0..self.n_features() as u32).map(|j| coeff(j, true)).collect(),
            d_neg: (0..self.n_features() as u32)
                .map(|j| coeff(j, false))
                .collect(),
        }
    }

    /// The population semi-perfect model: weights P(y|j) - P(y), with the
    /// negative polarity the exact negation.
    pub fn semiperfect(&self, polarity: Polarity) -> RdeModel {
        let p_pos = self.spec.p_pos;
        let pos_weights: Vec<f64> = (0..self.n_features())
            .map(|j| {
                if self.p_j[j] > 0.0 {
                    p_pos * self.p_j_pos[j] / self.p_j[j] - p_pos
                } else {
                    0.0
                }
            })
            .collect();
        let alpha = self.prior().alpha();
        match polarity {
            Polarity::Pos => {
                RdeModel::from_parts(Reference::GoldPos, pos_weights, p_pos, Some(1.0))
            }
            Polarity::Neg => RdeModel::from_parts(
                Reference::GoldNeg,
                pos_weights.iter().map(|w| -w).collect(),
                1.0 - p_pos,
                Some(-alpha),
            ),
        }
    }

    /// Probability of observing exactly the feature set of `x`.
    pub fn pattern_prob(&self, x: &SparseExample) -> f64 {
        let component = |q: &[f64]| -> f64 {
            let mut p = 1.0;
            for (j, &qj) in q.iter().enumerate() {
                p *= if x.contains(j as u32) { qj } else { 1.0 - qj };
            }
            p
        };
        let mix = self.spec.mix;
        let pos = mix * component(&self.spec.pos_a) + (1.0 - mix) * component(&self.spec.pos_b);
        let neg = mix * component(&self.spec.neg_a) + (1.0 - mix) * component(&self.spec.neg_b);
        self.spec.p_pos * pos + (1.0 - self.spec.p_pos) * neg
    }
}

impl FeatureProbs for PopulationStats {
    fn n_features(&self) -> usize {
        self.p_j.len()
    }

    fn p_feature(&self, j: u32) -> f64 {
        self.p_j[j as usize]
    }

    fn p_pair(&self, a: u32, b: u32) -> Result<f64> {
        let p_pos = self.spec.p_pos;
        Ok(p_pos * self.p_pair_given(a, b, true)
            + (1.0 - p_pos) * self.p_pair_given(a, b, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::count_corpus;

    #[test]
    fn all_zero_probabilities_generate_empty_examples() {
        let spec = SyntheticSpec {
            p_pos: 0.5,
            q_pos: vec![0.0; 4],
            q_neg: vec![0.0; 4],
            seed: 3,
        };
        let data = synth_generate(&spec, 50);
        assert!(data.examples().iter().all(|x| x.is_empty()));
    }

    #[test]
    fn perfect_indicator_feature_has_unit_imbalance() {
        let spec = SyntheticSpec {
            p_pos: 0.4,
            q_pos: vec![1.0, 0.3],
            q_neg: vec![0.0, 0.3],
            seed: 4,
        };
        let pop = population_stats(&spec);
        let imb = pop.imbalance();
        assert_eq!(imb.get(0), Some(1.0));
        assert!(imb.get(1).unwrap().abs() < 1e-15);
        // and in a generated sample the feature marks exactly the positives
        let data = synth_generate(&spec, 200);
        for (x, label) in data.examples().iter().zip(data.labels()) {
            assert_eq!(x.contains(0), *label == Label::Pos);
        }
    }

    #[test]
    fn sampled_marginals_match_population_within_3_sigma() {
        let spec = SyntheticSpec::random(8, 11);
        let pop = population_stats(&spec);
        let n = 100_000;
        let data = synth_generate(&spec, n);
        let table = count_corpus(&data.strip_labels(), &[]).unwrap();
        for j in 0..8u32 {
            let p = pop.p_feature(j);
            let observed = table.marginal_count(j) as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (observed - p).abs() <= 3.0 * sigma,
                "feature {j}: observed {observed}, population {p}"
            );
        }
    }

    #[test]
    fn population_pair_is_total_probability_over_classes() {
        let spec = SyntheticSpec::random(5, 12);
        let pop = population_stats(&spec);
        for j in 0..5u32 {
            for r in 0..5u32 {
                if j == r {
                    continue;
                }
                let expect = spec.p_pos * spec.q_pos[j as usize] * spec.q_pos[r as usize]
                    + (1.0 - spec.p_pos) * spec.q_neg[j as usize] * spec.q_neg[r as usize];
                assert!((pop.p_pair(j, r).unwrap() - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pure_spec_has_zero_dependence_off_diagonal() {
        let spec = SyntheticSpec::random(6, 13);
        let pop = population_stats(&spec);
        for r in 0..6u32 {
            let dep = pop.dependence(r);
            for j in 0..6u32 {
                if j != r {
                    assert!(dep.d_pos[j as usize].abs() < 1e-12);
                    assert!(dep.d_neg[j as usize].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn imbalance_matches_direct_formula_on_handpicked_specs() {
        for (p_pos, q_pos, q_neg) in [
            (0.5, 0.8, 0.2),
            (0.25, 0.1, 0.7),
            (0.7, 0.5, 0.5),
        ] {
            let spec = SyntheticSpec {
                p_pos,
                q_pos: vec![q_pos],
                q_neg: vec![q_neg],
                seed: 0,
            };
            let pop = population_stats(&spec);
            let alpha = p_pos / (1.0 - p_pos);
            let p_j = p_pos * q_pos + (1.0 - p_pos) * q_neg;
            let expect = (p_pos * q_pos - alpha * (1.0 - p_pos) * q_neg) / p_j;
            let got = pop.imbalance().get(0).unwrap();
            assert!((got - expect).abs() < 1e-14, "{got} vs {expect}");
        }
    }

    #[test]
    fn pattern_probs_sum_to_one() {
        let spec = MixtureSpec::random(6, 14);
        let pop = PopulationStats::new(spec);
        let mut total = 0.0;
        for mask in 0u32..64 {
            let ids: Vec<u32> = (0..6).filter(|j| mask >> j & 1 == 1).collect();
            total += pop.pattern_prob(&SparseExample::new(ids));
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generation_is_reproducible() {
        let spec = MixtureSpec::random(10, 15);
        let a = spec.generate(200);
        let b = spec.generate(200);
        assert_eq!(a.labels(), b.labels());
        for (x, y) in a.examples().iter().zip(b.examples()) {
            assert_eq!(x, y);
        }
    }
}
