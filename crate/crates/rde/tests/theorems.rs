//! Theorem-level integration tests beyond the acceptance gate: the
//! sampled-count estimation path, ROC-curve equality in the factorization
//! regime, agreement between the statistics module and the bound
//! machinery, and the ensemble's position between its baselines.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rde::bounds::{lemma1_sides, Joint222};
use rde::corpus::{Dataset, Label, SparseExample};
use rde::ensemble::{train_serde, SelectionConfig};
use rde::eval::{diagnostics, roc_auc, PopulationStats, SyntheticSpec};
use rde::rde::{build_rde, build_semiperfect, Polarity};
use rde::stats::{count_corpus, dependence, imbalance, FeatureProbs, ProbQuery};

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(1e-12..1.0);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Conditionally independent corpus whose per-feature signal is weak
/// enough that estimation quality separates the methods.
fn weak_spec(n: usize, seed: u64) -> SyntheticSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q_pos = Vec::new();
    let mut q_neg = Vec::new();
    for _ in 0..n {
        let base: f64 = rng.random_range(0.02..0.25);
        let effect = 0.35 * gaussian(&mut rng);
        q_pos.push((base * (effect / 2.0).exp()).clamp(1e-3, 0.5));
        q_neg.push((base * (-effect / 2.0).exp()).clamp(1e-3, 0.5));
    }
    SyntheticSpec {
        p_pos: 0.4,
        q_pos,
        q_neg,
        seed,
    }
}

/// Estimation-path guard: weights from sampled counts stay within a
/// binomial-noise envelope of the population weights, which shrink as
/// 1/sqrt(N).
#[test]
fn theorem1_sampled_weights_within_binomial_tolerance() {
    let spec = SyntheticSpec::random(20, 901);
    let pop = PopulationStats::new(spec.to_mixture());
    let n: usize = 200_000;
    let data = spec.to_mixture().generate(n).strip_labels();
    let refs: Vec<u32> = (0..20).collect();
    let table = count_corpus(&data, &refs).unwrap();
    for r in 0..20u32 {
        let sampled = build_rde(&table, r).unwrap();
        let exact = build_rde(&pop, r).unwrap();
        for j in 0..20u32 {
            let n_j = table.marginal_count(j) as f64;
            let p_r_given_j = pop.p_pair(j, r).unwrap() / pop.p_feature(j);
            let sigma = (p_r_given_j * (1.0 - p_r_given_j) / n_j).sqrt()
                + (pop.p_feature(r) * (1.0 - pop.p_feature(r)) / n as f64).sqrt();
            let gap = (sampled.weight(j) - exact.weight(j)).abs();
            assert!(
                gap <= 6.0 * sigma + 1e-12,
                "r = {r}, j = {j}: |sampled - exact| = {gap:e} > 6 sigma = {:e}",
                6.0 * sigma
            );
        }
    }
}

/// In the factorization regime the single RDE and the semi-perfect model
/// induce the same ranking, hence the same ROC curve and AUC, on sampled
/// examples scored with population weights.
#[test]
fn corollary1_roc_curve_equality_on_population_scores() {
    for seed in 0..10u64 {
        let spec = SyntheticSpec::random(12, 910 + seed);
        let pop = PopulationStats::new(spec.to_mixture());
        let imb = pop.imbalance();
        let data = spec.to_mixture().generate(1500);
        let labels: Vec<bool> = data.labels().iter().map(|l| *l == Label::Pos).collect();
        let mut perfect = pop.semiperfect(Polarity::Pos);
        for r in 0..12u32 {
            let i_r = imb.get(r).unwrap();
            if i_r <= 1e-6 {
                continue;
            }
            // keep the reference out of the scored columns on both sides
            let mut model = build_rde(&pop, r).unwrap();
            model.set_pruned(r, true);
            perfect.set_pruned(r, true);
            let auc_r = roc_auc(&model.score_batch(&data), &labels).unwrap();
            let auc_p = roc_auc(&perfect.score_batch(&data), &labels).unwrap();
            assert!(
                (auc_r.auc - auc_p.auc).abs() < 1e-12,
                "seed {seed}, r = {r}: AUC {} vs semi-perfect {}",
                auc_r.auc,
                auc_p.auc
            );
            assert_eq!(auc_r.curve.len(), auc_p.curve.len());
            for (a, b) in auc_r.curve.iter().zip(&auc_p.curve) {
                assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
            }
            perfect.set_pruned(r, false);
        }
    }
}

/// Realize random 2x2x2 joints as concrete datasets and check that the
/// imbalance and dependence estimators reproduce exactly the quantities
/// inside the weight-difference identity.
#[test]
fn lemma1_agrees_with_stats_module_estimates() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..300 {
        // counts per (j, r, y) cell; occasionally zero a cell, keeping
        // P(j), P(r) and both classes populated
        let mut cells = [0u64; 8];
        for c in &mut cells {
            *c = rng.random_range(1..25);
        }
        if case % 3 == 0 {
            cells[(1 << 2) | (1 << 1)] = 0; // j=1, r=1, y=0
        }
        let m: u64 = cells.iter().sum();
        let mut examples = Vec::new();
        let mut labels = Vec::new();
        for (cell, &count) in cells.iter().enumerate() {
            let (j, r, y) = (cell >> 2 & 1, cell >> 1 & 1, cell & 1);
            for _ in 0..count {
                let mut ids = Vec::new();
                if j == 1 {
                    ids.push(0);
                }
                if r == 1 {
                    ids.push(1);
                }
                examples.push(SparseExample::new(ids));
                labels.push(if y == 1 { Label::Pos } else { Label::Neg });
            }
        }
        let data = Dataset::new(examples, labels, 2, "joint");
        let table = count_corpus(&data, &[1]).unwrap();
        let imb = imbalance(&table).unwrap();
        let dep = dependence(&table, 1).unwrap();
        let alpha = imb.alpha();
        let (i_j, i_r) = (imb.get(0).unwrap(), imb.get(1).unwrap());

        let joint = Joint222::new(core::array::from_fn(|cell| {
            cells[cell] as f64 / m as f64
        }))
        .unwrap();
        let (lhs, rhs) = lemma1_sides(&joint).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);

        // identical right side from the estimators
        let rhs_stats = (alpha + i_j) * (alpha + i_r) / (alpha * (1.0 + alpha)) * dep.d_pos[0]
            + (1.0 - i_j) * (1.0 - i_r) / (1.0 + alpha) * dep.d_neg[0];
        assert!(
            (rhs_stats - rhs).abs() < 1e-12,
            "case {case}: stats rhs {rhs_stats} vs joint rhs {rhs}"
        );
        // and the left side from probability queries
        let p_j = rde::stats::probability(&table, ProbQuery::Marginal(0)).unwrap();
        let p_r = rde::stats::probability(&table, ProbQuery::Marginal(1)).unwrap();
        let p_jr = rde::stats::probability(&table, ProbQuery::Joint(0, 1)).unwrap();
        let lhs_stats = p_jr / (p_j * p_r) - 1.0 - i_r * i_j / alpha;
        assert!((lhs_stats - lhs).abs() < 1e-12);
    }
}

/// Figure-1 analogue on the conditionally independent benchmark: the
/// ensemble sits between the supervised RDE and the semi-perfect model,
/// and outperforms its best single member, in at least 4 of 5 resamples.
#[test]
fn serde_sits_between_baselines_and_above_members() {
    let spec = weak_spec(150, 303);
    let data = spec.to_mixture().generate(20_000);
    let perf = build_semiperfect(&data, Polarity::Pos).unwrap();
    let mut between_ok = 0;
    let mut best_ok = 0;
    for resample in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(40 + resample);
        let mut perm: Vec<usize> = (0..data.len()).collect();
        perm.shuffle(&mut rng);
        let labeled = data.subset(&perm[..200], "labeled");
        let test = data.subset(&perm[200..1200], "test");
        let unl = data.subset(&perm[1200..], "unlabeled").strip_labels();
        let labels: Vec<bool> = test.labels().iter().map(|l| *l == Label::Pos).collect();
        let cfg = SelectionConfig {
            k: 15,
            t: 20.0,
            candidate_min_count: 10,
        };
        let model = train_serde(&labeled, &unl, &cfg, 40.0).unwrap();
        let serde_auc = roc_auc(&model.predict_batch(&test), &labels).unwrap().auc;
        let best_member = model
            .members
            .iter()
            .map(|m| roc_auc(&m.model.score_batch(&test), &labels).unwrap().auc)
            .fold(f64::NEG_INFINITY, f64::max);
        let surde = build_semiperfect(&labeled, Polarity::Pos).unwrap();
        let surde_auc = roc_auc(&surde.score_batch(&test), &labels).unwrap().auc;
        let perf_auc = roc_auc(&perf.score_batch(&test), &labels).unwrap().auc;
        between_ok += u32::from(surde_auc <= serde_auc && serde_auc <= perf_auc);
        best_ok += u32::from(serde_auc >= best_member);
    }
    assert!(between_ok >= 4, "between in only {between_ok}/5 resamples");
    assert!(best_ok >= 4, "above best member in only {best_ok}/5 resamples");
}

/// On a conditionally independent corpus every sufficiently imbalanced
/// candidate behaves like the semi-perfect classifier: distance within the
/// co-occurrence estimation noise and held-out AUC close to semi-perfect.
#[test]
fn diagnostics_recover_corollary_regime_within_sampling_noise() {
    let spec = weak_spec(60, 505);
    let data = spec.to_mixture().generate(20_000);
    let indices: Vec<usize> = (0..data.len()).collect();
    let labeled = data.subset(&indices[..4000], "labeled");
    let heldout = data.subset(&indices[4000..8000], "heldout");
    let unlabeled = data.subset(&indices[8000..], "rest").strip_labels();
    let labeled_table = count_corpus(&labeled, &[]).unwrap();
    let candidates = rde::ensemble::candidate_pool(&labeled_table, 100);
    assert!(candidates.len() >= 20);
    let unlabeled_table = count_corpus(&unlabeled, &candidates).unwrap();
    let perfect = build_semiperfect(&data, Polarity::Pos).unwrap();
    let prior = count_corpus(&data, &[]).unwrap().prior().unwrap();
    let rows = diagnostics(
        &candidates,
        &labeled,
        &unlabeled_table,
        &heldout,
        &perfect,
        &prior,
    )
    .unwrap();
    let heldout_labels: Vec<bool> = heldout.labels().iter().map(|l| *l == Label::Pos).collect();
    let perfect_auc = roc_auc(&perfect.score_batch(&heldout), &heldout_labels)
        .unwrap()
        .auc;
    let n_u = unlabeled_table.n_examples() as f64;
    let mut strong = 0;
    for row in &rows {
        let (i_r, dist) = match (row.i_r, row.dist) {
            (Some(i), Some(d)) => (i, d),
            _ => continue,
        };
        // binomial noise envelope for the normalized score gap
        let r = row.reference;
        let p_r = unlabeled_table.marginal_count(r) as f64 / n_u;
        let mut noise = 0.0;
        for j in 0..unlabeled_table.n_features() as u32 {
            let n_j = unlabeled_table.marginal_count(j) as f64;
            if n_j == 0.0 {
                continue;
            }
            let p_j = n_j / n_u;
            let p_cond = unlabeled_table.pair_count(j, r).unwrap() as f64 / n_j;
            let sigma = (p_cond * (1.0 - p_cond) / n_j).sqrt().max(1.0 / n_j)
                + (p_r * (1.0 - p_r) / n_u).sqrt();
            noise += p_j * sigma;
        }
        let allowance = 6.0 * noise / (p_r * i_r.abs());
        assert!(
            dist <= allowance,
            "reference {r}: dist {dist} exceeds noise allowance {allowance}"
        );
        if i_r.abs() >= 0.15 {
            strong += 1;
            assert!(
                (row.auc - perfect_auc).abs() < 0.05,
                "reference {r}: AUC {} far from semi-perfect {perfect_auc}",
                row.auc
            );
        }
    }
    assert!(strong >= 5, "only {strong} strongly imbalanced candidates");
}
