//! Distance between an RDE and the semi-perfect RDE, and the bounds on it.
//!
//! The distance is the expected absolute gap between the two normalized
//! decision scores. It is bounded three ways:
//!
//! * a tight per-feature bound weighting |D(j,r|y)| and |D(j,r|y-bar)| by
//!   imbalance-dependent coefficients,
//! * a looser bound that needs no per-feature I(j),
//! * a bound from unlabeled statistics alone plus a correction term M,
//!   valid when D(j,r|y) and D(j,r|y-bar) agree in sign for every j.
//!
//! The M term here differs from its usual printed form in two ways, both
//! required for the bound to actually dominate the distance (verified by
//! brute-force enumeration over random joint distributions): the overall
//! sign is flipped, and features with D(j,r|y) = 0 are partitioned by the
//! sign of D(j,r|y-bar) instead of landing on the nonnegative side.

use rand::Rng;

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::rde::{RdeModel, Reference};
use crate::stats::{ClassPrior, DependenceCoefficients, FeatureProbs, ImbalanceVector};

/// Expected absolute difference between the normalized scores of `rde` and
/// the pos-polarity semi-perfect model, uniform over the dataset examples.
pub fn distance(
    rde: &RdeModel,
    perfect: &RdeModel,
    data: &Dataset,
    prior: &ClassPrior,
) -> Result<f64> {
    let r = rde.reference().feature_id().unwrap_or(u32::MAX);
    let i_r = rde
        .ref_imbalance()
        .ok_or_else(|| Error::UndefinedImbalance(format!("I(r) unknown for reference {r}")))?;
    if i_r == 0.0 {
        return Err(Error::ZeroImbalance { feature: r });
    }
    if perfect.reference() != Reference::GoldPos {
        return Err(Error::InvalidConfig(
            "distance requires a pos-polarity semi-perfect model".into(),
        ));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let alpha = prior.alpha();
    let rde_norm = rde.ref_prob() * i_r;
    let perfect_norm = (1.0 + alpha) / alpha;
    let mut sum = 0.0;
    for x in data.examples() {
        sum += (rde.score(x) / rde_norm - perfect_norm * perfect.score(x)).abs();
    }
    Ok(sum / data.len() as f64)
}

/// An exact joint distribution over (j, r, class), cell (a, b, c) holding
/// P(j=a, r=b, y=c) with c=1 the positive class.
#[derive(Debug, Clone, Copy)]
pub struct Joint222 {
    cells: [f64; 8],
}

impl Joint222 {
    pub fn new(cells: [f64; 8]) -> Result<Joint222> {
        if cells.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::DegenerateJoint("cell outside [0,1]".into()));
        }
        let total: f64 = cells.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::DegenerateJoint(format!("cells sum to {total}")));
        }
        Ok(Joint222 { cells })
    }

    pub fn p(&self, j: usize, r: usize, y: usize) -> f64 {
        self.cells[(j << 2) | (r << 1) | y]
    }

    /// Random joint with all cells positive.
    pub fn sample<R: Rng>(rng: &mut R) -> Joint222 {
        let mut cells = [0.0; 8];
        let mut total = 0.0;
        for c in &mut cells {
            // exponential draws normalize to a uniform point on the simplex
            *c = -f64::ln(1.0 - rng.random::<f64>());
            total += *c;
        }
        for c in &mut cells {
            *c /= total;
        }
        Joint222 { cells }
    }

    /// Random joint with some structural zero cells, exercising the
    /// zero-probability branches. Keeps P(j), P(r) and both class
    /// marginals positive.
    pub fn sample_with_zeros<R: Rng>(rng: &mut R) -> Joint222 {
        loop {
            let mut j = Joint222::sample(rng);
            for cell in 0..8 {
                if rng.random::<f64>() < 0.35 {
                    j.cells[cell] = 0.0;
                }
            }
            let total: f64 = j.cells.iter().sum();
            if total <= 0.0 {
                continue;
            }
            for c in &mut j.cells {
                *c /= total;
            }
            let p_j: f64 = (0..2).flat_map(|r| (0..2).map(move |y| (r, y))).map(|(r, y)| j.p(1, r, y)).sum();
            let p_r: f64 = (0..2).flat_map(|a| (0..2).map(move |y| (a, y))).map(|(a, y)| j.p(a, 1, y)).sum();
            let p_y: f64 = (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| j.p(a, b, 1)).sum();
            if p_j > 0.0 && p_r > 0.0 && p_y > 0.0 && p_y < 1.0 {
                return j;
            }
        }
    }

    fn marginals(&self) -> JointStats {
        let mut s = JointStats::default();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let p = self.p(a, b, c);
                    if c == 1 {
                        s.p_y += p;
                    }
                    if a == 1 {
                        s.p_j += p;
                        if c == 1 {
                            s.p_j_y += p;
                        } else {
                            s.p_j_yn += p;
                        }
                    }
                    if b == 1 {
                        s.p_r += p;
                        if c == 1 {
                            s.p_r_y += p;
                        } else {
                            s.p_r_yn += p;
                        }
                    }
                    if a == 1 && b == 1 {
                        s.p_jr += p;
                        if c == 1 {
                            s.p_jr_y += p;
                        }
                    }
                }
            }
        }
        s
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct JointStats {
    p_y: f64,
    p_j: f64,
    p_r: f64,
    p_jr: f64,
    p_j_y: f64,
    p_j_yn: f64,
    p_r_y: f64,
    p_r_yn: f64,
    p_jr_y: f64,
}

/// Both sides of the weight-difference identity
/// P(j,r)/(P(j)P(r)) - 1 - I(r)I(j)/alpha =
///   (alpha+I(j))(alpha+I(r))/(alpha(1+alpha)) D(j,r|y)
/// + (1-I(j))(1-I(r))/(1+alpha) D(j,r|y-bar),
/// each computed directly from the joint. Callers assert they agree.
pub fn lemma1_sides(joint: &Joint222) -> Result<(f64, f64)> {
    let s = joint.marginals();
    let p_yn = 1.0 - s.p_y;
    if s.p_y <= 0.0 || p_yn <= 0.0 {
        return Err(Error::DegenerateJoint("a class has zero probability".into()));
    }
    if s.p_j <= 0.0 || s.p_r <= 0.0 {
        return Err(Error::DegenerateJoint("P(j) or P(r) is zero".into()));
    }
    let alpha = s.p_y / p_yn;
    let i_j = (s.p_j_y - alpha * s.p_j_yn) / s.p_j;
    let i_r = (s.p_r_y - alpha * s.p_r_yn) / s.p_r;
    let d = |p_jr_l: f64, p_j_l: f64, p_r_l: f64| {
        if p_j_l == 0.0 || p_r_l == 0.0 {
            0.0
        } else {
            p_jr_l / (p_j_l * p_r_l) - 1.0
        }
    };
    let p_jr_yn = s.p_jr - s.p_jr_y;
    let d_y = d(s.p_jr_y / s.p_y, s.p_j_y / s.p_y, s.p_r_y / s.p_y);
    let d_yn = d(p_jr_yn / p_yn, s.p_j_yn / p_yn, s.p_r_yn / p_yn);

    let lhs = s.p_jr / (s.p_j * s.p_r) - 1.0 - i_r * i_j / alpha;
    let rhs = (alpha + i_j) * (alpha + i_r) / (alpha * (1.0 + alpha)) * d_y
        + (1.0 - i_j) * (1.0 - i_r) / (1.0 + alpha) * d_yn;
    Ok((lhs, rhs))
}

/// The two distance bounds from labeled statistics.
#[derive(Debug, Clone, Copy)]
pub struct Theorem2Bound {
    /// Per-feature bound using I(j) and both D coefficients.
    pub tight: f64,
    /// I(j)-free bound; never smaller than `tight`.
    pub loose: f64,
    /// Features dropped from the tight sum because I(j) was undefined.
    pub undefined_skipped: usize,
}

fn require_i_r(imb: &ImbalanceVector, r: u32) -> Result<f64> {
    let i_r = imb
        .get(r)
        .ok_or_else(|| Error::UndefinedImbalance(format!("I({r}) undefined (zero count)")))?;
    if i_r == 0.0 {
        return Err(Error::ZeroImbalance { feature: r });
    }
    Ok(i_r)
}

pub fn bound_theorem2(
    probs: &impl FeatureProbs,
    imb: &ImbalanceVector,
    dep: &DependenceCoefficients,
    r: u32,
) -> Result<Theorem2Bound> {
    let i_r = require_i_r(imb, r)?;
    let alpha = imb.alpha();
    let mut tight = 0.0;
    let mut loose = 0.0;
    let mut undefined_skipped = 0;
    for j in 0..probs.n_features() as u32 {
        let p_j = probs.p_feature(j);
        if p_j == 0.0 {
            continue;
        }
        let d_y = dep.d_pos[j as usize].abs();
        let d_yn = dep.d_neg[j as usize].abs();
        loose += p_j * f64::max((alpha + i_r) / alpha * d_y, (1.0 - i_r) * d_yn);
        match imb.get(j) {
            Some(i_j) => {
                tight += p_j
                    * ((alpha + i_j) * (alpha + i_r) / (alpha * (1.0 + alpha)) * d_y
                        + (1.0 - i_j) * (1.0 - i_r) / (1.0 + alpha) * d_yn);
            }
            None => undefined_skipped += 1,
        }
    }
    Ok(Theorem2Bound {
        tight: tight / i_r.abs(),
        loose: loose / i_r.abs(),
        undefined_skipped,
    })
}

/// The unlabeled-statistics bound: first term plus the correction M.
#[derive(Debug, Clone, Copy)]
pub struct Theorem3Bound {
    /// (1/|I(r)|) sum_j P(j) |P(j,r)/(P(j)P(r)) - 1|, all probabilities
    /// from unlabeled counts.
    pub first_term: f64,
    /// Imbalance-weighted correction term M.
    pub m: f64,
    /// Whether D(j,r|y) D(j,r|y-bar) >= 0 held for every contributing j;
    /// `first_term + m` bounds the distance only when true.
    pub condition_holds: bool,
    /// (-1/alpha, +1/alpha) * sum_j P(j)|I(j)| envelope containing M.
    pub m_range: (f64, f64),
}

/// Shared with the reference-selection criterion: sum_j P(j) |deviation|.
fn cooccurrence_deviation_sum(probs: &impl FeatureProbs, r: u32) -> Result<f64> {
    let p_r = probs.p_feature(r);
    if p_r <= 0.0 {
        return Err(Error::EmptyReference { feature: r });
    }
    let mut sum = 0.0;
    for j in 0..probs.n_features() as u32 {
        let p_j = probs.p_feature(j);
        if p_j > 0.0 {
            sum += p_j * (probs.p_pair(j, r)? / (p_j * p_r) - 1.0).abs();
        }
    }
    Ok(sum)
}

pub fn bound_theorem3(
    unlabeled: &impl FeatureProbs,
    imb: &ImbalanceVector,
    dep: &DependenceCoefficients,
    r: u32,
) -> Result<Theorem3Bound> {
    let i_r = require_i_r(imb, r)?;
    let alpha = imb.alpha();
    let first_term = cooccurrence_deviation_sum(unlabeled, r)? / i_r.abs();

    let mut sum_plus = 0.0;
    let mut sum_minus = 0.0;
    let mut envelope = 0.0;
    let mut condition_holds = true;
    for j in 0..unlabeled.n_features() as u32 {
        let p_j = unlabeled.p_feature(j);
        if p_j == 0.0 {
            continue;
        }
        let d_y = dep.d_pos[j as usize];
        let d_yn = dep.d_neg[j as usize];
        if d_y * d_yn < 0.0 {
            condition_holds = false;
        }
        if let Some(i_j) = imb.get(j) {
            let plus = d_y > 0.0 || (d_y == 0.0 && d_yn >= 0.0);
            if plus {
                sum_plus += p_j * i_j;
            } else {
                sum_minus += p_j * i_j;
            }
            envelope += p_j * i_j.abs();
        }
    }
    let m = i_r.signum() / alpha * (sum_minus - sum_plus);
    let envelope = envelope / alpha;
    Ok(Theorem3Bound {
        first_term,
        m,
        condition_holds,
        m_range: (-envelope, envelope),
    })
}

/// Selection criterion for candidate reference features (lower is better):
/// the Theorem-3 first term. References with undefined or zero I(r) rank
/// last via an infinity sentinel so selection stays total.
pub fn ranking_score(unlabeled: &impl FeatureProbs, i_r: Option<f64>, r: u32) -> f64 {
    match i_r {
        Some(i_r) if i_r != 0.0 => match cooccurrence_deviation_sum(unlabeled, r) {
            Ok(sum) => sum / i_r.abs(),
            Err(_) => f64::INFINITY,
        },
        _ => f64::INFINITY,
    }
}

/// Everything the bounds pipeline knows about one (RDE, semi-perfect) pair.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub reference: u32,
    pub i_r: f64,
    pub dist: f64,
    pub bound_tight: f64,
    pub bound_loose: f64,
    pub t3_first: f64,
    pub m_term: f64,
    pub m_range: (f64, f64),
    pub sign_condition_holds: bool,
}

impl BoundReport {
    pub const CSV_HEADER: &'static str =
        "ref_token,i_r,dist,bound_tight,bound_loose,t3_first,m,sign_ok";

    pub fn csv_row(&self, token: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            crate::artifact::csv_field(token),
            self.i_r,
            self.dist,
            self.bound_tight,
            self.bound_loose,
            self.t3_first,
            self.m_term,
            self.sign_condition_holds
        )
    }
}

/// Assemble the full report for one reference feature. `dist_prior` sets
/// the alpha normalizing the distance; pass the prior the semi-perfect
/// model was trained with.
#[allow(clippy::too_many_arguments)]
pub fn bound_report(
    rde: &RdeModel,
    perfect: &RdeModel,
    data: &Dataset,
    dist_prior: &ClassPrior,
    unlabeled: &impl FeatureProbs,
    imb: &ImbalanceVector,
    dep: &DependenceCoefficients,
    r: u32,
) -> Result<BoundReport> {
    let i_r = require_i_r(imb, r)?;
    let mut rde = rde.clone();
    rde.set_ref_imbalance(Some(i_r));
    let dist = distance(&rde, perfect, data, dist_prior)?;
    let t2 = bound_theorem2(unlabeled, imb, dep, r)?;
    let t3 = bound_theorem3(unlabeled, imb, dep, r)?;
    Ok(BoundReport {
        reference: r,
        i_r,
        dist,
        bound_tight: t2.tight,
        bound_loose: t2.loose,
        t3_first: t3.first_term,
        m_term: t3.m,
        m_range: t3.m_range,
        sign_condition_holds: t3.condition_holds,
    })
}
