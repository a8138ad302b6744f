//! Weak (entropy) typicality for single sequences, pairs, and bipartite
//! sequences built from two sub-blocks with different source laws, plus a
//! Monte-Carlo check of the joint asymptotic-equipartition bounds.
//!
//! All probabilities are accumulated in the log domain; a zero-probability
//! symbol yields `-inf` and a `false` verdict, never an error.

use crate::error::{Result, SkeError};
use crate::infotheory::{mutual_information, Distribution, JointDistribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Window and sub-block lengths for bipartite typicality: an `n`-symbol
/// first part and a `d`-symbol second part, `N = n + d` total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypicalityParams {
    pub epsilon: f64,
    pub n: usize,
    pub d: usize,
}

impl TypicalityParams {
    pub fn new(epsilon: f64, n: usize, d: usize) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(SkeError::Domain(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self { epsilon, n, d })
    }

    pub fn total(&self) -> usize {
        self.n + self.d
    }
}

/// `log2 P(seq)` under an i.i.d. law; `-inf` on a zero-probability symbol.
fn log2_prob_iid(seq: &[usize], p: &Distribution) -> Result<f64> {
    let mut acc = 0.0;
    for &s in seq {
        if s >= p.len() {
            return Err(SkeError::SymbolOutOfRange {
                symbol: s,
                alphabet: p.len(),
            });
        }
        let q = p.get(s);
        if q == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        acc += q.log2();
    }
    Ok(acc)
}

/// `log2 P(a, b)` under an i.i.d. two-axis joint law.
fn log2_prob_pair(a: &[usize], b: &[usize], joint: &JointDistribution) -> Result<f64> {
    if joint.shape().len() != 2 {
        return Err(SkeError::AxisUsage(format!(
            "pair typicality needs a two-axis joint, got {} axes",
            joint.shape().len()
        )));
    }
    if a.len() != b.len() {
        return Err(SkeError::SizeMismatch(format!(
            "sequence lengths {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        if x >= joint.shape()[0] || y >= joint.shape()[1] {
            return Err(SkeError::SymbolOutOfRange {
                symbol: x.max(y),
                alphabet: joint.shape()[0].max(joint.shape()[1]),
            });
        }
        let q = joint.get(&[x, y]);
        if q == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        acc += q.log2();
    }
    Ok(acc)
}

fn window(log2_p: f64, target_bits: f64, total: usize, epsilon: f64) -> bool {
    if total == 0 {
        return true; // vacuous window
    }
    if log2_p == f64::NEG_INFINITY {
        return false;
    }
    (-log2_p / total as f64 - target_bits / total as f64).abs() < epsilon
}

/// `|−(1/n)·log2 P(seq) − H(p)| < ε`.
pub fn is_typical(seq: &[usize], p: &Distribution, epsilon: f64) -> Result<bool> {
    let lp = log2_prob_iid(seq, p)?;
    let h = crate::infotheory::entropy(p);
    Ok(window(lp, seq.len() as f64 * h, seq.len(), epsilon))
}

/// Pair typicality: both sequences marginally typical and
/// `|−(1/n)·log2 P(a,b) − H(joint)| < ε`.
pub fn is_jointly_typical(
    a: &[usize],
    b: &[usize],
    joint: &JointDistribution,
    epsilon: f64,
) -> Result<bool> {
    let lp = log2_prob_pair(a, b, joint)?;
    let pa = joint.marginal_dist(0)?;
    let pb = joint.marginal_dist(1)?;
    Ok(is_typical(a, &pa, epsilon)?
        && is_typical(b, &pb, epsilon)?
        && window(lp, a.len() as f64 * joint.entropy(), a.len(), epsilon))
}

/// Bipartite typicality of the concatenation `x = (u_n ∥ t_d)`:
/// `|−(1/N)·log2 P(x) − (n·H(U) + d·H(T))/N| < ε`.
pub fn is_bipartite_typical(
    x: &[usize],
    p_u: &Distribution,
    p_t: &Distribution,
    params: &TypicalityParams,
) -> Result<bool> {
    if x.len() != params.total() {
        return Err(SkeError::SizeMismatch(format!(
            "sequence length {} vs n+d = {}",
            x.len(),
            params.total()
        )));
    }
    let lp_u = log2_prob_iid(&x[..params.n], p_u)?;
    let lp_t = log2_prob_iid(&x[params.n..], p_t)?;
    let target = params.n as f64 * crate::infotheory::entropy(p_u)
        + params.d as f64 * crate::infotheory::entropy(p_t);
    Ok(window(lp_u + lp_t, target, params.total(), params.epsilon))
}

/// Bipartite joint typicality of a pair of concatenations: each side
/// bipartite-typical under its marginals, and the mixed-rate joint window
/// `|−(1/N)·log2 P(x,y) − (n·H(U,U') + d·H(T,T'))/N| < ε`.
pub fn is_bipartite_jointly_typical(
    x: &[usize],
    y: &[usize],
    joint_u: &JointDistribution,
    joint_t: &JointDistribution,
    params: &TypicalityParams,
) -> Result<bool> {
    if x.len() != params.total() || y.len() != params.total() {
        return Err(SkeError::SizeMismatch(format!(
            "sequence lengths {}/{} vs n+d = {}",
            x.len(),
            y.len(),
            params.total()
        )));
    }
    let (n, eps) = (params.n, params.epsilon);
    let lp = log2_prob_pair(&x[..n], &y[..n], joint_u)?
        + log2_prob_pair(&x[n..], &y[n..], joint_t)?;
    let marg_x = is_bipartite_typical(
        x,
        &joint_u.marginal_dist(0)?,
        &joint_t.marginal_dist(0)?,
        params,
    )?;
    let marg_y = is_bipartite_typical(
        y,
        &joint_u.marginal_dist(1)?,
        &joint_t.marginal_dist(1)?,
        params,
    )?;
    let target = n as f64 * joint_u.entropy() + params.d as f64 * joint_t.entropy();
    Ok(marg_x && marg_y && window(lp, target, params.total(), eps))
}

/// Two-sided Wilson score interval.
pub fn wilson_interval(hits: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// z-score of the two-sided 99% confidence level.
pub const Z_99: f64 = 2.5758293035489004;

/// Monte-Carlo verdict on the joint-AEP acceptance rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AepReport {
    pub trials: usize,
    /// Acceptance rate of pairs drawn jointly from `(jointU, jointT)`.
    pub paired_rate: f64,
    pub paired_wilson: (f64, f64),
    /// Acceptance rate of pairs whose two sides are drawn independently
    /// from the respective marginals.
    pub independent_rate: f64,
    pub independent_wilson: (f64, f64),
    /// `log2` of the analytical envelope on the independent-pair rate:
    /// `-(n·I(U;U') + d·I(T;T')) ± 3Nε`, with the `(1-ε)` factor on the
    /// lower end.
    pub log2_lower_bound: f64,
    pub log2_upper_bound: f64,
    /// Whether the independent-rate Wilson interval (99%) is consistent
    /// with the envelope.
    pub envelope_satisfied: bool,
}

fn sample_pair<R: rand::Rng>(flat: &Distribution, cols: usize, rng: &mut R) -> (usize, usize) {
    let idx = flat.sample(rng);
    (idx / cols, idx % cols)
}

/// Estimate the paired and independent acceptance rates of bipartite joint
/// typicality and compare the independent rate against the analytical
/// envelope. Deterministic for a given seed regardless of thread count:
/// trials are split into fixed chunks, chunk `i` seeded with `seed + i`.
pub fn verify_joint_aep(
    joint_u: &JointDistribution,
    joint_t: &JointDistribution,
    params: &TypicalityParams,
    trials: usize,
    seed: u64,
) -> Result<AepReport> {
    if trials == 0 {
        return Err(SkeError::Precondition("trials must be >= 1".into()));
    }
    if joint_u.shape().len() != 2 || joint_t.shape().len() != 2 {
        return Err(SkeError::AxisUsage("joints must have two axes".into()));
    }
    let flat_u = Distribution::new(joint_u.probs().to_vec())?;
    let flat_t = Distribution::new(joint_t.probs().to_vec())?;
    let (u_cols, t_cols) = (joint_u.shape()[1], joint_t.shape()[1]);
    let mu0 = joint_u.marginal_dist(0)?;
    let mu1 = joint_u.marginal_dist(1)?;
    let mt0 = joint_t.marginal_dist(0)?;
    let mt1 = joint_t.marginal_dist(1)?;

    const CHUNK: usize = 256;
    let chunks = trials.div_ceil(CHUNK);
    let (paired_hits, indep_hits) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
            let count = CHUNK.min(trials - c * CHUNK);
            let mut paired = 0usize;
            let mut indep = 0usize;
            let mut x = vec![0usize; params.total()];
            let mut y = vec![0usize; params.total()];
            for _ in 0..count {
                for i in 0..params.n {
                    let (a, b) = sample_pair(&flat_u, u_cols, &mut rng);
                    x[i] = a;
                    y[i] = b;
                }
                for i in 0..params.d {
                    let (a, b) = sample_pair(&flat_t, t_cols, &mut rng);
                    x[params.n + i] = a;
                    y[params.n + i] = b;
                }
                if is_bipartite_jointly_typical(&x, &y, joint_u, joint_t, params)
                    .expect("lengths fixed by construction")
                {
                    paired += 1;
                }
                for i in 0..params.n {
                    x[i] = mu0.sample(&mut rng);
                    y[i] = mu1.sample(&mut rng);
                }
                for i in 0..params.d {
                    x[params.n + i] = mt0.sample(&mut rng);
                    y[params.n + i] = mt1.sample(&mut rng);
                }
                if is_bipartite_jointly_typical(&x, &y, joint_u, joint_t, params)
                    .expect("lengths fixed by construction")
                {
                    indep += 1;
                }
            }
            (paired, indep)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let i_u = mutual_information(joint_u, &[0], &[1])?;
    let i_t = mutual_information(joint_t, &[0], &[1])?;
    let info = params.n as f64 * i_u + params.d as f64 * i_t;
    let slack = 3.0 * params.total() as f64 * params.epsilon;
    let log2_upper = -info + slack;
    let log2_lower = (1.0 - params.epsilon).log2() - info - slack;

    let paired_wilson = wilson_interval(paired_hits, trials, Z_99);
    let independent_wilson = wilson_interval(indep_hits, trials, Z_99);
    // log-domain consistency: the confidence interval must reach into the
    // envelope from both sides (an interval endpoint of 0 maps to -inf)
    let log2_or_neg_inf = |p: f64| if p > 0.0 { p.log2() } else { f64::NEG_INFINITY };
    let envelope_satisfied = log2_or_neg_inf(independent_wilson.1) >= log2_lower
        && log2_or_neg_inf(independent_wilson.0) <= log2_upper;

    Ok(AepReport {
        trials,
        paired_rate: paired_hits as f64 / trials as f64,
        paired_wilson,
        independent_rate: indep_hits as f64 / trials as f64,
        independent_wilson,
        log2_lower_bound: log2_lower,
        log2_upper_bound: log2_upper,
        envelope_satisfied,
    })
}
