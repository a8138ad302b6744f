//! Executable two-round secret-key establishment protocol: integer parameter
//! derivation, seeded codebook construction, the encode/decode/key-derivation
//! pipeline, the eavesdropper's reconstruction decoder, and Monte-Carlo plus
//! exact-enumeration security estimation.

use crate::bounds::{rate_terms, AuxScheme};
use crate::channel::TwoDmbc;
use crate::error::{Result, SkeError};
use crate::infotheory::{Distribution, JointDistribution};
use crate::typicality::{
    is_bipartite_jointly_typical, is_jointly_typical, is_typical, wilson_interval,
    TypicalityParams, Z_99,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

/// Cap on the total number of stored codeword symbols across all codebooks.
pub const MEMORY_BUDGET_SYMBOLS: usize = 1 << 24;

/// Integer code sizes and slack parameters for one protocol instance.
///
/// All `eta_*` values are code-size exponents in bits. Index maps are fixed
/// (contiguous-block) functions of these exponents: the pool partition takes
/// the high bits of `f`, the `t`/`b` splits peel high bits for the
/// second-level index, and the key map takes the high `kappa` bits of the
/// combined `(f, b)` index, so every key cell has exactly `2^gamma` members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodingParameters {
    pub n_f: usize,
    pub n_b: usize,
    pub n_b1: usize,
    pub n_b2: usize,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub eta_f: usize,
    pub eta_t: usize,
    pub eta_t1: usize,
    pub eta_t2: usize,
    pub eta_b: usize,
    pub eta_b1: usize,
    pub eta_b2: usize,
    pub eta_1: usize,
    pub eta_2: usize,
    pub eta: usize,
    pub kappa: usize,
    pub gamma: usize,
}

impl CodingParameters {
    pub fn validate(&self) -> Result<()> {
        let checks: &[(bool, &str)] = &[
            (self.n_b == self.n_b1 + self.n_b2, "n_b = n_b1 + n_b2"),
            (self.eta == self.eta_f + self.eta_b, "eta = eta_f + eta_b"),
            (self.eta_t == self.eta_t1 + self.eta_t2, "eta_t split"),
            (self.eta_b == self.eta_b1 + self.eta_b2, "eta_b split"),
            (self.eta_1 == self.eta_t1 + self.eta_b1, "eta_1 split"),
            (self.eta_2 == self.eta_t2 + self.eta_b2, "eta_2 split"),
            (self.eta == self.kappa + self.gamma, "gamma = eta - kappa"),
            (self.eta_f >= self.eta_t, "eta_f >= eta_t"),
            (self.kappa >= 1, "kappa >= 1"),
            (self.epsilon > 0.0, "epsilon > 0"),
        ];
        for &(ok, what) in checks {
            if !ok {
                return Err(SkeError::Precondition(format!(
                    "coding parameter invariant violated: {what}"
                )));
            }
        }
        let slack = 3.0 * (self.n_f + self.n_b) as f64 * self.epsilon;
        if slack >= self.n_f as f64 * self.alpha || slack >= self.n_b as f64 * self.beta {
            return Err(SkeError::Precondition(
                "slack constraint 3*N*epsilon < n_b*beta = n_f*alpha violated".into(),
            ));
        }
        Ok(())
    }

    /// Indices built from these exponents must fit comfortably in a
    /// `usize`; anything larger is far past the memory budget anyway.
    pub fn check_addressable(&self) -> Result<()> {
        if self.eta >= 48 {
            return Err(SkeError::Precondition(format!(
                "total exponent eta = {} too large to enumerate",
                self.eta
            )));
        }
        Ok(())
    }

    pub fn pool_size(&self) -> usize {
        1 << self.eta_f
    }

    /// Partition index `t` of a pool position (high bits of `f`).
    pub fn t_of_f(&self, f: usize) -> usize {
        f >> (self.eta_f - self.eta_t)
    }

    /// `(t2, t1)`: high/low bit split of `t`.
    pub fn split_t(&self, t: usize) -> (usize, usize) {
        (t >> self.eta_t1, t & ((1 << self.eta_t1) - 1))
    }

    /// `(b2, b1)`: high/low bit split of `b`.
    pub fn split_b(&self, b: usize) -> (usize, usize) {
        (b >> self.eta_b1, b & ((1 << self.eta_b1) - 1))
    }

    pub fn m2_of(&self, t2: usize, b2: usize) -> usize {
        (t2 << self.eta_b2) | b2
    }

    pub fn m1_of(&self, t1: usize, b1: usize) -> usize {
        (t1 << self.eta_b1) | b1
    }

    /// The key map `g`: high `kappa` bits of the combined `(f, b)` index.
    pub fn key_of(&self, f: usize, b: usize) -> usize {
        ((f << self.eta_b) | b) >> self.gamma
    }

    /// The bipartite window used for the eavesdropper's decoder:
    /// an `n_f`-symbol first part and an `n_b`-symbol second part.
    pub fn typ(&self) -> TypicalityParams {
        TypicalityParams {
            epsilon: self.epsilon,
            n: self.n_f,
            d: self.n_b,
        }
    }
}

/// Integer protocol parameters from the real-valued size equations.
///
/// Rounding: `n_b2` up (preserving the backward-capacity inequality), the
/// `eta` exponents down (conservative for rate and exact for partition
/// cardinalities), and `gamma` up from `eta - kappa_real` so that
/// `gamma >= 0` and `kappa = eta - gamma` hold exactly. When the real-valued
/// key size exceeds `eta` (common at small blocklengths with a weak
/// eavesdropper) `gamma` clamps to 0 and the whole index is key.
pub fn derive_parameters(
    two: &TwoDmbc,
    scheme: &AuxScheme,
    input_f: &Distribution,
    n_f: usize,
    alpha: f64,
    beta: f64,
    epsilon: f64,
) -> Result<CodingParameters> {
    if n_f == 0 || alpha <= 0.0 || beta <= 0.0 || epsilon <= 0.0 {
        return Err(SkeError::Domain("need n_f >= 1 and positive slacks".into()));
    }
    scheme.validate(&two.forward, &two.backward)?;
    let fj = scheme.forward_joint(&two.forward, input_f)?;
    let bj = scheme.backward_joint(&two.backward)?;
    // axes: x_f=0 y_f=1 z_f=2 v=3 / w2=0 w1=1 x_b=2 y_b=3 z_b=4
    let i_v_yf = crate::infotheory::mutual_information(&fj, &[3], &[1])?;
    let i_v_yf_given_xf = crate::infotheory::conditional_mutual_information(&fj, &[3], &[1], &[0])?;
    let i_w1_yb = crate::infotheory::mutual_information(&bj, &[1], &[3])?;
    let i_w2_yb = crate::infotheory::mutual_information(&bj, &[0], &[3])?;
    let terms = rate_terms(two, scheme, input_f)?;

    if i_w1_yb <= 1e-9 {
        return Err(SkeError::Infeasible(
            "backward channel carries no information about W1".into(),
        ));
    }
    let n_b2 = (n_f as f64 * (i_v_yf_given_xf + 3.0 * alpha) / i_w1_yb).ceil() as usize;
    let n_b = (n_f as f64 * alpha / beta).round().max(1.0) as usize;
    if n_b < n_b2 {
        return Err(SkeError::Infeasible(format!(
            "n_b = {n_b} from the slack balance is below n_b2 = {n_b2}"
        )));
    }
    let n_b1 = n_b - n_b2;

    let floor0 = |x: f64| x.max(0.0).floor() as usize;
    let eta_f = floor0(n_f as f64 * (i_v_yf + alpha));
    let eta_t = floor0(n_b2 as f64 * (i_w1_yb - beta));
    let eta_t2 = floor0(n_b2 as f64 * i_w2_yb);
    if eta_t2 > eta_t {
        return Err(SkeError::Infeasible("eta_t2 exceeds eta_t".into()));
    }
    let eta_b = floor0(n_b1 as f64 * (i_w1_yb - beta));
    let eta_b2 = floor0(n_b1 as f64 * i_w2_yb);
    if eta_b2 > eta_b {
        return Err(SkeError::Infeasible("eta_b2 exceeds eta_b".into()));
    }
    if eta_t > eta_f {
        return Err(SkeError::Infeasible(
            "partition count exceeds pool size (eta_t > eta_f)".into(),
        ));
    }
    let eta = eta_f + eta_b;
    let kappa_real = n_f as f64 * terms.r_s1 + n_b as f64 * terms.r_s2.max(0.0);
    let gamma = ((eta as f64 - kappa_real).ceil().max(0.0) as usize).min(eta);
    let kappa = eta - gamma;
    if kappa < 1 {
        return Err(SkeError::Infeasible(
            "kappa < 1 after rounding: protocol degenerate at this blocklength".into(),
        ));
    }
    let params = CodingParameters {
        n_f,
        n_b,
        n_b1,
        n_b2,
        alpha,
        beta,
        epsilon,
        eta_f,
        eta_t,
        eta_t1: eta_t - eta_t2,
        eta_t2,
        eta_b,
        eta_b1: eta_b - eta_b2,
        eta_b2,
        eta_1: (eta_t - eta_t2) + (eta_b - eta_b2),
        eta_2: eta_t2 + eta_b2,
        eta,
        kappa,
        gamma,
    };
    params.validate()?;
    Ok(params)
}

/// Immutable seeded codebooks plus the induced per-symbol joints used by
/// every decoder. Shared read-only across parallel trials.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSet {
    pub params: CodingParameters,
    pub scheme: AuxScheme,
    pub input_f: Distribution,
    /// `2^{eta_f}` distinct typical cover sequences; position is `f`.
    pub v_pool: Vec<Vec<usize>>,
    /// `2^{eta_2}` cloud-center codewords of length `n_b`.
    pub c2: Vec<Vec<usize>>,
    /// `c1[m2][m1]`: satellite codewords around each cloud center.
    pub c1: Vec<Vec<Vec<usize>>>,
    pub p_v: Distribution,
    pub joint_v_yf: JointDistribution,
    pub joint_v_xf: JointDistribution,
    pub joint_v_zf: JointDistribution,
    pub joint_w1_yb: JointDistribution,
    pub joint_w1_zb: JointDistribution,
    pub seed: u64,
}

impl CodebookSet {
    /// The satellite codeword selected by `(t, b)`.
    pub fn enc(&self, t: usize, b: usize) -> &[usize] {
        let (t2, t1) = self.params.split_t(t);
        let (b2, b1) = self.params.split_b(b);
        &self.c1[self.params.m2_of(t2, b2)][self.params.m1_of(t1, b1)]
    }
}

/// Build the cover pool and superposition codebooks, deterministically from
/// the seed.
pub fn build_codebooks(
    two: &TwoDmbc,
    params: &CodingParameters,
    scheme: &AuxScheme,
    input_f: &Distribution,
    seed: u64,
) -> Result<CodebookSet> {
    params.validate()?;
    params.check_addressable()?;
    scheme.validate(&two.forward, &two.backward)?;
    let pool_size = params.pool_size();
    let c2_size = 1usize << params.eta_2;
    let c1_size = 1usize << params.eta_1;
    let symbols = pool_size * params.n_f + c2_size * params.n_b + c2_size * c1_size * params.n_b;
    if symbols > MEMORY_BUDGET_SYMBOLS {
        return Err(SkeError::Precondition(format!(
            "codebooks need {symbols} stored symbols, budget is {MEMORY_BUDGET_SYMBOLS}"
        )));
    }

    let fj = scheme.forward_joint(&two.forward, input_f)?;
    let bj = scheme.backward_joint(&two.backward)?;
    let p_v = fj.marginal_dist(3)?;

    // (i)-(ii): rejection-sample distinct typical cover sequences
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(pool_size);
    let mut v_pool: Vec<Vec<usize>> = Vec::with_capacity(pool_size);
    let budget = 1000 * pool_size + 10_000;
    let mut attempts = 0usize;
    while v_pool.len() < pool_size {
        if attempts >= budget {
            return Err(SkeError::Codebook(format!(
                "found only {} of {pool_size} distinct typical cover sequences in {budget} draws",
                v_pool.len()
            )));
        }
        attempts += 1;
        let cand: Vec<usize> = (0..params.n_f).map(|_| p_v.sample(&mut rng)).collect();
        if is_typical(&cand, &p_v, params.epsilon)? && !seen.contains(&cand) {
            seen.insert(cand.clone());
            v_pool.push(cand);
        }
    }

    // (vii)-(viii): superposition codebooks
    let mut c2 = Vec::with_capacity(c2_size);
    let mut c1 = Vec::with_capacity(c2_size);
    for _ in 0..c2_size {
        let w2: Vec<usize> = (0..params.n_b)
            .map(|_| scheme.dist_w2.sample(&mut rng))
            .collect();
        let mut sub = Vec::with_capacity(c1_size);
        for _ in 0..c1_size {
            let w1: Vec<usize> = w2
                .iter()
                .map(|&w2_sym| scheme.kernel_w1_given_w2.row(w2_sym).sample(&mut rng))
                .collect();
            sub.push(w1);
        }
        c2.push(w2);
        c1.push(sub);
    }

    Ok(CodebookSet {
        params: *params,
        scheme: scheme.clone(),
        input_f: input_f.clone(),
        v_pool,
        c2,
        c1,
        p_v,
        joint_v_yf: fj.marginal(&[3, 1])?,
        joint_v_xf: fj.marginal(&[3, 0])?,
        joint_v_zf: fj.marginal(&[3, 2])?,
        joint_w1_yb: bj.marginal(&[1, 3])?,
        joint_w1_zb: bj.marginal(&[1, 4])?,
        seed,
    })
}

/// Failure flags of one protocol run. Any set flag means the corresponding
/// value is NULL and the run counts as a key disagreement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NullFlags {
    /// Bob found no cover sequence jointly typical with his received block.
    pub bob_v_search: bool,
    /// Alice found zero or several typical satellite codewords.
    pub alice_w1: bool,
    /// Alice found zero or several typical cover sequences in the decoded
    /// partition cell.
    pub alice_v: bool,
}

impl NullFlags {
    pub fn any(&self) -> bool {
        self.bob_v_search || self.alice_w1 || self.alice_v
    }
}

/// Full record of one protocol execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub x_f: Vec<usize>,
    pub y_f: Vec<usize>,
    pub z_f: Vec<usize>,
    pub v: Option<Vec<usize>>,
    pub f: Option<usize>,
    pub t: Option<usize>,
    pub b: usize,
    pub t1: Option<usize>,
    pub t2: Option<usize>,
    pub b1: usize,
    pub b2: usize,
    pub w1: Vec<usize>,
    pub x_b: Vec<usize>,
    pub y_b: Vec<usize>,
    pub z_b: Vec<usize>,
    pub t_hat: Option<usize>,
    pub b_hat: Option<usize>,
    pub v_hat: Option<Vec<usize>>,
    pub f_hat: Option<usize>,
    pub s: Option<usize>,
    pub s_hat: Option<usize>,
    pub nulls: NullFlags,
    /// The partition cell index actually fed to the encoder: `t` on
    /// success, 0 when Bob's search failed (he still transmits).
    pub t_enc: usize,
}

/// Execute one full protocol round. All failure modes end up as null flags;
/// the run is deterministic given the seed.
pub fn run_protocol(
    two: &TwoDmbc,
    books: &CodebookSet,
    params: &CodingParameters,
    seed: u64,
) -> Result<Transcript> {
    params.validate()?;
    params.check_addressable()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nulls = NullFlags::default();

    // encoding: Alice's forward block
    let x_f: Vec<usize> = (0..params.n_f).map(|_| books.input_f.sample(&mut rng)).collect();
    let (y_f, z_f) = two.forward.transmit_with(&x_f, &mut rng)?;

    // Bob's cover search in random scan order: first typical hit
    let mut order: Vec<usize> = (0..books.v_pool.len()).collect();
    order.shuffle(&mut rng);
    let mut found: Option<usize> = None;
    for &i in &order {
        if is_jointly_typical(&books.v_pool[i], &y_f, &books.joint_v_yf, params.epsilon)? {
            found = Some(i);
            break;
        }
    }
    let (v, f, t) = match found {
        Some(i) => (
            Some(books.v_pool[i].clone()),
            Some(i),
            Some(params.t_of_f(i)),
        ),
        None => {
            nulls.bob_v_search = true;
            (None, None, None)
        }
    };
    let t_enc = t.unwrap_or(0);
    let b = rng.gen_range(0..1usize << params.eta_b);
    let (b2, b1) = params.split_b(b);

    // backward transmission through the satellite codeword and input DMC,
    // with a dedicated substream for the input synthesis
    let w1 = books.enc(t_enc, b).to_vec();
    let mut rng_w = ChaCha8Rng::seed_from_u64(seed ^ 0x444d_435f); // input-DMC substream
    let x_b: Vec<usize> = w1
        .iter()
        .map(|&w| books.scheme.kernel_x_given_w1.row(w).sample(&mut rng_w))
        .collect();
    let (y_b, z_b) = two.backward.transmit_with(&x_b, &mut rng)?;

    // decoding level 1: unique satellite codeword typical with y_b
    let mut hit: Option<(usize, usize)> = None;
    let mut unique = true;
    'scan: for (m2, sub) in books.c1.iter().enumerate() {
        for (m1, cand) in sub.iter().enumerate() {
            if is_jointly_typical(cand, &y_b, &books.joint_w1_yb, params.epsilon)? {
                if hit.is_some() {
                    unique = false;
                    break 'scan;
                }
                hit = Some((m2, m1));
            }
        }
    }
    let (t_hat, b_hat) = match hit {
        Some((m2, m1)) if unique => {
            let t2h = m2 >> params.eta_b2;
            let b2h = m2 & ((1 << params.eta_b2) - 1);
            let t1h = m1 >> params.eta_b1;
            let b1h = m1 & ((1 << params.eta_b1) - 1);
            (
                Some((t2h << params.eta_t1) | t1h),
                Some((b2h << params.eta_b1) | b1h),
            )
        }
        _ => {
            nulls.alice_w1 = true;
            (None, None)
        }
    };

    // decoding level 2: unique cover sequence in the decoded cell typical
    // with Alice's own x_f
    let (v_hat, f_hat) = if let Some(th) = t_hat {
        let cell = 1usize << (params.eta_f - params.eta_t);
        let start = th * cell;
        let mut hit_f: Option<usize> = None;
        let mut uniq = true;
        for fi in start..start + cell {
            if is_jointly_typical(&books.v_pool[fi], &x_f, &books.joint_v_xf, params.epsilon)? {
                if hit_f.is_some() {
                    uniq = false;
                    break;
                }
                hit_f = Some(fi);
            }
        }
        match hit_f {
            Some(fi) if uniq => (Some(books.v_pool[fi].clone()), Some(fi)),
            _ => {
                nulls.alice_v = true;
                (None, None)
            }
        }
    } else {
        (None, None)
    };

    let s = f.map(|fi| params.key_of(fi, b));
    let s_hat = match (f_hat, b_hat) {
        (Some(fh), Some(bh)) => Some(params.key_of(fh, bh)),
        _ => None,
    };

    Ok(Transcript {
        x_f,
        y_f,
        z_f,
        v,
        f,
        t,
        b,
        t1: t.map(|tt| params.split_t(tt).1),
        t2: t.map(|tt| params.split_t(tt).0),
        b1,
        b2,
        w1,
        x_b,
        y_b,
        z_b,
        t_hat,
        b_hat,
        v_hat,
        f_hat,
        s,
        s_hat,
        nulls,
        t_enc: if nulls.bob_v_search { 0 } else { t_enc },
    })
}

fn eve_candidate_typical(
    books: &CodebookSet,
    params: &CodingParameters,
    f: usize,
    b: usize,
    z_f: &[usize],
    z_b: &[usize],
) -> Result<bool> {
    let v = &books.v_pool[f];
    let w1 = books.enc(params.t_of_f(f), b);
    let mut x = v.clone();
    x.extend_from_slice(w1);
    let mut z = z_f.to_vec();
    z.extend_from_slice(z_b);
    is_bipartite_jointly_typical(
        &x,
        &z,
        &books.joint_v_zf,
        &books.joint_w1_zb,
        &params.typ(),
    )
}

fn eve_consistent(params: &CodingParameters, f: usize, b: usize, t2: usize, b2: usize) -> bool {
    params.split_t(params.t_of_f(f)).0 == t2 && params.split_b(b).0 == b2
}

/// The eavesdropper's genie-aided reconstruction decoder: given the key
/// value and the second-level indices, search the key cell for a unique
/// candidate `(f, b)` whose cover/satellite pair is bipartite jointly
/// typical with the observed `(z_f, z_b)`. Success here is *good* for
/// secrecy: it certifies that the sacrificial randomness, not the key,
/// is what the eavesdropper's view pins down.
pub fn eve_reconstruct(
    books: &CodebookSet,
    params: &CodingParameters,
    s: usize,
    t2: usize,
    b2: usize,
    z_f: &[usize],
    z_b: &[usize],
) -> Result<Option<(usize, usize)>> {
    if s >= 1 << params.kappa || t2 >= 1 << params.eta_t2 || b2 >= 1 << params.eta_b2 {
        return Err(SkeError::Domain("index out of range".into()));
    }
    let mut found: Option<(usize, usize)> = None;
    for combined in (s << params.gamma)..((s + 1) << params.gamma) {
        let f = combined >> params.eta_b;
        let b = combined & ((1 << params.eta_b) - 1);
        if !eve_consistent(params, f, b, t2, b2) {
            continue;
        }
        if eve_candidate_typical(books, params, f, b, z_f, z_b)? {
            if found.is_some() {
                return Ok(None);
            }
            found = Some((f, b));
        }
    }
    Ok(found)
}

/// The eavesdropper's practical key attack (no key genie): scan all
/// `(f, b)` consistent with the second-level indices, keep the typical
/// ones, and output the key value if every surviving candidate agrees on
/// it.
pub fn eve_guess_key(
    books: &CodebookSet,
    params: &CodingParameters,
    t2: usize,
    b2: usize,
    z_f: &[usize],
    z_b: &[usize],
) -> Result<Option<usize>> {
    let mut guess: Option<usize> = None;
    for f in 0..books.v_pool.len() {
        for b in 0..1usize << params.eta_b {
            if !eve_consistent(params, f, b, t2, b2) {
                continue;
            }
            if eve_candidate_typical(books, params, f, b, z_f, z_b)? {
                let s = params.key_of(f, b);
                match guess {
                    Some(g) if g != s => return Ok(None),
                    _ => guess = Some(s),
                }
            }
        }
    }
    Ok(guess)
}

/// Codebook lifetime across Monte-Carlo trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodebookPolicy {
    /// Independent codebooks per trial (random-coding ensemble average).
    Fresh,
    /// One codebook, seeded from the master seed, shared by all trials.
    Fixed,
}

/// Monte-Carlo estimate of the uniformity / reliability / secrecy triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityEstimate {
    pub trials: usize,
    /// Plug-in entropy of the empirical key distribution (successful runs),
    /// per total channel use. At most `kappa / (n_f + n_b)`.
    pub key_entropy_rate: f64,
    /// `Pr(S_hat != S)`, counting every NULL as a disagreement.
    pub error_rate: f64,
    pub error_wilson: (f64, f64),
    /// Plug-in `I(S; attack output) / H(S)` for the key attack in
    /// [`eve_guess_key`] — a lower bound on leakage through one concrete
    /// attack, not the exact conditional-entropy quantity.
    pub leakage_ratio: f64,
    /// Fraction of runs where Bob's side produced no key.
    pub null_rate: f64,
    /// Empirical key histogram over successful runs, sorted by key value.
    pub key_counts: Vec<(usize, usize)>,
}

fn trial_seed(master: u64, i: u64) -> u64 {
    master ^ (i + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn plug_in_entropy(counts: &BTreeMap<usize, usize>, total: usize) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum()
}

/// Independent seeded protocol trials with Bob-side, Alice-side, and
/// eavesdropper-side accounting. Deterministic given the seed regardless of
/// thread count.
pub fn estimate_security(
    two: &TwoDmbc,
    scheme: &AuxScheme,
    input_f: &Distribution,
    params: &CodingParameters,
    trials: usize,
    seed: u64,
    policy: CodebookPolicy,
) -> Result<SecurityEstimate> {
    if trials < 100 {
        return Err(SkeError::Precondition(format!(
            "need at least 100 trials for a meaningful estimate, got {trials}"
        )));
    }
    let fixed_books = match policy {
        CodebookPolicy::Fixed => Some(build_codebooks(two, params, scheme, input_f, seed)?),
        CodebookPolicy::Fresh => None,
    };

    let outcomes: Vec<(Option<usize>, Option<usize>, Option<usize>)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let ts = trial_seed(seed, i);
            let fresh;
            let books = match &fixed_books {
                Some(b) => b,
                None => {
                    fresh = build_codebooks(two, params, scheme, input_f, ts ^ 0xb00c)?;
                    &fresh
                }
            };
            let tr = run_protocol(two, books, params, ts)?;
            let (t2e, _) = params.split_t(tr.t_enc);
            let eve = eve_guess_key(books, params, t2e, tr.b2, &tr.z_f, &tr.z_b)?;
            Ok((tr.s, tr.s_hat, eve))
        })
        .collect::<Result<_>>()?;

    let mut key_counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut pair_counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut s_sym_counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut e_sym_counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut errors = 0usize;
    let mut nulls = 0usize;
    // NULL maps to symbol 0, key k to k + 1
    let sym = |o: Option<usize>| o.map_or(0, |k| k + 1);
    for &(s, s_hat, eve) in &outcomes {
        if s.is_none() {
            nulls += 1;
        } else {
            *key_counts.entry(s.unwrap()).or_default() += 1;
        }
        if s.is_none() || s != s_hat {
            errors += 1;
        }
        *pair_counts.entry((sym(s), sym(eve))).or_default() += 1;
        *s_sym_counts.entry(sym(s)).or_default() += 1;
        *e_sym_counts.entry(sym(eve)).or_default() += 1;
    }

    let successes: usize = key_counts.values().sum();
    let h_s = if successes > 0 {
        plug_in_entropy(&key_counts, successes)
    } else {
        0.0
    };
    // plug-in I(S;E) over all trials, NULL included as a symbol
    let n = trials as f64;
    let mut mi = 0.0;
    for (&(a, b), &c) in &pair_counts {
        let p = c as f64 / n;
        let pa = s_sym_counts[&a] as f64 / n;
        let pb = e_sym_counts[&b] as f64 / n;
        mi += p * (p / (pa * pb)).log2();
    }
    let h_s_all = plug_in_entropy(&s_sym_counts, trials);
    let leakage_ratio = if h_s_all > 0.0 { (mi / h_s_all).clamp(0.0, 1.0) } else { 0.0 };

    let mut counts_sorted: Vec<(usize, usize)> = key_counts.into_iter().collect();
    counts_sorted.sort_unstable();
    Ok(SecurityEstimate {
        trials,
        key_entropy_rate: h_s / (params.n_f + params.n_b) as f64,
        error_rate: errors as f64 / n,
        error_wilson: wilson_interval(errors, trials, Z_99),
        leakage_ratio,
        null_rate: nulls as f64 / n,
        key_counts: counts_sorted,
    })
}

/// Exact secrecy accounting for a micro instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactSecurity {
    /// Exact `H(S)` (the NULL outcome, if reachable, is its own symbol).
    pub h_s: f64,
    /// Exact `H(S | Z_f, Z_b)`.
    pub h_s_given_z: f64,
    /// Exact `H(F, B | S, T2, B2, Z_f, Z_b)`.
    pub h_fb_given_rest: f64,
    /// The analytical slack `19 N epsilon`.
    pub slack_bits: f64,
    /// `H(S) - H(S|Z)`, the exact information leak.
    pub leak_bits: f64,
    /// Whether `leak <= H(F,B|S,T2,B2,Z) + 19 N epsilon` holds.
    pub bound_satisfied: bool,
}

fn entropy_of_slice(p: &[f64]) -> f64 {
    p.iter().map(|&x| if x > 0.0 { -x * x.log2() } else { 0.0 }).sum()
}

/// Tensor-product distribution over length-`n` sequences from per-symbol
/// probability rows.
fn seq_dist(rows: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![1.0];
    for row in rows {
        let mut next = Vec::with_capacity(out.len() * row.len());
        for &p in &out {
            for &q in *row {
                next.push(p * q);
            }
        }
        out = next;
    }
    out
}

/// Exhaustive enumeration of the eavesdropper's view for instances whose
/// view space fits in memory, averaging over Alice's input, the channels,
/// Bob's (uniformly random among hits) cover choice, and `B`. The codebook
/// is fixed (the one in `books`).
pub fn exact_security(two: &TwoDmbc, books: &CodebookSet) -> Result<ExactSecurity> {
    let params = &books.params;
    params.validate()?;
    params.check_addressable()?;
    let (zf_a, zb_a) = (two.forward.z_size(), two.backward.z_size());
    let (yf_a,) = (two.forward.y_size(),);
    let zf_space = zf_a.checked_pow(params.n_f as u32);
    let zb_space = zb_a.checked_pow(params.n_b as u32);
    let yf_space = yf_a.checked_pow(params.n_f as u32);
    let (zf_space, zb_space, yf_space) = match (zf_space, zb_space, yf_space) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(SkeError::Precondition("view space overflows".into())),
    };
    let z_space = zf_space
        .checked_mul(zb_space)
        .filter(|&z| z <= 1 << 20)
        .ok_or_else(|| SkeError::Precondition("eavesdropper view space exceeds 2^20".into()))?;
    if yf_space > 1 << 16 {
        return Err(SkeError::Precondition("legitimate forward space exceeds 2^16".into()));
    }
    let b_space = 1usize << params.eta_b;
    let fb_rows = (books.v_pool.len() + 1) * b_space; // extra row block: NULL cover
    let s_rows = (1usize << params.kappa) + 1; // extra symbol: NULL key
    let stb_rows = s_rows << params.eta_2;
    if fb_rows.max(stb_rows) * z_space > 1 << 23 {
        return Err(SkeError::Precondition("exact enumeration tables exceed budget".into()));
    }

    // per-symbol laws reused across the enumeration
    // forward: q_f[y][z] summed over Alice's input
    let mut q_f = vec![vec![0.0; zf_a]; yf_a];
    for x in 0..two.forward.x_size() {
        for (y, row) in q_f.iter_mut().enumerate() {
            for (z, cell) in row.iter_mut().enumerate() {
                *cell += books.input_f.get(x) * two.forward.prob(x, y, z);
            }
        }
    }
    // backward: q_b[w1][z] through the input-synthesis DMC
    let w1_a = books.scheme.card_w1();
    let mut q_b = vec![vec![0.0; zb_a]; w1_a];
    for (w, row) in q_b.iter_mut().enumerate() {
        for x in 0..two.backward.x_size() {
            let px = books.scheme.kernel_x_given_w1.prob(x, w);
            for (z, cell) in row.iter_mut().enumerate() {
                for y in 0..two.backward.y_size() {
                    *cell += px * two.backward.prob(x, y, z);
                }
            }
        }
    }

    let mut t_s = vec![vec![0.0f64; z_space]; s_rows];
    let mut t_stb = vec![vec![0.0f64; z_space]; stb_rows];
    let mut t_fb = vec![vec![0.0f64; z_space]; fb_rows];
    let null_f = books.v_pool.len();
    let null_s = 1usize << params.kappa;
    let b_weight = 1.0 / b_space as f64;

    let mut y_seq = vec![0usize; params.n_f];
    for _ in 0..yf_space {
        // joint law of this y-block with every possible z_f-block
        let rows: Vec<&[f64]> = y_seq.iter().map(|&y| q_f[y].as_slice()).collect();
        let p_y_zf = seq_dist(&rows);
        let p_y: f64 = p_y_zf.iter().sum();
        if p_y > 0.0 {
            let hits: Vec<usize> = (0..books.v_pool.len())
                .filter(|&i| {
                    is_jointly_typical(&books.v_pool[i], &y_seq, &books.joint_v_yf, params.epsilon)
                        .expect("pool sequences in range")
                })
                .collect();
            let (v_options, v_weight): (Vec<Option<usize>>, f64) = if hits.is_empty() {
                (vec![None], 1.0)
            } else {
                let w = 1.0 / hits.len() as f64;
                (hits.iter().map(|&h| Some(h)).collect(), w)
            };
            for v_opt in &v_options {
                let (f_row, t_enc, s_val) = match v_opt {
                    Some(fi) => (*fi, params.t_of_f(*fi), None),
                    None => (null_f, 0, Some(null_s)),
                };
                let (t2e, _) = params.split_t(t_enc);
                for b in 0..b_space {
                    let (b2, _) = params.split_b(b);
                    let s = s_val.unwrap_or_else(|| params.key_of(f_row.min(null_f - 1), b));
                    let s = if f_row == null_f { null_s } else { s };
                    let w1 = books.enc(t_enc, b);
                    let rows_b: Vec<&[f64]> = w1.iter().map(|&w| q_b[w].as_slice()).collect();
                    let p_zb = seq_dist(&rows_b);
                    let weight = v_weight * b_weight;
                    let fb_row = &mut t_fb[f_row * b_space + b];
                    let stb_row_idx = (s << params.eta_2) | params.m2_of(t2e, b2);
                    for (zf, &pyz) in p_y_zf.iter().enumerate() {
                        if pyz == 0.0 {
                            continue;
                        }
                        let base = zf * zb_space;
                        let scale = weight * pyz;
                        for (zb, &pz) in p_zb.iter().enumerate() {
                            let add = scale * pz;
                            fb_row[base + zb] += add;
                            t_s[s][base + zb] += add;
                            t_stb[stb_row_idx][base + zb] += add;
                        }
                    }
                }
            }
        }
        // next y-block (row-major increment)
        for pos in (0..params.n_f).rev() {
            y_seq[pos] += 1;
            if y_seq[pos] < yf_a {
                break;
            }
            y_seq[pos] = 0;
        }
    }

    let flat = |t: &[Vec<f64>]| -> f64 { t.iter().map(|r| entropy_of_slice(r)).sum() };
    let h_sz = flat(&t_s);
    let h_stbz = flat(&t_stb);
    let h_fbz = flat(&t_fb);
    let mut p_z = vec![0.0f64; z_space];
    for row in &t_s {
        for (acc, &p) in p_z.iter_mut().zip(row) {
            *acc += p;
        }
    }
    let h_z = entropy_of_slice(&p_z);
    let p_s: Vec<f64> = t_s.iter().map(|r| r.iter().sum()).collect();
    let h_s = entropy_of_slice(&p_s);

    let h_s_given_z = h_sz - h_z;
    let h_fb_given_rest = h_fbz - h_stbz;
    let slack_bits = 19.0 * (params.n_f + params.n_b) as f64 * params.epsilon;
    let leak_bits = h_s - h_s_given_z;
    Ok(ExactSecurity {
        h_s,
        h_s_given_z,
        h_fb_given_rest,
        slack_bits,
        leak_bits,
        bound_satisfied: leak_bits <= h_fb_given_rest + slack_bits + 1e-9,
    })
}
