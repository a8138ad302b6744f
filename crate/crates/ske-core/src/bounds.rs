//! Numerical evaluation of the secret-key capacity bounds: one-way secrecy
//! capacity, the two-round lower bound with auxiliary variables and a
//! channel-use ratio, the conditional-information upper bound, and the
//! degraded-channel capacity.

use crate::channel::{analyze_degraded, Dmbc, SplitSpec, TwoDmbc};
use crate::error::{Result, SkeError};
use crate::infotheory::{
    conditional_mutual_information, mutual_information, Distribution, JointDistribution, Kernel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Slack used to enforce the strict channel-use constraint.
pub const CONSTRAINT_SLACK: f64 = 1e-12;

/// Auxiliary random-variable channels for one protocol direction.
///
/// `V` covers the initiator-side received sequence through the test channel
/// `P(v|y)`; `(W2, W1)` form the superposition pair for the responding
/// channel through the chain `W2 ↔ W1 ↔ X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxScheme {
    /// Test channel `P(v|y_fwd)`.
    pub kernel_v: Kernel,
    /// Cloud-center law `P(w2)`.
    pub dist_w2: Distribution,
    /// Satellite law `P(w1|w2)`.
    pub kernel_w1_given_w2: Kernel,
    /// Input synthesis `P(x_bwd|w1)`.
    pub kernel_x_given_w1: Kernel,
}

impl AuxScheme {
    pub fn card_v(&self) -> usize {
        self.kernel_v.output_size()
    }

    pub fn card_w1(&self) -> usize {
        self.kernel_w1_given_w2.output_size()
    }

    pub fn card_w2(&self) -> usize {
        self.dist_w2.len()
    }

    pub fn validate(&self, fwd: &Dmbc, bwd: &Dmbc) -> Result<()> {
        if self.kernel_v.input_size() != fwd.y_size() {
            return Err(SkeError::SizeMismatch(format!(
                "kernel_v expects {} inputs, forward channel outputs {}",
                self.kernel_v.input_size(),
                fwd.y_size()
            )));
        }
        if self.kernel_w1_given_w2.input_size() != self.card_w2() {
            return Err(SkeError::SizeMismatch("w1|w2 kernel vs w2 law".into()));
        }
        if self.kernel_x_given_w1.input_size() != self.card_w1() {
            return Err(SkeError::SizeMismatch("x|w1 kernel vs w1 alphabet".into()));
        }
        if self.kernel_x_given_w1.output_size() != bwd.x_size() {
            return Err(SkeError::SizeMismatch(format!(
                "x|w1 kernel outputs {}, backward channel expects {}",
                self.kernel_x_given_w1.output_size(),
                bwd.x_size()
            )));
        }
        Ok(())
    }

    /// `V = Y_fwd`, `W2` constant, `W1 = X_bwd` with input law `p_x`.
    pub fn identity(fwd: &Dmbc, bwd: &Dmbc, p_x: Distribution) -> Result<Self> {
        if p_x.len() != bwd.x_size() {
            return Err(SkeError::SizeMismatch("p_x vs backward input".into()));
        }
        Ok(Self {
            kernel_v: Kernel::identity(fwd.y_size()),
            dist_w2: Distribution::delta(1, 0),
            kernel_w1_given_w2: Kernel::new(vec![p_x])?,
            kernel_x_given_w1: Kernel::identity(bwd.x_size()),
        })
    }

    /// Constant (uninformative) `V`, `W2` constant, `W1 = X_bwd` with input
    /// law `p_x`. The one-round key-transport corner of the search space.
    pub fn constant_v(fwd: &Dmbc, bwd: &Dmbc, p_x: Distribution) -> Result<Self> {
        if p_x.len() != bwd.x_size() {
            return Err(SkeError::SizeMismatch("p_x vs backward input".into()));
        }
        Ok(Self {
            kernel_v: Kernel::constant(fwd.y_size(), Distribution::delta(1, 0)),
            dist_w2: Distribution::delta(1, 0),
            kernel_w1_given_w2: Kernel::new(vec![p_x])?,
            kernel_x_given_w1: Kernel::identity(bwd.x_size()),
        })
    }

    /// The forward-side joint `(X_f, Y_f, Z_f, V)`, axes in that order.
    pub fn forward_joint(&self, fwd: &Dmbc, input_f: &Distribution) -> Result<JointDistribution> {
        if input_f.len() != fwd.x_size() {
            return Err(SkeError::SizeMismatch("input_f vs forward channel".into()));
        }
        JointDistribution::from_fn(
            &[fwd.x_size(), fwd.y_size(), fwd.z_size(), self.card_v()],
            &["x_f", "y_f", "z_f", "v"],
            |i| input_f.get(i[0]) * fwd.prob(i[0], i[1], i[2]) * self.kernel_v.prob(i[3], i[1]),
        )
    }

    /// The backward-side joint `(W2, W1, X_b, Y_b, Z_b)`, axes in that order.
    pub fn backward_joint(&self, bwd: &Dmbc) -> Result<JointDistribution> {
        JointDistribution::from_fn(
            &[
                self.card_w2(),
                self.card_w1(),
                bwd.x_size(),
                bwd.y_size(),
                bwd.z_size(),
            ],
            &["w2", "w1", "x_b", "y_b", "z_b"],
            |i| {
                self.dist_w2.get(i[0])
                    * self.kernel_w1_given_w2.prob(i[1], i[0])
                    * self.kernel_x_given_w1.prob(i[2], i[1])
                    * bwd.prob(i[2], i[3], i[4])
            },
        )
    }
}

/// The per-channel-use information quantities of one direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateTerms {
    /// `I(V;X_f) - I(V;Z_f)` bits per forward use.
    pub r_s1: f64,
    /// `I(W1;Y_b|W2) - I(W1;Z_b|W2)` bits per backward use; may be negative
    /// before the positive-part clamp.
    pub r_s2: f64,
    /// `I(V;Y_f|X_f)` bits per forward use (left side of the use-ratio
    /// constraint).
    pub constraint_lhs: f64,
    /// `I(W1;Y_b)` bits per backward use (right side of the constraint).
    pub constraint_rhs: f64,
}

/// Compute the four rate quantities exactly on the induced joints.
///
/// When `drop_s1_leakage` is set the subtracted term of `r_s1` is taken
/// against the opposite channel's eavesdropper output, which is independent
/// of `V`, so the term is zero.
pub fn rate_terms_with(
    two: &TwoDmbc,
    scheme: &AuxScheme,
    input_f: &Distribution,
    drop_s1_leakage: bool,
) -> Result<RateTerms> {
    scheme.validate(&two.forward, &two.backward)?;
    let fj = scheme.forward_joint(&two.forward, input_f)?;
    let bj = scheme.backward_joint(&two.backward)?;
    // axes: x_f=0 y_f=1 z_f=2 v=3 / w2=0 w1=1 x_b=2 y_b=3 z_b=4
    let i_v_x = mutual_information(&fj, &[3], &[0])?;
    let i_v_z = if drop_s1_leakage {
        0.0
    } else {
        mutual_information(&fj, &[3], &[2])?
    };
    let r_s2 = conditional_mutual_information(&bj, &[1], &[3], &[0])?
        - conditional_mutual_information(&bj, &[1], &[4], &[0])?;
    Ok(RateTerms {
        r_s1: i_v_x - i_v_z,
        r_s2,
        constraint_lhs: conditional_mutual_information(&fj, &[3], &[1], &[0])?,
        constraint_rhs: mutual_information(&bj, &[1], &[3])?,
    })
}

pub fn rate_terms(two: &TwoDmbc, scheme: &AuxScheme, input_f: &Distribution) -> Result<RateTerms> {
    rate_terms_with(two, scheme, input_f, false)
}

/// Optimization metadata carried on every reported bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimMeta {
    pub grid: f64,
    pub restarts: usize,
}

/// Best point found for one direction of a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionResult {
    pub name: String,
    pub value: f64,
    pub input: Option<Distribution>,
    pub scheme: Option<AuxScheme>,
    pub ratio: Option<(u32, u32)>,
    pub feasible: bool,
}

/// Result of a bound computation: the value, the argmax detail per
/// direction, and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub value: f64,
    pub per_direction: Vec<DirectionResult>,
    pub metadata: OptimMeta,
}

// ---------------------------------------------------------------------------
// simplex optimization helpers

/// Maximize `f` over the probability simplex of dimension `k`.
///
/// Binary alphabets get an exhaustive grid plus two local refinement rounds;
/// larger alphabets use multi-start stochastic local search seeded from the
/// uniform point.
pub fn maximize_simplex<F>(k: usize, grid: f64, restarts: usize, seed: u64, f: F) -> (Distribution, f64)
where
    F: Fn(&Distribution) -> f64,
{
    if k == 1 {
        let d = Distribution::delta(1, 0);
        let v = f(&d);
        return (d, v);
    }
    if k == 2 {
        let eval = |p: f64| f(&Distribution::new(vec![p, 1.0 - p]).expect("simplex point"));
        let mut best_p = 0.0;
        let mut best_v = f64::NEG_INFINITY;
        let steps = (1.0 / grid).round() as usize;
        for i in 0..=steps {
            let p = (i as f64 * grid).min(1.0);
            let v = eval(p);
            if v > best_v {
                best_v = v;
                best_p = p;
            }
        }
        // local refinement around the best grid point
        let mut step = grid;
        for _ in 0..3 {
            step /= 10.0;
            for i in -10..=10 {
                let p = (best_p + i as f64 * step).clamp(0.0, 1.0);
                let v = eval(p);
                if v > best_v {
                    best_v = v;
                    best_p = p;
                }
            }
        }
        return (
            Distribution::new(vec![best_p, 1.0 - best_p]).expect("simplex point"),
            best_v,
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = Distribution::uniform(k);
    let mut best_v = f(&best);
    for _ in 0..restarts.max(1) {
        let mut cur = if rng.gen_bool(0.5) {
            Distribution::uniform(k)
        } else {
            Distribution::random(k, &mut rng)
        };
        let mut cur_v = f(&cur);
        for &t in &[0.5, 0.2, 0.05, 0.01] {
            for _ in 0..40 {
                let probe = Distribution::random(k, &mut rng);
                let mixed: Vec<f64> = cur
                    .probs()
                    .iter()
                    .zip(probe.probs())
                    .map(|(a, b)| (1.0 - t) * a + t * b)
                    .collect();
                let cand = Distribution::new(mixed).expect("mixture stays on simplex");
                let v = f(&cand);
                if v > cur_v {
                    cur_v = v;
                    cur = cand;
                }
            }
        }
        if cur_v > best_v {
            best_v = cur_v;
            best = cur;
        }
    }
    (best, best_v)
}

/// A bundle of simplex blocks refined by stochastic coordinate ascent.
fn coordinate_ascent<R: Rng, F>(blocks: &mut Vec<Vec<f64>>, rng: &mut R, passes: usize, f: F) -> f64
where
    F: Fn(&[Vec<f64>]) -> f64,
{
    let mut cur_v = f(blocks);
    for _ in 0..passes {
        for b in 0..blocks.len() {
            let k = blocks[b].len();
            if k < 2 {
                continue;
            }
            for &t in &[0.5, 0.2, 0.05] {
                for _ in 0..12 {
                    let probe = Distribution::random(k, rng);
                    let saved = blocks[b].clone();
                    for (cell, p) in blocks[b].iter_mut().zip(probe.probs()) {
                        *cell = (1.0 - t) * *cell + t * p;
                    }
                    let v = f(blocks);
                    if v > cur_v {
                        cur_v = v;
                    } else {
                        blocks[b] = saved;
                    }
                }
            }
        }
    }
    cur_v
}

// ---------------------------------------------------------------------------
// one-way secrecy capacity

/// `max_{P_X} [I(X;Y) - I(X;Z)]`, clamped at zero.
pub fn secrecy_capacity_simple(ch: &Dmbc, grid: f64) -> Result<BoundResult> {
    let objective = |p: &Distribution| -> f64 {
        let j = ch.joint(p).expect("sizes match");
        mutual_information(&j, &[0], &[1]).expect("valid axes")
            - mutual_information(&j, &[0], &[2]).expect("valid axes")
    };
    let (input, raw) = maximize_simplex(ch.x_size(), grid, 20, 0x5ec1, objective);
    let value = raw.max(0.0);
    Ok(BoundResult {
        value,
        per_direction: vec![DirectionResult {
            name: "simple".into(),
            value,
            input: Some(input),
            scheme: None,
            ratio: None,
            feasible: true,
        }],
        metadata: OptimMeta { grid, restarts: 20 },
    })
}

/// `max_{P_{W,X}} [I(W;Y) - I(W;Z)]` with `W ↔ X ↔ (Y,Z)`.
pub fn secrecy_capacity_aux(ch: &Dmbc, card_w: usize, grid: f64, restarts: usize) -> Result<BoundResult> {
    if card_w == 0 {
        return Err(SkeError::Domain("card_w must be >= 1".into()));
    }
    let xs = ch.x_size();
    let objective = |blocks: &[Vec<f64>]| -> f64 {
        // blocks[0] = P_W, blocks[1..] = rows of P(x|w)
        let joint = JointDistribution::from_fn(
            &[card_w, xs, ch.y_size(), ch.z_size()],
            &["w", "x", "y", "z"],
            |i| blocks[0][i[0]] * blocks[1 + i[0]][i[1]] * ch.prob(i[1], i[2], i[3]),
        )
        .expect("stochastic blocks");
        mutual_information(&joint, &[0], &[2]).expect("valid axes")
            - mutual_information(&joint, &[0], &[3]).expect("valid axes")
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0xa0c5);
    // seed from the simple bound: W = X (embedded) reproduces it
    let simple = secrecy_capacity_simple(ch, grid)?;
    let simple_input = simple.per_direction[0]
        .input
        .clone()
        .expect("simple result carries its argmax");
    let mut best_blocks: Vec<Vec<f64>> = Vec::new();
    let mut best_v = f64::NEG_INFINITY;
    for restart in 0..restarts.max(1) {
        let mut blocks: Vec<Vec<f64>> = if restart == 0 && card_w >= xs {
            let mut b = vec![{
                let mut w = vec![0.0; card_w];
                w[..xs].copy_from_slice(simple_input.probs());
                w
            }];
            for w in 0..card_w {
                let mut row = vec![0.0; xs];
                row[w.min(xs - 1)] = 1.0;
                b.push(row);
            }
            b
        } else {
            let mut b = vec![Distribution::random(card_w, &mut rng).probs().to_vec()];
            for _ in 0..card_w {
                b.push(Distribution::random(xs, &mut rng).probs().to_vec());
            }
            b
        };
        let v = coordinate_ascent(&mut blocks, &mut rng, 3, objective);
        if v > best_v {
            best_v = v;
            best_blocks = blocks;
        }
    }
    let value = best_v.max(0.0);
    Ok(BoundResult {
        value,
        per_direction: vec![DirectionResult {
            name: "aux".into(),
            value,
            input: Some(Distribution::new(best_blocks[0].clone())?),
            scheme: None,
            ratio: None,
            feasible: true,
        }],
        metadata: OptimMeta { grid, restarts },
    })
}

// ---------------------------------------------------------------------------
// upper bound

fn maximize_conditional_mi(ch: &Dmbc, grid: f64) -> (Distribution, f64) {
    maximize_simplex(ch.x_size(), grid, 20, 0x0bd, |p| {
        let j = ch.joint(p).expect("sizes match");
        conditional_mutual_information(&j, &[0], &[1], &[2]).expect("valid axes")
    })
}

/// `max { max_{P_{X_f}} I(X_f;Y_f|Z_f), max_{P_{X_b}} I(X_b;Y_b|Z_b) }`.
pub fn upper_bound(two: &TwoDmbc, grid: f64) -> Result<BoundResult> {
    let (in_f, v_f) = maximize_conditional_mi(&two.forward, grid);
    let (in_b, v_b) = maximize_conditional_mi(&two.backward, grid);
    Ok(BoundResult {
        value: v_f.max(v_b).max(0.0),
        per_direction: vec![
            DirectionResult {
                name: "forward".into(),
                value: v_f,
                input: Some(in_f),
                scheme: None,
                ratio: None,
                feasible: true,
            },
            DirectionResult {
                name: "backward".into(),
                value: v_b,
                input: Some(in_b),
                scheme: None,
                ratio: None,
                feasible: true,
            },
        ],
        metadata: OptimMeta { grid, restarts: 20 },
    })
}

// ---------------------------------------------------------------------------
// lower bound

/// Caps on the auxiliary alphabet sizes. `None` fields default to
/// `|V| = |Y|+1`, `|W1| = |X|+1`, `|W2| = |X|`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardCaps {
    pub v: Option<usize>,
    pub w1: Option<usize>,
    pub w2: Option<usize>,
}

/// The searched ratio grid: `n_f : n_b` from 1:9 through 9:1 plus the
/// near-boundary extremes 1:99 and 99:1.
pub fn default_ratio_grid() -> Vec<(u32, u32)> {
    let mut v = vec![(1, 99)];
    for b in (1..=9).rev() {
        v.push((1, b));
    }
    for a in 2..=9 {
        v.push((a, 1));
    }
    v.push((99, 1));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundOptions {
    pub caps: CardCaps,
    pub grid: f64,
    pub restarts: usize,
    pub ratio_grid: Vec<(u32, u32)>,
    pub seed: u64,
    /// Evaluate the initiator-B first-stage rate exactly as printed (leakage
    /// term against the opposite channel, which is independent of `V` and so
    /// contributes zero) instead of the symmetric mirror of direction A.
    pub eq_4c_as_printed: bool,
}

impl Default for LowerBoundOptions {
    fn default() -> Self {
        Self {
            caps: CardCaps::default(),
            grid: 0.01,
            restarts: 20,
            ratio_grid: default_ratio_grid(),
            seed: 0x10e1,
            eq_4c_as_printed: false,
        }
    }
}

/// Mutual information of a flat row-major joint table that sums to one.
fn mi_flat(table: &[f64], rows: usize, cols: usize) -> f64 {
    let mut pr = vec![0.0; rows];
    let mut pc = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            let p = table[r * cols + c];
            pr[r] += p;
            pc[c] += p;
        }
    }
    let mut mi = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let p = table[r * cols + c];
            if p > 0.0 {
                mi += p * (p / (pr[r] * pc[c])).log2();
            }
        }
    }
    mi
}

struct DirectionSearch<'a> {
    two: &'a TwoDmbc,
    card_v: usize,
    card_w1: usize,
    card_w2: usize,
    drop_s1_leakage: bool,
    /// `P(y|x)` of the forward channel, flat `[x][y]`.
    fwd_y: Vec<f64>,
    /// `P(y|x)` and `P(z|x)` of the backward channel, flat.
    bwd_y: Vec<f64>,
    bwd_z: Vec<f64>,
}

impl<'a> DirectionSearch<'a> {
    fn new(two: &'a TwoDmbc, caps: CardCaps, drop_s1_leakage: bool) -> Self {
        let marg = |ch: &Dmbc, keep_y: bool| -> Vec<f64> {
            let cols = if keep_y { ch.y_size() } else { ch.z_size() };
            let mut out = vec![0.0; ch.x_size() * cols];
            for x in 0..ch.x_size() {
                for y in 0..ch.y_size() {
                    for z in 0..ch.z_size() {
                        let c = if keep_y { y } else { z };
                        out[x * cols + c] += ch.prob(x, y, z);
                    }
                }
            }
            out
        };
        Self {
            two,
            card_v: caps.v.unwrap_or(two.forward.y_size() + 1),
            card_w1: caps.w1.unwrap_or(two.backward.x_size() + 1),
            card_w2: caps.w2.unwrap_or(two.backward.x_size()),
            drop_s1_leakage,
            fwd_y: marg(&two.forward, true),
            bwd_y: marg(&two.backward, true),
            bwd_z: marg(&two.backward, false),
        }
    }

    fn blocks_to_scheme(&self, blocks: &[Vec<f64>]) -> (Distribution, AuxScheme) {
        // layout: [input_f, v-rows (y_size), w2, w1|w2 rows (card_w2), x|w1 rows (card_w1)]
        let ys = self.two.forward.y_size();
        let mut it = blocks.iter();
        let input_f = Distribution::new(it.next().unwrap().clone()).expect("simplex block");
        let kernel_v = Kernel::from_rows((0..ys).map(|_| it.next().unwrap().clone()).collect())
            .expect("simplex block rows");
        let dist_w2 = Distribution::new(it.next().unwrap().clone()).expect("simplex block");
        let kernel_w1_given_w2 =
            Kernel::from_rows((0..self.card_w2).map(|_| it.next().unwrap().clone()).collect())
                .expect("simplex block rows");
        let kernel_x_given_w1 =
            Kernel::from_rows((0..self.card_w1).map(|_| it.next().unwrap().clone()).collect())
                .expect("simplex block rows");
        (
            input_f,
            AuxScheme {
                kernel_v,
                dist_w2,
                kernel_w1_given_w2,
                kernel_x_given_w1,
            },
        )
    }

    fn scheme_to_blocks(&self, input_f: &Distribution, scheme: &AuxScheme) -> Vec<Vec<f64>> {
        let ys = self.two.forward.y_size();
        let mut blocks = vec![input_f.probs().to_vec()];
        // embed possibly-smaller canonical kernels into the capped alphabets
        let embed = |row: &[f64], k: usize| -> Vec<f64> {
            let mut v = vec![0.0; k];
            v[..row.len()].copy_from_slice(row);
            v
        };
        for y in 0..ys {
            blocks.push(embed(scheme.kernel_v.row(y).probs(), self.card_v));
        }
        blocks.push(embed(scheme.dist_w2.probs(), self.card_w2));
        for w2 in 0..self.card_w2 {
            let row = if w2 < scheme.card_w2() {
                scheme.kernel_w1_given_w2.row(w2).probs().to_vec()
            } else {
                scheme.kernel_w1_given_w2.row(0).probs().to_vec()
            };
            blocks.push(embed(&row, self.card_w1));
        }
        for w1 in 0..self.card_w1 {
            let row = if w1 < scheme.card_w1() {
                scheme.kernel_x_given_w1.row(w1).probs().to_vec()
            } else {
                scheme.kernel_x_given_w1.row(0).probs().to_vec()
            };
            blocks.push(embed(&row, self.two.backward.x_size()));
        }
        blocks
    }

    fn random_blocks<R: Rng>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let ys = self.two.forward.y_size();
        let mut blocks = vec![Distribution::random(self.two.forward.x_size(), rng)
            .probs()
            .to_vec()];
        for _ in 0..ys {
            blocks.push(Distribution::random(self.card_v, rng).probs().to_vec());
        }
        blocks.push(Distribution::random(self.card_w2, rng).probs().to_vec());
        for _ in 0..self.card_w2 {
            blocks.push(Distribution::random(self.card_w1, rng).probs().to_vec());
        }
        for _ in 0..self.card_w1 {
            blocks.push(
                Distribution::random(self.two.backward.x_size(), rng)
                    .probs()
                    .to_vec(),
            );
        }
        blocks
    }

    /// The four rate quantities straight from the raw block arrays — the
    /// allocation-light equivalent of [`rate_terms_with`] on the scheme the
    /// blocks encode, exercised millions of times by the ascent loop.
    fn fast_terms(&self, blocks: &[Vec<f64>]) -> RateTerms {
        let (fx, fy) = (self.two.forward.x_size(), self.two.forward.y_size());
        let fz = self.two.forward.z_size();
        let (bx, by, bz) = (
            self.two.backward.x_size(),
            self.two.backward.y_size(),
            self.two.backward.z_size(),
        );
        let (cv, c1, c2) = (self.card_v, self.card_w1, self.card_w2);
        let input = &blocks[0];
        let v_row = |y: usize| -> &[f64] { &blocks[1 + y] };
        let d2 = &blocks[1 + fy];
        let k21 = |w2: usize| -> &[f64] { &blocks[2 + fy + w2] };
        let kx = |w1: usize| -> &[f64] { &blocks[2 + fy + c2 + w1] };

        // forward side: P(x,y), I(V;X), I(V;Z), I(V;Y|X)
        let mut vx = vec![0.0; cv * fx];
        let mut lhs = 0.0;
        let mut slice = vec![0.0; cv * fy];
        for x in 0..fx {
            if input[x] == 0.0 {
                continue;
            }
            slice.iter_mut().for_each(|c| *c = 0.0);
            for y in 0..fy {
                let py = self.fwd_y[x * fy + y];
                if py == 0.0 {
                    continue;
                }
                let row = v_row(y);
                for v in 0..cv {
                    vx[v * fx + x] += input[x] * py * row[v];
                    slice[v * fy + y] += py * row[v];
                }
            }
            lhs += input[x] * mi_flat(&slice, cv, fy);
        }
        let i_v_x = mi_flat(&vx, cv, fx);
        let i_v_z = if self.drop_s1_leakage {
            0.0
        } else {
            let mut yz = vec![0.0; fy * fz];
            for x in 0..fx {
                if input[x] == 0.0 {
                    continue;
                }
                for y in 0..fy {
                    for z in 0..fz {
                        yz[y * fz + z] += input[x] * self.two.forward.prob(x, y, z);
                    }
                }
            }
            let mut vz = vec![0.0; cv * fz];
            for y in 0..fy {
                let row = v_row(y);
                for v in 0..cv {
                    for z in 0..fz {
                        vz[v * fz + z] += row[v] * yz[y * fz + z];
                    }
                }
            }
            mi_flat(&vz, cv, fz)
        };

        // backward side: per-w1 output laws, then the three information terms
        let mut q1 = vec![0.0; c1 * by];
        let mut qz = vec![0.0; c1 * bz];
        for w1 in 0..c1 {
            let row = kx(w1);
            for (x, &px) in row.iter().take(bx).enumerate() {
                if px == 0.0 {
                    continue;
                }
                for yb in 0..by {
                    q1[w1 * by + yb] += px * self.bwd_y[x * by + yb];
                }
                for zb in 0..bz {
                    qz[w1 * bz + zb] += px * self.bwd_z[x * bz + zb];
                }
            }
        }
        let mut p1 = vec![0.0; c1];
        for w2 in 0..c2 {
            let row = k21(w2);
            for w1 in 0..c1 {
                p1[w1] += d2[w2] * row[w1];
            }
        }
        let mut w1y = vec![0.0; c1 * by];
        for w1 in 0..c1 {
            for yb in 0..by {
                w1y[w1 * by + yb] = p1[w1] * q1[w1 * by + yb];
            }
        }
        let rhs = mi_flat(&w1y, c1, by);
        let mut r_s2 = 0.0;
        let mut ty = vec![0.0; c1 * by];
        let mut tz = vec![0.0; c1 * bz];
        for w2 in 0..c2 {
            if d2[w2] == 0.0 {
                continue;
            }
            let row = k21(w2);
            for w1 in 0..c1 {
                for yb in 0..by {
                    ty[w1 * by + yb] = row[w1] * q1[w1 * by + yb];
                }
                for zb in 0..bz {
                    tz[w1 * bz + zb] = row[w1] * qz[w1 * bz + zb];
                }
            }
            r_s2 += d2[w2] * (mi_flat(&ty, c1, by) - mi_flat(&tz, c1, bz));
        }

        RateTerms {
            r_s1: i_v_x - i_v_z,
            r_s2,
            constraint_lhs: lhs,
            constraint_rhs: rhs,
        }
    }

    /// Ratio-constrained objective; infeasible points are pushed back toward
    /// the constraint with a large penalty.
    fn objective(&self, blocks: &[Vec<f64>], n_f: f64, n_b: f64) -> f64 {
        let terms = self.fast_terms(blocks);
        let violation = n_f * terms.constraint_lhs - (n_b * terms.constraint_rhs - CONSTRAINT_SLACK);
        if violation > 0.0 {
            return -10.0 - violation;
        }
        (n_f * terms.r_s1 + n_b * terms.r_s2.max(0.0)) / (n_f + n_b)
    }
}

/// The achievable-rate lower bound `max{L_A, L_B}` searched over input laws,
/// auxiliary schemes within cardinality caps, and the channel-use ratio.
pub fn lower_bound(two: &TwoDmbc, opts: &LowerBoundOptions) -> Result<BoundResult> {
    let direction = |two_dir: &TwoDmbc, name: &str, drop_s1: bool, seed: u64| -> Result<DirectionResult> {
        let caps = opts.caps;
        let search = DirectionSearch::new(two_dir, caps, drop_s1);
        // canonical seeds: key-transport corner and the identity cover
        let (bwd_input, _) = maximize_simplex(two_dir.backward.x_size(), opts.grid, 8, seed, |p| {
            let j = two_dir.backward.joint(p).expect("sizes match");
            mutual_information(&j, &[0], &[1]).expect("valid axes")
                - mutual_information(&j, &[0], &[2]).expect("valid axes")
        });
        let canon = vec![
            (
                Distribution::uniform(two_dir.forward.x_size()),
                AuxScheme::constant_v(&two_dir.forward, &two_dir.backward, bwd_input.clone())?,
            ),
            (
                Distribution::uniform(two_dir.forward.x_size()),
                AuxScheme::identity(&two_dir.forward, &two_dir.backward, bwd_input)?,
            ),
        ];

        let results: Vec<(f64, Vec<Vec<f64>>, (u32, u32))> = opts
            .ratio_grid
            .par_iter()
            .map(|&(a, b)| {
                let (n_f, n_b) = (a as f64, b as f64);
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ ((a as u64) << 32 | b as u64));
                let mut best_v = f64::NEG_INFINITY;
                let mut best_blocks = Vec::new();
                for restart in 0..opts.restarts.max(canon.len()) {
                    let mut blocks = if restart < canon.len() {
                        let (input, scheme) = &canon[restart];
                        search.scheme_to_blocks(input, scheme)
                    } else {
                        search.random_blocks(&mut rng)
                    };
                    let v = coordinate_ascent(&mut blocks, &mut rng, 2, |bl| {
                        search.objective(bl, n_f, n_b)
                    });
                    if v > best_v {
                        best_v = v;
                        best_blocks = blocks;
                    }
                }
                (best_v, best_blocks, (a, b))
            })
            .collect();

        let (best_v, best_blocks, best_ratio) = results
            .into_iter()
            .max_by(|x, y| x.0.total_cmp(&y.0))
            .expect("ratio grid nonempty");
        let feasible = best_v > -10.0;
        let (input, scheme) = search.blocks_to_scheme(&best_blocks);
        Ok(DirectionResult {
            name: name.into(),
            value: if feasible { best_v.max(0.0) } else { 0.0 },
            input: Some(input),
            scheme: Some(scheme),
            ratio: Some(best_ratio),
            feasible,
        })
    };

    let a = direction(two, "L_A", false, opts.seed)?;
    let swapped = two.swapped();
    let b = direction(&swapped, "L_B", opts.eq_4c_as_printed, opts.seed ^ 0xb)?;
    let value = a.value.max(b.value);
    Ok(BoundResult {
        value,
        per_direction: vec![a, b],
        metadata: OptimMeta {
            grid: opts.grid,
            restarts: opts.restarts,
        },
    })
}

// ---------------------------------------------------------------------------
// degraded capacity

/// Extract the obverse subchannel `X_O -> (Y_O, Z_O)` under a verified split
/// (fixing the reverse input at 0 and marginalizing the reverse outputs).
pub fn obverse_subchannel(ch: &Dmbc, split: &SplitSpec) -> Result<Dmbc> {
    let (xo, xr) = (split.x.o, split.x.r);
    let (yo, yr) = (split.y.o, split.y.r);
    let (zo, zr) = (split.z.o, split.z.r);
    if xo * xr != ch.x_size() || yo * yr != ch.y_size() || zo * zr != ch.z_size() {
        return Err(SkeError::InvalidSplit("split vs channel sizes".into()));
    }
    let mut probs = vec![0.0; xo * yo * zo];
    for x_o in 0..xo {
        let x = x_o * xr; // x_r = 0
        for y_o in 0..yo {
            for z_o in 0..zo {
                let mut p = 0.0;
                for y_r in 0..yr {
                    for z_r in 0..zr {
                        p += ch.prob(x, y_o * yr + y_r, z_o * zr + z_r);
                    }
                }
                probs[(x_o * yo + y_o) * zo + z_o] = p;
            }
        }
    }
    Dmbc::new(xo, yo, zo, probs)
}

/// The exact secret-key capacity of a degraded channel pair: the larger of
/// the two obverse-subchannel conditional informations, each maximized over
/// its own input simplex.
pub fn degraded_capacity(
    two: &TwoDmbc,
    split_f: &SplitSpec,
    split_b: &SplitSpec,
    grid: f64,
) -> Result<BoundResult> {
    let tol = crate::channel::MARKOV_TOL;
    for (ch, split, name) in [
        (&two.forward, split_f, "forward"),
        (&two.backward, split_b, "backward"),
    ] {
        let report = analyze_degraded(ch, split, &Distribution::uniform(ch.x_size()), tol)?;
        if !report.degraded() {
            return Err(SkeError::NotDegraded(format!(
                "{name} channel failed with residuals {:?}",
                report.residuals
            )));
        }
    }
    let sub_f = obverse_subchannel(&two.forward, split_f)?;
    let sub_b = obverse_subchannel(&two.backward, split_b)?;
    let (in_f, v_f) = maximize_conditional_mi(&sub_f, grid);
    let (in_b, v_b) = maximize_conditional_mi(&sub_b, grid);
    Ok(BoundResult {
        value: v_f.max(v_b).max(0.0),
        per_direction: vec![
            DirectionResult {
                name: "forward_obverse".into(),
                value: v_f,
                input: Some(in_f),
                scheme: None,
                ratio: None,
                feasible: true,
            },
            DirectionResult {
                name: "backward_obverse".into(),
                value: v_b,
                input: Some(in_b),
                scheme: None,
                ratio: None,
                feasible: true,
            },
        ],
        metadata: OptimMeta { grid, restarts: 20 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::binary_entropy;
    use approx::assert_abs_diff_eq;

    fn identity_blind() -> Dmbc {
        Dmbc::from_independent_kernels(
            &Kernel::identity(2),
            &Kernel::constant(2, Distribution::delta(2, 0)),
        )
        .unwrap()
    }

    fn useless() -> Dmbc {
        let blind = Kernel::constant(2, Distribution::uniform(2));
        Dmbc::from_independent_kernels(&blind, &blind).unwrap()
    }

    fn bsc_pair(e_bob: f64, e_eve: f64) -> Dmbc {
        Dmbc::from_independent_kernels(&Kernel::bsc(e_bob).unwrap(), &Kernel::bsc(e_eve).unwrap())
            .unwrap()
    }

    #[test]
    fn simple_identity_blind() {
        let r = secrecy_capacity_simple(&identity_blind(), 0.01).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn simple_identical_outputs() {
        // Y and Z statistically identical: objective <= 0 everywhere
        let ch = bsc_pair(0.15, 0.15);
        let r = secrecy_capacity_simple(&ch, 0.01).unwrap();
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn simple_cascade_h_difference() {
        // cascade-equivalent case: value = h(0.2) - h(0.1) at uniform input
        let e2 = (0.2 - 0.1) / (1.0 - 2.0 * 0.1); // 0.1 * e2 convolution = 0.2
        let ch = Dmbc::from_cascade(&Kernel::bsc(0.1).unwrap(), &Kernel::bsc(e2).unwrap()).unwrap();
        let r = secrecy_capacity_simple(&ch, 0.001).unwrap();
        let oracle = binary_entropy(0.2).unwrap() - binary_entropy(0.1).unwrap();
        assert_abs_diff_eq!(oracle, 0.2529325012980811, epsilon = 1e-10);
        assert!((r.value - oracle).abs() < 1e-6, "{} vs {}", r.value, oracle);
    }

    #[test]
    fn simple_matches_bruteforce() {
        let ch = bsc_pair(0.1, 0.2);
        let r = secrecy_capacity_simple(&ch, 0.001).unwrap();
        // independent brute-force grid, step 0.001
        let mut oracle = 0.0f64;
        for i in 0..=1000 {
            let p = i as f64 / 1000.0;
            let d = Distribution::new(vec![p, 1.0 - p]).unwrap();
            let j = ch.joint(&d).unwrap();
            let v = mutual_information(&j, &[0], &[1]).unwrap()
                - mutual_information(&j, &[0], &[2]).unwrap();
            oracle = oracle.max(v);
        }
        assert!((r.value - oracle).abs() < 1e-4);
    }

    #[test]
    fn aux_card_one_is_zero() {
        let ch = bsc_pair(0.1, 0.2);
        let r = secrecy_capacity_aux(&ch, 1, 0.01, 5).unwrap();
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn aux_dominates_simple() {
        let ch = bsc_pair(0.1, 0.2);
        let simple = secrecy_capacity_simple(&ch, 0.01).unwrap();
        let aux = secrecy_capacity_aux(&ch, 2, 0.01, 10).unwrap();
        assert!(aux.value >= simple.value - 1e-6, "{} vs {}", aux.value, simple.value);
    }

    fn two_bsc(e_fb: f64, e_fe: f64, e_bb: f64, e_be: f64) -> TwoDmbc {
        TwoDmbc::new(bsc_pair(e_fb, e_fe), bsc_pair(e_bb, e_be))
    }

    #[test]
    fn rate_terms_constant_v() {
        let two = two_bsc(0.1, 0.2, 0.1, 0.2);
        let scheme =
            AuxScheme::constant_v(&two.forward, &two.backward, Distribution::uniform(2)).unwrap();
        let t = rate_terms(&two, &scheme, &Distribution::uniform(2)).unwrap();
        assert_abs_diff_eq!(t.r_s1, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.constraint_lhs, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rate_terms_identity_v_noiseless_forward() {
        // noiseless forward channel with V = Y_f: r_s1 = I(Y_f;X_f) - I(Y_f;Z_f)
        let fwd = identity_blind();
        let two = TwoDmbc::new(fwd, bsc_pair(0.1, 0.2));
        let scheme =
            AuxScheme::identity(&two.forward, &two.backward, Distribution::uniform(2)).unwrap();
        let input = Distribution::uniform(2);
        let t = rate_terms(&two, &scheme, &input).unwrap();
        let j = two.forward.joint(&input).unwrap();
        let oracle = mutual_information(&j, &[1], &[0]).unwrap()
            - mutual_information(&j, &[1], &[2]).unwrap();
        assert_abs_diff_eq!(t.r_s1, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(t.constraint_lhs, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rate_terms_bsc_oracle() {
        // independent evaluation from explicitly constructed joint tensors
        let two = two_bsc(0.1, 0.2, 0.15, 0.3);
        let input = Distribution::new(vec![0.4, 0.6]).unwrap();
        let scheme = AuxScheme::identity(
            &two.forward,
            &two.backward,
            Distribution::new(vec![0.35, 0.65]).unwrap(),
        )
        .unwrap();
        let t = rate_terms(&two, &scheme, &input).unwrap();

        // forward oracle: V = Y_f, so r_s1 = I(Y;X) - I(Y;Z) on (x,y,z)
        let fj = two.forward.joint(&input).unwrap();
        let r_s1 = mutual_information(&fj, &[1], &[0]).unwrap()
            - mutual_information(&fj, &[1], &[2]).unwrap();
        assert_abs_diff_eq!(t.r_s1, r_s1, epsilon = 1e-12);
        // V = Y exactly, so I(V;Y|X) = H(Y|X)
        let hyx = fj.entropy_of(&[0, 1]).unwrap() - fj.entropy_of(&[0]).unwrap();
        assert_abs_diff_eq!(t.constraint_lhs, hyx, epsilon = 1e-12);

        // backward oracle: W2 constant, W1 = X_b
        let bj = two
            .backward
            .joint(&Distribution::new(vec![0.35, 0.65]).unwrap())
            .unwrap();
        let r_s2 = mutual_information(&bj, &[0], &[1]).unwrap()
            - mutual_information(&bj, &[0], &[2]).unwrap();
        assert_abs_diff_eq!(t.r_s2, r_s2, epsilon = 1e-12);
        let rhs = mutual_information(&bj, &[0], &[1]).unwrap();
        assert_abs_diff_eq!(t.constraint_rhs, rhs, epsilon = 1e-12);
    }

    #[test]
    fn upper_bound_examples() {
        // forward perfect to Bob with blind Eve, backward useless
        let two = TwoDmbc::new(identity_blind(), useless());
        let r = upper_bound(&two, 0.01).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-9);

        // Eve sees exactly what Bob sees on both channels
        let copycat = {
            let mut probs = vec![0.0; 8];
            for x in 0..2 {
                for y in 0..2 {
                    let p = if y == x { 0.9 } else { 0.1 };
                    probs[(x * 2 + y) * 2 + y] = p;
                }
            }
            Dmbc::new(2, 2, 2, probs).unwrap()
        };
        let two = TwoDmbc::new(copycat.clone(), copycat);
        let r = upper_bound(&two, 0.01).unwrap();
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn upper_bound_matches_bruteforce() {
        let two = two_bsc(0.1, 0.2, 0.25, 0.3);
        let r = upper_bound(&two, 0.001).unwrap();
        let brute = |ch: &Dmbc| -> f64 {
            let mut best = 0.0f64;
            for i in 0..=1000 {
                let p = i as f64 / 1000.0;
                let d = Distribution::new(vec![p, 1.0 - p]).unwrap();
                let j = ch.joint(&d).unwrap();
                best = best.max(conditional_mutual_information(&j, &[0], &[1], &[2]).unwrap());
            }
            best
        };
        let oracle = brute(&two.forward).max(brute(&two.backward));
        assert!((r.value - oracle).abs() < 1e-4, "{} vs {oracle}", r.value);
    }

    #[test]
    fn lower_bound_useless_channels() {
        let two = TwoDmbc::new(useless(), useless());
        let r = lower_bound(&two, &LowerBoundOptions { restarts: 4, ..Default::default() }).unwrap();
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn lower_bound_perfect_backward() {
        // backward perfect to Alice and blind to Eve; heavy-backward ratio
        // approaches the one-way secrecy capacity 1.0
        let two = TwoDmbc::new(useless(), identity_blind());
        let r = lower_bound(&two, &LowerBoundOptions { restarts: 6, ..Default::default() }).unwrap();
        assert!(r.value >= 0.98, "value {}", r.value);
        assert!(r.value <= 1.0 + 1e-9);
    }

    #[test]
    fn lower_bound_below_upper() {
        let two = two_bsc(0.1, 0.25, 0.2, 0.35);
        let lo = lower_bound(&two, &LowerBoundOptions { restarts: 8, ..Default::default() }).unwrap();
        let up = upper_bound(&two, 0.01).unwrap();
        assert!(lo.value <= up.value + 1e-3, "{} vs {}", lo.value, up.value);
    }

    fn degraded_two(e1f: f64, e2f: f64, e1b: f64, e2b: f64) -> TwoDmbc {
        let f = Dmbc::from_cascade(&Kernel::bsc(e1f).unwrap(), &Kernel::bsc(e2f).unwrap()).unwrap();
        let b = Dmbc::from_cascade(&Kernel::bsc(e1b).unwrap(), &Kernel::bsc(e2b).unwrap()).unwrap();
        TwoDmbc::new(f, b)
    }

    #[test]
    fn degraded_equals_upper_on_cascades() {
        let two = degraded_two(0.1, 0.15, 0.2, 0.1);
        let split_f = SplitSpec::trivial_r(&two.forward);
        let split_b = SplitSpec::trivial_r(&two.backward);
        let cap = degraded_capacity(&two, &split_f, &split_b, 0.001).unwrap();
        let up = upper_bound(&two, 0.001).unwrap();
        assert!((cap.value - up.value).abs() < 1e-6, "{} vs {}", cap.value, up.value);
    }

    #[test]
    fn degraded_trivial_cases() {
        // Eve-blind identity forward: capacity 1
        let two = TwoDmbc::new(identity_blind(), useless());
        // useless backward channel is degraded too (outputs independent of input)
        let cap = degraded_capacity(
            &two,
            &SplitSpec::trivial_r(&two.forward),
            &SplitSpec::trivial_r(&two.backward),
            0.01,
        )
        .unwrap();
        assert_abs_diff_eq!(cap.value, 1.0, epsilon = 1e-9);

        // both channels degraded with zero-capacity obverse parts
        let two = TwoDmbc::new(useless(), useless());
        let cap = degraded_capacity(
            &two,
            &SplitSpec::trivial_r(&two.forward),
            &SplitSpec::trivial_r(&two.backward),
            0.01,
        )
        .unwrap();
        assert_abs_diff_eq!(cap.value, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn degraded_rejects_non_degraded() {
        let two = two_bsc(0.1, 0.2, 0.1, 0.2);
        let r = degraded_capacity(
            &two,
            &SplitSpec::trivial_r(&two.forward),
            &SplitSpec::trivial_r(&two.backward),
            0.01,
        );
        assert!(matches!(r, Err(SkeError::NotDegraded(_))));
    }

    #[test]
    fn conditional_mi_concave_in_input() {
        let ch = bsc_pair(0.1, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = Distribution::random(2, &mut rng);
            let q = Distribution::random(2, &mut rng);
            let lambda: f64 = rng.gen();
            let mix = Distribution::new(
                p.probs()
                    .iter()
                    .zip(q.probs())
                    .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                    .collect(),
            )
            .unwrap();
            let obj = |d: &Distribution| {
                let j = ch.joint(d).unwrap();
                conditional_mutual_information(&j, &[0], &[1], &[2]).unwrap()
            };
            assert!(obj(&mix) >= lambda * obj(&p) + (1.0 - lambda) * obj(&q) - 1e-9);
        }
    }

    #[test]
    fn fast_terms_matches_reference_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let random_dmbc = |rng: &mut ChaCha8Rng| {
            let probs: Vec<f64> = (0..2)
                .flat_map(|_| Distribution::random(4, rng).probs().to_vec())
                .collect();
            Dmbc::new(2, 2, 2, probs).unwrap()
        };
        for _ in 0..20 {
            let two = TwoDmbc::new(random_dmbc(&mut rng), random_dmbc(&mut rng));
            for drop in [false, true] {
                let search = DirectionSearch::new(&two, CardCaps::default(), drop);
                let blocks = search.random_blocks(&mut rng);
                let fast = search.fast_terms(&blocks);
                let (input_f, scheme) = search.blocks_to_scheme(&blocks);
                let slow = rate_terms_with(&two, &scheme, &input_f, drop).unwrap();
                assert_abs_diff_eq!(fast.r_s1, slow.r_s1, epsilon = 1e-10);
                assert_abs_diff_eq!(fast.r_s2, slow.r_s2, epsilon = 1e-10);
                assert_abs_diff_eq!(fast.constraint_lhs, slow.constraint_lhs, epsilon = 1e-10);
                assert_abs_diff_eq!(fast.constraint_rhs, slow.constraint_rhs, epsilon = 1e-10);
            }
        }
    }
}
