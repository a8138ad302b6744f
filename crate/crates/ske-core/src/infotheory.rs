//! Exact finite-alphabet probability calculus.
//!
//! Everything here is base-2: entropies and informations are in bits. The
//! convention `0 * log 0 = 0` is applied throughout, and conditional terms
//! with zero-mass conditioning events contribute nothing.

use crate::error::{Result, SkeError};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Tolerance for probability-mass normalization checks.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance for information-theoretic identities.
pub const INFO_TOL: f64 = 1e-9;

#[inline]
fn xlog2x(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// A probability vector over the alphabet `{0..k-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(SkeError::InvalidDistribution("empty alphabet".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(SkeError::InvalidDistribution(format!(
                "negative or non-finite entry {p}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL * probs.len() as f64 {
            return Err(SkeError::InvalidDistribution(format!(
                "mass sums to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    /// Point mass on `symbol`.
    pub fn delta(k: usize, symbol: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[symbol] = 1.0;
        Self { probs }
    }

    /// A random point of the simplex (normalized exponentials, i.e. a flat
    /// Dirichlet draw).
    pub fn random<R: Rng>(k: usize, rng: &mut R) -> Self {
        let mut v: Vec<f64> = (0..k)
            .map(|_| -(rng.gen_range(1e-12..1.0f64)).ln())
            .collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        Self { probs: v }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// Draw one symbol.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// Shannon entropy in bits.
pub fn entropy(p: &Distribution) -> f64 {
    -p.probs.iter().map(|&x| xlog2x(x)).sum::<f64>()
}

/// The binary entropy function `h(e)` in bits.
pub fn binary_entropy(e: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&e) {
        return Err(SkeError::Domain(format!("binary_entropy({e}): not in [0,1]")));
    }
    Ok(-xlog2x(e) - xlog2x(1.0 - e))
}

/// A stochastic matrix: one `Distribution` per input symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    rows: Vec<Distribution>,
}

impl Kernel {
    pub fn new(rows: Vec<Distribution>) -> Result<Self> {
        if rows.is_empty() {
            return Err(SkeError::InvalidKernel("no rows".into()));
        }
        let m = rows[0].len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(SkeError::InvalidKernel("ragged rows".into()));
        }
        Ok(Self { rows })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(Distribution::new).collect::<Result<_>>()?)
    }

    pub fn identity(k: usize) -> Self {
        Self {
            rows: (0..k).map(|i| Distribution::delta(k, i)).collect(),
        }
    }

    /// Every input maps to the same output law.
    pub fn constant(input_size: usize, output: Distribution) -> Self {
        Self {
            rows: vec![output; input_size],
        }
    }

    /// Binary symmetric kernel with flip probability `e`.
    pub fn bsc(e: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&e) {
            return Err(SkeError::Domain(format!("bsc({e}): not in [0,1]")));
        }
        Self::from_rows(vec![vec![1.0 - e, e], vec![e, 1.0 - e]])
    }

    pub fn input_size(&self) -> usize {
        self.rows.len()
    }

    pub fn output_size(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, x: usize) -> &Distribution {
        &self.rows[x]
    }

    /// `P(y|x)`.
    pub fn prob(&self, y: usize, x: usize) -> f64 {
        self.rows[x].get(y)
    }

    /// Cascade: `(k2 ∘ k1)(z|x) = Σ_y k2(z|y) k1(y|x)`.
    pub fn then(&self, next: &Kernel) -> Result<Kernel> {
        if next.input_size() != self.output_size() {
            return Err(SkeError::SizeMismatch(format!(
                "cascade: {} outputs vs {} inputs",
                self.output_size(),
                next.input_size()
            )));
        }
        let rows = (0..self.input_size())
            .map(|x| {
                let probs = (0..next.output_size())
                    .map(|z| {
                        (0..self.output_size())
                            .map(|y| self.prob(y, x) * next.prob(z, y))
                            .sum()
                    })
                    .collect();
                Distribution::new(probs)
            })
            .collect::<Result<_>>()?;
        Ok(Kernel { rows })
    }
}

/// A dense n-index probability tensor over a product alphabet, with a label
/// per axis naming the variable it carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    probs: Vec<f64>,
    shape: Vec<usize>,
    labels: Vec<String>,
}

impl JointDistribution {
    pub fn new(probs: Vec<f64>, shape: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        let cells: usize = shape.iter().product();
        if shape.is_empty() || cells == 0 {
            return Err(SkeError::InvalidJoint("empty shape".into()));
        }
        if probs.len() != cells {
            return Err(SkeError::InvalidJoint(format!(
                "{} entries for shape {:?}",
                probs.len(),
                shape
            )));
        }
        if labels.len() != shape.len() {
            return Err(SkeError::InvalidJoint("one label per axis required".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(SkeError::InvalidJoint(format!(
                "negative or non-finite entry {p}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL * cells.max(8) as f64 {
            return Err(SkeError::InvalidJoint(format!(
                "total mass {sum}, expected 1"
            )));
        }
        Ok(Self {
            probs,
            shape,
            labels,
        })
    }

    /// Build from a function of the multi-index.
    pub fn from_fn<F>(shape: &[usize], labels: &[&str], f: F) -> Result<Self>
    where
        F: Fn(&[usize]) -> f64,
    {
        let cells: usize = shape.iter().product();
        let mut probs = Vec::with_capacity(cells);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..cells {
            probs.push(f(&idx));
            // row-major increment
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self::new(
            probs,
            shape.to_vec(),
            labels.iter().map(|s| s.to_string()).collect(),
        )
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.probs[self.flat(idx)]
    }

    fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut f = 0;
        for (i, &s) in idx.iter().zip(&self.shape) {
            debug_assert!(*i < s);
            f = f * s + i;
        }
        f
    }

    fn check_axes(&self, axes: &[usize]) -> Result<()> {
        if axes.is_empty() {
            return Err(SkeError::AxisUsage("empty axis set".into()));
        }
        for &a in axes {
            if a >= self.rank() {
                return Err(SkeError::AxisUsage(format!(
                    "axis {a} out of range for rank {}",
                    self.rank()
                )));
            }
        }
        let mut seen = vec![false; self.rank()];
        for &a in axes {
            if seen[a] {
                return Err(SkeError::AxisUsage(format!("axis {a} repeated")));
            }
            seen[a] = true;
        }
        Ok(())
    }

    fn check_disjoint(sets: &[&[usize]]) -> Result<()> {
        let mut all = Vec::new();
        for s in sets {
            all.extend_from_slice(s);
        }
        let mut sorted = all.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != all.len() {
            return Err(SkeError::AxisUsage("axis sets overlap".into()));
        }
        Ok(())
    }

    /// Marginal onto `axes`, in the order given.
    pub fn marginal(&self, axes: &[usize]) -> Result<JointDistribution> {
        self.check_axes(axes)?;
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let out_labels: Vec<String> = axes.iter().map(|&a| self.labels[a].clone()).collect();
        let cells: usize = out_shape.iter().product();
        let mut out = vec![0.0; cells];
        let mut idx = vec![0usize; self.rank()];
        for &p in &self.probs {
            let mut f = 0;
            for &a in axes {
                f = f * self.shape[a] + idx[a];
            }
            out[f] += p;
            for ax in (0..self.rank()).rev() {
                idx[ax] += 1;
                if idx[ax] < self.shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Ok(JointDistribution {
            probs: out,
            shape: out_shape,
            labels: out_labels,
        })
    }

    /// Marginal onto a single axis as a plain `Distribution`.
    pub fn marginal_dist(&self, axis: usize) -> Result<Distribution> {
        let m = self.marginal(&[axis])?;
        Distribution::new(m.probs)
    }

    /// Entropy of the whole tensor, in bits.
    pub fn entropy(&self) -> f64 {
        -self.probs.iter().map(|&p| xlog2x(p)).sum::<f64>()
    }

    /// Entropy of the marginal on `axes`.
    pub fn entropy_of(&self, axes: &[usize]) -> Result<f64> {
        Ok(self.marginal(axes)?.entropy())
    }
}

/// `I(A;B)` over a joint tensor, in bits.
pub fn mutual_information(
    joint: &JointDistribution,
    axes_a: &[usize],
    axes_b: &[usize],
) -> Result<f64> {
    JointDistribution::check_disjoint(&[axes_a, axes_b])?;
    let ha = joint.entropy_of(axes_a)?;
    let hb = joint.entropy_of(axes_b)?;
    let mut ab = axes_a.to_vec();
    ab.extend_from_slice(axes_b);
    let hab = joint.entropy_of(&ab)?;
    Ok(ha + hb - hab)
}

/// `I(A;B|C)` over a joint tensor, in bits. An empty `axes_c` reduces to the
/// unconditional mutual information.
pub fn conditional_mutual_information(
    joint: &JointDistribution,
    axes_a: &[usize],
    axes_b: &[usize],
    axes_c: &[usize],
) -> Result<f64> {
    if axes_c.is_empty() {
        return mutual_information(joint, axes_a, axes_b);
    }
    JointDistribution::check_disjoint(&[axes_a, axes_b, axes_c])?;
    let mut ac = axes_a.to_vec();
    ac.extend_from_slice(axes_c);
    let mut bc = axes_b.to_vec();
    bc.extend_from_slice(axes_c);
    let mut abc = axes_a.to_vec();
    abc.extend_from_slice(axes_b);
    abc.extend_from_slice(axes_c);
    let hac = joint.entropy_of(&ac)?;
    let hbc = joint.entropy_of(&bc)?;
    let habc = joint.entropy_of(&abc)?;
    let hc = joint.entropy_of(axes_c)?;
    Ok(hac + hbc - habc - hc)
}

/// Joint `(X,Y)` with `joint(x,y) = p(x) k(y|x)`.
pub fn compose(p: &Distribution, k: &Kernel) -> Result<JointDistribution> {
    if k.input_size() != p.len() {
        return Err(SkeError::SizeMismatch(format!(
            "compose: input law over {} symbols, kernel expects {}",
            p.len(),
            k.input_size()
        )));
    }
    JointDistribution::from_fn(&[p.len(), k.output_size()], &["x", "y"], |idx| {
        p.get(idx[0]) * k.prob(idx[1], idx[0])
    })
}

/// True iff `A ↔ B ↔ C`, tested as `I(A;C|B) <= tol`.
pub fn is_markov_chain(
    joint: &JointDistribution,
    axes_a: &[usize],
    axes_b: &[usize],
    axes_c: &[usize],
    tol: f64,
) -> Result<bool> {
    Ok(conditional_mutual_information(joint, axes_a, axes_c, axes_b)? <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bsc_joint(p: &Distribution, e: f64) -> JointDistribution {
        compose(p, &Kernel::bsc(e).unwrap()).unwrap()
    }

    #[test]
    fn entropy_uniform_binary() {
        let p = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(entropy(&p), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn entropy_deterministic() {
        let p = Distribution::new(vec![1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(entropy(&p), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn entropy_quarter() {
        // oracle: -0.25 log2 0.25 - 0.75 log2 0.75 evaluated independently
        let p = Distribution::new(vec![0.25, 0.75]).unwrap();
        let oracle = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
        assert_abs_diff_eq!(oracle, 0.8112781244591328, epsilon = 1e-12);
        assert_abs_diff_eq!(entropy(&p), oracle, epsilon = 1e-12);
    }

    #[test]
    fn binary_entropy_values() {
        assert_abs_diff_eq!(binary_entropy(0.5).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(binary_entropy(0.0).unwrap(), 0.0, epsilon = 1e-12);
        let oracle = -(0.2f64 * 0.2f64.log2() + 0.8 * 0.8f64.log2());
        assert_abs_diff_eq!(oracle, 0.7219280948873623, epsilon = 1e-12);
        assert_abs_diff_eq!(binary_entropy(0.2).unwrap(), oracle, epsilon = 1e-12);
        assert!(binary_entropy(1.2).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn binary_entropy_symmetric() {
        for e in [0.05, 0.13, 0.31, 0.47] {
            assert_abs_diff_eq!(
                binary_entropy(e).unwrap(),
                binary_entropy(1.0 - e).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn mi_identity_channel() {
        let j = compose(&Distribution::uniform(2), &Kernel::identity(2)).unwrap();
        assert_abs_diff_eq!(
            mutual_information(&j, &[0], &[1]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn mi_independent() {
        let j = JointDistribution::from_fn(&[2, 3], &["a", "b"], |i| {
            [0.3, 0.7][i[0]] * [0.2, 0.5, 0.3][i[1]]
        })
        .unwrap();
        assert_abs_diff_eq!(
            mutual_information(&j, &[0], &[1]).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn mi_bsc_01() {
        // I(X;Y) = 1 - h(0.1) for uniform input through BSC(0.1)
        let j = bsc_joint(&Distribution::uniform(2), 0.1);
        let oracle = 1.0 - binary_entropy(0.1).unwrap();
        assert_abs_diff_eq!(oracle, 0.5310044064107188, epsilon = 1e-12);
        assert_abs_diff_eq!(
            mutual_information(&j, &[0], &[1]).unwrap(),
            oracle,
            epsilon = 1e-12
        );
    }

    #[test]
    fn mi_overlap_rejected() {
        let j = bsc_joint(&Distribution::uniform(2), 0.1);
        assert!(mutual_information(&j, &[0], &[0]).is_err());
    }

    // X uniform, Y = BSC(ey)(X), Z = BSC(ez)(X), independent flips.
    fn xyz_joint(ey: f64, ez: f64) -> JointDistribution {
        JointDistribution::from_fn(&[2, 2, 2], &["x", "y", "z"], |i| {
            let (x, y, z) = (i[0], i[1], i[2]);
            let py = if y == x { 1.0 - ey } else { ey };
            let pz = if z == x { 1.0 - ez } else { ez };
            0.5 * py * pz
        })
        .unwrap()
    }

    #[test]
    fn cmi_independent_conditioner() {
        // C independent of (A,B): I(A;B|C) = I(A;B)
        let ab = bsc_joint(&Distribution::uniform(2), 0.1);
        let j = JointDistribution::from_fn(&[2, 2, 3], &["a", "b", "c"], |i| {
            ab.get(&[i[0], i[1]]) * [0.2, 0.3, 0.5][i[2]]
        })
        .unwrap();
        let mi = mutual_information(&j, &[0], &[1]).unwrap();
        let cmi = conditional_mutual_information(&j, &[0], &[1], &[2]).unwrap();
        assert_abs_diff_eq!(mi, cmi, epsilon = 1e-12);
    }

    #[test]
    fn cmi_conditioner_equals_b() {
        // C a copy of B: nothing left to learn
        let ab = bsc_joint(&Distribution::uniform(2), 0.1);
        let j = JointDistribution::from_fn(&[2, 2, 2], &["a", "b", "c"], |i| {
            if i[1] == i[2] {
                ab.get(&[i[0], i[1]])
            } else {
                0.0
            }
        })
        .unwrap();
        assert_abs_diff_eq!(
            conditional_mutual_information(&j, &[0], &[1], &[2]).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn cmi_bsc_pair_oracle() {
        // oracle: evaluate I(X;Y|Z) = H(X,Z)+H(Y,Z)-H(X,Y,Z)-H(Z) from the
        // explicitly built 8-cell tensor via scalar entropy sums.
        let j = xyz_joint(0.1, 0.2);
        let h = |axes: &[usize]| j.entropy_of(axes).unwrap();
        let oracle = h(&[0, 2]) + h(&[1, 2]) - h(&[0, 1, 2]) - h(&[2]);
        let cmi = conditional_mutual_information(&j, &[0], &[1], &[2]).unwrap();
        assert_abs_diff_eq!(cmi, oracle, epsilon = 1e-12);
        assert!(cmi > 0.0);
        // frozen from the oracle above
        assert_abs_diff_eq!(cmi, 0.3577507789033363, epsilon = 1e-9);
    }

    #[test]
    fn compose_examples() {
        let diag = compose(&Distribution::uniform(2), &Kernel::identity(2)).unwrap();
        assert_abs_diff_eq!(diag.get(&[0, 0]), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(diag.get(&[0, 1]), 0.0, epsilon = 1e-12);

        let p = Distribution::new(vec![0.3, 0.7]).unwrap();
        let j = compose(&p, &Kernel::bsc(0.1).unwrap()).unwrap();
        assert_abs_diff_eq!(j.get(&[0, 0]), 0.27, epsilon = 1e-12);
        assert_abs_diff_eq!(j.get(&[0, 1]), 0.03, epsilon = 1e-12);
        assert_abs_diff_eq!(j.get(&[1, 0]), 0.07, epsilon = 1e-12);
        assert_abs_diff_eq!(j.get(&[1, 1]), 0.63, epsilon = 1e-12);

        let constant = Kernel::constant(2, Distribution::new(vec![0.4, 0.6]).unwrap());
        let prod = compose(&p, &constant).unwrap();
        assert_abs_diff_eq!(prod.get(&[1, 0]), 0.28, epsilon = 1e-12);

        assert!(compose(&Distribution::uniform(3), &Kernel::bsc(0.1).unwrap()).is_err());
    }

    #[test]
    fn markov_cascade() {
        // X -> Y -> Z from two BSCs: I(X;Z|Y) = 0
        let j = JointDistribution::from_fn(&[2, 2, 2], &["x", "y", "z"], |i| {
            let (x, y, z) = (i[0], i[1], i[2]);
            let py = if y == x { 0.9 } else { 0.1 };
            let pz = if z == y { 0.85 } else { 0.15 };
            0.5 * py * pz
        })
        .unwrap();
        assert!(is_markov_chain(&j, &[0], &[1], &[2], 1e-9).unwrap());
        // Z copied from X is not conditionally independent given a noisy Y
        let j2 = xyz_joint(0.1, 0.0);
        assert!(!is_markov_chain(&j2, &[0], &[1], &[2], 1e-9).unwrap());
    }

    #[test]
    fn markov_deterministic_function_of_b() {
        let j = JointDistribution::from_fn(&[2, 2, 2], &["a", "b", "c"], |i| {
            let pb = if i[1] == i[0] { 0.8 } else { 0.2 };
            // c = b
            if i[2] == i[1] {
                0.5 * pb
            } else {
                0.0
            }
        })
        .unwrap();
        assert!(is_markov_chain(&j, &[0], &[1], &[2], 1e-9).unwrap());
    }

    fn random_joint(rng: &mut ChaCha8Rng, shape: &[usize]) -> JointDistribution {
        let cells: usize = shape.iter().product();
        let mut v: Vec<f64> = (0..cells).map(|_| -(rng.gen_range(1e-9..1.0f64)).ln()).collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        let labels: Vec<String> = (0..shape.len()).map(|i| format!("v{i}")).collect();
        JointDistribution::new(v, shape.to_vec(), labels).unwrap()
    }

    proptest! {
        #[test]
        fn chain_rule(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let j = random_joint(&mut rng, &[3, 4]);
            let hab = j.entropy();
            let ha = j.entropy_of(&[0]).unwrap();
            // H(B|A) = H(A,B) - H(A)
            let hb_given_a = hab - ha;
            prop_assert!((hab - (ha + hb_given_a)).abs() < 1e-9);
            // and against the explicit conditional sum
            let ma = j.marginal_dist(0).unwrap();
            let mut direct = 0.0;
            for a in 0..3 {
                let pa = ma.get(a);
                if pa <= 0.0 { continue; }
                let cond: Vec<f64> = (0..4).map(|b| j.get(&[a, b]) / pa).collect();
                direct += pa * -cond.iter().map(|&p| super::xlog2x(p)).sum::<f64>();
            }
            prop_assert!((hb_given_a - direct).abs() < 1e-9);
        }

        #[test]
        fn mi_bounds(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let j = random_joint(&mut rng, &[3, 3, 2]);
            let mi = mutual_information(&j, &[0], &[1]).unwrap();
            let ha = j.entropy_of(&[0]).unwrap();
            let hb = j.entropy_of(&[1]).unwrap();
            prop_assert!(mi >= -1e-12);
            prop_assert!(mi <= ha.min(hb) + 1e-9);
            let cmi = conditional_mutual_information(&j, &[0], &[1], &[2]).unwrap();
            prop_assert!(cmi >= -1e-9);
        }

        #[test]
        fn entropy_concavity(seed in 0u64..500, lambda in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = Distribution::random(5, &mut rng);
            let q = Distribution::random(5, &mut rng);
            let mix: Vec<f64> = p.probs().iter().zip(q.probs())
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
            let mix = Distribution::new(mix).unwrap();
            prop_assert!(entropy(&mix) >= lambda * entropy(&p) + (1.0 - lambda) * entropy(&q) - 1e-9);
        }

        #[test]
        fn compose_marginal_roundtrip(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = Distribution::random(4, &mut rng);
            let rows = (0..4).map(|_| Distribution::random(3, &mut rng)).collect();
            let k = Kernel::new(rows).unwrap();
            let j = compose(&p, &k).unwrap();
            let back = j.marginal_dist(0).unwrap();
            for i in 0..4 {
                prop_assert!((back.get(i) - p.get(i)).abs() < 1e-12);
            }
        }

        #[test]
        fn markov_matches_factorization(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let j = random_joint(&mut rng, &[2, 2, 2]);
            // direct factorization residual: max |P(a,b,c) P(b) - P(a,b) P(b,c)|
            let pb = j.marginal(&[1]).unwrap();
            let pab = j.marginal(&[0, 1]).unwrap();
            let pbc = j.marginal(&[1, 2]).unwrap();
            let mut residual: f64 = 0.0;
            for a in 0..2 { for b in 0..2 { for c in 0..2 {
                let r = j.get(&[a, b, c]) * pb.get(&[b]) - pab.get(&[a, b]) * pbc.get(&[b, c]);
                residual = residual.max(r.abs());
            }}}
            let markov = is_markov_chain(&j, &[0], &[1], &[2], 1e-9).unwrap();
            // random dense tensors are essentially never Markov; both views agree
            prop_assert_eq!(markov, residual < 1e-6);
        }
    }
}
