//! Anisotropic sparse tensor-product spaces (hyperbolic crosses).
//!
//! The space `⊕_{αᵀj ≤ J} W_{j_1} ⊗ … ⊗ W_{j_m}` is described by its index
//! set. The level budget `J` and weights `α` are real; membership is tested
//! directly on `αᵀj ≤ J` with a small tolerance instead of rounding limits.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::mra::HierCoeffTensor;

/// Tolerance of the membership test `αᵀj ≤ J`.
pub const LEVEL_TOL: f64 = 1e-12;
/// Relative tolerance deciding ties between real ratios.
pub const TIE_TOL: f64 = 1e-12;

/// Spatial dimensions `n_i`, smoothness `s_i` and polynomial exactness `r_i`
/// of each subdomain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessProfile {
    pub n: Vec<usize>,
    pub s: Vec<f64>,
    pub r: Vec<f64>,
}

impl SmoothnessProfile {
    pub fn new(n: Vec<usize>, s: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        let m = n.len();
        if m < 2 {
            return Err(validation(format!("need at least two subdomains, got {m}")));
        }
        if s.len() != m || r.len() != m {
            return Err(validation(format!(
                "profile lengths differ: n={}, s={}, r={}",
                m,
                s.len(),
                r.len()
            )));
        }
        if n.contains(&0) {
            return Err(validation("spatial dimensions must be positive"));
        }
        if s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(validation("smoothness must be finite and nonnegative"));
        }
        if r.iter().any(|v| !(v.is_finite() && *v >= 1.0)) {
            return Err(validation("polynomial exactness must be at least 1"));
        }
        Ok(Self { n, s, r })
    }

    /// Profile with `r_i = max(s_i, 1)`, for rate formulas that ignore `r`.
    pub fn from_smoothness(n: Vec<usize>, s: Vec<f64>) -> Result<Self> {
        let r = s.iter().map(|v| v.max(1.0)).collect();
        Self::new(n, s, r)
    }

    pub fn m(&self) -> usize {
        self.n.len()
    }

    /// Ratios `s_i / n_i`.
    pub fn ratios(&self) -> Vec<f64> {
        self.s.iter().zip(&self.n).map(|(s, &n)| s / n as f64).collect()
    }

    /// Rate predictions are only valid for `s ≤ r`.
    pub fn check_rate_range(&self) -> Result<()> {
        for (i, (s, r)) in self.s.iter().zip(&self.r).enumerate() {
            if s > r {
                return Err(validation(format!(
                    "s_{} = {s} exceeds polynomial exactness r = {r}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Positive level weights `α`; the bivariate `σ` is stored as `(σ, 1/σ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyWeights(Vec<f64>);

impl AnisotropyWeights {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(validation("empty weight vector"));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(validation(format!("weights must be positive, got {alpha:?}")));
        }
        Ok(Self(alpha))
    }

    pub fn from_sigma(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(validation(format!("σ must be positive, got {sigma}")));
        }
        Ok(Self(vec![sigma, 1.0 / sigma]))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `αᵀj`.
    pub fn level_of(&self, j: &[usize]) -> f64 {
        self.0.iter().zip(j).map(|(a, &ji)| a * ji as f64).sum()
    }
}

pub(crate) fn within_budget(level: f64, budget: f64) -> bool {
    level <= budget + LEVEL_TOL * budget.abs().max(1.0)
}

/// `{j ∈ ℕ₀^m : αᵀj ≤ J}` in lexicographic order, plus its surface band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseIndexSet {
    pub budget: f64,
    pub weights: AnisotropyWeights,
    pub indices: Vec<Vec<usize>>,
    /// Indices with `αᵀj ∈ (J − min_i α_i, J]`.
    pub surface: Vec<Vec<usize>>,
}

impl SparseIndexSet {
    pub fn contains(&self, j: &[usize]) -> bool {
        j.len() == self.weights.m() && within_budget(self.weights.level_of(j), self.budget)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Largest level reached in each direction.
    pub fn max_levels(&self) -> Vec<usize> {
        let m = self.weights.m();
        (0..m)
            .map(|i| self.indices.iter().map(|j| j[i]).max().unwrap_or(0))
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!(self.indices)
    }
}

/// Enumerates the sparse index set for weights `α` and real budget `J`.
pub fn index_set(weights: &AnisotropyWeights, budget: f64, m: usize) -> Result<SparseIndexSet> {
    if weights.m() != m {
        return Err(validation(format!("{} weights for {m} subdomains", weights.m())));
    }
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(validation(format!("level budget must be ≥ 0, got {budget}")));
    }
    let alpha = weights.as_slice();
    let mut indices = Vec::new();
    let mut current = Vec::with_capacity(m);
    enumerate(alpha, budget, 0.0, &mut current, &mut indices);
    let band = budget - weights.min();
    let surface = indices
        .iter()
        .filter(|j| weights.level_of(j) > band + LEVEL_TOL * budget.abs().max(1.0))
        .cloned()
        .collect();
    Ok(SparseIndexSet {
        budget,
        weights: weights.clone(),
        indices,
        surface,
    })
}

fn enumerate(alpha: &[f64], budget: f64, used: f64, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let k = current.len();
    if k == alpha.len() {
        out.push(current.clone());
        return;
    }
    let mut j = 0usize;
    while within_budget(used + alpha[k] * j as f64, budget) {
        current.push(j);
        enumerate(alpha, budget, used + alpha[k] * j as f64, current, out);
        current.pop();
        j += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseDim {
    /// `Σ_{j ∈ set} ∏_i dim W_{j_i}`.
    pub exact: u64,
    /// `2^{J max_i n_i/α_i} · J^{P-1}`, `P` the multiplicity of the maximum;
    /// `J` is floored at 1 so the envelope stays positive at `J = 0`.
    pub bound: f64,
}

impl SparseDim {
    pub fn ratio(&self) -> f64 {
        self.exact as f64 / self.bound
    }
}

/// `dim W_j` of a Haar-type MRA on `[0,1]^n`.
pub fn detail_dim(n: usize, j: usize) -> u64 {
    if j == 0 {
        1
    } else {
        (1u64 << (j * n)) - (1u64 << ((j - 1) * n))
    }
}

/// Exact dimension and envelope of the sparse space.
pub fn sparse_dim(set: &SparseIndexSet, profile: &SmoothnessProfile) -> Result<SparseDim> {
    if set.weights.m() != profile.m() {
        return Err(validation("index set and profile disagree on m"));
    }
    let exact = set
        .indices
        .iter()
        .map(|j| {
            j.iter()
                .zip(&profile.n)
                .map(|(&ji, &n)| detail_dim(n, ji))
                .product::<u64>()
        })
        .sum();
    let ratios: Vec<f64> = profile
        .n
        .iter()
        .zip(set.weights.as_slice())
        .map(|(&n, a)| n as f64 / a)
        .collect();
    let (max, count) = extremum(&ratios, f64::max);
    let bound = (set.budget * max).exp2() * set.budget.max(1.0).powi(count as i32 - 1);
    Ok(SparseDim { exact, bound })
}

/// Extreme value of `values` under `pick` and how many entries attain it,
/// ties decided with relative tolerance [`TIE_TOL`].
pub(crate) fn extremum(values: &[f64], pick: fn(f64, f64) -> f64) -> (f64, usize) {
    let best = values.iter().copied().reduce(pick).unwrap_or(f64::NAN);
    let count = values
        .iter()
        .filter(|v| (*v - best).abs() <= TIE_TOL * best.abs().max(f64::MIN_POSITIVE))
        .count();
    (best, count)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaChoices {
    /// `√(n₁/n₂)`: equal degrees of freedom per surface block.
    pub dof: f64,
    /// `√(r₁/r₂)`: equal approximation power.
    pub approx: f64,
    /// `√((n₁+r₁)/(n₂+r₂))`: equilibrated cost-benefit rate.
    pub cost_benefit: f64,
}

pub fn sigma_choices(profile: &SmoothnessProfile) -> Result<SigmaChoices> {
    if profile.m() != 2 {
        return Err(Error::Unsupported(format!(
            "σ choices are defined for two subdomains, got {}",
            profile.m()
        )));
    }
    let (n1, n2) = (profile.n[0] as f64, profile.n[1] as f64);
    let (r1, r2) = (profile.r[0], profile.r[1]);
    Ok(SigmaChoices {
        dof: (n1 / n2).sqrt(),
        approx: (r1 / r2).sqrt(),
        cost_benefit: ((n1 + r1) / (n2 + r2)).sqrt(),
    })
}

/// Sparse projector: zeroes every block outside the index set.
pub fn sparse_project(f: &HierCoeffTensor, set: &SparseIndexSet) -> Result<HierCoeffTensor> {
    if f.subdomains() != set.weights.m() {
        return Err(validation(format!(
            "tensor has {} subdomains, index set {}",
            f.subdomains(),
            set.weights.m()
        )));
    }
    let mut out = f.clone();
    for (j, block) in out.blocks_mut() {
        if !set.contains(j) {
            block.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(out)
}

/// Norm of `f − Q̂ f`: the energy in blocks outside the set.
pub fn projection_error(f: &HierCoeffTensor, set: &SparseIndexSet) -> f64 {
    f.blocks()
        .filter(|(j, _)| !set.contains(j))
        .map(|(_, b)| b.data().iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseRate {
    /// `min_i s_i / α_i`.
    pub exponent: f64,
    /// How often the minimum is attained.
    pub multiplicity: usize,
}

pub fn predicted_sparse_rate(weights: &AnisotropyWeights, profile: &SmoothnessProfile) -> Result<SparseRate> {
    if weights.m() != profile.m() {
        return Err(validation("weights and profile disagree on m"));
    }
    profile.check_rate_range()?;
    let ratios: Vec<f64> = profile.s.iter().zip(weights.as_slice()).map(|(s, a)| s / a).collect();
    let (exponent, multiplicity) = extremum(&ratios, f64::min);
    Ok(SparseRate { exponent, multiplicity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mra::{analyze_product, MraSpec};
    use crate::tensor::DenseTensor;
    use proptest::prelude::*;

    fn brute_force(alpha: &[f64], budget: f64, n: &[usize]) -> (Vec<Vec<usize>>, u64) {
        let m = alpha.len();
        let ext: Vec<usize> = alpha.iter().map(|a| (budget / a).floor() as usize + 2).collect();
        let mut all = Vec::new();
        let mut dim = 0u64;
        let mut idx = vec![0usize; m];
        loop {
            let lvl: f64 = idx.iter().zip(alpha).map(|(&j, a)| j as f64 * a).sum();
            if lvl <= budget + 1e-12 {
                let mut d = 1u64;
                for (&j, &ni) in idx.iter().zip(n) {
                    d *= if j == 0 {
                        1
                    } else {
                        2u64.pow((j * ni) as u32) - 2u64.pow(((j - 1) * ni) as u32)
                    };
                }
                dim += d;
                all.push(idx.clone());
            }
            if !crate::tensor::next_index(&mut idx, &ext) {
                break;
            }
        }
        (all, dim)
    }

    #[test]
    fn worked_index_sets() {
        let s = index_set(&AnisotropyWeights::uniform(2), 0.0, 2).unwrap();
        assert_eq!(s.indices, vec![vec![0, 0]]);

        let w = AnisotropyWeights::new(vec![1.0, 2.0]).unwrap();
        let s = index_set(&w, 2.0, 2).unwrap();
        assert_eq!(s.indices, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![2, 0]]);

        let s = index_set(&AnisotropyWeights::uniform(3), 2.0, 3).unwrap();
        assert_eq!(s.len(), 10);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(AnisotropyWeights::new(vec![1.0, 0.0]).is_err());
        assert!(AnisotropyWeights::new(vec![-1.0, 1.0]).is_err());
        assert!(AnisotropyWeights::from_sigma(0.0).is_err());
        assert!(index_set(&AnisotropyWeights::uniform(2), 1.0, 3).is_err());
    }

    #[test]
    fn sparse_dim_worked_values() {
        let p = SmoothnessProfile::from_smoothness(vec![1, 1], vec![1.0, 1.0]).unwrap();
        let w = AnisotropyWeights::from_sigma(1.0).unwrap();
        let d = sparse_dim(&index_set(&w, 2.0, 2).unwrap(), &p).unwrap();
        assert_eq!(d.exact, 8);
        let d0 = sparse_dim(&index_set(&w, 0.0, 2).unwrap(), &p).unwrap();
        assert_eq!(d0.exact, 1);
    }

    #[test]
    fn balanced_envelope_ratio_is_bounded() {
        let p = SmoothnessProfile::from_smoothness(vec![1, 1], vec![1.0, 1.0]).unwrap();
        let w = AnisotropyWeights::uniform(2);
        let ratios: Vec<f64> = (4..=12)
            .map(|j| sparse_dim(&index_set(&w, j as f64, 2).unwrap(), &p).unwrap().ratio())
            .collect();
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(lo > 0.2 && hi < 1.0, "{ratios:?}");
    }

    #[test]
    fn exact_dims_match_enumeration() {
        let cases: [(&[f64], &[usize]); 5] = [
            (&[1.0, 1.0], &[1, 1]),
            (&[1.0, 2.0], &[1, 1]),
            (&[2.0, 1.0], &[1, 2]),
            (&[1.0, 1.0, 1.0], &[1, 1, 1]),
            (&[0.7, 1.3, 1.0], &[1, 2, 1]),
        ];
        for (alpha, n) in cases {
            let p = SmoothnessProfile::from_smoothness(n.to_vec(), vec![1.0; n.len()]).unwrap();
            let w = AnisotropyWeights::new(alpha.to_vec()).unwrap();
            for budget in 0..=8 {
                let set = index_set(&w, budget as f64, n.len()).unwrap();
                let (all, dim) = brute_force(alpha, budget as f64, n);
                assert_eq!(set.indices, all);
                assert_eq!(sparse_dim(&set, &p).unwrap().exact, dim);
            }
        }
    }

    #[test]
    fn sigma_choice_values() {
        let p = SmoothnessProfile::new(vec![2, 4], vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let c = sigma_choices(&p).unwrap();
        assert!((c.dof - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.approx, 1.0);
        let p = SmoothnessProfile::new(vec![1, 3], vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!((sigma_choices(&p).unwrap().cost_benefit - 0.5f64.sqrt()).abs() < 1e-15);
        let p3 = SmoothnessProfile::from_smoothness(vec![1, 1, 1], vec![1.0; 3]).unwrap();
        assert!(matches!(sigma_choices(&p3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn sparse_rate_values() {
        let p = SmoothnessProfile::from_smoothness(vec![1, 1, 1], vec![1.0, 2.0, 0.5]).unwrap();
        let w = AnisotropyWeights::new(p.s.clone()).unwrap();
        let r = predicted_sparse_rate(&w, &p).unwrap();
        assert_eq!((r.exponent, r.multiplicity), (1.0, 3));

        let p = SmoothnessProfile::from_smoothness(vec![1, 1], vec![1.0, 2.0]).unwrap();
        let r = predicted_sparse_rate(&AnisotropyWeights::uniform(2), &p).unwrap();
        assert_eq!((r.exponent, r.multiplicity), (1.0, 1));

        let p = SmoothnessProfile::new(vec![1, 1, 1], vec![2.0; 3], vec![2.0; 3]).unwrap();
        let w = AnisotropyWeights::new(vec![2.0, 1.0, 2.0]).unwrap();
        let r = predicted_sparse_rate(&w, &p).unwrap();
        assert_eq!((r.exponent, r.multiplicity), (1.0, 2));
    }

    fn random_tensor(levels: &[usize], seed: u64) -> HierCoeffTensor {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let specs: Vec<MraSpec> = levels.iter().map(|&l| MraSpec::haar(1, l).unwrap()).collect();
        let len: usize = levels.iter().map(|l| 1usize << l).product();
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        analyze_product(&x, &specs, levels).unwrap()
    }

    #[test]
    fn projector_keeps_range_and_kills_outside() {
        let f = random_tensor(&[4, 4], 1);
        let set = index_set(&AnisotropyWeights::uniform(2), 3.0, 2).unwrap();
        let p = sparse_project(&f, &set).unwrap();
        assert_eq!(sparse_project(&p, &set).unwrap(), p);
        for (j, b) in p.blocks() {
            if set.contains(j) {
                assert_eq!(b, f.block(j).unwrap());
            }
        }
        let mut single = HierCoeffTensor::new(f.specs().to_vec(), vec![4, 4]).unwrap();
        single
            .set_block(vec![3, 0], DenseTensor::from_vec(&[4, 1], vec![1.0; 4]).unwrap())
            .unwrap();
        let set2 = index_set(&AnisotropyWeights::uniform(2), 2.0, 2).unwrap();
        assert_eq!(sparse_project(&single, &set2).unwrap().norm(), 0.0);
        let err = projection_error(&f, &set);
        let direct = f.to_dense().distance(&p.to_dense()).unwrap();
        assert!((err - direct).abs() < 1e-12);
    }

    #[test]
    fn sigma_form_matches_weight_form() {
        for &sigma in &[0.5, 0.8, 1.0, 1.7, 2.0] {
            let w = AnisotropyWeights::from_sigma(sigma).unwrap();
            let set = index_set(&w, 5.0, 2).unwrap();
            let direct: Vec<Vec<usize>> = (0..40)
                .flat_map(|a| (0..40).map(move |b| vec![a, b]))
                .filter(|j| sigma * j[0] as f64 + j[1] as f64 / sigma <= 5.0 + 1e-12)
                .collect();
            assert_eq!(set.indices, direct);
        }
    }

    proptest! {
        #[test]
        fn index_sets_are_downward_closed(
            alpha in prop::collection::vec(0.3f64..3.0, 2..=3),
            budget in 0.0f64..6.0,
        ) {
            let m = alpha.len();
            let w = AnisotropyWeights::new(alpha).unwrap();
            let set = index_set(&w, budget, m).unwrap();
            for j in &set.indices {
                prop_assert!(w.level_of(j) <= budget + 1e-12);
                for i in 0..m {
                    if j[i] > 0 {
                        let mut lower = j.clone();
                        lower[i] -= 1;
                        prop_assert!(set.indices.contains(&lower));
                    }
                }
            }
            for j in &set.surface {
                prop_assert!(w.level_of(j) > budget - w.min());
            }
        }

        #[test]
        fn projector_is_norm_nonincreasing(seed in 0u64..500, budget in 0.0f64..6.0, sigma in 0.5f64..2.0) {
            let f = random_tensor(&[3, 3], seed);
            let set = index_set(&AnisotropyWeights::from_sigma(sigma).unwrap(), budget, 2).unwrap();
            let p = sparse_project(&f, &set).unwrap();
            prop_assert!(p.norm() <= f.norm() + 1e-14);
            prop_assert_eq!(sparse_project(&p, &set).unwrap(), p);
        }
    }
}
