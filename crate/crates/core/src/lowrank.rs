//! Bivariate splits, truncated SVD and the rank/rate calculators for
//! functions of mixed smoothness.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::mra::HierCoeffTensor;
use crate::sparse_tensor::{extremum, index_set, AnisotropyWeights, SmoothnessProfile, LEVEL_TOL};
use crate::tensor::DenseTensor;

/// Separation of subdomains `1..=ℓ` (rows) from `ℓ+1..=m` (columns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitLayout {
    pub profile: SmoothnessProfile,
    pub split: usize,
}

impl SplitLayout {
    pub fn new(profile: SmoothnessProfile, split: usize) -> Result<Self> {
        if split == 0 || split >= profile.m() {
            return Err(validation(format!(
                "split position {split} must satisfy 1 ≤ ℓ < {}",
                profile.m()
            )));
        }
        Ok(Self { profile, split })
    }
}

/// A coefficient tensor unfolded into a matrix, with the mode sizes needed
/// to fold it back.
#[derive(Clone, Debug, PartialEq)]
pub struct Matricization {
    pub matrix: Mat<f64>,
    pub row_modes: Vec<usize>,
    pub col_modes: Vec<usize>,
}

impl Matricization {
    /// Unfolds a dense tensor: rows are the row-major combined indices of the
    /// first `split` modes.
    pub fn of_dense(t: &DenseTensor, split: usize) -> Result<Self> {
        if split == 0 || split >= t.ndim() {
            return Err(validation(format!(
                "cannot split a {}-way tensor after mode {split}",
                t.ndim()
            )));
        }
        let row_modes = t.shape()[..split].to_vec();
        let col_modes = t.shape()[split..].to_vec();
        let rows = row_modes.iter().product();
        let cols = col_modes.iter().product();
        Ok(Self {
            matrix: from_row_slice(rows, cols, t.data()),
            row_modes,
            col_modes,
        })
    }

    pub fn to_dense(&self) -> DenseTensor {
        let shape: Vec<usize> = self.row_modes.iter().chain(&self.col_modes).copied().collect();
        DenseTensor::from_vec(&shape, row_major(&self.matrix)).expect("matricization shape")
    }
}

pub(crate) fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Mat<f64> {
    debug_assert_eq!(data.len(), rows * cols);
    Mat::from_fn(rows, cols, |i, j| data[i * cols + j])
}

pub(crate) fn row_major(m: &Mat<f64>) -> Vec<f64> {
    let cols = m.ncols();
    (0..m.nrows() * cols).map(|k| m[(k / cols, k % cols)]).collect()
}

/// Unfolds wavelet coefficients along a split.
pub fn matricize(f: &HierCoeffTensor, layout: &SplitLayout) -> Result<Matricization> {
    if f.subdomains() != layout.profile.m() {
        return Err(validation(format!(
            "tensor has {} subdomains, layout {}",
            f.subdomains(),
            layout.profile.m()
        )));
    }
    Matricization::of_dense(&f.to_dense(), layout.split)
}

/// Folds a matricization back into block form.
pub fn unmatricize(m: &Matricization, like: &HierCoeffTensor) -> Result<HierCoeffTensor> {
    HierCoeffTensor::from_dense(like.specs().to_vec(), like.levels().to_vec(), &m.to_dense())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TruncationPolicy {
    /// Keep at most this many terms.
    Rank(usize),
    /// Smallest rank with `√(tail energy) ≤ ε`.
    Tolerance(f64),
}

/// Thin SVD with singular values sorted nonincreasing and the first nonzero
/// entry of every left singular vector positive.
#[derive(Clone, Debug)]
pub struct SortedSvd {
    pub u: Mat<f64>,
    pub singular_values: Vec<f64>,
    pub v: Mat<f64>,
}

pub fn sorted_svd(a: &Mat<f64>) -> Result<SortedSvd> {
    let (rows, cols) = (a.nrows(), a.ncols());
    for j in 0..cols {
        if a.col(j).iter().any(|x| !x.is_finite()) {
            return Err(validation("matrix has non-finite entries"));
        }
    }
    let k = rows.min(cols);
    if k == 0 {
        return Ok(SortedSvd {
            u: Mat::zeros(rows, 0),
            singular_values: Vec::new(),
            v: Mat::zeros(cols, 0),
        });
    }
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Numeric(format!("SVD of {rows}×{cols} failed: {e:?}")))?;
    let raw: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| raw[j].total_cmp(&raw[i]).then(i.cmp(&j)));
    let (u_raw, v_raw) = (svd.U(), svd.V());
    let signs: Vec<f64> = order
        .iter()
        .map(|&src| {
            u_raw
                .col(src)
                .iter()
                .find(|x| x.abs() > 1e-300)
                .map_or(1.0, |x| x.signum())
        })
        .collect();
    Ok(SortedSvd {
        u: Mat::from_fn(rows, k, |i, c| signs[c] * u_raw[(i, order[c])]),
        singular_values: order.iter().map(|&i| raw[i]).collect(),
        v: Mat::from_fn(cols, k, |i, c| signs[c] * v_raw[(i, order[c])]),
    })
}

/// Number of singular values above the usual rank threshold.
pub fn numerical_rank(singular_values: &[f64], rows: usize, cols: usize) -> usize {
    let Some(&top) = singular_values.first() else {
        return 0;
    };
    let tol = rows.max(cols) as f64 * f64::EPSILON * top;
    singular_values.iter().filter(|&&s| s > tol).count()
}

/// Squared tail sums: `tails[R] = Σ_{r > R} σ_r²` for `R = 0..=len`.
pub fn tail_energies(singular_values: &[f64]) -> Vec<f64> {
    let mut tails = vec![0.0; singular_values.len() + 1];
    for r in (0..singular_values.len()).rev() {
        tails[r] = tails[r + 1] + singular_values[r] * singular_values[r];
    }
    tails
}

/// Smallest `R` with `√tails[R] ≤ eps`.
pub(crate) fn rank_for_tolerance(tails: &[f64], eps: f64) -> usize {
    tails.iter().position(|&t| t.sqrt() <= eps).unwrap_or(tails.len() - 1)
}

/// `f_R = Σ_{r ≤ R} σ_r g_r^{(1)} ⊗ g_r^{(2)}` with the full spectrum kept
/// for error accounting.
#[derive(Clone, Debug)]
pub struct SvdTruncation {
    pub rank: usize,
    /// Full spectrum, nonincreasing.
    pub singular_values: Vec<f64>,
    /// Left factors `g_r^{(1)}` as columns (rows × rank).
    pub left: Mat<f64>,
    /// Right factors `g_r^{(2)}` as columns (cols × rank).
    pub right: Mat<f64>,
    /// `Σ_{r > R} σ_r²`.
    pub tail_energy: f64,
}

impl SvdTruncation {
    pub fn kept(&self) -> &[f64] {
        &self.singular_values[..self.rank]
    }

    pub fn discarded(&self) -> &[f64] {
        &self.singular_values[self.rank..]
    }

    /// `U_R Σ_R V_Rᵀ`.
    pub fn reconstruct(&self) -> Mat<f64> {
        let kept = self.kept();
        let scaled = Mat::from_fn(self.left.nrows(), self.rank, |i, r| self.left[(i, r)] * kept[r]);
        &scaled * self.right.transpose()
    }

    /// Rank-`R` error for every `R`: `√(Σ_{r>R} σ_r²)`.
    pub fn error_curve(&self) -> Vec<f64> {
        tail_energies(&self.singular_values)
            .into_iter()
            .map(f64::sqrt)
            .collect()
    }
}

pub fn truncated_svd(a: &Mat<f64>, policy: TruncationPolicy) -> Result<SvdTruncation> {
    let svd = sorted_svd(a)?;
    let tails = tail_energies(&svd.singular_values);
    let rank = match policy {
        TruncationPolicy::Rank(r) => r.min(numerical_rank(&svd.singular_values, a.nrows(), a.ncols())),
        TruncationPolicy::Tolerance(eps) => {
            if !(eps >= 0.0) {
                return Err(validation(format!("tolerance must be ≥ 0, got {eps}")));
            }
            rank_for_tolerance(&tails, eps)
        }
    };
    Ok(SvdTruncation {
        rank,
        left: svd.u.subcols(0, rank).to_owned(),
        right: svd.v.subcols(0, rank).to_owned(),
        tail_energy: tails[rank],
        singular_values: svd.singular_values,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BivariateRankBound {
    /// `R_J^σ = 2^{J n₁n₂/(n₁/σ + σn₂)}`.
    pub closed: f64,
    /// `Σ min{2^{j₁n₁}, 2^{j₂n₂}}` over the surface band.
    pub exact: u64,
    /// Equilibrium levels `(j₁*, j₂*)`.
    pub crossover: (f64, f64),
}

pub fn rank_bound_bivariate(budget: f64, sigma: f64, n: (usize, usize)) -> Result<BivariateRankBound> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(validation(format!("σ must be positive, got {sigma}")));
    }
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(validation(format!("level budget must be ≥ 0, got {budget}")));
    }
    let (n1, n2) = (n.0 as f64, n.1 as f64);
    let denom = n1 / sigma + sigma * n2;
    let closed = (budget * n1 * n2 / denom).exp2();
    let crossover = (budget * n2 / denom, budget * n1 / denom);
    let tol = LEVEL_TOL * budget.max(1.0);
    let width = sigma.min(1.0 / sigma);
    let mut exact = 0u64;
    let mut j1 = 0usize;
    while sigma * j1 as f64 <= budget + tol {
        let mut j2 = 0usize;
        loop {
            let lvl = sigma * j1 as f64 + j2 as f64 / sigma;
            if lvl > budget + tol {
                break;
            }
            if lvl > budget - width + tol {
                exact += (1u64 << (j1 * n.0)).min(1u64 << (j2 * n.1));
            }
            j2 += 1;
        }
        j1 += 1;
    }
    Ok(BivariateRankBound {
        closed,
        exact,
        crossover,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaGeneral {
    pub beta: f64,
    /// `s₁/σ = s₂σ`: the rank estimate carries an extra `√(log R)`.
    pub balanced: bool,
}

fn require_bivariate(profile: &SmoothnessProfile) -> Result<()> {
    if profile.m() != 2 {
        return Err(Error::Unsupported(format!(
            "bivariate formula needs m = 2, got {}",
            profile.m()
        )));
    }
    Ok(())
}

/// `β = (n₁/σ + σn₂)/(n₁n₂) · min{s₁/σ, s₂σ}`.
pub fn beta_general(sigma: f64, profile: &SmoothnessProfile) -> Result<BetaGeneral> {
    require_bivariate(profile)?;
    if !(sigma > 0.0) {
        return Err(validation(format!("σ must be positive, got {sigma}")));
    }
    let (n1, n2) = (profile.n[0] as f64, profile.n[1] as f64);
    let (s1, s2) = (profile.s[0], profile.s[1]);
    let (a, b) = (s1 / sigma, s2 * sigma);
    Ok(BetaGeneral {
        beta: (n1 / sigma + sigma * n2) / (n1 * n2) * a.min(b),
        balanced: (a - b).abs() <= crate::sparse_tensor::TIE_TOL * a.abs().max(b.abs()),
    })
}

/// `σ = √(s₁/s₂)`, which balances the two terms of the rank rate.
pub fn optimal_sigma(s1: f64, s2: f64) -> Result<f64> {
    if !(s1 > 0.0 && s2 > 0.0) {
        return Err(validation(format!("smoothness must be positive, got ({s1}, {s2})")));
    }
    Ok((s1 / s2).sqrt())
}

/// `s₁/n₁ + s₂/n₂`.
pub fn beta_mixed(profile: &SmoothnessProfile) -> Result<f64> {
    require_bivariate(profile)?;
    Ok(profile.ratios().iter().sum())
}

/// `max{s₁/n₁, s₂/n₂}`, the rate available under isotropic smoothness only.
pub fn beta_isotropic(profile: &SmoothnessProfile) -> Result<f64> {
    require_bivariate(profile)?;
    Ok(profile.ratios().into_iter().fold(f64::MIN, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    pub beta: f64,
    pub p1: usize,
    pub p2: usize,
    /// `(m−1)/2 + β·max{P₁,P₂} − 1`, the power of `log R`.
    pub log_exponent: f64,
}

/// `β = min_{i≤ℓ} s_i/n_i + min_{i>ℓ} s_i/n_i` with tie multiplicities.
pub fn beta_split(layout: &SplitLayout) -> Result<RatePrediction> {
    let p = &layout.profile;
    if p.s.iter().any(|&s| s <= 0.0) {
        return Err(validation("β_split needs all s_i > 0"));
    }
    let ratios = p.ratios();
    let (lo, p1) = extremum(&ratios[..layout.split], f64::min);
    let (hi, p2) = extremum(&ratios[layout.split..], f64::min);
    let beta = lo + hi;
    Ok(RatePrediction {
        beta,
        p1,
        p2,
        log_exponent: (p.m() as f64 - 1.0) / 2.0 + beta * p1.max(p2) as f64 - 1.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRankBound {
    pub exact: u64,
    /// `J^{max{P₁,P₂}−1} 2^{J m̲m̄/(m̲+m̄)}`, `J` floored at 1.
    pub closed: f64,
    /// `max_{i≤ℓ} n_i/α_i`.
    pub m_low: f64,
    /// `max_{i>ℓ} n_i/α_i`.
    pub m_high: f64,
    pub p1: usize,
    pub p2: usize,
}

/// Rank needed to separate a function of the sparse space along `layout`.
pub fn rank_bound_split(budget: f64, weights: &AnisotropyWeights, layout: &SplitLayout) -> Result<SplitRankBound> {
    let m = layout.profile.m();
    let set = index_set(weights, budget, m)?;
    let n = &layout.profile.n;
    let l = layout.split;
    let exact = set
        .surface
        .iter()
        .map(|j| {
            let row: usize = (0..l).map(|i| j[i] * n[i]).sum();
            let col: usize = (l..m).map(|i| j[i] * n[i]).sum();
            1u64 << row.min(col)
        })
        .sum();
    let q: Vec<f64> = n.iter().zip(weights.as_slice()).map(|(&ni, a)| ni as f64 / a).collect();
    let (m_low, p1) = extremum(&q[..l], f64::max);
    let (m_high, p2) = extremum(&q[l..], f64::max);
    let closed = budget.max(1.0).powi(p1.max(p2) as i32 - 1) * (budget * m_low * m_high / (m_low + m_high)).exp2();
    Ok(SplitRankBound {
        exact,
        closed,
        m_low,
        m_high,
        p1,
        p2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DofEstimates {
    pub svd_exponent: f64,
    pub sparse_exponent: f64,
    /// `ε^{svd_exponent}`.
    pub svd: f64,
    /// `ε^{sparse_exponent}`.
    pub sparse: f64,
}

/// Degrees of freedom of the fully discrete SVD and of the sparse space to
/// reach accuracy `ε`, as powers of `ε`.
pub fn dof_estimates(eps: f64, profile: &SmoothnessProfile) -> Result<DofEstimates> {
    require_bivariate(profile)?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(validation(format!("ε must lie in (0, 1], got {eps}")));
    }
    if profile.s.iter().any(|&s| s <= 0.0) {
        return Err(validation("dof estimates need s_i > 0"));
    }
    let (n1, n2) = (profile.n[0] as f64, profile.n[1] as f64);
    let (s1, s2) = (profile.s[0], profile.s[1]);
    let single = (n1 / s1.min(profile.r[0])).max(n2 / s2.min(profile.r[1]));
    let svd_exponent = -(n1 * n2 / (s1 * n2 + s2 * n1) + single);
    let sparse_exponent = -single;
    Ok(DofEstimates {
        svd_exponent,
        sparse_exponent,
        svd: eps.powf(svd_exponent),
        sparse: eps.powf(sparse_exponent),
    })
}
