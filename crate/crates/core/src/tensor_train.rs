//! TT-SVD of coefficient tensors, smoothness-driven rank schedules and the
//! accompanying error and storage accounting.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{shape, validation, Error, Result};
use crate::lowrank::{from_row_slice, numerical_rank, rank_for_tolerance, row_major, sorted_svd, tail_energies};
use crate::mra::{sobolev_weight, HierCoeffTensor};
use crate::sparse_tensor::SmoothnessProfile;
use crate::tensor::{next_index, DenseTensor};

/// Refuse to materialise more entries than this.
pub const FULL_SIZE_LIMIT: usize = 10_000_000;

/// Relative slack of the rank ceiling, absorbing round-off in `ε^{−1/β}`.
const CEIL_SLACK: f64 = 1e-12;

/// Order-3 core `φ_j(α_{j−1}, x_j, α_j)`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTCore {
    pub left_rank: usize,
    pub mode_dim: usize,
    pub right_rank: usize,
    pub data: Vec<f64>,
}

impl TTCore {
    pub fn new(left_rank: usize, mode_dim: usize, right_rank: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != left_rank * mode_dim * right_rank {
            return Err(shape(format!(
                "core {left_rank}×{mode_dim}×{right_rank} needs {} entries, got {}",
                left_rank * mode_dim * right_rank,
                data.len()
            )));
        }
        Ok(Self {
            left_rank,
            mode_dim,
            right_rank,
            data,
        })
    }

    pub fn get(&self, a: usize, x: usize, b: usize) -> f64 {
        self.data[(a * self.mode_dim + x) * self.right_rank + b]
    }

    /// `(left_rank·mode_dim) × right_rank` unfolding.
    pub fn left_unfolding(&self) -> Mat<f64> {
        from_row_slice(self.left_rank * self.mode_dim, self.right_rank, &self.data)
    }

    /// `G(x)`, the `left_rank × right_rank` slice at mode index `x`.
    pub fn slice(&self, x: usize) -> Mat<f64> {
        Mat::from_fn(self.left_rank, self.right_rank, |a, b| self.get(a, x, b))
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Spectrum of one sweep step and the number of terms kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationStep {
    pub rank: usize,
    /// All singular values of the step's unfolding, nonincreasing.
    pub singular_values: Vec<f64>,
    /// The requested rank exceeded the unfolding and was reduced.
    pub clamped: bool,
}

impl TruncationStep {
    pub fn discarded(&self) -> &[f64] {
        &self.singular_values[self.rank.min(self.singular_values.len())..]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTTrain {
    pub cores: Vec<TTCore>,
    pub truncation_log: Vec<TruncationStep>,
    pub schedule: Option<RankSchedule>,
}

impl TTTrain {
    /// Checks rank consistency of adjacent cores and unit boundary ranks.
    pub fn from_cores(cores: Vec<TTCore>) -> Result<Self> {
        if cores.is_empty() {
            return Err(validation("a train needs at least one core"));
        }
        if cores[0].left_rank != 1 || cores[cores.len() - 1].right_rank != 1 {
            return Err(shape("boundary ranks must be 1"));
        }
        for (j, w) in cores.windows(2).enumerate() {
            if w[0].right_rank != w[1].left_rank {
                return Err(shape(format!(
                    "core {} has right rank {} but core {} has left rank {}",
                    j + 1,
                    w[0].right_rank,
                    j + 2,
                    w[1].left_rank
                )));
            }
        }
        Ok(Self {
            cores,
            truncation_log: Vec::new(),
            schedule: None,
        })
    }

    pub fn m(&self) -> usize {
        self.cores.len()
    }

    /// `(1, r_1, …, r_{m−1}, 1)`.
    pub fn ranks(&self) -> Vec<usize> {
        std::iter::once(1)
            .chain(self.cores.iter().map(|c| c.right_rank))
            .collect()
    }

    /// `(r_1, …, r_{m−1})`.
    pub fn inner_ranks(&self) -> Vec<usize> {
        let r = self.ranks();
        r[1..r.len() - 1].to_vec()
    }

    pub fn mode_dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.mode_dim).collect()
    }

    /// Some step kept fewer terms than requested.
    pub fn clamped(&self) -> bool {
        self.truncation_log.iter().any(|s| s.clamped)
    }

    pub fn storage(&self) -> TtStorage {
        tt_storage(&self.inner_ranks(), Some(&self.mode_dims())).expect("consistent train")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSchedule {
    pub eps: f64,
    /// `β_j` for `j = 1..m−1`.
    pub beta: Vec<f64>,
    /// `r_j = ⌈ε^{−1/β_j}⌉`.
    pub ranks: Vec<usize>,
    /// Tail smoothness `t_j = (s_{j+1}, …, s_m)`.
    pub tails: Vec<Vec<f64>>,
}

/// `β_1 = s_1/n_1 + min_{i≥2} s_i/n_i`, `β_j = min_{i>j} s_i/n_i` and
/// `r_j = ⌈ε^{−1/β_j}⌉`.
pub fn rank_schedule(eps: f64, profile: &SmoothnessProfile) -> Result<RankSchedule> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(validation(format!("ε must lie in (0, 1), got {eps}")));
    }
    if profile.s.iter().any(|&s| s <= 0.0) {
        return Err(validation("rank schedule needs all s_i > 0"));
    }
    let m = profile.m();
    let q = profile.ratios();
    let tail_min = |j: usize| q[j..].iter().copied().fold(f64::INFINITY, f64::min);
    let beta: Vec<f64> = (1..m)
        .map(|j| if j == 1 { q[0] + tail_min(1) } else { tail_min(j) })
        .collect();
    let ranks = beta.iter().map(|b| schedule_rank(eps, *b)).collect();
    let tails = (1..m).map(|j| profile.s[j..].to_vec()).collect();
    Ok(RankSchedule {
        eps,
        beta,
        ranks,
        tails,
    })
}

fn schedule_rank(eps: f64, beta: f64) -> usize {
    let x = eps.powf(-1.0 / beta);
    ((x * (1.0 - CEIL_SLACK)).ceil() as usize).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TtStorage {
    /// `r_1 + Σ_{j=2}^{m−1} r_{j−1} r_j`.
    pub continuous: u64,
    /// `Σ_j r_{j−1} N_j r_j`.
    pub discrete: Option<u64>,
}

/// Storage counts for inner ranks `(r_1, …, r_{m−1})`.
pub fn tt_storage(ranks: &[usize], mode_dims: Option<&[usize]>) -> Result<TtStorage> {
    if ranks.is_empty() || ranks.contains(&0) {
        return Err(validation("inner ranks must be nonempty and positive"));
    }
    let continuous = ranks[0] as u64 + ranks.windows(2).map(|w| (w[0] * w[1]) as u64).sum::<u64>();
    let discrete = match mode_dims {
        None => None,
        Some(n) => {
            if n.len() != ranks.len() + 1 {
                return Err(shape(format!("{} mode dims for {} inner ranks", n.len(), ranks.len())));
            }
            let full: Vec<usize> = std::iter::once(1)
                .chain(ranks.iter().copied())
                .chain(std::iter::once(1))
                .collect();
            Some(
                n.iter()
                    .enumerate()
                    .map(|(j, &nj)| (full[j] * nj * full[j + 1]) as u64)
                    .sum(),
            )
        }
    };
    Ok(TtStorage { continuous, discrete })
}

#[derive(Clone, Debug, PartialEq)]
pub enum TtPolicy {
    /// Keep the numerical rank of every unfolding.
    Full,
    /// Inner ranks `(r_1, …, r_{m−1})`, clamped to the unfolding sizes.
    FixedRanks(Vec<usize>),
    Schedule(RankSchedule),
    /// Smallest rank with discarded energy `≤ ε²` in each step.
    StepTolerance(f64),
    /// `ε/√(m−1)` per step, so the total bound is `ε`.
    TotalTolerance(f64),
}

impl TtPolicy {
    fn step_rank(&self, step: usize, m: usize, sv: &[f64], rows: usize, cols: usize) -> Result<(usize, bool)> {
        let limit = rows.min(cols);
        let requested = match self {
            TtPolicy::Full => return Ok((numerical_rank(sv, rows, cols), false)),
            TtPolicy::FixedRanks(r) => r[step],
            TtPolicy::Schedule(s) => s.ranks[step],
            TtPolicy::StepTolerance(eps) => return Ok((rank_for_tolerance(&tail_energies(sv), *eps), false)),
            TtPolicy::TotalTolerance(eps) => {
                let per = eps / ((m - 1) as f64).sqrt();
                return Ok((rank_for_tolerance(&tail_energies(sv), per), false));
            }
        };
        Ok((requested.min(limit), requested > limit))
    }

    fn validate(&self, m: usize) -> Result<()> {
        let check_len = |len: usize| {
            if len != m - 1 {
                Err(validation(format!("{len} ranks for {} TT steps", m - 1)))
            } else {
                Ok(())
            }
        };
        match self {
            TtPolicy::Full => Ok(()),
            TtPolicy::FixedRanks(r) => {
                check_len(r.len())?;
                if r.contains(&0) {
                    return Err(validation("fixed ranks must be positive"));
                }
                Ok(())
            }
            TtPolicy::Schedule(s) => check_len(s.ranks.len()),
            TtPolicy::StepTolerance(e) | TtPolicy::TotalTolerance(e) => {
                if *e >= 0.0 && e.is_finite() {
                    Ok(())
                } else {
                    Err(validation(format!("tolerance must be finite and ≥ 0, got {e}")))
                }
            }
        }
    }
}

/// Remainder `g_j` after step `j`: `rank × (N_{j+1}⋯N_m)`, row-major.
struct Remainder {
    rank: usize,
    data: Vec<f64>,
}

fn sweep(x: &DenseTensor, policy: &TtPolicy, mut on_remainder: impl FnMut(&Remainder)) -> Result<TTTrain> {
    let dims = x.shape().to_vec();
    let m = dims.len();
    if m < 2 {
        return Err(validation(format!("TT-SVD needs m ≥ 2, got {m}")));
    }
    if dims.contains(&0) {
        return Err(validation("mode dims must be positive"));
    }
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(validation("tensor has non-finite entries"));
    }
    policy.validate(m)?;
    let mut cores = Vec::with_capacity(m);
    let mut log = Vec::with_capacity(m - 1);
    let mut rem = x.data().to_vec();
    let mut left = 1usize;
    for (step, &nj) in dims[..m - 1].iter().enumerate() {
        let rows = left * nj;
        let cols = rem.len() / rows;
        let a = from_row_slice(rows, cols, &rem);
        let svd = sorted_svd(&a)?;
        let (mut rank, clamped) = policy.step_rank(step, m, &svd.singular_values, rows, cols)?;
        rank = rank.max(1);
        let zero = svd.singular_values[0] == 0.0;
        let u = Mat::from_fn(rows, rank, |i, r| if zero { 0.0 } else { svd.u[(i, r)] });
        // Σ_r V_rᵀ, the singular values absorbed to the right.
        let sigma = &svd.singular_values;
        let vt = Mat::from_fn(rank, cols, |r, c| if zero { 0.0 } else { sigma[r] * svd.v[(c, r)] });
        cores.push(TTCore::new(left, nj, rank, row_major(&u))?);
        log.push(TruncationStep {
            rank,
            singular_values: svd.singular_values,
            clamped,
        });
        rem = row_major(&vt);
        on_remainder(&Remainder {
            rank,
            data: rem.clone(),
        });
        left = rank;
    }
    cores.push(TTCore::new(left, dims[m - 1], 1, rem)?);
    let mut train = TTTrain::from_cores(cores)?;
    train.truncation_log = log;
    if let TtPolicy::Schedule(s) = policy {
        train.schedule = Some(s.clone());
    }
    Ok(train)
}

/// Left-to-right TT-SVD; singular values are absorbed into the remainder.
pub fn tt_svd(x: &DenseTensor, policy: &TtPolicy) -> Result<TTTrain> {
    sweep(x, policy, |_| {})
}

/// TT-SVD of the level-ordered dense coefficient tensor.
pub fn tt_svd_coeffs(f: &HierCoeffTensor, policy: &TtPolicy) -> Result<TTTrain> {
    tt_svd(&f.to_dense(), policy)
}

/// `√(Σ_j Σ_{α > r_j} σ_j(α)²)`.
pub fn tt_error_bound(log: &[TruncationStep]) -> f64 {
    log.iter()
        .flat_map(|s| s.discarded())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Contracts the train into a dense tensor.
pub fn tt_to_full(train: &TTTrain) -> Result<DenseTensor> {
    let dims = train.mode_dims();
    let total = dims.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
    match total {
        Some(t) if t <= FULL_SIZE_LIMIT => {}
        _ => {
            return Err(Error::SizeGuard {
                requested: total.unwrap_or(usize::MAX),
                limit: FULL_SIZE_LIMIT,
            })
        }
    }
    // acc: (N_1⋯N_j) × r_j
    let mut acc = Mat::from_fn(1, 1, |_, _| 1.0);
    for core in &train.cores {
        let g = from_row_slice(core.left_rank, core.mode_dim * core.right_rank, &core.data);
        let prod = &acc * &g;
        acc = from_row_slice(prod.nrows() * core.mode_dim, core.right_rank, &row_major(&prod));
    }
    DenseTensor::from_vec(&dims, row_major(&acc))
}

/// Norm via transfer matrices `M_j = Σ_x G_j(x)ᵀ M_{j−1} G_j(x)`.
pub fn tt_norm(train: &TTTrain) -> f64 {
    let mut m = Mat::from_fn(1, 1, |_, _| 1.0);
    for core in &train.cores {
        let mut next = Mat::<f64>::zeros(core.right_rank, core.right_rank);
        for x in 0..core.mode_dim {
            let g = core.slice(x);
            next += g.transpose() * &m * &g;
        }
        m = next;
    }
    m[(0, 0)].max(0.0).sqrt()
}

/// Eigenvalues of the Gram matrix `A Aᵀ` (or `AᵀA`, whichever is smaller),
/// nonincreasing. They are the squared singular values of `A`.
pub fn gram_eigenvalues(a: &Mat<f64>) -> Result<Vec<f64>> {
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    let mut ev = gram
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numeric(format!("Gram eigendecomposition failed: {e:?}")))?;
    ev.sort_by(|x, y| y.total_cmp(x));
    Ok(ev)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityStep {
    pub step: usize,
    pub rank: usize,
    /// `‖g_j‖_{[H^{t_j}]^{r_j}}`.
    pub norm: f64,
    /// `‖g_j‖_{t_j} / ‖f‖_s`.
    pub chain_ratio: f64,
    /// `‖g_j‖_{t_j} / ‖g_{j−1}‖_{L²⊗t_j}`.
    pub step_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub f_norm: f64,
    pub steps: Vec<RegularityStep>,
}

impl RegularityReport {
    pub fn max_chain_ratio(&self) -> f64 {
        self.steps.iter().map(|s| s.chain_ratio).fold(0.0, f64::max)
    }

    pub fn chain_nonincreasing(&self, tol: f64) -> bool {
        self.steps
            .windows(2)
            .all(|w| w[1].chain_ratio <= w[0].chain_ratio + tol)
    }
}

/// Mixed Sobolev norms of the TT remainders `g_j` relative to `‖f‖_s`.
/// Each stack member `g_j(α_j, ·)` is measured in the tail smoothness
/// `t_j = (s_{j+1}, …, s_m)`.
pub fn regularity_check(f: &HierCoeffTensor, s: &[f64], policy: &TtPolicy) -> Result<RegularityReport> {
    let m = f.subdomains();
    if s.len() != m {
        return Err(shape(format!("{} smoothness values for {m} subdomains", s.len())));
    }
    let f_norm = f.discrete_sobolev_norm(s)?;
    if f_norm == 0.0 {
        return Err(validation("regularity ratios are undefined for f = 0"));
    }
    let dense = f.to_dense();
    let position_levels: Vec<Vec<usize>> = f
        .specs()
        .iter()
        .zip(f.levels())
        .map(|(spec, &l)| spec.position_levels(l))
        .collect();
    // Weighted norm of a row-major `stack × N_{first}⋯N_m` array with weights on
    // the trailing modes `first..m` evaluated at smoothness `s[from..]` shifted
    // to start at mode `first`, zero smoothness for modes before `from`.
    let weighted = |data: &[f64], first: usize, from: usize| -> f64 {
        let tail_shape: Vec<usize> = position_levels[first..].iter().map(Vec::len).collect();
        let tail_len: usize = tail_shape.iter().product();
        let t: Vec<f64> = (first..m).map(|i| if i >= from { s[i] } else { 0.0 }).collect();
        let mut weights = Vec::with_capacity(tail_len);
        let mut idx = vec![0usize; tail_shape.len()];
        loop {
            let j: Vec<usize> = idx
                .iter()
                .enumerate()
                .map(|(k, &p)| position_levels[first + k][p])
                .collect();
            let w = sobolev_weight(&j, &t);
            weights.push(w * w);
            if !next_index(&mut idx, &tail_shape) {
                break;
            }
        }
        data.chunks(tail_len)
            .map(|row| row.iter().zip(&weights).map(|(v, w)| w * v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    };
    let mut steps = Vec::with_capacity(m - 1);
    let mut prev = dense.data().to_vec();
    let mut step = 0usize;
    sweep(&dense, policy, |rem| {
        step += 1;
        let norm = weighted(&rem.data, step, step);
        // g_{j−1} measured with weights only on modes j+1..m.
        let before = weighted(&prev, step - 1, step);
        steps.push(RegularityStep {
            step,
            rank: rem.rank,
            norm,
            chain_ratio: norm / f_norm,
            step_ratio: if before > 0.0 { norm / before } else { 0.0 },
        });
        prev = rem.data.clone();
    })?;
    Ok(RegularityReport { f_norm, steps })
}
