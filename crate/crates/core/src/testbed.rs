//! Oracle functions with known singular-value structure, brute-force
//! references and decay-exponent fitting.

use std::f64::consts::PI;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::lowrank::{from_row_slice, row_major, sorted_svd, tail_energies, Matricization};
use crate::mra::{analyze_product, cell_values, single_scale_from_averages, CellRule, HierCoeffTensor, MraSpec};
use crate::sparse_tensor::{index_set, projection_error, sparse_dim, AnisotropyWeights, SmoothnessProfile};
use crate::tensor::{next_index, DenseTensor};

/// Largest sample matrix side accepted by [`dense_svd_reference`].
pub const REFERENCE_SIDE_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MaternNu {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl MaternNu {
    pub fn value(self) -> f64 {
        match self {
            MaternNu::Half => 0.5,
            MaternNu::ThreeHalves => 1.5,
            MaternNu::FiveHalves => 2.5,
        }
    }

    /// `k_ν(d)` with unit correlation length.
    pub fn kernel(self, d: f64) -> f64 {
        let d = d.abs();
        match self {
            MaternNu::Half => (-d).exp(),
            MaternNu::ThreeHalves => {
                let a = 3f64.sqrt() * d;
                (1.0 + a) * (-a).exp()
            }
            MaternNu::FiveHalves => {
                let a = 5f64.sqrt() * d;
                (1.0 + a + a * a / 3.0) * (-a).exp()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OracleFunction {
    /// `Σ_k c_k √2 sin(kπx) √2 sin(kπy)`.
    SeparableSum { coeffs: Vec<f64> },
    /// `k_ν(x − y)` on `[0,1]²`.
    Matern { nu: MaternNu },
    /// `exp(−|x − y|^γ)`.
    IsotropicKink { gamma: f64 },
    /// `Σ_k c_k ∏_i √2 sin(k_i π x_i)` on `[0,1]^m`, `k ∈ {1..K}^m`.
    MixedSmoothSynthetic {
        s: Vec<f64>,
        delta: f64,
        coeffs: DenseTensor,
    },
}

fn sine(k: usize, x: f64) -> f64 {
    std::f64::consts::SQRT_2 * (k as f64 * PI * x).sin()
}

impl OracleFunction {
    /// Number of variables.
    pub fn arity(&self) -> usize {
        match self {
            OracleFunction::MixedSmoothSynthetic { coeffs, .. } => coeffs.ndim(),
            _ => 2,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            OracleFunction::SeparableSum { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * sine(k + 1, x[0]) * sine(k + 1, x[1]))
                .sum(),
            OracleFunction::Matern { nu } => nu.kernel(x[0] - x[1]),
            OracleFunction::IsotropicKink { gamma } => (-(x[0] - x[1]).abs().powf(*gamma)).exp(),
            OracleFunction::MixedSmoothSynthetic { coeffs, .. } => {
                let mut idx = vec![0usize; coeffs.ndim()];
                let mut total = 0.0;
                for &c in coeffs.data() {
                    total += c * idx.iter().zip(x).map(|(&k, &xi)| sine(k + 1, xi)).product::<f64>();
                    next_index(&mut idx, coeffs.shape());
                }
                total
            }
        }
    }

    /// Exact singular values when known in closed form.
    pub fn exact_singular_values(&self) -> Option<&[f64]> {
        match self {
            OracleFunction::SeparableSum { coeffs } => Some(coeffs),
            _ => None,
        }
    }

    /// Midpoint samples on `2^{levels[i]}` points per variable, row-major.
    pub fn sample(&self, levels: &[usize]) -> Result<DenseTensor> {
        if levels.len() != self.arity() {
            return Err(validation(format!(
                "{} levels for a function of {} variables",
                levels.len(),
                self.arity()
            )));
        }
        let shape: Vec<usize> = levels.iter().map(|&l| 1usize << l).collect();
        let grids: Vec<Vec<f64>> = shape
            .iter()
            .map(|&n| (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect())
            .collect();
        if let OracleFunction::MixedSmoothSynthetic { coeffs, .. } = self {
            // Mode products with the sampled sine bases.
            let mut t = coeffs.clone();
            for (axis, grid) in grids.iter().enumerate() {
                let basis: Vec<Vec<f64>> = grid
                    .iter()
                    .map(|&x| (1..=coeffs.shape()[axis]).map(|k| sine(k, x)).collect())
                    .collect();
                t = mode_product(&t, axis, &basis);
            }
            return Ok(t);
        }
        if let OracleFunction::SeparableSum { coeffs } = self {
            // S_0 diag(c) S_1ᵀ with the sampled sine bases.
            let (g0, g1) = (&grids[0], &grids[1]);
            let left = Mat::from_fn(g0.len(), coeffs.len(), |i, k| coeffs[k] * sine(k + 1, g0[i]));
            let right = Mat::from_fn(coeffs.len(), g1.len(), |k, j| sine(k + 1, g1[j]));
            let prod = left * right;
            return DenseTensor::from_vec(&shape, row_major(&prod));
        }
        let mut out = DenseTensor::zeros(&shape);
        let mut idx = vec![0usize; shape.len()];
        let mut point = vec![0.0; shape.len()];
        for v in out.data_mut() {
            for (d, &i) in idx.iter().enumerate() {
                point[d] = grids[d][i];
            }
            *v = self.eval(&point);
            next_index(&mut idx, &shape);
        }
        Ok(out)
    }
}

/// `t ×_axis B` with `B[new][old]`.
fn mode_product(t: &DenseTensor, axis: usize, b: &[Vec<f64>]) -> DenseTensor {
    let shape = t.shape();
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let old = shape[axis];
    let mut new_shape = shape.to_vec();
    new_shape[axis] = b.len();
    let mut out = DenseTensor::zeros(&new_shape);
    let src = t.data();
    let dst = out.data_mut();
    for o in 0..outer {
        for (p, row) in b.iter().enumerate() {
            let base = (o * b.len() + p) * inner;
            for (q, &w) in row.iter().enumerate().take(old) {
                let from = (o * old + q) * inner;
                for i in 0..inner {
                    dst[base + i] += w * src[from + i];
                }
            }
        }
    }
    out
}

/// `c_k = k^{−p}` for `k = 1..=count`.
pub fn power_coefficients(p: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| (k as f64).powf(-p)).collect()
}

pub fn separable_oracle(coeffs: Vec<f64>) -> Result<OracleFunction> {
    if coeffs.is_empty() {
        return Err(validation("separable oracle needs at least one coefficient"));
    }
    if coeffs.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(validation("coefficients must be positive"));
    }
    if coeffs.windows(2).any(|w| w[1] > w[0]) {
        return Err(validation("coefficients must be nonincreasing"));
    }
    Ok(OracleFunction::SeparableSum { coeffs })
}

pub fn matern_kernel(nu: f64) -> Result<OracleFunction> {
    let nu = match nu {
        0.5 => MaternNu::Half,
        1.5 => MaternNu::ThreeHalves,
        2.5 => MaternNu::FiveHalves,
        v => {
            return Err(validation(format!(
                "Matérn ν = {v} has no closed form here; use 1/2, 3/2 or 5/2"
            )))
        }
    };
    Ok(OracleFunction::Matern { nu })
}

pub fn isotropic_kink(gamma: f64) -> Result<OracleFunction> {
    if !(gamma > 0.0 && gamma <= 2.0) {
        return Err(validation(format!("kink exponent must lie in (0, 2], got {gamma}")));
    }
    Ok(OracleFunction::IsotropicKink { gamma })
}

/// Unit-norm sine series with `c_k ∝ ∏_i k_i^{−(s_i + 1/2 + δ)} u_k`,
/// `u_k ~ U[1/2, 1]` from `seed`, so `f ∈ H^{s_1} ⊗ … ⊗ H^{s_m}`.
pub fn mixed_smooth_synthetic(s: &[f64], delta: f64, modes: usize, seed: u64) -> Result<OracleFunction> {
    if s.is_empty() || s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(validation("smoothness must be nonempty and nonnegative"));
    }
    if !(delta > 0.0) || modes == 0 {
        return Err(validation("need δ > 0 and at least one mode"));
    }
    let shape = vec![modes; s.len()];
    let mut coeffs = DenseTensor::zeros(&shape);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = vec![0usize; s.len()];
    for v in coeffs.data_mut() {
        let decay: f64 = idx
            .iter()
            .zip(s)
            .map(|(&k, &si)| ((k + 1) as f64).powf(-(si + 0.5 + delta)))
            .product();
        *v = decay * rng.random_range(0.5..1.0);
        next_index(&mut idx, &shape);
    }
    let norm = coeffs.norm();
    coeffs.data_mut().iter_mut().for_each(|v| *v /= norm);
    Ok(OracleFunction::MixedSmoothSynthetic {
        s: s.to_vec(),
        delta,
        coeffs,
    })
}

/// Rank-`R` errors `√(Σ_{k>R} σ_k²)` for `R = 0..=len`.
pub fn rank_errors(singular_values: &[f64]) -> Vec<f64> {
    tail_energies(singular_values).into_iter().map(f64::sqrt).collect()
}

/// Singular values of the level-`level` midpoint sample matrix split after
/// variable `split`, scaled by the cell measure `2^{−level·m/2}` so they
/// approximate the L² singular values.
pub fn dense_svd_reference(f: &OracleFunction, level: usize, split: usize) -> Result<Vec<f64>> {
    let m = f.arity();
    if split == 0 || split >= m {
        return Err(validation(format!("split {split} invalid for {m} variables")));
    }
    let side = |count: usize| 1usize.checked_shl((level * count) as u32).unwrap_or(usize::MAX);
    let (rows, cols) = (side(split), side(m - split));
    let largest = rows.max(cols);
    if largest > REFERENCE_SIDE_LIMIT || level * m >= usize::BITS as usize {
        return Err(Error::SizeGuard {
            requested: largest,
            limit: REFERENCE_SIDE_LIMIT,
        });
    }
    let samples = f.sample(&vec![level; m])?;
    let scale = (-((level * m) as f64) / 2.0).exp2();
    let a = from_row_slice(rows, cols, samples.data());
    let a = Mat::from_fn(rows, cols, |i, j| a[(i, j)] * scale);
    let mut sv = a
        .singular_values()
        .map_err(|e| Error::Numeric(format!("reference SVD failed: {e:?}")))?;
    sv.sort_by(|x, y| y.total_cmp(x));
    Ok(sv)
}

/// Wavelet coefficients of the midpoint samples of a function with `n_i = 1`.
pub fn wavelet_coefficients(f: &OracleFunction, levels: &[usize]) -> Result<HierCoeffTensor> {
    let samples = f.sample(levels)?;
    let scale = (-(levels.iter().sum::<usize>() as f64) / 2.0).exp2();
    let x: Vec<f64> = samples.data().iter().map(|v| v * scale).collect();
    let specs = levels
        .iter()
        .map(|&l| MraSpec::haar(1, l))
        .collect::<Result<Vec<_>>>()?;
    analyze_product(&x, &specs, levels)
}

/// Singular values through the full pipeline: sampling, Haar analysis,
/// matricization, SVD.
pub fn pipeline_singular_values(f: &OracleFunction, level: usize, split: usize) -> Result<Vec<f64>> {
    let m = f.arity();
    let coeffs = wavelet_coefficients(f, &vec![level; m])?;
    let mat = Matricization::of_dense(&coeffs.to_dense(), split)?;
    Ok(sorted_svd(&mat.matrix)?.singular_values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub min: f64,
    pub max: f64,
}

impl FitWindow {
    /// All abscissae except the two smallest.
    pub fn skip_two_smallest(abscissae: &[f64]) -> Result<Self> {
        let mut sorted = abscissae.to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted.len() < 3 {
            return Err(validation("need at least three abscissae"));
        }
        Ok(Self {
            min: sorted[2],
            max: sorted[sorted.len() - 1],
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub abscissae: Vec<f64>,
    pub errors: Vec<f64>,
    pub window: FitWindow,
    /// `β` in `e ≈ C x^{−β} (log x)^q`.
    pub exponent: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub constant: f64,
    pub log_power: Option<f64>,
    pub predicted: Option<f64>,
    /// Points inside the window dropped for nonpositive error.
    pub dropped: usize,
    pub points_used: usize,
}

/// Least-squares fit of `log e = log C − β log x + q log log x` with `q` fixed.
pub fn fit_decay(
    abscissae: &[f64],
    errors: &[f64],
    window: FitWindow,
    log_power: Option<f64>,
    predicted: Option<f64>,
) -> Result<DecayReport> {
    if abscissae.len() != errors.len() {
        return Err(validation("abscissae and errors differ in length"));
    }
    let q = log_power.unwrap_or(0.0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = 0;
    for (&x, &e) in abscissae.iter().zip(errors) {
        if !window.contains(x) {
            continue;
        }
        if !(e > 0.0 && e.is_finite()) {
            dropped += 1;
            continue;
        }
        if !(x > 0.0) || (q != 0.0 && !(x > 1.0)) {
            return Err(validation(format!("abscissa {x} outside the fit domain")));
        }
        let correction = if q != 0.0 { q * x.ln().ln() } else { 0.0 };
        xs.push(x.ln());
        ys.push(e.ln() - correction);
    }
    if xs.len() < 4 {
        return Err(validation(format!("{} usable points in the window, need 4", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(validation("abscissae in the window are all equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayReport {
        abscissae: abscissae.to_vec(),
        errors: errors.to_vec(),
        window,
        exponent: -slope,
        residual,
        constant: intercept.exp(),
        log_power,
        predicted,
        dropped,
        points_used: xs.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub budget: f64,
    pub dof: u64,
    pub error: f64,
}

/// Sparse-space projection errors of a bivariate function with `n = (1, 1)`,
/// measured against its Haar expansion at `ref_level` from Gauss cell
/// averages.
pub fn sparse_convergence(
    f: impl Fn(&[f64]) -> f64,
    weights: &AnisotropyWeights,
    budgets: &[f64],
    ref_level: usize,
) -> Result<Vec<ConvergenceRow>> {
    if weights.m() != 2 {
        return Err(Error::Unsupported("sparse convergence is bivariate".into()));
    }
    let avgs = cell_values(f, 2, ref_level, CellRule::Gauss(4))?;
    let x = single_scale_from_averages(&avgs, 2, ref_level);
    let spec = MraSpec::haar(1, ref_level)?;
    let coeffs = analyze_product(&x, &[spec, spec], &[ref_level, ref_level])?;
    let profile = SmoothnessProfile::from_smoothness(vec![1, 1], vec![1.0, 1.0])?;
    budgets
        .iter()
        .map(|&b| {
            let set = index_set(weights, b, 2)?;
            if set.max_levels().iter().any(|&l| l > ref_level) {
                return Err(validation(format!(
                    "budget {b} reaches beyond the reference level {ref_level}"
                )));
            }
            Ok(ConvergenceRow {
                budget: b,
                dof: sparse_dim(&set, &profile)?.exact,
                error: projection_error(&coeffs, &set),
            })
        })
        .collect()
}
