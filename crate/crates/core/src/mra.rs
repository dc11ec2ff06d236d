//! Dyadic multiresolution analysis on unit cubes.
//!
//! Every subdomain `[0,1]^n` carries the nested spaces `V_0 ⊂ V_1 ⊂ …` of
//! piecewise functions on the uniform dyadic grid, `dim V_j = 2^{jn}`. The
//! complement `W_j = V_j ⊖ V_{j-1}` (with `W_0 = V_0`) is realized by the
//! tensorized 1D wavelets whose largest 1D level equals `j`, so
//! `dim W_j = 2^{jn} - 2^{(j-1)n}`.
//!
//! Coefficients of a single subdomain are stored in *level order*: all of
//! `W_0`, then `W_1`, …, each level in row-major order of the underlying 1D
//! positions. Products of subdomains are stored block-wise in
//! [`HierCoeffTensor`], keyed by the multilevel index `(j_1, …, j_m)`.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{shape, validation, Error, Result};
use crate::tensor::{for_each_fibre, next_index, DenseTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WaveletFamily {
    /// Piecewise constants; orthonormal, dual basis equals primal.
    Haar,
    /// CDF 5/3 (biorthogonal 2.2) lifting scheme with periodic extension.
    Biorthogonal22,
}

impl WaveletFamily {
    /// Polynomial exactness `r`.
    pub fn order(self) -> u32 {
        match self {
            WaveletFamily::Haar => 1,
            WaveletFamily::Biorthogonal22 => 2,
        }
    }

    pub fn is_orthonormal(self) -> bool {
        matches!(self, WaveletFamily::Haar)
    }

    /// One analysis step on `x` (even length ≥ 2): the first half receives the
    /// coarse coefficients, the second half the details.
    fn analysis_step(self, x: &mut [f64], scratch: &mut Vec<f64>) {
        let half = x.len() / 2;
        scratch.clear();
        scratch.resize(x.len(), 0.0);
        match self {
            WaveletFamily::Haar => {
                for i in 0..half {
                    let (a, b) = (x[2 * i], x[2 * i + 1]);
                    scratch[i] = (a + b) / SQRT_2;
                    scratch[half + i] = (a - b) / SQRT_2;
                }
            }
            WaveletFamily::Biorthogonal22 => {
                let (s, d) = scratch.split_at_mut(half);
                for i in 0..half {
                    let right = x[2 * ((i + 1) % half)];
                    d[i] = x[2 * i + 1] - 0.5 * (x[2 * i] + right);
                }
                for i in 0..half {
                    let left = d[(i + half - 1) % half];
                    s[i] = x[2 * i] + 0.25 * (left + d[i]);
                }
                s.iter_mut().for_each(|v| *v *= SQRT_2);
                d.iter_mut().for_each(|v| *v /= SQRT_2);
            }
        }
        x.copy_from_slice(scratch);
    }

    fn synthesis_step(self, x: &mut [f64], scratch: &mut Vec<f64>) {
        let half = x.len() / 2;
        scratch.clear();
        scratch.resize(x.len(), 0.0);
        match self {
            WaveletFamily::Haar => {
                for i in 0..half {
                    let (a, d) = (x[i], x[half + i]);
                    scratch[2 * i] = (a + d) / SQRT_2;
                    scratch[2 * i + 1] = (a - d) / SQRT_2;
                }
            }
            WaveletFamily::Biorthogonal22 => {
                let s: Vec<f64> = x[..half].iter().map(|v| v / SQRT_2).collect();
                let d: Vec<f64> = x[half..].iter().map(|v| v * SQRT_2).collect();
                for i in 0..half {
                    let left = d[(i + half - 1) % half];
                    scratch[2 * i] = s[i] - 0.25 * (left + d[i]);
                }
                for i in 0..half {
                    let right = scratch[2 * ((i + 1) % half)];
                    scratch[2 * i + 1] = d[i] + 0.5 * (scratch[2 * i] + right);
                }
            }
        }
        x.copy_from_slice(scratch);
    }

    /// Full pyramid analysis of a length-`2^J` vector into level order.
    pub fn forward(self, x: &mut [f64]) {
        let mut scratch = Vec::with_capacity(x.len());
        let mut len = x.len();
        while len >= 2 {
            self.analysis_step(&mut x[..len], &mut scratch);
            len /= 2;
        }
    }

    /// Inverse of [`WaveletFamily::forward`].
    pub fn inverse(self, x: &mut [f64]) {
        let mut scratch = Vec::with_capacity(x.len());
        let mut len = 2;
        while len <= x.len() {
            self.synthesis_step(&mut x[..len], &mut scratch);
            len *= 2;
        }
    }
}

/// Multiresolution on `[0,1]^dim` up to level `max_level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MraSpec {
    pub dim: usize,
    pub family: WaveletFamily,
    pub max_level: usize,
}

impl MraSpec {
    pub fn new(dim: usize, family: WaveletFamily, max_level: usize) -> Result<Self> {
        if dim == 0 {
            return Err(validation("subdomain dimension must be positive"));
        }
        if dim * max_level >= usize::BITS as usize - 1 {
            return Err(validation(format!(
                "level {max_level} in dimension {dim} overflows the index range"
            )));
        }
        Ok(Self { dim, family, max_level })
    }

    pub fn haar(dim: usize, max_level: usize) -> Result<Self> {
        Self::new(dim, WaveletFamily::Haar, max_level)
    }

    /// `dim V_j = 2^{j n}`.
    pub fn space_dim(&self, j: usize) -> usize {
        1 << (j * self.dim)
    }

    /// `dim W_j`; one for `j = 0`.
    pub fn detail_dim(&self, j: usize) -> usize {
        if j == 0 {
            1
        } else {
            self.space_dim(j) - self.space_dim(j - 1)
        }
    }

    /// Position of the first `W_j` coefficient in level order.
    pub fn detail_offset(&self, j: usize) -> usize {
        if j == 0 {
            0
        } else {
            self.space_dim(j - 1)
        }
    }

    pub fn mesh_width(&self, j: usize) -> f64 {
        (-(j as f64)).exp2()
    }

    /// Permutation from level-ordered positions to row-major positions of the
    /// `dim`-fold 1D pyramid layout at level `level`.
    pub fn level_order(&self, level: usize) -> Vec<usize> {
        let side = 1usize << level;
        let total = self.space_dim(level);
        let mut keyed: Vec<(usize, usize)> = Vec::with_capacity(total);
        let mut idx = vec![0usize; self.dim];
        let sides = vec![side; self.dim];
        let mut flat = 0;
        loop {
            let lvl = idx.iter().map(|&p| level_of_position(p)).max().unwrap_or(0);
            keyed.push((lvl, flat));
            flat += 1;
            if !next_index(&mut idx, &sides) {
                break;
            }
        }
        keyed.sort_unstable();
        keyed.into_iter().map(|(_, p)| p).collect()
    }
}

impl MraSpec {
    /// Level of every position of the level-ordered coefficient vector.
    pub fn position_levels(&self, level: usize) -> Vec<usize> {
        (0..=level)
            .flat_map(|j| std::iter::repeat_n(j, self.detail_dim(j)))
            .collect()
    }
}

/// 1D level of pyramid position `p`: 0 for the scaling coefficient, `b` for
/// positions in `[2^{b-1}, 2^b)`.
fn level_of_position(p: usize) -> usize {
    if p == 0 {
        0
    } else {
        (usize::BITS - p.leading_zeros()) as usize
    }
}

/// Wavelet coefficients of a function on `Ω_1 × … × Ω_m`, grouped by
/// multilevel index. Absent blocks are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct HierCoeffTensor {
    specs: Vec<MraSpec>,
    levels: Vec<usize>,
    blocks: BTreeMap<Vec<usize>, DenseTensor>,
}

impl HierCoeffTensor {
    /// Empty tensor; every block reads as zero.
    pub fn new(specs: Vec<MraSpec>, levels: Vec<usize>) -> Result<Self> {
        if specs.is_empty() || specs.len() != levels.len() {
            return Err(shape(format!(
                "{} subdomain specs but {} levels",
                specs.len(),
                levels.len()
            )));
        }
        for (s, &l) in specs.iter().zip(&levels) {
            if l > s.max_level {
                return Err(validation(format!("level {l} exceeds max level {}", s.max_level)));
            }
        }
        Ok(Self {
            specs,
            levels,
            blocks: BTreeMap::new(),
        })
    }

    /// Splits a level-ordered dense coefficient tensor into blocks.
    pub fn from_dense(specs: Vec<MraSpec>, levels: Vec<usize>, dense: &DenseTensor) -> Result<Self> {
        let mut out = Self::new(specs, levels)?;
        let expect = out.mode_dims();
        if dense.shape() != expect.as_slice() {
            return Err(shape(format!(
                "dense shape {:?} does not match mode dims {:?}",
                dense.shape(),
                expect
            )));
        }
        for j in out.all_level_indices() {
            let block = extract_box(dense, &out.block_offsets(&j), &out.block_shape(&j));
            out.blocks.insert(j, block);
        }
        Ok(out)
    }

    pub fn subdomains(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[MraSpec] {
        &self.specs
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    /// `N_i = dim V_{J_i}` per subdomain.
    pub fn mode_dims(&self) -> Vec<usize> {
        self.specs
            .iter()
            .zip(&self.levels)
            .map(|(s, &l)| s.space_dim(l))
            .collect()
    }

    pub fn block_shape(&self, j: &[usize]) -> Vec<usize> {
        self.specs.iter().zip(j).map(|(s, &ji)| s.detail_dim(ji)).collect()
    }

    fn block_offsets(&self, j: &[usize]) -> Vec<usize> {
        self.specs.iter().zip(j).map(|(s, &ji)| s.detail_offset(ji)).collect()
    }

    /// All multilevel indices `j ≤ levels`, lexicographic.
    pub fn all_level_indices(&self) -> Vec<Vec<usize>> {
        let extents: Vec<usize> = self.levels.iter().map(|l| l + 1).collect();
        let mut out = Vec::new();
        let mut idx = vec![0; extents.len()];
        loop {
            out.push(idx.clone());
            if !next_index(&mut idx, &extents) {
                break;
            }
        }
        out
    }

    fn check_index(&self, j: &[usize]) -> Result<()> {
        if j.len() != self.levels.len() || j.iter().zip(&self.levels).any(|(a, b)| a > b) {
            return Err(validation(format!(
                "level index {:?} outside levels {:?}",
                j, self.levels
            )));
        }
        Ok(())
    }

    pub fn block(&self, j: &[usize]) -> Option<&DenseTensor> {
        self.blocks.get(j)
    }

    /// Inserts or replaces a block after checking its shape.
    pub fn set_block(&mut self, j: Vec<usize>, block: DenseTensor) -> Result<()> {
        self.check_index(&j)?;
        let expect = self.block_shape(&j);
        if block.shape() != expect.as_slice() {
            return Err(shape(format!(
                "block {:?} has shape {:?}, expected {:?}",
                j,
                block.shape(),
                expect
            )));
        }
        self.blocks.insert(j, block);
        Ok(())
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&Vec<usize>, &DenseTensor)> {
        self.blocks.iter()
    }

    pub(crate) fn blocks_mut(&mut self) -> impl Iterator<Item = (&Vec<usize>, &mut DenseTensor)> {
        self.blocks.iter_mut()
    }

    /// `true` when every block `j ≤ levels` is stored.
    pub fn is_complete(&self) -> bool {
        self.blocks.len() == self.levels.iter().map(|l| l + 1).product::<usize>()
    }

    /// Level-ordered dense tensor with missing blocks zero-filled.
    pub fn to_dense(&self) -> DenseTensor {
        let mut dense = DenseTensor::zeros(&self.mode_dims());
        for (j, block) in &self.blocks {
            insert_box(&mut dense, &self.block_offsets(j), block);
        }
        dense
    }

    /// Frobenius norm over all blocks, the L² norm for orthonormal families.
    pub fn norm(&self) -> f64 {
        self.blocks
            .values()
            .map(|b| b.data().iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// `Q_j f` of a single-subdomain tensor and its norm.
    pub fn detail_block(&self, j: usize) -> Result<(&DenseTensor, f64)> {
        if self.subdomains() != 1 {
            return Err(Error::Unsupported(
                "detail_block expects a single subdomain; use block()".into(),
            ));
        }
        self.check_index(&[j])?;
        let block = self.blocks.get(&vec![j]).ok_or(Error::MissingBlock(vec![j]))?;
        Ok((block, block.norm()))
    }

    /// `(Σ_j 2^{2 Σ_i j_i t_i} ‖block_j‖²)^{1/2}`, a discrete mixed Sobolev norm.
    pub fn discrete_sobolev_norm(&self, t: &[f64]) -> Result<f64> {
        if t.len() != self.subdomains() {
            return Err(shape(format!(
                "{} smoothness values for {} subdomains",
                t.len(),
                self.subdomains()
            )));
        }
        for (ti, spec) in t.iter().zip(&self.specs) {
            if !(*ti >= 0.0 && *ti <= spec.family.order() as f64) {
                return Err(validation(format!(
                    "smoothness {ti} outside [0, {}]",
                    spec.family.order()
                )));
            }
        }
        let sum: f64 = self
            .blocks
            .iter()
            .map(|(j, b)| {
                let w = sobolev_weight(j, t);
                w * w * b.data().iter().map(|x| x * x).sum::<f64>()
            })
            .sum();
        Ok(sum.sqrt())
    }
}

/// `2^{Σ_i j_i t_i}`.
pub(crate) fn sobolev_weight(j: &[usize], t: &[f64]) -> f64 {
    j.iter().zip(t).map(|(&ji, &ti)| ji as f64 * ti).sum::<f64>().exp2()
}

fn extract_box(src: &DenseTensor, offsets: &[usize], shape: &[usize]) -> DenseTensor {
    let mut out = DenseTensor::zeros(shape);
    if out.is_empty() {
        return out;
    }
    let strides = src.strides();
    let last = shape.len() - 1;
    let run = shape[last];
    let mut idx = vec![0; shape.len()];
    let mut k = 0;
    let mut outer = shape.to_vec();
    outer[last] = 1;
    loop {
        let base: usize = idx
            .iter()
            .zip(offsets)
            .zip(&strides)
            .map(|((i, o), s)| (i + o) * s)
            .sum();
        out.data_mut()[k..k + run].copy_from_slice(&src.data()[base..base + run]);
        k += run;
        if !next_index(&mut idx, &outer) {
            break;
        }
    }
    out
}

fn insert_box(dst: &mut DenseTensor, offsets: &[usize], block: &DenseTensor) {
    if block.is_empty() {
        return;
    }
    let shape = block.shape().to_vec();
    let strides = dst.strides();
    let last = shape.len() - 1;
    let run = shape[last];
    let mut idx = vec![0; shape.len()];
    let mut k = 0;
    let mut outer = shape.clone();
    outer[last] = 1;
    loop {
        let base: usize = idx
            .iter()
            .zip(offsets)
            .zip(&strides)
            .map(|((i, o), s)| (i + o) * s)
            .sum();
        dst.data_mut()[base..base + run].copy_from_slice(&block.data()[k..k + run]);
        k += run;
        if !next_index(&mut idx, &outer) {
            break;
        }
    }
}

fn dyadic_level(len: usize, dim: usize) -> Option<usize> {
    if len == 0 || !len.is_power_of_two() {
        return None;
    }
    let bits = len.trailing_zeros() as usize;
    bits.is_multiple_of(dim).then_some(bits / dim)
}

/// Physical axes of the product domain: subdomain `i` contributes `n_i`
/// axes of extent `2^{J_i}`.
fn physical_shape(specs: &[MraSpec], levels: &[usize]) -> Vec<usize> {
    specs
        .iter()
        .zip(levels)
        .flat_map(|(s, &l)| std::iter::repeat_n(1usize << l, s.dim))
        .collect()
}

/// Single-subdomain analysis of single-scale coefficients at level `J`
/// (length `2^{J n}`, row-major over the `n` axes).
pub fn analyze(x: &[f64], spec: &MraSpec) -> Result<HierCoeffTensor> {
    let level = dyadic_level(x.len(), spec.dim)
        .ok_or_else(|| shape(format!("length {} is not 2^(J·{}) for an integer J", x.len(), spec.dim)))?;
    analyze_product(x, &[*spec], &[level])
}

/// Analysis on a product of subdomains. `x` is row-major over the physical
/// axes of all subdomains in order.
pub fn analyze_product(x: &[f64], specs: &[MraSpec], levels: &[usize]) -> Result<HierCoeffTensor> {
    let phys = physical_shape(specs, levels);
    let expect: usize = phys.iter().product();
    if x.len() != expect {
        return Err(shape(format!(
            "expected {expect} single-scale coefficients, got {}",
            x.len()
        )));
    }
    let tensor = HierCoeffTensor::new(specs.to_vec(), levels.to_vec())?;
    let mut data = x.to_vec();
    let mut axis = 0;
    for spec in specs {
        for _ in 0..spec.dim {
            for_each_fibre(&mut data, &phys, axis, |f| spec.family.forward(f));
            axis += 1;
        }
    }
    let modes = tensor.mode_dims();
    for (i, (spec, &l)) in specs.iter().zip(levels).enumerate() {
        if spec.dim > 1 {
            let perm = spec.level_order(l);
            for_each_fibre(&mut data, &modes, i, |f| {
                let src = f.to_vec();
                for (q, &p) in perm.iter().enumerate() {
                    f[q] = src[p];
                }
            });
        }
    }
    let dense = DenseTensor::from_vec(&modes, data)?;
    HierCoeffTensor::from_dense(specs.to_vec(), levels.to_vec(), &dense)
}

/// Inverse of [`analyze_product`]; every block must be present.
pub fn synthesize(coeffs: &HierCoeffTensor) -> Result<Vec<f64>> {
    if let Some(j) = coeffs
        .all_level_indices()
        .into_iter()
        .find(|j| coeffs.block(j).is_none())
    {
        return Err(Error::MissingBlock(j));
    }
    let modes = coeffs.mode_dims();
    let mut data = coeffs.to_dense().into_data();
    for (i, (spec, &l)) in coeffs.specs().iter().zip(coeffs.levels()).enumerate() {
        if spec.dim > 1 {
            let perm = spec.level_order(l);
            for_each_fibre(&mut data, &modes, i, |f| {
                let src = f.to_vec();
                for (q, &p) in perm.iter().enumerate() {
                    f[p] = src[q];
                }
            });
        }
    }
    let phys = physical_shape(coeffs.specs(), coeffs.levels());
    let mut axis = 0;
    for spec in coeffs.specs() {
        for _ in 0..spec.dim {
            for_each_fibre(&mut data, &phys, axis, |f| spec.family.inverse(f));
            axis += 1;
        }
    }
    Ok(data)
}

/// Cell rule used to turn a function into single-scale coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellRule {
    /// Value at the cell centre.
    Midpoint,
    /// Tensor Gauss–Legendre cell average with the given points per axis (1..=4).
    Gauss(usize),
}

fn gauss_nodes(points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    // Nodes on [-1, 1], weights summing to 2.
    let (x, w): (&[f64], &[f64]) = match points {
        1 => (&[0.0], &[2.0]),
        2 => (&[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8], &[1.0, 1.0]),
        3 => (
            &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
            &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
        ),
        4 => (
            &[
                -0.861_136_311_594_052_6,
                -0.339_981_043_584_856_3,
                0.339_981_043_584_856_3,
                0.861_136_311_594_052_6,
            ],
            &[
                0.347_854_845_137_453_9,
                0.652_145_154_862_546_1,
                0.652_145_154_862_546_1,
                0.347_854_845_137_453_9,
            ],
        ),
        _ => return Err(validation(format!("{points} Gauss points not supported"))),
    };
    Ok((x.to_vec(), w.to_vec()))
}

/// Cell averages of `f` on the uniform level-`level` grid of `[0,1]^dim`,
/// row-major.
pub fn cell_values(f: impl Fn(&[f64]) -> f64, dim: usize, level: usize, rule: CellRule) -> Result<Vec<f64>> {
    let side = 1usize << level;
    let h = 1.0 / side as f64;
    let (nodes, weights) = match rule {
        CellRule::Midpoint => (vec![0.0], vec![2.0]),
        CellRule::Gauss(q) => gauss_nodes(q)?,
    };
    let q = nodes.len();
    let sides = vec![side; dim];
    let qs = vec![q; dim];
    let mut out = Vec::with_capacity(side.pow(dim as u32));
    let mut cell = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    loop {
        let mut acc = 0.0;
        let mut qi = vec![0usize; dim];
        loop {
            let mut w = 1.0;
            for d in 0..dim {
                point[d] = (cell[d] as f64 + 0.5 + 0.5 * nodes[qi[d]]) * h;
                w *= 0.5 * weights[qi[d]];
            }
            acc += w * f(&point);
            if !next_index(&mut qi, &qs) {
                break;
            }
        }
        out.push(acc);
        if !next_index(&mut cell, &sides) {
            break;
        }
    }
    Ok(out)
}

/// Converts cell averages on `[0,1]^dim` at `level` to L²-normalized
/// single-scale coefficients: `c = 2^{-level·dim/2} · average`.
pub fn single_scale_from_averages(averages: &[f64], dim: usize, level: usize) -> Vec<f64> {
    let scale = (-((level * dim) as f64) / 2.0).exp2();
    averages.iter().map(|a| a * scale).collect()
}

/// L² norm of a piecewise constant function given by its cell averages.
pub fn l2_norm_of_averages(averages: &[f64], dim: usize, level: usize) -> f64 {
    let cell = (-((level * dim) as f64)).exp2();
    (averages.iter().map(|a| a * a).sum::<f64>() * cell).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn block_dimensions_fill_the_space() {
        for n in 1..=3 {
            let spec = MraSpec::haar(n, 6).unwrap();
            for level in 0..=4 {
                let total: usize = (0..=level).map(|j| spec.detail_dim(j)).sum();
                assert_eq!(total, spec.space_dim(level));
            }
        }
        let spec = MraSpec::haar(2, 4).unwrap();
        assert_eq!(spec.detail_dim(0), 1);
        assert_eq!(spec.detail_dim(1), 3);
        assert_eq!(spec.detail_dim(2), 12);
    }

    #[test]
    fn constant_has_no_details() {
        let spec = MraSpec::haar(1, 3).unwrap();
        let x = vec![1.0; 8];
        let c = analyze(&x, &spec).unwrap();
        for j in 1..=3 {
            assert!(c.detail_block(j).unwrap().1 < 1e-14);
        }
        // Scaling block carries the total mass Σ x / √8.
        let (b, _) = c.detail_block(0).unwrap();
        assert!((b.data()[0] - 8.0 / 8f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn round_trip_all_families_and_dims() {
        for family in [WaveletFamily::Haar, WaveletFamily::Biorthogonal22] {
            for n in 1..=3 {
                let level = 6 / n;
                let spec = MraSpec::new(n, family, level).unwrap();
                let x = random_vec(spec.space_dim(level), 7 + n as u64);
                let c = analyze(&x, &spec).unwrap();
                let y = synthesize(&c).unwrap();
                let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-12, "{family:?} n={n}: {err}");
            }
        }
    }

    #[test]
    fn haar_is_parseval() {
        let spec = MraSpec::haar(2, 4).unwrap();
        let x = random_vec(256, 3);
        let c = analyze(&x, &spec).unwrap();
        let direct = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((c.norm() - direct).abs() < 1e-12);
    }

    #[test]
    fn unit_coefficient_synthesizes_a_unit_wavelet() {
        let spec = MraSpec::haar(1, 3).unwrap();
        let mut c = HierCoeffTensor::new(vec![spec], vec![3]).unwrap();
        for j in 0..=3 {
            c.set_block(vec![j], DenseTensor::zeros(&[spec.detail_dim(j)])).unwrap();
        }
        c.set_block(vec![2], DenseTensor::from_vec(&[2], vec![1.0, 0.0]).unwrap())
            .unwrap();
        let y = synthesize(&c).unwrap();
        // First W_2 wavelet: support [0, 1/2), amplitude √2 on cells of width 1/8.
        let h = 0.5;
        let expect = [h, h, -h, -h, 0.0, 0.0, 0.0, 0.0];
        for (a, b) in y.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((y.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_coefficients_give_zero_array() {
        let spec = MraSpec::haar(1, 2).unwrap();
        let c = analyze(&[0.0; 4], &spec).unwrap();
        assert!(synthesize(&c).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_block_is_structural_error() {
        let spec = MraSpec::haar(1, 2).unwrap();
        let c = HierCoeffTensor::new(vec![spec], vec![2]).unwrap();
        assert!(matches!(synthesize(&c), Err(Error::MissingBlock(_))));
    }

    #[test]
    fn non_dyadic_extent_is_rejected() {
        let spec = MraSpec::haar(1, 4).unwrap();
        assert!(matches!(analyze(&[0.0; 6], &spec), Err(Error::Shape(_))));
        let spec2 = MraSpec::haar(2, 4).unwrap();
        assert!(matches!(analyze(&[0.0; 8], &spec2), Err(Error::Shape(_))));
    }

    #[test]
    fn level_order_groups_by_max_level() {
        let spec = MraSpec::haar(2, 2).unwrap();
        let perm = spec.level_order(2);
        assert_eq!(perm.len(), 16);
        // W_0 = (0,0); W_1 = {(0,1),(1,0),(1,1)} in row-major order.
        assert_eq!(&perm[..4], &[0, 1, 4, 5]);
    }

    #[test]
    fn sobolev_norm_weights() {
        let spec = MraSpec::haar(1, 4).unwrap();
        let mut c = HierCoeffTensor::new(vec![spec], vec![4]).unwrap();
        let mut b = DenseTensor::zeros(&[spec.detail_dim(3)]);
        b.data_mut()[1] = 1.0;
        c.set_block(vec![3], b).unwrap();
        assert!((c.discrete_sobolev_norm(&[1.0]).unwrap() - 8.0).abs() < 1e-12);
        assert!((c.discrete_sobolev_norm(&[0.5]).unwrap() - 8f64.sqrt()).abs() < 1e-12);
        assert!((c.discrete_sobolev_norm(&[0.0]).unwrap() - c.norm()).abs() < 1e-15);
        assert!(matches!(c.discrete_sobolev_norm(&[1.5]), Err(Error::Validation(_))));
    }

    #[test]
    fn linear_function_details() {
        // (x, ψ) = -2^{-3k/2}/4 for the wavelet at dyadic scale 2^{-k},
        // which lives in block k + 1.
        let level = 10;
        let spec = MraSpec::haar(1, level).unwrap();
        let avg = cell_values(|p| p[0], 1, level, CellRule::Gauss(2)).unwrap();
        let c = analyze(&single_scale_from_averages(&avg, 1, level), &spec).unwrap();
        for k in 0..level {
            let (b, norm) = c.detail_block(k + 1).unwrap();
            let coeff = -(-1.5 * k as f64).exp2() / 4.0;
            assert!(b.data().iter().all(|v| (v - coeff).abs() < 1e-12));
            assert!((norm - (-(k as f64)).exp2() / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn blocks_norm_matches_cell_norm() {
        let level = 5;
        let spec = MraSpec::haar(2, level).unwrap();
        let f = |p: &[f64]| (3.0 * p[0]).sin() * (p[1] * p[1] + 1.0).ln();
        let avg = cell_values(f, 2, level, CellRule::Gauss(3)).unwrap();
        let c = analyze(&single_scale_from_averages(&avg, 2, level), &spec).unwrap();
        assert!((c.norm() - l2_norm_of_averages(&avg, 2, level)).abs() < 1e-10);
    }

    #[test]
    fn biorthogonal_reproduces_linears_in_the_interior() {
        // Periodic CDF 5/3 annihilates linears away from the wrap-around.
        let spec = MraSpec::new(1, WaveletFamily::Biorthogonal22, 5).unwrap();
        let x: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let c = analyze(&x, &spec).unwrap();
        let (b, _) = c.detail_block(5).unwrap();
        let zeros = b.data()[..b.len() - 1].iter().filter(|v| v.abs() < 1e-12).count();
        assert_eq!(zeros, b.len() - 1);
    }
}
