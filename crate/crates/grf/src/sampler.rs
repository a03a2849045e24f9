//! Field samplers: naive periodisation (FFT), circulant embedding, and
//! Dirichlet-Neumann averaging (mixed DCT-I/DST-I).
//!
//! Every sampler is an immutable plan (spectrum table + transform plans)
//! whose `*_from_noise` entry points are deterministic linear maps of the
//! supplied standard-normal vector. The stream-taking wrappers draw noise
//! in a fixed canonical order, so identical `(seed, stream)` pairs give
//! bit-identical realisations on any number of threads.
//!
//! Noise-order contract (relied on by the direct-summation oracle and the
//! dense-map tests): modes are enumerated row-major over the index block,
//! last axis fastest; the complex samplers draw (re, im) per mode; the DNA
//! sampler consumes one substream per boundary mask, mask codes ascending.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use crate::error::{GrfError, Result};
use crate::field::{FieldRealisation, GridKind};
use crate::periodisation::{
    ce_spectrum, spectrum_is_nonneg, Scaling, SpectrumTable,
};
use crate::covariance::CovarianceModel;
use crate::rng::RngStream;
use crate::transforms::{Dct1Plan, Dst1Plan};

/// Per-axis boundary-condition selector: `false` = Neumann (cosine),
/// `true` = Dirichlet (sine).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMask {
    bits: Vec<bool>,
}

impl BoundaryMask {
    pub fn new(bits: Vec<bool>) -> Self {
        assert!(!bits.is_empty() && bits.len() <= 3);
        Self { bits }
    }

    /// Mask from its code: bit j set means Dirichlet on axis j.
    pub fn from_code(code: usize, dim: usize) -> Self {
        Self::new((0..dim).map(|j| code >> j & 1 == 1).collect())
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn is_dirichlet(&self, axis: usize) -> bool {
        self.bits[axis]
    }

    pub fn code(&self) -> usize {
        self.bits.iter().enumerate().fold(0, |acc, (j, &b)| acc | (usize::from(b) << j))
    }

    /// All `2^d` masks in ascending code order.
    pub fn all(dim: usize) -> Vec<Self> {
        (0..1usize << dim).map(|code| Self::from_code(code, dim)).collect()
    }

    pub fn label(&self) -> String {
        self.bits.iter().map(|&b| if b { 'D' } else { 'N' }).collect()
    }
}

fn apply_axis_real<F: Fn(&[f64]) -> Vec<f64>>(data: &mut ArrayD<f64>, axis: usize, f: F) {
    for mut lane in data.lanes_mut(ndarray::Axis(axis)) {
        let x: Vec<f64> = lane.iter().copied().collect();
        let y = f(&x);
        for (dst, v) in lane.iter_mut().zip(y) {
            *dst = v;
        }
    }
}

/// Dirichlet-Neumann averaged sampler on the closed grid `x_j = j alpha / n`
/// (n+1 points per axis). Requires a table built with the `2 alpha` period.
pub struct DnaSampler {
    table: SpectrumTable,
    dct: Dct1Plan,
    dst: Dst1Plan,
}

impl DnaSampler {
    pub fn new(table: SpectrumTable) -> Result<Self> {
        if table.scaling() != Scaling::TwoAlpha {
            return Err(GrfError::Unsupported(
                "DNA sampling needs a spectrum table in the 2-alpha convention".into(),
            ));
        }
        let n = table.params().n;
        Ok(Self { table, dct: Dct1Plan::new(n + 1)?, dst: Dst1Plan::new(n)? })
    }

    pub fn table(&self) -> &SpectrumTable {
        &self.table
    }

    fn dim(&self) -> usize {
        self.table.params().dim
    }

    fn n(&self) -> usize {
        self.table.params().n
    }

    /// Number of noise values a single-mask field consumes: the size of
    /// the index set (Dirichlet axes drop the zero mode).
    pub fn noise_len(&self, mask: &BoundaryMask) -> usize {
        let n = self.n();
        (0..self.dim()).map(|j| if mask.is_dirichlet(j) { n } else { n + 1 }).product()
    }

    /// Coefficient array for one mask: xi_mu sqrt(lambda_mu) with the
    /// orthonormal zero-mode weight 1/sqrt(2) per Neumann axis at mu_j = 0.
    /// Shape is ragged: n+1 entries per Neumann axis, n per Dirichlet axis
    /// (modes 1..n stored at 0..n-1).
    fn coefficient_array(&self, mask: &BoundaryMask, noise: &[f64]) -> ArrayD<f64> {
        let dim = self.dim();
        let n = self.n();
        let shape: Vec<usize> =
            (0..dim).map(|j| if mask.is_dirichlet(j) { n } else { n + 1 }).collect();
        assert_eq!(noise.len(), shape.iter().product::<usize>(), "noise length mismatch");
        // row-major strides of the full (n+1)^d coefficient table
        let mut table_stride = vec![1usize; dim];
        for j in (0..dim.saturating_sub(1)).rev() {
            table_stride[j] = table_stride[j + 1] * (n + 1);
        }
        let lambdas = self.table.coeffs().as_slice().expect("table is contiguous");
        let mut out = Vec::with_capacity(noise.len());
        let mut mode = vec![0usize; dim];
        for (flat, &xi) in noise.iter().enumerate() {
            let mut idx = flat;
            let mut table_flat = 0usize;
            let mut weight = 1.0;
            for j in (0..dim).rev() {
                let k = idx % shape[j];
                idx /= shape[j];
                let mu = if mask.is_dirichlet(j) {
                    k + 1
                } else {
                    if k == 0 {
                        weight *= std::f64::consts::FRAC_1_SQRT_2;
                    }
                    k
                };
                mode[j] = mu;
                table_flat += mu * table_stride[j];
            }
            out.push(xi * lambdas[table_flat].sqrt() * weight);
        }
        ArrayD::from_shape_vec(IxDyn(&shape), out).expect("shape consistent")
    }

    /// One boundary-mask field from explicit noise (deterministic linear
    /// map; the dense-map tests feed unit vectors through this).
    pub fn sample_single_bc_from_noise(
        &self,
        mask: &BoundaryMask,
        noise: &[f64],
        stream: RngStream,
    ) -> FieldRealisation {
        let dim = self.dim();
        let n = self.n();
        let alpha = self.table.params().alpha;
        let mut coeffs = self.coefficient_array(mask, noise);

        for axis in 0..dim {
            if mask.is_dirichlet(axis) {
                apply_axis_real(&mut coeffs, axis, |x| self.dst.apply(x));
            } else {
                apply_axis_real(&mut coeffs, axis, |x| self.dct.apply(x));
            }
        }

        // Embed the ragged result into the closed grid: Dirichlet axes are
        // shifted by one (grid index j = mode output m), faces stay zero.
        let scale = (2.0 / alpha).powf(dim as f64 / 2.0);
        let mut values = ArrayD::zeros(IxDyn(&vec![n + 1; dim]));
        let shape = coeffs.shape().to_vec();
        for (flat, &v) in coeffs.iter().enumerate() {
            let mut idx = flat;
            let mut out = vec![0usize; dim];
            for j in (0..dim).rev() {
                let k = idx % shape[j];
                idx /= shape[j];
                out[j] = if mask.is_dirichlet(j) { k + 1 } else { k };
            }
            values[IxDyn(&out)] = v * scale;
        }
        FieldRealisation { values, alpha, grid: GridKind::Closed, stream }
    }

    /// One boundary-mask field, noise drawn from `stream`.
    pub fn sample_single_bc(&self, mask: &BoundaryMask, stream: RngStream) -> FieldRealisation {
        let noise = stream.normals(self.noise_len(mask));
        self.sample_single_bc_from_noise(mask, &noise, stream)
    }

    /// The averaged field `2^{-d/2} sum_b u^b` from explicit per-mask
    /// noise, masks in ascending code order.
    pub fn sample_dna_from_noise(&self, noises: &[Vec<f64>], stream: RngStream) -> FieldRealisation {
        let dim = self.dim();
        assert_eq!(noises.len(), 1 << dim, "one noise vector per boundary mask");
        let weight = 2.0f64.powf(-(dim as f64) / 2.0);
        let mut total: Option<ArrayD<f64>> = None;
        for (mask, noise) in BoundaryMask::all(dim).iter().zip(noises) {
            let field = self.sample_single_bc_from_noise(mask, noise, stream);
            total = Some(match total {
                None => field.values,
                Some(mut acc) => {
                    acc += &field.values;
                    acc
                }
            });
        }
        FieldRealisation {
            values: total.expect("at least one mask") * weight,
            alpha: self.table.params().alpha,
            grid: GridKind::Closed,
            stream,
        }
    }

    /// The DNA field: `2^d` independent boundary fields averaged, one
    /// noise substream per mask.
    pub fn sample_dna(&self, stream: RngStream) -> FieldRealisation {
        let dim = self.dim();
        let noises: Vec<Vec<f64>> = BoundaryMask::all(dim)
            .iter()
            .map(|mask| stream.substream(mask.code() as u64).normals(self.noise_len(mask)))
            .collect();
        self.sample_dna_from_noise(&noises, stream)
    }

    /// Naive summation of the DNA series at arbitrary points; consumes
    /// noise exactly as [`DnaSampler::sample_dna`], so matching streams
    /// give matching values at grid points. Oracle for the transform path;
    /// intended for small n.
    pub fn sample_dna_direct(&self, stream: RngStream, points: &[Vec<f64>]) -> Vec<f64> {
        let noises: Vec<Vec<f64>> = BoundaryMask::all(self.dim())
            .iter()
            .map(|mask| stream.substream(mask.code() as u64).normals(self.noise_len(mask)))
            .collect();
        self.sample_dna_direct_from_noise(&noises, points)
    }

    pub fn sample_dna_direct_from_noise(
        &self,
        noises: &[Vec<f64>],
        points: &[Vec<f64>],
    ) -> Vec<f64> {
        let dim = self.dim();
        let n = self.n();
        let alpha = self.table.params().alpha;
        let weight = 2.0f64.powf(-(dim as f64) / 2.0);
        let scale = (2.0 / alpha).powf(dim as f64 / 2.0);
        let mut out = vec![0.0; points.len()];
        for (mask, noise) in BoundaryMask::all(dim).iter().zip(noises) {
            let shape: Vec<usize> =
                (0..dim).map(|j| if mask.is_dirichlet(j) { n } else { n + 1 }).collect();
            let mut mode = vec![0usize; dim];
            for (flat, &xi) in noise.iter().enumerate() {
                let mut idx = flat;
                for j in (0..dim).rev() {
                    let k = idx % shape[j];
                    idx /= shape[j];
                    mode[j] = if mask.is_dirichlet(j) { k + 1 } else { k };
                }
                let lambda = self.table.coeff(&mode);
                let mut amp = xi * lambda.sqrt() * scale * weight;
                for j in 0..dim {
                    if !mask.is_dirichlet(j) && mode[j] == 0 {
                        amp *= std::f64::consts::FRAC_1_SQRT_2;
                    }
                }
                if amp == 0.0 {
                    continue;
                }
                for (p, acc) in points.iter().zip(out.iter_mut()) {
                    let mut basis = 1.0;
                    for j in 0..dim {
                        let theta = std::f64::consts::PI * mode[j] as f64 * p[j] / alpha;
                        basis *= if mask.is_dirichlet(j) { theta.sin() } else { theta.cos() };
                    }
                    *acc += amp * basis;
                }
            }
        }
        out
    }
}

/// Naive periodised sampler: complex spectral noise pushed through a
/// d-dimensional FFT on `m` points per axis over one period `[0, alpha)^d`.
/// Real and imaginary output parts are two independent realisations with
/// covariance equal to the truncated period-`alpha` covariance.
pub struct PeriodicSampler {
    table: SpectrumTable,
    m: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl PeriodicSampler {
    /// `m` grid points per axis; `m >= 2n + 1` keeps the `|mu|_inf <= n`
    /// modes alias-free on the grid.
    pub fn new(table: SpectrumTable, m: usize) -> Result<Self> {
        if table.scaling() != Scaling::Alpha {
            return Err(GrfError::Unsupported(
                "periodic sampling needs a spectrum table in the alpha convention".into(),
            ));
        }
        let n = table.params().n;
        if m < 2 * n + 1 {
            return Err(GrfError::Size(format!(
                "grid resolution {m} aliases truncation n = {n}; need m >= 2n + 1"
            )));
        }
        let fft = FftPlanner::new().plan_fft(m, FftDirection::Forward);
        Ok(Self { table, m, fft })
    }

    /// Default grid: `m = 2(n + 1)` points per axis.
    pub fn with_default_grid(table: SpectrumTable) -> Result<Self> {
        let m = 2 * (table.params().n + 1);
        Self::new(table, m)
    }

    pub fn table(&self) -> &SpectrumTable {
        &self.table
    }

    pub fn grid_points(&self) -> usize {
        self.m
    }

    /// Real noise values consumed per draw: (re, im) per mode.
    pub fn noise_len(&self) -> usize {
        let n = self.table.params().n;
        2 * (2 * n + 1).pow(self.table.params().dim as u32)
    }

    pub fn sample_from_noise(&self, noise: &[f64], stream: RngStream) -> (FieldRealisation, FieldRealisation) {
        let dim = self.table.params().dim;
        let n = self.table.params().n;
        let alpha = self.table.params().alpha;
        let m = self.m;
        assert_eq!(noise.len(), self.noise_len(), "noise length mismatch");

        let mut spectral: ArrayD<Complex64> = ArrayD::zeros(IxDyn(&vec![m; dim]));
        let amp0 = alpha.powf(-(dim as f64) / 2.0);
        let width = 2 * n + 1;
        let mut tab_idx = vec![0usize; dim];
        let mut bin = vec![0usize; dim];
        for flat in 0..width.pow(dim as u32) {
            let mut idx = flat;
            for j in (0..dim).rev() {
                let mu = (idx % width) as i64 - n as i64; // -n ..= n
                idx /= width;
                tab_idx[j] = mu.unsigned_abs() as usize;
                bin[j] = mu.rem_euclid(m as i64) as usize;
            }
            let lambda = self.table.coeff(&tab_idx);
            let xi = Complex64::new(noise[2 * flat], noise[2 * flat + 1]);
            spectral[IxDyn(&bin)] += amp0 * lambda.sqrt() * xi;
        }

        let mut scratch = vec![Complex64::default(); self.fft.get_inplace_scratch_len()];
        for axis in 0..dim {
            for mut lane in spectral.lanes_mut(ndarray::Axis(axis)) {
                let mut x: Vec<Complex64> = lane.iter().copied().collect();
                self.fft.process_with_scratch(&mut x, &mut scratch);
                for (dst, v) in lane.iter_mut().zip(x) {
                    *dst = v;
                }
            }
        }

        let re = spectral.mapv(|c| c.re);
        let im = spectral.mapv(|c| c.im);
        (
            FieldRealisation { values: re, alpha, grid: GridKind::HalfOpen, stream },
            FieldRealisation { values: im, alpha, grid: GridKind::HalfOpen, stream },
        )
    }

    /// Two independent realisations on the grid `x_k = k alpha / m`.
    pub fn sample(&self, stream: RngStream) -> (FieldRealisation, FieldRealisation) {
        let noise = stream.substream(0).normals(self.noise_len());
        self.sample_from_noise(&noise, stream)
    }
}

/// Circulant-embedding sampler: exact target covariance on the first
/// `n_target` grid points per axis, provided the embedding spectrum is
/// nonnegative.
pub struct CeSampler {
    model: CovarianceModel,
    n_target: usize,
    spacing: f64,
    m: usize,
    dim: usize,
    /// sqrt(lambda_k / m^d), negatives within tolerance clamped to zero.
    amps: ArrayD<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl CeSampler {
    /// Builds the embedding with `m = factor * n_target` points per axis
    /// over the period `m * spacing`. Fails with `NegativeSpectrum` when
    /// the embedding is not positive semidefinite at this padding.
    pub fn new(
        model: CovarianceModel,
        n_target: usize,
        spacing: f64,
        factor: usize,
        dim: usize,
    ) -> Result<Self> {
        if n_target < 2 {
            return Err(GrfError::Size("target grid needs at least 2 points".into()));
        }
        let m = factor * n_target;
        if m < 2 * (n_target - 1) {
            return Err(GrfError::Size(format!(
                "embedding length {m} cannot carry exact covariance for {n_target} points; use factor >= 2"
            )));
        }
        let alpha_embed = 0.5 * m as f64 * spacing;
        let spectrum = ce_spectrum(&model, alpha_embed, m, dim)?;
        if !spectrum_is_nonneg(&spectrum) {
            let min = spectrum.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            return Err(GrfError::NegativeSpectrum { min_eigenvalue: min });
        }
        let cells = (m as f64).powi(dim as i32);
        let amps = spectrum.mapv(|v| (v.max(0.0) / cells).sqrt());
        let fft = FftPlanner::new().plan_fft(m, FftDirection::Forward);
        Ok(Self { model, n_target, spacing, m, dim, amps, fft })
    }

    pub fn model(&self) -> &CovarianceModel {
        &self.model
    }

    pub fn embedding_len(&self) -> usize {
        self.m
    }

    pub fn noise_len(&self) -> usize {
        2 * self.m.pow(self.dim as u32)
    }

    pub fn sample_from_noise(&self, noise: &[f64], stream: RngStream) -> (FieldRealisation, FieldRealisation) {
        assert_eq!(noise.len(), self.noise_len(), "noise length mismatch");
        let m = self.m;
        let dim = self.dim;
        let mut spectral: ArrayD<Complex64> = ArrayD::zeros(IxDyn(&vec![m; dim]));
        for ((dst, &amp), pair) in
            spectral.iter_mut().zip(self.amps.iter()).zip(noise.chunks_exact(2))
        {
            *dst = Complex64::new(pair[0], pair[1]) * amp;
        }
        let mut scratch = vec![Complex64::default(); self.fft.get_inplace_scratch_len()];
        for axis in 0..dim {
            for mut lane in spectral.lanes_mut(ndarray::Axis(axis)) {
                let mut x: Vec<Complex64> = lane.iter().copied().collect();
                self.fft.process_with_scratch(&mut x, &mut scratch);
                for (dst, v) in lane.iter_mut().zip(x) {
                    *dst = v;
                }
            }
        }
        // Restrict the periodic evaluation to the target window.
        let window: Vec<_> = (0..dim).map(|_| ndarray::Slice::from(0..self.n_target)).collect();
        let mut view = spectral.view();
        for (axis, s) in window.iter().enumerate() {
            view.slice_axis_inplace(ndarray::Axis(axis), *s);
        }
        let alpha = self.n_target as f64 * self.spacing;
        let re = view.mapv(|c| c.re);
        let im = view.mapv(|c| c.im);
        (
            FieldRealisation { values: re, alpha, grid: GridKind::HalfOpen, stream },
            FieldRealisation { values: im, alpha, grid: GridKind::HalfOpen, stream },
        )
    }

    pub fn sample(&self, stream: RngStream) -> (FieldRealisation, FieldRealisation) {
        let noise = stream.substream(0).normals(self.noise_len());
        self.sample_from_noise(&noise, stream)
    }
}
