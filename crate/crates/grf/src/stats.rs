//! Monte-Carlo covariance estimation, maximal covariance errors, and the
//! analytic periodisation/truncation error bounds.
//!
//! Estimation follows a fixed-batch protocol: realisations are split into
//! equal batches, each batch is accumulated sequentially by index, and the
//! per-batch estimates give the spread that calibrates the reported error.
//! Batches are the unit of parallelism, and batch results are merged in
//! batch order, so the outcome is bit-identical for any worker count.

use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::covariance::CovarianceModel;
use crate::error::{GrfError, Result};
use crate::periodisation::{periodised_cov_lattice, periodised_cov_spectral, SpectrumTable};

/// Co-moment storage layout of a [`MomentAccumulator`].
#[derive(Debug, Clone)]
pub enum CoMoments {
    /// Full co-moment matrix, row-major `len * len`.
    Full(Vec<f64>),
    /// Diagonal only (per-coordinate variance).
    Diagonal(Vec<f64>),
    /// Selected reference rows plus the diagonal — the covariance probe
    /// layout for grids too large for the full matrix.
    RefRows { refs: Vec<usize>, rows: Vec<Vec<f64>>, diag: Vec<f64> },
}

/// Numerically stable streaming moment estimator (Welford updates, Chan
/// merging). Merging two accumulators reproduces accumulating the
/// concatenated stream.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    count: u64,
    mean: Vec<f64>,
    comoments: CoMoments,
}

impl MomentAccumulator {
    pub fn full(len: usize) -> Self {
        Self { count: 0, mean: vec![0.0; len], comoments: CoMoments::Full(vec![0.0; len * len]) }
    }

    pub fn diagonal(len: usize) -> Self {
        Self { count: 0, mean: vec![0.0; len], comoments: CoMoments::Diagonal(vec![0.0; len]) }
    }

    pub fn ref_rows(len: usize, refs: Vec<usize>) -> Self {
        let rows = refs.iter().map(|_| vec![0.0; len]).collect();
        Self {
            count: 0,
            mean: vec![0.0; len],
            comoments: CoMoments::RefRows { refs, rows, diag: vec![0.0; len] },
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn push(&mut self, sample: &[f64]) {
        assert_eq!(sample.len(), self.mean.len(), "sample length mismatch");
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        // delta before the mean update, delta2 after; comoment gets
        // delta_i * delta2_j.
        let delta: Vec<f64> = sample.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * inv;
        }
        let delta2: Vec<f64> = sample.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        let len = self.mean.len();
        match &mut self.comoments {
            CoMoments::Full(mat) => {
                for i in 0..len {
                    let di = delta[i];
                    let row = &mut mat[i * len..(i + 1) * len];
                    for (entry, d2) in row.iter_mut().zip(&delta2) {
                        *entry += di * d2;
                    }
                }
            }
            CoMoments::Diagonal(diag) => {
                for ((entry, d), d2) in diag.iter_mut().zip(&delta).zip(&delta2) {
                    *entry += d * d2;
                }
            }
            CoMoments::RefRows { refs, rows, diag } => {
                for (r, row) in refs.iter().zip(rows.iter_mut()) {
                    let dr = delta[*r];
                    for (entry, d2) in row.iter_mut().zip(&delta2) {
                        *entry += dr * d2;
                    }
                }
                for ((entry, d), d2) in diag.iter_mut().zip(&delta).zip(&delta2) {
                    *entry += d * d2;
                }
            }
        }
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        assert_eq!(self.mean.len(), other.mean.len(), "accumulator length mismatch");
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let shift: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let w = na * nb / n;
        let len = self.mean.len();
        match (&mut self.comoments, &other.comoments) {
            (CoMoments::Full(ma), CoMoments::Full(mb)) => {
                for i in 0..len {
                    for j in 0..len {
                        ma[i * len + j] += mb[i * len + j] + w * shift[i] * shift[j];
                    }
                }
            }
            (CoMoments::Diagonal(da), CoMoments::Diagonal(db)) => {
                for i in 0..len {
                    da[i] += db[i] + w * shift[i] * shift[i];
                }
            }
            (
                CoMoments::RefRows { refs: ra, rows: rowsa, diag: da },
                CoMoments::RefRows { refs: rb, rows: rowsb, diag: db },
            ) => {
                assert_eq!(ra, rb, "reference rows mismatch");
                for ((r, rowa), rowb) in ra.iter().zip(rowsa.iter_mut()).zip(rowsb) {
                    for j in 0..len {
                        rowa[j] += rowb[j] + w * shift[*r] * shift[j];
                    }
                }
                for i in 0..len {
                    da[i] += db[i] + w * shift[i] * shift[i];
                }
            }
            _ => panic!("cannot merge accumulators with different layouts"),
        }
        for (m, s) in self.mean.iter_mut().zip(&shift) {
            *m += s * nb / n;
        }
        self.count += other.count;
    }

    fn comoment_entry(&self, i: usize, j: usize) -> Option<f64> {
        let len = self.mean.len();
        match &self.comoments {
            CoMoments::Full(mat) => Some(mat[i * len + j]),
            CoMoments::Diagonal(diag) => (i == j).then(|| diag[i]),
            CoMoments::RefRows { refs, rows, diag } => {
                if i == j {
                    Some(diag[i])
                } else if let Some(pos) = refs.iter().position(|&r| r == i) {
                    Some(rows[pos][j])
                } else {
                    refs.iter().position(|&r| r == j).map(|pos| rows[pos][i])
                }
            }
        }
    }

    /// Central covariance estimate (divides by count).
    pub fn covariance(&self, i: usize, j: usize) -> Option<f64> {
        self.comoment_entry(i, j).map(|c| c / self.count as f64)
    }

    /// Raw second moment E[x_i x_j]; the covariance estimator of choice
    /// for fields that are centred by construction.
    pub fn second_moment(&self, i: usize, j: usize) -> Option<f64> {
        self.comoment_entry(i, j)
            .map(|c| c / self.count as f64 + self.mean[i] * self.mean[j])
    }
}

/// Probe set for maximal covariance error estimation: reference rows plus
/// the diagonal, with target covariance values to compare against.
pub struct ProbeSet {
    pub refs: Vec<usize>,
    /// target covariance c(x_r, x_j) per reference row
    pub target_rows: Vec<Vec<f64>>,
    /// target variance per grid point
    pub target_diag: Vec<f64>,
}

impl ProbeSet {
    /// Max |empirical - target| over the probes of one accumulator.
    fn max_error(&self, acc: &MomentAccumulator) -> f64 {
        let mut worst = 0.0f64;
        for (pos, &r) in self.refs.iter().enumerate() {
            for j in 0..acc.len() {
                let emp = acc.second_moment(r, j).expect("probe entry present");
                worst = worst.max((emp - self.target_rows[pos][j]).abs());
            }
        }
        for j in 0..acc.len() {
            let emp = acc.second_moment(j, j).expect("diagonal present");
            worst = worst.max((emp - self.target_diag[j]).abs());
        }
        worst
    }
}

/// Monte-Carlo maximal covariance error with batch statistics.
#[derive(Debug, Clone)]
pub struct CovErrorReport {
    /// max over probes of |pooled empirical covariance - target|
    pub max_error: f64,
    /// the same statistic per batch
    pub per_batch_errors: Vec<f64>,
    /// standard deviation of the per-batch errors
    pub std_error: f64,
    pub n_samples: u64,
    pub batches: usize,
}

fn sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var =
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

/// Runs `n_samples` realisations (split into `batches` equal batches) of
/// `gen`, accumulates covariance probes, and reports the maximal
/// covariance error with its batch spread. `gen` maps a realisation index
/// to the field values on the probe grid; indices 0..n_samples are fixed,
/// so the result does not depend on the worker count.
pub fn empirical_max_cov_error<F>(
    gen: F,
    len: usize,
    probes: &ProbeSet,
    n_samples: u64,
    batches: usize,
) -> Result<CovErrorReport>
where
    F: Fn(u64) -> Vec<f64> + Sync,
{
    if batches == 0 || n_samples == 0 || n_samples % batches as u64 != 0 {
        return Err(GrfError::Domain(format!(
            "sample count {n_samples} must be a positive multiple of the batch count {batches}"
        )));
    }
    let per_batch = n_samples / batches as u64;
    let batch_accs: Vec<MomentAccumulator> = (0..batches as u64)
        .into_par_iter()
        .map(|b| {
            let mut acc = MomentAccumulator::ref_rows(len, probes.refs.clone());
            for r in b * per_batch..(b + 1) * per_batch {
                let values = gen(r);
                acc.push(&values);
            }
            acc
        })
        .collect();
    let per_batch_errors: Vec<f64> = batch_accs.iter().map(|acc| probes.max_error(acc)).collect();
    let mut pooled = MomentAccumulator::ref_rows(len, probes.refs.clone());
    for acc in &batch_accs {
        pooled.merge(acc);
    }
    Ok(CovErrorReport {
        max_error: probes.max_error(&pooled),
        std_error: sd(&per_batch_errors),
        per_batch_errors,
        n_samples,
        batches,
    })
}

/// Per-grid-point empirical variance (raw second moment: the fields are
/// centred by construction), batch-deterministic like
/// [`empirical_max_cov_error`].
pub fn marginal_variance_profile<F>(
    gen: F,
    len: usize,
    n_samples: u64,
    batches: usize,
) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Vec<f64> + Sync,
{
    if batches == 0 || n_samples == 0 || n_samples % batches as u64 != 0 {
        return Err(GrfError::Domain(format!(
            "sample count {n_samples} must be a positive multiple of the batch count {batches}"
        )));
    }
    let per_batch = n_samples / batches as u64;
    let batch_accs: Vec<MomentAccumulator> = (0..batches as u64)
        .into_par_iter()
        .map(|b| {
            let mut acc = MomentAccumulator::diagonal(len);
            for r in b * per_batch..(b + 1) * per_batch {
                acc.push(&gen(r));
            }
            acc
        })
        .collect();
    let mut pooled = MomentAccumulator::diagonal(len);
    for acc in &batch_accs {
        pooled.merge(acc);
    }
    Ok((0..len).map(|j| pooled.second_moment(j, j).unwrap()).collect())
}

/// Deterministic maximal covariance error: max over the probe points of
/// |truncated periodised covariance - pristine stationary covariance|.
pub fn analytic_max_cov_error(table: &SpectrumTable, probes: &[Vec<f64>]) -> Result<f64> {
    let model = *table.model();
    let mut worst = 0.0f64;
    for delta in probes {
        let spectral = periodised_cov_spectral(table, delta);
        let pristine = model.stationary(delta)?;
        worst = worst.max((spectral - pristine).abs());
    }
    Ok(worst)
}

/// Periodisation error bound for Matérn covariances:
/// `C_1 e^{-2 theta alpha kappa} ((alpha kappa)^{nu-1/2}
///   + Gamma(d+nu+1/2) / (alpha kappa)^{1+d})`
/// with `C_1 = d 2^{d+2nu-1} e^{1+kappa}`,
/// `theta = Gamma(d+nu+1/2)^{-1/(d+nu-1/2)}`, `kappa = sqrt(2 nu)/ell`.
///
/// Preconditions: `nu >= 1/2` and `2 alpha kappa > max(3/2, d+nu-3/2)`.
pub fn periodisation_error_bound(nu: f64, ell: f64, alpha: f64, dim: usize) -> Result<f64> {
    if !(nu >= 0.5) {
        return Err(GrfError::Domain(format!("bound requires nu >= 1/2, got nu = {nu}")));
    }
    let d = dim as f64;
    let kappa = (2.0 * nu).sqrt() / ell;
    let gate = (1.5f64).max(d + nu - 1.5);
    if !(2.0 * alpha * kappa > gate) {
        return Err(GrfError::Domain(format!(
            "bound requires 2 alpha kappa > max(3/2, d + nu - 3/2): 2*{alpha}*{kappa:.4} = {:.4} <= {gate:.4}",
            2.0 * alpha * kappa
        )));
    }
    let theta = gamma(d + nu + 0.5).powf(-1.0 / (d + nu - 0.5));
    let c1 = d * 2.0f64.powf(d + 2.0 * nu - 1.0) * (1.0 + kappa).exp();
    let ak = alpha * kappa;
    Ok(c1 * (-2.0 * theta * ak).exp() * (ak.powf(nu - 0.5) + gamma(d + nu + 0.5) / ak.powf(1.0 + d)))
}

/// Decay exponent `theta` of the periodisation bound.
pub fn periodisation_bound_theta(nu: f64, dim: usize) -> f64 {
    let d = dim as f64;
    gamma(d + nu + 0.5).powf(-1.0 / (d + nu - 0.5))
}

/// Truncation error bound for the averaged field's covariance:
/// `C_2 (alpha kappa)^{2nu+d} n^{-2nu}` with
/// `C_2 = d C_nu (2 kappa)^d pi^{-(2nu+d)} (1 + 1/(2nu))`.
pub fn truncation_error_bound(nu: f64, ell: f64, alpha: f64, n: usize, dim: usize) -> Result<f64> {
    if !(nu > 0.0) || !(ell > 0.0) || !(alpha > 0.0) || n == 0 {
        return Err(GrfError::Domain("truncation bound needs positive parameters".into()));
    }
    let d = dim as f64;
    let kappa = (2.0 * nu).sqrt() / ell;
    let c_nu = (4.0 * std::f64::consts::PI).powf(d / 2.0) * gamma(nu + d / 2.0) / gamma(nu);
    let c2 = d * c_nu * (2.0 * kappa).powf(d) * std::f64::consts::PI.powf(-(2.0 * nu + d))
        * (1.0 + 0.5 / nu);
    Ok(c2 * (alpha * kappa).powf(2.0 * nu + d) * (n as f64).powf(-2.0 * nu))
}

/// Probe grid for the lattice-vs-bound checks: `count` points covering
/// `[-1, 1]^d` (a deterministic low-discrepancy sweep plus the origin).
pub fn default_probe_points(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut probes = Vec::with_capacity(count);
    probes.push(vec![0.0; dim]);
    let golden = 0.618_033_988_749_894_9_f64;
    for k in 1..count {
        let mut p = Vec::with_capacity(dim);
        for j in 0..dim {
            let t = (k as f64 * golden * (j as f64 + 1.0)).fract();
            p.push(2.0 * t - 1.0);
        }
        probes.push(p);
    }
    probes
}

/// Max over probe points of the *lattice* periodisation error
/// `sum_{eta != 0} phi(delta + period eta)` — the quantity the
/// periodisation bound controls.
pub fn lattice_periodisation_error(
    model: &CovarianceModel,
    period: f64,
    probes: &[Vec<f64>],
    shell_cutoff: usize,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for delta in probes {
        let periodised = periodised_cov_lattice(model, period, delta, shell_cutoff)?;
        let pristine = model.stationary(delta)?;
        worst = worst.max((periodised - pristine).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceModel;
    use crate::periodisation::{PeriodisationParams, Scaling};
    use crate::rng::RngStream;
    use crate::sampler::{BoundaryMask, DnaSampler};

    fn matern(nu: f64, ell: f64) -> CovarianceModel {
        CovarianceModel::matern(nu, ell).unwrap()
    }

    fn random_stream(len: usize, seed: u64, count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|i| RngStream::new(seed, i as u64).normals(len))
            .collect()
    }

    #[test]
    fn accumulator_merge_equals_concatenation() {
        for layout in 0..3 {
            let len = 7;
            let refs = vec![0usize, 3];
            let make = |_: ()| match layout {
                0 => MomentAccumulator::full(len),
                1 => MomentAccumulator::diagonal(len),
                _ => MomentAccumulator::ref_rows(len, refs.clone()),
            };
            let data = random_stream(len, 42, 60);
            let mut whole = make(());
            for x in &data {
                whole.push(x);
            }
            let mut left = make(());
            let mut right = make(());
            for x in &data[..23] {
                left.push(x);
            }
            for x in &data[23..] {
                right.push(x);
            }
            left.merge(&right);
            assert_eq!(left.count(), whole.count());
            for i in 0..len {
                assert!((left.mean()[i] - whole.mean()[i]).abs() < 1e-12);
                for j in 0..len {
                    match (left.covariance(i, j), whole.covariance(i, j)) {
                        (Some(a), Some(b)) => assert!((a - b).abs() < 1e-10, "layout {layout}"),
                        (None, None) => {}
                        _ => panic!("layout disagreement"),
                    }
                }
            }
        }
    }

    #[test]
    fn accumulator_matches_two_pass() {
        let len = 4;
        let data = random_stream(len, 7, 200);
        let mut acc = MomentAccumulator::full(len);
        for x in &data {
            acc.push(x);
        }
        let n = data.len() as f64;
        for i in 0..len {
            let mi: f64 = data.iter().map(|x| x[i]).sum::<f64>() / n;
            assert!((acc.mean()[i] - mi).abs() < 1e-12);
            for j in 0..len {
                let mj: f64 = data.iter().map(|x| x[j]).sum::<f64>() / n;
                let two_pass: f64 =
                    data.iter().map(|x| (x[i] - mi) * (x[j] - mj)).sum::<f64>() / n;
                assert!((acc.covariance(i, j).unwrap() - two_pass).abs() < 1e-12);
                let raw: f64 = data.iter().map(|x| x[i] * x[j]).sum::<f64>() / n;
                assert!((acc.second_moment(i, j).unwrap() - raw).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn perfect_sampler_control_run() {
        // Known-answer control: exact-covariance Gaussian vectors from a
        // dense Cholesky factor of the pristine Matérn matrix. The
        // estimated max error must sit within 5 standard errors of zero.
        let n = 100usize;
        let model = matern(1.0, 0.2);
        let h = 1.0 / (n - 1) as f64;
        let cov: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| model.stationary(&[(i as f64 - j as f64) * h]).unwrap())
                    .collect()
            })
            .collect();
        // dense Cholesky
        let mut chol = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = cov[i][j];
                for k in 0..j {
                    sum -= chol[i][k] * chol[j][k];
                }
                if i == j {
                    chol[i][j] = sum.sqrt();
                } else {
                    chol[i][j] = sum / chol[j][j];
                }
            }
        }
        let gen = |r: u64| -> Vec<f64> {
            let xi = RngStream::new(1234, r).normals(n);
            (0..n)
                .map(|i| chol[i][..=i].iter().zip(&xi).map(|(l, x)| l * x).sum())
                .collect()
        };
        let probes = ProbeSet {
            refs: vec![0],
            target_rows: vec![cov[0].clone()],
            target_diag: (0..n).map(|i| cov[i][i]).collect(),
        };
        let n_samples = 200_000u64;
        let report = empirical_max_cov_error(gen, n, &probes, n_samples, 40).unwrap();
        // per-entry standard error <= sqrt(2/N); allow 5 of them for the max
        let se = (2.0 / n_samples as f64).sqrt();
        assert!(
            report.max_error <= 5.0 * se,
            "control run error {:.3e} vs 5 se {:.3e}",
            report.max_error,
            5.0 * se
        );
        assert!(report.std_error > 0.0);
        assert_eq!(report.per_batch_errors.len(), 40);
    }

    #[test]
    fn batch_split_must_divide() {
        let gen = |_: u64| vec![0.0];
        let probes =
            ProbeSet { refs: vec![0], target_rows: vec![vec![0.0]], target_diag: vec![0.0] };
        assert!(empirical_max_cov_error(gen, 1, &probes, 11, 4).is_err());
    }

    #[test]
    fn analytic_error_at_origin_is_variance_deficit() {
        let table = SpectrumTable::build(
            matern(0.5, 1.0),
            Scaling::TwoAlpha,
            PeriodisationParams::new(2.0, 2048, 1).unwrap(),
        )
        .unwrap();
        let probes = vec![vec![0.0]];
        let got = analytic_max_cov_error(&table, &probes).unwrap();
        let want = (periodised_cov_spectral(&table, &[0.0]) - 1.0).abs();
        assert_eq!(got, want);
        // closed geometric form of the untruncated lattice error at 0
        let exact = 2.0 * (-4.0f64).exp() / (1.0 - (-4.0f64).exp());
        assert!((got - exact).abs() < 1e-3, "{got} vs {exact}");
    }

    #[test]
    fn analytic_error_decays_with_alpha_and_n() {
        // Large alpha with n scaled along (n = 2048 alpha): the total
        // error collapses well below the alpha = 1 baseline.
        let probes = default_probe_points(1, 50);
        let err_at = |alpha: f64, n: usize| {
            let table = SpectrumTable::build(
                matern(2.0, 0.1),
                Scaling::TwoAlpha,
                PeriodisationParams::new(alpha, n, 1).unwrap(),
            )
            .unwrap();
            analytic_max_cov_error(&table, &probes).unwrap()
        };
        let err = err_at(8.0, 8 * 2048);
        assert!(err <= 1e-8, "error {err:e} did not collapse");
        let base_err = err_at(1.0, 2048);
        assert!(base_err > 10.0 * err, "{base_err:e} vs {err:e}");
    }

    #[test]
    fn periodisation_bound_dominates_lattice_error() {
        let probes = default_probe_points(1, 100);
        for (nu, ell, alpha) in [(1.0, 0.25, 1.0), (0.5, 0.1, 2.0)] {
            let model = matern(nu, ell);
            let bound = periodisation_error_bound(nu, ell, alpha, 1).unwrap();
            let actual = lattice_periodisation_error(&model, 2.0 * alpha, &probes, 60).unwrap();
            assert!(actual <= bound, "nu={nu} ell={ell}: {actual:e} > {bound:e}");
        }
    }

    #[test]
    fn periodisation_bound_decreases_in_alpha() {
        let mut prev = f64::INFINITY;
        for alpha in [2.0, 4.0, 8.0] {
            let b = periodisation_error_bound(1.0, 0.25, alpha, 1).unwrap();
            assert!(b < prev, "bound not decreasing at alpha {alpha}");
            prev = b;
        }
    }

    #[test]
    fn periodisation_bound_precondition_gate() {
        // 2 alpha kappa = 1 violates the gate (kappa = 0.5 at nu=0.5, ell=2p)
        let err = periodisation_error_bound(0.5, 2.0, 1.0, 1).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("2 alpha kappa"), "unhelpful message: {msg}");
        assert!(periodisation_error_bound(0.3, 0.1, 1.0, 1).is_err());
    }

    #[test]
    fn truncation_bound_power_law_ratio() {
        let b1 = truncation_error_bound(2.0, 0.1, 1.0, 512, 1).unwrap();
        let b2 = truncation_error_bound(2.0, 0.1, 1.0, 1024, 1).unwrap();
        assert!((b1 / b2 - 16.0).abs() < 1e-9); // 2^{2 nu} = 16
    }

    #[test]
    fn truncation_bound_collapses_for_huge_n() {
        let b = truncation_error_bound(2.0, 0.1, 1.0, 1_000_000, 1).unwrap();
        assert!(b < 1e-8, "{b:e}");
    }

    #[test]
    fn truncation_bound_dominates_spectral_gap() {
        let probes = default_probe_points(1, 50);
        let (nu, ell, alpha, n) = (2.0, 0.4, 1.0, 256);
        let model = matern(nu, ell);
        let table = SpectrumTable::build(
            model,
            Scaling::TwoAlpha,
            PeriodisationParams::new(alpha, n, 1).unwrap(),
        )
        .unwrap();
        let bound = truncation_error_bound(nu, ell, alpha, n, 1).unwrap();
        for delta in &probes {
            let spectral = periodised_cov_spectral(&table, delta);
            let lattice = periodised_cov_lattice(&model, 2.0 * alpha, delta, 60).unwrap();
            assert!(
                (spectral - lattice).abs() <= bound,
                "gap {:e} above bound {bound:e}",
                (spectral - lattice).abs()
            );
        }
    }

    #[test]
    fn marginal_variance_dirichlet_dips_neumann_bumps() {
        let n = 32;
        let table = SpectrumTable::build(
            matern(1.0, 0.2),
            Scaling::TwoAlpha,
            PeriodisationParams::new(1.0, n, 1).unwrap(),
        )
        .unwrap();
        let sampler = DnaSampler::new(table).unwrap();
        let dirichlet = BoundaryMask::new(vec![true]);
        let neumann = BoundaryMask::new(vec![false]);
        let gen_d = |r: u64| {
            sampler
                .sample_single_bc(&dirichlet, RngStream::new(5, r))
                .values
                .into_raw_vec()
        };
        let gen_n = |r: u64| {
            sampler
                .sample_single_bc(&neumann, RngStream::new(6, r))
                .values
                .into_raw_vec()
        };
        let var_d = marginal_variance_profile(gen_d, n + 1, 4000, 8).unwrap();
        let var_n = marginal_variance_profile(gen_n, n + 1, 4000, 8).unwrap();
        // Dirichlet: exactly zero on the boundary
        assert_eq!(var_d[0], 0.0);
        assert_eq!(var_d[n], 0.0);
        // Neumann: boundary variance clearly exceeds the centre variance
        assert!(var_n[0] > 1.5 * var_n[n / 2], "{} vs {}", var_n[0], var_n[n / 2]);
    }

    #[test]
    fn prop_2_5_log_error_slope() {
        // log lattice periodisation error at delta = 0 falls at least as
        // fast as 90% of the bound's rate -2 theta kappa.
        let (nu, ell) = (1.0, 0.25);
        let model = matern(nu, ell);
        let kappa = (2.0 * nu).sqrt() / ell;
        let theta = periodisation_bound_theta(nu, 1);
        let alphas = [2.0, 4.0, 8.0, 16.0];
        let logs: Vec<f64> = alphas
            .iter()
            .map(|&a| {
                let err =
                    crate::periodisation::periodised_cov_lattice_tail(&model, 2.0 * a, &[0.0], 60)
                        .unwrap();
                err.ln()
            })
            .collect();
        // least-squares slope
        let n = alphas.len() as f64;
        let sx: f64 = alphas.iter().sum();
        let sy: f64 = logs.iter().sum();
        let sxx: f64 = alphas.iter().map(|a| a * a).sum();
        let sxy: f64 = alphas.iter().zip(&logs).map(|(a, l)| a * l).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(
            slope <= -2.0 * theta * kappa * 0.9,
            "slope {slope:.3} vs required {:.3}",
            -2.0 * theta * kappa * 0.9
        );
    }
}
