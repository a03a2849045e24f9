//! Finite-element realisation of the averaging construction for the
//! Whittle SPDE `(kappa^2 - Delta) u = sqrt(C_nu) kappa^{-nu} W` on the
//! square, beta = 1 (i.e. nu = 1 in d = 2).
//!
//! Piecewise-linear elements on a uniform right-triangle mesh; Dirichlet
//! axes are imposed by node elimination, the white-noise load is the
//! Cholesky factor of the consistent mass matrix, and solves go through a
//! direct banded Cholesky factorisation of `A = kappa^2 M + K`, so a
//! realisation is one sparse triangular pair per boundary mask.

use ndarray::{ArrayD, IxDyn};
use statrs::function::gamma::gamma;

use crate::error::{GrfError, Result};
use crate::field::{FieldRealisation, GridKind};
use crate::rng::RngStream;
use crate::sampler::BoundaryMask;

/// Uniform right-triangle triangulation of the square `(0, L)^2` with `m`
/// subdivisions per axis: `(m+1)^2` nodes, `2 m^2` cells, each square cell
/// split along its down-right diagonal.
#[derive(Debug, Clone)]
pub struct StructuredMesh {
    pub m: usize,
    pub size: f64,
}

impl StructuredMesh {
    pub fn new(m: usize, size: f64) -> Result<Self> {
        if m < 2 {
            return Err(GrfError::Domain("mesh needs at least 2 subdivisions per axis".into()));
        }
        if !(size > 0.0) {
            return Err(GrfError::Domain("mesh size must be positive".into()));
        }
        Ok(Self { m, size })
    }

    pub fn h(&self) -> f64 {
        self.size / self.m as f64
    }

    pub fn node_count(&self) -> usize {
        (self.m + 1) * (self.m + 1)
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * (self.m + 1) + ix
    }

    pub fn node_coords(&self, node: usize) -> (f64, f64) {
        let ix = node % (self.m + 1);
        let iy = node / (self.m + 1);
        (ix as f64 * self.h(), iy as f64 * self.h())
    }

    /// Axes `j` for which the node lies on the boundary pair Gamma_j
    /// (x_j in {0, L}).
    pub fn boundary_axes(&self, node: usize) -> Vec<usize> {
        let ix = node % (self.m + 1);
        let iy = node / (self.m + 1);
        let mut axes = Vec::new();
        if ix == 0 || ix == self.m {
            axes.push(0);
        }
        if iy == 0 || iy == self.m {
            axes.push(1);
        }
        axes
    }

    /// Nodes retained after eliminating the Dirichlet faces of `mask`.
    pub fn retained_nodes(&self, mask: &BoundaryMask) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&node| {
                self.boundary_axes(node).iter().all(|&axis| !mask.is_dirichlet(axis))
            })
            .collect()
    }
}

/// Symmetric sparse matrix in compressed-row form with a banded Cholesky
/// factorisation path (the structured mesh keeps the bandwidth at m + 2).
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseOperator {
    fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(j, v) in row.iter() {
                match merged.last_mut() {
                    Some((jj, vv)) if *jj == j => *vv += v,
                    _ => merged.push((j, v)),
                }
            }
            for (j, v) in merged {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self { dim, row_ptr, col_idx, values }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
        y
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] == j {
                return self.values[k];
            }
        }
        0.0
    }

    fn bandwidth(&self) -> usize {
        let mut band = 0usize;
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                band = band.max(i.abs_diff(self.col_idx[k]));
            }
        }
        band
    }

    /// Banded Cholesky factorisation; fails if the matrix is not positive
    /// definite.
    pub fn cholesky_banded(&self) -> Result<BandedCholesky> {
        let band = self.bandwidth();
        let dim = self.dim;
        // factor[i][k] holds L[i, i - band + k]; k = band is the diagonal
        let mut factor = vec![0.0f64; dim * (band + 1)];
        let get_a = |i: usize, j: usize| self.entry(i, j);
        for i in 0..dim {
            let lo = i.saturating_sub(band);
            for j in lo..=i {
                let mut sum = get_a(i, j);
                let klo = lo.max(j.saturating_sub(band));
                for k in klo..j {
                    sum -= factor[i * (band + 1) + (band + k - i) as usize]
                        * factor[j * (band + 1) + (band + k - j) as usize];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(GrfError::Solver(format!(
                            "matrix not positive definite at pivot {i} ({sum:.3e})"
                        )));
                    }
                    factor[i * (band + 1) + band] = sum.sqrt();
                } else {
                    factor[i * (band + 1) + band + j - i] =
                        sum / factor[j * (band + 1) + band];
                }
            }
        }
        Ok(BandedCholesky { dim, band, factor })
    }
}

/// Lower-triangular banded Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    dim: usize,
    band: usize,
    /// row-major: factor[i * (band+1) + (band - (i - j))] = L[i][j]
    factor: Vec<f64>,
}

impl BandedCholesky {
    fn l(&self, i: usize, j: usize) -> f64 {
        if j > i || i - j > self.band {
            0.0
        } else {
            self.factor[i * (self.band + 1) + self.band + j - i]
        }
    }

    /// Solves `A x = b` via forward/backward substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let lo = i.saturating_sub(self.band);
            let mut sum = b[i];
            for j in lo..i {
                sum -= self.l(i, j) * y[j];
            }
            y[i] = sum / self.l(i, i);
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let hi = (i + self.band).min(n - 1);
            let mut sum = y[i];
            for j in i + 1..=hi {
                sum -= self.l(j, i) * x[j];
            }
            x[i] = sum / self.l(i, i);
        }
        x
    }

    /// Applies the factor itself: `L xi`, the white-noise load map.
    pub fn apply_factor(&self, xi: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let lo = i.saturating_sub(self.band);
            let mut sum = 0.0;
            for j in lo..=i {
                sum += self.l(i, j) * xi[j];
            }
            out[i] = sum;
        }
        out
    }
}

/// Configuration of one stochastic boundary-value problem: the boundary
/// mask, the Matérn parameters (beta = 1 fixes nu = 1 in d = 2), and the
/// noise scaling `sqrt(C_nu) kappa^{-nu}`.
#[derive(Debug, Clone)]
pub struct BvpConfig {
    pub mask: BoundaryMask,
    pub ell: f64,
}

impl BvpConfig {
    pub fn new(mask: BoundaryMask, ell: f64) -> Result<Self> {
        if mask.dim() != 2 {
            return Err(GrfError::Unsupported("the FE solver is built for d = 2".into()));
        }
        if !(ell > 0.0) {
            return Err(GrfError::Domain("correlation length must be positive".into()));
        }
        Ok(Self { mask, ell })
    }

    pub fn nu(&self) -> f64 {
        1.0
    }

    pub fn kappa(&self) -> f64 {
        (2.0 * self.nu()).sqrt() / self.ell
    }

    /// sqrt(C_nu) kappa^{-nu} with C_nu at d = 2.
    pub fn noise_scaling(&self) -> f64 {
        let nu = self.nu();
        let c_nu = 4.0 * std::f64::consts::PI * gamma(nu + 1.0) / gamma(nu);
        c_nu.sqrt() * self.kappa().powf(-nu)
    }
}

/// Assembled operators of one BVP: `a = kappa^2 M + K` and the mass matrix
/// `M`, both restricted to the retained nodes of the mask.
pub struct AssembledBvp {
    pub config: BvpConfig,
    pub mesh: StructuredMesh,
    pub retained: Vec<usize>,
    pub stiffness: SparseOperator,
    pub mass: SparseOperator,
    pub system: SparseOperator,
}

/// P1 assembly on the structured mesh, with Dirichlet faces of the mask
/// eliminated (a node on a Dirichlet face is dropped even if it also lies
/// on a Neumann face: Dirichlet wins at corners).
pub fn assemble(mesh: &StructuredMesh, config: &BvpConfig) -> AssembledBvp {
    let m = mesh.m;
    let h = mesh.h();
    let retained = mesh.retained_nodes(&config.mask);
    let mut global_to_local = vec![usize::MAX; mesh.node_count()];
    for (local, &node) in retained.iter().enumerate() {
        global_to_local[node] = local;
    }

    // Reference P1 element matrices for a right triangle with legs h:
    // stiffness is h-independent, mass scales with the area h^2/2.
    // Triangle (0,0)-(h,0)-(0,h): K_ref = 1/2 [[2,-1,-1],[-1,1,0],[-1,0,1]],
    // M_ref = area/12 [[2,1,1],[1,2,1],[1,1,2]].
    let kref = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    let area = 0.5 * h * h;

    let mut k_trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut m_trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut add_triangle = |nodes: [usize; 3]| {
        for a in 0..3 {
            let ga = nodes[a];
            let la = global_to_local[ga];
            if la == usize::MAX {
                continue;
            }
            for b in 0..3 {
                let gb = nodes[b];
                let lb = global_to_local[gb];
                if lb == usize::MAX {
                    continue;
                }
                k_trip.push((la, lb, kref[a][b]));
                let mass = if a == b { 2.0 } else { 1.0 } * area / 12.0;
                m_trip.push((la, lb, mass));
            }
        }
    };

    for cy in 0..m {
        for cx in 0..m {
            let n00 = mesh.node_index(cx, cy);
            let n10 = mesh.node_index(cx + 1, cy);
            let n01 = mesh.node_index(cx, cy + 1);
            let n11 = mesh.node_index(cx + 1, cy + 1);
            // lower triangle: right angle at n00; upper: right angle at n11
            add_triangle([n00, n10, n01]);
            add_triangle([n11, n01, n10]);
        }
    }

    let dim = retained.len();
    let stiffness = SparseOperator::from_triplets(dim, &k_trip);
    let mass = SparseOperator::from_triplets(dim, &m_trip);
    let kappa2 = config.kappa() * config.kappa();
    let sys_trip: Vec<(usize, usize, f64)> = k_trip
        .into_iter()
        .chain(m_trip.into_iter().map(|(i, j, v)| (i, j, kappa2 * v)))
        .collect();
    let system = SparseOperator::from_triplets(dim, &sys_trip);
    AssembledBvp { config: config.clone(), mesh: mesh.clone(), retained, stiffness, mass, system }
}

/// One factorised boundary-value problem, ready for repeated solves.
pub struct BvpSolver {
    pub bvp: AssembledBvp,
    system_chol: BandedCholesky,
    mass_chol: BandedCholesky,
}

impl BvpSolver {
    pub fn new(mesh: &StructuredMesh, config: &BvpConfig) -> Result<Self> {
        let bvp = assemble(mesh, config);
        let system_chol = bvp.system.cholesky_banded()?;
        let mass_chol = bvp.mass.cholesky_banded().map_err(|e| {
            GrfError::Solver(format!("mass factorisation failed (degenerate mesh): {e}"))
        })?;
        Ok(Self { bvp, system_chol, mass_chol })
    }

    pub fn retained_len(&self) -> usize {
        self.bvp.retained.len()
    }

    /// White-noise load `g = G xi` with `G G^T = M`: E[g g^T] equals the
    /// consistent mass matrix.
    pub fn white_noise_load_from(&self, xi: &[f64]) -> Vec<f64> {
        self.mass_chol.apply_factor(xi)
    }

    pub fn sample_white_noise_load(&self, stream: RngStream) -> Vec<f64> {
        let xi = stream.normals(self.retained_len());
        self.white_noise_load_from(&xi)
    }

    /// Nodal solution of `A u = scaling * g` from explicit noise, expanded
    /// to the full node set with eliminated Dirichlet nodes at 0.
    pub fn solve_from_noise(&self, xi: &[f64]) -> Vec<f64> {
        let g = self.white_noise_load_from(xi);
        let scaled: Vec<f64> = g.iter().map(|v| v * self.bvp.config.noise_scaling()).collect();
        let u = self.system_chol.solve(&scaled);
        let mut full = vec![0.0; self.bvp.mesh.node_count()];
        for (local, &node) in self.bvp.retained.iter().enumerate() {
            full[node] = u[local];
        }
        full
    }

    pub fn solve_single_bc(&self, stream: RngStream) -> Vec<f64> {
        let xi = stream.normals(self.retained_len());
        self.solve_from_noise(&xi)
    }
}

/// The four-mask averaging solver on one mesh.
pub struct DnaFemSampler {
    pub solvers: Vec<BvpSolver>,
    pub mesh: StructuredMesh,
}

impl DnaFemSampler {
    pub fn new(mesh: &StructuredMesh, ell: f64) -> Result<Self> {
        let solvers = BoundaryMask::all(2)
            .into_iter()
            .map(|mask| BvpSolver::new(mesh, &BvpConfig::new(mask, ell)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { solvers, mesh: mesh.clone() })
    }

    /// Averaged nodal field `2^{-d/2} sum_b u^b`, one independent noise
    /// substream per mask (codes ascending).
    pub fn solve_dna(&self, stream: RngStream) -> FieldRealisation {
        let mut total = vec![0.0; self.mesh.node_count()];
        for solver in &self.solvers {
            let code = solver.bvp.config.mask.code() as u64;
            let field = solver.solve_single_bc(stream.substream(code));
            for (acc, v) in total.iter_mut().zip(&field) {
                *acc += v;
            }
        }
        let weight = 0.5; // 2^{-d/2} at d = 2
        let side = self.mesh.m + 1;
        let values =
            ArrayD::from_shape_vec(IxDyn(&[side, side]), total.iter().map(|v| v * weight).collect())
                .expect("node grid shape");
        FieldRealisation { values, alpha: self.mesh.size, grid: GridKind::Closed, stream }
    }
}

/// Neumann-only solve on the extended square `(0, extension_alpha)^2` at
/// matched mesh width, restricted to the nodes of a centred unit square.
pub struct NeumannOversampledSampler {
    solver: BvpSolver,
    mesh: StructuredMesh,
    offset_nodes: usize,
    target_m: usize,
}

impl NeumannOversampledSampler {
    pub fn new(ell: f64, target_m: usize, extension_alpha: usize) -> Result<Self> {
        if extension_alpha == 0 {
            return Err(GrfError::Domain("extension factor must be >= 1".into()));
        }
        let mesh = StructuredMesh::new(target_m * extension_alpha, extension_alpha as f64)?;
        let config = BvpConfig::new(BoundaryMask::new(vec![false, false]), ell)?;
        let solver = BvpSolver::new(&mesh, &config)?;
        // centre the unit square on the extended domain, snapped to nodes
        let offset_nodes = (extension_alpha - 1) * target_m / 2;
        Ok(Self { solver, mesh, offset_nodes, target_m })
    }

    pub fn mesh(&self) -> &StructuredMesh {
        &self.mesh
    }

    /// Realisation restricted to the unit-square window.
    pub fn sample(&self, stream: RngStream) -> FieldRealisation {
        let full = self.solver.solve_single_bc(stream.substream(0));
        let side = self.target_m + 1;
        let ext_side = self.mesh.m + 1;
        let mut values = ArrayD::zeros(IxDyn(&[side, side]));
        for iy in 0..side {
            for ix in 0..side {
                let node = (iy + self.offset_nodes) * ext_side + ix + self.offset_nodes;
                values[[iy, ix]] = full[node];
            }
        }
        FieldRealisation { values, alpha: 1.0, grid: GridKind::Closed, stream }
    }
}

/// Smallest `count` generalised eigenvalues of `(K, M)` on the retained
/// nodes, by shifted block inverse iteration with M-orthonormalisation.
/// Deterministic: the start basis is a fixed coordinate slab.
pub fn smallest_generalised_eigenvalues(
    stiffness: &SparseOperator,
    mass: &SparseOperator,
    count: usize,
    iterations: usize,
) -> Result<Vec<f64>> {
    let n = stiffness.dim;
    if count == 0 || count > n {
        return Err(GrfError::Domain("eigenvalue count out of range".into()));
    }
    // shift keeps the Neumann kernel invertible
    let shift = 1e-3;
    let shifted = {
        let mut trip = Vec::new();
        for i in 0..n {
            for k in stiffness.row_ptr[i]..stiffness.row_ptr[i + 1] {
                trip.push((i, stiffness.col_idx[k], stiffness.values[k]));
            }
            for k in mass.row_ptr[i]..mass.row_ptr[i + 1] {
                trip.push((i, mass.col_idx[k], shift * mass.values[k]));
            }
        }
        SparseOperator::from_triplets(n, &trip)
    };
    let chol = shifted.cholesky_banded()?;

    let block = count + 3;
    let mut basis: Vec<Vec<f64>> = (0..block)
        .map(|b| {
            (0..n)
                .map(|i| {
                    // deterministic, linearly independent start vectors
                    let x = (i * (b + 1) + 1) as f64;
                    (x * 0.618_033_988_749_894_9).fract() - 0.5
                })
                .collect()
        })
        .collect();

    let m_dot = |x: &[f64], y: &[f64]| -> f64 {
        mass.matvec(x).iter().zip(y).map(|(a, b)| a * b).sum()
    };

    for _ in 0..iterations {
        // invert: V <- (K + shift M)^{-1} M V
        for v in basis.iter_mut() {
            *v = chol.solve(&mass.matvec(v));
        }
        // M-Gram-Schmidt
        for b in 0..block {
            for prev in 0..b {
                let proj = m_dot(&basis[b], &basis[prev]);
                let (head, tail) = basis.split_at_mut(b);
                for (x, p) in tail[0].iter_mut().zip(&head[prev]) {
                    *x -= proj * p;
                }
            }
            let norm = m_dot(&basis[b], &basis[b]).sqrt();
            for x in basis[b].iter_mut() {
                *x /= norm;
            }
        }
    }

    // Rayleigh-Ritz on the converged block
    let mut kk = vec![vec![0.0; block]; block];
    let mut mm = vec![vec![0.0; block]; block];
    for a in 0..block {
        let ka = stiffness.matvec(&basis[a]);
        let ma = mass.matvec(&basis[a]);
        for b in 0..block {
            kk[a][b] = ka.iter().zip(&basis[b]).map(|(x, y)| x * y).sum();
            mm[a][b] = ma.iter().zip(&basis[b]).map(|(x, y)| x * y).sum();
        }
    }
    // small dense generalised eigenproblem via Jacobi on M^{-1/2} K M^{-1/2}
    let evals = small_generalised_eigenvalues(&kk, &mm)?;
    let mut sorted = evals;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.truncate(count);
    Ok(sorted)
}

/// Dense generalised symmetric eigenvalues for the tiny Rayleigh-Ritz
/// systems: Cholesky-reduce `K x = lambda M x` to standard form and run
/// cyclic Jacobi.
fn small_generalised_eigenvalues(kk: &[Vec<f64>], mm: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = kk.len();
    // Cholesky of mm
    let mut l = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = mm[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(GrfError::Solver("Rayleigh-Ritz mass not SPD".into()));
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    // B = L^{-1} K L^{-T}
    let mut b = kk.to_vec();
    // forward: solve L Y = K (column-wise on rows)
    for col in 0..n {
        for i in 0..n {
            let mut sum = b[i][col];
            for k in 0..i {
                sum -= l[i][k] * b[k][col];
            }
            b[i][col] = sum / l[i][i];
        }
    }
    // right: solve B L^T = Y  => rows of B against L
    for row in 0..n {
        for j in 0..n {
            let mut sum = b[row][j];
            for k in 0..j {
                sum -= l[j][k] * b[row][k];
            }
            b[row][j] = sum / l[j][j];
        }
    }
    // cyclic Jacobi
    for _ in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += b[i][j] * b[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if b[p][q].abs() < 1e-18 {
                    continue;
                }
                let theta = 0.5 * (b[q][q] - b[p][p]) / b[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let bpk = b[p][k];
                    let bqk = b[q][k];
                    b[p][k] = c * bpk - s * bqk;
                    b[q][k] = s * bpk + c * bqk;
                }
                for k in 0..n {
                    let bkp = b[k][p];
                    let bkq = b[k][q];
                    b[k][p] = c * bkp - s * bkq;
                    b[k][q] = s * bkp + c * bkq;
                }
            }
        }
    }
    Ok((0..n).map(|i| b[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neumann() -> BoundaryMask {
        BoundaryMask::new(vec![false, false])
    }

    fn dirichlet() -> BoundaryMask {
        BoundaryMask::new(vec![true, true])
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let mesh = StructuredMesh::new(8, 1.0).unwrap();
        let bvp = assemble(&mesh, &BvpConfig::new(neumann(), 0.25).unwrap());
        let ones = vec![1.0; bvp.stiffness.dim];
        let k1 = bvp.stiffness.matvec(&ones);
        assert!(k1.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn mass_total_equals_area() {
        let mesh = StructuredMesh::new(8, 2.0).unwrap();
        let bvp = assemble(&mesh, &BvpConfig::new(neumann(), 0.25).unwrap());
        let ones = vec![1.0; bvp.mass.dim];
        let total: f64 = bvp.mass.matvec(&ones).iter().sum();
        assert!((total - 4.0).abs() < 1e-12, "1' M 1 = {total}");
    }

    #[test]
    fn smallest_dirichlet_eigenvalue_matches_laplace() {
        let mesh = StructuredMesh::new(32, 1.0).unwrap();
        let bvp = assemble(&mesh, &BvpConfig::new(dirichlet(), 0.25).unwrap());
        let evs =
            smallest_generalised_eigenvalues(&bvp.stiffness, &bvp.mass, 1, 30).unwrap();
        let want = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
        assert!(
            ((evs[0] - want) / want).abs() < 0.02,
            "lambda_1 = {} vs {want}",
            evs[0]
        );
    }

    #[test]
    fn neumann_eigenvalues_match_cosine_modes() {
        let mesh = StructuredMesh::new(24, 1.0).unwrap();
        let bvp = assemble(&mesh, &BvpConfig::new(neumann(), 0.25).unwrap());
        let evs = smallest_generalised_eigenvalues(&bvp.stiffness, &bvp.mass, 4, 40).unwrap();
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let want = [0.0, pi2, pi2, 2.0 * pi2];
        assert!(evs[0].abs() < 1e-6, "kernel mode {}", evs[0]);
        for i in 1..4 {
            assert!(
                ((evs[i] - want[i]) / want[i]).abs() < 0.02,
                "mode {i}: {} vs {}",
                evs[i],
                want[i]
            );
        }
    }

    #[test]
    fn white_noise_load_covariance_is_mass_matrix() {
        let mesh = StructuredMesh::new(8, 1.0).unwrap();
        let solver = BvpSolver::new(&mesh, &BvpConfig::new(neumann(), 0.25).unwrap()).unwrap();
        let n = solver.retained_len();
        let n_samples = 100_000u64;
        let mut acc = crate::stats::MomentAccumulator::full(n);
        for r in 0..n_samples {
            let g = solver.sample_white_noise_load(RngStream::new(77, r));
            acc.push(&g);
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let want = solver.bvp.mass.entry(i, j);
                let got = acc.second_moment(i, j).unwrap();
                // std error of an empirical covariance entry
                let se = ((solver.bvp.mass.entry(i, i) * solver.bvp.mass.entry(j, j)
                    + want * want)
                    / n_samples as f64)
                    .sqrt();
                worst = worst.max((got - want).abs() / se);
            }
        }
        assert!(worst <= 5.0, "max deviation {worst:.2} standard errors");
    }

    #[test]
    fn zero_noise_gives_zero_load_and_field() {
        let mesh = StructuredMesh::new(6, 1.0).unwrap();
        let solver = BvpSolver::new(&mesh, &BvpConfig::new(dirichlet(), 0.3).unwrap()).unwrap();
        let xi = vec![0.0; solver.retained_len()];
        assert!(solver.white_noise_load_from(&xi).iter().all(|&v| v == 0.0));
        assert!(solver.solve_from_noise(&xi).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dense_map_covariance_matches_operator_identity() {
        // H = scaling A^{-1} G  =>  H H^T = scaling^2 A^{-1} M A^{-1}
        let mesh = StructuredMesh::new(6, 1.0).unwrap();
        for mask in BoundaryMask::all(2) {
            let solver =
                BvpSolver::new(&mesh, &BvpConfig::new(mask.clone(), 0.3).unwrap()).unwrap();
            let n = solver.retained_len();
            let retained = solver.bvp.retained.clone();
            let mut h_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
            for col in 0..n {
                let mut xi = vec![0.0; n];
                xi[col] = 1.0;
                let full = solver.solve_from_noise(&xi);
                h_cols.push(retained.iter().map(|&node| full[node]).collect());
            }
            // reference: scaling^2 A^{-1} M A^{-1} column by column
            let chol = solver.bvp.system.cholesky_banded().unwrap();
            let s2 = solver.bvp.config.noise_scaling().powi(2);
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let col = chol.solve(&solver.bvp.mass.matvec(&chol.solve(&e)));
                for i in 0..n {
                    let hij: f64 = (0..n).map(|k| h_cols[k][i] * h_cols[k][j]).sum();
                    assert!(
                        (hij - s2 * col[i]).abs() < 1e-10,
                        "mask {} entry ({i},{j})",
                        mask.label()
                    );
                }
            }
        }
    }

    #[test]
    fn dirichlet_solution_vanishes_on_boundary() {
        let mesh = StructuredMesh::new(10, 1.0).unwrap();
        let solver = BvpSolver::new(&mesh, &BvpConfig::new(dirichlet(), 0.25).unwrap()).unwrap();
        let full = solver.solve_single_bc(RngStream::new(3, 0));
        for node in 0..mesh.node_count() {
            if !mesh.boundary_axes(node).is_empty() {
                assert_eq!(full[node], 0.0);
            }
        }
    }

    #[test]
    fn dna_fem_zero_noise_zero_field() {
        let mesh = StructuredMesh::new(4, 1.0).unwrap();
        let sampler = DnaFemSampler::new(&mesh, 0.25).unwrap();
        // all-zero noise via solve_from_noise on each solver
        for solver in &sampler.solvers {
            let xi = vec![0.0; solver.retained_len()];
            assert!(solver.solve_from_noise(&xi).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn oversampled_window_is_unit_square() {
        let s = NeumannOversampledSampler::new(0.25, 8, 3).unwrap();
        let field = s.sample(RngStream::new(2, 5));
        assert_eq!(field.values.shape(), &[9, 9]);
        assert_eq!(s.mesh().m, 24);
    }
}
