//! Dense complex linear algebra for finite-dimensional quantum systems.
//!
//! Everything here is immutable after construction. Hermitian matrices are
//! diagonalized with nalgebra's symmetric eigen-solver; the resulting
//! eigenvalues are clustered so that degenerate eigenspaces are handled as a
//! whole, and every eigenvector is put into a fixed gauge so that amplitudes
//! of individual paths are reproducible.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Default eigenvalue clustering tolerance, relative to `max(1, ‖H‖max)`.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-9;
/// Largest Hilbert-space dimension any constructor will accept.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;
/// Tolerance for Hermiticity, unitarity and normalization checks.
pub const CHECK_TOL: f64 = 1e-10;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest entry modulus.
pub fn max_norm(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest `|H - H†|` entry and its position.
pub fn hermitian_defect(m: &ComplexMatrix) -> (f64, usize, usize) {
    let mut worst = (0.0, 0, 0);
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst.0 {
                worst = (d, i, j);
            }
        }
    }
    worst
}

pub fn check_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    Ok(m.nrows())
}

pub fn check_finite(m: &ComplexMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Rejects matrices whose worst `|H - H†|` entry exceeds `tol * max(1, ‖H‖max)`.
pub fn check_hermitian(m: &ComplexMatrix, tol: f64) -> Result<()> {
    check_square(m)?;
    check_finite(m, "matrix")?;
    let (max_asymmetry, row, col) = hermitian_defect(m);
    if max_asymmetry > tol * max_norm(m).max(1.0) {
        return Err(Error::NotHermitian {
            max_asymmetry,
            row,
            col,
        });
    }
    Ok(())
}

/// `‖U†U - I‖max`
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let n = u.nrows();
    max_norm(&(u.adjoint() * u - ComplexMatrix::identity(n, n)))
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(ComplexVector);

impl StateVector {
    /// Wraps `v`, which must already have unit norm within [`CHECK_TOL`].
    pub fn new(v: ComplexVector) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("state vector"));
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > CHECK_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(StateVector(v))
    }

    /// Scales `v` to unit norm.
    pub fn normalized(v: ComplexVector) -> Result<Self> {
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized { norm });
        }
        StateVector::new(v / c64(norm, 0.0))
    }

    pub fn from_slice(entries: &[C64]) -> Result<Self> {
        StateVector::new(ComplexVector::from_column_slice(entries))
    }

    /// Computational basis vector `|k⟩`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = ComplexVector::zeros(dim);
        v[k] = c64(1.0, 0.0);
        StateVector(v)
    }

    /// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`
    pub fn bloch(theta: f64, phi: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        StateVector(ComplexVector::from_column_slice(&[
            c64(c, 0.0),
            C64::from_polar(s, phi),
        ]))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &ComplexVector {
        &self.0
    }

    pub fn into_vector(self) -> ComplexVector {
        self.0
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &ComplexVector) -> C64 {
        self.0.dotc(other)
    }

    /// `|self⟩⟨self|`
    pub fn projector(&self) -> ComplexMatrix {
        &self.0 * self.0.adjoint()
    }

    /// Applies a unitary, renormalizing away rounding drift.
    pub fn evolve(&self, u: &ComplexMatrix) -> Result<Self> {
        StateVector::normalized(u * &self.0)
    }
}

/// One eigenvalue with its orthonormal eigenbasis and eigenprojector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCluster {
    pub eigenvalue: f64,
    pub basis: Vec<StateVector>,
    pub projector: ComplexMatrix,
}

impl EigenCluster {
    pub fn multiplicity(&self) -> usize {
        self.basis.len()
    }
}

/// Eigenvalue clusters sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    clusters: Vec<EigenCluster>,
}

impl SpectralDecomposition {
    pub fn clusters(&self) -> &[EigenCluster] {
        &self.clusters
    }

    pub fn dim(&self) -> usize {
        self.clusters.iter().map(EigenCluster::multiplicity).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.eigenvalue).collect()
    }

    /// The flattened eigenbasis `|q_1⟩ … |q_N⟩` with the cluster index of each
    /// vector. Order: clusters ascending, then basis order within a cluster.
    pub fn basis(&self) -> impl Iterator<Item = (usize, &StateVector)> {
        self.clusters
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.basis.iter().map(move |v| (i, v)))
    }

    /// `Σ f(λ_i) π_i`
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for c in &self.clusters {
            out += &c.projector * f(c.eigenvalue);
        }
        out
    }

    /// `Σ λ_i π_i`
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_eigenvalues(|l| c64(l, 0.0))
    }
}

/// Diagonalizes a Hermitian matrix and merges eigenvalues closer than
/// `cluster_tol * max(1, ‖H‖max)` into one cluster.
pub fn spectral_decompose(h: &ComplexMatrix, cluster_tol: f64) -> Result<SpectralDecomposition> {
    if !(cluster_tol > 0.0) {
        return Err(Error::Precondition(format!(
            "cluster tolerance must be positive, got {cluster_tol}"
        )));
    }
    let n = check_square(h)?;
    if n > DEFAULT_DIMENSION_CAP {
        return Err(Error::DimensionCap {
            requested: n,
            cap: DEFAULT_DIMENSION_CAP,
        });
    }
    check_hermitian(h, CHECK_TOL)?;
    // Symmetrize so the solver sees an exactly Hermitian input.
    let sym = (h + h.adjoint()) * c64(0.5, 0.0);
    let eig = SymmetricEigen::try_new(sym, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::EigenSolver { dim: n })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let merge = cluster_tol * max_norm(h).max(1.0);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &k in &order {
        match groups.last_mut() {
            Some(g) if eig.eigenvalues[k] - eig.eigenvalues[*g.last().unwrap()] <= merge => g.push(k),
            _ => groups.push(vec![k]),
        }
    }

    let clusters = groups
        .into_iter()
        .map(|g| {
            let eigenvalue = g.iter().map(|&k| eig.eigenvalues[k]).sum::<f64>() / g.len() as f64;
            let mut p = ComplexMatrix::zeros(n, n);
            for &k in &g {
                let v = eig.eigenvectors.column(k);
                p += v * v.adjoint();
            }
            let basis = canonical_basis(&p, g.len());
            cluster_from_basis(eigenvalue, basis)
        })
        .collect();
    Ok(SpectralDecomposition { clusters })
}

/// Builds a decomposition from a caller-chosen orthonormal eigenbasis.
/// Vectors whose eigenvalues agree within `cluster_tol * max(1, max|λ|)` share
/// a cluster; within a cluster the given order is kept.
pub fn spectral_from_basis(
    eigenvalues: &[f64],
    basis: Vec<StateVector>,
    cluster_tol: f64,
) -> Result<SpectralDecomposition> {
    if eigenvalues.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: eigenvalues.len(),
            found: basis.len(),
        });
    }
    let n = basis.len();
    if n == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    for v in &basis {
        if v.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.dim(),
            });
        }
    }
    check_orthonormal(&basis)?;

    let scale = eigenvalues.iter().fold(1.0_f64, |a, l| a.max(l.abs()));
    let merge = cluster_tol * scale;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &k in &order {
        match groups.last_mut() {
            Some(g) if eigenvalues[k] - eigenvalues[*g.last().unwrap()] <= merge => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    let clusters = groups
        .into_iter()
        .map(|mut g| {
            g.sort_unstable();
            let eigenvalue = g.iter().map(|&k| eigenvalues[k]).sum::<f64>() / g.len() as f64;
            cluster_from_basis(eigenvalue, g.iter().map(|&k| basis[k].clone()).collect())
        })
        .collect();
    Ok(SpectralDecomposition { clusters })
}

pub fn check_orthonormal(basis: &[StateVector]) -> Result<()> {
    for (i, a) in basis.iter().enumerate() {
        for b in &basis[i + 1..] {
            let overlap = a.inner(b.as_vector()).norm();
            if overlap > CHECK_TOL {
                return Err(Error::Precondition(format!(
                    "basis vectors {i} and another are not orthogonal (overlap {overlap:e})"
                )));
            }
        }
    }
    Ok(())
}

fn cluster_from_basis(eigenvalue: f64, basis: Vec<StateVector>) -> EigenCluster {
    let n = basis[0].dim();
    let mut projector = ComplexMatrix::zeros(n, n);
    for v in &basis {
        projector += v.projector();
    }
    EigenCluster {
        eigenvalue,
        basis,
        projector,
    }
}

/// Orthonormal basis of the range of projector `p`, built by pivoted
/// Gram-Schmidt over its columns (`p|e_k⟩`), each vector in the fixed gauge.
fn canonical_basis(p: &ComplexMatrix, rank: usize) -> Vec<StateVector> {
    let n = p.nrows();
    let mut residual: Vec<ComplexVector> = (0..n).map(|k| p.column(k).into_owned()).collect();
    let mut basis = Vec::with_capacity(rank);
    for _ in 0..rank {
        let norms: Vec<f64> = residual.iter().map(|r| r.norm()).collect();
        let best = norms.iter().cloned().fold(0.0_f64, f64::max);
        let pick = norms.iter().position(|&x| x >= best * (1.0 - 1e-12)).unwrap();
        let v = fix_phase(&(&residual[pick] / c64(norms[pick], 0.0)));
        for r in residual.iter_mut() {
            let overlap = v.dotc(r);
            *r -= &v * overlap;
        }
        basis.push(StateVector(v));
    }
    basis
}

/// Rotates the global phase so that the largest-modulus component (lowest
/// index on ties) is real and positive.
pub fn fix_phase(v: &ComplexVector) -> ComplexVector {
    let best = v.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let Some(k) = v.iter().position(|z| z.norm() >= best * (1.0 - 1e-12)) else {
        return v.clone();
    };
    if best == 0.0 {
        return v.clone();
    }
    let phase = v[k] / c64(v[k].norm(), 0.0);
    v * phase.conj()
}

/// A measured quantity: a Hermitian matrix together with its clustered
/// spectrum. Outcome `i` of the observable means cluster `i` (ascending
/// eigenvalue order).
#[derive(Debug, Clone)]
pub struct HermitianObservable {
    label: String,
    matrix: ComplexMatrix,
    spectrum: SpectralDecomposition,
    explicit_basis: bool,
}

impl PartialEq for HermitianObservable {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.matrix == other.matrix
            && self.explicit_basis == other.explicit_basis
            && (!self.explicit_basis || self.basis_vectors() == other.basis_vectors())
    }
}

impl HermitianObservable {
    pub fn new(label: impl Into<String>, matrix: ComplexMatrix, cluster_tol: f64) -> Result<Self> {
        let spectrum = spectral_decompose(&matrix, cluster_tol)?;
        Ok(HermitianObservable {
            label: label.into(),
            matrix,
            spectrum,
            explicit_basis: false,
        })
    }

    /// Observable `Σ λ_n |v_n⟩⟨v_n|` whose virtual paths run through the
    /// given basis. Needed when a degenerate eigenspace has a preferred basis.
    pub fn with_eigenbasis(
        label: impl Into<String>,
        eigenvalues: &[f64],
        basis: Vec<StateVector>,
        cluster_tol: f64,
    ) -> Result<Self> {
        let spectrum = spectral_from_basis(eigenvalues, basis, cluster_tol)?;
        let mut matrix = spectrum.reconstruct();
        // exact Hermitian symmetry for serialization round trips
        matrix = (&matrix + matrix.adjoint()) * c64(0.5, 0.0);
        Ok(HermitianObservable {
            label: label.into(),
            matrix,
            spectrum,
            explicit_basis: true,
        })
    }

    /// Uses `basis` as the eigenbasis of `matrix`; each vector must be an
    /// eigenvector within `1e-9 * max(1, ‖H‖max)`.
    pub fn from_matrix_and_basis(
        label: impl Into<String>,
        matrix: ComplexMatrix,
        basis: Vec<StateVector>,
        cluster_tol: f64,
    ) -> Result<Self> {
        let n = check_square(&matrix)?;
        check_hermitian(&matrix, CHECK_TOL)?;
        let scale = max_norm(&matrix).max(1.0);
        let mut values = Vec::with_capacity(basis.len());
        for (k, v) in basis.iter().enumerate() {
            if v.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.dim(),
                });
            }
            let hv = &matrix * v.as_vector();
            let lambda = v.inner(&hv).re;
            let defect = (hv - v.as_vector() * c64(lambda, 0.0)).norm();
            if defect > 1e-9 * scale {
                return Err(Error::Precondition(format!(
                    "basis vector {k} is not an eigenvector (residual {defect:e})"
                )));
            }
            values.push(lambda);
        }
        let spectrum = spectral_from_basis(&values, basis, cluster_tol)?;
        Ok(HermitianObservable {
            label: label.into(),
            matrix,
            spectrum,
            explicit_basis: true,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn has_explicit_basis(&self) -> bool {
        self.explicit_basis
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cluster_count(&self) -> usize {
        self.spectrum.clusters.len()
    }

    pub fn cluster(&self, i: usize) -> Result<&EigenCluster> {
        self.spectrum.clusters.get(i).ok_or_else(|| Error::IndexOutOfRange {
            what: format!("outcomes of `{}`", self.label),
            index: i,
            size: self.spectrum.clusters.len(),
        })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum.eigenvalues()
    }

    /// Flattened eigenbasis in path-index order.
    pub fn basis_vectors(&self) -> Vec<StateVector> {
        self.spectrum.basis().map(|(_, v)| v.clone()).collect()
    }

    /// Cluster index of each path index `n`.
    pub fn cluster_map(&self) -> Vec<usize> {
        self.spectrum.basis().map(|(i, _)| i).collect()
    }

    /// Cluster whose eigenvalue is within `tol * max(1, |value|)` of `value`.
    pub fn find_outcome(&self, value: f64, tol: f64) -> Option<usize> {
        self.spectrum
            .clusters
            .iter()
            .position(|c| (c.eigenvalue - value).abs() <= tol * value.abs().max(1.0))
    }
}

/// Time-evolution operator over `[start, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub matrix: ComplexMatrix,
    pub start: f64,
    pub end: f64,
}

impl Propagator {
    pub fn identity(dim: usize, at: f64) -> Self {
        Propagator {
            matrix: ComplexMatrix::identity(dim, dim),
            start: at,
            end: at,
        }
    }

    /// `exp(-i H Δt)` for a Hermitian `H`, evaluated spectrally.
    pub fn constant(h: &ComplexMatrix, start: f64, duration: f64) -> Result<Self> {
        if !(duration >= 0.0) {
            return Err(Error::Precondition(format!(
                "segment duration must be non-negative, got {duration}"
            )));
        }
        let n = check_square(h)?;
        let matrix = if duration == 0.0 {
            check_hermitian(h, CHECK_TOL)?;
            ComplexMatrix::identity(n, n)
        } else {
            let spec = spectral_decompose(h, DEFAULT_CLUSTER_TOL)?;
            spec.map_eigenvalues(|l| C64::from_polar(1.0, -l * duration))
        };
        Ok(Propagator {
            matrix,
            start,
            end: start + duration,
        })
    }

    /// `later · self`
    pub fn then(&self, later: &Propagator) -> Propagator {
        Propagator {
            matrix: &later.matrix * &self.matrix,
            start: self.start,
            end: later.end,
        }
    }

    /// `U⁻¹ = U†`
    pub fn inverse(&self) -> ComplexMatrix {
        self.matrix.adjoint()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Time-ordered product of piecewise-constant segments starting at `t = 0`;
/// later segments act on the left.
pub fn propagator(segments: &[(ComplexMatrix, f64)]) -> Result<Propagator> {
    let Some((first, _)) = segments.first() else {
        return Err(Error::Precondition("propagator needs at least one segment".into()));
    };
    let n = check_square(first)?;
    let mut total = Propagator::identity(n, 0.0);
    for (h, dt) in segments {
        if h.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: h.nrows(),
            });
        }
        let step = Propagator::constant(h, total.end, *dt)?;
        total = total.then(&step);
    }
    Ok(total)
}

/// A unit-trace, positive semidefinite Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator(ComplexMatrix);

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        check_hermitian(&matrix, CHECK_TOL)?;
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > CHECK_TOL || trace.im.abs() > CHECK_TOL {
            return Err(Error::Precondition(format!(
                "density operator trace is {trace}, expected 1"
            )));
        }
        let spec = spectral_decompose(&matrix, DEFAULT_CLUSTER_TOL)?;
        if let Some(c) = spec.clusters.first() {
            if c.eigenvalue < -CHECK_TOL {
                return Err(Error::Precondition(format!(
                    "density operator has negative eigenvalue {}",
                    c.eigenvalue
                )));
            }
        }
        Ok(DensityOperator(matrix))
    }

    pub fn pure(state: &StateVector) -> Self {
        DensityOperator(state.projector())
    }

    /// `Σ w_m |u_m⟩⟨u_m|`
    pub fn mixture(weights: &[f64], states: &[StateVector]) -> Result<Self> {
        let Some(first) = states.first() else {
            return Err(Error::Precondition("empty mixture".into()));
        };
        let n = first.dim();
        let mut m = ComplexMatrix::zeros(n, n);
        for (w, s) in weights.iter().zip(states) {
            m += s.projector() * c64(*w, 0.0);
        }
        DensityOperator::new(m)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Eigen-decomposition into weighted pure states (zero weights dropped).
    pub fn pure_components(&self) -> Result<Vec<(f64, StateVector)>> {
        let spec = spectral_decompose(&self.0, DEFAULT_CLUSTER_TOL)?;
        Ok(spec
            .clusters
            .iter()
            .filter(|c| c.eigenvalue > 0.0)
            .flat_map(|c| c.basis.iter().map(move |v| (c.eigenvalue, v.clone())))
            .collect())
    }
}

/// Kronecker product; the left operand indexes the slower axis.
pub trait TensorProduct: Sized {
    fn tensor_capped(&self, rhs: &Self, cap: usize) -> Result<Self>;

    fn tensor(&self, rhs: &Self) -> Result<Self> {
        self.tensor_capped(rhs, DEFAULT_DIMENSION_CAP)
    }
}

fn product_dim(a: usize, b: usize, cap: usize) -> Result<usize> {
    match a.checked_mul(b) {
        Some(d) if d <= cap => Ok(d),
        _ => Err(Error::DimensionCap {
            requested: a.saturating_mul(b),
            cap,
        }),
    }
}

impl TensorProduct for ComplexMatrix {
    fn tensor_capped(&self, rhs: &Self, cap: usize) -> Result<Self> {
        product_dim(self.nrows(), rhs.nrows(), cap)?;
        product_dim(self.ncols(), rhs.ncols(), cap)?;
        Ok(self.kronecker(rhs))
    }
}

impl TensorProduct for ComplexVector {
    fn tensor_capped(&self, rhs: &Self, cap: usize) -> Result<Self> {
        product_dim(self.len(), rhs.len(), cap)?;
        Ok(self.kronecker(rhs))
    }
}

impl TensorProduct for StateVector {
    fn tensor_capped(&self, rhs: &Self, cap: usize) -> Result<Self> {
        Ok(StateVector(self.0.tensor_capped(&rhs.0, cap)?))
    }
}

/// Free-function form of [`TensorProduct::tensor`].
pub fn tensor_product<T: TensorProduct>(a: &T, b: &T) -> Result<T> {
    a.tensor(b)
}

/// Partial trace over the right factor of a `dim_a * dim_b` operator.
pub fn trace_out_right(m: &ComplexMatrix, dim_a: usize, dim_b: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(dim_a, dim_a);
    for i in 0..dim_a {
        for j in 0..dim_a {
            out[(i, j)] = (0..dim_b).map(|k| m[(i * dim_b + k, j * dim_b + k)]).sum();
        }
    }
    out
}

/// Partial trace over the left factor of a `dim_a * dim_b` operator.
pub fn trace_out_left(m: &ComplexMatrix, dim_a: usize, dim_b: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(dim_b, dim_b);
    for i in 0..dim_b {
        for j in 0..dim_b {
            out[(i, j)] = (0..dim_a).map(|k| m[(k * dim_b + i, k * dim_b + j)]).sum();
        }
    }
    out
}

/// Pauli matrices and spin-1/2 helpers.
pub mod pauli {
    use super::{c64, ComplexMatrix};

    pub fn identity() -> ComplexMatrix {
        ComplexMatrix::identity(2, 2)
    }

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(1., 0.), c64(0., 0.)])
    }

    pub fn y() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(0., -1.), c64(0., 1.), c64(0., 0.)])
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c64(1., 0.), c64(0., 0.), c64(0., 0.), c64(-1., 0.)])
    }

    /// `σ·n` for `n = (sin θ cos φ, sin θ sin φ, cos θ)`.
    pub fn along(theta: f64, phi: f64) -> ComplexMatrix {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        x() * c64(st * cp, 0.0) + y() * c64(st * sp, 0.0) + z() * c64(ct, 0.0)
    }
}
