//! Scenario data model: dimension, Hamiltonian schedule, measurement events
//! and preparation.
//!
//! The preparation happens at the preparation time, which is the start of the
//! first Hamiltonian segment (or the first measurement time when the schedule
//! is empty). Each segment's Hamiltonian acts from its start until the next
//! segment's start; the last one acts indefinitely.

use crate::error::{Diagnostics, Error, Result};
use crate::linalg::{
    check_orthonormal, hermitian_defect, max_norm, spectral_decompose, ComplexMatrix,
    DensityOperator, HermitianObservable, Propagator, SpectralDecomposition, StateVector,
    CHECK_TOL, DEFAULT_CLUSTER_TOL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSegment {
    pub start: f64,
    pub matrix: ComplexMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEvent {
    pub time: f64,
    pub label: String,
    pub observable: HermitianObservable,
}

impl MeasurementEvent {
    pub fn new(time: f64, label: impl Into<String>, observable: HermitianObservable) -> Self {
        let label = label.into();
        MeasurementEvent {
            time,
            observable: observable.with_label(label.clone()),
            label,
        }
    }
}

/// What the first (preparing) measurement told us about the system.
#[derive(Debug, Clone, PartialEq)]
pub enum Preparation {
    /// Non-degenerate outcome: a single state.
    Pure(StateVector),
    /// Degenerate outcome: an orthonormal basis of the outcome subspace, each
    /// vector assumed with probability `weights[m]`.
    Subspace {
        basis: Vec<StateVector>,
        weights: Vec<f64>,
    },
    Density(DensityOperator),
}

impl Preparation {
    /// Subspace preparation with equal weights `1/M`.
    pub fn uniform(basis: Vec<StateVector>) -> Self {
        let m = basis.len() as f64;
        let weights = vec![1.0 / m; basis.len()];
        Preparation::Subspace { basis, weights }
    }

    /// Preparation left by obtaining outcome `cluster` of `observable`:
    /// pure when non-degenerate, otherwise the eigen-subspace with equal
    /// weights.
    pub fn from_outcome(observable: &HermitianObservable, cluster: usize) -> Result<Self> {
        let c = observable.cluster(cluster)?;
        Ok(if c.multiplicity() == 1 {
            Preparation::Pure(c.basis[0].clone())
        } else {
            Preparation::uniform(c.basis.clone())
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Preparation::Pure(v) => v.dim(),
            Preparation::Subspace { basis, .. } => basis.first().map_or(0, StateVector::dim),
            Preparation::Density(rho) => rho.dim(),
        }
    }

    /// Weighted pure states whose mixture is this preparation. Zero-weight
    /// members are dropped.
    pub fn components(&self) -> Result<Vec<(f64, StateVector)>> {
        Ok(match self {
            Preparation::Pure(v) => vec![(1.0, v.clone())],
            Preparation::Subspace { basis, weights } => weights
                .iter()
                .zip(basis)
                .filter(|(w, _)| **w > 0.0)
                .map(|(w, v)| (*w, v.clone()))
                .collect(),
            Preparation::Density(rho) => rho.pure_components()?,
        })
    }

    /// `ρ = Σ_m |u_m⟩ ω_m ⟨u_m|`
    pub fn density(&self) -> Result<DensityOperator> {
        match self {
            Preparation::Pure(v) => Ok(DensityOperator::pure(v)),
            Preparation::Subspace { basis, weights } => DensityOperator::mixture(weights, basis),
            Preparation::Density(rho) => Ok(rho.clone()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Preparation::Pure(_) => "pure",
            Preparation::Subspace { .. } => "subspace",
            Preparation::Density(_) => "density",
        }
    }
}

/// Final-state selection used for weak values.
#[derive(Debug, Clone, PartialEq)]
pub struct PostSelection {
    pub time: f64,
    pub state: StateVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub dimension: usize,
    pub hamiltonian: Vec<HamiltonianSegment>,
    pub measurements: Vec<MeasurementEvent>,
    pub preparation: Preparation,
    pub postselection: Option<PostSelection>,
}

impl Scenario {
    pub fn new(dimension: usize, preparation: Preparation) -> Self {
        Scenario {
            dimension,
            hamiltonian: Vec::new(),
            measurements: Vec::new(),
            preparation,
            postselection: None,
        }
    }

    pub fn with_segment(mut self, start: f64, matrix: ComplexMatrix) -> Self {
        self.hamiltonian.push(HamiltonianSegment { start, matrix });
        self
    }

    pub fn with_measurement(mut self, event: MeasurementEvent) -> Self {
        self.measurements.push(event);
        self
    }

    pub fn with_postselection(mut self, time: f64, state: StateVector) -> Self {
        self.postselection = Some(PostSelection { time, state });
        self
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.measurements.iter().map(|m| m.label.clone()).collect()
    }

    pub fn measurement(&self, label: &str) -> Result<(usize, &MeasurementEvent)> {
        self.measurements
            .iter()
            .enumerate()
            .find(|(_, m)| m.label == label)
            .ok_or_else(|| Error::Unknown {
                kind: "measurement",
                name: label.to_string(),
                available: self.labels(),
            })
    }

    pub fn preparation_time(&self) -> f64 {
        self.hamiltonian
            .first()
            .map(|s| s.start)
            .or_else(|| self.measurements.first().map(|m| m.time))
            .unwrap_or(0.0)
    }

    /// The first `len` measurements.
    pub fn truncated(&self, len: usize) -> Scenario {
        let mut s = self.clone();
        s.measurements.truncate(len);
        s
    }

    /// Structured check of every invariant; never partially accepts.
    pub fn validate(&self) -> Result<(), Diagnostics> {
        let mut d = Diagnostics::default();
        let n = self.dimension;
        if n == 0 {
            d.push("dimension", None, "non-positive dimension", "dimension must be at least 1");
            return Err(d);
        }

        let mut previous_start = f64::NEG_INFINITY;
        for (k, seg) in self.hamiltonian.iter().enumerate() {
            check_operator(&mut d, "hamiltonian", k, &seg.matrix, n);
            if !seg.start.is_finite() {
                d.push("hamiltonian", Some(k), "non-finite time", format!("start = {}", seg.start));
            } else if seg.start <= previous_start {
                d.push(
                    "hamiltonian",
                    Some(k),
                    "non-increasing time",
                    format!("segment start {} does not follow {}", seg.start, previous_start),
                );
            }
            previous_start = seg.start;
        }

        let earliest = self.hamiltonian.first().map(|s| s.start);
        let mut previous = f64::NEG_INFINITY;
        for (k, m) in self.measurements.iter().enumerate() {
            if !m.time.is_finite() {
                d.push("measurements", Some(k), "non-finite time", format!("time = {}", m.time));
            } else if m.time <= previous {
                d.push(
                    "measurements",
                    Some(k),
                    "non-increasing time",
                    format!("time {} does not follow {}", m.time, previous),
                );
            }
            if k == 0 {
                if let Some(t0) = earliest {
                    if m.time < t0 {
                        d.push(
                            "measurements",
                            Some(k),
                            "measurement before schedule",
                            format!("time {} precedes first segment start {}", m.time, t0),
                        );
                    }
                }
            }
            previous = m.time;
            check_operator(&mut d, "measurements", k, m.observable.matrix(), n);
        }

        match &self.preparation {
            Preparation::Pure(v) => check_state(&mut d, "preparation.vector", None, v, n),
            Preparation::Subspace { basis, weights } => {
                if basis.is_empty() {
                    d.push("preparation.basis", None, "empty basis", "subspace basis has no vectors");
                }
                for (k, v) in basis.iter().enumerate() {
                    check_state(&mut d, "preparation.basis", Some(k), v, n);
                }
                if basis.iter().all(|v| v.dim() == n) {
                    if let Err(e) = check_orthonormal(basis) {
                        d.push("preparation.basis", None, "basis not orthonormal", e.to_string());
                    }
                }
                if weights.len() != basis.len() {
                    d.push(
                        "preparation.weights",
                        None,
                        "length mismatch",
                        format!("{} weights for {} basis vectors", weights.len(), basis.len()),
                    );
                }
                for (k, w) in weights.iter().enumerate() {
                    if !(w.is_finite() && *w >= 0.0) {
                        d.push("preparation.weights", Some(k), "negative weight", format!("weight = {w}"));
                    }
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > CHECK_TOL {
                    d.push("preparation.weights", None, "weights do not sum to 1", format!("sum = {total}"));
                }
            }
            Preparation::Density(rho) => {
                if rho.dim() != n {
                    d.push(
                        "preparation.matrix",
                        None,
                        "dimension mismatch",
                        format!("expected {n}, found {}", rho.dim()),
                    );
                } else if let Err(e) = DensityOperator::new(rho.matrix().clone()) {
                    d.push("preparation.matrix", None, "invalid density operator", e.to_string());
                }
            }
        }

        if let Some(post) = &self.postselection {
            check_state(&mut d, "postselect.vector", None, &post.state, n);
            if let Some(last) = self.measurements.last() {
                if post.time < last.time {
                    d.push(
                        "postselect.time",
                        None,
                        "non-increasing time",
                        format!("post-selection at {} precedes last measurement at {}", post.time, last.time),
                    );
                }
            }
        }

        if d.is_empty() {
            Ok(())
        } else {
            Err(d)
        }
    }

    pub fn dynamics(&self) -> Result<Dynamics> {
        Dynamics::new(&self.hamiltonian, self.dimension)
    }
}

fn check_operator(d: &mut Diagnostics, field: &str, k: usize, m: &ComplexMatrix, n: usize) {
    if m.nrows() != n || m.ncols() != n {
        d.push(
            field,
            Some(k),
            "dimension mismatch",
            format!("expected {n}x{n}, found {}x{}", m.nrows(), m.ncols()),
        );
        return;
    }
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        d.push(field, Some(k), "non-finite entry", "matrix contains NaN or infinity");
        return;
    }
    let (defect, row, col) = hermitian_defect(m);
    if defect > CHECK_TOL * max_norm(m).max(1.0) {
        d.push(
            field,
            Some(k),
            "non-Hermitian matrix",
            format!("max |H - H^dagger| = {defect:e} at entry ({}, {})", row + 1, col + 1),
        );
    }
}

fn check_state(d: &mut Diagnostics, field: &str, k: Option<usize>, v: &StateVector, n: usize) {
    if v.dim() != n {
        d.push(field, k, "dimension mismatch", format!("expected {n}, found {}", v.dim()));
    } else {
        let norm = v.as_vector().norm();
        if (norm - 1.0).abs() > CHECK_TOL {
            d.push(field, k, "not normalized", format!("norm = {norm}"));
        }
    }
}

/// Pre-diagonalized piecewise-constant Hamiltonian schedule.
#[derive(Debug, Clone)]
pub struct Dynamics {
    dim: usize,
    segments: Vec<(f64, Option<SpectralDecomposition>)>,
}

impl Dynamics {
    pub fn new(schedule: &[HamiltonianSegment], dim: usize) -> Result<Self> {
        let segments = schedule
            .iter()
            .map(|s| {
                if s.matrix.nrows() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: s.matrix.nrows(),
                    });
                }
                let spec = if s.matrix.iter().all(|z| *z == num_complex::Complex64::new(0.0, 0.0)) {
                    None
                } else {
                    Some(spectral_decompose(&s.matrix, DEFAULT_CLUSTER_TOL)?)
                };
                Ok((s.start, spec))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dynamics { dim, segments })
    }

    /// `U(to, from) = exp(-i ∫ H dt)` as a time-ordered product.
    pub fn propagator(&self, from: f64, to: f64) -> Result<Propagator> {
        if to < from {
            return Err(Error::NonIncreasingTime {
                previous: from,
                next: to,
            });
        }
        let mut total = Propagator::identity(self.dim, from);
        for (k, (start, spec)) in self.segments.iter().enumerate() {
            let end = self.segments.get(k + 1).map_or(f64::INFINITY, |s| s.0);
            let lo = start.max(from);
            let hi = end.min(to);
            if hi <= lo {
                continue;
            }
            if let Some(spec) = spec {
                let dt = hi - lo;
                let step = Propagator {
                    matrix: spec.map_eigenvalues(|l| num_complex::Complex64::from_polar(1.0, -l * dt)),
                    start: lo,
                    end: hi,
                };
                total = total.then(&step);
            }
        }
        total.end = to;
        Ok(total)
    }
}
