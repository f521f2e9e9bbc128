//! Probabilities of measurement sequences.
//!
//! A scenario with `L` measurements has `N^L` virtual paths, one eigenbasis
//! state per measurement time, each with the amplitude
//!
//! ```text
//! A(n_1 … n_L) = ⟨q^L_{n_L}|U_L|q^{L-1}_{n_{L-1}}⟩ ⋯ ⟨q^1_{n_1}|U_1|ψ⟩
//! ```
//!
//! where `U_ℓ` propagates from the previous measurement (the preparation for
//! `ℓ = 1`). Outcomes at intermediate times add amplitudes of all paths
//! through the outcome's eigen-subspace; outcomes at the final time add
//! probabilities over the final subspace, never amplitudes.
//!
//! Three independent evaluation routes are provided:
//!
//! * [`Strategy::PathSum`] enumerates paths and applies the eigenvalue
//!   selectors literally. Exponential; kept as an oracle.
//! * [`Strategy::ProjectedPropagator`] inserts eigenprojectors between
//!   propagators, `O(L·N²)` per outcome string. The default.
//! * [`Strategy::TraceFormula`] evaluates the nested Heisenberg projector
//!   string against the density operator.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    c64, max_norm, trace_out_left, trace_out_right, ComplexMatrix, ComplexVector, HermitianObservable,
    StateVector, C64, DEFAULT_CLUSTER_TOL,
};
use crate::scenario::{Dynamics, HamiltonianSegment, MeasurementEvent, Preparation, Scenario};

pub const DEFAULT_PATH_BUDGET: u128 = 10_000_000;
pub const DEFAULT_STRING_BUDGET: u128 = 1_000_000;
pub const DEFAULT_POSTSELECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    /// Maximum number of path evaluations for enumeration-based routes.
    pub path_budget: u128,
    /// Maximum number of outcome strings in a full distribution.
    pub string_budget: u128,
    /// Smallest admissible `|⟨post|pre⟩|` for weak values.
    pub postselection_tol: f64,
    pub cluster_tol: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            path_budget: DEFAULT_PATH_BUDGET,
            string_budget: DEFAULT_STRING_BUDGET,
            postselection_tol: DEFAULT_POSTSELECTION_TOL,
            cluster_tol: DEFAULT_CLUSTER_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    PathSum,
    ProjectedPropagator,
    TraceFormula,
}

impl Strategy {
    pub fn tag(self) -> &'static str {
        match self {
            Strategy::PathSum => "path-sum",
            Strategy::ProjectedPropagator => "projected-propagator",
            Strategy::TraceFormula => "trace-formula",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Cluster indices `(i_1, …, i_L)`, one per measurement.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct OutcomeString(pub Vec<usize>);

impl OutcomeString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for OutcomeString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<usize>> for OutcomeString {
    fn from(v: Vec<usize>) -> Self {
        OutcomeString(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualPath {
    pub indices: Vec<usize>,
    pub amplitude: C64,
}

/// Probabilities of every outcome string, stored densely in lexicographic
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryDistribution {
    labels: Vec<String>,
    eigenvalues: Vec<Vec<f64>>,
    strategy: Strategy,
    probabilities: Vec<f64>,
}

impl HistoryDistribution {
    pub fn new(
        labels: Vec<String>,
        eigenvalues: Vec<Vec<f64>>,
        strategy: Strategy,
        probabilities: Vec<f64>,
    ) -> Result<Self> {
        let expected: usize = eigenvalues.iter().map(Vec::len).product();
        if labels.len() != eigenvalues.len() || probabilities.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: probabilities.len(),
            });
        }
        Ok(HistoryDistribution {
            labels,
            eigenvalues,
            strategy,
            probabilities,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Cluster eigenvalues of each measurement, ascending.
    pub fn eigenvalues(&self) -> &[Vec<f64>] {
        &self.eigenvalues
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn measurement_count(&self) -> usize {
        self.labels.len()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn index_of(&self, s: &OutcomeString) -> Option<usize> {
        if s.len() != self.eigenvalues.len() {
            return None;
        }
        let mut idx = 0;
        for (i, radix) in s.0.iter().zip(self.eigenvalues.iter().map(Vec::len)) {
            if *i >= radix {
                return None;
            }
            idx = idx * radix + i;
        }
        Some(idx)
    }

    pub fn string_at(&self, mut idx: usize) -> OutcomeString {
        let mut out = vec![0; self.eigenvalues.len()];
        for (slot, radix) in out.iter_mut().zip(self.eigenvalues.iter().map(Vec::len)).rev() {
            *slot = idx % radix;
            idx /= radix;
        }
        OutcomeString(out)
    }

    pub fn get(&self, s: &OutcomeString) -> Option<f64> {
        self.index_of(s).map(|i| self.probabilities[i])
    }

    /// Eigenvalues observed along an outcome string.
    pub fn outcome_values(&self, s: &OutcomeString) -> Vec<f64> {
        s.0.iter()
            .zip(&self.eigenvalues)
            .map(|(i, values)| values[*i])
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (OutcomeString, f64)> + '_ {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(k, p)| (self.string_at(k), *p))
    }

    /// Largest pointwise difference; infinite when shapes differ.
    pub fn max_abs_difference(&self, other: &HistoryDistribution) -> f64 {
        if self.eigenvalues.iter().map(Vec::len).ne(other.eigenvalues.iter().map(Vec::len)) {
            return f64::INFINITY;
        }
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Sums out the last measurement.
    pub fn marginal_drop_last(&self) -> Result<HistoryDistribution> {
        if self.labels.len() < 2 {
            return Err(Error::Precondition(
                "cannot drop the last outcome of a single-measurement distribution".into(),
            ));
        }
        let last = self.eigenvalues.last().unwrap().len();
        let probabilities = self
            .probabilities
            .chunks(last)
            .map(|c| c.iter().sum())
            .collect();
        HistoryDistribution::new(
            self.labels[..self.labels.len() - 1].to_vec(),
            self.eigenvalues[..self.eigenvalues.len() - 1].to_vec(),
            self.strategy,
            probabilities,
        )
    }
}

/// Amplitudes of all `N^L` paths for one initial state, lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
    radix: usize,
    len: usize,
    amplitudes: Vec<C64>,
}

impl PathTable {
    pub fn path_len(&self) -> usize {
        self.len
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, path: &[usize]) -> Option<C64> {
        if path.len() != self.len || path.iter().any(|&n| n >= self.radix) {
            return None;
        }
        let idx = path.iter().fold(0, |acc, &n| acc * self.radix + n);
        Some(self.amplitudes[idx])
    }

    /// Appends one measurement: each amplitude is multiplied by the transfer
    /// element `⟨q^{L+1}_m|U|q^L_n⟩` of its last index. The prefix amplitudes
    /// are reused as they are.
    pub fn extend(&self, transfer: &ComplexMatrix) -> PathTable {
        let n = self.radix;
        let mut amplitudes = Vec::with_capacity(self.amplitudes.len() * n);
        for (k, a) in self.amplitudes.iter().enumerate() {
            let last = k % n;
            for m in 0..n {
                amplitudes.push(transfer[(m, last)] * a);
            }
        }
        PathTable {
            radix: n,
            len: self.len + 1,
            amplitudes,
        }
    }

    fn paths(&self) -> impl Iterator<Item = (Vec<usize>, C64)> + '_ {
        let (n, len) = (self.radix, self.len);
        self.amplitudes.iter().enumerate().map(move |(mut k, a)| {
            let mut idx = vec![0; len];
            for slot in idx.iter_mut().rev() {
                *slot = k % n;
                k /= n;
            }
            (idx, *a)
        })
    }
}

/// Lazily enumerates paths in lexicographic index order, reusing prefix
/// products between consecutive paths.
pub struct PathEnumerator {
    first: Vec<C64>,
    transfers: Vec<ComplexMatrix>,
    radix: usize,
    indices: Vec<usize>,
    prefix: Vec<C64>,
    done: bool,
}

impl PathEnumerator {
    fn refresh_from(&mut self, level: usize) {
        for l in level..self.indices.len() {
            let n = self.indices[l];
            self.prefix[l] = if l == 0 {
                self.first[n]
            } else {
                self.transfers[l - 1][(n, self.indices[l - 1])] * self.prefix[l - 1]
            };
        }
    }
}

impl Iterator for PathEnumerator {
    type Item = VirtualPath;

    fn next(&mut self) -> Option<VirtualPath> {
        if self.done {
            return None;
        }
        let out = VirtualPath {
            indices: self.indices.clone(),
            amplitude: *self.prefix.last().unwrap(),
        };
        let mut level = self.indices.len();
        loop {
            if level == 0 {
                self.done = true;
                break;
            }
            level -= 1;
            self.indices[level] += 1;
            if self.indices[level] < self.radix {
                self.refresh_from(level);
                break;
            }
            self.indices[level] = 0;
        }
        Some(out)
    }
}

/// A validated scenario with its propagators and eigenbases precomputed.
#[derive(Debug, Clone)]
pub struct HistoryEngine {
    scenario: Scenario,
    config: EngineConfig,
    dynamics: Dynamics,
    /// `U(t_ℓ, t_{ℓ-1})`, the first from the preparation time.
    steps: Vec<ComplexMatrix>,
    /// `U(t_ℓ, t_prep)` computed directly from the schedule.
    absolute: Vec<ComplexMatrix>,
    bases: Vec<Vec<StateVector>>,
    cluster_maps: Vec<Vec<usize>>,
    components: Vec<(f64, StateVector)>,
}

impl HistoryEngine {
    pub fn new(scenario: Scenario) -> Result<Self> {
        HistoryEngine::with_config(scenario, EngineConfig::default())
    }

    pub fn with_config(scenario: Scenario, config: EngineConfig) -> Result<Self> {
        scenario.validate().map_err(Error::Validation)?;
        if scenario.measurements.is_empty() {
            return Err(Error::Precondition("scenario has no measurements".into()));
        }
        let dynamics = scenario.dynamics()?;
        let t0 = scenario.preparation_time();
        let mut steps = Vec::with_capacity(scenario.len());
        let mut absolute = Vec::with_capacity(scenario.len());
        let mut previous = t0;
        for m in &scenario.measurements {
            steps.push(dynamics.propagator(previous, m.time)?.matrix);
            absolute.push(dynamics.propagator(t0, m.time)?.matrix);
            previous = m.time;
        }
        let bases = scenario
            .measurements
            .iter()
            .map(|m| m.observable.basis_vectors())
            .collect();
        let cluster_maps = scenario
            .measurements
            .iter()
            .map(|m| m.observable.cluster_map())
            .collect();
        let components = scenario.preparation.components()?;
        Ok(HistoryEngine {
            scenario,
            config,
            dynamics,
            steps,
            absolute,
            bases,
            cluster_maps,
            components,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn dimension(&self) -> usize {
        self.scenario.dimension
    }

    /// Number of measurements `L`.
    pub fn len(&self) -> usize {
        self.scenario.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenario.measurements.is_empty()
    }

    pub fn observable(&self, l: usize) -> &HermitianObservable {
        &self.scenario.measurements[l].observable
    }

    pub fn outcome_counts(&self) -> Vec<usize> {
        self.scenario
            .measurements
            .iter()
            .map(|m| m.observable.cluster_count())
            .collect()
    }

    pub fn string_count(&self) -> u128 {
        self.outcome_counts().iter().map(|&c| c as u128).product()
    }

    pub fn path_count(&self) -> u128 {
        (self.dimension() as u128).saturating_pow(self.len() as u32)
    }

    /// Weighted pure states making up the preparation.
    pub fn initial_components(&self) -> &[(f64, StateVector)] {
        &self.components
    }

    /// The single preparation state, if the preparation is pure.
    pub fn pure_initial(&self) -> Result<&StateVector> {
        match &self.scenario.preparation {
            Preparation::Pure(v) => Ok(v),
            other => Err(Error::Precondition(format!(
                "preparation must be pure, found `{}`",
                other.kind()
            ))),
        }
    }

    fn check_initial(&self, initial: &StateVector) -> Result<()> {
        if initial.dim() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: initial.dim(),
            });
        }
        Ok(())
    }

    pub fn check_outcomes(&self, outcomes: &OutcomeString) -> Result<()> {
        if outcomes.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: outcomes.len(),
            });
        }
        for (l, &i) in outcomes.0.iter().enumerate() {
            self.observable(l).cluster(i)?;
        }
        Ok(())
    }

    fn projector(&self, l: usize, cluster: usize) -> &ComplexMatrix {
        &self.observable(l).spectrum().clusters()[cluster].projector
    }

    /// Amplitude of one virtual path from `initial`.
    pub fn path_amplitude(&self, path: &[usize], initial: &StateVector) -> Result<C64> {
        self.check_initial(initial)?;
        if path.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: path.len(),
            });
        }
        let mut amplitude = c64(1.0, 0.0);
        let mut previous = initial.as_vector().clone();
        for (l, &n) in path.iter().enumerate() {
            let q = self.bases[l].get(n).ok_or_else(|| Error::IndexOutOfRange {
                what: format!("eigenbasis of `{}`", self.scenario.measurements[l].label),
                index: n,
                size: self.dimension(),
            })?;
            amplitude *= q.inner(&(&self.steps[l] * &previous));
            previous = q.as_vector().clone();
        }
        Ok(amplitude)
    }

    fn basis_matrix(&self, l: usize) -> ComplexMatrix {
        let columns: Vec<ComplexVector> = self.bases[l].iter().map(|v| v.as_vector().clone()).collect();
        ComplexMatrix::from_columns(&columns)
    }

    /// `T[m, n] = ⟨q^ℓ_m|U_ℓ|q^{ℓ-1}_n⟩` for `ℓ ≥ 1` (0-based).
    pub fn transfer(&self, l: usize) -> ComplexMatrix {
        assert!(l >= 1 && l < self.len(), "transfer index out of range");
        self.basis_matrix(l).adjoint() * &self.steps[l] * self.basis_matrix(l - 1)
    }

    fn first_amplitudes(&self, initial: &StateVector) -> Vec<C64> {
        let evolved = &self.steps[0] * initial.as_vector();
        self.bases[0].iter().map(|q| q.inner(&evolved)).collect()
    }

    fn check_path_budget(&self, requested: u128) -> Result<()> {
        if requested > self.config.path_budget {
            return Err(Error::Budget {
                what: "path enumeration",
                requested,
                budget: self.config.path_budget,
                hint: "; use the projected-propagator strategy",
            });
        }
        Ok(())
    }

    /// All `N^L` virtual paths with amplitudes, lexicographic in indices.
    pub fn enumerate_paths(&self, initial: &StateVector) -> Result<PathEnumerator> {
        self.check_initial(initial)?;
        self.check_path_budget(self.path_count())?;
        let mut e = PathEnumerator {
            first: self.first_amplitudes(initial),
            transfers: (1..self.len()).map(|l| self.transfer(l)).collect(),
            radix: self.dimension(),
            indices: vec![0; self.len()],
            prefix: vec![c64(0.0, 0.0); self.len()],
            done: false,
        };
        e.refresh_from(0);
        Ok(e)
    }

    pub fn path_table(&self, initial: &StateVector) -> Result<PathTable> {
        let amplitudes = self.enumerate_paths(initial)?.map(|p| p.amplitude).collect();
        Ok(PathTable {
            radix: self.dimension(),
            len: self.len(),
            amplitudes,
        })
    }

    /// Amplitude for the intermediate outcomes `past` (one cluster index per
    /// measurement except the last) ending in final basis state
    /// `final_index`, by projector insertion.
    pub fn coarse_amplitude(&self, initial: &StateVector, past: &[usize], final_index: usize) -> Result<C64> {
        self.check_initial(initial)?;
        self.check_past(past, final_index)?;
        let v = self.contract_past(initial.as_vector(), past);
        Ok(self.bases[self.len() - 1][final_index].inner(&v))
    }

    /// Same amplitude by summing enumerated paths whose intermediate indices
    /// carry the selected eigenvalues.
    pub fn coarse_amplitude_by_paths(
        &self,
        initial: &StateVector,
        past: &[usize],
        final_index: usize,
    ) -> Result<C64> {
        self.check_past(past, final_index)?;
        let last = self.len() - 1;
        let mut sum = c64(0.0, 0.0);
        for p in self.enumerate_paths(initial)? {
            let selected = p.indices[last] == final_index
                && past
                    .iter()
                    .enumerate()
                    .all(|(l, &i)| self.cluster_maps[l][p.indices[l]] == i);
            if selected {
                sum += p.amplitude;
            }
        }
        Ok(sum)
    }

    fn check_past(&self, past: &[usize], final_index: usize) -> Result<()> {
        if past.len() + 1 != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len() - 1,
                found: past.len(),
            });
        }
        for (l, &i) in past.iter().enumerate() {
            self.observable(l).cluster(i)?;
        }
        if final_index >= self.dimension() {
            return Err(Error::IndexOutOfRange {
                what: "final basis".into(),
                index: final_index,
                size: self.dimension(),
            });
        }
        Ok(())
    }

    /// `U_L π_{L-1} U_{L-1} ⋯ π_1 U_1 |ψ⟩`
    fn contract_past(&self, initial: &ComplexVector, past: &[usize]) -> ComplexVector {
        let mut v = &self.steps[0] * initial;
        for (l, &i) in past.iter().enumerate() {
            v = self.projector(l, i) * v;
            v = &self.steps[l + 1] * v;
        }
        v
    }

    /// Probabilities are added over the final eigen-subspace.
    fn final_probability(&self, v: &ComplexVector, cluster: usize) -> f64 {
        let last = self.len() - 1;
        self.bases[last]
            .iter()
            .zip(&self.cluster_maps[last])
            .filter(|(_, &c)| c == cluster)
            .map(|(q, _)| q.inner(v).norm_sqr())
            .sum()
    }

    /// Probability of an outcome string from the preparation's pure
    /// components, by projector insertion.
    pub fn sequence_probability(&self, outcomes: &OutcomeString) -> Result<f64> {
        self.probability(outcomes, Strategy::ProjectedPropagator)
    }

    /// Probability of an outcome string when the system starts in `initial`.
    pub fn pure_probability(&self, initial: &StateVector, outcomes: &OutcomeString) -> Result<f64> {
        self.check_initial(initial)?;
        self.check_outcomes(outcomes)?;
        let (past, last) = outcomes.0.split_at(self.len() - 1);
        let v = self.contract_past(initial.as_vector(), past);
        Ok(self.final_probability(&v, last[0]))
    }

    pub fn probability(&self, outcomes: &OutcomeString, strategy: Strategy) -> Result<f64> {
        self.check_outcomes(outcomes)?;
        match strategy {
            Strategy::ProjectedPropagator => {
                let mut p = 0.0;
                for (w, psi) in &self.components {
                    p += w * self.pure_probability(psi, outcomes)?;
                }
                Ok(p)
            }
            Strategy::PathSum => {
                self.check_path_budget(self.path_count())?;
                let mut p = 0.0;
                for (w, psi) in &self.components {
                    let table = self.path_table(psi)?;
                    p += w * self.path_sum_probability(&table, outcomes);
                }
                Ok(p)
            }
            Strategy::TraceFormula => self.trace_probability(outcomes),
        }
    }

    /// Coherent sums over intermediate subspaces, incoherent over the final
    /// one, straight from the path amplitudes.
    fn path_sum_probability(&self, table: &PathTable, outcomes: &OutcomeString) -> f64 {
        let last = self.len() - 1;
        let mut finals = vec![c64(0.0, 0.0); self.dimension()];
        for (indices, amplitude) in table.paths() {
            let selected = indices
                .iter()
                .enumerate()
                .all(|(l, &n)| self.cluster_maps[l][n] == outcomes.0[l]);
            if selected {
                finals[indices[last]] += amplitude;
            }
        }
        finals.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `Tr{π_L K ρ K†}` with `K = π_{L-1}(t_{L-1}) ⋯ π_1(t_1)` in the
    /// Heisenberg picture.
    pub fn trace_probability(&self, outcomes: &OutcomeString) -> Result<f64> {
        self.check_outcomes(outcomes)?;
        let rho = self.scenario.preparation.density()?;
        let n = self.dimension();
        let heisenberg: Vec<ComplexMatrix> = outcomes
            .0
            .iter()
            .enumerate()
            .map(|(l, &i)| {
                let u = &self.absolute[l];
                u.adjoint() * self.projector(l, i) * u
            })
            .collect();
        let mut k = ComplexMatrix::identity(n, n);
        for pi in &heisenberg[..heisenberg.len() - 1] {
            k = pi * k;
        }
        let inner = &k * rho.matrix() * k.adjoint();
        let p = (heisenberg.last().unwrap() * inner).trace().re;
        Ok(p.max(0.0))
    }

    fn check_string_budget(&self) -> Result<u128> {
        let count = self.string_count();
        if count > self.config.string_budget {
            return Err(Error::Budget {
                what: "outcome-string",
                requested: count,
                budget: self.config.string_budget,
                hint: "; reduce the number of measurements or outcomes",
            });
        }
        Ok(count)
    }

    fn all_strings(&self) -> impl Iterator<Item = OutcomeString> {
        let radices = self.outcome_counts();
        let total: usize = radices.iter().product();
        (0..total).map(move |mut k| {
            let mut out = vec![0; radices.len()];
            for (slot, r) in out.iter_mut().zip(&radices).rev() {
                *slot = k % r;
                k /= r;
            }
            OutcomeString(out)
        })
    }

    fn distribution_from(&self, strategy: Strategy, probabilities: Vec<f64>) -> Result<HistoryDistribution> {
        HistoryDistribution::new(
            self.scenario.labels(),
            self.scenario
                .measurements
                .iter()
                .map(|m| m.observable.eigenvalues())
                .collect(),
            strategy,
            probabilities,
        )
    }

    /// Probability of every outcome string.
    pub fn full_distribution(&self, strategy: Strategy) -> Result<HistoryDistribution> {
        let count = self.check_string_budget()?;
        let probabilities = match strategy {
            Strategy::ProjectedPropagator => {
                let mut out = vec![0.0; count as usize];
                let radices = self.outcome_counts();
                for (w, psi) in &self.components {
                    let v = &self.steps[0] * psi.as_vector();
                    self.descend(&v, 0, 0, *w, &radices, &mut out);
                }
                out
            }
            Strategy::PathSum => {
                self.check_path_budget(count.saturating_mul(self.path_count()))?;
                let tables = self
                    .components
                    .iter()
                    .map(|(w, psi)| Ok((*w, self.path_table(psi)?)))
                    .collect::<Result<Vec<_>>>()?;
                self.all_strings()
                    .map(|s| {
                        tables
                            .iter()
                            .map(|(w, t)| w * self.path_sum_probability(t, &s))
                            .sum()
                    })
                    .collect()
            }
            Strategy::TraceFormula => self
                .all_strings()
                .map(|s| self.trace_probability(&s))
                .collect::<Result<Vec<_>>>()?,
        };
        self.distribution_from(strategy, probabilities)
    }

    /// Depth-first contraction sharing prefixes between outcome strings.
    fn descend(&self, v: &ComplexVector, level: usize, offset: usize, weight: f64, radices: &[usize], out: &mut [f64]) {
        let last = self.len() - 1;
        for i in 0..radices[level] {
            let idx = offset * radices[level] + i;
            if level == last {
                out[idx] += weight * self.final_probability(v, i);
            } else {
                let projected = self.projector(level, i) * v;
                let next = &self.steps[level + 1] * projected;
                self.descend(&next, level + 1, idx, weight, radices, out);
            }
        }
    }

    /// Engine for the scenario with one more measurement appended. Existing
    /// propagators and bases are reused.
    pub fn extend(&self, event: MeasurementEvent) -> Result<HistoryEngine> {
        let last_time = self.scenario.measurements.last().map(|m| m.time).unwrap();
        if !(event.time > last_time) {
            return Err(Error::NonIncreasingTime {
                previous: last_time,
                next: event.time,
            });
        }
        if event.observable.dim() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: event.observable.dim(),
            });
        }
        let mut next = self.clone();
        next.steps.push(self.dynamics.propagator(last_time, event.time)?.matrix);
        next.absolute.push(
            self.dynamics
                .propagator(self.scenario.preparation_time(), event.time)?
                .matrix,
        );
        next.bases.push(event.observable.basis_vectors());
        next.cluster_maps.push(event.observable.cluster_map());
        next.scenario.measurements.push(event);
        Ok(next)
    }

    /// Probability of `outcomes` from a path table of a pure initial state.
    pub fn table_probability(&self, table: &PathTable, outcomes: &OutcomeString) -> Result<f64> {
        self.check_outcomes(outcomes)?;
        if table.len != self.len() || table.radix != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: table.len,
            });
        }
        Ok(self.path_sum_probability(table, outcomes))
    }
}

/// Appends a measurement at `t_{L+1} > t_L` and extends the cached path
/// amplitudes by one transfer step.
pub fn extend_scenario(
    engine: &HistoryEngine,
    table: &PathTable,
    event: MeasurementEvent,
) -> Result<(HistoryEngine, PathTable)> {
    if table.len != engine.len() {
        return Err(Error::DimensionMismatch {
            expected: engine.len(),
            found: table.len,
        });
    }
    engine.check_path_budget((table.amplitudes.len() as u128).saturating_mul(engine.dimension() as u128))?;
    let next = engine.extend(event)?;
    let extended = table.extend(&next.transfer(next.len() - 1));
    Ok((next, extended))
}

/// Replaces a system+environment scenario by the system alone, requiring no
/// interaction, measurements of the form `Q(S)⊗I`, and a product
/// preparation.
pub fn reduce_product_environment(composite: &Scenario, system_dim: usize, env_dim: usize) -> Result<Scenario> {
    reduce(composite, system_dim, env_dim, true)
}

/// Like [`reduce_product_environment`] but the preparation may entangle
/// system and environment; the system then starts in its reduced density
/// operator.
pub fn reduce_environment(composite: &Scenario, system_dim: usize, env_dim: usize) -> Result<Scenario> {
    reduce(composite, system_dim, env_dim, false)
}

fn reduce(composite: &Scenario, s: usize, e: usize, require_product: bool) -> Result<Scenario> {
    composite.validate().map_err(Error::Validation)?;
    if s.checked_mul(e) != Some(composite.dimension) {
        return Err(Error::Precondition(format!(
            "dimension {} is not {s} x {e}",
            composite.dimension
        )));
    }
    if composite.postselection.is_some() {
        return Err(Error::Precondition("post-selected scenarios cannot be reduced".into()));
    }
    let id_s = ComplexMatrix::identity(s, s);
    let id_e = ComplexMatrix::identity(e, e);
    let close = |a: &ComplexMatrix, b: &ComplexMatrix| max_norm(&(a - b)) <= 1e-10 * max_norm(a).max(1.0);

    let mut hamiltonian = Vec::with_capacity(composite.hamiltonian.len());
    for (k, seg) in composite.hamiltonian.iter().enumerate() {
        let h = &seg.matrix;
        let h_s = trace_out_right(h, s, e) / c64(e as f64, 0.0);
        let h_e = trace_out_left(h, s, e) / c64(s as f64, 0.0);
        let shift = h.trace() / c64((s * e) as f64, 0.0);
        let separable = h_s.kronecker(&id_e) + id_s.kronecker(&h_e) - ComplexMatrix::identity(s * e, s * e) * shift;
        if !close(h, &separable) {
            return Err(Error::Precondition(format!(
                "interaction Hamiltonian is non-zero in segment {}",
                k + 1
            )));
        }
        hamiltonian.push(HamiltonianSegment {
            start: seg.start,
            matrix: h_s,
        });
    }

    let mut measurements = Vec::with_capacity(composite.len());
    for m in &composite.measurements {
        let q = m.observable.matrix();
        let q_s = trace_out_right(q, s, e) / c64(e as f64, 0.0);
        if !close(q, &q_s.kronecker(&id_e)) {
            return Err(Error::Precondition(format!(
                "measurement `{}` does not act on the system alone",
                m.label
            )));
        }
        let q_s = (&q_s + q_s.adjoint()) * c64(0.5, 0.0);
        let observable = HermitianObservable::new(m.label.clone(), q_s, DEFAULT_CLUSTER_TOL)?;
        measurements.push(MeasurementEvent::new(m.time, m.label.clone(), observable));
    }

    let rho = composite.preparation.density()?;
    let rho_s = trace_out_right(rho.matrix(), s, e);
    if require_product {
        let rho_e = trace_out_left(rho.matrix(), s, e);
        if !close(rho.matrix(), &rho_s.kronecker(&rho_e)) {
            return Err(Error::Precondition("preparation is not a product state".into()));
        }
    }
    let rho_s = (&rho_s + rho_s.adjoint()) * c64(0.5, 0.0);
    let reduced = crate::linalg::DensityOperator::new(rho_s)?;
    let components = reduced.pure_components()?;
    let preparation = match components.as_slice() {
        [(w, v)] if (w - 1.0).abs() < 1e-12 => Preparation::Pure(v.clone()),
        _ => Preparation::Density(reduced),
    };

    Ok(Scenario {
        dimension: s,
        hamiltonian,
        measurements,
        preparation,
        postselection: None,
    })
}
