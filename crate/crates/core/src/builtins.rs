//! Parameterized generators for the standard example scenarios, and the
//! `builtin:name?key=value&...` addressing used by the command line.
//!
//! Outcome eigenvalues: spin components are `±1`; generic two-outcome
//! observables (`C`, `D`) use `1` and `2`, so outcome `C₁` is cluster 0.

use std::f64::consts::PI;
use std::fmt;

use crate::engine::{EngineConfig, HistoryDistribution, HistoryEngine, Strategy};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, pauli, ComplexMatrix, HermitianObservable, StateVector, TensorProduct, DEFAULT_CLUSTER_TOL,
};
use crate::scenario::{MeasurementEvent, Preparation, Scenario};

/// `(|b⟩, |b⊥⟩)` with `|b⟩` on the Bloch sphere at `(θ, φ)`.
pub fn bloch_basis(theta: f64, phi: f64) -> [StateVector; 2] {
    let b = StateVector::bloch(theta, phi);
    let v = b.as_vector();
    let perp = StateVector::from_slice(&[-v[1].conj(), v[0].conj()]).expect("unit by construction");
    [b, perp]
}

fn zero(n: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(n, n)
}

fn two_outcome(label: &str, basis: &[StateVector; 2]) -> Result<HermitianObservable> {
    HermitianObservable::with_eigenbasis(label, &[1.0, 2.0], basis.to_vec(), DEFAULT_CLUSTER_TOL)
}

/// Spin prepared in `|b₁⟩`, then `C = 1·|c₁⟩⟨c₁| + 2·|c₂⟩⟨c₂|` at `t = 1`.
/// No dynamics, so `P(C₁←B₁) = |⟨c₁|↑⟩⟨↑|b₁⟩ + ⟨c₁|↓⟩⟨↓|b₁⟩|²`.
pub fn double_slit(b1: &StateVector, c_basis: &[StateVector; 2]) -> Result<Scenario> {
    Ok(Scenario::new(2, Preparation::Pure(b1.clone()))
        .with_segment(0.0, zero(2))
        .with_measurement(MeasurementEvent::new(1.0, "C", two_outcome("C", c_basis)?)))
}

/// Spin (S) entangled with a two-level environment (E) with basis
/// `|+⟩ = |0⟩`, `|−⟩ = |1⟩`:
///
/// ```text
/// |Ψ⟩ = ⟨↑|b₁⟩ |↑⟩⊗|+⟩ + ⟨↓|b₁⟩ |↓⟩⊗|−⟩
/// ```
///
/// `C(S)⊗I` is measured at `t = 1` and `I⊗D(E)` at `t = 2`. Paths run
/// through `|c_i⟩⊗|±⟩` and then `|c_i⟩⊗|d_j⟩`.
pub fn eraser(b1: &StateVector, c_basis: &[StateVector; 2], d_basis: &[StateVector; 2]) -> Result<Scenario> {
    let env = [StateVector::basis(2, 0), StateVector::basis(2, 1)];
    let up = StateVector::basis(2, 0);
    let down = StateVector::basis(2, 1);
    let b = b1.as_vector();
    let psi = up.tensor(&env[0])?.into_vector() * b[0] + down.tensor(&env[1])?.into_vector() * b[1];
    let psi = StateVector::new(psi)?;

    let mut c_states = Vec::with_capacity(4);
    let mut d_states = Vec::with_capacity(4);
    for c in c_basis {
        for e in &env {
            c_states.push(c.tensor(e)?);
        }
        for d in d_basis {
            d_states.push(c.tensor(d)?);
        }
    }
    let c = HermitianObservable::with_eigenbasis("C", &[1.0, 1.0, 2.0, 2.0], c_states, DEFAULT_CLUSTER_TOL)?;
    let d = HermitianObservable::with_eigenbasis("D", &[1.0, 2.0, 1.0, 2.0], d_states, DEFAULT_CLUSTER_TOL)?;
    Ok(Scenario::new(4, Preparation::Pure(psi))
        .with_segment(0.0, zero(4))
        .with_measurement(MeasurementEvent::new(1.0, "C", c))
        .with_measurement(MeasurementEvent::new(2.0, "D", d)))
}

/// Two spins in the singlet `(|↑↓⟩ − |↓↑⟩)/√2`; Alice measures `σ_n(1)` at
/// `t = 1`, Bob `σ_n′(2)` at `t = 2`, with `n = (θ, 0)` and `n′ = (θ′, 0)`.
/// Both measurements use the product basis `|↑_n/↓_n⟩⊗|↑_n′/↓_n′⟩`.
pub fn epr(theta: f64, theta_prime: f64) -> Result<Scenario> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let singlet = StateVector::from_slice(&[c64(0.0, 0.0), c64(s, 0.0), c64(-s, 0.0), c64(0.0, 0.0)])?;
    let alice = bloch_basis(theta, 0.0);
    let bob = bloch_basis(theta_prime, 0.0);
    let mut states = Vec::with_capacity(4);
    for a in &alice {
        for b in &bob {
            states.push(a.tensor(b)?);
        }
    }
    let qa = HermitianObservable::with_eigenbasis("alice", &[1.0, 1.0, -1.0, -1.0], states.clone(), DEFAULT_CLUSTER_TOL)?;
    let qb = HermitianObservable::with_eigenbasis("bob", &[1.0, -1.0, 1.0, -1.0], states, DEFAULT_CLUSTER_TOL)?;
    Ok(Scenario::new(4, Preparation::Pure(singlet))
        .with_segment(0.0, zero(4))
        .with_measurement(MeasurementEvent::new(1.0, "alice", qa))
        .with_measurement(MeasurementEvent::new(2.0, "bob", qb)))
}

/// Spin in a field along x, `H = −ωσ_x`, so `U(t) = cos(ωt) + i sin(ωt)σ_x`.
/// The meter (`σ_z`) reads `+1` at `t = −1`, the field acts from `t = 0`, and
/// the meter reads again at `t`.
pub fn larmor(omega: f64, t: f64) -> Result<Scenario> {
    if !(omega > 0.0) || !(t >= 0.0) {
        return Err(Error::Precondition(format!(
            "larmor requires omega > 0 and t >= 0 (omega = {omega}, t = {t})"
        )));
    }
    let meter = || HermitianObservable::new("meter", pauli::z(), DEFAULT_CLUSTER_TOL);
    Ok(Scenario::new(2, Preparation::Pure(StateVector::basis(2, 0)))
        .with_segment(-1.0, zero(2))
        .with_segment(0.0, pauli::x() * c64(-omega, 0.0))
        .with_measurement(MeasurementEvent::new(-1.0, "meter0", meter()?))
        .with_measurement(MeasurementEvent::new(t, "meter1", meter()?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinKind {
    DoubleSlit,
    Eraser,
    Epr,
    Larmor,
}

impl BuiltinKind {
    pub const ALL: [BuiltinKind; 4] = [BuiltinKind::DoubleSlit, BuiltinKind::Eraser, BuiltinKind::Epr, BuiltinKind::Larmor];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinKind::DoubleSlit => "double_slit",
            BuiltinKind::Eraser => "eraser",
            BuiltinKind::Epr => "epr",
            BuiltinKind::Larmor => "larmor",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        BuiltinKind::ALL
            .into_iter()
            .find(|k| k.name() == name || k.name().replace('_', "-") == name)
            .ok_or_else(|| Error::Unknown {
                kind: "builtin",
                name: name.to_string(),
                available: BuiltinKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            })
    }

    /// Parameter names with their defaults.
    pub fn defaults(self) -> Vec<(&'static str, f64)> {
        match self {
            BuiltinKind::DoubleSlit => vec![("b_theta", PI / 2.0), ("b_phi", 0.0), ("c_theta", PI / 3.0), ("c_phi", 0.0)],
            BuiltinKind::Eraser => vec![
                ("b_theta", PI / 2.0),
                ("b_phi", 0.0),
                ("c_theta", PI / 3.0),
                ("c_phi", 0.0),
                ("d_theta", PI / 2.0),
                ("d_phi", 0.0),
            ],
            BuiltinKind::Epr => vec![("theta", 0.0), ("theta_prime", PI / 3.0)],
            BuiltinKind::Larmor => vec![("omega", 1.0), ("t", PI / 4.0)],
        }
    }
}

/// A builtin generator with concrete parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinTemplate {
    kind: BuiltinKind,
    params: Vec<(&'static str, f64)>,
}

impl BuiltinTemplate {
    pub fn new(kind: BuiltinKind) -> Self {
        BuiltinTemplate {
            kind,
            params: kind.defaults(),
        }
    }

    /// Parses `builtin:epr?theta=0.3&theta_prime=pi/2` (the `builtin:`
    /// prefix is optional).
    pub fn parse(spec: &str) -> Result<Self> {
        let body = spec.strip_prefix("builtin:").unwrap_or(spec);
        let (name, query) = match body.split_once('?') {
            Some((n, q)) => (n, q),
            None => (body, ""),
        };
        let mut t = BuiltinTemplate::new(BuiltinKind::from_name(name)?);
        for pair in query.split('&').filter(|p| !p.is_empty()) {
            let (key, value) = pair.split_once('=').ok_or_else(|| Error::Schema {
                field: pair.to_string(),
                message: "expected key=value".into(),
            })?;
            t.set(key, parse_value(value)?)?;
        }
        Ok(t)
    }

    pub fn kind(&self) -> BuiltinKind {
        self.kind
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.params.iter().map(|(k, _)| k.to_string()).collect()
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.params
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| self.unknown(name))
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let available = self.parameter_names();
        match self.params.iter_mut().find(|(k, _)| *k == name) {
            Some(slot) => {
                slot.1 = value;
                Ok(())
            }
            None => Err(Error::Unknown {
                kind: "parameter",
                name: name.to_string(),
                available,
            }),
        }
    }

    fn unknown(&self, name: &str) -> Error {
        Error::Unknown {
            kind: "parameter",
            name: name.to_string(),
            available: self.parameter_names(),
        }
    }

    pub fn build(&self) -> Result<Scenario> {
        let p = |k: &str| self.get(k).expect("parameter list is fixed per kind");
        match self.kind {
            BuiltinKind::DoubleSlit => double_slit(
                &StateVector::bloch(p("b_theta"), p("b_phi")),
                &bloch_basis(p("c_theta"), p("c_phi")),
            ),
            BuiltinKind::Eraser => eraser(
                &StateVector::bloch(p("b_theta"), p("b_phi")),
                &bloch_basis(p("c_theta"), p("c_phi")),
                &bloch_basis(p("d_theta"), p("d_phi")),
            ),
            BuiltinKind::Epr => epr(p("theta"), p("theta_prime")),
            BuiltinKind::Larmor => larmor(p("omega"), p("t")),
        }
    }
}

impl fmt::Display for BuiltinTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "builtin:{}", self.kind.name())?;
        for (k, (name, value)) in self.params.iter().enumerate() {
            write!(f, "{}{name}={value}", if k == 0 { '?' } else { '&' })?;
        }
        Ok(())
    }
}

/// Reads a real number, also accepting multiples and fractions of `pi`
/// such as `pi`, `-pi/4`, `3pi/2`, `2*pi`.
pub fn parse_value(text: &str) -> Result<f64> {
    let bad = || Error::Schema {
        field: text.to_string(),
        message: "expected a number or a multiple of pi".into(),
    };
    let t = text.trim().replace('π', "pi");
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (coef, rest) = t.split_once("pi").ok_or_else(bad)?;
    let coef = coef.trim_end_matches('*');
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let value = coef * PI;
    if rest.is_empty() {
        Ok(value)
    } else if let Some(d) = rest.strip_prefix('/') {
        Ok(value / d.parse::<f64>().map_err(|_| bad())?)
    } else if let Some(m) = rest.strip_prefix('*') {
        Ok(value * m.parse::<f64>().map_err(|_| bad())?)
    } else {
        Err(bad())
    }
}

/// `steps + 1` equally spaced points from `from` to `to`.
pub fn linear_grid(from: f64, to: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![from];
    }
    (0..=steps)
        .map(|k| from + (to - from) * k as f64 / steps as f64)
        .collect()
}

/// Full distribution at every grid value of `parameter`, in grid order.
pub fn sweep(
    template: &BuiltinTemplate,
    parameter: &str,
    grid: &[f64],
    strategy: Strategy,
    config: EngineConfig,
) -> Result<Vec<(f64, HistoryDistribution)>> {
    template.get(parameter)?;
    grid.iter()
        .map(|&value| {
            let mut t = template.clone();
            t.set(parameter, value)?;
            let engine = HistoryEngine::with_config(t.build()?, config)?;
            Ok((value, engine.full_distribution(strategy)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::OutcomeString;

    #[test]
    fn template_parsing() {
        let t = BuiltinTemplate::parse("builtin:epr?theta=0.3&theta_prime=pi/2").unwrap();
        assert_eq!(t.kind(), BuiltinKind::Epr);
        assert_eq!(t.get("theta").unwrap(), 0.3);
        assert_eq!(t.get("theta_prime").unwrap(), PI / 2.0);
        let err = BuiltinTemplate::parse("builtin:epr?phi=1").unwrap_err().to_string();
        assert!(err.contains("theta, theta_prime"), "{err}");
        assert!(BuiltinTemplate::parse("builtin:nope").is_err());
    }

    #[test]
    fn pi_expressions() {
        assert_eq!(parse_value("pi").unwrap(), PI);
        assert_eq!(parse_value("-pi/4").unwrap(), -PI / 4.0);
        assert_eq!(parse_value("3pi/2").unwrap(), 1.5 * PI);
        assert_eq!(parse_value("2*pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_value("pi*2").unwrap(), 2.0 * PI);
        assert_eq!(parse_value("1e-3").unwrap(), 1e-3);
        assert!(parse_value("tau").is_err());
    }

    #[test]
    fn builtins_validate() {
        for kind in BuiltinKind::ALL {
            let s = BuiltinTemplate::new(kind).build().unwrap();
            assert!(s.validate().is_ok(), "{}", kind.name());
        }
    }

    #[test]
    fn double_slit_hand_values() {
        let up_x = StateVector::bloch(PI / 2.0, 0.0);
        let s = double_slit(&up_x, &bloch_basis(PI / 2.0, 0.0)).unwrap();
        let e = HistoryEngine::new(s).unwrap();
        assert!((e.sequence_probability(&OutcomeString(vec![0])).unwrap() - 1.0).abs() < 1e-12);
        assert!(e.sequence_probability(&OutcomeString(vec![1])).unwrap().abs() < 1e-12);
    }

    #[test]
    fn larmor_rejects_negative_time() {
        assert!(larmor(1.0, -0.5).is_err());
        assert!(larmor(0.0, 1.0).is_err());
    }

    #[test]
    fn grid() {
        assert_eq!(linear_grid(1.0, 2.0, 0), vec![1.0]);
        assert_eq!(linear_grid(0.0, 1.0, 4), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn empty_sweep() {
        let t = BuiltinTemplate::new(BuiltinKind::Larmor);
        let out = sweep(&t, "t", &[], Strategy::ProjectedPropagator, EngineConfig::default()).unwrap();
        assert!(out.is_empty());
        assert!(sweep(&t, "x", &[], Strategy::ProjectedPropagator, EngineConfig::default()).is_err());
    }
}
