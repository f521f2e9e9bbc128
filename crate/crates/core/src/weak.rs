//! Weak values and a finite von Neumann pointer.

use std::f64::consts::PI;

use crate::engine::DEFAULT_POSTSELECTION_TOL;
use crate::error::{Error, Result};
use crate::linalg::{c64, ComplexMatrix, ComplexVector, HermitianObservable, StateVector, TensorProduct, C64};
use crate::scenario::{Preparation, Scenario};

/// Relative agreement required between the matrix-element and the
/// path-amplitude forms of a weak value.
pub const DUAL_FORM_TOL: f64 = 1e-10;

/// Pre-selected state, intermediate observable and post-selected state, all
/// carried to the time of the intermediate measurement.
#[derive(Debug, Clone)]
pub struct WeakSetting {
    /// `U(t₂, t₁)|pre⟩`
    pub pre: StateVector,
    /// `U⁻¹(t₃, t₂)|post⟩`
    pub post: StateVector,
    pub observable: HermitianObservable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakValueResult {
    /// `⟨q³(t₂)|Q|q¹(t₂)⟩ / ⟨q³(t₂)|q¹(t₂)⟩`
    pub value: C64,
    pub numerator: C64,
    pub denominator: C64,
    /// `Σ_n λ_n A(q³←q²_n←q¹) / Σ_n A(q³←q²_n←q¹)`
    pub path_value: C64,
}

impl WeakValueResult {
    /// Leading-order mean pointer shift per unit coupling.
    pub fn real(&self) -> f64 {
        self.value.re
    }
}

impl WeakSetting {
    /// Evolves `pre` from `t1` to `t2` and `post` back from `t3` to `t2`.
    pub fn new(
        pre: &StateVector,
        post: &StateVector,
        observable: HermitianObservable,
        u21: &ComplexMatrix,
        u32: &ComplexMatrix,
    ) -> Result<Self> {
        Ok(WeakSetting {
            pre: pre.evolve(u21)?,
            post: post.evolve(&u32.adjoint())?,
            observable,
        })
    }

    /// Pure preparation, the measurement named `label`, and the scenario's
    /// post-selection.
    pub fn from_scenario(scenario: &Scenario, label: &str) -> Result<Self> {
        scenario.validate().map_err(Error::Validation)?;
        let pre = match &scenario.preparation {
            Preparation::Pure(v) => v,
            other => {
                return Err(Error::Precondition(format!(
                    "weak values need a pure preparation, found `{}`",
                    other.kind()
                )))
            }
        };
        let post = scenario
            .postselection
            .as_ref()
            .ok_or_else(|| Error::Precondition("scenario has no post-selection".into()))?;
        let (_, event) = scenario.measurement(label)?;
        let dynamics = scenario.dynamics()?;
        let u21 = dynamics.propagator(scenario.preparation_time(), event.time)?;
        let u32 = dynamics.propagator(event.time, post.time)?;
        WeakSetting::new(pre, &post.state, event.observable.clone(), &u21.matrix, &u32.matrix)
    }

    pub fn weak_value(&self) -> Result<WeakValueResult> {
        self.weak_value_with_tol(DEFAULT_POSTSELECTION_TOL)
    }

    pub fn weak_value_with_tol(&self, tolerance: f64) -> Result<WeakValueResult> {
        let pre = self.pre.as_vector();
        let denominator = self.post.inner(pre);
        if denominator.norm() <= tolerance {
            return Err(Error::PostSelection {
                overlap: denominator.norm(),
                tolerance,
            });
        }
        let numerator = self.post.inner(&(self.observable.matrix() * pre));
        let value = numerator / denominator;

        let mut weighted = c64(0.0, 0.0);
        let mut total = c64(0.0, 0.0);
        for cluster in self.observable.spectrum().clusters() {
            for q in &cluster.basis {
                let a = self.post.inner(q.as_vector()) * q.inner(pre);
                weighted += a * cluster.eigenvalue;
                total += a;
            }
        }
        let path_value = weighted / total;
        let gap = (path_value - value).norm();
        if gap > DUAL_FORM_TOL * value.norm().max(1.0) {
            return Err(Error::Consistency(format!(
                "weak value forms disagree by {gap:e}: {value} vs {path_value}"
            )));
        }
        Ok(WeakValueResult {
            value,
            numerator,
            denominator,
            path_value,
        })
    }

    /// Couples `Q` to a pointer register with positions `{−J, …, J}` through
    /// `exp(−i g Q⊗p)`, post-selects the system and returns the mean pointer
    /// position divided by `g` (zero when `g = 0`).
    pub fn pointer_shift(&self, g: f64, pointer_dim: usize) -> Result<f64> {
        self.pointer_shift_with_tol(g, pointer_dim, DEFAULT_POSTSELECTION_TOL)
    }

    pub fn pointer_shift_with_tol(&self, g: f64, pointer_dim: usize, tolerance: f64) -> Result<f64> {
        if !(g >= 0.0) || !g.is_finite() {
            return Err(Error::Precondition(format!("coupling must be finite and non-negative, got {g}")));
        }
        if pointer_dim < 3 || pointer_dim % 2 == 0 {
            return Err(Error::Precondition(format!(
                "pointer dimension must be odd and at least 3, got {pointer_dim}"
            )));
        }
        let n = self.pre.dim();
        let d = pointer_dim;
        let j = (d / 2) as f64;

        let mut coupling = ComplexMatrix::zeros(n * d, n * d);
        for cluster in self.observable.spectrum().clusters() {
            coupling += cluster.projector.tensor(&shift_operator(d, g * cluster.eigenvalue))?;
        }
        let initial = self.pre.tensor(&gaussian_pointer(d))?;
        let coupled = coupling * initial.as_vector();

        // ⟨post| ⊗ I
        let mut pointer = ComplexVector::zeros(d);
        for (s, p) in self.post.as_vector().iter().enumerate() {
            for x in 0..d {
                pointer[x] += p.conj() * coupled[s * d + x];
            }
        }
        let weight = pointer.norm_squared();
        if weight.sqrt() <= tolerance {
            return Err(Error::PostSelection {
                overlap: weight.sqrt(),
                tolerance,
            });
        }
        if g == 0.0 {
            return Ok(0.0);
        }
        let mean: f64 = pointer
            .iter()
            .enumerate()
            .map(|(x, a)| (x as f64 - j) * a.norm_sqr())
            .sum::<f64>()
            / weight;
        Ok(mean / g)
    }
}

/// `exp(−i s p)` on positions `{−J, …, J}`, with `p` diagonal in the
/// symmetric discrete Fourier basis (momenta `2πk/D`, `k ∈ {−J, …, J}`).
/// Integer `s` shifts cyclically by `s` sites.
pub fn shift_operator(dim: usize, s: f64) -> ComplexMatrix {
    let j = (dim / 2) as i64;
    let d = dim as f64;
    ComplexMatrix::from_fn(dim, dim, |x, y| {
        let delta = x as f64 - y as f64 - s;
        let sum: f64 = (-j..=j).map(|k| (2.0 * PI * k as f64 * delta / d).cos()).sum();
        c64(sum / d, 0.0)
    })
}

/// Centered discrete Gaussian with amplitude `∝ exp(−x²/(2σ²))`, `σ = J/4`.
pub fn gaussian_pointer(dim: usize) -> StateVector {
    let j = (dim / 2) as f64;
    let sigma = j / 4.0;
    let v = ComplexVector::from_iterator(
        dim,
        (0..dim).map(|x| {
            let pos = x as f64 - j;
            c64((-pos * pos / (2.0 * sigma * sigma)).exp(), 0.0)
        }),
    );
    StateVector::normalized(v).expect("gaussian is non-zero")
}
