#![allow(dead_code)]

use histories_core::linalg::{
    c64, ComplexMatrix, ComplexVector, DensityOperator, HermitianObservable, StateVector, TensorProduct, DEFAULT_CLUSTER_TOL,
};
use histories_core::scenario::{MeasurementEvent, Preparation, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut TestRng, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_hermitian(rng: &mut TestRng, n: usize) -> ComplexMatrix {
    let a = random_matrix(rng, n);
    (&a + a.adjoint()) * c64(0.5, 0.0)
}

pub fn random_unitary(rng: &mut TestRng, n: usize) -> ComplexMatrix {
    random_matrix(rng, n).qr().q()
}

pub fn random_state(rng: &mut TestRng, n: usize) -> StateVector {
    let v = ComplexVector::from_fn(n, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    StateVector::normalized(v).unwrap()
}

pub fn columns(u: &ComplexMatrix, k: usize) -> Vec<StateVector> {
    (0..k)
        .map(|j| StateVector::normalized(u.column(j).into_owned()).unwrap())
        .collect()
}

/// `V diag(λ) V†` with integer levels, at least one repeated when `n ≥ 2`.
pub fn degenerate_hermitian(rng: &mut TestRng, n: usize) -> ComplexMatrix {
    let mut levels: Vec<f64> = (0..n).map(|_| rng.random_range(-2i32..=2) as f64).collect();
    if n >= 2 && levels.iter().all(|a| levels.iter().filter(|b| *b == a).count() == 1) {
        let k = rng.random_range(1..n);
        levels[k] = levels[0];
    }
    let v = random_unitary(rng, n);
    let d = ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(n, levels.iter().map(|l| c64(*l, 0.0))));
    let h = &v * d * v.adjoint();
    (&h + h.adjoint()) * c64(0.5, 0.0)
}

pub fn observable(label: &str, m: ComplexMatrix) -> HermitianObservable {
    HermitianObservable::new(label, m, DEFAULT_CLUSTER_TOL).unwrap()
}

pub fn random_weights(rng: &mut TestRng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|w| w / s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrepKind {
    Pure,
    Subspace,
    Density,
}

pub const PREP_KINDS: [PrepKind; 3] = [PrepKind::Pure, PrepKind::Subspace, PrepKind::Density];

pub fn random_preparation(rng: &mut TestRng, n: usize, kind: PrepKind) -> Preparation {
    match kind {
        PrepKind::Pure => Preparation::Pure(random_state(rng, n)),
        PrepKind::Subspace => {
            let m = rng.random_range(1..=n);
            let basis = columns(&random_unitary(rng, n), m);
            Preparation::Subspace {
                weights: random_weights(rng, m),
                basis,
            }
        }
        PrepKind::Density => {
            let k = rng.random_range(1..=n + 1);
            let states: Vec<StateVector> = (0..k).map(|_| random_state(rng, n)).collect();
            let weights = random_weights(rng, k);
            let rho = DensityOperator::mixture(&weights, &states).unwrap();
            let m = rho.matrix();
            Preparation::Density(DensityOperator::new((m + m.adjoint()) * c64(0.5, 0.0)).unwrap())
        }
    }
}

/// Random dynamics (one or two segments), `l` observables with forced
/// degeneracies, and a preparation of the given kind.
pub fn random_scenario(rng: &mut TestRng, n: usize, l: usize, kind: PrepKind) -> Scenario {
    let mut s = Scenario::new(n, random_preparation(rng, n, kind)).with_segment(0.0, random_hermitian(rng, n));
    if rng.random_bool(0.5) {
        s = s.with_segment(rng.random_range(0.2..0.8), random_hermitian(rng, n));
    }
    let mut t = 0.0;
    for k in 0..l {
        t += rng.random_range(0.1..1.0);
        let m = if rng.random_bool(0.75) {
            degenerate_hermitian(rng, n)
        } else {
            random_hermitian(rng, n)
        };
        let label = format!("q{}", k + 1);
        s = s.with_measurement(MeasurementEvent::new(t, label.clone(), observable(&label, m)));
    }
    s
}

/// Non-interacting system–environment composite measured on the system;
/// returns the mixture `(|β_j|², q_j)` it should reduce to.
pub fn random_composite(r: &mut TestRng, s: usize, e: usize, l: usize, product: bool) -> (Scenario, Vec<(f64, StateVector)>) {
    let id_s = ComplexMatrix::identity(s, s);
    let id_e = ComplexMatrix::identity(e, e);
    let h_s = random_hermitian(r, s);
    let h_e = random_hermitian(r, e);
    let h = h_s.tensor(&id_e).unwrap() + id_s.tensor(&h_e).unwrap();
    let (prep, mixture) = if product {
        let a = random_state(r, s);
        let b = random_state(r, e);
        (Preparation::Pure(a.tensor(&b).unwrap()), vec![(1.0, a)])
    } else {
        let k = r.random_range(1..=e);
        let env = columns(&random_unitary(r, e), k);
        let beta = random_state(r, k);
        let sys: Vec<StateVector> = (0..k).map(|_| random_state(r, s)).collect();
        let mut psi = ComplexVector::zeros(s * e);
        let mut mixture = Vec::new();
        for j in 0..k {
            psi += sys[j].tensor(&env[j]).unwrap().into_vector() * beta.as_vector()[j];
            mixture.push((beta.as_vector()[j].norm_sqr(), sys[j].clone()));
        }
        (Preparation::Pure(StateVector::normalized(psi).unwrap()), mixture)
    };
    let mut sc = Scenario::new(s * e, prep).with_segment(0.0, h);
    let mut t = 0.0;
    for k in 0..l {
        t += r.random_range(0.2..1.0);
        let q = degenerate_hermitian(r, s);
        sc = sc.with_measurement(MeasurementEvent::new(t, format!("q{k}"), observable("q", q.tensor(&id_e).unwrap())));
    }
    (sc, mixture)
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (|diff| = {:e} > {tol:e})", (a - b).abs());
}
