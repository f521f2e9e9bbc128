//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::time::{Duration, Instant};

use common::*;
use histories_core::builtins::{bloch_basis, epr, eraser, larmor};
use histories_core::engine::{
    reduce_environment, reduce_product_environment, EngineConfig, HistoryDistribution, HistoryEngine, OutcomeString,
    Strategy,
};
use histories_core::linalg::{c64, ComplexMatrix, ComplexVector, StateVector, C64};
use histories_core::sampler::sample;
use histories_core::scenario::{MeasurementEvent, Preparation, Scenario};
use histories_core::weak::WeakSetting;
use histories_core::Error;
use rand::Rng;

/// Failed checks of one criterion plus a short summary of what was measured.
#[derive(Default)]
struct Outcome {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn close(&mut self, got: f64, want: f64, tol: f64, what: impl FnOnce() -> String) {
        let gap = (got - want).abs();
        self.check(gap <= tol, || format!("{}: {got} vs {want} (|diff| = {gap:e} > {tol:e})", what()));
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn within(&mut self, elapsed: Duration, limit: Duration) {
        self.note(format!("{:.3} s", elapsed.as_secs_f64()));
        self.check(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"));
    }
}

fn engine(s: Scenario) -> HistoryEngine {
    HistoryEngine::new(s).unwrap()
}

fn distribution(s: Scenario) -> HistoryDistribution {
    engine(s).full_distribution(Strategy::ProjectedPropagator).unwrap()
}

fn prob(e: &HistoryEngine, values: &[f64]) -> f64 {
    let idx = values
        .iter()
        .enumerate()
        .map(|(l, v)| e.observable(l).find_outcome(*v, 1e-9).unwrap())
        .collect();
    e.sequence_probability(&OutcomeString(idx)).unwrap()
}

fn epr_golden() -> Outcome {
    let mut out = Outcome::default();
    let start = Instant::now();
    for (theta, theta_prime) in [(0.0, 0.0), (0.0, PI / 2.0), (0.0, PI), (0.3, 1.1)] {
        let e = engine(epr(theta, theta_prime).unwrap());
        let half = (theta - theta_prime) / 2.0;
        let same = half.sin().powi(2) / 2.0;
        let opposite = half.cos().powi(2) / 2.0;
        for (a, b, want) in [(1.0, 1.0, same), (-1.0, -1.0, same), (1.0, -1.0, opposite), (-1.0, 1.0, opposite)] {
            out.close(prob(&e, &[a, b]), want, 1e-10, || format!("({theta}, {theta_prime}) P({b:+}<-{a:+})"));
        }
    }
    out.within(start.elapsed(), Duration::from_secs(1));
    out
}

fn larmor_golden() -> Outcome {
    let mut out = Outcome::default();
    let omega = 1.7;
    let period = 2.0 * PI / omega;
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let t = period * k as f64 / 49.0;
        let p = prob(&engine(larmor(omega, t).unwrap()), &[1.0, 1.0]);
        worst = worst.max((p - (omega * t).cos().powi(2)).abs());
        out.close(p, (omega * t).cos().powi(2), 1e-10, || format!("t = {t}"));
    }
    let p = prob(&engine(larmor(omega, period).unwrap()), &[1.0, 1.0]);
    out.close(p, 1.0, 1e-12, || "full period".into());
    out.note(format!("max grid error {worst:.1e}, full period error {:.1e}", (p - 1.0).abs()));
    out
}

fn slit_amplitudes(b1: &StateVector, c1: &StateVector) -> (C64, C64) {
    let (b, c) = (b1.as_vector(), c1.as_vector());
    (c[0].conj() * b[0], c[1].conj() * b[1])
}

fn eraser_suite() -> Outcome {
    let mut out = Outcome::default();
    let mut r = rng(3);
    let angle = |r: &mut TestRng| (r.random_range(0.0..PI), r.random_range(0.0..2.0 * PI));
    let plus_minus = bloch_basis(PI / 2.0, 0.0);
    for k in 0..20 {
        let b1 = random_state(&mut r, 2);
        let (ct, cp) = angle(&mut r);
        let c = bloch_basis(ct, cp);
        let (a1, a2) = slit_amplitudes(&b1, &c[0]);
        let e = engine(eraser(&b1, &c, &plus_minus).unwrap());
        out.close(prob(&e, &[1.0, 1.0]), (a1 + a2).norm_sqr() / 2.0, 1e-10, || format!("interference case {k}"));
    }
    let b1 = random_state(&mut r, 2);
    let c = bloch_basis(1.1, 0.4);
    let (a1, a2) = slit_amplitudes(&b1, &c[0]);
    let no_interference = a1.norm_sqr() + a2.norm_sqr();
    for k in 0..50 {
        let (dt, dp) = angle(&mut r);
        let full = distribution(eraser(&b1, &c, &bloch_basis(dt, dp)).unwrap());
        let sum = full.probabilities()[0] + full.probabilities()[1];
        out.close(sum, no_interference, 1e-10, || format!("sum rule, d-basis {k}"));
        let marginal = full.marginal_drop_last().unwrap().probabilities()[0];
        out.close(marginal, no_interference, 1e-10, || format!("marginal, d-basis {k}"));
    }
    out
}

fn oracle_triangle() -> Outcome {
    let mut out = Outcome::default();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let mut r = rng(1000 + k);
        let n = r.random_range(1..=4);
        let l = r.random_range(1..=4);
        let kind = PREP_KINDS[k as usize % 3];
        let s = random_scenario(&mut r, n, l, kind);
        let e = engine(s.clone());
        let a = e.full_distribution(Strategy::PathSum).unwrap();
        let b = e.full_distribution(Strategy::ProjectedPropagator).unwrap();
        let c = e.full_distribution(Strategy::TraceFormula).unwrap();
        let gap = a.max_abs_difference(&b).max(b.max_abs_difference(&c)).max(a.max_abs_difference(&c));
        worst = worst.max(gap);
        out.check(gap < 1e-9, || format!("scenario {k} (N = {n}, L = {l}, {kind:?}): strategies differ by {gap:e}"));
        out.close(b.total(), 1.0, 1e-9, || format!("scenario {k} total"));
        if l >= 2 {
            let shorter = distribution(s.truncated(l - 1));
            let gap = b.marginal_drop_last().unwrap().max_abs_difference(&shorter);
            out.check(gap < 1e-9, || format!("scenario {k}: causality gap {gap:e}"));
        }
    }
    out.note(format!("max strategy gap {worst:.1e}"));
    out.within(start.elapsed(), Duration::from_secs(60));
    out
}

fn rule_four_suite() -> Outcome {
    let mut out = Outcome::default();
    let mut r = rng(5);
    let (n, m) = (4, 3);
    let mut s = random_scenario(&mut r, n, 3, PrepKind::Pure);
    let basis = columns(&random_unitary(&mut r, n), m);
    s.preparation = Preparation::uniform(basis.clone());
    let reference = distribution(s.clone());
    for k in 0..20 {
        let w = random_unitary(&mut r, m);
        let rotated: Vec<StateVector> = (0..m)
            .map(|j| {
                let mut v = ComplexVector::zeros(n);
                for i in 0..m {
                    v += basis[i].as_vector() * w[(i, j)];
                }
                StateVector::normalized(v).unwrap()
            })
            .collect();
        let mut t = s.clone();
        t.preparation = Preparation::uniform(rotated);
        let gap = distribution(t).max_abs_difference(&reference);
        out.check(gap < 1e-10, || format!("rotation {k}: {gap:e}"));
    }

    // Q¹ = λI: every outcome of the first real measurement hands over as a
    // preparation for the rest of the sequence.
    for trial in 0..10 {
        let n = 3;
        let h = random_hermitian(&mut r, n);
        let q2 = observable("q2", degenerate_hermitian(&mut r, n));
        let q3 = observable("q3", random_hermitian(&mut r, n));
        let lambda = observable("lambda", ComplexMatrix::identity(n, n) * c64(0.7, 0.0));
        let everything: Vec<StateVector> = (0..n).map(|k| StateVector::basis(n, k)).collect();
        let joint = distribution(
            Scenario::new(n, Preparation::uniform(everything))
                .with_segment(0.0, h.clone())
                .with_measurement(MeasurementEvent::new(0.5, "lambda", lambda))
                .with_measurement(MeasurementEvent::new(1.0, "q2", q2.clone()))
                .with_measurement(MeasurementEvent::new(1.8, "q3", q3.clone())),
        );
        for i in 0..q2.cluster_count() {
            let handed = distribution(
                Scenario::new(n, Preparation::from_outcome(&q2, i).unwrap())
                    .with_segment(1.0, h.clone())
                    .with_measurement(MeasurementEvent::new(1.8, "q3", q3.clone())),
            );
            let block = handed.len();
            let slice = &joint.probabilities()[i * block..(i + 1) * block];
            let p_i: f64 = slice.iter().sum();
            for (p, q) in slice.iter().zip(handed.probabilities()) {
                out.close(p / p_i, *q, 1e-10, || format!("hand-over trial {trial}, outcome {i}"));
            }
        }
    }
    out
}

fn separability_suite() -> Outcome {
    let mut out = Outcome::default();
    let mut r = rng(6);
    for k in 0..30 {
        let (s, e) = (r.random_range(1..=3), r.random_range(1..=3));
        let l = r.random_range(1..=3);
        let (composite, _) = random_composite(&mut r, s, e, l, true);
        let reduced = reduce_product_environment(&composite, s, e).unwrap();
        let gap = distribution(reduced).max_abs_difference(&distribution(composite));
        out.check(gap < 1e-9, || format!("composite {k} ({s}x{e}): {gap:e}"));
    }
    for k in 0..10 {
        let (composite, mixture) = random_composite(&mut r, 2, 3, 3, false);
        let whole = distribution(composite.clone());
        let system = reduce_environment(&composite, 2, 3).unwrap();
        let mut mixed = vec![0.0; whole.len()];
        for (w, q) in &mixture {
            let mut pure = system.clone();
            pure.preparation = Preparation::Pure(q.clone());
            for (i, p) in distribution(pure).probabilities().iter().enumerate() {
                mixed[i] += w * p;
            }
        }
        for (a, b) in mixed.iter().zip(whole.probabilities()) {
            out.close(*a, *b, 1e-9, || format!("entangled preparation {k}"));
        }
    }
    out
}

fn weak_values() -> Outcome {
    let mut out = Outcome::default();
    let mut r = rng(7);
    let mut triples = 0;
    while triples < 100 {
        let n = r.random_range(2..=4);
        let pre = random_state(&mut r, n);
        let post = random_state(&mut r, n);
        if post.inner(pre.as_vector()).norm() < 1e-3 {
            continue;
        }
        triples += 1;
        let q = if r.random_bool(0.5) { degenerate_hermitian(&mut r, n) } else { random_hermitian(&mut r, n) };
        let id = ComplexMatrix::identity(n, n);
        match WeakSetting::new(&pre, &post, observable("q", q), &id, &id).unwrap().weak_value() {
            Ok(w) => {
                let gap = (w.value - w.path_value).norm();
                out.check(gap <= 1e-10 * w.value.norm().max(1.0), || format!("triple {triples}: forms differ by {gap:e}"));
            }
            Err(e) => out.check(false, || format!("triple {triples}: {e}")),
        }
    }

    let pre = StateVector::from_slice(&[c64(FRAC_1_SQRT_2, 0.0), c64(FRAC_1_SQRT_2, 0.0)]).unwrap();
    let a = 3.0 * PI / 8.0;
    let post = StateVector::from_slice(&[c64(a.cos(), 0.0), c64(-a.sin(), 0.0)]).unwrap();
    let z = ComplexMatrix::from_diagonal(&ComplexVector::from_column_slice(&[c64(1.0, 0.0), c64(-1.0, 0.0)]));
    let id = ComplexMatrix::identity(2, 2);
    let setting = WeakSetting::new(&pre, &post, observable("z", z), &id, &id).unwrap();
    let wv = setting.weak_value().unwrap();
    out.close(wv.value.re, -(1.0 + 2f64.sqrt()), 1e-10, || "anomalous weak value".into());
    out.close(wv.value.im, 0.0, 1e-10, || "anomalous weak value, imaginary part".into());

    let dim = 129;
    let residuals: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|g| (setting.pointer_shift(*g, dim).unwrap() - wv.real()).abs())
        .collect();
    out.note(format!(
        "pointer residuals {:.3e}, {:.3e}, {:.3e}",
        residuals[0], residuals[1], residuals[2]
    ));
    for w in residuals.windows(2) {
        out.check(w[1] < w[0], || format!("residual does not decrease: {:e} -> {:e}", w[0], w[1]));
        let ratio = w[0] / w[1];
        out.check((1.5..=3.0).contains(&ratio), || format!("halving ratio {ratio:.3} outside [1.5, 3]"));
    }
    out
}

fn sampler_suite() -> Outcome {
    let mut out = Outcome::default();
    let omega = 1.0;
    let d = distribution(larmor(omega, PI / (4.0 * omega)).unwrap());
    let report = sample(&d, 100_000, 20240).unwrap();
    let up = d.eigenvalues()[1].iter().position(|v| *v == 1.0).unwrap();
    let f = report.frequency(&[up, up]);
    out.note(format!("N+/N = {f:.5}"));
    out.check((f - 0.5).abs() < 0.0047, || format!("N+/N = {f}"));

    let d = distribution(epr(0.8, 0.8).unwrap());
    let r = sample(&d, 100_000, 1).unwrap();
    for k in 0..2 {
        out.check(r.count(&[k, k]) == 0, || format!("aligned outcome ({k}, {k}) drawn {} times", r.count(&[k, k])));
    }
    let again = sample(&d, 100_000, 1).unwrap();
    out.check(r.to_json() == again.to_json(), || "same seed gave different reports".into());
    out
}

fn performance() -> Outcome {
    let mut out = Outcome::default();
    let mut r = rng(9);
    let n = 8;
    let mut s = Scenario::new(n, Preparation::Pure(random_state(&mut r, n))).with_segment(0.0, random_hermitian(&mut r, n));
    for k in 0..6 {
        let label = format!("q{k}");
        let q = observable(&label, random_hermitian(&mut r, n));
        s = s.with_measurement(MeasurementEvent::new(1.0 + k as f64, label, q));
    }
    let e = HistoryEngine::with_config(s, EngineConfig::default()).unwrap();
    let start = Instant::now();
    let d = e.full_distribution(Strategy::ProjectedPropagator).unwrap();
    let elapsed = start.elapsed();
    out.check(d.len() == 262_144, || format!("{} strings", d.len()));
    out.close(d.total(), 1.0, 1e-9, || "total".into());
    out.within(elapsed, Duration::from_secs(5));
    match e.full_distribution(Strategy::PathSum) {
        Err(Error::Budget { requested, budget, .. }) => out.note(format!("path sum rejected: {requested} > {budget}")),
        Err(other) => out.check(false, || format!("path sum failed with {other}")),
        Ok(_) => out.check(false, || "path sum was not rejected by the default budget".into()),
    }
    out
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("EPR golden values", epr_golden),
        ("Larmor golden values", larmor_golden),
        ("Eraser", eraser_suite),
        ("Oracle triangle", oracle_triangle),
        ("Preparation rule suite", rule_four_suite),
        ("Separability suite", separability_suite),
        ("Weak values", weak_values),
        ("Sampler", sampler_suite),
        ("Performance", performance),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let out = run();
        let status = if out.failures.is_empty() { "PASS" } else { "FAIL" };
        let notes = if out.notes.is_empty() { String::new() } else { format!(" [{}]", out.notes.join("; ")) };
        println!("{status} {}: {name}{notes}", k + 1);
        for f in out.failures.iter().take(5) {
            println!("    {f}");
        }
        if out.failures.len() > 5 {
            println!("    ... {} more", out.failures.len() - 5);
        }
        if !out.failures.is_empty() {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
