use std::fmt::Write as _;

use histories_core::builtins::{linear_grid, parse_value, sweep, BuiltinTemplate};
use histories_core::engine::{EngineConfig, HistoryDistribution, HistoryEngine, OutcomeString, Strategy};
use histories_core::format;
use histories_core::sampler::{conditional_sample, sample, SampleMethod};
use histories_core::scenario::Scenario;
use histories_core::weak::WeakSetting;
use histories_core::Error;

use crate::StrategyArg;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_USAGE: u8 = 3;
pub const EXIT_BUDGET: u8 = 4;
pub const EXIT_POSTSELECTION: u8 = 5;

/// Largest strategy disagreement tolerated by `--oracle`.
pub const ORACLE_TOL: f64 = 1e-8;

const NONZERO_AMPLITUDE: f64 = 1e-12;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Validation(_)
            | Error::Parse { .. }
            | Error::Schema { .. }
            | Error::NotHermitian { .. }
            | Error::NotNormalized { .. }
            | Error::NonFinite(_)
            | Error::NonIncreasingTime { .. }
            | Error::DimensionCap { .. }
            | Error::Unnormalized { .. } => EXIT_VALIDATION,
            Error::IndexOutOfRange { .. }
            | Error::Unknown { .. }
            | Error::Precondition(_)
            | Error::DimensionMismatch { .. } => EXIT_USAGE,
            Error::Budget { .. } => EXIT_BUDGET,
            Error::PostSelection { .. } => EXIT_POSTSELECTION,
            _ => EXIT_FAILURE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError {
            code: EXIT_FAILURE,
            message: format!("writing CSV: {e}"),
        }
    }
}

/// Twelve decimals, without a sign on values that round to zero.
pub fn num(x: f64) -> String {
    let s = format!("{x:.12}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

/// `+`-signed variant of [`num`].
fn signed(x: f64) -> String {
    let s = num(x);
    if s.starts_with('-') {
        s
    } else {
        format!("+{s}")
    }
}

/// Shortest round-trip form of an eigenvalue.
fn value(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        x.to_string()
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new())
}

fn finish_csv(w: csv::Writer<Vec<u8>>, out: &mut String) -> Result<(), CliError> {
    let bytes = w.into_inner().map_err(|e| CliError {
        code: EXIT_FAILURE,
        message: format!("writing CSV: {e}"),
    })?;
    out.push_str(&String::from_utf8(bytes).expect("CSV built from UTF-8 strings"));
    Ok(())
}

pub struct Context {
    strategy: Strategy,
    oracle: bool,
    config: EngineConfig,
}

impl Context {
    pub fn new(strategy: StrategyArg, oracle: bool, budget: Option<u128>, tol: f64) -> Result<Self, CliError> {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(CliError::usage(format!("--tol must be positive, got {tol}")));
        }
        let mut config = EngineConfig {
            cluster_tol: tol,
            ..EngineConfig::default()
        };
        if let Some(b) = budget {
            config.path_budget = b;
        }
        let strategy = match strategy {
            StrategyArg::PathSum => Strategy::PathSum,
            StrategyArg::Auto | StrategyArg::Contraction => Strategy::ProjectedPropagator,
        };
        Ok(Context { strategy, oracle, config })
    }

    fn load(&self, source: &str) -> Result<Scenario, CliError> {
        if source.starts_with("builtin:") {
            return BuiltinTemplate::parse(source)
                .and_then(|t| t.build())
                .map_err(|e| match e {
                    Error::Validation(_) => e.into(),
                    other => CliError::usage(other.to_string()),
                });
        }
        let text = std::fs::read_to_string(source)
            .map_err(|e| CliError::usage(format!("cannot read `{source}`: {e}")))?;
        Ok(format::parse(&text, self.config.cluster_tol)?)
    }

    fn engine(&self, source: &str) -> Result<HistoryEngine, CliError> {
        Ok(HistoryEngine::with_config(self.load(source)?, self.config)?)
    }

    /// Largest pairwise difference between the strategies that fit the
    /// budget, always including the trace formula. Reported on stderr.
    fn oracle_gap(&self, engine: &HistoryEngine) -> Result<f64, CliError> {
        let trace = engine.full_distribution(Strategy::TraceFormula)?;
        let contraction = engine.full_distribution(Strategy::ProjectedPropagator)?;
        let mut gap = trace.max_abs_difference(&contraction);
        let mut compared = vec!["trace-formula", "projected-propagator"];
        match engine.full_distribution(Strategy::PathSum) {
            Ok(paths) => {
                gap = gap.max(paths.max_abs_difference(&trace)).max(paths.max_abs_difference(&contraction));
                compared.push("path-sum");
            }
            Err(Error::Budget { .. }) => {}
            Err(e) => return Err(e.into()),
        }
        eprintln!("oracle: {} agree to {gap:.3e}", compared.join(", "));
        Ok(gap)
    }

    fn oracle_verdict(gap: f64) -> Result<(), CliError> {
        if gap > ORACLE_TOL {
            return Err(CliError {
                code: EXIT_FAILURE,
                message: format!("oracle discrepancy {gap:e} exceeds {ORACLE_TOL:e}"),
            });
        }
        Ok(())
    }

    fn outcome_string(&self, engine: &HistoryEngine, args: &[String]) -> Result<OutcomeString, CliError> {
        let mut values = Vec::new();
        for part in args.iter().flat_map(|a| a.split(',')).map(str::trim).filter(|p| !p.is_empty()) {
            values.push(parse_value(part).map_err(|_| CliError::usage(format!("`{part}` is not a number")))?);
        }
        if values.len() != engine.len() {
            return Err(CliError::usage(format!(
                "expected {} outcome values (one per measurement: {}), got {}",
                engine.len(),
                engine.scenario().labels().join(", "),
                values.len()
            )));
        }
        let mut indices = Vec::with_capacity(values.len());
        for (l, v) in values.iter().enumerate() {
            let obs = engine.observable(l);
            let i = obs.find_outcome(*v, self.config.cluster_tol).ok_or_else(|| {
                let available: Vec<String> = obs.eigenvalues().into_iter().map(value).collect();
                CliError::usage(format!(
                    "{v} is not an eigenvalue of `{}`; available: {}",
                    engine.scenario().measurements[l].label,
                    available.join(", ")
                ))
            })?;
            indices.push(i);
        }
        Ok(OutcomeString(indices))
    }

    pub fn prob(&self, source: &str, outcomes: &[String], out: &mut String) -> Result<(), CliError> {
        let engine = self.engine(source)?;
        let s = self.outcome_string(&engine, outcomes)?;
        let p = engine.probability(&s, self.strategy)?;
        writeln!(out, "{}", num(p)).unwrap();
        writeln!(out, "strategy: {}", self.strategy).unwrap();
        if self.oracle {
            let trace = engine.trace_probability(&s)?;
            let mut gap = (trace - p).abs();
            writeln!(out, "trace-formula: {}", num(trace)).unwrap();
            if self.strategy != Strategy::PathSum {
                match engine.probability(&s, Strategy::PathSum) {
                    Ok(q) => {
                        writeln!(out, "path-sum: {}", num(q)).unwrap();
                        gap = gap.max((q - p).abs()).max((q - trace).abs());
                    }
                    Err(Error::Budget { .. }) => writeln!(out, "path-sum: over budget").unwrap(),
                    Err(e) => return Err(e.into()),
                }
            }
            writeln!(out, "difference: {gap:.3e}").unwrap();
            Self::oracle_verdict(gap)?;
        }
        Ok(())
    }

    fn write_distribution(d: &HistoryDistribution, out: &mut String) -> Result<(), CliError> {
        let mut w = csv_writer();
        let mut header: Vec<String> = d.labels().to_vec();
        header.push("probability".into());
        w.write_record(&header)?;
        for (s, p) in d.iter() {
            let mut row: Vec<String> = d.outcome_values(&s).into_iter().map(value).collect();
            row.push(num(p));
            w.write_record(&row)?;
        }
        finish_csv(w, out)?;
        write!(out, "# total={}\r\n", num(d.total())).unwrap();
        Ok(())
    }

    pub fn distribution(&self, source: &str, out: &mut String) -> Result<(), CliError> {
        let engine = self.engine(source)?;
        let d = engine.full_distribution(self.strategy)?;
        Self::write_distribution(&d, out)?;
        if self.oracle {
            Self::oracle_verdict(self.oracle_gap(&engine)?)?;
        }
        Ok(())
    }

    pub fn paths(&self, source: &str, nonzero: bool, out: &mut String) -> Result<(), CliError> {
        let engine = self.engine(source)?;
        let mixed = engine.initial_components().len() > 1;
        let mut w = csv_writer();
        let mut header = Vec::new();
        if mixed {
            header.extend(["component".to_string(), "weight".to_string()]);
        }
        header.extend(engine.scenario().labels());
        header.extend(["re".to_string(), "im".to_string(), "abs2".to_string()]);
        w.write_record(&header)?;
        for (k, (weight, initial)) in engine.initial_components().iter().enumerate() {
            for path in engine.enumerate_paths(initial)? {
                if nonzero && path.amplitude.norm() <= NONZERO_AMPLITUDE {
                    continue;
                }
                let mut row = Vec::new();
                if mixed {
                    row.extend([k.to_string(), num(*weight)]);
                }
                row.extend(path.indices.iter().map(|i| i.to_string()));
                row.extend([num(path.amplitude.re), num(path.amplitude.im), num(path.amplitude.norm_sqr())]);
                w.write_record(&row)?;
            }
        }
        finish_csv(w, out)?;
        if self.oracle {
            Self::oracle_verdict(self.oracle_gap(&engine)?)?;
        }
        Ok(())
    }

    pub fn weak_value(
        &self,
        source: &str,
        label: &str,
        pointer: Option<&[String]>,
        out: &mut String,
    ) -> Result<(), CliError> {
        let scenario = self.load(source)?;
        let setting = WeakSetting::from_scenario(&scenario, label)?;
        let tol = self.config.postselection_tol;
        let w = setting.weak_value_with_tol(tol)?;
        writeln!(out, "{} {}i", num(w.value.re), signed(w.value.im)).unwrap();
        if let Some(args) = pointer {
            let g = parse_value(&args[0]).map_err(|_| CliError::usage(format!("bad coupling `{}`", args[0])))?;
            let dim: usize = args[1]
                .parse()
                .map_err(|_| CliError::usage(format!("bad pointer dimension `{}`", args[1])))?;
            let estimate = setting.pointer_shift_with_tol(g, dim, tol)?;
            writeln!(out, "pointer: g={g} dim={dim}").unwrap();
            writeln!(out, "estimate: {}", num(estimate)).unwrap();
            writeln!(out, "residual: {:.3e}", (estimate - w.real()).abs()).unwrap();
        }
        if self.oracle {
            let dual = (w.value - w.path_value).norm();
            eprintln!("oracle: matrix-element and path forms agree to {dual:.3e}");
            let engine = HistoryEngine::with_config(scenario, self.config)?;
            Self::oracle_verdict(dual.max(self.oracle_gap(&engine)?))?;
        }
        Ok(())
    }

    pub fn sample(&self, source: &str, n: u64, seed: u64, method: SampleMethod, out: &mut String) -> Result<(), CliError> {
        if n == 0 {
            return Err(CliError::usage("sample size must be at least 1"));
        }
        let engine = self.engine(source)?;
        let report = match method {
            SampleMethod::InverseCdf => sample(&engine.full_distribution(self.strategy)?, n, seed)?,
            SampleMethod::Sequential => conditional_sample(&engine, n, seed)?,
        };
        out.push_str(&report.to_json());
        if self.oracle {
            Self::oracle_verdict(self.oracle_gap(&engine)?)?;
        }
        Ok(())
    }

    pub fn sweep(
        &self,
        builtin: &str,
        parameter: &str,
        from: &str,
        to: &str,
        steps: usize,
        out: &mut String,
    ) -> Result<(), CliError> {
        let template = BuiltinTemplate::parse(builtin).map_err(|e| CliError::usage(e.to_string()))?;
        template.get(parameter).map_err(|e| CliError::usage(e.to_string()))?;
        let bound = |s: &str| parse_value(s).map_err(|_| CliError::usage(format!("`{s}` is not a number")));
        let grid = linear_grid(bound(from)?, bound(to)?, steps);
        let results = sweep(&template, parameter, &grid, self.strategy, self.config)?;

        let first = &results[0].1;
        let mut w = csv_writer();
        let mut header = vec![parameter.to_string()];
        for (s, _) in first.iter() {
            let values: Vec<String> = first.outcome_values(&s).into_iter().map(value).collect();
            header.push(format!("P({})", values.join(",")));
        }
        w.write_record(&header)?;
        for (x, d) in &results {
            if d.eigenvalues() != first.eigenvalues() {
                return Err(CliError {
                    code: EXIT_FAILURE,
                    message: format!("outcome set changes at {parameter} = {x}"),
                });
            }
            let mut row = vec![num(*x)];
            row.extend(d.probabilities().iter().map(|p| num(*p)));
            w.write_record(&row)?;
        }
        finish_csv(w, out)?;
        if self.oracle {
            let mut gap: f64 = 0.0;
            for x in &grid {
                let mut t = template.clone();
                t.set(parameter, *x)?;
                gap = gap.max(self.oracle_gap(&HistoryEngine::with_config(t.build()?, self.config)?)?);
            }
            Self::oracle_verdict(gap)?;
        }
        Ok(())
    }

    pub fn validate(&self, source: &str, out: &mut String) -> Result<(), CliError> {
        let scenario = self.load(source)?;
        scenario.validate().map_err(Error::Validation)?;
        write!(
            out,
            "ok: dimension {}, {} measurement(s) [{}], {} preparation",
            scenario.dimension,
            scenario.len(),
            scenario.labels().join(", "),
            scenario.preparation.kind()
        )
        .unwrap();
        if let Some(p) = &scenario.postselection {
            write!(out, ", post-selected at t = {}", p.time).unwrap();
        }
        out.push('\n');
        if self.oracle {
            let engine = HistoryEngine::with_config(scenario, self.config)?;
            Self::oracle_verdict(self.oracle_gap(&engine)?)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_have_twelve_decimals() {
        assert_eq!(num(0.5), "0.500000000000");
        assert_eq!(num(-1e-15), "0.000000000000");
        assert_eq!(num(-(1.0 + 2f64.sqrt())), "-2.414213562373");
        assert_eq!(signed(0.0), "+0.000000000000");
        assert_eq!(signed(-0.25), "-0.250000000000");
    }

    #[test]
    fn eigenvalues_print_shortest() {
        assert_eq!(value(1.0), "1");
        assert_eq!(value(-1.0), "-1");
        assert_eq!(value(-0.0), "0");
        assert_eq!(value(0.5), "0.5");
    }

    #[test]
    fn error_codes() {
        let budget = Error::Budget {
            what: "path enumeration",
            requested: 10,
            budget: 1,
            hint: "",
        };
        assert_eq!(CliError::from(budget).code, EXIT_BUDGET);
        assert_eq!(CliError::from(Error::PostSelection { overlap: 0.0, tolerance: 1e-12 }).code, EXIT_POSTSELECTION);
        assert_eq!(CliError::from(Error::Precondition("x".into())).code, EXIT_USAGE);
    }
}
