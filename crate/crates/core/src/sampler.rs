//! Seeded Monte Carlo draws of outcome strings.
//!
//! The generator is ChaCha20 (`rand_chacha`), seeded from a `u64`; a uniform
//! deviate is the top 53 bits of one 64-bit output scaled by `2⁻⁵³`, so
//! streams are identical on every platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::engine::{HistoryDistribution, HistoryEngine, Strategy};
use crate::error::{Error, Result};

pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMethod {
    /// One inverse-CDF draw over the full distribution per sample.
    InverseCdf,
    /// Outcome by outcome from conditional probabilities given the prefix.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleEntry {
    pub indices: Vec<usize>,
    pub outcome: Vec<f64>,
    pub probability: f64,
    pub count: u64,
    pub frequency: f64,
    /// `√(p(1−p)/n)` with the exact probability `p`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleReport {
    pub seed: u64,
    pub n: u64,
    pub method: SampleMethod,
    pub labels: Vec<String>,
    /// Strings with non-zero probability or non-zero count, lexicographic.
    pub entries: Vec<SampleEntry>,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
}

impl SampleReport {
    fn build(dist: &HistoryDistribution, counts: &[u64], n: u64, seed: u64, method: SampleMethod) -> Self {
        let nf = n as f64;
        let mut entries = Vec::new();
        let mut chi_square = 0.0;
        let mut support = 0usize;
        for (k, (s, p)) in dist.iter().enumerate() {
            let count = counts[k];
            if p > 0.0 {
                support += 1;
                let expected = nf * p;
                chi_square += (count as f64 - expected).powi(2) / expected;
            }
            if p > 0.0 || count > 0 {
                entries.push(SampleEntry {
                    outcome: dist.outcome_values(&s),
                    indices: s.0,
                    probability: p,
                    count,
                    frequency: count as f64 / nf,
                    std_error: (p * (1.0 - p) / nf).max(0.0).sqrt(),
                });
            }
        }
        SampleReport {
            seed,
            n,
            method,
            labels: dist.labels().to_vec(),
            entries,
            chi_square,
            degrees_of_freedom: support.saturating_sub(1),
        }
    }

    pub fn count(&self, indices: &[usize]) -> u64 {
        self.entries
            .iter()
            .find(|e| e.indices == indices)
            .map_or(0, |e| e.count)
    }

    pub fn frequency(&self, indices: &[usize]) -> f64 {
        self.count(indices) as f64 / self.n as f64
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    /// Counts for every string of `dist`, in its order.
    pub fn dense_counts(&self, dist: &HistoryDistribution) -> Vec<u64> {
        let mut out = vec![0; dist.len()];
        for e in &self.entries {
            if let Some(k) = dist.index_of(&e.indices.clone().into()) {
                out[k] = e.count;
            }
        }
        out
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}

fn uniform(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Index `k` with `cdf[k-1] <= u < cdf[k]`, never landing on a zero-weight
/// entry.
fn invert(weights: &[f64], cdf: &[f64], u: f64) -> usize {
    let k = cdf.partition_point(|&c| c <= u);
    if k < weights.len() {
        return k;
    }
    weights.iter().rposition(|&w| w > 0.0).expect("non-empty support")
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

fn check(dist: &HistoryDistribution, n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::Precondition("sample size must be at least 1".into()));
    }
    let total = dist.total();
    if (total - 1.0).abs() > NORMALIZATION_TOL || dist.probabilities().iter().any(|p| *p < 0.0) {
        return Err(Error::Unnormalized { total });
    }
    Ok(())
}

/// `n` independent inverse-CDF draws over the lexicographic string order.
pub fn sample(dist: &HistoryDistribution, n: u64, seed: u64) -> Result<SampleReport> {
    check(dist, n)?;
    let weights = dist.probabilities();
    let cdf = cumulative(weights);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; weights.len()];
    for _ in 0..n {
        counts[invert(weights, &cdf, uniform(&mut rng))] += 1;
    }
    Ok(SampleReport::build(dist, &counts, n, seed, SampleMethod::InverseCdf))
}

/// Draws each outcome in time order from `P(i_ℓ | i_1 … i_{ℓ−1})`, the ratio
/// of the distributions of the scenario truncated after `ℓ` and `ℓ − 1`
/// measurements. Zero-probability prefixes are never reached.
pub fn conditional_sample(engine: &HistoryEngine, n: u64, seed: u64) -> Result<SampleReport> {
    let mut levels = Vec::with_capacity(engine.len());
    let mut current = HistoryEngine::with_config(engine.scenario().truncated(1), *engine.config())?;
    levels.push(current.full_distribution(Strategy::ProjectedPropagator)?);
    for event in &engine.scenario().measurements[1..] {
        current = current.extend(event.clone())?;
        levels.push(current.full_distribution(Strategy::ProjectedPropagator)?);
    }
    let full = levels.last().unwrap().clone();
    check(&full, n)?;

    let radices: Vec<usize> = full.eigenvalues().iter().map(Vec::len).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; full.len()];
    let mut weights = Vec::new();
    for _ in 0..n {
        let mut prefix = 0usize;
        for (dist, &radix) in levels.iter().zip(&radices) {
            let block = &dist.probabilities()[prefix * radix..(prefix + 1) * radix];
            let mass: f64 = block.iter().sum();
            weights.clear();
            weights.extend(block.iter().map(|p| p / mass));
            let cdf = cumulative(&weights);
            prefix = prefix * radix + invert(&weights, &cdf, uniform(&mut rng));
        }
        counts[prefix] += 1;
    }
    Ok(SampleReport::build(&full, &counts, n, seed, SampleMethod::Sequential))
}

/// Two-sample chi-square homogeneity statistic over bins with any counts,
/// and its degrees of freedom.
pub fn chi_square_between(a: &[u64], b: &[u64]) -> (f64, usize) {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let (ka, kb) = ((nb as f64 / na as f64).sqrt(), (na as f64 / nb as f64).sqrt());
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x + y > 0 {
            bins += 1;
            stat += (ka * x as f64 - kb * y as f64).powi(2) / (x + y) as f64;
        }
    }
    (stat, bins.saturating_sub(1))
}

/// Upper quantile of the chi-square distribution: the value exceeded with
/// probability `alpha`.
pub fn chi_square_critical(degrees_of_freedom: usize, alpha: f64) -> f64 {
    if degrees_of_freedom == 0 {
        return 0.0;
    }
    ChiSquared::new(degrees_of_freedom as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha)
}
