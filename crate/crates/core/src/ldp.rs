//! Monte Carlo estimates of deviation-set measures for Birkhoff averages of `log |f′|`.

use crate::bsmap::BSMap;
use crate::error::{Error, Result};
use crate::geometry::TAU;
use crate::markov::MarkovPartition;
use crate::stats::ols;
use crate::thermo::RateCurve;
use crate::tracing::{SymbolicGeodesic, Tracer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Samples per independently seeded batch.
pub const BATCH: usize = 1 << 14;

pub const DEFAULT_DEPTHS: [usize; 5] = [10, 15, 20, 25, 30];

/// Generator for batch `b`: seeded by `seed`, one stream per batch, so results do not
/// depend on how batches are scheduled.
pub fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

fn batches(count: usize) -> Vec<(u64, usize)> {
    (0..count.div_ceil(BATCH))
        .map(|b| (b as u64, BATCH.min(count - b * BATCH)))
        .collect()
}

/// `(1/n) log |(f^n)′(η)|` for uniform `η`, or `None` when the orbit leaves the domain.
fn birkhoff(bs: &BSMap, eta: f64, depths: &[usize]) -> Vec<Option<f64>> {
    let max = depths.iter().copied().max().unwrap_or(0);
    let mut out = vec![None; depths.len()];
    let mut x = eta;
    let mut s = 0.0;
    let mut k = 0;
    for n in 1..=max {
        let Some((y, _, l)) = bs.step(x) else {
            break;
        };
        x = y;
        s += l;
        while k < depths.len() && depths[k] == n {
            out[k] = Some(s / n as f64);
            k += 1;
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovSample {
    pub n: usize,
    pub count: usize,
    /// Samples whose first `n` iterates stay in the domain.
    pub survivors: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub histogram_edges: Vec<f64>,
    pub histogram: Vec<u64>,
}

/// Distribution of `(1/n) log |(f^n)′(η)|` over `count` uniform points of the circle.
pub fn lyapunov_sample(bs: &BSMap, n: usize, count: usize, seed: u64, bins: usize) -> LyapunovSample {
    let values: Vec<f64> = batches(count)
        .into_par_iter()
        .flat_map_iter(|(b, len)| {
            let mut rng = batch_rng(seed, b);
            (0..len)
                .filter_map(|_| {
                    let eta = rng.random::<f64>() * TAU;
                    if n == 0 {
                        return Some(0.0);
                    }
                    birkhoff(bs, eta, &[n])[0]
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let survivors = values.len();
    let mean = values.iter().sum::<f64>() / survivors.max(1) as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / survivors.max(1) as f64;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = bins.max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut histogram = vec![0u64; bins];
    for v in &values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        histogram[i] += 1;
    }
    LyapunovSample {
        n,
        count,
        survivors,
        mean,
        std_dev: var.sqrt(),
        histogram_edges: (0..=bins).map(|i| lo + width * i as f64).collect(),
        histogram,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DepthRow {
    pub n: usize,
    pub hits: u64,
    pub fraction: f64,
    /// `(1/n) log fraction`.
    pub lograte: f64,
    /// Too few hits for the fit.
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeviationExperiment {
    pub interval: (f64, f64),
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<DepthRow>,
    /// Slope of `log fraction` against `n` over the unflagged depths.
    pub fitted_rate: f64,
    pub fitted_intercept: f64,
    /// `−inf_J I`, when a rate curve was supplied.
    pub predicted_rate: Option<f64>,
}

impl DeviationExperiment {
    /// `|fitted − predicted| / |predicted|`.
    pub fn relative_error(&self) -> Option<f64> {
        let p = self.predicted_rate?;
        Some((self.fitted_rate - p).abs() / p.abs())
    }
}

/// Fraction of uniform boundary points whose `n`-step Birkhoff average of `log |f′|`
/// lies in `J`, for each depth, and the exponential rate fitted across depths.
pub fn deviation_rate(
    bs: &BSMap,
    interval: (f64, f64),
    alpha_range: (f64, f64),
    depths: &[usize],
    count: usize,
    seed: u64,
    rate_curve: Option<&RateCurve>,
) -> Result<DeviationExperiment> {
    let (a, b) = interval;
    if !(a < b) || b <= alpha_range.0 || a >= alpha_range.1 {
        return Err(Error::Experiment(format!(
            "interval [{a}, {b}] does not meet ({:.6}, {:.6})",
            alpha_range.0, alpha_range.1
        )));
    }
    if depths.is_empty() || count == 0 {
        return Err(Error::Experiment("need at least one depth and one sample".into()));
    }
    let mut depths = depths.to_vec();
    depths.sort_unstable();
    depths.dedup();
    let hits: Vec<u64> = batches(count)
        .into_par_iter()
        .map(|(bi, len)| {
            let mut rng = batch_rng(seed, bi);
            let mut h = vec![0u64; depths.len()];
            for _ in 0..len {
                let eta = rng.random::<f64>() * TAU;
                for (k, v) in birkhoff(bs, eta, &depths).into_iter().enumerate() {
                    if v.is_some_and(|v| v >= a && v <= b) {
                        h[k] += 1;
                    }
                }
            }
            h
        })
        .reduce(
            || vec![0u64; depths.len()],
            |mut x, y| {
                for (p, q) in x.iter_mut().zip(y) {
                    *p += q;
                }
                x
            },
        );
    let rows: Vec<DepthRow> = depths
        .iter()
        .zip(&hits)
        .map(|(&n, &h)| {
            let fraction = h as f64 / count as f64;
            DepthRow {
                n,
                hits: h,
                fraction,
                lograte: fraction.ln() / n as f64,
                flagged: h < 10,
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.flagged)
        .map(|r| (r.n as f64, r.fraction.ln()))
        .collect();
    let (fitted_rate, fitted_intercept) = if pts.len() >= 2 {
        ols(&pts)
    } else {
        (f64::NAN, f64::NAN)
    };
    let predicted_rate = rate_curve.and_then(|c| c.inf_on(a, b)).map(|i| -i);
    Ok(DeviationExperiment {
        interval,
        samples: count,
        seed,
        rows,
        fitted_rate,
        fitted_intercept,
        predicted_rate,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossCheck {
    pub count: usize,
    pub n: usize,
    /// Mean over geodesics of `|t_k − log |(f^k)′(γ⁺)||` for `k = 1..=n`.
    pub mean_difference: Vec<f64>,
    /// Largest `|t_n − log |(f^n)′(γ⁺)|| / n`.
    pub max_relative: f64,
    /// Least-squares slope of the mean difference against `k`.
    pub slope: f64,
    pub skipped: usize,
}

/// Compares `t_n(γ)` with the Lyapunov sum at `γ⁺` along random geodesics.
pub fn coding_crosscheck(
    bs: &BSMap,
    partition: &MarkovPartition,
    count: usize,
    n: usize,
    seed: u64,
) -> CrossCheck {
    let tracer = Tracer::new(bs, n);
    let per: Vec<Option<Vec<f64>>> = batches(count)
        .into_par_iter()
        .flat_map_iter(|(bi, len)| {
            let mut rng = batch_rng(seed, bi);
            (0..len)
                .map(|_| {
                    let geo = SymbolicGeodesic::random(bs, partition, n, &mut rng);
                    tracer.trace(&geo, n).ok().map(|rec| {
                        rec.t
                            .iter()
                            .zip(&rec.lyapunov)
                            .map(|(t, l)| (t - l).abs())
                            .collect()
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let ok: Vec<&Vec<f64>> = per.iter().flatten().collect();
    let mut mean = vec![0.0; n];
    for d in &ok {
        for k in 0..n {
            mean[k] += d[k] / ok.len().max(1) as f64;
        }
    }
    let max_relative = ok
        .iter()
        .map(|d| d[n - 1] / n as f64)
        .fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = mean.iter().enumerate().map(|(k, &m)| ((k + 1) as f64, m)).collect();
    CrossCheck {
        count,
        n,
        slope: ols(&pts).0,
        mean_difference: mean,
        max_relative,
        skipped: per.len() - ok.len(),
    }
}
