//! Command-line front end for `bsgrowth`: configuration, pipelines and output files.

pub mod config;
pub mod pipeline;
pub mod svg;

use std::fmt;

/// Bad configuration or group input; exit status 2.
#[derive(Debug)]
pub struct ValidationError(pub String);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "validation failed: {}", self.0)
    }
}

impl std::error::Error for ValidationError {}

/// One or more acceptance-tagged checks failed; exit status 3.
#[derive(Debug)]
pub struct AcceptanceFailure(pub Vec<String>);

impl fmt::Display for AcceptanceFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "acceptance checks failed: {}", self.0.join("; "))
    }
}

impl std::error::Error for AcceptanceFailure {}

/// Process exit status for an error: 2 validation, 3 acceptance, 4 budget, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ValidationError>().is_some() {
            return 2;
        }
        if cause.downcast_ref::<AcceptanceFailure>().is_some() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<bsgrowth::Error>() {
            return match e {
                bsgrowth::Error::Spec(_) | bsgrowth::Error::Word(_) | bsgrowth::Error::Markov(_) => 2,
                bsgrowth::Error::Budget(_) => 4,
                _ => 1,
            };
        }
    }
    1
}

/// Parses `a,b,c` or `lo:hi:n` (inclusive, `n` points).
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| format!("bad number '{}'", parts[0]))?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| format!("bad number '{}'", parts[1]))?;
        let n: usize = parts[2].trim().parse().map_err(|_| format!("bad count '{}'", parts[2]))?;
        if n < 2 {
            return Err("a range needs at least two points".into());
        }
        return Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad number '{x}'")))
        .collect()
}

/// Parses `a,b` into an interval.
pub fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    match parse_grid(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err("an interval is two numbers 'a,b'".into()),
    }
}
