//! Least-squares power-law fits in log-log coordinates.

use crate::error::{Error, Result};

/// `log y ≈ intercept + slope · log x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in natural-log units.
    pub residual: f64,
    pub pairs: usize,
    /// log10(max x / min x)
    pub decades: f64,
}

impl LogLogFit {
    /// Prefactor `exp(intercept)`.
    pub fn constant(&self) -> f64 {
        self.intercept.exp()
    }
}

pub fn decades(xs: &[f64]) -> f64 {
    let (lo, hi) = xs.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    if xs.is_empty() || !(lo > 0.0) {
        0.0
    } else {
        (hi / lo).log10()
    }
}

/// Fit `y ~ x^slope`, refusing data with too few points or too narrow a span.
pub fn loglog_fit(xs: &[f64], ys: &[f64], min_pairs: usize, min_decades: f64) -> Result<LogLogFit> {
    if xs.len() != ys.len() {
        return Err(Error::arg("fit abscissae and ordinates differ in length"));
    }
    if let Some(bad) = xs.iter().chain(ys).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::arg(format!(
            "log-log fit needs positive finite data, got {bad}"
        )));
    }
    let span = decades(xs);
    if xs.len() < min_pairs || span < min_decades {
        return Err(Error::FitSpan {
            pairs: xs.len(),
            decades: span,
            required_pairs: min_pairs,
            required_decades: min_decades,
        });
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(LogLogFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
        pairs: xs.len(),
        decades: span,
    })
}
