//! Frequency-stability and technique-comparison statistics.
//!
//! Deviations use the overlapping estimators on phase data. A series with
//! gaps is split into gap-free segments; each segment contributes its
//! squared second-difference terms and the variance is pooled over all
//! terms. Nothing is interpolated across a gap.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::epoch::Epoch;
use crate::error::{Error, Result};
use crate::series::{Tag, TimeDiffSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Adev,
    Mdev,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Adev => "ADEV",
            Estimator::Mdev => "MDEV",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ADEV" => Ok(Estimator::Adev),
            "MDEV" => Ok(Estimator::Mdev),
            other => Err(Error::InvalidInput(format!("unknown estimator '{other}'"))),
        }
    }
}

/// A requested τ that produced no point, and why.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedTau {
    pub tau: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCurve {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub estimator: Estimator,
    /// First-order equivalent degrees of freedom (white-FM approximation).
    pub edf: Vec<f64>,
    pub rejected: Vec<RejectedTau>,
}

impl StabilityCurve {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Deviation at exactly `tau`, if computed.
    pub fn at(&self, tau: f64) -> Option<f64> {
        self.taus
            .iter()
            .position(|&t| (t - tau).abs() <= 1e-9 * tau)
            .map(|i| self.values[i])
    }

    /// Least-squares log-log slope over the points with τ in `[lo, hi]`.
    pub fn slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .taus
            .iter()
            .zip(&self.values)
            .filter(|(t, v)| **t >= lo && **t <= hi && **v > 0.0)
            .map(|(t, v)| (t.ln(), v.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        line_fit(&pts).map(|(slope, _)| slope)
    }
}

/// Octave-spaced τ values `dt·2^k` up to `max_tau`.
pub fn octave_taus(dt: f64, max_tau: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut m = 1u64;
    while m as f64 * dt <= max_tau {
        out.push(m as f64 * dt);
        m *= 2;
    }
    out
}

/// Sum of squared second differences and their count for one segment.
fn adev_terms(x: &[f64], m: usize) -> Option<(f64, usize)> {
    if x.len() < 2 * m + 1 {
        return None;
    }
    let terms = x.len() - 2 * m;
    let s = (0..terms)
        .map(|i| {
            let d = x[i + 2 * m] - 2.0 * x[i + m] + x[i];
            d * d
        })
        .sum();
    Some((s, terms))
}

/// Sum of squared m-averaged second differences for one segment.
fn mdev_terms(x: &[f64], m: usize) -> Option<(f64, usize)> {
    if x.len() < 3 * m + 1 {
        return None;
    }
    let d: Vec<f64> = (0..x.len() - 2 * m)
        .map(|i| x[i + 2 * m] - 2.0 * x[i + m] + x[i])
        .collect();
    let count = x.len() - 3 * m + 1;
    let mut window: f64 = d[..m].iter().sum();
    let mut s = window * window;
    for j in 1..count {
        // Re-sum periodically so the sliding window cannot drift.
        if j % 4096 == 0 {
            window = d[j..j + m].iter().sum();
        } else {
            window += d[j + m - 1] - d[j - 1];
        }
        s += window * window;
    }
    Some((s, count))
}

fn white_fm_edf(n: usize, m: usize) -> f64 {
    let n = n as f64;
    let m = m as f64;
    let edf = (3.0 * (n - 1.0) / (2.0 * m) - 2.0 * (n - 2.0) / n) * 4.0 * m * m / (4.0 * m * m + 5.0);
    edf.max(1.0)
}

fn deviation_of_segments(
    segments: &[&[f64]],
    dt: f64,
    estimator: Estimator,
    taus: &[f64],
) -> StabilityCurve {
    let mut taus_sorted: Vec<f64> = taus.to_vec();
    taus_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    taus_sorted.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());

    let mut curve = StabilityCurve {
        taus: Vec::new(),
        values: Vec::new(),
        estimator,
        edf: Vec::new(),
        rejected: Vec::new(),
    };
    for &tau in &taus_sorted {
        let ratio = tau / dt;
        let m = ratio.round();
        if !(tau > 0.0) || m < 1.0 || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
            curve.rejected.push(RejectedTau {
                tau,
                reason: format!("tau {tau} s is not a positive multiple of the {dt} s sample interval"),
            });
            continue;
        }
        let m = m as usize;
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut edf = 0.0;
        for seg in segments {
            let terms = match estimator {
                Estimator::Adev => adev_terms(seg, m),
                Estimator::Mdev => mdev_terms(seg, m),
            };
            if let Some((s, c)) = terms {
                sum += s;
                count += c;
                edf += match estimator {
                    Estimator::Adev => white_fm_edf(seg.len(), m),
                    Estimator::Mdev => white_fm_edf(seg.len() - m, m),
                };
            }
        }
        if count == 0 {
            let need = match estimator {
                Estimator::Adev => 2 * m + 1,
                Estimator::Mdev => 3 * m + 1,
            };
            curve.rejected.push(RejectedTau {
                tau,
                reason: format!("{estimator} at tau {tau} s needs a gap-free run of {need} phase points"),
            });
            continue;
        }
        let norm = match estimator {
            Estimator::Adev => 2.0 * tau * tau * count as f64,
            Estimator::Mdev => 2.0 * (m * m) as f64 * tau * tau * count as f64,
        };
        curve.taus.push(tau);
        curve.values.push((sum / norm).sqrt());
        curve.edf.push(edf);
    }
    curve
}

/// Overlapping ADEV or MDEV of a phase series at the requested τ values.
pub fn deviation(series: &TimeDiffSeries, estimator: Estimator, taus: &[f64]) -> Result<StabilityCurve> {
    if series.len() < 3 {
        return Err(Error::Insufficient(format!(
            "stability needs at least 3 phase points, got {}",
            series.len()
        )));
    }
    let segments: Vec<&[f64]> = series
        .segments()
        .into_iter()
        .map(|r| &series.values[r])
        .collect();
    Ok(deviation_of_segments(&segments, series.interval, estimator, taus))
}

/// Deviation of a contiguous phase record sampled every `dt` seconds.
pub fn deviation_of_phase(x: &[f64], dt: f64, estimator: Estimator, taus: &[f64]) -> StabilityCurve {
    deviation_of_segments(&[x], dt, estimator, taus)
}

/// Phase record whose first difference over `dt` reproduces the
/// fractional-frequency samples `y`.
pub fn frequency_to_phase(y: &[f64], dt: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(y.len() + 1);
    let mut acc = 0.0;
    x.push(acc);
    for v in y {
        acc += v * dt;
        x.push(acc);
    }
    x
}

/// Fixed-point epoch key relative to `origin`, at microsecond resolution.
fn key(e: &Epoch, origin: &Epoch) -> i64 {
    e.micros_since(origin)
}

/// `a − b` on the slower of the two grids. The faster series is
/// boxcar-averaged over a window of one slow interval centered on each
/// slow epoch; slow epochs whose window is not fully covered are dropped.
pub fn double_difference(a: &TimeDiffSeries, b: &TimeDiffSeries) -> Result<TimeDiffSeries> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::ZeroCommonData);
    }
    let origin = if a.epochs[0] < b.epochs[0] { a.epochs[0] } else { b.epochs[0] };
    let tag = Tag {
        technique: a.tag.technique,
        minus: Some(b.tag.technique),
    };

    let (epochs, values, interval) = if (a.interval - b.interval).abs() <= 1e-9 * a.interval {
        let lookup: HashMap<i64, f64> = b
            .epochs
            .iter()
            .zip(&b.values)
            .map(|(e, v)| (key(e, &origin), *v))
            .collect();
        let mut epochs = Vec::new();
        let mut values = Vec::new();
        for (e, v) in a.epochs.iter().zip(&a.values) {
            if let Some(w) = lookup.get(&key(e, &origin)) {
                epochs.push(*e);
                values.push(v - w);
            }
        }
        (epochs, values, a.interval)
    } else {
        let a_is_slow = a.interval > b.interval;
        let (slow, fast) = if a_is_slow { (a, b) } else { (b, a) };
        let half = 0.5 * slow.interval;
        let expected = (slow.interval / fast.interval).floor() as usize + 1;
        let tol = 1e-6;
        let ft: Vec<f64> = fast.epochs.iter().map(|e| e.seconds_since(&origin)).collect();
        let mut lo = 0usize;
        let mut epochs = Vec::new();
        let mut values = Vec::new();
        for (e, v) in slow.epochs.iter().zip(&slow.values) {
            let t = e.seconds_since(&origin);
            while lo < ft.len() && ft[lo] < t - half - tol {
                lo += 1;
            }
            let mut hi = lo;
            let mut sum = 0.0;
            while hi < ft.len() && ft[hi] <= t + half + tol {
                sum += fast.values[hi];
                hi += 1;
            }
            let count = hi - lo;
            if count < expected {
                continue;
            }
            let avg = sum / count as f64;
            epochs.push(*e);
            values.push(if a_is_slow { v - avg } else { avg - v });
        }
        (epochs, values, slow.interval)
    };

    if epochs.is_empty() {
        return Err(Error::ZeroCommonData);
    }
    let mut out = TimeDiffSeries::new(epochs, values, interval, tag)?;
    out.flags.iono_corrected = a.flags.iono_corrected && b.flags.iono_corrected;
    Ok(out)
}

/// Subtracts a centered moving average of `ma_window` seconds, then
/// averages the remainder into `avg_bin`-second bins. Samples closer than
/// half a window to either end are dropped.
pub fn detrend(series: &TimeDiffSeries, ma_window: f64, avg_bin: f64) -> Result<TimeDiffSeries> {
    if !(ma_window > 0.0 && avg_bin > 0.0) {
        return Err(Error::InvalidInput("window and bin must be > 0".into()));
    }
    let span = series.span();
    if span <= ma_window {
        return Err(Error::Insufficient(format!(
            "series span {span} s must exceed the {ma_window} s moving-average window"
        )));
    }
    let t = series.times();
    let base = series.values[0];
    let mut prefix = Vec::with_capacity(t.len() + 1);
    prefix.push(0.0);
    for v in &series.values {
        let last = *prefix.last().unwrap();
        prefix.push(last + (v - base));
    }

    let half = 0.5 * ma_window;
    let tol = 1e-6;
    let t_end = *t.last().unwrap();
    let mut lo = 0usize;
    let mut hi = 0usize;
    let mut kept_t = Vec::new();
    let mut resid = Vec::new();
    for i in 0..t.len() {
        if t[i] - half < -tol || t[i] + half > t_end + tol {
            continue;
        }
        while t[lo] < t[i] - half - tol {
            lo += 1;
        }
        while hi < t.len() && t[hi] <= t[i] + half + tol {
            hi += 1;
        }
        let mean = (prefix[hi] - prefix[lo]) / (hi - lo) as f64 + base;
        kept_t.push(t[i]);
        resid.push(series.values[i] - mean);
    }
    if kept_t.is_empty() {
        return Err(Error::Insufficient("no samples survive the moving-average edges".into()));
    }

    let first = kept_t[0];
    let per_bin = (avg_bin / series.interval).round().max(1.0);
    let mut bins: Vec<(usize, f64, usize)> = Vec::new();
    for (tk, r) in kept_t.iter().zip(&resid) {
        let k = ((tk - first + tol) / avg_bin).floor() as usize;
        match bins.last_mut() {
            Some((kk, s, c)) if *kk == k => {
                *s += r;
                *c += 1;
            }
            _ => bins.push((k, *r, 1)),
        }
    }
    let origin = series.epochs[0].add_seconds(first + 0.5 * (avg_bin - series.interval));
    let mut epochs = Vec::new();
    let mut values = Vec::new();
    for (k, s, c) in bins {
        if (c as f64) < 0.5 * per_bin {
            continue;
        }
        epochs.push(origin.add_seconds(k as f64 * avg_bin));
        values.push(s / c as f64);
    }
    let mut out = TimeDiffSeries::new(epochs, values, avg_bin, series.tag)?;
    out.flags = series.flags;
    out.flags.detrended = true;
    Ok(out)
}

/// Least-squares slope and intercept of `(x, y)` pairs.
fn line_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Least-squares slope of Δ(t) against time: the fractional-frequency
/// disagreement carried by a double difference.
pub fn fit_gradient(dd: &TimeDiffSeries) -> Result<f64> {
    if dd.len() < 2 {
        return Err(Error::Insufficient(format!("gradient needs 2 points, got {}", dd.len())));
    }
    let pts: Vec<(f64, f64)> = dd.times().into_iter().zip(dd.values.iter().copied()).collect();
    line_fit(&pts)
        .map(|(s, _)| s)
        .ok_or_else(|| Error::InvalidInput("all samples share one epoch".into()))
}

/// σ(τ) = a·τ^b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub range: (f64, f64),
}

impl PowerLawFit {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let fit = PowerLawFit {
            a,
            b,
            range: (0.0, f64::INFINITY),
        };
        fit.check()?;
        Ok(fit)
    }

    fn check(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidInput(format!("power-law amplitude {} must be > 0", self.a)));
        }
        if !(self.b > -2.0 && self.b < 1.0) {
            return Err(Error::InvalidInput(format!(
                "power-law exponent {} outside (-2, 1)",
                self.b
            )));
        }
        Ok(())
    }

    pub fn eval(&self, tau: f64) -> f64 {
        self.a * tau.powf(self.b)
    }

    /// τ at which the curve reaches `sigma`.
    pub fn crossing(&self, sigma: f64) -> Option<f64> {
        if self.b == 0.0 || sigma <= 0.0 {
            return None;
        }
        Some((sigma / self.a).powf(1.0 / self.b))
    }
}

pub fn fit_powerlaw(curve: &StabilityCurve, range: (f64, f64)) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64)> = curve
        .taus
        .iter()
        .zip(&curve.values)
        .filter(|(t, v)| **t >= range.0 && **t <= range.1 && **v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Insufficient(format!(
            "power-law fit needs 3 points in [{}, {}] s, got {}",
            range.0,
            range.1,
            pts.len()
        )));
    }
    let (b, ln_a) = line_fit(&pts).ok_or_else(|| Error::InvalidInput("degenerate tau range".into()))?;
    let fit = PowerLawFit {
        a: ln_a.exp(),
        b,
        range,
    };
    fit.check()?;
    Ok(fit)
}
