//! Time series containers shared by every stage of the chain.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::epoch::Epoch;
use crate::error::{Error, Result};

/// Step tolerance when checking that epochs sit on the sampling lattice.
const LATTICE_TOL_S: f64 = 1e-6;

/// Uniformly sampled clock time offset x(t) in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    pub start: Epoch,
    pub interval: f64,
    pub values: Vec<f64>,
    /// Averaging-time range (s) over which any flicker component is a
    /// faithful power law. `None` when no flicker process was synthesized.
    pub valid_tau: Option<(f64, f64)>,
}

impl PhaseSeries {
    pub fn new(start: Epoch, interval: f64, values: Vec<f64>) -> Result<Self> {
        if !(interval > 0.0 && interval.is_finite()) {
            return Err(Error::InvalidInput(format!("sample interval {interval} must be > 0")));
        }
        Ok(PhaseSeries {
            start,
            interval,
            values,
            valid_tau: None,
        })
    }

    pub fn zeros(start: Epoch, interval: f64, n: usize) -> Result<Self> {
        Self::new(start, interval, vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn epoch(&self, i: usize) -> Epoch {
        self.start.add_seconds(i as f64 * self.interval)
    }

    pub fn epochs(&self) -> Vec<Epoch> {
        (0..self.len()).map(|i| self.epoch(i)).collect()
    }

    /// Seconds from the series start to sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.interval
    }

    /// Linear interpolation at `t` seconds after start; clamps to the
    /// end samples outside the span.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.values.len();
        match n {
            0 => 0.0,
            1 => self.values[0],
            _ => {
                let pos = t / self.interval;
                if pos <= 0.0 {
                    return self.values[0];
                }
                let i = pos.floor() as usize;
                if i >= n - 1 {
                    return self.values[n - 1];
                }
                let frac = pos - i as f64;
                self.values[i] + frac * (self.values[i + 1] - self.values[i])
            }
        }
    }

    /// True when both series share start epoch, interval and length.
    pub fn same_grid(&self, other: &PhaseSeries) -> bool {
        self.len() == other.len()
            && (self.interval - other.interval).abs() < 1e-12
            && self.start.seconds_since(&other.start).abs() < LATTICE_TOL_S
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Technique {
    Twcp,
    Ppp,
    Ippp,
    Truth,
}

impl Technique {
    fn label(self) -> &'static str {
        match self {
            Technique::Twcp => "TWCP",
            Technique::Ppp => "PPP",
            Technique::Ippp => "IPPP",
            Technique::Truth => "TRUTH",
        }
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TWCP" => Ok(Technique::Twcp),
            "PPP" => Ok(Technique::Ppp),
            "IPPP" => Ok(Technique::Ippp),
            "TRUTH" => Ok(Technique::Truth),
            other => Err(Error::InvalidInput(format!("unknown technique tag '{other}'"))),
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Technique tag of a clock-difference series. Double differences carry
/// the subtracted technique, e.g. `IPPP-TWCP`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tag {
    pub technique: Technique,
    pub minus: Option<Technique>,
}

impl Tag {
    pub fn single(technique: Technique) -> Self {
        Tag {
            technique,
            minus: None,
        }
    }
}

impl From<Technique> for Tag {
    fn from(t: Technique) -> Self {
        Tag::single(t)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.minus {
            Some(m) => write!(f, "{}-{}", self.technique, m),
            None => write!(f, "{}", self.technique),
        }
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('-') {
            Some((a, b)) => Ok(Tag {
                technique: a.parse()?,
                minus: Some(b.parse()?),
            }),
            None => Ok(Tag::single(s.parse()?)),
        }
    }
}

/// Processing flags carried with a series.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub iono_corrected: bool,
    pub stitched: bool,
    pub detrended: bool,
}

impl Flags {
    pub fn tokens(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.iono_corrected {
            out.push("iono");
        }
        if self.stitched {
            out.push("stitched");
        }
        if self.detrended {
            out.push("detrended");
        }
        out
    }
}

/// Clock difference Δ(t) = x_A(t) − x_B(t) in seconds, on a lattice of
/// `interval` seconds. Missing lattice points are gaps; each gap starts a
/// new segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDiffSeries {
    pub epochs: Vec<Epoch>,
    pub values: Vec<f64>,
    pub interval: f64,
    pub tag: Tag,
    pub flags: Flags,
}

impl TimeDiffSeries {
    pub fn new(epochs: Vec<Epoch>, values: Vec<f64>, interval: f64, tag: impl Into<Tag>) -> Result<Self> {
        if epochs.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} epochs but {} values",
                epochs.len(),
                values.len()
            )));
        }
        if !(interval > 0.0 && interval.is_finite()) {
            return Err(Error::InvalidInput(format!("sample interval {interval} must be > 0")));
        }
        for (k, w) in epochs.windows(2).enumerate() {
            let step = w[1].seconds_since(&w[0]);
            let m = (step / interval).round();
            if m < 1.0 || (step - m * interval).abs() > LATTICE_TOL_S {
                return Err(Error::InvalidInput(format!(
                    "epoch {} ({}) is not on the {interval} s lattice after {}",
                    k + 1,
                    w[1],
                    w[0]
                )));
            }
        }
        Ok(TimeDiffSeries {
            epochs,
            values,
            interval,
            tag: tag.into(),
            flags: Flags::default(),
        })
    }

    pub fn from_uniform(start: Epoch, interval: f64, values: Vec<f64>, tag: impl Into<Tag>) -> Result<Self> {
        let epochs = (0..values.len())
            .map(|i| start.add_seconds(i as f64 * interval))
            .collect();
        Self::new(epochs, values, interval, tag)
    }

    pub fn from_phase(series: &PhaseSeries, tag: impl Into<Tag>) -> Result<Self> {
        Self::new(series.epochs(), series.values.clone(), series.interval, tag)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Seconds since the first epoch for every sample.
    pub fn times(&self) -> Vec<f64> {
        match self.epochs.first() {
            Some(origin) => self.epochs.iter().map(|e| e.seconds_since(origin)).collect(),
            None => Vec::new(),
        }
    }

    /// Index ranges of gap-free runs.
    pub fn segments(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        if self.is_empty() {
            return out;
        }
        let mut start = 0;
        for k in 1..self.len() {
            let step = self.epochs[k].seconds_since(&self.epochs[k - 1]);
            if step > 1.5 * self.interval {
                out.push(start..k);
                start = k;
            }
        }
        out.push(start..self.len());
        out
    }

    /// Indices that open a segment after a gap.
    pub fn gap_starts(&self) -> Vec<usize> {
        self.segments().iter().skip(1).map(|r| r.start).collect()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.len());
        TimeDiffSeries {
            epochs: self.epochs.clone(),
            values,
            interval: self.interval,
            tag: self.tag,
            flags: self.flags,
        }
    }

    pub fn span(&self) -> f64 {
        match (self.epochs.first(), self.epochs.last()) {
            (Some(a), Some(b)) => b.seconds_since(a),
            _ => 0.0,
        }
    }

    /// Samples whose epochs fall in `[from, to)`.
    pub fn slice_epochs(&self, from: &Epoch, to: &Epoch) -> Self {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.epochs[i].seconds_since(from) >= -LATTICE_TOL_S && self.epochs[i].seconds_since(to) < -LATTICE_TOL_S)
            .collect();
        TimeDiffSeries {
            epochs: idx.iter().map(|&i| self.epochs[i]).collect(),
            values: idx.iter().map(|&i| self.values[i]).collect(),
            interval: self.interval,
            tag: self.tag,
            flags: self.flags,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_round_trips_through_text() {
        for s in ["TWCP", "PPP", "IPPP", "TRUTH", "IPPP-TWCP", "PPP-TWCP"] {
            let t: Tag = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        assert!("GPS".parse::<Tag>().is_err());
    }

    #[test]
    fn gaps_split_segments() {
        let start = Epoch::new(57851, 0.0);
        let epochs: Vec<Epoch> = [0.0, 30.0, 60.0, 150.0, 180.0]
            .iter()
            .map(|&s| start.add_seconds(s))
            .collect();
        let s = TimeDiffSeries::new(epochs, vec![0.0; 5], 30.0, Technique::Ippp).unwrap();
        assert_eq!(s.segments(), vec![0..3, 3..5]);
        assert_eq!(s.gap_starts(), vec![3]);
    }

    #[test]
    fn off_lattice_epochs_are_rejected() {
        let start = Epoch::new(57851, 0.0);
        let epochs = vec![start, start.add_seconds(31.0)];
        assert!(TimeDiffSeries::new(epochs, vec![0.0; 2], 30.0, Technique::Ippp).is_err());
    }

    #[test]
    fn phase_interpolation_is_linear() {
        let s = PhaseSeries::new(Epoch::new(0, 0.0), 2.0, vec![0.0, 4.0, 8.0]).unwrap();
        assert_eq!(s.value_at(1.0), 2.0);
        assert_eq!(s.value_at(3.0), 6.0);
        assert_eq!(s.value_at(-1.0), 0.0);
        assert_eq!(s.value_at(10.0), 8.0);
    }
}
