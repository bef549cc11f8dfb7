//! Epochs as (integer MJD, seconds of day).
//!
//! Keeping the day count as an integer means a 100-day span never
//! accumulates floating-point day fractions: seconds-of-day stays below
//! 86400 and carries ~1e-11 s resolution.

use std::cmp::Ordering;
use std::fmt;

use chrono::{Duration, NaiveDate};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// MJD 0 is 1858-11-17.
fn mjd_origin() -> NaiveDate {
    NaiveDate::from_ymd_opt(1858, 11, 17).expect("valid date")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epoch {
    mjd: i64,
    sod: f64,
}

impl Epoch {
    /// Builds a normalized epoch; `sod` may be outside `[0, 86400)`.
    pub fn new(mjd: i64, sod: f64) -> Self {
        Epoch { mjd, sod: 0.0 }.add_seconds(sod)
    }

    pub fn from_civil(year: i32, month: u32, day: u32, hour: u32, minute: u32, second: f64) -> Option<Self> {
        let date = NaiveDate::from_ymd_opt(year, month, day)?;
        let mjd = (date - mjd_origin()).num_days();
        Some(Epoch::new(
            mjd,
            hour as f64 * 3600.0 + minute as f64 * 60.0 + second,
        ))
    }

    pub fn mjd(&self) -> i64 {
        self.mjd
    }

    pub fn sod(&self) -> f64 {
        self.sod
    }

    /// Fractional MJD. Loses precision beyond ~1e-6 s; display only.
    pub fn mjd_f64(&self) -> f64 {
        self.mjd as f64 + self.sod / SECONDS_PER_DAY
    }

    pub fn add_seconds(self, seconds: f64) -> Self {
        let total = self.sod + seconds;
        let days = (total / SECONDS_PER_DAY).floor();
        let mut mjd = self.mjd + days as i64;
        let mut sod = total - days * SECONDS_PER_DAY;
        if sod >= SECONDS_PER_DAY {
            sod -= SECONDS_PER_DAY;
            mjd += 1;
        } else if sod < 0.0 {
            sod += SECONDS_PER_DAY;
            mjd -= 1;
        }
        Epoch { mjd, sod }
    }

    /// `self - other` in seconds.
    pub fn seconds_since(&self, other: &Epoch) -> f64 {
        (self.mjd - other.mjd) as f64 * SECONDS_PER_DAY + (self.sod - other.sod)
    }

    /// Civil date (UTC-like, no leap seconds) as `YYYY-MM-DD`.
    pub fn date_label(&self) -> String {
        (mjd_origin() + Duration::days(self.mjd))
            .format("%Y-%m-%d")
            .to_string()
    }

    /// Key usable for exact matching of epochs on a microsecond lattice.
    pub(crate) fn micros_since(&self, origin: &Epoch) -> i64 {
        (self.seconds_since(origin) * 1e6).round() as i64
    }
}

impl PartialOrd for Epoch {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.mjd.cmp(&other.mjd) {
            Ordering::Equal => self.sod.partial_cmp(&other.sod),
            o => Some(o),
        }
    }
}

impl fmt::Display for Epoch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MJD {} {:.3} s", self.mjd, self.sod)
    }
}
