//! Optical frequency ratio from two local comb measurements and the link.
//!
//! Inputs are three fractional-frequency streams at 1 s, each stored as
//! its offset from 1:
//!
//! * `sr`:   (f_Sr/f̄_Sr) / f_HM − 1, against the maser at the Sr site
//! * `yb`:   (f_Yb/f̄_Yb) / f_UTC − 1, against the UTC(k) at the Yb site
//! * `link`: f_HM / f_UTC − 1
//!
//! The chain `ν_Yb/ν_Sr = f_HM/(f_Sr/f̄_Sr) · f_UTC/f_HM · (f_Yb/f̄_Yb)/f_UTC · f̄_Yb/f̄_Sr`
//! gives `y_Yb/y_Sr = (1 + yb) / ((1 + sr)(1 + link))`. All statistics work
//! on `y_Yb/y_Sr − 1`; the reference ratio f̄_Yb/f̄_Sr is applied only in
//! [`final_ratio`], in exact decimal arithmetic.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::decimal;
use crate::epoch::{Epoch, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::stats::PowerLawFit;

/// CIPM 2017 recommended frequency of the ⁸⁷Sr lattice transition, Hz.
/// Replace with the absolute measurement the local ratio refers to.
pub const DEFAULT_SR_HZ: &str = "429228004229873.0";
/// CIPM 2017 recommended frequency of the ¹⁷¹Yb lattice transition, Hz.
pub const DEFAULT_YB_HZ: &str = "518295836590863.6";

const MIN_REFERENCE_DIGITS: usize = 16;

/// A fractional-frequency stream (offset from 1) on a 1 s grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    pub epochs: Vec<Epoch>,
    pub values: Vec<f64>,
}

fn second_key(e: &Epoch) -> Option<i64> {
    let s = e.sod().round();
    ((e.sod() - s).abs() <= 1e-6).then(|| e.mjd() * SECONDS_PER_DAY as i64 + s as i64)
}

impl RateSeries {
    pub fn new(epochs: Vec<Epoch>, values: Vec<f64>) -> Result<Self> {
        if epochs.len() != values.len() {
            return Err(Error::InvalidInput(format!("{} epochs but {} values", epochs.len(), values.len())));
        }
        for (k, e) in epochs.iter().enumerate() {
            if second_key(e).is_none() {
                return Err(Error::InvalidInput(format!("sample {k} at {e} is not on the 1 s grid")));
            }
        }
        if let Some(k) = epochs.windows(2).position(|w| w[1].seconds_since(&w[0]) <= 0.0) {
            return Err(Error::InvalidInput(format!("epochs not increasing at sample {}", k + 1)));
        }
        Ok(RateSeries { epochs, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Reference ratio f̄_Yb/f̄_Sr, held exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRatio {
    value: BigRational,
}

impl ReferenceRatio {
    pub fn from_frequencies(yb_hz: &str, sr_hz: &str) -> Result<Self> {
        for (name, s) in [("Yb", yb_hz), ("Sr", sr_hz)] {
            if decimal::significant_digits(s) < MIN_REFERENCE_DIGITS {
                return Err(Error::InvalidConfig(format!(
                    "{name} reference '{s}' has fewer than {MIN_REFERENCE_DIGITS} significant digits"
                )));
            }
        }
        let yb = decimal::parse_decimal(yb_hz)?;
        let sr = decimal::parse_decimal(sr_hz)?;
        if !yb.is_positive() || !sr.is_positive() {
            return Err(Error::InvalidConfig("reference frequencies must be positive".into()));
        }
        Ok(ReferenceRatio { value: yb / sr })
    }

    /// A ratio given directly as a decimal string.
    pub fn from_ratio(ratio: &str) -> Result<Self> {
        let value = decimal::parse_decimal(ratio)?;
        if !value.is_positive() {
            return Err(Error::InvalidConfig("reference ratio must be positive".into()));
        }
        Ok(ReferenceRatio { value })
    }

    pub fn value(&self) -> &BigRational {
        &self.value
    }
}

impl Default for ReferenceRatio {
    fn default() -> Self {
        ReferenceRatio::from_frequencies(DEFAULT_YB_HZ, DEFAULT_SR_HZ).expect("default references")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionInputs {
    pub sr: RateSeries,
    pub yb: RateSeries,
    pub link: RateSeries,
}

/// The three streams averaged over common seconds in fixed bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSession {
    /// Bin start epochs, aligned to multiples of `bin_s` in the day.
    pub epochs: Vec<Epoch>,
    pub sr: Vec<f64>,
    pub yb: Vec<f64>,
    pub link: Vec<f64>,
    /// Common seconds in each bin.
    pub counts: Vec<usize>,
    pub bin_s: u32,
}

impl BinnedSession {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

/// Averages the three streams over `bin_s` bins using only seconds where
/// all three have data. Bins with fewer than `min_valid` such seconds are
/// dropped.
pub fn align_and_average(inputs: &SessionInputs, bin_s: u32, min_valid: usize) -> Result<BinnedSession> {
    if bin_s == 0 {
        return Err(Error::InvalidConfig("bin length must be >= 1 s".into()));
    }
    let index = |s: &RateSeries| -> HashMap<i64, f64> {
        s.epochs
            .iter()
            .zip(&s.values)
            .filter_map(|(e, v)| second_key(e).map(|k| (k, *v)))
            .collect()
    };
    let yb = index(&inputs.yb);
    let link = index(&inputs.link);
    let bin = bin_s as i64;
    let mut out = BinnedSession {
        epochs: Vec::new(),
        sr: Vec::new(),
        yb: Vec::new(),
        link: Vec::new(),
        counts: Vec::new(),
        bin_s,
    };
    let mut current: Option<i64> = None;
    let mut acc = (0.0, 0.0, 0.0, 0usize);
    let mut any_common = false;
    let flush = |b: i64, acc: (f64, f64, f64, usize), out: &mut BinnedSession| {
        if acc.3 >= min_valid.max(1) {
            let n = acc.3 as f64;
            let start = b * bin;
            out.epochs.push(Epoch::new(
                start.div_euclid(SECONDS_PER_DAY as i64),
                start.rem_euclid(SECONDS_PER_DAY as i64) as f64,
            ));
            out.sr.push(acc.0 / n);
            out.yb.push(acc.1 / n);
            out.link.push(acc.2 / n);
            out.counts.push(acc.3);
        }
    };
    for (e, v) in inputs.sr.epochs.iter().zip(&inputs.sr.values) {
        let key = match second_key(e) {
            Some(k) => k,
            None => continue,
        };
        let (y, l) = match (yb.get(&key), link.get(&key)) {
            (Some(y), Some(l)) => (*y, *l),
            _ => continue,
        };
        any_common = true;
        let b = key.div_euclid(bin);
        if current != Some(b) {
            if let Some(prev) = current {
                flush(prev, acc, &mut out);
            }
            current = Some(b);
            acc = (0.0, 0.0, 0.0, 0);
        }
        acc.0 += v;
        acc.1 += y;
        acc.2 += l;
        acc.3 += 1;
    }
    if let Some(prev) = current {
        flush(prev, acc, &mut out);
    }
    if !any_common {
        return Err(Error::ZeroCommonData);
    }
    if out.is_empty() {
        return Err(Error::Insufficient(format!(
            "no {bin_s} s bin holds {min_valid} common seconds"
        )));
    }
    Ok(out)
}

/// `y_Yb/y_Sr − 1` for one set of stream offsets.
pub fn ratio_offset(sr: f64, yb: f64, link: f64) -> Result<f64> {
    let ds = 1.0 + sr;
    let dl = 1.0 + link;
    if ds == 0.0 || dl == 0.0 || !ds.is_finite() || !dl.is_finite() {
        return Err(Error::InvalidInput(format!("zero-valued frequency ratio (sr {sr}, link {link})")));
    }
    Ok((yb - sr - link - sr * link) / (ds * dl))
}

/// Per-bin `y_Yb/y_Sr − 1`.
pub fn combine_ratio(binned: &BinnedSession) -> Result<RateSeries> {
    let values = (0..binned.len())
        .map(|k| {
            ratio_offset(binned.sr[k], binned.yb[k], binned.link[k])
                .map_err(|e| Error::InvalidInput(format!("bin {k} at {}: {e}", binned.epochs[k])))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RateSeries {
        epochs: binned.epochs.clone(),
        values,
    })
}

/// Daily statistics of the binned ratio offset.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyStat {
    pub label: String,
    pub mean: f64,
    /// Sample standard deviation; `None` for a single bin.
    pub sigma: Option<f64>,
    pub n: usize,
    pub period_s: f64,
    pub stat_unc: Option<f64>,
}

impl DailyStat {
    pub fn new(label: impl Into<String>, mean: f64, sigma: Option<f64>, n: usize, bin_s: u32) -> Self {
        DailyStat {
            label: label.into(),
            mean,
            sigma,
            n,
            period_s: n as f64 * bin_s as f64,
            stat_unc: None,
        }
    }
}

/// Splits at gaps longer than `session_gap_s`; each run is one day.
pub fn daily_stats(series: &RateSeries, bin_s: u32, session_gap_s: f64) -> Vec<DailyStat> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=series.len() {
        let split = k == series.len() || series.epochs[k].seconds_since(&series.epochs[k - 1]) > session_gap_s;
        if !split {
            continue;
        }
        let v = &series.values[start..k];
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let sigma = (n > 1).then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        out.push(DailyStat::new(series.epochs[start].date_label(), mean, sigma, n, bin_s));
        start = k;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedMean {
    pub value: f64,
    /// No day had a usable σ; days were averaged with equal weight.
    pub equal_weight: bool,
}

/// Mean of daily means weighted by `N/σ²`. Days with σ = 0 dominate
/// (their plain mean is returned); days without σ get no weight unless no
/// day has one.
pub fn weighted_mean(days: &[DailyStat]) -> Result<WeightedMean> {
    if days.is_empty() {
        return Err(Error::Insufficient("weighted mean of zero days".into()));
    }
    let exact: Vec<f64> = days.iter().filter(|d| d.sigma == Some(0.0)).map(|d| d.mean).collect();
    if !exact.is_empty() && exact.len() < days.len() {
        return Ok(WeightedMean {
            value: exact.iter().sum::<f64>() / exact.len() as f64,
            equal_weight: false,
        });
    }
    let (sw, swm) = days
        .iter()
        .filter_map(|d| d.sigma.filter(|s| *s > 0.0).map(|s| (d.n as f64 / (s * s), d.mean)))
        .fold((0.0, 0.0), |(sw, swm), (w, m)| (sw + w, swm + w * m));
    if sw > 0.0 {
        return Ok(WeightedMean {
            value: swm / sw,
            equal_weight: false,
        });
    }
    Ok(WeightedMean {
        value: days.iter().map(|d| d.mean).sum::<f64>() / days.len() as f64,
        equal_weight: true,
    })
}

/// Fit-curve value at the day's measurement period.
pub fn daily_statistical_uncertainty(fit: &PowerLawFit, period_s: f64) -> Result<f64> {
    if !(period_s > 0.0) {
        return Err(Error::InvalidInput(format!("measurement period {period_s} s must be > 0")));
    }
    Ok(fit.eval(period_s))
}

/// `sqrt(Σu²/k/k)`: RMS of the daily values divided by √k.
pub fn total_statistical(daily: &[f64]) -> Result<f64> {
    if daily.is_empty() {
        return Err(Error::Insufficient("no daily uncertainties".into()));
    }
    let k = daily.len() as f64;
    Ok((daily.iter().map(|u| u * u).sum::<f64>() / k / k).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyBudget {
    pub statistical: f64,
    pub sr_systematic: f64,
    pub yb_systematic: f64,
    pub gravitational: f64,
    pub link_systematic: f64,
}

impl UncertaintyBudget {
    /// Systematic terms of the reference evaluation around a statistical term.
    pub fn with_statistical(statistical: f64) -> Self {
        UncertaintyBudget {
            statistical,
            sr_systematic: 0.5e-16,
            yb_systematic: 1.2e-16,
            gravitational: 0.4e-16,
            link_systematic: 1.0e-16,
        }
    }

    pub fn components(&self) -> [(&'static str, f64); 5] {
        [
            ("Statistical", self.statistical),
            ("Sr systematic", self.sr_systematic),
            ("Yb systematic", self.yb_systematic),
            ("Gravitational redshift", self.gravitational),
            ("Link systematic", self.link_systematic),
        ]
    }
}

/// Root-sum-square of the budget.
pub fn budget_total(budget: &UncertaintyBudget) -> Result<f64> {
    let parts = budget.components();
    if let Some((name, v)) = parts.iter().find(|(_, v)| !(*v >= 0.0)) {
        return Err(Error::InvalidInput(format!("{name} uncertainty {v} must be >= 0")));
    }
    Ok(parts.iter().map(|(_, v)| v * v).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioResult {
    pub delta: f64,
    pub total_unc: f64,
    pub reference: BigRational,
    /// `reference·(1 + Δ)`, exact.
    pub ratio: BigRational,
    /// Ratio rounded at the last displayed digit.
    pub digits: String,
    /// Uncertainty in units of the last displayed digit.
    pub uncertainty_digits: BigInt,
    pub decimals: u32,
}

impl RatioResult {
    /// Fraction digits grouped in threes: `1.207,507,039,343,337,86 (70)`.
    pub fn grouped(&self) -> String {
        let (int_part, frac) = self.digits.split_once('.').unwrap_or((&self.digits, ""));
        let groups: Vec<String> = frac
            .as_bytes()
            .chunks(3)
            .map(|c| String::from_utf8_lossy(c).into_owned())
            .collect();
        format!("{int_part}.{} ({})", groups.join(","), self.uncertainty_digits)
    }

    /// The exact product to `decimals` places.
    pub fn exact(&self, decimals: u32) -> String {
        decimal::to_fixed(&self.ratio, decimals)
    }
}

impl fmt::Display for RatioResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.digits, self.uncertainty_digits)
    }
}

/// `R = (f̄_Yb/f̄_Sr)·(1 + Δ)` in exact arithmetic. Δ and the uncertainty
/// enter as the exact values of their shortest decimal forms. The last
/// displayed digit sits one place below the leading digit of `u·R`, so the
/// parenthetical has two digits.
pub fn final_ratio(delta: f64, total_unc: f64, refs: &ReferenceRatio) -> Result<RatioResult> {
    if !(total_unc > 0.0 && total_unc.is_finite()) {
        return Err(Error::InvalidInput(format!("total uncertainty {total_unc} must be > 0")));
    }
    let d = decimal::from_f64(delta)?;
    let u = decimal::from_f64(total_unc)?;
    let reference = refs.value().clone();
    let ratio = &reference * (BigRational::one() + d);
    let abs_unc = &u * &ratio;
    let last = decimal::floor_log10(&abs_unc.abs())? - 1;
    let decimals = if last < 0 { (-last) as u32 } else { 0 };
    let digits = decimal::to_fixed(&ratio, decimals);
    let scale = BigRational::from_integer(num_traits::pow(BigInt::from(10u32), decimals as usize));
    let uncertainty_digits = decimal::round_half_away(&(abs_unc.abs() * scale));
    Ok(RatioResult {
        delta,
        total_unc,
        reference,
        ratio,
        digits,
        uncertainty_digits,
        decimals,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioConfig {
    pub bin_s: u32,
    pub min_valid: usize,
    pub session_gap_s: f64,
    pub fit: PowerLawFit,
    /// Replaces the fit-derived daily statistical uncertainties.
    pub daily_unc: Option<Vec<f64>>,
    pub sr_systematic: f64,
    pub yb_systematic: f64,
    pub gravitational: f64,
    pub link_systematic: f64,
    /// Round the statistical term and the total to the 0.1e-16 shown in the
    /// budget table; the rounded total sets the printed uncertainty.
    pub round_budget: bool,
    pub reference: ReferenceRatio,
}

impl Default for RatioConfig {
    fn default() -> Self {
        let sys = UncertaintyBudget::with_statistical(0.0);
        RatioConfig {
            bin_s: 30,
            min_valid: 15,
            session_gap_s: 6.0 * 3600.0,
            fit: PowerLawFit::new(9.4e-13, -0.72).expect("default fit"),
            daily_unc: None,
            sr_systematic: sys.sr_systematic,
            yb_systematic: sys.yb_systematic,
            gravitational: sys.gravitational,
            link_systematic: sys.link_systematic,
            round_budget: true,
            reference: ReferenceRatio::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub bins: usize,
    pub days: Vec<DailyStat>,
    pub weighted: WeightedMean,
    pub budget: UncertaintyBudget,
    pub total: f64,
    pub result: RatioResult,
}

/// Full chain from the three 1 s streams to the final ratio.
pub fn run_ratio(inputs: &SessionInputs, cfg: &RatioConfig) -> Result<RatioReport> {
    let binned = align_and_average(inputs, cfg.bin_s, cfg.min_valid)?;
    let ratio = combine_ratio(&binned)?;
    let mut days = daily_stats(&ratio, cfg.bin_s, cfg.session_gap_s);
    let uncs = match &cfg.daily_unc {
        Some(u) if u.len() != days.len() => {
            return Err(Error::InvalidConfig(format!(
                "{} daily uncertainties given for {} days",
                u.len(),
                days.len()
            )))
        }
        Some(u) => u.clone(),
        None => days
            .iter()
            .map(|d| daily_statistical_uncertainty(&cfg.fit, d.period_s))
            .collect::<Result<Vec<f64>>>()?,
    };
    for (d, u) in days.iter_mut().zip(&uncs) {
        d.stat_unc = Some(*u);
    }
    let weighted = weighted_mean(&days)?;
    let mut statistical = total_statistical(&uncs)?;
    if cfg.round_budget {
        statistical = (statistical / 1e-17).round() * 1e-17;
    }
    let budget = UncertaintyBudget {
        statistical,
        sr_systematic: cfg.sr_systematic,
        yb_systematic: cfg.yb_systematic,
        gravitational: cfg.gravitational,
        link_systematic: cfg.link_systematic,
    };
    let mut total = budget_total(&budget)?;
    if cfg.round_budget {
        total = (total / 1e-17).round() * 1e-17;
    }
    let result = final_ratio(weighted.value, total, &cfg.reference)?;
    Ok(RatioReport {
        bins: binned.len(),
        days,
        weighted,
        budget,
        total,
        result,
    })
}

impl RatioReport {
    /// Key-value report; uncertainties in units of 1e-16.
    pub fn write_report<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bins = {}", self.bins)?;
        writeln!(w, "days = {}", self.days.len())?;
        writeln!(w, "weighted_mean_1e-16 = {:.2}", self.weighted.value / 1e-16)?;
        writeln!(w, "equal_weight_fallback = {}", self.weighted.equal_weight)?;
        for (name, v) in self.budget.components() {
            let key = name.to_lowercase().replace(' ', "_");
            writeln!(w, "{key}_1e-16 = {:.1}", v / 1e-16)?;
        }
        writeln!(w, "total_1e-16 = {:.1}", self.total / 1e-16)?;
        writeln!(w, "reference_ratio = {}", decimal::to_fixed(&self.result.reference, 22))?;
        writeln!(w, "ratio = {}", self.result)?;
        writeln!(w, "ratio_grouped = {}", self.result.grouped())?;
        writeln!(w, "ratio_exact = {}", self.result.exact(22))?;
        Ok(())
    }

    /// Daily rows in units of 1e-15, then the weighted mean.
    pub fn write_table2<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["date", "mean_1e-15", "sigma_1e-15", "n_30s", "period_s", "daily_unc_1e-15"])?;
        for d in &self.days {
            out.write_record(&[
                d.label.clone(),
                format!("{:.2}", d.mean / 1e-15),
                d.sigma.map(|s| format!("{:.2}", s / 1e-15)).unwrap_or_default(),
                d.n.to_string(),
                format!("{:.0}", d.period_s),
                d.stat_unc.map(|u| format!("{:.2}", u / 1e-15)).unwrap_or_default(),
            ])?;
        }
        out.write_record(&[
            "weighted_mean".to_string(),
            format!("{:.2}", self.weighted.value / 1e-15),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
        out.flush()?;
        Ok(())
    }

    /// Budget rows in units of 1e-16.
    pub fn write_table3<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["component", "value_1e-16"])?;
        for (name, v) in self.budget.components() {
            out.write_record(&[name.to_string(), format!("{:.1}", v / 1e-16)])?;
        }
        out.write_record(&["Total".to_string(), format!("{:.1}", self.total / 1e-16)])?;
        out.flush()?;
        Ok(())
    }
}

/// One synthetic measurement day.
#[derive(Debug, Clone, PartialEq)]
pub struct DaySpec {
    pub start: Epoch,
    pub mean: f64,
    pub sigma: f64,
    pub bins: usize,
}

/// Three reference sessions: daily means, σ and bin counts of a
/// representative campaign, starting 09:00 UTC on 2017-02-01..03.
pub fn reference_days() -> Vec<DaySpec> {
    [(0.33e-15, 57.60e-15, 479), (1.00e-15, 60.13e-15, 517), (0.17e-15, 54.85e-15, 477)]
        .iter()
        .enumerate()
        .map(|(d, &(mean, sigma, bins))| DaySpec {
            start: Epoch::new(57785 + d as i64, 9.0 * 3600.0),
            mean,
            sigma,
            bins,
        })
        .collect()
}

/// Builds 1 s streams whose binned ratio has exactly the requested daily
/// sample mean and σ (to rounding). Local and link streams carry white
/// noise that averages out of each bin.
pub fn synthetic_session(days: &[DaySpec], bin_s: u32, seed: u64) -> Result<SessionInputs> {
    if bin_s == 0 || days.iter().any(|d| d.bins < 2 || !(d.sigma >= 0.0)) {
        return Err(Error::InvalidInput("each day needs >= 2 bins, sigma >= 0 and bin >= 1 s".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || -> f64 { StandardNormal.sample(&mut rng) };
    let (mut epochs, mut sr, mut yb, mut link) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let bs = bin_s as usize;
    for day in days {
        let mut z: Vec<f64> = (0..day.bins).map(|_| gauss()).collect();
        let m = z.iter().sum::<f64>() / z.len() as f64;
        let s = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (z.len() - 1) as f64).sqrt();
        z.iter_mut().for_each(|v| *v = (*v - m) / s);
        for (b, zb) in z.iter().enumerate() {
            let target = day.mean + day.sigma * zb;
            let a: Vec<f64> = (0..bs).map(|_| 3e-13 * gauss()).collect();
            let l: Vec<f64> = (0..bs).map(|_| 1e-13 * gauss()).collect();
            let mut y: Vec<f64> = (0..bs).map(|_| 3e-13 * gauss()).collect();
            let ma = a.iter().sum::<f64>() / bs as f64;
            let ml = l.iter().sum::<f64>() / bs as f64;
            let my = y.iter().sum::<f64>() / bs as f64;
            // bin mean of y must satisfy (1+ȳ) = (1+r)(1+ā)(1+l̄)
            let want = target + ma + ml + target * ma + target * ml + ma * ml + target * ma * ml;
            y.iter_mut().for_each(|v| *v += want - my);
            for s in 0..bs {
                epochs.push(day.start.add_seconds((b * bs + s) as f64));
                sr.push(a[s]);
                yb.push(y[s]);
                link.push(l[s]);
            }
        }
    }
    Ok(SessionInputs {
        sr: RateSeries::new(epochs.clone(), sr)?,
        yb: RateSeries::new(epochs.clone(), yb)?,
        link: RateSeries::new(epochs, link)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    fn day(label: &str, mean: f64, sigma: f64, n: usize) -> DailyStat {
        DailyStat::new(label, mean * 1e-15, Some(sigma * 1e-15), n, 30)
    }

    fn table2() -> Vec<DailyStat> {
        vec![day("Feb 1", 0.33, 57.60, 479), day("Feb 2", 1.00, 60.13, 517), day("Feb 3", 0.17, 54.85, 477)]
    }

    fn constant(start: Epoch, n: usize, v: f64) -> RateSeries {
        RateSeries::new((0..n).map(|k| start.add_seconds(k as f64)).collect(), vec![v; n]).unwrap()
    }

    fn e0() -> Epoch {
        Epoch::new(57785, 36_000.0)
    }

    #[test]
    fn table2_weighted_mean() {
        // Σ(N/σ²·m)/Σ(N/σ²) evaluated by hand: 0.4880e-15.
        let w = weighted_mean(&table2()).unwrap();
        assert!((w.value - 0.48797e-15).abs() < 0.0001e-15, "{}", w.value);
        assert!(!w.equal_weight);
    }

    #[test]
    fn weighted_mean_limits() {
        let same = vec![day("a", 1.0, 2.0, 10), day("b", 3.0, 2.0, 10)];
        assert!((weighted_mean(&same).unwrap().value - 2.0e-15).abs() < 1e-30);
        let dominated = vec![day("a", 1.0, 0.0, 10), day("b", 3.0, 2.0, 10)];
        assert_eq!(weighted_mean(&dominated).unwrap().value, 1.0e-15);
        let flat = vec![day("a", 1.0, 0.0, 10), day("b", 3.0, 0.0, 10)];
        let w = weighted_mean(&flat).unwrap();
        assert!(w.equal_weight);
        assert!((w.value - 2.0e-15).abs() < 1e-30);
        assert!(weighted_mean(&[]).is_err());
    }

    #[test]
    fn statistical_totals() {
        let t = total_statistical(&[9.7e-16, 9.1e-16, 9.6e-16]).unwrap();
        assert!((t - 5.4677e-16).abs() < 0.0001e-16, "{t}");
        assert_eq!(total_statistical(&[3e-16]).unwrap(), 3e-16);
        assert!((total_statistical(&[2.0; 4]).unwrap() - 1.0).abs() < 1e-15);
        assert!(total_statistical(&[]).is_err());
    }

    #[test]
    fn budget_rss() {
        let b = UncertaintyBudget::with_statistical(5.5e-16);
        let t = budget_total(&b).unwrap();
        assert!((t - 5.7533e-16).abs() < 0.0001e-16, "{t}");
        assert_eq!(format!("{:.1}", t / 1e-16), "5.8");
        let single = UncertaintyBudget {
            statistical: 0.0,
            sr_systematic: 0.0,
            yb_systematic: 2e-16,
            gravitational: 0.0,
            link_systematic: 0.0,
        };
        assert_eq!(budget_total(&single).unwrap(), 2e-16);
        let zero = UncertaintyBudget { yb_systematic: 0.0, ..single };
        assert_eq!(budget_total(&zero).unwrap(), 0.0);
        let neg = UncertaintyBudget { gravitational: -1.0, ..zero };
        assert!(budget_total(&neg).is_err());
    }

    #[test]
    fn daily_uncertainty_from_fit() {
        let fit = PowerLawFit::new(9.4e-13, -0.72).unwrap();
        let u1 = daily_statistical_uncertainty(&fit, 15510.0).unwrap();
        let u2 = daily_statistical_uncertainty(&fit, 14310.0).unwrap();
        assert!((u1 - 0.904e-15).abs() < 0.001e-15, "{u1}");
        assert!((u2 - 0.958e-15).abs() < 0.001e-15, "{u2}");
        assert!(daily_statistical_uncertainty(&fit, 0.0).is_err());
        let flat = PowerLawFit::new(2e-15, 0.0).unwrap();
        assert_eq!(daily_statistical_uncertainty(&flat, 1234.0).unwrap(), 2e-15);
    }

    #[test]
    fn final_ratio_string() {
        let refs = ReferenceRatio::from_ratio("1.20750703934333727").unwrap();
        let r = final_ratio(4.9e-16, 5.8e-16, &refs).unwrap();
        assert_eq!(r.digits, "1.20750703934333786");
        assert_eq!(r.uncertainty_digits, BigInt::from(70));
        assert_eq!(r.to_string(), "1.20750703934333786(70)");
        assert_eq!(r.grouped(), "1.207,507,039,343,337,86 (70)");
        // exact product: 1.20750703934333727 + 1.20750703934333727·4.9e-16
        assert_eq!(r.exact(34), "1.2075070393433378616784492782352623");
    }

    #[test]
    fn zero_offset_returns_reference() {
        let refs = ReferenceRatio::from_ratio("1.20750703934333727").unwrap();
        let r = final_ratio(0.0, 5.8e-16, &refs).unwrap();
        assert_eq!(&r.ratio, refs.value());
        assert!(final_ratio(0.0, 0.0, &refs).is_err());
    }

    #[test]
    fn reference_frequencies() {
        let r = ReferenceRatio::default();
        let expected = decimal::parse_decimal(DEFAULT_YB_HZ).unwrap() / decimal::parse_decimal(DEFAULT_SR_HZ).unwrap();
        assert_eq!(r.value(), &expected);
        assert!(decimal::to_fixed(r.value(), 12).starts_with("1.207507039343"));
        assert!(ReferenceRatio::from_frequencies("518295836590863", "429228004229873.0").is_err());
        assert!(ReferenceRatio::from_ratio("-1.2").is_err());
    }

    #[test]
    fn constant_streams_keep_values() {
        let inputs = SessionInputs {
            sr: constant(e0(), 600, 1e-15),
            yb: constant(e0(), 600, 2e-15),
            link: constant(e0(), 600, -1e-15),
        };
        let b = align_and_average(&inputs, 30, 15).unwrap();
        assert_eq!(b.len(), 20);
        assert!(b.sr.iter().all(|v| (v - 1e-15).abs() < 1e-30));
        assert!(b.counts.iter().all(|&c| c == 30));
        assert_eq!(b.epochs[1].sod() % 30.0, 0.0);
    }

    #[test]
    fn missing_block_removed_from_all() {
        let sr = constant(e0(), 3600, 0.0);
        let mut yb = constant(e0(), 3600, 0.0);
        yb.epochs.drain(600..1200);
        yb.values.drain(600..1200);
        let inputs = SessionInputs {
            sr,
            yb,
            link: constant(e0(), 3600, 0.0),
        };
        let b = align_and_average(&inputs, 30, 15).unwrap();
        assert_eq!(b.len(), 100);
        let gap_start = e0().add_seconds(600.0);
        let gap_end = e0().add_seconds(1200.0);
        assert!(b.epochs.iter().all(|e| *e < gap_start || e.seconds_since(&gap_end) >= 0.0));
    }

    #[test]
    fn partial_bins_are_dropped() {
        // starts 20 s into a bin: first bin has 10 common seconds
        let start = Epoch::new(57785, 36_020.0);
        let inputs = SessionInputs {
            sr: constant(start, 100, 0.0),
            yb: constant(start, 100, 0.0),
            link: constant(start, 100, 0.0),
        };
        let b = align_and_average(&inputs, 30, 15).unwrap();
        assert_eq!(b.counts, vec![30, 30, 30]);
        assert_eq!(b.epochs[0].sod(), 36_030.0);
    }

    #[test]
    fn no_overlap_is_an_error() {
        let inputs = SessionInputs {
            sr: constant(e0(), 100, 0.0),
            yb: constant(e0().add_seconds(1000.0), 100, 0.0),
            link: constant(e0(), 100, 0.0),
        };
        assert!(matches!(align_and_average(&inputs, 30, 15), Err(Error::ZeroCommonData)));
    }

    #[test]
    fn ratio_chain_identities() {
        assert_eq!(ratio_offset(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!((ratio_offset(0.0, 2e-15, 0.0).unwrap() - 2e-15).abs() < 1e-30);
        assert!(ratio_offset(-1.0, 0.0, 0.0).is_err());
        // Chain factor f_UTC/f_HM = 1 + 1e-15 means link offset 1/(1+1e-15) − 1.
        let link = -1e-15 / (1.0 + 1e-15);
        assert!((ratio_offset(0.0, 0.0, link).unwrap() - 1e-15).abs() < 1e-28);
        assert!((ratio_offset(0.0, 0.0, 1e-15).unwrap() + 1e-15).abs() < 1e-28);
    }

    fn exact(x: f64) -> BigRational {
        BigRational::from_float(x).unwrap()
    }

    proptest! {
        #[test]
        fn ratio_matches_exact_chain(sr in -1e-12f64..1e-12, yb in -1e-12f64..1e-12, link in -1e-12f64..1e-12,
                                     hm in 0.9e7f64..1.1e7) {
            // Evaluate the four-factor product with explicit reference frequencies.
            let one = BigRational::one();
            let f_hm = exact(hm);
            let f_utc = &f_hm / (&one + exact(link));
            let sr_norm = (&one + exact(sr)) * &f_hm;
            let yb_norm = (&one + exact(yb)) * &f_utc;
            let chain = (&f_hm / &sr_norm) * (&f_utc / &f_hm) * (&yb_norm / &f_utc) - &one;
            let got = ratio_offset(sr, yb, link).unwrap();
            let want = chain.to_f64().unwrap();
            prop_assert!((got - want).abs() <= 1e-28 + 1e-14 * want.abs(), "{} vs {}", got, want);
        }

        #[test]
        fn link_perturbation_is_first_order(eps in -1e-13f64..1e-13) {
            let link = -eps / (1.0 + eps);
            let got = ratio_offset(0.0, 0.0, link).unwrap();
            prop_assert!((got - eps).abs() <= 1e-26 + eps.abs() * 1e-12);
        }

        #[test]
        fn weighted_mean_within_daily_range(means in prop::collection::vec(-5.0f64..5.0, 1..6),
                                            sigmas in prop::collection::vec(0.1f64..100.0, 6),
                                            ns in prop::collection::vec(1usize..1000, 6)) {
            let days: Vec<DailyStat> = means.iter().enumerate().map(|(i, m)| day("d", *m, sigmas[i], ns[i])).collect();
            let w = weighted_mean(&days).unwrap().value;
            let lo = days.iter().map(|d| d.mean).fold(f64::INFINITY, f64::min);
            let hi = days.iter().map(|d| d.mean).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(w >= lo - 1e-27 && w <= hi + 1e-27);
        }

        #[test]
        fn budget_monotone_and_symmetric(c in prop::array::uniform5(0.0f64..10.0), bump in 0.0f64..5.0, which in 0usize..5) {
            let b = |v: [f64; 5]| UncertaintyBudget {
                statistical: v[0], sr_systematic: v[1], yb_systematic: v[2], gravitational: v[3], link_systematic: v[4],
            };
            let base = budget_total(&b(c)).unwrap();
            let mut up = c;
            up[which] += bump;
            prop_assert!(budget_total(&b(up)).unwrap() >= base);
            let mut rev = c;
            rev.reverse();
            prop_assert!((budget_total(&b(rev)).unwrap() - base).abs() <= 1e-12 * base.max(1e-300));
        }
    }

    #[test]
    fn daily_stats_split_sessions() {
        let mut epochs = Vec::new();
        let mut values = Vec::new();
        for d in 0..2 {
            for k in 0..10 {
                epochs.push(Epoch::new(57785 + d, 36_000.0 + 30.0 * k as f64));
                values.push(k as f64 * 1e-15);
            }
        }
        let s = RateSeries::new(epochs, values).unwrap();
        let days = daily_stats(&s, 30, 6.0 * 3600.0);
        assert_eq!(days.len(), 2);
        assert_eq!(days[0].mean, days[1].mean);
        assert_eq!(days[0].sigma, days[1].sigma);
        assert_eq!(days[0].period_s, 300.0);
        assert_eq!(days[0].label, "2017-02-01");
        let one = RateSeries::new(vec![e0()], vec![1e-15]).unwrap();
        let d = daily_stats(&one, 30, 3600.0);
        assert_eq!(d[0].n, 1);
        assert!(d[0].sigma.is_none());
    }

    #[test]
    fn synthetic_session_reproduces_daily_table() {
        let inputs = synthetic_session(&reference_days(), 30, 11).unwrap();
        let cfg = RatioConfig::default();
        let report = run_ratio(&inputs, &cfg).unwrap();
        assert_eq!(report.bins, 479 + 517 + 477);
        let want = [(0.33, 57.60, 479, 14370.0), (1.00, 60.13, 517, 15510.0), (0.17, 54.85, 477, 14310.0)];
        for (d, (m, s, n, p)) in report.days.iter().zip(want) {
            assert!((d.mean / 1e-15 - m).abs() < 1e-9, "{}", d.mean);
            assert!((d.sigma.unwrap() / 1e-15 - s).abs() < 1e-9);
            assert_eq!(d.n, n);
            assert_eq!(d.period_s, p);
        }
        assert!((report.weighted.value - 0.48797e-15).abs() < 0.0001e-15);
    }

    #[test]
    fn report_with_supplied_daily_uncertainties() {
        let inputs = synthetic_session(&reference_days(), 30, 11).unwrap();
        let cfg = RatioConfig {
            daily_unc: Some(vec![0.97e-15, 0.91e-15, 0.96e-15]),
            reference: ReferenceRatio::from_ratio("1.20750703934333727").unwrap(),
            ..Default::default()
        };
        let report = run_ratio(&inputs, &cfg).unwrap();
        assert_eq!(format!("{:.1}", report.budget.statistical / 1e-16), "5.5");
        assert_eq!(format!("{:.1}", report.total / 1e-16), "5.8");
        assert_eq!(report.result.to_string(), "1.20750703934333786(70)");
        let mut text = Vec::new();
        report.write_report(&mut text).unwrap();
        let text = String::from_utf8(text).unwrap();
        assert!(text.contains("total_1e-16 = 5.8"), "{text}");
        let mut t2 = Vec::new();
        report.write_table2(&mut t2).unwrap();
        let t2 = String::from_utf8(t2).unwrap();
        assert!(t2.contains("2017-02-01,0.33,57.60,479,14370,0.97"), "{t2}");
        assert!(t2.contains("weighted_mean,0.49"));
        let bad = RatioConfig {
            daily_unc: Some(vec![1e-15]),
            ..cfg
        };
        assert!(matches!(run_ratio(&inputs, &bad), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn one_day_session() {
        let inputs = synthetic_session(&reference_days()[..1], 30, 3).unwrap();
        let report = run_ratio(&inputs, &RatioConfig::default()).unwrap();
        assert_eq!(report.days.len(), 1);
        let u = report.days[0].stat_unc.unwrap();
        assert!((report.budget.statistical - u).abs() <= 0.5e-17);
    }
}
