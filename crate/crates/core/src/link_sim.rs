//! Two stations exchanging carriers through one bent-pipe transponder.
//!
//! Station i transmits an uplink carrier of phase `f_u·(t + x_i(t))`. The
//! transponder mixes it down with its local oscillator `f_LO·t + θ(t)`,
//! and station j measures the received carrier against its own downlink
//! reference `f_d·(t + x_j(t))`. With uplink delay `d_iS` and downlink
//! delay `d_Sj` the measured phase (cycles) is
//!
//! ```text
//! L_ij(t) = f_u·x_i(t − d_Sj − d_iS) − f_d·x_j(t) − f_u·d_iS − f_d·d_Sj − θ(t − d_Sj) + N_ij + ε
//! ```
//!
//! Delays are geometric + non-dispersive + a dispersive ionospheric
//! carrier-phase advance `−40.308·STEC/(c·f²)`. Phases are reported
//! relative to the nominal static geometry, so the constant `f·R/c` terms
//! become part of each signal's carrier ambiguity.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::clock_models::{synthesize_phase, NoiseSpec};
use crate::epoch::Epoch;
use crate::error::{Error, Result};
use crate::ionex::TecMap;
use crate::series::PhaseSeries;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Ionospheric refraction constant (m³/s²) for electron density in e/m².
pub const IONO_K: f64 = 40.308;
pub const TECU: f64 = 1e16;
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const SHELL_HEIGHT_M: f64 = 450_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierPlan {
    uplink_hz: f64,
    downlink_hz: f64,
}

impl CarrierPlan {
    pub fn new(uplink_hz: f64, downlink_hz: f64) -> Result<Self> {
        if !(uplink_hz > downlink_hz && downlink_hz > 0.0 && uplink_hz.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "carrier plan needs f_u > f_d > 0, got {uplink_hz} / {downlink_hz} Hz"
            )));
        }
        Ok(CarrierPlan { uplink_hz, downlink_hz })
    }

    /// 14 GHz up, 11 GHz down.
    pub fn ku_band() -> Self {
        CarrierPlan {
            uplink_hz: 14.0e9,
            downlink_hz: 11.0e9,
        }
    }

    pub fn uplink_hz(&self) -> f64 {
        self.uplink_hz
    }

    pub fn downlink_hz(&self) -> f64 {
        self.downlink_hz
    }

    pub fn lo_hz(&self) -> f64 {
        self.uplink_hz - self.downlink_hz
    }
}

/// Carrier-phase advance (s) of the ionosphere for a slant electron
/// content of `stec_tecu` at frequency `f_hz`. Negative: phase advance.
pub fn iono_phase_delay(stec_tecu: f64, f_hz: f64) -> f64 {
    -IONO_K * stec_tecu * TECU / (SPEED_OF_LIGHT * f_hz * f_hz)
}

/// Single-layer (thin-shell) mapping factor from vertical to slant TEC.
pub fn slant_factor(elevation_deg: f64) -> f64 {
    let c = EARTH_RADIUS_M / (EARTH_RADIUS_M + SHELL_HEIGHT_M) * elevation_deg.to_radians().cos();
    1.0 / (1.0 - c * c).sqrt()
}

/// Diurnal range variation `p_i·A·sin(2πt/P + φ)` common to both stations,
/// scaled per station by a line-of-sight projection `p_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeOscillation {
    pub amplitude_m: f64,
    pub period_s: f64,
    pub phase_rad: f64,
}

impl Default for RangeOscillation {
    fn default() -> Self {
        RangeOscillation {
            amplitude_m: 0.0,
            period_s: 86_164.0,
            phase_rad: 0.0,
        }
    }
}

impl RangeOscillation {
    fn offset(&self, t: f64) -> f64 {
        if self.amplitude_m == 0.0 {
            return 0.0;
        }
        self.amplitude_m * (2.0 * std::f64::consts::PI * t / self.period_s + self.phase_rad).sin()
    }

    fn rate(&self, t: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI / self.period_s;
        self.amplitude_m * w * (w * t + self.phase_rad).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteConfig {
    pub range_a_m: f64,
    pub range_b_m: f64,
    pub oscillation: RangeOscillation,
    pub projection_a: f64,
    pub projection_b: f64,
    /// Transponder local-oscillator noise θ(t), as a clock offset.
    pub lo_noise: NoiseSpec,
}

impl Default for SatelliteConfig {
    fn default() -> Self {
        SatelliteConfig {
            range_a_m: 37_500_000.0,
            range_b_m: 37_500_000.0,
            oscillation: RangeOscillation::default(),
            projection_a: 1.0,
            projection_b: 1.0,
            lo_noise: NoiseSpec::default(),
        }
    }
}

impl SatelliteConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.range_a_m > 0.0 && self.range_b_m > 0.0) {
            return Err(Error::InvalidConfig("slant ranges must be > 0".into()));
        }
        if !(self.oscillation.amplitude_m >= 0.0) || !(self.oscillation.period_s > 0.0) {
            return Err(Error::InvalidConfig(
                "range oscillation needs amplitude >= 0 and period > 0".into(),
            ));
        }
        self.lo_noise.validate()
    }

    fn range(&self, station: Station, t: f64) -> f64 {
        match station {
            Station::A => self.range_a_m + self.projection_a * self.oscillation.offset(t),
            Station::B => self.range_b_m + self.projection_b * self.oscillation.offset(t),
        }
    }

    fn nominal_range(&self, station: Station) -> f64 {
        match station {
            Station::A => self.range_a_m,
            Station::B => self.range_b_m,
        }
    }

    /// Phase rate (Hz) of the raw A→B signal due to the range oscillation.
    pub fn raw_ab_doppler_hz(&self, plan: &CarrierPlan, t: f64) -> f64 {
        let v = self.oscillation.rate(t);
        -(plan.uplink_hz() * self.projection_a + plan.downlink_hz() * self.projection_b) * v / SPEED_OF_LIGHT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Station {
    A,
    B,
}

/// Vertical TEC time series (TECU) with linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct TecSeries {
    pub epochs: Vec<Epoch>,
    pub values: Vec<f64>,
}

impl TecSeries {
    pub fn new(epochs: Vec<Epoch>, values: Vec<f64>) -> Result<Self> {
        if epochs.len() != values.len() || epochs.is_empty() {
            return Err(Error::InvalidInput("TEC series needs matching, non-empty epochs and values".into()));
        }
        if epochs.windows(2).any(|w| w[1].seconds_since(&w[0]) <= 0.0) {
            return Err(Error::InvalidInput("TEC epochs must be strictly increasing".into()));
        }
        Ok(TecSeries { epochs, values })
    }

    pub fn at(&self, epoch: &Epoch) -> Result<f64> {
        let first = self.epochs[0];
        let last = *self.epochs.last().unwrap();
        let t = epoch.seconds_since(&first);
        let span = last.seconds_since(&first);
        if t < -1e-6 || t > span + 1e-6 {
            return Err(Error::TecCoverage(format!(
                "{epoch} outside TEC series span {first} .. {last}"
            )));
        }
        if self.epochs.len() == 1 {
            return Ok(self.values[0]);
        }
        let k = self
            .epochs
            .partition_point(|e| e.seconds_since(epoch) <= 0.0)
            .clamp(1, self.epochs.len() - 1);
        let t0 = self.epochs[k - 1].seconds_since(&first);
        let t1 = self.epochs[k].seconds_since(&first);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        Ok(self.values[k - 1] + w * (self.values[k] - self.values[k - 1]))
    }

    fn uncovered(&self, epochs: &[Epoch]) -> Option<(Epoch, Epoch)> {
        let bad: Vec<&Epoch> = epochs.iter().filter(|e| self.at(e).is_err()).collect();
        match (bad.first(), bad.last()) {
            (Some(a), Some(b)) => Some((**a, **b)),
            _ => None,
        }
    }
}

/// Where a station's vertical TEC comes from.
#[derive(Debug, Clone)]
pub enum TecSource {
    Constant(f64),
    Series(TecSeries),
    Map(Arc<TecMap>),
}

impl Default for TecSource {
    fn default() -> Self {
        TecSource::Constant(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct StationConfig {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub elevation_deg: f64,
    pub tec: TecSource,
    /// Non-dispersive one-way delay (troposphere + cables), s.
    pub path_delay_s: f64,
    /// White phase noise per received measurement, in seconds at f_u.
    pub phase_noise_s: f64,
    /// Ambiguities of received signals are drawn from `[-max, max]` cycles.
    pub max_ambiguity: i64,
}

impl Default for StationConfig {
    fn default() -> Self {
        StationConfig {
            lat_deg: 0.0,
            lon_deg: 0.0,
            elevation_deg: 45.0,
            tec: TecSource::default(),
            path_delay_s: 0.0,
            phase_noise_s: 0.0,
            max_ambiguity: 0,
        }
    }
}

impl StationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.elevation_deg > 0.0 && self.elevation_deg <= 90.0) {
            return Err(Error::InvalidConfig(format!(
                "elevation {} deg outside (0, 90]",
                self.elevation_deg
            )));
        }
        if !(self.phase_noise_s >= 0.0) || self.max_ambiguity < 0 {
            return Err(Error::InvalidConfig("noise and ambiguity span must be >= 0".into()));
        }
        Ok(())
    }

    pub fn vtec(&self, epoch: &Epoch) -> Result<f64> {
        match &self.tec {
            TecSource::Constant(v) => Ok(*v),
            TecSource::Series(s) => s.at(epoch),
            TecSource::Map(m) => m.interpolate_vtec(self.lat_deg, self.lon_deg, epoch),
        }
    }

    /// Slant TEC (TECU) along the satellite line of sight.
    pub fn stec(&self, epoch: &Epoch) -> Result<f64> {
        Ok(self.vtec(epoch)? * slant_factor(self.elevation_deg))
    }

    /// First and last epochs that the TEC source cannot serve.
    pub fn tec_uncovered(&self, epochs: &[Epoch]) -> Option<(Epoch, Epoch)> {
        match &self.tec {
            TecSource::Constant(_) => None,
            TecSource::Series(s) => s.uncovered(epochs),
            TecSource::Map(m) => {
                let bad: Vec<&Epoch> = epochs
                    .iter()
                    .filter(|e| m.interpolate_vtec(self.lat_deg, self.lon_deg, e).is_err())
                    .collect();
                match (bad.first(), bad.last()) {
                    (Some(a), Some(b)) => Some((**a, **b)),
                    _ => None,
                }
            }
        }
    }
}

/// Index of each signal in [`FourPhaseSet::ambiguities`].
pub const AA: usize = 0;
pub const AB: usize = 1;
pub const BA: usize = 2;
pub const BB: usize = 3;

/// The four simultaneous carrier phases (cycles, unwrapped).
#[derive(Debug, Clone, PartialEq)]
pub struct FourPhaseSet {
    pub start: Epoch,
    pub interval: f64,
    pub epochs: Vec<Epoch>,
    pub l_aa: Vec<f64>,
    pub l_ab: Vec<f64>,
    pub l_ba: Vec<f64>,
    pub l_bb: Vec<f64>,
    pub plan: CarrierPlan,
    /// Integer carrier ambiguities in AA, AB, BA, BB order.
    pub ambiguities: [f64; 4],
}

impl FourPhaseSet {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Constant the ambiguities add to the four-phase combination, s.
    pub fn ambiguity_offset_s(&self) -> f64 {
        let n = self.ambiguities;
        ((n[AB] - n[BB]) - (n[BA] - n[AA])) / (2.0 * self.plan.uplink_hz())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.epochs.len();
        if [self.l_aa.len(), self.l_ab.len(), self.l_ba.len(), self.l_bb.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::InvalidInput("four phase vectors must match the epoch count".into()));
        }
        let limit = 0.5 * self.plan.uplink_hz() * self.interval;
        for (name, v) in [("L_AA", &self.l_aa), ("L_AB", &self.l_ab), ("L_BA", &self.l_ba), ("L_BB", &self.l_bb)] {
            if let Some(k) = v.windows(2).position(|w| (w[1] - w[0]).abs() > limit || !w[1].is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} discontinuous between samples {k} and {}",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn simulate_four_phases(
    x_a: &PhaseSeries,
    x_b: &PhaseSeries,
    sat: &SatelliteConfig,
    st_a: &StationConfig,
    st_b: &StationConfig,
    plan: &CarrierPlan,
    seed: u64,
) -> Result<FourPhaseSet> {
    if !x_a.same_grid(x_b) {
        return Err(Error::Alignment(format!(
            "clock A ({} samples from {}, {} s) and clock B ({} samples from {}, {} s) differ",
            x_a.len(),
            x_a.start,
            x_a.interval,
            x_b.len(),
            x_b.start,
            x_b.interval
        )));
    }
    sat.validate()?;
    st_a.validate()?;
    st_b.validate()?;
    let n = x_a.len();
    let dt = x_a.interval;
    let epochs = x_a.epochs();
    for (name, st) in [("A", st_a), ("B", st_b)] {
        if let Some((a, b)) = st.tec_uncovered(&epochs) {
            return Err(Error::TecCoverage(format!("station {name}: no TEC for {a} .. {b}")));
        }
    }

    // One leading sample lets θ be interpolated before the first receive epoch.
    let lo = if sat.lo_noise.is_zero() {
        None
    } else {
        let raw = synthesize_phase(&sat.lo_noise, x_a.start.add_seconds(-dt), n + 1, dt, seed ^ 0x4c4f_4e4f_4953_4500)?;
        Some(raw)
    };
    let theta = |s: f64| -> f64 {
        match &lo {
            Some(series) => plan.lo_hz() * series.value_at(s + dt),
            None => 0.0,
        }
    };

    let mut amb_rng = noise_rng(seed, 11);
    let mut draw_amb = |max: i64| -> f64 {
        if max == 0 {
            0.0
        } else {
            amb_rng.random_range(-max..=max) as f64
        }
    };
    let mut ambiguities = [0.0; 4];
    ambiguities[AA] = draw_amb(st_a.max_ambiguity);
    ambiguities[BA] = draw_amb(st_a.max_ambiguity);
    ambiguities[AB] = draw_amb(st_b.max_ambiguity);
    ambiguities[BB] = draw_amb(st_b.max_ambiguity);

    let mut noise_a = noise_rng(seed, 12);
    let mut noise_b = noise_rng(seed, 13);
    let f_u = plan.uplink_hz();
    let f_d = plan.downlink_hz();

    let mut l = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for (k, epoch) in epochs.iter().enumerate() {
        let t = x_a.time(k);
        let stec = [st_a.stec(epoch)?, st_b.stec(epoch)?];
        let stations = [(Station::A, st_a), (Station::B, st_b)];
        // Excess (non-nominal) uplink delay at satellite epoch s.
        let uplink = |i: usize, s: f64| -> f64 {
            let (id, st) = stations[i];
            (sat.range(id, s) - sat.nominal_range(id)) / SPEED_OF_LIGHT
                + st.path_delay_s
                + iono_phase_delay(stec[i], f_u)
        };
        let clock = |i: usize, s: f64| -> f64 {
            if i == 0 {
                x_a.value_at(s)
            } else {
                x_b.value_at(s)
            }
        };
        for j in 0..2 {
            let (id, st) = stations[j];
            let nominal_down = sat.nominal_range(id) / SPEED_OF_LIGHT;
            let fixed = st.path_delay_s + iono_phase_delay(stec[j], f_d);
            // Light-time for the downlink: one fixed-point step from the
            // receive epoch.
            let d0 = sat.range(id, t) / SPEED_OF_LIGHT + fixed;
            let d1 = sat.range(id, t - d0) / SPEED_OF_LIGHT + fixed;
            let s = t - d1;
            let excess_down = d1 - nominal_down;
            let th = theta(s);
            let x_rx = clock(j, t);
            let rng = if j == 0 { &mut noise_a } else { &mut noise_b };
            for i in 0..2 {
                let (tx_id, _) = stations[i];
                let up = uplink(i, s);
                let nominal_up = sat.nominal_range(tx_id) / SPEED_OF_LIGHT;
                let t_tx = s - nominal_up - up;
                let mut phase = f_u * clock(i, t_tx) - f_d * x_rx - f_u * up - f_d * excess_down - th;
                if st.phase_noise_s > 0.0 {
                    let e: f64 = rng.sample(StandardNormal);
                    phase += st.phase_noise_s * f_u * e;
                }
                // signal index: transmitter i, receiver j
                let idx = 2 * i + j;
                l[idx].push(phase + ambiguities[idx]);
            }
        }
    }
    let [l_aa, l_ab, l_ba, l_bb] = l;
    Ok(FourPhaseSet {
        start: x_a.start,
        interval: dt,
        epochs,
        l_aa,
        l_ab,
        l_ba,
        l_bb,
        plan: *plan,
        ambiguities,
    })
}

/// Adds a receive-chain excursion at station B from `epoch` onward: the
/// signals B transmits (L_BA, L_BB) are delayed by `excursion` seconds,
/// which moves the four-phase combination by `+excursion`.
pub fn apply_snr_event(phases: &FourPhaseSet, epoch: &Epoch, excursion: f64) -> Result<FourPhaseSet> {
    let (first, last) = match (phases.epochs.first(), phases.epochs.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::OutOfRange("empty phase set".into())),
    };
    if epoch.seconds_since(&first) < 0.0 || epoch.seconds_since(&last) > 0.0 {
        return Err(Error::OutOfRange(format!("{epoch} outside {first} .. {last}")));
    }
    let mut out = phases.clone();
    let k0 = phases.epochs.partition_point(|e| e.seconds_since(epoch) < -1e-9);
    let step = phases.plan.uplink_hz() * excursion;
    for k in k0..out.len() {
        out.l_ba[k] -= step;
        out.l_bb[k] -= step;
    }
    Ok(out)
}
