//! Four-phase TWCP combination, ionosphere correction and step detection.

use crate::epoch::Epoch;
use crate::error::{Error, Result};
use crate::link_sim::{iono_phase_delay, CarrierPlan, FourPhaseSet, StationConfig, IONO_K, SPEED_OF_LIGHT, TECU};
use crate::series::{Technique, TimeDiffSeries};

/// Cancels the transponder oscillator, the downlinks and any range change
/// common to both uplinks:
/// `Δ̂ = [(L_AB − L_BB) − (L_BA − L_AA)] / (2·f_u)`.
///
/// The level carries the unresolved ambiguities; gaps in the input epochs
/// become segment boundaries of the output.
pub fn combine(phases: &FourPhaseSet) -> Result<TimeDiffSeries> {
    phases.validate()?;
    let two_fu = 2.0 * phases.plan.uplink_hz();
    let values = (0..phases.len())
        .map(|k| ((phases.l_ab[k] - phases.l_bb[k]) - (phases.l_ba[k] - phases.l_aa[k])) / two_fu)
        .collect();
    TimeDiffSeries::new(phases.epochs.clone(), values, phases.interval, Technique::Twcp)
}

/// Ionospheric term left in Δ̂ by the link geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IonoModel {
    /// Reciprocal two-way residual per station,
    /// `(K/2c)·STEC·(1/f_d² − 1/f_u²)`, entering Δ̂ as `−r_A + r_B`.
    #[default]
    TwoWay,
    /// Loopback-referenced combination: only the uplink paths survive, so
    /// Δ̂ carries `+K·(STEC_A − STEC_B)/(c·f_u²)`.
    UplinkOnly,
}

/// Per-station two-way residual (s) for a slant TEC.
pub fn two_way_iono_residual(stec_tecu: f64, plan: &CarrierPlan) -> f64 {
    0.5 * dispersive_differential(stec_tecu, plan)
}

/// Difference of the one-way carrier-phase advances at f_d and f_u (s).
pub fn dispersive_differential(stec_tecu: f64, plan: &CarrierPlan) -> f64 {
    iono_phase_delay(stec_tecu, plan.uplink_hz()) - iono_phase_delay(stec_tecu, plan.downlink_hz())
}

/// Ionospheric contribution contained in Δ̂ at one epoch.
pub fn iono_term(stec_a: f64, stec_b: f64, plan: &CarrierPlan, model: IonoModel) -> f64 {
    match model {
        IonoModel::TwoWay => -two_way_iono_residual(stec_a, plan) + two_way_iono_residual(stec_b, plan),
        IonoModel::UplinkOnly => {
            IONO_K * (stec_a - stec_b) * TECU / (SPEED_OF_LIGHT * plan.uplink_hz() * plan.uplink_hz())
        }
    }
}

/// Removes the ionospheric term using each station's TEC source.
pub fn iono_correct(
    diff: &TimeDiffSeries,
    st_a: &StationConfig,
    st_b: &StationConfig,
    plan: &CarrierPlan,
    model: IonoModel,
) -> Result<TimeDiffSeries> {
    for (name, st) in [("A", st_a), ("B", st_b)] {
        if let Some((a, b)) = st.tec_uncovered(&diff.epochs) {
            return Err(Error::TecCoverage(format!("station {name}: no TEC for {a} .. {b}")));
        }
    }
    let values = diff
        .epochs
        .iter()
        .zip(&diff.values)
        .map(|(e, v)| Ok(v - iono_term(st_a.stec(e)?, st_b.stec(e)?, plan, model)))
        .collect::<Result<Vec<f64>>>()?;
    let mut out = diff.with_values(values);
    out.flags.iono_corrected = true;
    Ok(out)
}

/// Sorted window supporting insert/remove and median lookup.
struct SortedWindow(Vec<f64>);

impl SortedWindow {
    fn insert(&mut self, v: f64) {
        let i = self.0.partition_point(|&x| x < v);
        self.0.insert(i, v);
    }

    fn remove(&mut self, v: f64) {
        let i = self.0.partition_point(|&x| x < v);
        self.0.remove(i);
    }

    fn median(&self) -> f64 {
        let n = self.0.len();
        if n % 2 == 1 {
            self.0[n / 2]
        } else {
            0.5 * (self.0[n / 2 - 1] + self.0[n / 2])
        }
    }
}

/// Epochs where the median of the `window` samples after differs from the
/// median of the `window` samples before by more than `threshold`. Runs of
/// neighbouring candidates collapse to their largest step. Segments shorter
/// than `2·window` are not examined.
pub fn detect_excursions(diff: &TimeDiffSeries, threshold: f64, window: usize) -> Result<Vec<(Epoch, f64)>> {
    if window < 3 {
        return Err(Error::InvalidInput(format!("excursion window {window} must be >= 3")));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidInput(format!("excursion threshold {threshold} must be > 0")));
    }
    if diff.len() < 2 * window {
        return Err(Error::Insufficient(format!(
            "{} samples, excursion detection needs at least {}",
            diff.len(),
            2 * window
        )));
    }
    let mut out = Vec::new();
    for seg in diff.segments() {
        let v = &diff.values[seg.clone()];
        if v.len() < 2 * window {
            continue;
        }
        let mut before = SortedWindow(Vec::with_capacity(window + 1));
        let mut after = SortedWindow(Vec::with_capacity(window + 1));
        for &x in &v[..window] {
            before.insert(x);
        }
        for &x in &v[window..2 * window] {
            after.insert(x);
        }
        // Candidate at k compares v[k-window..k] with v[k..k+window].
        let mut best: Option<(usize, f64)> = None;
        let mut k = window;
        loop {
            let step = after.median() - before.median();
            if step.abs() > threshold {
                match best {
                    Some((_, s)) if s.abs() >= step.abs() => {}
                    _ => best = Some((k, step)),
                }
            } else if let Some((i, s)) = best.take() {
                out.push((diff.epochs[seg.start + i], s));
            }
            if k + window >= v.len() {
                break;
            }
            before.remove(v[k - window]);
            before.insert(v[k]);
            after.remove(v[k]);
            after.insert(v[k + window]);
            k += 1;
        }
        if let Some((i, s)) = best {
            out.push((diff.epochs[seg.start + i], s));
        }
    }
    Ok(out)
}
