//! Concatenation of daily IPPP batch clock solutions.
//!
//! Successive batches, and the pieces of a batch on either side of an
//! ambiguity reset, differ by an integer number of narrowlane wavelengths.
//! Each integer is found by fitting a low-order polynomial to the trailing
//! window of the series accepted so far and to the leading window of the
//! next piece, and comparing both at the first epoch of that piece.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::epoch::Epoch;
use crate::error::{Error, Result};
use crate::series::{Technique, TimeDiffSeries};

pub const GPS_L1_HZ: f64 = 1_575.42e6;
pub const GPS_L2_HZ: f64 = 1_227.60e6;

/// Narrowlane wavelength expressed as light time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NarrowlaneGrid {
    lambda_s: f64,
}

impl NarrowlaneGrid {
    pub fn from_carriers(f1_hz: f64, f2_hz: f64) -> Result<Self> {
        Self::new(1.0 / (f1_hz + f2_hz))
    }

    pub fn new(lambda_s: f64) -> Result<Self> {
        if !(lambda_s > 0.0 && lambda_s.is_finite()) {
            return Err(Error::InvalidConfig(format!("narrowlane wavelength {lambda_s} must be > 0")));
        }
        Ok(NarrowlaneGrid { lambda_s })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_s
    }
}

impl Default for NarrowlaneGrid {
    /// GPS L1/L2, about 0.3568 ns.
    fn default() -> Self {
        NarrowlaneGrid {
            lambda_s: 1.0 / (GPS_L1_HZ + GPS_L2_HZ),
        }
    }
}

/// One daily batch and the epochs at which all its ambiguities were reset.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSolution {
    pub series: TimeDiffSeries,
    pub resets: Vec<Epoch>,
}

impl BatchSolution {
    pub fn new(series: TimeDiffSeries, mut resets: Vec<Epoch>) -> Result<Self> {
        let (first, last) = match (series.epochs.first(), series.epochs.last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => return Err(Error::InvalidInput("empty batch".into())),
        };
        resets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for r in &resets {
            if r.seconds_since(&first) <= 0.0 || r.seconds_since(&last) > 0.0 {
                return Err(Error::InvalidInput(format!(
                    "reset {r} not strictly inside batch {first} .. {last}"
                )));
            }
        }
        Ok(BatchSolution { series, resets })
    }

    /// Index ranges of the pieces between resets.
    fn pieces(&self) -> Vec<std::ops::Range<usize>> {
        let mut cuts: Vec<usize> = self
            .resets
            .iter()
            .map(|r| self.series.epochs.partition_point(|e| e.seconds_since(r) < -1e-6))
            .filter(|&i| i > 0 && i < self.series.len())
            .collect();
        cuts.dedup();
        let mut out = Vec::new();
        let mut start = 0;
        for c in cuts {
            out.push(start..c);
            start = c;
        }
        out.push(start..self.series.len());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StitchOptions {
    pub fit_window_s: f64,
    pub fit_order: usize,
    pub guard: f64,
    pub max_gap_s: f64,
    /// Accept boundaries that exceed the guard or the gap limit.
    pub force: bool,
}

impl Default for StitchOptions {
    fn default() -> Self {
        StitchOptions {
            fit_window_s: 7200.0,
            fit_order: 1,
            guard: 0.25,
            max_gap_s: 6.0 * 3600.0,
            force: false,
        }
    }
}

impl StitchOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.fit_order == 1 || self.fit_order == 2) {
            return Err(Error::InvalidConfig(format!("fit order {} must be 1 or 2", self.fit_order)));
        }
        if !(self.fit_window_s > 0.0) {
            return Err(Error::InvalidConfig("fit window must be > 0".into()));
        }
        if !(self.guard > 0.0 && self.guard <= 0.5) {
            return Err(Error::InvalidConfig(format!("guard {} must be in (0, 0.5]", self.guard)));
        }
        if !(self.max_gap_s > 0.0) {
            return Err(Error::InvalidConfig("maximum gap must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Batch,
    Reset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    pub epoch: Epoch,
    pub kind: BoundaryKind,
    /// Observed minus predicted offset, in wavelengths.
    pub cycles: f64,
    /// Jump of this piece relative to the one before it.
    pub step: i64,
    /// Integer removed from this piece, relative to the first piece.
    pub correction: i64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StitchResult {
    pub series: TimeDiffSeries,
    pub boundaries: Vec<Boundary>,
}

impl StitchResult {
    pub fn corrections(&self) -> Vec<i64> {
        self.boundaries.iter().map(|b| b.correction).collect()
    }

    pub fn margins(&self) -> Vec<f64> {
        self.boundaries.iter().map(|b| b.margin).collect()
    }
}

/// Least-squares polynomial of degree `order` through `(t, v)`, evaluated
/// at `at`. Times are centered and scaled before solving.
fn poly_predict(t: &[f64], v: &[f64], order: usize, at: f64) -> f64 {
    let order = order.min(t.len().saturating_sub(1));
    let n = t.len() as f64;
    let tc = t.iter().sum::<f64>() / n;
    let scale = t.iter().map(|x| (x - tc).abs()).fold(0.0, f64::max).max(1.0);
    let vc = v.iter().sum::<f64>() / n;
    let m = order + 1;
    let mut a = [[0.0f64; 4]; 3];
    for (&ti, &vi) in t.iter().zip(v) {
        let u = (ti - tc) / scale;
        let pow = [1.0, u, u * u];
        for r in 0..m {
            for c in 0..m {
                a[r][c] += pow[r] * pow[c];
            }
            a[r][m] += pow[r] * (vi - vc);
        }
    }
    // Gaussian elimination with partial pivoting on the m×(m+1) system.
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..m {
            if r != col && a[col][col] != 0.0 {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let u = (at - tc) / scale;
    let pow = [1.0, u, u * u];
    vc + (0..m)
        .map(|k| if a[k][k] != 0.0 { a[k][m] / a[k][k] * pow[k] } else { 0.0 })
        .sum::<f64>()
}

struct Piece<'a> {
    epochs: &'a [Epoch],
    values: &'a [f64],
    kind: BoundaryKind,
}

/// Joins batches into one continuous series. The first piece keeps its
/// level; every later piece is shifted by an integer number of
/// wavelengths.
pub fn stitch(batches: &[BatchSolution], grid: &NarrowlaneGrid, opts: &StitchOptions) -> Result<StitchResult> {
    opts.validate()?;
    let first = batches
        .first()
        .ok_or_else(|| Error::InvalidInput("stitch needs at least one batch".into()))?;
    let interval = first.series.interval;
    let mut pieces = Vec::new();
    for (b, batch) in batches.iter().enumerate() {
        if batch.series.is_empty() {
            return Err(Error::InvalidInput(format!("batch {b} is empty")));
        }
        if (batch.series.interval - interval).abs() > 1e-9 {
            return Err(Error::Alignment(format!(
                "batch {b} sampled at {} s, batch 0 at {interval} s",
                batch.series.interval
            )));
        }
        if b > 0 {
            let prev_last = *batches[b - 1].series.epochs.last().unwrap();
            if batch.series.epochs[0].seconds_since(&prev_last) <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "batch {b} starts at {} before batch {} ends at {prev_last}",
                    batch.series.epochs[0],
                    b - 1
                )));
            }
        }
        for (p, r) in batch.pieces().into_iter().enumerate() {
            pieces.push(Piece {
                epochs: &batch.series.epochs[r.clone()],
                values: &batch.series.values[r],
                kind: if p == 0 { BoundaryKind::Batch } else { BoundaryKind::Reset },
            });
        }
    }

    let origin = pieces[0].epochs[0];
    let lambda = grid.lambda();
    let mut epochs: Vec<Epoch> = pieces[0].epochs.to_vec();
    let mut values: Vec<f64> = pieces[0].values.to_vec();
    let mut times: Vec<f64> = epochs.iter().map(|e| e.seconds_since(&origin)).collect();
    let mut boundaries = Vec::new();
    let mut correction = 0i64;

    for piece in pieces.iter().skip(1) {
        let boundary = boundaries.len() + 1;
        let t_first = piece.epochs[0].seconds_since(&origin);
        let t_last = *times.last().unwrap();
        let gap = t_first - t_last - interval;
        if gap > opts.max_gap_s && !opts.force {
            return Err(Error::StitchGap {
                boundary,
                gap_s: gap,
                limit_s: opts.max_gap_s,
            });
        }
        let trail_from = times.partition_point(|&t| t < t_last - opts.fit_window_s);
        let trail_pred = poly_predict(&times[trail_from..], &values[trail_from..], opts.fit_order, t_first);
        let lead_t: Vec<f64> = piece.epochs.iter().map(|e| e.seconds_since(&origin)).collect();
        let lead_to = lead_t.partition_point(|&t| t <= t_first + opts.fit_window_s);
        let lead_fit = poly_predict(&lead_t[..lead_to], &piece.values[..lead_to], opts.fit_order, t_first);

        let cycles = (lead_fit - trail_pred) / lambda;
        let total = cycles.round();
        let margin = (cycles - total).abs();
        if margin > opts.guard && !opts.force {
            return Err(Error::AmbiguousStitch {
                boundary,
                boundary_mjd: piece.epochs[0].mjd_f64(),
                cycles,
                margin,
                guard: opts.guard,
            });
        }
        let total = total as i64;
        boundaries.push(Boundary {
            epoch: piece.epochs[0],
            kind: piece.kind,
            cycles,
            step: total - correction,
            correction: total,
            margin,
        });
        correction = total;
        let shift = total as f64 * lambda;
        epochs.extend_from_slice(piece.epochs);
        values.extend(piece.values.iter().map(|v| v - shift));
        times.extend(lead_t);
    }

    let mut series = TimeDiffSeries::new(epochs, values, interval, first.series.tag)?;
    series.flags = first.series.flags;
    series.flags.stitched = true;
    Ok(StitchResult { series, boundaries })
}

/// Synthetic batches with their true integer offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedBatches {
    pub batches: Vec<BatchSolution>,
    /// Offset of every batch, in wavelengths.
    pub offsets: Vec<i64>,
}

impl SimulatedBatches {
    /// Corrections stitch should report, relative to the first batch.
    pub fn expected_corrections(&self) -> Vec<i64> {
        self.offsets.iter().skip(1).map(|n| n - self.offsets[0]).collect()
    }
}

/// Splits `truth` at day boundaries, adds a random integer offset in
/// `[-max_jump, max_jump]` wavelengths to each batch and white noise of
/// `white_noise` seconds RMS to each sample.
pub fn simulate_ippp_observable(
    truth: &TimeDiffSeries,
    grid: &NarrowlaneGrid,
    jump_seed: u64,
    white_noise: f64,
    max_jump: i64,
) -> Result<SimulatedBatches> {
    if truth.span() + truth.interval < 86_400.0 - 1e-6 {
        return Err(Error::Insufficient(format!(
            "truth spans {} s, at least one day is needed",
            truth.span() + truth.interval
        )));
    }
    if !(white_noise >= 0.0) || max_jump < 0 {
        return Err(Error::InvalidInput("noise and jump range must be >= 0".into()));
    }
    let mut jumps = ChaCha8Rng::seed_from_u64(jump_seed);
    jumps.set_stream(21);
    let mut noise = ChaCha8Rng::seed_from_u64(jump_seed);
    noise.set_stream(22);

    let mut batches = Vec::new();
    let mut offsets = Vec::new();
    let mut start = 0;
    while start < truth.len() {
        let day = truth.epochs[start].mjd();
        let end = start + truth.epochs[start..].iter().take_while(|e| e.mjd() == day).count();
        let n = jumps.random_range(-max_jump..=max_jump);
        let shift = n as f64 * grid.lambda();
        let values = truth.values[start..end]
            .iter()
            .map(|v| {
                let e: f64 = if white_noise > 0.0 { noise.sample(StandardNormal) } else { 0.0 };
                v + shift + white_noise * e
            })
            .collect();
        let mut series = TimeDiffSeries::new(truth.epochs[start..end].to_vec(), values, truth.interval, Technique::Ippp)?;
        series.flags = truth.flags;
        batches.push(BatchSolution::new(series, Vec::new())?);
        offsets.push(n);
        start = end;
    }
    Ok(SimulatedBatches { batches, offsets })
}

/// Adds an ambiguity reset at `epoch`: every later sample of the batch
/// jumps by `cycles` wavelengths.
pub fn inject_reset(batch: &BatchSolution, epoch: &Epoch, cycles: i64, grid: &NarrowlaneGrid) -> Result<BatchSolution> {
    let mut resets = batch.resets.clone();
    resets.push(*epoch);
    let mut series = batch.series.clone();
    let shift = cycles as f64 * grid.lambda();
    for (e, v) in series.epochs.iter().zip(series.values.iter_mut()) {
        if e.seconds_since(epoch) >= -1e-6 {
            *v += shift;
        }
    }
    BatchSolution::new(series, resets)
}
