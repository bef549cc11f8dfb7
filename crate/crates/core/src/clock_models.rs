//! Seeded power-law clock noise and deterministic phase terms.
//!
//! Each process is specified by its Allan deviation at τ = 1 s and
//! synthesized from Gaussian white noise:
//!
//! | process       | construction                              | ADEV slope |
//! |---------------|-------------------------------------------|------------|
//! | white PM      | iid phase                                 | −1         |
//! | flicker PM    | 1/f filter bank on phase                  | ≈ −1       |
//! | white FM      | iid frequency, integrated                 | −1/2       |
//! | flicker FM    | 1/f filter bank on frequency, integrated  | 0          |
//! | random-walk FM| random-walk frequency, integrated         | +1/2       |
//!
//! Flicker noise is a sum of unit-variance AR(1) processes with corner
//! frequencies one octave apart. Weighting every branch equally gives a
//! one-sided PSD of `c / (f ln 2)` between the lowest and highest corner,
//! with ripple near 1e-3.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::epoch::Epoch;
use crate::error::{Error, Result};
use crate::series::PhaseSeries;

const LN2: f64 = std::f64::consts::LN_2;

/// Allan deviation at τ = 1 s of each power-law process.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NoiseSpec {
    pub white_pm: f64,
    pub flicker_pm: f64,
    pub white_fm: f64,
    pub flicker_fm: f64,
    pub rw_fm: f64,
}

impl NoiseSpec {
    pub fn white_pm(a: f64) -> Self {
        NoiseSpec {
            white_pm: a,
            ..Default::default()
        }
    }

    pub fn flicker_pm(a: f64) -> Self {
        NoiseSpec {
            flicker_pm: a,
            ..Default::default()
        }
    }

    pub fn white_fm(a: f64) -> Self {
        NoiseSpec {
            white_fm: a,
            ..Default::default()
        }
    }

    pub fn flicker_fm(a: f64) -> Self {
        NoiseSpec {
            flicker_fm: a,
            ..Default::default()
        }
    }

    pub fn rw_fm(a: f64) -> Self {
        NoiseSpec {
            rw_fm: a,
            ..Default::default()
        }
    }

    /// A hydrogen-maser-like timescale: ~1e-13 at 1 s, flicker floor near
    /// 1e-15, random walk taking over beyond a few days.
    pub fn h_maser() -> Self {
        NoiseSpec {
            white_pm: 0.0,
            flicker_pm: 0.0,
            white_fm: 1e-13,
            flicker_fm: 7e-16,
            rw_fm: 1e-18,
        }
    }

    fn amplitudes(&self) -> [(&'static str, f64); 5] {
        [
            ("white_pm", self.white_pm),
            ("flicker_pm", self.flicker_pm),
            ("white_fm", self.white_fm),
            ("flicker_fm", self.flicker_fm),
            ("rw_fm", self.rw_fm),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in self.amplitudes() {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::InvalidSpec(format!("{name} amplitude {a} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.amplitudes().iter().all(|(_, a)| *a == 0.0)
    }

    fn has_flicker(&self) -> bool {
        self.flicker_pm > 0.0 || self.flicker_fm > 0.0
    }
}

/// Bank of octave-spaced AR(1) branches approximating 1/f noise.
struct FlickerBank {
    rho: Vec<f64>,
    innov: Vec<f64>,
    state: Vec<f64>,
    scale: f64,
}

impl FlickerBank {
    /// One-sided PSD `h / f` between `f_lo` and the Nyquist frequency.
    fn new(h: f64, f_lo: f64, dt: f64) -> Self {
        let f_nyq = 0.5 / dt;
        let mut rho = Vec::new();
        let mut fc = f_lo;
        while fc <= f_nyq {
            rho.push((-2.0 * std::f64::consts::PI * fc * dt).exp());
            fc *= 2.0;
        }
        let innov = rho.iter().map(|r| (1.0 - r * r).sqrt()).collect();
        FlickerBank {
            state: vec![0.0; rho.len()],
            rho,
            innov,
            scale: (h * LN2).sqrt(),
        }
    }

    fn prime(&mut self, rng: &mut ChaCha8Rng) {
        for s in self.state.iter_mut() {
            *s = rng.sample(StandardNormal);
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let mut acc = 0.0;
        for ((s, r), g) in self.state.iter_mut().zip(&self.rho).zip(&self.innov) {
            let e: f64 = rng.sample(StandardNormal);
            *s = r * *s + g * e;
            acc += *s;
        }
        acc * self.scale
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn integrate_frequency(y: impl Iterator<Item = f64>, dt: f64, out: &mut [f64]) {
    let mut x = 0.0;
    for (slot, yk) in out.iter_mut().zip(y) {
        *slot += x;
        x += yk * dt;
    }
}

/// Lowest corner of the flicker bank for an `n`-sample record.
fn flicker_f_lo(n: usize, dt: f64) -> f64 {
    1.0 / (8.0 * n as f64 * dt)
}

/// Averaging-time range over which the flicker bank reproduces its power
/// law for an `n`-sample record at `dt`.
pub fn flicker_valid_tau(n: usize, dt: f64) -> (f64, f64) {
    (2.0 * dt, n as f64 * dt / 4.0)
}

pub fn synthesize_phase(spec: &NoiseSpec, start: Epoch, n: usize, dt: f64, seed: u64) -> Result<PhaseSeries> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 samples, got {n}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("sample interval {dt} must be > 0")));
    }
    let mut x = vec![0.0; n];

    if spec.white_pm > 0.0 {
        // σ_y²(τ) = 3 σ_x² / τ²
        let sx = spec.white_pm / 3f64.sqrt();
        let mut rng = stream(seed, 1);
        for v in x.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v += sx * e;
        }
    }

    if spec.flicker_pm > 0.0 {
        // σ_y²(τ) = k [1.038 + 3 ln(2π f_h τ)] / τ² for S_x = k / f
        let f_h = 0.5 / dt;
        let k = spec.flicker_pm.powi(2) / (1.038 + 3.0 * (2.0 * std::f64::consts::PI * f_h).ln());
        let mut rng = stream(seed, 2);
        let mut bank = FlickerBank::new(k, flicker_f_lo(n, dt), dt);
        bank.prime(&mut rng);
        for v in x.iter_mut() {
            *v += bank.next(&mut rng);
        }
    }

    if spec.white_fm > 0.0 {
        // σ_y²(τ) = σ² dt / τ
        let sy = spec.white_fm / dt.sqrt();
        let mut rng = stream(seed, 3);
        let y = (0..n).map(|_| sy * rng.sample::<f64, _>(StandardNormal));
        integrate_frequency(y, dt, &mut x);
    }

    if spec.flicker_fm > 0.0 {
        // σ_y² = 2 ln2 h₋₁ for S_y = h₋₁ / f
        let h = spec.flicker_fm.powi(2) / (2.0 * LN2);
        let mut rng = stream(seed, 4);
        let mut bank = FlickerBank::new(h, flicker_f_lo(n, dt), dt);
        bank.prime(&mut rng);
        let y = (0..n).map(|_| bank.next(&mut rng));
        integrate_frequency(y, dt, &mut x);
    }

    if spec.rw_fm > 0.0 {
        // Step variance q gives σ_y²(m dt) = q (2m² + 1) / (6m) → q τ / (3 dt).
        let step = (3.0 * dt).sqrt() * spec.rw_fm;
        let mut rng = stream(seed, 5);
        let mut y = 0.0;
        let ys = (0..n).map(|_| {
            let out = y;
            y += step * rng.sample::<f64, _>(StandardNormal);
            out
        });
        integrate_frequency(ys, dt, &mut x);
    }

    let mut series = PhaseSeries::new(start, dt, x)?;
    if spec.has_flicker() {
        series.valid_tau = Some(flicker_valid_tau(n, dt));
    }
    Ok(series)
}

/// Adds `offset + rate·t + ½·drift·t²` with t measured from the series start.
pub fn add_deterministic(series: &PhaseSeries, offset: f64, rate: f64, drift: f64) -> Result<PhaseSeries> {
    if !(offset.is_finite() && rate.is_finite() && drift.is_finite()) {
        return Err(Error::InvalidInput("deterministic terms must be finite".into()));
    }
    let mut out = series.clone();
    for (i, v) in out.values.iter_mut().enumerate() {
        let t = series.time(i);
        *v += offset + rate * t + 0.5 * drift * t * t;
    }
    Ok(out)
}
