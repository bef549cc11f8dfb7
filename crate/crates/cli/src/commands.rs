use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sattf::clock_models::{add_deterministic, synthesize_phase, NoiseSpec};
use sattf::io;
use sattf::ippp_stitch::{inject_reset, simulate_ippp_observable, stitch, NarrowlaneGrid, StitchOptions};
use sattf::link_sim::{
    simulate_four_phases, CarrierPlan, RangeOscillation, SatelliteConfig, StationConfig, TecSource,
};
use sattf::ratio_pipeline::{
    align_and_average, combine_ratio, reference_days, run_ratio, synthetic_session, RatioConfig, ReferenceRatio,
    SessionInputs,
};
use sattf::stats::{deviation, detrend, double_difference, fit_gradient, octave_taus, Estimator, PowerLawFit};
use sattf::twcp::{combine, detect_excursions, iono_correct, IonoModel};
use sattf::{Epoch, Error, Result, Technique, TimeDiffSeries};

use crate::config::RunConfig;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let f = File::create(&path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(BufWriter::new(f))
}

fn finish(mut w: BufWriter<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// Independent seed for the `k`-th random stream of a run.
fn sub_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn scaled(spec: &NoiseSpec, k: f64) -> NoiseSpec {
    NoiseSpec {
        white_pm: spec.white_pm * k,
        flicker_pm: spec.flicker_pm * k,
        white_fm: spec.white_fm * k,
        flicker_fm: spec.flicker_fm * k,
        rw_fm: spec.rw_fm * k,
    }
}

pub fn plan(cfg: &RunConfig) -> Result<CarrierPlan> {
    CarrierPlan::new(cfg.f64("link.uplink_hz")?, cfg.f64("link.downlink_hz")?)
}

fn station(cfg: &RunConfig, which: &str, map: Option<&Arc<sattf::ionex::TecMap>>) -> Result<StationConfig> {
    let g = |name: &str| cfg.f64(&format!("link.{which}.{name}"));
    let tec = match (map, cfg.opt_str(&format!("link.{which}.tec_file"))) {
        (Some(m), _) => TecSource::Map(Arc::clone(m)),
        (None, Some(path)) => TecSource::Series(io::read_tec_series(Path::new(path))?),
        (None, None) => TecSource::Constant(g("vtec_tecu")?),
    };
    let st = StationConfig {
        lat_deg: g("lat_deg")?,
        lon_deg: g("lon_deg")?,
        elevation_deg: g("elevation_deg")?,
        tec,
        path_delay_s: g("path_delay_s")?,
        phase_noise_s: g("phase_noise_s")?,
        max_ambiguity: cfg.i64(&format!("link.{which}.max_ambiguity"))?,
    };
    st.validate()?;
    Ok(st)
}

pub fn stations(cfg: &RunConfig) -> Result<(StationConfig, StationConfig)> {
    let map = match cfg.opt_str("link.ionex_file") {
        Some(p) => Some(Arc::new(io::read_ionex(Path::new(p))?)),
        None => None,
    };
    Ok((station(cfg, "a", map.as_ref())?, station(cfg, "b", map.as_ref())?))
}

fn grid(cfg: &RunConfig) -> Result<NarrowlaneGrid> {
    NarrowlaneGrid::from_carriers(cfg.f64("gnss.f1_hz")?, cfg.f64("gnss.f2_hz")?)
}

// simulate -------------------------------------------------------------------

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let seed = cfg.u64("seed")?;
    let days = cfg.usize("clock.days")?;
    let dt = cfg.f64("clock.interval_s")?;
    if days == 0 || !(dt > 0.0) || (86_400.0 / dt).fract() != 0.0 {
        return Err(Error::InvalidConfig(format!(
            "clock.days = {days} and clock.interval_s = {dt} must give a whole number of samples per day"
        )));
    }
    let n = days * (86_400.0 / dt) as usize;
    let start = Epoch::new(cfg.i64("clock.start_mjd")?, 0.0);
    let spec_a = cfg.clock_noise("a")?;
    let spec_b = cfg.clock_noise("b")?;

    let clock = |spec: &NoiseSpec, which: &str, k: u64| -> Result<_> {
        let x = synthesize_phase(spec, start, n, dt, sub_seed(seed, k))?;
        add_deterministic(
            &x,
            0.0,
            cfg.f64(&format!("clock.{which}.rate"))?,
            cfg.f64(&format!("clock.{which}.drift"))?,
        )
    };
    let x_a = clock(&spec_a, "a", 1)?;
    let x_b = clock(&spec_b, "b", 2)?;

    let sat = SatelliteConfig {
        range_a_m: cfg.f64("link.range_a_m")?,
        range_b_m: cfg.f64("link.range_b_m")?,
        oscillation: RangeOscillation {
            amplitude_m: cfg.f64("link.osc_amplitude_m")?,
            period_s: cfg.f64("link.osc_period_s")?,
            phase_rad: cfg.f64("link.osc_phase_rad")?,
        },
        projection_a: cfg.f64("link.projection_a")?,
        projection_b: cfg.f64("link.projection_b")?,
        lo_noise: scaled(&spec_a, cfg.f64("link.lo_scale")?),
    };
    let (st_a, st_b) = stations(cfg)?;
    let plan = plan(cfg)?;
    let phases = simulate_four_phases(&x_a, &x_b, &sat, &st_a, &st_b, &plan, sub_seed(seed, 3))?;

    let diff: Vec<f64> = x_a.values.iter().zip(&x_b.values).map(|(a, b)| a - b).collect();
    let truth = TimeDiffSeries::from_uniform(start, dt, diff, Technique::Truth)?;

    let mut written = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> Result<()>| -> Result<()> {
        let mut w = create(out, name)?;
        f(&mut w)?;
        finish(w)?;
        written.push(out.join(name));
        Ok(())
    };
    emit("clock_a.csv", &|w| io::write_phase_series(&x_a, w))?;
    emit("clock_b.csv", &|w| io::write_phase_series(&x_b, w))?;
    emit("four_phase.csv", &|w| io::write_four_phases(&phases, w))?;
    emit("truth.csv", &|w| io::write_time_diff(&truth, w))?;

    // GNSS products on a coarser grid
    let g_dt = cfg.f64("gnss.interval_s")?;
    let step = g_dt / dt;
    if !(step >= 1.0 && step.fract() == 0.0) {
        return Err(Error::InvalidConfig(format!(
            "gnss.interval_s = {g_dt} must be a whole multiple of clock.interval_s = {dt}"
        )));
    }
    let step = step as usize;
    let idx: Vec<usize> = (0..truth.len()).step_by(step).collect();
    let coarse = TimeDiffSeries::new(
        idx.iter().map(|&i| truth.epochs[i]).collect(),
        idx.iter().map(|&i| truth.values[i]).collect(),
        g_dt,
        Technique::Truth,
    )?;

    let noise = cfg.f64("gnss.white_noise_s")?;
    let drift = cfg.f64("gnss.ppp_drift")?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 4));
    let ppp_values: Vec<f64> = coarse
        .times()
        .iter()
        .zip(&coarse.values)
        .map(|(t, v)| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + drift * t + noise * e
        })
        .collect();
    let ppp = TimeDiffSeries::new(coarse.epochs.clone(), ppp_values, g_dt, Technique::Ppp)?;
    emit("ppp.csv", &|w| io::write_time_diff(&ppp, w))?;

    let grid = grid(cfg)?;
    let sim = simulate_ippp_observable(&coarse, &grid, sub_seed(seed, 5), noise, cfg.i64("gnss.max_jump")?)?;
    let reset = cfg.i64("gnss.reset_cycles")?;
    for (k, batch) in sim.batches.iter().enumerate() {
        let batch = if reset != 0 {
            let mid = batch.series.epochs[batch.series.len() / 2];
            inject_reset(batch, &mid, reset, &grid)?
        } else {
            batch.clone()
        };
        emit(&format!("ippp_batch_{k:02}.csv"), &|w| io::write_time_diff(&batch.series, w))?;
        if !batch.resets.is_empty() {
            emit(&format!("ippp_batch_{k:02}.resets.csv"), &|w| io::write_resets(&batch.resets, w))?;
        }
    }
    let offsets = sim.expected_corrections();
    emit("ippp_offsets.csv", &|w| {
        writeln!(w, "batch,offset_cycles,expected_correction")?;
        let per_batch = std::iter::once(&0).chain(&offsets);
        for (k, (o, c)) in sim.offsets.iter().zip(per_batch).enumerate() {
            writeln!(w, "{k},{o},{c}")?;
        }
        Ok(())
    })?;
    Ok(written)
}

pub fn simulate_ratio_session(cfg: &RunConfig, out: &Path, days: usize) -> Result<Vec<PathBuf>> {
    let all = reference_days();
    if days == 0 || days > all.len() {
        return Err(Error::InvalidConfig(format!("--ratio-days must be 1..={}", all.len())));
    }
    let session = synthetic_session(&all[..days], cfg.u32("ratio.bin_s")?, cfg.u64("seed")?)?;
    let mut written = Vec::new();
    for (name, s) in [("sr.csv", &session.sr), ("yb.csv", &session.yb), ("link.csv", &session.link)] {
        let w = create(out, name)?;
        io::write_rate_series(s, &mut { w })?;
        written.push(out.join(name));
    }
    Ok(written)
}

// twcp -----------------------------------------------------------------------

pub fn twcp(cfg: &RunConfig, input: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let phases = io::read_four_phases(input, &plan(cfg)?)?;
    let mut diff = combine(&phases)?;
    if cfg.bool("twcp.iono_correct")? {
        let model = match cfg.str("twcp.iono_model") {
            "two-way" => IonoModel::TwoWay,
            "uplink-only" => IonoModel::UplinkOnly,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "twcp.iono_model = '{other}', expected two-way or uplink-only"
                )))
            }
        };
        let (st_a, st_b) = stations(cfg)?;
        diff = iono_correct(&diff, &st_a, &st_b, &phases.plan, model)?;
    }
    let window = cfg.usize("twcp.step_window")?;
    let steps = if diff.len() >= 2 * window {
        detect_excursions(&diff, cfg.f64("twcp.step_threshold_s")?, window)?
    } else {
        Vec::new()
    };

    let mut w = create(out, "twcp.csv")?;
    io::write_time_diff(&diff, &mut w)?;
    finish(w)?;
    let mut w = create(out, "excursions.csv")?;
    writeln!(w, "mjd,sod,step_s")?;
    for (e, s) in &steps {
        writeln!(w, "{},{},{:e}", e.mjd(), e.sod(), s)?;
    }
    finish(w)?;
    Ok(vec![out.join("twcp.csv"), out.join("excursions.csv")])
}

// stitch ---------------------------------------------------------------------

pub fn stitch_cmd(cfg: &RunConfig, batches: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    let sols = batches.iter().map(|p| io::read_batch(p)).collect::<Result<Vec<_>>>()?;
    let opts = StitchOptions {
        fit_window_s: cfg.f64("stitch.fit_window_s")?,
        fit_order: cfg.usize("stitch.fit_order")?,
        guard: cfg.f64("stitch.guard")?,
        max_gap_s: cfg.f64("stitch.max_gap_s")?,
        force: cfg.bool("stitch.force")?,
    };
    let result = stitch(&sols, &grid(cfg)?, &opts)?;
    let mut w = create(out, "stitched.csv")?;
    io::write_time_diff(&result.series, &mut w)?;
    finish(w)?;
    let mut w = create(out, "corrections.csv")?;
    io::write_corrections(&result.boundaries, &mut w)?;
    finish(w)?;
    Ok(vec![out.join("stitched.csv"), out.join("corrections.csv")])
}

// stats ----------------------------------------------------------------------

/// Two significant digits, the way disagreements are tabulated.
pub fn two_significant(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let e = v.abs().log10().floor() as i32;
    let decimals = (1 - e).max(0) as usize;
    format!("{v:.decimals$}")
}

fn estimators(cfg: &RunConfig) -> Result<Vec<Estimator>> {
    match cfg.str("stats.estimator") {
        "both" => Ok(vec![Estimator::Adev, Estimator::Mdev]),
        s => s
            .parse::<Estimator>()
            .map(|e| vec![e])
            .map_err(|_| Error::InvalidConfig(format!("stats.estimator = '{s}', expected adev, mdev or both"))),
    }
}

fn stability_files(cfg: &RunConfig, s: &TimeDiffSeries, stem: &str, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let max = match cfg.f64("stats.max_tau_s")? {
        m if m > 0.0 => m,
        _ => (s.span() + s.interval) / 3.0,
    };
    let taus = octave_taus(s.interval, max);
    if taus.is_empty() {
        return Ok(());
    }
    for est in estimators(cfg)? {
        let curve = deviation(s, est, &taus)?;
        let name = format!("{stem}_{}.csv", est.to_string().to_lowercase());
        let mut w = create(out, &name)?;
        io::write_stability(&curve, &mut w)?;
        finish(w)?;
        written.push(out.join(name));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct Period {
    pub start: f64,
    pub end: f64,
}

impl std::str::FromStr for Period {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or("expected START_MJD:END_MJD")?;
        let start: f64 = a.trim().parse().map_err(|_| format!("bad start MJD '{a}'"))?;
        let end: f64 = b.trim().parse().map_err(|_| format!("bad end MJD '{b}'"))?;
        if end <= start {
            return Err(format!("period end {end} must follow start {start}"));
        }
        Ok(Period { start, end })
    }
}

fn mjd_epoch(mjd: f64) -> Epoch {
    let day = mjd.floor();
    Epoch::new(day as i64, ((mjd - day) * 86_400.0 * 1e3).round() / 1e3)
}

pub fn analyze(cfg: &RunConfig, inputs: &[PathBuf], periods: &[Period], out: &Path) -> Result<(Vec<PathBuf>, String)> {
    let series = inputs.iter().map(|p| io::read_time_diff(p)).collect::<Result<Vec<_>>>()?;
    let mut written = Vec::new();
    for (s, p) in series.iter().zip(inputs) {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
        stability_files(cfg, s, stem, out, &mut written)?;
        let window = cfg.f64("stats.detrend_window_s")?;
        if window > 0.0 {
            let d = detrend(s, window, cfg.f64("stats.detrend_bin_s")?)?;
            let name = format!("{stem}_detrended.csv");
            let mut w = create(out, &name)?;
            io::write_time_diff(&d, &mut w)?;
            finish(w)?;
            written.push(out.join(name));
        }
    }

    let mut rows = Vec::new();
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            let dd = double_difference(&series[i], &series[j])?;
            let pair = dd.tag.to_string();
            let name = format!("dd_{pair}.csv");
            let mut w = create(out, &name)?;
            io::write_time_diff(&dd, &mut w)?;
            finish(w)?;
            written.push(out.join(&name));
            stability_files(cfg, &dd, &format!("dd_{pair}"), out, &mut written)?;

            let spans: Vec<(String, TimeDiffSeries)> = if periods.is_empty() {
                vec![("all".to_string(), dd.clone())]
            } else {
                periods
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (format!("({})", k + 1), dd.slice_epochs(&mjd_epoch(p.start), &mjd_epoch(p.end))))
                    .collect()
            };
            for (label, part) in spans {
                let g = fit_gradient(&part)?;
                rows.push((label, pair.clone(), part, g));
            }
        }
    }

    let mut w = create(out, "gradients.csv")?;
    writeln!(w, "period,pair,start_mjd,end_mjd,days,gradient,disagreement_1e-16")?;
    let mut table = String::new();
    for (label, pair, part, g) in &rows {
        let first = part.epochs[0];
        let last = *part.epochs.last().expect("non-empty after fit");
        let days = (last.seconds_since(&first) + part.interval) / 86_400.0;
        let cell = two_significant(g / 1e-16);
        writeln!(
            w,
            "{label},{pair},{:.5},{:.5},{days:.2},{g:e},{cell}",
            first.mjd_f64(),
            last.mjd_f64()
        )?;
        table.push_str(&format!("{label:<6} {pair:<12} {days:>6.2} d  {cell:>8} x 1e-16\n"));
    }
    finish(w)?;
    written.push(out.join("gradients.csv"));
    Ok((written, table))
}

// ratio ----------------------------------------------------------------------

pub fn ratio_config(cfg: &RunConfig) -> Result<RatioConfig> {
    let reference = match cfg.opt_str("ratio.reference_ratio") {
        Some(r) => ReferenceRatio::from_ratio(r)?,
        None => ReferenceRatio::from_frequencies(cfg.str("ratio.yb_hz"), cfg.str("ratio.sr_hz"))?,
    };
    Ok(RatioConfig {
        bin_s: cfg.u32("ratio.bin_s")?,
        min_valid: cfg.usize("ratio.min_valid")?,
        session_gap_s: cfg.f64("ratio.session_gap_s")?,
        fit: PowerLawFit::new(cfg.f64("ratio.fit_a")?, cfg.f64("ratio.fit_b")?)?,
        daily_unc: cfg.f64_list("ratio.daily_unc")?,
        sr_systematic: cfg.f64("ratio.sr_systematic")?,
        yb_systematic: cfg.f64("ratio.yb_systematic")?,
        gravitational: cfg.f64("ratio.gravitational")?,
        link_systematic: cfg.f64("ratio.link_systematic")?,
        round_budget: cfg.bool("ratio.round_budget")?,
        reference,
    })
}

pub fn ratio(cfg: &RunConfig, sr: &Path, yb: &Path, link: &Path, out: &Path) -> Result<(Vec<PathBuf>, String)> {
    let inputs = SessionInputs {
        sr: io::read_rate_series(sr)?,
        yb: io::read_rate_series(yb)?,
        link: io::read_rate_series(link)?,
    };
    let rc = ratio_config(cfg)?;
    let report = run_ratio(&inputs, &rc)?;
    let bins = combine_ratio(&align_and_average(&inputs, rc.bin_s, rc.min_valid)?)?;

    let mut text = Vec::new();
    report.write_report(&mut text)?;
    let mut w = create(out, "report.txt")?;
    w.write_all(&text)?;
    finish(w)?;
    let mut w = create(out, "table2.csv")?;
    report.write_table2(&mut w)?;
    finish(w)?;
    let mut w = create(out, "table3.csv")?;
    report.write_table3(&mut w)?;
    finish(w)?;
    let mut w = create(out, "ratio_bins.csv")?;
    io::write_rate_series(&bins, &mut w)?;
    finish(w)?;
    let files = ["report.txt", "table2.csv", "table3.csv", "ratio_bins.csv"].map(|n| out.join(n)).to_vec();
    Ok((files, String::from_utf8_lossy(&text).into_owned()))
}

// ionex-dump -------------------------------------------------------------------

pub fn ionex_dump(input: &Path, csv_out: Option<&Path>, ionex_out: Option<&Path>) -> Result<()> {
    let map = io::read_ionex(input)?;
    match csv_out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            map.write_csv(&mut w)?;
            w.flush()?;
        }
        None => map.write_csv(std::io::stdout().lock())?,
    }
    if let Some(p) = ionex_out {
        std::fs::write(p, sattf::ionex::write_ionex(&map))?;
    }
    Ok(())
}
