//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

mod common;

use std::time::Instant;

use sattf::clock_models::{synthesize_phase, NoiseSpec};
use sattf::ionex::{parse_ionex, write_ionex};
use sattf::ippp_stitch::{simulate_ippp_observable, stitch, BoundaryKind, NarrowlaneGrid, StitchOptions};
use sattf::link_sim::{
    simulate_four_phases, CarrierPlan, RangeOscillation, SatelliteConfig, StationConfig, TecSource,
};
use sattf::ratio_pipeline::{
    budget_total, daily_statistical_uncertainty, final_ratio, total_statistical, weighted_mean, DailyStat,
    ReferenceRatio, UncertaintyBudget,
};
use sattf::stats::{deviation_of_phase, double_difference, fit_gradient, octave_taus, Estimator, PowerLawFit};
use sattf::twcp::{combine, dispersive_differential, iono_correct, IonoModel};
use sattf::{Epoch, Technique, TimeDiffSeries};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn table2() -> Vec<DailyStat> {
    [("Feb 1", 0.33, 57.60, 479), ("Feb 2", 1.00, 60.13, 517), ("Feb 3", 0.17, 54.85, 477)]
        .iter()
        .map(|&(l, m, s, n)| DailyStat::new(l, m * 1e-15, Some(s * 1e-15), n, 30))
        .collect()
}

fn c1_weighted_mean() -> Outcome {
    let w = weighted_mean(&table2()).unwrap();
    let pass = (w.value - 0.49e-15).abs() <= 0.005e-15;
    outcome(pass, format!("weighted mean {:.5}e-15 (target 0.49e-15 +/- 0.005e-15)", w.value / 1e-15))
}

fn c2_budget() -> Outcome {
    let stat = total_statistical(&[9.7e-16, 9.1e-16, 9.6e-16]).unwrap();
    let budget = UncertaintyBudget::with_statistical(5.5e-16);
    let rss = budget_total(&budget).unwrap();
    let rounded = (rss / 1e-17).round() / 10.0;
    let pass = (stat - 5.5e-16).abs() <= 0.05e-16 && rounded == 5.8 && (rss - 5.75e-16).abs() < 0.005e-16;
    outcome(
        pass,
        format!("statistical {:.4}e-16, RSS {:.4}e-16, rounded total {rounded}e-16", stat / 1e-16, rss / 1e-16),
    )
}

fn c3_crossing() -> Outcome {
    let t = PowerLawFit::new(9.4e-13, -0.72).unwrap().crossing(5e-16);
    match t {
        Some(t) => outcome((3.3e4..=4.2e4).contains(&t), format!("crossing at {t:.0} s (window 33000..42000 s)")),
        None => outcome(false, "no crossing"),
    }
}

fn c4_daily() -> Outcome {
    let fit = PowerLawFit::new(9.4e-13, -0.72).unwrap();
    let u = |p: f64| daily_statistical_uncertainty(&fit, p).unwrap() / 1e-15;
    let (a, b, c) = (u(15510.0), u(14310.0), u(14370.0));
    let pass = (a - 0.91).abs() <= 0.02 && (b - 0.96).abs() <= 0.02 && (c - 0.97).abs() <= 0.03;
    outcome(
        pass,
        format!("15510 s -> {a:.3}, 14310 s -> {b:.3} (+/- 0.02); 14370 s -> {c:.3} vs 0.97 (+/- 0.03), x 1e-15"),
    )
}

fn c5_final_ratio() -> Outcome {
    let refs = ReferenceRatio::from_ratio("1.20750703934333727").unwrap();
    let r = final_ratio(4.9e-16, 5.8e-16, &refs).unwrap();
    let unc = format!("({})", r.uncertainty_digits);
    let pass = r.digits == "1.20750703934333786" && unc == "(70)";
    outcome(pass, format!("{}{unc}", r.digits))
}

/// 5 days at 1 s through a noisy transponder and an oscillating orbit.
fn c6_twcp() -> Outcome {
    let n = 5 * 86_400;
    let start = Epoch::new(57785, 0.0);
    let plan = CarrierPlan::new(14.0e9, 11.0e9).unwrap();
    let station = |lat: f64, lon: f64, el: f64, tec: f64| StationConfig {
        lat_deg: lat,
        lon_deg: lon,
        elevation_deg: el,
        tec: TecSource::Constant(tec),
        path_delay_s: 0.0,
        phase_noise_s: 2e-14,
        max_ambiguity: 1000,
    };
    let st_a = station(35.7, 139.5, 48.0, 25.0);
    let st_b = station(36.4, 127.4, 43.0, 15.0);
    let mut worst_rms: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    for seed in 1..=3u64 {
        let clock = NoiseSpec::h_maser();
        let x_a = synthesize_phase(&clock, start, n, 1.0, 100 + seed).unwrap();
        let x_b = synthesize_phase(&clock, start, n, 1.0, 200 + seed).unwrap();
        let sat = SatelliteConfig {
            range_a_m: 37_500_000.0,
            range_b_m: 38_200_000.0,
            oscillation: RangeOscillation {
                amplitude_m: 30_000.0,
                period_s: 86_164.0905,
                phase_rad: seed as f64,
            },
            projection_a: 1.0,
            projection_b: 1.0,
            lo_noise: NoiseSpec {
                white_fm: clock.white_fm * 1e4,
                flicker_fm: clock.flicker_fm * 1e4,
                rw_fm: clock.rw_fm * 1e4,
                ..NoiseSpec::default()
            },
        };
        let phases = simulate_four_phases(&x_a, &x_b, &sat, &st_a, &st_b, &plan, seed).unwrap();
        let est = combine(&phases).unwrap();
        let est = iono_correct(&est, &st_a, &st_b, &plan, IonoModel::UplinkOnly).unwrap();
        let offset = phases.ambiguity_offset_s();
        let resid: Vec<f64> = est
            .values
            .iter()
            .zip(x_a.values.iter().zip(&x_b.values))
            .map(|(e, (a, b))| e - offset - (a - b))
            .collect();
        let rms = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
        let series = est.with_values(resid);
        let grad = fit_gradient(&series).unwrap().abs();
        worst_rms = worst_rms.max(rms);
        worst_grad = worst_grad.max(grad);
    }
    outcome(
        worst_rms < 1e-13 && worst_grad < 1e-17,
        format!("3 seeds: worst residual RMS {worst_rms:.2e} s (< 1e-13), worst gradient {worst_grad:.2e} (< 1e-17)"),
    )
}

fn c7_stitch() -> Outcome {
    let grid = NarrowlaneGrid::default();
    let opts = StitchOptions::default();
    let (mut exact, mut total, mut max_margin) = (0usize, 0usize, 0.0f64);
    let mut errors = 0;
    let n = 11 * 2880;
    for trial in 0..100u64 {
        let start = Epoch::new(57785, 0.0);
        let x_a = synthesize_phase(&NoiseSpec::h_maser(), start, n, 30.0, 1000 + trial).unwrap();
        let x_b = synthesize_phase(&NoiseSpec::h_maser(), start, n, 30.0, 2000 + trial).unwrap();
        let diff: Vec<f64> = x_a.values.iter().zip(&x_b.values).map(|(a, b)| a - b).collect();
        let truth = TimeDiffSeries::from_uniform(start, 30.0, diff, Technique::Truth).unwrap();
        let sim = simulate_ippp_observable(&truth, &grid, 3000 + trial, 2e-11, 5).unwrap();
        let expected = sim.expected_corrections();
        match stitch(&sim.batches, &grid, &opts) {
            Ok(r) => {
                let got: Vec<i64> = r
                    .boundaries
                    .iter()
                    .filter(|b| b.kind == BoundaryKind::Batch)
                    .map(|b| b.correction)
                    .collect();
                total += expected.len();
                exact += got.iter().zip(&expected).filter(|(g, e)| g == e).count();
                for m in r.margins() {
                    max_margin = max_margin.max(m);
                }
            }
            Err(_) => {
                errors += 1;
                total += expected.len();
            }
        }
    }
    outcome(
        exact == 1000 && total == 1000 && errors == 0 && max_margin < 0.25,
        format!("{exact}/{total} corrections exact, {errors} trials rejected, largest margin {max_margin:.4} (< 0.25)"),
    )
}

fn c8_slopes() -> Outcome {
    let n = 1 << 15;
    let taus = octave_taus(1.0, 4096.0);
    let cases: [(&str, NoiseSpec, Estimator, f64); 5] = [
        ("white PM MDEV", NoiseSpec::white_pm(1e-11), Estimator::Mdev, -1.5),
        ("white FM ADEV", NoiseSpec::white_fm(1e-12), Estimator::Adev, -0.5),
        ("white FM MDEV", NoiseSpec::white_fm(1e-12), Estimator::Mdev, -0.5),
        ("RW FM ADEV", NoiseSpec::rw_fm(1e-14), Estimator::Adev, 0.5),
        ("RW FM MDEV", NoiseSpec::rw_fm(1e-14), Estimator::Mdev, 0.5),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, spec, est, theory) in cases {
        let mut sum = 0.0;
        for seed in 0..20u64 {
            let x = synthesize_phase(&spec, Epoch::new(57785, 0.0), n, 1.0, 500 + seed).unwrap();
            let curve = deviation_of_phase(&x.values, 1.0, est, &taus);
            sum += curve.slope(8.0, 2048.0).unwrap();
        }
        let slope = sum / 20.0;
        pass &= (slope - theory).abs() <= 0.15;
        parts.push(format!("{name} {slope:+.3} ({theory:+})"));
    }
    outcome(pass, parts.join(", "))
}

fn c9_gradients() -> Outcome {
    let drifts = [-0.43e-16, 3.8e-16, -0.66e-16, 5.9e-16];
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for days in [12usize, 32] {
        let n = days * 2880;
        let start = Epoch::new(57785, 0.0);
        let x_a = synthesize_phase(&NoiseSpec::h_maser(), start, n, 30.0, 40 + days as u64).unwrap();
        let x_b = synthesize_phase(&NoiseSpec::h_maser(), start, n, 30.0, 80 + days as u64).unwrap();
        let truth: Vec<f64> = x_a.values.iter().zip(&x_b.values).map(|(a, b)| a - b).collect();
        for (k, &drift) in drifts.iter().enumerate() {
            for seed in 0..5u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(days as u64 * 1000 + k as u64 * 10 + seed);
                let mut noisy = |extra: &dyn Fn(f64) -> f64| -> Vec<f64> {
                    truth
                        .iter()
                        .enumerate()
                        .map(|(i, v)| {
                            let e: f64 = StandardNormal.sample(&mut rng);
                            v + extra(i as f64 * 30.0) + 10e-12 * e
                        })
                        .collect()
                };
                let a = noisy(&|t| drift * t);
                let b = noisy(&|_| 0.0);
                let a = TimeDiffSeries::from_uniform(start, 30.0, a, Technique::Ppp).unwrap();
                let b = TimeDiffSeries::from_uniform(start, 30.0, b, Technique::Twcp).unwrap();
                let dd = double_difference(&a, &b).unwrap();
                let g = fit_gradient(&dd).unwrap();
                worst = worst.max((g - drift).abs());
                cases += 1;
            }
        }
    }
    outcome(
        worst <= 0.2e-16,
        format!("{cases} cases over 12 and 32 days, worst recovery error {:.4}e-16 (<= 0.2e-16)", worst / 1e-16),
    )
}

fn c10_ionex() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let text = common::code_layout(13);
    let map = parse_ionex(&text).unwrap();
    let again = parse_ionex(&write_ionex(&map)).unwrap();
    let identical = again.values == map.values && again.lats == map.lats && again.lons == map.lons && again.epochs == map.epochs;
    pass &= identical;
    notes.push(format!("13 maps of 71x73 round trip {}", if identical { "identical" } else { "DIFFERENT" }));

    let mut nodes_exact = true;
    for (e, epoch) in map.epochs.iter().enumerate() {
        for (i, &lat) in map.lats.iter().enumerate().step_by(7) {
            for (j, &lon) in map.lons.iter().enumerate().step_by(6) {
                let v = map.interpolate_vtec(lat, lon, epoch).unwrap();
                nodes_exact &= v == map.value(e, i, j) && v == common::node_tec(e, lat, lon) as f64 / 10.0;
            }
        }
    }
    pass &= nodes_exact;
    notes.push(format!("interpolation at nodes {}", if nodes_exact { "exact" } else { "INEXACT" }));

    let plan = CarrierPlan::new(14.0e9, 11.0e9).unwrap();
    let d = dispersive_differential(100.0, &plan).abs() / 1e-9;
    pass &= (d - 0.425).abs() <= 0.001;
    notes.push(format!("14/11 GHz differential for 100 TECU {d:.4} ns (0.425 +/- 0.001)"));
    outcome(pass, notes.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("daily weighted mean", c1_weighted_mean),
        ("uncertainty totals", c2_budget),
        ("fit-curve crossing", c3_crossing),
        ("daily uncertainties from the fit", c4_daily),
        ("final ratio string", c5_final_ratio),
        ("TWCP cancellation", c6_twcp),
        ("IPPP stitching exactness", c7_stitch),
        ("stability slopes", c8_slopes),
        ("gradient recovery", c9_gradients),
        ("IONEX round trip and dispersion", c10_ionex),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let r = f();
        let status = if r.pass { "PASS" } else { "FAIL" };
        if !r.pass {
            failed += 1;
        }
        println!("criterion {:>2} {status}: {name}: {} [{:.1} s]", k + 1, r.detail, t0.elapsed().as_secs_f64());
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
