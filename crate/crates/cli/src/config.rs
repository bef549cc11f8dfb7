//! Flat `key = value` run configuration.
//!
//! Every key has a documented default in [`DEFAULTS`]. Unknown keys are
//! rejected both in files and in `--set` overrides.

use std::collections::BTreeMap;
use std::path::Path;

use sattf::clock_models::NoiseSpec;
use sattf::Error;

/// `(key, default, description)` for every accepted key.
pub const DEFAULTS: &[(&str, &str, &str)] = &[
    ("seed", "1", "global RNG seed; every random stream derives from it"),
    // clocks
    ("clock.start_mjd", "57785", "first simulated day (MJD)"),
    ("clock.days", "1", "simulated span in days"),
    ("clock.interval_s", "1", "clock sampling interval (s)"),
    ("clock.a.white_pm", "0", "station A clock: white PM level (s)"),
    ("clock.a.flicker_pm", "0", "station A clock: flicker PM level (s)"),
    ("clock.a.white_fm", "1e-13", "station A clock: white FM ADEV at 1 s"),
    ("clock.a.flicker_fm", "7e-16", "station A clock: flicker FM ADEV floor"),
    ("clock.a.rw_fm", "1e-18", "station A clock: random-walk FM ADEV at 1 s"),
    ("clock.a.rate", "0", "station A fractional frequency offset"),
    ("clock.a.drift", "0", "station A frequency drift (1/s)"),
    ("clock.b.white_pm", "0", "station B clock: white PM level (s)"),
    ("clock.b.flicker_pm", "0", "station B clock: flicker PM level (s)"),
    ("clock.b.white_fm", "1e-13", "station B clock: white FM ADEV at 1 s"),
    ("clock.b.flicker_fm", "7e-16", "station B clock: flicker FM ADEV floor"),
    ("clock.b.rw_fm", "1e-18", "station B clock: random-walk FM ADEV at 1 s"),
    ("clock.b.rate", "1e-14", "station B fractional frequency offset"),
    ("clock.b.drift", "0", "station B frequency drift (1/s)"),
    // link
    ("link.uplink_hz", "14e9", "uplink carrier (Hz)"),
    ("link.downlink_hz", "11e9", "downlink carrier (Hz)"),
    ("link.range_a_m", "37500000", "nominal range station A to satellite (m)"),
    ("link.range_b_m", "38200000", "nominal range station B to satellite (m)"),
    ("link.osc_amplitude_m", "30000", "diurnal range oscillation amplitude (m)"),
    ("link.osc_period_s", "86164.0905", "range oscillation period (s)"),
    ("link.osc_phase_rad", "0", "range oscillation phase (rad)"),
    ("link.projection_a", "1", "share of the oscillation seen by station A"),
    ("link.projection_b", "1", "share of the oscillation seen by station B"),
    ("link.lo_scale", "1e4", "transponder LO noise as a multiple of the station A clock noise"),
    ("link.a.lat_deg", "35.71", "station A latitude (deg)"),
    ("link.a.lon_deg", "139.49", "station A longitude (deg)"),
    ("link.a.elevation_deg", "48", "station A elevation to the satellite (deg)"),
    ("link.a.vtec_tecu", "20", "station A constant vertical TEC (TECU)"),
    ("link.a.tec_file", "", "station A TEC series CSV (mjd,sod,vtec_tecu); overrides vtec_tecu"),
    ("link.a.path_delay_s", "0", "station A constant equipment delay (s)"),
    ("link.a.phase_noise_s", "1e-13", "station A white carrier-phase noise (s)"),
    ("link.a.max_ambiguity", "1000", "station A largest integer cycle ambiguity"),
    ("link.b.lat_deg", "36.37", "station B latitude (deg)"),
    ("link.b.lon_deg", "127.37", "station B longitude (deg)"),
    ("link.b.elevation_deg", "43", "station B elevation to the satellite (deg)"),
    ("link.b.vtec_tecu", "20", "station B constant vertical TEC (TECU)"),
    ("link.b.tec_file", "", "station B TEC series CSV (mjd,sod,vtec_tecu); overrides vtec_tecu"),
    ("link.b.path_delay_s", "0", "station B constant equipment delay (s)"),
    ("link.b.phase_noise_s", "1e-13", "station B white carrier-phase noise (s)"),
    ("link.b.max_ambiguity", "1000", "station B largest integer cycle ambiguity"),
    ("link.ionex_file", "", "IONEX file used for both stations' TEC; overrides the per-station sources"),
    // twcp
    ("twcp.iono_correct", "false", "remove the ionospheric term after combining"),
    ("twcp.iono_model", "two-way", "ionospheric model: two-way or uplink-only"),
    ("twcp.step_threshold_s", "5e-11", "excursion detection threshold (s)"),
    ("twcp.step_window", "60", "excursion detection median window (samples)"),
    // gnss simulation
    ("gnss.f1_hz", "1575.42e6", "first GNSS carrier (Hz)"),
    ("gnss.f2_hz", "1227.60e6", "second GNSS carrier (Hz)"),
    ("gnss.interval_s", "30", "PPP/IPPP sampling interval (s)"),
    ("gnss.white_noise_s", "1e-11", "PPP/IPPP white phase noise (s)"),
    ("gnss.max_jump", "5", "largest simulated IPPP batch offset (wavelengths)"),
    ("gnss.reset_cycles", "0", "ambiguity reset injected mid-batch into every batch (wavelengths, 0 = none)"),
    ("gnss.ppp_drift", "0", "fractional frequency bias of the PPP solution against truth"),
    // stitch
    ("stitch.fit_window_s", "7200", "window fitted on each side of a boundary (s)"),
    ("stitch.fit_order", "1", "polynomial order of the boundary fits"),
    ("stitch.guard", "0.25", "largest accepted distance from an integer (cycles)"),
    ("stitch.max_gap_s", "21600", "largest gap bridged automatically (s)"),
    ("stitch.force", "false", "round even when the guard is exceeded"),
    // stats
    ("stats.estimator", "both", "stability estimator: adev, mdev or both"),
    ("stats.max_tau_s", "0", "largest averaging time (s); 0 = a third of the span"),
    ("stats.detrend_window_s", "0", "moving-average window for detrended output (s); 0 = off"),
    ("stats.detrend_bin_s", "3600", "averaging bin of the detrended output (s)"),
    // ratio
    ("ratio.bin_s", "30", "averaging bin (s)"),
    ("ratio.min_valid", "15", "fewest valid 1 s samples per stream for a bin"),
    ("ratio.session_gap_s", "21600", "gap that starts a new day (s)"),
    ("ratio.fit_a", "9.4e-13", "stability fit coefficient a in a*t^b"),
    ("ratio.fit_b", "-0.72", "stability fit exponent b in a*t^b"),
    ("ratio.daily_unc", "", "comma-separated daily statistical uncertainties; empty = from the fit"),
    ("ratio.sr_systematic", "0.5e-16", "Sr systematic uncertainty"),
    ("ratio.yb_systematic", "1.2e-16", "Yb systematic uncertainty"),
    ("ratio.gravitational", "0.4e-16", "gravitational redshift uncertainty"),
    ("ratio.link_systematic", "1.0e-16", "link systematic uncertainty"),
    ("ratio.round_budget", "true", "round the statistical term and total to 0.1e-16 as printed"),
    ("ratio.sr_hz", "429228004229873.0", "Sr reference frequency (Hz), at least 16 digits"),
    ("ratio.yb_hz", "518295836590863.6", "Yb reference frequency (Hz), at least 16 digits"),
    ("ratio.reference_ratio", "", "reference ratio; overrides sr_hz/yb_hz when set"),
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn bad(msg: String) -> Error {
    Error::InvalidConfig(msg)
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: DEFAULTS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, Error> {
        let mut cfg = RunConfig::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| bad(format!("cannot read config {}: {e}", p.display())))?;
            for (i, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| bad(format!("{}:{}: expected 'key = value'", p.display(), i + 1)))?;
                cfg.set(k.trim(), v.trim())
                    .map_err(|e| bad(format!("{}:{}: {}", p.display(), i + 1, strip(e))))?;
            }
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| bad(format!("--set expects key=value, got '{o}'")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(bad(format!("unknown key '{key}'"))),
        }
    }

    /// Parses every typed key once so that bad values fail before any work.
    fn check(&self) -> Result<(), Error> {
        for (k, default, _) in DEFAULTS {
            let v = &self.values[*k];
            if default.parse::<f64>().is_ok() && !v.is_empty() {
                self.f64(k)?;
            }
            if *default == "true" || *default == "false" {
                self.bool(k)?;
            }
        }
        self.u64("seed")?;
        self.usize("clock.days")?;
        self.usize("stitch.fit_order")?;
        self.usize("twcp.step_window")?;
        self.u32("ratio.bin_s")?;
        self.usize("ratio.min_valid")?;
        self.i64("clock.start_mjd")?;
        self.i64("gnss.max_jump")?;
        self.i64("gnss.reset_cycles")?;
        self.i64("link.a.max_ambiguity")?;
        self.i64("link.b.max_ambiguity")?;
        self.f64_list("ratio.daily_unc")?;
        self.clock_noise("a")?;
        self.clock_noise("b")?;
        Ok(())
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("undeclared key {key}"))
    }

    pub fn opt_str(&self, key: &str) -> Option<&str> {
        Some(self.str(key)).filter(|s| !s.is_empty())
    }

    pub fn f64(&self, key: &str) -> Result<f64, Error> {
        let v = self.str(key);
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| bad(format!("{key} = '{v}' is not a finite number")))
    }

    pub fn i64(&self, key: &str) -> Result<i64, Error> {
        let v = self.str(key);
        v.parse().map_err(|_| bad(format!("{key} = '{v}' is not an integer")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, Error> {
        let v = self.str(key);
        v.parse().map_err(|_| bad(format!("{key} = '{v}' is not a non-negative integer")))
    }

    pub fn u32(&self, key: &str) -> Result<u32, Error> {
        let v = self.str(key);
        v.parse().map_err(|_| bad(format!("{key} = '{v}' is not a non-negative integer")))
    }

    pub fn usize(&self, key: &str) -> Result<usize, Error> {
        let v = self.str(key);
        v.parse().map_err(|_| bad(format!("{key} = '{v}' is not a non-negative integer")))
    }

    pub fn bool(&self, key: &str) -> Result<bool, Error> {
        match self.str(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(bad(format!("{key} = '{v}' is not a boolean"))),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, Error> {
        let Some(v) = self.opt_str(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| bad(format!("{key}: '{s}' is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// Noise levels of clock `a` or `b`.
    pub fn clock_noise(&self, which: &str) -> Result<NoiseSpec, Error> {
        let g = |name: &str| self.f64(&format!("clock.{which}.{name}"));
        let spec = NoiseSpec {
            white_pm: g("white_pm")?,
            flicker_pm: g("flicker_pm")?,
            white_fm: g("white_fm")?,
            flicker_fm: g("flicker_fm")?,
            rw_fm: g("rw_fm")?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The effective configuration in the file format, with descriptions.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, _, doc) in DEFAULTS {
            out.push_str(&format!("# {doc}\n{k} = {}\n", self.values[*k]));
        }
        out
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::InvalidConfig(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        RunConfig::load(None, &[]).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::load(None, &["clock.dayz=3".into()]).unwrap_err();
        assert!(err.to_string().contains("clock.dayz"));
        let dir = std::env::temp_dir().join(format!("sattf-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("run.cfg");
        std::fs::write(&p, "# comment\nseed = 4\n\nratio.bin_sz = 30\n").unwrap();
        let err = RunConfig::load(Some(&p), &[]).unwrap_err().to_string();
        assert!(err.contains(":4:") && err.contains("ratio.bin_sz"), "{err}");
    }

    #[test]
    fn bad_values_fail_early() {
        assert!(RunConfig::load(None, &["clock.days=two".into()]).is_err());
        assert!(RunConfig::load(None, &["twcp.iono_correct=maybe".into()]).is_err());
        assert!(RunConfig::load(None, &["ratio.daily_unc=1e-15,x".into()]).is_err());
        assert!(RunConfig::load(None, &["clock.a.white_fm=-1".into()]).is_err());
    }

    #[test]
    fn render_round_trips() {
        let cfg = RunConfig::load(None, &["seed=9".into()]).unwrap();
        let dir = std::env::temp_dir().join(format!("sattf-cfg-r-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("run.cfg");
        std::fs::write(&p, cfg.render()).unwrap();
        let back = RunConfig::load(Some(&p), &[]).unwrap();
        assert_eq!(back.values, cfg.values);
    }
}
