//! CSV readers and writers for the data products.
//!
//! Values are written with 17 significant digits, so a write/read cycle is
//! exact and identical inputs give identical bytes. Metadata that
//! does not fit the columns goes into leading `# key=value` lines.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::epoch::Epoch;
use crate::error::{Error, Result};
use crate::ippp_stitch::{BatchSolution, Boundary};
use crate::link_sim::{CarrierPlan, FourPhaseSet, TecSeries};
use crate::ratio_pipeline::RateSeries;
use crate::series::{Flags, PhaseSeries, Tag, TimeDiffSeries};
use crate::stats::StabilityCurve;

/// Header comments and data records of a CSV text, with 1-based line numbers.
struct Table {
    meta: BTreeMap<String, String>,
    rows: Vec<(usize, Vec<String>)>,
}

fn parse_table(text: &str, expected: &[&str]) -> Result<Table> {
    let mut meta = BTreeMap::new();
    for line in text.lines() {
        match line.strip_prefix('#') {
            Some(rest) => {
                if let Some((k, v)) = rest.split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
            None => break,
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let fields: Vec<String> = rec.iter().map(|f| f.trim().to_string()).collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        match &header {
            None => {
                if fields.len() < expected.len() || fields[..expected.len()] != *expected {
                    return Err(Error::parse(
                        line,
                        format!("expected header '{}', found '{}'", expected.join(","), fields.join(",")),
                    ));
                }
                header = Some(fields);
            }
            Some(h) => {
                if fields.len() != h.len() {
                    return Err(Error::parse(line, format!("expected {} fields, found {}", h.len(), fields.len())));
                }
                rows.push((line, fields));
            }
        }
    }
    if header.is_none() {
        return Err(Error::parse(1, format!("missing header '{}'", expected.join(","))));
    }
    Ok(Table { meta, rows })
}

fn num(line: usize, field: &str, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(line, format!("bad {what} '{field}'")))
}

fn epoch_at(line: usize, mjd: &str, sod: &str) -> Result<Epoch> {
    let m: i64 = mjd.parse().map_err(|_| Error::parse(line, format!("bad mjd '{mjd}'")))?;
    let s = num(line, sod, "sod")?;
    if !(0.0..86_400.0).contains(&s) {
        return Err(Error::parse(line, format!("sod {s} outside [0, 86400)")));
    }
    Ok(Epoch::new(m, s))
}

fn meta_num(t: &Table, key: &str) -> Result<Option<f64>> {
    match t.meta.get(key) {
        Some(v) => v
            .parse::<f64>()
            .map(Some)
            .map_err(|_| Error::parse(1, format!("bad header value {key}={v}"))),
        None => Ok(None),
    }
}

/// Smallest positive spacing between successive epochs.
fn infer_interval(epochs: &[Epoch]) -> Option<f64> {
    epochs
        .windows(2)
        .map(|w| w[1].seconds_since(&w[0]))
        .filter(|d| *d > 0.0)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

fn sod(e: &Epoch) -> String {
    format!("{}", e.sod())
}

// Phase series -------------------------------------------------------------

pub fn write_phase_series<W: Write>(s: &PhaseSeries, mut w: W) -> Result<()> {
    writeln!(w, "# interval_s={}", s.interval)?;
    let mut out = writer(w);
    out.write_record(["mjd", "sod", "x_seconds"])?;
    for (i, v) in s.values.iter().enumerate() {
        let e = s.epoch(i);
        out.write_record(&[e.mjd().to_string(), sod(&e), f(*v)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn parse_phase_series(text: &str) -> Result<PhaseSeries> {
    let t = parse_table(text, &["mjd", "sod", "x_seconds"])?;
    let mut epochs = Vec::with_capacity(t.rows.len());
    let mut values = Vec::with_capacity(t.rows.len());
    for (line, r) in &t.rows {
        epochs.push(epoch_at(*line, &r[0], &r[1])?);
        values.push(num(*line, &r[2], "x_seconds")?);
    }
    let first = *epochs.first().ok_or_else(|| Error::parse(1, "no samples"))?;
    let dt = match meta_num(&t, "interval_s")? {
        Some(v) => v,
        None => infer_interval(&epochs).unwrap_or(1.0),
    };
    for (k, ((line, _), e)) in t.rows.iter().zip(&epochs).enumerate() {
        if (e.seconds_since(&first) - k as f64 * dt).abs() > 1e-6 {
            return Err(Error::parse(*line, format!("epoch {e} breaks the uniform {dt} s grid")));
        }
    }
    PhaseSeries::new(first, dt, values)
}

// Four-phase set -------------------------------------------------------------

pub fn write_four_phases<W: Write>(p: &FourPhaseSet, mut w: W) -> Result<()> {
    writeln!(w, "# uplink_hz={}", p.plan.uplink_hz())?;
    writeln!(w, "# downlink_hz={}", p.plan.downlink_hz())?;
    writeln!(w, "# interval_s={}", p.interval)?;
    let mut out = writer(w);
    out.write_record(["mjd", "sod", "L_AA", "L_AB", "L_BA", "L_BB"])?;
    for k in 0..p.len() {
        let e = &p.epochs[k];
        out.write_record(&[e.mjd().to_string(), sod(e), f(p.l_aa[k]), f(p.l_ab[k]), f(p.l_ba[k]), f(p.l_bb[k])])?;
    }
    out.flush()?;
    Ok(())
}

/// The carrier plan comes from the file header when present, else `plan`.
/// Ambiguities are unknown after a round trip and are set to zero.
pub fn parse_four_phases(text: &str, plan: &CarrierPlan) -> Result<FourPhaseSet> {
    let t = parse_table(text, &["mjd", "sod", "L_AA", "L_AB", "L_BA", "L_BB"])?;
    let plan = match (meta_num(&t, "uplink_hz")?, meta_num(&t, "downlink_hz")?) {
        (Some(u), Some(d)) => CarrierPlan::new(u, d)?,
        _ => *plan,
    };
    let mut epochs = Vec::with_capacity(t.rows.len());
    let mut l = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (line, r) in &t.rows {
        epochs.push(epoch_at(*line, &r[0], &r[1])?);
        for (j, name) in ["L_AA", "L_AB", "L_BA", "L_BB"].iter().enumerate() {
            l[j].push(num(*line, &r[2 + j], name)?);
        }
    }
    if epochs.is_empty() {
        return Err(Error::parse(1, "no samples"));
    }
    let interval = match meta_num(&t, "interval_s")? {
        Some(v) => v,
        None => infer_interval(&epochs).unwrap_or(1.0),
    };
    let [l_aa, l_ab, l_ba, l_bb] = l;
    let set = FourPhaseSet {
        start: epochs[0],
        interval,
        epochs,
        l_aa,
        l_ab,
        l_ba,
        l_bb,
        plan,
        ambiguities: [0.0; 4],
    };
    set.validate()?;
    Ok(set)
}

// Time-difference series -----------------------------------------------------

fn flag_string(flags: &Flags) -> String {
    flags.tokens().join("|")
}

fn parse_flags(line: usize, s: &str) -> Result<Flags> {
    let mut flags = Flags::default();
    for tok in s.split('|').map(str::trim).filter(|t| !t.is_empty()) {
        match tok {
            "iono" => flags.iono_corrected = true,
            "stitched" => flags.stitched = true,
            "detrended" => flags.detrended = true,
            other => return Err(Error::parse(line, format!("unknown flag '{other}'"))),
        }
    }
    Ok(flags)
}

pub fn write_time_diff<W: Write>(s: &TimeDiffSeries, mut w: W) -> Result<()> {
    writeln!(w, "# interval_s={}", s.interval)?;
    let mut out = writer(w);
    out.write_record(["mjd", "sod", "dt_seconds", "technique", "flags"])?;
    let tag = s.tag.to_string();
    let flags = flag_string(&s.flags);
    for (e, v) in s.epochs.iter().zip(&s.values) {
        out.write_record(&[e.mjd().to_string(), sod(e), f(*v), tag.clone(), flags.clone()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn parse_time_diff(text: &str) -> Result<TimeDiffSeries> {
    let t = parse_table(text, &["mjd", "sod", "dt_seconds", "technique", "flags"])?;
    let mut epochs = Vec::with_capacity(t.rows.len());
    let mut values = Vec::with_capacity(t.rows.len());
    let mut tag: Option<Tag> = None;
    let mut flags = Flags::default();
    for (line, r) in &t.rows {
        epochs.push(epoch_at(*line, &r[0], &r[1])?);
        values.push(num(*line, &r[2], "dt_seconds")?);
        let this: Tag = r[3]
            .parse()
            .map_err(|_| Error::parse(*line, format!("unknown technique '{}'", r[3])))?;
        match tag {
            None => {
                tag = Some(this);
                flags = parse_flags(*line, &r[4])?;
            }
            Some(t0) if t0 != this => {
                return Err(Error::parse(*line, format!("technique '{this}' differs from '{t0}'")));
            }
            _ => {}
        }
        if let Some(w) = epochs.len().checked_sub(2) {
            if epochs[w + 1].seconds_since(&epochs[w]) <= 0.0 {
                return Err(Error::parse(*line, "epochs not increasing"));
            }
        }
    }
    let tag = tag.ok_or_else(|| Error::parse(t.rows.first().map_or(1, |r| r.0), "no samples"))?;
    let interval = match meta_num(&t, "interval_s")? {
        Some(v) => v,
        None => infer_interval(&epochs).unwrap_or(1.0),
    };
    let mut s = TimeDiffSeries::new(epochs, values, interval, tag).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::parse(t.rows.first().map_or(1, |r| r.0), msg),
        other => other,
    })?;
    s.flags = flags;
    Ok(s)
}

// Stability curves -----------------------------------------------------------

pub fn write_stability<W: Write>(c: &StabilityCurve, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["tau_s", "sigma", "estimator", "edf", "log10_tau", "log10_sigma"])?;
    let est = c.estimator.to_string();
    for k in 0..c.len() {
        out.write_record(&[
            f(c.taus[k]),
            f(c.values[k]),
            est.clone(),
            format!("{:.1}", c.edf[k]),
            format!("{:.6}", c.taus[k].log10()),
            format!("{:.6}", c.values[k].log10()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

// Session streams --------------------------------------------------------------

pub fn write_rate_series<W: Write>(s: &RateSeries, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["mjd", "sod", "value"])?;
    for (e, v) in s.epochs.iter().zip(&s.values) {
        out.write_record(&[e.mjd().to_string(), sod(e), f(*v)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn parse_rate_series(text: &str) -> Result<RateSeries> {
    let t = parse_table(text, &["mjd", "sod", "value"])?;
    let mut epochs = Vec::with_capacity(t.rows.len());
    let mut values = Vec::with_capacity(t.rows.len());
    for (line, r) in &t.rows {
        let e = epoch_at(*line, &r[0], &r[1])?;
        if let Some(prev) = epochs.last() {
            if e.seconds_since(prev) <= 0.0 {
                return Err(Error::parse(*line, "epochs not increasing"));
            }
        }
        if (e.sod() - e.sod().round()).abs() > 1e-6 {
            return Err(Error::parse(*line, format!("sod {} is not on the 1 s grid", e.sod())));
        }
        epochs.push(e);
        values.push(num(*line, &r[2], "value")?);
    }
    RateSeries::new(epochs, values)
}

// TEC series -------------------------------------------------------------------

pub fn parse_tec_series(text: &str) -> Result<TecSeries> {
    let t = parse_table(text, &["mjd", "sod", "vtec_tecu"])?;
    let mut epochs = Vec::new();
    let mut values = Vec::new();
    for (line, r) in &t.rows {
        epochs.push(epoch_at(*line, &r[0], &r[1])?);
        values.push(num(*line, &r[2], "vtec_tecu")?);
    }
    TecSeries::new(epochs, values)
}

pub fn write_tec_series<W: Write>(s: &TecSeries, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["mjd", "sod", "vtec_tecu"])?;
    for (e, v) in s.epochs.iter().zip(&s.values) {
        out.write_record(&[e.mjd().to_string(), sod(e), f(*v)])?;
    }
    out.flush()?;
    Ok(())
}

// Batches, resets and corrections -------------------------------------------

pub fn write_resets<W: Write>(resets: &[Epoch], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["mjd", "sod"])?;
    for e in resets {
        out.write_record(&[e.mjd().to_string(), sod(e)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn parse_resets(text: &str) -> Result<Vec<Epoch>> {
    let t = parse_table(text, &["mjd", "sod"])?;
    t.rows.iter().map(|(line, r)| epoch_at(*line, &r[0], &r[1])).collect()
}

/// Reads a batch CSV and, if present, its `<stem>.resets.csv` sidecar.
pub fn read_batch(path: &Path) -> Result<BatchSolution> {
    let series = with_path(path, parse_time_diff(&read_text(path)?))?;
    let sidecar = path.with_extension("resets.csv");
    let resets = if sidecar.exists() {
        with_path(&sidecar, parse_resets(&read_text(&sidecar)?))?
    } else {
        Vec::new()
    };
    with_path(path, BatchSolution::new(series, resets))
}

pub fn write_corrections<W: Write>(boundaries: &[Boundary], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["boundary_mjd", "n", "margin"])?;
    for b in boundaries {
        out.write_record(&[format!("{:.6}", b.epoch.mjd_f64()), b.correction.to_string(), format!("{:.4}", b.margin)])?;
    }
    out.flush()?;
    Ok(())
}

/// Attaches the file name to parse and input errors.
pub fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        Error::InvalidInput(msg) => Error::InvalidInput(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_phase_series(path: &Path) -> Result<PhaseSeries> {
    with_path(path, parse_phase_series(&read_text(path)?))
}

pub fn read_time_diff(path: &Path) -> Result<TimeDiffSeries> {
    with_path(path, parse_time_diff(&read_text(path)?))
}

pub fn read_four_phases(path: &Path, plan: &CarrierPlan) -> Result<FourPhaseSet> {
    with_path(path, parse_four_phases(&read_text(path)?, plan))
}

pub fn read_rate_series(path: &Path) -> Result<RateSeries> {
    with_path(path, parse_rate_series(&read_text(path)?))
}

pub fn read_tec_series(path: &Path) -> Result<TecSeries> {
    with_path(path, parse_tec_series(&read_text(path)?))
}

pub fn read_ionex(path: &Path) -> Result<crate::ionex::TecMap> {
    with_path(path, crate::ionex::parse_ionex(&read_text(path)?))
}
