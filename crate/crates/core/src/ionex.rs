//! IONEX 1.0 global ionosphere maps: parsing, interpolation, dumping.
//!
//! Only TEC map blocks are read; RMS and height maps and auxiliary data
//! blocks are skipped. Interpolation is bilinear in latitude/longitude and
//! linear in time between bracketing maps, with no sun-fixed rotation.

use std::fmt::Write as _;
use std::io::Write;

use crate::epoch::Epoch;
use crate::error::{Error, Result};

/// IONEX "no value" marker.
const MISSING: i64 = 9999;
const VALUES_PER_LINE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TecMap {
    pub epochs: Vec<Epoch>,
    /// Latitude nodes (deg), in file order (descending for global maps).
    pub lats: Vec<f64>,
    /// Longitude nodes (deg), ascending.
    pub lons: Vec<f64>,
    /// VTEC (TECU), indexed `[epoch][lat][lon]` in row-major order.
    pub values: Vec<f64>,
    pub exponent: i32,
    pub height_km: f64,
    pub interval_s: f64,
    /// `(epoch, lat, lon)` indices of cells with negative VTEC.
    pub negative_cells: Vec<(usize, usize, usize)>,
}

fn label(line: &str) -> &str {
    line.get(60..).map(str::trim).unwrap_or("")
}

fn field(line: &str, from: usize, to: usize) -> &str {
    let end = to.min(line.len());
    if from >= end {
        return "";
    }
    line.get(from..end).unwrap_or("").trim()
}

fn parse_f(line: &str, from: usize, to: usize, lineno: usize) -> Result<f64> {
    let s = field(line, from, to);
    s.parse()
        .map_err(|_| Error::parse(lineno, format!("expected a number in columns {}-{}, found '{s}'", from + 1, to)))
}

fn parse_i(line: &str, from: usize, to: usize, lineno: usize) -> Result<i64> {
    let s = field(line, from, to);
    s.parse()
        .map_err(|_| Error::parse(lineno, format!("expected an integer in columns {}-{}, found '{s}'", from + 1, to)))
}

fn parse_epoch(line: &str, lineno: usize) -> Result<Epoch> {
    let mut v = [0i64; 6];
    for (k, slot) in v.iter_mut().enumerate() {
        *slot = parse_i(line, 6 * k, 6 * k + 6, lineno)?;
    }
    let [y, mo, d, h, mi, s] = v;
    Epoch::from_civil(y as i32, mo as u32, d as u32, h as u32, mi as u32, s as f64)
        .ok_or_else(|| Error::parse(lineno, "invalid calendar epoch"))
}

/// Three `F6.1` values after two blank columns.
fn parse_grid(line: &str, lineno: usize) -> Result<(f64, f64, f64)> {
    Ok((
        parse_f(line, 2, 8, lineno)?,
        parse_f(line, 8, 14, lineno)?,
        parse_f(line, 14, 20, lineno)?,
    ))
}

fn scale(raw: i64, exponent: i32) -> f64 {
    if exponent < 0 {
        raw as f64 / 10f64.powi(-exponent)
    } else {
        raw as f64 * 10f64.powi(exponent)
    }
}

fn unscale(v: f64, exponent: i32) -> i64 {
    if exponent < 0 {
        (v * 10f64.powi(-exponent)).round() as i64
    } else {
        (v / 10f64.powi(exponent)).round() as i64
    }
}

fn axis(start: f64, end: f64, step: f64, what: &str, lineno: usize) -> Result<Vec<f64>> {
    if step == 0.0 || ((end - start) / step) < -1e-9 {
        return Err(Error::parse(lineno, format!("{what} grid {start} .. {end} step {step} is not monotonic")));
    }
    let count = ((end - start) / step).round() as usize + 1;
    if ((start + (count - 1) as f64 * step) - end).abs() > 1e-6 {
        return Err(Error::parse(lineno, format!("{what} range {start} .. {end} is not a multiple of {step}")));
    }
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

/// Parses an IONEX 1.0 document.
pub fn parse_ionex(text: &str) -> Result<TecMap> {
    let lines: Vec<&str> = text.lines().collect();
    let mut exponent: i32 = -1;
    let mut n_maps: Option<usize> = None;
    let mut interval = 0.0;
    let mut lat_hdr = None;
    let mut lon_hdr = None;
    let mut height_km = 450.0;
    let mut end_of_header = None;
    let mut in_aux = false;

    for (k, line) in lines.iter().enumerate() {
        let lineno = k + 1;
        let lbl = label(line);
        if in_aux {
            if lbl.starts_with("END OF AUX DATA") {
                in_aux = false;
            }
            continue;
        }
        match lbl {
            "IONEX VERSION / TYPE" => {
                let v = field(line, 0, 8);
                if !v.starts_with('1') {
                    return Err(Error::parse(lineno, format!("unsupported IONEX version '{v}'")));
                }
            }
            "INTERVAL" => interval = parse_f(line, 0, 6, lineno)?,
            "# OF MAPS IN FILE" => n_maps = Some(parse_i(line, 0, 6, lineno)? as usize),
            "HGT1 / HGT2 / DHGT" => height_km = parse_grid(line, lineno)?.0,
            "LAT1 / LAT2 / DLAT" => lat_hdr = Some((parse_grid(line, lineno)?, lineno)),
            "LON1 / LON2 / DLON" => lon_hdr = Some((parse_grid(line, lineno)?, lineno)),
            "EXPONENT" => exponent = parse_i(line, 0, 6, lineno)? as i32,
            "END OF HEADER" => {
                end_of_header = Some(k);
                break;
            }
            l if l.starts_with("START OF AUX DATA") => in_aux = true,
            _ => {}
        }
    }
    let header_end = end_of_header.ok_or_else(|| Error::parse(lines.len(), "missing END OF HEADER"))?;
    let ((lat1, lat2, dlat), lat_line) =
        lat_hdr.ok_or_else(|| Error::parse(header_end + 1, "header lacks LAT1 / LAT2 / DLAT"))?;
    let ((lon1, lon2, dlon), lon_line) =
        lon_hdr.ok_or_else(|| Error::parse(header_end + 1, "header lacks LON1 / LON2 / DLON"))?;
    let lats = axis(lat1, lat2, dlat, "latitude", lat_line)?;
    let lons = axis(lon1, lon2, dlon, "longitude", lon_line)?;
    if dlon < 0.0 {
        return Err(Error::parse(lon_line, "longitude grid must be ascending"));
    }
    let header_exponent = exponent;

    let mut epochs = Vec::new();
    let mut values = Vec::new();
    let mut negative_cells = Vec::new();
    let mut k = header_end + 1;
    while k < lines.len() {
        let lineno = k + 1;
        let lbl = label(lines[k]);
        if lbl == "START OF TEC MAP" {
            let (epoch, map, next) = parse_map(&lines, k, &lats, &lons, header_exponent)?;
            let e_idx = epochs.len();
            for (cell, v) in map.iter().enumerate() {
                if *v < 0.0 {
                    negative_cells.push((e_idx, cell / lons.len(), cell % lons.len()));
                }
            }
            epochs.push(epoch);
            values.extend(map);
            k = next;
            continue;
        }
        if lbl == "START OF RMS MAP" || lbl == "START OF HEIGHT MAP" {
            let end = if lbl == "START OF RMS MAP" { "END OF RMS MAP" } else { "END OF HEIGHT MAP" };
            k = (k + 1..lines.len())
                .find(|&j| label(lines[j]) == end)
                .ok_or_else(|| Error::parse(lineno, format!("unterminated block, expected {end}")))?;
        }
        if lbl == "END OF FILE" {
            break;
        }
        k += 1;
    }

    if let Some(n) = n_maps {
        if n != epochs.len() {
            return Err(Error::parse(
                lines.len(),
                format!("header announces {n} maps, file holds {}", epochs.len()),
            ));
        }
    }
    if epochs.windows(2).any(|w| w[1].seconds_since(&w[0]) <= 0.0) {
        return Err(Error::parse(header_end + 1, "map epochs are not strictly increasing"));
    }
    if epochs.is_empty() {
        return Err(Error::parse(lines.len(), "no TEC maps found"));
    }
    Ok(TecMap {
        epochs,
        lats,
        lons,
        values,
        exponent: header_exponent,
        height_km,
        interval_s: interval,
        negative_cells,
    })
}

/// Reads one TEC map block starting at `start`; returns its epoch, values
/// and the index of the line after `END OF TEC MAP`.
fn parse_map(lines: &[&str], start: usize, lats: &[f64], lons: &[f64], mut exponent: i32) -> Result<(Epoch, Vec<f64>, usize)> {
    let mut epoch = None;
    let mut out = Vec::with_capacity(lats.len() * lons.len());
    let mut next_lat = 0usize;
    let mut k = start + 1;
    loop {
        let lineno = k + 1;
        let line = *lines
            .get(k)
            .ok_or_else(|| Error::parse(lineno, "truncated TEC map: missing END OF TEC MAP"))?;
        match label(line) {
            "EPOCH OF CURRENT MAP" => epoch = Some(parse_epoch(line, lineno)?),
            "EXPONENT" => exponent = parse_i(line, 0, 6, lineno)? as i32,
            "LAT/LON1/LON2/DLON/H" => {
                let lat = parse_f(line, 2, 8, lineno)?;
                let lon1 = parse_f(line, 8, 14, lineno)?;
                let lon2 = parse_f(line, 14, 20, lineno)?;
                let dlon = parse_f(line, 20, 26, lineno)?;
                let expected = *lats
                    .get(next_lat)
                    .ok_or_else(|| Error::parse(lineno, format!("unexpected extra latitude row {lat}")))?;
                if (lat - expected).abs() > 1e-6 {
                    return Err(Error::parse(lineno, format!("latitude row {lat} does not match grid node {expected}")));
                }
                let lon_end = *lons.last().unwrap();
                if (lon1 - lons[0]).abs() > 1e-6 || (lon2 - lon_end).abs() > 1e-6 {
                    return Err(Error::parse(lineno, format!("longitude span {lon1} .. {lon2} does not match header")));
                }
                if lons.len() > 1 && (dlon - (lons[1] - lons[0])).abs() > 1e-6 {
                    return Err(Error::parse(lineno, format!("longitude step {dlon} does not match header")));
                }
                let rows = lons.len().div_ceil(VALUES_PER_LINE);
                let mut row = Vec::with_capacity(lons.len());
                for r in 0..rows {
                    let data_no = k + 2 + r;
                    let data = *lines
                        .get(k + 1 + r)
                        .ok_or_else(|| Error::parse(data_no, "truncated TEC map: missing value rows"))?;
                    if !label(data).is_empty() && data.len() > 60 && data[60..].trim().chars().any(|c| c.is_alphabetic()) {
                        return Err(Error::parse(data_no, format!("expected TEC values, found '{}'", label(data))));
                    }
                    let want = (lons.len() - row.len()).min(VALUES_PER_LINE);
                    for c in 0..want {
                        let raw = parse_i(data, 5 * c, 5 * c + 5, data_no)?;
                        if raw == MISSING {
                            return Err(Error::parse(data_no, "missing TEC value (9999) in map"));
                        }
                        row.push(scale(raw, exponent));
                    }
                }
                out.extend(row);
                next_lat += 1;
                k += rows;
            }
            "END OF TEC MAP" => {
                if next_lat != lats.len() {
                    return Err(Error::parse(
                        lineno,
                        format!("TEC map has {next_lat} latitude rows, header grid has {}", lats.len()),
                    ));
                }
                let epoch = epoch.ok_or_else(|| Error::parse(lineno, "TEC map without EPOCH OF CURRENT MAP"))?;
                return Ok((epoch, out, k + 1));
            }
            "START OF TEC MAP" | "END OF FILE" => {
                return Err(Error::parse(lineno, "truncated TEC map: missing END OF TEC MAP"));
            }
            _ => {}
        }
        k += 1;
    }
}

/// Index `i` and weight `w` such that `x = (1−w)·grid[i] + w·grid[i+1]`.
fn bracket(grid: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = grid.len();
    if n == 1 {
        return ((x - grid[0]).abs() < 1e-9).then_some((0, 0.0));
    }
    let ascending = grid[1] > grid[0];
    let (lo, hi) = if ascending { (grid[0], grid[n - 1]) } else { (grid[n - 1], grid[0]) };
    if x < lo - 1e-9 || x > hi + 1e-9 {
        return None;
    }
    let i = if ascending {
        grid.partition_point(|&g| g <= x)
    } else {
        grid.partition_point(|&g| g >= x)
    }
    .clamp(1, n - 1)
        - 1;
    let w = ((x - grid[i]) / (grid[i + 1] - grid[i])).clamp(0.0, 1.0);
    Some((i, w))
}

impl TecMap {
    fn at(&self, e: usize, i: usize, j: usize) -> f64 {
        self.values[(e * self.lats.len() + i) * self.lons.len() + j]
    }

    pub fn value(&self, epoch_idx: usize, lat_idx: usize, lon_idx: usize) -> f64 {
        self.at(epoch_idx, lat_idx, lon_idx)
    }

    fn spatial(&self, e: usize, (i, wi): (usize, f64), (j, wj): (usize, f64)) -> f64 {
        let i1 = (i + 1).min(self.lats.len() - 1);
        let j1 = (j + 1).min(self.lons.len() - 1);
        let lerp = |a: f64, b: f64, w: f64| if w == 0.0 { a } else if w == 1.0 { b } else { a + w * (b - a) };
        let top = lerp(self.at(e, i, j), self.at(e, i, j1), wj);
        let bottom = lerp(self.at(e, i1, j), self.at(e, i1, j1), wj);
        lerp(top, bottom, wi)
    }

    /// VTEC (TECU) at a site and epoch; no extrapolation.
    pub fn interpolate_vtec(&self, lat: f64, lon: f64, epoch: &Epoch) -> Result<f64> {
        let li = bracket(&self.lats, lat)
            .ok_or_else(|| Error::OutOfRange(format!("latitude {lat} outside map grid")))?;
        let lj = bracket(&self.lons, lon)
            .ok_or_else(|| Error::OutOfRange(format!("longitude {lon} outside map grid")))?;
        let first = self.epochs[0];
        let times: Vec<f64> = self.epochs.iter().map(|e| e.seconds_since(&first)).collect();
        let (e, w) = bracket(&times, epoch.seconds_since(&first)).ok_or_else(|| {
            Error::OutOfRange(format!(
                "{epoch} outside map span {} .. {}",
                first,
                self.epochs.last().unwrap()
            ))
        })?;
        let a = self.spatial(e, li, lj);
        if w == 0.0 {
            return Ok(a);
        }
        let b = self.spatial((e + 1).min(self.epochs.len() - 1), li, lj);
        if w == 1.0 {
            return Ok(b);
        }
        Ok(a + w * (b - a))
    }

    /// Writes `mjd,sod,lat_deg,lon_deg,vtec_tecu` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["mjd", "sod", "lat_deg", "lon_deg", "vtec_tecu"])?;
        for (e, epoch) in self.epochs.iter().enumerate() {
            for (i, lat) in self.lats.iter().enumerate() {
                for (j, lon) in self.lons.iter().enumerate() {
                    w.write_record(&[
                        epoch.mjd().to_string(),
                        epoch.sod().to_string(),
                        lat.to_string(),
                        lon.to_string(),
                        self.at(e, i, j).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn civil(e: &Epoch) -> (i32, u32, u32, u32, u32, u32) {
    use chrono::{Datelike, NaiveDate};
    let date = NaiveDate::from_ymd_opt(1858, 11, 17).unwrap() + chrono::Duration::days(e.mjd());
    let s = e.sod().round() as u32;
    (date.year(), date.month(), date.day(), s / 3600, (s / 60) % 60, s % 60)
}

fn header_line(out: &mut String, content: &str, lbl: &str) {
    let _ = writeln!(out, "{content:<60}{lbl:<20}");
}

fn epoch_content(e: &Epoch) -> String {
    let (y, mo, d, h, mi, s) = civil(e);
    format!("{y:6}{mo:6}{d:6}{h:6}{mi:6}{s:6}")
}

/// Serializes a map back to IONEX 1.0 (TEC maps only).
pub fn write_ionex(map: &TecMap) -> String {
    let mut out = String::new();
    header_line(&mut out, &format!("{:>8}{:12}{:<20}{:<20}", "1.0", "", "I", "GPS"), "IONEX VERSION / TYPE");
    header_line(&mut out, &epoch_content(&map.epochs[0]), "EPOCH OF FIRST MAP");
    header_line(&mut out, &epoch_content(map.epochs.last().unwrap()), "EPOCH OF LAST MAP");
    header_line(&mut out, &format!("{:6}", map.interval_s.round() as i64), "INTERVAL");
    header_line(&mut out, &format!("{:6}", map.epochs.len()), "# OF MAPS IN FILE");
    header_line(&mut out, "  NONE", "MAPPING FUNCTION");
    header_line(&mut out, &format!("{:8.1}", 6371.0), "BASE RADIUS");
    header_line(&mut out, &format!("{:6}", 2), "MAP DIMENSION");
    header_line(&mut out, &format!("  {:6.1}{:6.1}{:6.1}", map.height_km, map.height_km, 0.0), "HGT1 / HGT2 / DHGT");
    let dlat = if map.lats.len() > 1 { map.lats[1] - map.lats[0] } else { 0.0 };
    let dlon = if map.lons.len() > 1 { map.lons[1] - map.lons[0] } else { 0.0 };
    header_line(
        &mut out,
        &format!("  {:6.1}{:6.1}{:6.1}", map.lats[0], map.lats.last().unwrap(), dlat),
        "LAT1 / LAT2 / DLAT",
    );
    header_line(
        &mut out,
        &format!("  {:6.1}{:6.1}{:6.1}", map.lons[0], map.lons.last().unwrap(), dlon),
        "LON1 / LON2 / DLON",
    );
    header_line(&mut out, &format!("{:6}", map.exponent), "EXPONENT");
    header_line(&mut out, "", "END OF HEADER");
    for (e, epoch) in map.epochs.iter().enumerate() {
        header_line(&mut out, &format!("{:6}", e + 1), "START OF TEC MAP");
        header_line(&mut out, &epoch_content(epoch), "EPOCH OF CURRENT MAP");
        for (i, lat) in map.lats.iter().enumerate() {
            header_line(
                &mut out,
                &format!("  {:6.1}{:6.1}{:6.1}{:6.1}{:6.1}", lat, map.lons[0], map.lons.last().unwrap(), dlon, map.height_km),
                "LAT/LON1/LON2/DLON/H",
            );
            for chunk in (0..map.lons.len()).collect::<Vec<_>>().chunks(VALUES_PER_LINE) {
                for &j in chunk {
                    let _ = write!(out, "{:5}", unscale(map.at(e, i, j), map.exponent));
                }
                out.push('\n');
            }
        }
        header_line(&mut out, &format!("{:6}", e + 1), "END OF TEC MAP");
    }
    header_line(&mut out, "", "END OF FILE");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two epochs, 3×3 grid, EXPONENT −1.
    pub(crate) fn small_fixture() -> String {
        let mut s = String::new();
        header_line(&mut s, "     1.0            IONOSPHERE MAPS     GPS", "IONEX VERSION / TYPE");
        header_line(&mut s, "  2017     2     1     0     0     0", "EPOCH OF FIRST MAP");
        header_line(&mut s, "  2017     2     1     2     0     0", "EPOCH OF LAST MAP");
        header_line(&mut s, "  7200", "INTERVAL");
        header_line(&mut s, "     2", "# OF MAPS IN FILE");
        header_line(&mut s, "  TEC values in 0.1 TECU", "COMMENT");
        header_line(&mut s, "   450.0 450.0   0.0", "HGT1 / HGT2 / DHGT");
        header_line(&mut s, "    40.0  30.0  -5.0", "LAT1 / LAT2 / DLAT");
        header_line(&mut s, "   120.0 130.0   5.0", "LON1 / LON2 / DLON");
        header_line(&mut s, "    -1", "EXPONENT");
        header_line(&mut s, "", "END OF HEADER");
        let rows = [
            [[55, 100, 200], [100, 100, 200], [300, 300, 300]],
            [[155, 300, 400], [300, 300, 400], [500, 500, 500]],
        ];
        for (e, map) in rows.iter().enumerate() {
            header_line(&mut s, &format!("{:6}", e + 1), "START OF TEC MAP");
            header_line(&mut s, &format!("  2017     2     1{:6}     0     0", 2 * e), "EPOCH OF CURRENT MAP");
            for (i, row) in map.iter().enumerate() {
                header_line(&mut s, &format!("  {:6.1} 120.0 130.0   5.0 450.0", 40.0 - 5.0 * i as f64), "LAT/LON1/LON2/DLON/H");
                s.push_str(&row.iter().map(|v| format!("{v:5}")).collect::<String>());
                s.push('\n');
            }
            header_line(&mut s, &format!("{:6}", e + 1), "END OF TEC MAP");
        }
        header_line(&mut s, "", "END OF FILE");
        s
    }

    #[test]
    fn parses_small_fixture() {
        let m = parse_ionex(&small_fixture()).unwrap();
        assert_eq!(m.epochs.len(), 2);
        assert_eq!(m.lats, vec![40.0, 35.0, 30.0]);
        assert_eq!(m.lons, vec![120.0, 125.0, 130.0]);
        assert_eq!(m.values.len(), 18);
        assert_eq!(m.value(0, 0, 0), 5.5);
        assert_eq!(m.value(1, 2, 2), 50.0);
        assert_eq!(m.interval_s, 7200.0);
        assert_eq!(m.epochs[1].seconds_since(&m.epochs[0]), 7200.0);
        assert!(m.negative_cells.is_empty());
    }

    #[test]
    fn interpolation_rules() {
        let m = parse_ionex(&small_fixture()).unwrap();
        let e0 = m.epochs[0];
        // node
        assert_eq!(m.interpolate_vtec(35.0, 125.0, &e0).unwrap(), 10.0);
        // cell with corners (10, 10, 20, 20) at its center
        assert_eq!(m.interpolate_vtec(37.5, 127.5, &e0).unwrap(), 15.0);
        // node values 10 and 30 halfway between maps
        assert_eq!(m.interpolate_vtec(35.0, 125.0, &e0.add_seconds(3600.0)).unwrap(), 20.0);
        assert!(m.interpolate_vtec(45.0, 125.0, &e0).is_err());
        assert!(m.interpolate_vtec(35.0, 131.0, &e0).is_err());
        assert!(m.interpolate_vtec(35.0, 125.0, &e0.add_seconds(7201.0)).is_err());
    }

    #[test]
    fn missing_end_of_header() {
        let text = small_fixture().replace("END OF HEADER", "COMMENT");
        match parse_ionex(&text) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("END OF HEADER")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grid_label_mismatch_names_line() {
        let text = small_fixture().replacen("    35.0 120.0 130.0", "    36.0 120.0 130.0", 1);
        match parse_ionex(&text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 16);
                assert!(msg.contains("36"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_map() {
        let text = small_fixture();
        let cut = text.rfind("     2                                                      END OF TEC MAP").unwrap();
        match parse_ionex(&text[..cut]) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("truncated"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn map_count_must_match_header() {
        let text = small_fixture().replace("     2                                                      # OF MAPS", "     3                                                      # OF MAPS");
        assert!(matches!(parse_ionex(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn negative_cells_are_flagged() {
        let text = small_fixture().replacen("   55  100  200", "  -55  100  200", 1);
        let m = parse_ionex(&text).unwrap();
        assert_eq!(m.value(0, 0, 0), -5.5);
        assert_eq!(m.negative_cells, vec![(0, 0, 0)]);
    }

    #[test]
    fn write_then_parse_is_identical() {
        let m = parse_ionex(&small_fixture()).unwrap();
        let again = parse_ionex(&write_ionex(&m)).unwrap();
        assert_eq!(m, again);
    }
}
