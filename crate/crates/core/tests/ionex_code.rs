mod common;

use std::sync::OnceLock;

use proptest::prelude::*;
use sattf::ionex::{parse_ionex, write_ionex, TecMap};
use sattf::{Epoch, Error};

fn map() -> &'static TecMap {
    static MAP: OnceLock<TecMap> = OnceLock::new();
    MAP.get_or_init(|| parse_ionex(&common::code_layout(13)).unwrap())
}

#[test]
fn code_layout_dimensions() {
    let m = map();
    assert_eq!(m.lats.len(), 71);
    assert_eq!(m.lons.len(), 73);
    assert_eq!(m.epochs.len(), 13);
    assert_eq!(m.values.len(), 13 * 71 * 73);
    assert_eq!(m.interval_s, 7200.0);
    assert_eq!(m.exponent, -1);
    assert_eq!(m.lats[0], 87.5);
    assert_eq!(*m.lons.last().unwrap(), 180.0);
    assert_eq!(m.epochs[12], Epoch::new(57786, 0.0));
    // the RMS maps, full of 9999, were skipped
    assert!(m.values.iter().all(|v| *v < 999.0));
    assert_eq!(m.value(3, 10, 20), common::node_tec(3, m.lats[10], m.lons[20]) as f64 / 10.0);
}

#[test]
fn round_trip_is_value_identical() {
    let m = map();
    let back = parse_ionex(&write_ionex(m)).unwrap();
    assert_eq!(back.values, m.values);
    assert_eq!(back.epochs, m.epochs);
    assert_eq!((back.lats.clone(), back.lons.clone()), (m.lats.clone(), m.lons.clone()));
}

#[test]
fn fill_value_inside_tec_map_is_rejected() {
    let text = common::code_layout(2);
    let pos = text.find("START OF TEC MAP").unwrap();
    let row = pos + text[pos..].find("LAT/LON1/LON2/DLON/H\n").unwrap() + "LAT/LON1/LON2/DLON/H\n".len();
    let mut bad = text.clone();
    bad.replace_range(row..row + 5, " 9999");
    let line = bad[..row].lines().count() + 1;
    match parse_ionex(&bad) {
        Err(Error::Parse { line: l, .. }) => assert_eq!(l, line),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn interpolation_within_cell_corners(lat in -87.5f64..87.5, lon in -180.0f64..180.0, t in 0.0f64..86_400.0) {
        let m = map();
        let e = Epoch::new(57785, 0.0).add_seconds(t);
        let v = m.interpolate_vtec(lat, lon, &e).unwrap();
        let i = m.lats.iter().rposition(|&l| l >= lat).unwrap().min(m.lats.len() - 2);
        let j = m.lons.iter().rposition(|&l| l <= lon).unwrap().min(m.lons.len() - 2);
        let k = ((t / 7200.0).floor() as usize).min(m.epochs.len() - 2);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for ek in [k, k + 1] {
            for di in 0..2 {
                for dj in 0..2 {
                    let c = m.value(ek, i + di, j + dj);
                    lo = lo.min(c);
                    hi = hi.max(c);
                }
            }
        }
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{} outside [{}, {}]", v, lo, hi);
    }

    #[test]
    fn exact_at_nodes(e in 0usize..13, i in 0usize..71, j in 0usize..73) {
        let m = map();
        prop_assert_eq!(m.interpolate_vtec(m.lats[i], m.lons[j], &m.epochs[e]).unwrap(), m.value(e, i, j));
    }
}
