#![allow(dead_code)]

/// Pads `content` to 60 columns and appends the label.
pub fn labelled(s: &mut String, content: &str, label: &str) {
    s.push_str(&format!("{content:<60}{label}\n"));
}

/// TEC in 0.1 TECU at a grid node, smooth in space and time.
pub fn node_tec(map: usize, lat: f64, lon: f64) -> i64 {
    let phase = (lon + 30.0 * map as f64).to_radians();
    (200.0 + 150.0 * lat.to_radians().cos() * phase.cos()).round() as i64
}

/// A global map in the layout of the CODE final product: 87.5..-87.5 by
/// 2.5 deg latitude, -180..180 by 5 deg longitude, 2-hourly maps,
/// EXPONENT -1, an AUX block in the header and RMS maps after the TEC maps.
pub fn code_layout(maps: usize) -> String {
    let mut s = String::new();
    labelled(&mut s, "     1.0            IONOSPHERE MAPS     GNSS", "IONEX VERSION / TYPE");
    labelled(&mut s, "CODE'S GLOBAL IONOSPHERE MAPS", "DESCRIPTION");
    labelled(&mut s, "  2017     2     1     0     0     0", "EPOCH OF FIRST MAP");
    let last_h = 2 * (maps - 1);
    labelled(
        &mut s,
        &format!("  2017     2{:6}{:6}     0     0", 1 + last_h / 24, last_h % 24),
        "EPOCH OF LAST MAP",
    );
    labelled(&mut s, "  7200", "INTERVAL");
    labelled(&mut s, &format!("{maps:6}"), "# OF MAPS IN FILE");
    labelled(&mut s, "  COSZ", "MAPPING FUNCTION");
    labelled(&mut s, "    10.0", "ELEVATION CUTOFF");
    labelled(&mut s, "  6371.0", "BASE RADIUS");
    labelled(&mut s, "     2", "MAP DIMENSION");
    labelled(&mut s, "   450.0 450.0   0.0", "HGT1 / HGT2 / DHGT");
    labelled(&mut s, "    87.5 -87.5  -2.5", "LAT1 / LAT2 / DLAT");
    labelled(&mut s, "  -180.0 180.0   5.0", "LON1 / LON2 / DLON");
    labelled(&mut s, "    -1", "EXPONENT");
    labelled(&mut s, "TEC/RMS values in 0.1 TECU; 9999, if no value available", "COMMENT");
    labelled(&mut s, "DIFFERENTIAL CODE BIASES", "START OF AUX DATA");
    labelled(&mut s, "   G01    -1.234     0.012", "PRN / BIAS / RMS");
    labelled(&mut s, "DIFFERENTIAL CODE BIASES", "END OF AUX DATA");
    labelled(&mut s, "", "END OF HEADER");

    let lats: Vec<f64> = (0..71).map(|i| 87.5 - 2.5 * i as f64).collect();
    let lons: Vec<f64> = (0..73).map(|j| -180.0 + 5.0 * j as f64).collect();
    for (kind, start, end) in [("TEC", "START OF TEC MAP", "END OF TEC MAP"), ("RMS", "START OF RMS MAP", "END OF RMS MAP")] {
        for e in 0..maps {
            let h = 2 * e;
            labelled(&mut s, &format!("{:6}", e + 1), start);
            labelled(
                &mut s,
                &format!("  2017     2{:6}{:6}     0     0", 1 + h / 24, h % 24),
                "EPOCH OF CURRENT MAP",
            );
            for &lat in &lats {
                labelled(&mut s, &format!("  {lat:6.1}-180.0 180.0   5.0 450.0"), "LAT/LON1/LON2/DLON/H");
                let vals: Vec<i64> = lons
                    .iter()
                    .map(|&lon| if kind == "TEC" { node_tec(e, lat, lon) } else { 9999 })
                    .collect();
                for chunk in vals.chunks(16) {
                    s.push_str(&chunk.iter().map(|v| format!("{v:5}")).collect::<String>());
                    s.push('\n');
                }
            }
            labelled(&mut s, &format!("{:6}", e + 1), end);
        }
    }
    labelled(&mut s, "", "END OF FILE");
    s
}
