use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;

use anyhow::{bail, Context, Result};
use stixelflow::model::table::read_predictions;
use stixelflow::model::PredictionRow;

use crate::fit::write_file;
use crate::RenderArgs;

/// Gray level of an occurrence probability, rounding half up.
pub fn gray(occurrence: f64) -> u8 {
    (occurrence.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Plain PGM of one week: one pixel per distinct (lat, lon), rows north to
/// south, columns west to east, absent predictions black.
pub fn render_pgm(rows: &[PredictionRow], week: u32) -> Result<String> {
    let rows: Vec<&PredictionRow> = rows.iter().filter(|r| r.week.get() == week).collect();
    if rows.is_empty() {
        bail!("week {week} is absent from the prediction file");
    }
    let mut lats: Vec<f64> = rows.iter().map(|r| r.point.lat).collect();
    let mut lons: Vec<f64> = rows.iter().map(|r| r.point.lon).collect();
    lats.sort_by(|a, b| b.total_cmp(a));
    lats.dedup();
    lons.sort_by(f64::total_cmp);
    lons.dedup();
    let mut pixels = vec![0u8; lats.len() * lons.len()];
    for r in &rows {
        let i = lats.iter().position(|&v| v == r.point.lat).expect("lat listed");
        let j = lons.binary_search_by(|v| v.total_cmp(&r.point.lon)).expect("lon listed");
        pixels[i * lons.len() + j] = r.prediction.occurrence.map_or(0, gray);
    }
    let mut out = format!("P2\n{} {}\n255\n", lons.len(), lats.len());
    for row in pixels.chunks(lons.len()) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    Ok(out)
}

pub fn render(args: &RenderArgs) -> Result<()> {
    let file = File::open(&args.preds).with_context(|| format!("reading {}", args.preds.display()))?;
    let rows = read_predictions(BufReader::new(file)).with_context(|| format!("{}", args.preds.display()))?;
    let pgm = render_pgm(&rows, args.week)?;
    write_file(&args.out, pgm.as_bytes())?;
    println!("wrote {}", args.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use stixelflow::domain::{GeoPoint, WeekIndex};
    use stixelflow::model::EnsemblePrediction;

    fn row(lat: f64, lon: f64, week: i64, occ: Option<f64>) -> PredictionRow {
        let prediction = match occ {
            Some(o) => EnsemblePrediction::average(&[(o, 1.0)]),
            None => EnsemblePrediction::absent(),
        };
        PredictionRow { point: GeoPoint { lat, lon }, week: WeekIndex::new(week).unwrap(), prediction }
    }

    #[test]
    fn endpoints_and_half() {
        let rows = [row(0.0, 1.0, 3, Some(1.0)), row(0.0, 0.0, 3, Some(0.0))];
        assert_eq!(render_pgm(&rows, 3).unwrap(), "P2\n2 1\n255\n0 255\n");
        assert_eq!(gray(0.5), 128);
    }

    #[test]
    fn north_row_first_and_absent_black() {
        let rows = [row(-5.0, 0.0, 1, Some(1.0)), row(5.0, 0.0, 1, None)];
        assert_eq!(render_pgm(&rows, 1).unwrap(), "P2\n1 2\n255\n0\n255\n");
        assert!(render_pgm(&rows, 2).is_err());
    }
}
