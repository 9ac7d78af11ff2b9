//! File formats: point lists, genomic intervals, curves and benchmark reports.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimateCurve;
use crate::metrics::{mean, ScenarioResult};
use crate::simulate::ObservationSet;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    write(&mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn parse_finite(path: &Path, line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("not a number: {:?}", field.trim())))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value {v}")));
    }
    Ok(v)
}

/// Non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// One value per row. A non-numeric first row is taken as a header.
pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (k, (line, row)) in content_lines(&text).enumerate() {
        if k == 0 && row.parse::<f64>().is_err() {
            continue;
        }
        out.push(parse_finite(path, line, row)?);
    }
    if out.is_empty() && text.trim().is_empty() {
        return Err(Error::EmptyInput(format!("{}: no rows", path.display())));
    }
    Ok(out)
}

pub fn write_points_csv(points: &[f64], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), |w| {
        writeln!(w, "y")?;
        for y in points {
            writeln!(w, "{y:.16e}")?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub chrom: Option<String>,
    pub start: f64,
    pub end: f64,
}

impl IntervalRecord {
    pub fn new(chrom: Option<String>, start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || start < 0.0 {
            return Err(Error::param("interval", format!("bad bounds [{start}, {end}]")));
        }
        if end <= start {
            return Err(Error::param("interval", format!("end {end} must exceed start {start}")));
        }
        Ok(IntervalRecord { chrom, start, end })
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

/// Reads `chrom,start,end` or `start,end` rows, tab- or comma-separated.
/// Extra tab-separated columns (BED) are ignored; starts are used as given.
/// Lines starting with `#`, `track` or `browser` are skipped, as is a
/// header row whose start column is not numeric.
pub fn read_intervals(path: impl AsRef<Path>) -> Result<Vec<IntervalRecord>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut out = Vec::new();
    let mut first = true;
    for (line, row) in content_lines(&text) {
        if row.starts_with('#') || row.starts_with("track") || row.starts_with("browser") {
            continue;
        }
        let fields: Vec<&str> = if row.contains('\t') {
            row.split('\t').collect()
        } else {
            row.split(',').collect()
        };
        let (chrom, s, e) = match fields.len() {
            2 => (None, fields[0], fields[1]),
            n if n >= 3 => (Some(fields[0].trim().to_string()), fields[1], fields[2]),
            _ => return Err(parse_err(path, line, "expected `start,end` or `chrom,start,end`")),
        };
        let header = first && s.trim().parse::<f64>().is_err();
        first = false;
        if header {
            continue;
        }
        let start = parse_finite(path, line, s)?;
        let end = parse_finite(path, line, e)?;
        let rec = IntervalRecord::new(chrom, start, end).map_err(|e| parse_err(path, line, e.to_string()))?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!("{}: no intervals", path.display())));
    }
    Ok(out)
}

/// Splits records by chromosome, in order of first appearance.
pub fn group_by_chrom(records: &[IntervalRecord]) -> Vec<(Option<String>, Vec<IntervalRecord>)> {
    let mut groups: Vec<(Option<String>, Vec<IntervalRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(c, _)| c == &r.chrom) {
            Some((_, v)) => v.push(r.clone()),
            None => groups.push((r.chrom.clone(), vec![r.clone()])),
        }
    }
    groups
}

/// How the noise half-width is derived from the mean interval width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WidthConvention {
    /// `a` is half the mean width, so `[Y - a, Y + a]` spans an average interval.
    #[default]
    Half,
    /// `a` is the mean width itself.
    Full,
}

/// Midpoints as observations and `a = mean(end - start) / 2`.
pub fn intervals_to_observations(records: &[IntervalRecord], t_end: f64, n: u64) -> Result<(ObservationSet, f64)> {
    intervals_to_observations_with(records, t_end, n, WidthConvention::Half, 1.0)
}

/// As [`intervals_to_observations`], dividing coordinates by `scale` first.
pub fn intervals_to_observations_with(
    records: &[IntervalRecord],
    t_end: f64,
    n: u64,
    convention: WidthConvention,
    scale: f64,
) -> Result<(ObservationSet, f64)> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no intervals".into()));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::param("scale", format!("must be positive, got {scale}")));
    }
    if let Some(bad) = records.iter().find(|r| !(r.end > r.start)) {
        return Err(Error::param(
            "interval",
            format!("nonpositive width in [{}, {}]", bad.start, bad.end),
        ));
    }
    let widths: Vec<f64> = records.iter().map(|r| r.width() / scale).collect();
    let a = match convention {
        WidthConvention::Half => mean(&widths) / 2.0,
        WidthConvention::Full => mean(&widths),
    };
    let points = records.iter().map(|r| r.midpoint() / scale).collect();
    Ok((ObservationSet::new(points, n, a, t_end)?, a))
}

/// Two columns `x,value`, 17 significant digits, so reading back is exact.
pub fn write_curve_csv(curve: &EstimateCurve, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), |w| {
        writeln!(w, "x,value")?;
        for (j, v) in curve.values().iter().enumerate() {
            writeln!(w, "{:.16e},{:.16e}", curve.grid().x(j), v)?;
        }
        Ok(())
    })
}

/// `(x, value)` rows of a curve file.
pub fn read_curve_csv(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (k, (line, row)) in content_lines(&text).enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 2 {
            return Err(parse_err(path, line, "expected two columns `x,value`"));
        }
        if k == 0 && fields[0].trim().parse::<f64>().is_err() {
            continue;
        }
        out.push((
            parse_finite(path, line, fields[0])?,
            parse_finite(path, line, fields[1])?,
        ));
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!("{}: no curve rows", path.display())));
    }
    Ok(out)
}

pub fn write_report_json(report: &[ScenarioResult], path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    write_text(path.as_ref(), |w| writeln!(w, "{text}"))
}

pub fn read_report_json(path: impl AsRef<Path>) -> Result<Vec<ScenarioResult>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::UniformGrid;

    fn temp_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn points_examples() {
        assert_eq!(read_points_csv(temp_file("0.1\n0.2\n").path()).unwrap(), vec![0.1, 0.2]);
        assert_eq!(read_points_csv(temp_file("y\n0.1\n").path()).unwrap(), vec![0.1]);
        let err = read_points_csv(temp_file("y\n0.1\nabc\n").path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(matches!(
            read_points_csv(temp_file("0.1\nNaN\n").path()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            read_points_csv(temp_file("").path()),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            read_points_csv("/nonexistent/points.csv"),
            Err(Error::Io { .. })
        ));
        assert_eq!(read_points_csv(temp_file("y\n").path()).unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn interval_examples() {
        let rec = |s, e| IntervalRecord::new(None, s, e).unwrap();
        let (obs, a) = intervals_to_observations(&[rec(0.0, 2.0)], 10.0, 1).unwrap();
        assert_eq!(obs.points(), &[1.0]);
        assert_eq!(a, 1.0);
        let (_, a) = intervals_to_observations(&[rec(0.0, 2.0), rec(2.0, 6.0)], 10.0, 1).unwrap();
        assert_eq!(a, 1.5);
        let (_, a) =
            intervals_to_observations_with(&[rec(0.0, 2.0), rec(2.0, 6.0)], 10.0, 1, WidthConvention::Full, 1.0)
                .unwrap();
        assert_eq!(a, 3.0);
        assert!(matches!(
            intervals_to_observations(&[], 1.0, 1),
            Err(Error::EmptyInput(_))
        ));
        assert!(IntervalRecord::new(None, 2.0, 2.0).is_err());
    }

    #[test]
    fn interval_file_formats() {
        let bed = "track name=x\nchr1\t100\t200\tpeak1\nchr1\t300\t500\nchr2\t0\t10\n";
        let recs = read_intervals(temp_file(bed).path()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0], IntervalRecord::new(Some("chr1".into()), 100.0, 200.0).unwrap());
        let groups = group_by_chrom(&recs);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].1.len(), 2);
        let csv = "start,end\n0,2\n2,6\n";
        let recs = read_intervals(temp_file(csv).path()).unwrap();
        assert_eq!(recs[1].chrom, None);
        assert_eq!(recs[1].width(), 4.0);
        let err = read_intervals(temp_file("chr1,5,3\n").path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = read_intervals(temp_file("chr1,1,2\nchr1,x,3\n").path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn curve_round_trip() {
        let grid = UniformGrid::new(1.0, 64).unwrap();
        let c = EstimateCurve::tabulate(grid, |x| (7.0 * x).sin() / 3.0, "t");
        let f = tempfile::NamedTempFile::new().unwrap();
        write_curve_csv(&c, f.path()).unwrap();
        let rows = read_curve_csv(f.path()).unwrap();
        assert_eq!(rows.len(), 64);
        for (j, (x, v)) in rows.iter().enumerate() {
            assert_eq!(*x, c.grid().x(j));
            assert_eq!(*v, c.values()[j]);
        }
    }

    #[test]
    fn points_round_trip() {
        let pts = vec![0.1, -3.5e-9, 1.0 / 3.0, 12345.678];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_points_csv(&pts, f.path()).unwrap();
        assert_eq!(read_points_csv(f.path()).unwrap(), pts);
    }
}
