//! Spectra tables in CSV.
//!
//! ```text
//! wavenumber,<condition>:<replicate>:<location>,...
//! 600,1021.5,998.25,...
//! ```
//!
//! One row per grid point, one column per spectrum. Rows and columns in
//! error messages are 1-based and count the header as row 1.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{DivaError, Result};
use crate::spectrum::{
    DerivativeSpectrum, Spectrum, SpectrumMeta, WavenumberGrid, GRID_UNIFORMITY_TOL,
};

const GRID_HEADER: &str = "wavenumber";

fn csv_err(row: usize, column: usize, message: impl Into<String>) -> DivaError {
    DivaError::Csv {
        row,
        column,
        message: message.into(),
    }
}

/// Parses a `<condition>:<replicate>:<location>` column label. The
/// condition may itself contain colons.
pub fn parse_label(label: &str) -> std::result::Result<SpectrumMeta, String> {
    let mut parts = label.rsplitn(3, ':');
    let (Some(loc), Some(rep), Some(cond)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(format!(
            "header {label:?} is not <condition>:<replicate>:<location>"
        ));
    };
    let rep: u32 = rep
        .parse()
        .map_err(|_| format!("replicate {rep:?} in {label:?} is not a non-negative integer"))?;
    let loc: u32 = loc
        .parse()
        .map_err(|_| format!("location {loc:?} in {label:?} is not a non-negative integer"))?;
    SpectrumMeta::new(cond, rep, loc).map_err(|e| e.to_string())
}

pub fn format_label(meta: &SpectrumMeta) -> String {
    format!(
        "{}:{}:{}",
        meta.condition, meta.replicate_id, meta.location_id
    )
}

/// A parsed table: shared grid plus one labelled column per spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraTable {
    pub grid: WavenumberGrid,
    pub columns: Vec<(SpectrumMeta, Vec<f64>)>,
}

pub fn read_table<R: Read>(reader: R) -> Result<SpectraTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_err(1, 1, e.to_string()))?,
        None => return Err(csv_err(1, 1, "empty file")),
    };
    if header.get(0) != Some(GRID_HEADER) {
        return Err(csv_err(
            1,
            1,
            format!("first header must be {GRID_HEADER:?}"),
        ));
    }
    if header.len() < 2 {
        return Err(csv_err(1, 2, "no spectrum columns"));
    }
    let mut metas: Vec<SpectrumMeta> = Vec::with_capacity(header.len() - 1);
    for (c, label) in header.iter().enumerate().skip(1) {
        if let Some(prev) = header.iter().take(c).position(|h| h == label) {
            return Err(csv_err(
                1,
                c + 1,
                format!(
                    "duplicate header {label:?} (first seen in column {})",
                    prev + 1
                ),
            ));
        }
        metas.push(parse_label(label).map_err(|m| csv_err(1, c + 1, m))?);
    }

    let width = header.len();
    let mut grid = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); width - 1];
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| csv_err(row, 1, e.to_string()))?;
        if rec.len() != width {
            return Err(csv_err(
                row,
                rec.len().min(width) + 1,
                format!("expected {width} cells, found {}", rec.len()),
            ));
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| csv_err(row, c + 1, format!("cell {cell:?} is not a number")))?;
            if !v.is_finite() {
                return Err(csv_err(row, c + 1, format!("cell {cell:?} is not finite")));
            }
            if c == 0 {
                if let Some(&prev) = grid.last() {
                    if v <= prev {
                        return Err(csv_err(
                            row,
                            1,
                            format!("wavenumber {v} does not increase past {prev}"),
                        ));
                    }
                }
                grid.push(v);
            } else {
                columns[c - 1].push(v);
            }
        }
    }
    check_uniform(&grid)?;
    let grid = WavenumberGrid::new(grid).map_err(|e| csv_err(2, 1, e.to_string()))?;
    Ok(SpectraTable {
        grid,
        columns: metas.into_iter().zip(columns).collect(),
    })
}

fn check_uniform(grid: &[f64]) -> Result<()> {
    if grid.len() < 3 {
        return Err(csv_err(
            grid.len() + 2,
            1,
            format!("need at least 3 rows, found {}", grid.len()),
        ));
    }
    let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if let Some(i) = grid
        .windows(2)
        .position(|w| ((w[1] - w[0]) - step).abs() > GRID_UNIFORMITY_TOL * step)
    {
        return Err(csv_err(i + 3, 1, "wavenumber spacing is not uniform"));
    }
    Ok(())
}

pub fn read_spectra<R: Read>(reader: R) -> Result<Vec<Spectrum>> {
    let table = read_table(reader)?;
    table
        .columns
        .into_iter()
        .map(|(meta, values)| Spectrum::new(table.grid.clone(), values, meta))
        .collect()
}

pub fn load_csv(path: &Path) -> Result<Vec<Spectrum>> {
    let file = std::fs::File::open(path).map_err(|e| DivaError::io(path, e))?;
    read_spectra(std::io::BufReader::new(file))
}

/// Writes columns sharing `grid`. Values are printed in shortest
/// round-trip form, so reading the file back is lossless.
pub fn write_table<W: Write>(
    writer: W,
    grid: &WavenumberGrid,
    columns: &[(&SpectrumMeta, &[f64])],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| csv_err(0, 0, e.to_string());
    let mut header = vec![GRID_HEADER.to_string()];
    header.extend(columns.iter().map(|(m, _)| format_label(m)));
    w.write_record(&header).map_err(to_err)?;
    let mut line = Vec::with_capacity(columns.len() + 1);
    for (i, v) in grid.values().iter().enumerate() {
        line.clear();
        line.push(v.to_string());
        line.extend(columns.iter().map(|(_, vals)| vals[i].to_string()));
        w.write_record(&line).map_err(to_err)?;
    }
    w.flush().map_err(|e| csv_err(0, 0, e.to_string()))?;
    Ok(())
}

fn shared_grid<'a>(
    mut grids: impl Iterator<Item = &'a WavenumberGrid>,
) -> Result<&'a WavenumberGrid> {
    let first = grids
        .next()
        .ok_or_else(|| DivaError::InvalidSpectrum("nothing to write".into()))?;
    if grids.any(|g| g != first) {
        return Err(DivaError::GridMismatch(
            "spectra in one table must share a grid".into(),
        ));
    }
    Ok(first)
}

pub fn write_spectra<W: Write>(writer: W, ds: &[Spectrum]) -> Result<()> {
    let grid = shared_grid(ds.iter().map(Spectrum::grid))?;
    let cols: Vec<_> = ds.iter().map(|s| (s.meta(), s.intensities())).collect();
    write_table(writer, grid, &cols)
}

pub fn write_derivatives<W: Write>(writer: W, ds: &[DerivativeSpectrum]) -> Result<()> {
    let grid = shared_grid(ds.iter().map(DerivativeSpectrum::grid))?;
    let cols: Vec<_> = ds.iter().map(|s| (s.meta(), s.values())).collect();
    write_table(writer, grid, &cols)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| DivaError::io(path, e))?;
    Ok(std::io::BufWriter::new(file))
}

pub fn save_csv(path: &Path, ds: &[Spectrum]) -> Result<()> {
    write_spectra(create(path)?, ds)
}

pub fn save_derivatives_csv(path: &Path, ds: &[DerivativeSpectrum]) -> Result<()> {
    write_derivatives(create(path)?, ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_at(text: &str) -> (usize, usize) {
        match read_spectra(text.as_bytes()) {
            Err(DivaError::Csv { row, column, .. }) => (row, column),
            other => panic!("expected csv error, got {other:?}"),
        }
    }

    #[test]
    fn reads_two_column_file() {
        let ds = read_spectra("wavenumber,shade:1:2\n600,1\n601,2.5\n602,3\n".as_bytes()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].len(), 3);
        assert_eq!(ds[0].intensities(), &[1.0, 2.5, 3.0]);
        assert_eq!(ds[0].meta(), &SpectrumMeta::new("shade", 1, 2).unwrap());
    }

    #[test]
    fn labels() {
        assert_eq!(parse_label("a:b:3:4").unwrap().condition, "a:b");
        assert!(parse_label("shade:1").is_err());
        assert!(parse_label(":1:2").is_err());
        assert!(parse_label("x:-1:2").is_err());
        let m = SpectrumMeta::new("deep shade", 7, 0).unwrap();
        assert_eq!(parse_label(&format_label(&m)).unwrap(), m);
    }

    #[test]
    fn error_coordinates() {
        assert_eq!(err_at(""), (1, 1));
        assert_eq!(err_at("wn,a:1:1\n1,2\n2,3\n3,4\n"), (1, 1));
        assert_eq!(
            err_at("wavenumber,a:1:1,a:1:1\n1,2,2\n2,3,3\n3,4,4\n"),
            (1, 3)
        );
        assert_eq!(
            err_at("wavenumber,a:1:1,b:1:1\n1,2,2\n2,3\n3,4,4\n"),
            (3, 3)
        );
        assert_eq!(err_at("wavenumber,a:1:1\n1,2\n2,x\n3,4\n"), (3, 2));
        assert_eq!(err_at("wavenumber,a:1:1\n1,2\n2,NaN\n3,4\n"), (3, 2));
        assert_eq!(err_at("wavenumber,a:1:1\n1,2\n3,3\n2,4\n"), (4, 1));
        assert_eq!(err_at("wavenumber,a:1:1\n1,2\n2,3\n4,4\n"), (3, 1));
        assert_eq!(err_at("wavenumber,a:1:1\n1,2\n2,3\n"), (4, 1));
        assert_eq!(err_at("wavenumber,a\n1,2\n2,3\n3,4\n"), (1, 2));
    }

    #[test]
    fn round_trip_is_exact() {
        let grid = WavenumberGrid::uniform(600.0, 0.5, 5).unwrap();
        let ds = vec![
            Spectrum::new(
                grid.clone(),
                vec![0.1, 1.0 / 3.0, -2e-300, 5.0, 1e17],
                SpectrumMeta::new("a", 1, 1).unwrap(),
            )
            .unwrap(),
            Spectrum::new(
                grid,
                vec![1.0, 2.0, 3.0, 4.0, std::f64::consts::PI],
                SpectrumMeta::new("b:x", 2, 9).unwrap(),
            )
            .unwrap(),
        ];
        let mut buf = Vec::new();
        write_spectra(&mut buf, &ds).unwrap();
        assert_eq!(read_spectra(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn writing_needs_a_shared_grid() {
        let a = Spectrum::new(
            WavenumberGrid::uniform(0.0, 1.0, 3).unwrap(),
            vec![1.0; 3],
            SpectrumMeta::new("a", 0, 0).unwrap(),
        )
        .unwrap();
        let b = Spectrum::new(
            WavenumberGrid::uniform(1.0, 1.0, 3).unwrap(),
            vec![1.0; 3],
            SpectrumMeta::new("b", 0, 0).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            write_spectra(Vec::new(), &[a, b]),
            Err(DivaError::GridMismatch(_))
        ));
        assert!(write_spectra(Vec::new(), &[]).is_err());
    }
}
