//! Flat-file formats: CSV with `# key=value` metadata lines, and JSON.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the values bit for bit.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ergodicity::MixingCurve;
use crate::fgn::HurstIndex;
use crate::spectrum::{SpectrumMethod, StructureFactorCurve};
use crate::stats::RadialVarianceTable;

pub type Metadata = BTreeMap<String, String>;

/// Parsed CSV: metadata, column names, and raw cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvDocument {
    pub meta: Metadata,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn write_metadata<W: Write>(w: &mut W, meta: &Metadata) -> Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::with_capacity(1 << 20, File::create(path)?))
}

/// Reads `# key=value` lines, an optional header line (when `header` is
/// true), and comma-separated rows. Blank lines are skipped.
pub fn read_csv<R: Read>(reader: R, header: bool) -> Result<CsvDocument> {
    let mut doc = CsvDocument::default();
    let mut need_header = header;
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                doc.meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        if need_header {
            doc.header = cells;
            need_header = false;
            continue;
        }
        if !doc.header.is_empty() && cells.len() != doc.header.len() {
            return Err(Error::Parse(format!(
                "line {}: expected {} columns, found {}",
                lineno + 1,
                doc.header.len(),
                cells.len()
            )));
        }
        doc.rows.push(cells);
    }
    Ok(doc)
}

pub fn read_csv_file(path: &Path, header: bool) -> Result<CsvDocument> {
    read_csv(File::open(path)?, header)
}

fn parse_f64(cell: &str) -> Result<f64> {
    cell.parse::<f64>()
        .map_err(|_| Error::Parse(format!("not a number: `{cell}`")))
}

impl CsvDocument {
    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
    }

    /// A numeric column by name.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column(name)?;
        self.rows.iter().map(|r| parse_f64(&r[j])).collect()
    }

    fn expect_header(&self, names: &[&str]) -> Result<()> {
        if self.header != names {
            return Err(Error::Parse(format!(
                "expected columns {}, found {}",
                names.join(","),
                self.header.join(",")
            )));
        }
        Ok(())
    }
}

/// One coordinate per line after the metadata.
pub fn write_points<W: Write>(w: &mut W, points: &[f64], meta: &Metadata) -> Result<()> {
    write_metadata(w, meta)?;
    for &x in points {
        writeln!(w, "{x:?}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_points_file(path: &Path, points: &[f64], meta: &Metadata) -> Result<()> {
    write_points(&mut create(path)?, points, meta)
}

pub fn read_points<R: Read>(reader: R) -> Result<(Metadata, Vec<f64>)> {
    let doc = read_csv(reader, false)?;
    let mut out = Vec::with_capacity(doc.rows.len());
    for row in &doc.rows {
        if row.len() != 1 {
            return Err(Error::Parse(format!("expected one value per line, found {}", row.len())));
        }
        out.push(parse_f64(&row[0])?);
    }
    Ok((doc.meta, out))
}

pub fn read_points_file(path: &Path) -> Result<(Metadata, Vec<f64>)> {
    read_points(File::open(path)?)
}

const VARIANCE_COLUMNS: [&str; 4] = ["r", "mean_count", "var_count", "var_stderr"];

pub fn write_variance_table<W: Write>(w: &mut W, table: &RadialVarianceTable) -> Result<()> {
    let mut meta = table.params.clone();
    meta.insert("realizations".into(), table.realizations.to_string());
    write_metadata(w, &meta)?;
    writeln!(w, "{}", VARIANCE_COLUMNS.join(","))?;
    for i in 0..table.radii.len() {
        writeln!(
            w,
            "{},{},{},{}",
            fmt(table.radii[i]),
            fmt(table.mean_count[i]),
            fmt(table.var_count[i]),
            fmt(table.var_stderr[i])
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_variance_table_file(path: &Path, table: &RadialVarianceTable) -> Result<()> {
    write_variance_table(&mut create(path)?, table)
}

pub fn read_variance_table<R: Read>(reader: R) -> Result<RadialVarianceTable> {
    let doc = read_csv(reader, true)?;
    doc.expect_header(&VARIANCE_COLUMNS)?;
    let realizations = match doc.meta.get("realizations") {
        Some(v) => v
            .parse()
            .map_err(|_| Error::Parse(format!("bad realizations value `{v}`")))?,
        None => 0,
    };
    Ok(RadialVarianceTable {
        radii: doc.numbers("r")?,
        mean_count: doc.numbers("mean_count")?,
        var_count: doc.numbers("var_count")?,
        var_stderr: doc.numbers("var_stderr")?,
        realizations,
        params: doc.meta,
    })
}

pub fn read_variance_table_file(path: &Path) -> Result<RadialVarianceTable> {
    read_variance_table(File::open(path)?)
}

const SPECTRUM_COLUMNS: [&str; 4] = ["t", "s", "method", "trunc"];

pub fn write_spectrum<W: Write>(w: &mut W, curve: &StructureFactorCurve, extra: &Metadata) -> Result<()> {
    let mut meta = curve.params.clone();
    meta.extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
    meta.insert("method".into(), curve.method.to_string());
    write_metadata(w, &meta)?;
    writeln!(w, "{}", SPECTRUM_COLUMNS.join(","))?;
    for i in 0..curve.t.len() {
        writeln!(w, "{},{},{},{}", fmt(curve.t[i]), fmt(curve.s[i]), curve.method, fmt(curve.trunc[i]))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectrum_file(path: &Path, curve: &StructureFactorCurve, extra: &Metadata) -> Result<()> {
    write_spectrum(&mut create(path)?, curve, extra)
}

pub fn read_spectrum<R: Read>(reader: R) -> Result<StructureFactorCurve> {
    let doc = read_csv(reader, true)?;
    doc.expect_header(&SPECTRUM_COLUMNS)?;
    let j = doc.column("method")?;
    let method: SpectrumMethod = match doc.rows.first() {
        Some(r) => r[j].parse()?,
        None => doc
            .meta
            .get("method")
            .ok_or_else(|| Error::Parse("empty spectrum without method".into()))?
            .parse()?,
    };
    if doc.rows.iter().any(|r| r[j] != method.to_string()) {
        return Err(Error::Parse("mixed methods in one spectrum file".into()));
    }
    Ok(StructureFactorCurve {
        t: doc.numbers("t")?,
        s: doc.numbers("s")?,
        method,
        trunc: doc.numbers("trunc")?,
        params: doc.meta,
    })
}

pub fn read_spectrum_file(path: &Path) -> Result<StructureFactorCurve> {
    read_spectrum(File::open(path)?)
}

pub fn write_mixing<W: Write>(w: &mut W, curve: &MixingCurve, extra: &Metadata) -> Result<()> {
    let mut meta = curve.params();
    meta.extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
    write_metadata(w, &meta)?;
    writeln!(w, "t,V")?;
    for (t, v) in curve.t.iter().zip(&curve.v) {
        writeln!(w, "{},{}", fmt(*t), fmt(*v))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_mixing_file(path: &Path, curve: &MixingCurve, extra: &Metadata) -> Result<()> {
    write_mixing(&mut create(path)?, curve, extra)
}

pub fn read_mixing<R: Read>(reader: R) -> Result<MixingCurve> {
    let doc = read_csv(reader, true)?;
    doc.expect_header(&["t", "V"])?;
    let get = |k: &str| -> Result<f64> {
        parse_f64(doc.meta.get(k).ok_or_else(|| Error::Parse(format!("missing metadata `{k}`")))?)
    };
    Ok(MixingCurve {
        h: HurstIndex::new(get("h")?)?,
        a: get("a")?,
        b: get("b")?,
        t: doc.numbers("t")?,
        v: doc.numbers("V")?,
    })
}

pub fn read_mixing_file(path: &Path) -> Result<MixingCurve> {
    read_mixing(File::open(path)?)
}

/// Pretty JSON followed by a newline.
pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
