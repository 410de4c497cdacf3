//! Dataset file formats.
//!
//! `csv-long`: header `group_id[,label],f0,...,f{V-1}`, one observation per
//! row. Groups are numbered by order of first appearance of their id.
//!
//! `binary`: `GADK` magic, `u32` version 1, then `u64` M, `u64` V, M × `u64`
//! group sizes, a `u8` label flag, M label bytes when the flag is set, and
//! finally every group's row-major `f64` values. All integers and floats are
//! little-endian.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Group, GroupDataset};
use crate::error::{GadError, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"GADK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FileFormat {
    CsvLong,
    Binary,
}

impl FileFormat {
    /// `.csv` maps to csv-long, anything else to binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Self::CsvLong,
            _ => Self::Binary,
        }
    }
}

impl FromStr for FileFormat {
    type Err = GadError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" | "csv-long" => Ok(Self::CsvLong),
            "bin" | "binary" => Ok(Self::Binary),
            other => Err(GadError::InvalidConfig(format!("unknown format {other:?}"))),
        }
    }
}

pub fn load_groups(path: &Path, format: FileFormat) -> Result<GroupDataset> {
    let file = File::open(path)?;
    match format {
        FileFormat::CsvLong => read_csv_long(BufReader::new(file)),
        FileFormat::Binary => read_binary(BufReader::new(file)),
    }
}

pub fn save_groups(ds: &GroupDataset, path: &Path, format: FileFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        FileFormat::CsvLong => write_csv_long(ds, &mut w)?,
        FileFormat::Binary => write_binary(ds, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> GadError {
    GadError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_label(s: &str, line: usize) -> Result<bool> {
    match s.trim() {
        "0" | "false" => Ok(false),
        "1" | "true" => Ok(true),
        other => Err(parse_err(line, format!("bad label {other:?}"))),
    }
}

pub fn read_csv_long<R: BufRead>(reader: R) -> Result<GroupDataset> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header"))??;
    let cols: Vec<&str> = header.trim_end_matches('\r').split(',').map(str::trim).collect();
    if cols.first() != Some(&"group_id") {
        return Err(parse_err(1, "first column must be group_id"));
    }
    let has_label = cols.get(1) == Some(&"label");
    let first_feature = if has_label { 2 } else { 1 };
    let dim = cols.len() - first_feature;
    if dim == 0 {
        return Err(parse_err(1, "no feature columns"));
    }
    for (j, c) in cols[first_feature..].iter().enumerate() {
        if *c != format!("f{j}") {
            return Err(parse_err(1, format!("expected column f{j}, found {c:?}")));
        }
    }

    let mut index_of: HashMap<u64, usize> = HashMap::new();
    let mut ids: Vec<u64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<Option<bool>> = Vec::new();

    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(GadError::DimensionMismatch {
                expected: cols.len() - first_feature,
                found: fields.len().saturating_sub(first_feature),
            });
        }
        let gid: u64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad group_id {:?}", fields[0])))?;
        let m = *index_of.entry(gid).or_insert_with(|| {
            ids.push(gid);
            rows.push(Vec::new());
            labels.push(None);
            ids.len() - 1
        });
        if has_label {
            let l = parse_label(fields[1], lineno)?;
            match labels[m] {
                None => labels[m] = Some(l),
                Some(prev) if prev != l => return Err(GadError::InconsistentLabel { group_id: gid }),
                Some(_) => {}
            }
        }
        for f in &fields[first_feature..] {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad number {f:?}")))?;
            rows[m].push(v);
        }
    }

    let groups = rows
        .into_iter()
        .map(|data| {
            let n = data.len() / dim;
            Group::new(n, dim, data)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = has_label.then(|| labels.into_iter().map(|l| l.unwrap_or(false)).collect());
    GroupDataset::new(groups, labels)
}

pub fn write_csv_long<W: Write>(ds: &GroupDataset, w: &mut W) -> Result<()> {
    let dim = ds.dim();
    let labels = ds.labels();
    write!(w, "group_id")?;
    if labels.is_some() {
        write!(w, ",label")?;
    }
    for j in 0..dim {
        write!(w, ",f{j}")?;
    }
    writeln!(w)?;
    for (m, g) in ds.groups().iter().enumerate() {
        for row in g.rows() {
            write!(w, "{m}")?;
            if let Some(l) = labels {
                write!(w, ",{}", u8::from(l[m]))?;
            }
            for v in row {
                // Display for f64 prints the shortest exact round-trip form
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_count<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = read_u64(r)?;
    usize::try_from(v).map_err(|_| parse_err(0, format!("{what} {v} too large")))
}

pub fn read_binary<R: Read>(mut r: R) -> Result<GroupDataset> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DATASET_MAGIC {
        return Err(parse_err(0, "bad magic"));
    }
    let mut ver = [0u8; 4];
    r.read_exact(&mut ver)?;
    let version = u32::from_le_bytes(ver);
    if version != FORMAT_VERSION {
        return Err(parse_err(0, format!("unsupported version {version}")));
    }
    let m = read_count(&mut r, "group count")?;
    let dim = read_count(&mut r, "dimension")?;
    let sizes = (0..m)
        .map(|_| read_count(&mut r, "group size"))
        .collect::<Result<Vec<_>>>()?;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let labels = match flag[0] {
        0 => None,
        1 => {
            let mut bytes = vec![0u8; m];
            r.read_exact(&mut bytes)?;
            Some(
                bytes
                    .into_iter()
                    .map(|b| match b {
                        0 => Ok(false),
                        1 => Ok(true),
                        _ => Err(parse_err(0, format!("bad label byte {b}"))),
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        }
        f => return Err(parse_err(0, format!("bad label flag {f}"))),
    };
    let mut groups = Vec::with_capacity(m);
    let mut buf = [0u8; 8];
    for n in sizes {
        let mut data = Vec::with_capacity(n * dim);
        for _ in 0..n * dim {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        groups.push(Group::new(n, dim, data)?);
    }
    GroupDataset::new(groups, labels)
}

pub fn write_binary<W: Write>(ds: &GroupDataset, w: &mut W) -> Result<()> {
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(ds.len() as u64).to_le_bytes())?;
    w.write_all(&(ds.dim() as u64).to_le_bytes())?;
    for g in ds.groups() {
        w.write_all(&(g.n_points() as u64).to_le_bytes())?;
    }
    match ds.labels() {
        None => w.write_all(&[0u8])?,
        Some(labels) => {
            w.write_all(&[1u8])?;
            let bytes: Vec<u8> = labels.iter().map(|&l| u8::from(l)).collect();
            w.write_all(&bytes)?;
        }
    }
    for g in ds.groups() {
        for v in g.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}
