//! On-disk formats.
//!
//! Binary volumes and fields carry a magic line and a one-line JSON header. Tables are
//! plain comma-separated text with a fixed header row, optionally preceded by a single
//! `# {json}` metadata line. Floats are written in shortest round-trip form, so every
//! reader returns exactly what the writer was given. Writes go to a sibling temporary
//! file that is renamed over the target.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cubical::{Diagram, PersistencePoint};
use crate::diagram::{Quadrant, QuadrantPoint};
use crate::grid2::Grid2;
use crate::mixture::{MixtureModel, Phase};
use crate::sdt::ScalarField;
use crate::texture_global::DensityGrid;
use crate::texture_local::{FeatureRow, TextureComposition, N_FEATURES};
use crate::volume::{BinaryVolume, Dims, Spacing};

pub const VOLUME_MAGIC: &[u8] = b"SDPHVOL1\n";
pub const FIELD_MAGIC: &[u8] = b"SDPHFLD1\n";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
}

fn perr(file: &str, line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse { file: file.to_string(), line, message: message.into() }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.display().to_string(), source }
}

/// Provenance recorded alongside an output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Dims>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Spacing>,
}

impl Meta {
    pub fn seed(seed: u64) -> Self {
        Self { seed: Some(seed), ..Default::default() }
    }

    fn is_empty(&self) -> bool {
        *self == Meta::default()
    }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp: PathBuf = dir.join(format!(".{name}.{}.partial", std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res.map_err(io_err(path))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    fs::read(path).map_err(io_err(path))
}

fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn file_name(path: &Path) -> String {
    path.display().to_string()
}

#[derive(Serialize, Deserialize)]
struct GridHeader {
    dims: Dims,
    spacing: Spacing,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn encode_header(magic: &[u8], dims: Dims, spacing: Spacing, seed: Option<u64>) -> Vec<u8> {
    let mut out = magic.to_vec();
    out.extend(serde_json::to_vec(&GridHeader { dims, spacing, seed }).unwrap());
    out.push(b'\n');
    out
}

fn decode_header<'a>(bytes: &'a [u8], magic: &[u8], file: &str) -> Result<(GridHeader, &'a [u8]), FormatError> {
    let rest = bytes.strip_prefix(magic).ok_or_else(|| perr(file, 1, "bad magic"))?;
    let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| perr(file, 2, "unterminated header"))?;
    let header: GridHeader =
        serde_json::from_slice(&rest[..nl]).map_err(|e| perr(file, 2, format!("header: {e}")))?;
    Ok((header, &rest[nl + 1..]))
}

pub fn encode_volume(vol: &BinaryVolume, seed: Option<u64>) -> Vec<u8> {
    let mut out = encode_header(VOLUME_MAGIC, vol.dims(), vol.spacing(), seed);
    out.extend(vol.voxels().iter().map(|&b| b as u8));
    out
}

pub fn decode_volume(bytes: &[u8], file: &str) -> Result<BinaryVolume, FormatError> {
    let (h, body) = decode_header(bytes, VOLUME_MAGIC, file)?;
    let voxels = body
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(perr(file, 3, format!("voxel byte {other}"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    BinaryVolume::from_voxels(h.dims, h.spacing, voxels).map_err(|e| perr(file, 3, e.to_string()))
}

pub fn write_volume(path: &Path, vol: &BinaryVolume, seed: Option<u64>) -> Result<(), FormatError> {
    write_atomic(path, &encode_volume(vol, seed))
}

pub fn read_volume(path: &Path) -> Result<BinaryVolume, FormatError> {
    decode_volume(&read_bytes(path)?, &file_name(path))
}

pub fn encode_field(field: &ScalarField, seed: Option<u64>) -> Vec<u8> {
    let mut out = encode_header(FIELD_MAGIC, field.dims(), field.spacing(), seed);
    out.reserve(field.len() * 8);
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8], file: &str) -> Result<ScalarField, FormatError> {
    let (h, body) = decode_header(bytes, FIELD_MAGIC, file)?;
    if body.len() % 8 != 0 {
        return Err(perr(file, 3, "payload is not a whole number of f64 values"));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    ScalarField::new(h.dims, h.spacing, values).map_err(|e| perr(file, 3, e.to_string()))
}

pub fn write_field(path: &Path, field: &ScalarField, seed: Option<u64>) -> Result<(), FormatError> {
    write_atomic(path, &encode_field(field, seed))
}

pub fn read_field(path: &Path) -> Result<ScalarField, FormatError> {
    decode_field(&read_bytes(path)?, &file_name(path))
}

/// Provenance of any file written by this module; binary formats carry only a seed.
pub fn read_meta(path: &Path) -> Result<Meta, FormatError> {
    let bytes = read_bytes(path)?;
    let file = file_name(path);
    for magic in [VOLUME_MAGIC, FIELD_MAGIC] {
        if bytes.starts_with(magic) {
            return Ok(Meta { seed: decode_header(&bytes, magic, &file)?.0.seed, ..Default::default() });
        }
    }
    let text = String::from_utf8_lossy(&bytes);
    Ok(Table::parse(&text, &file)?.meta)
}

/// Seed recorded in any file written by this module.
pub fn read_seed(path: &Path) -> Result<Option<u64>, FormatError> {
    Ok(read_meta(path)?.seed)
}

/// A parsed comma-separated table.
struct Table {
    file: String,
    meta: Meta,
    header: Vec<String>,
    records: Vec<(usize, csv::StringRecord)>,
}

impl Table {
    fn parse(text: &str, file: &str) -> Result<Self, FormatError> {
        let mut meta = Meta::default();
        let mut body = text;
        let mut offset = 0;
        if let Some(rest) = text.strip_prefix('#') {
            let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
            meta = serde_json::from_str(line.trim()).map_err(|e| perr(file, 1, format!("metadata: {e}")))?;
            body = tail;
            offset = 1;
        }
        let line_of = |e: &csv::Error| e.position().map_or(0, |p| p.line() as usize) + offset;
        let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(body.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| perr(file, line_of(&e), e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() || header == [""] {
            return Err(perr(file, 1 + offset, "missing header"));
        }
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| perr(file, line_of(&e), e.to_string()))?;
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            let line = rec.position().map_or(0, |p| p.line() as usize) + offset;
            records.push((line, rec));
        }
        Ok(Self { file: file.to_string(), meta, header, records })
    }

    fn rows(&self) -> impl Iterator<Item = (usize, Vec<&str>)> {
        self.records.iter().map(|(n, r)| (*n, r.iter().collect()))
    }

    fn expect_header(&self, want: &[&str]) -> Result<(), FormatError> {
        if self.header != want {
            return Err(perr(&self.file, 1 + !self.meta.is_empty() as usize, format!("expected header {}", want.join(","))));
        }
        for (n, r) in &self.records {
            if r.len() != want.len() {
                return Err(perr(&self.file, *n, format!("expected {} fields, got {}", want.len(), r.len())));
            }
        }
        Ok(())
    }

    fn get<T: FromStr>(&self, line: usize, field: &str, what: &str) -> Result<T, FormatError> {
        field.parse().map_err(|_| perr(&self.file, line, format!("bad {what} {field:?}")))
    }

    fn opt<T: FromStr>(&self, line: usize, field: &str, what: &str) -> Result<Option<T>, FormatError> {
        if field.is_empty() {
            Ok(None)
        } else {
            self.get(line, field, what).map(Some)
        }
    }
}

struct TableWriter {
    prefix: String,
    w: csv::Writer<Vec<u8>>,
}

impl TableWriter {
    fn new(meta: &Meta, header: &[&str]) -> Self {
        let mut prefix = String::new();
        if !meta.is_empty() {
            prefix = format!("# {}\n", serde_json::to_string(meta).unwrap());
        }
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        w.write_record(header).unwrap();
        Self { prefix, w }
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        self.w.write_record(fields.into_iter().collect::<Vec<_>>()).unwrap();
    }

    fn finish(self) -> String {
        let body = String::from_utf8(self.w.into_inner().unwrap()).unwrap();
        self.prefix + &body
    }
}

fn check_id(id: &str) -> Result<(), FormatError> {
    if id.is_empty() || id.starts_with('#') || id.trim() != id {
        return Err(perr(id, 0, "identifiers may not be empty, start with '#' or carry edge whitespace"));
    }
    Ok(())
}

const DIAGRAM_HEADER: [&str; 10] = ["degree", "birth", "death", "bx", "by", "bz", "dx", "dy", "dz", "essential"];

fn cell_fields(c: Option<[usize; 3]>) -> [String; 3] {
    match c {
        Some([x, y, z]) => [x.to_string(), y.to_string(), z.to_string()],
        None => Default::default(),
    }
}

/// Diagram CSV; provenance goes into the metadata line.
pub fn encode_diagram(d: &Diagram, seed: Option<u64>) -> String {
    let meta = Meta {
        seed,
        source_id: (!d.source_id.is_empty()).then(|| d.source_id.clone()),
        dims: Some(d.dims),
        spacing: Some(d.spacing),
    };
    let mut w = TableWriter::new(&meta, &DIAGRAM_HEADER);
    for p in &d.points {
        let ess = p.is_essential();
        let mut f = vec![p.degree.to_string(), p.birth.to_string(), if ess { String::new() } else { p.death.to_string() }];
        f.extend(cell_fields(p.birth_cell));
        f.extend(cell_fields(if ess { None } else { p.death_cell }));
        f.push((ess as u8).to_string());
        w.row(f);
    }
    w.finish()
}

fn parse_cell(t: &Table, line: usize, f: &[&str]) -> Result<Option<[usize; 3]>, FormatError> {
    let v: Vec<Option<usize>> = f.iter().map(|s| t.opt(line, s, "cell coordinate")).collect::<Result<_, _>>()?;
    match (v[0], v[1], v[2]) {
        (Some(x), Some(y), Some(z)) => Ok(Some([x, y, z])),
        (None, None, None) => Ok(None),
        _ => Err(perr(&t.file, line, "partial cell coordinates")),
    }
}

pub fn decode_diagram(text: &str, file: &str) -> Result<Diagram, FormatError> {
    let t = Table::parse(text, file)?;
    t.expect_header(&DIAGRAM_HEADER)?;
    let mut points = Vec::with_capacity(t.records.len());
    for (n, r) in t.rows() {
        let essential = match r[9] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(perr(file, n, format!("bad essential flag {other:?}"))),
        };
        let death = if essential {
            if !r[2].is_empty() {
                return Err(perr(file, n, "essential point with a death value"));
            }
            f64::INFINITY
        } else {
            t.get(n, r[2], "death")?
        };
        points.push(PersistencePoint {
            degree: t.get(n, r[0], "degree")?,
            birth: t.get(n, r[1], "birth")?,
            death,
            birth_cell: parse_cell(&t, n, &r[3..6])?,
            death_cell: parse_cell(&t, n, &r[6..9])?,
        });
    }
    Ok(Diagram {
        points,
        source_id: t.meta.source_id.clone().unwrap_or_default(),
        dims: t.meta.dims.unwrap_or_default(),
        spacing: t.meta.spacing.unwrap_or_default(),
    })
}

pub fn write_diagram(path: &Path, d: &Diagram, seed: Option<u64>) -> Result<(), FormatError> {
    write_atomic(path, encode_diagram(d, seed).as_bytes())
}

pub fn read_diagram(path: &Path) -> Result<Diagram, FormatError> {
    decode_diagram(&read_text(path)?, &file_name(path))
}

const QUADRANT_HEADER: [&str; 7] = ["degree", "quadrant", "birth", "death", "size1", "size2", "weight"];

pub fn encode_quadrant_points(points: &[QuadrantPoint], meta: &Meta) -> String {
    let mut w = TableWriter::new(meta, &QUADRANT_HEADER);
    for q in points {
        w.row([
            q.degree.to_string(),
            q.quadrant.to_string(),
            q.birth.to_string(),
            q.death.to_string(),
            q.sizes[0].to_string(),
            q.sizes[1].to_string(),
            q.weight.to_string(),
        ]);
    }
    w.finish()
}

pub fn decode_quadrant_points(text: &str, file: &str) -> Result<Vec<QuadrantPoint>, FormatError> {
    let t = Table::parse(text, file)?;
    t.expect_header(&QUADRANT_HEADER)?;
    t.rows()
        .map(|(n, r)| {
            Ok(QuadrantPoint {
                degree: t.get(n, r[0], "degree")?,
                quadrant: t.get::<Quadrant>(n, r[1], "quadrant")?,
                birth: t.get(n, r[2], "birth")?,
                death: t.get(n, r[3], "death")?,
                sizes: [t.get(n, r[4], "size1")?, t.get(n, r[5], "size2")?],
                weight: t.get(n, r[6], "weight")?,
            })
        })
        .collect()
}

pub fn write_quadrant_points(path: &Path, points: &[QuadrantPoint], meta: &Meta) -> Result<(), FormatError> {
    write_atomic(path, encode_quadrant_points(points, meta).as_bytes())
}

pub fn read_quadrant_points(path: &Path) -> Result<Vec<QuadrantPoint>, FormatError> {
    decode_quadrant_points(&read_text(path)?, &file_name(path))
}

/// Feature rows tagged with the sample they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleFeatures {
    pub sample_id: String,
    pub row: FeatureRow,
}

fn features_header() -> Vec<String> {
    let mut h: Vec<String> = ["sample_id", "cx", "cy", "cz"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=N_FEATURES).map(|i| format!("f{i}")));
    h
}

pub fn encode_features(rows: &[SampleFeatures], meta: &Meta) -> Result<String, FormatError> {
    let h = features_header();
    let mut w = TableWriter::new(meta, &h.iter().map(String::as_str).collect::<Vec<_>>());
    for r in rows {
        check_id(&r.sample_id)?;
        let mut f = vec![r.sample_id.clone()];
        f.extend(r.row.center.iter().map(f64::to_string));
        f.extend(r.row.features.iter().map(f64::to_string));
        w.row(f);
    }
    Ok(w.finish())
}

pub fn decode_features(text: &str, file: &str) -> Result<Vec<SampleFeatures>, FormatError> {
    let t = Table::parse(text, file)?;
    let h = features_header();
    t.expect_header(&h.iter().map(String::as_str).collect::<Vec<_>>())?;
    t.rows()
        .map(|(n, r)| {
            let nums: Vec<f64> = r[1..].iter().map(|s| t.get(n, s, "value")).collect::<Result<_, _>>()?;
            Ok(SampleFeatures {
                sample_id: r[0].to_string(),
                row: FeatureRow { center: [nums[0], nums[1], nums[2]], features: nums[3..].try_into().unwrap() },
            })
        })
        .collect()
}

pub fn write_features(path: &Path, rows: &[SampleFeatures], meta: &Meta) -> Result<(), FormatError> {
    write_atomic(path, encode_features(rows, meta)?.as_bytes())
}

pub fn read_features(path: &Path) -> Result<Vec<SampleFeatures>, FormatError> {
    decode_features(&read_text(path)?, &file_name(path))
}

const LABELS_HEADER: [&str; 5] = ["sample_id", "cx", "cy", "cz", "label"];

/// Cluster label of each feature row.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelRow {
    pub sample_id: String,
    pub center: [f64; 3],
    pub label: usize,
}

pub fn encode_labels(rows: &[LabelRow], meta: &Meta) -> Result<String, FormatError> {
    let mut w = TableWriter::new(meta, &LABELS_HEADER);
    for r in rows {
        check_id(&r.sample_id)?;
        w.row([
            r.sample_id.clone(),
            r.center[0].to_string(),
            r.center[1].to_string(),
            r.center[2].to_string(),
            r.label.to_string(),
        ]);
    }
    Ok(w.finish())
}

pub fn decode_labels(text: &str, file: &str) -> Result<Vec<LabelRow>, FormatError> {
    let t = Table::parse(text, file)?;
    t.expect_header(&LABELS_HEADER)?;
    t.rows()
        .map(|(n, r)| {
            Ok(LabelRow {
                sample_id: r[0].to_string(),
                center: [t.get(n, r[1], "cx")?, t.get(n, r[2], "cy")?, t.get(n, r[3], "cz")?],
                label: t.get(n, r[4], "label")?,
            })
        })
        .collect()
}

pub fn write_labels(path: &Path, rows: &[LabelRow], meta: &Meta) -> Result<(), FormatError> {
    write_atomic(path, encode_labels(rows, meta)?.as_bytes())
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>, FormatError> {
    decode_labels(&read_text(path)?, &file_name(path))
}

/// `sample_id,c0,c1,…`, one percentage column per cluster.
pub fn encode_compositions(rows: &[TextureComposition], meta: &Meta) -> Result<String, FormatError> {
    let k = rows.first().map_or(0, |r| r.percentages.len());
    let mut h = vec!["sample_id".to_string()];
    h.extend((0..k).map(|i| format!("c{i}")));
    let mut w = TableWriter::new(meta, &h.iter().map(String::as_str).collect::<Vec<_>>());
    for r in rows {
        check_id(&r.sample_id)?;
        if r.percentages.len() != k {
            return Err(perr(&r.sample_id, 0, "ragged composition rows"));
        }
        w.row(std::iter::once(r.sample_id.clone()).chain(r.percentages.iter().map(f64::to_string)));
    }
    Ok(w.finish())
}

pub fn decode_compositions(text: &str, file: &str) -> Result<Vec<TextureComposition>, FormatError> {
    let t = Table::parse(text, file)?;
    let k = t.header.len().saturating_sub(1);
    let mut h = vec!["sample_id".to_string()];
    h.extend((0..k).map(|i| format!("c{i}")));
    t.expect_header(&h.iter().map(String::as_str).collect::<Vec<_>>())?;
    t.rows()
        .map(|(n, r)| {
            Ok(TextureComposition {
                sample_id: r[0].to_string(),
                percentages: r[1..].iter().map(|s| t.get(n, s, "percentage")).collect::<Result<_, _>>()?,
            })
        })
        .collect()
}

const EMBEDDING_HEADER: [&str; 3] = ["sample_id", "pc1", "pc2"];

pub fn encode_embedding(ids: &[String], embedding: &[[f64; 2]], meta: &Meta) -> Result<String, FormatError> {
    let mut w = TableWriter::new(meta, &EMBEDDING_HEADER);
    for (id, e) in ids.iter().zip(embedding) {
        check_id(id)?;
        w.row([id.clone(), e[0].to_string(), e[1].to_string()]);
    }
    Ok(w.finish())
}

pub fn decode_embedding(text: &str, file: &str) -> Result<Vec<(String, [f64; 2])>, FormatError> {
    let t = Table::parse(text, file)?;
    t.expect_header(&EMBEDDING_HEADER)?;
    t.rows()
        .map(|(n, r)| Ok((r[0].to_string(), [t.get(n, r[1], "pc1")?, t.get(n, r[2], "pc2")?])))
        .collect()
}

const DENSITY_HEADER: [&str; 6] = ["bmin", "bmax", "dmin", "dmax", "nb", "nd"];

/// Bounds and resolution on the first data row, then one row of `nb` values per death index.
pub fn encode_density(d: &DensityGrid, meta: &Meta) -> String {
    let mut w = TableWriter::new(meta, &DENSITY_HEADER);
    let [nb, nd] = d.grid.resolution;
    w.row(d.grid.bounds.iter().map(f64::to_string).chain([nb.to_string(), nd.to_string()]));
    for row in d.values.chunks(nb.max(1)) {
        w.row(row.iter().map(f64::to_string));
    }
    w.finish()
}

pub fn decode_density(text: &str, file: &str) -> Result<DensityGrid, FormatError> {
    let t = Table::parse(text, file)?;
    if t.header != DENSITY_HEADER {
        return Err(perr(file, 1, format!("expected header {}", DENSITY_HEADER.join(","))));
    }
    let mut rows = t.rows();
    let (n0, first) = rows.next().ok_or_else(|| perr(file, 2, "missing grid row"))?;
    if first.len() != 6 {
        return Err(perr(file, n0, "grid row needs 6 fields"));
    }
    let bounds: Vec<f64> = first[..4].iter().map(|s| t.get(n0, s, "bound")).collect::<Result<_, _>>()?;
    let nb: usize = t.get(n0, first[4], "nb")?;
    let nd: usize = t.get(n0, first[5], "nd")?;
    if t.records.len() != nd + 1 {
        return Err(perr(file, n0, format!("expected {nd} value rows, got {}", t.records.len() - 1)));
    }
    let mut values = Vec::with_capacity(nb * nd);
    for (n, r) in rows {
        if r.len() != nb {
            return Err(perr(file, n, format!("expected {nb} values, got {}", r.len())));
        }
        for s in r {
            values.push(t.get(n, s, "density")?);
        }
    }
    Ok(DensityGrid { grid: Grid2::new(bounds.try_into().unwrap(), [nb, nd]), values })
}

pub fn write_density(path: &Path, d: &DensityGrid, meta: &Meta) -> Result<(), FormatError> {
    write_atomic(path, encode_density(d, meta).as_bytes())
}

pub fn read_density(path: &Path) -> Result<DensityGrid, FormatError> {
    decode_density(&read_text(path)?, &file_name(path))
}

pub fn encode_model(m: &MixtureModel) -> String {
    let mut s = serde_json::to_string_pretty(m).unwrap();
    s.push('\n');
    s
}

pub fn decode_model(text: &str, file: &str) -> Result<MixtureModel, FormatError> {
    let m: MixtureModel = serde_json::from_str(text).map_err(|e| perr(file, e.line(), e.to_string()))?;
    m.validate().map_err(|e| perr(file, 1, e.to_string()))?;
    Ok(m)
}

pub fn write_model(path: &Path, m: &MixtureModel) -> Result<(), FormatError> {
    write_atomic(path, encode_model(m).as_bytes())
}

pub fn read_model(path: &Path) -> Result<MixtureModel, FormatError> {
    decode_model(&read_text(path)?, &file_name(path))
}

/// One evaluated sample: its true phase if known, the distance to each phase model and
/// the prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub sample: String,
    pub phase: Option<Phase>,
    pub distances: BTreeMap<Phase, f64>,
    pub predicted: Phase,
}

const EVAL_HEADER: [&str; 6] = ["sample", "phase", "dist_O", "dist_I", "dist_II", "predicted"];

pub fn encode_evaluation(rows: &[EvalRow], meta: &Meta) -> Result<String, FormatError> {
    let mut w = TableWriter::new(meta, &EVAL_HEADER);
    for r in rows {
        check_id(&r.sample)?;
        let mut f = vec![r.sample.clone(), r.phase.map(|p| p.to_string()).unwrap_or_default()];
        f.extend(Phase::ALL.iter().map(|p| r.distances.get(p).map(f64::to_string).unwrap_or_default()));
        f.push(r.predicted.to_string());
        w.row(f);
    }
    Ok(w.finish())
}

pub fn decode_evaluation(text: &str, file: &str) -> Result<Vec<EvalRow>, FormatError> {
    let t = Table::parse(text, file)?;
    t.expect_header(&EVAL_HEADER)?;
    t.rows()
        .map(|(n, r)| {
            let mut distances = BTreeMap::new();
            for (p, s) in Phase::ALL.iter().zip(&r[2..5]) {
                if let Some(v) = t.opt(n, s, "distance")? {
                    distances.insert(*p, v);
                }
            }
            Ok(EvalRow {
                sample: r[0].to_string(),
                phase: t.opt(n, r[1], "phase")?,
                distances,
                predicted: t.get(n, r[5], "predicted phase")?,
            })
        })
        .collect()
}

pub fn write_evaluation(path: &Path, rows: &[EvalRow], meta: &Meta) -> Result<(), FormatError> {
    write_atomic(path, encode_evaluation(rows, meta)?.as_bytes())
}

pub fn read_evaluation(path: &Path) -> Result<Vec<EvalRow>, FormatError> {
    decode_evaluation(&read_text(path)?, &file_name(path))
}
