//! File formats: PLY clouds, score CSVs, label sidecars, intrinsics JSON and
//! 16-bit depth images.
//!
//! PLY output always writes `float x, float y, float z` with an optional
//! `uchar label`. The reader also accepts `double` coordinates, any integer
//! label type, and skips unknown scalar vertex properties.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Point3;
use thiserror::Error;

use super::{CameraIntrinsics, CategoryCode, CloudError, DepthFrame, PointCloud, Scores};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Offset(u64),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Offset(n) => write!(f, "byte offset {n}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("expected {expected} rows, found {found}")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("PNG error: {0}")]
    Png(String),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

fn parse_err(location: Location, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        location,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarKind {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarKind {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Self::F32 | Self::F64)
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => f64::from(b[0] as i8),
            Self::U8 => f64::from(b[0]),
            Self::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            Self::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            Self::I32 => f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Self::U32 => f64::from(u32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Self::F32 => f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Self::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug)]
struct Property {
    name: String,
    kind: ScalarKind,
}

#[derive(Debug)]
struct Header {
    encoding: PlyEncoding,
    vertex_count: usize,
    properties: Vec<Property>,
    lines: usize,
    bytes: u64,
}

impl Header {
    fn index_of(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|p| p.name == name)
    }
}

/// Points and raw labels as stored in a PLY file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlyPoints {
    pub points: Vec<Point3<f64>>,
    pub labels: Option<Vec<u8>>,
}

fn read_header<R: BufRead>(reader: &mut R) -> Result<Header, FormatError> {
    let mut line = String::new();
    let mut lines = 0usize;
    let mut bytes = 0u64;
    let mut encoding = None;
    let mut vertex_count = None;
    let mut properties = Vec::new();
    let mut in_vertex = false;
    let mut after_vertex = false;

    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            return Err(parse_err(Location::Line(lines + 1), "missing end_header"));
        }
        lines += 1;
        bytes += n as u64;
        let here = Location::Line(lines);
        let text = line.trim_end_matches(['\n', '\r']);
        if lines == 1 {
            if text != "ply" {
                return Err(parse_err(here, "missing 'ply' magic"));
            }
            continue;
        }
        let mut tok = text.split_whitespace();
        match tok.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                encoding = Some(match (tok.next(), tok.next()) {
                    (Some("ascii"), Some("1.0")) => PlyEncoding::Ascii,
                    (Some("binary_little_endian"), Some("1.0")) => PlyEncoding::BinaryLittleEndian,
                    (Some(other), _) => {
                        return Err(FormatError::UnsupportedFormat(format!(
                            "PLY format {other}"
                        )))
                    }
                    (None, _) => return Err(parse_err(here, "malformed format line")),
                });
            }
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| parse_err(here, "element without name"))?;
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(here, "element count is not an integer"))?;
                if name == "vertex" {
                    if vertex_count.is_some() {
                        return Err(parse_err(here, "duplicate vertex element"));
                    }
                    vertex_count = Some(count);
                    in_vertex = true;
                } else {
                    if vertex_count.is_none() {
                        return Err(FormatError::UnsupportedFormat(format!(
                            "element '{name}' before vertex"
                        )));
                    }
                    in_vertex = false;
                    after_vertex = true;
                }
            }
            Some("property") => {
                if !in_vertex {
                    if after_vertex {
                        continue;
                    }
                    return Err(parse_err(here, "property outside an element"));
                }
                let ty = tok
                    .next()
                    .ok_or_else(|| parse_err(here, "property without type"))?;
                if ty == "list" {
                    return Err(FormatError::UnsupportedFormat(
                        "list property on vertex element".into(),
                    ));
                }
                let kind = ScalarKind::parse(ty)
                    .ok_or_else(|| parse_err(here, format!("unknown property type '{ty}'")))?;
                let name = tok
                    .next()
                    .ok_or_else(|| parse_err(here, "property without name"))?;
                properties.push(Property {
                    name: name.to_string(),
                    kind,
                });
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(parse_err(
                    here,
                    format!("unexpected header keyword '{other}'"),
                ))
            }
        }
    }

    let encoding =
        encoding.ok_or_else(|| parse_err(Location::Line(lines), "missing format line"))?;
    let vertex_count =
        vertex_count.ok_or_else(|| parse_err(Location::Line(lines), "missing vertex element"))?;
    let header = Header {
        encoding,
        vertex_count,
        properties,
        lines,
        bytes,
    };
    for axis in ["x", "y", "z"] {
        if header.index_of(axis).is_none() {
            return Err(parse_err(
                Location::Line(lines),
                format!("vertex element lacks property '{axis}'"),
            ));
        }
    }
    if let Some(i) = header.index_of("label") {
        if !header.properties[i].kind.is_integer() {
            return Err(parse_err(
                Location::Line(lines),
                "label property must be an integer type",
            ));
        }
    }
    Ok(header)
}

fn label_value(v: f64, location: Location) -> Result<u8, FormatError> {
    if (0.0..=255.0).contains(&v) {
        Ok(v as u8)
    } else {
        Err(parse_err(
            location,
            format!("label {v} does not fit in a byte"),
        ))
    }
}

pub fn read_ply<R: BufRead>(mut reader: R) -> Result<PlyPoints, FormatError> {
    let header = read_header(&mut reader)?;
    let ix = header.index_of("x").expect("checked");
    let iy = header.index_of("y").expect("checked");
    let iz = header.index_of("z").expect("checked");
    let il = header.index_of("label");
    let n = header.vertex_count;
    let mut points = Vec::with_capacity(n);
    let mut labels = il.map(|_| Vec::with_capacity(n));

    match header.encoding {
        PlyEncoding::Ascii => {
            let mut line = String::new();
            let mut lineno = header.lines;
            let mut values = Vec::with_capacity(header.properties.len());
            while points.len() < n {
                line.clear();
                if reader.read_line(&mut line)? == 0 {
                    return Err(parse_err(
                        Location::Line(lineno + 1),
                        format!("expected {n} vertices, found {}", points.len()),
                    ));
                }
                lineno += 1;
                let here = Location::Line(lineno);
                if line.trim().is_empty() {
                    continue;
                }
                values.clear();
                for tok in line.split_whitespace() {
                    values.push(
                        tok.parse::<f64>()
                            .map_err(|_| parse_err(here, format!("'{tok}' is not a number")))?,
                    );
                }
                if values.len() != header.properties.len() {
                    return Err(parse_err(
                        here,
                        format!(
                            "expected {} values, found {}",
                            header.properties.len(),
                            values.len()
                        ),
                    ));
                }
                let p = Point3::new(values[ix], values[iy], values[iz]);
                if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                    return Err(parse_err(here, "non-finite coordinate"));
                }
                points.push(p);
                if let (Some(il), Some(l)) = (il, labels.as_mut()) {
                    l.push(label_value(values[il], here)?);
                }
            }
        }
        PlyEncoding::BinaryLittleEndian => {
            let offsets: Vec<usize> = header
                .properties
                .iter()
                .scan(0, |acc, p| {
                    let o = *acc;
                    *acc += p.kind.size();
                    Some(o)
                })
                .collect();
            let stride: usize = header.properties.iter().map(|p| p.kind.size()).sum();
            let mut body = Vec::new();
            reader.take((stride * n) as u64).read_to_end(&mut body)?;
            if body.len() < stride * n {
                let complete = body.len() / stride;
                return Err(parse_err(
                    Location::Offset(header.bytes + body.len() as u64),
                    format!("truncated vertex data: {complete} of {n} records"),
                ));
            }
            let field = |rec: &[u8], i: usize| {
                let p = &header.properties[i];
                p.kind.read_le(&rec[offsets[i]..offsets[i] + p.kind.size()])
            };
            for (k, rec) in body.chunks_exact(stride).enumerate() {
                let here = Location::Offset(header.bytes + (k * stride) as u64);
                let p = Point3::new(field(rec, ix), field(rec, iy), field(rec, iz));
                if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                    return Err(parse_err(here, "non-finite coordinate"));
                }
                points.push(p);
                if let (Some(il), Some(l)) = (il, labels.as_mut()) {
                    l.push(label_value(field(rec, il), here)?);
                }
            }
        }
    }
    Ok(PlyPoints { points, labels })
}

pub fn write_ply<W: Write>(
    mut w: W,
    points: &[Point3<f64>],
    labels: Option<&[u8]>,
    encoding: PlyEncoding,
) -> Result<(), FormatError> {
    if let Some(l) = labels {
        if l.len() != points.len() {
            return Err(CloudError::LengthMismatch {
                what: "label array",
                expected: points.len(),
                found: l.len(),
            }
            .into());
        }
    }
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply")?;
    writeln!(w, "format {format} 1.0")?;
    writeln!(w, "comment written by graspcloud")?;
    writeln!(w, "element vertex {}", points.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(w, "property float {axis}")?;
    }
    if labels.is_some() {
        writeln!(w, "property uchar label")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in points.iter().enumerate() {
        let xyz = [p.x as f32, p.y as f32, p.z as f32];
        match encoding {
            PlyEncoding::Ascii => {
                write!(w, "{} {} {}", xyz[0], xyz[1], xyz[2])?;
                if let Some(l) = labels {
                    write!(w, " {}", l[i])?;
                }
                writeln!(w)?;
            }
            PlyEncoding::BinaryLittleEndian => {
                for c in xyz {
                    w.write_all(&c.to_le_bytes())?;
                }
                if let Some(l) = labels {
                    w.write_all(&[l[i]])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a PLY cloud; a `label` property must hold valid category codes.
pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud, FormatError> {
    let ply = read_ply(BufReader::new(File::open(path)?))?;
    let mut cloud = PointCloud::new(ply.points)?;
    if let Some(raw) = ply.labels {
        let labels = raw
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                CategoryCode::try_from(c).map_err(|c| {
                    parse_err(
                        Location::Line(0),
                        format!("vertex {i}: invalid category code {c}"),
                    )
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        cloud = cloud.with_labels(labels)?;
    }
    Ok(cloud)
}

/// Coordinates are stored as 32-bit floats.
pub fn save_cloud(
    cloud: &PointCloud,
    path: impl AsRef<Path>,
    encoding: PlyEncoding,
) -> Result<(), FormatError> {
    let labels: Option<Vec<u8>> = cloud.labels().map(|l| l.iter().map(|&c| c as u8).collect());
    write_ply(
        BufWriter::new(File::create(path)?),
        cloud.points(),
        labels.as_deref(),
        encoding,
    )
}

/// Parses an N x 3 score CSV (Background, Body, Handle columns).
pub fn read_scores<R: BufRead>(reader: R, n_points: usize) -> Result<Scores, FormatError> {
    let mut rows = Vec::with_capacity(n_points);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let here = Location::Line(i + 1);
        let mut row = [0.0; 3];
        let mut cols = 0;
        for tok in text.split(',') {
            if cols == 3 {
                return Err(parse_err(here, "more than 3 columns"));
            }
            let tok = tok.trim();
            row[cols] = tok
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(here, format!("'{tok}' is not a finite number")))?;
            cols += 1;
        }
        if cols != 3 {
            return Err(parse_err(here, format!("expected 3 columns, found {cols}")));
        }
        rows.push(row);
    }
    if rows.len() != n_points {
        return Err(FormatError::RowCountMismatch {
            expected: n_points,
            found: rows.len(),
        });
    }
    Ok(Scores::new(rows))
}

pub fn load_scores(path: impl AsRef<Path>, n_points: usize) -> Result<Scores, FormatError> {
    read_scores(BufReader::new(File::open(path)?), n_points)
}

pub fn save_scores(scores: &Scores, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in scores.rows() {
        writeln!(w, "{},{},{}", r[0], r[1], r[2])?;
    }
    w.flush()?;
    Ok(())
}

/// Label sidecar: one category code (0, 1 or 2) per line.
pub fn read_labels<R: BufRead>(reader: R) -> Result<Vec<CategoryCode>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let code = text
            .parse::<u8>()
            .ok()
            .and_then(|c| CategoryCode::try_from(c).ok())
            .ok_or_else(|| {
                parse_err(
                    Location::Line(i + 1),
                    format!("invalid category code '{text}'"),
                )
            })?;
        out.push(code);
    }
    Ok(out)
}

/// Reads labels from a `.lbl` sidecar, or from the `label` property of a
/// `.ply` file.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<CategoryCode>, FormatError> {
    let path = path.as_ref();
    if has_extension(path, "ply") {
        return load_cloud(path)?
            .labels()
            .map(<[CategoryCode]>::to_vec)
            .ok_or_else(|| {
                FormatError::UnsupportedFormat("PLY file has no label property".into())
            });
    }
    read_labels(BufReader::new(File::open(path)?))
}

pub fn save_labels(labels: &[CategoryCode], path: impl AsRef<Path>) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    for &c in labels {
        writeln!(w, "{}", c as u8)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_intrinsics(path: impl AsRef<Path>) -> Result<CameraIntrinsics, FormatError> {
    let intr: CameraIntrinsics = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    intr.validate()?;
    Ok(intr)
}

pub fn save_intrinsics(intr: &CameraIntrinsics, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, intr)?;
    writeln!(w)?;
    Ok(())
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

pub fn save_depth_png(frame: &DepthFrame, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let w = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(w, frame.width() as u32, frame.height() as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Sixteen);
    let mut writer = enc
        .write_header()
        .map_err(|e| FormatError::Png(e.to_string()))?;
    let bytes: Vec<u8> = frame.data().iter().flat_map(|d| d.to_be_bytes()).collect();
    writer
        .write_image_data(&bytes)
        .map_err(|e| FormatError::Png(e.to_string()))?;
    writer
        .finish()
        .map_err(|e| FormatError::Png(e.to_string()))?;
    Ok(())
}

pub fn load_depth_png(path: impl AsRef<Path>) -> Result<DepthFrame, FormatError> {
    let decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    let mut reader = decoder
        .read_info()
        .map_err(|e| FormatError::Png(e.to_string()))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(FormatError::UnsupportedFormat(format!(
            "depth PNG must be 16-bit grayscale, got {:?} {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(w * h * 2)];
    reader
        .next_frame(&mut buf)
        .map_err(|e| FormatError::Png(e.to_string()))?;
    let depth = buf[..w * h * 2]
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Ok(DepthFrame::new(w, h, depth)?)
}

pub fn save_depth_raw(frame: &DepthFrame, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    for d in frame.data() {
        w.write_all(&d.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Raw little-endian `u16` frame sized by the sidecar intrinsics.
pub fn load_depth_raw(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
) -> Result<DepthFrame, FormatError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != width * height * 2 {
        return Err(FormatError::Cloud(CloudError::FrameLength {
            expected: width * height,
            found: bytes.len() / 2,
        }));
    }
    let depth = bytes
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    Ok(DepthFrame::new(width, height, depth)?)
}

/// PNG by extension, raw little-endian otherwise.
pub fn load_depth(
    path: impl AsRef<Path>,
    intr: &CameraIntrinsics,
) -> Result<DepthFrame, FormatError> {
    let path = path.as_ref();
    if has_extension(path, "png") {
        load_depth_png(path)
    } else {
        load_depth_raw(path, intr.width, intr.height)
    }
}
