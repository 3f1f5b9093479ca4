//! PLY 1.0 reader and writer (`ascii` and `binary_little_endian`).
//!
//! The reader accepts any scalar type for vertex properties and converts to
//! f64. Unknown properties and elements are skipped. The writer always emits
//! `double` coordinates and normals so binary files round-trip bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use super::{validate_mesh, MeshIoError, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    payload_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, MeshIoError> {
    let malformed = |m: &str| MeshIoError::MalformedHeader(m.to_string());
    if !bytes.starts_with(b"ply") {
        return Err(malformed("missing 'ply' magic"));
    }
    let mut pos = 0usize;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut first = true;
    loop {
        let rest = &bytes[pos..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| malformed("header is not terminated by 'end_header'"))?;
        let raw = &rest[..nl];
        pos += nl + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| malformed("header is not valid UTF-8"))?
            .trim_end_matches('\r')
            .trim();
        if first {
            if line != "ply" {
                return Err(malformed("first line must be 'ply'"));
            }
            first = false;
            continue;
        }
        let mut words = line.split_whitespace();
        let Some(keyword) = words.next() else {
            continue;
        };
        match keyword {
            "comment" | "obj_info" => {}
            "format" => {
                let kind = words.next().ok_or_else(|| malformed("format line is empty"))?;
                let version = words.next().unwrap_or("");
                if version != "1.0" {
                    return Err(MeshIoError::UnsupportedFormat(format!("version {version:?}")));
                }
                format = Some(match kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    "binary_big_endian" => {
                        return Err(MeshIoError::UnsupportedFormat(
                            "binary_big_endian is not supported".into(),
                        ))
                    }
                    other => return Err(MeshIoError::UnsupportedFormat(other.to_string())),
                });
            }
            "element" => {
                let name = words.next().ok_or_else(|| malformed("element without name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| malformed("element count is not a non-negative integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| malformed("property before any element"))?;
                let ty = words.next().ok_or_else(|| malformed("property without type"))?;
                let kind = if ty == "list" {
                    let count = words
                        .next()
                        .and_then(Scalar::parse)
                        .ok_or_else(|| malformed("bad list count type"))?;
                    let item = words
                        .next()
                        .and_then(Scalar::parse)
                        .ok_or_else(|| malformed("bad list item type"))?;
                    if !count.is_integer() {
                        return Err(malformed("list count type must be an integer type"));
                    }
                    PropKind::List { count, item }
                } else {
                    PropKind::Scalar(
                        Scalar::parse(ty)
                            .ok_or_else(|| malformed(&format!("unknown property type {ty:?}")))?,
                    )
                };
                let name = words.next().ok_or_else(|| malformed("property without name"))?;
                element.props.push(Property {
                    name: name.to_string(),
                    kind,
                });
            }
            "end_header" => break,
            other => return Err(malformed(&format!("unexpected header keyword {other:?}"))),
        }
    }
    let format = format.ok_or_else(|| malformed("missing format line"))?;
    Ok(Header {
        format,
        elements,
        payload_start: pos,
    })
}

/// Source of scalar values, one per property slot, in file order.
trait ValueSource {
    fn next(&mut self, ty: Scalar, what: &str) -> Result<f64, MeshIoError>;
}

struct BinarySource<'a> {
    data: &'a [u8],
    pos: usize,
}

impl ValueSource for BinarySource<'_> {
    fn next(&mut self, ty: Scalar, what: &str) -> Result<f64, MeshIoError> {
        let size = ty.size();
        let end = self
            .pos
            .checked_add(size)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| MeshIoError::TruncatedPayload(what.to_string()))?;
        let b = &self.data[self.pos..end];
        self.pos = end;
        Ok(match ty {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b.try_into().expect("8 bytes")),
        })
    }
}

struct AsciiSource<'a> {
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl ValueSource for AsciiSource<'_> {
    fn next(&mut self, ty: Scalar, what: &str) -> Result<f64, MeshIoError> {
        let tok = self
            .tokens
            .next()
            .ok_or_else(|| MeshIoError::TruncatedPayload(what.to_string()))?;
        if ty.is_integer() {
            tok.parse::<i64>().map(|v| v as f64).map_err(|_| {
                MeshIoError::MalformedPayload(format!("expected integer in {what}, got {tok:?}"))
            })
        } else {
            tok.parse::<f64>().map_err(|_| {
                MeshIoError::MalformedPayload(format!("expected number in {what}, got {tok:?}"))
            })
        }
    }
}

/// Upper bound on speculative preallocation so a hostile count cannot
/// exhaust memory before the payload is checked.
const MAX_PREALLOC: usize = 1 << 20;

fn read_elements(header: &Header, src: &mut dyn ValueSource) -> Result<TriangleMesh, MeshIoError> {
    let mut mesh = TriangleMesh::default();
    let mut saw_vertex = false;

    for element in &header.elements {
        match element.name.as_str() {
            "vertex" => {
                saw_vertex = true;
                read_vertices(element, src, &mut mesh)?;
            }
            "face" => read_faces(element, src, &mut mesh)?,
            _ => {
                for _ in 0..element.count {
                    for p in &element.props {
                        skip_property(p, src, &element.name)?;
                    }
                }
            }
        }
    }
    if !saw_vertex {
        return Err(MeshIoError::MalformedHeader("no 'vertex' element".into()));
    }
    let n = mesh.vertices.len();
    for (f, face) in mesh.faces.iter().enumerate() {
        if let Some(&bad) = face.iter().find(|&&i| i as usize >= n) {
            return Err(MeshIoError::IndexOutOfRange {
                face: f,
                index: bad as u64,
                vertex_count: n,
            });
        }
    }
    Ok(mesh)
}

fn skip_property(p: &Property, src: &mut dyn ValueSource, what: &str) -> Result<(), MeshIoError> {
    match p.kind {
        PropKind::Scalar(t) => {
            src.next(t, what)?;
        }
        PropKind::List { count, item } => {
            let len = list_len(src.next(count, what)?, what)?;
            for _ in 0..len {
                src.next(item, what)?;
            }
        }
    }
    Ok(())
}

fn list_len(raw: f64, what: &str) -> Result<usize, MeshIoError> {
    if raw < 0.0 || raw.fract() != 0.0 {
        return Err(MeshIoError::MalformedPayload(format!(
            "negative list length in {what}"
        )));
    }
    Ok(raw as usize)
}

fn read_vertices(
    element: &Element,
    src: &mut dyn ValueSource,
    mesh: &mut TriangleMesh,
) -> Result<(), MeshIoError> {
    let find = |name: &str| {
        element
            .props
            .iter()
            .position(|p| p.name == name && matches!(p.kind, PropKind::Scalar(_)))
    };
    let (Some(ix), Some(iy), Some(iz)) = (find("x"), find("y"), find("z")) else {
        return Err(MeshIoError::MalformedHeader(
            "vertex element must declare scalar x, y, z".into(),
        ));
    };
    let color_idx = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    let normal_idx = match (find("nx"), find("ny"), find("nz")) {
        (Some(x), Some(y), Some(z)) => Some([x, y, z]),
        _ => None,
    };
    let cap = element.count.min(MAX_PREALLOC);
    mesh.vertices.reserve(cap);
    let mut colors = color_idx.map(|_| Vec::with_capacity(cap));
    let mut normals = normal_idx.map(|_| Vec::with_capacity(cap));
    let mut slots = vec![0.0f64; element.props.len()];
    let color_is_float: Option<bool> = color_idx.map(|idx| {
        idx.iter()
            .any(|&i| matches!(element.props[i].kind, PropKind::Scalar(t) if !t.is_integer()))
    });

    for v in 0..element.count {
        for (slot, p) in slots.iter_mut().zip(&element.props) {
            match p.kind {
                PropKind::Scalar(t) => *slot = src.next(t, "vertex")?,
                PropKind::List { .. } => skip_property(p, src, "vertex")?,
            }
        }
        let point = Point3::new(slots[ix], slots[iy], slots[iz]);
        if !point.iter().all(|c| c.is_finite()) {
            return Err(MeshIoError::NonFiniteCoordinate(format!("vertex {v}")));
        }
        mesh.vertices.push(point);
        if let (Some(idx), Some(out)) = (color_idx, colors.as_mut()) {
            let scale = if color_is_float == Some(true) { 255.0 } else { 1.0 };
            out.push(idx.map(|i| (slots[i] * scale).round().clamp(0.0, 255.0) as u8));
        }
        if let (Some(idx), Some(out)) = (normal_idx, normals.as_mut()) {
            out.push(Vector3::new(slots[idx[0]], slots[idx[1]], slots[idx[2]]));
        }
    }
    mesh.vertex_colors = colors;
    mesh.vertex_normals = normals;
    Ok(())
}

fn read_faces(
    element: &Element,
    src: &mut dyn ValueSource,
    mesh: &mut TriangleMesh,
) -> Result<(), MeshIoError> {
    let list_idx = element
        .props
        .iter()
        .position(|p| {
            matches!(p.kind, PropKind::List { .. })
                && (p.name == "vertex_indices" || p.name == "vertex_index")
        })
        .ok_or_else(|| {
            MeshIoError::MalformedHeader("face element has no vertex_indices list".into())
        })?;
    mesh.faces.reserve(element.count.min(MAX_PREALLOC));
    for f in 0..element.count {
        let mut face = None;
        for (pi, p) in element.props.iter().enumerate() {
            if pi != list_idx {
                skip_property(p, src, "face")?;
                continue;
            }
            let PropKind::List { count, item } = p.kind else {
                unreachable!()
            };
            let len = list_len(src.next(count, "face")?, "face")?;
            if len != 3 {
                return Err(MeshIoError::NonTriangleFace(f, len));
            }
            let mut idx = [0u32; 3];
            for slot in idx.iter_mut() {
                let raw = src.next(item, "face")?;
                if raw < 0.0 || raw > u32::MAX as f64 || raw.fract() != 0.0 {
                    return Err(MeshIoError::IndexOutOfRange {
                        face: f,
                        index: if raw < 0.0 { u64::MAX } else { raw as u64 },
                        vertex_count: mesh.vertices.len(),
                    });
                }
                *slot = raw as u32;
            }
            face = Some(idx);
        }
        mesh.faces.push(face.expect("list index is in range"));
    }
    Ok(())
}

/// Parses a complete PLY file held in memory.
pub fn parse_ply(bytes: &[u8]) -> Result<TriangleMesh, MeshIoError> {
    let header = parse_header(bytes)?;
    let payload = &bytes[header.payload_start..];
    match header.format {
        PlyFormat::BinaryLittleEndian => {
            let mut src = BinarySource {
                data: payload,
                pos: 0,
            };
            read_elements(&header, &mut src)
        }
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(payload)
                .map_err(|_| MeshIoError::MalformedPayload("ascii payload is not UTF-8".into()))?;
            let mut src = AsciiSource {
                tokens: text.split_ascii_whitespace(),
            };
            read_elements(&header, &mut src)
        }
    }
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<TriangleMesh, MeshIoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| MeshIoError::io(path, e))?;
    parse_ply(&bytes)
}

/// Encodes a mesh as a complete PLY document.
pub fn serialize_ply(mesh: &TriangleMesh, format: PlyFormat) -> Result<Vec<u8>, MeshIoError> {
    let report = validate_mesh(mesh);
    if !report.is_ok() {
        return Err(MeshIoError::InvalidMesh(report.summary()));
    }
    let mut header = String::from("ply\n");
    header.push_str(match format {
        PlyFormat::Ascii => "format ascii 1.0\n",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    header.push_str("comment facegm\n");
    let _ = writeln!(header, "element vertex {}", mesh.vertices.len());
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if mesh.vertex_normals.is_some() {
        header.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    if mesh.vertex_colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    let _ = writeln!(header, "element face {}", mesh.faces.len());
    header.push_str("property list uchar int vertex_indices\nend_header\n");

    let mut out = header.into_bytes();
    match format {
        PlyFormat::BinaryLittleEndian => {
            out.reserve(mesh.vertices.len() * 51 + mesh.faces.len() * 13);
            for (i, v) in mesh.vertices.iter().enumerate() {
                for c in v.iter() {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                if let Some(normals) = &mesh.vertex_normals {
                    for c in normals[i].iter() {
                        out.extend_from_slice(&c.to_le_bytes());
                    }
                }
                if let Some(colors) = &mesh.vertex_colors {
                    out.extend_from_slice(&colors[i]);
                }
            }
            for face in &mesh.faces {
                out.push(3);
                for &i in face {
                    out.extend_from_slice(&(i as i32).to_le_bytes());
                }
            }
        }
        PlyFormat::Ascii => {
            // `{}` on f64 prints the shortest representation that parses back
            // to the same value, so ascii output also round-trips exactly.
            let mut text = String::new();
            for (i, v) in mesh.vertices.iter().enumerate() {
                let _ = write!(text, "{} {} {}", v.x, v.y, v.z);
                if let Some(normals) = &mesh.vertex_normals {
                    let nv = normals[i];
                    let _ = write!(text, " {} {} {}", nv.x, nv.y, nv.z);
                }
                if let Some(colors) = &mesh.vertex_colors {
                    let [r, g, b] = colors[i];
                    let _ = write!(text, " {r} {g} {b}");
                }
                text.push('\n');
            }
            for [a, b, c] in &mesh.faces {
                let _ = writeln!(text, "3 {a} {b} {c}");
            }
            out.extend_from_slice(text.as_bytes());
        }
    }
    Ok(out)
}

pub fn write_ply(
    mesh: &TriangleMesh,
    path: impl AsRef<Path>,
    format: PlyFormat,
) -> Result<(), MeshIoError> {
    let path = path.as_ref();
    let bytes = serialize_ply(mesh, format)?;
    fs::write(path, bytes).map_err(|e| MeshIoError::io(path, e))
}
