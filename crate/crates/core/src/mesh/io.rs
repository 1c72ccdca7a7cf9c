//! STL, PLY and OBJ readers and writers.
//!
//! PLY files may carry an integer per-vertex property named `region`, which
//! populates [`TriangleMesh::labels`]. Binary PLY stores coordinates as
//! doubles and round-trips exactly; binary STL stores 32-bit floats.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{face_normals, MeshError, Region, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Stl,
    #[default]
    Ply,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "stl" => Some(MeshFormat::Stl),
            "ply" => Some(MeshFormat::Ply),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::from_path(Path::new(&format!("x.{name}")))
    }

    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Stl => "stl",
            MeshFormat::Ply => "ply",
            MeshFormat::Obj => "obj",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Ascii,
    #[default]
    Binary,
}

/// Loads a mesh, detecting the format from the file extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh, MeshError> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path).ok_or_else(|| MeshError::UnknownFormat(path.display().to_string()))?;
    load_mesh_as(path, format)
}

pub fn load_mesh_as(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriangleMesh, MeshError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let ctx = Ctx {
        path: path.display().to_string(),
    };
    match format {
        MeshFormat::Stl => read_stl(&bytes, &ctx),
        MeshFormat::Ply => read_ply(&bytes, &ctx),
        MeshFormat::Obj => read_obj(&bytes, &ctx),
    }
}

pub fn save_mesh(
    mesh: &TriangleMesh,
    path: impl AsRef<Path>,
    format: MeshFormat,
    encoding: Encoding,
) -> Result<(), MeshError> {
    let path = path.as_ref();
    let bytes = match (format, encoding) {
        (MeshFormat::Stl, Encoding::Binary) => write_stl_binary(mesh),
        (MeshFormat::Stl, Encoding::Ascii) => write_stl_ascii(mesh),
        (MeshFormat::Ply, enc) => write_ply(mesh, enc),
        (MeshFormat::Obj, _) => write_obj(mesh),
    };
    let io_err = |source| MeshError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(&bytes).map_err(io_err)
}

struct Ctx {
    path: String,
}

impl Ctx {
    fn err(&self, location: impl Into<String>, message: impl Into<String>) -> MeshError {
        MeshError::Parse {
            path: self.path.clone(),
            location: location.into(),
            message: message.into(),
        }
    }

    fn line(&self, line: usize, message: impl Into<String>) -> MeshError {
        self.err(format!("line {line}"), message)
    }

    fn byte(&self, offset: usize, message: impl Into<String>) -> MeshError {
        self.err(format!("byte {offset}"), message)
    }
}

fn finish(
    ctx: &Ctx,
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    labels: Option<Vec<Region>>,
) -> Result<TriangleMesh, MeshError> {
    TriangleMesh::new(vertices, triangles, labels).map_err(|e| ctx.err("mesh", e.to_string()))
}

// ---------------------------------------------------------------- STL

/// Merges bit-identical STL corners into shared vertices.
#[derive(Default)]
struct Welder {
    lookup: HashMap<[u64; 3], usize>,
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    collapsed: usize,
}

impl Welder {
    fn vertex(&mut self, p: [f64; 3]) -> usize {
        // +0.0 and -0.0 are the same corner
        let key = p.map(|v| if v == 0.0 { 0u64 } else { v.to_bits() });
        *self.lookup.entry(key).or_insert_with(|| {
            self.vertices.push(Point3::new(p[0], p[1], p[2]));
            self.vertices.len() - 1
        })
    }

    fn triangle(&mut self, corners: [[f64; 3]; 3]) {
        let tri = corners.map(|c| self.vertex(c));
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            self.collapsed += 1;
        } else {
            self.triangles.push(tri);
        }
    }

    fn into_mesh(self, ctx: &Ctx) -> Result<TriangleMesh, MeshError> {
        if self.collapsed > 0 {
            log::debug!(
                "{}: dropped {} STL facets with coincident corners",
                ctx.path,
                self.collapsed
            );
        }
        finish(ctx, self.vertices, self.triangles, None)
    }
}

fn read_stl(bytes: &[u8], ctx: &Ctx) -> Result<TriangleMesh, MeshError> {
    if bytes.len() >= 84 {
        let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        if bytes.len() == 84 + 50 * count {
            return read_stl_binary(bytes, count, ctx);
        }
    }
    let head = String::from_utf8_lossy(&bytes[..bytes.len().min(5)]);
    if head.eq_ignore_ascii_case("solid") {
        read_stl_ascii(bytes, ctx)
    } else {
        Err(ctx.byte(80, "binary STL facet count does not match file size"))
    }
}

fn read_stl_binary(bytes: &[u8], count: usize, ctx: &Ctx) -> Result<TriangleMesh, MeshError> {
    let mut welder = Welder::default();
    let f32_at = |o: usize| f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    for i in 0..count {
        let base = 84 + 50 * i + 12;
        let mut corners = [[0.0; 3]; 3];
        for (k, corner) in corners.iter_mut().enumerate() {
            for (j, v) in corner.iter_mut().enumerate() {
                let offset = base + 12 * k + 4 * j;
                let value = f32_at(offset);
                if !value.is_finite() {
                    return Err(ctx.byte(offset, "non-finite coordinate"));
                }
                *v = value as f64;
            }
        }
        welder.triangle(corners);
    }
    welder.into_mesh(ctx)
}

fn read_stl_ascii(bytes: &[u8], ctx: &Ctx) -> Result<TriangleMesh, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ctx.byte(e.valid_up_to(), "invalid UTF-8"))?;
    let mut welder = Welder::default();
    let mut corners: Vec<[f64; 3]> = Vec::with_capacity(3);
    let mut in_loop = false;
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("outer") => {
                in_loop = true;
                corners.clear();
            }
            Some("vertex") => {
                if !in_loop {
                    return Err(ctx.line(lineno, "vertex outside of an outer loop"));
                }
                let coords: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| ctx.line(lineno, format!("bad coordinate: {e}")))?;
                if coords.len() != 3 || coords.iter().any(|c| !c.is_finite()) {
                    return Err(ctx.line(lineno, "vertex needs three finite coordinates"));
                }
                corners.push([coords[0], coords[1], coords[2]]);
            }
            Some("endloop") => {
                if corners.len() != 3 {
                    return Err(ctx.line(lineno, format!("facet has {} vertices, expected 3", corners.len())));
                }
                welder.triangle([corners[0], corners[1], corners[2]]);
                in_loop = false;
            }
            _ => {}
        }
    }
    if in_loop {
        return Err(ctx.err("end of file", "unterminated outer loop"));
    }
    welder.into_mesh(ctx)
}

fn stl_normals(mesh: &TriangleMesh) -> Vec<[f32; 3]> {
    face_normals(mesh)
        .into_iter()
        .map(|n| n.map_or([0.0; 3], |n| [n.x as f32, n.y as f32, n.z as f32]))
        .collect()
}

fn write_stl_binary(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.triangle_count());
    let mut header = [0u8; 80];
    let tag = b"binary STL written by spinerecon";
    header[..tag.len()].copy_from_slice(tag);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.triangle_count() as u32).to_le_bytes());
    for (t, n) in stl_normals(mesh).iter().enumerate() {
        for v in n {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for p in mesh.triangle_points(t) {
            for k in 0..3 {
                out.extend_from_slice(&(p[k] as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&[0, 0]);
    }
    out
}

fn write_stl_ascii(mesh: &TriangleMesh) -> Vec<u8> {
    let mut s = String::from("solid spinerecon\n");
    for (t, n) in stl_normals(mesh).iter().enumerate() {
        s.push_str(&format!("  facet normal {} {} {}\n    outer loop\n", n[0], n[1], n[2]));
        for p in mesh.triangle_points(t) {
            s.push_str(&format!("      vertex {} {} {}\n", p.x, p.y, p.z));
        }
        s.push_str("    endloop\n  endfacet\n");
    }
    s.push_str("endsolid spinerecon\n");
    s.into_bytes()
}

// ---------------------------------------------------------------- PLY

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(name: &str) -> Option<Self> {
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

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, kind: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, PartialEq)]
enum PlyEncoding {
    Ascii,
    BinaryLe,
}

struct PlyHeader {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    body_offset: usize,
    body_line: usize,
}

fn parse_ply_header(bytes: &[u8], ctx: &Ctx) -> Result<PlyHeader, MeshError> {
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut offset = 0;
    let mut lineno = 0;
    loop {
        let rest = &bytes[offset..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return Err(ctx.err("header", "missing end_header"));
        };
        lineno += 1;
        let line = String::from_utf8_lossy(&rest[..nl]);
        let line = line.trim_end_matches('\r').trim();
        offset += nl + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if lineno == 1 {
            if line != "ply" {
                return Err(ctx.line(1, "missing 'ply' magic"));
            }
            continue;
        }
        match tokens.first().copied() {
            Some("format") => {
                encoding = Some(match tokens.get(1).copied() {
                    Some("ascii") => PlyEncoding::Ascii,
                    Some("binary_little_endian") => PlyEncoding::BinaryLe,
                    Some(other) => return Err(ctx.line(lineno, format!("unsupported PLY format '{other}'"))),
                    None => return Err(ctx.line(lineno, "format line without a value")),
                });
            }
            Some("element") => {
                let (Some(name), Some(count)) = (tokens.get(1), tokens.get(2)) else {
                    return Err(ctx.line(lineno, "element needs a name and a count"));
                };
                let count = count
                    .parse()
                    .map_err(|_| ctx.line(lineno, format!("bad element count '{count}'")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| ctx.line(lineno, "property before any element"))?;
                let bad = || ctx.line(lineno, format!("malformed property line '{line}'"));
                let property = if tokens.get(1) == Some(&"list") {
                    let count = tokens.get(2).and_then(|t| Scalar::parse(t)).ok_or_else(bad)?;
                    let item = tokens.get(3).and_then(|t| Scalar::parse(t)).ok_or_else(bad)?;
                    let name = tokens.get(4).ok_or_else(bad)?.to_string();
                    Property::List { name, count, item }
                } else {
                    let kind = tokens.get(1).and_then(|t| Scalar::parse(t)).ok_or_else(bad)?;
                    let name = tokens.get(2).ok_or_else(bad)?.to_string();
                    Property::Scalar { name, kind }
                };
                element.properties.push(property);
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(ctx.line(lineno, format!("unknown header keyword '{other}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| ctx.err("header", "missing format line"))?;
    Ok(PlyHeader {
        encoding,
        elements,
        body_offset: offset,
        body_line: lineno,
    })
}

/// Sequential reader over the PLY body in either encoding.
enum BodyReader<'a> {
    Ascii {
        tokens: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
        last_line: usize,
    },
    Binary {
        bytes: &'a [u8],
        offset: usize,
    },
}

impl<'a> BodyReader<'a> {
    fn location(&self) -> String {
        match self {
            BodyReader::Ascii { last_line, .. } => format!("line {last_line}"),
            BodyReader::Binary { offset, .. } => format!("byte {offset}"),
        }
    }

    fn next(&mut self, kind: Scalar, ctx: &Ctx) -> Result<f64, MeshError> {
        match self {
            BodyReader::Ascii { tokens, last_line } => {
                let (line, tok) = tokens
                    .next()
                    .ok_or_else(|| ctx.err("end of file", "unexpected end of PLY body"))?;
                *last_line = line;
                let v: f64 = tok.parse().map_err(|_| ctx.line(line, format!("bad number '{tok}'")))?;
                if kind.is_integer() && v.fract() != 0.0 {
                    return Err(ctx.line(line, format!("expected an integer, got '{tok}'")));
                }
                Ok(v)
            }
            BodyReader::Binary { bytes, offset } => {
                let size = kind.size();
                if *offset + size > bytes.len() {
                    return Err(ctx.byte(*offset, "unexpected end of PLY body"));
                }
                let v = kind.read_le(&bytes[*offset..*offset + size]);
                *offset += size;
                Ok(v)
            }
        }
    }
}

fn read_ply(bytes: &[u8], ctx: &Ctx) -> Result<TriangleMesh, MeshError> {
    let header = parse_ply_header(bytes, ctx)?;
    let body = &bytes[header.body_offset..];
    let mut reader = match header.encoding {
        PlyEncoding::Ascii => {
            let text = std::str::from_utf8(body)
                .map_err(|e| ctx.byte(header.body_offset + e.valid_up_to(), "invalid UTF-8"))?;
            let first = header.body_line + 1;
            let iter: Box<dyn Iterator<Item = (usize, &str)>> = Box::new(
                text.lines()
                    .enumerate()
                    .flat_map(move |(i, l)| l.split_whitespace().map(move |t| (first + i, t))),
            );
            BodyReader::Ascii {
                tokens: iter.peekable(),
                last_line: first,
            }
        }
        PlyEncoding::BinaryLe => BodyReader::Binary {
            bytes,
            offset: header.body_offset,
        },
    };

    let mut vertices = Vec::new();
    let mut labels: Option<Vec<Region>> = None;
    let mut triangles = Vec::new();
    let mut vertex_count = None;

    for element in &header.elements {
        match element.name.as_str() {
            "vertex" => {
                let find = |n: &str| element.properties.iter().position(|p| p.name() == n);
                let (Some(ix), Some(iy), Some(iz)) = (find("x"), find("y"), find("z")) else {
                    return Err(ctx.err("header", "vertex element lacks x/y/z"));
                };
                let iregion = find("region");
                if let Some(i) = iregion {
                    match &element.properties[i] {
                        Property::Scalar { kind, .. } if kind.is_integer() => {}
                        _ => return Err(ctx.err("header", "region property must be a scalar integer")),
                    }
                    labels = Some(Vec::with_capacity(element.count));
                }
                vertex_count = Some(element.count);
                vertices.reserve(element.count);
                let mut values = vec![0.0; element.properties.len()];
                for _ in 0..element.count {
                    for (k, prop) in element.properties.iter().enumerate() {
                        values[k] = read_property(&mut reader, prop, ctx)?;
                    }
                    let p = Point3::new(values[ix], values[iy], values[iz]);
                    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                        return Err(ctx.err(reader.location(), "non-finite vertex coordinate"));
                    }
                    vertices.push(p);
                    if let (Some(i), Some(out)) = (iregion, labels.as_mut()) {
                        let code = values[i] as i64;
                        let region = Region::from_code(code)
                            .ok_or_else(|| ctx.err(reader.location(), format!("unknown region code {code}")))?;
                        out.push(region);
                    }
                }
            }
            "face" => {
                let list = element
                    .properties
                    .iter()
                    .position(|p| {
                        matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index")
                    })
                    .ok_or_else(|| ctx.err("header", "face element lacks vertex_indices"))?;
                let n = vertex_count.unwrap_or(vertices.len());
                triangles.reserve(element.count);
                for _ in 0..element.count {
                    for (k, prop) in element.properties.iter().enumerate() {
                        match prop {
                            Property::List { count, item, .. } => {
                                let len = reader.next(*count, ctx)? as usize;
                                let mut idx = Vec::with_capacity(len);
                                for _ in 0..len {
                                    idx.push(reader.next(*item, ctx)?);
                                }
                                if k != list {
                                    continue;
                                }
                                if len != 3 {
                                    return Err(ctx.err(
                                        reader.location(),
                                        format!("face with {len} vertices; only triangles are supported"),
                                    ));
                                }
                                let mut tri = [0usize; 3];
                                for (slot, &v) in tri.iter_mut().zip(&idx) {
                                    if v < 0.0 || v as usize >= n {
                                        return Err(ctx.err(
                                            reader.location(),
                                            format!("face index {v} out of range for {n} vertices"),
                                        ));
                                    }
                                    *slot = v as usize;
                                }
                                triangles.push(tri);
                            }
                            Property::Scalar { kind, .. } => {
                                reader.next(*kind, ctx)?;
                            }
                        }
                    }
                }
            }
            _ => {
                for _ in 0..element.count {
                    for prop in &element.properties {
                        read_property(&mut reader, prop, ctx)?;
                    }
                }
            }
        }
    }
    finish(ctx, vertices, triangles, labels)
}

fn read_property(reader: &mut BodyReader<'_>, prop: &Property, ctx: &Ctx) -> Result<f64, MeshError> {
    match prop {
        Property::Scalar { kind, .. } => reader.next(*kind, ctx),
        Property::List { count, item, .. } => {
            let len = reader.next(*count, ctx)? as usize;
            for _ in 0..len {
                reader.next(*item, ctx)?;
            }
            Ok(len as f64)
        }
    }
}

fn write_ply(mesh: &TriangleMesh, encoding: Encoding) -> Vec<u8> {
    let format = match encoding {
        Encoding::Ascii => "ascii",
        Encoding::Binary => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {format} 1.0\ncomment written by spinerecon\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\n",
        mesh.vertex_count()
    );
    let labels = mesh.labels();
    if labels.is_some() {
        out.push_str("property uchar region\n");
    }
    out.push_str(&format!(
        "element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.triangle_count()
    ));
    let mut bytes = out.into_bytes();
    match encoding {
        Encoding::Ascii => {
            let mut body = String::new();
            for (i, v) in mesh.vertices().iter().enumerate() {
                body.push_str(&format!("{} {} {}", v.x, v.y, v.z));
                if let Some(l) = labels {
                    body.push_str(&format!(" {}", l[i].code()));
                }
                body.push('\n');
            }
            for t in mesh.triangles() {
                body.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
            }
            bytes.extend_from_slice(body.as_bytes());
        }
        Encoding::Binary => {
            for (i, v) in mesh.vertices().iter().enumerate() {
                for k in 0..3 {
                    bytes.extend_from_slice(&v[k].to_le_bytes());
                }
                if let Some(l) = labels {
                    bytes.push(l[i].code());
                }
            }
            for t in mesh.triangles() {
                bytes.push(3);
                for &i in t {
                    bytes.extend_from_slice(&(i as i32).to_le_bytes());
                }
            }
        }
    }
    bytes
}

// ---------------------------------------------------------------- OBJ

fn read_obj(bytes: &[u8], ctx: &Ctx) -> Result<TriangleMesh, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ctx.byte(e.valid_up_to(), "invalid UTF-8"))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|e| ctx.line(lineno, format!("bad coordinate: {e}")))?;
                if coords.len() != 3 || coords.iter().any(|c| !c.is_finite()) {
                    return Err(ctx.line(lineno, "vertex needs three finite coordinates"));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let refs: Vec<&str> = tokens.collect();
                if refs.len() != 3 {
                    return Err(ctx.line(
                        lineno,
                        format!("face with {} vertices; only triangles are supported", refs.len()),
                    ));
                }
                let mut tri = [0usize; 3];
                for (slot, r) in tri.iter_mut().zip(refs) {
                    let head = r.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| ctx.line(lineno, format!("bad face index '{r}'")))?;
                    let n = vertices.len() as i64;
                    let resolved = if i < 0 { n + i } else { i - 1 };
                    if resolved < 0 || resolved >= n {
                        return Err(ctx.line(lineno, format!("face index {i} out of range for {n} vertices")));
                    }
                    *slot = resolved as usize;
                }
                if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                    return Err(ctx.line(lineno, "face repeats a vertex index"));
                }
                triangles.push(tri);
            }
            _ => {}
        }
    }
    finish(ctx, vertices, triangles, None)
}

fn write_obj(mesh: &TriangleMesh) -> Vec<u8> {
    let mut s = String::from("# written by spinerecon\n");
    for v in mesh.vertices() {
        s.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for t in mesh.triangles() {
        s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    s.into_bytes()
}
