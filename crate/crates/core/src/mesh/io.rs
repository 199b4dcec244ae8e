//! ASCII OBJ and binary little-endian PLY for meshes and point sets.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{MeshError, Point3, TriangleMesh};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        message: message.into(),
    }
}

pub fn write_obj<W: Write>(mesh: &TriangleMesh, mut w: W) -> io::Result<()> {
    for v in &mesh.vertices {
        writeln!(w, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

/// Reads `v` and `f` records; faces with more than three corners are fanned.
/// Texture/normal references (`f 1/2/3`) keep only the position index.
pub fn read_obj<R: BufRead>(r: R) -> Result<TriangleMesh, FormatError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| parse_err(lineno, e.to_string()))?;
                if c.len() != 3 {
                    return Err(parse_err(lineno, "vertex needs 3 coordinates"));
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = it
                    .map(|s| {
                        let head = s.split('/').next().unwrap_or("");
                        let i: i64 = head
                            .parse()
                            .map_err(|_| parse_err(lineno, format!("bad index {s:?}")))?;
                        let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        if resolved < 0 {
                            return Err(parse_err(lineno, format!("bad index {s:?}")));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(parse_err(lineno, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriangleMesh::new(vertices, triangles)?)
}

/// Binary PLY with double-precision vertices and `uchar`/`int` face lists.
pub fn write_ply<W: Write>(vertices: &[Point3], triangles: &[[u32; 3]], mut w: W) -> io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "element vertex {}", vertices.len())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    if !triangles.is_empty() {
        writeln!(w, "element face {}", triangles.len())?;
        writeln!(w, "property list uchar int vertex_indices")?;
    }
    writeln!(w, "end_header")?;
    for v in vertices {
        for c in [v.x, v.y, v.z] {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    for t in triangles {
        w.write_all(&[3u8])?;
        for &i in t {
            w.write_all(&(i as i32).to_le_bytes())?;
        }
    }
    Ok(())
}

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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
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

    fn read<R: Read>(self, r: &mut R) -> io::Result<f64> {
        let mut buf = [0u8; 8];
        Ok(match self {
            Self::I8 => {
                r.read_exact(&mut buf[..1])?;
                buf[0] as i8 as f64
            }
            Self::U8 => {
                r.read_exact(&mut buf[..1])?;
                buf[0] as f64
            }
            Self::I16 => {
                r.read_exact(&mut buf[..2])?;
                i16::from_le_bytes([buf[0], buf[1]]) as f64
            }
            Self::U16 => {
                r.read_exact(&mut buf[..2])?;
                u16::from_le_bytes([buf[0], buf[1]]) as f64
            }
            Self::I32 => {
                r.read_exact(&mut buf[..4])?;
                i32::from_le_bytes(buf[..4].try_into().unwrap()) as f64
            }
            Self::U32 => {
                r.read_exact(&mut buf[..4])?;
                u32::from_le_bytes(buf[..4].try_into().unwrap()) as f64
            }
            Self::F32 => {
                r.read_exact(&mut buf[..4])?;
                f32::from_le_bytes(buf[..4].try_into().unwrap()) as f64
            }
            Self::F64 => {
                r.read_exact(&mut buf)?;
                f64::from_le_bytes(buf)
            }
        })
    }
}

enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// Reads a binary little-endian PLY. Returns vertices and, when present,
/// triangulated faces.
pub fn read_ply<R: BufRead>(mut r: R) -> Result<(Vec<Point3>, Vec<[u32; 3]>), FormatError> {
    let mut elements: Vec<Element> = Vec::new();
    let mut lineno = 0;
    let mut line = String::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(parse_err(lineno, "unexpected end of header"));
        }
        lineno += 1;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["ply"] if lineno == 1 => {}
            _ if lineno == 1 => return Err(parse_err(1, "missing ply magic")),
            ["format", "binary_little_endian", _] => {}
            ["format", other, _] => return Err(FormatError::Unsupported(format!("PLY {other}"))),
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad element count"))?,
                properties: Vec::new(),
            }),
            ["property", "list", count_ty, item_ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(lineno, "property before element"))?;
                let c = Scalar::parse(count_ty).ok_or_else(|| parse_err(lineno, "bad type"))?;
                let i = Scalar::parse(item_ty).ok_or_else(|| parse_err(lineno, "bad type"))?;
                el.properties.push(Property::List(name.to_string(), c, i));
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(lineno, "property before element"))?;
                let s = Scalar::parse(ty).ok_or_else(|| parse_err(lineno, "bad type"))?;
                el.properties.push(Property::Scalar(name.to_string(), s));
            }
            ["end_header"] => break,
            [] => {}
            _ => return Err(parse_err(lineno, format!("unexpected header line {line:?}"))),
        }
    }

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            let mut face: Vec<u32> = Vec::new();
            for prop in &el.properties {
                match prop {
                    Property::Scalar(name, ty) => {
                        let v = ty.read(&mut r)?;
                        match name.as_str() {
                            "x" => xyz[0] = v,
                            "y" => xyz[1] = v,
                            "z" => xyz[2] = v,
                            _ => {}
                        }
                    }
                    Property::List(name, cty, ity) => {
                        let n = cty.read(&mut r)? as usize;
                        for _ in 0..n {
                            let v = ity.read(&mut r)?;
                            if name == "vertex_indices" || name == "vertex_index" {
                                face.push(v as u32);
                            }
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => vertices.push(Point3::new(xyz[0], xyz[1], xyz[2])),
                "face" => {
                    if face.len() < 3 {
                        return Err(parse_err(lineno, "face with fewer than 3 vertices"));
                    }
                    for k in 1..face.len() - 1 {
                        triangles.push([face[0], face[k], face[k + 1]]);
                    }
                }
                _ => {}
            }
        }
    }
    Ok((vertices, triangles))
}

pub fn read_ply_mesh<R: BufRead>(r: R) -> Result<TriangleMesh, FormatError> {
    let (vertices, triangles) = read_ply(r)?;
    Ok(TriangleMesh::new(vertices, triangles)?)
}

/// Loads a mesh by extension (`.obj` or `.ply`).
pub fn load_mesh(path: &Path) -> Result<TriangleMesh, FormatError> {
    let r = BufReader::new(File::open(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("obj") => read_obj(r),
        Some(e) if e.eq_ignore_ascii_case("ply") => read_ply_mesh(r),
        other => Err(FormatError::Unsupported(format!("mesh extension {other:?}"))),
    }
}

pub fn save_mesh(mesh: &TriangleMesh, path: &Path) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("obj") => write_obj(mesh, &mut w)?,
        Some(e) if e.eq_ignore_ascii_case("ply") => {
            write_ply(&mesh.vertices, &mesh.triangles, &mut w)?
        }
        other => return Err(FormatError::Unsupported(format!("mesh extension {other:?}"))),
    }
    w.flush()?;
    Ok(())
}
