//! OBJ and binary PLY reading and writing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::mesh::IndexedMesh;
use crate::Point3;

#[derive(Debug, Error)]
pub enum MeshIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: unknown mesh extension (expected .obj or .ply)")]
    UnknownExtension { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self, MeshIoError> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::Ply),
            _ => Err(MeshIoError::UnknownExtension { path: path.into() }),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MeshIoError + '_ {
    move |source| MeshIoError::Io {
        path: path.into(),
        source,
    }
}

/// Reads a mesh, choosing the format from the extension.
pub fn read_mesh(path: impl AsRef<Path>) -> Result<IndexedMesh, MeshIoError> {
    let path = path.as_ref();
    match MeshFormat::from_path(path)? {
        MeshFormat::Obj => read_obj(path),
        MeshFormat::Ply => read_ply(path),
    }
}

/// Writes a mesh, choosing the format from the extension.
pub fn write_mesh(mesh: &IndexedMesh, path: impl AsRef<Path>) -> Result<(), MeshIoError> {
    let path = path.as_ref();
    match MeshFormat::from_path(path)? {
        MeshFormat::Obj => write_obj(mesh, path),
        MeshFormat::Ply => write_ply(mesh, path),
    }
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<IndexedMesh, MeshIoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_obj(BufReader::new(file), path)
}

/// Parses `v` and `f` records; other records are ignored. Polygons are
/// fan-triangulated; `v/vt/vn` and negative indices are accepted.
pub fn parse_obj<R: BufRead>(reader: R, path: &Path) -> Result<IndexedMesh, MeshIoError> {
    let mut mesh = IndexedMesh::default();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let perr = |message: String| MeshIoError::Parse {
            path: path.into(),
            line: n + 1,
            message,
        };
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let c: Vec<f64> = parts
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| perr(format!("bad coordinate {t:?}: {e}"))))
                    .collect::<Result<_, _>>()?;
                if c.len() != 3 {
                    return Err(perr("vertex needs three coordinates".into()));
                }
                mesh.vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let count = mesh.vertices.len() as i64;
                let idx: Vec<u32> = parts
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|e| perr(format!("bad index {t:?}: {e}")))?;
                        let resolved = if i < 0 { count + i } else { i - 1 };
                        if i == 0 || resolved < 0 || resolved >= count {
                            return Err(perr(format!("index {i} out of range")));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(perr("face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(mesh)
}

pub fn write_obj(mesh: &IndexedMesh, path: impl AsRef<Path>) -> Result<(), MeshIoError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    obj_to_writer(mesh, &mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// ASCII OBJ with 1-based indices. Coordinates use the shortest
/// representation that parses back to the same value.
pub fn obj_to_writer<W: Write>(mesh: &IndexedMesh, w: &mut W) -> std::io::Result<()> {
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn write_ply(mesh: &IndexedMesh, path: impl AsRef<Path>) -> Result<(), MeshIoError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    ply_to_writer(mesh, &mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Binary little-endian PLY with double coordinates and `uchar`/`int` faces.
pub fn ply_to_writer<W: Write>(mesh: &IndexedMesh, w: &mut W) -> std::io::Result<()> {
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    )?;
    for v in &mesh.vertices {
        for c in v.iter() {
            w.write_f64::<LittleEndian>(*c)?;
        }
    }
    for t in &mesh.triangles {
        w.write_u8(3)?;
        for &i in t {
            w.write_i32::<LittleEndian>(i as i32)?;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
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

    fn read<R: Read>(self, r: &mut R) -> std::io::Result<f64> {
        Ok(match self {
            Scalar::I8 => r.read_i8()? as f64,
            Scalar::U8 => r.read_u8()? as f64,
            Scalar::I16 => r.read_i16::<LittleEndian>()? as f64,
            Scalar::U16 => r.read_u16::<LittleEndian>()? as f64,
            Scalar::I32 => r.read_i32::<LittleEndian>()? as f64,
            Scalar::U32 => r.read_u32::<LittleEndian>()? as f64,
            Scalar::F32 => r.read_f32::<LittleEndian>()? as f64,
            Scalar::F64 => r.read_f64::<LittleEndian>()?,
        })
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<IndexedMesh, MeshIoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_ply(BufReader::new(file), path)
}

/// Reads a binary little-endian PLY. Vertex `x y z` may be float or double;
/// faces are fan-triangulated.
pub fn parse_ply<R: BufRead>(mut r: R, path: &Path) -> Result<IndexedMesh, MeshIoError> {
    let ferr = |message: String| MeshIoError::Format {
        path: path.into(),
        message,
    };
    let mut elements: Vec<Element> = Vec::new();
    let mut line = String::new();
    let mut first = true;
    loop {
        line.clear();
        if r.read_line(&mut line).map_err(io_err(path))? == 0 {
            return Err(ferr("header ended before end_header".into()));
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        if first {
            if t != ["ply"] {
                return Err(ferr("missing ply magic".into()));
            }
            first = false;
            continue;
        }
        match t.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", other, _] => return Err(ferr(format!("unsupported format {other}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| ferr(format!("bad element count {count}")))?,
                properties: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let el = elements.last_mut().ok_or_else(|| ferr("property before element".into()))?;
                let ct = Scalar::parse(ct).ok_or_else(|| ferr(format!("unknown type {ct}")))?;
                let it = Scalar::parse(it).ok_or_else(|| ferr(format!("unknown type {it}")))?;
                el.properties.push(Property::List(name.to_string(), ct, it));
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| ferr("property before element".into()))?;
                let ty = Scalar::parse(ty).ok_or_else(|| ferr(format!("unknown type {ty}")))?;
                el.properties.push(Property::Scalar(name.to_string(), ty));
            }
            ["end_header"] => break,
            other => return Err(ferr(format!("unexpected header line {:?}", other.join(" ")))),
        }
    }
    let eof = |e: std::io::Error| ferr(format!("truncated body: {e}"));
    let mut mesh = IndexedMesh::default();
    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [f64::NAN; 3];
            for prop in &el.properties {
                match prop {
                    Property::Scalar(name, ty) => {
                        let v = ty.read(&mut r).map_err(eof)?;
                        if let Some(a) = ["x", "y", "z"].iter().position(|n| n == name) {
                            xyz[a] = v;
                        }
                    }
                    Property::List(name, ct, it) => {
                        let n = ct.read(&mut r).map_err(eof)? as usize;
                        let mut idx = Vec::with_capacity(n);
                        for _ in 0..n {
                            idx.push(it.read(&mut r).map_err(eof)?);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            if n < 3 {
                                return Err(ferr("face with fewer than three vertices".into()));
                            }
                            let idx: Vec<u32> = idx.into_iter().map(|v| v as u32).collect();
                            for k in 1..n - 1 {
                                mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                if xyz.iter().any(|c| c.is_nan()) {
                    return Err(ferr("vertex element lacks x, y or z".into()));
                }
                mesh.vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
            }
        }
    }
    let nv = mesh.vertices.len() as u32;
    if mesh.triangles.iter().flatten().any(|&i| i >= nv) {
        return Err(ferr("face index out of range".into()));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use crate::Vector3;

    fn triangle() -> IndexedMesh {
        IndexedMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.1),
            ],
            vec![[0, 1, 2]],
        )
    }

    #[test]
    fn one_triangle_obj() {
        let mut buf = Vec::new();
        obj_to_writer(&triangle(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 3);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 1);
        assert!(text.contains("f 1 2 3"));
    }

    #[test]
    fn obj_round_trip_is_exact() {
        let m = shapes::uv_sphere(Point3::new(0.1, 0.2, 0.3), 0.7, 9, 7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.obj");
        write_obj(&m, &path).unwrap();
        let back = read_obj(&path).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
    }

    #[test]
    fn ply_round_trip_is_exact() {
        let m = shapes::cuboid(Point3::origin(), Vector3::new(0.3, 0.4, 0.5), 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ply");
        write_ply(&m, &path).unwrap();
        let back = read_ply(&path).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
    }

    #[test]
    fn obj_polygons_and_relative_indices() {
        let text = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\nf -4 -3 -2\n";
        let m = parse_obj(text.as_bytes(), Path::new("q.obj")).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3], [0, 1, 2]]);
    }

    #[test]
    fn obj_errors_name_file_and_line() {
        let err = parse_obj("v 0 0 0\nf 1 2 3\n".as_bytes(), Path::new("bad.obj")).unwrap_err();
        assert_eq!(err.to_string(), "bad.obj:2: index 2 out of range");
    }

    #[test]
    fn float_ply_with_extra_properties() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\ncomment test\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 1\nproperty list uchar uint vertex_indices\nend_header\n".to_vec();
        for v in [[0f32, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.5, 0.0]] {
            for c in v {
                bytes.write_f32::<LittleEndian>(c).unwrap();
            }
            bytes.push(255);
        }
        bytes.push(3);
        for i in [0u32, 1, 2] {
            bytes.write_u32::<LittleEndian>(i).unwrap();
        }
        let m = parse_ply(&bytes[..], Path::new("f.ply")).unwrap();
        assert_eq!(m.vertices[2], Point3::new(0.0, 0.5, 0.0));
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn missing_file_is_named() {
        let err = read_mesh("/nonexistent/dir/x.obj").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/x.obj"));
        assert!(matches!(read_mesh("a.stl"), Err(MeshIoError::UnknownExtension { .. })));
    }
}
