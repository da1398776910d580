use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::{MeshError, TriangleMesh};

/// On-disk mesh encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    /// ASCII OFF, 0-based indices.
    Off,
    /// Paired `.vert` / `.tri` text files, 1-based triangle indices.
    VertTri,
}

impl MeshFormat {
    /// Guess from the file extension: `.off` is OFF, `.vert`/`.tri` are the pair.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(Self::Off),
            "vert" | "tri" => Some(Self::VertTri),
            _ => None,
        }
    }
}

fn read(path: &Path) -> Result<String, MeshError> {
    std::fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a mesh from disk. For [`MeshFormat::VertTri`] the path may name
/// either file of the pair or their common stem.
pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriangleMesh, MeshError> {
    let mesh = match format {
        MeshFormat::Off => parse_off(&read(path)?)?,
        MeshFormat::VertTri => {
            let (vert, tri) = vert_tri_paths(path);
            parse_vert_tri(&read(&vert)?, &read(&tri)?)?
        }
    };
    if mesh.num_vertices() < 3 {
        return Err(MeshError::Validation(format!(
            "mesh has {} vertices; at least 3 are required",
            mesh.num_vertices()
        )));
    }
    Ok(mesh)
}

fn vert_tri_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("vert") | Some("tri") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    (with("vert"), with("tri"))
}

/// Non-empty lines with `#` comments stripped, tagged with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, MeshError> {
    tok.parse().map_err(|_| MeshError::Format {
        line,
        message: format!("cannot parse {what} from {tok:?}"),
    })
}

fn parse_point(tokens: &[&str], line: usize) -> Result<[f64; 3], MeshError> {
    if tokens.len() < 3 {
        return Err(MeshError::Format { line, message: "expected three coordinates".into() });
    }
    Ok([
        parse_num(tokens[0], line, "coordinate")?,
        parse_num(tokens[1], line, "coordinate")?,
        parse_num(tokens[2], line, "coordinate")?,
    ])
}

pub fn parse_off(text: &str) -> Result<TriangleMesh, MeshError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(MeshError::Format {
        line: 1,
        message: "empty file".into(),
    })?;
    let mut head: Vec<&str> = header.split_whitespace().collect();
    if head.first().map(|h| h.to_ascii_uppercase()) != Some("OFF".into()) {
        return Err(MeshError::Format { line: hline, message: "missing OFF header".into() });
    }
    head.remove(0);
    // counts may share the header line
    let (cline, counts) = if head.is_empty() {
        let (l, c) = lines.next().ok_or(MeshError::Format {
            line: hline,
            message: "missing element counts".into(),
        })?;
        (l, c.split_whitespace().collect::<Vec<_>>())
    } else {
        (hline, head)
    };
    if counts.len() < 2 {
        return Err(MeshError::Format { line: cline, message: "expected vertex and face counts".into() });
    }
    let nv: usize = parse_num(counts[0], cline, "vertex count")?;
    let nf: usize = parse_num(counts[1], cline, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, line) = lines.next().ok_or(MeshError::Format {
            line: cline,
            message: format!("file ends before {nv} vertices were read"),
        })?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        vertices.push(parse_point(&tokens, l)?);
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, line) = lines.next().ok_or(MeshError::Format {
            line: cline,
            message: format!("file ends before {nf} faces were read"),
        })?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let arity: usize = parse_num(tokens[0], l, "face arity")?;
        if arity != 3 {
            return Err(MeshError::Format {
                line: l,
                message: format!("only triangles are supported, found a {arity}-gon"),
            });
        }
        if tokens.len() < 4 {
            return Err(MeshError::Format { line: l, message: "expected three vertex indices".into() });
        }
        let mut tri = [0usize; 3];
        for k in 0..3 {
            tri[k] = parse_num(tokens[k + 1], l, "vertex index")?;
            if tri[k] >= nv {
                return Err(MeshError::Validation(format!(
                    "line {l}: vertex index {} out of range [0, {nv})",
                    tri[k]
                )));
            }
        }
        triangles.push(tri);
    }
    TriangleMesh::new(vertices, triangles)
}

/// Parses the `.vert` / `.tri` pair; triangle indices are 1-based in the file.
pub fn parse_vert_tri(vert: &str, tri: &str) -> Result<TriangleMesh, MeshError> {
    let mut vertices = Vec::new();
    for (l, line) in content_lines(vert) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        vertices.push(parse_point(&tokens, l)?);
    }
    let n = vertices.len();
    let mut triangles = Vec::new();
    for (l, line) in content_lines(tri) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 3 {
            return Err(MeshError::Format { line: l, message: "expected three vertex indices".into() });
        }
        let mut t = [0usize; 3];
        for k in 0..3 {
            // TOSCA stores indices as floats ("12.0") in some releases
            let raw: f64 = parse_num(tokens[k], l, "vertex index")?;
            if raw.fract() != 0.0 || raw < 1.0 || raw > n as f64 {
                return Err(MeshError::Validation(format!(
                    "line {l}: 1-based vertex index {raw} out of range [1, {n}]"
                )));
            }
            t[k] = raw as usize - 1;
        }
        triangles.push(t);
    }
    TriangleMesh::new(vertices, triangles)
}

/// ASCII OFF with shortest round-trip float formatting.
pub fn write_off<W: Write>(mesh: &TriangleMesh, mut w: W) -> io::Result<()> {
    writeln!(w, "OFF\n{} {} 0", mesh.num_vertices(), mesh.num_triangles())?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}
