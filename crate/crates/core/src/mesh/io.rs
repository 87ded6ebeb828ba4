//! ASCII OFF / COFF / OBJ readers and writers, plus label files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{Label, Mesh};
use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    /// Guesses the format from the file extension (`.off`, `.coff`, `.obj`).
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "off" | "coff" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

impl FromStr for MeshFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "off" | "coff" => Ok(MeshFormat::Off),
            "obj" => Ok(MeshFormat::Obj),
            other => Err(format!("unknown mesh format '{other}' (expected off or obj)")),
        }
    }
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<Mesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (vertices, faces) = match format {
        MeshFormat::Off => parse_off(&text, path)?,
        MeshFormat::Obj => parse_obj(&text, path)?,
    };
    Mesh::new(vertices, faces)
}

/// Writes `mesh`. With `vertex_colors`, OFF output becomes `COFF` (`r g b 255`
/// per vertex) and OBJ output appends `r g b` in [0, 1] to each `v` line.
pub fn save_mesh(
    mesh: &Mesh,
    path: &Path,
    format: MeshFormat,
    vertex_colors: Option<&[[u8; 3]]>,
) -> Result<()> {
    if let Some(c) = vertex_colors {
        if c.len() != mesh.vertex_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} colors for {} vertices",
                c.len(),
                mesh.vertex_count()
            )));
        }
    }
    let mut out = String::new();
    match format {
        MeshFormat::Off => {
            out.push_str(if vertex_colors.is_some() { "COFF\n" } else { "OFF\n" });
            let _ = writeln!(out, "{} {} 0", mesh.vertex_count(), mesh.face_count());
            for (i, v) in mesh.vertices().iter().enumerate() {
                let _ = write!(out, "{} {} {}", v[0], v[1], v[2]);
                if let Some(c) = vertex_colors {
                    let _ = write!(out, " {} {} {} 255", c[i][0], c[i][1], c[i][2]);
                }
                out.push('\n');
            }
            for f in mesh.faces() {
                let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
            }
        }
        MeshFormat::Obj => {
            for (i, v) in mesh.vertices().iter().enumerate() {
                let _ = write!(out, "v {} {} {}", v[0], v[1], v[2]);
                if let Some(c) = vertex_colors {
                    let [r, g, b] = c[i].map(|x| x as f64 / 255.0);
                    let _ = write!(out, " {r} {g} {b}");
                }
                out.push('\n');
            }
            for f in mesh.faces() {
                let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn perr(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: FromStr>(tok: &str, path: &Path, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| perr(path, line, format!("cannot parse '{tok}' as a number")))
}

fn parse_off(text: &str, path: &Path) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    // Tokens grouped by significant (non-blank, non-comment) line.
    let mut lines = text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then(|| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
    });

    let (hline, mut header) = lines.next().ok_or_else(|| perr(path, 1, "empty file"))?;
    let colored = match header[0] {
        "OFF" => false,
        "COFF" => true,
        other => return Err(perr(path, hline, format!("expected OFF header, found '{other}'"))),
    };
    header.remove(0);
    let (cline, counts) = if header.is_empty() {
        lines
            .next()
            .ok_or_else(|| perr(path, hline, "missing counts line"))?
    } else {
        (hline, header)
    };
    if counts.len() < 2 {
        return Err(perr(path, cline, "counts line needs 'N_V N_F [N_E]'"));
    }
    let nv: usize = parse_num(counts[0], path, cline)?;
    let nf: usize = parse_num(counts[1], path, cline)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, toks) = lines
            .next()
            .ok_or_else(|| perr(path, cline, format!("expected {nv} vertices, file ended early")))?;
        let need = if colored { 7 } else { 3 };
        if toks.len() < 3 || (colored && toks.len() < need) {
            return Err(perr(path, ln, format!("vertex line needs {need} values")));
        }
        vertices.push([
            parse_num(toks[0], path, ln)?,
            parse_num(toks[1], path, ln)?,
            parse_num(toks[2], path, ln)?,
        ]);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, toks) = lines
            .next()
            .ok_or_else(|| perr(path, cline, format!("expected {nf} faces, file ended early")))?;
        let k: usize = parse_num(toks[0], path, ln)?;
        if k != 3 {
            return Err(perr(path, ln, format!("only triangles are supported, found a {k}-gon")));
        }
        if toks.len() < 4 {
            return Err(perr(path, ln, "face line needs 3 indices"));
        }
        faces.push([
            parse_num(toks[1], path, ln)?,
            parse_num(toks[2], path, ln)?,
            parse_num(toks[3], path, ln)?,
        ]);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(perr(path, ln, "unexpected trailing data"));
    }
    Ok((vertices, faces))
}

fn parse_obj(text: &str, path: &Path) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        let mut toks = l.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<&str> = toks.collect();
                if c.len() < 3 {
                    return Err(perr(path, ln, "vertex line needs 3 coordinates"));
                }
                vertices.push([
                    parse_num(c[0], path, ln)?,
                    parse_num(c[1], path, ln)?,
                    parse_num(c[2], path, ln)?,
                ]);
            }
            Some("f") => {
                let c: Vec<&str> = toks.collect();
                if c.len() != 3 {
                    return Err(perr(
                        path,
                        ln,
                        format!("only triangles are supported, found a {}-gon", c.len()),
                    ));
                }
                let mut f = [0usize; 3];
                for (slot, tok) in f.iter_mut().zip(&c) {
                    // "i", "i/t", "i//n", "i/t/n"; negative indices count from the end.
                    let head = tok.split('/').next().unwrap_or("");
                    let idx: i64 = parse_num(head, path, ln)?;
                    let resolved = match idx {
                        0 => return Err(perr(path, ln, "OBJ indices are 1-based; found 0")),
                        n if n > 0 => n - 1,
                        n => vertices.len() as i64 + n,
                    };
                    if resolved < 0 {
                        return Err(perr(path, ln, format!("index {idx} out of range")));
                    }
                    *slot = resolved as usize;
                }
                faces.push(f);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

/// One integer per line; `-1` marks an unlabeled vertex.
pub fn read_labels(path: &Path) -> Result<Vec<Label>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let v: i64 = parse_num(l, path, i + 1)?;
        match v {
            -1 => out.push(None),
            v if v >= 0 => out.push(Some(v as usize)),
            v => return Err(perr(path, i + 1, format!("invalid label {v}"))),
        }
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &[Label]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 5);
    for l in labels {
        match l {
            Some(v) => {
                let _ = writeln!(out, "{v}");
            }
            None => out.push_str("-1\n"),
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
