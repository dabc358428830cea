//! Wavefront OBJ subset: `v`, `vt`, `f` (with `v`, `v/vt`, `v/vt/vn`, `v//vn`
//! corners). Normals, materials and groups are ignored.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{TriMesh, Vec2, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ObjWarning {
    /// A face collapsed to fewer than three distinct vertices and was dropped.
    DegenerateFace { line: usize },
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text).map(|(mesh, _)| mesh)
}

struct Corner {
    v: usize,
    vt: Option<usize>,
}

fn resolve(raw: &str, count: usize, line: usize, what: &str) -> Result<usize> {
    let idx: i64 =
        raw.parse().map_err(|_| Error::Parse { line, message: format!("malformed {what} index '{raw}'") })?;
    let resolved = if idx > 0 {
        idx - 1
    } else if idx < 0 {
        count as i64 + idx
    } else {
        -1
    };
    if resolved < 0 || resolved as usize >= count {
        return Err(Error::Parse { line, message: format!("{what} index {idx} out of range ({count} defined)") });
    }
    Ok(resolved as usize)
}

fn parse_floats<const N: usize>(
    parts: &mut std::str::SplitWhitespace<'_>,
    line: usize,
    what: &str,
) -> Result<[f64; N]> {
    let mut out = [0.0f64; N];
    for slot in out.iter_mut() {
        let tok =
            parts.next().ok_or_else(|| Error::Parse { line, message: format!("{what} needs {N} coordinates") })?;
        *slot =
            tok.parse().map_err(|_| Error::Parse { line, message: format!("malformed {what} coordinate '{tok}'") })?;
        if !slot.is_finite() {
            return Err(Error::Parse { line, message: format!("non-finite {what} coordinate") });
        }
    }
    Ok(out)
}

/// Parses OBJ text. Polygons are fan-triangulated from their first corner.
pub fn parse_obj(text: &str) -> Result<(TriMesh, Vec<ObjWarning>)> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut texcoords: Vec<Vec2> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut uv_corners: Vec<Vec2> = Vec::new();
    let mut faces_with_uv = 0usize;
    let mut warnings = Vec::new();

    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw_line.split('#').next().unwrap_or("");
        let mut parts = content.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        match tag {
            "v" => vertices.push(parse_floats::<3>(&mut parts, line, "vertex")?),
            "vt" => texcoords.push(parse_floats::<2>(&mut parts, line, "texcoord")?),
            "f" => {
                let corners = parts
                    .map(|tok| {
                        let mut fields = tok.split('/');
                        let v = resolve(fields.next().unwrap_or(""), vertices.len(), line, "vertex")?;
                        let vt = match fields.next() {
                            Some(s) if !s.is_empty() => Some(resolve(s, texcoords.len(), line, "texcoord")?),
                            _ => None,
                        };
                        Ok(Corner { v, vt })
                    })
                    .collect::<Result<Vec<_>>>()?;
                if corners.len() < 3 {
                    return Err(Error::Parse { line, message: format!("face has {} corners", corners.len()) });
                }
                let with_uv = corners.iter().filter(|c| c.vt.is_some()).count();
                if with_uv != 0 && with_uv != corners.len() {
                    return Err(Error::Parse { line, message: "face mixes corners with and without texcoords".into() });
                }
                let has_uv = with_uv == corners.len();
                if has_uv != (faces_with_uv == faces.len()) && !faces.is_empty() {
                    return Err(Error::Parse {
                        line,
                        message: "faces disagree on whether texcoords are present".into(),
                    });
                }
                for k in 1..corners.len() - 1 {
                    let tri = [&corners[0], &corners[k], &corners[k + 1]];
                    let idx = tri.map(|c| c.v);
                    if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
                        warnings.push(ObjWarning::DegenerateFace { line });
                        continue;
                    }
                    faces.push(idx);
                    if has_uv {
                        faces_with_uv += 1;
                        uv_corners.extend(tri.iter().map(|c| texcoords[c.vt.expect("checked")]));
                    }
                }
            }
            _ => {}
        }
    }

    if vertices.is_empty() {
        return Err(Error::EmptyMesh("vertices"));
    }
    if faces.is_empty() {
        return Err(Error::EmptyMesh("faces"));
    }
    let uv = (faces_with_uv == faces.len()).then_some(uv_corners);
    Ok((TriMesh::build(vertices, faces, uv)?, warnings))
}

/// Formats with nine significant digits, `%g` style.
pub(crate) fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let mut s = if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{:.8e}", x)
    };
    // Rounding can carry into a new digit (9.9999999995 -> 10.00000000); either
    // way trailing zeros after the point carry no information.
    if let Some(epos) = s.find('e') {
        let (mant, tail) = s.split_at(epos);
        let mant = trim_zeros(mant);
        s = format!("{mant}{tail}");
    } else {
        s = trim_zeros(&s);
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Deterministic OBJ text. Texture coordinates are deduplicated in first-use order.
pub fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for p in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", fmt_sig9(p[0]), fmt_sig9(p[1]), fmt_sig9(p[2]));
    }
    match mesh.uv_corners() {
        None => {
            for f in mesh.faces() {
                let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
        Some(uv) => {
            let mut slots: HashMap<(String, String), usize> = HashMap::new();
            let mut corner_slot = Vec::with_capacity(uv.len());
            let mut vt_lines = String::new();
            for c in uv {
                let key = (fmt_sig9(c[0]), fmt_sig9(c[1]));
                let next = slots.len();
                let slot = *slots.entry(key.clone()).or_insert_with(|| {
                    let _ = writeln!(vt_lines, "vt {} {}", key.0, key.1);
                    next
                });
                corner_slot.push(slot);
            }
            out.push_str(&vt_lines);
            for (fi, f) in mesh.faces().iter().enumerate() {
                let t = &corner_slot[3 * fi..3 * fi + 3];
                let _ =
                    writeln!(out, "f {}/{} {}/{} {}/{}", f[0] + 1, t[0] + 1, f[1] + 1, t[1] + 1, f[2] + 1, t[2] + 1);
            }
        }
    }
    out
}

pub fn save_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_obj(mesh)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_triangle() {
        let (m, w) = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert!(w.is_empty());
        assert_eq!(m.face_count(), 1);
        assert_eq!(m.edges().len(), 3);
        assert!(m.uv_corners().is_none());
    }

    #[test]
    fn texcoord_corners() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nvn 0 0 1\nf 1/1/1 2/2/1 3/3/1\n";
        let (m, _) = parse_obj(text).unwrap();
        let uv = m.uv_corners().unwrap();
        assert_eq!(uv.len(), 3);
        assert_eq!(uv[1], [1.0, 0.0]);
    }

    #[test]
    fn quad_fan() {
        let (m, _) = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
        assert_eq!(m.vertex_count(), 4);
    }

    #[test]
    fn negative_indices_and_ignored_directives() {
        let text = "mtllib a.mtl\no thing\nv 0 0 0\nv 1 0 0\nv 0 1 0\ng grp\nusemtl m\ns 1\nf -3 -2 -1\n";
        let (m, _) = parse_obj(text).unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        match parse_obj("v 0 0 0\nv 1 x 0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_obj("# nothing\n"), Err(Error::EmptyMesh(_))));
        assert!(matches!(parse_obj("v 0 0 0\n"), Err(Error::EmptyMesh("faces"))));
    }

    #[test]
    fn degenerate_face_warns() {
        let (m, w) = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\nf 1 1 2\n").unwrap();
        assert_eq!(m.face_count(), 1);
        assert_eq!(w, vec![ObjWarning::DegenerateFace { line: 5 }]);
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(-0.0), "0");
        assert_eq!(fmt_sig9(1.0), "1");
        assert_eq!(fmt_sig9(-0.5), "-0.5");
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(123456.789123), "123456.789");
        assert_eq!(fmt_sig9(1.5e-7), "1.5e-7");
        assert_eq!(fmt_sig9(2.0e12), "2e12");
    }

    #[test]
    fn round_trip_with_uvs() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\nf 1/1 2/2 3/3 4/4\n";
        let (m, _) = parse_obj(text).unwrap();
        let out = write_obj(&m);
        assert!(out.contains("vt 1 1\n"));
        assert!(out.contains("f 1/1 2/2 3/3\n"));
        let (again, _) = parse_obj(&out).unwrap();
        assert_eq!(again, m);
        assert_eq!(write_obj(&again), out);
    }
}
