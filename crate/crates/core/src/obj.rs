//! ASCII OBJ import and export (`v` and `f` records only).

use std::io::{BufRead, Write};

use crate::mesh::{planar_face_uv, ClothMesh};
use crate::{Error, Result, Vec2, Vec3};

/// Formats `x` with 9 significant digits, trimming trailing zeros.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        let s = format!("{x:.8e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{e}")
    }
}

pub fn write_obj<W: Write>(mut w: W, positions: &[Vec3], faces: &[[usize; 3]]) -> Result<()> {
    for p in positions {
        writeln!(w, "v {} {} {}", format_sig9(p.x), format_sig9(p.y), format_sig9(p.z))?;
    }
    for f in faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn obj_string(positions: &[Vec3], faces: &[[usize; 3]]) -> String {
    let mut buf = Vec::new();
    write_obj(&mut buf, positions, faces).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Reads positions and triangular faces. Polygon faces are fan-triangulated;
/// `vt`/`vn` references in face records are ignored.
pub fn read_obj<R: BufRead>(r: R) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = ln + 1;
        let err = |message: String| Error::Obj { line: line_no, message };
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|e| err(format!("bad coordinate `{s}`: {e}"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                positions.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|s| {
                        let head = s.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|e| err(format!("bad index `{s}`: {e}")))?;
                        let resolved = if i < 0 { positions.len() as i64 + i } else { i - 1 };
                        if resolved < 0 || resolved as usize >= positions.len() {
                            return Err(err(format!("index {i} out of range")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((positions, faces))
}

/// Builds a cloth mesh from OBJ data with the file's configuration as rest state.
pub fn mesh_from_obj<R: BufRead>(r: R, density: f64) -> Result<ClothMesh> {
    let (positions, faces) = read_obj(r)?;
    let face_uv = faces
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            planar_face_uv([positions[f[0]], positions[f[1]], positions[f[2]]])
                .ok_or(Error::DegenerateFace { face: fi, area: 0.0 })
        })
        .collect::<Result<Vec<_>>>()?;
    let rest_uv = positions.iter().map(|p| Vec2::new(p.x, p.y)).collect();
    ClothMesh::from_parts(positions, faces, face_uv, rest_uv, density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_grid;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(0.1), "0.1");
        assert_eq!(format_sig9(-0.15), "-0.15");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(123.456789012), "123.456789");
        assert_eq!(format_sig9(1.5e-9), "1.5e-9");
        assert_eq!(format_sig9(-1e-12), "-1e-12");
        assert_eq!(format_sig9(-1e-20), "-1e-20");
    }

    #[test]
    fn round_trip() {
        let m = build_grid(0.3, 0.2, 4, 3, 0.1).unwrap();
        let text = obj_string(&m.positions, &m.faces);
        assert!(text.starts_with("v 0 0 0\n"));
        let (p, f) = read_obj(text.as_bytes()).unwrap();
        assert_eq!(f, m.faces);
        for (a, b) in p.iter().zip(&m.positions) {
            assert!((a - b).norm() < 1e-9);
        }
        let back = mesh_from_obj(text.as_bytes(), 0.1).unwrap();
        assert_eq!(back.hinges.len(), m.hinges.len());
        assert!((back.total_mass() - m.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn quads_and_slashes() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\n";
        let (_, f) = read_obj(text.as_bytes()).unwrap();
        assert_eq!(f, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(read_obj("v 0 0\n".as_bytes()).is_err());
        assert!(read_obj("v 0 0 0\nf 1 2 3\n".as_bytes()).is_err());
    }
}
