//! Rigged hand mesh and its text fixture format.
//!
//! ```text
//! touchlink-mesh 1
//! joints <n>            then n lines: x y z
//! bones <n>             then n lines: parent child
//! bind <n>              then n lines: r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz
//! vertices <n>          then n lines: x y z
//! uvs <n>               then n lines: u v
//! weights <n>           then n lines: k bone_1 w_1 ... bone_k w_k
//! faces <n>             then n lines: a b c
//! texture <w> <h>       then w*h lines (row-major, top row first): r g b
//! end
//! ```
//!
//! Lengths are meters, colors linear RGB in `[0, 1]`. Blank lines and lines
//! starting with `#` are ignored. Numbers are written in shortest round-trip form.

use std::fmt::Write as _;

use nalgebra::Point3;

use super::{check_joints, check_topology, HandSkeleton, BONE_COUNT};
use crate::error::{Error, Result};
use crate::geometry::{rigid_from_array, rigid_to_array, validate_rigid, Rigid};
use crate::raster::RgbImage;
use crate::render::MeshView;

/// Weight rows must sum to one within this tolerance.
pub const WEIGHT_TOLERANCE: f64 = 1e-6;

const HEADER: &str = "touchlink-mesh 1";

#[derive(Debug, Clone, PartialEq)]
pub struct RiggedHandMesh {
    pub rest_vertices: Vec<Point3<f64>>,
    pub faces: Vec<[u32; 3]>,
    pub uvs: Vec<[f32; 2]>,
    pub texture: RgbImage,
    /// Sparse `(bone, weight)` rows, one per vertex.
    pub skin_weights: Vec<Vec<(usize, f64)>>,
    pub bones: Vec<(usize, usize)>,
    /// Rest-pose skeleton the weights and bind transforms refer to.
    pub rest_joints: Vec<Point3<f64>>,
    /// Bone-local to site frame at rest.
    pub bind_transforms: Vec<Rigid>,
}

impl RiggedHandMesh {
    pub fn bone_count(&self) -> usize {
        self.bones.len()
    }

    pub fn rest_skeleton(&self) -> Result<HandSkeleton> {
        HandSkeleton::at_rest(self.rest_joints.clone(), 0)
    }

    pub fn view<'a>(&'a self, positions: &'a [Point3<f64>]) -> MeshView<'a> {
        MeshView {
            positions,
            faces: &self.faces,
            uvs: &self.uvs,
            texture: &self.texture,
        }
    }

    pub(crate) fn check_weights(&self) -> Result<()> {
        if self.skin_weights.len() != self.rest_vertices.len() {
            return Err(Error::Structural(format!(
                "{} weight rows for {} vertices",
                self.skin_weights.len(),
                self.rest_vertices.len()
            )));
        }
        for (i, row) in self.skin_weights.iter().enumerate() {
            let mut sum = 0.0;
            for &(bone, w) in row {
                if bone >= self.bones.len() {
                    return Err(Error::Structural(format!("vertex {i} weights bone {bone}")));
                }
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::Validation(format!("vertex {i} has weight {w}")));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
                return Err(Error::Validation(format!("vertex {i} weights sum to {sum}")));
            }
        }
        Ok(())
    }

    /// Checks every structural and numeric invariant of the mesh.
    pub fn validate(&self) -> Result<()> {
        check_topology(&self.bones)?;
        check_joints(&self.rest_joints)?;
        if self.bind_transforms.len() != BONE_COUNT {
            return Err(Error::Structural("bind transform count does not match bones".into()));
        }
        for b in &self.bind_transforms {
            validate_rigid(b)?;
        }
        if self.uvs.len() != self.rest_vertices.len() {
            return Err(Error::Structural("uv count does not match vertices".into()));
        }
        if let Some(uv) = self.uvs.iter().find(|uv| !uv.iter().all(|c| (0.0..=1.0).contains(c))) {
            return Err(Error::Validation(format!("uv {uv:?} outside [0,1]^2")));
        }
        if self.rest_vertices.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Validation("non-finite vertex".into()));
        }
        let n = self.rest_vertices.len() as u32;
        if let Some(f) = self.faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(Error::Structural(format!("face {f:?} indexes past {n} vertices")));
        }
        if self.texture.data.len() != self.texture.width * self.texture.height || self.texture.data.is_empty() {
            return Err(Error::Structural("texture size mismatch".into()));
        }
        self.check_weights()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{HEADER}");
        let _ = writeln!(s, "joints {}", self.rest_joints.len());
        for p in &self.rest_joints {
            let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
        }
        let _ = writeln!(s, "bones {}", self.bones.len());
        for (p, c) in &self.bones {
            let _ = writeln!(s, "{p} {c}");
        }
        let _ = writeln!(s, "bind {}", self.bind_transforms.len());
        for b in &self.bind_transforms {
            let a = rigid_to_array(b).map(|v| v.to_string());
            let _ = writeln!(s, "{}", a.join(" "));
        }
        let _ = writeln!(s, "vertices {}", self.rest_vertices.len());
        for p in &self.rest_vertices {
            let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
        }
        let _ = writeln!(s, "uvs {}", self.uvs.len());
        for uv in &self.uvs {
            let _ = writeln!(s, "{} {}", uv[0], uv[1]);
        }
        let _ = writeln!(s, "weights {}", self.skin_weights.len());
        for row in &self.skin_weights {
            let _ = write!(s, "{}", row.len());
            for (b, w) in row {
                let _ = write!(s, " {b} {w}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "faces {}", self.faces.len());
        for f in &self.faces {
            let _ = writeln!(s, "{} {} {}", f[0], f[1], f[2]);
        }
        let _ = writeln!(s, "texture {} {}", self.texture.width, self.texture.height);
        for t in &self.texture.data {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s.push_str("end\n");
        s
    }

    /// Parses and validates the text fixture format.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let (line, header) = lines.next_line()?;
        if header != HEADER {
            return Err(Error::Parse {
                line,
                message: format!("expected header {HEADER:?}"),
            });
        }

        let n = lines.section("joints")?;
        let rest_joints = lines.rows(n, |l, t| Ok(Point3::from(parse_floats::<3>(l, t)?)))?;
        let n = lines.section("bones")?;
        let bones = lines.rows(n, |l, t| {
            let v = parse_ints::<2>(l, t)?;
            Ok((v[0], v[1]))
        })?;
        let n = lines.section("bind")?;
        let bind_transforms = lines.rows(n, |l, t| {
            rigid_from_array(&parse_floats::<12>(l, t)?).map_err(|e| Error::Parse {
                line: l,
                message: e.to_string(),
            })
        })?;
        let n = lines.section("vertices")?;
        let rest_vertices = lines.rows(n, |l, t| Ok(Point3::from(parse_floats::<3>(l, t)?)))?;
        let n = lines.section("uvs")?;
        let uvs = lines.rows(n, |l, t| {
            parse_nums::<f32, 2>(l, t)
        })?;
        let n = lines.section("weights")?;
        let skin_weights = lines.rows(n, parse_weight_row)?;
        let n = lines.section("faces")?;
        let faces = lines.rows(n, |l, t| {
            let v = parse_ints::<3>(l, t)?;
            Ok([v[0] as u32, v[1] as u32, v[2] as u32])
        })?;
        let (line, tex_header) = lines.next_line()?;
        let dims: Vec<&str> = tex_header.split_whitespace().collect();
        if dims.len() != 3 || dims[0] != "texture" {
            return Err(Error::Parse {
                line,
                message: "expected `texture <w> <h>`".into(),
            });
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>().map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })
        };
        let (w, h) = (parse_dim(dims[1])?, parse_dim(dims[2])?);
        let data = lines.rows(w * h, |l, t| {
            parse_nums::<f32, 3>(l, t)
        })?;
        let (line, end) = lines.next_line()?;
        if end != "end" {
            return Err(Error::Parse {
                line,
                message: "expected `end`".into(),
            });
        }

        let mesh = Self {
            rest_vertices,
            faces,
            uvs,
            texture: RgbImage {
                width: w,
                height: h,
                data,
            },
            skin_weights,
            bones,
            rest_joints,
            bind_transforms,
        };
        mesh.validate()?;
        Ok(mesh)
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
        }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let t = l.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok((i + 1, t));
            }
        }
        Err(Error::Parse {
            line: 0,
            message: "unexpected end of file".into(),
        })
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let (line, t) = self.next_line()?;
        let mut it = t.split_whitespace();
        match (it.next(), it.next().map(str::parse::<usize>), it.next()) {
            (Some(n), Some(Ok(count)), None) if n == name => Ok(count),
            _ => Err(Error::Parse {
                line,
                message: format!("expected `{name} <count>`, found {t:?}"),
            }),
        }
    }

    fn rows<T>(&mut self, n: usize, f: impl Fn(usize, &str) -> Result<T>) -> Result<Vec<T>> {
        (0..n)
            .map(|_| {
                let (l, t) = self.next_line()?;
                f(l, t)
            })
            .collect()
    }
}

fn parse_nums<T: std::str::FromStr, const N: usize>(line: usize, t: &str) -> Result<[T; N]>
where
    T::Err: std::fmt::Display,
{
    let v: Vec<T> = t
        .split_whitespace()
        .map(str::parse::<T>)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
    let found = v.len();
    v.try_into().map_err(|_| Error::Parse {
        line,
        message: format!("expected {N} values, found {found}"),
    })
}

fn parse_floats<const N: usize>(line: usize, t: &str) -> Result<[f64; N]> {
    parse_nums::<f64, N>(line, t)
}

fn parse_ints<const N: usize>(line: usize, t: &str) -> Result<[usize; N]> {
    parse_nums::<usize, N>(line, t)
}

fn parse_weight_row(line: usize, t: &str) -> Result<Vec<(usize, f64)>> {
    let err = |message: String| Error::Parse { line, message };
    let tok: Vec<&str> = t.split_whitespace().collect();
    let k: usize = tok
        .first()
        .ok_or_else(|| err("empty weight row".into()))?
        .parse()
        .map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
    if tok.len() != 1 + 2 * k {
        return Err(err(format!("weight row declares {k} pairs but has {} tokens", tok.len() - 1)));
    }
    (0..k)
        .map(|i| {
            let b = tok[1 + 2 * i]
                .parse::<usize>()
                .map_err(|e| err(e.to_string()))?;
            let w = tok[2 + 2 * i]
                .parse::<f64>()
                .map_err(|e| err(e.to_string()))?;
            Ok((b, w))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton_rig::template_mesh;

    #[test]
    fn text_round_trip_is_exact() {
        let mesh = template_mesh();
        let text = mesh.to_text();
        let back = RiggedHandMesh::from_text(&text).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn loader_rejects_unnormalized_weights() {
        let mut mesh = template_mesh();
        mesh.skin_weights[0] = vec![(0, 0.25), (1, 0.25)];
        let err = RiggedHandMesh::from_text(&mesh.to_text()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn loader_rejects_out_of_range_face() {
        let mut mesh = template_mesh();
        let n = mesh.rest_vertices.len() as u32;
        mesh.faces[0] = [0, 1, n];
        assert!(matches!(
            RiggedHandMesh::from_text(&mesh.to_text()),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn loader_rejects_bad_bone_index_and_bind() {
        let mut mesh = template_mesh();
        mesh.skin_weights[1] = vec![(25, 1.0)];
        assert!(RiggedHandMesh::from_text(&mesh.to_text()).is_err());

        let mut mesh = template_mesh();
        mesh.bind_transforms[0] = Rigid::from_parts(
            nalgebra::Translation3::identity(),
            nalgebra::Rotation3::from_matrix_unchecked(nalgebra::Matrix3::identity() * 3.0),
        );
        assert!(RiggedHandMesh::from_text(&mesh.to_text()).is_err());
    }

    #[test]
    fn loader_reports_line_numbers() {
        let text = "touchlink-mesh 1\njoints 1\n1 2\n";
        match RiggedHandMesh::from_text(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
