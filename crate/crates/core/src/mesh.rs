//! Textured triangle meshes: loading, validation, saving, vertex lookup.
//!
//! Geometry is OBJ-style text (`v` / `vt` / `f` records). UV coordinates are
//! stored per vertex: index `j` of the UV list belongs to vertex `j`. Files
//! that specify UVs per face corner are collapsed to that form by splitting
//! any vertex referenced with more than one distinct UV into duplicates, so
//! the index correspondence between vertices and UVs always holds.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::spatial::{Metric, SpatialIndex};

/// Texture image reference. Pixels are loaded lazily; most of the pipeline
/// only needs the dimensions.
#[derive(Debug, Clone)]
pub struct TextureRef {
    pub path: Option<PathBuf>,
    pub width: u32,
    pub height: u32,
}

impl TextureRef {
    /// Reference an image file, decoding only its header for dimensions.
    pub fn from_file(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let (width, height) = image::image_dimensions(&path).map_err(|source| Error::Image {
            path: path.clone(),
            source,
        })?;
        Ok(TextureRef {
            path: Some(path),
            width,
            height,
        })
    }

    /// Reference with known dimensions and no backing file (synthetic meshes,
    /// tests, geometry-only workflows).
    pub fn with_dims(width: u32, height: u32) -> Self {
        TextureRef {
            path: None,
            width,
            height,
        }
    }

    /// Decode the full image.
    pub fn load(&self) -> Result<image::RgbImage> {
        let path = self.path.as_ref().ok_or_else(|| Error::Config {
            message: "texture reference has no backing file".into(),
        })?;
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.clone(),
            source,
        })?;
        Ok(img.to_rgb8())
    }
}

/// A triangle mesh with per-vertex UV coordinates and a texture reference.
///
/// Immutable after construction; shared freely across threads.
#[derive(Debug, Clone)]
pub struct TexturedMesh {
    pub id: String,
    pub subject_id: Option<String>,
    pub pose_tag: Option<String>,
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
    /// One `[u, v]` in `[0,1]^2` per vertex.
    pub uv: Vec<[f64; 2]>,
    pub texture: TextureRef,
}

impl TexturedMesh {
    /// Build a mesh, enforcing every structural invariant.
    pub fn new(
        id: impl Into<String>,
        vertices: Vec<Point3<f64>>,
        faces: Vec<[usize; 3]>,
        uv: Vec<[f64; 2]>,
        texture: TextureRef,
    ) -> Result<Self> {
        let mesh = TexturedMesh {
            id: id.into(),
            subject_id: None,
            pose_tag: None,
            vertices,
            faces,
            uv,
            texture,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        if self.vertices.is_empty() || self.faces.is_empty() {
            return Err(Error::EmptyMesh {
                id: self.id.clone(),
            });
        }
        if self.uv.len() != self.vertices.len() {
            let vertex = self.uv.len().min(self.vertices.len());
            return Err(Error::UvMismatch { vertex });
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.coords.iter().all(|c| c.is_finite()) {
                return Err(Error::Parse {
                    path: PathBuf::new(),
                    line: 0,
                    message: format!("vertex {i} has non-finite coordinates"),
                });
            }
        }
        for (i, &[a, b, c]) in self.faces.iter().enumerate() {
            let n = self.vertices.len();
            if a >= n || b >= n || c >= n {
                return Err(Error::Parse {
                    path: PathBuf::new(),
                    line: 0,
                    message: format!(
                        "face {i} references vertex {} of {n}",
                        [a, b, c].into_iter().max().unwrap()
                    ),
                });
            }
            if a == b || b == c || a == c {
                return Err(Error::Parse {
                    path: PathBuf::new(),
                    line: 0,
                    message: format!("face {i} is degenerate: [{a}, {b}, {c}]"),
                });
            }
        }
        for (i, &[u, v]) in self.uv.iter().enumerate() {
            if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
                return Err(Error::Parse {
                    path: PathBuf::new(),
                    line: 0,
                    message: format!("uv {i} outside [0,1]^2: [{u}, {v}]"),
                });
            }
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// L2 index over vertex positions.
    pub fn vertex_index(&self) -> SpatialIndex<3> {
        let pts = self.vertices.iter().map(|p| [p.x, p.y, p.z]).collect();
        SpatialIndex::build(pts, Metric::L2)
    }

    /// L1 index over UV coordinates.
    pub fn uv_index(&self) -> SpatialIndex<2> {
        SpatialIndex::build(self.uv.clone(), Metric::L1)
    }
}

/// Index of the vertex closest (L2) to `point`; ties break to the lowest index.
pub fn nearest_vertex(index: &SpatialIndex<3>, point: &Point3<f64>) -> Result<usize> {
    index.nearest(&[point.x, point.y, point.z]).map(|(i, _)| i)
}

/// Load an OBJ-style geometry file together with its texture image.
pub fn load_mesh(geometry: impl AsRef<Path>, texture: impl AsRef<Path>) -> Result<TexturedMesh> {
    let texture = TextureRef::from_file(texture.as_ref())?;
    load_geometry(geometry, texture)
}

/// Load geometry with an explicit texture reference (no image file needed).
pub fn load_geometry(geometry: impl AsRef<Path>, texture: TextureRef) -> Result<TexturedMesh> {
    let path = geometry.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mesh".to_string());
    parse_obj(&text, path, id, texture)
}

struct Corner {
    vertex: usize,
    uv: Option<usize>,
    line: usize,
}

fn parse_obj(text: &str, path: &Path, id: String, texture: TextureRef) -> Result<TexturedMesh> {
    let mut positions: Vec<Point3<f64>> = Vec::new();
    let mut uvs: Vec<[f64; 2]> = Vec::new();
    let mut face_corners: Vec<[Corner; 3]> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let tag = fields.next().unwrap();
        match tag {
            "v" => {
                let coords = parse_floats(&mut fields, 3, path, line, "v")?;
                positions.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            "vt" => {
                let coords = parse_floats(&mut fields, 2, path, line, "vt")?;
                uvs.push([coords[0], coords[1]]);
            }
            "f" => {
                let corners: Vec<&str> = fields.collect();
                if corners.len() != 3 {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("face with {} corners; triangles required", corners.len()),
                    ));
                }
                let mut parsed = Vec::with_capacity(3);
                for c in corners {
                    parsed.push(parse_corner(c, positions.len(), uvs.len(), path, line)?);
                }
                let [a, b, c]: [Corner; 3] = parsed.try_into().ok().unwrap();
                face_corners.push([a, b, c]);
            }
            // Normals, materials, groups and the rest are irrelevant here.
            _ => {}
        }
    }

    if positions.is_empty() || face_corners.is_empty() {
        return Err(Error::EmptyMesh { id });
    }

    let corner_uvs = face_corners
        .iter()
        .flatten()
        .any(|corner| corner.uv.is_some());

    let (vertices, uv, faces) = if corner_uvs {
        collapse_corner_uvs(positions, &uvs, &face_corners, path)?
    } else {
        // Positional UV assignment: vt index j belongs to vertex j.
        if uvs.len() < positions.len() {
            return Err(Error::UvMismatch { vertex: uvs.len() });
        }
        let uv = uvs[..positions.len()].to_vec();
        let faces = face_corners
            .iter()
            .map(|f| [f[0].vertex, f[1].vertex, f[2].vertex])
            .collect();
        (positions, uv, faces)
    };

    let mut mesh = TexturedMesh::new(id, vertices, faces, uv, texture)?;
    mesh.subject_id = None;
    mesh.pose_tag = None;
    Ok(mesh)
}

/// Rewrite per-corner UV references as per-vertex UVs, duplicating any vertex
/// carrying more than one distinct UV (seam vertices).
fn collapse_corner_uvs(
    mut positions: Vec<Point3<f64>>,
    uvs: &[[f64; 2]],
    face_corners: &[[Corner; 3]],
    path: &Path,
) -> Result<(Vec<Point3<f64>>, Vec<[f64; 2]>, Vec<[usize; 3]>)> {
    let original = positions.len();
    let mut assigned: Vec<Option<usize>> = vec![None; original];
    let mut split: HashMap<(usize, usize), usize> = HashMap::new();
    let mut faces = Vec::with_capacity(face_corners.len());

    for f in face_corners {
        let mut tri = [0usize; 3];
        for (slot, corner) in f.iter().enumerate() {
            let uv_idx = corner.uv.ok_or_else(|| {
                Error::parse(
                    path,
                    corner.line,
                    format!("face corner for vertex {} lacks a vt reference", corner.vertex + 1),
                )
            })?;
            let v = corner.vertex;
            tri[slot] = match assigned[v] {
                None => {
                    assigned[v] = Some(uv_idx);
                    v
                }
                Some(existing) if existing == uv_idx => v,
                Some(_) => *split.entry((v, uv_idx)).or_insert_with(|| {
                    positions.push(positions[v]);
                    positions.len() - 1
                }),
            };
        }
        faces.push(tri);
    }

    if let Some(vertex) = assigned.iter().position(|a| a.is_none()) {
        // A vertex no face touches has no UV to inherit.
        return Err(Error::UvMismatch { vertex });
    }

    let mut uv = vec![[0.0, 0.0]; positions.len()];
    for (v, a) in assigned.iter().enumerate() {
        uv[v] = uvs[a.unwrap()];
    }
    for (&(_, uv_idx), &dup) in &split {
        uv[dup] = uvs[uv_idx];
    }
    Ok((positions, uv, faces))
}

fn parse_floats(
    fields: &mut dyn Iterator<Item = &str>,
    want: usize,
    path: &Path,
    line: usize,
    tag: &str,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(want);
    for _ in 0..want {
        let field = fields
            .next()
            .ok_or_else(|| Error::parse(path, line, format!("{tag} record too short")))?;
        let value: f64 = field
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid number {field:?}")))?;
        out.push(value);
    }
    Ok(out)
}

fn parse_corner(
    token: &str,
    n_positions: usize,
    n_uvs: usize,
    path: &Path,
    line: usize,
) -> Result<Corner> {
    let mut parts = token.split('/');
    let v_str = parts.next().unwrap_or("");
    let vertex = resolve_index(v_str, n_positions, path, line)?;
    let uv = match parts.next() {
        None | Some("") => None,
        Some(t_str) => Some(resolve_index(t_str, n_uvs, path, line)?),
    };
    Ok(Corner { vertex, uv, line })
}

/// OBJ indices are 1-based; negative values count back from the records seen
/// so far.
fn resolve_index(token: &str, len: usize, path: &Path, line: usize) -> Result<usize> {
    let raw: i64 = token
        .parse()
        .map_err(|_| Error::parse(path, line, format!("invalid index {token:?}")))?;
    let idx = if raw > 0 {
        (raw - 1) as usize
    } else if raw < 0 && (-raw) as usize <= len {
        len - (-raw) as usize
    } else {
        return Err(Error::parse(path, line, format!("index {raw} out of range")));
    };
    if idx >= len {
        return Err(Error::parse(
            path,
            line,
            format!("index {raw} references element {} of {len}", idx + 1),
        ));
    }
    Ok(idx)
}

/// Write the mesh as OBJ text with per-vertex UVs (`f v/v ...`).
///
/// Coordinates are printed with shortest round-trip formatting, so a
/// save/load cycle reproduces them bit-identically.
pub fn save_mesh(mesh: &TexturedMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    for &[u, v] in &mesh.uv {
        writeln!(out, "vt {} {}", u, v).unwrap();
    }
    for &[a, b, c] in &mesh.faces {
        writeln!(out, "f {}/{} {}/{} {}/{}", a + 1, a + 1, b + 1, b + 1, c + 1, c + 1).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const UNIT_SQUARE: &str = "\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
vt 0 0
vt 1 0
vt 1 1
vt 0 1
f 1/1 2/2 3/3
f 1/1 3/3 4/4
";

    #[test]
    fn loads_unit_square_with_corner_uvs() {
        let f = write_temp(UNIT_SQUARE);
        let mesh = load_geometry(f.path(), TextureRef::with_dims(64, 64)).unwrap();
        assert_eq!(mesh.vertex_count(), 4);
        assert_eq!(mesh.face_count(), 2);
        assert_eq!(mesh.uv[2], [1.0, 1.0]);
    }

    #[test]
    fn splits_vertex_with_two_distinct_uvs() {
        // Vertex 1 is used with vt 1 in the first face and vt 4 in the second.
        let obj = "\
v 0 0 0
v 1 0 0
v 0 1 0
vt 0 0
vt 1 0
vt 0 1
vt 0.5 0.5
f 1/1 2/2 3/3
f 1/4 3/3 2/2
";
        let f = write_temp(obj);
        let mesh = load_geometry(f.path(), TextureRef::with_dims(8, 8)).unwrap();
        assert_eq!(mesh.vertex_count(), 4);
        assert_eq!(mesh.vertices[3], mesh.vertices[0]);
        assert_eq!(mesh.uv[0], [0.0, 0.0]);
        assert_eq!(mesh.uv[3], [0.5, 0.5]);
        assert_eq!(mesh.faces[1][0], 3);
    }

    #[test]
    fn rejects_face_index_out_of_range() {
        let obj = "\
v 0 0 0
v 1 0 0
v 0 1 0
v 1 1 0
vt 0 0
f 1/1 2/1 10/1
";
        let f = write_temp(obj);
        let err = load_geometry(f.path(), TextureRef::with_dims(8, 8)).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 6);
                assert!(message.contains("10"), "{message}");
            }
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn rejects_degenerate_face() {
        let obj = "\
v 0 0 0
v 1 0 0
vt 0 0
vt 1 0
f 1/1 2/2 1/1
";
        let f = write_temp(obj);
        let err = load_geometry(f.path(), TextureRef::with_dims(8, 8)).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err:?}");
        assert!(err.to_string().contains("degenerate"));
    }

    #[test]
    fn rejects_uv_outside_unit_square() {
        let obj = "\
v 0 0 0
v 1 0 0
v 0 1 0
vt 0 0
vt 2 0
vt 0 1
f 1/1 2/2 3/3
";
        let f = write_temp(obj);
        let err = load_geometry(f.path(), TextureRef::with_dims(8, 8)).unwrap_err();
        assert!(err.to_string().contains("uv 1"), "{err}");
    }

    #[test]
    fn rejects_missing_uvs() {
        let obj = "\
v 0 0 0
v 1 0 0
v 0 1 0
f 1 2 3
";
        let f = write_temp(obj);
        let err = load_geometry(f.path(), TextureRef::with_dims(8, 8)).unwrap_err();
        assert!(matches!(err, Error::UvMismatch { vertex: 0 }), "{err:?}");
    }

    #[test]
    fn rejects_empty_mesh() {
        let f = write_temp("# nothing here\n");
        let err = load_geometry(f.path(), TextureRef::with_dims(8, 8)).unwrap_err();
        assert!(matches!(err, Error::EmptyMesh { .. }), "{err:?}");
    }

    #[test]
    fn positional_uv_assignment_without_corner_refs() {
        let obj = "\
v 0 0 0
v 1 0 0
v 0 1 0
vt 0.1 0.2
vt 0.3 0.4
vt 0.5 0.6
f 1 2 3
";
        let f = write_temp(obj);
        let mesh = load_geometry(f.path(), TextureRef::with_dims(8, 8)).unwrap();
        assert_eq!(mesh.uv[1], [0.3, 0.4]);
    }

    #[test]
    fn save_load_round_trip_is_bit_identical() {
        let f = write_temp(UNIT_SQUARE);
        let mesh = load_geometry(f.path(), TextureRef::with_dims(64, 64)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("roundtrip.obj");
        save_mesh(&mesh, &out).unwrap();
        let back = load_geometry(&out, TextureRef::with_dims(64, 64)).unwrap();
        assert_eq!(mesh.vertices, back.vertices);
        assert_eq!(mesh.faces, back.faces);
        assert_eq!(mesh.uv, back.uv);

        // Awkward coordinates survive as well.
        let mesh2 = TexturedMesh::new(
            "rt",
            vec![
                Point3::new(0.1 + 0.2, -1.0 / 3.0, 1e-17),
                Point3::new(2.0_f64.sqrt(), 1.0, 0.0),
                Point3::new(0.0, std::f64::consts::PI, 0.0),
            ],
            vec![[0, 1, 2]],
            vec![[0.1, 0.9], [1.0 / 3.0, 0.25], [0.0, 1.0]],
            TextureRef::with_dims(4, 4),
        )
        .unwrap();
        let out2 = dir.path().join("roundtrip2.obj");
        save_mesh(&mesh2, &out2).unwrap();
        let back2 = load_geometry(&out2, TextureRef::with_dims(4, 4)).unwrap();
        assert_eq!(mesh2.vertices, back2.vertices);
        assert_eq!(mesh2.uv, back2.uv);
    }

    #[test]
    fn nearest_vertex_examples() {
        let index = SpatialIndex::build(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], Metric::L2);
        assert_eq!(nearest_vertex(&index, &Point3::new(0.9, 0.0, 0.0)).unwrap(), 1);
        assert_eq!(nearest_vertex(&index, &Point3::new(0.0, 0.0, 0.0)).unwrap(), 0);
    }
}
