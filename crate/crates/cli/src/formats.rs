//! On-disk formats. Surfaces and tetrahedral meshes are indexed text files,
//! centerlines and landmarks are JSON. Text coordinates carry 17
//! significant digits and JSON numbers the shortest exact representation,
//! so every save/load cycle is lossless and canonical.

use std::fmt::Write as _;
use std::path::Path;

use pneumoreg_core::distance::{Landmark, LandmarkKind};
use pneumoreg_core::geometry::{CenterlineNode, CenterlineTree, NodeKind, Point3, TetrahedralMesh, TriangleSurface};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SURFACE_HEADER: &str = "# pneumoreg surface";
const TET_HEADER: &str = "# pneumoreg tetmesh";

fn push_point(out: &mut String, p: &Point3) {
    let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
}

pub fn surface_to_string(s: &TriangleSurface) -> String {
    let mut out = format!("{SURFACE_HEADER}\nvertices {}\n", s.len());
    s.vertices().iter().for_each(|p| push_point(&mut out, p));
    let _ = writeln!(out, "triangles {}", s.triangles().len());
    for t in s.triangles() {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    out
}

pub fn tet_mesh_to_string(m: &TetrahedralMesh) -> String {
    let mut out = format!("{TET_HEADER}\nvertices {}\n", m.vertices().len());
    m.vertices().iter().for_each(|p| push_point(&mut out, p));
    let _ = writeln!(out, "tetrahedra {}", m.tetrahedra().len());
    for t in m.tetrahedra() {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(out, "surface_vertices {}", m.surface_vertices().len());
    for i in m.surface_vertices() {
        let _ = writeln!(out, "{i}");
    }
    out
}

/// Line-oriented reader that reports 1-based line numbers.
struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Self { path, inner: text.lines().enumerate(), line: 0 }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { path: self.path.to_path_buf(), line: self.line, message: message.into() }
    }

    fn next(&mut self) -> Result<&'a str> {
        loop {
            let (i, l) = self.inner.next().ok_or_else(|| Error::Parse {
                path: self.path.to_path_buf(),
                line: self.line + 1,
                message: "unexpected end of file".into(),
            })?;
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() && !l.starts_with('#') {
                return Ok(l);
            }
        }
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let l = self.next()?;
        let mut it = l.split_whitespace();
        if it.next() != Some(name) {
            return Err(self.err(format!("expected `{name} <count>`, found `{l}`")));
        }
        it.next().and_then(|c| c.parse().ok()).ok_or_else(|| self.err(format!("`{name}` needs a count")))
    }

    fn numbers<T: std::str::FromStr, const N: usize>(&mut self, what: &str) -> Result<[T; N]> {
        let l = self.next()?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != N {
            return Err(self.err(format!("{what} needs {N} values, found {}", parts.len())));
        }
        let mut out = Vec::with_capacity(N);
        for p in parts {
            out.push(p.parse::<T>().map_err(|_| self.err(format!("cannot parse `{p}` in {what}")))?);
        }
        out.try_into().map_err(|_| self.err(what))
    }

    fn points(&mut self, n: usize) -> Result<Vec<Point3>> {
        (0..n)
            .map(|_| {
                let [x, y, z] = self.numbers::<f64, 3>("vertex")?;
                if !(x.is_finite() && y.is_finite() && z.is_finite()) {
                    return Err(self.err("vertex coordinates must be finite"));
                }
                Ok(Point3::new(x, y, z))
            })
            .collect()
    }

    fn finish(&mut self) -> Result<()> {
        match self.next() {
            Ok(l) => Err(self.err(format!("unexpected trailing content `{l}`"))),
            Err(_) => Ok(()),
        }
    }
}

pub fn parse_surface(path: &Path, text: &str) -> Result<TriangleSurface> {
    let mut r = Lines::new(path, text);
    let n = r.section("vertices")?;
    let vertices = r.points(n)?;
    let m = r.section("triangles")?;
    let triangles = (0..m).map(|_| r.numbers::<usize, 3>("triangle")).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    TriangleSurface::new_closed(vertices, triangles).map_err(Error::model(path))
}

pub fn parse_tet_mesh(path: &Path, text: &str) -> Result<TetrahedralMesh> {
    let mut r = Lines::new(path, text);
    let n = r.section("vertices")?;
    let vertices = r.points(n)?;
    let m = r.section("tetrahedra")?;
    let tets = (0..m).map(|_| r.numbers::<usize, 4>("tetrahedron")).collect::<Result<Vec<_>>>()?;
    let k = r.section("surface_vertices")?;
    let surface = (0..k).map(|_| r.numbers::<usize, 1>("surface vertex").map(|[i]| i)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    TetrahedralMesh::new(vertices, tets, surface).map_err(Error::model(path))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    kind: NodeKind,
    parent: Option<usize>,
    position: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CenterlineFile {
    nodes: Vec<NodeRecord>,
}

pub fn centerline_to_string(tree: &CenterlineTree) -> String {
    let file = CenterlineFile {
        nodes: tree
            .nodes()
            .iter()
            .map(|n| NodeRecord { kind: n.kind, parent: n.parent, position: n.position.into() })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("centerline serializes") + "\n"
}

pub fn parse_centerline(path: &Path, text: &str) -> Result<CenterlineTree> {
    let file: CenterlineFile = serde_json::from_str(text).map_err(Error::json(path))?;
    let nodes = file
        .nodes
        .into_iter()
        .map(|n| CenterlineNode { position: Point3::from(n.position), kind: n.kind, parent: n.parent })
        .collect();
    CenterlineTree::new(nodes).map_err(Error::model(path))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LandmarkRecord {
    kind: LandmarkKind,
    source_index: usize,
    target: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LandmarkFile {
    landmarks: Vec<LandmarkRecord>,
}

pub fn landmarks_to_string(landmarks: &[Landmark]) -> String {
    let file = LandmarkFile {
        landmarks: landmarks
            .iter()
            .map(|l| LandmarkRecord { kind: l.kind, source_index: l.source_index, target: l.target.into() })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("landmarks serialize") + "\n"
}

pub fn parse_landmarks(path: &Path, text: &str) -> Result<Vec<Landmark>> {
    let file: LandmarkFile = serde_json::from_str(text).map_err(Error::json(path))?;
    Ok(file
        .landmarks
        .into_iter()
        .map(|l| Landmark { kind: l.kind, source_index: l.source_index, target: Point3::from(l.target) })
        .collect())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(Error::io(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    std::fs::write(path, text).map_err(Error::io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::json(path))?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(Error::json(path))
}
