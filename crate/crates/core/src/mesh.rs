//! Unstructured macro-mesh: vertices, edges, faces and cells with boundary flags.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{Permutation, Point3, TetOrientation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

impl FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dirichlet" | "d" => Ok(BoundaryKind::Dirichlet),
            "neumann" | "n" => Ok(BoundaryKind::Neumann),
            other => Err(Error::Mesh(format!("unknown boundary tag `{other}`"))),
        }
    }
}

/// Local vertex pairs of the six edges of a tetrahedron.
pub const CELL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
/// Local vertex triples of the four faces; face `i` is opposite vertex `i`.
pub const CELL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

#[derive(Clone, Debug)]
pub struct MacroMesh {
    vertices: Vec<Point3>,
    cells: Vec<[usize; 4]>,
    edges: Vec<[usize; 2]>,
    faces: Vec<[usize; 3]>,
    edge_lookup: HashMap<[usize; 2], usize>,
    face_lookup: HashMap<[usize; 3], usize>,
    cell_faces: Vec<[usize; 4]>,
    face_cells: Vec<Vec<usize>>,
    face_boundary: Vec<Option<BoundaryKind>>,
}

fn sorted2(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn sorted3(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

impl MacroMesh {
    /// Builds the primitive adjacency. `tag` assigns a boundary kind to every
    /// face that belongs to a single cell; it receives the sorted face vertices.
    pub fn new<F>(vertices: Vec<Point3>, cells: Vec<[usize; 4]>, tag: F) -> Result<Self>
    where
        F: Fn(&[usize; 3], &[Point3]) -> BoundaryKind,
    {
        if cells.is_empty() {
            return Err(Error::Mesh("mesh has no cells".into()));
        }
        let mut edges = Vec::new();
        let mut faces = Vec::new();
        let mut edge_lookup = HashMap::new();
        let mut face_lookup = HashMap::new();
        let mut cell_faces = Vec::with_capacity(cells.len());
        let mut face_cells: Vec<Vec<usize>> = Vec::new();
        for (ci, cell) in cells.iter().enumerate() {
            for &v in cell {
                if v >= vertices.len() {
                    return Err(Error::Mesh(format!("cell {ci} references missing vertex {v}")));
                }
            }
            let distinct = {
                let mut c = *cell;
                c.sort_unstable();
                c.windows(2).all(|w| w[0] != w[1])
            };
            if !distinct {
                return Err(Error::Mesh(format!("cell {ci} repeats a vertex")));
            }
            TetOrientation::new(cell.map(|v| vertices[v]))
                .map_err(|e| Error::Mesh(format!("cell {ci}: {e}")))?;
            for [a, b] in CELL_EDGES {
                let key = sorted2(cell[a], cell[b]);
                edge_lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edges.len() - 1
                });
            }
            let mut cf = [0usize; 4];
            for (k, [a, b, c]) in CELL_FACES.into_iter().enumerate() {
                let key = sorted3([cell[a], cell[b], cell[c]]);
                let id = *face_lookup.entry(key).or_insert_with(|| {
                    faces.push(key);
                    face_cells.push(Vec::new());
                    faces.len() - 1
                });
                face_cells[id].push(ci);
                if face_cells[id].len() > 2 {
                    return Err(Error::Mesh(format!("face {key:?} is shared by more than two cells")));
                }
                cf[k] = id;
            }
            cell_faces.push(cf);
        }
        let face_boundary = faces
            .iter()
            .zip(&face_cells)
            .map(|(f, owners)| (owners.len() == 1).then(|| tag(f, &vertices)))
            .collect();
        Ok(Self {
            vertices,
            cells,
            edges,
            faces,
            edge_lookup,
            face_lookup,
            cell_faces,
            face_cells,
            face_boundary,
        })
    }

    /// A mesh consisting of one tetrahedron with Dirichlet conditions on all faces.
    pub fn single(tet: &TetOrientation) -> Self {
        let v = tet.vertices().to_vec();
        Self::new(v, vec![[0, 1, 2, 3]], |_, _| BoundaryKind::Dirichlet)
            .expect("a validated tetrahedron forms a valid mesh")
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&sorted2(a, b)).copied()
    }

    pub fn face_id(&self, f: [usize; 3]) -> Option<usize> {
        self.face_lookup.get(&sorted3(f)).copied()
    }

    pub fn cell_faces(&self, cell: usize) -> [usize; 4] {
        self.cell_faces[cell]
    }

    pub fn face_cells(&self, face: usize) -> &[usize] {
        &self.face_cells[face]
    }

    pub fn face_boundary(&self, face: usize) -> Option<BoundaryKind> {
        self.face_boundary[face]
    }

    /// Geometric frame of a cell in its stored vertex order.
    pub fn cell_orientation(&self, cell: usize) -> TetOrientation {
        TetOrientation::new(self.cells[cell].map(|v| self.vertices[v])).expect("validated at construction")
    }

    /// Reorders the local vertex list of `cell` by `pi`.
    pub fn permute_cell(&mut self, cell: usize, pi: Permutation) {
        let old = self.cells[cell];
        self.cells[cell] = [0, 1, 2, 3].map(|i| old[pi.apply(i)]);
    }

    /// Whether a micro-vertex supported on the macro-vertex set `support`
    /// carries a Dirichlet condition, i.e. lies on some Dirichlet face.
    /// Points where Dirichlet and Neumann faces meet are Dirichlet; keeping
    /// them free would make the spaces of consecutive levels non-nested.
    pub fn is_dirichlet_support(&self, support: &[usize]) -> bool {
        self.faces.iter().zip(&self.face_boundary).any(|(f, kind)| {
            *kind == Some(BoundaryKind::Dirichlet) && support.iter().all(|v| f.contains(v))
        })
    }

    /// Plain-text description: vertex coordinates, cell quadruples, boundary tags.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z);
        }
        let _ = writeln!(s, "cells {}", self.cells.len());
        for c in &self.cells {
            let _ = writeln!(s, "{} {} {} {}", c[0], c[1], c[2], c[3]);
        }
        let tagged: Vec<_> = self
            .faces
            .iter()
            .zip(&self.face_boundary)
            .filter_map(|(f, b)| b.map(|b| (f, b)))
            .collect();
        let _ = writeln!(s, "boundary {}", tagged.len());
        for (f, b) in tagged {
            let tag = match b {
                BoundaryKind::Dirichlet => "dirichlet",
                BoundaryKind::Neumann => "neumann",
            };
            let _ = writeln!(s, "{} {} {} {}", f[0], f[1], f[2], tag);
        }
        s
    }

    /// Parses [`MacroMesh::to_text`] output. Boundary faces without an explicit
    /// tag default to Dirichlet. `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .collect();
        let mut pos = 0;
        let mut next = |what: &str| -> Result<&str> {
            let l = lines
                .get(pos)
                .copied()
                .ok_or_else(|| Error::Mesh(format!("unexpected end of file reading {what}")))?;
            pos += 1;
            Ok(l)
        };
        let count = |l: &str, name: &str| -> Result<usize> {
            let mut it = l.split_whitespace();
            if it.next() != Some(name) {
                return Err(Error::Mesh(format!("expected `{name} <count>`, found `{l}`")));
            }
            it.next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| Error::Mesh(format!("bad count in `{l}`")))
        };
        fn numbers<T: FromStr>(l: &str, want: usize, what: &str) -> Result<Vec<T>> {
            let v: Vec<T> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Mesh(format!("bad {what} line `{l}`")))?;
            if v.len() != want {
                return Err(Error::Mesh(format!("{what} line needs {want} entries: `{l}`")));
            }
            Ok(v)
        }
        let nv = count(next("vertices header")?, "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let c: Vec<f64> = numbers(next("vertices")?, 3, "vertex")?;
            vertices.push(Point3::new(c[0], c[1], c[2]));
        }
        let nc = count(next("cells header")?, "cells")?;
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let c: Vec<usize> = numbers(next("cells")?, 4, "cell")?;
            cells.push([c[0], c[1], c[2], c[3]]);
        }
        let mut tags = HashMap::new();
        if let Ok(l) = next("boundary header") {
            let nb = count(l, "boundary")?;
            for _ in 0..nb {
                let l = next("boundary")?;
                let (idx, tag) = l
                    .rsplit_once(char::is_whitespace)
                    .ok_or_else(|| Error::Mesh(format!("bad boundary line `{l}`")))?;
                let f: Vec<usize> = numbers(idx, 3, "boundary")?;
                tags.insert(sorted3([f[0], f[1], f[2]]), tag.parse::<BoundaryKind>()?);
            }
        }
        Self::new(vertices, cells, |f, _| {
            tags.get(f).copied().unwrap_or(BoundaryKind::Dirichlet)
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Builtin geometries used by the experiments.
pub mod shapes {
    use super::*;

    pub const SPINDLE: [[f64; 3]; 4] = [[0.0, 0.0, 0.5], [0.0, 0.0, -0.5], [0.5, 1.0, 0.0], [-0.5, 1.0, 0.0]];
    pub const CAP: [[f64; 3]; 4] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.866, 0.0], [0.5, 0.288, 0.093]];
    pub const SPADE: [[f64; 3]; 4] = [[0.0, 0.0, 0.0], [1.0, -0.666, 0.0], [1.0, 0.666, 0.0], [1.0, 0.0, 0.443]];

    pub fn regular() -> [[f64; 3]; 4] {
        let s3 = 3f64.sqrt();
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.5, s3 / 2.0, 0.0],
            [0.5, s3 / 6.0, (2.0f64 / 3.0).sqrt()],
        ]
    }

    /// Trirectangular tetrahedron with unit legs in x and y and height `h`.
    pub fn trirectangular(h: f64) -> [[f64; 3]; 4] {
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, h]]
    }

    /// Unblended macro-tetrahedron of a thin spherical shell (radii 0.9 and 1):
    /// three vertices on the outer sphere spanning an irregular triangle and one
    /// vertex on the inner sphere.
    pub fn shell_tet() -> [[f64; 3]; 4] {
        let unit = |v: [f64; 3]| {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            v.map(|c| c / n)
        };
        let u1 = unit([0.0, 0.0, 1.0]);
        let u2 = unit([1.0, 0.0, 1.0]);
        let u3 = unit([0.2, 0.6, 1.0]);
        [u1.map(|c| 0.9 * c), u1, u2, u3]
    }

    pub fn by_name(name: &str) -> Option<[[f64; 3]; 4]> {
        match name.to_ascii_lowercase().as_str() {
            "regular" => Some(regular()),
            "spindle" => Some(SPINDLE),
            "cap" => Some(CAP),
            "spade" => Some(SPADE),
            "trirectangular" | "unit" => Some(trirectangular(1.0)),
            "distorted" => Some(trirectangular(0.1)),
            "shell" => Some(shell_tet()),
            _ => None,
        }
    }

    /// Unit cube split at `z = h_lower` into two boxes of six tetrahedra each.
    /// Top and bottom are Dirichlet, the sides Neumann.
    pub fn split_cube(h_lower: f64) -> Result<MacroMesh> {
        if !(h_lower > 0.0 && h_lower < 1.0) {
            return Err(Error::Mesh(format!("h_lower = {h_lower} must lie in (0, 1)")));
        }
        let zs = [0.0, h_lower, 1.0];
        let mut vertices = Vec::new();
        for &z in &zs {
            for y in 0..2 {
                for x in 0..2 {
                    vertices.push(Point3::new(f64::from(x), f64::from(y), z));
                }
            }
        }
        let id = |x: usize, y: usize, layer: usize| layer * 4 + y * 2 + x;
        let mut cells = Vec::new();
        for layer in 0..2 {
            for axes in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                let mut cur = [0usize, 0, 0];
                let mut cell = [id(0, 0, layer); 4];
                for (k, &ax) in axes.iter().enumerate() {
                    cur[ax] = 1;
                    cell[k + 1] = id(cur[0], cur[1], layer + cur[2]);
                }
                cells.push(cell);
            }
        }
        MacroMesh::new(vertices, cells, |f, v| {
            let on = |z: f64| f.iter().all(|&i| (v[i].z - z).abs() < 1e-12);
            if on(0.0) || on(1.0) {
                BoundaryKind::Dirichlet
            } else {
                BoundaryKind::Neumann
            }
        })
    }
}
