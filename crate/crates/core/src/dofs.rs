//! Global numbering of micro-vertices over a macro-mesh and global operator assembly.
//!
//! A micro-vertex is identified by its macro-vertex support and barycentric
//! lattice weights, which makes points on shared primitives coincide across
//! cells regardless of each cell's vertex order. Points are numbered
//! primitive by primitive: macro-vertices, edges, faces, then cell interiors
//! in lattice order.

use std::collections::HashMap;
use std::ops::Range;

use crate::assembly::{CellAssembler, CoefficientField, GeometryMap};
use crate::error::Result;
use crate::geometry::{check_level, intervals, Direction, LogicalCoord, SimplexIndexer, TetOrientation};
use crate::mesh::MacroMesh;
use crate::par;
use crate::sparse::CsrMatrix;

pub const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrimitiveKind {
    Vertex,
    Edge,
    Face,
    Cell,
}

#[derive(Clone, Debug)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    /// Index among the macro-primitives of this kind.
    pub index: usize,
    /// Global point ids, contiguous.
    pub points: Range<usize>,
    /// Free-DoF ids, contiguous (empty for Dirichlet primitives).
    pub free: Range<usize>,
    pub dirichlet: bool,
}

type Key = [u64; 3];

fn pack(v: usize, w: i32) -> u64 {
    ((v as u64) << 32) | w as u64
}

#[derive(Clone, Debug)]
pub struct DofMap {
    level: u32,
    indexer: SimplexIndexer,
    coords: Vec<LogicalCoord>,
    cells: Vec<TetOrientation>,
    cell_points: Vec<Vec<u32>>,
    primitives: Vec<Primitive>,
    point_primitive: Vec<u32>,
    free_of_point: Vec<u32>,
    point_of_free: Vec<u32>,
    occ_ptr: Vec<usize>,
    occ: Vec<(u32, u32)>,
}

impl DofMap {
    pub fn new(mesh: &MacroMesh, level: u32) -> Result<Self> {
        check_level(level)?;
        let n = intervals(level);
        let indexer = SimplexIndexer::full(level);
        let coords: Vec<LogicalCoord> = indexer.coords().collect();
        let cells: Vec<TetOrientation> = (0..mesh.num_cells()).map(|c| mesh.cell_orientation(c)).collect();

        let support = |cell: &[usize; 4], p: LogicalCoord| -> (Vec<usize>, Key) {
            let w = [n - p.sum(), p.x, p.y, p.z];
            let mut pairs: Vec<(usize, i32)> = (0..4).filter(|&k| w[k] > 0).map(|k| (cell[k], w[k])).collect();
            pairs.sort_unstable();
            let mut key = [u64::MAX; 3];
            for (slot, &(v, wt)) in key.iter_mut().zip(&pairs) {
                *slot = pack(v, wt);
            }
            (pairs.into_iter().map(|e| e.0).collect(), key)
        };
        let classify = |s: &[usize]| -> (PrimitiveKind, usize) {
            match s.len() {
                1 => (PrimitiveKind::Vertex, s[0]),
                2 => (PrimitiveKind::Edge, mesh.edge_id(s[0], s[1]).expect("cell edge")),
                3 => (PrimitiveKind::Face, mesh.face_id([s[0], s[1], s[2]]).expect("cell face")),
                _ => unreachable!("interior points are handled per cell"),
            }
        };

        // Shared points, grouped by primitive and ordered by key.
        let mut shared: Vec<((PrimitiveKind, usize), Key, Vec<usize>)> = Vec::new();
        for cell in mesh.cells() {
            for &p in &coords {
                if p.is_interior(level) {
                    continue;
                }
                let (s, key) = support(cell, p);
                shared.push((classify(&s), key, s));
            }
        }
        shared.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        shared.dedup_by(|a, b| a.1 == b.1);

        let mut primitives: Vec<Primitive> = Vec::new();
        let mut point_primitive = Vec::new();
        let mut dirichlet_of_point = Vec::new();
        let mut key_to_point: HashMap<Key, u32> = HashMap::with_capacity(shared.len());
        for (pid, (prim, key, s)) in shared.iter().enumerate() {
            let is_new = primitives.last().map_or(true, |p: &Primitive| (p.kind, p.index) != *prim);
            if is_new {
                primitives.push(Primitive {
                    kind: prim.0,
                    index: prim.1,
                    points: pid..pid,
                    free: 0..0,
                    dirichlet: mesh.is_dirichlet_support(s),
                });
            }
            let prim_id = (primitives.len() - 1) as u32;
            let last = primitives.last_mut().unwrap();
            last.points.end = pid + 1;
            point_primitive.push(prim_id);
            dirichlet_of_point.push(last.dirichlet);
            key_to_point.insert(*key, pid as u32);
        }
        let interior = SimplexIndexer::interior(level).len();
        let mut next = shared.len();
        let mut cell_points = Vec::with_capacity(mesh.num_cells());
        for (ci, cell) in mesh.cells().iter().enumerate() {
            primitives.push(Primitive {
                kind: PrimitiveKind::Cell,
                index: ci,
                points: next..next + interior,
                free: 0..0,
                dirichlet: false,
            });
            let prim = (primitives.len() - 1) as u32;
            let mut local = Vec::with_capacity(coords.len());
            for &p in &coords {
                if p.is_interior(level) {
                    local.push(next as u32);
                    point_primitive.push(prim);
                    dirichlet_of_point.push(false);
                    next += 1;
                } else {
                    local.push(key_to_point[&support(cell, p).1]);
                }
            }
            cell_points.push(local);
        }

        let mut free_of_point = vec![NONE; next];
        let mut point_of_free = Vec::new();
        for (pt, &d) in dirichlet_of_point.iter().enumerate() {
            if !d {
                free_of_point[pt] = point_of_free.len() as u32;
                point_of_free.push(pt as u32);
            }
        }
        for p in &mut primitives {
            if !p.dirichlet {
                let s = free_of_point[p.points.start] as usize;
                p.free = s..s + p.points.len();
            } else {
                let s = point_of_free.partition_point(|&q| (q as usize) < p.points.start);
                p.free = s..s;
            }
        }

        let mut counts = vec![0usize; next + 1];
        for cp in &cell_points {
            for &g in cp {
                counts[g as usize + 1] += 1;
            }
        }
        for i in 0..next {
            counts[i + 1] += counts[i];
        }
        let occ_ptr = counts.clone();
        let mut fill = counts;
        let mut occ = vec![(0u32, 0u32); *occ_ptr.last().unwrap()];
        for (ci, cp) in cell_points.iter().enumerate() {
            for (li, &g) in cp.iter().enumerate() {
                occ[fill[g as usize]] = (ci as u32, li as u32);
                fill[g as usize] += 1;
            }
        }

        Ok(Self {
            level,
            indexer,
            coords,
            cells,
            cell_points,
            primitives,
            point_primitive,
            free_of_point,
            point_of_free,
            occ_ptr,
            occ,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn num_points(&self) -> usize {
        self.free_of_point.len()
    }

    pub fn num_free(&self) -> usize {
        self.point_of_free.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, c: usize) -> &TetOrientation {
        &self.cells[c]
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn primitive_of_point(&self, pt: usize) -> &Primitive {
        &self.primitives[self.point_primitive[pt] as usize]
    }

    /// Primitive record of macro-cell `c`.
    pub fn cell_primitive(&self, c: usize) -> &Primitive {
        let first_cell = self.primitives.len() - self.cells.len();
        &self.primitives[first_cell + c]
    }

    /// Global point id of lattice point `p` of cell `c`.
    pub fn point(&self, c: usize, p: LogicalCoord) -> u32 {
        self.cell_points[c][self.indexer.index(p)]
    }

    /// Free-DoF id of lattice point `p` of cell `c`, or [`NONE`] if Dirichlet.
    pub fn free(&self, c: usize, p: LogicalCoord) -> u32 {
        self.free_of_point[self.point(c, p) as usize]
    }

    pub fn free_of_point(&self, pt: usize) -> u32 {
        self.free_of_point[pt]
    }

    pub fn point_of_free(&self, i: usize) -> u32 {
        self.point_of_free[i]
    }

    /// All (cell, lattice point) pairs at which global point `pt` appears.
    pub fn occurrences(&self, pt: usize) -> impl Iterator<Item = (usize, LogicalCoord)> + '_ {
        self.occ[self.occ_ptr[pt]..self.occ_ptr[pt + 1]]
            .iter()
            .map(|&(c, li)| (c as usize, self.coords[li as usize]))
    }

    /// Free DoFs on macro-vertices, edges and faces.
    pub fn interface_free(&self) -> Range<usize> {
        let end = self.cell_primitive(0).free.start;
        0..end
    }

    /// Assembles the operator restricted to free DoFs (Dirichlet rows and
    /// columns eliminated).
    pub fn assemble(&self, coeff: &dyn CoefficientField, map: Option<&dyn GeometryMap>) -> Result<CsrMatrix> {
        let asm: Vec<CellAssembler<'_>> =
            self.cells.iter().map(|t| CellAssembler::new(t, self.level, coeff, map)).collect();
        let n = intervals(self.level);
        let rows = par::map_range(self.num_free(), |i| -> Result<Vec<(u32, f64)>> {
            let pt = self.point_of_free[i] as usize;
            let mut row = Vec::with_capacity(16);
            for (c, p) in self.occurrences(pt) {
                let local = asm[c].local_row(p)?;
                for d in Direction::ALL {
                    let q = p.shifted(d);
                    if !q.in_lattice(n) {
                        continue;
                    }
                    let j = self.free(c, q);
                    if j != NONE {
                        row.push((j, local[d]));
                    }
                }
            }
            Ok(row)
        });
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(CsrMatrix::from_rows(self.num_free(), rows))
    }
}
