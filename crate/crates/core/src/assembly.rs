//! P1 stiffness assembly on the structured micro-mesh of a macro-tetrahedron.
//!
//! The micro-mesh is the Freudenthal (Kuhn) triangulation of the lattice: in
//! the sheared coordinates `(a, b, c) = (x, x + y, x + y + z)` every unit cube
//! splits into six simplices along its main diagonal. Its edges run exactly
//! along the 14 non-centre stencil directions, and every interior vertex is
//! surrounded by the same 24 elements.

use std::ops::{Index, IndexMut};
use std::sync::OnceLock;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{intervals, Direction, LogicalCoord, Point3, SimplexIndexer, TetOrientation};
use crate::par;

/// The 15 coupling weights of one operator row, indexed by [`Direction`].
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Stencil15(pub [f64; 15]);

impl Stencil15 {
    pub const ZERO: Stencil15 = Stencil15([0.0; 15]);

    pub fn row_sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn scaled(&self, s: f64) -> Stencil15 {
        Stencil15(self.0.map(|v| v * s))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<Direction> for Stencil15 {
    type Output = f64;

    fn index(&self, d: Direction) -> &f64 {
        &self.0[d.index()]
    }
}

impl IndexMut<Direction> for Stencil15 {
    fn index_mut(&mut self, d: Direction) -> &mut f64 {
        &mut self.0[d.index()]
    }
}

/// Diffusion tensor field `K(x)`.
pub trait CoefficientField: Send + Sync {
    fn tensor(&self, x: &Point3) -> Matrix3<f64>;
}

/// `1 + 10 (x^i + y^i + z^i)`.
pub fn kappa_poly(i: u32, x: &Point3) -> f64 {
    let p = |c: f64| c.powi(i as i32);
    1.0 + 10.0 * (p(x.x) + p(x.y) + p(x.z))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    KappaPoly(u32),
    /// `lower` below the plane `z = interface`, `upper` above it.
    Layered { interface: f64, lower: f64, upper: f64 },
    Tensor(Matrix3<f64>),
}

impl Coefficient {
    pub fn scalar(&self, x: &Point3) -> Option<f64> {
        match *self {
            Coefficient::Constant(c) => Some(c),
            Coefficient::KappaPoly(i) => Some(kappa_poly(i, x)),
            Coefficient::Layered { interface, lower, upper } => Some(if x.z < interface { lower } else { upper }),
            Coefficient::Tensor(_) => None,
        }
    }
}

impl CoefficientField for Coefficient {
    fn tensor(&self, x: &Point3) -> Matrix3<f64> {
        match self {
            Coefficient::Tensor(k) => *k,
            other => Matrix3::identity() * other.scalar(x).expect("scalar variants"),
        }
    }
}

/// Deformation applied to micro-vertex positions before element assembly.
pub trait GeometryMap: Send + Sync {
    fn map(&self, x: &Point3) -> Result<Point3>;
}

/// Radial blending of a macro-tetrahedron onto a spherical shell: a point
/// with barycentric coordinates `λ` is pushed to radius `Σ λ_i |v_i|`.
#[derive(Clone, Debug)]
pub struct ShellBlending {
    v0: Point3,
    inv_frame: Matrix3<f64>,
    radii: [f64; 4],
}

impl ShellBlending {
    pub fn new(vertices: [Point3; 4]) -> Result<Self> {
        let frame = Matrix3::from_columns(&[vertices[1] - vertices[0], vertices[2] - vertices[0], vertices[3] - vertices[0]]);
        let inv_frame = frame
            .try_inverse()
            .ok_or_else(|| Error::DegenerateElement { element: "blended macro-tetrahedron".into(), det: frame.determinant() })?;
        Ok(Self { v0: vertices[0], inv_frame, radii: vertices.map(|v| v.norm()) })
    }

    pub fn for_tet(tet: &TetOrientation) -> Result<Self> {
        Self::new(tet.original_vertices())
    }
}

impl GeometryMap for ShellBlending {
    fn map(&self, x: &Point3) -> Result<Point3> {
        let r = x.norm();
        if r < 1e-300 {
            return Err(Error::SingularMap(x.x, x.y, x.z));
        }
        let l = self.inv_frame * (x - self.v0);
        let l0 = 1.0 - l.x - l.y - l.z;
        let rho = l0 * self.radii[0] + l.x * self.radii[1] + l.y * self.radii[2] + l.z * self.radii[3];
        Ok(x * (rho / r))
    }
}

/// P1 stiffness matrix `|T| g_i^T K g_j` of the tetrahedron `v`.
pub fn element_stiffness(v: &[Point3; 4], k: &Matrix3<f64>) -> Result<[[f64; 4]; 4]> {
    let j = Matrix3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]]);
    let det = j.determinant();
    let scale = (v[1] - v[0]).norm().max((v[2] - v[0]).norm()).max((v[3] - v[0]).norm());
    if !(det.abs() > 1e-14 * scale.powi(3)) {
        return Err(Error::DegenerateElement { element: format!("{v:?}"), det });
    }
    let jinv = j.try_inverse().ok_or(Error::DegenerateElement { element: format!("{v:?}"), det })?;
    let mut g = [Point3::zeros(); 4];
    for i in 0..3 {
        g[i + 1] = jinv.row(i).transpose();
    }
    g[0] = -(g[1] + g[2] + g[3]);
    let vol = det.abs() / 6.0;
    let mut out = [[0.0; 4]; 4];
    for a in 0..4 {
        let kg = k * g[a];
        for b in a..4 {
            let val = vol * g[b].dot(&kg);
            out[a][b] = val;
            out[b][a] = val;
        }
    }
    Ok(out)
}

/// One of the 24 micro-elements around a vertex: lattice offsets of its
/// vertices relative to the centre vertex, which sits at local index `centre`.
#[derive(Clone, Copy, Debug)]
pub struct ElementShape {
    pub offsets: [[i32; 3]; 4],
    pub centre: usize,
}

// Unit steps along a, b and c expressed in (x, y, z).
const SHEAR_STEPS: [[i32; 3]; 3] = [[1, -1, 0], [0, 1, -1], [0, 0, 1]];
const AXIS_ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn kuhn_path(order: [usize; 3]) -> [[i32; 3]; 4] {
    let mut path = [[0; 3]; 4];
    for k in 0..3 {
        let s = SHEAR_STEPS[order[k]];
        path[k + 1] = [path[k][0] + s[0], path[k][1] + s[1], path[k][2] + s[2]];
    }
    path
}

pub fn vertex_patch() -> &'static [ElementShape; 24] {
    static PATCH: OnceLock<[ElementShape; 24]> = OnceLock::new();
    PATCH.get_or_init(|| {
        let mut out = [ElementShape { offsets: [[0; 3]; 4], centre: 0 }; 24];
        let mut n = 0;
        for order in AXIS_ORDERS {
            let path = kuhn_path(order);
            for centre in 0..4 {
                let c = path[centre];
                out[n] = ElementShape {
                    offsets: path.map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]]),
                    centre,
                };
                n += 1;
            }
        }
        out
    })
}

fn add(p: LogicalCoord, o: [i32; 3]) -> LogicalCoord {
    LogicalCoord::new(p.x + o[0], p.y + o[1], p.z + o[2])
}

/// All `8^level` micro-tetrahedra of the level-`level` lattice.
pub fn micro_tets(level: u32) -> Vec<[LogicalCoord; 4]> {
    let n = intervals(level);
    let mut out = Vec::with_capacity((n as usize).pow(3));
    for q in SimplexIndexer::full(level).coords() {
        for order in AXIS_ORDERS {
            let t = kuhn_path(order).map(|o| add(q, o));
            if t.iter().all(|p| p.in_lattice(n)) {
                out.push(t);
            }
        }
    }
    out
}

/// Assembles operator rows of one macro-tetrahedron.
#[derive(Clone, Copy)]
pub struct CellAssembler<'a> {
    tet: &'a TetOrientation,
    level: u32,
    coeff: &'a dyn CoefficientField,
    map: Option<&'a dyn GeometryMap>,
    base: Point3,
    frame: [Point3; 3],
}

impl<'a> CellAssembler<'a> {
    pub fn new(
        tet: &'a TetOrientation,
        level: u32,
        coeff: &'a dyn CoefficientField,
        map: Option<&'a dyn GeometryMap>,
    ) -> Self {
        let h = 1.0 / f64::from(intervals(level));
        Self {
            tet,
            level,
            coeff,
            map,
            base: tet.base(),
            frame: [tet.edge(1) * h, tet.edge(2) * h, tet.edge(3) * h],
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn tet(&self) -> &TetOrientation {
        self.tet
    }

    /// Physical (possibly mapped) position of a lattice point.
    pub fn position(&self, p: LogicalCoord) -> Result<Point3> {
        let x = self.base
            + self.frame[0] * f64::from(p.x)
            + self.frame[1] * f64::from(p.y)
            + self.frame[2] * f64::from(p.z);
        match self.map {
            Some(m) => m.map(&x),
            None => Ok(x),
        }
    }

    /// Contributions of all micro-elements containing the lattice point `p`
    /// to its row, bucketed by direction. Directions leaving the lattice
    /// receive no contribution.
    pub fn local_row(&self, p: LogicalCoord) -> Result<Stencil15> {
        let n = intervals(self.level);
        if !p.in_lattice(n) {
            return Err(Error::OutsideGrid { coord: p, level: self.level });
        }
        let mut pos = [None; 15];
        let mut row = Stencil15::ZERO;
        for shape in vertex_patch() {
            let pts = shape.offsets.map(|o| add(p, o));
            if !pts.iter().all(|q| q.in_lattice(n)) {
                continue;
            }
            let mut v = [Point3::zeros(); 4];
            for (k, o) in shape.offsets.iter().enumerate() {
                let d = Direction::from_offset(*o).expect("patch offsets are stencil directions");
                v[k] = match pos[d.index()] {
                    Some(x) => x,
                    None => {
                        let x = self.position(pts[k])?;
                        pos[d.index()] = Some(x);
                        x
                    }
                };
            }
            let centroid = (v[0] + v[1] + v[2] + v[3]) * 0.25;
            let k = self.coeff.tensor(&centroid);
            let ke = element_stiffness(&v, &k)?;
            for (j, o) in shape.offsets.iter().enumerate() {
                let d = Direction::from_offset(*o).expect("patch offsets are stencil directions");
                row[d] += ke[shape.centre][j];
            }
        }
        Ok(row)
    }

    /// Stencil at an interior lattice point.
    pub fn stencil(&self, p: LogicalCoord) -> Result<Stencil15> {
        if !p.is_interior(self.level) {
            return Err(Error::NotInterior(p));
        }
        self.local_row(p)
    }
}

/// Anything that yields an operator stencil at interior lattice points.
pub trait StencilSource: Send + Sync {
    fn level(&self) -> u32;
    fn stencil(&self, p: LogicalCoord) -> Stencil15;
}

impl<T: StencilSource + ?Sized> StencilSource for &T {
    fn level(&self) -> u32 {
        (**self).level()
    }

    fn stencil(&self, p: LogicalCoord) -> Stencil15 {
        (**self).stencil(p)
    }
}

/// Stencils at every interior point of a macro-tetrahedron, in lattice order.
#[derive(Clone, Debug)]
pub struct StencilField {
    level: u32,
    indexer: SimplexIndexer,
    stencils: Vec<Stencil15>,
}

impl StencilField {
    pub fn assemble(asm: &CellAssembler<'_>) -> Result<Self> {
        let indexer = SimplexIndexer::interior(asm.level());
        let coords: Vec<LogicalCoord> = indexer.coords().collect();
        let stencils = par::map_slice(&coords, |p| asm.stencil(*p)).into_iter().collect::<Result<Vec<_>>>()?;
        Ok(Self { level: asm.level(), indexer, stencils })
    }

    /// The same stencil at every interior point.
    pub fn constant(level: u32, s: Stencil15) -> Self {
        let indexer = SimplexIndexer::interior(level);
        Self { level, indexer, stencils: vec![s; indexer.len()] }
    }

    pub fn indexer(&self) -> &SimplexIndexer {
        &self.indexer
    }

    pub fn stencils(&self) -> &[Stencil15] {
        &self.stencils
    }
}

impl StencilSource for StencilField {
    fn level(&self) -> u32 {
        self.level
    }

    fn stencil(&self, p: LogicalCoord) -> Stencil15 {
        self.stencils[self.indexer.index(p)]
    }
}
