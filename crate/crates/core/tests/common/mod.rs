#![allow(dead_code)]

use nalgebra::DMatrix;

use tetilu::assembly::{CellAssembler, Coefficient, GeometryMap, StencilField, StencilSource};
use tetilu::geometry::{Direction, Permutation, SimplexIndexer, TetOrientation};
use tetilu::mesh::{shapes, MacroMesh};
use tetilu::multigrid::{CellSmoother, Hierarchy, MultigridConfig};

pub fn tet(name: &str, perm: &str) -> TetOrientation {
    let p: Permutation = perm.parse().unwrap();
    TetOrientation::from_coords(shapes::by_name(name).unwrap()).unwrap().permuted(p)
}

pub fn field(t: &TetOrientation, level: u32, coeff: &Coefficient, map: Option<&dyn GeometryMap>) -> StencilField {
    StencilField::assemble(&CellAssembler::new(t, level, coeff, map)).unwrap()
}

/// Dense interior block of a stencil field and its sparsity pattern.
pub fn dense_block(src: &dyn StencilSource) -> (DMatrix<f64>, DMatrix<bool>) {
    let level = src.level();
    let inner = SimplexIndexer::interior(level);
    let m = inner.len();
    let mut a = DMatrix::zeros(m, m);
    let mut pat = DMatrix::from_element(m, m, false);
    for (i, p) in inner.coords().enumerate() {
        let s = src.stencil(p);
        for d in Direction::ALL {
            let q = p.shifted(d);
            if q.is_interior(level) {
                let j = inner.index(q);
                a[(i, j)] = s[d];
                pat[(i, j)] = true;
            }
        }
    }
    (a, pat)
}

/// Textbook IKJ incomplete factorization restricted to `pat`; returns the
/// unit lower factor below the diagonal and the pivots on it.
pub fn dense_ilu0(a: &DMatrix<f64>, pat: &DMatrix<bool>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut w = a.clone();
    for i in 1..n {
        for k in 0..i {
            if !pat[(i, k)] {
                continue;
            }
            w[(i, k)] /= w[(k, k)];
            for j in k + 1..n {
                if pat[(i, j)] {
                    w[(i, j)] -= w[(i, k)] * w[(k, j)];
                }
            }
        }
    }
    w
}

pub fn rho(t: &TetOrientation, level: u32, coeff: &Coefficient, map: Option<&dyn GeometryMap>, config: MultigridConfig) -> f64 {
    let mesh = MacroMesh::single(t);
    Hierarchy::build(&mesh, level, coeff, map, config).unwrap().convergence_factor(20, 42).unwrap()
}

pub fn with(smoother: CellSmoother) -> MultigridConfig {
    MultigridConfig { smoother, ..Default::default() }
}

pub fn iterations(rho: f64) -> i64 {
    (-6.0 / rho.log10()).ceil() as i64
}
