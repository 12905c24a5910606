//! Steklov–Poincaré interface operator.
//!
//! The free DoFs split into the interface `Γ` (macro-vertices, edges and
//! faces) and the cell interiors. Eliminating the interiors gives
//! `S = A_ΓΓ - Σ_t A_Γt A_tt^{-1} A_tΓ`, applied with per-cell inner solves.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::assembly::{CoefficientField, GeometryMap};
use crate::dofs::DofMap;
use crate::error::{Error, Result};
use crate::mesh::MacroMesh;
use crate::multigrid::{pcg, BlockSolver, CgReport, DenseBlock, Hierarchy, Level, MultigridConfig};
use crate::par;
use crate::sparse::CsrMatrix;

/// Approximate inverse of one cell-interior block.
pub trait InnerSolver: Send + Sync {
    fn solve(&self, r: &[f64], w: &mut [f64]) -> Result<()>;
}

impl InnerSolver for DenseBlock {
    fn solve(&self, r: &[f64], w: &mut [f64]) -> Result<()> {
        BlockSolver::solve(self, r, w);
        Ok(())
    }
}

/// V-cycles on a single-tetrahedron hierarchy until the relative residual
/// drops below `tol` or `max_cycles` is reached.
pub struct MultigridInner {
    hierarchy: Hierarchy,
    tol: f64,
    max_cycles: usize,
}

impl MultigridInner {
    pub const TOL: f64 = 1e-8;
    pub const MAX_CYCLES: usize = 50;

    pub fn new(hierarchy: Hierarchy) -> Self {
        Self { hierarchy, tol: Self::TOL, max_cycles: Self::MAX_CYCLES }
    }
}

impl InnerSolver for MultigridInner {
    fn solve(&self, r: &[f64], w: &mut [f64]) -> Result<()> {
        let a = self.hierarchy.finest().matrix();
        let r0 = par::norm2(r);
        w.iter_mut().for_each(|v| *v = 0.0);
        if r0 == 0.0 {
            return Ok(());
        }
        let mut res = vec![0.0; r.len()];
        for _ in 0..self.max_cycles {
            self.hierarchy.v_cycle(w, r)?;
            a.residual(r, w, &mut res);
            if par::norm2(&res) <= self.tol * r0 {
                return Ok(());
            }
        }
        Err(Error::NoConvergence(format!(
            "inner multigrid: relative residual {:e} after {} cycles",
            par::norm2(&res) / r0,
            self.max_cycles
        )))
    }
}

/// Inner solver selection.
#[derive(Clone, Debug, PartialEq)]
pub enum InnerKind {
    Dense,
    Multigrid(MultigridConfig),
}

/// Block partition of the global operator for interface elimination.
pub struct SchurSystem {
    a: CsrMatrix,
    interface: Range<usize>,
    cells: Vec<Range<usize>>,
    a_gg: CsrMatrix,
    /// Per cell: `A_tΓ` with interface-local columns.
    a_tg: Vec<CsrMatrix>,
    inner: Vec<Box<dyn InnerSolver>>,
}

impl SchurSystem {
    pub fn build(
        mesh: &MacroMesh,
        level: u32,
        coeff: &dyn CoefficientField,
        map: Option<&dyn GeometryMap>,
        inner: &InnerKind,
    ) -> Result<Self> {
        let dofs = DofMap::new(mesh, level)?;
        let a = dofs.assemble(coeff, map)?;
        Self::from_parts(&dofs, a, coeff, map, inner)
    }

    /// Uses the operator of an existing multigrid level.
    pub fn from_level(
        lvl: &Level,
        coeff: &dyn CoefficientField,
        map: Option<&dyn GeometryMap>,
        inner: &InnerKind,
    ) -> Result<Self> {
        Self::from_parts(lvl.dofs(), lvl.matrix().clone(), coeff, map, inner)
    }

    fn from_parts(
        dofs: &DofMap,
        a: CsrMatrix,
        coeff: &dyn CoefficientField,
        map: Option<&dyn GeometryMap>,
        inner: &InnerKind,
    ) -> Result<Self> {
        let level = dofs.level();
        let interface = dofs.interface_free();
        let ng = interface.len();
        let n = a.nrows();
        let cells: Vec<Range<usize>> = (0..dofs.num_cells()).map(|c| dofs.cell_primitive(c).free.clone()).collect();
        let mut to_gamma = vec![None; n];
        for (k, i) in interface.clone().enumerate() {
            to_gamma[i] = Some(k as u32);
        }
        let rows_g: Vec<u32> = interface.clone().map(|i| i as u32).collect();
        let a_gg = a.extract(&rows_g, &to_gamma, ng);
        let a_tg = cells
            .iter()
            .map(|r| a.extract(&r.clone().map(|i| i as u32).collect::<Vec<_>>(), &to_gamma, ng))
            .collect();
        let built = par::map_range(cells.len(), |c| -> Result<Box<dyn InnerSolver>> {
            Ok(match inner {
                InnerKind::Dense => Box::new(DenseBlock::new(block(&a, &cells[c]))?),
                InnerKind::Multigrid(cfg) => {
                    let single = MacroMesh::single(dofs.cell(c));
                    Box::new(MultigridInner::new(Hierarchy::build(&single, level, coeff, map, cfg.clone())?))
                }
            })
        });
        let inner = built
            .into_iter()
            .enumerate()
            .map(|(c, r)| r.map_err(|e| Error::Solver(format!("inner solver of cell {c}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { a, interface, cells, a_gg, a_tg, inner })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn interface(&self) -> Range<usize> {
        self.interface.clone()
    }

    pub fn interface_len(&self) -> usize {
        self.interface.len()
    }

    fn inner_solve(&self, c: usize, r: &[f64]) -> Result<Vec<f64>> {
        let mut w = vec![0.0; r.len()];
        self.inner[c].solve(r, &mut w).map_err(|e| Error::Solver(format!("cell {c}: {e}")))?;
        Ok(w)
    }

    /// `Σ_t A_Γt A_tt^{-1} v_t` for per-cell vectors `v_t`.
    fn eliminate(&self, v: impl Fn(usize) -> Vec<f64> + Sync) -> Result<Vec<f64>> {
        let parts = par::map_range(self.cells.len(), |c| -> Result<Vec<f64>> {
            let w = self.inner_solve(c, &v(c))?;
            // A_Γt = A_tΓ^T by symmetry.
            let mut out = vec![0.0; self.interface_len()];
            let m = &self.a_tg[c];
            for (i, wi) in w.iter().enumerate() {
                let (cols, vals) = m.row(i);
                for (&j, &a) in cols.iter().zip(vals) {
                    out[j as usize] += a * wi;
                }
            }
            Ok(out)
        });
        let mut sum = vec![0.0; self.interface_len()];
        for p in parts {
            for (s, x) in sum.iter_mut().zip(p?) {
                *s += x;
            }
        }
        Ok(sum)
    }

    /// `S u_Γ`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.a_gg.mul(u);
        let corr = self.eliminate(|c| self.a_tg[c].mul(u))?;
        out.iter_mut().zip(corr).for_each(|(o, c)| *o -= c);
        Ok(out)
    }

    /// `χ_Γ = b_Γ - Σ_t A_Γt A_tt^{-1} b_t`.
    pub fn rhs(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut out = b[self.interface.clone()].to_vec();
        let corr = self.eliminate(|c| b[self.cells[c].clone()].to_vec())?;
        out.iter_mut().zip(corr).for_each(|(o, c)| *o -= c);
        Ok(out)
    }

    /// Full solution from interface values: `u_t = A_tt^{-1} (b_t - A_tΓ u_Γ)`.
    pub fn reconstruct(&self, u_gamma: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let mut u = vec![0.0; self.a.nrows()];
        u[self.interface.clone()].copy_from_slice(u_gamma);
        let parts = par::map_range(self.cells.len(), |c| -> Result<Vec<f64>> {
            let mut r = b[self.cells[c].clone()].to_vec();
            let t = self.a_tg[c].mul(u_gamma);
            r.iter_mut().zip(t).for_each(|(x, y)| *x -= y);
            self.inner_solve(c, &r)
        });
        for (c, p) in parts.into_iter().enumerate() {
            u[self.cells[c].clone()].copy_from_slice(&p?);
        }
        Ok(u)
    }

    /// Solves `A u = b` through the interface system (PCG with `diag(A_ΓΓ)`)
    /// and interior reconstruction.
    pub fn solve(&self, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, CgReport)> {
        let chi = self.rhs(b)?;
        let diag = self.a_gg.diagonal();
        let mut ug = vec![0.0; chi.len()];
        let err = std::cell::Cell::new(None);
        let report = pcg(
            |x, y| match self.apply(x) {
                Ok(v) => y.copy_from_slice(&v),
                Err(e) => {
                    err.set(Some(e));
                    y.iter_mut().for_each(|v| *v = f64::NAN);
                }
            },
            |r, z| {
                z.iter_mut().zip(r).zip(&diag).for_each(|((zi, ri), di)| *zi = ri / di);
                Ok(())
            },
            &chi,
            &mut ug,
            tol,
            max_iter,
        );
        if let Some(e) = err.take() {
            return Err(e);
        }
        let report = report?;
        Ok((self.reconstruct(&ug, b)?, report))
    }

    /// Dense Schur complement from dense block elimination.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let ng = self.interface_len();
        let mut s = self.a_gg.to_dense();
        for (c, r) in self.cells.iter().enumerate() {
            let att = block(&self.a, r);
            let atg = self.a_tg[c].to_dense();
            let chol = att.cholesky().ok_or_else(|| Error::Solver(format!("cell {c}: interior block not SPD")))?;
            let x = chol.solve(&atg);
            s -= atg.transpose() * x;
        }
        debug_assert_eq!(s.nrows(), ng);
        Ok(s)
    }
}

fn block(a: &CsrMatrix, r: &Range<usize>) -> DMatrix<f64> {
    let m = r.len();
    let mut d = DMatrix::zeros(m, m);
    for (li, i) in r.clone().enumerate() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let j = j as usize;
            if r.contains(&j) {
                d[(li, j - r.start)] = v;
            }
        }
    }
    d
}

/// One step of the symmetric hybrid block smoother on `level`.
pub fn hybrid_smooth(level: &Level, u: &mut [f64], f: &[f64]) -> Result<()> {
    level.smooth(u, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Coefficient;
    use crate::mesh::shapes;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(level: u32, inner: InnerKind) -> SchurSystem {
        let mesh = shapes::split_cube(0.5).unwrap();
        let k = Coefficient::Layered { interface: 0.5, lower: 1.0, upper: 10.0 };
        SchurSystem::build(&mesh, level, &k, None, &inner).unwrap()
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn level_two_rank_one() {
        let t = crate::geometry::TetOrientation::from_coords(shapes::SPADE).unwrap();
        let mut mesh = MacroMesh::single(&t);
        // Make every face Neumann so the interface carries free DoFs.
        mesh = MacroMesh::new(mesh.vertices().to_vec(), mesh.cells().to_vec(), |_, _| crate::mesh::BoundaryKind::Neumann)
            .unwrap();
        let sys = SchurSystem::build(&mesh, 2, &Coefficient::Constant(1.0), None, &InnerKind::Dense).unwrap();
        let a = sys.matrix().to_dense();
        let ng = sys.interface_len();
        let t0 = ng;
        assert_eq!(a.nrows(), ng + 1);
        let att = a[(t0, t0)];
        let s = sys.dense().unwrap();
        for i in 0..ng {
            for j in 0..ng {
                let want = a[(i, j)] - a[(i, t0)] * a[(t0, j)] / att;
                assert!((s[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn apply_matches_dense_and_is_symmetric() {
        for level in [2, 3] {
            let sys = cube(level, InnerKind::Dense);
            let s = sys.dense().unwrap();
            let ng = sys.interface_len();
            let x = random(ng, 1);
            let y = random(ng, 2);
            let sx = sys.apply(&x).unwrap();
            let sy = sys.apply(&y).unwrap();
            let want = &s * DVector::from_column_slice(&x);
            let scale = want.amax();
            for i in 0..ng {
                assert!((sx[i] - want[i]).abs() < 1e-10 * scale);
            }
            let lhs = par::dot(&sx, &y);
            let rhs = par::dot(&x, &sy);
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
            assert!(s.clone().cholesky().is_some());
        }
    }

    #[test]
    fn rhs_cases() {
        let sys = cube(2, InnerKind::Dense);
        let n = sys.matrix().nrows();
        assert!(sys.rhs(&vec![0.0; n]).unwrap().iter().all(|&v| v == 0.0));
        let mut b = vec![0.0; n];
        for i in sys.interface() {
            b[i] = (i as f64).sin();
        }
        assert_eq!(sys.rhs(&b).unwrap(), b[sys.interface()].to_vec());
        let u = sys.reconstruct(&vec![0.0; sys.interface_len()], &vec![0.0; n]).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pipeline_matches_direct_solve() {
        let sys = cube(3, InnerKind::Dense);
        let n = sys.matrix().nrows();
        let b = random(n, 7);
        let (u, _) = sys.solve(&b, 1e-10 * par::norm2(&b), 1000).unwrap();
        let direct = sys.matrix().to_dense().cholesky().unwrap().solve(&DVector::from_column_slice(&b));
        for i in 0..n {
            assert!((u[i] - direct[i]).abs() < 1e-8 * direct.amax());
        }
    }

    #[test]
    fn multigrid_inner_solver() {
        let mg = MultigridConfig::default();
        let sys = cube(3, InnerKind::Multigrid(mg));
        let dense = cube(3, InnerKind::Dense);
        let x = random(sys.interface_len(), 3);
        let a = sys.apply(&x).unwrap();
        let b = dense.apply(&x).unwrap();
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-6 * scale);
        }
    }
}
