//! Geometric multigrid over a hierarchy of uniformly refined levels.
//!
//! Each level carries the operator on its free DoFs and one block
//! preconditioner per macro-primitive. Smoothing follows the symmetric hybrid
//! sequence vertex, edge, face, cell, face, edge, vertex: within one stage the
//! primitives are updated additively from a common residual; vertex, edge and
//! face blocks use Gauss–Seidel (forward on the way in, backward on the way
//! out), cell blocks use a symmetric block smoother.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{CellAssembler, CoefficientField, GeometryMap, StencilField, StencilSource};
use crate::dofs::{DofMap, Primitive, PrimitiveKind, NONE};
use crate::error::{Error, Result};
use crate::geometry::{check_level, Direction, LogicalCoord, SimplexIndexer};
use crate::ilu::{factorize, IluFactors};
use crate::mesh::MacroMesh;
use crate::par;
use crate::sparse::CsrMatrix;
use crate::surrogate::{OperatorSurrogate, SurrogateConfig, SurrogateIlu};

/// Solver for the interior block of one macro-tetrahedron.
pub trait BlockSolver: Send + Sync {
    /// Approximately solves `A_tt w = r` (interior lattice order).
    fn solve(&self, r: &[f64], w: &mut [f64]);
}

impl BlockSolver for IluFactors {
    fn solve(&self, r: &[f64], w: &mut [f64]) {
        IluFactors::solve(self, r, w)
    }
}

impl BlockSolver for SurrogateIlu {
    fn solve(&self, r: &[f64], w: &mut [f64]) {
        SurrogateIlu::solve(self, r, w)
    }
}

/// Dense Cholesky factor of a block.
pub struct DenseBlock(nalgebra::Cholesky<f64, nalgebra::Dyn>);

impl DenseBlock {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        nalgebra::Cholesky::new(a)
            .map(DenseBlock)
            .ok_or_else(|| Error::Solver("block is not positive definite".into()))
    }
}

impl BlockSolver for DenseBlock {
    fn solve(&self, r: &[f64], w: &mut [f64]) {
        let x = self.0.solve(&nalgebra::DVector::from_column_slice(r));
        w.copy_from_slice(x.as_slice());
    }
}

/// Smoother used on macro-cell interiors.
#[derive(Clone, Debug, PartialEq)]
pub enum CellSmoother {
    /// Symmetric Gauss–Seidel.
    Sgs,
    /// Matrix-based ILU(0).
    Ilu,
    /// ILU(0) with polynomial surrogate factors.
    SurrogateIlu(SurrogateConfig),
    /// Exact block solve (dense Cholesky); for testing.
    Exact,
}

impl CellSmoother {
    pub fn name(&self) -> &'static str {
        match self {
            CellSmoother::Sgs => "sgs",
            CellSmoother::Ilu => "ilu",
            CellSmoother::SurrogateIlu(_) => "surrogate_ilu",
            CellSmoother::Exact => "exact",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultigridConfig {
    pub smoother: CellSmoother,
    pub pre: usize,
    pub post: usize,
    pub coarse_tol: f64,
    /// Replace the cell-interior operator rows by a polynomial surrogate of
    /// these degrees.
    pub operator_degrees: Option<[usize; 3]>,
}

impl Default for MultigridConfig {
    fn default() -> Self {
        Self { smoother: CellSmoother::Ilu, pre: 3, post: 3, coarse_tol: 1e-12, operator_degrees: None }
    }
}

enum CellBlock {
    Sgs,
    Solver(Box<dyn BlockSolver>),
}

/// Operator with the rows of cell-interior DoFs taken from per-cell stencils.
fn replace_interior_rows(dofs: &DofMap, a: &CsrMatrix, fields: &[Box<dyn StencilSource>]) -> CsrMatrix {
    let mut rows: Vec<Vec<(u32, f64)>> = (0..a.nrows())
        .map(|i| {
            let (c, v) = a.row(i);
            c.iter().copied().zip(v.iter().copied()).collect()
        })
        .collect();
    for (c, field) in fields.iter().enumerate() {
        let level = dofs.level();
        for p in SimplexIndexer::interior(level).coords() {
            let i = dofs.free(c, p);
            let s = field.stencil(p);
            rows[i as usize] = Direction::ALL
                .iter()
                .filter_map(|&d| {
                    let j = dofs.free(c, p.shifted(d));
                    (j != NONE).then(|| (j, s[d]))
                })
                .collect();
        }
    }
    CsrMatrix::from_rows(a.ncols(), rows)
}

/// One level of the hierarchy.
pub struct Level {
    dofs: DofMap,
    a: CsrMatrix,
    stages: [Vec<usize>; 4],
    cells: Vec<CellBlock>,
}

fn kind_slot(k: PrimitiveKind) -> usize {
    match k {
        PrimitiveKind::Vertex => 0,
        PrimitiveKind::Edge => 1,
        PrimitiveKind::Face => 2,
        PrimitiveKind::Cell => 3,
    }
}

/// Dense interior block of macro-cell `c`.
pub fn cell_block_dense(a: &CsrMatrix, cell: &Primitive) -> DMatrix<f64> {
    let r = cell.free.clone();
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

impl Level {
    pub fn build(
        mesh: &MacroMesh,
        level: u32,
        coeff: &dyn CoefficientField,
        map: Option<&dyn GeometryMap>,
        config: &MultigridConfig,
    ) -> Result<Self> {
        let dofs = DofMap::new(mesh, level)?;
        let mut a = dofs.assemble(coeff, map)?;
        let mut stages: [Vec<usize>; 4] = Default::default();
        for (i, p) in dofs.primitives().iter().enumerate() {
            if !p.free.is_empty() {
                stages[kind_slot(p.kind)].push(i);
            }
        }
        let field = |c: usize| -> Result<Box<dyn StencilSource>> {
            let exact = StencilField::assemble(&CellAssembler::new(dofs.cell(c), level, coeff, map))?;
            Ok(match config.operator_degrees {
                Some(deg) => match OperatorSurrogate::fit(&exact, deg, SurrogateConfig::default_coarse(level)) {
                    Ok(s) => Box::new(s),
                    // Too few points for these degrees: keep the assembled stencils.
                    Err(Error::RankDeficient { .. }) => Box::new(exact),
                    Err(e) => return Err(e),
                },
                None => Box::new(exact),
            })
        };
        let fields: Option<Vec<Box<dyn StencilSource>>> = match config.operator_degrees {
            Some(_) => Some(par::map_range(dofs.num_cells(), field).into_iter().collect::<Result<_>>()?),
            None => None,
        };
        if let Some(fields) = &fields {
            a = replace_interior_rows(&dofs, &a, fields);
        }
        let cells = par::map_range(dofs.num_cells(), |c| -> Result<CellBlock> {
            let source = || -> Result<Box<dyn StencilSource + '_>> {
                match &fields {
                    Some(f) => Ok(Box::new(&*f[c])),
                    None => field(c),
                }
            };
            Ok(match &config.smoother {
                CellSmoother::Sgs => CellBlock::Sgs,
                CellSmoother::Exact => {
                    CellBlock::Solver(Box::new(DenseBlock::new(cell_block_dense(&a, dofs.cell_primitive(c)))?))
                }
                CellSmoother::Ilu => CellBlock::Solver(Box::new(factorize(&*source()?)?)),
                CellSmoother::SurrogateIlu(cfg) => {
                    CellBlock::Solver(Box::new(SurrogateIlu::build(&*source()?, cfg)?))
                }
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Self { dofs, a, stages, cells })
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn num_free(&self) -> usize {
        self.a.nrows()
    }

    /// Forward (or backward) Gauss–Seidel on the block `range` with right-hand side `r`.
    fn gs_block(&self, range: std::ops::Range<usize>, r: &[f64], w: &mut [f64], forward: bool) -> Result<()> {
        let s = range.start;
        let mut sweep = |i: usize| -> Result<()> {
            let (cols, vals) = self.a.row(i);
            let mut acc = r[i - s];
            let mut diag = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                let j = j as usize;
                if j == i {
                    diag = v;
                } else if range.contains(&j) {
                    acc -= v * w[j - s];
                }
            }
            if diag == 0.0 {
                return Err(Error::Solver(format!("zero diagonal in row {i}")));
            }
            w[i - s] = acc / diag;
            Ok(())
        };
        if forward {
            for i in range.clone() {
                sweep(i)?;
            }
        } else {
            for i in range.clone().rev() {
                sweep(i)?;
            }
        }
        Ok(())
    }

    fn block_update(&self, prim: &Primitive, r: &[f64], forward: bool) -> Result<Vec<f64>> {
        let range = prim.free.clone();
        let rb = &r[range.clone()];
        let mut w = vec![0.0; range.len()];
        match prim.kind {
            PrimitiveKind::Cell => match &self.cells[prim.index] {
                CellBlock::Sgs => {
                    self.gs_block(range.clone(), rb, &mut w, true)?;
                    // Backward sweep on the remaining residual: w += (D + U)^{-1} (r - A w).
                    let mut res = vec![0.0; range.len()];
                    for i in range.clone() {
                        let (cols, vals) = self.a.row(i);
                        let mut acc = rb[i - range.start];
                        for (&j, &v) in cols.iter().zip(vals) {
                            let j = j as usize;
                            if range.contains(&j) {
                                acc -= v * w[j - range.start];
                            }
                        }
                        res[i - range.start] = acc;
                    }
                    let mut dw = vec![0.0; range.len()];
                    self.gs_block(range.clone(), &res, &mut dw, false)?;
                    for (a, b) in w.iter_mut().zip(&dw) {
                        *a += b;
                    }
                }
                CellBlock::Solver(s) => s.solve(rb, &mut w),
            },
            _ => self.gs_block(range, rb, &mut w, forward)?,
        }
        Ok(w)
    }

    fn stage(&self, slot: usize, u: &mut [f64], f: &[f64], forward: bool) -> Result<()> {
        let prims = &self.stages[slot];
        if prims.is_empty() {
            return Ok(());
        }
        let mut r = vec![0.0; u.len()];
        self.a.residual(f, u, &mut r);
        let all = self.dofs.primitives();
        let updates = par::map_slice(prims, |&pi| self.block_update(&all[pi], &r, forward));
        for (&pi, w) in prims.iter().zip(updates) {
            let w = w?;
            for (ui, wi) in u[all[pi].free.clone()].iter_mut().zip(&w) {
                *ui += wi;
            }
        }
        Ok(())
    }

    /// One symmetric hybrid smoothing step.
    pub fn smooth(&self, u: &mut [f64], f: &[f64]) -> Result<()> {
        for slot in 0..3 {
            self.stage(slot, u, f, true)?;
        }
        self.stage(3, u, f, true)?;
        for slot in (0..3).rev() {
            self.stage(slot, u, f, false)?;
        }
        Ok(())
    }
}

/// Linear interpolation from `coarse` to `fine` (rows: fine free DoFs).
pub fn prolongation(coarse: &DofMap, fine: &DofMap) -> Result<CsrMatrix> {
    if fine.level() != coarse.level() + 1 {
        return Err(Error::Solver(format!(
            "prolongation between levels {} and {}",
            coarse.level(),
            fine.level()
        )));
    }
    let rows = (0..fine.num_free())
        .map(|i| {
            let pt = fine.point_of_free(i) as usize;
            let (c, p) = fine.occurrences(pt).next().expect("every point lies in a cell");
            let abc = [p.x, p.x + p.y, p.x + p.y + p.z];
            let lo = abc.map(|v| v.div_euclid(2));
            let hi = abc.map(|v| (v + 1).div_euclid(2));
            let to_xyz = |q: [i32; 3]| LogicalCoord::new(q[0], q[1] - q[0], q[2] - q[1]);
            let parents = if lo == hi { vec![(lo, 1.0)] } else { vec![(lo, 0.5), (hi, 0.5)] };
            parents
                .into_iter()
                .filter_map(|(q, w)| {
                    let j = coarse.free(c, to_xyz(q));
                    (j != NONE).then_some((j, w))
                })
                .collect()
        })
        .collect();
    Ok(CsrMatrix::from_rows(coarse.num_free(), rows))
}

/// Statistics of a conjugate-gradient run.
#[derive(Clone, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

/// Preconditioned CG stopping at `||r|| < tol` (absolute, unpreconditioned residual).
pub fn pcg<A, M>(apply_a: A, precond: M, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgReport>
where
    A: Fn(&[f64], &mut [f64]),
    M: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let n = b.len();
    let mut r = vec![0.0; n];
    apply_a(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut residuals = vec![par::norm2(&r)];
    if residuals[0] < tol {
        return Ok(CgReport { iterations: 0, residuals });
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z)?;
    let mut p = z.clone();
    let mut rz = par::dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply_a(&p, &mut ap);
        let pap = par::dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver(format!("CG breakdown: <p, Ap> = {pap:e} at iteration {it}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rn = par::norm2(&r);
        residuals.push(rn);
        if rn < tol {
            return Ok(CgReport { iterations: it, residuals });
        }
        precond(&r, &mut z)?;
        let rz_new = par::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence(format!(
        "CG: residual {:e} after {max_iter} iterations (tol {tol:e})",
        residuals.last().unwrap()
    )))
}

/// Multigrid hierarchy from level 2 up to the finest level.
pub struct Hierarchy {
    levels: Vec<Level>,
    prolong: Vec<CsrMatrix>,
    restrict: Vec<CsrMatrix>,
    config: MultigridConfig,
}

impl Hierarchy {
    pub const COARSEST: u32 = 2;

    pub fn build(
        mesh: &MacroMesh,
        finest: u32,
        coeff: &dyn CoefficientField,
        map: Option<&dyn GeometryMap>,
        config: MultigridConfig,
    ) -> Result<Self> {
        check_level(finest)?;
        let mut levels = Vec::new();
        for l in Self::COARSEST..=finest {
            levels.push(Level::build(mesh, l, coeff, map, &config)?);
        }
        let mut prolong = Vec::new();
        let mut restrict = Vec::new();
        for k in 1..levels.len() {
            let p = prolongation(levels[k - 1].dofs(), levels[k].dofs())?;
            restrict.push(p.transpose());
            prolong.push(p);
        }
        Ok(Self { levels, prolong, restrict, config })
    }

    pub fn finest(&self) -> &Level {
        self.levels.last().unwrap()
    }

    pub fn level(&self, l: u32) -> &Level {
        &self.levels[(l - Self::COARSEST) as usize]
    }

    pub fn config(&self) -> &MultigridConfig {
        &self.config
    }

    fn cycle(&self, k: usize, u: &mut [f64], f: &[f64]) -> Result<()> {
        let lvl = &self.levels[k];
        if k == 0 {
            let a = lvl.matrix();
            let tol = self.config.coarse_tol * par::norm2(f).max(f64::MIN_POSITIVE);
            let mut r = vec![0.0; f.len()];
            a.residual(f, u, &mut r);
            let mut e = vec![0.0; f.len()];
            pcg(
                |x, y| a.spmv(x, y),
                |x, y| {
                    y.copy_from_slice(x);
                    Ok(())
                },
                &r,
                &mut e,
                tol,
                10 * f.len() + 100,
            )?;
            for (ui, ei) in u.iter_mut().zip(&e) {
                *ui += ei;
            }
            return Ok(());
        }
        for _ in 0..self.config.pre {
            lvl.smooth(u, f)?;
        }
        let mut r = vec![0.0; u.len()];
        lvl.matrix().residual(f, u, &mut r);
        let rc = self.restrict[k - 1].mul(&r);
        let mut ec = vec![0.0; rc.len()];
        self.cycle(k - 1, &mut ec, &rc)?;
        let e = self.prolong[k - 1].mul(&ec);
        for (ui, ei) in u.iter_mut().zip(&e) {
            *ui += ei;
        }
        for _ in 0..self.config.post {
            lvl.smooth(u, f)?;
        }
        Ok(())
    }

    /// One V-cycle on the finest level.
    pub fn v_cycle(&self, u: &mut [f64], f: &[f64]) -> Result<()> {
        self.cycle(self.levels.len() - 1, u, f)
    }

    /// Asymptotic convergence factor by power iteration on the error
    /// propagator: `steps` cycles with `f = 0` from a seeded random error,
    /// Euclidean normalization, last ratio returned.
    pub fn convergence_factor(&self, steps: usize, seed: u64) -> Result<f64> {
        let n = self.finest().num_free();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let zero = vec![0.0; n];
        let mut norm = par::norm2(&e);
        let mut rho = 0.0;
        for _ in 0..steps {
            e.iter_mut().for_each(|v| *v /= norm);
            self.v_cycle(&mut e, &zero)?;
            let next = par::norm2(&e);
            if !next.is_finite() {
                return Err(Error::Solver("power iteration overflow".into()));
            }
            if next == 0.0 {
                return Ok(0.0);
            }
            rho = next;
            norm = next;
        }
        Ok(rho)
    }

    /// Applies one V-cycle with zero initial guess as a preconditioner.
    pub fn precondition(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        z.iter_mut().for_each(|v| *v = 0.0);
        self.v_cycle(z, r)
    }
}

/// Applies one smoothing step with zero initial guess: `z = C^{-1} r`.
pub fn smoother_apply(level: &Level, r: &[f64], z: &mut [f64]) -> Result<()> {
    z.iter_mut().for_each(|v| *v = 0.0);
    level.smooth(z, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Coefficient;
    use crate::geometry::TetOrientation;
    use crate::mesh::shapes;

    fn single(shape: [[f64; 3]; 4]) -> MacroMesh {
        MacroMesh::single(&TetOrientation::from_coords(shape).unwrap())
    }

    #[test]
    fn prolongation_reproduces_linear_functions() {
        let mesh = shapes::split_cube(0.3).unwrap();
        let c = DofMap::new(&mesh, 2).unwrap();
        let f = DofMap::new(&mesh, 3).unwrap();
        let p = prolongation(&c, &f).unwrap();
        let lin = |d: &DofMap, i: usize| {
            let pt = d.point_of_free(i) as usize;
            let (cell, q) = d.occurrences(pt).next().unwrap();
            let x = d.cell(cell).position_unchecked(q, d.level());
            x.x + 2.0 * x.y + 0.5
        };
        let uc: Vec<f64> = (0..c.num_free()).map(|i| lin(&c, i)).collect();
        let uf = p.mul(&uc);
        // Interpolation is exact wherever no Dirichlet parent is dropped.
        let mut checked = 0;
        for i in 0..f.num_free() {
            let (cols, _) = p.row(i);
            let pt = f.point_of_free(i) as usize;
            let (cell, q) = f.occurrences(pt).next().unwrap();
            let full = if q.x % 2 == 0 && q.y % 2 == 0 && q.z % 2 == 0 { 1 } else { 2 };
            if cols.len() == full {
                assert!((uf[i] - lin(&f, i)).abs() < 1e-13);
                checked += 1;
            }
            let _ = cell;
        }
        assert!(checked > f.num_free() / 2);
        let ones = vec![1.0; c.num_free()];
        let pf = p.mul(&ones);
        assert!(pf.iter().all(|&v| v <= 1.0 + 1e-15));
    }

    #[test]
    fn restriction_is_adjoint() {
        let mesh = shapes::split_cube(0.5).unwrap();
        let c = DofMap::new(&mesh, 2).unwrap();
        let f = DofMap::new(&mesh, 3).unwrap();
        let p = prolongation(&c, &f).unwrap();
        let r = p.transpose();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let uc: Vec<f64> = (0..c.num_free()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let vf: Vec<f64> = (0..f.num_free()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = par::dot(&p.mul(&uc), &vf);
            let rhs = par::dot(&uc, &r.mul(&vf));
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
        assert!(r.mul(&vec![0.0; f.num_free()]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coarse_operator_is_galerkin_on_mixed_boundaries() {
        let mesh = shapes::split_cube(0.3).unwrap();
        let coeff = Coefficient::Layered { interface: 0.3, lower: 1.0, upper: 10.0 };
        let h = Hierarchy::build(&mesh, 3, &coeff, None, MultigridConfig::default()).unwrap();
        let (c, f) = (h.level(2), h.level(3));
        let p = prolongation(c.dofs(), f.dofs()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let x: Vec<f64> = (0..c.num_free()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..c.num_free()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fine = par::dot(&f.matrix().mul(&p.mul(&x)), &p.mul(&y));
            let coarse = par::dot(&c.matrix().mul(&x), &y);
            assert!((fine - coarse).abs() < 1e-11 * coarse.abs().max(1.0), "{fine} vs {coarse}");
        }
    }

    #[test]
    fn exact_smoother_converges_immediately() {
        let mesh = single(shapes::regular());
        let cfg = MultigridConfig { smoother: CellSmoother::Exact, ..Default::default() };
        let h = Hierarchy::build(&mesh, 4, &Coefficient::Constant(1.0), None, cfg).unwrap();
        assert!(h.convergence_factor(20, 42).unwrap() <= 1e-10);
    }

    #[test]
    fn hybrid_smoother_is_symmetric() {
        let mesh = shapes::split_cube(0.4).unwrap();
        for smoother in [CellSmoother::Sgs, CellSmoother::Ilu] {
            let lvl = Level::build(&mesh, 3, &Coefficient::Layered { interface: 0.4, lower: 1.0, upper: 10.0 }, None, &MultigridConfig { smoother: smoother.clone(), ..Default::default() }).unwrap();
            let n = lvl.num_free();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..5 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut cx = vec![0.0; n];
                let mut cy = vec![0.0; n];
                smoother_apply(&lvl, &x, &mut cx).unwrap();
                smoother_apply(&lvl, &y, &mut cy).unwrap();
                let a = par::dot(&cx, &y);
                let b = par::dot(&x, &cy);
                assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{a} {b}");
            }
        }
    }

    #[test]
    fn pcg_trivial_and_breakdown() {
        let a = CsrMatrix::from_triplets(1, 1, &[(0, 0, 4.0)]);
        let mut x = vec![0.0];
        let rep = pcg(|u, v| a.spmv(u, v), |u, v| {
            v.copy_from_slice(u);
            Ok(())
        }, &[2.0], &mut x, 1e-12, 10)
        .unwrap();
        assert_eq!(rep.iterations, 1);
        assert!((x[0] - 0.5).abs() < 1e-15);
        let neg = CsrMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]);
        let mut x = vec![0.0];
        assert!(pcg(|u, v| neg.spmv(u, v), |u, v| {
            v.copy_from_slice(u);
            Ok(())
        }, &[1.0], &mut x, 1e-12, 10)
        .is_err());
    }

    #[test]
    fn energy_error_decreases() {
        let mesh = single(shapes::CAP);
        let coeff = Coefficient::KappaPoly(1);
        let h = Hierarchy::build(&mesh, 4, &coeff, None, MultigridConfig::default()).unwrap();
        let a = h.finest().matrix();
        let n = a.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let exact: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = a.mul(&exact);
        let mut u = vec![0.0; n];
        let energy = |u: &[f64]| {
            let e: Vec<f64> = u.iter().zip(&exact).map(|(a, b)| a - b).collect();
            par::dot(&e, &a.mul(&e))
        };
        let mut prev = energy(&u);
        for _ in 0..4 {
            h.v_cycle(&mut u, &f).unwrap();
            let now = energy(&u);
            assert!(now < prev);
            prev = now;
        }
    }

    #[test]
    fn operator_surrogate_reproduces_polynomial_operator() {
        let mesh = single(shapes::trirectangular(1.0));
        let coeff = Coefficient::KappaPoly(3);
        let exact = Level::build(&mesh, 4, &coeff, None, &MultigridConfig::default()).unwrap();
        let cfg = MultigridConfig { operator_degrees: Some([3, 3, 3]), ..Default::default() };
        let sur = Level::build(&mesh, 4, &coeff, None, &cfg).unwrap();
        let (a, b) = (exact.matrix().to_dense(), sur.matrix().to_dense());
        assert!((a - b).amax() < 1e-9 * exact.matrix().to_dense().amax());
    }
}
