//! ILU(0) in `L D L^T` form on the interior of one macro-tetrahedron.
//!
//! The factors are computed stencil by stencil while sweeping the interior in
//! lattice order. Only the current and the previous z-layer of factors are
//! needed at any time ([`FaceLayerPair`]); consumers receive every factorized
//! stencil through a [`FactorSink`] and decide what to keep.

use std::fmt::Write as _;
use std::mem::size_of;

use crate::assembly::{Stencil15, StencilSource};
use crate::error::{Error, Result};
use crate::geometry::{intervals, Direction, LogicalCoord, SimplexIndexer, TriangleIndexer};

// Positions of the lower directions inside `LowerStencil::l`.
const W: usize = 0;
const S: usize = 1;
const SE: usize = 2;
const BNW: usize = 3;
const BN: usize = 4;
const BC: usize = 5;
const BE: usize = 6;

/// Unit-lower factor row `L_d` (d lower) and pivot `D_c` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerStencil {
    pub l: [f64; 7],
    pub d: f64,
}

impl LowerStencil {
    pub const IDENTITY: LowerStencil = LowerStencil { l: [0.0; 7], d: 1.0 };

    pub fn get(&self, dir: Direction) -> f64 {
        match dir.lower_index() {
            Some(k) => self.l[k],
            None if dir == Direction::C => self.d,
            None => 0.0,
        }
    }
}

impl Default for LowerStencil {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// The two face-layer buffers of the streaming factorization.
#[derive(Clone, Debug)]
pub struct FaceLayerPair {
    tri: TriangleIndexer,
    beta: Vec<LowerStencil>,
    gamma: Vec<LowerStencil>,
}

impl FaceLayerPair {
    pub fn new(level: u32) -> Self {
        let tri = TriangleIndexer::new(intervals(level));
        Self {
            tri,
            beta: vec![LowerStencil::IDENTITY; tri.len()],
            gamma: vec![LowerStencil::IDENTITY; tri.len()],
        }
    }

    #[inline]
    pub fn beta(&self, x: i32, y: i32) -> &LowerStencil {
        &self.beta[self.tri.index(x, y)]
    }

    #[inline]
    pub fn gamma(&self, x: i32, y: i32) -> &LowerStencil {
        &self.gamma[self.tri.index(x, y)]
    }

    pub fn set_beta(&mut self, x: i32, y: i32, s: LowerStencil) {
        let i = self.tri.index(x, y);
        self.beta[i] = s;
    }

    /// Moves the current layer into the previous one and resets the current layer.
    pub fn advance(&mut self) {
        std::mem::swap(&mut self.beta, &mut self.gamma);
        self.beta.fill(LowerStencil::IDENTITY);
    }

    /// Bytes held by both buffers.
    pub fn bytes(&self) -> usize {
        (self.beta.len() + self.gamma.len()) * size_of::<LowerStencil>()
    }
}

/// Solves the eight stencil equations at `(x, y)` of the current layer.
/// Lower entries of `a` pointing outside the interior must already be zero.
pub fn factor_step(a: &Stencil15, x: i32, y: i32, layers: &FaceLayerPair) -> LowerStencil {
    stencil_equations(a, |d| match d {
        Direction::Bc => layers.gamma(x, y),
        Direction::Be => layers.gamma(x + 1, y),
        Direction::Bnw => layers.gamma(x - 1, y + 1),
        Direction::Bn => layers.gamma(x, y + 1),
        Direction::S => layers.beta(x, y - 1),
        Direction::W => layers.beta(x - 1, y),
        Direction::Se => layers.beta(x + 1, y - 1),
        _ => unreachable!("lower directions only"),
    })
}

/// The eight stencil equations at one point; `nb(d)` is the factored
/// stencil at the lower neighbour `p + d`.
pub fn stencil_equations<'a>(a: &Stencil15, nb: impl Fn(Direction) -> &'a LowerStencil) -> LowerStencil {
    let g0 = nb(Direction::Bc);
    let ge = nb(Direction::Be);
    let gnw = nb(Direction::Bnw);
    let gn = nb(Direction::Bn);
    let bs = nb(Direction::S);
    let bw = nb(Direction::W);
    let bse = nb(Direction::Se);

    let bc = a[Direction::Bc] / g0.d;
    let t_bc = bc * g0.d;
    let s = (a[Direction::S] - t_bc * bs.l[BN]) / bs.d;
    let bnw = (a[Direction::Bnw] - t_bc * gnw.l[SE]) / gnw.d;
    let be = (a[Direction::Be] - t_bc * ge.l[W]) / ge.d;
    let t_bnw = bnw * gnw.d;
    let t_s = s * bs.d;
    let t_be = be * ge.d;
    let w = (a[Direction::W] - t_bc * bw.l[BE] - t_bnw * bw.l[BN] - t_s * bw.l[SE]) / bw.d;
    let bn = (a[Direction::Bn] - t_bc * gn.l[S] - t_be * gn.l[SE] - t_bnw * gn.l[W]) / gn.d;
    let se = (a[Direction::Se] - t_bc * bse.l[BNW] - t_be * bse.l[BN] - t_s * bse.l[W]) / bse.d;
    let c = a[Direction::C]
        - bc * t_bc
        - be * t_be
        - bnw * t_bnw
        - bn * bn * gn.d
        - se * se * bse.d
        - s * t_s
        - w * w * bw.d;
    let mut l = [0.0; 7];
    l[W] = w;
    l[S] = s;
    l[SE] = se;
    l[BNW] = bnw;
    l[BN] = bn;
    l[BC] = bc;
    l[BE] = be;
    LowerStencil { l, d: c }
}

/// Zeroes the lower couplings of `a` at `p` that leave the interior.
pub fn mask_lower(a: &mut Stencil15, p: LogicalCoord, level: u32) {
    for d in Direction::LOWER {
        if !p.shifted(d).is_interior(level) {
            a[d] = 0.0;
        }
    }
}

/// Receives each factorized stencil in sweep order.
pub trait FactorSink {
    fn accept(&mut self, p: LogicalCoord, s: &LowerStencil);
}

impl<F: FnMut(LogicalCoord, &LowerStencil)> FactorSink for F {
    fn accept(&mut self, p: LogicalCoord, s: &LowerStencil) {
        self(p, s)
    }
}

/// Bookkeeping of one streaming factorization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StreamStats {
    /// Bytes of the face-layer working set.
    pub working_bytes: usize,
    pub points: usize,
}

/// Streams the factorization of the interior block of `source` into `sink`.
pub fn factorize_streaming(source: &dyn StencilSource, sink: &mut dyn FactorSink) -> Result<StreamStats> {
    let level = source.level();
    let n = intervals(level);
    let mut layers = FaceLayerPair::new(level);
    let mut points = 0;
    for z in 1..n - 1 {
        for y in 1..n - 1 - z {
            for x in 1..n - z - y {
                let p = LogicalCoord::new(x, y, z);
                let mut a = source.stencil(p);
                mask_lower(&mut a, p, level);
                let f = factor_step(&a, x, y, &layers);
                let scale = a[Direction::C].abs().max(f64::MIN_POSITIVE);
                if !(f.d.abs() > 1e-300 * scale) || !f.d.is_finite() {
                    return Err(Error::PivotBreakdown { coord: p, value: f.d });
                }
                layers.set_beta(x, y, f);
                sink.accept(p, &f);
                points += 1;
            }
        }
        layers.advance();
    }
    Ok(StreamStats { working_bytes: layers.bytes(), points })
}

/// Factors stored over the whole lattice of one tetrahedron; points outside
/// the interior hold the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct IluFactors {
    level: u32,
    indexer: SimplexIndexer,
    stencils: Vec<LowerStencil>,
    inv_d: Vec<f64>,
}

impl IluFactors {
    pub fn identity(level: u32) -> Self {
        let indexer = SimplexIndexer::full(level);
        Self {
            level,
            indexer,
            stencils: vec![LowerStencil::IDENTITY; indexer.len()],
            inv_d: vec![1.0; indexer.len()],
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn at(&self, p: LogicalCoord) -> &LowerStencil {
        &self.stencils[self.indexer.index(p)]
    }

    pub fn set(&mut self, p: LogicalCoord, s: LowerStencil) {
        let i = self.indexer.index(p);
        self.stencils[i] = s;
        self.inv_d[i] = 1.0 / s.d;
    }

    /// Bytes held by the store (factors plus reciprocal pivots).
    pub fn bytes(&self) -> usize {
        self.stencils.len() * size_of::<LowerStencil>() + self.inv_d.len() * size_of::<f64>()
    }

    /// Solves `L D L^T w = r` for interior-ordered `r`.
    pub fn solve(&self, r: &[f64], w: &mut [f64]) {
        let n = intervals(self.level);
        let mut wk = vec![0.0; self.indexer.len()];
        let inner = SimplexIndexer::interior(self.level);
        assert_eq!(r.len(), inner.len());
        for_each_row(n, |y, z, xmax| {
            let (src, dst) = (inner.row_start(y, z), self.indexer.row_start(y, z));
            for x in 1..=xmax {
                wk[(dst + x as isize) as usize] = r[(src + x as isize) as usize];
            }
        });
        substitute(&self.indexer, n, &mut wk, |i| (&self.stencils[i].l, self.inv_d[i]));
        for_each_row(n, |y, z, xmax| {
            let (dst, src) = (inner.row_start(y, z), self.indexer.row_start(y, z));
            for x in 1..=xmax {
                w[(dst + x as isize) as usize] = wk[(src + x as isize) as usize];
            }
        });
    }

    /// `(x, y, z, L_w, ..., L_be, D_c)` rows over the interior.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,z");
        for d in Direction::LOWER {
            let _ = write!(s, ",{}", d.name());
        }
        s.push_str(",c\n");
        for p in SimplexIndexer::interior(self.level).coords() {
            let f = self.at(p);
            let _ = write!(s, "{},{},{}", p.x, p.y, p.z);
            for v in f.l {
                let _ = write!(s, ",{v:.17e}");
            }
            let _ = writeln!(s, ",{:.17e}", f.d);
        }
        s
    }
}

/// Calls `f(y, z, xmax)` for every interior row in lattice order.
#[inline]
pub(crate) fn for_each_row(n: i32, mut f: impl FnMut(i32, i32, i32)) {
    for z in 1..n - 1 {
        for y in 1..n - 1 - z {
            f(y, z, n - 1 - z - y);
        }
    }
}

/// Forward substitution, pivot scaling and backward substitution in place on
/// a lattice-indexed vector whose non-interior entries are zero. `row(i)`
/// returns the lower factor entries and reciprocal pivot at lattice index `i`.
pub(crate) fn substitute<'a>(
    indexer: &SimplexIndexer,
    n: i32,
    wk: &mut [f64],
    row: impl Fn(usize) -> (&'a [f64; 7], f64),
) {
    let lower = Direction::LOWER;
    for_each_row(n, |y, z, xmax| {
        let own = indexer.row_start(y, z);
        let nb: [isize; 7] = lower.map(|d| {
            let o = d.offset();
            indexer.row_start(y + o[1], z + o[2]) + o[0] as isize
        });
        for x in 1..=xmax {
            let i = (own + x as isize) as usize;
            let (l, _) = row(i);
            let mut s = wk[i];
            for k in 0..7 {
                s -= l[k] * wk[(nb[k] + x as isize) as usize];
            }
            wk[i] = s;
        }
    });
    for_each_row(n, |y, z, xmax| {
        let own = indexer.row_start(y, z);
        for x in 1..=xmax {
            let i = (own + x as isize) as usize;
            wk[i] *= row(i).1;
        }
    });
    // Backward: w_p -= sum_d L^{p-d}_d w_{p-d}, with p - d an upper neighbour.
    let rows: Vec<(i32, i32, i32)> = {
        let mut v = Vec::new();
        for_each_row(n, |y, z, xmax| v.push((y, z, xmax)));
        v
    };
    for &(y, z, xmax) in rows.iter().rev() {
        let own = indexer.row_start(y, z);
        let nb: [isize; 7] = lower.map(|d| {
            let o = d.offset();
            indexer.row_start(y - o[1], z - o[2]) - o[0] as isize
        });
        for x in (1..=xmax).rev() {
            let i = (own + x as isize) as usize;
            let mut s = wk[i];
            for k in 0..7 {
                let q = (nb[k] + x as isize) as usize;
                s -= row(q).0[k] * wk[q];
            }
            wk[i] = s;
        }
    }
}

/// Matrix-based factorization: streams into a full lattice store.
pub fn factorize(source: &dyn StencilSource) -> Result<IluFactors> {
    let mut store = IluFactors::identity(source.level());
    factorize_streaming(source, &mut |p: LogicalCoord, s: &LowerStencil| store.set(p, *s))?;
    Ok(store)
}

/// `f - A u` on the interior with zero values outside it.
pub fn stencil_residual(source: &dyn StencilSource, u: &[f64], f: &[f64]) -> Vec<f64> {
    let level = source.level();
    let inner = SimplexIndexer::interior(level);
    let mut r = f.to_vec();
    for (i, p) in inner.coords().enumerate() {
        let a = source.stencil(p);
        let mut s = 0.0;
        for d in Direction::ALL {
            let q = p.shifted(d);
            if q.is_interior(level) {
                s += a[d] * u[inner.index(q)];
            }
        }
        r[i] -= s;
    }
    r
}

/// One ILU smoothing step `u <- u + (L D L^T)^{-1} (f - A u)` on a single tetrahedron.
pub fn ilu_smooth(u: &mut [f64], f: &[f64], factors: &IluFactors, source: &dyn StencilSource) -> Result<()> {
    if factors.level() != source.level() {
        return Err(Error::Solver(format!(
            "factors for level {} applied to a level-{} operator",
            factors.level(),
            source.level()
        )));
    }
    let r = stencil_residual(source, u, f);
    let mut w = vec![0.0; r.len()];
    factors.solve(&r, &mut w);
    for (ui, wi) in u.iter_mut().zip(&w) {
        *ui += wi;
    }
    Ok(())
}
