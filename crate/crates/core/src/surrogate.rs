//! Polynomial surrogates of the ILU factors.
//!
//! Each lower factor direction and the reciprocal pivot are approximated over
//! a macro-tetrahedron by a trivariate tensor polynomial in the scaled
//! coordinates `h (x, y, z)`, fitted by least squares to factor values sampled
//! on a coarse strided subset of the lattice. During substitution the
//! polynomials are evaluated row by row with forward differences.

use std::fmt::Write as _;
use std::mem::size_of;

use nalgebra::{DMatrix, DVector};

use crate::assembly::{Stencil15, StencilSource};
use crate::error::{Error, Result};
use crate::geometry::{intervals, Direction, LogicalCoord, SimplexIndexer};
use crate::ilu::{factorize, factorize_streaming, for_each_row, IluFactors, LowerStencil, StreamStats};

/// Tensor-product polynomial of degrees `(dg_x, dg_y, dg_z)` in the monomial basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogatePolynomial {
    degrees: [usize; 3],
    coeffs: Vec<f64>,
}

impl SurrogatePolynomial {
    pub fn new(degrees: [usize; 3], coeffs: Vec<f64>) -> Result<Self> {
        let k = Self::num_coeffs(degrees);
        if coeffs.len() != k {
            return Err(Error::Solver(format!("{} coefficients given, {k} expected", coeffs.len())));
        }
        Ok(Self { degrees, coeffs })
    }

    pub fn constant(degrees: [usize; 3], c: f64) -> Self {
        let mut coeffs = vec![0.0; Self::num_coeffs(degrees)];
        coeffs[0] = c;
        Self { degrees, coeffs }
    }

    pub fn num_coeffs(d: [usize; 3]) -> usize {
        (d[0] + 1) * (d[1] + 1) * (d[2] + 1)
    }

    pub fn degrees(&self) -> [usize; 3] {
        self.degrees
    }

    /// Coefficient of `X^i Y^j Z^k`.
    pub fn coeff(&self, i: usize, j: usize, k: usize) -> f64 {
        self.coeffs[self.slot(i, j, k)]
    }

    fn slot(&self, i: usize, j: usize, k: usize) -> usize {
        let [dx, dy, _] = self.degrees;
        i + (dx + 1) * (j + (dy + 1) * k)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Direct evaluation.
    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        let c = self.row_coefficients(y, z);
        c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
    }

    /// Coefficients `c_i(Y, Z)` of the univariate polynomial in `X` along a row.
    pub fn row_coefficients(&self, y: f64, z: f64) -> Vec<f64> {
        let [dx, dy, dz] = self.degrees;
        (0..=dx)
            .map(|i| {
                let mut acc_z = 0.0;
                for k in (0..=dz).rev() {
                    let mut acc_y = 0.0;
                    for j in (0..=dy).rev() {
                        acc_y = acc_y * y + self.coeff(i, j, k);
                    }
                    acc_z = acc_z * z + acc_y;
                }
                acc_z
            })
            .collect()
    }
}

/// Forward-difference evaluator of a univariate polynomial on an equispaced row.
///
/// After setup, each [`RowCursor::step`] costs `degree` additions.
#[derive(Clone, Debug)]
pub struct RowCursor {
    table: Vec<f64>,
}

/// Stirling numbers of the second kind times `k!`: `Δ^k t^j |_{t=0}`.
fn surjections(max: usize) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; max + 1]; max + 1];
    s[0][0] = 1.0;
    for j in 1..=max {
        for k in 1..=j {
            // S(j,k) k! = k (S(j-1,k) k! ... ) expressed directly on the product.
            s[j][k] = k as f64 * (s[j - 1][k] + s[j - 1][k - 1]);
        }
    }
    s
}

impl RowCursor {
    /// Cursor at `x0` moving by `step` per [`RowCursor::step`] for the
    /// polynomial with monomial coefficients `c`.
    pub fn new(c: &[f64], x0: f64, step: f64) -> Self {
        let deg = c.len().saturating_sub(1);
        // Taylor shift: q(t) = p(x0 + step t) = sum_j b_j t^j.
        let mut b = vec![0.0; deg + 1];
        let mut binom = vec![vec![0.0; deg + 1]; deg + 1];
        for i in 0..=deg {
            binom[i][0] = 1.0;
            for j in 1..=i {
                binom[i][j] = binom[i - 1][j - 1] + if j < i { binom[i - 1][j] } else { 0.0 };
            }
        }
        for (i, &ci) in c.iter().enumerate() {
            let mut x0p = 1.0;
            for j in (0..=i).rev() {
                // term c_i C(i,j) x0^{i-j} step^j for t^j
                b[j] += ci * binom[i][j] * x0p * step.powi(j as i32);
                x0p *= x0;
            }
        }
        let s = surjections(deg);
        let table = (0..=deg).map(|k| (k..=deg).map(|j| b[j] * s[j][k]).sum()).collect();
        Self { table }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.table[0]
    }

    #[inline]
    pub fn step(&mut self) {
        for k in 0..self.table.len() - 1 {
            self.table[k] += self.table[k + 1];
        }
    }
}

/// Values of `poly` at `count` points `(x0 + i step, y, z)` by forward differences.
pub fn nddf_row(poly: &SurrogatePolynomial, x0: f64, y: f64, z: f64, step: f64, count: usize) -> Vec<f64> {
    let mut cur = RowCursor::new(&poly.row_coefficients(y, z), x0, step);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        if i > 0 {
            cur.step();
        }
        out.push(cur.value());
    }
    out
}

/// Least-squares fit in the monomial basis by Householder QR on the
/// column-equilibrated design matrix.
pub fn lsq_fit(points: &[[f64; 3]], values: &[f64], degrees: [usize; 3], label: &str) -> Result<SurrogatePolynomial> {
    let k = SurrogatePolynomial::num_coeffs(degrees);
    let m = points.len();
    if m < k {
        return Err(Error::RankDeficient { direction: label.to_string(), samples: m, unknowns: k });
    }
    let [dx, dy, dz] = degrees;
    let mut a = DMatrix::zeros(m, k);
    for (r, p) in points.iter().enumerate() {
        let mut col = 0;
        let mut zk = 1.0;
        for _ in 0..=dz {
            let mut yj = 1.0;
            for _ in 0..=dy {
                let mut xi = 1.0;
                for _ in 0..=dx {
                    a[(r, col)] = xi * yj * zk;
                    col += 1;
                    xi *= p[0];
                }
                yj *= p[1];
            }
            zk *= p[2];
        }
    }
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let n = a.column(j).norm();
            if n > 0.0 {
                1.0 / n
            } else {
                1.0
            }
        })
        .collect();
    for j in 0..k {
        a.column_mut(j).scale_mut(scale[j]);
    }
    let qr = a.qr();
    let rmat = qr.r();
    let rmax = (0..k).fold(0.0f64, |mx, i| mx.max(rmat[(i, i)].abs()));
    if (0..k).any(|i| !(rmat[(i, i)].abs() > 1e-13 * rmax)) {
        return Err(Error::RankDeficient { direction: label.to_string(), samples: m, unknowns: k });
    }
    let mut qtb = DVector::from_column_slice(values);
    qr.q_tr_mul(&mut qtb);
    let sol = rmat
        .solve_upper_triangular(&qtb.rows(0, k).into_owned())
        .ok_or_else(|| Error::RankDeficient { direction: label.to_string(), samples: m, unknowns: k })?;
    let coeffs = (0..k).map(|j| sol[j] * scale[j]).collect();
    SurrogatePolynomial::new(degrees, coeffs)
}

/// Fit targets: the seven lower directions, then the reciprocal pivot.
pub const TARGETS: usize = 8;

fn target_shift(t: usize) -> [i32; 3] {
    if t < 7 {
        Direction::LOWER[t].offset()
    } else {
        [0, 0, 0]
    }
}

fn target_name(t: usize) -> &'static str {
    if t < 7 {
        Direction::LOWER[t].name()
    } else {
        "c"
    }
}

/// Sampling stride for the fine level `level` and coarse level `coarse`.
pub fn sample_stride(level: u32, coarse: u32) -> i32 {
    if coarse >= level {
        1
    } else {
        1 << (level - coarse)
    }
}

/// Interior points `p` with `p - (1 - d) ≡ 0 (mod stride)` and `p + d` interior.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub target: usize,
    pub stride: i32,
    pub points: Vec<LogicalCoord>,
}

pub fn in_sample_set(p: LogicalCoord, shift: [i32; 3], stride: i32, level: u32) -> bool {
    let ok = |c: i32, d: i32| (c - (1 - d)).rem_euclid(stride) == 0;
    p.is_interior(level)
        && ok(p.x, shift[0])
        && ok(p.y, shift[1])
        && ok(p.z, shift[2])
        && LogicalCoord::new(p.x + shift[0], p.y + shift[1], p.z + shift[2]).is_interior(level)
}

/// Sample set of fit target `t` (lower direction index, or 7 for the pivot).
pub fn sample_set(t: usize, level: u32, coarse: u32) -> Result<SampleSet> {
    if coarse > level {
        return Err(Error::Config(format!("sampling level {coarse} exceeds level {level}")));
    }
    let stride = sample_stride(level, coarse);
    let shift = target_shift(t);
    let points: Vec<_> = SimplexIndexer::interior(level)
        .coords()
        .filter(|&p| in_sample_set(p, shift, stride, level))
        .collect();
    if points.is_empty() {
        return Err(Error::EmptySampleSet(target_name(t).to_string()));
    }
    Ok(SampleSet { target: t, stride, points })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Exact factors stored on the boundary band.
    V1,
    /// Surrogates everywhere; couplings to non-interior points zeroed.
    V2,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v1" | "1" => Ok(Variant::V1),
            "v2" | "2" => Ok(Variant::V2),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateConfig {
    pub degrees: [usize; 3],
    pub variant: Variant,
    /// Sampling level; defaults to `level - 2`, at least 2.
    pub coarse_level: Option<u32>,
}

impl SurrogateConfig {
    pub fn isotropic(deg: usize, variant: Variant) -> Self {
        Self { degrees: [deg; 3], variant, coarse_level: None }
    }

    pub fn default_coarse(level: u32) -> u32 {
        level.saturating_sub(2).max(2).min(level)
    }
}

/// Points of the interior next to the macro boundary:
/// `x = 1`, `y = 1`, `z = 1` or `x + y + z = n - 1`.
pub fn in_band(p: LogicalCoord, n: i32) -> bool {
    p.x == 1 || p.y == 1 || p.z == 1 || p.sum() == n - 1
}

/// Exact factors on the boundary band, stored row by row.
#[derive(Clone, Debug, Default)]
struct BandStore {
    /// Per interior row: offset into `data`, and whether the whole row is stored.
    rows: Vec<(usize, bool)>,
    data: Vec<(LowerStencil, f64)>,
}

/// Row number of interior row `(y, z)` in lattice order.
fn row_number(n: i32, y: i32, z: i32) -> usize {
    // Rows of layer z': y' in 1..=n-2-z'.
    let mut k = 0;
    for zz in 1..z {
        k += (n - 2 - zz).max(0) as usize;
    }
    k + (y - 1) as usize
}

impl BandStore {
    fn new(n: i32) -> Self {
        let mut rows = Vec::new();
        let mut off = 0;
        for_each_row(n, |y, z, xmax| {
            let full = y == 1 || z == 1 || xmax == 1;
            rows.push((off, full));
            off += if full { xmax as usize } else { 2 };
        });
        Self { rows, data: vec![(LowerStencil::IDENTITY, 1.0); off] }
    }

    fn slot(&self, row: usize, x: i32, xmax: i32) -> Option<usize> {
        let (off, full) = self.rows[row];
        if full {
            Some(off + (x - 1) as usize)
        } else if x == 1 {
            Some(off)
        } else if x == xmax {
            Some(off + 1)
        } else {
            None
        }
    }

    fn bytes(&self) -> usize {
        self.data.len() * size_of::<(LowerStencil, f64)>() + self.rows.len() * size_of::<(usize, bool)>()
    }
}

/// Build statistics of a surrogate factorization.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SurrogateStats {
    pub stream: StreamStats,
    pub band_bytes: usize,
    pub sample_bytes: usize,
    /// Sampling level actually used; `None` when the level fell back to exact factors.
    pub coarse_level: Option<u32>,
}

/// Surrogate `L D L^T` factorization of one macro-tetrahedron interior.
#[derive(Clone, Debug)]
pub struct SurrogateIlu {
    level: u32,
    variant: Variant,
    polys: Vec<SurrogatePolynomial>,
    band: Option<BandStore>,
    exact: Option<IluFactors>,
    stats: SurrogateStats,
}

impl SurrogateIlu {
    /// Streams the factorization of `source`, samples it, and fits the surrogates.
    /// If the fit is rank-deficient the sampling grid is refined; if it stays
    /// rank-deficient at stride 1 the exact factors are kept instead.
    pub fn build(source: &dyn StencilSource, cfg: &SurrogateConfig) -> Result<Self> {
        let level = source.level();
        let n = intervals(level);
        let mut coarse = cfg.coarse_level.unwrap_or_else(|| SurrogateConfig::default_coarse(level)).min(level);
        loop {
            let stride = sample_stride(level, coarse);
            let mut samples: Vec<(Vec<[f64; 3]>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); TARGETS];
            let mut band = (cfg.variant == Variant::V1).then(|| BandStore::new(n));
            let h = 1.0 / f64::from(n);
            let mut row_of = 0usize;
            let mut last_row = (-1, -1);
            let stream = factorize_streaming(source, &mut |p: LogicalCoord, s: &LowerStencil| {
                if (p.y, p.z) != last_row {
                    if last_row.0 >= 0 {
                        row_of += 1;
                    }
                    last_row = (p.y, p.z);
                }
                let xyz = [h * f64::from(p.x), h * f64::from(p.y), h * f64::from(p.z)];
                for (t, (pts, vals)) in samples.iter_mut().enumerate() {
                    if in_sample_set(p, target_shift(t), stride, level) {
                        pts.push(xyz);
                        vals.push(if t < 7 { s.l[t] } else { 1.0 / s.d });
                    }
                }
                if let Some(b) = band.as_mut() {
                    let xmax = n - 1 - p.y - p.z;
                    if let Some(k) = b.slot(row_of, p.x, xmax) {
                        b.data[k] = (*s, 1.0 / s.d);
                    }
                }
            })?;
            let sample_bytes = samples.iter().map(|(p, v)| p.len() * size_of::<[f64; 3]>() + v.len() * 8).sum();
            let fits: Result<Vec<_>> = samples
                .iter()
                .enumerate()
                .map(|(t, (pts, vals))| lsq_fit(pts, vals, cfg.degrees, target_name(t)))
                .collect();
            match fits {
                Ok(polys) => {
                    let band_bytes = band.as_ref().map_or(0, BandStore::bytes);
                    return Ok(Self {
                        level,
                        variant: cfg.variant,
                        polys,
                        band,
                        exact: None,
                        stats: SurrogateStats { stream, band_bytes, sample_bytes, coarse_level: Some(coarse) },
                    });
                }
                Err(Error::RankDeficient { .. }) if stride > 1 => coarse += 1,
                Err(Error::RankDeficient { direction, samples, unknowns }) => {
                    log::debug!(
                        "level {level}: surrogate fit for {direction} rank-deficient ({samples} samples, {unknowns} unknowns); using exact factors"
                    );
                    let exact = factorize(source)?;
                    return Ok(Self {
                        level,
                        variant: cfg.variant,
                        polys: Vec::new(),
                        band: None,
                        exact: Some(exact),
                        stats: SurrogateStats { stream, band_bytes: 0, sample_bytes, coarse_level: None },
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn stats(&self) -> &SurrogateStats {
        &self.stats
    }

    pub fn is_exact_fallback(&self) -> bool {
        self.exact.is_some()
    }

    /// Surrogate polynomial of lower direction index `t` (0..7) or the reciprocal pivot (7).
    pub fn polynomial(&self, t: usize) -> Option<&SurrogatePolynomial> {
        self.polys.get(t)
    }

    /// Effective factor row at `p` as used by the substitution.
    pub fn effective(&self, p: LogicalCoord) -> (LowerStencil, f64) {
        if let Some(ex) = &self.exact {
            let s = *ex.at(p);
            return (s, 1.0 / s.d);
        }
        let n = intervals(self.level);
        if let (Some(b), true) = (&self.band, in_band(p, n)) {
            let xmax = n - 1 - p.y - p.z;
            let k = b.slot(row_number(n, p.y, p.z), p.x, xmax).expect("band point");
            return b.data[k];
        }
        let h = 1.0 / f64::from(n);
        let (x, y, z) = (h * f64::from(p.x), h * f64::from(p.y), h * f64::from(p.z));
        let mut l = [0.0; 7];
        for (t, d) in Direction::LOWER.iter().enumerate() {
            if p.shifted(*d).is_interior(self.level) {
                l[t] = self.polys[t].eval(x, y, z);
            }
        }
        let inv = self.polys[7].eval(x, y, z);
        (LowerStencil { l, d: 1.0 / inv }, inv)
    }

    /// Row cursors for the seven lower directions and the pivot along row `(y, z)`.
    fn cursors(&self, y: i32, z: i32, x0: i32, step: f64) -> Vec<RowCursor> {
        let h = 1.0 / f64::from(intervals(self.level));
        let (yy, zz) = (h * f64::from(y), h * f64::from(z));
        self.polys
            .iter()
            .map(|p| RowCursor::new(&p.row_coefficients(yy, zz), h * f64::from(x0), step * h))
            .collect()
    }

    /// Forward substitution on the lattice-indexed `wk`; `rhs(i, x)` supplies
    /// the right-hand side at lattice index `i` (fused residual evaluation).
    fn forward(&self, indexer: &SimplexIndexer, wk: &mut [f64], mut rhs: impl FnMut(usize, LogicalCoord) -> f64) {
        let n = intervals(self.level);
        let band = self.band.as_ref();
        let mut row = 0usize;
        for_each_row(n, |y, z, xmax| {
            let own = indexer.row_start(y, z);
            let nb: [isize; 7] = Direction::LOWER.map(|d| {
                let o = d.offset();
                indexer.row_start(y + o[1], z + o[2]) + o[0] as isize
            });
            let mut cur = self.cursors(y, z, 1, 1.0);
            for x in 1..=xmax {
                if x > 1 {
                    cur.iter_mut().for_each(RowCursor::step);
                }
                let p = LogicalCoord::new(x, y, z);
                let i = (own + x as isize) as usize;
                let mut s = rhs(i, p);
                let stored = band.and_then(|b| in_band(p, n).then(|| b.slot(row, x, xmax)).flatten());
                for t in 0..7 {
                    let q = (nb[t] + x as isize) as usize;
                    let l = match stored {
                        Some(k) => band.unwrap().data[k].0.l[t],
                        None => {
                            if in_band(p, n) && !p.shifted(Direction::LOWER[t]).is_interior(self.level) {
                                0.0
                            } else {
                                cur[t].value()
                            }
                        }
                    };
                    s -= l * wk[q];
                }
                wk[i] = s;
            }
            row += 1;
        });
    }

    /// Pivot scaling and backward substitution on the lattice-indexed `wk`;
    /// `done(i, p, w)` is called once per point with its final value.
    fn backward(&self, indexer: &SimplexIndexer, wk: &mut [f64], mut done: impl FnMut(LogicalCoord, f64)) {
        let n = intervals(self.level);
        let band = self.band.as_ref();
        let mut rows = Vec::new();
        for_each_row(n, |y, z, xmax| rows.push((y, z, xmax)));
        let mut row = rows.len();
        for &(y, z, xmax) in rows.iter().rev() {
            row -= 1;
            let own = indexer.row_start(y, z);
            let mut cur_c = self.cursors(y, z, xmax, -1.0).pop().expect("eight targets");
            // For direction d the source point q = p - d lies in row (y - d_y, z - d_z).
            let mut src: Vec<(isize, i32, i32, i32, Option<usize>, RowCursor)> = Vec::with_capacity(7);
            for (t, d) in Direction::LOWER.iter().enumerate() {
                let o = d.offset();
                let (qy, qz) = (y - o[1], z - o[2]);
                let qmax = n - 1 - qy - qz;
                let base = indexer.row_start(qy, qz);
                let qrow = (qy >= 1 && qz >= 1 && qmax >= 1).then(|| row_number(n, qy, qz));
                let cursor = RowCursor::new(
                    &self.polys[t].row_coefficients(f64::from(qy) / f64::from(n), f64::from(qz) / f64::from(n)),
                    f64::from(xmax - o[0]) / f64::from(n),
                    -1.0 / f64::from(n),
                );
                src.push((base - o[0] as isize, qy, qz, qmax, qrow, cursor));
            }
            for x in (1..=xmax).rev() {
                if x < xmax {
                    cur_c.step();
                    src.iter_mut().for_each(|s| s.5.step());
                }
                let p = LogicalCoord::new(x, y, z);
                let i = (own + x as isize) as usize;
                let inv_d = match band.and_then(|b| in_band(p, n).then(|| b.slot(row, x, xmax)).flatten()) {
                    Some(k) => band.unwrap().data[k].1,
                    None => cur_c.value(),
                };
                let mut s = wk[i] * inv_d;
                for (t, (base, qy, qz, qmax, qrow, cursor)) in src.iter().enumerate() {
                    let qx = x - Direction::LOWER[t].offset()[0];
                    if qx < 1 || *qy < 1 || *qz < 1 || qx > *qmax {
                        continue;
                    }
                    let q = LogicalCoord::new(qx, *qy, *qz);
                    let l = match (band, qrow) {
                        (Some(b), Some(r)) if in_band(q, n) => b.data[b.slot(*r, qx, *qmax).expect("band")].0.l[t],
                        _ => cursor.value(),
                    };
                    s -= l * wk[(*base + x as isize) as usize];
                }
                wk[i] = s;
                done(p, s);
            }
        }
    }

    /// Solves `L D L^T w = r` with the surrogate factors (interior ordering).
    pub fn solve(&self, r: &[f64], w: &mut [f64]) {
        if let Some(ex) = &self.exact {
            return ex.solve(r, w);
        }
        let indexer = SimplexIndexer::full(self.level);
        let inner = SimplexIndexer::interior(self.level);
        let mut wk = vec![0.0; indexer.len()];
        self.forward(&indexer, &mut wk, |_, p| r[inner.index(p)]);
        self.backward(&indexer, &mut wk, |p, v| w[inner.index(p)] = v);
    }

    /// Bytes held besides the polynomial coefficients.
    pub fn stored_bytes(&self) -> usize {
        self.band.as_ref().map_or(0, BandStore::bytes) + self.exact.as_ref().map_or(0, IluFactors::bytes)
    }

    /// Coefficients per target as CSV: `target,dx,dy,dz,i,j,k,coefficient`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("target,dg_x,dg_y,dg_z,i,j,k,coefficient\n");
        for (t, p) in self.polys.iter().enumerate() {
            let [dx, dy, dz] = p.degrees();
            for k in 0..=dz {
                for j in 0..=dy {
                    for i in 0..=dx {
                        let _ = writeln!(s, "{},{dx},{dy},{dz},{i},{j},{k},{:.17e}", target_name(t), p.coeff(i, j, k));
                    }
                }
            }
        }
        s
    }
}

/// One smoothing step `u <- u + (L D L^T)^{-1} (f - A u)` on a single
/// tetrahedron with surrogate factors: the residual is fused into the
/// ascending sweep, pivot scaling and the correction into the descending one.
pub fn surrogate_smooth(u: &mut [f64], f: &[f64], sur: &SurrogateIlu, source: &dyn StencilSource) -> Result<()> {
    let level = sur.level();
    if source.level() != level {
        return Err(Error::Solver(format!(
            "surrogate for level {level} applied to a level-{} operator",
            source.level()
        )));
    }
    let inner = SimplexIndexer::interior(level);
    let residual = |p: LogicalCoord| {
        let a: Stencil15 = source.stencil(p);
        let mut s = f[inner.index(p)];
        for d in Direction::ALL {
            let q = p.shifted(d);
            if q.is_interior(level) {
                s -= a[d] * u[inner.index(q)];
            }
        }
        s
    };
    if sur.exact.is_some() {
        let r: Vec<f64> = inner.coords().map(residual).collect();
        let mut w = vec![0.0; r.len()];
        sur.solve(&r, &mut w);
        u.iter_mut().zip(&w).for_each(|(a, b)| *a += b);
        return Ok(());
    }
    let indexer = SimplexIndexer::full(level);
    let mut wk = vec![0.0; indexer.len()];
    sur.forward(&indexer, &mut wk, |_, p| residual(p));
    sur.backward(&indexer, &mut wk, |p, v| u[inner.index(p)] += v);
    Ok(())
}

/// Polynomial surrogate of the operator stencils (all 15 directions).
#[derive(Clone, Debug)]
pub struct OperatorSurrogate {
    level: u32,
    polys: Vec<SurrogatePolynomial>,
}

impl OperatorSurrogate {
    /// Fits all 15 stencil directions, refining the sampling on rank
    /// deficiency; fails with `RankDeficient` if stride 1 is not enough.
    pub fn fit(source: &dyn StencilSource, degrees: [usize; 3], coarse: u32) -> Result<Self> {
        let level = source.level();
        let mut coarse = coarse.min(level);
        let n = intervals(level);
        let h = 1.0 / f64::from(n);
        loop {
            let stride = sample_stride(level, coarse);
            let pts: Vec<LogicalCoord> = SimplexIndexer::interior(level)
                .coords()
                .filter(|&p| in_sample_set(p, [0, 0, 0], stride, level))
                .collect();
            let xyz: Vec<[f64; 3]> =
                pts.iter().map(|p| [h * f64::from(p.x), h * f64::from(p.y), h * f64::from(p.z)]).collect();
            let stencils: Vec<Stencil15> = pts.iter().map(|&p| source.stencil(p)).collect();
            let fits: Result<Vec<_>> = Direction::ALL
                .iter()
                .map(|&d| {
                    let vals: Vec<f64> = stencils.iter().map(|s| s[d]).collect();
                    lsq_fit(&xyz, &vals, degrees, d.name())
                })
                .collect();
            match fits {
                Ok(polys) => return Ok(Self { level, polys }),
                Err(Error::RankDeficient { .. }) if stride > 1 => coarse += 1,
                Err(e) => return Err(e),
            }
        }
    }
}

impl StencilSource for OperatorSurrogate {
    fn level(&self) -> u32 {
        self.level
    }

    fn stencil(&self, p: LogicalCoord) -> Stencil15 {
        let h = 1.0 / f64::from(intervals(self.level));
        let (x, y, z) = (h * f64::from(p.x), h * f64::from(p.y), h * f64::from(p.z));
        let mut s = Stencil15::ZERO;
        for (k, poly) in self.polys.iter().enumerate() {
            s.0[k] = poly.eval(x, y, z);
        }
        s
    }
}

/// Discrete L2 error (root mean square over the interior) of each surrogate
/// target against exact factors.
pub fn surrogate_errors(sur: &SurrogateIlu, exact: &IluFactors) -> [f64; TARGETS] {
    let level = sur.level();
    let n = intervals(level);
    let h = 1.0 / f64::from(n);
    let mut acc = [0.0; TARGETS];
    let mut count = 0usize;
    for p in SimplexIndexer::interior(level).coords() {
        let e = exact.at(p);
        let (x, y, z) = (h * f64::from(p.x), h * f64::from(p.y), h * f64::from(p.z));
        for t in 0..TARGETS {
            let want = if t < 7 { e.l[t] } else { 1.0 / e.d };
            let got = match sur.polynomial(t) {
                Some(poly) => poly.eval(x, y, z),
                None => want,
            };
            acc[t] += (got - want).powi(2);
        }
        count += 1;
    }
    acc.map(|a| (a / count as f64).sqrt())
}
