//! Local Fourier analysis of the stencil ILU and the orientation search.

use std::f64::consts::PI;

use nalgebra::Complex;

use crate::assembly::{CellAssembler, Coefficient, Stencil15};
use crate::error::{Error, Result};
use crate::geometry::{Direction, LogicalCoord, Permutation, TetOrientation};
use crate::ilu::{stencil_equations, LowerStencil};
use crate::par;

/// Translation-invariant ILU factors `L∞_d`, `D∞_c`.
pub type AsymptoticStencils = LowerStencil;

const MAX_ITER: usize = 10_000;
const TOL: f64 = 1e-13;

/// Fixed point of the stencil equations for a constant stencil, iterated
/// Gauss–Seidel style from `L = 0`, `D = 1`.
pub fn asymptotic_stencils(a: &Stencil15) -> Result<AsymptoticStencils> {
    let mut cur = LowerStencil::IDENTITY;
    for _ in 0..MAX_ITER {
        let prev = cur;
        // Each entry is recomputed in equation order with all neighbour
        // symbols equal to the current iterate, updated in place.
        let li = |d: Direction| d.lower_index().expect("lower");
        let order = [Direction::Bc, Direction::S, Direction::Bnw, Direction::Be, Direction::W, Direction::Bn, Direction::Se];
        for d in order {
            let snapshot = cur;
            let next = stencil_equations(a, |_| &snapshot);
            cur.l[li(d)] = next.l[li(d)];
        }
        let snapshot = cur;
        cur.d = stencil_equations(a, |_| &snapshot).d;
        if !cur.d.is_finite() || cur.d == 0.0 {
            return Err(Error::PivotBreakdown { coord: LogicalCoord::new(0, 0, 0), value: cur.d });
        }
        let scale = cur.l.iter().fold(cur.d.abs(), |m, v| m.max(v.abs()));
        let change = cur.l.iter().zip(&prev.l).map(|(a, b)| (a - b).abs()).fold((cur.d - prev.d).abs(), f64::max);
        if change <= TOL * scale {
            if !(cur.d > 0.0) {
                return Err(Error::PivotBreakdown { coord: LogicalCoord::new(0, 0, 0), value: cur.d });
            }
            return Ok(cur);
        }
    }
    Err(Error::NoConvergence(format!("asymptotic stencils after {MAX_ITER} iterations")))
}

/// Largest deviation of the stencil equations at the fixed point, relative to `|A_c|`.
pub fn fixed_point_residual(a: &Stencil15, s: &AsymptoticStencils) -> f64 {
    let again = stencil_equations(a, |_| s);
    let scale = a[Direction::C].abs();
    // Re-solving must reproduce `s`; compare via the equations' products.
    let mut worst = ((again.d - s.d) / scale).abs();
    for k in 0..7 {
        worst = worst.max(((again.l[k] - s.l[k]) * s.d / scale).abs());
    }
    worst
}

fn phase(d: Direction, theta: [f64; 3]) -> Complex<f64> {
    let o = d.offset();
    let arg = f64::from(o[0]) * theta[0] + f64::from(o[1]) * theta[1] + f64::from(o[2]) * theta[2];
    Complex::new(arg.cos(), arg.sin())
}

/// Symbols `(L(θ), D, A(θ))`.
pub fn symbols(a: &Stencil15, s: &AsymptoticStencils, theta: [f64; 3]) -> (Complex<f64>, f64, Complex<f64>) {
    let mut l = Complex::new(1.0, 0.0);
    for (k, d) in Direction::LOWER.iter().enumerate() {
        l += phase(*d, theta) * s.l[k];
    }
    let mut sym_a = Complex::new(0.0, 0.0);
    for d in Direction::ALL {
        sym_a += phase(d, theta) * a[d];
    }
    (l, s.d, sym_a)
}

/// Samples per axis of the frequency grid.
pub const SAMPLES: usize = 16;

/// Cell midpoints of a uniform 16-point partition of `(-π, π]`; symmetric about 0.
pub fn frequency_axis() -> [f64; SAMPLES] {
    std::array::from_fn(|k| -PI + (k as f64 + 0.5) * 2.0 * PI / SAMPLES as f64)
}

/// Grid points outside the low-frequency cube `(-π/2, π/2)^3`.
pub fn oscillatory_frequencies() -> Vec<[f64; 3]> {
    let ax = frequency_axis();
    let mut out = Vec::new();
    for &t3 in &ax {
        for &t2 in &ax {
            for &t1 in &ax {
                let th = [t1, t2, t3];
                if th.iter().any(|t| t.abs() >= PI / 2.0) {
                    out.push(th);
                }
            }
        }
    }
    out
}

/// Smoothing factor of the ILU smoother for a constant stencil.
pub fn smoothing_factor(a: &Stencil15) -> Result<f64> {
    let s = asymptotic_stencils(a)?;
    let mut mu: f64 = 0.0;
    for th in oscillatory_frequencies() {
        let (l, d, sa) = symbols(a, &s, th);
        let ldl = l * d * l.conj();
        if ldl.norm() < 1e-14 {
            return Err(Error::SymbolSingular(th));
        }
        mu = mu.max(((ldl - sa) / ldl).norm());
    }
    Ok(mu)
}

/// Interior stencil of `tet` at level 2 with `K = Id`.
pub fn reference_stencil(tet: &TetOrientation) -> Result<Stencil15> {
    CellAssembler::new(tet, 2, &Coefficient::Constant(1.0), None).stencil(LogicalCoord::new(1, 1, 1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LfaReport {
    /// Smoothing factor per permutation, ordered by label.
    pub factors: Vec<(Permutation, f64)>,
    pub selected: Permutation,
}

impl LfaReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("permutation,mu,selected\n");
        for (p, mu) in &self.factors {
            s.push_str(&format!("{},{mu:.6e},{}\n", p.label(), u8::from(*p == self.selected)));
        }
        s
    }
}

/// Relative gap below which two smoothing factors count as a tie.
const TIE: f64 = 1e-10;

/// Evaluates all 24 vertex orders of `tet` and selects the smallest smoothing
/// factor; ties go to the lexicographically smallest label.
pub fn best_permutation(tet: &TetOrientation) -> Result<(Permutation, LfaReport)> {
    let mut perms = Permutation::all();
    perms.sort_by_key(Permutation::label);
    let results = par::map_slice(&perms, |&p| reference_stencil(&tet.permuted(p)).and_then(|a| smoothing_factor(&a)));
    let mut factors = Vec::new();
    let mut best: Option<(Permutation, f64)> = None;
    let mut last_err = None;
    for (p, r) in perms.into_iter().zip(results) {
        match r {
            Ok(mu) => {
                factors.push((p, mu));
                if best.map_or(true, |(_, b)| mu < b * (1.0 - TIE)) {
                    best = Some((p, mu));
                }
            }
            Err(e) => {
                factors.push((p, f64::NAN));
                last_err = Some(e);
            }
        }
    }
    match best {
        Some((selected, _)) => Ok((selected, LfaReport { factors, selected })),
        None => Err(last_err.unwrap_or_else(|| Error::Solver("no permutation evaluated".into()))),
    }
}
