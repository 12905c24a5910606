//! Logical lattice coordinates, stencil directions and macro-tetrahedron frames.
//!
//! A macro-tetrahedron refined `level` times carries the lattice
//! `{(x, y, z) >= 0 : x + y + z <= 2^level}`. Unknowns are ordered by `z`,
//! then `y`, then `x`; every index computation in the crate follows that
//! order.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

/// One of the 15 offsets of the P1 stencil on the refined lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Direction {
    W,
    S,
    Se,
    Bnw,
    Bn,
    Bc,
    Be,
    C,
    E,
    N,
    Nw,
    Tse,
    Ts,
    Tc,
    Tw,
}

impl Direction {
    pub const ALL: [Direction; 15] = [
        Direction::W,
        Direction::S,
        Direction::Se,
        Direction::Bnw,
        Direction::Bn,
        Direction::Bc,
        Direction::Be,
        Direction::C,
        Direction::E,
        Direction::N,
        Direction::Nw,
        Direction::Tse,
        Direction::Ts,
        Direction::Tc,
        Direction::Tw,
    ];

    /// Directions whose neighbour precedes the centre in the DoF ordering.
    pub const LOWER: [Direction; 7] = [
        Direction::W,
        Direction::S,
        Direction::Se,
        Direction::Bnw,
        Direction::Bn,
        Direction::Bc,
        Direction::Be,
    ];

    /// Negations of [`Direction::LOWER`], in the same order.
    pub const UPPER: [Direction; 7] = [
        Direction::E,
        Direction::N,
        Direction::Nw,
        Direction::Tse,
        Direction::Ts,
        Direction::Tc,
        Direction::Tw,
    ];

    #[inline]
    pub const fn index(self) -> usize {
        self as usize
    }

    /// Position inside [`Direction::LOWER`], if this is a lower direction.
    #[inline]
    pub const fn lower_index(self) -> Option<usize> {
        let i = self as usize;
        if i < 7 {
            Some(i)
        } else {
            None
        }
    }

    #[inline]
    pub const fn is_lower(self) -> bool {
        (self as usize) < 7
    }

    #[inline]
    pub const fn offset(self) -> [i32; 3] {
        match self {
            Direction::W => [-1, 0, 0],
            Direction::S => [0, -1, 0],
            Direction::Se => [1, -1, 0],
            Direction::Bnw => [-1, 1, -1],
            Direction::Bn => [0, 1, -1],
            Direction::Bc => [0, 0, -1],
            Direction::Be => [1, 0, -1],
            Direction::C => [0, 0, 0],
            Direction::E => [1, 0, 0],
            Direction::N => [0, 1, 0],
            Direction::Nw => [-1, 1, 0],
            Direction::Tse => [1, -1, 1],
            Direction::Ts => [0, -1, 1],
            Direction::Tc => [0, 0, 1],
            Direction::Tw => [-1, 0, 1],
        }
    }

    #[inline]
    pub const fn negate(self) -> Direction {
        let i = self as usize;
        let j = if i < 7 {
            i + 8
        } else if i > 7 {
            i - 8
        } else {
            7
        };
        Direction::ALL[j]
    }

    pub const fn name(self) -> &'static str {
        match self {
            Direction::W => "w",
            Direction::S => "s",
            Direction::Se => "se",
            Direction::Bnw => "bnw",
            Direction::Bn => "bn",
            Direction::Bc => "bc",
            Direction::Be => "be",
            Direction::C => "c",
            Direction::E => "e",
            Direction::N => "n",
            Direction::Nw => "nw",
            Direction::Tse => "tse",
            Direction::Ts => "ts",
            Direction::Tc => "tc",
            Direction::Tw => "tw",
        }
    }

    /// Looks up the direction with the given lattice offset.
    pub fn from_offset(offset: [i32; 3]) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.offset() == offset)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Direction::ALL
            .into_iter()
            .find(|d| d.name() == lower)
            .ok_or_else(|| Error::UnknownDirection(s.to_string()))
    }
}

/// Integer coordinates on the lattice of a refined macro-tetrahedron.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct LogicalCoord {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl LogicalCoord {
    #[inline]
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub const fn shifted(self, d: Direction) -> Self {
        let o = d.offset();
        Self::new(self.x + o[0], self.y + o[1], self.z + o[2])
    }

    #[inline]
    pub const fn sum(self) -> i32 {
        self.x + self.y + self.z
    }

    /// Membership in the full lattice of a tetrahedron with `n` intervals per edge.
    #[inline]
    pub const fn in_lattice(self, n: i32) -> bool {
        self.x >= 0 && self.y >= 0 && self.z >= 0 && self.sum() < n + 1
    }

    /// Membership in the interior lattice (strictly inside the macro-tetrahedron).
    #[inline]
    pub const fn in_interior(self, n: i32) -> bool {
        self.x >= 1 && self.y >= 1 && self.z >= 1 && self.sum() < n
    }

    #[inline]
    pub fn in_grid(self, level: u32) -> bool {
        self.in_lattice(intervals(level))
    }

    #[inline]
    pub fn is_interior(self, level: u32) -> bool {
        self.in_interior(intervals(level))
    }
}

impl Ord for LogicalCoord {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.z, self.y, self.x).cmp(&(other.z, other.y, other.x))
    }
}

impl PartialOrd for LogicalCoord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for LogicalCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Number of micro-intervals along a macro-edge on `level`.
#[inline]
pub const fn intervals(level: u32) -> i32 {
    1 << level
}

pub fn check_level(level: u32) -> Result<()> {
    if level < 2 {
        Err(Error::LevelTooSmall(level))
    } else {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Full,
    Interior,
    Boundary,
    /// All lattice points with the given `z`.
    FaceLayer(i32),
}

/// Lists the lattice points of `region` in the z-then-y-then-x order.
pub fn enumerate_grid(level: u32, region: Region) -> Result<Vec<LogicalCoord>> {
    check_level(level)?;
    let n = intervals(level);
    let (z_lo, z_hi) = match region {
        Region::FaceLayer(z) => (z, z),
        _ => (0, n),
    };
    let mut out = Vec::new();
    for z in z_lo.max(0)..=z_hi.min(n) {
        for y in 0..=(n - z) {
            for x in 0..=(n - z - y) {
                let p = LogicalCoord::new(x, y, z);
                let keep = match region {
                    Region::Full | Region::FaceLayer(_) => true,
                    Region::Interior => p.in_interior(n),
                    Region::Boundary => !p.in_interior(n),
                };
                if keep {
                    out.push(p);
                }
            }
        }
    }
    Ok(out)
}

/// Dense index of the points `{p - shift : sum <= m}` in lattice order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimplexIndexer {
    m: i32,
    shift: i32,
}

impl SimplexIndexer {
    /// The full lattice of a tetrahedron refined to `level`.
    pub fn full(level: u32) -> Self {
        Self {
            m: intervals(level),
            shift: 0,
        }
    }

    /// The interior lattice (`x, y, z >= 1`, `x + y + z <= n - 1`).
    pub fn interior(level: u32) -> Self {
        Self {
            m: intervals(level) - 4,
            shift: 1,
        }
    }

    #[inline]
    fn count(m: i32) -> usize {
        if m < 0 {
            return 0;
        }
        let m = m as usize;
        (m + 1) * (m + 2) * (m + 3) / 6
    }

    pub fn len(&self) -> usize {
        Self::count(self.m)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn contains(&self, p: LogicalCoord) -> bool {
        let (x, y, z) = (p.x - self.shift, p.y - self.shift, p.z - self.shift);
        x >= 0 && y >= 0 && z >= 0 && x + y + z <= self.m
    }

    #[inline]
    pub fn index(&self, p: LogicalCoord) -> usize {
        debug_assert!(self.contains(p), "{p} outside indexer");
        let (x, y, z) = (p.x - self.shift, p.y - self.shift, p.z - self.shift);
        let below = Self::count(self.m) - Self::count(self.m - z);
        let row = self.m - z + 1;
        below + (y * row - y * (y - 1) / 2 + x) as usize
    }

    /// Index the point `(shift, y, z)` would have; rows are contiguous in x.
    #[inline]
    pub fn row_start(&self, y: i32, z: i32) -> isize {
        let (y, z) = (y - self.shift, z - self.shift);
        let below = Self::count(self.m) - Self::count(self.m - z);
        let row = self.m - z + 1;
        below as isize + (y * row - y * (y - 1) / 2) as isize - self.shift as isize
    }

    pub fn coords(&self) -> impl Iterator<Item = LogicalCoord> + '_ {
        let m = self.m;
        let s = self.shift;
        (0..=m.max(-1)).flat_map(move |z| {
            (0..=(m - z)).flat_map(move |y| {
                (0..=(m - z - y)).map(move |x| LogicalCoord::new(x + s, y + s, z + s))
            })
        })
    }
}

/// Dense index of a face layer `{(x, y) : x + y <= m}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TriangleIndexer {
    m: i32,
}

impl TriangleIndexer {
    pub fn new(m: i32) -> Self {
        Self { m }
    }

    pub fn len(&self) -> usize {
        let m = self.m as usize;
        (m + 1) * (m + 2) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.m < 0
    }

    #[inline]
    pub fn index(&self, x: i32, y: i32) -> usize {
        debug_assert!(x >= 0 && y >= 0 && x + y <= self.m);
        (y * (self.m + 1) - y * (y - 1) / 2 + x) as usize
    }
}

/// A vertex permutation `pi`: the permuted tetrahedron lists
/// `old[pi[0]], ..., old[pi[3]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation([u8; 4]);

impl Permutation {
    pub const IDENTITY: Permutation = Permutation([0, 1, 2, 3]);

    pub fn new(map: [u8; 4]) -> Result<Self> {
        let mut seen = [false; 4];
        for &i in &map {
            if i > 3 || seen[i as usize] {
                return Err(Error::InvalidPermutation(format!("{map:?}")));
            }
            seen[i as usize] = true;
        }
        Ok(Self(map))
    }

    /// All 24 permutations in lexicographic order.
    pub fn all() -> Vec<Permutation> {
        let mut out = Vec::with_capacity(24);
        for a in 0..4u8 {
            for b in 0..4u8 {
                for c in 0..4u8 {
                    for d in 0..4u8 {
                        if let Ok(p) = Permutation::new([a, b, c, d]) {
                            out.push(p);
                        }
                    }
                }
            }
        }
        out
    }

    #[inline]
    pub fn map(&self) -> [u8; 4] {
        self.0
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.0[i] as usize
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = [0u8; 4];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p as usize] = i as u8;
        }
        Permutation(inv)
    }

    /// `self` followed by `then`: vertex `i` of the result is
    /// `self.apply(then.apply(i))` of the original list.
    pub fn then(&self, then: Permutation) -> Permutation {
        let mut out = [0u8; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0[then.0[i] as usize];
        }
        Permutation(out)
    }

    /// Compact one-based label such as `2341`: original vertex `i` is moved
    /// to position `label[i]`.
    pub fn label(&self) -> String {
        self.inverse().0.iter().map(|&i| char::from(b'1' + i)).collect()
    }
}

impl Default for Permutation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.inverse().0;
        write!(f, "({} {} {} {})", m[0] + 1, m[1] + 1, m[2] + 1, m[3] + 1)
    }
}

impl FromStr for Permutation {
    type Err = Error;

    /// Accepts one-based forms such as `2341`, `2 3 4 1` or `(2 3 4 1)`,
    /// read as the target position of each original vertex.
    fn from_str(s: &str) -> Result<Self> {
        let digits: Vec<u8> = s
            .chars()
            .filter(|c| !matches!(c, '(' | ')' | ' ' | ',' | '\t'))
            .map(|c| c.to_digit(10).map(|d| d as u8))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::InvalidPermutation(s.to_string()))?;
        if digits.len() != 4 || digits.iter().any(|&d| !(1..=4).contains(&d)) {
            return Err(Error::InvalidPermutation(s.to_string()));
        }
        Permutation::new([digits[0] - 1, digits[1] - 1, digits[2] - 1, digits[3] - 1])
            .map(|p| p.inverse())
            .map_err(|_| Error::InvalidPermutation(s.to_string()))
    }
}

/// A macro-tetrahedron together with the vertex order that fixes its lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct TetOrientation {
    original: [Point3; 4],
    perm: Permutation,
}

impl TetOrientation {
    pub fn new(vertices: [Point3; 4]) -> Result<Self> {
        let t = Self {
            original: vertices,
            perm: Permutation::IDENTITY,
        };
        let scale = t.diameter();
        let det = t.frame_det();
        if !(det.abs() > 1e-14 * scale.powi(3)) {
            return Err(Error::DegenerateElement {
                element: "macro-tetrahedron".into(),
                det,
            });
        }
        Ok(t)
    }

    pub fn from_coords(v: [[f64; 3]; 4]) -> Result<Self> {
        Self::new(v.map(Point3::from))
    }

    pub fn permutation(&self) -> Permutation {
        self.perm
    }

    pub fn original_vertices(&self) -> [Point3; 4] {
        self.original
    }

    /// Vertices in the current (permuted) order.
    pub fn vertices(&self) -> [Point3; 4] {
        [0, 1, 2, 3].map(|i| self.original[self.perm.apply(i)])
    }

    pub fn vertex(&self, i: usize) -> Point3 {
        self.original[self.perm.apply(i)]
    }

    pub fn base(&self) -> Point3 {
        self.vertex(0)
    }

    /// Edge vector `d_i = v_i - v_0` for `i` in 1..=3.
    pub fn edge(&self, i: usize) -> Point3 {
        self.vertex(i) - self.vertex(0)
    }

    pub fn frame_det(&self) -> f64 {
        self.edge(1).dot(&self.edge(2).cross(&self.edge(3)))
    }

    pub fn diameter(&self) -> f64 {
        let v = self.original;
        let mut d: f64 = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                d = d.max((v[i] - v[j]).norm());
            }
        }
        d
    }

    /// Reorders the vertices by `pi` relative to the current order.
    pub fn permuted(&self, pi: Permutation) -> TetOrientation {
        Self {
            original: self.original,
            perm: self.perm.then(pi),
        }
    }

    /// Physical position of a lattice point.
    pub fn micro_vertex_position(&self, p: LogicalCoord, level: u32) -> Result<Point3> {
        if !p.in_grid(level) {
            return Err(Error::OutsideGrid { coord: p, level });
        }
        Ok(self.position_unchecked(p, level))
    }

    #[inline]
    pub fn position_unchecked(&self, p: LogicalCoord, level: u32) -> Point3 {
        let h = 1.0 / f64::from(intervals(level));
        self.base()
            + (self.edge(1) * f64::from(p.x) + self.edge(2) * f64::from(p.y) + self.edge(3) * f64::from(p.z))
                * h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_and_negation() {
        assert_eq!(Direction::W.offset(), [-1, 0, 0]);
        assert_eq!(Direction::C.offset(), [0, 0, 0]);
        assert_eq!(Direction::Bnw.offset(), [-1, 1, -1]);
        for d in Direction::ALL {
            let o = d.offset();
            let n = d.negate().offset();
            assert_eq!([o[0] + n[0], o[1] + n[1], o[2] + n[2]], [0, 0, 0]);
            assert_eq!(d.negate().negate(), d);
        }
        for (l, u) in Direction::LOWER.iter().zip(Direction::UPPER) {
            assert_eq!(l.negate(), u);
        }
    }

    #[test]
    fn lower_directions_precede_center() {
        let c = LogicalCoord::new(5, 5, 5);
        for d in Direction::ALL {
            let q = c.shifted(d);
            assert_eq!(q < c, d.is_lower(), "{d}");
        }
    }

    #[test]
    fn direction_names_roundtrip() {
        for d in Direction::ALL {
            assert_eq!(d.name().parse::<Direction>().unwrap(), d);
        }
        assert!("nne".parse::<Direction>().is_err());
    }

    #[test]
    fn grid_counts() {
        assert_eq!(enumerate_grid(2, Region::Full).unwrap().len(), 35);
        assert_eq!(
            enumerate_grid(2, Region::Interior).unwrap(),
            vec![LogicalCoord::new(1, 1, 1)]
        );
        assert_eq!(enumerate_grid(3, Region::Interior).unwrap().len(), 35);
        for level in 2..=4 {
            let n = intervals(level) as usize;
            let full = enumerate_grid(level, Region::Full).unwrap();
            assert_eq!(full.len(), (n + 1) * (n + 2) * (n + 3) / 6);
            let inner = enumerate_grid(level, Region::Interior).unwrap().len();
            let bdry = enumerate_grid(level, Region::Boundary).unwrap().len();
            assert_eq!(inner + bdry, full.len());
        }
        assert!(enumerate_grid(1, Region::Full).is_err());
    }

    #[test]
    fn enumeration_is_sorted() {
        let pts = enumerate_grid(4, Region::Full).unwrap();
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        let layer = enumerate_grid(4, Region::FaceLayer(3)).unwrap();
        assert!(layer.iter().all(|p| p.z == 3));
        assert_eq!(layer.len(), 14 * 15 / 2);
    }

    #[test]
    fn interior_neighbourhood_is_closed() {
        for level in 2..=4 {
            for p in enumerate_grid(level, Region::Interior).unwrap() {
                for d in Direction::ALL {
                    assert!(p.shifted(d).in_grid(level));
                }
            }
        }
    }

    #[test]
    fn indexers_match_enumeration() {
        for level in 2..=5 {
            let full = SimplexIndexer::full(level);
            let pts = enumerate_grid(level, Region::Full).unwrap();
            assert_eq!(full.len(), pts.len());
            for (i, p) in pts.iter().enumerate() {
                assert_eq!(full.index(*p), i);
                assert_eq!(full.row_start(p.y, p.z) + p.x as isize, i as isize);
            }
            let inner = SimplexIndexer::interior(level);
            let pts = enumerate_grid(level, Region::Interior).unwrap();
            assert_eq!(inner.len(), pts.len());
            assert!(inner.coords().eq(pts.iter().copied()));
            for (i, p) in pts.iter().enumerate() {
                assert_eq!(inner.index(*p), i);
                assert_eq!(inner.row_start(p.y, p.z) + p.x as isize, i as isize);
            }
        }
        let tri = TriangleIndexer::new(6);
        let mut k = 0;
        for y in 0..=6 {
            for x in 0..=(6 - y) {
                assert_eq!(tri.index(x, y), k);
                k += 1;
            }
        }
        assert_eq!(tri.len(), k);
    }

    fn unit_tet() -> TetOrientation {
        TetOrientation::from_coords([[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap()
    }

    #[test]
    fn positions() {
        let t = unit_tet();
        assert_eq!(t.micro_vertex_position(LogicalCoord::new(0, 0, 0), 2).unwrap(), t.base());
        assert_eq!(t.micro_vertex_position(LogicalCoord::new(4, 0, 0), 2).unwrap(), t.vertex(1));
        let p = t.micro_vertex_position(LogicalCoord::new(1, 1, 1), 2).unwrap();
        assert!((p - Point3::new(0.25, 0.25, 0.25)).norm() < 1e-15);
        assert!(t.micro_vertex_position(LogicalCoord::new(5, 0, 0), 2).is_err());
    }

    #[test]
    fn permutations() {
        let all = Permutation::all();
        assert_eq!(all.len(), 24);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        for p in &all {
            assert_eq!(p.then(p.inverse()), Permutation::IDENTITY);
            assert_eq!(p.inverse().then(*p), Permutation::IDENTITY);
            assert_eq!(p.to_string().parse::<Permutation>().unwrap(), *p);
            assert_eq!(p.label().parse::<Permutation>().unwrap(), *p);
        }
        assert!("1123".parse::<Permutation>().is_err());
        let t = unit_tet();
        assert_eq!(t.permuted(Permutation::IDENTITY), t);
        let swapped = t.permuted("2134".parse().unwrap());
        assert_eq!(swapped.base(), Point3::new(1.0, 0.0, 0.0));
        // Label entries are target positions: vertex 1 moves to slot 2 and so on.
        let cyc = t.permuted("2341".parse().unwrap());
        assert_eq!(cyc.vertex(1), t.vertex(0));
        assert_eq!(cyc.vertex(0), t.vertex(3));
    }

    #[test]
    fn permutation_preserves_point_cloud() {
        let t = TetOrientation::from_coords([
            [0.1, 0.0, 0.2],
            [1.0, 0.3, 0.0],
            [0.2, 1.1, 0.1],
            [0.3, 0.2, 0.9],
        ])
        .unwrap();
        let level = 2;
        let sorted_cloud = |t: &TetOrientation| {
            let mut v: Vec<[f64; 3]> = enumerate_grid(level, Region::Full)
                .unwrap()
                .into_iter()
                .map(|p| {
                    let q = t.micro_vertex_position(p, level).unwrap();
                    [q.x, q.y, q.z].map(|c| (c * 1e10).round() / 1e10)
                })
                .collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        };
        let reference = sorted_cloud(&t);
        for pi in Permutation::all() {
            let cloud = sorted_cloud(&t.permuted(pi));
            for (a, b) in reference.iter().zip(&cloud) {
                for k in 0..3 {
                    assert!((a[k] - b[k]).abs() < 1e-14);
                }
            }
        }
    }
}
