use thiserror::Error;

use crate::geometry::LogicalCoord;

#[derive(Debug, Error)]
pub enum Error {
    #[error("level {0} is below the coarsest supported level 2")]
    LevelTooSmall(u32),

    #[error("unknown stencil direction `{0}`")]
    UnknownDirection(String),

    #[error("invalid vertex permutation `{0}`")]
    InvalidPermutation(String),

    #[error("coordinate {coord} is outside the level-{level} grid")]
    OutsideGrid { coord: LogicalCoord, level: u32 },

    #[error("coordinate {0} is not an interior grid point")]
    NotInterior(LogicalCoord),

    #[error("degenerate element {element}: |det J| = {det:e}")]
    DegenerateElement { element: String, det: f64 },

    #[error("geometry map is singular at ({0}, {1}, {2})")]
    SingularMap(f64, f64, f64),

    #[error("pivot breakdown at {coord}: D_c = {value:e}")]
    PivotBreakdown { coord: LogicalCoord, value: f64 },

    #[error("empty sample set for direction `{0}`")]
    EmptySampleSet(String),

    #[error("rank-deficient least-squares design for `{direction}` ({samples} samples, {unknowns} coefficients)")]
    RankDeficient {
        direction: String,
        samples: usize,
        unknowns: usize,
    },

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("Fourier symbol denominator vanishes at theta = {0:?}")]
    SymbolSingular([f64; 3]),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
