//! Scenario configuration, runner and CSV reports.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{CellAssembler, Coefficient, GeometryMap, ShellBlending, StencilField};
use crate::error::{Error, Result};
use crate::geometry::{intervals, Direction, LogicalCoord, Permutation, Point3, SimplexIndexer, TetOrientation};
use crate::ilu::factorize;
use crate::lfa::{best_permutation, LfaReport};
use crate::mesh::{shapes, MacroMesh};
use crate::multigrid::{pcg, smoother_apply, CellSmoother, Hierarchy, Level, MultigridConfig};
use crate::schur::{InnerKind, SchurSystem};
use crate::surrogate::{SurrogateConfig, Variant};

pub const MAX_LEVEL: u32 = 8;

#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    /// Named single tetrahedron.
    Builtin(String),
    /// Unit cube split at height `h_lower`.
    Cube { h_lower: f64 },
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CoefficientSpec {
    Constant(f64),
    KappaPoly(u32),
    /// Piecewise constant in z; the interface defaults to the cube split height.
    Layered { interface: Option<f64>, lower: f64, upper: f64 },
}

impl FromStr for CoefficientSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "constant" {
            return Ok(Self::Constant(1.0));
        }
        if s == "layered" {
            return Ok(Self::Layered { interface: None, lower: 1.0, upper: 1.0 });
        }
        let poly = s.strip_prefix("kappa_poly(").and_then(|r| r.strip_suffix(')')).or_else(|| s.strip_prefix("kappa"));
        if let Some(i) = poly.and_then(|i| i.parse::<u32>().ok()).filter(|&i| i <= 3) {
            return Ok(Self::KappaPoly(i));
        }
        Err(Error::Config(format!("unknown coefficient `{s}` (constant, kappa0..kappa3, layered)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmootherKind {
    /// Symmetric Gauss–Seidel on the cells; accepted as an alias of `sgs`.
    Gs,
    Sgs,
    Ilu,
    SurrogateIlu,
    Exact,
}

impl SmootherKind {
    pub fn name(self) -> &'static str {
        match self {
            SmootherKind::Gs => "gs",
            SmootherKind::Sgs => "sgs",
            SmootherKind::Ilu => "ilu",
            SmootherKind::SurrogateIlu => "surrogate_ilu",
            SmootherKind::Exact => "exact",
        }
    }
}

impl FromStr for SmootherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "gs" => Ok(Self::Gs),
            "sgs" => Ok(Self::Sgs),
            "ilu" => Ok(Self::Ilu),
            "surrogate_ilu" | "surrogate" => Ok(Self::SurrogateIlu),
            "exact" => Ok(Self::Exact),
            other => Err(Error::Config(format!("unknown smoother `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    MgRate,
    Pcg,
    Schur,
    HybridRate,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::MgRate => "mg_rate",
            Mode::Pcg => "pcg",
            Mode::Schur => "schur",
            Mode::HybridRate => "hybrid_rate",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "mg_rate" | "rate" => Ok(Self::MgRate),
            "pcg" => Ok(Self::Pcg),
            "schur" => Ok(Self::Schur),
            "hybrid_rate" | "hybrid" => Ok(Self::HybridRate),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    /// One application of the level smoother.
    Smoother,
    /// One V-cycle.
    Multigrid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub geometry: Geometry,
    /// Finest level; the hierarchy always starts at level 2.
    pub level: u32,
    pub coefficient: CoefficientSpec,
    /// `None` selects the shell blending for the shell geometry only.
    pub blending: Option<bool>,
    pub smoother: SmootherKind,
    pub variant: Variant,
    pub degrees: [usize; 3],
    pub sampling_level: Option<u32>,
    pub operator_degrees: Option<[usize; 3]>,
    pub reorder: bool,
    pub perm: Option<Permutation>,
    pub mode: Mode,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub tol: f64,
    pub max_iter: usize,
    pub pre: usize,
    pub post: usize,
    pub steps: usize,
    pub inner: String,
    pub precond: Preconditioner,
    pub timing: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            geometry: Geometry::Builtin("regular".into()),
            level: 6,
            coefficient: CoefficientSpec::Constant(1.0),
            blending: None,
            smoother: SmootherKind::Ilu,
            variant: Variant::V1,
            degrees: [3, 3, 3],
            sampling_level: None,
            operator_degrees: None,
            reorder: true,
            perm: None,
            mode: Mode::MgRate,
            seed: 42,
            output: None,
            tol: 1e-3,
            max_iter: 10_000,
            pre: 3,
            post: 3,
            steps: 20,
            inner: "multigrid".into(),
            precond: Preconditioner::Smoother,
            timing: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{v}` for `{key}`"))),
    }
}

fn parse_degrees(key: &str, v: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = v
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_>>()?;
    match parts[..] {
        [d] => Ok([d; 3]),
        [a, b, c] => Ok([a, b, c]),
        _ => Err(Error::Config(format!("`{key}` takes one or three degrees"))),
    }
}

impl ScenarioConfig {
    /// Sets one key; the same keys are used in config files and on the command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "name" | "scenario" => self.name = v.to_string(),
            "geometry" | "shape" => {
                self.geometry = match v.to_ascii_lowercase().as_str() {
                    "cube" => Geometry::Cube { h_lower: self.h_lower().unwrap_or(0.5) },
                    name if shapes::by_name(name).is_some() => Geometry::Builtin(name.to_string()),
                    _ => return Err(Error::Config(format!("unknown geometry `{v}`"))),
                }
            }
            "mesh" => self.geometry = Geometry::File(PathBuf::from(v)),
            "h_lower" => {
                let h: f64 = parse(&key, v)?;
                if !(h > 0.0 && h < 1.0) {
                    return Err(Error::Config(format!("h_lower {h} outside (0, 1)")));
                }
                self.geometry = Geometry::Cube { h_lower: h };
            }
            "level" => self.level = parse(&key, v)?,
            "coefficient" => {
                let new: CoefficientSpec = v.parse()?;
                // Keep already given layer values.
                self.coefficient = match (new, self.coefficient) {
                    (CoefficientSpec::Layered { .. }, old @ CoefficientSpec::Layered { .. }) => old,
                    (n, _) => n,
                };
            }
            "kappa" => self.coefficient = CoefficientSpec::Constant(parse(&key, v)?),
            "kappa_lower" | "kappa_upper" | "interface" => {
                let x: f64 = parse(&key, v)?;
                let (mut interface, mut lower, mut upper) = match self.coefficient {
                    CoefficientSpec::Layered { interface, lower, upper } => (interface, lower, upper),
                    _ => (None, 1.0, 1.0),
                };
                match key.as_str() {
                    "kappa_lower" => lower = x,
                    "kappa_upper" => upper = x,
                    _ => interface = Some(x),
                }
                self.coefficient = CoefficientSpec::Layered { interface, lower, upper };
            }
            "blending" => {
                self.blending = match v.to_ascii_lowercase().as_str() {
                    "auto" => None,
                    "shell" => Some(true),
                    "none" => Some(false),
                    _ => return Err(Error::Config(format!("blending `{v}`: auto, shell or none"))),
                }
            }
            "smoother" => self.smoother = v.parse()?,
            "variant" => self.variant = v.parse()?,
            "degrees" | "deg" => self.degrees = parse_degrees(&key, v)?,
            "sampling_level" => {
                self.sampling_level = if v.eq_ignore_ascii_case("auto") { None } else { Some(parse(&key, v)?) }
            }
            "operator_degrees" => {
                self.operator_degrees =
                    if v.eq_ignore_ascii_case("none") { None } else { Some(parse_degrees(&key, v)?) }
            }
            "reorder" => self.reorder = parse_bool(&key, v)?,
            "perm" | "permutation" => {
                self.perm = if v.eq_ignore_ascii_case("none") { None } else { Some(v.parse()?) };
            }
            "mode" => self.mode = v.parse()?,
            "seed" => self.seed = parse(&key, v)?,
            "output" => self.output = Some(PathBuf::from(v)),
            "tol" => self.tol = parse(&key, v)?,
            "max_iter" => self.max_iter = parse(&key, v)?,
            "pre" => self.pre = parse(&key, v)?,
            "post" => self.post = parse(&key, v)?,
            "steps" => self.steps = parse(&key, v)?,
            "inner" => {
                if !matches!(v, "dense" | "multigrid") {
                    return Err(Error::Config(format!("inner solver `{v}`: dense or multigrid")));
                }
                self.inner = v.to_string();
            }
            "precond" => {
                self.precond = match v {
                    "smoother" => Preconditioner::Smoother,
                    "multigrid" => Preconditioner::Multigrid,
                    _ => return Err(Error::Config(format!("precond `{v}`: smoother or multigrid"))),
                }
            }
            "timing" => self.timing = parse_bool(&key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `[section]` headers group keys and `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    fn h_lower(&self) -> Option<f64> {
        match self.geometry {
            Geometry::Cube { h_lower } => Some(h_lower),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_LEVEL).contains(&self.level) {
            return Err(Error::Config(format!("level {} outside [2, {MAX_LEVEL}]", self.level)));
        }
        if let Some(l) = self.sampling_level {
            if l < 2 || l > self.level {
                return Err(Error::Config(format!("sampling level {l} outside [2, {}]", self.level)));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        if self.blending == Some(true) && !matches!(&self.geometry, Geometry::Builtin(_)) {
            return Err(Error::Config("shell blending needs a single builtin tetrahedron".into()));
        }
        Ok(())
    }

    fn shell(&self) -> bool {
        self.blending.unwrap_or(matches!(&self.geometry, Geometry::Builtin(n) if n == "shell"))
    }

    pub fn coefficient(&self) -> Coefficient {
        match self.coefficient {
            CoefficientSpec::Constant(k) => Coefficient::Constant(k),
            CoefficientSpec::KappaPoly(i) => Coefficient::KappaPoly(i),
            CoefficientSpec::Layered { interface, lower, upper } => Coefficient::Layered {
                interface: interface.or(self.h_lower()).unwrap_or(0.5),
                lower,
                upper,
            },
        }
    }

    pub fn cell_smoother(&self) -> CellSmoother {
        match self.smoother {
            SmootherKind::Gs | SmootherKind::Sgs => CellSmoother::Sgs,
            SmootherKind::Ilu => CellSmoother::Ilu,
            SmootherKind::Exact => CellSmoother::Exact,
            SmootherKind::SurrogateIlu => CellSmoother::SurrogateIlu(SurrogateConfig {
                degrees: self.degrees,
                variant: self.variant,
                coarse_level: self.sampling_level,
            }),
        }
    }

    pub fn multigrid(&self) -> MultigridConfig {
        MultigridConfig {
            smoother: self.cell_smoother(),
            pre: self.pre,
            post: self.post,
            operator_degrees: self.operator_degrees,
            ..Default::default()
        }
    }

    /// Key/value dump in the config file format.
    pub fn to_text(&self) -> String {
        let mut s = String::from("[scenario]\n");
        let _ = writeln!(s, "name = {}", self.name);
        match &self.geometry {
            Geometry::Builtin(n) => {
                let _ = writeln!(s, "geometry = {n}");
            }
            Geometry::Cube { h_lower } => {
                let _ = writeln!(s, "geometry = cube\nh_lower = {h_lower}");
            }
            Geometry::File(p) => {
                let _ = writeln!(s, "mesh = {}", p.display());
            }
        }
        let _ = writeln!(s, "level = {}", self.level);
        match self.coefficient {
            CoefficientSpec::Constant(k) => {
                let _ = writeln!(s, "kappa = {k}");
            }
            CoefficientSpec::KappaPoly(i) => {
                let _ = writeln!(s, "coefficient = kappa{i}");
            }
            CoefficientSpec::Layered { interface, lower, upper } => {
                let _ = writeln!(s, "kappa_lower = {lower}\nkappa_upper = {upper}");
                if let Some(i) = interface {
                    let _ = writeln!(s, "interface = {i}");
                }
            }
        }
        let d = self.degrees;
        let _ = writeln!(s, "\n[smoother]\nsmoother = {}\nvariant = {:?}\ndegrees = {} {} {}", self.smoother.name(), self.variant, d[0], d[1], d[2]);
        let _ = writeln!(s, "reorder = {}", self.reorder);
        if let Some(p) = self.perm {
            let _ = writeln!(s, "perm = {}", p.label());
        }
        let _ = writeln!(s, "\n[solver]\nmode = {}\nseed = {}\ntol = {:e}\nsteps = {}", self.mode.name(), self.seed, self.tol, self.steps);
        s
    }
}

/// Mesh with the requested orientation applied, and the permutation label
/// for single tetrahedra.
pub fn build_mesh(cfg: &ScenarioConfig) -> Result<(MacroMesh, String)> {
    match &cfg.geometry {
        Geometry::Builtin(name) => {
            let coords = shapes::by_name(name).ok_or_else(|| Error::Config(format!("unknown geometry `{name}`")))?;
            let base = TetOrientation::from_coords(coords)?;
            let perm = match (cfg.perm, cfg.reorder) {
                (Some(p), _) => p,
                (None, true) => best_permutation(&base)?.0,
                (None, false) => Permutation::IDENTITY,
            };
            Ok((MacroMesh::single(&base.permuted(perm)), perm.label()))
        }
        Geometry::Cube { h_lower } => orient(shapes::split_cube(*h_lower)?, cfg),
        Geometry::File(path) => orient(MacroMesh::read(path)?, cfg),
    }
}

fn orient(mut mesh: MacroMesh, cfg: &ScenarioConfig) -> Result<(MacroMesh, String)> {
    if cfg.perm.is_some() {
        return Err(Error::Config("perm applies to single tetrahedra only".into()));
    }
    if cfg.reorder {
        for c in 0..mesh.num_cells() {
            let (p, _) = best_permutation(&mesh.cell_orientation(c))?;
            mesh.permute_cell(c, p);
        }
        Ok((mesh, "lfa".into()))
    } else {
        Ok((mesh, "given".into()))
    }
}

/// One CSV row of a solver report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub geometry: String,
    pub permutation: String,
    pub smoother: String,
    pub variant: String,
    pub degrees: String,
    pub levels: String,
    pub params: String,
    pub rho: Option<f64>,
    pub iterations: Option<usize>,
    pub wall_time: Option<f64>,
}

pub const REPORT_HEADER: &str = "scenario,geometry,permutation,smoother,variant,degrees,levels,params,rho,iterations,wall_time";

impl ReportRow {
    pub fn csv(&self) -> String {
        let rho = self.rho.map_or("NA".into(), |r| format!("{r:.6e}"));
        let it = self.iterations.map_or("NA".into(), |i| i.to_string());
        let t = self.wall_time.map_or("NA".into(), |t| format!("{t:.3}"));
        format!(
            "{},{},{},{},{},{},{},{},{rho},{it},{t}",
            self.scenario, self.geometry, self.permutation, self.smoother, self.variant, self.degrees, self.levels, self.params
        )
    }
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from(REPORT_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv());
        s.push('\n');
    }
    s
}

/// Iterations to reduce the error by `1e-6` at rate `rho`.
pub fn iterations_for(rho: f64) -> Option<usize> {
    if rho > 0.0 && rho < 1.0 {
        Some((-6.0 / rho.log10()).ceil() as usize)
    } else {
        None
    }
}

/// Detailed result of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub row: ReportRow,
    /// Residual norms per iteration (PCG and Schur modes).
    pub residuals: Vec<f64>,
}

fn geometry_label(g: &Geometry) -> String {
    match g {
        Geometry::Builtin(n) => n.clone(),
        Geometry::Cube { h_lower } => format!("cube(h_lower={h_lower})"),
        Geometry::File(p) => p.display().to_string(),
    }
}

/// Blending map for the shell geometry.
pub fn geometry_map(cfg: &ScenarioConfig, mesh: &MacroMesh) -> Result<Option<ShellBlending>> {
    if !cfg.shell() {
        return Ok(None);
    }
    Ok(Some(ShellBlending::for_tet(&mesh.cell_orientation(0))?))
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let (mesh, perm) = build_mesh(cfg)?;
    let coeff = cfg.coefficient();
    let blend = geometry_map(cfg, &mesh)?;
    let map = blend.as_ref().map(|b| b as &dyn GeometryMap);
    let mut rho = None;
    let iterations;
    let mut residuals = Vec::new();
    match cfg.mode {
        Mode::MgRate | Mode::HybridRate => {
            let h = Hierarchy::build(&mesh, cfg.level, &coeff, map, cfg.multigrid())?;
            let r = h.convergence_factor(cfg.steps, cfg.seed)?;
            rho = Some(r);
            iterations = iterations_for(r);
        }
        Mode::Pcg => {
            let rep = match cfg.precond {
                Preconditioner::Smoother => {
                    let lvl = Level::build(&mesh, cfg.level, &coeff, map, &cfg.multigrid())?;
                    let (b, mut x) = pcg_problem(lvl.num_free(), cfg.seed);
                    pcg(|u, v| lvl.matrix().spmv(u, v), |r, z| smoother_apply(&lvl, r, z), &b, &mut x, cfg.tol, cfg.max_iter)?
                }
                Preconditioner::Multigrid => {
                    let h = Hierarchy::build(&mesh, cfg.level, &coeff, map, cfg.multigrid())?;
                    let a = h.finest().matrix();
                    let (b, mut x) = pcg_problem(a.nrows(), cfg.seed);
                    pcg(|u, v| a.spmv(u, v), |r, z| h.precondition(r, z), &b, &mut x, cfg.tol, cfg.max_iter)?
                }
            };
            iterations = Some(rep.iterations);
            residuals = rep.residuals;
        }
        Mode::Schur => {
            let inner = match cfg.inner.as_str() {
                "dense" => InnerKind::Dense,
                _ => InnerKind::Multigrid(cfg.multigrid()),
            };
            let sys = SchurSystem::build(&mesh, cfg.level, &coeff, map, &inner)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let b: Vec<f64> = (0..sys.matrix().nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, rep) = sys.solve(&b, cfg.tol, cfg.max_iter)?;
            iterations = Some(rep.iterations);
            residuals = rep.residuals;
        }
    }
    let surrogate = cfg.smoother == SmootherKind::SurrogateIlu;
    let d = cfg.degrees;
    let row = ReportRow {
        scenario: cfg.name.clone(),
        geometry: geometry_label(&cfg.geometry),
        permutation: perm,
        smoother: cfg.smoother.name().into(),
        variant: if surrogate { format!("{:?}", cfg.variant) } else { "NA".into() },
        degrees: if surrogate { format!("{}-{}-{}", d[0], d[1], d[2]) } else { "NA".into() },
        levels: format!("{}-{}", Hierarchy::COARSEST, cfg.level),
        params: String::new(),
        rho,
        iterations,
        wall_time: cfg.timing.then(|| start.elapsed().as_secs_f64()),
    };
    Ok(RunResult { row, residuals })
}

/// Zero right-hand side and a seeded uniform `[0, 1)` initial guess.
fn pcg_problem(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (vec![0.0; n], (0..n).map(|_| rng.gen_range(0.0..1.0)).collect())
}

/// Runs the cartesian product of `params` over `base`.
pub fn sweep(base: &ScenarioConfig, params: &[(String, Vec<String>)]) -> Result<Vec<ReportRow>> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (k, values) in params {
        if values.is_empty() {
            return Err(Error::Config(format!("sweep parameter `{k}` has no values")));
        }
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((k.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    let mut rows = Vec::new();
    for combo in combos {
        let mut cfg = base.clone();
        for (k, v) in &combo {
            cfg.set(k, v)?;
        }
        let mut row = run_scenario(&cfg)?.row;
        row.params = combo.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
        rows.push(row);
    }
    Ok(rows)
}

/// LFA orientation report per macro-cell of the configured geometry.
pub fn reorder_reports(cfg: &ScenarioConfig) -> Result<Vec<LfaReport>> {
    let unoriented = ScenarioConfig { reorder: false, perm: None, ..cfg.clone() };
    let (mesh, _) = build_mesh(&unoriented)?;
    (0..mesh.num_cells()).map(|c| best_permutation(&mesh.cell_orientation(c)).map(|r| r.1)).collect()
}

pub fn reorder_csv(reports: &[LfaReport]) -> String {
    let mut s = String::from("cell,permutation,mu,selected\n");
    for (c, r) in reports.iter().enumerate() {
        for line in r.to_csv().lines().skip(1) {
            let _ = writeln!(s, "{c},{line}");
        }
    }
    s
}

/// Where to sample a factor stencil.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Probe {
    /// Lattice points nearest to the segment between two physical points.
    Line { from: [f64; 3], to: [f64; 3] },
    /// All interior points of one z-layer.
    Slice { z: i32 },
}

impl FromStr for Probe {
    type Err = Error;

    /// `line:x,y,z:x,y,z` or `slice:z`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid probe `{s}` (line:x,y,z:x,y,z or slice:z)"));
        let point = |t: &str| -> Result<[f64; 3]> {
            let v: Vec<f64> = t.split(',').map(|c| c.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
            v.try_into().map_err(|_| bad())
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts[..] {
            ["line", a, b] => Ok(Probe::Line { from: point(a)?, to: point(b)? }),
            ["slice", z] => Ok(Probe::Slice { z: z.trim().parse().map_err(|_| bad())? }),
            _ => Err(bad()),
        }
    }
}

/// One sampled factor value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilSample {
    pub coord: LogicalCoord,
    pub position: Point3,
    pub value: f64,
}

/// Logical coordinates (in lattice units) of a physical point.
fn to_logical(tet: &TetOrientation, level: u32, x: &Point3) -> Result<[f64; 3]> {
    let m = Matrix3::from_columns(&[tet.edge(1), tet.edge(2), tet.edge(3)]);
    let inv = m.try_inverse().ok_or(Error::SingularMap(x.x, x.y, x.z))?;
    let l = inv * (x - tet.base()) * f64::from(intervals(level));
    Ok([l.x, l.y, l.z])
}

/// Factor entries of direction `dir` (`c` for the pivot) of the matrix-based
/// ILU of a single tetrahedron.
pub fn dump_stencils(cfg: &ScenarioConfig, dir: Direction, probe: Probe) -> Result<Vec<StencilSample>> {
    Ok(dump_stencil_set(cfg, &[dir], probe)?.pop().unwrap_or_default())
}

/// As [`dump_stencils`] for several directions from one factorization.
pub fn dump_stencil_set(cfg: &ScenarioConfig, dirs: &[Direction], probe: Probe) -> Result<Vec<Vec<StencilSample>>> {
    if let Some(d) = dirs.iter().find(|&&d| d != Direction::C && d.lower_index().is_none()) {
        return Err(Error::UnknownDirection(format!("{} is not a factor direction", d.name())));
    }
    let (mesh, _) = build_mesh(cfg)?;
    if mesh.num_cells() != 1 {
        return Err(Error::Config("stencil dumps need a single tetrahedron".into()));
    }
    let tet = mesh.cell_orientation(0);
    let level = cfg.level;
    let blend = geometry_map(cfg, &mesh)?;
    let map = blend.as_ref().map(|b| b as &dyn GeometryMap);
    let coeff = cfg.coefficient();
    let asm = CellAssembler::new(&tet, level, &coeff, map);
    let factors = factorize(&StencilField::assemble(&asm)?)?;
    let points: Vec<LogicalCoord> = match probe {
        Probe::Slice { z } => SimplexIndexer::interior(level).coords().filter(|p| p.z == z).collect(),
        Probe::Line { from, to } => {
            let a = to_logical(&tet, level, &Point3::from(from))?;
            let b = to_logical(&tet, level, &Point3::from(to))?;
            let steps = (0..3).map(|k| (b[k] - a[k]).abs()).fold(0.0, f64::max).round().max(1.0) as usize;
            let mut pts: Vec<LogicalCoord> = Vec::new();
            for k in 0..=steps {
                let t = k as f64 / steps as f64;
                let q = [0, 1, 2].map(|i| (a[i] + t * (b[i] - a[i])).round() as i32);
                let p = LogicalCoord::new(q[0], q[1], q[2]);
                if p.is_interior(level) && pts.last() != Some(&p) {
                    pts.push(p);
                }
            }
            pts
        }
    };
    let positions: Vec<Point3> = points.iter().map(|&p| asm.position(p)).collect::<Result<_>>()?;
    Ok(dirs
        .iter()
        .map(|&d| {
            points
                .iter()
                .zip(&positions)
                .map(|(&p, &x)| StencilSample { coord: p, position: x, value: factors.at(p).get(d) })
                .collect()
        })
        .collect())
}

pub fn stencil_csv(samples: &[StencilSample]) -> String {
    let mut s = String::from("index,x,y,z,lx,ly,lz,value\n");
    for (i, p) in samples.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{:.10},{:.10},{:.10},{},{},{},{:.12e}",
            p.position.x, p.position.y, p.position.z, p.coord.x, p.coord.y, p.coord.z, p.value
        );
    }
    s
}

/// Standalone matplotlib script plotting column `y` against column `x` of `csv`.
pub fn plot_script(csv: &str, x: &str, y: &str, logy: bool) -> String {
    format!(
        r#"#!/usr/bin/env python3
import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("{csv}")))
xs = [r["{x}"] for r in rows]
ys = [float(r["{y}"]) if r["{y}"] != "NA" else float("nan") for r in rows]
try:
    xs = [float(v) for v in xs]
except ValueError:
    pass
plt.plot(xs, ys, marker="o")
plt.xlabel("{x}")
plt.ylabel("{y}")
{scale}plt.savefig("{csv}".rsplit(".", 1)[0] + ".png", dpi=150)
"#,
        scale = if logy { "plt.yscale(\"log\")\n" } else { "" }
    )
}
