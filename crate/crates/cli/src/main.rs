use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;

use tetilu::geometry::Direction;
use tetilu::scenario::{
    plot_script, reorder_csv, reorder_reports, report_csv, run_scenario, stencil_csv, sweep, Mode, Probe,
    ScenarioConfig,
};
use tetilu::Error;

#[derive(Parser)]
#[command(name = "tetilu", version, about = "Multigrid experiments with stencil ILU smoothers on tetrahedral grids")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Asymptotic multigrid convergence rate by power iteration.
    Rate(Common),
    /// Iteration count of preconditioned CG.
    Pcg {
        #[command(flatten)]
        common: Common,
        /// Preconditioner: `smoother` (one smoothing step) or `multigrid` (one V-cycle).
        #[arg(long)]
        precond: Option<String>,
    },
    /// Interface solve with the Steklov–Poincaré operator.
    Schur {
        #[command(flatten)]
        common: Common,
        /// Cell-interior solver: `dense` or `multigrid`.
        #[arg(long)]
        inner: Option<String>,
    },
    /// Multigrid rate with the hybrid block smoother on a macro mesh.
    Hybrid(Common),
    /// Smoothing factors of all 24 vertex orders and the chosen one.
    Reorder(Common),
    /// Samples a factor stencil of the matrix-based ILU.
    DumpStencils {
        #[command(flatten)]
        common: Common,
        /// Factor direction (`c` for the pivot, or w, s, se, bnw, bn, bc, be).
        #[arg(long, default_value = "c")]
        direction: String,
        /// Physical segment `x,y,z:x,y,z`.
        #[arg(long, conflicts_with = "slice")]
        line: Option<String>,
        /// Logical z-layer.
        #[arg(long)]
        slice: Option<i32>,
    },
    /// Cartesian parameter sweep, one report row per combination.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `key=v1,v2,...`; repeat for more axes.
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        /// Report column plotted on the y axis of the emitted script.
        #[arg(long, default_value = "rho")]
        plot: String,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Config file with `key = value` lines and optional `[section]` headers.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Builtin geometry: regular, spindle, cap, spade, unit, distorted, shell, cube.
    #[arg(long, alias = "scenario")]
    shape: Option<String>,
    /// Macro mesh file.
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(short, long)]
    level: Option<u32>,
    /// constant, kappa0..kappa3 or layered.
    #[arg(long)]
    coefficient: Option<String>,
    #[arg(long)]
    smoother: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    /// Surrogate degrees in x, y, z.
    #[arg(long, num_args = 1..=3)]
    deg: Option<Vec<usize>>,
    /// Coarse sampling level of the surrogate fit.
    #[arg(long)]
    sampling_level: Option<u32>,
    /// Vertex permutation label such as 2341.
    #[arg(long)]
    perm: Option<String>,
    #[arg(long, overrides_with = "no_reorder")]
    reorder: bool,
    #[arg(long)]
    no_reorder: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Adds wall-clock seconds to the report.
    #[arg(long)]
    timing: bool,
    /// CSV destination; a plot script is written next to it.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Any further `key=value` setting.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn config(&self, mode: Mode) -> Result<ScenarioConfig, Error> {
        let mut cfg = ScenarioConfig { mode, ..Default::default() };
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
            cfg.mode = mode;
        }
        let mut set = |k: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(k, &v));
        set("geometry", self.shape.clone())?;
        set("mesh", self.mesh.as_ref().map(|p| p.display().to_string()))?;
        set("level", self.level.map(|v| v.to_string()))?;
        set("coefficient", self.coefficient.clone())?;
        set("smoother", self.smoother.clone())?;
        set("variant", self.variant.clone())?;
        set("degrees", self.deg.as_ref().map(|d| d.iter().map(usize::to_string).collect::<Vec<_>>().join(",")))?;
        set("sampling_level", self.sampling_level.map(|v| v.to_string()))?;
        set("perm", self.perm.clone())?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("tol", self.tol.map(|v| v.to_string()))?;
        set("output", self.output.as_ref().map(|p| p.display().to_string()))?;
        if self.reorder {
            set("reorder", Some("true".into()))?;
        }
        if self.no_reorder {
            set("reorder", Some("false".into()))?;
        }
        if self.timing {
            set("timing", Some("true".into()))?;
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("`--set {kv}`: expected KEY=VALUE")))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Writes `csv` to the configured output (with a plot script beside it) or stdout.
fn emit(cfg: &ScenarioConfig, csv: &str, plot: Option<(&str, &str, bool)>) -> anyhow::Result<()> {
    match &cfg.output {
        None => print!("{csv}"),
        Some(path) => {
            fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
            info!("wrote {}", path.display());
            if let Some((x, y, logy)) = plot {
                let script = path.with_extension("py");
                fs::write(&script, plot_script(&file_name(path), x, y, logy))
                    .with_context(|| format!("writing {}", script.display()))?;
                info!("wrote {}", script.display());
            }
        }
    }
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn history_csv(residuals: &[f64]) -> String {
    let mut s = String::from("iteration,residual\n");
    for (i, r) in residuals.iter().enumerate() {
        s.push_str(&format!("{i},{r:.6e}\n"));
    }
    s
}

fn run_with_history(cfg: &ScenarioConfig) -> anyhow::Result<()> {
    let res = run_scenario(cfg)?;
    let report = report_csv(std::slice::from_ref(&res.row));
    let history = history_csv(&res.residuals);
    match &cfg.output {
        None => print!("{report}\n{history}"),
        Some(path) => {
            fs::write(path, report).with_context(|| format!("writing {}", path.display()))?;
            let hist = path.with_extension("history.csv");
            let hist_cfg = ScenarioConfig { output: Some(hist), ..cfg.clone() };
            emit(&hist_cfg, &history, Some(("iteration", "residual", true)))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Rate(c) => {
            let cfg = c.config(Mode::MgRate)?;
            emit(&cfg, &report_csv(&[run_scenario(&cfg)?.row]), None)
        }
        Command::Hybrid(c) => {
            let cfg = c.config(Mode::HybridRate)?;
            emit(&cfg, &report_csv(&[run_scenario(&cfg)?.row]), None)
        }
        Command::Pcg { common, precond } => {
            let mut cfg = common.config(Mode::Pcg)?;
            if let Some(p) = precond {
                cfg.set("precond", &p)?;
            }
            run_with_history(&cfg)
        }
        Command::Schur { common, inner } => {
            let mut cfg = common.config(Mode::Schur)?;
            if let Some(i) = inner {
                cfg.set("inner", &i)?;
            }
            run_with_history(&cfg)
        }
        Command::Reorder(c) => {
            let cfg = c.config(Mode::MgRate)?;
            let reports = reorder_reports(&cfg)?;
            for (cell, r) in reports.iter().enumerate() {
                info!("cell {cell}: selected {}", r.selected.label());
            }
            emit(&cfg, &reorder_csv(&reports), Some(("permutation", "mu", false)))
        }
        Command::DumpStencils { common, direction, line, slice } => {
            let cfg = common.config(Mode::MgRate)?;
            let dir: Direction = direction.parse()?;
            let probe = match (line, slice) {
                (Some(l), _) => format!("line:{l}").parse::<Probe>()?,
                (None, Some(z)) => Probe::Slice { z },
                (None, None) => return Err(Error::Config("dump-stencils needs --line or --slice".into()).into()),
            };
            let samples = tetilu::scenario::dump_stencils(&cfg, dir, probe)?;
            emit(&cfg, &stencil_csv(&samples), Some(("lz", "value", false)))
        }
        Command::Sweep { common, params, plot } => {
            let cfg = common.config(Mode::MgRate)?;
            let axes = params
                .iter()
                .map(|p| {
                    let (k, v) = p.split_once('=').ok_or_else(|| Error::Config(format!("`--param {p}`: expected KEY=V1,V2")))?;
                    Ok((k.trim().to_string(), v.split(',').map(|s| s.trim().to_string()).collect()))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let rows = sweep(&cfg, &axes)?;
            emit(&cfg, &report_csv(&rows), Some(("params", plot.as_str(), true)))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(filter)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = matches!(
                e.downcast_ref::<Error>(),
                Some(
                    Error::Config(_) | Error::InvalidPermutation(_) | Error::UnknownDirection(_) | Error::Mesh(_) | Error::Io(_)
                )
            ) || e.downcast_ref::<std::io::Error>().is_some();
            ExitCode::from(if config { 2 } else { 3 })
        }
    }
}
