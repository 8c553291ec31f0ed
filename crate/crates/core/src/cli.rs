//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::energy::{lj_components_named, lj_energy_named, lj_optimal_volume_named, ExponentMode, LJExponents};
use crate::error::{Error, Result};
use crate::exec::{configure_threads, Execution};
use crate::lattice::{named_structure, StructureLabel};
use crate::optimize::{minimize_fixed_volume, minimize_global, Family, MinimizeConfig, MinimizerReport, Objective};
use crate::scan::{
    even_grid, linear_grid, phase_transitions, scan_delta_curve, scan_lj_phase, scan_riesz_difference, PhaseCell,
    PhaseOptions, RieszRange, ScanRecord,
};
use crate::zeta::{direct_sum_with, zeta_general, zeta_named, ZetaResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Parser)]
#[command(name = "lattice-zeta", version, about = "Lattice zeta functions and lattice energy minimization")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (1 runs sequentially).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed of the start-point sequence.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StructureArg {
    Sc,
    Fcc,
    Bcc,
    Sh,
    Hcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RouteArg {
    Closed,
    Ewald,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    Riesz,
    Lj,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Epstein zeta function of a named structure.
    Zeta {
        #[arg(long, value_enum)]
        structure: StructureArg,
        #[arg(long, allow_negative_numbers = true)]
        s: f64,
        /// Height-to-spacing ratio of the simple hexagonal lattice.
        #[arg(long)]
        delta: Option<f64>,
        /// Volume per point.
        #[arg(long, default_value_t = 1.0)]
        volume: f64,
        #[arg(long, value_enum, default_value_t = RouteArg::Closed)]
        route: RouteArg,
        /// Cube radius of the direct route.
        #[arg(long, default_value_t = 60)]
        radius: u32,
    },
    /// Lennard-Jones energy of a named structure.
    Lj {
        #[arg(long, value_enum)]
        structure: StructureArg,
        #[arg(long)]
        n: f64,
        #[arg(long)]
        m: f64,
        #[arg(long)]
        delta: Option<f64>,
        /// Volume per point; omitted means the structure's optimal volume.
        #[arg(long)]
        volume: Option<f64>,
        /// Allow exponents at or below 3 through analytic continuation.
        #[arg(long)]
        continued: bool,
    },
    /// Multi-start minimization over lattices.
    Minimize {
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        #[arg(long, allow_negative_numbers = true)]
        s: Option<f64>,
        #[arg(long)]
        n: Option<f64>,
        #[arg(long)]
        m: Option<f64>,
        #[arg(long, conflicts_with = "global_min")]
        volume: Option<f64>,
        /// Minimize over the volume as well (Lennard-Jones only).
        #[arg(long = "global")]
        global_min: bool,
        /// Add HCP as a competitor.
        #[arg(long)]
        include_hcp: bool,
        #[arg(long, default_value_t = 64)]
        starts: usize,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-10)]
        x_tol: f64,
        #[arg(long, default_value_t = 1e-12)]
        f_tol: f64,
    },
    /// Riesz difference curves against s.
    ScanRiesz {
        #[arg(long, value_enum, default_value_t = RieszRange::Short)]
        range: RieszRange,
        #[arg(long, allow_negative_numbers = true, requires_all = ["s_max", "s_step"])]
        s_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        s_max: Option<f64>,
        #[arg(long)]
        s_step: Option<f64>,
    },
    /// Lennard-Jones phase diagram at fixed m.
    ScanPhase {
        #[arg(long)]
        m: f64,
        /// Repulsive exponents (repeatable).
        #[arg(long, num_args = 1.., required = true)]
        n: Vec<f64>,
        #[arg(long)]
        v_min: f64,
        #[arg(long)]
        v_max: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Leave HCP out of the competitors.
        #[arg(long)]
        no_hcp: bool,
        /// Cross-check every k-th volume with the optimizer (0 disables).
        #[arg(long, default_value_t = 5)]
        cross_check_every: usize,
        #[arg(long, default_value_t = 64)]
        starts: usize,
        /// Bisect each phase boundary to this width and log it.
        #[arg(long)]
        bisect_tol: Option<f64>,
    },
    /// Optimal simple hexagonal ratio against volume.
    ScanDelta {
        #[arg(long)]
        n: f64,
        #[arg(long)]
        m: f64,
        #[arg(long)]
        v_min: f64,
        #[arg(long)]
        v_max: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::NonConvergence(_) | Error::Bracket(_)) => EXIT_NON_CONVERGENCE,
            CliError::Core(_) => EXIT_DOMAIN,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => EXIT_IO,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "level={} {}", record.level().as_str().to_lowercase(), record.args()))
        .try_init();
}

/// Run the CLI on `argv` (including the program name) and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let started = Instant::now();
    match execute(&cli) {
        Ok(()) => {
            log::info!("event=done elapsed_ms={}", started.elapsed().as_millis());
            EXIT_OK
        }
        Err(err) => {
            let code = err.exit_code();
            log::error!("event=failed code={code} message=\"{err}\"");
            if code == EXIT_USAGE {
                eprintln!("{err}\n\nFor more information, try '--help'.");
            }
            code
        }
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    let g = &cli.global;
    let execution = match g.threads {
        Some(0) => return usage("--threads must be at least 1"),
        Some(1) => Execution::Sequential,
        Some(n) => {
            configure_threads(n);
            Execution::default()
        }
        None => Execution::default(),
    };
    let output = match &cli.command {
        Command::Zeta { structure, s, delta, volume, route, radius } => {
            let label = label_of(*structure, *delta)?;
            cmd_zeta(label, *s, *volume, *route, *radius, execution)?.render(g.format)?
        }
        Command::Lj { structure, n, m, delta, volume, continued } => {
            let label = label_of(*structure, *delta)?;
            let mode = if *continued { ExponentMode::Continued } else { ExponentMode::Summable };
            let e = LJExponents::with_mode(*n, *m, mode)?;
            cmd_lj(label, &e, *volume)?.render(g.format)?
        }
        Command::Minimize { objective, s, n, m, volume, global_min, include_hcp, starts, max_iters, x_tol, f_tol } => {
            let cfg = MinimizeConfig {
                starts: *starts,
                max_iters: *max_iters,
                x_tol: *x_tol,
                f_tol: *f_tol,
                seed: g.seed,
                include_hcp: *include_hcp,
                execution,
                ..MinimizeConfig::default()
            };
            let obj = match (objective, s, n, m) {
                (ObjectiveArg::Riesz, Some(s), None, None) => Objective::Riesz { s: *s },
                (ObjectiveArg::Lj, None, Some(n), Some(m)) => {
                    Objective::LennardJones { exponents: LJExponents::new(*n, *m)? }
                }
                (ObjectiveArg::Riesz, ..) => return usage("riesz objective takes --s only"),
                (ObjectiveArg::Lj, ..) => return usage("lj objective takes --n and --m only"),
            };
            let report = match (obj, volume, global_min) {
                (Objective::LennardJones { exponents }, None, true) => {
                    let family = if *include_hcp { Family::LatticesAndHcp } else { Family::Lattices };
                    minimize_global(&exponents, &cfg, family)?
                }
                (Objective::Riesz { .. }, _, true) => return usage("--global needs the lj objective"),
                (_, Some(v), false) => minimize_fixed_volume(&obj, *v, &cfg)?,
                _ => return usage("give either --volume or --global"),
            };
            report_output(&report).render(g.format)?
        }
        Command::ScanRiesz { range, s_min, s_max, s_step } => {
            let grid = match (s_min, s_max, s_step) {
                (Some(lo), Some(hi), Some(step)) if *step > 0.0 && hi > lo => linear_grid(*lo, *hi, *step),
                (Some(_), ..) => return usage("--s-min, --s-max, --s-step need lo < hi and a positive step"),
                _ => range.grid(),
            };
            let rows = scan_riesz_difference(&grid, execution)?;
            log::info!("event=scan_riesz rows={} requested={}", rows.len(), grid.len());
            records_output(&rows).render(g.format)?
        }
        Command::ScanPhase { m, n, v_min, v_max, steps, no_hcp, cross_check_every, starts, bisect_tol } => {
            let v_grid = volume_grid(*v_min, *v_max, *steps)?;
            let mut n_grid = n.clone();
            n_grid.sort_by(f64::total_cmp);
            n_grid.dedup();
            let opts = PhaseOptions {
                include_hcp: !no_hcp,
                cross_check_every: *cross_check_every,
                minimize: MinimizeConfig { starts: *starts, seed: g.seed, execution, ..MinimizeConfig::default() },
            };
            let cells = scan_lj_phase(*m, &n_grid, &v_grid, &opts)?;
            let flagged = cells.iter().filter(|c| c.flagged).count();
            log::info!("event=scan_phase cells={} flagged={flagged}", cells.len());
            if let Some(tol) = bisect_tol {
                for &nn in &n_grid {
                    let e = LJExponents::new(nn, *m)?;
                    for t in phase_transitions(&e, &v_grid, opts.include_hcp, *tol, execution)? {
                        log::info!(
                            "event=transition n={nn} m={m} V={:.12} from={} to={}",
                            t.volume,
                            t.from.kind_name(),
                            t.to.kind_name()
                        );
                    }
                }
            }
            phase_output(&cells).render(g.format)?
        }
        Command::ScanDelta { n, m, v_min, v_max, steps } => {
            let e = LJExponents::new(*n, *m)?;
            let rows = scan_delta_curve(&e, &volume_grid(*v_min, *v_max, *steps)?, execution)?;
            records_output(&rows).render(g.format)?
        }
    };
    match &g.out {
        Some(path) => std::fs::write(path, output)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(output.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn volume_grid(lo: f64, hi: f64, steps: usize) -> CliResult<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && steps >= 2) {
        return usage("volume range needs 0 < v-min < v-max and at least 2 steps");
    }
    Ok(even_grid(lo, hi, steps))
}

fn label_of(structure: StructureArg, delta: Option<f64>) -> CliResult<StructureLabel> {
    match (structure, delta) {
        (StructureArg::Sh, Some(delta)) => Ok(StructureLabel::SH { delta }),
        (StructureArg::Sh, None) => usage("--structure sh needs --delta"),
        (_, Some(_)) => usage("--delta only applies to --structure sh"),
        (StructureArg::Sc, None) => Ok(StructureLabel::SC),
        (StructureArg::Fcc, None) => Ok(StructureLabel::FCC),
        (StructureArg::Bcc, None) => Ok(StructureLabel::BCC),
        (StructureArg::Hcp, None) => Ok(StructureLabel::HCP),
    }
}

fn cmd_zeta(label: StructureLabel, s: f64, volume: f64, route: RouteArg, radius: u32, exec: Execution) -> Result<Output> {
    if !(volume > 0.0) || !volume.is_finite() {
        return Err(Error::Domain(format!("volume must be positive, got {volume}")));
    }
    let unit: ZetaResult = match route {
        RouteArg::Closed => zeta_named(&label, s)?,
        RouteArg::Ewald => zeta_general(&named_structure(&label, 1.0)?, s)?,
        RouteArg::Direct => direct_sum_with(&named_structure(&label, 1.0)?, s, radius, exec)?.result(),
    };
    let k = volume.powf(-s / 3.0);
    let result = ZetaResult { value: unit.value * k, est_error: unit.est_error * k, route: unit.route };
    #[derive(Serialize)]
    struct Row {
        structure: StructureLabel,
        s: f64,
        volume: f64,
        #[serde(flatten)]
        result: ZetaResult,
    }
    let row = Row { structure: label, s, volume, result };
    let table = Table::new(&["structure", "s", "volume", "value", "est_error", "route"]).row(vec![
        Cell::Text(label.to_string()),
        Cell::Float(s),
        Cell::Float(volume),
        Cell::Float(result.value),
        Cell::Float(result.est_error),
        Cell::Text(route_name(result.route).into()),
    ]);
    Ok(Output::new(&row, table))
}

fn route_name(r: crate::zeta::Route) -> &'static str {
    match r {
        crate::zeta::Route::ClosedForm => "closed_form",
        crate::zeta::Route::Ewald => "ewald",
        crate::zeta::Route::Direct => "direct",
    }
}

fn cmd_lj(label: StructureLabel, e: &LJExponents, volume: Option<f64>) -> Result<Output> {
    let (volume, value, c) = match volume {
        Some(v) => {
            let ev = lj_energy_named(&label, e, v)?;
            (v, ev.value, ev.components)
        }
        None => {
            let opt = lj_optimal_volume_named(&label, e)?;
            (opt.volume, opt.energy, lj_components_named(&label, e)?)
        }
    };
    #[derive(Serialize)]
    struct Row {
        structure: StructureLabel,
        n: f64,
        m: f64,
        volume: f64,
        energy: f64,
        zeta_n: f64,
        zeta_m: f64,
    }
    let row = Row { structure: label, n: e.n(), m: e.m(), volume, energy: value, zeta_n: c.zeta_n, zeta_m: c.zeta_m };
    let table = Table::new(&["structure", "n", "m", "volume", "energy", "zeta_n", "zeta_m"]).row(vec![
        Cell::Text(label.to_string()),
        Cell::Float(row.n),
        Cell::Float(row.m),
        Cell::Float(volume),
        Cell::Float(value),
        Cell::Float(c.zeta_n),
        Cell::Float(c.zeta_m),
    ]);
    Ok(Output::new(&row, table))
}

fn report_output(r: &MinimizerReport) -> Output {
    let mut table = Table::new(&[
        "label",
        "kind",
        "energy",
        "volume",
        "u",
        "v",
        "x",
        "y",
        "z",
        "converged",
        "n_restarts_agreeing",
        "n_converged",
        "starts",
    ]);
    let p = |f: fn(&crate::lattice::LatticeParams) -> f64| r.params.as_ref().map_or(Cell::Empty, |p| Cell::Float(f(p)));
    table = table.row(vec![
        Cell::Text(r.label.to_string()),
        Cell::Text(r.label.kind_name().into()),
        Cell::Float(r.energy),
        Cell::Float(r.volume),
        p(|p| p.u),
        p(|p| p.v),
        p(|p| p.x),
        p(|p| p.y),
        p(|p| p.z),
        Cell::Text(r.converged.to_string()),
        Cell::Int(r.n_restarts_agreeing as i64),
        Cell::Int(r.n_converged as i64),
        Cell::Int(r.starts as i64),
    ]);
    Output::new(r, table)
}

fn records_output(rows: &[ScanRecord]) -> Output {
    let mut header: Vec<String> = Vec::new();
    if let Some(first) = rows.first() {
        header.extend(first.coords.names().map(String::from));
        header.extend(first.values.names().map(String::from));
    }
    header.push("label".into());
    header.push("kind".into());
    let mut table = Table { header, rows: Vec::with_capacity(rows.len()) };
    for r in rows {
        let mut cells: Vec<Cell> = r.coords.0.iter().chain(&r.values.0).map(|&(_, v)| Cell::Float(v)).collect();
        cells.push(r.label.map_or(Cell::Empty, |l| Cell::Text(l.to_string())));
        cells.push(r.label.map_or(Cell::Empty, |l| Cell::Text(l.kind_name().into())));
        table.rows.push(cells);
    }
    Output::new(&rows, table)
}

fn phase_output(cells: &[PhaseCell]) -> Output {
    let mut table =
        Table::new(&["n", "m", "volume", "winner", "kind", "delta", "energy", "margin", "cross_checked", "flagged"]);
    for c in cells {
        let delta = match c.winner {
            StructureLabel::SH { delta } => Cell::Float(delta),
            _ => Cell::Empty,
        };
        table = table.row(vec![
            Cell::Float(c.n),
            Cell::Float(c.m),
            Cell::Float(c.volume),
            Cell::Text(c.winner.to_string()),
            Cell::Text(c.winner.kind_name().into()),
            delta,
            Cell::Float(c.energy),
            if c.margin.is_finite() { Cell::Float(c.margin) } else { Cell::Empty },
            Cell::Text(c.cross_checked.to_string()),
            Cell::Text(c.flagged.to_string()),
        ]);
    }
    Output::new(&cells, table)
}

enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(t) => t.clone(),
            Cell::Empty => String::new(),
        }
    }
}

/// Seventeen significant digits, which round-trips every `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    fn row(mut self, cells: Vec<Cell>) -> Self {
        self.rows.push(cells);
        self
    }

    fn to_csv(&self) -> std::result::Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

struct Output {
    json: std::result::Result<String, serde_json::Error>,
    table: Table,
}

impl Output {
    fn new<T: Serialize + ?Sized>(value: &T, table: Table) -> Self {
        Self { json: serde_json::to_string_pretty(value).map(|s| s + "\n"), table }
    }

    fn render(self, format: Format) -> CliResult<String> {
        match format {
            Format::Json => Ok(self.json?),
            Format::Csv => self.table.to_csv(),
        }
    }
}
