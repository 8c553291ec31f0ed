//! Parameter sweeps behind the difference curves, phase diagrams and SH ratio plots.

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::energy::LJExponents;
use crate::error::{domain, Result};
use crate::exec::Execution;
use crate::lattice::StructureLabel;
use crate::optimize::{minimize_fixed_volume, minimize_sh_delta, MinimizeConfig, Objective};
use crate::zeta::{zeta_named_cached, POLE_GUARD};

/// Flagging threshold between the optimizer and the candidate comparison.
pub const CROSS_CHECK_TOL: f64 = 1e-8;
/// Ratio jump between adjacent volumes reported as a discontinuity.
pub const DELTA_JUMP: f64 = 0.1;

/// Ordered `name -> value` pairs, serialized as a map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fields(pub Vec<(String, f64)>);

impl Fields {
    pub fn push(&mut self, name: &str, value: f64) {
        self.0.push((name.to_string(), value));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(k, _)| k.as_str())
    }
}

impl Serialize for Fields {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRecord {
    pub coords: Fields,
    pub values: Fields,
    pub label: Option<StructureLabel>,
}

/// Winner of one cell of a phase diagram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCell {
    pub n: f64,
    pub m: f64,
    pub volume: f64,
    pub winner: StructureLabel,
    pub energy: f64,
    /// Energy gap to the runner-up.
    pub margin: f64,
    pub cross_checked: bool,
    /// Optimizer and candidate comparison disagree.
    pub flagged: bool,
}

fn strictly_ascending(grid: &[f64], what: &str) -> Result<()> {
    if grid.iter().any(|x| !x.is_finite()) {
        return domain(format!("{what} grid contains a non-finite value"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return domain(format!("{what} grid must be strictly ascending"));
    }
    Ok(())
}

/// `lo, lo + step, ...` up to `hi` (inclusive within a hundredth of a step),
/// rounded to 12 decimals so that decimal steps land on their decimal values.
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 0.01).floor() as i64;
    (0..=count).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect()
}

/// `count` evenly spaced points on `[lo, hi]`.
pub fn even_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Preset s-ranges of the Riesz difference curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RieszRange {
    /// s in [0, 3], step 0.01.
    Short,
    /// s in [-7, 20], step 0.05.
    Wide,
    /// s in [-11, 0), step 0.02.
    Negative,
}

impl RieszRange {
    pub fn grid(self) -> Vec<f64> {
        match self {
            RieszRange::Short => linear_grid(0.0, 3.0, 0.01),
            RieszRange::Wide => linear_grid(-7.0, 20.0, 0.05),
            RieszRange::Negative => {
                let mut g = linear_grid(-11.0, 0.0, 0.02);
                g.pop();
                g
            }
        }
    }
}

/// `ζ_FCC − ζ_BCC` and `ζ_HCP − min(ζ_FCC, ζ_BCC)` at unit density along `grid`.
///
/// Points inside the pole band around `s = 3` or with a non-finite value are
/// dropped and logged.
pub fn scan_riesz_difference(grid: &[f64], exec: Execution) -> Result<Vec<ScanRecord>> {
    strictly_ascending(grid, "s")?;
    let rows = exec.map(grid.to_vec(), |s| -> Option<ScanRecord> {
        if (s - 3.0).abs() < POLE_GUARD {
            log::info!("event=skip s={s} reason=pole_band");
            return None;
        }
        let z = |l: StructureLabel| zeta_named_cached(&l, s).map(|r| r.value);
        let (fcc, bcc, hcp) = match (z(StructureLabel::FCC), z(StructureLabel::BCC), z(StructureLabel::HCP)) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            _ => {
                log::warn!("event=skip s={s} reason=evaluation_error");
                return None;
            }
        };
        let mut values = Fields::default();
        values.push("zeta_fcc", fcc);
        values.push("zeta_bcc", bcc);
        values.push("zeta_hcp", hcp);
        values.push("fcc_minus_bcc", fcc - bcc);
        values.push("hcp_minus_min", hcp - fcc.min(bcc));
        if values.0.iter().any(|(_, v)| !v.is_finite()) {
            log::warn!("event=skip s={s} reason=non_finite");
            return None;
        }
        let label = if fcc < bcc { StructureLabel::FCC } else { StructureLabel::BCC };
        Some(ScanRecord { coords: Fields(vec![("s".into(), s)]), values, label: Some(label) })
    });
    Ok(rows.into_iter().flatten().collect())
}

/// Settings of a phase sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOptions {
    pub include_hcp: bool,
    /// Cross-check every k-th cell with the 5-parameter optimizer (0 disables).
    pub cross_check_every: usize,
    pub minimize: MinimizeConfig,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self { include_hcp: true, cross_check_every: 5, minimize: MinimizeConfig::default() }
    }
}

/// Candidate energies at one cell, lowest first.
pub fn phase_candidates(e: &LJExponents, volume: f64, include_hcp: bool) -> Result<Vec<(StructureLabel, f64)>> {
    let obj = Objective::LennardJones { exponents: *e };
    let mut out = Vec::with_capacity(5);
    let mut labels = vec![StructureLabel::FCC, StructureLabel::BCC, StructureLabel::SC];
    if include_hcp {
        labels.push(StructureLabel::HCP);
    }
    for l in labels {
        out.push((l, obj.named_energy(&l, volume)?));
    }
    match minimize_sh_delta(e, volume) {
        Ok(sh) => out.push((StructureLabel::SH { delta: sh.delta }, sh.energy)),
        Err(err) => log::warn!("event=sh_skipped V={volume} reason=\"{err}\""),
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(out)
}

fn phase_cell(e: &LJExponents, volume: f64, opts: &PhaseOptions, check: bool) -> Result<PhaseCell> {
    let cands = phase_candidates(e, volume, opts.include_hcp)?;
    let (winner, energy) = cands[0];
    let margin = cands.get(1).map_or(f64::INFINITY, |c| c.1 - energy);
    let mut cell = PhaseCell {
        n: e.n(),
        m: e.m(),
        volume,
        winner,
        energy,
        margin,
        cross_checked: check,
        flagged: false,
    };
    if check {
        let cfg = MinimizeConfig { include_hcp: opts.include_hcp, ..opts.minimize };
        let report = minimize_fixed_volume(&Objective::LennardJones { exponents: *e }, volume, &cfg)?;
        let gap = energy - report.energy;
        if gap > CROSS_CHECK_TOL * energy.abs().max(1.0) || !report.label.same_kind(&winner) {
            log::warn!(
                "event=cross_check_mismatch n={} m={} V={volume} candidate={winner} optimizer={} gap={gap:e}",
                e.n(),
                e.m(),
                report.label
            );
            cell.flagged = true;
        }
    }
    Ok(cell)
}

/// Lennard-Jones phase diagram over `n_grid × v_grid` at fixed `m`, rows
/// ordered by `n` then `V`.
pub fn scan_lj_phase(
    m: f64,
    n_grid: &[f64],
    v_grid: &[f64],
    opts: &PhaseOptions,
) -> Result<Vec<PhaseCell>> {
    strictly_ascending(n_grid, "n")?;
    strictly_ascending(v_grid, "V")?;
    if v_grid.iter().any(|&v| v <= 0.0) {
        return domain("volumes must be positive");
    }
    let mut cells = Vec::with_capacity(n_grid.len() * v_grid.len());
    for &n in n_grid {
        let e = LJExponents::new(n, m)?;
        for (i, &v) in v_grid.iter().enumerate() {
            cells.push((e, i, v));
        }
    }
    let k = opts.cross_check_every;
    let exec = opts.minimize.execution;
    exec.map(cells, |(e, i, v)| phase_cell(&e, v, opts, k > 0 && i % k == 0)).into_iter().collect()
}

/// Optimal SH ratio along `v_grid`. Jumps larger than [`DELTA_JUMP`] between
/// neighbours are marked with `jump = 1`.
pub fn scan_delta_curve(e: &LJExponents, v_grid: &[f64], exec: Execution) -> Result<Vec<ScanRecord>> {
    strictly_ascending(v_grid, "V")?;
    if v_grid.first().is_some_and(|&v| v <= 0.0) {
        return domain("volumes must be positive");
    }
    let points: Vec<_> = exec.map(v_grid.to_vec(), |v| minimize_sh_delta(e, v)).into_iter().collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(points.len());
    let mut prev: Option<f64> = None;
    for (&v, p) in v_grid.iter().zip(&points) {
        let jump = prev.is_some_and(|d| (p.delta - d).abs() > DELTA_JUMP);
        if jump {
            log::info!("event=delta_jump V={v} from={} to={}", prev.unwrap_or(f64::NAN), p.delta);
        }
        prev = Some(p.delta);
        let mut values = Fields::default();
        values.push("delta", p.delta);
        values.push("energy", p.energy);
        values.push("jump", if jump { 1.0 } else { 0.0 });
        let coords = Fields(vec![("n".into(), e.n()), ("m".into(), e.m()), ("V".into(), v)]);
        out.push(ScanRecord { coords, values, label: Some(StructureLabel::SH { delta: p.delta }) });
    }
    Ok(out)
}

/// A change of minimizer between two volumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub volume: f64,
    pub from: StructureLabel,
    pub to: StructureLabel,
}

/// Refine every label change along an ascending `v_grid` by bisection of
/// `label_at`, down to an interval of width `tol`.
pub fn locate_transitions<F>(v_grid: &[f64], labels: &[StructureLabel], tol: f64, label_at: F) -> Result<Vec<Transition>>
where
    F: Fn(f64) -> Result<StructureLabel>,
{
    strictly_ascending(v_grid, "V")?;
    if v_grid.len() != labels.len() {
        return domain("label count does not match the grid");
    }
    let mut out = Vec::new();
    for i in 1..v_grid.len() {
        let (from, to) = (labels[i - 1], labels[i]);
        if from.same_kind(&to) {
            continue;
        }
        let (mut lo, mut hi) = (v_grid[i - 1], v_grid[i]);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if label_at(mid)?.same_kind(&from) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(Transition { volume: 0.5 * (lo + hi), from, to });
    }
    Ok(out)
}

/// Phase transitions along `v_grid`, using the candidate comparison.
pub fn phase_transitions(e: &LJExponents, v_grid: &[f64], include_hcp: bool, tol: f64, exec: Execution) -> Result<Vec<Transition>> {
    let winner = |v: f64| phase_candidates(e, v, include_hcp).map(|c| c[0].0);
    let labels: Vec<StructureLabel> = exec.map(v_grid.to_vec(), winner).into_iter().collect::<Result<_>>()?;
    locate_transitions(v_grid, &labels, tol, winner)
}
