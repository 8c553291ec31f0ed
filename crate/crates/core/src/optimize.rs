//! Multi-start minimization of lattice energies over the Grenier domain.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{
    lj_from_components, lj_optimal_volume_named, optimal_volume_from_components, Components,
    LJExponents,
};
use crate::error::{domain, Error, Result};
use crate::exec::Execution;
use crate::lattice::{
    classify, in_grenier_domain, in_grenier_domain_tol, lattice_from_params, named_params,
    LatticeParams, StructureLabel,
};
use crate::zeta::{zeta_general, zeta_named_cached, zeta_sh};

/// Boundary tolerance of the Grenier domain inside the objective.
pub const DOMAIN_TOL: f64 = 1e-9;
/// Classification tolerance for optimizer output.
pub const LABEL_TOL: f64 = 1e-4;
/// Default bracket of the SH ratio.
pub const SH_BRACKET: (f64, f64) = (0.3, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeConfig {
    pub starts: usize,
    pub max_iters: usize,
    pub x_tol: f64,
    pub f_tol: f64,
    pub seed: u64,
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    /// Add HCP as a fixed competitor (only its volume varies).
    pub include_hcp: bool,
    pub execution: Execution,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self {
            starts: 64,
            max_iters: 500,
            x_tol: 1e-10,
            f_tol: 1e-12,
            seed: 0,
            u_range: (0.05, 4.0),
            v_range: (0.05, 4.0),
            include_hcp: false,
            execution: Execution::default(),
        }
    }
}

impl MinimizeConfig {
    fn validate(&self) -> Result<()> {
        if self.starts == 0 || self.max_iters == 0 {
            return domain("starts and max_iters must be positive");
        }
        let ok = |r: (f64, f64)| r.0 > 0.0 && r.1 > r.0 && r.1.is_finite();
        if !ok(self.u_range) || !ok(self.v_range) {
            return domain("box ranges must satisfy 0 < lo < hi");
        }
        if !(self.x_tol > 0.0 && self.f_tol > 0.0) {
            return domain("tolerances must be positive");
        }
        Ok(())
    }

    fn lower(&self) -> [f64; 5] {
        [self.u_range.0, self.v_range.0, 0.0, 0.0, 0.0]
    }

    fn upper(&self) -> [f64; 5] {
        [self.u_range.1, self.v_range.1, 0.5, 1.0, 0.5]
    }
}

/// Energy functional to minimize at fixed covolume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Riesz { s: f64 },
    LennardJones { exponents: LJExponents },
}

impl Objective {
    /// Energy of the lattice `p` at its covolume (Ewald route, uncached).
    pub fn lattice_energy(&self, p: &LatticeParams) -> Result<f64> {
        let unit = lattice_from_params(&p.with_volume(1.0))?;
        match self {
            Objective::Riesz { s } => Ok(zeta_general(&unit, *s)?.value * p.volume.powf(-s / 3.0)),
            Objective::LennardJones { exponents: e } => {
                let c = Components {
                    zeta_n: zeta_general(&unit, e.n())?.value,
                    zeta_m: zeta_general(&unit, e.m())?.value,
                };
                Ok(lj_from_components(c, e, p.volume)?.value)
            }
        }
    }

    /// Energy of a named structure at covolume `volume` (closed forms).
    pub fn named_energy(&self, label: &StructureLabel, volume: f64) -> Result<f64> {
        match self {
            Objective::Riesz { s } => Ok(zeta_named_cached(label, *s)?.value * volume.powf(-s / 3.0)),
            Objective::LennardJones { exponents: e } => {
                let c = Components {
                    zeta_n: zeta_named_cached(label, e.n())?.value,
                    zeta_m: zeta_named_cached(label, e.m())?.value,
                };
                Ok(lj_from_components(c, e, volume)?.value)
            }
        }
    }

    /// SH energy without touching the shared cache (used inside 1D searches).
    fn sh_energy(&self, delta: f64, volume: f64) -> Result<f64> {
        match self {
            Objective::Riesz { s } => Ok(zeta_sh(*s, delta)?.value * volume.powf(-s / 3.0)),
            Objective::LennardJones { exponents: e } => {
                let c = Components { zeta_n: zeta_sh(e.n(), delta)?.value, zeta_m: zeta_sh(e.m(), delta)?.value };
                Ok(lj_from_components(c, e, volume)?.value)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizerReport {
    /// Grenier coordinates of the minimizer; `None` when the winner is HCP.
    pub params: Option<LatticeParams>,
    pub volume: f64,
    pub energy: f64,
    pub label: StructureLabel,
    pub converged: bool,
    pub n_restarts_agreeing: usize,
    pub n_converged: usize,
    pub starts: usize,
    pub notes: Vec<String>,
}

// --- Nelder-Mead -------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Simplex<const D: usize> {
    x: [f64; D],
    f: f64,
    evaluations: usize,
    converged: bool,
}

fn clamp<const D: usize>(x: [f64; D], lo: &[f64; D], hi: &[f64; D]) -> [f64; D] {
    let mut out = x;
    for i in 0..D {
        out[i] = out[i].clamp(lo[i], hi[i]);
    }
    out
}

/// Nelder-Mead with dimension-adapted coefficients and projection onto the
/// box `[lo, hi]`. Stops when the spread of simplex values is below `f_tol`
/// (relative to `max(1, |f|)`) and the diameter is below `x_tol`, or below
/// `sqrt(x_tol)` once values have stopped changing: at that scale the
/// differences of a smooth objective are rounding noise.
fn nelder_mead<const D: usize, F: Fn(&[f64; D]) -> f64>(
    f: &F,
    x0: [f64; D],
    step: [f64; D],
    lo: &[f64; D],
    hi: &[f64; D],
    max_iters: usize,
    x_tol: f64,
    f_tol: f64,
) -> Simplex<D> {
    let n = D as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / n, 0.75 - 0.5 / n, 1.0 - 1.0 / n);
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64; D]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let x0 = clamp(x0, lo, hi);
    let mut pts: Vec<([f64; D], f64)> = Vec::with_capacity(D + 1);
    pts.push((x0, eval(&x0)));
    for i in 0..D {
        let mut x = x0;
        x[i] = if x0[i] + step[i] <= hi[i] { x0[i] + step[i] } else { x0[i] - step[i] };
        let x = clamp(x, lo, hi);
        pts.push((x, eval(&x)));
    }
    let mut converged = false;
    for _ in 0..max_iters {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = pts[0].1;
        let worst = pts[D].1;
        let scale = best.abs().max(1.0);
        let diameter = pts[1..]
            .iter()
            .map(|(x, _)| (0..D).map(|i| (x[i] - pts[0].0[i]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let flat = best.is_finite() && worst - best <= f_tol * scale;
        if flat && diameter <= x_tol.max(x_tol.sqrt()) {
            converged = true;
            break;
        }
        if diameter == 0.0 {
            break;
        }
        let mut centroid = [0.0; D];
        for (x, _) in &pts[..D] {
            for i in 0..D {
                centroid[i] += x[i] / n;
            }
        }
        let along = |t: f64| {
            let mut y = [0.0; D];
            for i in 0..D {
                y[i] = centroid[i] + t * (pts[D].0[i] - centroid[i]);
            }
            clamp(y, lo, hi)
        };
        let xr = along(-alpha);
        let fr = eval(&xr);
        if fr < pts[0].1 {
            let xe = along(-alpha * beta);
            let fe = eval(&xe);
            pts[D] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < pts[D - 1].1 {
            pts[D] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < pts[D].1 {
            let xc = along(-alpha * gamma);
            (xc, eval(&xc))
        } else {
            let xc = along(gamma);
            (xc, eval(&xc))
        };
        if fc < pts[D].1.min(fr) {
            pts[D] = (xc, fc);
            continue;
        }
        let x_best = pts[0].0;
        for p in pts.iter_mut().skip(1) {
            let mut y = [0.0; D];
            for i in 0..D {
                y[i] = x_best[i] + delta * (p.0[i] - x_best[i]);
            }
            let y = clamp(y, lo, hi);
            *p = (y, eval(&y));
        }
    }
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    Simplex { x: pts[0].0, f: pts[0].1, evaluations, converged }
}

/// Local search with restarts from the incumbent until it stops improving.
fn local_search<const D: usize, F: Fn(&[f64; D]) -> f64>(
    f: &F,
    x0: [f64; D],
    lo: &[f64; D],
    hi: &[f64; D],
    cfg: &MinimizeConfig,
) -> Simplex<D> {
    let mut step = [0.0; D];
    for i in 0..D {
        step[i] = 0.08 * (hi[i] - lo[i]).min(1.0);
    }
    let mut best = nelder_mead(f, x0, step, lo, hi, cfg.max_iters, cfg.x_tol, cfg.f_tol);
    for _ in 0..4 {
        let small = step.map(|s| 0.1 * s);
        let next = nelder_mead(f, best.x, small, lo, hi, cfg.max_iters, cfg.x_tol, cfg.f_tol);
        let improved = next.f < best.f - cfg.f_tol * best.f.abs().max(1.0);
        let evaluations = best.evaluations + next.evaluations;
        if next.f <= best.f {
            best = Simplex { evaluations, ..next };
        } else {
            best.evaluations = evaluations;
            best.converged = best.converged && next.converged;
        }
        if !improved {
            break;
        }
    }
    best
}

// --- start points ----------------------------------------------------------------

const HALTON_BASES: [u64; 6] = [2, 3, 5, 7, 11, 13];

/// Halton sequence with seeded random digit permutations (zero kept fixed) and
/// a seeded index offset.
pub struct ScrambledHalton {
    perms: Vec<Vec<u64>>,
    index: u64,
    dim: usize,
}

impl ScrambledHalton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= HALTON_BASES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perms = HALTON_BASES[..dim]
            .iter()
            .map(|&b| {
                let mut p: Vec<u64> = (1..b).collect();
                p.shuffle(&mut rng);
                let mut full = vec![0];
                full.extend(p);
                full
            })
            .collect();
        let index = rng.gen_range(1..1000);
        Self { perms, index, dim }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        (0..self.dim)
            .map(|k| {
                let b = HALTON_BASES[k];
                let (mut n, mut f, mut x) = (i, 1.0 / b as f64, 0.0);
                while n > 0 {
                    x += f * self.perms[k][(n % b) as usize] as f64;
                    n /= b;
                    f /= b as f64;
                }
                x
            })
            .collect()
    }
}

fn start_points(cfg: &MinimizeConfig) -> Vec<[f64; 5]> {
    let lo = cfg.lower();
    let hi = cfg.upper();
    let mut seq = ScrambledHalton::new(5, cfg.seed);
    let mut out = Vec::with_capacity(cfg.starts);
    for _ in 0..200_000 {
        if out.len() == cfg.starts {
            break;
        }
        let q = seq.next_point();
        let x: [f64; 5] = std::array::from_fn(|i| lo[i] + (hi[i] - lo[i]) * q[i]);
        if in_grenier_domain(&LatticeParams::from_shape(x, 1.0)).inside {
            out.push(x);
        }
    }
    out
}

fn seed_labels() -> Vec<StructureLabel> {
    vec![
        StructureLabel::FCC,
        StructureLabel::BCC,
        StructureLabel::SC,
        StructureLabel::SH { delta: 1.0 },
        StructureLabel::SH { delta: (8.0f64 / 3.0).sqrt() },
    ]
}

// --- fixed volume ---------------------------------------------------------------

struct RunOutcome {
    shape: [f64; 5],
    energy: f64,
    label: StructureLabel,
    converged: bool,
}

fn domain_penalized<F: Fn(&LatticeParams) -> Result<f64>>(energy: &F, x: &[f64; 5], volume: f64) -> f64 {
    let p = LatticeParams::from_shape(*x, volume);
    if !in_grenier_domain_tol(&p, DOMAIN_TOL).inside {
        return f64::INFINITY;
    }
    energy(&p).unwrap_or(f64::INFINITY)
}

/// Shape-space radius within which a stalled search is compared against the
/// nearest named structure.
pub const SNAP_RADIUS: f64 = 0.02;

fn refine_sh(obj: &Objective, delta: f64, volume: f64, width: f64) -> StructureLabel {
    let f = |d| obj.sh_energy(d, volume).unwrap_or(f64::INFINITY);
    let refined = golden_min(f, delta * (1.0 - width), delta * (1.0 + width), 1e-9);
    StructureLabel::SH { delta: refined.0 }
}

/// Named structures whose Grenier coordinates lie within [`SNAP_RADIUS`] of `shape`.
fn nearby_named(obj: &Objective, shape: &[f64; 5], volume: f64) -> Vec<StructureLabel> {
    let mut labels = vec![StructureLabel::FCC, StructureLabel::BCC, StructureLabel::SC];
    // both SH charts: u = (3 delta^2 / 2)^{1/3} when delta >= 1, v = 1/delta otherwise
    let tall = (shape[0].powi(3) / 1.5).sqrt();
    if tall >= 1.0 {
        labels.push(refine_sh(obj, tall, volume, 0.05));
    }
    let flat = 1.0 / shape[1];
    if flat > 0.0 && flat < 1.0 {
        labels.push(refine_sh(obj, flat, volume, 0.05));
    }
    labels.retain(|l| {
        named_params(l, 1.0).is_some_and(|p| {
            p.shape().iter().zip(shape).enumerate().all(|(i, (a, b))| {
                // y = 0 and y = 1 describe the same lattices
                let d = (a - b).abs();
                (if i == 3 { d.min(1.0 - d) } else { d }) < SNAP_RADIUS
            })
        })
    });
    labels
}

/// Replace a local minimum by the exact named structure it approximates when
/// that is no worse: first by classification, then by proximity in shape space.
fn snap_to_named(
    obj: &Objective,
    shape: [f64; 5],
    energy: f64,
    volume: f64,
) -> ([f64; 5], f64, StructureLabel) {
    let ps = match lattice_from_params(&LatticeParams::from_shape(shape, 1.0)) {
        Ok(ps) => ps,
        Err(_) => return (shape, energy, StructureLabel::OTHER),
    };
    let mut candidates = Vec::new();
    match classify(&ps, LABEL_TOL) {
        StructureLabel::SH { delta } => candidates.push(refine_sh(obj, delta, volume, 0.02)),
        StructureLabel::OTHER => {}
        l => candidates.push(l),
    }
    candidates.extend(nearby_named(obj, &shape, volume));
    let slack = 1e-9 * energy.abs().max(1.0);
    let mut best = (shape, energy, StructureLabel::OTHER);
    for label in candidates {
        let Some(p) = named_params(&label, volume) else { continue };
        let e = match label {
            StructureLabel::SH { delta } => obj.sh_energy(delta, volume),
            _ => obj.named_energy(&label, volume),
        };
        match e {
            Ok(e) if e <= energy + slack && (!best.2.is_named() || e < best.1) => best = (p.shape(), e, label),
            _ => {}
        }
    }
    best
}

fn agreeing(runs: &[RunOutcome], best: f64, f_tol: f64) -> (usize, usize) {
    let tol = f_tol * best.abs().max(1.0);
    let conv: Vec<&RunOutcome> = runs.iter().filter(|r| r.converged).collect();
    let agree = conv.iter().filter(|r| (r.energy - best).abs() <= tol).count();
    (agree, conv.len())
}

/// Minimize `obj` over lattices of covolume `volume`.
pub fn minimize_fixed_volume(obj: &Objective, volume: f64, cfg: &MinimizeConfig) -> Result<MinimizerReport> {
    cfg.validate()?;
    if !(volume > 0.0) || !volume.is_finite() {
        return domain(format!("covolume must be positive, got {volume}"));
    }
    let lo = cfg.lower();
    let hi = cfg.upper();
    let mut starts: Vec<[f64; 5]> =
        seed_labels().iter().filter_map(|l| named_params(l, 1.0)).map(|p| p.shape()).collect();
    starts.extend(start_points(cfg));
    let energy = |p: &LatticeParams| obj.lattice_energy(p);
    let runs: Vec<RunOutcome> = cfg.execution.map(starts, |x0| {
        let f = |x: &[f64; 5]| domain_penalized(&energy, x, volume);
        let run = local_search(&f, x0, &lo, &hi, cfg);
        if !run.f.is_finite() {
            return RunOutcome { shape: run.x, energy: f64::INFINITY, label: StructureLabel::OTHER, converged: false };
        }
        let (shape, e, label) = snap_to_named(obj, run.x, run.f, volume);
        RunOutcome { shape, energy: e, label, converged: run.converged }
    });
    finish_report(obj, runs, volume, cfg, None)
}

fn finish_report(
    obj: &Objective,
    runs: Vec<RunOutcome>,
    volume: f64,
    cfg: &MinimizeConfig,
    hcp_energy: Option<f64>,
) -> Result<MinimizerReport> {
    let n_runs = runs.len();
    if runs.iter().all(|r| !r.converged) {
        return Err(Error::NonConvergence(format!("none of the {n_runs} local searches converged")));
    }
    // deterministic reduction: lowest energy, earliest index on exact ties
    let best_idx = (0..n_runs)
        .filter(|&i| runs[i].energy.is_finite())
        .min_by(|&a, &b| runs[a].energy.total_cmp(&runs[b].energy).then(a.cmp(&b)))
        .ok_or_else(|| Error::NonConvergence("no finite local minimum".into()))?;
    let best = &runs[best_idx];
    let mut notes = Vec::new();
    let (agree, n_conv) = agreeing(&runs, best.energy, cfg.f_tol);
    let mut report = MinimizerReport {
        params: Some(LatticeParams::from_shape(best.shape, volume)),
        volume,
        energy: best.energy,
        label: best.label,
        converged: best.converged,
        n_restarts_agreeing: agree,
        n_converged: n_conv,
        starts: n_runs,
        notes: Vec::new(),
    };

    // named competitors, including the best SH ratio and HCP when requested
    let mut candidates: Vec<(StructureLabel, f64)> = Vec::new();
    for l in [StructureLabel::FCC, StructureLabel::BCC, StructureLabel::SC] {
        if let Ok(e) = obj.named_energy(&l, volume) {
            candidates.push((l, e));
        }
    }
    match sh_argmin(obj, volume, SH_BRACKET) {
        Ok((d, e)) => candidates.push((StructureLabel::SH { delta: d }, e)),
        Err(err) => notes.push(format!("SH candidate skipped: {err}")),
    }
    let hcp = match hcp_energy {
        Some(e) => Some(e),
        None if cfg.include_hcp => obj.named_energy(&StructureLabel::HCP, volume).ok(),
        None => None,
    };
    if let Some(e) = hcp {
        candidates.push((StructureLabel::HCP, e));
    }
    let tie = cfg.f_tol * report.energy.abs().max(1.0);
    for (label, e) in &candidates {
        if *e < report.energy - tie {
            notes.push(format!("named candidate {label} ({e}) improved on local search ({})", report.energy));
            report.energy = *e;
            report.label = *label;
            report.params = named_params(label, volume);
        }
    }
    for (label, e) in &candidates {
        if (e - report.energy).abs() <= tie && !label.same_kind(&report.label) && report.label.is_named() {
            notes.push(format!("tie within f_tol between {} and {label}", report.label));
        }
    }
    report.notes = notes;
    Ok(report)
}

// --- global (volume free) ----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Lattices only.
    Lattices,
    /// Lattices plus the HCP periodic set.
    LatticesAndHcp,
}

fn unit_components(shape: &[f64; 5], e: &LJExponents) -> Result<Components> {
    let unit = lattice_from_params(&LatticeParams::from_shape(*shape, 1.0))?;
    Ok(Components { zeta_n: zeta_general(&unit, e.n())?.value, zeta_m: zeta_general(&unit, e.m())?.value })
}

/// Minimize the Lennard-Jones energy over shape and volume jointly.
pub fn minimize_global(e: &LJExponents, cfg: &MinimizeConfig, family: Family) -> Result<MinimizerReport> {
    cfg.validate()?;
    if e.m() <= 3.0 {
        return domain(format!("global minimization needs n > m > 3, got m = {}", e.m()));
    }
    let lo = cfg.lower();
    let hi = cfg.upper();
    let obj = Objective::LennardJones { exponents: *e };
    let reduced = |x: &[f64; 5]| -> f64 {
        if !in_grenier_domain_tol(&LatticeParams::from_shape(*x, 1.0), DOMAIN_TOL).inside {
            return f64::INFINITY;
        }
        unit_components(x, e)
            .and_then(|c| optimal_volume_from_components(c, e))
            .map(|o| o.energy)
            .unwrap_or(f64::INFINITY)
    };
    let mut starts: Vec<[f64; 5]> =
        seed_labels().iter().filter_map(|l| named_params(l, 1.0)).map(|p| p.shape()).collect();
    starts.extend(start_points(cfg));
    let runs: Vec<(Simplex<5>, RunOutcome)> = cfg.execution.map(starts, |x0| {
        let run = local_search(&reduced, x0, &lo, &hi, cfg);
        let outcome = match unit_components(&run.x, e).and_then(|c| optimal_volume_from_components(c, e)) {
            Ok(opt) if run.f.is_finite() => {
                let (shape, energy, label) = snap_to_named(&obj, run.x, run.f, opt.volume);
                // snapping happened at the lattice's own optimal volume; re-optimize V
                let energy = match label {
                    StructureLabel::OTHER => energy,
                    StructureLabel::SH { delta } => sh_optimal(e, delta).map(|o| o.energy).unwrap_or(energy),
                    l => lj_optimal_volume_named(&l, e).map(|o| o.energy).unwrap_or(energy),
                };
                RunOutcome { shape, energy, label, converged: run.converged }
            }
            _ => RunOutcome { shape: run.x, energy: f64::INFINITY, label: StructureLabel::OTHER, converged: false },
        };
        (run, outcome)
    });
    let outcomes: Vec<RunOutcome> = runs.into_iter().map(|(_, o)| o).collect();
    if outcomes.iter().all(|r| !r.converged) {
        return Err(Error::NonConvergence("no local search converged".into()));
    }
    let best_idx = (0..outcomes.len())
        .filter(|&i| outcomes[i].energy.is_finite())
        .min_by(|&a, &b| outcomes[a].energy.total_cmp(&outcomes[b].energy).then(a.cmp(&b)))
        .ok_or_else(|| Error::NonConvergence("no finite local minimum".into()))?;
    let best = &outcomes[best_idx];
    let (agree, n_conv) = agreeing(&outcomes, best.energy, cfg.f_tol);
    let mut notes = Vec::new();

    // joint polish over (shape, ln V) around the reduced optimum
    let best_components = unit_components(&best.shape, e)?;
    let v_star = optimal_volume_from_components(best_components, e)?.volume;
    let mut shape = best.shape;
    let mut energy = best.energy;
    let mut volume = v_star;
    if !best.label.is_named() {
        let joint = |x: &[f64; 6]| -> f64 {
            let s5 = [x[0], x[1], x[2], x[3], x[4]];
            let p = LatticeParams::from_shape(s5, x[5].exp());
            if !in_grenier_domain_tol(&p, DOMAIN_TOL).inside {
                return f64::INFINITY;
            }
            obj.lattice_energy(&p).unwrap_or(f64::INFINITY)
        };
        let lo6 = [lo[0], lo[1], lo[2], lo[3], lo[4], (v_star * 0.5).ln()];
        let hi6 = [hi[0], hi[1], hi[2], hi[3], hi[4], (v_star * 2.0).ln()];
        let x0 = [shape[0], shape[1], shape[2], shape[3], shape[4], v_star.ln()];
        let step = [1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 1e-3];
        let polished = nelder_mead(&joint, x0, step, &lo6, &hi6, cfg.max_iters, cfg.x_tol, cfg.f_tol);
        if polished.f < energy {
            notes.push(format!("joint polish lowered energy by {:e}", energy - polished.f));
            shape = [polished.x[0], polished.x[1], polished.x[2], polished.x[3], polished.x[4]];
            energy = polished.f;
            volume = polished.x[5].exp();
        }
    } else {
        volume = match best.label {
            StructureLabel::SH { delta } => sh_optimal(e, delta)?.volume,
            l => lj_optimal_volume_named(&l, e)?.volume,
        };
    }
    let mut report = MinimizerReport {
        params: Some(LatticeParams::from_shape(shape, volume)),
        volume,
        energy,
        label: best.label,
        converged: best.converged,
        n_restarts_agreeing: agree,
        n_converged: n_conv,
        starts: outcomes.len(),
        notes,
    };
    let tie = cfg.f_tol * energy.abs().max(1.0);
    let mut candidates = Vec::new();
    for l in [StructureLabel::FCC, StructureLabel::BCC, StructureLabel::SC] {
        candidates.push((l, lj_optimal_volume_named(&l, e)?));
    }
    if family == Family::LatticesAndHcp || cfg.include_hcp {
        candidates.push((StructureLabel::HCP, lj_optimal_volume_named(&StructureLabel::HCP, e)?));
    }
    for (label, opt) in &candidates {
        if opt.energy < report.energy - tie {
            report.notes.push(format!("{label} at its optimal volume ({}) beats the lattice search", opt.energy));
            report.energy = opt.energy;
            report.volume = opt.volume;
            report.label = *label;
            report.params = named_params(label, opt.volume);
        } else if (opt.energy - report.energy).abs() <= tie && !label.same_kind(&report.label) {
            report.notes.push(format!("tie within f_tol between {} and {label}", report.label));
        }
    }
    Ok(report)
}

fn sh_optimal(e: &LJExponents, delta: f64) -> Result<crate::energy::OptimalVolume> {
    let c = Components { zeta_n: zeta_sh(e.n(), delta)?.value, zeta_m: zeta_sh(e.m(), delta)?.value };
    optimal_volume_from_components(c, e)
}

// --- SH ratio ----------------------------------------------------------------------

/// Golden-section search on `[a, b]` in `ln(delta)`, finished by one parabolic
/// step through three points around the incumbent.
fn golden_min<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a.ln(), b.ln());
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1.exp());
    let mut f2 = f(x2.exp());
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1.exp());
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2.exp());
        }
    }
    let (mut x, mut fx) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    let h = 1e-4;
    if x - h > a.ln() && x + h < b.ln() {
        let fm = f((x - h).exp());
        let fp = f((x + h).exp());
        let curv = fp - 2.0 * fx + fm;
        if curv > 0.0 {
            let xp = x - 0.5 * h * (fp - fm) / curv;
            if (xp - x).abs() < h {
                let fxp = f(xp.exp());
                if fxp <= fx {
                    x = xp;
                    fx = fxp;
                }
            }
        }
    }
    (x.exp(), fx)
}

fn sh_argmin(obj: &Objective, volume: f64, bracket: (f64, f64)) -> Result<(f64, f64)> {
    let f = |d: f64| obj.sh_energy(d, volume).unwrap_or(f64::INFINITY);
    let at_edge = |d: f64, (a, b): (f64, f64)| (d / a).ln() < 1e-6 || (b / d).ln() < 1e-6;
    let (d, e) = golden_min(f, bracket.0, bracket.1, 1e-10);
    if !at_edge(d, bracket) {
        return Ok((d, e));
    }
    let wide = (bracket.0 / 2.0, bracket.1 * 2.0);
    let (d, e) = golden_min(f, wide.0, wide.1, 1e-10);
    if at_edge(d, wide) {
        return Err(Error::Bracket(format!(
            "SH ratio minimum sits at the edge of [{}, {}] (delta = {d})",
            wide.0, wide.1
        )));
    }
    Ok((d, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShDelta {
    pub delta: f64,
    pub energy: f64,
}

/// Best SH ratio for the Lennard-Jones energy at covolume `volume`.
pub fn minimize_sh_delta(e: &LJExponents, volume: f64) -> Result<ShDelta> {
    if !(volume > 0.0) || !volume.is_finite() {
        return domain(format!("covolume must be positive, got {volume}"));
    }
    let (delta, energy) = sh_argmin(&Objective::LennardJones { exponents: *e }, volume, SH_BRACKET)?;
    Ok(ShDelta { delta, energy })
}

/// Best SH ratio for any objective, at covolume `volume`.
pub fn minimize_sh_delta_for(obj: &Objective, volume: f64) -> Result<ShDelta> {
    let (delta, energy) = sh_argmin(obj, volume, SH_BRACKET)?;
    Ok(ShDelta { delta, energy })
}
