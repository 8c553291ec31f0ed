//! Epstein zeta functions of lattices and periodic sets.
//!
//! All values use the per-point pair convention
//! `zeta(s) = 1/(2N) sum_{i,j} sum'_p |p + c_j - c_i|^{-s}` at unit volume per
//! point, continued analytically to every real `s != 3`.
//!
//! Continuations are written in completed form: with `Gamma(s/2) pi^{-s/2}
//! zeta(s) = B(s) - 1/s`, the value is assembled as
//! `pi^{s/2} [B(s) / Gamma(s/2) - 1 / (2 Gamma(1 + s/2))]`, which is regular at
//! `s = 0` (giving `zeta(0) = -1/2`) and at the trivial zeros.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};
use std::sync::OnceLock;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exec::{compensated_sum, Execution};
use crate::lattice::{for_each_lattice_point, named_structure, PeriodicSet, StructureLabel, Vec3};
use crate::quadrature::{gauss_legendre, integrate};
use crate::special::{
    ln_rel_shifted_theta, ln_shifted_theta, rgamma, theta4_raw, upper_gamma_raw,
};

/// Half-width of the excluded band around the pole at `s = 3`.
pub const POLE_GUARD: f64 = 1e-3;

const QUAD_ABS: f64 = 1e-14;
const QUAD_REL: f64 = 1e-13;
const QUAD_SEGMENTS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    ClosedForm,
    Ewald,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaResult {
    pub value: f64,
    pub est_error: f64,
    pub route: Route,
}

/// Exponent of the Riesz potential `r^{-s}`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RieszExponent(f64);

impl RieszExponent {
    /// Any finite `s` outside the pole guard band.
    pub fn continued(s: f64) -> Result<Self> {
        if !s.is_finite() {
            return domain(format!("exponent must be finite, got {s}"));
        }
        if (s - 3.0).abs() < POLE_GUARD {
            return Err(Error::Pole { s });
        }
        Ok(Self(s))
    }

    /// `s > 3`, where lattice sums converge absolutely.
    pub fn summable(s: f64) -> Result<Self> {
        if !s.is_finite() {
            return domain(format!("exponent must be finite, got {s}"));
        }
        if s <= 3.0 {
            return Err(Error::Divergent { s });
        }
        Ok(Self(s))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// `pi^{s/2} [bracket / Gamma(s/2) - 1 / (2 Gamma(1 + s/2))]`, with an error
/// estimate from the bracket error.
fn assemble(s: f64, bracket: f64, bracket_err: f64) -> (f64, f64) {
    let pref = (0.5 * s * PI.ln()).exp();
    let r = rgamma(0.5 * s);
    let value = pref * (r * bracket - 0.5 * rgamma(1.0 + 0.5 * s));
    let err = pref * r.abs() * bracket_err + 4.0 * f64::EPSILON * value.abs();
    (value, err)
}

fn tpow(t: f64, e: f64) -> f64 {
    (e * t.ln()).exp()
}

/// Assemble a theta-split continuation: `integrand` on `(0, 1]` already
/// contains the `1/(2t)` weight, `pole_weight` is `M/A`.
fn theta_split<F: Fn(f64) -> f64>(
    s: f64,
    integrand: F,
    pole_weight: f64,
    density_scale: f64,
) -> ZetaResult {
    let q = integrate(|t| if t > 0.0 { integrand(t) } else { 0.0 }, 0.0, 1.0, QUAD_ABS, QUAD_REL, QUAD_SEGMENTS);
    let pole = pole_weight / (3.0 - s);
    let bracket = q.value - pole;
    let bracket_err = q.abs_error + 4.0 * f64::EPSILON * (q.value.abs() + pole.abs());
    let (v, e) = assemble(s, bracket, bracket_err);
    let k = tpow(density_scale, s / 3.0);
    ZetaResult { value: v * k, est_error: e * k, route: Route::ClosedForm }
}

/// `1/(2t) [t^{s/2} + t^{(3-s)/2}] [theta3^3 - t^{-3/2}]`, the simple cubic part.
fn sc_part(s: f64, t: f64) -> f64 {
    let ex = (3.0 * ln_rel_shifted_theta(0.0, t)).exp_m1();
    if ex == 0.0 {
        return 0.0;
    }
    (tpow(t, 0.5 * s - 2.5) + tpow(t, -0.5 * s - 1.0)) * 0.5 * ex
}

/// Simple cubic lattice `Z^3` at unit density.
pub fn zeta_sc(s: f64) -> Result<ZetaResult> {
    let s = RieszExponent::continued(s)?.get();
    Ok(theta_split(s, |t| sc_part(s, t), 1.0, 1.0))
}

/// Body-centred cubic lattice at unit density.
pub fn zeta_bcc(s: f64) -> Result<ZetaResult> {
    let s = RieszExponent::continued(s)?.get();
    let f = |t: f64| {
        let ex2 = (3.0 * ln_rel_shifted_theta(0.5, t)).exp_m1();
        let th4 = theta4_raw(t);
        let body = tpow(t, 0.5 * s - 2.5) * ex2 + tpow(t, 0.5 * (3.0 - s) - 1.0) * th4 * th4 * th4;
        sc_part(s, t) + 0.5 * body
    };
    Ok(theta_split(s, f, 2.0, 0.5))
}

/// Face-centred cubic lattice at unit density.
pub fn zeta_fcc(s: f64) -> Result<ZetaResult> {
    let s = RieszExponent::continued(s)?.get();
    let f = |t: f64| {
        let l2 = ln_rel_shifted_theta(0.5, t);
        let l3 = ln_rel_shifted_theta(0.0, t);
        let ex = (2.0 * l2 + l3).exp_m1();
        let th4 = theta4_raw(t);
        let th3 = (l3 - 0.5 * t.ln()).exp();
        let face = tpow(t, 0.5 * s - 2.5) * ex + tpow(t, 0.5 * (3.0 - s) - 1.0) * th4 * th4 * th3;
        sc_part(s, t) + 1.5 * face
    };
    Ok(theta_split(s, f, 4.0, 0.25))
}

/// Orthorhombic cell with squared edge lengths `d` and fractional shifts,
/// the first of which is the origin.
#[derive(Debug, Clone)]
struct OrthoCell {
    d: [f64; 3],
    shifts: Vec<Vec3>,
}

impl OrthoCell {
    fn volume(&self) -> f64 {
        (self.d[0] * self.d[1] * self.d[2]).sqrt()
    }

    /// Theta-split integrand: the `t^{s/2}` side uses the Poisson-dual
    /// products minus their common asymptote, the `t^{-s/2}` side the direct
    /// shifted sums at `d/t`.
    fn integrand(&self, s: f64, t: f64) -> f64 {
        let a = self.volume();
        let mut near = 0.0;
        for phi in &self.shifts {
            let l: f64 = (0..3).map(|i| ln_rel_shifted_theta(phi[i], self.d[i] * t)).sum();
            near += l.exp_m1();
        }
        let near = if near == 0.0 { 0.0 } else { tpow(t, 0.5 * s - 2.5) * near / a };
        let l0: f64 = (0..3).map(|i| ln_shifted_theta(0.0, self.d[i] / t)).sum();
        let mut far = l0.exp_m1();
        for phi in &self.shifts[1..] {
            let l: f64 = (0..3).map(|i| ln_shifted_theta(phi[i], self.d[i] / t)).sum();
            far += l.exp();
        }
        let far = if far == 0.0 { 0.0 } else { tpow(t, -0.5 * s - 1.0) * far };
        0.5 * (near + far)
    }

    fn zeta(&self, s: f64) -> ZetaResult {
        let m = self.shifts.len() as f64;
        let a = self.volume();
        theta_split(s, |t| self.integrand(s, t), m / a, a / m)
    }
}

/// Simple hexagonal lattice with height-to-spacing ratio `delta`, unit density.
pub fn zeta_sh(s: f64, delta: f64) -> Result<ZetaResult> {
    let s = RieszExponent::continued(s)?.get();
    if !(delta > 0.0) || !delta.is_finite() {
        return domain(format!("SH ratio must be positive and finite, got {delta}"));
    }
    let cell = OrthoCell { d: [1.0, 3.0, delta * delta], shifts: vec![[0.0; 3], [0.5, 0.5, 0.0]] };
    Ok(cell.zeta(s))
}

/// Hexagonal close packing at unit density.
pub fn zeta_hcp(s: f64) -> Result<ZetaResult> {
    let s = RieszExponent::continued(s)?.get();
    let cell = OrthoCell {
        d: [1.0, 3.0, 8.0 / 3.0],
        shifts: vec![
            [0.0; 3],
            [0.5, 0.5, 0.0],
            [0.5, 1.0 / 6.0, 0.5],
            [0.0, 2.0 / 3.0, 0.5],
        ],
    };
    Ok(cell.zeta(s))
}

/// Closed-form value for a named structure at unit density.
pub fn zeta_named(label: &StructureLabel, s: f64) -> Result<ZetaResult> {
    match *label {
        StructureLabel::SC => zeta_sc(s),
        StructureLabel::FCC => zeta_fcc(s),
        StructureLabel::BCC => zeta_bcc(s),
        StructureLabel::SH { delta } => zeta_sh(s, delta),
        StructureLabel::HCP => zeta_hcp(s),
        StructureLabel::OTHER => domain("OTHER has no closed form"),
    }
}

// --- Ewald -----------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwaldOptions {
    /// Splitting parameter; defaults to `(volume per point)^{-2/3}`.
    pub alpha: Option<f64>,
    /// Both sums keep terms whose incomplete-gamma argument is below this.
    pub cutoff: f64,
}

impl Default for EwaldOptions {
    fn default() -> Self {
        Self { alpha: None, cutoff: 46.0 }
    }
}

/// Ewald-split evaluation for any periodic set, at its own density.
pub fn zeta_general(ps: &PeriodicSet, s: f64) -> Result<ZetaResult> {
    zeta_general_with(ps, s, &EwaldOptions::default())
}

pub fn zeta_general_with(ps: &PeriodicSet, s: f64, opts: &EwaldOptions) -> Result<ZetaResult> {
    let s = RieszExponent::continued(s)?.get();
    ps.basis.gram().cholesky()?;
    let recip = ps
        .basis
        .reciprocal()
        .ok_or_else(|| Error::InvalidPeriodicSet("basis is singular".into()))?;
    let n = ps.n_orbits() as f64;
    let cell = ps.cell_volume();
    let rho = n / cell;
    let alpha = match opts.alpha {
        Some(a) if a > 0.0 && a.is_finite() => a,
        Some(a) => return domain(format!("Ewald parameter must be positive, got {a}")),
        None => (cell / n).powf(-2.0 / 3.0),
    };
    let x_max = opts.cutoff;
    let a_dir = 0.5 * s;
    let a_rec = 0.5 * (3.0 - s);

    // p and -p give equal terms: on the diagonal keep half of the points,
    // off the diagonal keep the pairs i < j; both weighted by 2
    let mut direct = Vec::new();
    let r_max = (x_max / (PI * alpha)).sqrt();
    for (i, ci) in ps.shifts.iter().enumerate() {
        for cj in &ps.shifts[i..] {
            let d = [cj[0] - ci[0], cj[1] - ci[1], cj[2] - ci[2]];
            let diagonal = d == [0.0; 3];
            for_each_lattice_point(&ps.basis, d, r_max, |p, n| {
                if diagonal && !positive_half(n) {
                    return;
                }
                let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
                if r2 > 0.0 {
                    let y = PI * r2;
                    direct.push(2.0 * (-a_dir * y.ln()).exp() * upper_gamma_raw(a_dir, alpha * y));
                }
            });
        }
    }

    let mut reciprocal = Vec::new();
    let k_max = (x_max * alpha / PI).sqrt();
    for_each_lattice_point(&recip, [0.0; 3], k_max, |k, m| {
        if !positive_half(m) {
            return;
        }
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let (mut re, mut im) = (0.0, 0.0);
        for c in &ps.shifts {
            let phase = 2.0 * PI * (m[0] as f64 * c[0] + m[1] as f64 * c[1] + m[2] as f64 * c[2]);
            re += phase.cos();
            im += phase.sin();
        }
        let sk2 = re * re + im * im;
        if sk2 < 1e-20 {
            return;
        }
        let y = PI * k2;
        reciprocal.push(2.0 * sk2 * (-a_rec * y.ln()).exp() * upper_gamma_raw(a_rec, y / alpha));
    });

    let abs_scale: f64 = direct.iter().chain(&reciprocal).map(|v| v.abs()).sum();
    let g_direct = compensated_sum(direct) / (2.0 * n);
    let g_recip = compensated_sum(reciprocal) / (2.0 * n * cell);
    let zero_mode = rho * alpha.powf(0.5 * (s - 3.0)) / (3.0 - s);
    let bracket = g_direct + g_recip - zero_mode;

    // terms near the cutoff behave like alpha^a e^{-x} / x per point
    let truncation =
        50.0 * (alpha.powf(a_dir) + rho * alpha.powf(-a_rec)) * (-x_max).exp() * x_max.sqrt();
    let rounding = 8.0 * f64::EPSILON * (abs_scale / (2.0 * n) + zero_mode.abs());
    let pref = (0.5 * s * PI.ln()).exp();
    let r = rgamma(0.5 * s);
    let value = pref * (r * bracket - 0.5 * alpha.powf(0.5 * s) * rgamma(1.0 + 0.5 * s));
    let est_error = pref * r.abs() * (truncation + rounding) + 4.0 * f64::EPSILON * value.abs();
    Ok(ZetaResult { value, est_error, route: Route::Ewald })
}

/// Lexicographically positive integer vectors: one of each `{n, -n}` pair.
fn positive_half(n: [i64; 3]) -> bool {
    n[0] > 0 || (n[0] == 0 && (n[1] > 0 || (n[1] == 0 && n[2] > 0)))
}

// --- direct summation ------------------------------------------------------

/// Truncated lattice sum over index coordinates in `[-radius, radius]^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectSum {
    /// `raw + tail_correction`.
    pub value: f64,
    /// The plain truncated sum.
    pub raw: f64,
    /// Continuum estimate of everything outside the cube, including the
    /// second-order midpoint correction.
    pub tail_correction: f64,
    /// Size of the next correction term, `O(radius^{1-s})`.
    pub tail_bound: f64,
    pub radius: u32,
}

impl DirectSum {
    pub fn result(&self) -> ZetaResult {
        ZetaResult { value: self.value, est_error: self.tail_bound, route: Route::Direct }
    }
}

pub fn direct_sum(ps: &PeriodicSet, s: f64, radius: u32) -> Result<DirectSum> {
    direct_sum_with(ps, s, radius, Execution::default())
}

pub fn direct_sum_with(ps: &PeriodicSet, s: f64, radius: u32, exec: Execution) -> Result<DirectSum> {
    let s = RieszExponent::summable(s)?.get();
    if radius == 0 {
        return domain("radius must be at least 1");
    }
    ps.basis.gram().cholesky()?;
    let rows = ps.basis.rows();
    let n_orb = ps.n_orbits() as f64;
    let r = radius as i64;
    let mut pairs = Vec::new();
    for ci in &ps.shifts {
        for cj in &ps.shifts {
            pairs.push([cj[0] - ci[0], cj[1] - ci[1], cj[2] - ci[2]]);
        }
    }
    let half_s = 0.5 * s;
    let slabs = exec.map_range(-r, r, |n0| {
        let mut terms = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize * pairs.len());
        for d in &pairs {
            let f0 = n0 as f64 + d[0];
            for n1 in -r..=r {
                let f1 = n1 as f64 + d[1];
                let base = [
                    f0 * rows[0][0] + f1 * rows[1][0],
                    f0 * rows[0][1] + f1 * rows[1][1],
                    f0 * rows[0][2] + f1 * rows[1][2],
                ];
                for n2 in -r..=r {
                    let f2 = n2 as f64 + d[2];
                    let x = [
                        base[0] + f2 * rows[2][0],
                        base[1] + f2 * rows[2][1],
                        base[2] + f2 * rows[2][2],
                    ];
                    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                    if r2 > 0.0 {
                        terms.push((-half_s * r2.ln()).exp());
                    }
                }
            }
        }
        compensated_sum(terms)
    });
    let raw = compensated_sum(slabs) / (2.0 * n_orb);

    let (nodes, weights) = face_rule();
    let mut first = Vec::new();
    let mut second = Vec::new();
    for d in &pairs {
        let (f, h) = outside_integrals(&rows, d, s, radius as f64 + 0.5, &nodes, &weights);
        first.push(f);
        second.push(h);
    }
    let out_f = compensated_sum(first) / (2.0 * n_orb);
    let out_h = compensated_sum(second) / (2.0 * n_orb);
    let second_order = -out_h / 24.0;
    let tail_correction = out_f + second_order;
    let rho = radius as f64 - 0.5;
    let tail_bound = second_order.abs() * (s + 2.0) * (s + 4.0) / (8.0 * rho * rho)
        + 8.0 * f64::EPSILON * raw.abs();
    Ok(DirectSum { value: raw + tail_correction, raw, tail_correction, tail_bound, radius })
}

/// Composite Gauss-Legendre rule on `[-1, 1]`.
fn face_rule() -> (Vec<f64>, Vec<f64>) {
    const PANELS: usize = 16;
    let (x, w) = gauss_legendre(12);
    let mut nodes = Vec::with_capacity(PANELS * x.len());
    let mut weights = Vec::with_capacity(PANELS * x.len());
    let h = 2.0 / PANELS as f64;
    for p in 0..PANELS {
        let c = -1.0 + h * (p as f64 + 0.5);
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(c + 0.5 * h * xi);
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

/// Integrals over the index-space region outside the cube `|y_i - d_i| <= half`
/// of `f = |B y|^{-s}` and of its index-space Laplacian. Both are homogeneous,
/// so each reduces to face integrals weighted by `|y . n| / (k - 3)`.
fn outside_integrals(rows: &[[f64; 3]; 3], d: &Vec3, s: f64, half: f64, nodes: &[f64], weights: &[f64]) -> (f64, f64) {
    let norms: [f64; 3] = [0, 1, 2].map(|i| rows[i].iter().map(|c| c * c).sum());
    let lap_norm = norms[0] + norms[1] + norms[2];
    let mut f_total = Vec::new();
    let mut h_total = Vec::new();
    for axis in 0..3 {
        let (j, k) = ((axis + 1) % 3, (axis + 2) % 3);
        for sign in [-1.0, 1.0] {
            let c = sign * half + d[axis];
            let mut f_face = 0.0;
            let mut h_face = 0.0;
            for (a, wa) in nodes.iter().zip(weights) {
                for (b, wb) in nodes.iter().zip(weights) {
                    let mut y = [0.0; 3];
                    y[axis] = c;
                    y[j] = d[j] + half * a;
                    y[k] = d[k] + half * b;
                    let x = [
                        y[0] * rows[0][0] + y[1] * rows[1][0] + y[2] * rows[2][0],
                        y[0] * rows[0][1] + y[1] * rows[1][1] + y[2] * rows[2][1],
                        y[0] * rows[0][2] + y[1] * rows[1][2] + y[2] * rows[2][2],
                    ];
                    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                    let f = (-0.5 * s * r2.ln()).exp();
                    let proj: f64 = rows
                        .iter()
                        .map(|u| {
                            let p = u[0] * x[0] + u[1] * x[1] + u[2] * x[2];
                            p * p
                        })
                        .sum();
                    let h = f / r2 * (-s * lap_norm + s * (s + 2.0) * proj / r2);
                    let w = wa * wb * half * half;
                    f_face += w * f;
                    h_face += w * h;
                }
            }
            f_total.push(c.abs() / (s - 3.0) * f_face);
            h_total.push(c.abs() / (s - 1.0) * h_face);
        }
    }
    (compensated_sum(f_total), compensated_sum(h_total))
}

// --- memoization -----------------------------------------------------------

/// Thread-safe memo table keyed by `(structure key, s)`.
#[derive(Debug, Default)]
pub struct ZetaCache {
    map: Mutex<HashMap<(u64, u64), ZetaResult>>,
}

const CACHE_LIMIT: usize = 200_000;

impl ZetaCache {
    pub fn global() -> &'static ZetaCache {
        static CACHE: OnceLock<ZetaCache> = OnceLock::new();
        CACHE.get_or_init(ZetaCache::default)
    }

    pub fn get_or_compute<F>(&self, key: u64, s: f64, compute: F) -> Result<ZetaResult>
    where
        F: FnOnce() -> Result<ZetaResult>,
    {
        let k = (key, s.to_bits());
        if let Some(hit) = self.map.lock().get(&k) {
            return Ok(*hit);
        }
        let value = compute()?;
        let mut map = self.map.lock();
        if map.len() >= CACHE_LIMIT {
            map.clear();
        }
        map.insert(k, value);
        Ok(value)
    }

    pub fn len(&self) -> usize {
        self.map.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.lock().clear();
    }
}

pub fn label_key(label: &StructureLabel) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    label.kind_name().hash(&mut h);
    if let StructureLabel::SH { delta } = label {
        delta.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Memoized closed-form value for a named structure.
pub fn zeta_named_cached(label: &StructureLabel, s: f64) -> Result<ZetaResult> {
    ZetaCache::global().get_or_compute(label_key(label), s, || zeta_named(label, s))
}

/// Memoized Ewald value for a periodic set.
pub fn zeta_general_cached(ps: &PeriodicSet, s: f64) -> Result<ZetaResult> {
    ZetaCache::global().get_or_compute(ps.fingerprint_key(), s, || zeta_general(ps, s))
}

/// Unit-density named structure as a periodic set.
pub fn unit_structure(label: &StructureLabel) -> Result<PeriodicSet> {
    named_structure(label, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sc_dual(s: f64) -> f64 {
        tpow(PI, s - 1.5) * crate::special::gamma(1.5 - 0.5 * s) * rgamma(0.5 * s)
    }

    #[test]
    fn sc_at_zero() {
        let z = zeta_sc(1e-8).unwrap();
        assert!((z.value + 0.5).abs() < 1e-7, "{}", z.value);
        assert_relative_eq!(zeta_sc(0.0).unwrap().value, -0.5, max_relative = 1e-12);
    }

    #[test]
    fn sc_functional_equation() {
        for s in [0.7, -2.5, 1.1, 5.3, 8.6] {
            let lhs = zeta_sc(s).unwrap().value;
            let rhs = sc_dual(s) * zeta_sc(3.0 - s).unwrap().value;
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn lennard_jones_constants() {
        // classic lattice sums in nearest-neighbour units:
        // FCC A6 = 14.45392, A12 = 12.13188; HCP A6 = 14.45489, A12 = 12.13229
        let nn = 2f64.powf(1.0 / 6.0);
        let a = |z: f64, s: f64| 2.0 * z * nn.powf(s);
        assert!((a(zeta_fcc(6.0).unwrap().value, 6.0) - 14.45392).abs() < 1e-5);
        assert!((a(zeta_fcc(12.0).unwrap().value, 12.0) - 12.13188).abs() < 1e-5);
        assert!((a(zeta_hcp(6.0).unwrap().value, 6.0) - 14.45489).abs() < 1e-5);
        assert!((a(zeta_hcp(12.0).unwrap().value, 12.0) - 12.13229).abs() < 1e-5);
    }

    #[test]
    fn bcc_fcc_turning_point_and_duality() {
        assert_relative_eq!(zeta_bcc(1.5).unwrap().value, zeta_fcc(1.5).unwrap().value, max_relative = 1e-10);
        let lhs = zeta_bcc(2.2).unwrap().value;
        let rhs = sc_dual(2.2) * zeta_fcc(0.8).unwrap().value;
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }

    #[test]
    fn ordering_at_half() {
        let (b, f, c) = (zeta_bcc(0.5).unwrap().value, zeta_fcc(0.5).unwrap().value, zeta_sc(0.5).unwrap().value);
        assert!(b < f && f < c, "{b} {f} {c}");
    }

    #[test]
    fn large_s_leading_terms() {
        let lead = 6.0 * 2f64.powf(-40.0 / 6.0);
        for z in [zeta_fcc(40.0).unwrap().value, zeta_hcp(40.0).unwrap().value] {
            let ratio = z / lead;
            assert!((1.0..=1.0 + 1e-3).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn pole_and_domain_errors() {
        assert!(matches!(zeta_sc(3.0), Err(Error::Pole { .. })));
        assert!(matches!(zeta_fcc(3.0005), Err(Error::Pole { .. })));
        assert!(zeta_bcc(3.002).is_ok());
        assert!(zeta_sh(4.0, 0.0).is_err());
        assert!(zeta_sh(4.0, -1.0).is_err());
        assert!(zeta_sc(f64::NAN).is_err());
        let sc = unit_structure(&StructureLabel::SC).unwrap();
        assert!(matches!(direct_sum(&sc, 3.0, 5), Err(Error::Divergent { .. })));
    }

    #[test]
    fn sh_with_unit_ratio_matches_direct_sum() {
        let ps = unit_structure(&StructureLabel::SH { delta: 1.0 }).unwrap();
        let d = direct_sum(&ps, 5.0, 40).unwrap();
        assert_relative_eq!(zeta_sh(5.0, 1.0).unwrap().value, d.value, max_relative = 1e-9);
    }

    #[test]
    fn ewald_matches_closed_forms() {
        for label in [StructureLabel::SC, StructureLabel::BCC, StructureLabel::FCC, StructureLabel::HCP] {
            let ps = unit_structure(&label).unwrap();
            for s in [-7.3, -1.0, 0.4, 2.2, 4.5, 12.0, 25.0] {
                let a = zeta_named(&label, s).unwrap();
                let b = zeta_general(&ps, s).unwrap();
                assert_relative_eq!(a.value, b.value, max_relative = 1e-9);
                assert!(a.est_error < 1e-9 * a.value.abs().max(1.0), "{label} {s} {a:?}");
            }
        }
    }

    #[test]
    fn ewald_independent_of_splitting() {
        let ps = unit_structure(&StructureLabel::HCP).unwrap();
        let a = zeta_general_with(&ps, 1.7, &EwaldOptions { alpha: Some(0.6), ..Default::default() }).unwrap();
        let b = zeta_general_with(&ps, 1.7, &EwaldOptions { alpha: Some(1.9), ..Default::default() }).unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-11);
    }

    #[test]
    fn direct_sum_tail_correction_converges() {
        let ps = unit_structure(&StructureLabel::SC).unwrap();
        let exact = zeta_sc(6.0).unwrap().value;
        let coarse = direct_sum(&ps, 6.0, 10).unwrap();
        let fine = direct_sum(&ps, 6.0, 40).unwrap();
        assert!((fine.raw - exact).abs() > 1e-6);
        assert!((fine.value - exact).abs() < 1e-9, "{}", fine.value - exact);
        assert!((coarse.value - exact).abs() < coarse.tail_bound * 10.0 + 1e-12);
    }

    #[test]
    fn first_shell_dominates_at_large_s() {
        for label in [StructureLabel::FCC, StructureLabel::BCC, StructureLabel::HCP] {
            let ps = unit_structure(&label).unwrap();
            let d2min = crate::lattice::shell_fingerprint(&ps, 1, 1e-12)[0];
            let s = 200.0;
            let v = direct_sum(&ps, s, 3).unwrap().value;
            let scaled = v * d2min.distance2.powf(0.5 * s);
            assert_relative_eq!(scaled, d2min.multiplicity as f64 / 2.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn cache_returns_identical_values() {
        let cache = ZetaCache::default();
        let a = cache.get_or_compute(7, 4.5, || zeta_sc(4.5)).unwrap();
        let b = cache.get_or_compute(7, 4.5, || panic!("must hit")).unwrap();
        assert_eq!(a, b);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn zeta_result_json_shape() {
        let z = ZetaResult { value: 1.5, est_error: 0.0, route: Route::ClosedForm };
        let j = serde_json::to_value(z).unwrap();
        assert_eq!(j["route"], "closed_form");
        assert_eq!(j["value"], 1.5);
    }
}
