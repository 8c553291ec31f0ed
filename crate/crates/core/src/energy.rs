//! Riesz and Lennard-Jones lattice energies.
//!
//! The Lennard-Jones type potential is `a r^{-n} - b r^{-m}` with
//! `a = m/(n-m)`, `b = n/(n-m)`, so the pair potential has its minimum `-1` at
//! `r = 1`. Energies are per point, with each pair shared by two points.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lattice::{PeriodicSet, StructureLabel};
use crate::zeta::{zeta_general_cached, zeta_named_cached, RieszExponent, POLE_GUARD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentMode {
    /// `n > m > 3`: both lattice sums converge.
    #[default]
    Summable,
    /// `n > m > 0`, `n, m != 3`: values through analytic continuation.
    Continued,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LJExponents {
    n: f64,
    m: f64,
    mode: ExponentMode,
}

impl LJExponents {
    pub fn new(n: f64, m: f64) -> Result<Self> {
        Self::with_mode(n, m, ExponentMode::Summable)
    }

    pub fn with_mode(n: f64, m: f64, mode: ExponentMode) -> Result<Self> {
        if !n.is_finite() || !m.is_finite() {
            return domain("exponents must be finite");
        }
        if n <= m {
            return domain(format!("need n > m, got n = {n}, m = {m}"));
        }
        match mode {
            ExponentMode::Summable => {
                RieszExponent::summable(m)?;
            }
            ExponentMode::Continued => {
                if m <= 0.0 {
                    return domain(format!("need m > 0, got {m}"));
                }
                RieszExponent::continued(n)?;
                RieszExponent::continued(m)?;
            }
        }
        Ok(Self { n, m, mode })
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn mode(&self) -> ExponentMode {
        self.mode
    }

    /// `(a, b) = (m/(n-m), n/(n-m))`.
    pub fn coefficients(&self) -> (f64, f64) {
        let w = self.n - self.m;
        (self.m / w, self.n / w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub zeta_n: f64,
    pub zeta_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue {
    pub value: f64,
    /// Unit-density zeta values at `n` and `m`.
    pub components: Components,
}

/// Energy at covolume `volume` from the unit-density components.
pub fn lj_from_components(c: Components, e: &LJExponents, volume: f64) -> Result<EnergyValue> {
    if !(volume > 0.0) || !volume.is_finite() {
        return domain(format!("covolume must be positive, got {volume}"));
    }
    let (a, b) = e.coefficients();
    let value = a * c.zeta_n * volume.powf(-e.n / 3.0) - b * c.zeta_m * volume.powf(-e.m / 3.0);
    Ok(EnergyValue { value, components: c })
}

/// `dE/dV` of the two-term homogeneous energy.
pub fn lj_volume_derivative(c: Components, e: &LJExponents, volume: f64) -> f64 {
    let (a, b) = e.coefficients();
    -e.n / 3.0 * a * c.zeta_n * volume.powf(-e.n / 3.0 - 1.0)
        + e.m / 3.0 * b * c.zeta_m * volume.powf(-e.m / 3.0 - 1.0)
}

/// Riesz energy of `ps` at its own density: `zeta_ps(s)`.
pub fn riesz_energy(ps: &PeriodicSet, s: f64) -> Result<f64> {
    Ok(zeta_general_cached(ps, s)?.value)
}

/// Riesz energy of a named structure at covolume `volume`.
pub fn riesz_energy_named(label: &StructureLabel, s: f64, volume: f64) -> Result<f64> {
    if !(volume > 0.0) || !volume.is_finite() {
        return domain(format!("covolume must be positive, got {volume}"));
    }
    Ok(zeta_named_cached(label, s)?.value * volume.powf(-s / 3.0))
}

/// Components of `ps` rescaled to unit density.
pub fn lj_components(ps: &PeriodicSet, e: &LJExponents) -> Result<Components> {
    let unit = if (ps.covolume() - 1.0).abs() < 1e-14 { ps.clone() } else { ps.with_covolume(1.0) };
    Ok(Components {
        zeta_n: zeta_general_cached(&unit, e.n)?.value,
        zeta_m: zeta_general_cached(&unit, e.m)?.value,
    })
}

pub fn lj_components_named(label: &StructureLabel, e: &LJExponents) -> Result<Components> {
    Ok(Components {
        zeta_n: zeta_named_cached(label, e.n)?.value,
        zeta_m: zeta_named_cached(label, e.m)?.value,
    })
}

/// Lennard-Jones energy of the shape of `ps` dilated to covolume `volume`.
pub fn lj_energy(ps: &PeriodicSet, e: &LJExponents, volume: f64) -> Result<EnergyValue> {
    lj_from_components(lj_components(ps, e)?, e, volume)
}

pub fn lj_energy_named(label: &StructureLabel, e: &LJExponents, volume: f64) -> Result<EnergyValue> {
    lj_from_components(lj_components_named(label, e)?, e, volume)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalVolume {
    pub volume: f64,
    pub energy: f64,
}

/// `V* = (zeta_n / zeta_m)^{3/(n-m)}` and `E(V*) = -zeta_m^{n/(n-m)} zeta_n^{-m/(n-m)}`.
pub fn optimal_volume_from_components(c: Components, e: &LJExponents) -> Result<OptimalVolume> {
    if !(c.zeta_n > 0.0 && c.zeta_m > 0.0) {
        return Err(Error::NoInteriorMinimum(format!(
            "components must be positive, got zeta_n = {}, zeta_m = {}",
            c.zeta_n, c.zeta_m
        )));
    }
    let w = e.n - e.m;
    let volume = (c.zeta_n / c.zeta_m).powf(3.0 / w);
    let energy = -(e.n / w * c.zeta_m.ln() - e.m / w * c.zeta_n.ln()).exp();
    Ok(OptimalVolume { volume, energy })
}

pub fn lj_optimal_volume(ps: &PeriodicSet, e: &LJExponents) -> Result<OptimalVolume> {
    optimal_volume_from_components(lj_components(ps, e)?, e)
}

pub fn lj_optimal_volume_named(label: &StructureLabel, e: &LJExponents) -> Result<OptimalVolume> {
    optimal_volume_from_components(lj_components_named(label, e)?, e)
}

/// True when `s` sits outside the pole guard band.
pub fn exponent_is_regular(s: f64) -> bool {
    (s - 3.0).abs() >= POLE_GUARD
}
