//! Jacobi theta functions at zero argument, their shifted generalization, and
//! the upper incomplete gamma function.
//!
//! Theta functions are parametrized by `t > 0` with nome `q = exp(-pi t)`:
//!
//! ```text
//! theta2(t) = sum_j exp(-pi t (j - 1/2)^2)
//! theta3(t) = sum_j exp(-pi t j^2)
//! theta4(t) = sum_j (-1)^j exp(-pi t j^2)
//! S(phi, t) = sum_j exp(-pi t (j + phi)^2)
//! ```
//!
//! For `t < 1` every function is evaluated through its modular transform so
//! the number of series terms stays bounded. The `*_rel_excess` helpers return
//! `sqrt(t) * theta(t) - 1` without cancellation; the lattice sums subtract
//! the small-`t` asymptote `t^{-1/2}` and need that difference to full
//! relative precision.

use std::f64::consts::PI;

use crate::error::{domain, Result};

/// Series truncation: stop once the next term drops below this fraction of
/// the running sum. Terms decay super-geometrically, so the first omitted term
/// also bounds the tail up to a factor `1 / (1 - r)` with `r < 0.05`.
const REL_STOP: f64 = 1e-17;
const MAX_TERMS: usize = 100_000;

/// Nome parameter of a theta function, `q = exp(-pi t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaArg(f64);

impl ThetaArg {
    pub fn new(t: f64) -> Result<Self> {
        if t > 0.0 && t.is_finite() {
            Ok(Self(t))
        } else {
            domain(format!("theta argument t must be positive and finite, got {t}"))
        }
    }

    pub fn t(self) -> f64 {
        self.0
    }

    pub fn nome(self) -> f64 {
        (-PI * self.0).exp()
    }
}

/// Shift and nome of a shifted theta sum. The shift is stored reduced to
/// `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedThetaArg {
    phi: f64,
    t: ThetaArg,
}

impl ShiftedThetaArg {
    pub fn new(phi: f64, t: f64) -> Result<Self> {
        if !phi.is_finite() {
            return domain(format!("shift must be finite, got {phi}"));
        }
        Ok(Self { phi: reduce_unit(phi), t: ThetaArg::new(t)? })
    }

    pub fn phi(self) -> f64 {
        self.phi
    }

    pub fn t(self) -> f64 {
        self.t.t()
    }

    pub fn value(self) -> f64 {
        shifted_theta_raw(self.phi, self.t.t())
    }
}

fn reduce_unit(phi: f64) -> f64 {
    let r = phi - phi.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance of `phi` to the nearest integer, in `[0, 1/2]`. The shifted sum
/// only depends on this.
fn fold_shift(phi: f64) -> f64 {
    let r = reduce_unit(phi);
    r.min(1.0 - r)
}

fn check_t(t: f64) -> Result<()> {
    ThetaArg::new(t).map(|_| ())
}

/// `sum_{j>=1} sign^j exp(-pi t j^2)` with `sign = -1` when `alternating`.
fn integer_tail(t: f64, alternating: bool) -> f64 {
    let mut sum = 0.0;
    for j in 1..MAX_TERMS {
        let jf = j as f64;
        let term = (-PI * t * jf * jf).exp();
        if term == 0.0 {
            break;
        }
        sum += if alternating && j % 2 == 1 { -term } else { term };
        if term < REL_STOP * sum.abs() {
            break;
        }
    }
    sum
}

/// `sum_{j>=0} exp(-pi t (j + 1/2)^2)`.
fn half_integer_sum(t: f64) -> f64 {
    let mut sum = 0.0;
    for j in 0..MAX_TERMS {
        let h = j as f64 + 0.5;
        let term = (-PI * t * h * h).exp();
        if term == 0.0 {
            break;
        }
        sum += term;
        if term < REL_STOP * sum {
            break;
        }
    }
    sum
}

pub(crate) fn theta3_raw(t: f64) -> f64 {
    if t >= 1.0 {
        1.0 + 2.0 * integer_tail(t, false)
    } else {
        (1.0 + 2.0 * integer_tail(1.0 / t, false)) / t.sqrt()
    }
}

pub(crate) fn theta2_raw(t: f64) -> f64 {
    if t >= 1.0 {
        2.0 * half_integer_sum(t)
    } else {
        (1.0 + 2.0 * integer_tail(1.0 / t, true)) / t.sqrt()
    }
}

pub(crate) fn theta4_raw(t: f64) -> f64 {
    if t >= 1.0 {
        1.0 + 2.0 * integer_tail(t, true)
    } else {
        2.0 * half_integer_sum(1.0 / t) / t.sqrt()
    }
}

/// `sqrt(t) theta3(t) - 1`, accurate even when tiny (small `t`).
pub fn theta3_rel_excess(t: f64) -> f64 {
    if t >= 1.0 {
        t.sqrt() * theta3_raw(t) - 1.0
    } else {
        2.0 * integer_tail(1.0 / t, false)
    }
}

/// `sqrt(t) theta2(t) - 1`, accurate even when tiny (small `t`).
pub fn theta2_rel_excess(t: f64) -> f64 {
    if t >= 1.0 {
        t.sqrt() * theta2_raw(t) - 1.0
    } else {
        2.0 * integer_tail(1.0 / t, true)
    }
}

/// `theta2(exp(-pi t))`.
pub fn theta2(t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(theta2_raw(t))
}

/// `theta3(exp(-pi t))`.
pub fn theta3(t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(theta3_raw(t))
}

/// `theta4(exp(-pi t))`. Underflows to zero for `t` below about `1.1e-3`.
pub fn theta4(t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(theta4_raw(t))
}

/// `ln sum_j exp(-pi t (j + phi)^2)` for `t >= 1`, `phi` folded to `[0, 1/2]`.
/// The leading factor `exp(-pi t phi^2)` is kept in log form.
fn ln_shifted_direct(phi: f64, t: f64) -> f64 {
    // excess over the j = 0 term, accumulated separately so that tiny
    // excesses keep full relative precision
    let mut excess = 0.0;
    // j >= 1 on the near side: exponent j^2 + 2 j phi
    for j in 1..MAX_TERMS {
        let jf = j as f64;
        let term = (-PI * t * (jf * jf + 2.0 * jf * phi)).exp();
        excess += term;
        if term == 0.0 || term < REL_STOP * excess {
            break;
        }
    }
    // j >= 1 on the far side: exponent j^2 - 2 j phi >= 0 for phi <= 1/2
    for j in 1..MAX_TERMS {
        let jf = j as f64;
        let term = (-PI * t * (jf * jf - 2.0 * jf * phi)).exp();
        excess += term;
        if term == 0.0 || term < REL_STOP * excess {
            break;
        }
    }
    -PI * t * phi * phi + excess.ln_1p()
}

/// `2 sum_{j>=1} cos(2 pi j phi) exp(-pi j^2 / t)`, the Poisson-side excess.
fn poisson_excess(phi: f64, t: f64) -> f64 {
    let inv = 1.0 / t;
    let mut sum = 0.0;
    let mut scale = 0.0f64;
    for j in 1..MAX_TERMS {
        let jf = j as f64;
        let g = (-PI * jf * jf * inv).exp();
        if g == 0.0 {
            break;
        }
        sum += 2.0 * (2.0 * PI * jf * phi).cos() * g;
        scale = scale.max(sum.abs());
        // |cos| <= 1: the first omitted Gaussian factor bounds the tail
        if g < REL_STOP * scale.max(REL_STOP) {
            break;
        }
    }
    sum
}

/// `ln(sqrt(t) S(phi, t))`. Finite for every `t > 0`; very negative when the
/// shifted sum is exponentially small (large `t`, shift away from zero).
pub fn ln_rel_shifted_theta(phi: f64, t: f64) -> f64 {
    let phi = fold_shift(phi);
    if t >= 1.0 {
        0.5 * t.ln() + ln_shifted_direct(phi, t)
    } else {
        poisson_excess(phi, t).ln_1p()
    }
}

/// `ln S(phi, t)`; for `t >= 1` and `phi = 0` this is `ln(1 + tiny)` computed
/// without rounding the tiny part away.
pub(crate) fn ln_shifted_theta(phi: f64, t: f64) -> f64 {
    let phi = fold_shift(phi);
    if t >= 1.0 {
        ln_shifted_direct(phi, t)
    } else {
        poisson_excess(phi, t).ln_1p() - 0.5 * t.ln()
    }
}

pub(crate) fn shifted_theta_raw(phi: f64, t: f64) -> f64 {
    let phi = fold_shift(phi);
    if t >= 1.0 {
        ln_shifted_direct(phi, t).exp()
    } else {
        (1.0 + poisson_excess(phi, t)) / t.sqrt()
    }
}

/// `sum_j exp(-pi t (j + phi)^2)`; reduces to `theta3` at `phi = 0` and to
/// `theta2` at `phi = 1/2`.
pub fn shifted_theta(phi: f64, t: f64) -> Result<f64> {
    Ok(ShiftedThetaArg::new(phi, t)?.value())
}

// --- gamma functions -------------------------------------------------------

/// `1 / Gamma(x)`, entire: zero at the non-positive integers.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    1.0 / libm::tgamma(x)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Taylor coefficients of `1/Gamma(z) = sum_k C[k] z^k`, starting at `k = 2`.
const RGAMMA_TAYLOR: [f64; 25] = [
    0.577_215_664_901_532_860_61,
    -0.655_878_071_520_253_881_08,
    -0.042_002_635_034_095_235_529,
    0.166_538_611_382_291_489_5,
    -0.042_197_734_555_544_336_748,
    -0.009_621_971_527_876_973_562_1,
    0.007_218_943_246_663_099_542_4,
    -0.001_165_167_591_859_065_112_1,
    -0.000_215_241_674_114_950_972_82,
    0.000_128_050_282_388_116_186_15,
    -0.000_020_134_854_780_788_238_656,
    -1.250_493_482_142_670_657_3e-6,
    1.133_027_231_981_695_882_4e-6,
    -2.056_338_416_977_607_103_5e-7,
    6.116_095_104_481_415_817_9e-9,
    5.002_007_644_469_222_930_1e-9,
    -1.181_274_570_487_020_144_6e-9,
    1.043_426_711_691_100_510_5e-10,
    7.782_263_439_905_071_254e-12,
    -3.696_805_618_642_205_708_2e-12,
    5.100_370_287_454_475_979e-13,
    -2.058_326_053_566_506_783_2e-14,
    -5.348_122_539_423_017_982_4e-15,
    1.226_778_628_238_260_790_2e-15,
    -1.181_259_301_697_458_769_5e-16,
];

/// `(Gamma(1 + a) - 1) / a` for `|a| <= 1/2`, continuous through `a = 0`.
fn gamma1p_minus_one_over_a(a: f64) -> f64 {
    // 1/Gamma(1+a) = 1 + sum_{k>=2} C_k a^{k-1}
    let mut poly = 0.0;
    for &c in RGAMMA_TAYLOR.iter().rev() {
        poly = poly * a + c;
    }
    let recip = 1.0 + a * poly;
    -poly / recip
}

/// `Gamma(a, x)` for `|a| <= 1/2` and moderate `x`.
fn upper_gamma_small_a(a: f64, x: f64) -> f64 {
    let lnx = x.ln();
    let power_term = if a == 0.0 { lnx } else { (a * lnx).exp_m1() / a };
    // x^a sum_{k>=1} (-x)^k / (k! (a + k))
    let mut series = 0.0;
    let mut fact_term = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        fact_term *= -x / kf;
        let term = fact_term / (a + kf);
        series += term;
        if term.abs() < 1e-17 * series.abs() {
            break;
        }
    }
    gamma1p_minus_one_over_a(a) - power_term - (a * lnx).exp() * series
}

/// Lower incomplete gamma by its power series; `a > 0`.
fn lower_gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..1000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (-x + a * x.ln()).exp()
}

/// Upper incomplete gamma by modified Lentz continued fraction; needs
/// `x >= a + 1`.
fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let fi = i as f64;
        let an = -fi * (fi - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln()).exp() * h
}

/// `Gamma(a, x)` for `a` a positive integer or half-integer, by upward
/// recurrence from `Gamma(1, x) = e^{-x}` or `Gamma(1/2, x) = sqrt(pi) erfc(sqrt(x))`.
/// Every term is positive, so the recurrence is stable.
fn upper_gamma_half_integer(a: f64, x: f64) -> f64 {
    let (mut ak, mut g) = if a.fract() == 0.0 {
        (1.0, (-x).exp())
    } else {
        (0.5, PI.sqrt() * libm::erfc(x.sqrt()))
    };
    let lnx = x.ln();
    while ak < a {
        g = ak * g + (ak * lnx - x).exp();
        ak += 1.0;
    }
    g
}

pub(crate) fn upper_gamma_raw(a: f64, x: f64) -> f64 {
    if a > 0.0 && a <= 40.0 && (2.0 * a).fract() == 0.0 {
        return upper_gamma_half_integer(a, x);
    }
    if x >= 1.0 && x >= a + 1.0 {
        return upper_gamma_cf(a, x);
    }
    if a >= 0.5 {
        return gamma(a) - lower_gamma_series(a, x);
    }
    // a < 1/2 and x < 3/2: evaluate at a0 in [-1/2, 1/2), then recur down
    let steps = if a < -0.5 { (-0.5 - a).ceil() as usize } else { 0 };
    let a0 = a + steps as f64;
    let mut g = upper_gamma_small_a(a0, x);
    let lnx = x.ln();
    for k in 1..=steps {
        let ak = a0 - k as f64;
        g = (g - (ak * lnx - x).exp()) / ak;
    }
    g
}

/// `Gamma(a, x) = int_x^inf t^{a-1} e^{-t} dt` for any real `a` and `x > 0`.
pub fn upper_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("incomplete gamma needs x > 0, got {x}"));
    }
    if !a.is_finite() {
        return domain(format!("incomplete gamma order must be finite, got {a}"));
    }
    Ok(upper_gamma_raw(a, x))
}
