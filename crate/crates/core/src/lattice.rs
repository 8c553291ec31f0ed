//! Lattice and periodic-set geometry.
//!
//! A lattice of covolume `V` is parametrized by `(u, v, x, y, z, V)`:
//!
//! ```text
//! L  = V^{1/3} [Z u1 + Z u2 + Z u3]
//! u1 = 2^{1/6} (1/sqrt(u), 0, 0)
//! u2 = 2^{1/6} (x/sqrt(u), v/sqrt(u), 0)
//! u3 = 2^{1/6} (y/sqrt(u), v z/sqrt(u), u/(v sqrt(2)))
//! ```
//!
//! and the reduced representatives live in the (half-shifted) Grenier domain
//! described by nine inequalities, see [`GrenierConstraint`].

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm2(a: &Vec3) -> f64 {
    dot(a, a)
}

/// Determinant of the matrix whose rows are `m[0], m[1], m[2]`.
pub(crate) fn det3(m: &Mat3) -> f64 {
    dot(&m[0], &cross(&m[1], &m[2]))
}

pub(crate) fn inverse3(m: &Mat3) -> Option<Mat3> {
    let det = det3(m);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let c0 = cross(&m[1], &m[2]);
    let c1 = cross(&m[2], &m[0]);
    let c2 = cross(&m[0], &m[1]);
    // inverse = adj / det; columns of the inverse are c_i / det
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        inv[r][0] = c0[r] / det;
        inv[r][1] = c1[r] / det;
        inv[r][2] = c2[r] / det;
    }
    Some(inv)
}

/// The six Grenier coordinates of a lattice. `volume` is the covolume `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub u: f64,
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    #[serde(rename = "V")]
    pub volume: f64,
}

impl LatticeParams {
    pub fn new(u: f64, v: f64, x: f64, y: f64, z: f64, volume: f64) -> Result<Self> {
        let p = Self { u, v, x, y, z, volume };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.u, self.v, self.x, self.y, self.z, self.volume];
        if all.iter().any(|c| !c.is_finite()) {
            return domain("lattice parameters must be finite");
        }
        if self.u <= 0.0 || self.v <= 0.0 {
            return domain(format!("u and v must be positive, got u = {}, v = {}", self.u, self.v));
        }
        if self.volume <= 0.0 {
            return domain(format!("covolume must be positive, got {}", self.volume));
        }
        Ok(())
    }

    pub fn shape(&self) -> [f64; 5] {
        [self.u, self.v, self.x, self.y, self.z]
    }

    pub fn from_shape(shape: [f64; 5], volume: f64) -> Self {
        Self { u: shape[0], v: shape[1], x: shape[2], y: shape[3], z: shape[4], volume }
    }

    pub fn with_volume(self, volume: f64) -> Self {
        Self { volume, ..self }
    }
}

/// Three basis vectors, stored as rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub u1: Vec3,
    pub u2: Vec3,
    pub u3: Vec3,
}

impl Basis {
    pub fn from_rows(rows: Mat3) -> Self {
        Self { u1: rows[0], u2: rows[1], u3: rows[2] }
    }

    pub fn rows(&self) -> Mat3 {
        [self.u1, self.u2, self.u3]
    }

    pub fn det(&self) -> f64 {
        det3(&self.rows())
    }

    /// Flip the third vector if needed so the determinant is positive.
    pub fn oriented(self) -> Self {
        if self.det() < 0.0 {
            Self { u3: [-self.u3[0], -self.u3[1], -self.u3[2]], ..self }
        } else {
            self
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        let s = |a: Vec3| [a[0] * k, a[1] * k, a[2] * k];
        Self { u1: s(self.u1), u2: s(self.u2), u3: s(self.u3) }
    }

    pub fn gram(&self) -> QuadraticForm {
        let r = self.rows();
        let mut g = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = dot(&r[i], &r[j]);
            }
        }
        QuadraticForm { gram: g }
    }

    /// Cartesian position of fractional coordinates `f`.
    pub fn to_cartesian(&self, f: &Vec3) -> Vec3 {
        let r = self.rows();
        let mut out = [0.0; 3];
        for (k, row) in r.iter().enumerate() {
            for c in 0..3 {
                out[c] += f[k] * row[c];
            }
        }
        out
    }

    /// Dual basis: rows `w_i` with `w_i . u_j = delta_ij`.
    pub fn reciprocal(&self) -> Option<Basis> {
        let inv = inverse3(&self.rows())?;
        // rows of (B^{-1})^T are the columns of B^{-1}
        let mut rows = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rows[i][j] = inv[j][i];
            }
        }
        Some(Basis::from_rows(rows))
    }
}

/// Symmetric positive-definite Gram matrix, `Q(n) = n^T G n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm {
    pub gram: Mat3,
}

impl QuadraticForm {
    pub fn eval(&self, n: [f64; 3]) -> f64 {
        let g = &self.gram;
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += n[i] * g[i][j] * n[j];
            }
        }
        s
    }

    pub fn det(&self) -> f64 {
        det3(&self.gram)
    }

    /// Lower-triangular Cholesky factor; fails unless positive definite.
    pub fn cholesky(&self) -> Result<Mat3> {
        let g = &self.gram;
        let mut l = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..=i {
                let mut s = g[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::InvalidPeriodicSet(
                            "Gram matrix is not positive definite".into(),
                        ));
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        Ok(l)
    }
}

/// Named structures of the phase diagrams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StructureLabel {
    SC,
    FCC,
    BCC,
    SH { delta: f64 },
    HCP,
    OTHER,
}

impl StructureLabel {
    /// Same family, ignoring the SH ratio.
    pub fn same_kind(&self, other: &StructureLabel) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            StructureLabel::SC => "SC",
            StructureLabel::FCC => "FCC",
            StructureLabel::BCC => "BCC",
            StructureLabel::SH { .. } => "SH",
            StructureLabel::HCP => "HCP",
            StructureLabel::OTHER => "OTHER",
        }
    }

    pub fn is_named(&self) -> bool {
        !matches!(self, StructureLabel::OTHER)
    }
}

impl fmt::Display for StructureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureLabel::SH { delta } => write!(f, "SH({delta})"),
            other => f.write_str(other.kind_name()),
        }
    }
}

/// A lattice plus fractional shifts; the first shift is always the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSet {
    pub basis: Basis,
    pub shifts: Vec<Vec3>,
    /// Volume per point, `det(basis) / shifts.len()`.
    pub density_normalization: f64,
}

impl PeriodicSet {
    pub fn new(basis: Basis, shifts: Vec<Vec3>) -> Result<Self> {
        let basis = basis.oriented();
        let det = basis.det();
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::InvalidPeriodicSet(format!("degenerate basis, det = {det}")));
        }
        basis.gram().cholesky()?;
        let mut reduced: Vec<Vec3> = Vec::with_capacity(shifts.len().max(1));
        reduced.push([0.0; 3]);
        for s in shifts {
            if s.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidPeriodicSet("shift is not finite".into()));
            }
            let r = s.map(|c| {
                let w = c - c.floor();
                if w >= 1.0 {
                    0.0
                } else {
                    w
                }
            });
            let duplicate = reduced.iter().any(|q| {
                (0..3).all(|k| {
                    let d = (q[k] - r[k]).abs();
                    d.min(1.0 - d) < 1e-12
                })
            });
            if !duplicate {
                reduced.push(r);
            } else if r.iter().any(|&c| c != 0.0) || reduced.len() > 1 {
                return Err(Error::InvalidPeriodicSet("shifts must be distinct modulo 1".into()));
            }
        }
        let n = reduced.len() as f64;
        Ok(Self { basis, shifts: reduced, density_normalization: det / n })
    }

    pub fn lattice(basis: Basis) -> Result<Self> {
        Self::new(basis, vec![[0.0; 3]])
    }

    pub fn validate(&self) -> Result<()> {
        let rebuilt = Self::new(self.basis, self.shifts.clone())?;
        let rel = (rebuilt.density_normalization - self.density_normalization).abs()
            / rebuilt.density_normalization;
        if rel > 1e-9 {
            return Err(Error::InvalidPeriodicSet(format!(
                "density_normalization {} does not match det/|shifts| = {}",
                self.density_normalization, rebuilt.density_normalization
            )));
        }
        Ok(())
    }

    pub fn n_orbits(&self) -> usize {
        self.shifts.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.basis.det()
    }

    /// Volume per point.
    pub fn covolume(&self) -> f64 {
        self.cell_volume() / self.n_orbits() as f64
    }

    pub fn density(&self) -> f64 {
        1.0 / self.covolume()
    }

    /// Uniform dilation `x -> k x`.
    pub fn scaled(&self, k: f64) -> Self {
        let basis = self.basis.scaled(k);
        Self {
            basis,
            shifts: self.shifts.clone(),
            density_normalization: self.density_normalization * k.powi(3),
        }
    }

    /// Rescaled copy with volume per point equal to `volume`.
    pub fn with_covolume(&self, volume: f64) -> Self {
        self.scaled((volume / self.covolume()).cbrt())
    }

    /// All difference vectors `p + c_j - c_origin` with norm below `radius`,
    /// excluding the zero vector, seen from the orbit `origin`.
    pub fn vectors_within(&self, origin: usize, radius: f64) -> Vec<Vec3> {
        let mut out = Vec::new();
        let c0 = self.shifts[origin];
        for cj in &self.shifts {
            let d = [cj[0] - c0[0], cj[1] - c0[1], cj[2] - c0[2]];
            for_each_lattice_point(&self.basis, d, radius, |p, _| {
                if norm2(&p) > 0.0 {
                    out.push(p);
                }
            });
        }
        out
    }

    /// Stable hash of the geometry, for memoization.
    pub fn fingerprint_key(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for r in self.basis.rows() {
            for c in r {
                c.to_bits().hash(&mut h);
            }
        }
        for s in &self.shifts {
            for c in s {
                c.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}

/// Visit every `B (n + d)` with `|B (n + d)| <= radius`, `n` integer.
/// The callback also receives `n`.
pub(crate) fn for_each_lattice_point<F: FnMut(Vec3, [i64; 3])>(
    basis: &Basis,
    d: Vec3,
    radius: f64,
    mut f: F,
) {
    let g = basis.gram();
    let ginv = inverse3(&g.gram).expect("basis is non-degenerate");
    let r2 = radius * radius;
    let bound = |k: usize| radius * ginv[k][k].sqrt();
    let rows = basis.rows();
    let b0 = bound(0);
    let lo0 = (-b0 - d[0]).ceil() as i64;
    let hi0 = (b0 - d[0]).floor() as i64;
    for n0 in lo0..=hi0 {
        let f0 = n0 as f64 + d[0];
        let b1 = bound(1);
        let lo1 = (-b1 - d[1]).ceil() as i64;
        let hi1 = (b1 - d[1]).floor() as i64;
        for n1 in lo1..=hi1 {
            let f1 = n1 as f64 + d[1];
            let partial = [
                f0 * rows[0][0] + f1 * rows[1][0],
                f0 * rows[0][1] + f1 * rows[1][1],
                f0 * rows[0][2] + f1 * rows[1][2],
            ];
            // solve |partial + f2 u3|^2 <= r2 for f2
            let a = norm2(&rows[2]);
            let b = dot(&partial, &rows[2]);
            let c = norm2(&partial) - r2;
            let disc = b * b - a * c;
            if disc < 0.0 {
                continue;
            }
            let sq = disc.sqrt();
            let lo2 = ((-b - sq) / a - d[2]).ceil() as i64;
            let hi2 = ((-b + sq) / a - d[2]).floor() as i64;
            for n2 in lo2..=hi2 {
                let f2 = n2 as f64 + d[2];
                let p = [
                    partial[0] + f2 * rows[2][0],
                    partial[1] + f2 * rows[2][1],
                    partial[2] + f2 * rows[2][2],
                ];
                if norm2(&p) <= r2 {
                    f(p, [n0, n1, n2]);
                }
            }
        }
    }
}

/// Basis of the lattice with Grenier coordinates `p`.
pub fn basis_from_params(p: &LatticeParams) -> Result<Basis> {
    p.validate()?;
    let k = 2f64.powf(1.0 / 6.0) * p.volume.cbrt() / p.u.sqrt();
    let u1 = [k, 0.0, 0.0];
    let u2 = [k * p.x, k * p.v, 0.0];
    let u3 = [k * p.y, k * p.v * p.z, k * p.u * p.u.sqrt() / (p.v * std::f64::consts::SQRT_2)];
    Ok(Basis { u1, u2, u3 })
}

/// Gram matrix of the lattice with Grenier coordinates `p`:
/// `Q(j,k,l) = (2^{1/3} V^{2/3} / u) [(j + xk + yl)^2 + v^2 (k + zl)^2 + u^3/(2v^2) l^2]`.
pub fn quadratic_form(p: &LatticeParams) -> Result<QuadraticForm> {
    p.validate()?;
    let c = 2f64.cbrt() * p.volume.powf(2.0 / 3.0) / p.u;
    let (x, y, z, v, u) = (p.x, p.y, p.z, p.v, p.u);
    let v2 = v * v;
    let g = [
        [c, c * x, c * y],
        [c * x, c * (x * x + v2), c * (x * y + v2 * z)],
        [c * y, c * (x * y + v2 * z), c * (y * y + v2 * z * z + u * u * u / (2.0 * v2))],
    ];
    Ok(QuadraticForm { gram: g })
}

pub fn lattice_from_params(p: &LatticeParams) -> Result<PeriodicSet> {
    PeriodicSet::lattice(basis_from_params(p)?)
}

/// The nine inequalities of the (half-shifted) Grenier domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrenierConstraint {
    /// `1 <= (1+x-y)^2 + v^2 ((1-z)^2 + u^3/(2v^4))`
    I,
    /// `1 <= (x-y)^2 + v^2 ((1-z)^2 + u^3/(2v^4))`
    II,
    /// `1 <= x^2 + v^2`
    III,
    /// `1 <= y^2 + v^2 (z^2 + u^3/(2v^4))`
    IV,
    /// `1 <= (y-1)^2 + v^2 (z^2 + u^3/(2v^4))`
    IVPrime,
    /// `1 <= z^2 + u^3/(2v^4)`
    V,
    /// `0 <= x <= 1/2`
    VI,
    /// `0 <= y <= 1`
    VII,
    /// `0 <= z <= 1/2`
    VIII,
}

impl fmt::Display for GrenierConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GrenierConstraint::I => "(i)",
            GrenierConstraint::II => "(ii)",
            GrenierConstraint::III => "(iii)",
            GrenierConstraint::IV => "(iv)",
            GrenierConstraint::IVPrime => "(iv')",
            GrenierConstraint::V => "(v)",
            GrenierConstraint::VI => "(vi)",
            GrenierConstraint::VII => "(vii)",
            GrenierConstraint::VIII => "(viii)",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrenierCheck {
    pub inside: bool,
    pub violated: Vec<GrenierConstraint>,
}

/// Slack absorbing rounding on the boundary (e.g. `x^2 + v^2 = 1` for FCC).
pub const GRENIER_ROUNDING_SLACK: f64 = 1e-12;

/// Membership in the closed Grenier domain.
pub fn in_grenier_domain(p: &LatticeParams) -> GrenierCheck {
    in_grenier_domain_tol(p, GRENIER_ROUNDING_SLACK)
}

/// Membership with every inequality relaxed by `tol`.
pub fn in_grenier_domain_tol(p: &LatticeParams, tol: f64) -> GrenierCheck {
    use GrenierConstraint::*;
    let (u, v, x, y, z) = (p.u, p.v, p.x, p.y, p.z);
    let v2 = v * v;
    let h = u * u * u / (2.0 * v2 * v2);
    let checks = [
        (I, (1.0 + x - y).powi(2) + v2 * ((1.0 - z).powi(2) + h) >= 1.0 - tol),
        (II, (x - y).powi(2) + v2 * ((1.0 - z).powi(2) + h) >= 1.0 - tol),
        (III, x * x + v2 >= 1.0 - tol),
        (IV, y * y + v2 * (z * z + h) >= 1.0 - tol),
        (IVPrime, (y - 1.0).powi(2) + v2 * (z * z + h) >= 1.0 - tol),
        (V, z * z + h >= 1.0 - tol),
        (VI, x >= -tol && x <= 0.5 + tol),
        (VII, y >= -tol && y <= 1.0 + tol),
        (VIII, z >= -tol && z <= 0.5 + tol),
    ];
    let violated: Vec<_> = checks.iter().filter(|(_, ok)| !ok).map(|(c, _)| *c).collect();
    GrenierCheck { inside: violated.is_empty() && p.u > 0.0 && p.v > 0.0, violated }
}

/// Grenier coordinates of the named lattices (HCP and OTHER have none).
pub fn named_params(label: &StructureLabel, volume: f64) -> Option<LatticeParams> {
    let s3 = 3f64.sqrt();
    let p = match *label {
        StructureLabel::SC => LatticeParams::from_shape([2f64.cbrt(), 1.0, 0.0, 0.0, 0.0], volume),
        StructureLabel::FCC => {
            LatticeParams::from_shape([1.0, s3 / 2.0, 0.5, 0.5, 1.0 / 3.0], volume)
        }
        StructureLabel::BCC => LatticeParams::from_shape(
            [2f64.powf(5.0 / 3.0) / 3.0, 2.0 * 2f64.sqrt() / 3.0, 1.0 / 3.0, 2.0 / 3.0, 0.5],
            volume,
        ),
        StructureLabel::SH { delta } if delta >= 1.0 => LatticeParams::from_shape(
            [(1.5 * delta * delta).cbrt(), s3 / 2.0, 0.5, 0.0, 0.0],
            volume,
        ),
        StructureLabel::SH { delta } if delta > 0.0 => LatticeParams::from_shape(
            [(1.5 / delta.powi(4)).cbrt(), 1.0 / delta, 0.0, 0.0, 0.5],
            volume,
        ),
        _ => return None,
    };
    Some(p)
}

/// Unit-cell geometry of a named structure with volume `volume` per point.
pub fn named_structure(label: &StructureLabel, volume: f64) -> Result<PeriodicSet> {
    if !(volume > 0.0) || !volume.is_finite() {
        return domain(format!("covolume must be positive, got {volume}"));
    }
    let k = volume.cbrt();
    let s3 = 3f64.sqrt();
    let ps = match *label {
        StructureLabel::SC => PeriodicSet::lattice(Basis::from_rows([
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ]))?,
        StructureLabel::FCC => PeriodicSet::lattice(
            Basis::from_rows([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.0]])
                .scaled(2f64.powf(-1.0 / 3.0)),
        )?,
        StructureLabel::BCC => PeriodicSet::lattice(
            Basis::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.5, 0.5]])
                .scaled(2f64.cbrt()),
        )?,
        StructureLabel::SH { delta } => {
            if !(delta > 0.0) || !delta.is_finite() {
                return domain(format!("SH ratio must be positive, got {delta}"));
            }
            PeriodicSet::lattice(
                Basis::from_rows([[1.0, 0.0, 0.0], [0.5, s3 / 2.0, 0.0], [0.0, 0.0, delta]])
                    .scaled((2.0 / (s3 * delta)).cbrt()),
            )?
        }
        StructureLabel::HCP => {
            let lambda = Basis::from_rows([
                [1.0, 0.0, 0.0],
                [0.5, s3 / 2.0, 0.0],
                [0.0, 0.0, (8.0f64 / 3.0).sqrt()],
            ]);
            // nearest-neighbour distance 1 gives volume 1/sqrt(2) per point
            let hcp = PeriodicSet::new(lambda, vec![[0.0; 3], [1.0 / 3.0, 1.0 / 3.0, 0.5]])?;
            return Ok(hcp.scaled((2f64.sqrt() * volume).cbrt()));
        }
        StructureLabel::OTHER => return domain("OTHER is not a concrete structure"),
    };
    Ok(ps.scaled(k))
}

// --- classification -----------------------------------------------------------

pub const FINGERPRINT_SHELLS: usize = 30;

/// Coordination shell: squared distance at unit density and point count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub distance2: f64,
    pub multiplicity: usize,
}

/// The first `count` coordination shells around orbit 0, rescaled to unit
/// density. Distances within `group_tol` (relative) form one shell.
pub fn shell_fingerprint(ps: &PeriodicSet, count: usize, group_tol: f64) -> Vec<Shell> {
    let scale = ps.density().powf(2.0 / 3.0);
    let mut radius = (3.0 * 8.0 * count as f64 / (4.0 * std::f64::consts::PI * ps.density())).cbrt();
    loop {
        let mut d2: Vec<f64> = ps.vectors_within(0, radius).iter().map(norm2).collect();
        d2.sort_by(f64::total_cmp);
        let mut shells: Vec<Shell> = Vec::new();
        for r2 in d2 {
            match shells.last_mut() {
                Some(s) if (r2 - s.distance2) <= group_tol * s.distance2 => s.multiplicity += 1,
                _ => shells.push(Shell { distance2: r2, multiplicity: 1 }),
            }
        }
        // the outermost shell may be cut by the sphere; only keep complete ones
        let limit = radius * radius * (1.0 - 4.0 * group_tol);
        let complete: Vec<Shell> = shells
            .into_iter()
            .filter(|s| s.distance2 * (1.0 + 2.0 * group_tol) < limit)
            .map(|s| Shell { distance2: s.distance2 * scale, multiplicity: s.multiplicity })
            .collect();
        if complete.len() >= count {
            return complete.into_iter().take(count).collect();
        }
        radius *= 1.4;
    }
}

fn fingerprints_match(a: &[Shell], b: &[Shell], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.multiplicity == y.multiplicity
                && (x.distance2 - y.distance2).abs() <= tol * y.distance2.max(x.distance2)
        })
}

fn reference_fingerprints() -> &'static [(StructureLabel, Vec<Shell>)] {
    static CELL: OnceLock<Vec<(StructureLabel, Vec<Shell>)>> = OnceLock::new();
    CELL.get_or_init(|| {
        [StructureLabel::SC, StructureLabel::FCC, StructureLabel::BCC, StructureLabel::HCP]
            .into_iter()
            .map(|l| {
                let ps = named_structure(&l, 1.0).expect("named structures are valid");
                (l, shell_fingerprint(&ps, FINGERPRINT_SHELLS, 1e-12))
            })
            .collect()
    })
}

/// Label `ps` by comparing its first 30 coordination shells against the named
/// structures at equal density. SH candidates take their in-plane spacing from
/// one of the observed shells; the smallest matching ratio wins.
pub fn classify(ps: &PeriodicSet, tol: f64) -> StructureLabel {
    let tol = if tol > 0.0 { tol } else { 1e-6 };
    let group = tol / 4.0;
    let fp = shell_fingerprint(ps, FINGERPRINT_SHELLS, group);
    for (label, reference) in reference_fingerprints() {
        if fingerprints_match(&fp, reference, tol) {
            return *label;
        }
    }
    let mut best: Option<f64> = None;
    for shell in &fp {
        // in-plane spacing a at unit density fixes delta = 2 / (sqrt(3) a^3)
        let a = shell.distance2.sqrt();
        let delta = 2.0 / (3f64.sqrt() * a * a * a);
        if best.is_some_and(|b| b <= delta) {
            continue;
        }
        let Ok(sh) = named_structure(&StructureLabel::SH { delta }, 1.0) else { continue };
        let sfp = shell_fingerprint(&sh, FINGERPRINT_SHELLS, 1e-12);
        if fingerprints_match(&fp, &sfp, tol) {
            best = Some(delta);
        }
    }
    match best {
        Some(delta) => StructureLabel::SH { delta },
        None => StructureLabel::OTHER,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fcc_params() -> LatticeParams {
        named_params(&StructureLabel::FCC, 1.0).unwrap()
    }

    #[test]
    fn determinant_follows_covolume() {
        let p = LatticeParams::new(1.3, 0.9, 0.2, 0.4, 0.1, 8.0).unwrap();
        assert_relative_eq!(basis_from_params(&p).unwrap().det(), 8.0, max_relative = 1e-14);
    }

    #[test]
    fn orthogonal_case_gram_is_diagonal_of_q() {
        let p = LatticeParams::new(1.0, 1.0, 0.0, 0.0, 0.0, 2f64.sqrt()).unwrap();
        let g = basis_from_params(&p).unwrap().gram();
        let q = quadratic_form(&p).unwrap();
        for i in 0..3 {
            assert_relative_eq!(g.gram[i][i], q.gram[i][i], max_relative = 1e-14);
            for j in 0..3 {
                if i != j {
                    assert!(g.gram[i][j].abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn fcc_minimal_vector_by_brute_force() {
        let q = quadratic_form(&fcc_params()).unwrap();
        let mut min = f64::INFINITY;
        let mut count = 0;
        for j in -3..=3 {
            for k in -3..=3 {
                for l in -3..=3 {
                    if (j, k, l) == (0, 0, 0) {
                        continue;
                    }
                    count += 1;
                    min = min.min(q.eval([j as f64, k as f64, l as f64]));
                }
            }
        }
        assert_eq!(count, 342);
        assert_relative_eq!(min, 2f64.cbrt(), max_relative = 1e-14);
    }

    #[test]
    fn quadratic_form_scales_with_volume() {
        let p = LatticeParams::new(1.1, 0.95, 0.3, 0.2, 0.4, 1.0).unwrap();
        let q1 = quadratic_form(&p).unwrap();
        let q8 = quadratic_form(&p.with_volume(8.0)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(q8.gram[i][j], 4.0 * q1.gram[i][j], max_relative = 1e-14);
            }
        }
        assert_relative_eq!(q1.det(), 1.0, max_relative = 1e-13);
    }

    #[test]
    fn grenier_membership_examples() {
        assert!(in_grenier_domain(&fcc_params()).inside);
        let bad = LatticeParams::new(1.0, 0.5, 0.0, 0.0, 0.0, 1.0).unwrap();
        let check = in_grenier_domain(&bad);
        assert!(!check.inside);
        assert!(check.violated.contains(&GrenierConstraint::III));
        let bad = LatticeParams { x: 0.6, ..fcc_params() };
        assert!(in_grenier_domain(&bad).violated.contains(&GrenierConstraint::VI));
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(LatticeParams::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(LatticeParams::new(1.0, -1.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(LatticeParams::new(1.0, 1.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(named_structure(&StructureLabel::SH { delta: 0.0 }, 1.0).is_err());
        assert!(named_structure(&StructureLabel::FCC, -1.0).is_err());
    }

    #[test]
    fn sc_shells() {
        let fp = shell_fingerprint(&named_structure(&StructureLabel::SC, 1.0).unwrap(), 3, 1e-12);
        let got: Vec<(f64, usize)> = fp.iter().map(|s| (s.distance2, s.multiplicity)).collect();
        assert_eq!(got.len(), 3);
        for (g, w) in got.iter().zip([(1.0, 6), (2.0, 12), (3.0, 8)]) {
            assert_relative_eq!(g.0, w.0, max_relative = 1e-14);
            assert_eq!(g.1, w.1);
        }
    }

    #[test]
    fn leading_multiplicities() {
        let lead = |l| shell_fingerprint(&named_structure(&l, 1.0).unwrap(), 3, 1e-12);
        let fcc = lead(StructureLabel::FCC);
        assert_eq!(fcc[0].multiplicity, 12);
        assert_eq!(fcc[1].multiplicity, 6);
        assert_eq!(fcc[2].multiplicity, 24);
        assert_relative_eq!(fcc[0].distance2, 2f64.cbrt(), max_relative = 1e-14);
        assert_eq!(lead(StructureLabel::BCC)[0].multiplicity, 8);
        let hcp = lead(StructureLabel::HCP);
        assert_eq!(hcp[0].multiplicity, 12);
        assert_relative_eq!(hcp[0].distance2, 2f64.cbrt(), max_relative = 1e-14);
    }

    #[test]
    fn named_structures_have_requested_density() {
        for l in [
            StructureLabel::SC,
            StructureLabel::FCC,
            StructureLabel::BCC,
            StructureLabel::HCP,
            StructureLabel::SH { delta: 0.7 },
        ] {
            let ps = named_structure(&l, 2.5).unwrap();
            assert_relative_eq!(ps.covolume(), 2.5, max_relative = 1e-14);
        }
        let hcp = named_structure(&StructureLabel::HCP, 1.0).unwrap();
        assert_eq!(hcp.n_orbits(), 2);
        assert_relative_eq!(hcp.cell_volume(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn named_params_are_reduced_and_round_trip() {
        for l in [
            StructureLabel::SC,
            StructureLabel::FCC,
            StructureLabel::BCC,
            StructureLabel::SH { delta: 0.6 },
            StructureLabel::SH { delta: 1.0 },
            StructureLabel::SH { delta: 1.7 },
        ] {
            let p = named_params(&l, 1.0).unwrap();
            let check = in_grenier_domain(&p);
            assert!(check.inside, "{l}: {:?}", check.violated);
            let got = classify(&lattice_from_params(&p).unwrap(), 1e-6);
            assert!(got.same_kind(&l), "{l} classified as {got}");
            if let (StructureLabel::SH { delta: a }, StructureLabel::SH { delta: b }) = (got, l) {
                assert_relative_eq!(a, b, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn classify_round_trips_named_structures() {
        for v in [0.3, 1.0, 5.0] {
            for l in [
                StructureLabel::SC,
                StructureLabel::FCC,
                StructureLabel::BCC,
                StructureLabel::HCP,
                StructureLabel::SH { delta: 1.3 },
            ] {
                let got = classify(&named_structure(&l, v).unwrap(), 1e-6);
                assert!(got.same_kind(&l), "{l} at V={v} classified as {got}");
            }
        }
        assert_eq!(classify(&named_structure(&StructureLabel::FCC, 2.7).unwrap(), 1e-6), StructureLabel::FCC);
    }

    #[test]
    fn perturbed_bcc_is_other() {
        let p = named_params(&StructureLabel::BCC, 1.0).unwrap();
        let q = LatticeParams::from_shape(p.shape().map(|c| c + 0.05), 1.0);
        assert_eq!(classify(&lattice_from_params(&q).unwrap(), 1e-6), StructureLabel::OTHER);
    }

    #[test]
    fn sh_at_hcp_ratio_is_not_hcp() {
        let delta = (8.0f64 / 3.0).sqrt();
        let sh = named_structure(&StructureLabel::SH { delta }, 1.0).unwrap();
        let label = classify(&sh, 1e-6);
        assert!(matches!(label, StructureLabel::SH { .. }), "{label}");
        assert_eq!(classify(&named_structure(&StructureLabel::HCP, 1.0).unwrap(), 1e-6), StructureLabel::HCP);
    }

    #[test]
    fn duplicate_shifts_rejected() {
        let b = Basis::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(PeriodicSet::new(b, vec![[0.0; 3], [0.5, 0.5, 0.5], [1.5, 0.5, -0.5]]).is_err());
    }
}
