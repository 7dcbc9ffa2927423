//! Deterministic resolvent bounds and identities behind the cavity argument.
//!
//! All complex resolvents `(C - zI)^-1` are evaluated through one real
//! symmetric eigendecomposition of `C`, after which norms, traces and
//! quadratic forms are diagonal sums.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, SymmetricEigen};
use crate::mp_law::ComplexPoint;
use crate::spectra::Spectrum;

/// Relative slack granted to inequalities for round-off.
pub const INEQUALITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundId {
    /// Resolvent norm at most `1/v`.
    #[serde(rename = "L1.1")]
    ResolventNorm,
    /// Rank-one change of the resolvent trace at most `1/v`.
    #[serde(rename = "L1.2")]
    TracePerturbation,
    /// Updated quadratic form at most `1 + |z|/v`.
    #[serde(rename = "L1.3")]
    UpdatedQuadraticForm,
    /// `Im(z + z tr(C - zI)^-1) >= v` and `Im tr(C - zI)^-1 > 0`.
    #[serde(rename = "L1.4")]
    TraceImaginaryPart,
    /// `Im(z + z x^T (C - zI)^-1 x) >= v`.
    #[serde(rename = "L1.5")]
    QuadraticFormImaginaryPart,
    #[serde(rename = "SM")]
    ShermanMorrison,
    #[serde(rename = "TRACE")]
    TraceIdentity,
    /// `|1 + w| >= Im(z + z w) / |z|`.
    #[serde(rename = "W-INEQ")]
    ShiftedModulus,
    /// `E |x^T (A - D) x|^2 <= 4 tr(A A*)`.
    #[serde(rename = "OFFDIAG")]
    OffDiagonalMoment,
}

impl BoundId {
    pub const LEMMA: [BoundId; 5] = [
        BoundId::ResolventNorm,
        BoundId::TracePerturbation,
        BoundId::UpdatedQuadraticForm,
        BoundId::TraceImaginaryPart,
        BoundId::QuadraticFormImaginaryPart,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            BoundId::ResolventNorm => "L1.1",
            BoundId::TracePerturbation => "L1.2",
            BoundId::UpdatedQuadraticForm => "L1.3",
            BoundId::TraceImaginaryPart => "L1.4",
            BoundId::QuadraticFormImaginaryPart => "L1.5",
            BoundId::ShermanMorrison => "SM",
            BoundId::TraceIdentity => "TRACE",
            BoundId::ShiftedModulus => "W-INEQ",
            BoundId::OffDiagonalMoment => "OFFDIAG",
        }
    }
}

/// One evaluated inequality `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: BoundId,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl BoundReport {
    pub fn new(name: BoundId, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        BoundReport {
            name,
            lhs,
            rhs,
            slack,
            pass: slack >= -INEQUALITY_SLACK * rhs.abs().max(1.0),
        }
    }

    /// Also requires a strict side condition to hold.
    fn and_strict(mut self, holds: bool) -> Self {
        self.pass &= holds;
        self
    }
}

/// A PSD matrix `C`, a vector `x` and a spectral parameter `z`.
#[derive(Debug, Clone)]
pub struct ResolventProbe {
    c: DMatrix<f64>,
    x: DVector<f64>,
    z: ComplexPoint,
    base: SymmetricEigen,
    updated: SymmetricEigen,
}

impl ResolventProbe {
    pub fn new(c: DMatrix<f64>, x: DVector<f64>, z: ComplexPoint) -> Result<Self> {
        let p = c.nrows();
        if p == 0 || c.ncols() != p || x.len() != p {
            return Err(Error::domain(format!(
                "probe needs a square C and matching x, got {}x{} and {}",
                c.nrows(),
                c.ncols(),
                x.len()
            )));
        }
        if c != c.transpose() {
            return Err(Error::domain("probe matrix C is not exactly symmetric"));
        }
        let base = symmetric_eigen(&c)?;
        let top = base.values[p - 1].abs().max(1.0);
        if base.values[0] < -1e-10 * top {
            return Err(Error::domain(format!(
                "probe matrix C is not PSD: smallest eigenvalue {:.3e}",
                base.values[0]
            )));
        }
        let updated = symmetric_eigen(&(&c + &x * x.transpose()))?;
        Ok(ResolventProbe {
            c,
            x,
            z,
            base,
            updated,
        })
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn z(&self) -> ComplexPoint {
        self.z
    }

    pub fn with_z(&self, z: ComplexPoint) -> Self {
        ResolventProbe { z, ..self.clone() }
    }

    fn zc(&self) -> Complex64 {
        self.z.to_complex()
    }

    /// `||(C - zI)^-1||`.
    pub fn resolvent_norm(&self) -> f64 {
        let z = self.zc();
        self.base
            .values
            .iter()
            .map(|&l| (l - z).inv().norm())
            .fold(0.0, f64::max)
    }

    /// `tr(C - zI)^-1`.
    pub fn trace(&self) -> Complex64 {
        let z = self.zc();
        self.base.values.iter().map(|&l| (l - z).inv()).sum()
    }

    /// `tr(C + x x^T - zI)^-1`.
    pub fn updated_trace(&self) -> Complex64 {
        let z = self.zc();
        self.updated.values.iter().map(|&l| (l - z).inv()).sum()
    }

    /// `x^T (C - zI)^-1 x`.
    pub fn quadratic_form(&self) -> Complex64 {
        let z = self.zc();
        self.base
            .quadratic_form(self.x.as_slice(), |l, w| Complex64::from(w) / (l - z))
    }

    /// `x^T (C + x x^T - zI)^-1 x`, from the eigendecomposition of the updated matrix.
    pub fn updated_quadratic_form(&self) -> Complex64 {
        let z = self.zc();
        self.updated
            .quadratic_form(self.x.as_slice(), |l, w| Complex64::from(w) / (l - z))
    }
}

/// The five resolvent bounds for one probe, in order L1.1 to L1.5.
pub fn check_lemma1(probe: &ResolventProbe) -> Vec<BoundReport> {
    let z = probe.zc();
    let v = probe.z.v();
    let trace = probe.trace();
    let q = probe.quadratic_form();
    vec![
        BoundReport::new(BoundId::ResolventNorm, probe.resolvent_norm(), 1.0 / v),
        BoundReport::new(
            BoundId::TracePerturbation,
            (probe.updated_trace() - trace).norm(),
            1.0 / v,
        ),
        BoundReport::new(
            BoundId::UpdatedQuadraticForm,
            probe.updated_quadratic_form().norm(),
            1.0 + z.norm() / v,
        ),
        BoundReport::new(BoundId::TraceImaginaryPart, v, (z + z * trace).im)
            .and_strict(trace.im > 0.0),
        BoundReport::new(BoundId::QuadraticFormImaginaryPart, v, (z + z * q).im),
    ]
}

/// The three expressions for the updated quadratic form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShermanMorrisonForms {
    pub direct: Complex64,
    pub rank_one: Complex64,
    pub shifted: Complex64,
}

pub fn sherman_morrison_forms(probe: &ResolventProbe) -> ShermanMorrisonForms {
    let z = probe.zc();
    let q = probe.quadratic_form();
    ShermanMorrisonForms {
        direct: probe.updated_quadratic_form(),
        rank_one: q - q * q / (1.0 + q),
        shifted: 1.0 - z / (z + z * q),
    }
}

/// Largest pairwise discrepancy among the three forms, relative to
/// `max(1, largest modulus)`.
pub fn sherman_morrison_gap(probe: &ResolventProbe) -> f64 {
    let f = sherman_morrison_forms(probe);
    let scale = f
        .direct
        .norm()
        .max(f.rank_one.norm())
        .max(f.shifted.norm())
        .max(1.0);
    let gap = (f.direct - f.rank_one)
        .norm()
        .max((f.direct - f.shifted).norm())
        .max((f.rank_one - f.shifted).norm());
    gap / scale
}

/// `|sum_k x_k^T (B - z n I)^-1 x_k - z n tr(B - z n I)^-1 - p|` for
/// `B = sum_k x_k x_k^T` over the `n + 1` given columns. Zero for every
/// realization in exact arithmetic.
pub fn trace_identity_residual(columns: &[DVector<f64>], z: ComplexPoint, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    if columns.len() != n + 1 {
        return Err(Error::domain(format!(
            "expected n + 1 = {} columns, got {}",
            n + 1,
            columns.len()
        )));
    }
    let p = columns[0].len();
    if p == 0 || columns.iter().any(|c| c.len() != p) {
        return Err(Error::domain("columns must share one nonzero length"));
    }
    let mut b = DMatrix::zeros(p, p);
    for x in columns {
        b.ger(1.0, x, x, 1.0);
    }
    let eig = symmetric_eigen(&b)?;
    let shift = z.to_complex() * n as f64;
    let quad: Complex64 = columns
        .iter()
        .map(|x| eig.quadratic_form(x.as_slice(), |l, w| Complex64::from(w) / (l - shift)))
        .sum();
    let trace: Complex64 = eig.values.iter().map(|&l| (l - shift).inv()).sum();
    Ok((quad - shift * trace - p as f64).norm())
}

/// `S_n / (1 + S_n) - z S_n - p/n` with `S_n` the normalized empirical
/// Stieltjes transform.
pub fn fixed_point_residual(spectrum: &Spectrum, z: ComplexPoint) -> Complex64 {
    let s = spectrum.normalized_stieltjes(z);
    let zc = z.to_complex();
    s / (1.0 + s) - zc * s - spectrum.ratio()
}

/// `Im(z + z w) / |z| <= |1 + w|`.
pub fn shifted_modulus_bound(w: Complex64, z: ComplexPoint) -> BoundReport {
    let zc = z.to_complex();
    BoundReport::new(
        BoundId::ShiftedModulus,
        (zc + zc * w).im / zc.norm(),
        (1.0 + w).norm(),
    )
}
