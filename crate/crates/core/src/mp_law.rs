//! Closed-form analytics of the Marchenko-Pastur law with ratio `c`.
//!
//! The law is `max(1 - 1/c, 0) * delta_0` plus the density
//! `sqrt((b - x)(x - a)) / (2 pi c x)` on `[a, b]`, with
//! `a = (1 - sqrt c)^2` and `b = (1 + sqrt c)^2`.
//!
//! Integrals of the density are taken in the angle variable
//! `x = a + (b - a) sin^2(theta)`, which removes the square-root behaviour at
//! both edges. The pulled-back integrand is smooth on `[0, pi/2]`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussKronrod;

/// A spectral parameter in the open upper half plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint")]
pub struct ComplexPoint {
    re: f64,
    im: f64,
}

#[derive(Deserialize)]
struct RawPoint {
    re: f64,
    im: f64,
}

impl TryFrom<RawPoint> for ComplexPoint {
    type Error = Error;
    fn try_from(raw: RawPoint) -> Result<Self> {
        ComplexPoint::new(raw.re, raw.im)
    }
}

impl ComplexPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(re.is_finite() && im.is_finite()) {
            return Err(Error::domain(format!(
                "spectral parameter {re} + {im}i is not finite"
            )));
        }
        if im <= 0.0 {
            return Err(Error::domain(format!(
                "spectral parameter needs Im z > 0, got {re} + {im}i"
            )));
        }
        Ok(ComplexPoint { re, im })
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    /// Distance to the real axis, `v = Im z`.
    pub fn v(&self) -> f64 {
        self.im
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        ComplexPoint::new(self.re * factor, self.im * factor)
    }
}

impl From<ComplexPoint> for Complex64 {
    fn from(z: ComplexPoint) -> Self {
        z.to_complex()
    }
}

/// Stieltjes transform of the law at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StieltjesValue {
    /// `s(z) = integral of mu_c(d lambda) / (lambda - z)`.
    pub s: Complex64,
    /// `S(z) = c * s(z)`, the root of `z S^2 + (z - 1 + c) S + c = 0`.
    pub normalized: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpLaw {
    c: f64,
    a: f64,
    b: f64,
    atom: f64,
}

impl MpLaw {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::domain(format!(
                "ratio c must be positive and finite, got {c}"
            )));
        }
        let root = c.sqrt();
        Ok(MpLaw {
            c,
            a: (1.0 - root) * (1.0 - root),
            b: (1.0 + root) * (1.0 + root),
            atom: (1.0 - 1.0 / c).max(0.0),
        })
    }

    pub fn ratio(&self) -> f64 {
        self.c
    }

    pub fn lower_edge(&self) -> f64 {
        self.a
    }

    pub fn upper_edge(&self) -> f64 {
        self.b
    }

    pub fn support(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Mass of the point at zero.
    pub fn atom(&self) -> f64 {
        self.atom
    }

    /// Continuous part of the law; zero outside `[a, b]` and at `x = 0`.
    pub fn density(&self, x: f64) -> f64 {
        if !(x >= self.a && x <= self.b) || x <= 0.0 {
            return 0.0;
        }
        let radicand = ((self.b - x) * (x - self.a)).max(0.0);
        radicand.sqrt() / (2.0 * PI * self.c * x)
    }

    fn point_at(&self, theta: f64) -> f64 {
        let s = theta.sin();
        self.a + (self.b - self.a) * s * s
    }

    fn angle_of(&self, x: f64) -> f64 {
        if x <= self.a {
            0.0
        } else if x >= self.b {
            FRAC_PI_2
        } else {
            ((x - self.a) / (self.b - self.a)).sqrt().asin()
        }
    }

    /// `density(x(theta)) * dx/dtheta`.
    fn angular_weight(&self, theta: f64) -> f64 {
        let (s, co) = theta.sin_cos();
        let width = self.b - self.a;
        if self.a == 0.0 {
            width * co * co / (PI * self.c)
        } else {
            width * width * s * s * co * co / (PI * self.c * self.point_at(theta))
        }
    }

    fn quadrature(&self) -> GaussKronrod {
        GaussKronrod::default()
    }

    fn angular_mass(&self, from: f64, to: f64) -> Result<f64> {
        Ok(self
            .quadrature()
            .integrate(|t| self.angular_weight(t), from, to)?
            .value)
    }

    /// Integral of the density over `[a, b]`; `1 - atom` in exact arithmetic.
    pub fn continuous_mass(&self) -> Result<f64> {
        self.angular_mass(0.0, FRAC_PI_2)
    }

    /// Distribution function `mu_c((-inf, x])`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::domain("cdf evaluated at NaN"));
        }
        if x < 0.0 {
            return Ok(0.0);
        }
        if x < self.a {
            return Ok(self.atom);
        }
        let mass = self.angular_mass(0.0, self.angle_of(x))?;
        Ok((self.atom + mass).clamp(0.0, 1.0))
    }

    /// CDF at many ascending points, integrating only the gaps between
    /// consecutive points.
    pub fn cdf_sorted(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(xs.len());
        let mut theta_prev = 0.0;
        let mut mass = 0.0;
        let mut last = f64::NEG_INFINITY;
        for &x in xs {
            if x.is_nan() || x < last {
                return Err(Error::domain("cdf_sorted needs ascending, non-NaN points"));
            }
            last = x;
            if x < 0.0 {
                out.push(0.0);
                continue;
            }
            let theta = self.angle_of(x);
            if theta > theta_prev {
                mass += self.angular_mass(theta_prev, theta)?;
                theta_prev = theta;
            }
            out.push((self.atom + mass).clamp(0.0, 1.0));
        }
        Ok(out)
    }

    /// Smallest `x` with `cdf(x) >= u`, by bisection on the angle variable.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::domain(format!(
                "quantile level must lie in [0, 1], got {u}"
            )));
        }
        if u <= self.atom {
            return Ok(if self.atom > 0.0 { 0.0 } else { self.a });
        }
        let target = u - self.atom;
        let (mut lo, mut hi) = (0.0, FRAC_PI_2);
        let mut mass_lo = 0.0;
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            let m = mass_lo + self.angular_mass(lo, mid)?;
            if m < target {
                lo = mid;
                mass_lo = m;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        Ok(self.point_at(0.5 * (lo + hi)))
    }

    /// Both roots of `z S^2 + (z - 1 + c) S + c = 0`, computed without
    /// cancellation: the larger root first, the other from the product `c / z`.
    pub fn fixed_point_roots(&self, z: Complex64) -> Result<[Complex64; 2]> {
        if z.norm() == 0.0 {
            return Err(Error::domain("fixed-point quadratic degenerates at z = 0"));
        }
        let lin = z + (self.c - 1.0);
        let disc = (lin * lin - z * (4.0 * self.c)).sqrt();
        let q = if (lin.conj() * disc).re >= 0.0 {
            -(lin + disc) * 0.5
        } else {
            -(lin - disc) * 0.5
        };
        Ok([q / z, self.c / q])
    }

    fn value_from_normalized(&self, normalized: Complex64) -> StieltjesValue {
        StieltjesValue {
            s: normalized / self.c,
            normalized,
        }
    }

    /// Stieltjes transform for `Im z > 0`: the root with non-negative
    /// imaginary part.
    pub fn stieltjes(&self, z: ComplexPoint) -> Result<StieltjesValue> {
        let [r1, r2] = self.fixed_point_roots(z.to_complex())?;
        let root = if r1.im >= r2.im { r1 } else { r2 };
        if root.im < 0.0 {
            return Err(Error::numerical(
                "Stieltjes branch selection",
                format!(
                    "both roots {r1} and {r2} lie in the lower half plane at z = {}",
                    z.to_complex()
                ),
            ));
        }
        Ok(self.value_from_normalized(root))
    }

    /// Stieltjes transform at a real point off the support, continued from
    /// the upper half plane.
    pub fn stieltjes_real(&self, x: f64) -> Result<StieltjesValue> {
        if !x.is_finite() {
            return Err(Error::domain(format!(
                "real spectral parameter {x} is not finite"
            )));
        }
        if x == 0.0 {
            if self.c < 1.0 {
                // Linear limit of the quadratic: (c - 1) S + c = 0.
                return Ok(self.value_from_normalized(Complex64::new(self.c / (1.0 - self.c), 0.0)));
            }
            return Err(Error::domain("z = 0 carries mass of the law for c >= 1"));
        }
        if (x - self.a) * (x - self.b) <= 0.0 {
            return Err(Error::domain(format!(
                "z = {x} lies on the support [{}, {}]",
                self.a, self.b
            )));
        }
        let eps = 1e-7 * x.abs().max(1.0);
        let above = self.stieltjes(ComplexPoint::new(x, eps)?)?.normalized;
        let [r1, r2] = self.fixed_point_roots(Complex64::new(x, 0.0))?;
        let root = if (r1 - above).norm() <= (r2 - above).norm() {
            r1
        } else {
            r2
        };
        Ok(self.value_from_normalized(Complex64::new(root.re, 0.0)))
    }

    /// `s(z)` from its integral definition: the atom's pole plus adaptive
    /// quadrature of `density(lambda) / (lambda - z)`. Independent of the
    /// fixed-point route.
    pub fn stieltjes_by_quadrature(&self, z: ComplexPoint) -> Result<Complex64> {
        let zc = z.to_complex();
        let continuous = self
            .quadrature()
            .integrate(
                |t| Complex64::new(self.angular_weight(t), 0.0) / (self.point_at(t) - zc),
                0.0,
                FRAC_PI_2,
            )?
            .value;
        Ok(continuous + self.atom / (-zc))
    }
}

pub fn mp_support(c: f64) -> Result<(f64, f64)> {
    Ok(MpLaw::new(c)?.support())
}

pub fn mp_density(x: f64, c: f64) -> Result<f64> {
    Ok(MpLaw::new(c)?.density(x))
}

pub fn mp_atom(c: f64) -> Result<f64> {
    Ok(MpLaw::new(c)?.atom())
}

pub fn mp_cdf(x: f64, c: f64) -> Result<f64> {
    MpLaw::new(c)?.cdf(x)
}

pub fn mp_stieltjes(z: ComplexPoint, c: f64) -> Result<StieltjesValue> {
    MpLaw::new(c)?.stieltjes(z)
}
