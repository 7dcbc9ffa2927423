//! Globally adaptive 7/15-point Gauss-Kronrod quadrature.
//!
//! The interval with the largest local error estimate is bisected until the
//! summed estimate drops below `max(abs_tol, rel_tol * |I|)`.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Absolute tolerance used for every integral of the Marchenko-Pastur density.
pub const DEFAULT_ABS_TOL: f64 = 1e-8;

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Values that can be integrated: real or complex scalars.
pub trait Integrand:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct GaussKronrod {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for GaussKronrod {
    fn default() -> Self {
        GaussKronrod {
            abs_tol: DEFAULT_ABS_TOL,
            rel_tol: 1e-12,
            max_intervals: 20_000,
        }
    }
}

struct Segment<T> {
    lo: f64,
    hi: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod_rule<T: Integrand>(f: &impl Fn(f64) -> T, lo: f64, hi: f64) -> (T, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * KRONROD_WEIGHTS[7];
    let mut gauss = fc * GAUSS_WEIGHTS[3];
    for j in 0..7 {
        let dx = half * KRONROD_NODES[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * KRONROD_WEIGHTS[j];
        if j % 2 == 1 {
            gauss = gauss + pair * GAUSS_WEIGHTS[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).magnitude();
    (value, error)
}

impl GaussKronrod {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        GaussKronrod {
            abs_tol,
            ..Self::default()
        }
    }

    pub fn integrate<T: Integrand>(
        &self,
        f: impl Fn(f64) -> T,
        lo: f64,
        hi: f64,
    ) -> Result<Estimate<T>> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::domain(format!(
                "quadrature bounds must be finite, got [{lo}, {hi}]"
            )));
        }
        if lo == hi {
            return Ok(Estimate {
                value: T::zero(),
                error: 0.0,
                intervals: 0,
            });
        }
        let (value, error) = kronrod_rule(&f, lo, hi);
        let mut total = value;
        let mut total_error = error;
        let mut heap = BinaryHeap::new();
        heap.push(Segment {
            lo,
            hi,
            value,
            error,
        });
        loop {
            let target = self.abs_tol.max(self.rel_tol * total.magnitude());
            if total_error <= target {
                break;
            }
            if heap.len() >= self.max_intervals {
                return Err(Error::numerical(
                    "quadrature",
                    format!(
                        "no convergence on [{lo}, {hi}] after {} intervals: error estimate {total_error:.3e}, target {target:.3e}",
                        heap.len()
                    ),
                ));
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.lo + worst.hi);
            let (left, left_err) = kronrod_rule(&f, worst.lo, mid);
            let (right, right_err) = kronrod_rule(&f, mid, worst.hi);
            total = total - worst.value + left + right;
            total_error += left_err + right_err - worst.error;
            heap.push(Segment {
                lo: worst.lo,
                hi: mid,
                value: left,
                error: left_err,
            });
            heap.push(Segment {
                lo: mid,
                hi: worst.hi,
                value: right,
                error: right_err,
            });
        }
        // Re-sum to shed the drift of the incremental updates.
        let mut segments = heap.into_vec();
        segments.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let intervals = segments.len();
        let value = segments.iter().fold(T::zero(), |acc, s| acc + s.value);
        let error = segments.iter().map(|s| s.error).sum();
        Ok(Estimate {
            value,
            error,
            intervals,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_panel_is_exact_for_degree_22() {
        // A 15-point Kronrod rule integrates polynomials up to degree 22 exactly.
        let (v, _) = kronrod_rule(&|x: f64| x.powi(22), -1.0, 1.0);
        assert!((v - 2.0 / 23.0).abs() < 1e-15);
        let (v, _) = kronrod_rule(&|x: f64| x.powi(21) + 3.0 * x * x, 0.0, 1.0);
        assert!((v - (1.0 / 22.0 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let (k, _) = kronrod_rule(&|_| 1.0, -1.0, 1.0);
        assert!((k - 2.0).abs() < 1e-15);
        let g: f64 = 2.0 * GAUSS_WEIGHTS[..3].iter().sum::<f64>() + GAUSS_WEIGHTS[3];
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn adapts_to_sqrt_singularity() {
        let q = GaussKronrod::with_abs_tol(1e-10);
        let est = q.integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0).unwrap();
        assert!((est.value - 2.0).abs() < 1e-8, "{}", est.value);
    }

    #[test]
    fn complex_integrand() {
        let q = GaussKronrod::default();
        let est = q
            .integrate(
                |t: f64| Complex64::new(0.0, t).exp(),
                0.0,
                std::f64::consts::PI,
            )
            .unwrap();
        assert!((est.value - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn empty_interval_and_bad_bounds() {
        let q = GaussKronrod::default();
        assert_eq!(q.integrate(|x: f64| x, 1.0, 1.0).unwrap().value, 0.0);
        assert!(q.integrate(|x: f64| x, 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn interval_budget_exhaustion_is_reported() {
        let q = GaussKronrod {
            abs_tol: 1e-300,
            rel_tol: 0.0,
            max_intervals: 4,
        };
        let err = q
            .integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0)
            .unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
    }
}
