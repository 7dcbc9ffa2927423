//! Monte Carlo diagnostics for quadratic-form concentration, the Lindeberg
//! condition, and the two moment bounds used to relate them.
//!
//! Convergence in probability is read off a geometric sweep over `p`: a
//! model is consistent with concentration when the statistic at the largest
//! `p` is below a threshold and the sweep does not increase beyond noise.

use libm::erfc;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, symmetric_eigenvalues};
use crate::mp_law::ComplexPoint;
use crate::resolvent::{BoundId, BoundReport};
use crate::sampling::{ColumnModel, ModelKind, Seed};
use crate::stats::McEstimate;

/// Tolerance on `||A|| <= 1` for generated test matrices.
pub const NORM_TOL: f64 = 1e-10;

/// Real symmetric PSD test matrices with spectral norm at most one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyKind {
    Identity,
    /// Orthogonal projection onto a uniformly random `rank`-dimensional subspace.
    RandomProjection {
        rank: usize,
    },
    /// `v * Im (C - zI)^-1` for an independent Gaussian sample covariance `C`
    /// with aspect ratio `source_ratio`; eigenvalues `v^2 / ((l - u)^2 + v^2)`.
    ResolventReal {
        z: ComplexPoint,
        source_ratio: f64,
    },
    /// Diagonal with i.i.d. entries in {0, 1}.
    DiagonalSigns,
    /// `G G^T / ||G G^T||` with Gaussian square `G`.
    RandomPsd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMatrixFamily {
    pub kind: FamilyKind,
    pub p: usize,
}

/// A drawn test matrix in the cheapest representation for `x^T A x`.
#[derive(Debug, Clone)]
pub enum TestMatrix {
    Identity(usize),
    Diagonal(DVector<f64>),
    /// `Q Q^T` with orthonormal columns `Q`.
    Projection(DMatrix<f64>),
    Dense(DMatrix<f64>),
}

impl TestMatrix {
    pub fn dim(&self) -> usize {
        match self {
            TestMatrix::Identity(p) => *p,
            TestMatrix::Diagonal(d) => d.len(),
            TestMatrix::Projection(q) => q.nrows(),
            TestMatrix::Dense(a) => a.nrows(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            TestMatrix::Identity(p) => *p as f64,
            TestMatrix::Diagonal(d) => d.sum(),
            TestMatrix::Projection(q) => q.ncols() as f64,
            TestMatrix::Dense(a) => a.trace(),
        }
    }

    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        match self {
            TestMatrix::Identity(_) => x.norm_squared(),
            TestMatrix::Diagonal(d) => d.iter().zip(x.iter()).map(|(d, x)| d * x * x).sum(),
            TestMatrix::Projection(q) => (q.transpose() * x).norm_squared(),
            TestMatrix::Dense(a) => x.dot(&(a * x)),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            TestMatrix::Identity(p) => DMatrix::identity(*p, *p),
            TestMatrix::Diagonal(d) => DMatrix::from_diagonal(d),
            TestMatrix::Projection(q) => q * q.transpose(),
            TestMatrix::Dense(a) => a.clone(),
        }
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

impl TestMatrixFamily {
    pub fn new(kind: FamilyKind, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::config("test matrix dimension must be at least 1"));
        }
        match &kind {
            FamilyKind::RandomProjection { rank } if *rank == 0 || *rank > p => {
                return Err(Error::config(format!(
                    "projection rank must lie in 1..={p}, got {rank}"
                )))
            }
            FamilyKind::ResolventReal { source_ratio, .. }
                if !(source_ratio.is_finite() && *source_ratio > 0.0) =>
            {
                return Err(Error::config("resolvent source ratio must be positive"))
            }
            _ => {}
        }
        Ok(TestMatrixFamily { kind, p })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TestMatrix> {
        let p = self.p;
        Ok(match &self.kind {
            FamilyKind::Identity => TestMatrix::Identity(p),
            FamilyKind::DiagonalSigns => TestMatrix::Diagonal(DVector::from_fn(p, |_, _| {
                if rng.random::<bool>() {
                    1.0
                } else {
                    0.0
                }
            })),
            FamilyKind::RandomProjection { rank } => {
                let q = gaussian_matrix(rng, p, *rank).qr().q();
                TestMatrix::Projection(q)
            }
            FamilyKind::ResolventReal { z, source_ratio } => {
                let n = ((p as f64 / source_ratio).round() as usize).max(1);
                let g = gaussian_matrix(rng, p, n);
                let c = (&g * g.transpose()) / n as f64;
                let eig = symmetric_eigen(&c)?;
                let (u, v) = (z.re(), z.im());
                let weights = DVector::from_iterator(
                    p,
                    eig.values
                        .iter()
                        .map(|l| v * v / ((l - u) * (l - u) + v * v)),
                );
                let vecs = eig.vectors.expect("requested eigenvectors");
                let scaled = DMatrix::from_fn(p, p, |i, j| vecs[(i, j)] * weights[j]);
                let a = &scaled * vecs.transpose();
                TestMatrix::Dense((&a + a.transpose()) * 0.5)
            }
            FamilyKind::RandomPsd => {
                let g = gaussian_matrix(rng, p, p);
                let a = &g * g.transpose();
                let a = (&a + a.transpose()) * 0.5;
                let top = symmetric_eigenvalues(&a)?[p - 1];
                if top <= 0.0 {
                    return Err(Error::numerical(
                        "random PSD test matrix",
                        "zero matrix drawn",
                    ));
                }
                TestMatrix::Dense(a / top)
            }
        })
    }
}

/// Which quantity a [`ConditionReport`] sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    QuadFormDeviation,
    Lindeberg,
    OffDiagMoment,
    WeightedSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub model: ModelKind,
    pub statistic: Statistic,
    pub p_values_grid: Vec<usize>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Closed-form values where the entry law allows them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<Vec<f64>>,
    pub trials: usize,
    pub seed: Seed,
}

impl ConditionReport {
    /// Nonincreasing across the sweep up to three combined standard errors.
    pub fn is_nonincreasing_within_noise(&self) -> bool {
        self.estimates
            .windows(2)
            .zip(self.std_errors.windows(2))
            .all(|(e, s)| e[1] <= e[0] + 3.0 * (s[0] * s[0] + s[1] * s[1]).sqrt())
    }

    pub fn last_estimate(&self) -> f64 {
        self.estimates.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConsistentWithA,
    ViolatesA,
    Inconclusive,
}

/// Reads a quadratic-form sweep against `threshold`.
pub fn assess_concentration(report: &ConditionReport, threshold: f64) -> Verdict {
    if report.last_estimate() > threshold {
        Verdict::ViolatesA
    } else if report.is_nonincreasing_within_noise() {
        Verdict::ConsistentWithA
    } else {
        Verdict::Inconclusive
    }
}

fn require_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        Err(Error::domain("at least one trial is required"))
    } else {
        Ok(())
    }
}

fn require_iid(model: &ColumnModel, what: &str) -> Result<()> {
    if model.kind().has_iid_entries() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{what} is only defined for i.i.d.-entry models, not {}",
            model.kind().name()
        )))
    }
}

/// Empirical second moment of `(x^T A x - tr A) / p` over independent
/// draws of `(x, A)`; trial `t` uses `seed.substream(t)`.
pub fn quadform_deviation(
    model: &ColumnModel,
    family: &TestMatrixFamily,
    trials: usize,
    seed: Seed,
) -> Result<McEstimate> {
    require_trials(trials)?;
    if family.p != model.p() {
        return Err(Error::domain(format!(
            "model dimension {} does not match test matrix dimension {}",
            model.p(),
            family.p
        )));
    }
    let p = model.p() as f64;
    let samples = (0..trials)
        .map(|t| {
            let mut rng = seed.substream(t as u64).rng();
            let x = model.draw(&mut rng);
            let a = family.draw(&mut rng)?;
            let dev = (a.quadratic_form(&x) - a.trace()) / p;
            Ok(dev * dev)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_samples(&samples))
}

/// Closed form of `E X^2 1(|X| > t)` for the i.i.d. entry laws.
pub fn exact_truncated_second_moment(kind: &ModelKind, p: usize, t: f64) -> Option<f64> {
    match kind {
        ModelKind::IidGaussian => {
            let phi = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
            Some(2.0 * t * phi + erfc(t / std::f64::consts::SQRT_2))
        }
        ModelKind::IidRademacher => Some(if 1.0 > t { 1.0 } else { 0.0 }),
        ModelKind::IidSparseSpike { q } => {
            let q = q.unwrap_or(p as f64);
            Some(if q.sqrt() > t { 1.0 } else { 0.0 })
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindebergEstimate {
    pub monte_carlo: McEstimate,
    pub exact: Option<f64>,
}

/// `p^-1 sum_k E X_k^2 1(|X_k| > eps sqrt p)` for the model's dimension.
pub fn lindeberg_statistic(
    model: &ColumnModel,
    epsilon: f64,
    trials: usize,
    seed: Seed,
) -> Result<LindebergEstimate> {
    require_trials(trials)?;
    require_iid(model, "the Lindeberg statistic")?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::domain(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let p = model.p();
    let t = epsilon * (p as f64).sqrt();
    let mut buf = vec![0.0; p];
    let samples: Vec<f64> = (0..trials)
        .map(|k| {
            model.fill(&mut seed.substream(k as u64).rng(), &mut buf);
            buf.iter()
                .filter(|x| x.abs() > t)
                .fold(0.0, |acc, x| acc + x * x)
                / p as f64
        })
        .collect();
    Ok(LindebergEstimate {
        monte_carlo: McEstimate::from_samples(&samples),
        exact: exact_truncated_second_moment(model.kind(), p, t),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffDiagCheck {
    /// `lhs` is the estimate less three standard errors, `rhs = 4 tr(A A*)`.
    pub report: BoundReport,
    pub estimate: McEstimate,
    /// `2 sum_{j != k} |a_jk|^2`, the intermediate value of the bound.
    pub pair_sum: f64,
}

/// Estimates `E |x^T (A - D) x|^2` (`D` the diagonal of `A`) and compares it
/// with `4 tr(A A*)`.
pub fn offdiag_moment_check(
    model: &ColumnModel,
    a: &DMatrix<Complex64>,
    trials: usize,
    seed: Seed,
) -> Result<OffDiagCheck> {
    require_trials(trials)?;
    require_iid(model, "the off-diagonal moment check")?;
    let p = model.p();
    if a.shape() != (p, p) {
        return Err(Error::domain(format!(
            "matrix is {}x{}, model dimension is {p}",
            a.nrows(),
            a.ncols()
        )));
    }
    let norm = a.singular_values().max();
    if norm > 1.0 + NORM_TOL {
        return Err(Error::domain(format!(
            "matrix has spectral norm {norm} > 1"
        )));
    }
    let mut x = vec![0.0; p];
    let samples: Vec<f64> = (0..trials)
        .map(|k| {
            model.fill(&mut seed.substream(k as u64).rng(), &mut x);
            let mut form = Complex64::new(0.0, 0.0);
            for j in 0..p {
                for i in 0..p {
                    if i != j {
                        form += a[(i, j)] * (x[i] * x[j]);
                    }
                }
            }
            form.norm_sqr()
        })
        .collect();
    let estimate = McEstimate::from_samples(&samples);
    let frobenius: f64 = a.iter().map(|v| v.norm_sqr()).sum();
    let off: f64 = a
        .iter()
        .enumerate()
        .filter(|(idx, _)| idx % p != idx / p)
        .map(|(_, v)| v.norm_sqr())
        .sum();
    let report = BoundReport::new(
        BoundId::OffDiagonalMoment,
        estimate.mean - 3.0 * estimate.std_error,
        4.0 * frobenius,
    );
    Ok(OffDiagCheck {
        report,
        estimate,
        pair_sum: 2.0 * off,
    })
}

/// Mean absolute value of `p^-1 sum_k a_k (X_k^2 - 1)`.
pub fn weighted_squares_check(
    model: &ColumnModel,
    coefficients: &[f64],
    trials: usize,
    seed: Seed,
) -> Result<McEstimate> {
    require_trials(trials)?;
    let p = model.p();
    if coefficients.len() != p {
        return Err(Error::domain(format!(
            "expected {p} coefficients, got {}",
            coefficients.len()
        )));
    }
    if let Some(bad) = coefficients.iter().find(|a| a.is_nan() || a.abs() > 1.0) {
        return Err(Error::domain(format!(
            "coefficient {bad} lies outside [-1, 1]"
        )));
    }
    let mut x = vec![0.0; p];
    let samples: Vec<f64> = (0..trials)
        .map(|k| {
            model.fill(&mut seed.substream(k as u64).rng(), &mut x);
            let s: f64 = coefficients
                .iter()
                .zip(&x)
                .map(|(a, x)| a * (x * x - 1.0))
                .sum();
            (s / p as f64).abs()
        })
        .collect();
    Ok(McEstimate::from_samples(&samples))
}

/// Settings for a sweep of one statistic over several dimensions.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub model: ModelKind,
    pub p_grid: Vec<usize>,
    pub trials: usize,
    pub seed: Seed,
}

impl SweepSpec {
    fn model_at(&self, p: usize) -> Result<ColumnModel> {
        ColumnModel::new(self.model.clone(), p)
    }

    fn report(
        &self,
        statistic: Statistic,
        estimates: Vec<McEstimate>,
        exact: Option<Vec<f64>>,
    ) -> ConditionReport {
        ConditionReport {
            model: self.model.clone(),
            statistic,
            p_values_grid: self.p_grid.clone(),
            estimates: estimates.iter().map(|e| e.mean).collect(),
            std_errors: estimates.iter().map(|e| e.std_error).collect(),
            exact,
            trials: self.trials,
            seed: self.seed,
        }
    }

    /// The sub-stream used for grid point `i`, shared by every statistic.
    fn seed_at(&self, i: usize) -> Seed {
        self.seed.substream(i as u64)
    }

    pub fn quadform_deviation(&self, family: &FamilyKind) -> Result<ConditionReport> {
        let estimates = self
            .p_grid
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let fam = TestMatrixFamily::new(family.clone(), p)?;
                quadform_deviation(&self.model_at(p)?, &fam, self.trials, self.seed_at(i))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.report(Statistic::QuadFormDeviation, estimates, None))
    }

    pub fn lindeberg(&self, epsilon: f64) -> Result<ConditionReport> {
        let results = self
            .p_grid
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                lindeberg_statistic(&self.model_at(p)?, epsilon, self.trials, self.seed_at(i))
            })
            .collect::<Result<Vec<_>>>()?;
        let exact = results
            .iter()
            .map(|r| r.exact)
            .collect::<Option<Vec<f64>>>();
        let estimates = results.into_iter().map(|r| r.monte_carlo).collect();
        Ok(self.report(Statistic::Lindeberg, estimates, exact))
    }

    /// Weighted squares with all weights equal to one.
    pub fn weighted_squares(&self) -> Result<ConditionReport> {
        let estimates = self
            .p_grid
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                weighted_squares_check(
                    &self.model_at(p)?,
                    &vec![1.0; p],
                    self.trials,
                    self.seed_at(i),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.report(Statistic::WeightedSquares, estimates, None))
    }

    /// Off-diagonal moment `E |x^T (A - D) x|^2 / p^2` for the normalized
    /// all-ones-off-diagonal matrix; the bound `4 tr(A A*) / p^2` tends to 0.
    pub fn offdiag_moment(&self) -> Result<(ConditionReport, Vec<OffDiagCheck>)> {
        let checks = self
            .p_grid
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let a = normalized_offdiag_matrix(p);
                offdiag_moment_check(&self.model_at(p)?, &a, self.trials, self.seed_at(i))
            })
            .collect::<Result<Vec<_>>>()?;
        let scaled: Vec<McEstimate> = checks
            .iter()
            .zip(&self.p_grid)
            .map(|(c, &p)| {
                let s = (p * p) as f64;
                McEstimate {
                    mean: c.estimate.mean / s,
                    std_error: c.estimate.std_error / s,
                    trials: c.estimate.trials,
                }
            })
            .collect();
        Ok((self.report(Statistic::OffDiagMoment, scaled, None), checks))
    }
}

/// `(J - I) / max(1, p - 1)`: zero diagonal, spectral norm one for p >= 2.
pub fn normalized_offdiag_matrix(p: usize) -> DMatrix<Complex64> {
    let scale = 1.0 / (p.max(2) - 1) as f64;
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(scale, 0.0)
        }
    })
}
