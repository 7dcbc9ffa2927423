//! Empirical spectral distribution of `n^-1 X X^T` and its statistics.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::mp_law::{ComplexPoint, MpLaw};

/// Relative level below which negative eigenvalues count as round-off.
pub const NEGATIVE_EIGEN_TOL: f64 = 1e-10;

/// Sorted eigenvalues of a `p x p` sample covariance built from `n` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    n: usize,
}

impl Spectrum {
    /// Wraps eigenvalues of a PSD matrix. Values are sorted; negatives within
    /// `1e-10 * max(1, lambda_max)` are clamped to zero, larger ones rejected.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, n: usize) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::domain("a spectrum needs at least one eigenvalue"));
        }
        if n == 0 {
            return Err(Error::domain("sample size n must be at least 1"));
        }
        if let Some(bad) = eigenvalues.iter().find(|v| !v.is_finite()) {
            return Err(Error::numerical(
                "spectrum",
                format!("non-finite eigenvalue {bad}"),
            ));
        }
        eigenvalues.sort_by(|a, b| a.total_cmp(b));
        let top = eigenvalues[eigenvalues.len() - 1].max(1.0);
        let floor = -NEGATIVE_EIGEN_TOL * top;
        if eigenvalues[0] < floor {
            return Err(Error::numerical(
                "spectrum",
                format!(
                    "eigenvalue {:.6e} is below the PSD round-off floor {floor:.3e}",
                    eigenvalues[0]
                ),
            ));
        }
        eigenvalues
            .iter_mut()
            .filter(|v| **v < 0.0)
            .for_each(|v| *v = 0.0);
        Ok(Spectrum { eigenvalues, n })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn p(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `p / n`.
    pub fn ratio(&self) -> f64 {
        self.p() as f64 / self.n as f64
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// `s_n(z) = p^-1 sum_i 1 / (lambda_i - z)`.
    pub fn empirical_stieltjes(&self, z: ComplexPoint) -> Complex64 {
        let zc = z.to_complex();
        let sum: Complex64 = self.eigenvalues.iter().map(|&l| (l - zc).inv()).sum();
        sum / self.p() as f64
    }

    /// `S_n(z) = (p / n) s_n(z) = tr(A_n - z n I)^-1` with `A_n = X X^T`.
    pub fn normalized_stieltjes(&self, z: ComplexPoint) -> Complex64 {
        self.empirical_stieltjes(z) * self.ratio()
    }

    /// Fraction of eigenvalues `<= x`.
    pub fn empirical_cdf(&self, x: f64) -> f64 {
        self.eigenvalues.partition_point(|&l| l <= x) as f64 / self.p() as f64
    }

    /// Kolmogorov-Smirnov distance to `law`, evaluated on both sides of every
    /// jump of the empirical CDF and on both sides of the atom at zero.
    pub fn ks_distance(&self, law: &MpLaw) -> Result<f64> {
        let p = self.p() as f64;
        let mut jumps: Vec<(f64, usize, usize)> = Vec::new();
        let mut i = 0;
        while i < self.eigenvalues.len() {
            let value = self.eigenvalues[i];
            let hi = self.eigenvalues.partition_point(|&l| l <= value);
            jumps.push((value, i, hi));
            i = hi;
        }
        let points: Vec<f64> = jumps.iter().map(|j| j.0).collect();
        let law_cdf = law.cdf_sorted(&points)?;

        // Law's left and right limits at zero: 0 and the atom.
        let below_zero = self.eigenvalues.partition_point(|&l| l < 0.0) as f64 / p;
        let at_zero = self.empirical_cdf(0.0);
        let mut sup = below_zero.max((at_zero - law.atom()).abs());

        for ((value, lo, hi), f) in jumps.into_iter().zip(law_cdf) {
            let f_left = if value == 0.0 { 0.0 } else { f };
            sup = sup
                .max((lo as f64 / p - f_left).abs())
                .max((hi as f64 / p - f).abs());
        }
        Ok(sup)
    }

    /// Writes the spectrum as CSV: a `#` metadata line, a header row, then one
    /// eigenvalue per line with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W, model: &str, seed: &str) -> Result<()> {
        writeln!(
            out,
            "# p={},n={},model={model},seed={seed}",
            self.p(),
            self.n
        )?;
        writeln!(out, "eigenvalue")?;
        for v in &self.eigenvalues {
            writeln!(out, "{}", format_f64(*v))?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Spectrum::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut n = None;
        let mut values = Vec::new();
        let mut saw_header = false;
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for field in meta.trim().split(',') {
                    if let Some(v) = field.strip_prefix("n=") {
                        n = v.parse::<usize>().ok();
                    }
                }
                continue;
            }
            if !saw_header {
                if line != "eigenvalue" {
                    return Err(Error::config(format!(
                        "unexpected spectrum header {line:?}"
                    )));
                }
                saw_header = true;
                continue;
            }
            values.push(
                line.parse::<f64>()
                    .map_err(|e| Error::config(format!("bad eigenvalue {line:?}: {e}")))?,
            );
        }
        let n = n.ok_or_else(|| Error::config("spectrum CSV is missing n in its metadata line"))?;
        Spectrum::from_eigenvalues(values, n)
    }
}

/// Doubles with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Spectrum of `n^-1 X X^T` for a `p x n` matrix. When `p > n` the nonzero
/// eigenvalues come from the smaller `n x n` Gram matrix and the remaining
/// `p - n` are exact zeros.
pub fn esd(x: &DMatrix<f64>) -> Result<Spectrum> {
    let (p, n) = x.shape();
    if p == 0 || n == 0 {
        return Err(Error::domain(format!(
            "esd needs a nonempty matrix, got {p}x{n}"
        )));
    }
    let scale = 1.0 / n as f64;
    let mut eigenvalues = if p <= n {
        symmetric_eigenvalues(&((x * x.transpose()) * scale))?
    } else {
        let mut small = symmetric_eigenvalues(&((x.transpose() * x) * scale))?;
        small.resize(p, 0.0);
        small
    };
    eigenvalues.shrink_to_fit();
    Spectrum::from_eigenvalues(eigenvalues, n)
}

pub fn ks_distance(spectrum: &Spectrum, law: &MpLaw) -> Result<f64> {
    spectrum.ks_distance(law)
}

/// Spectrum placed at the quantiles `(i - 1/2) / p` of the law.
pub fn quantile_spectrum(law: &MpLaw, p: usize, n: usize) -> Result<Spectrum> {
    let values = (0..p)
        .map(|i| law.quantile((i as f64 + 0.5) / p as f64))
        .collect::<Result<Vec<_>>>()?;
    Spectrum::from_eigenvalues(values, n)
}
