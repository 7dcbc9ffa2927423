//! Seeded generators for the random column `x` in `R^p`.
//!
//! Every draw goes through ChaCha8 keyed by [`Seed::value`] on the stream
//! [`Seed::stream`]. Column `k` of a matrix uses `seed.substream(k)`, so any
//! column can be regenerated on its own.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `p * n` that [`sample_matrix`] will allocate (1 GiB of `f64`).
pub const DEFAULT_MAX_ENTRIES: usize = 1 << 27;

pub const DEFAULT_FILTER_TRUNCATION: usize = 32;

/// Pole of the default all-pass filter.
const ALL_PASS_POLE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub value: u64,
    #[serde(default)]
    pub stream: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl Seed {
    pub fn new(value: u64) -> Self {
        Seed { value, stream: 0 }
    }

    /// Independent child stream `k`, e.g. the `k`-th column or trial.
    pub fn substream(&self, k: u64) -> Seed {
        Seed {
            value: self.value,
            stream: splitmix64(self.stream ^ splitmix64(k)),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.value);
        rng.set_stream(self.stream);
        rng
    }
}

/// Distribution families for the column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    /// i.i.d. standard normal entries.
    IidGaussian,
    /// i.i.d. uniform signs.
    IidRademacher,
    /// i.i.d. entries equal to `+-sqrt(q)` with probability `1/(2q)` each and
    /// zero otherwise; `q` defaults to the dimension `p`.
    IidSparseSpike {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<f64>,
    },
    /// `sqrt(p)` times a uniform point on the unit sphere.
    SphereUniform,
    /// Moving average `X_k = sum_j h_j eps_{k+j}` of i.i.d. Rademacher
    /// innovations. The taps are truncated to `truncation` terms and scaled
    /// to unit l2 norm. Without explicit coefficients the taps are the impulse
    /// response of an all-pass filter, whose autocorrelation vanishes at every
    /// nonzero lag, so the entries are uncorrelated but dependent.
    LinearFilter {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coefficients: Option<Vec<f64>>,
        #[serde(default = "default_truncation")]
        truncation: usize,
    },
    /// `xi * y` with `xi^2` equal to 0 or 2 with probability 1/2 each and `y`
    /// drawn from `base`.
    ScalarMixture { base: Box<ModelKind> },
}

fn default_truncation() -> usize {
    DEFAULT_FILTER_TRUNCATION
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::IidGaussian => "iid_gaussian",
            ModelKind::IidRademacher => "iid_rademacher",
            ModelKind::IidSparseSpike { .. } => "iid_sparse_spike",
            ModelKind::SphereUniform => "sphere_uniform",
            ModelKind::LinearFilter { .. } => "linear_filter",
            ModelKind::ScalarMixture { .. } => "scalar_mixture",
        }
    }

    /// Whether the coordinates of the column are i.i.d.
    pub fn has_iid_entries(&self) -> bool {
        matches!(
            self,
            ModelKind::IidGaussian | ModelKind::IidRademacher | ModelKind::IidSparseSpike { .. }
        )
    }

    /// Human-readable label including parameters, e.g. `scalar_mixture(iid_gaussian)`.
    pub fn label(&self) -> String {
        match self {
            ModelKind::IidSparseSpike { q: Some(q) } => format!("iid_sparse_spike(q={q})"),
            ModelKind::LinearFilter {
                truncation,
                coefficients,
            } => format!(
                "linear_filter({}, m={truncation})",
                if coefficients.is_some() {
                    "custom"
                } else {
                    "all_pass"
                }
            ),
            ModelKind::ScalarMixture { base } => format!("scalar_mixture({})", base.label()),
            other => other.name().to_string(),
        }
    }
}

/// Default all-pass taps: `h_0 = -r`, `h_j = (1 - r^2) r^(j-1)`.
pub fn all_pass_taps(truncation: usize) -> Vec<f64> {
    let r = ALL_PASS_POLE;
    (0..truncation)
        .map(|j| {
            if j == 0 {
                -r
            } else {
                (1.0 - r * r) * r.powi(j as i32 - 1)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
enum Sampler {
    Gaussian,
    Rademacher,
    Spike { q: f64 },
    Sphere,
    Filter { taps: Vec<f64> },
    Mixture { base: Box<Sampler> },
}

impl Sampler {
    fn build(kind: &ModelKind, p: usize) -> Result<Self> {
        Ok(match kind {
            ModelKind::IidGaussian => Sampler::Gaussian,
            ModelKind::IidRademacher => Sampler::Rademacher,
            ModelKind::IidSparseSpike { q } => {
                let q = q.unwrap_or(p as f64);
                if !(q.is_finite() && q >= 1.0) {
                    return Err(Error::config(format!(
                        "iid_sparse_spike needs q >= 1 so that 1/q is a probability, got {q}"
                    )));
                }
                Sampler::Spike { q }
            }
            ModelKind::SphereUniform => Sampler::Sphere,
            ModelKind::LinearFilter {
                coefficients,
                truncation,
            } => {
                if *truncation == 0 {
                    return Err(Error::config("linear_filter truncation must be at least 1"));
                }
                let mut taps = match coefficients {
                    Some(c) => c.iter().take(*truncation).copied().collect(),
                    None => all_pass_taps(*truncation),
                };
                if taps.iter().any(|t| !t.is_finite()) {
                    return Err(Error::config("linear_filter coefficients must be finite"));
                }
                let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::config(
                        "linear_filter coefficients have zero l2 norm",
                    ));
                }
                taps.iter_mut().for_each(|t| *t /= norm);
                Sampler::Filter { taps }
            }
            ModelKind::ScalarMixture { base } => Sampler::Mixture {
                base: Box::new(Sampler::build(base, p)?),
            },
        })
    }

    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Sampler::Gaussian => out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal)),
            Sampler::Rademacher => out
                .iter_mut()
                .for_each(|v| *v = if rng.random::<bool>() { 1.0 } else { -1.0 }),
            Sampler::Spike { q } => {
                let half = 0.5 / q;
                let height = q.sqrt();
                for v in out.iter_mut() {
                    let u: f64 = rng.random();
                    *v = if u < half {
                        height
                    } else if u < 2.0 * half {
                        -height
                    } else {
                        0.0
                    };
                }
            }
            Sampler::Sphere => {
                let p = out.len();
                loop {
                    out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        let scale = (p as f64).sqrt() / norm;
                        out.iter_mut().for_each(|v| *v *= scale);
                        break;
                    }
                }
            }
            Sampler::Filter { taps } => {
                let innovations: Vec<f64> = (0..out.len() + taps.len() - 1)
                    .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                    .collect();
                for (k, v) in out.iter_mut().enumerate() {
                    *v = taps.iter().zip(&innovations[k..]).map(|(h, e)| h * e).sum();
                }
            }
            Sampler::Mixture { base } => {
                let xi = if rng.random::<bool>() {
                    std::f64::consts::SQRT_2
                } else {
                    0.0
                };
                base.fill(rng, out);
                out.iter_mut().for_each(|v| *v *= xi);
            }
        }
    }
}

/// A validated column model of fixed dimension `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct ColumnModel {
    kind: ModelKind,
    p: usize,
    sampler: Sampler,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: ModelKind,
    p: usize,
}

impl TryFrom<RawModel> for ColumnModel {
    type Error = Error;
    fn try_from(raw: RawModel) -> Result<Self> {
        ColumnModel::new(raw.kind, raw.p)
    }
}

impl From<ColumnModel> for RawModel {
    fn from(m: ColumnModel) -> Self {
        RawModel {
            kind: m.kind,
            p: m.p,
        }
    }
}

impl ColumnModel {
    pub fn new(kind: ModelKind, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::config("column dimension p must be at least 1"));
        }
        let sampler = Sampler::build(&kind, p)?;
        Ok(ColumnModel { kind, p, sampler })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Normalized filter taps for `LinearFilter` models.
    pub fn filter_taps(&self) -> Option<&[f64]> {
        match &self.sampler {
            Sampler::Filter { taps } => Some(taps),
            _ => None,
        }
    }

    /// Draws one column into `out` (length `p`).
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.p);
        self.sampler.fill(rng, out);
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let mut v = DVector::zeros(self.p);
        self.fill(rng, v.as_mut_slice());
        v
    }
}

pub fn sample_column(model: &ColumnModel, seed: Seed) -> DVector<f64> {
    model.draw(&mut seed.rng())
}

pub fn sample_matrix(model: &ColumnModel, n: usize, seed: Seed) -> Result<DMatrix<f64>> {
    sample_matrix_with_budget(model, n, seed, DEFAULT_MAX_ENTRIES)
}

/// `p x n` matrix whose column `k` is `sample_column(model, seed.substream(k))`.
pub fn sample_matrix_with_budget(
    model: &ColumnModel,
    n: usize,
    seed: Seed,
    max_entries: usize,
) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::domain("sample size n must be at least 1"));
    }
    let entries = model.p().checked_mul(n).filter(|&e| e <= max_entries);
    if entries.is_none() {
        return Err(Error::Resource(format!(
            "a {}x{n} sample exceeds the budget of {max_entries} entries",
            model.p()
        )));
    }
    let mut x = DMatrix::zeros(model.p(), n);
    for (k, mut col) in x.column_iter_mut().enumerate() {
        let mut rng = seed.substream(k as u64).rng();
        model.fill(&mut rng, col.as_mut_slice());
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(kind: ModelKind, p: usize) -> ColumnModel {
        ColumnModel::new(kind, p).unwrap()
    }

    #[test]
    fn rademacher_entries_are_signs() {
        let m = model(ModelKind::IidRademacher, 4);
        for s in 0..20 {
            let x = sample_column(&m, Seed::new(s));
            assert!(x.iter().all(|v| *v == 1.0 || *v == -1.0));
        }
    }

    #[test]
    fn sphere_has_forced_norm() {
        let m = model(ModelKind::SphereUniform, 10);
        for s in 0..20 {
            let x = sample_column(&m, Seed::new(s));
            assert!((x.norm_squared() - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spike_second_moment() {
        let p = 10;
        let m = model(ModelKind::IidSparseSpike { q: None }, p);
        let height = (p as f64).sqrt();
        let mut rng = Seed::new(7).rng();
        let mut buf = vec![0.0; p];
        let mut sum_sq = 0.0;
        let draws = 1_000_000;
        for _ in 0..draws / p {
            m.fill(&mut rng, &mut buf);
            for v in &buf {
                assert!(*v == 0.0 || (v.abs() - height).abs() < 1e-12);
                sum_sq += v * v;
            }
        }
        let mean = sum_sq / draws as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn single_column_matrix_is_substream_zero() {
        let m = model(ModelKind::IidGaussian, 5);
        let seed = Seed {
            value: 11,
            stream: 3,
        };
        let x = sample_matrix(&m, 1, seed).unwrap();
        assert_eq!(
            x.column(0).clone_owned(),
            sample_column(&m, seed.substream(0))
        );
    }

    #[test]
    fn columns_reproducible_in_isolation_and_deterministic() {
        let m = model(
            ModelKind::LinearFilter {
                coefficients: None,
                truncation: 8,
            },
            6,
        );
        let seed = Seed::new(42);
        let a = sample_matrix(&m, 9, seed).unwrap();
        let b = sample_matrix(&m, 9, seed).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.column(4).clone_owned(),
            sample_column(&m, seed.substream(4))
        );
        let c = sample_matrix(&m, 9, Seed::new(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_moments() {
        let m = model(ModelKind::IidGaussian, 2);
        let x = sample_matrix(&m, 100_000, Seed::new(1)).unwrap();
        for row in x.row_iter() {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!(
                mean.abs() < 0.02 && (var - 1.0).abs() < 0.02,
                "{mean} {var}"
            );
        }
    }

    #[test]
    fn isotropy_of_exchangeable_models() {
        let p = 8;
        for kind in [
            ModelKind::IidGaussian,
            ModelKind::IidRademacher,
            ModelKind::SphereUniform,
        ] {
            let m = model(kind.clone(), p);
            let x = sample_matrix(&m, 100_000, Seed::new(2)).unwrap();
            let cov = &x * x.transpose() / x.ncols() as f64;
            let dev = (cov - DMatrix::<f64>::identity(p, p)).amax();
            assert!(dev < 0.05, "{}: {dev}", kind.name());
        }
    }

    #[test]
    fn filter_entries_have_unit_variance_and_are_uncorrelated() {
        let m = model(
            ModelKind::LinearFilter {
                coefficients: None,
                truncation: 32,
            },
            4,
        );
        let taps = m.filter_taps().unwrap();
        assert!((taps.iter().map(|t| t * t).sum::<f64>() - 1.0).abs() < 1e-14);
        // Autocorrelation of the truncated all-pass response at lag 1..3.
        for lag in 1..4 {
            let r: f64 = taps.iter().zip(&taps[lag..]).map(|(a, b)| a * b).sum();
            assert!(r.abs() < 1e-14, "lag {lag}: {r}");
        }
        let x = sample_matrix(&m, 100_000, Seed::new(3)).unwrap();
        let n = x.ncols() as f64;
        for row in x.row_iter() {
            let var = row.iter().map(|v| v * v).sum::<f64>() / n;
            assert!((var - 1.0).abs() < 0.02, "{var}");
        }
        let cov01 = x.row(0).dot(&x.row(1)) / n;
        assert!(cov01.abs() < 0.02);
    }

    #[test]
    fn custom_filter_is_truncated_and_normalized() {
        let kind = ModelKind::LinearFilter {
            coefficients: Some(vec![3.0, 4.0, 100.0]),
            truncation: 2,
        };
        let m = model(kind, 3);
        assert_eq!(m.filter_taps().unwrap(), &[0.6, 0.8]);
    }

    #[test]
    fn mixture_norms_are_bimodal() {
        let p = 400;
        let m = model(
            ModelKind::ScalarMixture {
                base: Box::new(ModelKind::IidGaussian),
            },
            p,
        );
        let mut zeros = 0;
        for s in 0..200 {
            let r = sample_column(&m, Seed::new(s)).norm_squared() / p as f64;
            if r == 0.0 {
                zeros += 1;
            } else {
                assert!((r - 2.0).abs() < 0.5, "{r}");
            }
        }
        assert!((60..140).contains(&zeros), "{zeros}");
    }

    #[test]
    fn invalid_configurations() {
        assert!(ColumnModel::new(ModelKind::IidGaussian, 0).is_err());
        let zero = ModelKind::LinearFilter {
            coefficients: Some(vec![0.0, 0.0]),
            truncation: 4,
        };
        assert!(matches!(ColumnModel::new(zero, 3), Err(Error::Config(_))));
        let no_taps = ModelKind::LinearFilter {
            coefficients: None,
            truncation: 0,
        };
        assert!(ColumnModel::new(no_taps, 3).is_err());
        assert!(ColumnModel::new(ModelKind::IidSparseSpike { q: Some(0.5) }, 3).is_err());
        let nested = ModelKind::ScalarMixture {
            base: Box::new(ModelKind::IidSparseSpike { q: Some(-1.0) }),
        };
        assert!(ColumnModel::new(nested, 3).is_err());
    }

    #[test]
    fn budget_and_zero_columns() {
        let m = model(ModelKind::IidGaussian, 1000);
        assert!(matches!(
            sample_matrix_with_budget(&m, 1000, Seed::new(0), 999_999),
            Err(Error::Resource(_))
        ));
        assert!(sample_matrix(&m, 0, Seed::new(0)).is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_kind() {
        let json =
            r#"{"kind": {"kind": "scalar_mixture", "base": {"kind": "iid_rademacher"}}, "p": 7}"#;
        let m: ColumnModel = serde_json::from_str(json).unwrap();
        assert_eq!(m.p(), 7);
        let back: ColumnModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"kind": {"kind": "cauchy"}, "p": 7}"#;
        assert!(serde_json::from_str::<ColumnModel>(bad).is_err());
    }

    #[test]
    fn substreams_differ() {
        let s = Seed::new(5);
        assert_ne!(s.substream(0), s.substream(1));
        assert_ne!(s.substream(0).stream, s.stream);
    }
}
