use std::fs;
use std::path::{Path, PathBuf};

use mpspectra::conditions::FamilyKind;
use mpspectra::{ComplexPoint, ModelKind, Seed};
use serde::Deserialize;

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// A seed given either as a bare integer or as `{"value": .., "stream": ..}`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum SeedEntry {
    Plain(u64),
    Full(Seed),
}

impl From<SeedEntry> for Seed {
    fn from(e: SeedEntry) -> Seed {
        match e {
            SeedEntry::Plain(v) => Seed::new(v),
            SeedEntry::Full(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Sample,
    MpQuantiles,
}

/// The on-disk config, before cross-field validation.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: u32,
    model: ModelKind,
    p: usize,
    n: Option<usize>,
    c: Option<f64>,
    #[serde(default)]
    z_grid: Vec<ComplexPoint>,
    #[serde(default)]
    seeds: Option<Vec<SeedEntry>>,
    #[serde(default)]
    trials: Option<usize>,
    output_dir: Option<PathBuf>,
    p_sweep: Option<Vec<usize>>,
    spectrum_source: Option<SpectrumSource>,
    family: Option<FamilyKind>,
    epsilon: Option<f64>,
    threshold: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub p: usize,
    pub n: Option<usize>,
    pub c: Option<f64>,
    pub z_grid: Vec<ComplexPoint>,
    pub seeds: Vec<Seed>,
    pub trials: usize,
    pub output_dir: PathBuf,
    pub p_sweep: Option<Vec<usize>>,
    pub spectrum_source: SpectrumSource,
    pub family: FamilyKind,
    pub epsilon: f64,
    pub threshold: f64,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, out, seed)
    }

    pub fn parse(text: &str, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self, CliError> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        if raw.version != CONFIG_VERSION {
            return Err(invalid(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                raw.version
            )));
        }
        if raw.p == 0 {
            return Err(invalid("p must be at least 1"));
        }
        match (raw.n, raw.c) {
            (Some(_), Some(_)) => return Err(invalid("give either n or c, not both")),
            (Some(0), None) => return Err(invalid("n must be at least 1")),
            (None, Some(c)) if !(c.is_finite() && c > 0.0) => {
                return Err(invalid(format!("c must be positive and finite, got {c}")))
            }
            _ => {}
        }
        let seeds: Vec<Seed> = match (seed, raw.seeds) {
            (Some(s), _) => vec![Seed::new(s)],
            (None, Some(list)) => list.into_iter().map(Seed::from).collect(),
            (None, None) => vec![Seed::new(0)],
        };
        if seeds.is_empty() {
            return Err(invalid("seeds must not be empty"));
        }
        let trials = raw.trials.unwrap_or(200);
        if trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if let Some(sweep) = &raw.p_sweep {
            if sweep.is_empty() || sweep[0] == 0 || sweep.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid(
                    "p_sweep must be a nonempty increasing list of positive dimensions",
                ));
            }
        }
        let epsilon = raw.epsilon.unwrap_or(0.5);
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        let threshold = raw.threshold.unwrap_or(0.05);
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(invalid(format!(
                "threshold must be positive, got {threshold}"
            )));
        }
        let output_dir = out
            .or(raw.output_dir)
            .ok_or_else(|| invalid("no output directory: set output_dir or pass --out"))?;
        Ok(ExperimentConfig {
            model: raw.model,
            p: raw.p,
            n: raw.n,
            c: raw.c,
            z_grid: raw.z_grid,
            seeds,
            trials,
            output_dir,
            p_sweep: raw.p_sweep,
            spectrum_source: raw.spectrum_source.unwrap_or(SpectrumSource::Sample),
            family: raw.family.unwrap_or(FamilyKind::Identity),
            epsilon,
            threshold,
        })
    }

    /// Sample size for dimension `p`: `n` itself at the configured `p`,
    /// otherwise `round(p / c)` with `c` given or implied by `p / n`.
    pub fn sample_size(&self, p: usize) -> Result<usize, CliError> {
        let n = match (self.n, self.c) {
            (Some(n), _) if p == self.p => n,
            (Some(n), _) => (p as f64 * n as f64 / self.p as f64).round() as usize,
            (None, Some(c)) => (p as f64 / c).round() as usize,
            (None, None) => return Err(invalid("this command needs n or c")),
        };
        if n == 0 {
            Err(invalid(format!("derived sample size for p={p} is zero")))
        } else {
            Ok(n)
        }
    }

    pub fn n_derived(&self) -> bool {
        self.n.is_none()
    }
}
