use mpspectra::conditions::{
    assess_concentration, ConditionReport, FamilyKind, SweepSpec, Verdict,
};
use mpspectra::{BoundReport, ModelKind, Seed};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{join, prepare_dir, write_json};
use crate::CliError;

#[derive(Serialize)]
struct SeedRun {
    seed: Seed,
    verdict: Verdict,
    reports: Vec<ConditionReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    offdiag_bounds: Vec<BoundReport>,
}

#[derive(Serialize)]
struct Report {
    command: &'static str,
    version: u32,
    model: ModelKind,
    family: FamilyKind,
    p_values: Vec<usize>,
    trials: usize,
    epsilon: f64,
    threshold: f64,
    runs: Vec<SeedRun>,
}

/// `p/8, p/4, p/2, p` without duplicates or zeros.
fn default_sweep(p: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = [8, 4, 2, 1]
        .iter()
        .map(|d| p / d)
        .filter(|&q| q > 0)
        .collect();
    grid.dedup();
    grid
}

pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let p_values = cfg.p_sweep.clone().unwrap_or_else(|| default_sweep(cfg.p));
    let iid = cfg.model.has_iid_entries();
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for (k, seed) in cfg.seeds.iter().enumerate() {
        let spec = SweepSpec {
            model: cfg.model.clone(),
            p_grid: p_values.clone(),
            trials: cfg.trials,
            seed: *seed,
        };
        let quad = spec.quadform_deviation(&cfg.family)?;
        if k == 0 {
            // Everything below only adds detail; fail on bad input before
            // the output directory is touched.
            prepare_dir(&cfg.output_dir)?;
        }
        let verdict = assess_concentration(&quad, cfg.threshold);
        let mut reports = vec![quad];
        let mut offdiag_bounds = Vec::new();
        if iid {
            reports.push(spec.lindeberg(cfg.epsilon)?);
            reports.push(spec.weighted_squares()?);
            let (report, checks) = spec.offdiag_moment()?;
            reports.push(report);
            offdiag_bounds = checks.into_iter().map(|c| c.report).collect();
        }
        runs.push(SeedRun {
            seed: *seed,
            verdict,
            reports,
            offdiag_bounds,
        });
    }
    let report = Report {
        command: "check-conditions",
        version: crate::config::CONFIG_VERSION,
        model: cfg.model.clone(),
        family: cfg.family.clone(),
        p_values,
        trials: cfg.trials,
        epsilon: cfg.epsilon,
        threshold: cfg.threshold,
        runs,
    };
    write_json(&join(&cfg.output_dir, "conditions.json"), &report)
}

#[cfg(test)]
mod tests {
    use super::default_sweep;

    #[test]
    fn default_sweep_is_geometric_and_positive() {
        assert_eq!(default_sweep(400), vec![50, 100, 200, 400]);
        assert_eq!(default_sweep(3), vec![1, 3]);
        assert_eq!(default_sweep(1), vec![1]);
    }
}
