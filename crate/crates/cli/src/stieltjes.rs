use mpspectra::resolvent::fixed_point_residual;
use mpspectra::sampling::sample_matrix;
use mpspectra::spectra::quantile_spectrum;
use mpspectra::stats::median;
use mpspectra::{esd, ColumnModel, ComplexPoint, ModelKind, MpLaw, Seed, Spectrum};
use serde::Serialize;

use crate::config::{ExperimentConfig, SpectrumSource};
use crate::output::{join, prepare_dir, write_csv, write_json, Cell};
use crate::CliError;

const HEADER: [&str; 11] = [
    "p",
    "n",
    "seed_index",
    "re_z",
    "im_z",
    "re_sn",
    "im_sn",
    "re_s",
    "im_s",
    "abs_error",
    "abs_fixed_point_residual",
];

struct Row {
    p: usize,
    z: ComplexPoint,
    error: f64,
    residual: f64,
    cells: Vec<Cell>,
}

#[derive(Serialize)]
struct ZTrend {
    re_z: f64,
    im_z: f64,
    median_abs_error: Vec<f64>,
    nonincreasing: bool,
}

#[derive(Serialize)]
struct Summary {
    command: &'static str,
    version: u32,
    model: ModelKind,
    spectrum_source: &'static str,
    seeds: Vec<Seed>,
    p_values: Vec<usize>,
    n_values: Vec<usize>,
    max_abs_error: Vec<f64>,
    max_abs_fixed_point_residual: Vec<f64>,
    per_z: Vec<ZTrend>,
}

fn spectra_for(cfg: &ExperimentConfig, p: usize, n: usize) -> Result<Vec<Spectrum>, CliError> {
    match cfg.spectrum_source {
        SpectrumSource::MpQuantiles => Ok(vec![quantile_spectrum(
            &MpLaw::new(p as f64 / n as f64)?,
            p,
            n,
        )?]),
        SpectrumSource::Sample => {
            let model = ColumnModel::new(cfg.model.clone(), p)?;
            cfg.seeds
                .iter()
                .map(|seed| Ok(esd(&sample_matrix(&model, n, *seed)?)?))
                .collect()
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.z_grid.is_empty() {
        return Err(CliError::Config(
            "z_grid must contain at least one point".into(),
        ));
    }
    let sweep = cfg.p_sweep.clone().unwrap_or_else(|| vec![cfg.p]);
    let n_values = sweep
        .iter()
        .map(|&p| cfg.sample_size(p))
        .collect::<Result<Vec<_>, _>>()?;
    // Validate the model once before any output is written.
    ColumnModel::new(cfg.model.clone(), cfg.p)?;
    prepare_dir(&cfg.output_dir)?;

    let mut rows = Vec::new();
    for (&p, &n) in sweep.iter().zip(&n_values) {
        let law = MpLaw::new(p as f64 / n as f64)?;
        let limits = cfg
            .z_grid
            .iter()
            .map(|z| law.stieltjes(*z).map(|v| v.s))
            .collect::<mpspectra::Result<Vec<_>>>()?;
        for (k, spectrum) in spectra_for(cfg, p, n)?.iter().enumerate() {
            for (z, s) in cfg.z_grid.iter().zip(&limits) {
                let sn = spectrum.empirical_stieltjes(*z);
                let error = (sn - s).norm();
                let residual = fixed_point_residual(spectrum, *z).norm();
                if !(error.is_finite() && residual.is_finite()) {
                    return Err(CliError::Numerical(format!(
                        "non-finite Stieltjes value at z = {} + {}i, p = {p}",
                        z.re(),
                        z.im()
                    )));
                }
                rows.push(Row {
                    p,
                    z: *z,
                    error,
                    residual,
                    cells: vec![
                        p.into(),
                        n.into(),
                        k.into(),
                        z.re().into(),
                        z.im().into(),
                        sn.re.into(),
                        sn.im.into(),
                        s.re.into(),
                        s.im.into(),
                        error.into(),
                        residual.into(),
                    ],
                });
            }
        }
    }

    let medians: Vec<Vec<f64>> = sweep
        .iter()
        .map(|&p| {
            cfg.z_grid
                .iter()
                .map(|z| {
                    let errs: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.p == p && r.z == *z)
                        .map(|r| r.error)
                        .collect();
                    median(&errs)
                })
                .collect()
        })
        .collect();

    if cfg.p_sweep.is_some() {
        let mut sweep_rows = Vec::new();
        for (i, (&p, &n)) in sweep.iter().zip(&n_values).enumerate() {
            for (j, z) in cfg.z_grid.iter().enumerate() {
                let residuals: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.p == p && r.z == *z)
                    .map(|r| r.residual)
                    .collect();
                sweep_rows.push(vec![
                    p.into(),
                    n.into(),
                    z.re().into(),
                    z.im().into(),
                    medians[i][j].into(),
                    median(&residuals).into(),
                ]);
            }
        }
        write_csv(
            &join(&cfg.output_dir, "stieltjes_sweep.csv"),
            &[
                "p",
                "n",
                "re_z",
                "im_z",
                "median_abs_error",
                "median_abs_fixed_point_residual",
            ],
            &sweep_rows,
        )?;
    }

    let per_z = cfg
        .z_grid
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let trend: Vec<f64> = medians.iter().map(|m| m[j]).collect();
            ZTrend {
                re_z: z.re(),
                im_z: z.im(),
                nonincreasing: trend.windows(2).all(|w| w[1] <= w[0]),
                median_abs_error: trend,
            }
        })
        .collect();
    let max_of =
        |p: usize, f: fn(&Row) -> f64| rows.iter().filter(|r| r.p == p).map(f).fold(0.0, f64::max);
    let summary = Summary {
        command: "stieltjes",
        version: crate::config::CONFIG_VERSION,
        model: cfg.model.clone(),
        spectrum_source: match cfg.spectrum_source {
            SpectrumSource::Sample => "sample",
            SpectrumSource::MpQuantiles => "mp_quantiles",
        },
        seeds: cfg.seeds.clone(),
        max_abs_error: sweep.iter().map(|&p| max_of(p, |r| r.error)).collect(),
        max_abs_fixed_point_residual: sweep.iter().map(|&p| max_of(p, |r| r.residual)).collect(),
        p_values: sweep,
        n_values,
        per_z,
    };

    let cells: Vec<Vec<Cell>> = rows.into_iter().map(|r| r.cells).collect();
    write_csv(&join(&cfg.output_dir, "stieltjes.csv"), &HEADER, &cells)?;
    write_json(&join(&cfg.output_dir, "stieltjes_summary.json"), &summary)
}
