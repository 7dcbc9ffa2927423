use mpspectra::sampling::sample_matrix;
use mpspectra::{esd, ColumnModel, ModelKind, MpLaw, Seed, Spectrum};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{join, prepare_dir, write_csv, write_json, Cell};
use crate::{CliError, LawInfo};

/// Eigenvalues below this are counted as the atom at zero.
pub const ATOM_THRESHOLD: f64 = 1e-8;
const MAX_BINS: usize = 2000;
const DENSITY_UNIFORM_POINTS: usize = 512;
const DENSITY_EDGE_POINTS: usize = 256;

#[derive(Serialize)]
struct SeedKs {
    seed: Seed,
    file: String,
    ks: f64,
}

#[derive(Serialize)]
struct HistogramInfo {
    bins: usize,
    bin_width: f64,
    upper: f64,
    empirical_atom_mass: f64,
    atom_threshold: f64,
}

#[derive(Serialize)]
struct Summary {
    command: &'static str,
    version: u32,
    model: ModelKind,
    p: usize,
    n: usize,
    n_derived: bool,
    ratio: f64,
    law: LawInfo,
    runs: Vec<SeedKs>,
    ks_mean: f64,
    ks_max: f64,
    histogram: HistogramInfo,
}

pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let p = cfg.p;
    let n = cfg.sample_size(p)?;
    let model = ColumnModel::new(cfg.model.clone(), p)?;
    let law = MpLaw::new(p as f64 / n as f64)?;
    prepare_dir(&cfg.output_dir)?;

    let mut runs = Vec::with_capacity(cfg.seeds.len());
    let mut pooled = Vec::with_capacity(p * cfg.seeds.len());
    for (k, seed) in cfg.seeds.iter().enumerate() {
        let spectrum = esd(&sample_matrix(&model, n, *seed)?)?;
        let ks = spectrum.ks_distance(&law)?;
        let name = format!("eigenvalues_seed{k}.csv");
        write_spectrum(&cfg.output_dir.join(&name), &spectrum, &cfg.model, seed)?;
        pooled.extend_from_slice(spectrum.eigenvalues());
        runs.push(SeedKs {
            seed: *seed,
            file: name,
            ks,
        });
    }

    let upper = pooled.iter().cloned().fold(law.upper_edge(), f64::max) + 0.5;
    let histogram = write_histogram(&cfg.output_dir, &pooled, upper)?;
    write_density(&cfg.output_dir, &law, upper)?;

    let ks: Vec<f64> = runs.iter().map(|r| r.ks).collect();
    let summary = Summary {
        command: "esd",
        version: crate::config::CONFIG_VERSION,
        model: cfg.model.clone(),
        p,
        n,
        n_derived: cfg.n_derived(),
        ratio: law.ratio(),
        law: LawInfo::from(&law),
        ks_mean: ks.iter().sum::<f64>() / ks.len() as f64,
        ks_max: ks.iter().cloned().fold(0.0, f64::max),
        runs,
        histogram,
    };
    write_json(&join(&cfg.output_dir, "summary.json"), &summary)
}

fn write_spectrum(
    path: &std::path::Path,
    spectrum: &Spectrum,
    model: &ModelKind,
    seed: &Seed,
) -> Result<(), CliError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    let label = format!("{}:{}", seed.value, seed.stream);
    spectrum.write_csv(std::io::BufWriter::new(file), &model.label(), &label)?;
    Ok(())
}

fn interpolated_quantile(sorted: &[f64], u: f64) -> f64 {
    let pos = u * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Freedman-Diaconis bins on `[0, upper]` for the eigenvalues above the
/// atom threshold; the atom gets its own first row.
fn write_histogram(
    dir: &std::path::Path,
    pooled: &[f64],
    upper: f64,
) -> Result<HistogramInfo, CliError> {
    let total = pooled.len() as f64;
    let mut bulk: Vec<f64> = pooled
        .iter()
        .cloned()
        .filter(|v| *v >= ATOM_THRESHOLD)
        .collect();
    bulk.sort_by(f64::total_cmp);
    let atom_mass = (pooled.len() - bulk.len()) as f64 / total;

    let bins = if bulk.len() < 2 {
        1
    } else {
        let iqr = interpolated_quantile(&bulk, 0.75) - interpolated_quantile(&bulk, 0.25);
        let h = 2.0 * iqr / (bulk.len() as f64).cbrt();
        if h > 0.0 {
            ((upper / h).ceil() as usize).clamp(1, MAX_BINS)
        } else {
            1
        }
    };
    let width = upper / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in &bulk {
        let idx = ((v / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }

    let mut rows = vec![vec![
        Cell::from("atom"),
        Cell::from(0.0),
        Cell::from(ATOM_THRESHOLD),
        Cell::from(atom_mass),
        Cell::Empty,
    ]];
    for (i, count) in counts.iter().enumerate() {
        let mass = *count as f64 / total;
        rows.push(vec![
            Cell::from("bin"),
            Cell::from(i as f64 * width),
            Cell::from((i + 1) as f64 * width),
            Cell::from(mass),
            Cell::from(mass / width),
        ]);
    }
    write_csv(
        &join(dir, "histogram.csv"),
        &["kind", "left", "right", "mass", "density"],
        &rows,
    )?;
    Ok(HistogramInfo {
        bins,
        bin_width: width,
        upper,
        empirical_atom_mass: atom_mass,
        atom_threshold: ATOM_THRESHOLD,
    })
}

/// A uniform grid on `[0, upper]` merged with points clustered at the
/// support edges, where the density has square-root behavior.
fn write_density(dir: &std::path::Path, law: &MpLaw, upper: f64) -> Result<(), CliError> {
    let (a, b) = law.support();
    let mut xs: Vec<f64> = (0..=DENSITY_UNIFORM_POINTS)
        .map(|i| upper * i as f64 / DENSITY_UNIFORM_POINTS as f64)
        .collect();
    xs.extend((0..=DENSITY_EDGE_POINTS).map(|k| {
        let t = std::f64::consts::FRAC_PI_2 * k as f64 / DENSITY_EDGE_POINTS as f64;
        a + (b - a) * t.sin().powi(2)
    }));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let rows: Vec<Vec<Cell>> = xs
        .into_iter()
        .map(|x| vec![Cell::from(x), Cell::from(law.density(x))])
        .collect();
    write_csv(&join(dir, "mp_density.csv"), &["x", "density"], &rows)
}
