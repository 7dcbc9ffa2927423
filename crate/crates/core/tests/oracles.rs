//! Cross-checks against computations that share no code with the library:
//! characteristic polynomials for tiny matrices, dense complex solves for
//! resolvents, and the quantile spectrum for the fixed-point equation.

use mpspectra::linalg::symmetric_eigen;
use mpspectra::nalgebra::DMatrix;
use mpspectra::resolvent::fixed_point_residual;
use mpspectra::sampling::{sample_matrix, ColumnModel, ModelKind, Seed};
use mpspectra::spectra::quantile_spectrum;
use mpspectra::{esd, Complex64, ComplexPoint, MpLaw, Spectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Coefficients of det(lambda I - M), leading coefficient first, by the
/// Faddeev-LeVerrier recursion.
fn char_poly(m: &DMatrix<f64>) -> Vec<f64> {
    let p = m.nrows();
    let mut coeffs = vec![1.0];
    let mut acc = DMatrix::<f64>::zeros(p, p);
    for k in 1..=p {
        acc = m * &acc + DMatrix::identity(p, p) * coeffs[k - 1];
        let c = -(m * &acc).trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// All roots of a monic polynomial by Durand-Kerner iteration.
fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let deg = coeffs.len() - 1;
    let eval = |z: Complex64| {
        coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..deg).map(|k| seed.powu(k as u32) * 5.0).collect();
    for _ in 0..2000 {
        for i in 0..deg {
            let denom = (0..deg)
                .filter(|&j| j != i)
                .fold(Complex64::new(1.0, 0.0), |acc, j| {
                    acc * (roots[i] - roots[j])
                });
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
        }
    }
    roots
}

fn integer_matrix(rng: &mut ChaCha8Rng, p: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, n, |_, _| f64::from(rng.random_range(-3i32..=3)))
}

#[test]
fn eigenvalues_match_characteristic_polynomial_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (p, n) in [(1, 3), (2, 3), (3, 5), (4, 6), (4, 2), (3, 1)] {
        for _ in 0..20 {
            let x = integer_matrix(&mut rng, p, n);
            let s = &x * x.transpose() / n as f64;
            let mut oracle: Vec<f64> = poly_roots(&char_poly(&s)).iter().map(|r| r.re).collect();
            oracle.sort_by(f64::total_cmp);
            let got = esd(&x).unwrap();
            let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in got.eigenvalues().iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-9 * scale, "{p}x{n}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn hand_computed_three_by_five() {
    // X X^T = diag(5, 2, 0) up to a permutation, so the spectrum is {0, 0.4, 1}.
    let x = DMatrix::from_row_slice(
        3,
        5,
        &[
            1.0, 1.0, 1.0, 1.0, 1.0, //
            1.0, -1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 0.0, 0.0,
        ],
    );
    let s = esd(&x).unwrap();
    assert_eq!(s.p(), 3);
    assert_eq!(s.n(), 5);
    let expected = [0.0, 0.4, 1.0];
    for (a, b) in s.eigenvalues().iter().zip(expected) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn wide_and_tall_inputs_agree_on_nonzero_spectrum() {
    let model = ColumnModel::new(ModelKind::IidGaussian, 40).unwrap();
    let x = sample_matrix(&model, 25, Seed::new(4)).unwrap();
    let tall = esd(&x).unwrap();
    assert_eq!(tall.p(), 40);
    assert_eq!(tall.eigenvalues().iter().filter(|v| **v == 0.0).count(), 15);
    let xt = x.transpose();
    let wide = esd(&xt).unwrap();
    // Nonzero eigenvalues of X X^T / 25 and X^T X / 40 differ by the factor 40 / 25.
    let scaled: Vec<f64> = wide.eigenvalues().iter().map(|v| v * 40.0 / 25.0).collect();
    for (a, b) in tall.eigenvalues()[15..].iter().zip(&scaled) {
        assert!((a - b).abs() <= 1e-10 * b.max(1.0));
    }
}

#[test]
fn eigen_residuals_on_a_moderate_sample() {
    let model = ColumnModel::new(ModelKind::IidRademacher, 300).unwrap();
    let x = sample_matrix(&model, 450, Seed::new(5)).unwrap();
    let s = &x * x.transpose() / 450.0;
    let eig = symmetric_eigen(&s).unwrap();
    let v = eig.vectors.as_ref().unwrap();
    let norm = eig.values.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let d = DMatrix::from_diagonal(&mpspectra::nalgebra::DVector::from_vec(eig.values.clone()));
    let residual = (&s * v - v * d).norm();
    assert!(residual <= 1e-8 * norm * 300.0, "residual {residual}");
    let gram = v.transpose() * v - DMatrix::identity(300, 300);
    assert!(gram.amax() < 1e-10);
    assert!((eig.values.iter().sum::<f64>() - s.trace()).abs() < 1e-9 * s.trace());
}

#[test]
fn empirical_stieltjes_matches_dense_solve() {
    let model = ColumnModel::new(ModelKind::IidGaussian, 30).unwrap();
    let x = sample_matrix(&model, 45, Seed::new(6)).unwrap();
    let spectrum = esd(&x).unwrap();
    let s = (&x * x.transpose() / 45.0).map(|v| Complex64::new(v, 0.0));
    for (re, im) in [(-1.0, 0.1), (0.7, 0.01), (2.0, 1.0), (5.0, 3.0)] {
        let z = ComplexPoint::new(re, im).unwrap();
        let shifted = &s - DMatrix::<Complex64>::identity(30, 30) * z.to_complex();
        let inv = shifted.try_inverse().unwrap();
        let oracle = inv.trace() / 30.0;
        let got = spectrum.empirical_stieltjes(z);
        assert!(
            (got - oracle).norm() <= 1e-10 * oracle.norm().max(1.0),
            "{got} vs {oracle}"
        );
    }
}

#[test]
fn quantile_spectrum_nearly_solves_the_fixed_point() {
    let law = MpLaw::new(0.5).unwrap();
    let coarse = quantile_spectrum(&law, 200, 400).unwrap();
    let fine = quantile_spectrum(&law, 3200, 6400).unwrap();
    let z = ComplexPoint::new(1.5, 0.5).unwrap();
    let r_coarse = fixed_point_residual(&coarse, z).norm();
    let r_fine = fixed_point_residual(&fine, z).norm();
    assert!(r_fine < 1e-4, "{r_fine}");
    assert!(r_fine < r_coarse);
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let model = ColumnModel::new(ModelKind::IidGaussian, 20).unwrap();
    let x = sample_matrix(&model, 33, Seed::new(8)).unwrap();
    let s = esd(&x).unwrap();
    let mut buf = Vec::new();
    s.write_csv(&mut buf, "iid_gaussian", "8").unwrap();
    let back = Spectrum::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.n(), 33);
    assert_eq!(back.eigenvalues(), s.eigenvalues());
}

#[test]
fn sampling_is_reproducible_and_streams_are_distinct() {
    let model = ColumnModel::new(ModelKind::SphereUniform, 16).unwrap();
    let a = sample_matrix(&model, 10, Seed::new(9)).unwrap();
    let b = sample_matrix(&model, 10, Seed::new(9)).unwrap();
    let c = sample_matrix(
        &model,
        10,
        Seed {
            value: 9,
            stream: 1,
        },
    )
    .unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
