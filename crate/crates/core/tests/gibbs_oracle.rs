mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use anneal_core::gibbs::{chi_square, partition_function, tail_mass, z_lower_bound_fit, Domain, GibbsMeasure};
use anneal_core::potentials::builtin_default;
use anneal_core::stats::linear_fit;
use anneal_core::{Potential, TorusSpec};
use common::adaptive_simpson;

#[test]
fn gaussian_normalization_across_betas() {
    let q = builtin_default("quadratic_d").unwrap();
    for beta in [0.5, 1.0, 2.0, 8.0] {
        let z = partition_function(&q, beta, Domain::Auto, 4000).unwrap().value;
        assert!((z - (2.0 * PI / beta).sqrt()).abs() < 1e-6, "beta {beta}: {z}");
    }
}

#[test]
fn gaussian_tail_matches_erfc() {
    let q = builtin_default("quadratic_d").unwrap();
    for beta in [0.5, 2.0, 8.0, 40.0, 80.0] {
        for eps in [0.05, 0.2, 1.0] {
            let t = tail_mass(&q, beta, eps, Domain::Auto, 4000).unwrap().value;
            let exact = libm::erfc((eps * beta).sqrt());
            assert!((t - exact).abs() <= 1e-6 * exact.max(1e-300).max(t) + 1e-300, "beta {beta} eps {eps}: {t} vs {exact}");
        }
    }
}

#[test]
fn double_well_partition_function_against_adaptive_oracle() {
    let dw = builtin_default("double_well_1d").unwrap();
    let z = partition_function(&dw, 5.0, Domain::Auto, 4000).unwrap().value;
    let f = |x: f64| (-5.0 * dw.value(&[x])).exp();
    let oracle = adaptive_simpson(&f, -4.0, 4.0, 1e-14);
    assert!((z / oracle - 1.0).abs() < 1e-6, "{z} vs {oracle}");
}

#[test]
fn tail_slope_tracks_epsilon() {
    let betas: Vec<f64> = (0..16).map(|i| 20.0 + 4.0 * i as f64).collect();
    for name in ["quadratic_d", "double_well_1d"] {
        let p = builtin_default(name).unwrap();
        let logs: Vec<f64> = betas
            .iter()
            .map(|&b| tail_mass(&p, b, 0.2, Domain::Auto, 4000).unwrap().value.ln())
            .collect();
        let (_, slope) = linear_fit(&betas, &logs);
        assert!((slope + 0.2).abs() <= 0.02, "{name}: {slope}");
    }
}

#[test]
fn tails_are_monotone_on_lattice() {
    for name in ["quadratic_d", "double_well_1d", "tilted_double_well_1d", "oscillating_confining_1d"] {
        let p = builtin_default(name).unwrap();
        for eps in [0.1, 0.2, 0.5] {
            let mut prev = f64::INFINITY;
            for beta in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
                let t = tail_mass(&p, beta, eps, Domain::Auto, 4000).unwrap().value;
                assert!(t <= prev * (1.0 + 1e-6), "{name} eps {eps} beta {beta}");
                prev = t;
            }
        }
    }
}

#[test]
fn normalization_of_builtins() {
    for name in ["quadratic_d", "double_well_1d", "tilted_double_well_1d", "oscillating_confining_1d"] {
        let p = builtin_default(name).unwrap();
        for beta in [0.5, 2.0, 10.0] {
            let gm = GibbsMeasure::new(&p, beta, Domain::Auto, 4000).unwrap();
            assert!((gm.total_mass() - 1.0).abs() < 1e-8, "{name} {beta}");
        }
    }
    let p = builtin_default("double_well_2d").unwrap();
    let gm = GibbsMeasure::new(&p, 2.0, Domain::Auto, 400).unwrap();
    assert!((gm.total_mass() - 1.0).abs() < 1e-8);
}

#[test]
fn partition_lower_bounds() {
    let q = builtin_default("quadratic_d").unwrap();
    let (kappa, vals) = z_lower_bound_fit(&q, &[0.25, 1.0, 4.0, 16.0, 64.0], Domain::Auto, 4000).unwrap();
    assert!(kappa >= (2.0 * PI).sqrt() * (1.0 - 1e-9));
    assert_eq!(vals.len(), 5);
    let dw = builtin_default("double_well_1d").unwrap();
    let betas: Vec<f64> = (1..=32).map(f64::from).collect();
    let (kappa, _) = z_lower_bound_fit(&dw, &betas, Domain::Auto, 4000).unwrap();
    assert!(kappa > 0.0);
    assert!(z_lower_bound_fit(&dw, &[1.0, 2.0, 3.0], Domain::Auto, 4000).is_err());
}

#[test]
fn chi_square_on_torus() {
    let ts = TorusSpec::new(Arc::new(builtin_default("double_well_1d").unwrap()), 5.0, 3.0, 0.1).unwrap();
    let n = 600;
    let h = 6.0 / n as f64;
    let u: Vec<f64> = (0..n).map(|i| ts.value(&[-3.0 + h * i as f64])).collect();
    let gibbs = |beta: f64| {
        let w: Vec<f64> = u.iter().map(|v| (-beta * v).exp()).collect();
        let z: f64 = w.iter().sum::<f64>() * h;
        w.iter().map(|v| v / z).collect::<Vec<_>>()
    };
    let self_chi = chi_square(&gibbs(3.0), &u, 3.0, h).unwrap();
    assert!((self_chi - 1.0).abs() < 1e-12);
    // independent continuum value of ∫ μ_{2β}²/μ_β = Z_β Z_{3β} / Z_{2β}²
    let zc = |b: f64| adaptive_simpson(&|x: f64| (-b * ts.value(&[x])).exp(), -3.0, 3.0, 1e-13);
    let oracle = zc(3.0) * zc(9.0) / zc(6.0).powi(2);
    let chi = chi_square(&gibbs(6.0), &u, 3.0, h).unwrap();
    assert!(chi > 1.0);
    assert!((chi / oracle - 1.0).abs() < 1e-6, "{chi} vs {oracle}");
}
