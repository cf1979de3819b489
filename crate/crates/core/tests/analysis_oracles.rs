use std::f64::consts::PI;

use ndarray::Array2;
use proptest::prelude::*;
use su2qlm::analysis::*;
use su2qlm::ed::{build_hamiltonian, embed_product, enumerate_all_sectors, enumerate_sector_basis, lowest_eigenpair};
use su2qlm::model::{build_density_operators, build_meson_operator, Charges};
use su2qlm::mps::{init_product_state, SymmetricMps};
use su2qlm::record::{state_cdw_order_parameter, state_meson_correlator};
use su2qlm::ModelParams;

fn series(values: Vec<f64>) -> CorrelatorSeries {
    CorrelatorSeries { separations: (1..=values.len()).collect(), values, window: (0, 0) }
}

#[test]
fn moment_of_an_exponential_matches_the_geometric_sums() {
    let s = series((1..=200).map(|l| (-(l as f64) / 5.0).exp()).collect());
    let q = (-0.2f64).exp();
    // sum_{l>=1} (l-1)^2 q^l / sum_{l>=1} q^l
    let analytic = (q * (1.0 + q) / (1.0 - q).powi(2)).sqrt();
    let xi = correlation_length_moment(&s).unwrap();
    assert!((xi - analytic).abs() / analytic < 0.02);
}

#[test]
fn correlator_fit_round_trip() {
    let s = series((1..=40).map(|l| (l as f64).powf(-0.5) * (-(l as f64) / 8.0).exp()).collect());
    let f = correlation_length_fit(&s).unwrap();
    assert!((f.a0 - 1.0).abs() < 1e-6);
    assert!((f.eta - 0.5).abs() < 1e-6);
    assert!((f.xi - 8.0).abs() < 1e-6);
    assert!(!f.lower_bound);
}

#[test]
fn pure_power_law_gives_a_lower_bound() {
    let s = series((1..=30).map(|l| 0.7 * (l as f64).powf(-0.8)).collect());
    let f = correlation_length_fit(&s).unwrap();
    assert!(f.lower_bound);
    assert!(f.xi > 30.0);
    assert!(correlation_length_fit(&series(vec![1.0, 0.5, 0.0, -0.1, 0.2])).is_err());
}

#[test]
fn moment_and_fit_estimators_agree() {
    let s = series((1..=60).map(|l| (l as f64).powf(-0.5) * (-(l as f64) / 8.0).exp()).collect());
    let a = correlation_length_moment(&s).unwrap();
    let b = correlation_length_fit(&s).unwrap().xi;
    assert!((a - b).abs() / b < 0.2, "moment {a} fit {b}");
}

#[test]
fn extrapolation_recovers_a_synthetic_transition() {
    let (tc, a) = (12.3, -47.0);
    let pts: Vec<(f64, f64)> = [42.0, 58.0, 74.0, 90.0].iter().map(|&l| (l, tc + a / l)).collect();
    let e = extrapolate_thermo(&pts).unwrap();
    assert!((e.intercept - tc).abs() < 1e-10);
    assert!((e.slope - a).abs() < 1e-8);
}

#[test]
fn transition_from_tanh_families() {
    let t: Vec<f64> = (0..=80).map(|i| i as f64 * 0.25).collect();
    let curves: Vec<Curve> = [8usize, 12, 16, 24]
        .iter()
        .map(|&len| {
            // inflection drifting as 10 + 16/L, placed on the grid
            let center = 10.0 + 16.0 / len as f64;
            let center = (center * 4.0).round() / 4.0;
            Curve { len, t: t.clone(), value: t.iter().map(|x| (1.0 + ((x - center) / 1.5).tanh()) / 2.0).collect() }
        })
        .collect();
    let est = locate_transition(&curves, TransitionMethod::SteepestSlope).unwrap();
    assert_eq!(est.per_length.len(), 4);
    assert!(est.uncertainty >= 0.25);
    assert!((est.t_c - 10.0).abs() < est.uncertainty + 0.1, "{est:?}");
}

#[test]
fn neel_product_state_has_unit_cdw_order() {
    let len = 6;
    let p = ModelParams::new(0.0, len, len as u32).unwrap();
    // mesons on even sites, links all pointing right
    let charges: Vec<Charges> = (0..len)
        .map(|j| {
            let n_r = if j == 0 { 0 } else { 2 };
            Charges::new(n_r, if j % 2 == 0 { 2 } else { 0 }, 0)
        })
        .collect();
    let s = SymmetricMps::product(&p, &charges).unwrap();
    assert!((state_cdw_order_parameter(&s, PI).unwrap() - 1.0).abs() < 1e-14);
    let c = state_meson_correlator(&s, 0.5).unwrap();
    assert!(c.values.iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn hand_built_meson_superposition() {
    let b = enumerate_all_sectors(2).unwrap();
    let ops: Vec<_> = (0..2).map(|j| build_meson_operator(b.site_basis(j))).collect();
    let empty: Vec<u8> = (0..2)
        .map(|j| {
            let bs = b.site_basis(j);
            let c = if j == 0 { Charges::new(0, 0, 2) } else { Charges::new(0, 0, 0) };
            bs.index_of(c).unwrap() as u8
        })
        .collect();
    let vac = b.find(&empty).unwrap();
    // (sigma^+_0 + sigma^+_1)|0> / sqrt(2)
    let mut psi = vec![0.0; b.dim()];
    for j in 0..2 {
        let up = embed_product(&b, &[(j, &ops[j].raise)]).unwrap();
        let mut e = vec![0.0; b.dim()];
        e[vac] = 1.0;
        let mut out = vec![0.0; b.dim()];
        up.matvec(&e, &mut out);
        psi.iter_mut().zip(&out).for_each(|(p, o)| *p += o / 2f64.sqrt());
    }
    assert!((psi.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
    let m = Array2::from_shape_fn((2, 2), |(i, j)| {
        embed_product(&b, &[(i, &ops[i].lower), (j, &ops[j].raise)]).unwrap().quadratic_form(&psi, &psi)
    });
    let c = meson_correlator(&m, 0.5).unwrap();
    assert_eq!(c.separations, vec![1]);
    assert!((c.values[0] - 0.5).abs() < 1e-14);
}

#[test]
fn zeta_zero_vanishes_on_fixed_filling() {
    let p = ModelParams::new(3.0, 4, 4).unwrap();
    let b = enumerate_sector_basis(4, 4).unwrap();
    let gs = lowest_eigenpair(&build_hamiltonian(&p, &b).unwrap(), 1).unwrap();
    let v = &gs.vectors[0];
    let n: Vec<_> = (0..4).map(|j| Array2::from_diag(&build_density_operators(b.site_basis(j)).matter)).collect();
    let dens: Vec<f64> = (0..4).map(|j| embed_product(&b, &[(j, &n[j])]).unwrap().quadratic_form(v, v)).collect();
    let corr = Array2::from_shape_fn((4, 4), |(i, j)| {
        if i == j {
            embed_product(&b, &[(i, &n[i].dot(&n[i]))]).unwrap().quadratic_form(v, v)
        } else {
            embed_product(&b, &[(i, &n[i]), (j, &n[j])]).unwrap().quadratic_form(v, v)
        }
    });
    let z0 = structure_factor_full(&corr, &dens, 0.0, 1.0).unwrap();
    // zeta is a square root, so test the radicand (roundoff level)
    assert!(z0 * z0 < 1e-12, "zeta_0 = {z0:e}");
    // the distinct-pair sum alone is minus the density variance, below zero
    assert!(cdw_order_parameter(&corr, &dens, 0.0, 1.0).is_err());
    // same for a product state with mesons on random sites
    let s = init_product_state(&p, 3).unwrap();
    assert!(state_cdw_order_parameter(&s, 0.0).is_err());
}

#[test]
fn fermi_trend_deviation_is_zero_on_the_trend() {
    let mk = |f: f64| CCFitResult {
        c: 1.0,
        c_prime: 0.0,
        b0: 0.0,
        b1: 1.0,
        k_f: fermi_trend(f),
        residual: 0.0,
        stderr: [0.0; 5],
        points: 10,
    };
    let d = fermi_deviation(&[(0.5, mk(0.5)), (1.5, mk(1.5))]).unwrap();
    assert!(d.iter().all(|x| x.abs() < 1e-15));
    assert!(fermi_deviation(&[(0.5, mk(0.5))]).is_err());
}

fn correlation_strategy() -> impl Strategy<Value = (Vec<f64>, Array2<f64>)> {
    (3usize..9).prop_flat_map(|len| {
        proptest::collection::vec(0.0f64..2.0, len * 3).prop_map(move |raw| {
            // a Gram-like symmetric positive matrix plus a density profile
            let dens: Vec<f64> = raw[..len].to_vec();
            let a: Vec<f64> = raw[len..].to_vec();
            let corr = Array2::from_shape_fn((len, len), |(i, j)| dens[i] * dens[j] + 0.1 * a[i] * a[j] + if i == j { 0.2 } else { 0.0 });
            (dens, corr)
        })
    })
}

proptest! {
    #[test]
    fn zeta_depends_only_on_separations((dens, corr) in correlation_strategy(), k in 0.0f64..std::f64::consts::TAU, shift in 1usize..5) {
        // translating the chain relabels sites; embedding in a longer chain
        // with inert sites at the front must not change the separations
        let len = dens.len();
        let big = len + shift;
        let mut d2 = vec![1.0; big];
        let mut c2 = Array2::from_elem((big, big), 1.0);
        for i in 0..len {
            d2[i + shift] = dens[i];
            for j in 0..len {
                c2[[i + shift, j + shift]] = corr[[i, j]];
            }
            for j in 0..shift {
                c2[[i + shift, j]] = dens[i];
                c2[[j, i + shift]] = dens[i];
            }
        }
        let norm_small = (len * (len - 1)) as f64;
        let norm_big = (big * (big - 1)) as f64;
        let a = structure_factor_full(&corr, &dens, k, 1.0).unwrap().powi(2) * norm_small;
        let b = structure_factor_full(&c2, &d2, k, 1.0).unwrap().powi(2) * norm_big;
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn moment_of_nearest_neighbour_series_is_zero(c in 1e-6f64..10.0, tail in 0usize..10) {
        let mut v = vec![c];
        v.extend(std::iter::repeat_n(0.0, tail));
        prop_assert_eq!(correlation_length_moment(&series(v)).unwrap(), 0.0);
    }

    #[test]
    fn entropy_fit_round_trips(c in 0.5f64..2.0, cp in -0.5f64..1.0, b0 in 0.02f64..0.2, b1 in 0.5f64..1.5, k in 0.3f64..1.4) {
        let len = 80;
        let truth = [c, cp, b0, b1, k];
        let prof: Vec<f64> = (1..len).map(|l| profile_model(&truth, len, l as f64)).collect();
        let fit = fit_central_charge(&prof, len, 0.1).unwrap();
        let got = [fit.c, fit.c_prime, fit.b0, fit.b1, fit.k_f];
        for (g, t) in got.iter().zip(&truth) {
            prop_assert!((g - t).abs() < 1e-6, "{:?} vs {:?}", got, truth);
        }
    }

    #[test]
    fn fits_are_deterministic(c in 0.5f64..2.0, k in 0.3f64..1.4) {
        let len = 40;
        let prof: Vec<f64> = (1..len).map(|l| profile_model(&[c, 0.3, 0.05, 1.0, k], len, l as f64)).collect();
        prop_assert_eq!(fit_central_charge(&prof, len, 0.1).unwrap(), fit_central_charge(&prof, len, 0.1).unwrap());
    }
}
