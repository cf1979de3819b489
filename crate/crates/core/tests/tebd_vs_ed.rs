use su2qlm::ed::{build_hamiltonian, embed_product, embed_site_diagonal, enumerate_sector_basis, lowest_eigenpair};
use su2qlm::model::{build_density_operators, build_meson_operator};
use su2qlm::record::state_meson_correlator;
use su2qlm::tebd::{ground_state_search, AnnealSchedule};
use su2qlm::ModelParams;

#[test]
fn small_chain_matches_ed() {
    for &n in &[2u32, 4] {
        for &t in &[0.5, 5.0, 20.0] {
            let p = ModelParams::new(t, 4, n).unwrap();
            let b = enumerate_sector_basis(4, n).unwrap();
            let h = build_hamiltonian(&p, &b).unwrap();
            let gs = lowest_eigenpair(&h, 1).unwrap();
            let v = &gs.vectors[0];
            let r = ground_state_search(&p, 64, 1e-12, &AnnealSchedule::precise(), &[1, 2, 3]).unwrap();
            let rel = (r.report.energy - gs.values[0]).abs() / gs.values[0].abs();
            assert!(rel < 1e-6, "N={n} t={t}: relative energy error {rel:e}");

            let mps = &r.state;
            let dens = mps.site_operators(|bs| ndarray::Array2::from_diag(&build_density_operators(bs).matter));
            let prof = mps.local_profile(&dens).unwrap();
            for j in 0..4 {
                let d = build_density_operators(b.site_basis(j));
                let want = embed_site_diagonal(&b, j, &d.matter).unwrap().quadratic_form(v, v);
                assert!((prof[j] - want).abs() < 1e-5, "N={n} t={t} site {j}: {} vs {want}", prof[j]);
            }
            let lower = mps.site_operators(|bs| build_meson_operator(bs).lower);
            let raise = mps.site_operators(|bs| build_meson_operator(bs).raise);
            let cm = mps.correlation_matrix(&lower, &raise).unwrap();
            for i in 0..4 {
                for j in (0..4).filter(|&j| j != i) {
                    let want = embed_product(&b, &[(i, &lower[i]), (j, &raise[j])]).unwrap().quadratic_form(v, v);
                    assert!((cm[[i, j]] - want).abs() < 1e-5, "N={n} t={t} ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn bulk_correlator_matches_ed_on_the_same_state() {
    let p = ModelParams::new(5.0, 4, 4).unwrap();
    let b = enumerate_sector_basis(4, 4).unwrap();
    let r = ground_state_search(&p, 64, 1e-12, &AnnealSchedule::default(), &[7]).unwrap();
    let series = state_meson_correlator(&r.state, 0.5).unwrap();
    let mut v = r.state.to_sector_vector(&b).unwrap();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let lower: Vec<_> = (0..4).map(|j| build_meson_operator(b.site_basis(j)).lower).collect();
    let raise: Vec<_> = (0..4).map(|j| build_meson_operator(b.site_basis(j)).raise).collect();
    // window of 2 reference sites (1 and 2) in a 4-site chain
    assert_eq!(series.window, (1, 2));
    for (&l, &c) in series.separations.iter().zip(&series.values) {
        let mut terms = Vec::new();
        for j in 1..=2usize {
            for k in [j + l, j.wrapping_sub(l)] {
                if k < 4 {
                    terms.push(embed_product(&b, &[(j, &lower[j]), (k, &raise[k])]).unwrap().quadratic_form(&v, &v));
                }
            }
        }
        let want = terms.iter().sum::<f64>() / terms.len() as f64;
        assert!((c - want).abs() < 1e-8, "l={l}: {c} vs {want}");
    }
}
