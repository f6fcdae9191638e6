use std::sync::Arc;

use num_complex::Complex;
use pairdens::basis::{build_free_dirac_basis, build_nonrel_basis, StatisticsKind, WavePacket};
use pairdens::densities::{
    integrated_cross, integrated_numbers, nonrel_densities, nonrel_densities_symmetric, relativistic_densities,
    HoleForm, RelativisticOptions,
};
use pairdens::fock_oracle::{
    apply_one_body, build_initial_state, canonical_residual, compare_statistics, density_expectation,
    density_field, enumerate_basis, evolve_many_body, max_field_deviation, FockVector, ManyBodyOperatorSpec,
    ManyBodyState, OracleChannel,
};
use pairdens::propagate::{evolve_propagator, evolve_state, HamiltonianSpec, TimeProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

fn window() -> TimeProfile<f64> {
    TimeProfile::Gaussian { amplitude: 4.0, center: 0.8, width: 0.3 }
}

#[test]
fn enumeration_sizes() {
    assert_eq!(enumerate_basis(4, StatisticsKind::Fermion, 2, None).unwrap().dim(), 6);
    assert_eq!(enumerate_basis(2, StatisticsKind::Boson, 2, None).unwrap().dim(), 3);
    assert_eq!(enumerate_basis(6, StatisticsKind::Fermion, 3, None).unwrap().dim(), 20);
    assert!(enumerate_basis(3, StatisticsKind::Fermion, 4, None).is_err());
    assert!(matches!(
        enumerate_basis(40, StatisticsKind::Fermion, 20, None),
        Err(pairdens::Error::DimensionCap { .. })
    ));
}

#[test]
fn lexicographic_order() {
    let s = enumerate_basis(3, StatisticsKind::Fermion, 1, None).unwrap();
    assert_eq!(s.state(0), &[0, 0, 1]);
    assert_eq!(s.state(2), &[1, 0, 0]);
}

#[test]
fn hop_sign_on_two_fermions() {
    // a†(2) a(0) |1100⟩: removing mode 0 gives sign +1, then placing in
    // mode 2 passes one occupied mode, sign −1.
    let space = Arc::new(enumerate_basis(4, StatisticsKind::Fermion, 2, None).unwrap());
    let mut amps = vec![c(0.0, 0.0); space.dim()];
    amps[space.index_of(&[1, 1, 0, 0]).unwrap()] = c(1.0, 0.0);
    let state = ManyBodyState::new(space.clone(), amps).unwrap();
    let op = ManyBodyOperatorSpec { terms: vec![(c(1.0, 0.0), 2, 0)] };
    let out = apply_one_body(&op, &state).unwrap();
    let target = space.index_of(&[0, 1, 1, 0]).unwrap();
    assert_eq!(out.amplitudes()[target], c(-1.0, 0.0));
    assert_eq!(out.amplitudes().iter().filter(|z| z.norm() > 0.0).count(), 1);
}

#[test]
fn number_operator_eigenvalue() {
    let space = Arc::new(enumerate_basis(3, StatisticsKind::Boson, 3, Some(3)).unwrap());
    let i = space.index_of(&[2, 0, 1]).unwrap();
    let mut amps = vec![c(0.0, 0.0); space.dim()];
    amps[i] = c(1.0, 0.0);
    let state = ManyBodyState::new(space, amps).unwrap();
    let out = apply_one_body(&ManyBodyOperatorSpec::number(0), &state).unwrap();
    assert!((out.amplitudes()[i] - c(2.0, 0.0)).norm() < 1e-15);
}

#[test]
fn boson_cap_counts_truncation() {
    let space = Arc::new(enumerate_basis(2, StatisticsKind::Boson, 2, Some(1)).unwrap());
    let i = space.index_of(&[1, 1]).unwrap();
    let mut amps = vec![c(0.0, 0.0); space.dim()];
    amps[i] = c(1.0, 0.0);
    let state = ManyBodyState::new(space, amps).unwrap();
    let out = apply_one_body(&ManyBodyOperatorSpec { terms: vec![(c(1.0, 0.0), 0, 1)] }, &state).unwrap();
    assert_eq!(out.truncations(), 1);
}

fn random_vector(rng: &mut ChaCha8Rng, modes: usize, max_occ: u8, fermion: bool) -> FockVector<f64> {
    let mut v = FockVector::new();
    for _ in 0..6 {
        let occ: Vec<u8> =
            (0..modes).map(|_| if fermion { rng.gen_range(0..2) } else { rng.gen_range(0..=max_occ) }).collect();
        v.insert(occ, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    }
    v
}

#[test]
fn canonical_relations_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let fv = random_vector(&mut rng, 5, 1, true);
        let bv = random_vector(&mut rng, 5, 3, false);
        for j in 0..5 {
            for jp in 0..5 {
                assert!(canonical_residual(StatisticsKind::Fermion, 1, j, jp, &fv).unwrap() < 1e-12);
                assert!(canonical_residual(StatisticsKind::Boson, 10, j, jp, &bv).unwrap() < 1e-12);
            }
        }
    }
}

#[test]
fn single_particle_sector_matches_one_body_evolution() {
    let basis = build_nonrel_basis::<f64>(1, 3, 4.0, 1.0, 64).unwrap();
    let spec = HamiltonianSpec::gaussian_barrier(&basis, 2.0, 1.3, 0.4, window()).unwrap();
    let a = [c(0.5, 0.0), c(0.0, 0.5), c(0.5, 0.0), c(0.0, -0.5)];
    let space = Arc::new(enumerate_basis(4, StatisticsKind::Fermion, 1, None).unwrap());
    let mut amps = vec![c(0.0, 0.0); 4];
    for (j, &z) in a.iter().enumerate() {
        let mut occ = vec![0u8; 4];
        occ[j] = 1;
        amps[space.index_of(&occ).unwrap()] = z;
    }
    let state = ManyBodyState::new(space.clone(), amps).unwrap();
    let evolved = evolve_many_body(&spec, &state, 1.5, 0.01).unwrap();
    let one = evolve_state(&spec, &a, 1.5, 0.01).unwrap();
    for (j, z) in one.iter().enumerate() {
        let mut occ = vec![0u8; 4];
        occ[j] = 1;
        let mb = evolved.amplitudes()[space.index_of(&occ).unwrap()];
        assert!((mb - z).norm() < 1e-10, "mode {j}: {mb} vs {z}");
    }
}

#[test]
fn statistics_independence_nonrel() {
    let basis = build_nonrel_basis::<f64>(2, 2, 4.0, 1.0, 64).unwrap();
    let spec = HamiltonianSpec::gaussian_barrier(&basis, 2.0, 1.3, 0.4, window()).unwrap();
    let packet = WavePacket::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
    let (t, dt) = (1.5, 0.01);
    let prop = evolve_propagator(&spec, t, dt).unwrap();
    for pk in [None, Some(&packet)] {
        let (p, h) = nonrel_densities(&prop, &basis, pk).unwrap();
        assert!(p.max_abs() > 1e-3, "field too weak to be a meaningful check");
        let report = compare_statistics(&spec, &basis, pk, t, dt, Some(3), (&p, &h)).unwrap();
        assert!(report.worst() < 1e-10, "{report:?}");
        assert_eq!(report.boson_truncations, 0);
        assert!(report.fermion_norm_drift < 1e-10);
    }
}

#[test]
fn dirac_filled_sea_matches_closed_form() {
    let basis = build_free_dirac_basis::<f64>(2, 6.0, 1.0, 32).unwrap();
    let spec = HamiltonianSpec::gaussian_barrier(&basis, 3.0, 3.0, 0.5, window()).unwrap();
    let packet = WavePacket::normalized(vec![c(1.0, 0.0), c(0.5, 0.5), c(0.0, 0.0), c(0.2, 0.0), c(0.0, 0.0)]).unwrap();
    let (t, dt) = (1.2, 0.01);
    let prop = evolve_propagator(&spec, t, dt).unwrap();
    for pk in [None, Some(&packet)] {
        for form in [HoleForm::Symmetric, HoleForm::FilledSea] {
            let opts = RelativisticOptions { hole_form: form, ..Default::default() };
            let (el, pos) = relativistic_densities(&prop, &basis, pk, opts).unwrap();
            let report = compare_statistics(&spec, &basis, pk, t, dt, None, (&el, &pos)).unwrap();
            assert!(report.worst() < 1e-10, "{form:?}: {report:?}");
        }
    }
}

#[test]
fn oracle_channels_on_filled_sea() {
    let basis = build_nonrel_basis::<f64>(2, 2, 3.0, 1.0, 32).unwrap();
    let init = build_initial_state(&basis, StatisticsKind::Fermion, None, None).unwrap();
    let mm = density_field(&init, OracleChannel::MinusMinus, &basis, None, 0.0).unwrap();
    let pp = density_field(&init, OracleChannel::PlusPlus, &basis, None, 0.0).unwrap();
    let vals = mm.real_values().unwrap();
    for (m, &x) in basis.grid().points().iter().enumerate() {
        let want: f64 = (0..2).map(|n| basis.mode_value(n, x, 0).norm_sqr()).sum();
        assert!((vals[m] - want).abs() < 1e-12);
    }
    assert!(pp.max_abs() < 1e-15);
    assert!(density_expectation(&init, OracleChannel::Hole, 3, &basis, None).is_err());
    assert!("xx".parse::<OracleChannel>().is_err());

    let spec = HamiltonianSpec::gaussian_barrier(&basis, 2.0, 1.0, 0.3, TimeProfile::constant(1.0)).unwrap();
    let evolved = evolve_many_body(&spec, &init, 0.9, 0.01).unwrap();
    let pm = density_field(&evolved, OracleChannel::PlusMinus, &basis, None, 0.9).unwrap();
    assert!(integrated_cross(&pm, &basis).norm() < 1e-10);
    assert!(pm.real_values().is_none());
    assert!(integrated_numbers(&pm, &basis).is_err());
}

#[test]
fn zero_field_densities_stay_zero() {
    let basis = build_nonrel_basis::<f64>(2, 2, 3.0, 1.0, 32).unwrap();
    let spec = HamiltonianSpec::gaussian_barrier(&basis, 0.0, 1.0, 0.3, TimeProfile::constant(1.0)).unwrap();
    let init = build_initial_state(&basis, StatisticsKind::Fermion, None, None).unwrap();
    let evolved = evolve_many_body(&spec, &init, 2.0, 0.05).unwrap();
    let p = density_field(&evolved, OracleChannel::Particle, &basis, None, 2.0).unwrap();
    let h = density_field(&evolved, OracleChannel::Hole, &basis, Some(&init), 2.0).unwrap();
    assert!(p.max_abs() < 1e-13 && h.max_abs() < 1e-13);
}

#[test]
fn symmetric_and_filled_sea_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let basis = build_nonrel_basis::<f64>(rng.gen_range(1..4), rng.gen_range(1..4), 3.0, 1.0, 48).unwrap();
        let spec = HamiltonianSpec::gaussian_barrier(
            &basis,
            rng.gen_range(0.5..4.0),
            rng.gen_range(0.5..2.5),
            rng.gen_range(0.2..0.6),
            TimeProfile::constant(1.0),
        )
        .unwrap();
        let prop = evolve_propagator(&spec, rng.gen_range(0.1..2.0), 0.01).unwrap();
        let coeffs = (0..basis.n_pos()).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let packet = WavePacket::normalized(coeffs).unwrap();
        let (p1, h1) = nonrel_densities(&prop, &basis, Some(&packet)).unwrap();
        let (p2, h2) = nonrel_densities_symmetric(&prop, &basis, Some(&packet)).unwrap();
        assert!(max_field_deviation(&p1, &p2).unwrap() < 1e-12);
        assert!(max_field_deviation(&h1, &h2).unwrap() < 1e-10);
    }
}
