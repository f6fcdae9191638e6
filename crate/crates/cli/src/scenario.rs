//! The `run` and `oracle-check` pipelines.

use crate::config::{PotentialConfig, ProfileConfig, Scenario, ScenarioConfig};
use crate::emit::{emit_fields, emit_series, FieldRecord, SeriesRecord};
use crate::error::CliResult;
use crate::manifest::{InvariantResult, RunManifest};
use num_complex::Complex;
use pairdens::densities::{
    integrated_cross, nonrel_densities, nonrel_densities_symmetric, occupation_numbers, relativistic_densities,
    single_particle_channels, DensityValues, HoleForm, RelativisticOptions,
};
use pairdens::fock_oracle::{compare_statistics, max_field_deviation, OracleReport};
use pairdens::propagate::propagator_series;
use pairdens::twostate::{boson_overlaps, fermion_overlaps, TwoStateParams};
use pairdens::{Field, Propagator, TheoryKind};
use std::path::{Path, PathBuf};

pub const DRIFT_TOL: f64 = 1e-8;
pub const CONSERVATION_TOL: f64 = 1e-8;
pub const BOUND_TOL: f64 = 1e-10;
pub const QUADRATURE_TOL: f64 = 1e-8;
pub const INTERFERENCE_TOL: f64 = 1e-10;
pub const FORM_TOL: f64 = 1e-9;
pub const CLOSED_FORM_TOL: f64 = 1e-8;
pub const ORACLE_TOL: f64 = 1e-9;

/// Particle/hole quantity names for a theory.
pub fn number_names(theory: TheoryKind) -> (&'static str, &'static str) {
    match theory {
        TheoryKind::NonRelativistic => ("N_ptcl", "N_hole"),
        TheoryKind::Dirac => ("N_el", "N_pos"),
        TheoryKind::KleinGordon => ("N_bos", "N_abos"),
    }
}

fn densities(sc: &Scenario, cfg: &ScenarioConfig, u: &Propagator, form: HoleForm) -> CliResult<(Field, Field)> {
    let packet = sc.packet.as_ref();
    Ok(match sc.basis.theory() {
        TheoryKind::NonRelativistic => match form {
            HoleForm::FilledSea => nonrel_densities(u, &sc.basis, packet)?,
            HoleForm::Symmetric => nonrel_densities_symmetric(u, &sc.basis, packet)?,
        },
        _ => {
            let options = RelativisticOptions { hole_form: form, ..cfg.densities.options() };
            relativistic_densities(u, &sc.basis, packet, options)?
        }
    })
}

fn push_field(out: &mut Vec<FieldRecord>, xs: &[f64], t: f64, channel: &str, values: &[f64]) {
    out.extend(xs.iter().zip(values).map(|(&x, &value)| FieldRecord { t, x, channel: channel.into(), value }));
}

fn push_series(out: &mut Vec<SeriesRecord>, t: f64, quantity: impl Into<String>, value: f64) {
    out.push(SeriesRecord { t, quantity: quantity.into(), value });
}

fn output_dir_file(dir: &Path, prefix: &str, stem: &str, ext: &str) -> PathBuf {
    dir.join(format!("{prefix}_{stem}.{ext}"))
}

/// Two-state closed forms apply when the basis is one symmetric mode pair
/// under a constant drive.
fn two_state_params(cfg: &ScenarioConfig, sc: &Scenario) -> Option<TwoStateParams<f64>> {
    let (PotentialConfig::TwoState { v, .. }, ProfileConfig::Constant { amplitude }) = (&cfg.potential, &cfg.profile)
    else {
        return None;
    };
    let e = sc.basis.energies();
    if e.len() != 2 || (e[0] + e[1]).abs() > 1e-12 * e[1].abs().max(1.0) {
        return None;
    }
    TwoStateParams::new(e[1], Complex::new(v[0], v[1]) * *amplitude).ok()
}

fn two_state_deviation(params: &TwoStateParams<f64>, theory: TheoryKind, u: &Propagator) -> CliResult<f64> {
    let t = u.time();
    let r = match theory {
        TheoryKind::KleinGordon => boson_overlaps(params, t)?,
        _ => fermion_overlaps(params, t)?,
    };
    let pairs = [
        (u.entry(1, 1), r.plus_plus),
        (u.entry(0, 1), r.minus_plus),
        (u.entry(1, 0), r.plus_minus),
        (u.entry(0, 0), r.minus_minus),
    ];
    Ok(pairs.iter().fold(0.0f64, |a, (x, y)| a.max((x - y).norm() / y.norm().max(1.0))))
}

/// Propagates the scenario, writes density and number files plus a manifest
/// into `out_dir`, and evaluates the invariant suite. Failed invariants are
/// recorded in the returned manifest rather than returned as errors.
pub fn run_scenario(cfg: &ScenarioConfig, source: Option<&str>, out_dir: &Path) -> CliResult<RunManifest> {
    let mut manifest = RunManifest::new("run", serde_json::to_value(cfg).expect("config serializes"));
    let sc = Scenario::build(cfg, source)?;
    let basis = &sc.basis;
    let theory = basis.theory();
    let times = cfg.output_times();
    let props = propagator_series(&sc.spec, &times, cfg.time.dt)?;
    let packet = sc.packet.as_ref();
    let excess = if packet.is_some() { 1.0 } else { 0.0 };
    let xs = basis.grid().points();
    let (np, nh) = number_names(theory);
    let primary = cfg.densities.options().hole_form;
    let alternate = match primary {
        HoleForm::Symmetric => HoleForm::FilledSea,
        HoleForm::FilledSea => HoleForm::Symmetric,
    };
    let two_state = two_state_params(cfg, &sc);

    let mut fields = Vec::new();
    let mut series = Vec::new();
    let mut single = Vec::new();
    let (mut drift, mut conservation, mut bounds, mut quadrature) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut interference, mut forms, mut closed) = (0.0f64, 0.0f64, 0.0f64);
    let mut final_fields = None;

    for u in &props {
        let t = u.time();
        let d = u.unitarity_drift();
        drift = drift.max(d);

        let (p, h) = densities(&sc, cfg, u, primary)?;
        for f in [&p, &h] {
            push_field(&mut fields, xs, t, f.channel.name(), f.real_values().unwrap_or(&[]));
        }
        if theory != TheoryKind::KleinGordon {
            let (p2, h2) = densities(&sc, cfg, u, alternate)?;
            forms = forms.max(max_field_deviation(&p, &p2)?).max(max_field_deviation(&h, &h2)?);
        }

        let occ = occupation_numbers(u, basis, packet)?;
        let scale = occ.n_particle.abs().max(1.0);
        conservation = conservation.max((occ.net() - excess).abs() / scale);
        quadrature = quadrature.max(occ.quadrature_mismatch() / scale);
        bounds = bounds.max(if theory == TheoryKind::KleinGordon {
            occ.particle_modes.iter().chain(&occ.hole_modes).fold(0.0f64, |a, &n| a.max(-n))
        } else {
            occ.bound_violation()
        });
        push_series(&mut series, t, np, occ.n_particle);
        push_series(&mut series, t, nh, occ.n_hole);
        push_series(&mut series, t, format!("{np}_quadrature"), occ.n_particle_quadrature);
        push_series(&mut series, t, format!("{nh}_quadrature"), occ.n_hole_quadrature);
        push_series(&mut series, t, "drift", d);
        for (k, n) in occ.particle_modes.iter().enumerate() {
            push_series(&mut series, t, format!("occupation_pos_{:03}", k + 1), *n);
        }
        for (k, n) in occ.hole_modes.iter().enumerate() {
            push_series(&mut series, t, format!("occupation_neg_{:03}", k + 1), *n);
        }

        for mode in basis.modes() {
            let ch = single_particle_channels(u, basis, mode)?;
            interference = interference
                .max(integrated_cross(&ch[2], basis).norm())
                .max(integrated_cross(&ch[3], basis).norm());
        }
        if let Some(m) = &cfg.output.single_particle {
            let [pp, mm, pm, _] = single_particle_channels(u, basis, &m.index())?;
            let (pp, mm) = (pp.real_values().unwrap_or(&[]), mm.real_values().unwrap_or(&[]));
            let cross: Vec<f64> = match &pm.values {
                DensityValues::Complex(v) => v.iter().map(|z| 2.0 * z.re).collect(),
                DensityValues::Real(v) => v.iter().map(|r| 2.0 * r).collect(),
            };
            let full: Vec<f64> = (0..xs.len()).map(|i| pp[i] + mm[i] + cross[i]).collect();
            push_field(&mut single, xs, t, "rho_pp", pp);
            push_field(&mut single, xs, t, "rho_mm", mm);
            push_field(&mut single, xs, t, "interference", &cross);
            push_field(&mut single, xs, t, "unmeasured", &full);
        }

        if let Some(params) = &two_state {
            closed = closed.max(two_state_deviation(params, theory, u)?);
        }
        final_fields = Some((p, h));
    }

    let drift_name = if theory.is_pseudo_unitary() { "pseudo_unitarity_drift" } else { "unitarity_drift" };
    manifest.check(InvariantResult::at_most(drift_name, drift, DRIFT_TOL));
    manifest.check(InvariantResult::at_most("number_conservation", conservation, CONSERVATION_TOL));
    let bound_name = if theory == TheoryKind::KleinGordon { "occupation_nonnegative" } else { "occupation_bounds" };
    manifest.check(InvariantResult::at_most(bound_name, bounds, BOUND_TOL));
    manifest.check(InvariantResult::at_most("quadrature_vs_mode_sums", quadrature, QUADRATURE_TOL));
    manifest.check(InvariantResult::at_most("interference_integrals", interference, INTERFERENCE_TOL));
    if theory != TheoryKind::KleinGordon {
        manifest.check(InvariantResult::at_most("hole_form_equivalence", forms, FORM_TOL));
    }
    if two_state.is_some() {
        manifest.check(InvariantResult::at_most("two_state_closed_form", closed, CLOSED_FORM_TOL));
    }

    std::fs::create_dir_all(out_dir).map_err(|e| crate::error::CliError::io(out_dir, e))?;
    let (prefix, format) = (&cfg.output.prefix, cfg.output.format);
    let ext = format.extension();

    if cfg.oracle.enabled {
        let (p, h) = final_fields.as_ref().expect("at least one output time");
        let report = compare_statistics(&sc.spec, basis, packet, cfg.time.t_max, cfg.time.dt, cfg.oracle.n_max, (p, h))?;
        record_oracle(&mut manifest, &report);
        let path = output_dir_file(out_dir, prefix, "oracle", ext);
        let rows = oracle_series(cfg.time.t_max, &report);
        emit_series(&rows, format, &path)?;
        manifest.add_file(&path, "oracle", rows.len());
    }

    let path = output_dir_file(out_dir, prefix, "densities", ext);
    emit_fields(&fields, format, &path)?;
    manifest.add_file(&path, "fields", fields.len());
    let path = output_dir_file(out_dir, prefix, "numbers", ext);
    emit_series(&series, format, &path)?;
    manifest.add_file(&path, "series", series.len());
    if cfg.output.single_particle.is_some() {
        let path = output_dir_file(out_dir, prefix, "single_particle", ext);
        emit_fields(&single, format, &path)?;
        manifest.add_file(&path, "fields", single.len());
    }
    manifest.finish(&output_dir_file(out_dir, prefix, "manifest", "json"))?;
    Ok(manifest)
}

fn record_oracle(manifest: &mut RunManifest, report: &OracleReport<f64>) {
    manifest.check(InvariantResult::at_most("oracle_fermion", report.fermion, ORACLE_TOL));
    if let Some(b) = report.boson {
        manifest.check(InvariantResult::at_most("oracle_boson", b, ORACLE_TOL));
    }
    manifest.check(InvariantResult::at_most("oracle_distinguishable", report.distinguishable, ORACLE_TOL));
    manifest.check(InvariantResult::at_most("oracle_norm_drift", report.fermion_norm_drift, DRIFT_TOL));
}

fn oracle_series(t: f64, report: &OracleReport<f64>) -> Vec<SeriesRecord> {
    let mut rows = Vec::new();
    push_series(&mut rows, t, "deviation_fermion", report.fermion);
    if let Some(b) = report.boson {
        push_series(&mut rows, t, "deviation_boson", b);
    }
    push_series(&mut rows, t, "deviation_distinguishable", report.distinguishable);
    push_series(&mut rows, t, "boson_truncations", report.boson_truncations as f64);
    push_series(&mut rows, t, "fermion_norm_drift", report.fermion_norm_drift);
    rows
}

/// Compares the closed-form densities at `t_max` with the Fock-space oracle
/// for every applicable statistics.
pub fn oracle_check(cfg: &ScenarioConfig, source: Option<&str>, out_dir: &Path) -> CliResult<RunManifest> {
    let mut manifest = RunManifest::new("oracle-check", serde_json::to_value(cfg).expect("config serializes"));
    if cfg.theory_kind() == TheoryKind::KleinGordon {
        return Err(crate::error::CliError::Config("no Fock-space oracle for Klein-Gordon".into()));
    }
    let sc = Scenario::build(cfg, source)?;
    let u = pairdens::propagate::evolve_propagator(&sc.spec, cfg.time.t_max, cfg.time.dt)?;
    let (p, h) = densities(&sc, cfg, &u, cfg.densities.options().hole_form)?;
    let report =
        compare_statistics(&sc.spec, &sc.basis, sc.packet.as_ref(), cfg.time.t_max, cfg.time.dt, cfg.oracle.n_max, (&p, &h))?;
    record_oracle(&mut manifest, &report);
    std::fs::create_dir_all(out_dir).map_err(|e| crate::error::CliError::io(out_dir, e))?;
    let path = output_dir_file(out_dir, &cfg.output.prefix, "oracle", cfg.output.format.extension());
    let rows = oracle_series(cfg.time.t_max, &report);
    emit_series(&rows, cfg.output.format, &path)?;
    manifest.add_file(&path, "oracle", rows.len());
    manifest.finish(&output_dir_file(out_dir, &cfg.output.prefix, "oracle_manifest", "json"))?;
    Ok(manifest)
}
