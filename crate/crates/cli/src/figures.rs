//! Two-state figure data: fermion pair numbers (`fig5`), boson growth
//! (`fig6`) and single parameter sweeps (`two-state`).

use crate::emit::{emit_series, Format, SeriesRecord};
use crate::error::{CliError, CliResult};
use crate::manifest::{InvariantResult, RunManifest};
use num_complex::Complex;
use pairdens::propagate::{evolve_propagator, propagator_series, HamiltonianSpec, TimeProfile};
use pairdens::twostate::{boson_numbers_with_extra, boson_overlaps, fermion_numbers_with_extra, fermion_overlaps};
use pairdens::{TheoryKind, TwoState};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

pub const FIG5_TOL: f64 = 1e-6;
pub const FIG6_PEAK_TOL: f64 = 1e-6;
pub const FIG6_SLOPE_TOL: f64 = 0.05;
pub const FIG6_CRITICAL_TOL: f64 = 1e-6;
pub const EXTRA_PARTICLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig5Overrides {
    /// Coupling modulus `|V|`.
    pub v: f64,
    /// Values of `E² / |V|²`.
    pub ratios: Vec<f64>,
    pub samples: usize,
    /// `dt = dt_scale / ω_F`.
    pub dt_scale: f64,
    pub format: Format,
}

impl Default for Fig5Overrides {
    fn default() -> Self {
        Fig5Overrides { v: 1.0, ratios: vec![0.0, 0.5, 1.0, 1.5], samples: 401, dt_scale: 1e-3, format: Format::Csv }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig6Overrides {
    pub e: f64,
    /// Values of `|V| / E` below 1.
    pub subcritical: Vec<f64>,
    /// Values of `|V| / E` at or above 1.
    pub supercritical: Vec<f64>,
    pub samples: usize,
    pub dt_scale: f64,
    pub format: Format,
}

impl Default for Fig6Overrides {
    fn default() -> Self {
        Fig6Overrides {
            e: 1.0,
            subcritical: vec![0.4, 0.6, 0.8],
            supercritical: vec![1.0, 1.2, 1.5],
            samples: 401,
            dt_scale: 1e-3,
            format: Format::Csv,
        }
    }
}

/// Parses `--overrides`: inline JSON, or `@path` to a JSON file.
pub fn parse_overrides<T: for<'de> Deserialize<'de> + Default>(arg: Option<&str>) -> CliResult<T> {
    let Some(arg) = arg else { return Ok(T::default()) };
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::io(Path::new(path), e))?,
        None => arg.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("overrides: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    /// Curve parameter: `E²/|V|²` for fig5, `|V|/E` for fig6.
    pub ratio: f64,
    pub times: Vec<f64>,
    pub closed: Vec<f64>,
    pub numeric: Vec<f64>,
}

impl Curve {
    pub fn max_abs_error(&self) -> f64 {
        self.closed.iter().zip(&self.numeric).fold(0.0f64, |a, (c, n)| a.max((c - n).abs()))
    }
}

fn linspace(t_max: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2) - 1;
    (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
}

fn check_positive(name: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("overrides: `{name}` must be positive and finite")))
    }
}

/// `|⟨+|U|−⟩|²` at each time, by midpoint propagation.
fn numeric_curve(theory: TheoryKind, e: f64, v: f64, times: &[f64], dt: f64) -> CliResult<Vec<f64>> {
    let spec = HamiltonianSpec::two_level(theory, e, Complex::new(v, 0.0), TimeProfile::constant(1.0))?;
    Ok(propagator_series(&spec, times, dt)?.iter().map(|u| u.entry(1, 0).norm_sqr()).collect())
}

fn format_ratio(r: f64) -> String {
    format!("{r}")
}

pub fn fig5(o: &Fig5Overrides) -> CliResult<Vec<Curve>> {
    check_positive("v", o.v)?;
    check_positive("dt_scale", o.dt_scale)?;
    let t_max = 4.0 * PI / o.v;
    let times = linspace(t_max, o.samples);
    let mut curves = Vec::new();
    for &r in &o.ratios {
        if !(r.is_finite() && r >= 0.0) {
            return Err(CliError::Config(format!("overrides: ratio {r} must be non-negative")));
        }
        let e = o.v * r.sqrt();
        let params = TwoState::new(e, Complex::new(o.v, 0.0))?;
        let closed = times
            .iter()
            .map(|&t| fermion_overlaps(&params, t).map(|r| r.n_particle))
            .collect::<Result<Vec<_>, _>>()?;
        let numeric = numeric_curve(TheoryKind::Dirac, e, o.v, &times, o.dt_scale / params.omega_f())?;
        curves.push(Curve { ratio: r, times: times.clone(), closed, numeric });
    }
    Ok(curves)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig6Curve {
    pub curve: Curve,
    pub omega_b_abs: f64,
    /// `(closed, numeric)` at `t = π / (2 ω_B)` for subcritical curves.
    pub peak: Option<(f64, f64)>,
    /// Least-squares slope of `ln N` over `[3, 6] / |ω_B|` for supercritical curves.
    pub log_slope: Option<f64>,
    /// Largest relative error against `|V|² t²` for the critical curve.
    pub critical_error: Option<f64>,
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    sxy / sxx
}

pub fn fig6(o: &Fig6Overrides) -> CliResult<Vec<Fig6Curve>> {
    check_positive("e", o.e)?;
    check_positive("dt_scale", o.dt_scale)?;
    let mut out = Vec::new();
    let sub = o.subcritical.iter().map(|&r| (r, true));
    let sup = o.supercritical.iter().map(|&r| (r, false));
    for (r, is_sub) in sub.chain(sup) {
        check_positive("ratio", r)?;
        if is_sub != (r < 1.0) {
            return Err(CliError::Config(format!("overrides: |V|/E = {r} is in the wrong regime list")));
        }
        let v = r * o.e;
        let params = TwoState::new(o.e, Complex::new(v, 0.0))?;
        let w = params.omega_b_abs();
        let critical = (r - 1.0).abs() < 1e-12;
        let t_max = if is_sub {
            2.0 * PI / w
        } else if critical {
            3.0 / v
        } else {
            6.0 / w
        };
        let dt = o.dt_scale / w.max(v);
        let times = linspace(t_max, o.samples);
        let closed = times
            .iter()
            .map(|&t| boson_overlaps(&params, t).map(|r| r.n_particle))
            .collect::<Result<Vec<_>, _>>()?;
        let numeric = numeric_curve(TheoryKind::KleinGordon, o.e, v, &times, dt)?;

        let mut peak = None;
        let mut log_slope = None;
        let mut critical_error = None;
        if is_sub {
            let t_peak = PI / (2.0 * w);
            let spec = HamiltonianSpec::two_level(TheoryKind::KleinGordon, o.e, Complex::new(v, 0.0), TimeProfile::constant(1.0))?;
            let num = evolve_propagator(&spec, t_peak, dt)?.entry(1, 0).norm_sqr();
            peak = Some((boson_overlaps(&params, t_peak)?.n_particle, num));
        } else if critical {
            let err = times
                .iter()
                .zip(&numeric)
                .filter(|(t, _)| **t > 0.0)
                .fold(0.0f64, |a, (t, n)| {
                    let exact = v * v * t * t;
                    a.max((n - exact).abs() / exact)
                });
            critical_error = Some(err);
        } else {
            let window: Vec<(f64, f64)> = times
                .iter()
                .zip(&numeric)
                .filter(|(t, _)| **t * w >= 3.0 - 1e-12 && **t * w <= 6.0 + 1e-12)
                .map(|(t, n)| (*t, n.ln()))
                .collect();
            log_slope = Some(least_squares_slope(&window));
        }
        out.push(Fig6Curve {
            curve: Curve { ratio: r, times, closed, numeric },
            omega_b_abs: w,
            peak,
            log_slope,
            critical_error,
        });
    }
    Ok(out)
}

fn curve_rows(rows: &mut Vec<SeriesRecord>, name: &str, c: &Curve) {
    let r = format_ratio(c.ratio);
    for ((&t, &cl), &nu) in c.times.iter().zip(&c.closed).zip(&c.numeric) {
        rows.push(SeriesRecord { t, quantity: format!("{name}_closed_r{r}"), value: cl });
        rows.push(SeriesRecord { t, quantity: format!("{name}_numeric_r{r}"), value: nu });
    }
}

pub fn run_fig5(o: &Fig5Overrides, out_dir: &Path) -> CliResult<RunManifest> {
    let mut manifest = RunManifest::new("fig5", serde_json::to_value(o).expect("overrides serialize"));
    let curves = fig5(o)?;
    let mut rows = Vec::new();
    for c in &curves {
        curve_rows(&mut rows, "N_el", c);
        manifest.check(InvariantResult::at_most(
            format!("closed_vs_numeric_r{}", format_ratio(c.ratio)),
            c.max_abs_error(),
            FIG5_TOL,
        ));
    }
    write_figure(manifest, &rows, o.format, out_dir, "fig5")
}

pub fn run_fig6(o: &Fig6Overrides, out_dir: &Path) -> CliResult<RunManifest> {
    let mut manifest = RunManifest::new("fig6", serde_json::to_value(o).expect("overrides serialize"));
    let curves = fig6(o)?;
    let mut rows = Vec::new();
    for c in &curves {
        let r = format_ratio(c.curve.ratio);
        curve_rows(&mut rows, "N_bos", &c.curve);
        manifest.check(InvariantResult::at_most(
            format!("closed_vs_numeric_r{r}"),
            c.curve.max_abs_error() / c.curve.closed.iter().fold(1.0f64, |a, v| a.max(v.abs())),
            FIG6_PEAK_TOL,
        ));
        if let Some((closed, numeric)) = c.peak {
            let v2 = (c.curve.ratio * o.e).powi(2);
            manifest.check(InvariantResult::at_most(
                format!("peak_r{r}"),
                (closed - v2 / (c.omega_b_abs * c.omega_b_abs)).abs().max((numeric - closed).abs()),
                FIG6_PEAK_TOL,
            ));
        }
        if let Some(s) = c.log_slope {
            let target = 2.0 * c.omega_b_abs;
            manifest.check(InvariantResult::at_most(
                format!("log_slope_r{r}"),
                (s - target).abs() / target,
                FIG6_SLOPE_TOL,
            ));
        }
        if let Some(err) = c.critical_error {
            manifest.check(InvariantResult::at_most(format!("critical_growth_r{r}"), err, FIG6_CRITICAL_TOL));
        }
    }
    write_figure(manifest, &rows, o.format, out_dir, "fig6")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoStateArgs {
    pub e: f64,
    pub v: f64,
    pub v_im: f64,
    pub t_max: f64,
    pub samples: usize,
    pub format: Format,
}

/// Closed-form fermion and boson numbers, with and without one extra
/// particle, on a uniform time grid.
pub fn run_two_state(a: &TwoStateArgs, out_dir: &Path) -> CliResult<RunManifest> {
    let mut manifest = RunManifest::new("two-state", serde_json::to_value(a).expect("arguments serialize"));
    if !(a.t_max.is_finite() && a.t_max >= 0.0) {
        return Err(CliError::Config("--tmax must be non-negative".into()));
    }
    if !(a.e.is_finite() && a.v.is_finite() && a.v_im.is_finite()) {
        return Err(CliError::Config("--E and --V must be finite".into()));
    }
    let params = TwoState::new(a.e, Complex::new(a.v, a.v_im))?;
    let mut rows = Vec::new();
    let (mut symmetric, mut extra) = (0.0f64, 0.0f64);
    for t in linspace(a.t_max, a.samples) {
        let f = fermion_overlaps(&params, t)?;
        let b = boson_overlaps(&params, t)?;
        let (fe, fp) = fermion_numbers_with_extra(&params, t)?;
        let (be, bp) = boson_numbers_with_extra(&params, t)?;
        symmetric = symmetric.max((f.n_particle - f.n_antiparticle).abs()).max((b.n_particle - b.n_antiparticle).abs());
        extra = extra.max(((be - bp) - 1.0).abs() / be.max(1.0)).max(((fe - fp) - 1.0).abs());
        for (q, v) in [
            ("fermion_N_el", f.n_particle),
            ("fermion_N_pos", f.n_antiparticle),
            ("fermion_N_el_extra", fe),
            ("fermion_N_pos_extra", fp),
            ("boson_N_bos", b.n_particle),
            ("boson_N_abos", b.n_antiparticle),
            ("boson_N_bos_extra", be),
            ("boson_N_abos_extra", bp),
        ] {
            rows.push(SeriesRecord { t, quantity: q.into(), value: v });
        }
    }
    manifest.check(InvariantResult::at_most("pair_balance", symmetric, EXTRA_PARTICLE_TOL));
    manifest.check(InvariantResult::at_most("extra_particle_difference", extra, EXTRA_PARTICLE_TOL));
    write_figure(manifest, &rows, a.format, out_dir, "two_state")
}

fn write_figure(
    mut manifest: RunManifest,
    rows: &[SeriesRecord],
    format: Format,
    out_dir: &Path,
    stem: &str,
) -> CliResult<RunManifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let path = out_dir.join(format!("{stem}.{}", format.extension()));
    emit_series(rows, format, &path)?;
    manifest.add_file(&path, "series", rows.len());
    manifest.finish(&out_dir.join(format!("{stem}_manifest.json")))?;
    Ok(manifest)
}
