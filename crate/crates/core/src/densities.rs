//! Particle/hole densities and occupation numbers from propagator data.
//!
//! Every formula is expressed through a single primitive: the local density
//! of a set of branch-restricted coefficient vectors,
//! `D_μ(x; B) = Σ_col Σ_i g_i |Σ_{k∈μ} φ_{k,i}(x) B_{k,col}|²`,
//! evaluated on the basis grid.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;

use crate::basis::{BasisSet, Branch, ModeIndex, TheoryKind, WavePacket};
use crate::error::{Error, Result};
use crate::propagate::PropagatorMatrix;
use crate::scalar::{cx, czero, Real};

/// What a [`DensityField`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Particle,
    Hole,
    Electron,
    Positron,
    Boson,
    Antiboson,
    /// `⟨ψ|π_μ π_x π_μ'|ψ⟩` for a single-particle state.
    Raw(Branch, Branch),
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Particle => "ptcl",
            Channel::Hole => "hole",
            Channel::Electron => "el",
            Channel::Positron => "pos",
            Channel::Boson => "bos",
            Channel::Antiboson => "abos",
            Channel::Raw(Branch::Positive, Branch::Positive) => "rho_pp",
            Channel::Raw(Branch::Positive, Branch::Negative) => "rho_pm",
            Channel::Raw(Branch::Negative, Branch::Positive) => "rho_mp",
            Channel::Raw(Branch::Negative, Branch::Negative) => "rho_mm",
        }
    }

    pub fn is_cross(self) -> bool {
        matches!(self, Channel::Raw(a, b) if a != b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityValues<T> {
    Real(Vec<T>),
    Complex(Vec<Complex<T>>),
}

/// A density channel sampled on the basis grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField<T> {
    pub channel: Channel,
    pub time: T,
    pub values: DensityValues<T>,
}

impl<T: Real> DensityField<T> {
    fn real(channel: Channel, time: T, values: Vec<T>) -> Self {
        DensityField { channel, time, values: DensityValues::Real(values) }
    }

    pub fn real_values(&self) -> Option<&[T]> {
        match &self.values {
            DensityValues::Real(v) => Some(v),
            DensityValues::Complex(_) => None,
        }
    }

    pub fn len(&self) -> usize {
        match &self.values {
            DensityValues::Real(v) => v.len(),
            DensityValues::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smallest sample of a real field.
    pub fn min_value(&self) -> Option<T> {
        self.real_values().map(|v| v.iter().fold(T::max_value().unwrap_or(T::one()), |a, &x| a.min(x)))
    }

    /// Largest magnitude over the samples.
    pub fn max_abs(&self) -> T {
        match &self.values {
            DensityValues::Real(v) => v.iter().fold(T::zero(), |a, x| a.max(x.abs())),
            DensityValues::Complex(v) => v.iter().fold(T::zero(), |a, x| a.max(x.modulus())),
        }
    }
}

/// `∫ρ dx` by trapezoidal quadrature on the grid of `basis`.
pub fn integrated_numbers<T: Real>(field: &DensityField<T>, basis: &BasisSet<T>) -> Result<T> {
    match &field.values {
        DensityValues::Real(v) => {
            if v.len() != basis.grid().len() {
                return Err(Error::DimensionMismatch { expected: basis.grid().len(), found: v.len() });
            }
            Ok(basis.grid().integrate(v))
        }
        DensityValues::Complex(_) => Err(Error::CrossChannel(field.channel.name())),
    }
}

/// Integral of a complex cross channel.
pub fn integrated_cross<T: Real>(field: &DensityField<T>, basis: &BasisSet<T>) -> Complex<T> {
    match &field.values {
        DensityValues::Real(v) => cx(basis.grid().integrate(v)),
        DensityValues::Complex(v) => basis.grid().integrate_complex(v),
    }
}

/// Branch-resolved amplitude `⟨x,i|π_±|ψ_j(t)⟩`, one entry per component.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSplit<T> {
    pub plus: Vec<Complex<T>>,
    pub minus: Vec<Complex<T>>,
    metric: Vec<T>,
}

impl<T: Real> AmplitudeSplit<T> {
    pub fn full(&self) -> Vec<Complex<T>> {
        self.plus.iter().zip(&self.minus).map(|(a, b)| a + b).collect()
    }

    fn form(&self, a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
        a.iter()
            .zip(b)
            .zip(&self.metric)
            .fold(czero(), |acc, ((x, y), &g)| acc + x.conj() * *y * g)
    }

    pub fn prob_plus(&self) -> T {
        self.form(&self.plus, &self.plus).re
    }

    pub fn prob_minus(&self) -> T {
        self.form(&self.minus, &self.minus).re
    }

    /// `ρ_{+−}` at this point; `ρ_{−+}` is its conjugate.
    pub fn cross(&self) -> Complex<T> {
        self.form(&self.plus, &self.minus)
    }

    /// `ρ_{+−} + ρ_{−+}`.
    pub fn interference(&self) -> T {
        self.cross().re * (T::one() + T::one())
    }
}

fn check_pair<T: Real>(prop: &PropagatorMatrix<T>, basis: &BasisSet<T>) -> Result<()> {
    if prop.dim() != basis.dim() || prop.n_neg() != basis.n_neg() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: prop.dim() });
    }
    if prop.theory() != basis.theory() {
        return Err(Error::WrongTheory(prop.theory().name()));
    }
    Ok(())
}

/// `A_±(x, j, t)`: the two pathways from initial mode `j` to position `x`.
pub fn split_amplitudes<T: Real>(
    prop: &PropagatorMatrix<T>,
    basis: &BasisSet<T>,
    initial: &ModeIndex,
    x: T,
) -> Result<AmplitudeSplit<T>> {
    check_pair(prop, basis)?;
    let j = basis.index_of(initial)?;
    let comps = basis.components();
    let mut plus = vec![czero(); comps];
    let mut minus = vec![czero(); comps];
    for k in 0..basis.dim() {
        let u = prop.entry(k, j) * basis.metric()[k];
        let target = if k < basis.n_neg() { &mut minus } else { &mut plus };
        for (i, slot) in target.iter_mut().enumerate() {
            *slot += basis.mode_value(k, x, i) * u;
        }
    }
    let metric = (0..comps).map(|i| basis.theory().component_sign(i)).collect();
    Ok(AmplitudeSplit { plus, minus, metric })
}

/// Position probability with or without a prior energy-sign measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PositionProbability<T> {
    /// `|A_+ + A_−|²`.
    Unmeasured(T),
    /// `(|A_+|², |A_−|²)`.
    Measured { plus: T, minus: T },
}

pub fn position_probability<T: Real>(
    prop: &PropagatorMatrix<T>,
    basis: &BasisSet<T>,
    initial: &ModeIndex,
    x: T,
    measured: bool,
) -> Result<PositionProbability<T>> {
    let s = split_amplitudes(prop, basis, initial, x)?;
    Ok(if measured {
        PositionProbability::Measured { plus: s.prob_plus(), minus: s.prob_minus() }
    } else {
        let full = s.full();
        PositionProbability::Unmeasured(s.form(&full, &full).re)
    })
}

/// `ρ_{++}, ρ_{−−}, ρ_{+−}, ρ_{−+}` on the grid for a single particle
/// started in mode `initial`.
pub fn single_particle_channels<T: Real>(
    prop: &PropagatorMatrix<T>,
    basis: &BasisSet<T>,
    initial: &ModeIndex,
) -> Result<[DensityField<T>; 4]> {
    check_pair(prop, basis)?;
    let j = basis.index_of(initial)?;
    let comps = basis.components();
    let col = prop.column(j);
    let mut signed = col.clone();
    for (k, &l) in basis.metric().iter().enumerate() {
        signed[k] *= l;
    }
    let plus = branch_amplitudes(basis, Branch::Positive, &signed);
    let minus = branch_amplitudes(basis, Branch::Negative, &signed);
    let points = basis.grid().len();
    let mut pp = vec![T::zero(); points];
    let mut mm = vec![T::zero(); points];
    let mut pm = vec![czero(); points];
    for m in 0..points {
        for i in 0..comps {
            let g: T = basis.theory().component_sign(i);
            let a = plus[m * comps + i];
            let b = minus[m * comps + i];
            pp[m] += a.norm_sqr() * g;
            mm[m] += b.norm_sqr() * g;
            pm[m] += a.conj() * b * g;
        }
    }
    let mp = pm.iter().map(|z| z.conj()).collect();
    let t = prop.time();
    Ok([
        DensityField::real(Channel::Raw(Branch::Positive, Branch::Positive), t, pp),
        DensityField::real(Channel::Raw(Branch::Negative, Branch::Negative), t, mm),
        DensityField {
            channel: Channel::Raw(Branch::Positive, Branch::Negative),
            time: t,
            values: DensityValues::Complex(pm),
        },
        DensityField {
            channel: Channel::Raw(Branch::Negative, Branch::Positive),
            time: t,
            values: DensityValues::Complex(mp),
        },
    ])
}

fn branch_amplitudes<T: Real>(basis: &BasisSet<T>, branch: Branch, coeffs: &DVector<Complex<T>>) -> DVector<Complex<T>> {
    let r = basis.branch_range(branch);
    basis.samples().columns(r.start, r.len()) * coeffs.rows(r.start, r.len())
}

/// `D_μ(x; B)` for the rows of `block` belonging to branch `μ`.
fn local_density<T: Real>(basis: &BasisSet<T>, branch: Branch, block: &DMatrix<Complex<T>>) -> Vec<T> {
    let r = basis.branch_range(branch);
    let comps = basis.components();
    let amps = basis.samples().columns(r.start, r.len()) * block.rows(r.start, r.len());
    let mut out = vec![T::zero(); basis.grid().len()];
    for (m, slot) in out.iter_mut().enumerate() {
        for i in 0..comps {
            let g: T = basis.theory().component_sign(i);
            let row = amps.row(m * comps + i);
            *slot += row.iter().fold(T::zero(), |a, z| a + z.norm_sqr()) * g;
        }
    }
    out
}

fn columns_of<T: Real>(prop: &PropagatorMatrix<T>, branch: Branch, basis: &BasisSet<T>) -> DMatrix<Complex<T>> {
    let r = basis.branch_range(branch);
    prop.matrix().columns(r.start, r.len()).into_owned()
}

/// Overlaps `⟨φ_j|φ(t)⟩` of the evolved packet.
fn packet_overlaps<T: Real>(
    prop: &PropagatorMatrix<T>,
    basis: &BasisSet<T>,
    packet: Option<&WavePacket<T>>,
) -> Result<Option<DMatrix<Complex<T>>>> {
    packet
        .map(|p| {
            let full = p.embed(basis)?;
            Ok(prop.matrix() * DMatrix::from_column_slice(full.len(), 1, &full))
        })
        .transpose()
}

fn axpy<T: Real>(acc: &mut [T], sign: T, v: &[T]) {
    for (a, &b) in acc.iter_mut().zip(v) {
        *a += sign * b;
    }
}

/// Hole-channel evaluation for the non-relativistic and Dirac pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HoleForm {
    /// `Σ_p |⟨x|π_−|p(t)⟩|²`: no reference to the filled sea.
    #[default]
    Symmetric,
    /// `Σ_n [|⟨x|n⟩|² − |⟨x|π_−|n(t)⟩|²]`.
    FilledSea,
}

/// Sign reading of the antiboson channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AntibosonSign {
    /// The particle density, integrating to `N_abos ≥ 0`.
    #[default]
    Particle,
    /// The negative-frequency charge density: the particle density negated.
    Charge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RelativisticOptions {
    pub hole_form: HoleForm,
    pub antiboson: AntibosonSign,
}

fn hole_field<T: Real>(
    prop: &PropagatorMatrix<T>,
    basis: &BasisSet<T>,
    form: HoleForm,
    packet: &Option<DMatrix<Complex<T>>>,
) -> Vec<T> {
    let mut hole = match form {
        HoleForm::Symmetric => local_density(basis, Branch::Negative, &columns_of(prop, Branch::Positive, basis)),
        HoleForm::FilledSea => {
            let dim = basis.dim();
            let r = basis.branch_range(Branch::Negative);
            let mut sea = DMatrix::zeros(dim, r.len());
            for (c, j) in r.enumerate() {
                sea[(j, c)] = cx(T::one());
            }
            let mut h = local_density(basis, Branch::Negative, &sea);
            let evolved = local_density(basis, Branch::Negative, &columns_of(prop, Branch::Negative, basis));
            axpy(&mut h, -T::one(), &evolved);
            h
        }
    };
    if let Some(c) = packet {
        axpy(&mut hole, -T::one(), &local_density(basis, Branch::Negative, c));
    }
    hole
}

fn particle_field<T: Real>(
    prop: &PropagatorMatrix<T>,
    basis: &BasisSet<T>,
    packet: &Option<DMatrix<Complex<T>>>,
) -> Vec<T> {
    let mut ptcl = local_density(basis, Branch::Positive, &columns_of(prop, Branch::Negative, basis));
    if let Some(c) = packet {
        axpy(&mut ptcl, T::one(), &local_density(basis, Branch::Positive, c));
    }
    ptcl
}

/// Particle and hole densities for a filled negative branch, optionally
/// with one extra particle in `packet`; hole channel in the filled-sea form.
pub fn nonrel_densities<T: Real>(
    prop: &PropagatorMatrix<T>,
    basis: &BasisSet<T>,
    packet: Option<&WavePacket<T>>,
) -> Result<(DensityField<T>, DensityField<T>)> {
    nonrel_with_form(prop, basis, packet, HoleForm::FilledSea)
}

/// As [`nonrel_densities`], with the hole channel summed over positive modes.
pub fn nonrel_densities_symmetric<T: Real>(
    prop: &PropagatorMatrix<T>,
    basis: &BasisSet<T>,
    packet: Option<&WavePacket<T>>,
) -> Result<(DensityField<T>, DensityField<T>)> {
    nonrel_with_form(prop, basis, packet, HoleForm::Symmetric)
}

fn nonrel_with_form<T: Real>(
    prop: &PropagatorMatrix<T>,
    basis: &BasisSet<T>,
    packet: Option<&WavePacket<T>>,
    form: HoleForm,
) -> Result<(DensityField<T>, DensityField<T>)> {
    check_pair(prop, basis)?;
    if basis.theory() != TheoryKind::NonRelativistic {
        return Err(Error::WrongTheory(basis.theory().name()));
    }
    let c = packet_overlaps(prop, basis, packet)?;
    let t = prop.time();
    Ok((
        DensityField::real(Channel::Particle, t, particle_field(prop, basis, &c)),
        DensityField::real(Channel::Hole, t, hole_field(prop, basis, form, &c)),
    ))
}

/// Electron/positron (Dirac) or boson/antiboson (Klein–Gordon) densities.
pub fn relativistic_densities<T: Real>(
    prop: &PropagatorMatrix<T>,
    basis: &BasisSet<T>,
    packet: Option<&WavePacket<T>>,
    options: RelativisticOptions,
) -> Result<(DensityField<T>, DensityField<T>)> {
    check_pair(prop, basis)?;
    let c = packet_overlaps(prop, basis, packet)?;
    let t = prop.time();
    match basis.theory() {
        TheoryKind::NonRelativistic => Err(Error::WrongTheory(basis.theory().name())),
        TheoryKind::Dirac => Ok((
            DensityField::real(Channel::Electron, t, particle_field(prop, basis, &c)),
            DensityField::real(Channel::Positron, t, hole_field(prop, basis, options.hole_form, &c)),
        )),
        TheoryKind::KleinGordon => {
            if options.hole_form == HoleForm::FilledSea {
                return Err(Error::Config("the filled-sea form has no Klein–Gordon counterpart".into()));
            }
            // The mode sum enters with the branch signature −1; the packet term
            // keeps its minus. Both integrate to non-negative numbers.
            let mut abos = local_density(basis, Branch::Negative, &columns_of(prop, Branch::Positive, basis));
            for v in abos.iter_mut() {
                *v = -*v;
            }
            if let Some(c) = &c {
                axpy(&mut abos, -T::one(), &local_density(basis, Branch::Negative, c));
            }
            if options.antiboson == AntibosonSign::Charge {
                for v in abos.iter_mut() {
                    *v = -*v;
                }
            }
            Ok((
                DensityField::real(Channel::Boson, t, particle_field(prop, basis, &c)),
                DensityField::real(Channel::Antiboson, t, abos),
            ))
        }
    }
}

/// Integrated numbers from mode sums and from quadrature, plus per-mode
/// occupations.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationReport<T> {
    pub time: T,
    /// `N_ptcl` (or `N_el`, `N_bos`) from mode sums.
    pub n_particle: T,
    /// `N_hole` (or `N_pos`, `N_abos`) from mode sums.
    pub n_hole: T,
    pub n_particle_quadrature: T,
    pub n_hole_quadrature: T,
    /// `N(p, t)` over the positive branch.
    pub particle_modes: Vec<T>,
    /// `N(n, t)` over the negative branch.
    pub hole_modes: Vec<T>,
}

impl<T: Real> OccupationReport<T> {
    /// `N_ptcl − N_hole` from the mode sums.
    pub fn net(&self) -> T {
        self.n_particle - self.n_hole
    }

    /// Largest disagreement between mode sums and quadrature.
    pub fn quadrature_mismatch(&self) -> T {
        (self.n_particle - self.n_particle_quadrature)
            .abs()
            .max((self.n_hole - self.n_hole_quadrature).abs())
    }

    /// Worst excursion of any per-mode occupation outside `[0, 1]`.
    pub fn bound_violation(&self) -> T {
        self.particle_modes
            .iter()
            .chain(&self.hole_modes)
            .fold(T::zero(), |a, &n| a.max(-n).max(n - T::one()))
    }
}

pub fn occupation_numbers<T: Real>(
    prop: &PropagatorMatrix<T>,
    basis: &BasisSet<T>,
    packet: Option<&WavePacket<T>>,
) -> Result<OccupationReport<T>> {
    check_pair(prop, basis)?;
    let c = packet_overlaps(prop, basis, packet)?;
    let u = prop.matrix();
    let neg = basis.branch_range(Branch::Negative);
    let pos = basis.branch_range(Branch::Positive);
    let packet_weight = |j: usize| c.as_ref().map_or(T::zero(), |c| c[(j, 0)].norm_sqr());

    let particle_modes: Vec<T> = pos
        .clone()
        .map(|p| neg.clone().fold(T::zero(), |a, n| a + u[(p, n)].norm_sqr()) + packet_weight(p))
        .collect();
    let hole_modes: Vec<T> = if basis.theory().is_pseudo_unitary() {
        neg.clone()
            .map(|n| pos.clone().fold(T::zero(), |a, p| a + u[(n, p)].norm_sqr()) + packet_weight(n))
            .collect()
    } else {
        neg.clone()
            .map(|n| {
                T::one() - neg.clone().fold(T::zero(), |a, m| a + u[(n, m)].norm_sqr()) - packet_weight(n)
            })
            .collect()
    };

    let (ptcl, hole) = match basis.theory() {
        TheoryKind::NonRelativistic => nonrel_densities_symmetric(prop, basis, packet)?,
        _ => relativistic_densities(prop, basis, packet, RelativisticOptions::default())?,
    };
    Ok(OccupationReport {
        time: prop.time(),
        n_particle: particle_modes.iter().fold(T::zero(), |a, &x| a + x),
        n_hole: hole_modes.iter().fold(T::zero(), |a, &x| a + x),
        n_particle_quadrature: integrated_numbers(&ptcl, basis)?,
        n_hole_quadrature: integrated_numbers(&hole, basis)?,
        particle_modes,
        hole_modes,
    })
}
