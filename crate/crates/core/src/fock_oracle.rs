//! Brute-force many-body reference.
//!
//! States live in a number-conserving occupation basis over the one-particle
//! modes (negative branch first, then positive). The fermionic creation
//! operator `a†(j)` acts with sign `(−1)^(occupied modes before j)`; bosonic
//! occupations are capped at `n_max` and any amplitude pushed above the cap
//! is dropped and counted as a truncation event.
//!
//! Evolution uses the same midpoint steps as [`crate::propagate`], but each
//! step exponential is applied to the many-body vector through a scaled
//! Taylor series, so nothing is shared with the one-particle eigen route.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex;

use crate::basis::{BasisSet, Branch, StatisticsKind, TheoryKind, WavePacket};
use crate::densities::{Channel, DensityField, DensityValues};
use crate::error::{Error, Result};
use crate::propagate::{evolve_state, HamiltonianSpec};
use crate::scalar::{cx, czero, from_usize, lit, Real};

pub const DEFAULT_DIMENSION_CAP: usize = 20_000;

type Occupation = Vec<u8>;

/// Number-conserving occupation basis in lexicographic order.
#[derive(Debug, Clone)]
pub struct FockSpace {
    statistics: StatisticsKind,
    modes: usize,
    particles: usize,
    n_max: u8,
    states: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
}

/// Enumerates all occupation vectors with `particles` quanta over `modes`.
///
/// Fermions ignore `n_max`; bosons default to `particles + 1`.
pub fn enumerate_basis(
    modes: usize,
    statistics: StatisticsKind,
    particles: usize,
    n_max: Option<u8>,
) -> Result<FockSpace> {
    enumerate_basis_capped(modes, statistics, particles, n_max, DEFAULT_DIMENSION_CAP)
}

pub fn enumerate_basis_capped(
    modes: usize,
    statistics: StatisticsKind,
    particles: usize,
    n_max: Option<u8>,
    cap: usize,
) -> Result<FockSpace> {
    let n_max = match statistics {
        StatisticsKind::Fermion => 1,
        StatisticsKind::Boson => {
            let default = u8::try_from(particles + 1).unwrap_or(u8::MAX);
            let n = n_max.unwrap_or(default);
            if n == 0 {
                return Err(Error::Config("boson occupancy cap must be at least 1".into()));
            }
            n
        }
        StatisticsKind::Distinguishable => {
            return Err(Error::Oracle("distinguishable particles have no occupation basis".into()))
        }
    };
    if statistics == StatisticsKind::Fermion && particles > modes {
        return Err(Error::Config(format!("{particles} fermions do not fit in {modes} modes")));
    }
    let dimension = count_states(modes, particles, n_max as usize);
    if dimension > cap as u128 {
        return Err(Error::DimensionCap { dimension: dimension.min(usize::MAX as u128) as usize, cap });
    }
    let mut states = Vec::with_capacity(dimension as usize);
    let mut current = vec![0u8; modes];
    fill(&mut states, &mut current, 0, particles, n_max);
    let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    Ok(FockSpace { statistics, modes, particles, n_max, states, index })
}

fn count_states(modes: usize, particles: usize, n_max: usize) -> u128 {
    // ways[n] = number of ways to place n quanta in the modes seen so far.
    let mut ways = vec![0u128; particles + 1];
    ways[0] = 1;
    for _ in 0..modes {
        let mut next = vec![0u128; particles + 1];
        for (n, &w) in ways.iter().enumerate() {
            for k in 0..=n_max.min(particles - n) {
                next[n + k] = next[n + k].saturating_add(w);
            }
        }
        ways = next;
    }
    ways[particles]
}

fn fill(out: &mut Vec<Occupation>, cur: &mut Occupation, pos: usize, left: usize, n_max: u8) {
    if pos == cur.len() {
        if left == 0 {
            out.push(cur.clone());
        }
        return;
    }
    let room = (cur.len() - pos - 1) * n_max as usize;
    for k in 0..=(n_max as usize).min(left) {
        if left - k > room {
            continue;
        }
        cur[pos] = k as u8;
        fill(out, cur, pos + 1, left - k, n_max);
    }
    cur[pos] = 0;
}

impl FockSpace {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn statistics(&self) -> StatisticsKind {
        self.statistics
    }

    pub fn n_max(&self) -> u8 {
        self.n_max
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }
}

/// Result of a single ladder operator on an occupation vector.
enum Ladder<T> {
    Zero,
    Truncated,
    Some(Occupation, T),
}

fn fermion_sign<T: Real>(occ: &[u8], j: usize) -> T {
    if occ[..j].iter().map(|&n| n as usize).sum::<usize>() % 2 == 0 {
        T::one()
    } else {
        -T::one()
    }
}

fn ladder_create<T: Real>(stats: StatisticsKind, n_max: u8, occ: &[u8], j: usize) -> Ladder<T> {
    match stats {
        StatisticsKind::Fermion => {
            if occ[j] == 1 {
                return Ladder::Zero;
            }
            let s = fermion_sign(occ, j);
            let mut o = occ.to_vec();
            o[j] = 1;
            Ladder::Some(o, s)
        }
        _ => {
            if occ[j] >= n_max {
                return Ladder::Truncated;
            }
            let mut o = occ.to_vec();
            o[j] += 1;
            let f = from_usize::<T>(o[j] as usize).sqrt();
            Ladder::Some(o, f)
        }
    }
}

fn ladder_annihilate<T: Real>(stats: StatisticsKind, occ: &[u8], j: usize) -> Ladder<T> {
    if occ[j] == 0 {
        return Ladder::Zero;
    }
    let factor = match stats {
        StatisticsKind::Fermion => fermion_sign(occ, j),
        _ => from_usize::<T>(occ[j] as usize).sqrt(),
    };
    let mut o = occ.to_vec();
    o[j] -= 1;
    Ladder::Some(o, factor)
}

/// Sparse state keyed by occupation vector; particle number may vary.
pub type FockVector<T> = BTreeMap<Occupation, Complex<T>>;

/// `a†(j)` on a sparse vector. Returns the image and the number of
/// amplitudes dropped at the boson cap.
pub fn create<T: Real>(stats: StatisticsKind, n_max: u8, j: usize, v: &FockVector<T>) -> (FockVector<T>, usize) {
    let mut out = FockVector::new();
    let mut dropped = 0;
    for (occ, &amp) in v {
        match ladder_create::<T>(stats, n_max, occ, j) {
            Ladder::Some(o, f) => *out.entry(o).or_insert_with(czero) += amp * f,
            Ladder::Truncated => dropped += 1,
            Ladder::Zero => {}
        }
    }
    (out, dropped)
}

/// `a(j)` on a sparse vector.
pub fn annihilate<T: Real>(stats: StatisticsKind, j: usize, v: &FockVector<T>) -> FockVector<T> {
    let mut out = FockVector::new();
    for (occ, &amp) in v {
        if let Ladder::Some(o, f) = ladder_annihilate::<T>(stats, occ, j) {
            *out.entry(o).or_insert_with(czero) += amp * f;
        }
    }
    out
}

/// `max |(a(j)a†(j') − ξ a†(j')a(j) − δ_jj') v|` over the components of `v`.
pub fn canonical_residual<T: Real>(
    stats: StatisticsKind,
    n_max: u8,
    j: usize,
    jp: usize,
    v: &FockVector<T>,
) -> Result<T> {
    let xi: T = match stats.xi() {
        Some(x) => lit(x as f64),
        None => return Err(Error::Oracle("canonical relations need fermions or bosons".into())),
    };
    let (cv, d1) = create(stats, n_max, jp, v);
    let first = annihilate(stats, j, &cv);
    let (second, d2) = create(stats, n_max, jp, &annihilate(stats, j, v));
    if d1 + d2 > 0 {
        return Err(Error::Oracle("state reaches the boson occupancy cap".into()));
    }
    let mut diff = first;
    for (k, a) in second {
        *diff.entry(k).or_insert_with(czero) -= a * xi;
    }
    if j == jp {
        for (k, &a) in v {
            *diff.entry(k.clone()).or_insert_with(czero) -= a;
        }
    }
    Ok(diff.values().fold(T::zero(), |m, z| m.max(z.modulus())))
}

/// One-body operator `Σ A_jj' a†(j) a(j')` given as a coefficient list.
#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyOperatorSpec<T> {
    pub terms: Vec<(Complex<T>, usize, usize)>,
}

impl<T: Real> ManyBodyOperatorSpec<T> {
    /// All non-zero entries of a mode-space matrix.
    pub fn from_matrix(a: &DMatrix<Complex<T>>) -> Self {
        let mut terms = Vec::new();
        for j in 0..a.nrows() {
            for jp in 0..a.ncols() {
                let c = a[(j, jp)];
                if c.norm_sqr() > T::zero() {
                    terms.push((c, j, jp));
                }
            }
        }
        ManyBodyOperatorSpec { terms }
    }

    pub fn number(j: usize) -> Self {
        ManyBodyOperatorSpec { terms: vec![(cx(T::one()), j, j)] }
    }
}

/// Coordinate-list matrix over a [`FockSpace`].
#[derive(Debug, Clone)]
struct SparseOperator<T> {
    entries: Vec<(usize, usize, Complex<T>)>,
    norm_one: T,
}

impl<T: Real> SparseOperator<T> {
    fn build(space: &FockSpace, op: &ManyBodyOperatorSpec<T>) -> Result<(Self, usize)> {
        let mut acc: HashMap<(usize, usize), Complex<T>> = HashMap::new();
        let mut truncated = 0;
        for (col, occ) in space.states.iter().enumerate() {
            for &(coef, j, jp) in &op.terms {
                if j >= space.modes || jp >= space.modes {
                    return Err(Error::UnknownMode(format!("operator mode index outside {} modes", space.modes)));
                }
                let Ladder::Some(mid, f1) = ladder_annihilate::<T>(space.statistics, occ, jp) else {
                    continue;
                };
                match ladder_create::<T>(space.statistics, space.n_max, &mid, j) {
                    Ladder::Some(end, f2) => {
                        let row = space.index[&end];
                        *acc.entry((row, col)).or_insert_with(czero) += coef * (f1 * f2);
                    }
                    Ladder::Truncated => truncated += 1,
                    Ladder::Zero => {}
                }
            }
        }
        let mut entries: Vec<_> = acc.into_iter().map(|((r, c), v)| (r, c, v)).collect();
        entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut col_sums = vec![T::zero(); space.dim()];
        for &(_, c, v) in &entries {
            col_sums[c] += v.modulus();
        }
        let norm_one = col_sums.into_iter().fold(T::zero(), |a, b| a.max(b));
        Ok((SparseOperator { entries, norm_one }, truncated))
    }

    fn apply_into(&self, scale: Complex<T>, v: &[Complex<T>], out: &mut [Complex<T>]) {
        for &(r, c, a) in &self.entries {
            out[r] += a * v[c] * scale;
        }
    }
}

/// Amplitudes over a [`FockSpace`].
#[derive(Debug, Clone)]
pub struct ManyBodyState<T> {
    space: Arc<FockSpace>,
    amplitudes: Vec<Complex<T>>,
    truncations: usize,
}

impl<T: Real> ManyBodyState<T> {
    pub fn new(space: Arc<FockSpace>, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: amplitudes.len() });
        }
        Ok(ManyBodyState { space, amplitudes, truncations: 0 })
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    /// Amplitudes dropped at the boson cap since the state was built.
    pub fn truncations(&self) -> usize {
        self.truncations
    }

    pub fn norm(&self) -> T {
        self.amplitudes.iter().fold(T::zero(), |a, z| a + z.norm_sqr()).sqrt()
    }

    pub fn to_fock_vector(&self) -> FockVector<T> {
        self.space
            .states
            .iter()
            .cloned()
            .zip(self.amplitudes.iter().copied())
            .filter(|(_, a)| a.norm_sqr() > T::zero())
            .collect()
    }

    /// `⟨ψ|a†(j) a(j')|ψ⟩` for all mode pairs.
    pub fn one_body_density(&self) -> DMatrix<Complex<T>> {
        let d = self.space.modes;
        let mut gamma = DMatrix::zeros(d, d);
        for (col, occ) in self.space.states.iter().enumerate() {
            let a = self.amplitudes[col];
            if a.norm_sqr() == T::zero() {
                continue;
            }
            for jp in 0..d {
                let Ladder::Some(mid, f1) = ladder_annihilate::<T>(self.space.statistics, occ, jp) else {
                    continue;
                };
                for j in 0..d {
                    if let Ladder::Some(end, f2) = ladder_create::<T>(self.space.statistics, self.space.n_max, &mid, j)
                    {
                        let row = self.space.index[&end];
                        gamma[(j, jp)] += self.amplitudes[row].conj() * a * (f1 * f2);
                    }
                }
            }
        }
        gamma
    }
}

/// Applies a one-body operator; truncation events accumulate on the result.
pub fn apply_one_body<T: Real>(op: &ManyBodyOperatorSpec<T>, state: &ManyBodyState<T>) -> Result<ManyBodyState<T>> {
    let (m, truncated) = SparseOperator::build(&state.space, op)?;
    let mut out = vec![czero(); state.space.dim()];
    m.apply_into(cx(T::one()), &state.amplitudes, &mut out);
    Ok(ManyBodyState { space: state.space.clone(), amplitudes: out, truncations: state.truncations + truncated })
}

/// Every negative mode singly occupied, plus `Σ_p C_p a†(p)` if a packet is given.
pub fn build_initial_state<T: Real>(
    basis: &BasisSet<T>,
    statistics: StatisticsKind,
    packet: Option<&WavePacket<T>>,
    n_max: Option<u8>,
) -> Result<ManyBodyState<T>> {
    build_initial_state_capped(basis, statistics, packet, n_max, DEFAULT_DIMENSION_CAP)
}

pub fn build_initial_state_capped<T: Real>(
    basis: &BasisSet<T>,
    statistics: StatisticsKind,
    packet: Option<&WavePacket<T>>,
    n_max: Option<u8>,
    cap: usize,
) -> Result<ManyBodyState<T>> {
    if basis.theory() == TheoryKind::KleinGordon {
        return Err(Error::WrongTheory(basis.theory().name()));
    }
    let particles = basis.n_neg() + usize::from(packet.is_some());
    let space = Arc::new(enumerate_basis_capped(basis.dim(), statistics, particles, n_max, cap)?);
    let mut sea = vec![0u8; basis.dim()];
    for n in basis.branch_range(Branch::Negative) {
        sea[n] = 1;
    }
    let mut v = FockVector::new();
    let mut dropped = 0;
    match packet {
        None => {
            v.insert(sea, cx(T::one()));
        }
        Some(p) => {
            let full = p.embed(basis)?;
            let seed: FockVector<T> = [(sea, cx(T::one()))].into_iter().collect();
            for (j, &c) in full.iter().enumerate() {
                if c.norm_sqr() == T::zero() {
                    continue;
                }
                let (img, d) = create(statistics, space.n_max, j, &seed);
                dropped += d;
                for (k, a) in img {
                    *v.entry(k).or_insert_with(czero) += a * c;
                }
            }
        }
    }
    let mut amplitudes = vec![czero(); space.dim()];
    for (occ, a) in v {
        let i = space
            .index_of(&occ)
            .ok_or_else(|| Error::Oracle("initial configuration outside the enumerated space".into()))?;
        amplitudes[i] = a;
    }
    Ok(ManyBodyState { space, amplitudes, truncations: dropped })
}

/// Second-quantized Hamiltonian `H0 + f(t) W` over one Fock space.
struct ManyBodyHamiltonian<T> {
    free: SparseOperator<T>,
    coupling: SparseOperator<T>,
    truncations: usize,
}

impl<T: Real> ManyBodyHamiltonian<T> {
    fn new(spec: &HamiltonianSpec<T>, space: &FockSpace) -> Result<Self> {
        let d = spec.dim();
        let mut h0 = DMatrix::zeros(d, d);
        for (j, &e) in spec.energies().iter().enumerate() {
            h0[(j, j)] = cx(e);
        }
        let (free, t0) = SparseOperator::build(space, &ManyBodyOperatorSpec::from_matrix(&h0))?;
        let (coupling, t1) = SparseOperator::build(space, &ManyBodyOperatorSpec::from_matrix(spec.coupling()))?;
        Ok(ManyBodyHamiltonian { free, coupling, truncations: t0 + t1 })
    }

    fn apply(&self, f: T, v: &[Complex<T>], out: &mut [Complex<T>]) {
        out.iter_mut().for_each(|z| *z = czero());
        self.free.apply_into(cx(T::one()), v, out);
        if f != T::zero() {
            self.coupling.apply_into(cx(f), v, out);
        }
    }

    /// `exp(−i H h) v` by a Taylor series on substeps of norm at most one.
    fn step(&self, f: T, h: T, v: &mut [Complex<T>]) {
        let bound = (self.free.norm_one + f.abs() * self.coupling.norm_one) * h;
        let bound_f64: f64 = nalgebra::try_convert(bound).unwrap_or(1.0);
        let substeps = bound_f64.ceil().max(1.0) as usize;
        let tau = h / from_usize(substeps);
        let mut term = vec![czero(); v.len()];
        let mut next = vec![czero(); v.len()];
        let tiny: T = T::default_epsilon() * lit(1e-2);
        for _ in 0..substeps {
            term.copy_from_slice(v);
            for k in 1..=60usize {
                self.apply(f, &term, &mut next);
                let scale = Complex::new(T::zero(), -tau / from_usize(k));
                let mut biggest = T::zero();
                for (i, z) in next.iter().enumerate() {
                    let t = *z * scale;
                    term[i] = t;
                    v[i] += t;
                    biggest = biggest.max(t.modulus());
                }
                if biggest <= tiny {
                    break;
                }
            }
        }
    }
}

/// Evolves a many-body state from `0` to `t` with midpoint steps of size
/// at most `dt`, matching the step grid of [`crate::propagate::evolve_propagator`].
pub fn evolve_many_body<T: Real>(
    spec: &HamiltonianSpec<T>,
    state: &ManyBodyState<T>,
    t: T,
    dt: T,
) -> Result<ManyBodyState<T>> {
    if spec.theory() == TheoryKind::KleinGordon {
        return Err(Error::WrongTheory(spec.theory().name()));
    }
    if spec.dim() != state.space.modes {
        return Err(Error::DimensionMismatch { expected: state.space.modes, found: spec.dim() });
    }
    if !(dt > T::zero()) || !(t >= T::zero()) {
        return Err(Error::Config("many-body evolution needs dt > 0 and t >= 0".into()));
    }
    let ham = ManyBodyHamiltonian::new(spec, &state.space)?;
    let ratio: f64 = nalgebra::try_convert(t / dt).unwrap_or(f64::INFINITY);
    if !ratio.is_finite() || ratio > crate::propagate::MAX_STEPS as f64 {
        return Err(Error::StepOverflow(ratio));
    }
    let n = (ratio - 1e-9).ceil().max(0.0) as usize;
    let mut v = state.amplitudes.clone();
    if n > 0 {
        let h = t / from_usize(n);
        let constant = spec.profile().is_constant();
        for s in 0..n {
            let t_mid = if constant { T::zero() } else { h * (from_usize::<T>(s) + lit(0.5)) };
            ham.step(spec.profile().value(t_mid), h, &mut v);
        }
    }
    Ok(ManyBodyState {
        space: state.space.clone(),
        amplitudes: v,
        truncations: state.truncations + ham.truncations,
    })
}

/// Density channels readable from a many-body state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleChannel {
    PlusPlus,
    PlusMinus,
    MinusPlus,
    MinusMinus,
    Particle,
    /// `ρ_{−−}` of the reference state minus `ρ_{−−}` of the evolved one.
    Hole,
}

impl std::str::FromStr for OracleChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "++" | "rho_pp" => OracleChannel::PlusPlus,
            "+-" | "rho_pm" => OracleChannel::PlusMinus,
            "-+" | "rho_mp" => OracleChannel::MinusPlus,
            "--" | "rho_mm" => OracleChannel::MinusMinus,
            "ptcl" | "el" => OracleChannel::Particle,
            "hole" | "pos" => OracleChannel::Hole,
            other => return Err(Error::Config(format!("unknown density channel '{other}'"))),
        })
    }
}

fn branch_block<T: Real>(
    basis: &BasisSet<T>,
    gamma: &DMatrix<Complex<T>>,
    left: Branch,
    right: Branch,
    point: usize,
) -> Complex<T> {
    let comps = basis.components();
    let samples = basis.samples();
    let mut acc = czero();
    for i in 0..comps {
        let g: T = basis.theory().component_sign(i);
        let row = point * comps + i;
        for j in basis.branch_range(left) {
            let a = samples[(row, j)].conj();
            for jp in basis.branch_range(right) {
                acc += a * samples[(row, jp)] * gamma[(j, jp)] * g;
            }
        }
    }
    acc
}

fn channel_value<T: Real>(
    basis: &BasisSet<T>,
    gamma: &DMatrix<Complex<T>>,
    reference: Option<&DMatrix<Complex<T>>>,
    channel: OracleChannel,
    point: usize,
) -> Result<Complex<T>> {
    use Branch::{Negative as N, Positive as P};
    Ok(match channel {
        OracleChannel::PlusPlus | OracleChannel::Particle => branch_block(basis, gamma, P, P, point),
        OracleChannel::PlusMinus => branch_block(basis, gamma, P, N, point),
        OracleChannel::MinusPlus => branch_block(basis, gamma, N, P, point),
        OracleChannel::MinusMinus => branch_block(basis, gamma, N, N, point),
        OracleChannel::Hole => {
            let r = reference.ok_or_else(|| Error::Oracle("hole channel needs the initial state".into()))?;
            branch_block(basis, r, N, N, point) - branch_block(basis, gamma, N, N, point)
        }
    })
}

/// `⟨ψ|ρ̂_channel(x_m)|ψ⟩` at grid point `point`.
pub fn density_expectation<T: Real>(
    state: &ManyBodyState<T>,
    channel: OracleChannel,
    point: usize,
    basis: &BasisSet<T>,
    reference: Option<&ManyBodyState<T>>,
) -> Result<Complex<T>> {
    if point >= basis.grid().len() {
        return Err(Error::Config("grid point index out of range".into()));
    }
    let gamma = state.one_body_density();
    let r = reference.map(|s| s.one_body_density());
    channel_value(basis, &gamma, r.as_ref(), channel, point)
}

/// A whole channel on the grid; real for diagonal channels.
pub fn density_field<T: Real>(
    state: &ManyBodyState<T>,
    channel: OracleChannel,
    basis: &BasisSet<T>,
    reference: Option<&ManyBodyState<T>>,
    time: T,
) -> Result<DensityField<T>> {
    if state.space.modes != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: state.space.modes });
    }
    let gamma = state.one_body_density();
    let r = reference.map(|s| s.one_body_density());
    let values: Vec<Complex<T>> = (0..basis.grid().len())
        .map(|m| channel_value(basis, &gamma, r.as_ref(), channel, m))
        .collect::<Result<_>>()?;
    let (tag, cross) = match channel {
        OracleChannel::PlusPlus => (Channel::Raw(Branch::Positive, Branch::Positive), false),
        OracleChannel::PlusMinus => (Channel::Raw(Branch::Positive, Branch::Negative), true),
        OracleChannel::MinusPlus => (Channel::Raw(Branch::Negative, Branch::Positive), true),
        OracleChannel::MinusMinus => (Channel::Raw(Branch::Negative, Branch::Negative), false),
        OracleChannel::Particle => (Channel::Particle, false),
        OracleChannel::Hole => (Channel::Hole, false),
    };
    let values = if cross {
        DensityValues::Complex(values)
    } else {
        DensityValues::Real(values.into_iter().map(|z| z.re).collect())
    };
    Ok(DensityField { channel: tag, time, values })
}

/// Particle and hole densities of `N` distinguishable particles, one per
/// negative mode, each evolved on its own.
pub fn distinguishable_densities<T: Real>(
    spec: &HamiltonianSpec<T>,
    basis: &BasisSet<T>,
    t: T,
    dt: T,
    packet: Option<&WavePacket<T>>,
) -> Result<(DensityField<T>, DensityField<T>)> {
    if basis.theory() == TheoryKind::KleinGordon {
        return Err(Error::WrongTheory(basis.theory().name()));
    }
    let dim = basis.dim();
    let mut particles: Vec<(Vec<Complex<T>>, bool)> = Vec::new();
    for n in basis.branch_range(Branch::Negative) {
        let mut e = vec![czero(); dim];
        e[n] = cx(T::one());
        particles.push((evolve_state(spec, &e, t, dt)?, true));
    }
    if let Some(p) = packet {
        particles.push((evolve_state(spec, &p.embed(basis)?, t, dt)?, false));
    }
    let comps = basis.components();
    let grid = basis.grid();
    let mut ptcl = vec![T::zero(); grid.len()];
    let mut hole = vec![T::zero(); grid.len()];
    for (m, &x) in grid.points().iter().enumerate() {
        for (over, _) in &particles {
            for i in 0..comps {
                let g: T = basis.theory().component_sign(i);
                let mut plus = czero::<T>();
                let mut minus = czero::<T>();
                for (j, &o) in over.iter().enumerate() {
                    let a = basis.mode_value(j, x, i) * o;
                    if j < basis.n_neg() {
                        minus += a;
                    } else {
                        plus += a;
                    }
                }
                ptcl[m] += plus.norm_sqr() * g;
                hole[m] -= minus.norm_sqr() * g;
            }
        }
        for (n, (_, from_sea)) in particles.iter().enumerate() {
            if *from_sea {
                for i in 0..comps {
                    let g: T = basis.theory().component_sign(i);
                    hole[m] += basis.mode_value(n, x, i).norm_sqr() * g;
                }
            }
        }
    }
    Ok((
        DensityField { channel: Channel::Particle, time: t, values: DensityValues::Real(ptcl) },
        DensityField { channel: Channel::Hole, time: t, values: DensityValues::Real(hole) },
    ))
}

/// Largest pointwise gap between two real fields.
pub fn max_field_deviation<T: Real>(a: &DensityField<T>, b: &DensityField<T>) -> Result<T> {
    match (a.real_values(), b.real_values()) {
        (Some(x), Some(y)) if x.len() == y.len() => {
            Ok(x.iter().zip(y).fold(T::zero(), |m, (p, q)| m.max((*p - *q).abs())))
        }
        (Some(x), Some(y)) => Err(Error::DimensionMismatch { expected: x.len(), found: y.len() }),
        _ => Err(Error::CrossChannel(a.channel.name())),
    }
}

/// Fermion, boson and distinguishable densities against the closed forms.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport<T> {
    pub fermion: T,
    pub boson: Option<T>,
    pub distinguishable: T,
    pub boson_truncations: usize,
    pub fermion_norm_drift: T,
}

impl<T: Real> OracleReport<T> {
    pub fn worst(&self) -> T {
        self.fermion.max(self.distinguishable).max(self.boson.unwrap_or(T::zero()))
    }
}

/// Evolves every statistics and compares particle and hole fields with
/// `closed` (particle, hole). Bosons are skipped for Dirac, whose filled sea
/// only exists for fermions.
pub fn compare_statistics<T: Real>(
    spec: &HamiltonianSpec<T>,
    basis: &BasisSet<T>,
    packet: Option<&WavePacket<T>>,
    t: T,
    dt: T,
    n_max: Option<u8>,
    closed: (&DensityField<T>, &DensityField<T>),
) -> Result<OracleReport<T>> {
    let run = |stats: StatisticsKind| -> Result<(T, usize, T)> {
        let init = build_initial_state(basis, stats, packet, n_max)?;
        let evolved = evolve_many_body(spec, &init, t, dt)?;
        let p = density_field(&evolved, OracleChannel::Particle, basis, None, t)?;
        let h = density_field(&evolved, OracleChannel::Hole, basis, Some(&init), t)?;
        let dev = max_field_deviation(&p, closed.0)?.max(max_field_deviation(&h, closed.1)?);
        Ok((dev, evolved.truncations(), (evolved.norm() - init.norm()).abs()))
    };
    let (fermion, _, fermion_norm_drift) = run(StatisticsKind::Fermion)?;
    let (boson, boson_truncations) = if basis.theory() == TheoryKind::NonRelativistic {
        let (b, tr, _) = run(StatisticsKind::Boson)?;
        (Some(b), tr)
    } else {
        (None, 0)
    };
    let (dp, dh) = distinguishable_densities(spec, basis, t, dt, packet)?;
    let distinguishable = max_field_deviation(&dp, closed.0)?.max(max_field_deviation(&dh, closed.1)?);
    Ok(OracleReport { fermion, boson, distinguishable, boson_truncations, fermion_norm_drift })
}
