//! Truncated one-particle mode bases.
//!
//! Three builders are provided: the infinite square well (non-relativistic),
//! free Dirac plane-wave spinors and free Klein–Gordon states in the
//! two-component Feshbach–Villars form. Both relativistic bases live on a
//! periodic box of length `L` with momenta `k_n = 2πn/L`, enumerated in the
//! order `n = 0, +1, -1, +2, -2, ...` on each energy branch.
//!
//! Global mode ordering is fixed: the negative branch first (ascending `k`),
//! then the positive branch (ascending `k`). Every matrix in the crate uses
//! this ordering.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cx, czero, from_usize, lit, Real};

/// Default number of grid samples used by the CLI.
pub const DEFAULT_GRID_POINTS: usize = 256;
/// Default half-width of the momentum ladder used by the CLI.
pub const DEFAULT_K_HALF: usize = 16;

/// Which one-particle theory a basis belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TheoryKind {
    NonRelativistic,
    Dirac,
    KleinGordon,
}

impl TheoryKind {
    pub fn name(self) -> &'static str {
        match self {
            TheoryKind::NonRelativistic => "non-relativistic",
            TheoryKind::Dirac => "dirac",
            TheoryKind::KleinGordon => "klein-gordon",
        }
    }

    /// Number of internal components of a mode function.
    pub fn components(self) -> usize {
        match self {
            TheoryKind::NonRelativistic => 1,
            TheoryKind::Dirac | TheoryKind::KleinGordon => 2,
        }
    }

    /// Sign attached to internal component `i` (0-based) by the position-space
    /// scalar product.
    pub fn component_sign<T: Real>(self, i: usize) -> T {
        match (self, i) {
            (TheoryKind::KleinGordon, 1) => -T::one(),
            _ => T::one(),
        }
    }

    /// Metric signature of the given branch.
    pub fn branch_metric<T: Real>(self, branch: Branch) -> T {
        match (self, branch) {
            (TheoryKind::KleinGordon, Branch::Negative) => -T::one(),
            _ => T::one(),
        }
    }

    pub fn is_pseudo_unitary(self) -> bool {
        self == TheoryKind::KleinGordon
    }
}

/// Particle statistics. `xi` is `+1` for bosons and `-1` for fermions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatisticsKind {
    Distinguishable,
    Fermion,
    Boson,
}

impl StatisticsKind {
    pub fn xi(self) -> Option<i8> {
        match self {
            StatisticsKind::Distinguishable => None,
            StatisticsKind::Fermion => Some(-1),
            StatisticsKind::Boson => Some(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Negative,
    Positive,
}

impl Branch {
    pub fn sign(self) -> &'static str {
        match self {
            Branch::Negative => "-",
            Branch::Positive => "+",
        }
    }
}

/// Label of a one-particle mode.
///
/// `k` is the 1-based position of the mode within its branch. Relativistic
/// modes also carry the box momentum number `n`; [`ModeIndex::ladder_k`]
/// gives the `|n| + 1` label of the discrete relativistic spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub branch: Branch,
    pub k: usize,
    pub momentum: Option<i64>,
}

impl ModeIndex {
    pub fn negative(k: usize) -> Self {
        ModeIndex { branch: Branch::Negative, k, momentum: None }
    }

    pub fn positive(k: usize) -> Self {
        ModeIndex { branch: Branch::Positive, k, momentum: None }
    }

    pub fn ladder_k(&self) -> usize {
        match self.momentum {
            Some(n) => n.unsigned_abs() as usize + 1,
            None => self.k,
        }
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.momentum {
            Some(n) => write!(f, "{}{} (n={})", self.branch.sign(), self.k, n),
            None => write!(f, "{}{}", self.branch.sign(), self.k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Hard walls at `0` and `L`; samples include both walls.
    Walls,
    /// Periodic box; samples `x_m = mL/M`, `m = 0..M`.
    Periodic,
}

/// Sample abscissae and trapezoidal quadrature weights on `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid<T> {
    length: T,
    boundary: Boundary,
    points: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> SpatialGrid<T> {
    pub fn periodic(length: T, samples: usize) -> Result<Self> {
        if !(length > T::zero()) || samples == 0 {
            return Err(Error::Config("periodic grid needs L > 0 and at least one sample".into()));
        }
        let h = length / from_usize(samples);
        let points = (0..samples).map(|m| h * from_usize(m)).collect();
        Ok(SpatialGrid { length, boundary: Boundary::Periodic, points, weights: vec![h; samples] })
    }

    pub fn walls(length: T, samples: usize) -> Result<Self> {
        if !(length > T::zero()) || samples < 2 {
            return Err(Error::Config("wall grid needs L > 0 and at least two samples".into()));
        }
        let intervals = samples - 1;
        let h = length / from_usize(intervals);
        let points = (0..samples).map(|m| h * from_usize(m)).collect();
        let mut weights = vec![h; samples];
        weights[0] = h * lit(0.5);
        weights[intervals] = h * lit(0.5);
        Ok(SpatialGrid { length, boundary: Boundary::Walls, points, weights })
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `Σ_m w_m f_m`.
    pub fn integrate(&self, values: &[T]) -> T {
        self.weights.iter().zip(values).fold(T::zero(), |acc, (&w, &v)| acc + w * v)
    }

    pub fn integrate_complex(&self, values: &[Complex<T>]) -> Complex<T> {
        self.weights.iter().zip(values).fold(czero(), |acc, (&w, &v)| acc + v * w)
    }

    pub fn contains(&self, x: T) -> bool {
        x >= T::zero() && x <= self.length
    }
}

/// Internal-component vectors of every mode and the component-space metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorTable<T> {
    metric: Vec<T>,
    vectors: Vec<Vec<Complex<T>>>,
}

impl<T: Real> SpinorTable<T> {
    pub fn components(&self) -> usize {
        self.metric.len()
    }

    pub fn metric(&self) -> &[T] {
        &self.metric
    }

    pub fn vector(&self, mode: usize) -> &[Complex<T>] {
        &self.vectors[mode]
    }

    /// `Σ_i g_i conj(a_i) b_i` between the spinors of two modes.
    pub fn inner(&self, a: usize, b: usize) -> Complex<T> {
        self.vectors[a]
            .iter()
            .zip(&self.vectors[b])
            .zip(&self.metric)
            .fold(czero(), |acc, ((x, y), &g)| acc + x.conj() * *y * g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SpatialMode<T> {
    /// `sqrt(2/L) sin(jπx/L)`.
    Sine { level: usize },
    /// `exp(ikx)/sqrt(L)`.
    PlaneWave { wavenumber: T },
}

/// A truncated one-particle basis split into negative and positive branches.
#[derive(Debug, Clone)]
pub struct BasisSet<T: Real> {
    theory: TheoryKind,
    n_neg: usize,
    n_pos: usize,
    mass: T,
    modes: Vec<ModeIndex>,
    energies: Vec<T>,
    metric: Vec<T>,
    spinors: SpinorTable<T>,
    spatial: Vec<SpatialMode<T>>,
    grid: SpatialGrid<T>,
    zero_offset: T,
    /// Mode functions on the grid; row `m * C + i`, column = mode.
    samples: DMatrix<Complex<T>>,
}

/// Infinite-well basis: levels `1..=k_neg` form the negative branch.
pub fn build_nonrel_basis<T: Real>(
    k_neg: usize,
    k_pos: usize,
    well_length: T,
    mass: T,
    grid_points: usize,
) -> Result<BasisSet<T>> {
    if k_neg == 0 || k_pos == 0 {
        return Err(Error::Config("K_neg and K_pos must both be at least 1".into()));
    }
    if !(well_length > T::zero()) {
        return Err(Error::Config("well length must be positive".into()));
    }
    if !(mass > T::zero()) {
        return Err(Error::Config("mass must be positive".into()));
    }
    let dim = k_neg + k_pos;
    if grid_points < dim + 2 {
        return Err(Error::Config(format!(
            "grid needs at least {} samples to resolve {} well levels",
            dim + 2,
            dim
        )));
    }
    let level_energy = |j: usize| {
        let j: T = from_usize(j);
        j * j * T::pi() * T::pi() / (lit::<T>(2.0) * mass * well_length * well_length)
    };
    let zero_offset = -(level_energy(k_neg) + level_energy(k_neg + 1)) * lit(0.5);

    let mut modes = Vec::with_capacity(dim);
    let mut energies = Vec::with_capacity(dim);
    let mut spatial = Vec::with_capacity(dim);
    for level in 1..=dim {
        let mode = if level <= k_neg {
            ModeIndex::negative(level)
        } else {
            ModeIndex::positive(level - k_neg)
        };
        modes.push(mode);
        energies.push(level_energy(level) + zero_offset);
        spatial.push(SpatialMode::Sine { level });
    }
    let spinors = SpinorTable { metric: vec![T::one()], vectors: vec![vec![cx(T::one())]; dim] };
    let grid = SpatialGrid::walls(well_length, grid_points)?;
    Ok(BasisSet::assemble(
        TheoryKind::NonRelativistic,
        k_neg,
        k_pos,
        mass,
        modes,
        energies,
        spinors,
        spatial,
        grid,
        zero_offset,
    ))
}

/// Momentum numbers in the order `0, +1, -1, +2, -2, ...`.
pub fn momentum_order(k_half: usize) -> Vec<i64> {
    let mut out = vec![0];
    for n in 1..=k_half as i64 {
        out.push(n);
        out.push(-n);
    }
    out
}

fn check_relativistic<T: Real>(k_half: usize, length: T, mass: T, grid_points: usize) -> Result<()> {
    if !(length > T::zero()) {
        return Err(Error::Config("box length must be positive".into()));
    }
    if !(mass > T::zero()) {
        // n = 0 is always in the ladder, and its spinor is undefined at m = 0.
        return Err(Error::Config("mass must be positive (the n = 0 spinor is undefined at m = 0)".into()));
    }
    if grid_points <= 2 * k_half {
        return Err(Error::Config(format!(
            "grid needs more than {} samples to resolve momenta up to |n| = {}",
            2 * k_half,
            k_half
        )));
    }
    Ok(())
}

struct Ladder<T> {
    momenta: Vec<i64>,
    wavenumbers: Vec<T>,
    energies: Vec<T>,
}

fn ladder<T: Real>(k_half: usize, length: T, mass: T) -> Ladder<T> {
    let momenta = momentum_order(k_half);
    let wavenumbers: Vec<T> =
        momenta.iter().map(|&n| T::two_pi() * lit::<T>(n as f64) / length).collect();
    let energies = wavenumbers.iter().map(|&k| (k * k + mass * mass).sqrt()).collect();
    Ladder { momenta, wavenumbers, energies }
}

/// Free Dirac plane-wave spinors in a periodic box.
pub fn build_free_dirac_basis<T: Real>(
    k_half: usize,
    length: T,
    mass: T,
    grid_points: usize,
) -> Result<BasisSet<T>> {
    check_relativistic(k_half, length, mass, grid_points)?;
    let lad = ladder(k_half, length, mass);
    let per_branch = lad.momenta.len();

    let mut modes = Vec::with_capacity(2 * per_branch);
    let mut energies = Vec::with_capacity(2 * per_branch);
    let mut vectors = Vec::with_capacity(2 * per_branch);
    let mut spatial = Vec::with_capacity(2 * per_branch);
    for branch in [Branch::Negative, Branch::Positive] {
        for (idx, ((&n, &k), &e)) in lad.momenta.iter().zip(&lad.wavenumbers).zip(&lad.energies).enumerate() {
            modes.push(ModeIndex { branch, k: idx + 1, momentum: Some(n) });
            // Eigenvectors of [[m, k], [k, -m]]. The negative-energy spinor is
            // written in the phase that stays finite at k = 0.
            let norm = ((e + mass) / (lit::<T>(2.0) * e)).sqrt();
            let ratio = k / (e + mass);
            let v = match branch {
                Branch::Positive => {
                    energies.push(e);
                    vec![cx(norm), cx(norm * ratio)]
                }
                Branch::Negative => {
                    energies.push(-e);
                    vec![cx(-norm * ratio), cx(norm)]
                }
            };
            vectors.push(v);
            spatial.push(SpatialMode::PlaneWave { wavenumber: k });
        }
    }
    let spinors = SpinorTable { metric: vec![T::one(), T::one()], vectors };
    let grid = SpatialGrid::periodic(length, grid_points)?;
    Ok(BasisSet::assemble(
        TheoryKind::Dirac,
        per_branch,
        per_branch,
        mass,
        modes,
        energies,
        spinors,
        spatial,
        grid,
        T::zero(),
    ))
}

/// Free Klein–Gordon states in the Feshbach–Villars representation.
pub fn build_free_kg_basis<T: Real>(
    k_half: usize,
    length: T,
    mass: T,
    grid_points: usize,
) -> Result<BasisSet<T>> {
    check_relativistic(k_half, length, mass, grid_points)?;
    let lad = ladder(k_half, length, mass);
    let per_branch = lad.momenta.len();

    let mut modes = Vec::with_capacity(2 * per_branch);
    let mut energies = Vec::with_capacity(2 * per_branch);
    let mut vectors = Vec::with_capacity(2 * per_branch);
    let mut spatial = Vec::with_capacity(2 * per_branch);
    for branch in [Branch::Negative, Branch::Positive] {
        for (idx, ((&n, &k), &e)) in lad.momenta.iter().zip(&lad.wavenumbers).zip(&lad.energies).enumerate() {
            modes.push(ModeIndex { branch, k: idx + 1, momentum: Some(n) });
            // Spatial factor carries 1/sqrt(L); the spinor carries 1/(2 sqrt(E m)).
            let norm = T::one() / (lit::<T>(2.0) * (e * mass).sqrt());
            let v = match branch {
                Branch::Positive => {
                    energies.push(e);
                    vec![cx(norm * (mass + e)), cx(norm * (mass - e))]
                }
                Branch::Negative => {
                    energies.push(-e);
                    vec![cx(norm * (mass - e)), cx(norm * (mass + e))]
                }
            };
            vectors.push(v);
            spatial.push(SpatialMode::PlaneWave { wavenumber: k });
        }
    }
    let spinors = SpinorTable { metric: vec![T::one(), -T::one()], vectors };
    let grid = SpatialGrid::periodic(length, grid_points)?;
    Ok(BasisSet::assemble(
        TheoryKind::KleinGordon,
        per_branch,
        per_branch,
        mass,
        modes,
        energies,
        spinors,
        spatial,
        grid,
        T::zero(),
    ))
}

/// An extra particle in a superposition of positive-branch modes.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket<T> {
    coefficients: Vec<Complex<T>>,
}

impl<T: Real> WavePacket<T> {
    /// Validates `Σ|C_p|² = 1` to 1e-12.
    pub fn new(coefficients: Vec<Complex<T>>) -> Result<Self> {
        let norm: T = coefficients.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr());
        let dev = (norm - T::one()).abs();
        if !(dev <= lit(1e-12)) {
            return Err(Error::UnnormalizedPacket(nalgebra::try_convert(norm).unwrap_or(f64::NAN)));
        }
        Ok(WavePacket { coefficients })
    }

    /// Accepts coefficients over the whole basis; any weight on the negative
    /// branch is an error.
    pub fn from_full(basis: &BasisSet<T>, coefficients: &[Complex<T>]) -> Result<Self> {
        if coefficients.len() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), found: coefficients.len() });
        }
        if coefficients[..basis.n_neg()].iter().any(|c| c.norm_sqr() > T::zero()) {
            return Err(Error::NegativeBranchPacket);
        }
        Self::new(coefficients[basis.n_neg()..].to_vec())
    }

    /// Rescales arbitrary non-zero coefficients to unit norm.
    pub fn normalized(coefficients: Vec<Complex<T>>) -> Result<Self> {
        let norm: T = coefficients.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr()).sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::UnnormalizedPacket(nalgebra::try_convert(norm).unwrap_or(f64::NAN)));
        }
        Ok(WavePacket { coefficients: coefficients.into_iter().map(|c| c / norm).collect() })
    }

    /// All weight in positive mode `k` (1-based, as in [`ModeIndex`]).
    pub fn single(n_pos: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n_pos {
            return Err(Error::UnknownMode(format!("+{k} (branch holds {n_pos} modes)")));
        }
        let mut c = vec![czero(); n_pos];
        c[k - 1] = cx(T::one());
        Ok(WavePacket { coefficients: c })
    }

    pub fn coefficients(&self) -> &[Complex<T>] {
        &self.coefficients
    }

    /// Coefficients over the full basis, zero on the negative branch.
    pub fn embed(&self, basis: &BasisSet<T>) -> Result<Vec<Complex<T>>> {
        if self.coefficients.len() != basis.n_pos() {
            return Err(Error::DimensionMismatch { expected: basis.n_pos(), found: self.coefficients.len() });
        }
        let mut full = vec![czero(); basis.n_neg()];
        full.extend_from_slice(&self.coefficients);
        Ok(full)
    }
}

impl<T: Real> BasisSet<T> {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        theory: TheoryKind,
        n_neg: usize,
        n_pos: usize,
        mass: T,
        modes: Vec<ModeIndex>,
        energies: Vec<T>,
        spinors: SpinorTable<T>,
        spatial: Vec<SpatialMode<T>>,
        grid: SpatialGrid<T>,
        zero_offset: T,
    ) -> Self {
        let metric = modes.iter().map(|m| theory.branch_metric(m.branch)).collect();
        let mut basis = BasisSet {
            theory,
            n_neg,
            n_pos,
            mass,
            modes,
            energies,
            metric,
            spinors,
            spatial,
            grid,
            zero_offset,
            samples: DMatrix::zeros(0, 0),
        };
        let comps = theory.components();
        let dim = basis.dim();
        let mut samples = DMatrix::zeros(basis.grid.len() * comps, dim);
        for (m, &x) in basis.grid.points().iter().enumerate() {
            for j in 0..dim {
                let s = basis.spatial_value(j, x);
                for i in 0..comps {
                    samples[(m * comps + i, j)] = basis.spinors.vectors[j][i] * s;
                }
            }
        }
        basis.samples = samples;
        basis
    }

    pub fn theory(&self) -> TheoryKind {
        self.theory
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn dim(&self) -> usize {
        self.n_neg + self.n_pos
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn components(&self) -> usize {
        self.theory.components()
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn mode(&self, j: usize) -> &ModeIndex {
        &self.modes[j]
    }

    /// Signed field-free energies, negative branch first.
    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    /// Metric signature `λ_j` per mode.
    pub fn metric(&self) -> &[T] {
        &self.metric
    }

    pub fn branch_metric(&self, branch: Branch) -> T {
        self.theory.branch_metric(branch)
    }

    pub fn spinors(&self) -> &SpinorTable<T> {
        &self.spinors
    }

    pub fn grid(&self) -> &SpatialGrid<T> {
        &self.grid
    }

    pub fn zero_offset(&self) -> T {
        self.zero_offset
    }

    /// Global index range of a branch.
    pub fn branch_range(&self, branch: Branch) -> std::ops::Range<usize> {
        match branch {
            Branch::Negative => 0..self.n_neg,
            Branch::Positive => self.n_neg..self.dim(),
        }
    }

    pub fn index_of(&self, mode: &ModeIndex) -> Result<usize> {
        let (size, offset) = match mode.branch {
            Branch::Negative => (self.n_neg, 0),
            Branch::Positive => (self.n_pos, self.n_neg),
        };
        if mode.k == 0 || mode.k > size {
            return Err(Error::UnknownMode(format!("{mode} (branch holds {size} modes)")));
        }
        let j = offset + mode.k - 1;
        if let (Some(n), Some(have)) = (mode.momentum, self.modes[j].momentum) {
            if n != have {
                return Err(Error::UnknownMode(format!("{mode}: position {} holds n={}", mode.k, have)));
            }
        }
        Ok(j)
    }

    fn spatial_value(&self, j: usize, x: T) -> Complex<T> {
        let length = self.grid.length();
        match self.spatial[j] {
            SpatialMode::Sine { level } => {
                let amp = (lit::<T>(2.0) / length).sqrt();
                cx(amp * (from_usize::<T>(level) * T::pi() * x / length).sin())
            }
            SpatialMode::PlaneWave { wavenumber } => {
                let phase = wavenumber * x;
                Complex::new(phase.cos(), phase.sin()) * (T::one() / length.sqrt())
            }
        }
    }

    /// `⟨x,i|φ_j⟩` for a global mode index and 0-based component.
    pub fn mode_value(&self, j: usize, x: T, component: usize) -> Complex<T> {
        self.spinors.vectors[j][component] * self.spatial_value(j, x)
    }

    /// `⟨x,i|φ^μ_k⟩` with a 1-based component index.
    pub fn position_amplitude(&self, mode: &ModeIndex, x: T, component_index: usize) -> Result<Complex<T>> {
        let comps = self.components();
        if component_index == 0 || component_index > comps {
            return Err(Error::ComponentOutOfRange { index: component_index, components: comps });
        }
        if !self.grid.contains(x) {
            return Err(Error::Config("position lies outside the box".into()));
        }
        let j = self.index_of(mode)?;
        Ok(self.mode_value(j, x, component_index - 1))
    }

    /// `Σ_j λ_j conj(a_j) b_j` for states given by expansion coefficients.
    pub fn metric_inner_product(&self, a: &[Complex<T>], b: &[Complex<T>]) -> Result<Complex<T>> {
        let dim = self.dim();
        for v in [a, b] {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
            }
        }
        Ok(a.iter()
            .zip(b)
            .zip(&self.metric)
            .fold(czero(), |acc, ((x, y), &l)| acc + x.conj() * *y * l))
    }

    /// Grid samples of every mode; row `m * C + i`.
    pub fn samples(&self) -> &DMatrix<Complex<T>> {
        &self.samples
    }

    /// Grid samples restricted to one branch (columns in branch order).
    pub fn branch_samples(&self, branch: Branch) -> DMatrix<Complex<T>> {
        let r = self.branch_range(branch);
        self.samples.columns(r.start, r.len()).into_owned()
    }

    /// Mode overlaps evaluated by grid quadrature with the component metric.
    pub fn quadrature_gram(&self) -> DMatrix<Complex<T>> {
        let comps = self.components();
        let mut weighted = self.samples.clone();
        for (m, &w) in self.grid.weights().iter().enumerate() {
            for i in 0..comps {
                let g: T = self.theory.component_sign(i);
                weighted.row_mut(m * comps + i).scale_mut(w * g);
            }
        }
        self.samples.adjoint() * weighted
    }

    /// `max |G_jj' - diag(λ)|` of the quadrature Gram matrix.
    pub fn orthonormality_error(&self) -> T {
        let gram = self.quadrature_gram();
        let mut worst = T::zero();
        for j in 0..self.dim() {
            for jj in 0..self.dim() {
                let target = if j == jj { cx(self.metric[j]) } else { czero() };
                worst = worst.max((gram[(j, jj)] - target).modulus());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn well_energies_for_unit_box() {
        let b = build_nonrel_basis::<f64>(1, 1, std::f64::consts::PI, 1.0, 64).unwrap();
        assert_abs_diff_eq!(b.zero_offset(), -1.25, epsilon = 1e-14);
        assert_abs_diff_eq!(b.energies()[0], -0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(b.energies()[1], 0.75, epsilon = 1e-14);
        assert!(b.metric().iter().all(|&l| l == 1.0));
    }

    #[test]
    fn well_modes_orthonormal_on_grid() {
        let b = build_nonrel_basis::<f64>(3, 4, 7.5, 0.8, 40).unwrap();
        assert!(b.orthonormality_error() < 1e-10);
        for (j, e) in b.energies().iter().enumerate() {
            assert_eq!(*e < 0.0, j < 3);
        }
    }

    #[test]
    fn nonrel_rejects_bad_sizes() {
        assert!(build_nonrel_basis::<f64>(0, 2, 1.0, 1.0, 64).is_err());
        assert!(build_nonrel_basis::<f64>(2, 0, 1.0, 1.0, 64).is_err());
        assert!(build_nonrel_basis::<f64>(1, 1, -1.0, 1.0, 64).is_err());
        assert!(build_nonrel_basis::<f64>(1, 1, 1.0, 1.0, 3).is_err());
    }

    #[test]
    fn dirac_rest_spinors() {
        let b = build_free_dirac_basis::<f64>(1, 2.0 * std::f64::consts::PI, 1.0, 16).unwrap();
        // n = 0 is first on each branch.
        let neg = b.index_of(&ModeIndex::negative(1)).unwrap();
        let pos = b.index_of(&ModeIndex::positive(1)).unwrap();
        assert_abs_diff_eq!(b.energies()[pos], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.energies()[neg], -1.0, epsilon = 1e-15);
        let vp = b.spinors().vector(pos);
        let vn = b.spinors().vector(neg);
        assert_abs_diff_eq!(vp[0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vp[1].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vn[0].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vn[1].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn dirac_n1_lower_component_ratio() {
        let b = build_free_dirac_basis::<f64>(1, 2.0 * std::f64::consts::PI, 1.0, 16).unwrap();
        let j = b.index_of(&ModeIndex { branch: Branch::Positive, k: 2, momentum: Some(1) }).unwrap();
        let v = b.spinors().vector(j);
        let e = 2f64.sqrt();
        assert_abs_diff_eq!(b.energies()[j], e, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1].re / v[0].re, 1.0 / (e + 1.0), epsilon = 1e-15);
    }

    #[test]
    fn dirac_gram_is_identity() {
        let b = build_free_dirac_basis::<f64>(4, 9.0, 0.7, 32).unwrap();
        assert!(b.orthonormality_error() < 1e-12);
    }

    #[test]
    fn dirac_rejects_massless_and_coarse_grids() {
        assert!(build_free_dirac_basis::<f64>(2, 5.0, 0.0, 32).is_err());
        assert!(build_free_dirac_basis::<f64>(8, 5.0, 1.0, 16).is_err());
        assert!(build_free_kg_basis::<f64>(2, 5.0, 0.0, 32).is_err());
    }

    #[test]
    fn kg_rest_components() {
        let b = build_free_kg_basis::<f64>(0, 3.0, 1.0, 4).unwrap();
        let vn = b.spinors().vector(0);
        let vp = b.spinors().vector(1);
        // (m ± E, m ∓ E) with E = m: (2, 0) and (0, 2) before normalization.
        assert_abs_diff_eq!(vp[1].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vn[0].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vp[0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vn[1].re, 1.0, epsilon = 1e-15);
        assert_eq!(b.metric(), &[-1.0, 1.0]);
    }

    #[test]
    fn kg_indefinite_gram() {
        let b = build_free_kg_basis::<f64>(3, 2.0 * std::f64::consts::PI, 1.0, 32).unwrap();
        assert!(b.orthonormality_error() < 1e-12);
        let g = b.quadrature_gram();
        let neg = b.index_of(&ModeIndex::negative(1)).unwrap();
        assert_abs_diff_eq!(g[(neg, neg)].re, -1.0, epsilon = 1e-12);
        // n = 1 pair: ⟨φ+_1|φ-_1⟩ = 0 via the component metric.
        let p1 = b.index_of(&ModeIndex { branch: Branch::Positive, k: 2, momentum: Some(1) }).unwrap();
        let n1 = b.index_of(&ModeIndex { branch: Branch::Negative, k: 2, momentum: Some(1) }).unwrap();
        assert_abs_diff_eq!(b.spinors().inner(p1, n1).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(p1, n1)].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn kg_amplitude_at_half_box() {
        // n = 1, L = 2π, m = 1: E = √2, N = 1/(2 sqrt(E m)), plane wave e^{iπ}/sqrt(2π).
        let l = 2.0 * std::f64::consts::PI;
        let b = build_free_kg_basis::<f64>(1, l, 1.0, 8).unwrap();
        let mode = ModeIndex { branch: Branch::Positive, k: 2, momentum: Some(1) };
        let e = 2f64.sqrt();
        let n = 1.0 / (2.0 * e.sqrt());
        let wave = -1.0 / l.sqrt();
        let a1 = b.position_amplitude(&mode, l / 2.0, 1).unwrap();
        let a2 = b.position_amplitude(&mode, l / 2.0, 2).unwrap();
        assert_abs_diff_eq!(a1.re, n * (1.0 + e) * wave, epsilon = 1e-14);
        assert_abs_diff_eq!(a2.re, n * (1.0 - e) * wave, epsilon = 1e-14);
        assert_abs_diff_eq!(a1.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn position_amplitude_component_checks() {
        let nr = build_nonrel_basis::<f64>(1, 1, 2.0, 1.0, 16).unwrap();
        let m = ModeIndex::positive(1);
        assert!(matches!(
            nr.position_amplitude(&m, 0.5, 2),
            Err(Error::ComponentOutOfRange { .. })
        ));
        let v = nr.position_amplitude(&m, 0.5, 1).unwrap();
        assert_abs_diff_eq!(v.re, (2.0f64 / 2.0).sqrt() * (2.0 * std::f64::consts::PI * 0.5 / 2.0).sin(), epsilon = 1e-14);

        let d = build_free_dirac_basis::<f64>(1, 4.0, 1.0, 8).unwrap();
        let v = d.position_amplitude(&ModeIndex::positive(1), 1.0, 2).unwrap();
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn metric_inner_products() {
        let b = build_free_kg_basis::<f64>(1, 5.0, 1.0, 8).unwrap();
        let dim = b.dim();
        let unit = |j: usize| {
            let mut v = vec![Complex::new(0.0, 0.0); dim];
            v[j] = Complex::new(1.0, 0.0);
            v
        };
        let pos = unit(b.index_of(&ModeIndex::positive(2)).unwrap());
        let neg = unit(b.index_of(&ModeIndex::negative(2)).unwrap());
        assert_eq!(b.metric_inner_product(&pos, &pos).unwrap().re, 1.0);
        assert_eq!(b.metric_inner_product(&neg, &neg).unwrap().re, -1.0);
        assert_eq!(b.metric_inner_product(&pos, &neg).unwrap().norm(), 0.0);
        assert!(b.metric_inner_product(&pos[..2], &neg).is_err());
    }

    #[test]
    fn grid_norm_equals_metric() {
        for b in [
            build_free_dirac_basis::<f64>(3, 6.0, 1.3, 24).unwrap(),
            build_free_kg_basis::<f64>(3, 6.0, 1.3, 24).unwrap(),
        ] {
            let g = b.quadrature_gram();
            for j in 0..b.dim() {
                assert_abs_diff_eq!(g[(j, j)].re, b.metric()[j], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn completeness_on_truncated_span() {
        // Σ_j λ_j |φ_j⟩⟨φ_j|ψ⟩ reproduces ψ for ψ in the span.
        let b = build_free_kg_basis::<f64>(2, 4.0, 0.9, 16).unwrap();
        let dim = b.dim();
        let coeffs: Vec<Complex<f64>> =
            (0..dim).map(|j| Complex::new((j as f64 * 0.37).sin(), (j as f64 * 0.11).cos())).collect();
        let psi = b.samples() * nalgebra::DVector::from_vec(coeffs);
        let gram = b.quadrature_gram();
        // overlaps ⟨φ_j|ψ⟩ = (Gram · a)_j
        let a = nalgebra::DVector::from_iterator(dim, (0..dim).map(|j| Complex::new((j as f64 * 0.37).sin(), (j as f64 * 0.11).cos())));
        let overlaps = &gram * &a;
        let rebuilt = b.samples() * nalgebra::DVector::from_iterator(dim, (0..dim).map(|j| overlaps[j] * b.metric()[j]));
        assert!((rebuilt - psi).camax() < 1e-10);
    }

    #[test]
    fn momentum_enumeration_order() {
        assert_eq!(momentum_order(2), vec![0, 1, -1, 2, -2]);
        let b = build_free_dirac_basis::<f64>(2, 4.0, 1.0, 8).unwrap();
        let ks: Vec<usize> = b.modes().iter().map(|m| m.ladder_k()).collect();
        assert_eq!(ks, vec![1, 2, 2, 3, 3, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn packet_normalization() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(WavePacket::new(vec![Complex::new(h, 0.0), Complex::new(0.0, h)]).is_ok());
        assert!(matches!(
            WavePacket::new(vec![Complex::new(1.0, 0.0), Complex::new(0.1, 0.0)]),
            Err(Error::UnnormalizedPacket(_))
        ));
        let p = WavePacket::normalized(vec![Complex::new(3.0, 0.0), Complex::new(0.0, 4.0)]).unwrap();
        assert_abs_diff_eq!(p.coefficients()[1].im, 0.8, epsilon = 1e-15);
        let b = build_nonrel_basis::<f64>(2, 2, 1.0, 1.0, 16).unwrap();
        let full = p.embed(&b).unwrap();
        assert_eq!(full.len(), 4);
        assert_eq!(full[0].norm(), 0.0);
        assert_eq!(WavePacket::from_full(&b, &full).unwrap(), p);
        let mut bad = full.clone();
        bad[1] = Complex::new(0.1, 0.0);
        assert!(matches!(WavePacket::from_full(&b, &bad), Err(Error::NegativeBranchPacket)));
    }

    #[test]
    fn single_precision_builds() {
        let b = build_free_dirac_basis::<f32>(2, 6.0, 1.0, 16).unwrap();
        assert!(b.orthonormality_error() < 1e-5);
    }
}
