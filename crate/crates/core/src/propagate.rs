//! One-particle generator and time-ordered propagator.
//!
//! Overlaps `c_j(t) = ⟨φ_j|ψ(t)⟩` obey `i ∂_t c = G(t) c`. For the Hermitian
//! theories `G = H`; for Klein–Gordon `G = H η` with `η = diag(λ)`, which is
//! not Hermitian. The overlap matrix `u_jk(t) = ⟨φ_j|φ_k(t)⟩` is then
//! `U(t, 0) η`, so `u(0) = η`.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::basis::{BasisSet, Branch, ModeIndex, TheoryKind};
use crate::error::{Error, Result};
use crate::scalar::{cx, czero, from_usize, lit, Real};

/// Hard limit on the number of midpoint steps in one evolution.
pub const MAX_STEPS: usize = 100_000_000;

/// Real time dependence `f(t)` multiplying the coupling matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeProfile<T> {
    Constant { amplitude: T },
    /// `amplitude` on `[t_on, t_off)`, zero elsewhere.
    RectWindow { amplitude: T, t_on: T, t_off: T },
    /// `amplitude · exp(-(t - center)² / (2 width²))`.
    Gaussian { amplitude: T, center: T, width: T },
}

impl<T: Real> TimeProfile<T> {
    pub fn constant(amplitude: T) -> Self {
        TimeProfile::Constant { amplitude }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TimeProfile::Constant { amplitude } => amplitude.is_finite(),
            TimeProfile::RectWindow { amplitude, t_on, t_off } => {
                amplitude.is_finite() && t_on.is_finite() && t_off.is_finite() && t_on < t_off
            }
            TimeProfile::Gaussian { amplitude, center, width } => {
                amplitude.is_finite() && center.is_finite() && width.is_finite() && width > T::zero()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid time profile {self:?}")))
        }
    }

    pub fn value(&self, t: T) -> T {
        match *self {
            TimeProfile::Constant { amplitude } => amplitude,
            TimeProfile::RectWindow { amplitude, t_on, t_off } => {
                if t >= t_on && t < t_off {
                    amplitude
                } else {
                    T::zero()
                }
            }
            TimeProfile::Gaussian { amplitude, center, width } => {
                let z = (t - center) / width;
                amplitude * (-z * z * lit(0.5)).exp()
            }
        }
    }

    /// Upper bound of `|f|` over all times.
    pub fn max_abs(&self) -> T {
        match *self {
            TimeProfile::Constant { amplitude }
            | TimeProfile::RectWindow { amplitude, .. }
            | TimeProfile::Gaussian { amplitude, .. } => amplitude.abs(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TimeProfile::Constant { .. })
    }
}

/// Field-free energies plus a time-dependent Hermitian coupling `f(t) W`.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec<T: Real> {
    theory: TheoryKind,
    n_neg: usize,
    energies: Vec<T>,
    metric: Vec<T>,
    coupling: DMatrix<Complex<T>>,
    profile: TimeProfile<T>,
}

impl<T: Real> HamiltonianSpec<T> {
    /// Uses a caller-supplied coupling matrix; it must be Hermitian.
    pub fn new(basis: &BasisSet<T>, coupling: DMatrix<Complex<T>>, profile: TimeProfile<T>) -> Result<Self> {
        let dim = basis.dim();
        if coupling.nrows() != dim || coupling.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: coupling.nrows().max(coupling.ncols()) });
        }
        Self::from_parts(basis.theory(), basis.n_neg(), basis.energies().to_vec(), coupling, profile)
    }

    /// Builds `W_jj' = ∫ φ_j† g V(x) φ_j'` by grid quadrature.
    pub fn with_potential<F: Fn(T) -> T>(basis: &BasisSet<T>, potential: F, profile: TimeProfile<T>) -> Result<Self> {
        let comps = basis.components();
        let grid = basis.grid();
        let mut weighted = basis.samples().clone();
        for (m, (&x, &w)) in grid.points().iter().zip(grid.weights()).enumerate() {
            let v = potential(x) * w;
            for i in 0..comps {
                let g: T = basis.theory().component_sign(i);
                weighted.row_mut(m * comps + i).scale_mut(v * g);
            }
        }
        let mut coupling = basis.samples().adjoint() * weighted;
        hermitize(&mut coupling);
        Self::new(basis, coupling, profile)
    }

    /// Gaussian barrier `height · exp(-(x - center)² / (2 width²))`.
    pub fn gaussian_barrier(
        basis: &BasisSet<T>,
        height: T,
        center: T,
        width: T,
        profile: TimeProfile<T>,
    ) -> Result<Self> {
        if !(width > T::zero()) {
            return Err(Error::Config("barrier width must be positive".into()));
        }
        Self::with_potential(
            basis,
            |x| {
                let z = (x - center) / width;
                height * (-z * z * lit(0.5)).exp()
            },
            profile,
        )
    }

    /// Couples exactly one negative and one positive mode with amplitude `v`.
    pub fn mode_pair_coupling(
        basis: &BasisSet<T>,
        negative: &ModeIndex,
        positive: &ModeIndex,
        v: Complex<T>,
        profile: TimeProfile<T>,
    ) -> Result<Self> {
        if negative.branch != Branch::Negative || positive.branch != Branch::Positive {
            return Err(Error::Config("mode pair must be one negative and one positive mode".into()));
        }
        let n = basis.index_of(negative)?;
        let p = basis.index_of(positive)?;
        let mut coupling = DMatrix::zeros(basis.dim(), basis.dim());
        coupling[(p, n)] = v;
        coupling[(n, p)] = v.conj();
        Self::new(basis, coupling, profile)
    }

    /// Abstract two-level system: modes `(−, +)` with energies `(−e, +e)` and
    /// off-diagonal coupling `W_{+−} = v`.
    pub fn two_level(theory: TheoryKind, e: T, v: Complex<T>, profile: TimeProfile<T>) -> Result<Self> {
        if !(e >= T::zero()) {
            return Err(Error::Config("two-level energy must be non-negative".into()));
        }
        let mut coupling = DMatrix::zeros(2, 2);
        coupling[(1, 0)] = v;
        coupling[(0, 1)] = v.conj();
        Self::from_parts(theory, 1, vec![-e, e], coupling, profile)
    }

    fn from_parts(
        theory: TheoryKind,
        n_neg: usize,
        energies: Vec<T>,
        coupling: DMatrix<Complex<T>>,
        profile: TimeProfile<T>,
    ) -> Result<Self> {
        profile.validate()?;
        let scale = coupling.iter().fold(T::one(), |a, z| a.max(z.modulus()));
        let asym = (&coupling - coupling.adjoint()).iter().fold(T::zero(), |a, z| a.max(z.modulus()));
        if asym > scale * lit(1e-12) {
            return Err(Error::Config("coupling matrix is not Hermitian".into()));
        }
        if coupling.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Config("coupling matrix has non-finite entries".into()));
        }
        let metric = (0..energies.len())
            .map(|j| theory.branch_metric(if j < n_neg { Branch::Negative } else { Branch::Positive }))
            .collect();
        Ok(HamiltonianSpec { theory, n_neg, energies, metric, coupling, profile })
    }

    pub fn theory(&self) -> TheoryKind {
        self.theory
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    pub fn metric(&self) -> &[T] {
        &self.metric
    }

    pub fn coupling(&self) -> &DMatrix<Complex<T>> {
        &self.coupling
    }

    pub fn profile(&self) -> &TimeProfile<T> {
        &self.profile
    }

    pub fn with_profile(&self, profile: TimeProfile<T>) -> Result<Self> {
        profile.validate()?;
        Ok(HamiltonianSpec { profile, ..self.clone() })
    }

    /// `H(t) = diag(E) + f(t) W` with `|E|` on the diagonal for Klein–Gordon.
    pub fn hamiltonian(&self, t: T) -> DMatrix<Complex<T>> {
        let mut h = &self.coupling * cx(self.profile.value(t));
        for (j, &e) in self.energies.iter().enumerate() {
            let e = if self.theory.is_pseudo_unitary() { e.abs() } else { e };
            h[(j, j)] += cx(e);
        }
        h
    }

    /// Upper bound of `‖G(t)‖₂` over all times.
    pub fn generator_norm_bound(&self) -> T {
        let emax = self.energies.iter().fold(T::zero(), |a, e| a.max(e.abs()));
        let wnorm = if self.dim() == 0 {
            T::zero()
        } else {
            SymmetricEigen::new(self.coupling.clone())
                .eigenvalues
                .iter()
                .fold(T::zero(), |a, e| a.max(e.abs()))
        };
        emax + self.profile.max_abs() * wnorm
    }
}

fn hermitize<T: Real>(m: &mut DMatrix<Complex<T>>) {
    let sym = (&*m + m.adjoint()) * cx(lit::<T>(0.5));
    *m = sym;
}

fn eta_right<T: Real>(m: &mut DMatrix<Complex<T>>, metric: &[T]) {
    for (j, &l) in metric.iter().enumerate() {
        if l < T::zero() {
            m.column_mut(j).neg_mut();
        }
    }
}

/// `G(t)`: `H(t)` for Hermitian theories, `H(t) η` for Klein–Gordon.
pub fn assemble_generator<T: Real>(spec: &HamiltonianSpec<T>, t: T) -> Result<DMatrix<Complex<T>>> {
    if !(t >= T::zero()) {
        return Err(Error::Config("generator time must be non-negative".into()));
    }
    let mut g = spec.hamiltonian(t);
    if spec.theory.is_pseudo_unitary() {
        eta_right(&mut g, &spec.metric);
    }
    Ok(g)
}

fn step_exponential<T: Real>(spec: &HamiltonianSpec<T>, t_mid: T, h: T) -> DMatrix<Complex<T>> {
    let hmat = spec.hamiltonian(t_mid);
    if spec.theory.is_pseudo_unitary() {
        let mut g = hmat;
        eta_right(&mut g, &spec.metric);
        (g * Complex::new(T::zero(), -h)).exp()
    } else {
        let eig = SymmetricEigen::new(hmat);
        let phases = DVector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues.iter().map(|&l| {
                let a = -l * h;
                Complex::new(a.cos(), a.sin())
            }),
        );
        let mut scaled = eig.eigenvectors.clone();
        for (j, p) in phases.iter().enumerate() {
            for z in scaled.column_mut(j).iter_mut() {
                *z *= *p;
            }
        }
        scaled * eig.eigenvectors.adjoint()
    }
}

fn step_count<T: Real>(span: T, dt: T) -> Result<usize> {
    let ratio = span / dt;
    let as_f64: f64 = nalgebra::try_convert(ratio).unwrap_or(f64::INFINITY);
    if !as_f64.is_finite() || as_f64.ceil() > MAX_STEPS as f64 {
        return Err(Error::StepOverflow(as_f64));
    }
    // Guard against round-off pushing an exact multiple to one extra step.
    let n = (as_f64 - 1e-9).ceil().max(0.0) as usize;
    Ok(n)
}

fn check_finite<T: Real>(m: &DMatrix<Complex<T>>) -> Result<()> {
    for z in m.iter() {
        if !z.re.is_finite() || !z.im.is_finite() {
            let bad: f64 = nalgebra::try_convert(z.modulus()).unwrap_or(f64::NAN);
            return Err(Error::NonFinite(bad));
        }
    }
    Ok(())
}

/// Time-evolution operator of the overlaps, `U(t1, t0)`, by midpoint steps
/// of size at most `dt`.
pub fn evolve_between<T: Real>(spec: &HamiltonianSpec<T>, t0: T, t1: T, dt: T) -> Result<DMatrix<Complex<T>>> {
    if !(dt > T::zero()) || !(t0 >= T::zero()) || !(t1 >= t0) {
        return Err(Error::Config("evolution needs dt > 0 and 0 <= t0 <= t1".into()));
    }
    let dim = spec.dim();
    let mut u = DMatrix::identity(dim, dim);
    let n = step_count(t1 - t0, dt)?;
    if n == 0 {
        return Ok(u);
    }
    let h = (t1 - t0) / from_usize(n);
    let half = h * lit(0.5);
    if spec.profile.is_constant() {
        let step = step_exponential(spec, t0, h);
        for _ in 0..n {
            u = &step * u;
        }
    } else {
        for s in 0..n {
            let t_mid = t0 + h * from_usize(s) + half;
            u = step_exponential(spec, t_mid, h) * u;
        }
    }
    check_finite(&u)?;
    Ok(u)
}

/// Overlap matrix `u_jk(t) = ⟨φ_j|φ_k(t)⟩` at one time.
#[derive(Debug, Clone)]
pub struct PropagatorMatrix<T: Real> {
    matrix: DMatrix<Complex<T>>,
    time: T,
    theory: TheoryKind,
    n_neg: usize,
    metric: Vec<T>,
}

impl<T: Real> PropagatorMatrix<T> {
    /// Wraps an evolution operator `U(t, 0)` as overlaps `U η`.
    pub fn from_evolution(spec: &HamiltonianSpec<T>, mut evolution: DMatrix<Complex<T>>, time: T) -> Self {
        eta_right(&mut evolution, &spec.metric);
        PropagatorMatrix {
            matrix: evolution,
            time,
            theory: spec.theory,
            n_neg: spec.n_neg,
            metric: spec.metric.clone(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.matrix
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn theory(&self) -> TheoryKind {
        self.theory
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    pub fn metric(&self) -> &[T] {
        &self.metric
    }

    pub fn entry(&self, j: usize, k: usize) -> Complex<T> {
        self.matrix[(j, k)]
    }

    pub fn column(&self, k: usize) -> DVector<Complex<T>> {
        self.matrix.column(k).into_owned()
    }

    /// `‖u†u − 1‖_max`, or `‖u†ηu − η‖_max` for Klein–Gordon.
    pub fn unitarity_drift(&self) -> T {
        let mut eu = self.matrix.clone();
        let mut target = DMatrix::<Complex<T>>::identity(self.dim(), self.dim());
        if self.theory.is_pseudo_unitary() {
            for (j, &l) in self.metric.iter().enumerate() {
                if l < T::zero() {
                    eu.row_mut(j).neg_mut();
                    target[(j, j)] = cx(l);
                }
            }
        }
        let prod = self.matrix.adjoint() * eu;
        (prod - target).iter().fold(T::zero(), |a, z| a.max(z.modulus()))
    }
}

/// Time-ordered propagator at `t_final` from midpoint steps of size ≤ `dt`.
pub fn evolve_propagator<T: Real>(spec: &HamiltonianSpec<T>, t_final: T, dt: T) -> Result<PropagatorMatrix<T>> {
    let u = evolve_between(spec, T::zero(), t_final, dt)?;
    Ok(PropagatorMatrix::from_evolution(spec, u, t_final))
}

/// Propagators at increasing checkpoint times, each segment refined to `dt`.
pub fn propagator_series<T: Real>(spec: &HamiltonianSpec<T>, times: &[T], dt: T) -> Result<Vec<PropagatorMatrix<T>>> {
    let mut out = Vec::with_capacity(times.len());
    let dim = spec.dim();
    let mut u = DMatrix::identity(dim, dim);
    let mut t_prev = T::zero();
    for &t in times {
        if !(t >= t_prev) {
            return Err(Error::Config("checkpoint times must be non-negative and non-decreasing".into()));
        }
        u = evolve_between(spec, t_prev, t, dt)? * u;
        out.push(PropagatorMatrix::from_evolution(spec, u.clone(), t));
        t_prev = t;
    }
    Ok(out)
}

/// Overlaps `⟨φ_j|ψ(t)⟩` for `ψ(0) = Σ_k a_k φ_k`.
pub fn evolve_state<T: Real>(
    spec: &HamiltonianSpec<T>,
    coefficients: &[Complex<T>],
    t_final: T,
    dt: T,
) -> Result<Vec<Complex<T>>> {
    if coefficients.len() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: coefficients.len() });
    }
    let u = evolve_propagator(spec, t_final, dt)?;
    let a = DVector::from_column_slice(coefficients);
    Ok((u.matrix() * a).iter().copied().collect())
}

/// Column `k` of the propagator: `⟨φ_j|φ_k(t)⟩` for all `j`.
pub fn propagator_column<T: Real>(
    spec: &HamiltonianSpec<T>,
    mode: usize,
    t_final: T,
    dt: T,
) -> Result<Vec<Complex<T>>> {
    if mode >= spec.dim() {
        return Err(Error::UnknownMode(format!("global index {mode} (dimension {})", spec.dim())));
    }
    let mut e = vec![czero(); spec.dim()];
    e[mode] = cx(T::one());
    evolve_state(spec, &e, t_final, dt)
}
