//! Space-time resolved particle and hole densities of non-interacting quantum
//! particles driven by a time-dependent external field.
//!
//! The pipeline is: build a truncated one-particle [`basis`], assemble the
//! generator and integrate the overlap matrix with [`propagate`], then read
//! off densities and occupation numbers with [`densities`]. The
//! [`fock_oracle`] module checks those closed forms against brute-force
//! many-body evolution, and [`twostate`] holds the analytic two-level results.
//!
//! Everything is generic over the real scalar; the aliases below fix it to
//! `f64` (and `f32` where single precision is useful).
//!
//! ```
//! use pairdens::densities::{nonrel_densities, occupation_numbers};
//! use pairdens::propagate::{evolve_propagator, HamiltonianSpec, TimeProfile};
//! use pairdens::{build_nonrel_basis, Packet};
//!
//! let basis = build_nonrel_basis::<f64>(3, 5, 10.0, 1.0, 96)?;
//! let pulse = TimeProfile::Gaussian { amplitude: 1.0, center: 1.0, width: 0.3 };
//! let spec = HamiltonianSpec::gaussian_barrier(&basis, 2.0, 5.0, 0.8, pulse)?;
//! let u = evolve_propagator(&spec, 2.0, 2e-3)?;
//!
//! let packet = Packet::single(basis.n_pos(), 1)?;
//! let (ptcl, hole) = nonrel_densities(&u, &basis, Some(&packet))?;
//! let occ = occupation_numbers(&u, &basis, Some(&packet))?;
//! assert_eq!(ptcl.len(), basis.grid().len());
//! assert!(hole.min_value().unwrap() > -1e-12);
//! assert!((occ.net() - 1.0).abs() < 1e-10);
//! # Ok::<(), pairdens::Error>(())
//! ```

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod densities;
pub mod error;
pub mod fock_oracle;
pub mod propagate;
pub mod scalar;
pub mod twostate;

pub use basis::{
    build_free_dirac_basis, build_free_kg_basis, build_nonrel_basis, Branch, ModeIndex, StatisticsKind,
    TheoryKind,
};
pub use error::{Error, Result};
pub use scalar::Real;

pub type Basis = basis::BasisSet<f64>;
pub type Grid = basis::SpatialGrid<f64>;
pub type Packet = basis::WavePacket<f64>;
pub type Profile = propagate::TimeProfile<f64>;
pub type Hamiltonian = propagate::HamiltonianSpec<f64>;
pub type Propagator = propagate::PropagatorMatrix<f64>;
pub type Field = densities::DensityField<f64>;
pub type Occupations = densities::OccupationReport<f64>;
pub type TwoState = twostate::TwoStateParams<f64>;
pub type ManyBody = fock_oracle::ManyBodyState<f64>;

pub type Basis32 = basis::BasisSet<f32>;
pub type Hamiltonian32 = propagate::HamiltonianSpec<f32>;
pub type Propagator32 = propagate::PropagatorMatrix<f32>;
