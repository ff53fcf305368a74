//! A numerical laboratory for finite-volume random Schrödinger and Landau
//! Hamiltonians.
//!
//! The crate builds periodic lattice discretizations of H = H₀ + Σ_j ω_j
//! u(x−j), estimates eigenvalue-counting statistics (Wegner-type window
//! counts and the integrated density of states) by Monte Carlo, and checks —
//! as falsifiable numerical inequalities on finite-dimensional self-adjoint
//! operators — a family of quantitative spectral bounds: certified
//! spectral-averaging sums, the arctan/projector inequality, resolvent and
//! projector expectation bounds against the coupling measure's modulus of
//! continuity s(ε), trace-norm decay of cutoff resolvents, and the
//! unique-continuation constant of spectral projectors.
//!
//! Modules mirror the pipeline:
//!
//! * [`measures`] — single-site probability laws and the modulus s(ε),
//! * [`operators`] — periodic backgrounds, Peierls phases, Anderson potentials,
//! * [`spectra`] — eigendecompositions, counting functions, projector traces,
//! * [`averaging`] — certified lattice sums and spectral-averaging bounds,
//! * [`tracebounds`] — trace-norm decay and operator-norm comparisons,
//! * [`experiments`] — seeded Monte Carlo orchestration and scaling fits,
//! * [`verify`] — randomized suites checking every bound, with reports,
//! * [`report`] — result tables, CSV/JSON emission, check summaries.

pub mod averaging;
pub mod experiments;
pub mod measures;
pub mod operators;
pub mod report;
pub mod seeding;
pub mod spectra;
pub mod tracebounds;
pub mod verify;

pub use measures::{MeasureSpec, Modulus, ModulusCurve};
pub use operators::{
    assemble_anderson, assemble_tilde, build_background, BoxSpec, CellPotential, Complex64,
    CouplingField, LatticeOperator, SingleSitePotential,
};
pub use spectra::{eigensolve, Interval, IntervalPair, SpectralData};
