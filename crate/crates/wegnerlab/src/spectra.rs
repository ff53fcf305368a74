//! Eigendecompositions and the spectral quantities built on them.
//!
//! `SpectralData` holds the full (sorted) eigendecomposition of a lattice
//! operator. Counting conventions are fixed once and used everywhere:
//! intervals are closed, `counting_function(E)` counts eigenvalues ≤ E, and
//! `interval_trace([a, b])` counts a ≤ λ ≤ b, so Tr E([a,b]) =
//! counting(b) − counting(a⁻) holds exactly in exact arithmetic.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::{Complex64, LatticeOperator, OperatorRepr, DENSE_CAP};

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("matrix dimension {0} exceeds the dense-solver cap {DENSE_CAP}")]
    DimensionExceeded(usize),
    #[error("eigenvectors were not retained; rerun eigensolve with keep_vectors")]
    VectorsNotRetained,
    #[error("spectral projector onto {0:?} has rank zero")]
    EmptyProjector(Interval),
    #[error("interval is empty: [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("shift M = {m} leaves the operator bottom at {bottom}, below the floor")]
    ShiftTooSmall { m: f64, bottom: f64 },
    #[error("Δ = {delta:?} must be contained in Δ̃ = {delta_tilde:?} with positive gap")]
    BadIntervalPair {
        delta: Interval,
        delta_tilde: Interval,
    },
    #[error("vector length {got} does not match dimension {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// A closed interval [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, SpectraError> {
        if !(lo <= hi) {
            return Err(SpectraError::EmptyInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn centered(center: f64, half_width: f64) -> Result<Self, SpectraError> {
        Self::new(center - half_width, center + half_width)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone)]
pub enum EigenvectorStore {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

/// Sorted eigendecomposition of a Hermitian lattice operator.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub vectors: Option<EigenvectorStore>,
}

/// Full dense eigendecomposition. Eigenvalues come out ascending; the
/// matching eigenvector columns are retained when `keep_vectors` is set.
pub fn eigensolve(h: &LatticeOperator, keep_vectors: bool) -> Result<SpectralData, SpectraError> {
    let dim = h.dim();
    if dim > DENSE_CAP {
        return Err(SpectraError::DimensionExceeded(dim));
    }
    match &h.repr {
        OperatorRepr::Diagonal(d) => {
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
            let eigenvalues: Vec<f64> = order.iter().map(|&i| d[i]).collect();
            let vectors = keep_vectors.then(|| {
                let mut v = DMatrix::<f64>::zeros(dim, dim);
                for (col, &i) in order.iter().enumerate() {
                    v[(i, col)] = 1.0;
                }
                EigenvectorStore::Real(v)
            });
            Ok(SpectralData {
                eigenvalues,
                vectors,
            })
        }
        OperatorRepr::DenseReal(m) => {
            let eig = SymmetricEigen::new(m.clone());
            Ok(sorted_spectral_data_real(eig, keep_vectors))
        }
        OperatorRepr::DenseComplex(m) => {
            let eig = SymmetricEigen::new(m.clone());
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let vectors = keep_vectors.then(|| {
                let mut v = DMatrix::<Complex64>::zeros(dim, dim);
                for (col, &i) in order.iter().enumerate() {
                    v.set_column(col, &eig.eigenvectors.column(i));
                }
                EigenvectorStore::Complex(v)
            });
            Ok(SpectralData {
                eigenvalues,
                vectors,
            })
        }
    }
}

/// Eigendecomposition of a bare real symmetric matrix (no lattice metadata).
pub fn eigensolve_sym(m: &DMatrix<f64>, keep_vectors: bool) -> Result<SpectralData, SpectraError> {
    if m.nrows() > DENSE_CAP {
        return Err(SpectraError::DimensionExceeded(m.nrows()));
    }
    Ok(sorted_spectral_data_real(
        SymmetricEigen::new(m.clone()),
        keep_vectors,
    ))
}

fn sorted_spectral_data_real(
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
    keep_vectors: bool,
) -> SpectralData {
    let dim = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = keep_vectors.then(|| {
        let mut v = DMatrix::<f64>::zeros(dim, dim);
        for (col, &i) in order.iter().enumerate() {
            v.set_column(col, &eig.eigenvectors.column(i));
        }
        EigenvectorStore::Real(v)
    });
    SpectralData {
        eigenvalues,
        vectors,
    }
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    /// N(E) = #{λ ≤ E}.
    pub fn counting_function(&self, energy: f64) -> usize {
        self.eigenvalues.partition_point(|&l| l <= energy)
    }

    /// Tr E([a, b]) = #{a ≤ λ ≤ b}, endpoints included.
    pub fn interval_trace(&self, interval: Interval) -> usize {
        let below_a = self.eigenvalues.partition_point(|&l| l < interval.lo);
        self.counting_function(interval.hi).saturating_sub(below_a)
    }

    /// Indices of eigenvalues inside the closed interval.
    pub fn indices_in(&self, interval: Interval) -> std::ops::Range<usize> {
        let lo = self.eigenvalues.partition_point(|&l| l < interval.lo);
        let hi = self.eigenvalues.partition_point(|&l| l <= interval.hi);
        lo..hi
    }

    fn require_vectors(&self) -> Result<&EigenvectorStore, SpectraError> {
        self.vectors
            .as_ref()
            .ok_or(SpectraError::VectorsNotRetained)
    }

    /// ⟨φ, E(Δ) φ⟩ = Σ_{λ∈Δ} |⟨v_λ, φ⟩|² for a real vector φ.
    pub fn projector_quadratic_form(
        &self,
        interval: Interval,
        phi: &DVector<f64>,
    ) -> Result<f64, SpectraError> {
        if phi.len() != self.dim() {
            return Err(SpectraError::LengthMismatch {
                expected: self.dim(),
                got: phi.len(),
            });
        }
        let range = self.indices_in(interval);
        match self.require_vectors()? {
            EigenvectorStore::Real(v) => Ok(range.map(|k| v.column(k).dot(phi).powi(2)).sum()),
            EigenvectorStore::Complex(v) => Ok(range
                .map(|k| {
                    let overlap: Complex64 = v
                        .column(k)
                        .iter()
                        .zip(phi.iter())
                        .map(|(a, &b)| a.conj() * Complex64::new(b, 0.0))
                        .sum();
                    overlap.norm_sqr()
                })
                .sum()),
        }
    }

    /// Complex-vector version of [`Self::projector_quadratic_form`].
    pub fn projector_quadratic_form_complex(
        &self,
        interval: Interval,
        phi: &DVector<Complex64>,
    ) -> Result<f64, SpectraError> {
        if phi.len() != self.dim() {
            return Err(SpectraError::LengthMismatch {
                expected: self.dim(),
                got: phi.len(),
            });
        }
        let range = self.indices_in(interval);
        match self.require_vectors()? {
            EigenvectorStore::Real(v) => Ok(range
                .map(|k| {
                    let overlap: Complex64 = v
                        .column(k)
                        .iter()
                        .zip(phi.iter())
                        .map(|(&a, b)| Complex64::new(a, 0.0) * b)
                        .sum();
                    overlap.norm_sqr()
                })
                .sum()),
            EigenvectorStore::Complex(v) => Ok(range
                .map(|k| {
                    let overlap: Complex64 = v
                        .column(k)
                        .iter()
                        .zip(phi.iter())
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    overlap.norm_sqr()
                })
                .sum()),
        }
    }

    /// Σ_k f(λ_k) |⟨v_k, φ⟩|² for a real vector φ.
    pub fn spectral_form(
        &self,
        phi: &DVector<f64>,
        f: impl Fn(f64) -> f64,
    ) -> Result<f64, SpectraError> {
        if phi.len() != self.dim() {
            return Err(SpectraError::LengthMismatch {
                expected: self.dim(),
                got: phi.len(),
            });
        }
        match self.require_vectors()? {
            EigenvectorStore::Real(v) => Ok((0..self.dim())
                .map(|k| f(self.eigenvalues[k]) * v.column(k).dot(phi).powi(2))
                .sum()),
            EigenvectorStore::Complex(v) => Ok((0..self.dim())
                .map(|k| {
                    let overlap: Complex64 = v
                        .column(k)
                        .iter()
                        .zip(phi.iter())
                        .map(|(a, &b)| a.conj() * Complex64::new(b, 0.0))
                        .sum();
                    f(self.eigenvalues[k]) * overlap.norm_sqr()
                })
                .sum()),
        }
    }

    /// f(H) = V f(λ) V† as a dense real matrix (real eigenvectors only).
    pub fn function_of(&self, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>, SpectraError> {
        match self.require_vectors()? {
            EigenvectorStore::Real(v) => {
                let scaled = DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
                    v[(i, j)] * f(self.eigenvalues[j])
                });
                Ok(&scaled * v.transpose())
            }
            EigenvectorStore::Complex(_) => Err(SpectraError::VectorsNotRetained),
        }
    }
}

/// Nested energy intervals Δ ⊂ Δ̃ with gap d_Δ = dist(Δ, Δ̃ᶜ) > 0 and a shift
/// M making H₀ + M strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalPair {
    pub delta: Interval,
    pub delta_tilde: Interval,
    pub d_gap: f64,
    pub shift_m: f64,
}

/// Floor imposed on the minimum eigenvalue of H₀ + M.
pub const SHIFT_FLOOR: f64 = 1e-6;

impl IntervalPair {
    pub fn new(
        delta: Interval,
        delta_tilde: Interval,
        shift_m: f64,
        sd0: &SpectralData,
    ) -> Result<Self, SpectraError> {
        let d_gap = (delta.lo - delta_tilde.lo).min(delta_tilde.hi - delta.hi);
        if !(d_gap > 0.0) {
            return Err(SpectraError::BadIntervalPair { delta, delta_tilde });
        }
        let bottom = sd0.min_eigenvalue() + shift_m;
        if !(bottom >= SHIFT_FLOOR) {
            return Err(SpectraError::ShiftTooSmall { m: shift_m, bottom });
        }
        Ok(IntervalPair {
            delta,
            delta_tilde,
            d_gap,
            shift_m,
        })
    }
}

/// The best finite-volume constant C with P Ṽ P ≥ C·P for P = E₀(Δ̃):
/// the smallest eigenvalue of P Ṽ P restricted to range(P).
///
/// Positivity of this constant is the quantitative unique-continuation
/// statement for the box: no vector in the spectral subspace can avoid the
/// support of Ṽ.
pub fn ucp_constant(
    sd0: &SpectralData,
    delta_tilde: Interval,
    tilde: &LatticeOperator,
) -> Result<f64, SpectraError> {
    let diag = tilde
        .diagonal_values()
        .map_err(|_| SpectraError::VectorsNotRetained)?;
    if diag.len() != sd0.dim() {
        return Err(SpectraError::LengthMismatch {
            expected: sd0.dim(),
            got: diag.len(),
        });
    }
    let range = sd0.indices_in(delta_tilde);
    let rank = range.len();
    if rank == 0 {
        return Err(SpectraError::EmptyProjector(delta_tilde));
    }
    match sd0.require_vectors()? {
        EigenvectorStore::Real(v) => {
            // W[k,l] = ⟨v_k, Ṽ v_l⟩ over the projector's eigenbasis.
            let mut w = DMatrix::<f64>::zeros(rank, rank);
            for (a, ka) in range.clone().enumerate() {
                for (b, kb) in range.clone().enumerate().skip(a) {
                    let val: f64 = (0..sd0.dim())
                        .map(|i| v[(i, ka)] * diag[i] * v[(i, kb)])
                        .sum();
                    w[(a, b)] = val;
                    w[(b, a)] = val;
                }
            }
            let eig = SymmetricEigen::new(w);
            Ok(eig
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min))
        }
        EigenvectorStore::Complex(v) => {
            let mut w = DMatrix::<Complex64>::zeros(rank, rank);
            for (a, ka) in range.clone().enumerate() {
                for (b, kb) in range.clone().enumerate().skip(a) {
                    let val: Complex64 = (0..sd0.dim())
                        .map(|i| v[(i, ka)].conj() * diag[i] * v[(i, kb)])
                        .sum();
                    w[(a, b)] = val;
                    w[(b, a)] = val.conj();
                }
            }
            let eig = SymmetricEigen::new(w);
            Ok(eig
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min))
        }
    }
}
