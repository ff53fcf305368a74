//! Finite Hermitian lattice operators on a periodic grid.
//!
//! A `BoxSpec` fixes a d-dimensional torus (d ∈ {1, 2}) of `cells_per_side`
//! unit cells with `points_per_cell` grid points per cell per direction, so
//! the grid spacing is h = 1/points_per_cell. On it we assemble
//!
//! * the background H₀ = −Δ_h + v₀, the (2d)-point finite-difference
//!   Laplacian with 1/h² scaling plus a cell-periodic on-site potential,
//! * for a magnetic field B in 2D, Peierls phases exp(i∫A·dl) on the hops in
//!   the Landau gauge, with a twist row closing the torus; every plaquette
//!   then carries flux B·h², which forces the quantization B·L²/(2π) ∈ ℤ,
//! * diagonal Anderson potentials V(ω)(x) = Σ_j ω_j u(x − j) from a fixed
//!   single-site profile u ≥ 0 translated to every cell and scaled by the
//!   coupling field ω, and the all-ones version Ṽ = Σ_j u(x − j).
//!
//! Everything is dense and desk-sized; the dimension cap keeps eigensolves
//! tractable.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Complex64 = Complex<f64>;

/// Largest matrix dimension the dense eigensolver path accepts.
pub const DENSE_CAP: usize = 4096;

/// Relative Hermiticity tolerance for assembled operators.
pub const HERMITICITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("dimension must be 1 or 2 (got {0})")]
    BadDimension(usize),
    #[error("box has {points} grid points, above the dense cap {cap}")]
    DimensionExceeded { points: usize, cap: usize },
    #[error("cells_per_side and points_per_cell must be at least 1")]
    EmptyBox,
    #[error("magnetic field needs dimension 2 (got dimension {0})")]
    DimensionMismatch(usize),
    #[error("flux B·L²/2π = {0} is not an integer; periodic phases inconsistent")]
    FluxNotQuantized(f64),
    #[error("cell potential needs {expected} samples per cell (got {got})")]
    BadCellPotential { expected: usize, got: usize },
    #[error("single-site potential must be nonnegative, bounded by 1, and somewhere positive")]
    BadProfile,
    #[error("single-site support spans {span} grid points, box side is only {side}")]
    SupportTooLarge { span: usize, side: usize },
    #[error("coupling field has {got} values, box has {expected} cells")]
    CouplingSizeMismatch { expected: usize, got: usize },
    #[error("operation requires a diagonal operator")]
    NotDiagonal,
    #[error("operands have mismatched dimensions {0} and {1}")]
    ShapeMismatch(usize, usize),
}

/// A periodic box: `(cells_per_side · points_per_cell)^dimension` grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub dimension: usize,
    pub cells_per_side: usize,
    pub points_per_cell: usize,
}

impl BoxSpec {
    pub fn new(
        dimension: usize,
        cells_per_side: usize,
        points_per_cell: usize,
    ) -> Result<Self, OperatorError> {
        let spec = BoxSpec {
            dimension,
            cells_per_side,
            points_per_cell,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        if self.dimension == 0 || self.dimension > 2 {
            return Err(OperatorError::BadDimension(self.dimension));
        }
        if self.cells_per_side == 0 || self.points_per_cell == 0 {
            return Err(OperatorError::EmptyBox);
        }
        let points = self.total_points();
        if points > DENSE_CAP {
            return Err(OperatorError::DimensionExceeded {
                points,
                cap: DENSE_CAP,
            });
        }
        Ok(())
    }

    /// Grid points per side: L·n.
    pub fn side_points(&self) -> usize {
        self.cells_per_side * self.points_per_cell
    }

    pub fn total_points(&self) -> usize {
        self.side_points().pow(self.dimension as u32)
    }

    pub fn total_cells(&self) -> usize {
        self.cells_per_side.pow(self.dimension as u32)
    }

    /// Grid spacing h = 1/points_per_cell.
    pub fn spacing(&self) -> f64 {
        1.0 / self.points_per_cell as f64
    }

    /// Physical volume |Λ| = Lᵈ.
    pub fn volume(&self) -> f64 {
        (self.cells_per_side as f64).powi(self.dimension as i32)
    }

    pub fn site_index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.side_points());
        debug_assert!(self.dimension == 2 || y == 0);
        y * self.side_points() + x
    }
}

/// On-site background potential, periodic with the unit cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellPotential {
    Constant {
        value: f64,
    },
    /// `points_per_cell^dimension` samples, row-major within the cell.
    Samples {
        samples: Vec<f64>,
    },
}

impl CellPotential {
    pub fn zero() -> Self {
        CellPotential::Constant { value: 0.0 }
    }

    fn value_at(&self, box_spec: &BoxSpec, x: usize, y: usize) -> f64 {
        match self {
            CellPotential::Constant { value } => *value,
            CellPotential::Samples { samples } => {
                let n = box_spec.points_per_cell;
                samples[(y % n) * n + (x % n)]
            }
        }
    }

    fn validate(&self, box_spec: &BoxSpec) -> Result<(), OperatorError> {
        if let CellPotential::Samples { samples } = self {
            let expected = box_spec.points_per_cell.pow(box_spec.dimension as u32);
            if samples.len() != expected {
                return Err(OperatorError::BadCellPotential {
                    expected,
                    got: samples.len(),
                });
            }
        }
        Ok(())
    }
}

/// A nonnegative compactly supported single-site profile, sampled on the grid
/// of its support. `sup_norm ≤ 1`, strictly positive on a nonempty sub-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleSitePotential {
    pub dimension: usize,
    /// Grid offsets (relative to the cell origin) carrying the profile.
    pub offsets: Vec<(i64, i64)>,
    pub values: Vec<f64>,
    pub support_radius_cells: f64,
    pub sup_norm: f64,
}

impl SingleSitePotential {
    pub fn from_samples(
        dimension: usize,
        offsets: Vec<(i64, i64)>,
        values: Vec<f64>,
        support_radius_cells: f64,
    ) -> Result<Self, OperatorError> {
        if dimension == 0 || dimension > 2 {
            return Err(OperatorError::BadDimension(dimension));
        }
        if offsets.len() != values.len()
            || values.is_empty()
            || values.iter().any(|&v| !(0.0..=1.0).contains(&v))
            || values.iter().all(|&v| v == 0.0)
        {
            return Err(OperatorError::BadProfile);
        }
        let sup_norm = values.iter().cloned().fold(0.0, f64::max);
        Ok(SingleSitePotential {
            dimension,
            offsets,
            values,
            support_radius_cells,
            sup_norm,
        })
    }

    /// Truncated cosine bump of the given radius (in cells): u(x) =
    /// cos(π·|x| / 2r) for |x| ≤ r. For r < 1/2 the translates do not cover
    /// the cell, so Ṽ has zeros between sites.
    pub fn cosine_bump(
        dimension: usize,
        points_per_cell: usize,
        radius_cells: f64,
    ) -> Result<Self, OperatorError> {
        let h = 1.0 / points_per_cell as f64;
        let reach = (radius_cells / h).floor() as i64;
        let mut offsets = Vec::new();
        let mut values = Vec::new();
        let ys: Vec<i64> = if dimension == 2 {
            (-reach..=reach).collect()
        } else {
            vec![0]
        };
        for dy in &ys {
            for dx in -reach..=reach {
                let dist = ((dx as f64 * h).powi(2) + (*dy as f64 * h).powi(2)).sqrt();
                if dist <= radius_cells {
                    offsets.push((dx, *dy));
                    values.push((std::f64::consts::FRAC_PI_2 * dist / radius_cells).cos());
                }
            }
        }
        Self::from_samples(dimension, offsets, values, radius_cells)
    }

    /// Indicator of one unit cell; the translates tile the box exactly, so
    /// Ṽ is the identity.
    pub fn cell_indicator(dimension: usize, points_per_cell: usize) -> Self {
        let n = points_per_cell as i64;
        let mut offsets = Vec::new();
        let ys: Vec<i64> = if dimension == 2 {
            (0..n).collect()
        } else {
            vec![0]
        };
        for dy in &ys {
            for dx in 0..n {
                offsets.push((dx, *dy));
            }
        }
        let values = vec![1.0; offsets.len()];
        SingleSitePotential {
            dimension,
            offsets,
            values,
            support_radius_cells: 1.0,
            sup_norm: 1.0,
        }
    }

    fn span_points(&self) -> usize {
        let lo = self.offsets.iter().map(|o| o.0.min(o.1)).min().unwrap_or(0);
        let hi = self.offsets.iter().map(|o| o.0.max(o.1)).max().unwrap_or(0);
        (hi - lo + 1).max(1) as usize
    }
}

/// Serializable recipe for a `SingleSitePotential`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    CosineBump { radius_cells: f64 },
    CellIndicator,
}

impl PotentialSpec {
    pub fn build(&self, box_spec: &BoxSpec) -> Result<SingleSitePotential, OperatorError> {
        match self {
            PotentialSpec::CosineBump { radius_cells } => SingleSitePotential::cosine_bump(
                box_spec.dimension,
                box_spec.points_per_cell,
                *radius_cells,
            ),
            PotentialSpec::CellIndicator => Ok(SingleSitePotential::cell_indicator(
                box_spec.dimension,
                box_spec.points_per_cell,
            )),
        }
    }
}

/// Random coupling constants ω_j, one per lattice cell, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingField {
    pub values: Vec<f64>,
}

impl CouplingField {
    pub fn constant(box_spec: &BoxSpec, value: f64) -> Self {
        CouplingField {
            values: vec![value; box_spec.total_cells()],
        }
    }

    pub fn from_values(box_spec: &BoxSpec, values: Vec<f64>) -> Result<Self, OperatorError> {
        if values.len() != box_spec.total_cells() {
            return Err(OperatorError::CouplingSizeMismatch {
                expected: box_spec.total_cells(),
                got: values.len(),
            });
        }
        Ok(CouplingField { values })
    }
}

/// Where an operator came from; carried as metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Background,
    AndersonPotential,
    TildePotential,
    Sum,
}

#[derive(Debug, Clone)]
pub enum OperatorRepr {
    DenseReal(DMatrix<f64>),
    DenseComplex(DMatrix<Complex64>),
    Diagonal(DVector<f64>),
}

/// A finite Hermitian operator on the periodic grid.
#[derive(Debug, Clone)]
pub struct LatticeOperator {
    pub repr: OperatorRepr,
    pub box_spec: BoxSpec,
    pub provenance: Provenance,
}

impl LatticeOperator {
    pub fn dim(&self) -> usize {
        match &self.repr {
            OperatorRepr::DenseReal(m) => m.nrows(),
            OperatorRepr::DenseComplex(m) => m.nrows(),
            OperatorRepr::Diagonal(d) => d.len(),
        }
    }

    pub fn is_real(&self) -> bool {
        !matches!(self.repr, OperatorRepr::DenseComplex(_))
    }

    pub fn diagonal_values(&self) -> Result<&DVector<f64>, OperatorError> {
        match &self.repr {
            OperatorRepr::Diagonal(d) => Ok(d),
            _ => Err(OperatorError::NotDiagonal),
        }
    }

    pub fn to_dense_real(&self) -> Option<DMatrix<f64>> {
        match &self.repr {
            OperatorRepr::DenseReal(m) => Some(m.clone()),
            OperatorRepr::Diagonal(d) => Some(DMatrix::from_diagonal(d)),
            OperatorRepr::DenseComplex(_) => None,
        }
    }

    pub fn to_dense_complex(&self) -> DMatrix<Complex64> {
        match &self.repr {
            OperatorRepr::DenseComplex(m) => m.clone(),
            OperatorRepr::DenseReal(m) => m.map(|v| Complex64::new(v, 0.0)),
            OperatorRepr::Diagonal(d) => DMatrix::from_diagonal(&d.map(|v| Complex64::new(v, 0.0))),
        }
    }

    /// max |H − H†| over entries, relative to max |H|.
    pub fn hermiticity_defect(&self) -> f64 {
        match &self.repr {
            OperatorRepr::Diagonal(_) => 0.0,
            OperatorRepr::DenseReal(m) => {
                let scale = m.amax().max(f64::MIN_POSITIVE);
                let mut worst: f64 = 0.0;
                for i in 0..m.nrows() {
                    for j in (i + 1)..m.ncols() {
                        worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
                    }
                }
                worst / scale
            }
            OperatorRepr::DenseComplex(m) => {
                let scale = m.iter().map(|z| z.norm()).fold(f64::MIN_POSITIVE, f64::max);
                let mut worst: f64 = 0.0;
                for i in 0..m.nrows() {
                    for j in i..m.ncols() {
                        worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
                    }
                }
                worst / scale
            }
        }
    }

    /// H + other, promoting to complex if either side is complex.
    pub fn add(&self, other: &LatticeOperator) -> Result<LatticeOperator, OperatorError> {
        if self.dim() != other.dim() {
            return Err(OperatorError::ShapeMismatch(self.dim(), other.dim()));
        }
        let repr = match (&self.repr, &other.repr) {
            (OperatorRepr::Diagonal(a), OperatorRepr::Diagonal(b)) => OperatorRepr::Diagonal(a + b),
            (OperatorRepr::DenseReal(m), OperatorRepr::Diagonal(d))
            | (OperatorRepr::Diagonal(d), OperatorRepr::DenseReal(m)) => {
                let mut out = m.clone();
                for i in 0..d.len() {
                    out[(i, i)] += d[i];
                }
                OperatorRepr::DenseReal(out)
            }
            (OperatorRepr::DenseComplex(m), OperatorRepr::Diagonal(d))
            | (OperatorRepr::Diagonal(d), OperatorRepr::DenseComplex(m)) => {
                let mut out = m.clone();
                for i in 0..d.len() {
                    out[(i, i)] += Complex64::new(d[i], 0.0);
                }
                OperatorRepr::DenseComplex(out)
            }
            (OperatorRepr::DenseReal(a), OperatorRepr::DenseReal(b)) => {
                OperatorRepr::DenseReal(a + b)
            }
            _ => OperatorRepr::DenseComplex(self.to_dense_complex() + other.to_dense_complex()),
        };
        Ok(LatticeOperator {
            repr,
            box_spec: self.box_spec,
            provenance: Provenance::Sum,
        })
    }

    /// Scales the operator by a real factor.
    pub fn scale(&self, factor: f64) -> LatticeOperator {
        let repr = match &self.repr {
            OperatorRepr::DenseReal(m) => OperatorRepr::DenseReal(m * factor),
            OperatorRepr::DenseComplex(m) => {
                OperatorRepr::DenseComplex(m * Complex64::new(factor, 0.0))
            }
            OperatorRepr::Diagonal(d) => OperatorRepr::Diagonal(d * factor),
        };
        LatticeOperator {
            repr,
            box_spec: self.box_spec,
            provenance: self.provenance,
        }
    }
}

/// Number of flux quanta through the torus, B·L²/(2π). Must be an integer for
/// consistent periodic phases.
pub fn flux_quanta(box_spec: &BoxSpec, field_b: f64) -> f64 {
    let side = box_spec.cells_per_side as f64;
    field_b * side * side / (2.0 * std::f64::consts::PI)
}

/// The periodic background H₀ = −Δ_h + v₀ with Peierls phases for B ≠ 0.
pub fn build_background(
    box_spec: &BoxSpec,
    v0: &CellPotential,
    field_b: f64,
) -> Result<LatticeOperator, OperatorError> {
    build_background_with_gauge(box_spec, v0, field_b, (0, 0))
}

/// Same as [`build_background`], with the Landau-gauge origin displaced by
/// whole cells. The spectrum is gauge independent; shifting the origin is a
/// unitary transformation and serves as a consistency check.
pub fn build_background_with_gauge(
    box_spec: &BoxSpec,
    v0: &CellPotential,
    field_b: f64,
    gauge_origin_cells: (i64, i64),
) -> Result<LatticeOperator, OperatorError> {
    box_spec.validate()?;
    v0.validate(box_spec)?;
    let n = box_spec.side_points();
    let inv_h2 = (box_spec.points_per_cell * box_spec.points_per_cell) as f64;

    if field_b != 0.0 {
        if box_spec.dimension != 2 {
            return Err(OperatorError::DimensionMismatch(box_spec.dimension));
        }
        let quanta = flux_quanta(box_spec, field_b);
        if (quanta - quanta.round()).abs() > 1e-9 {
            return Err(OperatorError::FluxNotQuantized(quanta));
        }
    }

    match (box_spec.dimension, field_b) {
        (1, _) => {
            let mut m = DMatrix::<f64>::zeros(n, n);
            for x in 0..n {
                m[(x, x)] += v0.value_at(box_spec, x, 0);
                let xp = (x + 1) % n;
                m[(x, x)] += inv_h2;
                m[(xp, xp)] += inv_h2;
                m[(x, xp)] -= inv_h2;
                m[(xp, x)] -= inv_h2;
            }
            Ok(LatticeOperator {
                repr: OperatorRepr::DenseReal(m),
                box_spec: *box_spec,
                provenance: Provenance::Background,
            })
        }
        (2, 0.0) => {
            let dim = n * n;
            let mut m = DMatrix::<f64>::zeros(dim, dim);
            for y in 0..n {
                for x in 0..n {
                    let i = box_spec.site_index(x, y);
                    m[(i, i)] += v0.value_at(box_spec, x, y);
                    for (xn, yn) in [((x + 1) % n, y), (x, (y + 1) % n)] {
                        let j = box_spec.site_index(xn, yn);
                        m[(i, i)] += inv_h2;
                        m[(j, j)] += inv_h2;
                        m[(i, j)] -= inv_h2;
                        m[(j, i)] -= inv_h2;
                    }
                }
            }
            Ok(LatticeOperator {
                repr: OperatorRepr::DenseReal(m),
                box_spec: *box_spec,
                provenance: Provenance::Background,
            })
        }
        (2, _) => {
            // Landau gauge on the torus: x-hops in row y carry phase
            // −φ·(y−y₀); the y-wrap row carries the compensating twist
            // +φ·N·(x−x₀). Every plaquette then encloses flux φ = B·h²
            // because B·L² ∈ 2πℤ.
            let dim = n * n;
            let phi = field_b / inv_h2;
            let pts = box_spec.points_per_cell as i64;
            let (ox, oy) = (
                (gauge_origin_cells.0 * pts) as f64,
                (gauge_origin_cells.1 * pts) as f64,
            );
            let mut m = DMatrix::<Complex64>::zeros(dim, dim);
            let hop = Complex64::new(inv_h2, 0.0);
            for y in 0..n {
                for x in 0..n {
                    let i = box_spec.site_index(x, y);
                    m[(i, i)] += Complex64::new(v0.value_at(box_spec, x, y) + 4.0 * inv_h2, 0.0);
                    // +x hop
                    let jx = box_spec.site_index((x + 1) % n, y);
                    let theta_x = -phi * (y as f64 - oy);
                    let px = Complex64::from_polar(1.0, theta_x);
                    m[(i, jx)] -= hop * px;
                    m[(jx, i)] -= hop * px.conj();
                    // +y hop
                    let jy = box_spec.site_index(x, (y + 1) % n);
                    let theta_y = if y + 1 == n {
                        phi * n as f64 * (x as f64 - ox)
                    } else {
                        0.0
                    };
                    let py = Complex64::from_polar(1.0, theta_y);
                    m[(i, jy)] -= hop * py;
                    m[(jy, i)] -= hop * py.conj();
                }
            }
            Ok(LatticeOperator {
                repr: OperatorRepr::DenseComplex(m),
                box_spec: *box_spec,
                provenance: Provenance::Background,
            })
        }
        (d, _) => Err(OperatorError::BadDimension(d)),
    }
}

fn accumulate_profile(
    box_spec: &BoxSpec,
    u: &SingleSitePotential,
    weight_of_cell: impl Fn(usize) -> f64,
) -> Result<DVector<f64>, OperatorError> {
    let n = box_spec.side_points();
    if u.span_points() > n {
        return Err(OperatorError::SupportTooLarge {
            span: u.span_points(),
            side: n,
        });
    }
    if u.dimension != box_spec.dimension {
        return Err(OperatorError::BadDimension(u.dimension));
    }
    let pts = box_spec.points_per_cell as i64;
    let cells = box_spec.cells_per_side as i64;
    let mut diag = DVector::<f64>::zeros(box_spec.total_points());
    let wrap = |v: i64| -> usize { v.rem_euclid(n as i64) as usize };
    match box_spec.dimension {
        1 => {
            for jc in 0..cells {
                let w = weight_of_cell(jc as usize);
                if w == 0.0 {
                    continue;
                }
                for (k, &(dx, _)) in u.offsets.iter().enumerate() {
                    diag[wrap(jc * pts + dx)] += w * u.values[k];
                }
            }
        }
        2 => {
            for jy in 0..cells {
                for jx in 0..cells {
                    let w = weight_of_cell((jy * cells + jx) as usize);
                    if w == 0.0 {
                        continue;
                    }
                    for (k, &(dx, dy)) in u.offsets.iter().enumerate() {
                        let gx = wrap(jx * pts + dx);
                        let gy = wrap(jy * pts + dy);
                        diag[box_spec.site_index(gx, gy)] += w * u.values[k];
                    }
                }
            }
        }
        d => return Err(OperatorError::BadDimension(d)),
    }
    Ok(diag)
}

/// The random Anderson potential V(ω)(x) = Σ_j ω_j u(x − j), diagonal and
/// exactly linear in the couplings.
pub fn assemble_anderson(
    box_spec: &BoxSpec,
    u: &SingleSitePotential,
    couplings: &CouplingField,
) -> Result<LatticeOperator, OperatorError> {
    if couplings.values.len() != box_spec.total_cells() {
        return Err(OperatorError::CouplingSizeMismatch {
            expected: box_spec.total_cells(),
            got: couplings.values.len(),
        });
    }
    let diag = accumulate_profile(box_spec, u, |c| couplings.values[c])?;
    Ok(LatticeOperator {
        repr: OperatorRepr::Diagonal(diag),
        box_spec: *box_spec,
        provenance: Provenance::AndersonPotential,
    })
}

/// Ṽ(x) = Σ_j u(x − j): every coupling set to one. Nonnegative entrywise.
pub fn assemble_tilde(
    box_spec: &BoxSpec,
    u: &SingleSitePotential,
) -> Result<LatticeOperator, OperatorError> {
    let diag = accumulate_profile(box_spec, u, |_| 1.0)?;
    Ok(LatticeOperator {
        repr: OperatorRepr::Diagonal(diag),
        box_spec: *box_spec,
        provenance: Provenance::TildePotential,
    })
}

/// The constant D₀ in 0 ≤ Ṽ² ≤ D₀·Ṽ. For a diagonal nonnegative operator the
/// best constant is the largest diagonal entry, and the certificate is exact.
pub fn d0_constant(tilde: &LatticeOperator) -> Result<f64, OperatorError> {
    let d = tilde.diagonal_values()?;
    if d.iter().any(|&v| v < 0.0) {
        return Err(OperatorError::BadProfile);
    }
    Ok(d.iter().cloned().fold(0.0, f64::max))
}
