//! Single-site probability measures and their modulus of continuity.
//!
//! The coupling constants of the random potential are drawn from a compactly
//! supported probability measure μ. Everything downstream (Wegner statistics,
//! continuity of the integrated density of states) is controlled by the
//! modulus
//!
//! ```text
//!     s(ε) = sup_E  μ([E, E + ε]),
//! ```
//!
//! the worst-case mass μ gives to any window of width ε. Four families cover
//! the regimes of interest:
//!
//! * `UniformDensity` — bounded density, s(ε) ∝ ε (Lipschitz),
//! * `PiecewiseLinearDensity` — bounded density with structure, still Lipschitz,
//! * `CantorMeasure` — singular continuous, s(3⁻ᵏ) = 2⁻ᵏ, Hölder exponent
//!   log 2 / log 3 ≈ 0.6309,
//! * `Atomic` — point masses; s(ε) never decays below the largest atom.
//!
//! `ToeplitzCorrelated` wraps a base measure with a finite-range linear
//! filter η_j = Σ_k α_k ω_{j−k}. Conditioned on all other variables, η_j is
//! an affine pushforward of the base law, so its conditional modulus is
//! s_η(ε) = s_base(ε / |α₀|).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute slack allowed when checking that a measure has total mass one.
pub const MASS_TOL: f64 = 1e-12;

/// Deepest Cantor refinement used when evaluating the modulus. Beyond ~26
/// levels the f64 ternary walk loses exactness faster than the bound 2·2⁻ᵈ
/// shrinks, so the supremum search stops refining there.
const CANTOR_SUP_MAX_DEPTH: u32 = 26;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("support endpoints must satisfy lo < hi (got {lo}..{hi})")]
    EmptySupport { lo: f64, hi: f64 },
    #[error("total mass must be 1 within {MASS_TOL:e} (got {got})")]
    MassNotNormalized { got: f64 },
    #[error("piecewise-linear knots must be strictly increasing with at least two points")]
    BadKnots,
    #[error("density values must be nonnegative and finite")]
    NegativeDensity,
    #[error("Cantor depth must lie in 1..=48 (got {0})")]
    DepthOutOfRange(u32),
    #[error("atomic measure needs at least one atom with nonnegative weights")]
    BadAtoms,
    #[error("correlated filter needs a nonzero coefficient at offset zero")]
    ZeroCentralCoefficient,
    #[error("correlated filter violates Σ_{{j≠0}} |α_j| < |α₀| ({off_sum} ≥ {central})")]
    DominanceViolated { off_sum: f64, central: f64 },
    #[error("correlated filters do not nest")]
    NestedCorrelated,
    #[error("duplicate offset in correlated filter")]
    DuplicateOffset,
    #[error("epsilon must be positive (got {0})")]
    NonPositiveEpsilon(f64),
}

/// One coefficient of the finite-range filter defining a correlated process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficient {
    /// Lattice offset of the coefficient (d-dimensional).
    pub offset: Vec<i64>,
    pub alpha: f64,
}

/// A single-site probability law with compact support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    UniformDensity {
        lo: f64,
        hi: f64,
    },
    /// Continuous piecewise-linear density through `knots = [(x, f(x))]`,
    /// zero outside the knot range.
    PiecewiseLinearDensity {
        knots: Vec<(f64, f64)>,
    },
    /// The middle-thirds Cantor measure, sampled to `depth` ternary digits.
    CantorMeasure {
        depth: u32,
    },
    Atomic {
        atoms: Vec<(f64, f64)>,
    },
    /// η_j = Σ_k α_k ω_{j−k} with ω iid from `base`.
    ToeplitzCorrelated {
        base: Box<MeasureSpec>,
        gamma_coeffs: Vec<FilterCoefficient>,
    },
}

/// A modulus evaluation: a value plus a guaranteed absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modulus {
    pub value: f64,
    pub error_bound: f64,
}

impl MeasureSpec {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self, MeasureError> {
        let m = MeasureSpec::UniformDensity { lo, hi };
        m.validate()?;
        Ok(m)
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self, MeasureError> {
        let m = MeasureSpec::PiecewiseLinearDensity { knots };
        m.validate()?;
        Ok(m)
    }

    pub fn cantor(depth: u32) -> Result<Self, MeasureError> {
        let m = MeasureSpec::CantorMeasure { depth };
        m.validate()?;
        Ok(m)
    }

    pub fn atomic(atoms: Vec<(f64, f64)>) -> Result<Self, MeasureError> {
        let m = MeasureSpec::Atomic { atoms };
        m.validate()?;
        Ok(m)
    }

    pub fn toeplitz(
        base: MeasureSpec,
        gamma_coeffs: Vec<FilterCoefficient>,
    ) -> Result<Self, MeasureError> {
        let m = MeasureSpec::ToeplitzCorrelated {
            base: Box::new(base),
            gamma_coeffs,
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks every construction invariant; deserialized specs must pass
    /// through here before use.
    pub fn validate(&self) -> Result<(), MeasureError> {
        match self {
            MeasureSpec::UniformDensity { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(MeasureError::EmptySupport { lo: *lo, hi: *hi });
                }
                Ok(())
            }
            MeasureSpec::PiecewiseLinearDensity { knots } => {
                if knots.len() < 2 || knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(MeasureError::BadKnots);
                }
                if knots
                    .iter()
                    .any(|&(x, f)| !x.is_finite() || !f.is_finite() || f < 0.0)
                {
                    return Err(MeasureError::NegativeDensity);
                }
                let mass: f64 = knots
                    .windows(2)
                    .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
                    .sum();
                if (mass - 1.0).abs() > MASS_TOL {
                    return Err(MeasureError::MassNotNormalized { got: mass });
                }
                Ok(())
            }
            MeasureSpec::CantorMeasure { depth } => {
                if *depth == 0 || *depth > 48 {
                    return Err(MeasureError::DepthOutOfRange(*depth));
                }
                Ok(())
            }
            MeasureSpec::Atomic { atoms } => {
                if atoms.is_empty()
                    || atoms
                        .iter()
                        .any(|&(x, w)| !x.is_finite() || !w.is_finite() || w < 0.0)
                {
                    return Err(MeasureError::BadAtoms);
                }
                let mass: f64 = atoms.iter().map(|&(_, w)| w).sum();
                if (mass - 1.0).abs() > MASS_TOL {
                    return Err(MeasureError::MassNotNormalized { got: mass });
                }
                Ok(())
            }
            MeasureSpec::ToeplitzCorrelated { base, gamma_coeffs } => {
                if matches!(**base, MeasureSpec::ToeplitzCorrelated { .. }) {
                    return Err(MeasureError::NestedCorrelated);
                }
                base.validate()?;
                let mut seen: Vec<&[i64]> = Vec::new();
                for c in gamma_coeffs {
                    if seen.iter().any(|o| *o == c.offset.as_slice()) {
                        return Err(MeasureError::DuplicateOffset);
                    }
                    seen.push(&c.offset);
                }
                let central = self.central_alpha().unwrap_or(0.0);
                if central == 0.0 {
                    return Err(MeasureError::ZeroCentralCoefficient);
                }
                let off_sum: f64 = gamma_coeffs
                    .iter()
                    .filter(|c| c.offset.iter().any(|&o| o != 0))
                    .map(|c| c.alpha.abs())
                    .sum();
                if off_sum >= central.abs() {
                    return Err(MeasureError::DominanceViolated {
                        off_sum,
                        central: central.abs(),
                    });
                }
                Ok(())
            }
        }
    }

    fn central_alpha(&self) -> Option<f64> {
        match self {
            MeasureSpec::ToeplitzCorrelated { gamma_coeffs, .. } => gamma_coeffs
                .iter()
                .find(|c| c.offset.iter().all(|&o| o == 0))
                .map(|c| c.alpha),
            _ => None,
        }
    }

    /// Support interval [m₀, M₀].
    pub fn support(&self) -> (f64, f64) {
        match self {
            MeasureSpec::UniformDensity { lo, hi } => (*lo, *hi),
            MeasureSpec::PiecewiseLinearDensity { knots } => (knots[0].0, knots[knots.len() - 1].0),
            MeasureSpec::CantorMeasure { .. } => (0.0, 1.0),
            MeasureSpec::Atomic { atoms } => {
                let lo = atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
                let hi = atoms.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
            MeasureSpec::ToeplitzCorrelated { base, gamma_coeffs } => {
                let (blo, bhi) = base.support();
                let mut lo = 0.0;
                let mut hi = 0.0;
                for c in gamma_coeffs {
                    lo += (c.alpha * blo).min(c.alpha * bhi);
                    hi += (c.alpha * blo).max(c.alpha * bhi);
                }
                (lo, hi)
            }
        }
    }

    /// Draws one value. Deterministic given the stream state; the result lies
    /// in `support()`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MeasureSpec::UniformDensity { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            MeasureSpec::PiecewiseLinearDensity { knots } => {
                sample_piecewise_linear(knots, rng.random::<f64>())
            }
            MeasureSpec::CantorMeasure { depth } => {
                // x = Σ d_k 3⁻ᵏ with d_k ∈ {0, 2} fair; Horner from the last digit.
                let mut x = 0.0;
                for _ in 0..*depth {
                    let digit = if rng.random::<bool>() { 2.0 } else { 0.0 };
                    x = (x + digit) / 3.0;
                }
                x
            }
            MeasureSpec::Atomic { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(x, w) in atoms {
                    acc += w;
                    if u < acc {
                        return x;
                    }
                }
                atoms[atoms.len() - 1].0
            }
            MeasureSpec::ToeplitzCorrelated { base, gamma_coeffs } => gamma_coeffs
                .iter()
                .map(|c| c.alpha * base.sample(rng))
                .sum(),
        }
    }

    /// Cumulative distribution function, where a closed form exists.
    /// The correlated marginal has no closed form and returns `None`.
    pub fn cdf(&self, x: f64) -> Option<f64> {
        match self {
            MeasureSpec::UniformDensity { lo, hi } => Some(((x - lo) / (hi - lo)).clamp(0.0, 1.0)),
            MeasureSpec::PiecewiseLinearDensity { knots } => Some(piecewise_linear_cdf(knots, x)),
            MeasureSpec::CantorMeasure { .. } => Some(cantor_cdf(x)),
            MeasureSpec::Atomic { atoms } => Some(
                atoms
                    .iter()
                    .filter(|&&(a, _)| a <= x)
                    .map(|&(_, w)| w)
                    .sum(),
            ),
            MeasureSpec::ToeplitzCorrelated { .. } => None,
        }
    }

    /// The modulus of continuity s(ε) = sup_E μ([E, E+ε]), with a guaranteed
    /// absolute error bound. For the correlated family this is the modulus of
    /// the conditional law, s_base(ε / |α₀|).
    pub fn modulus_s(&self, epsilon: f64) -> Result<Modulus, MeasureError> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(MeasureError::NonPositiveEpsilon(epsilon));
        }
        Ok(match self {
            MeasureSpec::UniformDensity { lo, hi } => Modulus {
                value: (epsilon / (hi - lo)).min(1.0),
                error_bound: 0.0,
            },
            MeasureSpec::PiecewiseLinearDensity { knots } => Modulus {
                value: piecewise_linear_sup_window(knots, epsilon),
                error_bound: 0.0,
            },
            MeasureSpec::CantorMeasure { depth } => {
                cantor_sup_window(epsilon, (*depth).min(CANTOR_SUP_MAX_DEPTH))
            }
            MeasureSpec::Atomic { atoms } => Modulus {
                value: atomic_sup_window(atoms, epsilon),
                error_bound: 0.0,
            },
            MeasureSpec::ToeplitzCorrelated { base, .. } => {
                let a0 = self.central_alpha().expect("validated filter").abs();
                base.modulus_s(epsilon / a0)?
            }
        })
    }

    /// Conditional law of η_j = Σ_k α_k ω_{j−k} given every other variable:
    /// the pushforward of the base measure under ω ↦ α₀ ω + c. The shift c
    /// depends on the conditioning values and is irrelevant for the modulus,
    /// so the representative with c = 0 is returned.
    pub fn effective_conditional_measure(&self) -> Result<MeasureSpec, MeasureError> {
        let MeasureSpec::ToeplitzCorrelated { base, .. } = self else {
            return Err(MeasureError::ZeroCentralCoefficient);
        };
        let a0 = self
            .central_alpha()
            .ok_or(MeasureError::ZeroCentralCoefficient)?;
        if a0 == 0.0 {
            return Err(MeasureError::ZeroCentralCoefficient);
        }
        let out = match &**base {
            MeasureSpec::UniformDensity { lo, hi } => MeasureSpec::UniformDensity {
                lo: (a0 * lo).min(a0 * hi),
                hi: (a0 * lo).max(a0 * hi),
            },
            MeasureSpec::PiecewiseLinearDensity { knots } => {
                let mut mapped: Vec<(f64, f64)> =
                    knots.iter().map(|&(x, f)| (a0 * x, f / a0.abs())).collect();
                if a0 < 0.0 {
                    mapped.reverse();
                }
                MeasureSpec::PiecewiseLinearDensity { knots: mapped }
            }
            MeasureSpec::Atomic { atoms } => MeasureSpec::Atomic {
                atoms: atoms.iter().map(|&(x, w)| (a0 * x, w)).collect(),
            },
            MeasureSpec::CantorMeasure { depth } => {
                if a0.abs() == 1.0 {
                    // The Cantor set and measure are symmetric about 1/2, so
                    // reflection (α₀ = −1) leaves the law unchanged up to the
                    // irrelevant shift.
                    MeasureSpec::CantorMeasure { depth: *depth }
                } else {
                    // A rescaled Cantor measure is not one of the base kinds;
                    // represent it as the degenerate one-coefficient filter.
                    MeasureSpec::ToeplitzCorrelated {
                        base: Box::new(MeasureSpec::CantorMeasure { depth: *depth }),
                        gamma_coeffs: vec![FilterCoefficient {
                            offset: vec![0],
                            alpha: a0,
                        }],
                    }
                }
            }
            MeasureSpec::ToeplitzCorrelated { .. } => return Err(MeasureError::NestedCorrelated),
        };
        out.validate()?;
        Ok(out)
    }
}

/// Modulus values tabulated over a sorted grid of window widths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulusCurve {
    pub epsilons: Vec<f64>,
    pub s_values: Vec<f64>,
    pub error_bounds: Vec<f64>,
}

/// Evaluates s(ε) on a grid. The grid must be sorted ascending and positive.
pub fn modulus_curve(
    measure: &MeasureSpec,
    epsilons: &[f64],
) -> Result<ModulusCurve, MeasureError> {
    if epsilons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MeasureError::BadKnots);
    }
    let mut s_values = Vec::with_capacity(epsilons.len());
    let mut error_bounds = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let m = measure.modulus_s(eps)?;
        s_values.push(m.value);
        error_bounds.push(m.error_bound);
    }
    Ok(ModulusCurve {
        epsilons: epsilons.to_vec(),
        s_values,
        error_bounds,
    })
}

fn sample_piecewise_linear(knots: &[(f64, f64)], u: f64) -> f64 {
    // Inverse CDF: locate the segment, then invert the quadratic piece.
    let mut acc = 0.0;
    for w in knots.windows(2) {
        let (x0, f0) = w[0];
        let (x1, f1) = w[1];
        let dx = x1 - x0;
        let seg = 0.5 * (f0 + f1) * dx;
        if u <= acc + seg || w[1].0 == knots[knots.len() - 1].0 {
            let target = (u - acc).clamp(0.0, seg);
            let slope = (f1 - f0) / dx;
            let t = if slope.abs() * dx < 1e-14 * (f0 + 1.0) {
                if f0 > 0.0 {
                    target / f0
                } else {
                    0.0
                }
            } else {
                let disc = (f0 * f0 + 2.0 * slope * target).max(0.0);
                (disc.sqrt() - f0) / slope
            };
            return x0 + t.clamp(0.0, dx);
        }
        acc += seg;
    }
    knots[knots.len() - 1].0
}

fn piecewise_linear_cdf(knots: &[(f64, f64)], x: f64) -> f64 {
    if x <= knots[0].0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for w in knots.windows(2) {
        let (x0, f0) = w[0];
        let (x1, f1) = w[1];
        if x >= x1 {
            acc += 0.5 * (f0 + f1) * (x1 - x0);
            continue;
        }
        let t = x - x0;
        let slope = (f1 - f0) / (x1 - x0);
        return acc + f0 * t + 0.5 * slope * t * t;
    }
    acc
}

fn piecewise_linear_density(knots: &[(f64, f64)], x: f64) -> f64 {
    if x < knots[0].0 || x > knots[knots.len() - 1].0 {
        return 0.0;
    }
    for w in knots.windows(2) {
        if x <= w[1].0 {
            let t = (x - w[0].0) / (w[1].0 - w[0].0);
            return w[0].1 + t * (w[1].1 - w[0].1);
        }
    }
    knots[knots.len() - 1].1
}

/// Exact sup of the sliding-window mass for a piecewise-linear density.
///
/// W(E) = CDF(E+ε) − CDF(E) is piecewise quadratic with breakpoints wherever
/// E or E+ε crosses a knot; the maximum is attained at a breakpoint or at an
/// interior zero of W′(E) = f(E+ε) − f(E).
fn piecewise_linear_sup_window(knots: &[(f64, f64)], eps: f64) -> f64 {
    let lo = knots[0].0;
    let hi = knots[knots.len() - 1].0;
    let mut breaks: Vec<f64> = Vec::with_capacity(2 * knots.len() + 2);
    for &(x, _) in knots {
        breaks.push(x);
        breaks.push(x - eps);
    }
    breaks.push(lo - eps);
    breaks.push(hi);
    breaks.retain(|&b| b >= lo - eps && b <= hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let window = |e: f64| piecewise_linear_cdf(knots, e + eps) - piecewise_linear_cdf(knots, e);
    let mut best: f64 = 0.0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        best = best.max(window(a)).max(window(b));
        // Interior stationary point: f(E+ε) − f(E) is linear on (a, b).
        let ga = piecewise_linear_density(knots, a + eps) - piecewise_linear_density(knots, a);
        let gb = piecewise_linear_density(knots, b + eps) - piecewise_linear_density(knots, b);
        if (ga > 0.0 && gb < 0.0) || (ga < 0.0 && gb > 0.0) {
            let t = ga / (ga - gb);
            best = best.max(window(a + t * (b - a)));
        }
    }
    best.min(1.0)
}

fn atomic_sup_window(atoms: &[(f64, f64)], eps: f64) -> f64 {
    let mut sorted: Vec<(f64, f64)> = atoms.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = 0.0f64;
    for i in 0..sorted.len() {
        let e = sorted[i].0;
        let mass: f64 = sorted[i..]
            .iter()
            .take_while(|&&(x, _)| x <= e + eps)
            .map(|&(_, w)| w)
            .sum();
        best = best.max(mass);
    }
    best.min(1.0)
}

/// The Cantor CDF (devil's staircase), evaluated by the ternary walk.
pub fn cantor_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let mut x = x;
    let mut f = 0.0;
    let mut w = 1.0f64;
    for _ in 0..64 {
        let y = 3.0 * x;
        if y < 1.0 {
            w *= 0.5;
            x = y;
        } else if y <= 2.0 {
            return f + 0.5 * w;
        } else {
            f += 0.5 * w;
            w *= 0.5;
            x = y - 2.0;
        }
        if w < f64::EPSILON {
            break;
        }
    }
    f
}

/// sup_E μ_C([E, E+ε]) for the middle-thirds Cantor measure, by branch and
/// bound over candidate left-edge cells, certified to 2·2⁻ᵈᵉᵖᵗʰ.
///
/// Self-similarity reduces to ε ∈ [1/3, 1): a window shorter than 3⁻ᵏ cannot
/// bridge a level-k gap, so it meets at most one level-k cell and
/// S(ε) = 2⁻ᵏ S(3ᵏ ε).
fn cantor_sup_window(eps: f64, depth: u32) -> Modulus {
    if eps >= 1.0 {
        return Modulus {
            value: 1.0,
            error_bound: 0.0,
        };
    }
    let mut scale = 1.0f64;
    let mut e = eps;
    while e < 1.0 / 3.0 {
        e *= 3.0;
        scale *= 0.5;
    }

    // Nodes are Cantor cells [a, a + 3⁻ᵏ] constraining the window's left edge.
    // Gap positions are dominated by the adjacent cell's left endpoint.
    struct Node {
        a: f64,
        len: f64,
        level: u32,
        upper: f64,
    }
    let window = |e0: f64| cantor_cdf(e0 + e) - cantor_cdf(e0);
    let mut best = window(0.0).max(window(2.0 / 3.0));
    let target_gap = (2.0f64).powi(-(depth as i32));
    let mut nodes: Vec<Node> = vec![
        Node {
            a: 0.0,
            len: 1.0 / 3.0,
            level: 1,
            upper: cantor_cdf(1.0 / 3.0 + e),
        },
        Node {
            a: 2.0 / 3.0,
            len: 1.0 / 3.0,
            level: 1,
            upper: 1.0 - cantor_cdf(2.0 / 3.0),
        },
    ];
    let mut achieved_gap = 1.0f64;
    while let Some(idx) = nodes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.upper.total_cmp(&b.1.upper))
        .map(|(i, _)| i)
    {
        let node = nodes.swap_remove(idx);
        achieved_gap = (node.upper - best).max(0.0);
        if node.upper <= best + target_gap {
            break;
        }
        if node.level >= depth {
            // Cannot refine further; accept the residual gap.
            break;
        }
        let child_len = node.len / 3.0;
        for a in [node.a, node.a + 2.0 * child_len] {
            let val = window(a);
            best = best.max(val);
            let upper = cantor_cdf(a + child_len + e) - cantor_cdf(a);
            if upper > best {
                nodes.push(Node {
                    a,
                    len: child_len,
                    level: node.level + 1,
                    upper,
                });
            }
        }
    }
    Modulus {
        value: (best * scale).min(1.0),
        error_bound: (achieved_gap.min(2.0 * target_gap) * scale).max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::substream;

    fn coeff(offset: i64, alpha: f64) -> FilterCoefficient {
        FilterCoefficient {
            offset: vec![offset],
            alpha,
        }
    }

    #[test]
    fn uniform_modulus_closed_form() {
        let m = MeasureSpec::uniform(0.0, 1.0).unwrap();
        let s = m.modulus_s(0.25).unwrap();
        assert_eq!(s.value, 0.25);
        assert_eq!(s.error_bound, 0.0);
        assert_eq!(m.modulus_s(3.0).unwrap().value, 1.0);
    }

    #[test]
    fn atomic_modulus_dominated_by_largest_atom() {
        let m = MeasureSpec::atomic(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let s = m.modulus_s(0.1).unwrap();
        assert_eq!(s.value, 0.5);
        // Window wide enough to catch both atoms.
        assert_eq!(m.modulus_s(1.5).unwrap().value, 1.0);
        // Never below the max atom weight, however small the window.
        let m2 = MeasureSpec::atomic(vec![(0.0, 0.7), (0.5, 0.3)]).unwrap();
        assert!(m2.modulus_s(1e-9).unwrap().value >= 0.7);
    }

    #[test]
    fn cantor_cdf_reference_points() {
        assert_eq!(cantor_cdf(1.0 / 3.0), 0.5);
        assert_eq!(cantor_cdf(0.5), 0.5);
        assert_eq!(cantor_cdf(2.0 / 3.0), 0.5);
        assert_eq!(cantor_cdf(1.0 / 9.0), 0.25);
        assert_eq!(cantor_cdf(7.0 / 9.0), 0.75);
        assert_eq!(cantor_cdf(1.0), 1.0);
    }

    #[test]
    fn cantor_modulus_self_similar_values() {
        let m = MeasureSpec::cantor(30).unwrap();
        // s(3⁻ᵏ) = 2⁻ᵏ; a level-k cell of length 3⁻ᵏ carries mass 2⁻ᵏ and
        // adjacent cells are separated by gaps of at least 3⁻ᵏ.
        let s = m.modulus_s(1.0 / 27.0).unwrap();
        assert!(
            (s.value - 0.125).abs() <= s.error_bound + 1e-10,
            "s(1/27) = {} (expected 1/8)",
            s.value
        );
        for k in 1..=8u32 {
            let eps = 3.0f64.powi(-(k as i32));
            let s = m.modulus_s(eps).unwrap();
            let expected = 2.0f64.powi(-(k as i32));
            assert!(
                (s.value.log2() + k as f64).abs() < 1e-4,
                "k={k}: s={} expected {expected}",
                s.value
            );
        }
    }

    #[test]
    fn cantor_holder_exponent_fit() {
        let m = MeasureSpec::cantor(30).unwrap();
        // Least-squares slope of log s(3⁻ᵏ) against log 3⁻ᵏ for k = 2..8.
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in 2..=8 {
            let eps = 3.0f64.powi(-k);
            xs.push(eps.ln());
            ys.push(m.modulus_s(eps).unwrap().value.ln());
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let slope = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        let alpha = 2.0f64.ln() / 3.0f64.ln();
        assert!(
            (slope - alpha).abs() < 0.01,
            "fitted Hölder exponent {slope}, expected {alpha}"
        );
    }

    #[test]
    fn piecewise_linear_tent_modulus() {
        // Tent density on [0, 2] peaking at 1: f(x) = x on [0,1], 2−x on [1,2].
        let m = MeasureSpec::piecewise_linear(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
        // Best window of width 0.5 is centered at the peak:
        // mass = ∫_{0.75}^{1.25} f = 2 * (0.5*1 - 0.5*0.75²) = 0.4375.
        let s = m.modulus_s(0.5).unwrap();
        assert!((s.value - 0.4375).abs() < 1e-12, "got {}", s.value);
        assert_eq!(m.modulus_s(5.0).unwrap().value, 1.0);
    }

    #[test]
    fn modulus_monotone_in_epsilon() {
        let measures = [
            MeasureSpec::uniform(-1.0, 3.0).unwrap(),
            MeasureSpec::piecewise_linear(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap(),
            MeasureSpec::cantor(24).unwrap(),
            MeasureSpec::atomic(vec![(0.1, 0.2), (0.4, 0.5), (0.9, 0.3)]).unwrap(),
        ];
        let grid = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
        for m in &measures {
            let curve = modulus_curve(m, &grid).unwrap();
            for i in 1..grid.len() {
                assert!(
                    curve.s_values[i - 1]
                        <= curve.s_values[i] + curve.error_bounds[i - 1] + curve.error_bounds[i],
                    "monotonicity violated for {m:?} at {}",
                    grid[i]
                );
            }
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(MeasureSpec::uniform(1.0, 1.0).is_err());
        assert!(MeasureSpec::atomic(vec![(0.0, 0.6), (1.0, 0.6)]).is_err());
        assert!(MeasureSpec::piecewise_linear(vec![(0.0, 1.0)]).is_err());
        assert!(MeasureSpec::piecewise_linear(vec![(0.0, 2.0), (1.0, -1.0)]).is_err());
        assert!(MeasureSpec::cantor(0).is_err());
        // Dominance condition.
        let base = MeasureSpec::uniform(0.0, 1.0).unwrap();
        assert!(MeasureSpec::toeplitz(base.clone(), vec![coeff(0, 1.0), coeff(1, 1.0)]).is_err());
        assert!(MeasureSpec::toeplitz(base.clone(), vec![coeff(1, 1.0)]).is_err());
        assert!(MeasureSpec::toeplitz(base.clone(), vec![coeff(0, 1.0), coeff(1, 0.5)]).is_ok());
        let nested = MeasureSpec::toeplitz(base.clone(), vec![coeff(0, 1.0)]).unwrap();
        assert!(MeasureSpec::toeplitz(nested, vec![coeff(0, 1.0)]).is_err());
        assert!(base.modulus_s(0.0).is_err());
        assert!(base.modulus_s(-1.0).is_err());
    }

    #[test]
    fn conditional_measure_affine_pushforward() {
        let base = MeasureSpec::uniform(0.0, 1.0).unwrap();
        let corr = MeasureSpec::toeplitz(base.clone(), vec![coeff(0, 2.0), coeff(1, 0.5)]).unwrap();
        let cond = corr.effective_conditional_measure().unwrap();
        assert_eq!(cond, MeasureSpec::UniformDensity { lo: 0.0, hi: 2.0 });
        // s_η(ε) = min(ε/2, 1), both via the wrapper and via the pushforward.
        for eps in [0.1, 0.5, 1.0, 4.0] {
            let via_corr = corr.modulus_s(eps).unwrap().value;
            let via_cond = cond.modulus_s(eps).unwrap().value;
            assert!((via_corr - (eps / 2.0).min(1.0)).abs() < 1e-12);
            assert!((via_corr - via_cond).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_measure_identity_case() {
        let base = MeasureSpec::uniform(0.0, 1.0).unwrap();
        let corr = MeasureSpec::toeplitz(base.clone(), vec![coeff(0, 1.0)]).unwrap();
        assert_eq!(corr.effective_conditional_measure().unwrap(), base);
    }

    #[test]
    fn conditional_measure_cantor_preserves_modulus() {
        let base = MeasureSpec::cantor(26).unwrap();
        let corr = MeasureSpec::toeplitz(base.clone(), vec![coeff(0, 1.0), coeff(1, 0.1)]).unwrap();
        let cond = corr.effective_conditional_measure().unwrap();
        for k in 1..=6 {
            let eps = 3.0f64.powi(-k);
            let expected = 2.0f64.powi(-k);
            let s = cond.modulus_s(eps).unwrap();
            assert!(
                (s.value - expected).abs() <= s.error_bound + 1e-9,
                "k={k}: {} vs {expected}",
                s.value
            );
        }
    }

    #[test]
    fn samples_stay_in_support() {
        let measures = [
            MeasureSpec::uniform(0.0, 1.0).unwrap(),
            MeasureSpec::piecewise_linear(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap(),
            MeasureSpec::cantor(30).unwrap(),
            MeasureSpec::atomic(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap(),
            MeasureSpec::toeplitz(
                MeasureSpec::uniform(0.0, 1.0).unwrap(),
                vec![coeff(0, 2.0), coeff(1, -0.5)],
            )
            .unwrap(),
        ];
        for m in &measures {
            let (lo, hi) = m.support();
            let mut rng = substream(7, &[0]);
            for _ in 0..2000 {
                let x = m.sample(&mut rng);
                assert!(
                    x >= lo - 1e-12 && x <= hi + 1e-12,
                    "sample {x} outside [{lo}, {hi}] for {m:?}"
                );
            }
        }
    }

    #[test]
    fn atomic_samples_hit_atoms_only() {
        let m = MeasureSpec::atomic(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let mut rng = substream(3, &[1]);
        for _ in 0..200 {
            let x = m.sample(&mut rng);
            assert!(x == 0.0 || x == 1.0);
        }
    }

    #[test]
    fn cantor_samples_resolve_ternary_digits() {
        // Every sample must be a left endpoint of a level-`depth` cell: all
        // ternary digits in {0, 2} down to resolution 3⁻ᵈᵉᵖᵗʰ.
        let depth = 30;
        let m = MeasureSpec::cantor(depth).unwrap();
        let mut rng = substream(11, &[4]);
        for _ in 0..500 {
            let mut x = m.sample(&mut rng);
            for level in 0..depth {
                let y = 3.0 * x;
                let digit = y.floor().min(2.0);
                assert!(
                    digit != 1.0 || y - 1.0 < 1e-9 * 3.0f64.powi(level as i32),
                    "middle-third digit at level {level}"
                );
                x = y - digit;
            }
        }
    }

    #[test]
    fn kolmogorov_distance_of_empirical_cdf() {
        // 10⁵ samples; KS distance below 0.01 for every closed-form family.
        let measures = [
            MeasureSpec::uniform(0.0, 1.0).unwrap(),
            MeasureSpec::piecewise_linear(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap(),
            MeasureSpec::cantor(40).unwrap(),
            MeasureSpec::atomic(vec![(0.0, 0.3), (0.25, 0.3), (1.0, 0.4)]).unwrap(),
        ];
        for m in &measures {
            let n = 100_000usize;
            let mut rng = substream(2024, &[9]);
            let mut xs: Vec<f64> = (0..n).map(|_| m.sample(&mut rng)).collect();
            xs.sort_by(f64::total_cmp);
            // Two-sided comparison at distinct values so that atoms (tied
            // samples) are matched against the CDF jump, not its midpoint.
            let mut ks: f64 = 0.0;
            let mut i = 0;
            while i < n {
                let v = xs[i];
                let mut j = i;
                while j < n && xs[j] == v {
                    j += 1;
                }
                let f_hi = m.cdf(v).unwrap();
                let f_lo = m.cdf(v - 1e-9 * (1.0 + v.abs())).unwrap();
                ks = ks.max((f_hi - j as f64 / n as f64).abs());
                ks = ks.max((f_lo - i as f64 / n as f64).abs());
                i = j;
            }
            assert!(ks < 0.01, "KS distance {ks} for {m:?}");
        }
    }

    #[test]
    fn measure_spec_json_round_trip() {
        let m = MeasureSpec::toeplitz(
            MeasureSpec::cantor(20).unwrap(),
            vec![coeff(0, 1.5), coeff(-1, 0.25)],
        )
        .unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"kind\""));
        let back: MeasureSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(m, back);
    }
}
