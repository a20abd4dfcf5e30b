//! B-spline basis functions of orders 1–4 on a padded knot sequence.
//!
//! A knot vector `{k(1) < … < k(m)}` is padded to the sequence
//! `t(1)=…=t(4)=k(1)`, `t(i)=k(i−3)` for `i=5..m+2`, `t(m+3)=…=t(m+6)=k(m)`.
//! On that sequence the order-1 basis functions are the attribute indicator
//! variables (half-open intervals, closed final interval), and orders 2–4 are
//! built by the two-term recursion
//! `B(x|i,j) = (x−t(i))/(t(i+j−1)−t(i))·B(x|i,j−1)
//!           + (t(i+j)−x)/(t(i+j)−t(i+1))·B(x|i+1,j−1)`,
//! each term taken as zero when its denominator is zero.
//!
//! The full table holds `4(m+2)` functions, column `i + (m+2)(j−1)` in
//! 1-based level-major layout; some low-index columns are identically zero
//! and the per-order [`BasisBlock`] excludes them, keeping
//! `m + order − 2` live functions per order.

mod roughness;

pub use roughness::{roughness_matrix, RoughnessMatrix};

use crate::{DMatrix, Error, Result};

/// Strictly increasing knot list defining a spline domain.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
}

impl KnotVector {
    /// Validates that `knots` has at least two finite, strictly increasing
    /// entries. Two knots are allowed: that is the simple-linear-regression
    /// configuration when paired with an order-2 basis.
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidKnots(format!(
                "need at least 2 knots, got {}",
                knots.len()
            )));
        }
        if let Some(bad) = knots.iter().find(|k| !k.is_finite()) {
            return Err(Error::InvalidKnots(format!("non-finite knot {bad}")));
        }
        for w in knots.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidKnots(format!(
                    "knots must be strictly increasing; found {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { knots })
    }

    /// Number of knots, `m`.
    pub fn m(&self) -> usize {
        self.knots.len()
    }

    /// Left end knot `k(1)`.
    pub fn first(&self) -> f64 {
        self.knots[0]
    }

    /// Right end knot `k(m)`.
    pub fn last(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.knots
    }

    /// True when `x` lies in the closed spline domain `[k(1), k(m)]`.
    pub fn contains(&self, x: f64) -> bool {
        self.first() <= x && x <= self.last()
    }

    /// The padded sequence of `m + 6` values.
    pub fn padded(&self) -> PaddedKnots {
        PaddedKnots::from_knots(self)
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if !x.is_finite() || !self.contains(x) {
            return Err(Error::OutOfDomain {
                x,
                low: self.first(),
                high: self.last(),
            });
        }
        Ok(())
    }
}

/// Padded knot sequence: four copies of each end knot around the interior.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedKnots {
    t: Vec<f64>,
    m: usize,
}

impl PaddedKnots {
    fn from_knots(knots: &KnotVector) -> Self {
        let m = knots.m();
        let k = knots.as_slice();
        let mut t = Vec::with_capacity(m + 6);
        t.extend(std::iter::repeat_n(k[0], 3));
        t.extend_from_slice(k);
        t.extend(std::iter::repeat_n(k[m - 1], 3));
        debug_assert_eq!(t.len(), m + 6);
        Self { t, m }
    }

    /// The padded values `t(1)..t(m+6)`.
    pub fn as_slice(&self) -> &[f64] {
        &self.t
    }

    /// Number of original knots.
    pub fn m(&self) -> usize {
        self.m
    }
}

/// Spline order: 1 = step functions through 4 = cubic splines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplineOrder {
    /// Order 1: attribute indicator step functions.
    Step,
    /// Order 2: piecewise linear (tents).
    Linear,
    /// Order 3: quadratic splines, C¹ at interior knots.
    Quadratic,
    /// Order 4: cubic splines, C² at interior knots.
    Cubic,
}

impl SplineOrder {
    pub fn as_usize(self) -> usize {
        match self {
            SplineOrder::Step => 1,
            SplineOrder::Linear => 2,
            SplineOrder::Quadratic => 3,
            SplineOrder::Cubic => 4,
        }
    }

    /// Number of non-vacuous basis functions for `m` knots: `m + order − 2`.
    pub fn basis_count(self, m: usize) -> usize {
        m + self.as_usize() - 2
    }

    pub const ALL: [SplineOrder; 4] = [
        SplineOrder::Step,
        SplineOrder::Linear,
        SplineOrder::Quadratic,
        SplineOrder::Cubic,
    ];
}

impl TryFrom<u8> for SplineOrder {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            1 => Ok(SplineOrder::Step),
            2 => Ok(SplineOrder::Linear),
            3 => Ok(SplineOrder::Quadratic),
            4 => Ok(SplineOrder::Cubic),
            other => Err(Error::InvalidOrder(other)),
        }
    }
}

impl std::fmt::Display for SplineOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_usize())
    }
}

/// Evaluations of one order's non-vacuous basis functions at a set of points.
#[derive(Debug, Clone)]
pub struct BasisBlock {
    /// The basis order.
    pub order: SplineOrder,
    /// `n × q` values, `q = m + order − 2`; every entry in `[0, 1]`.
    pub values: DMatrix<f64>,
    /// 1-based index of the block's first column in the full level-major
    /// table, i.e. `(5 − order) + (m+2)(order − 1)`. Block column `c`
    /// (0-based) is full-table column `column_index_offset + c`.
    pub column_index_offset: usize,
}

/// Width of one level of the full table.
fn level_width(m: usize) -> usize {
    m + 2
}

/// One row of the full 4-level table at `x`: `4(m+2)` values in level-major
/// layout, 1-based function `i` of order `j` at 0-based slot
/// `(j−1)(m+2) + (i−1)`. Caller guarantees `x` in domain.
fn full_table_row(x: f64, padded: &PaddedKnots) -> Vec<f64> {
    let m = padded.m();
    let w = level_width(m);
    let t = padded.as_slice();
    let mut b = vec![0.0; 4 * w];

    // Order 1: indicators. Half-open intervals, closed final interval.
    for i in 0..w {
        let inside = if i + 1 == w {
            t[i] <= x && x <= t[i + 1]
        } else {
            t[i] <= x && x < t[i + 1]
        };
        if inside {
            b[i] = 1.0;
        }
    }

    for j in 2..=4usize {
        for i in 1..=w {
            // 1-based knot indices: t[i-1] here is t(i) in that notation.
            let t_i = t[i - 1];
            let t_i1 = t[i];
            let t_ijm1 = t[i + j - 2];
            let t_ij = t[i + j - 1];
            let lower = |func: usize| -> f64 {
                if func > w {
                    0.0
                } else {
                    b[(j - 2) * w + (func - 1)]
                }
            };
            let mut val = 0.0;
            if t_ijm1 > t_i {
                val += (x - t_i) / (t_ijm1 - t_i) * lower(i);
            }
            if t_ij > t_i1 {
                val += (t_ij - x) / (t_ij - t_i1) * lower(i + 1);
            }
            b[(j - 1) * w + (i - 1)] = val;
        }
    }
    b
}

/// True when function `i` (1-based) of order `order` is identically
/// zero. These are the columns below the live range `i = 5−order ..= m+2`.
pub fn is_vacuous(i: usize, order: SplineOrder) -> bool {
    i + order.as_usize() < 5
}

/// Full `n × 4(m+2)` basis table at the points `xs`, in the level-major
/// layout (1-based column `i + (m+2)(j−1)` holds order `j`, function `i`).
/// Vacuous columns are present and identically zero.
pub fn full_basis_matrix(xs: &[f64], knots: &KnotVector) -> Result<DMatrix<f64>> {
    for &x in xs {
        knots.check_domain(x)?;
    }
    let padded = knots.padded();
    let w = level_width(knots.m());
    let mut out = DMatrix::zeros(xs.len(), 4 * w);
    for (r, &x) in xs.iter().enumerate() {
        let row = full_table_row(x, &padded);
        for (c, v) in row.into_iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    Ok(out)
}

/// One basis row of the requested order at `x`: the `m + order − 2`
/// non-vacuous values.
pub fn basis_row(x: f64, knots: &KnotVector, order: SplineOrder) -> Result<Vec<f64>> {
    knots.check_domain(x)?;
    let padded = knots.padded();
    Ok(basis_row_unchecked(x, &padded, order))
}

fn basis_row_unchecked(x: f64, padded: &PaddedKnots, order: SplineOrder) -> Vec<f64> {
    let m = padded.m();
    let w = level_width(m);
    let o = order.as_usize();
    let table = full_table_row(x, padded);
    let start = (o - 1) * w + (5 - o) - 1;
    table[start..start + order.basis_count(m)].to_vec()
}

/// Evaluate the non-vacuous basis functions of `order` at every point of
/// `xs`. Every `x` must lie in `[k(1), k(m)]`; clamping out-of-range raw
/// values is the design-matrix builder's responsibility.
pub fn basis_block(xs: &[f64], knots: &KnotVector, order: SplineOrder) -> Result<BasisBlock> {
    for &x in xs {
        knots.check_domain(x)?;
    }
    let m = knots.m();
    let padded = knots.padded();
    let q = order.basis_count(m);
    let mut values = DMatrix::zeros(xs.len(), q);
    for (r, &x) in xs.iter().enumerate() {
        for (c, v) in basis_row_unchecked(x, &padded, order).into_iter().enumerate() {
            values[(r, c)] = v;
        }
    }
    let o = order.as_usize();
    Ok(BasisBlock {
        order,
        values,
        column_index_offset: (5 - o) + (m + 2) * (o - 1),
    })
}

/// Value of the spline with the given basis coefficients at `x`.
pub fn spline_eval(x: f64, coeffs: &[f64], knots: &KnotVector, order: SplineOrder) -> Result<f64> {
    let q = order.basis_count(knots.m());
    if coeffs.len() != q {
        return Err(Error::LengthMismatch(format!(
            "order-{order} spline on {} knots needs {q} coefficients, got {}",
            knots.m(),
            coeffs.len()
        )));
    }
    let row = basis_row(x, knots, order)?;
    Ok(row.iter().zip(coeffs).map(|(b, c)| b * c).sum())
}

/// Greville abscissae: the x locations whose pointwise basis row reproduces
/// linear functions, i.e. `Σ ξ_j b_j(x) = x`. For order `o ≥ 2`, function
/// `i` has `ξ = (t(i+1) + … + t(i+o−1))/(o−1)`; for order 1 the interval
/// midpoints are returned.
pub fn greville_abscissae(knots: &KnotVector, order: SplineOrder) -> Vec<f64> {
    let m = knots.m();
    let o = order.as_usize();
    if o == 1 {
        return knots
            .as_slice()
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect();
    }
    let padded = knots.padded();
    let t = padded.as_slice();
    (5 - o..=m + 2)
        .map(|i| {
            // mean of t(i+1)..t(i+o-1), 1-based
            let sum: f64 = (i + 1..=i + o - 1).map(|k| t[k - 1]).sum();
            sum / (o - 1) as f64
        })
        .collect()
}
