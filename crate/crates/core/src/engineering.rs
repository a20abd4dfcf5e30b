//! Score engineering: linear constraints on the coefficient vector.
//!
//! Four constraint families, all expressed on 1-based coefficient indices
//! (the convention of scorecard coefficient listings):
//!
//! * in-weights: pin a coefficient to a fixed value, usually 0;
//! * cross restrictions: force two coefficients equal;
//! * centering: per characteristic, `Σ (E[Xj|G]+E[Xj|B])·Sj = 0`, which
//!   makes each characteristic score average to zero over the population;
//! * patterns: pairwise monotonicity, `S_left ≤ S_right` or `≥`.
//!
//! `assemble` stacks the divergence row `d'S = delta` on top of the
//! equality families to build `Aeq·S = beq`, and emits patterns as
//! `A·S ≤ 0`.

use crate::divstats::DivStats;
use crate::{DMatrix, DVector, Error, Result};

/// Direction of a pattern constraint between two coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `S_left ≤ S_right`.
    Less,
    /// `S_left ≥ S_right`.
    Greater,
}

/// One pattern constraint; indices are 1-based with `left < right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pattern {
    pub left: usize,
    pub right: usize,
    pub relation: Relation,
}

/// Declarative constraint bundle for one fit.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    /// `(1-based index, fixed value)`; the value is 0 for ordinary
    /// in-weighting, nonzero to pin a coefficient elsewhere.
    pub inweights: Vec<(usize, f64)>,
    /// `(a, b)` meaning `S_a = S_b`.
    pub crosses: Vec<(usize, usize)>,
    /// One index list per characteristic to center.
    pub centering_groups: Vec<Vec<usize>>,
    pub patterns: Vec<Pattern>,
    /// Target separation `d'S`.
    pub delta: f64,
}

/// The constraint matrices ready for the QP solver.
#[derive(Debug, Clone)]
pub struct AssembledConstraints {
    pub aeq: DMatrix<f64>,
    pub beq: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

fn check_index(index: usize, p: usize) -> Result<()> {
    if index == 0 || index > p {
        return Err(Error::IndexOutOfRange { index, p });
    }
    Ok(())
}

/// One row per index, with a single 1 at that (1-based) position.
pub fn inweight_rows(indices: &[usize], p: usize) -> Result<DMatrix<f64>> {
    let mut seen = vec![false; p + 1];
    let mut rows = DMatrix::zeros(indices.len(), p);
    for (r, &index) in indices.iter().enumerate() {
        check_index(index, p)?;
        if seen[index] {
            return Err(Error::InvalidConstraint(format!(
                "coefficient {index} in-weighted twice"
            )));
        }
        seen[index] = true;
        rows[(r, index - 1)] = 1.0;
    }
    Ok(rows)
}

/// One row per pair: `+1` at `a`, `−1` at `b`, so `row·S = 0 ⇔ S_a = S_b`.
pub fn cross_rows(pairs: &[(usize, usize)], p: usize) -> Result<DMatrix<f64>> {
    let mut rows = DMatrix::zeros(pairs.len(), p);
    for (r, &(a, b)) in pairs.iter().enumerate() {
        check_index(a, p)?;
        check_index(b, p)?;
        if a == b {
            return Err(Error::InvalidConstraint(format!(
                "cross restriction needs two distinct coefficients, got ({a}, {b})"
            )));
        }
        rows[(r, a - 1)] = 1.0;
        rows[(r, b - 1)] = -1.0;
    }
    Ok(rows)
}

/// One row per group carrying `e(j)` at each member index.
pub fn centering_rows(groups: &[Vec<usize>], e: &DVector<f64>) -> Result<DMatrix<f64>> {
    let p = e.len();
    let mut rows = DMatrix::zeros(groups.len(), p);
    for (r, group) in groups.iter().enumerate() {
        let mut seen = vec![false; p + 1];
        for &index in group {
            check_index(index, p)?;
            if seen[index] {
                return Err(Error::InvalidConstraint(format!(
                    "coefficient {index} listed twice in centering group {}",
                    r + 1
                )));
            }
            seen[index] = true;
            rows[(r, index - 1)] = e[index - 1];
        }
    }
    Ok(rows)
}

/// Pattern rows for `A·S ≤ 0`. Row `i` carries `c = 2·flag − 1` at
/// `left(i)` and `−c` at `right(i)`: flag `true` (less-than) gives
/// `S_left − S_right ≤ 0`, flag `false` gives `S_right − S_left ≤ 0`.
pub fn pattern_rows(
    left: &[usize],
    right: &[usize],
    is_less_than: &[bool],
    p: usize,
) -> Result<DMatrix<f64>> {
    if left.len() != right.len() || left.len() != is_less_than.len() {
        return Err(Error::LengthMismatch(format!(
            "pattern lists have lengths {}, {}, {}",
            left.len(),
            right.len(),
            is_less_than.len()
        )));
    }
    let mut rows = DMatrix::zeros(left.len(), p);
    for (r, ((&l, &rt), &flag)) in left.iter().zip(right).zip(is_less_than).enumerate() {
        check_index(l, p)?;
        check_index(rt, p)?;
        if l >= rt {
            return Err(Error::InvalidConstraint(format!(
                "pattern {} must have left < right, got ({l}, {rt})",
                r + 1
            )));
        }
        let c = if flag { 1.0 } else { -1.0 };
        rows[(r, l - 1)] = c;
        rows[(r, rt - 1)] = -c;
    }
    Ok(rows)
}

impl ConstraintSet {
    fn pattern_lists(&self) -> (Vec<usize>, Vec<usize>, Vec<bool>) {
        let left = self.patterns.iter().map(|p| p.left).collect();
        let right = self.patterns.iter().map(|p| p.right).collect();
        let flags = self
            .patterns
            .iter()
            .map(|p| p.relation == Relation::Less)
            .collect();
        (left, right, flags)
    }
}

/// Stacks `[d'; in-weight rows; cross rows; centering rows]` over
/// `beq = [delta; fixed values; 0…]` and builds the pattern system
/// `A·S ≤ 0`.
pub fn assemble(stats: &DivStats, constraints: &ConstraintSet) -> Result<AssembledConstraints> {
    let p = stats.d.len();
    if stats.c.nrows() != p || stats.c.ncols() != p || stats.e.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "divergence stats disagree on p: C {}×{}, d {}, e {}",
            stats.c.nrows(),
            stats.c.ncols(),
            p,
            stats.e.len()
        )));
    }
    let iw_indices: Vec<usize> = constraints.inweights.iter().map(|&(i, _)| i).collect();
    let iw = inweight_rows(&iw_indices, p)?;
    let crosses = cross_rows(&constraints.crosses, p)?;
    let centering = centering_rows(&constraints.centering_groups, &stats.e)?;
    let (left, right, flags) = constraints.pattern_lists();
    let a = pattern_rows(&left, &right, &flags, p)?;

    let rows = 1 + iw.nrows() + crosses.nrows() + centering.nrows();
    let mut aeq = DMatrix::zeros(rows, p);
    aeq.row_mut(0).copy_from(&stats.d.transpose());
    let mut at = 1;
    for block in [&iw, &crosses, &centering] {
        if block.nrows() > 0 {
            aeq.view_mut((at, 0), (block.nrows(), p)).copy_from(block);
            at += block.nrows();
        }
    }

    let mut beq = DVector::zeros(rows);
    beq[0] = constraints.delta;
    for (r, &(_, value)) in constraints.inweights.iter().enumerate() {
        beq[1 + r] = value;
    }

    let b = DVector::zeros(a.nrows());
    Ok(AssembledConstraints { aeq, beq, a, b })
}
