//! Roughness penalty matrix for cubic (order-4) bases.
//!
//! `G[i][j] = ∫ b″_i(x) b″_j(x) dx` over the spline domain. Adding `λ·G` to
//! the objective Hessian penalizes curvature of the fitted characteristic
//! score. Second derivatives of cubics are piecewise linear, so their
//! pairwise products are piecewise quadratic and a 3-point Gauss rule per
//! knot interval integrates them without truncation error.

use super::{KnotVector, PaddedKnots, SplineOrder};
use crate::DMatrix;

/// Symmetric positive semidefinite curvature Gram matrix for the order-4
/// basis on a knot vector, dimension `(m+2) × (m+2)`.
#[derive(Debug, Clone)]
pub struct RoughnessMatrix {
    pub values: DMatrix<f64>,
}

/// Second derivatives of all `m+2` order-4 basis functions at `x`, by
/// differentiating the recursion twice:
/// `b″(x|i,4) = 3·[D3(i)/(t(i+3)−t(i)) − D3(i+1)/(t(i+4)−t(i+1))]` with
/// `D3(i) = 2·[B(x|i,2)/(t(i+2)−t(i)) − B(x|i+1,2)/(t(i+3)−t(i+1))]`,
/// zero-denominator terms dropped.
fn second_derivative_row(x: f64, padded: &PaddedKnots) -> Vec<f64> {
    let m = padded.m();
    let w = m + 2;
    let t = padded.as_slice();
    let table = super::full_table_row(x, padded);
    let level2 = |func: usize| -> f64 {
        if func > w {
            0.0
        } else {
            table[w + (func - 1)]
        }
    };
    let tp = |i: usize| -> f64 { t[i - 1] };
    let d3 = |i: usize| -> f64 {
        if i > w + 1 {
            return 0.0;
        }
        let mut v = 0.0;
        if tp(i + 2) > tp(i) {
            v += level2(i) / (tp(i + 2) - tp(i));
        }
        if tp(i + 3) > tp(i + 1) {
            v -= level2(i + 1) / (tp(i + 3) - tp(i + 1));
        }
        2.0 * v
    };
    (1..=w)
        .map(|i| {
            let mut v = 0.0;
            if tp(i + 3) > tp(i) {
                v += d3(i) / (tp(i + 3) - tp(i));
            }
            if tp(i + 4) > tp(i + 1) {
                v -= d3(i + 1) / (tp(i + 4) - tp(i + 1));
            }
            3.0 * v
        })
        .collect()
}

/// Builds the order-4 roughness matrix on `knots`.
pub fn roughness_matrix(knots: &KnotVector) -> RoughnessMatrix {
    const GAUSS_NODES: [f64; 3] = [-0.7745966692414834, 0.0, 0.7745966692414834];
    const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

    let m = knots.m();
    let q = SplineOrder::Cubic.basis_count(m);
    let padded = knots.padded();
    let mut g = DMatrix::zeros(q, q);
    for span in knots.as_slice().windows(2) {
        let mid = 0.5 * (span[0] + span[1]);
        let half = 0.5 * (span[1] - span[0]);
        for (node, weight) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            let x = mid + half * node;
            let w = half * weight;
            let d2 = second_derivative_row(x, &padded);
            for r in 0..q {
                if d2[r] == 0.0 {
                    continue;
                }
                for c in r..q {
                    g[(r, c)] += w * (d2[r] * d2[c]);
                }
            }
        }
    }
    for r in 0..q {
        for c in 0..r {
            g[(r, c)] = g[(c, r)];
        }
    }
    RoughnessMatrix { values: g }
}
