//! Divergence statistics for a scored binary population.
//!
//! Divergence of a score is `(mean_G − mean_B)² / ((var_G + var_B)/2)`,
//! the squared class separation over the average within-class variance.
//! For a linear score `X·S` the separation is `d'S` and the pooled variance
//! is `S'CS`, so maximizing divergence at a fixed separation is the
//! quadratic program `min S'CS  s.t.  d'S = delta` plus shape constraints,
//! with Hessian `H = 2C` in the conventional `½·S'HS` objective.
//!
//! All covariances are sample covariances (`n − 1` denominator). Labels are
//! `true` = good, `false` = bad.

use crate::{DMatrix, DVector, Error, Result};

/// Class-conditional first and second moments of the design matrix.
#[derive(Debug, Clone)]
pub struct DivStats {
    /// Average within-class covariance, `(Cov(X|G) + Cov(X|B))/2`.
    pub c: DMatrix<f64>,
    /// Good-mean minus bad-mean per column.
    pub d: DVector<f64>,
    /// Good-mean plus bad-mean per column; used by centering constraints.
    pub e: DVector<f64>,
}

/// Weight-of-evidence rescaling of a coefficient vector.
#[derive(Debug, Clone)]
pub struct WoeResult {
    /// Scale factor `(mean_G − mean_B) / ((var_G + var_B)/2)` of the score.
    pub beta: f64,
    /// Divergence of the score (unchanged by the rescaling).
    pub div: f64,
    /// `beta × S`; scores in approximate log-odds units.
    pub coeffs_woe: DVector<f64>,
}

fn class_rows(y: &[bool], good: bool) -> Vec<usize> {
    y.iter()
        .enumerate()
        .filter_map(|(i, &g)| (g == good).then_some(i))
        .collect()
}

fn check_classes(x: &DMatrix<f64>, y: &[bool]) -> Result<(Vec<usize>, Vec<usize>)> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch(format!(
            "{} design rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    let goods = class_rows(y, true);
    let bads = class_rows(y, false);
    if goods.len() < 2 {
        return Err(Error::DegenerateClass("good".into()));
    }
    if bads.len() < 2 {
        return Err(Error::DegenerateClass("bad".into()));
    }
    Ok((goods, bads))
}

/// Column means and sample covariance of the selected rows.
fn moments(x: &DMatrix<f64>, rows: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
    let sub = x.select_rows(rows.iter());
    let mean = sub.row_mean();
    let mut centered = sub;
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.tr_mul(&centered) / (rows.len() - 1) as f64;
    (mean.transpose(), cov)
}

/// Computes `C`, `d`, and `e` from a design matrix and good/bad labels.
pub fn divergence_stats(x: &DMatrix<f64>, y: &[bool]) -> Result<DivStats> {
    let (goods, bads) = check_classes(x, y)?;
    let (mean_g, cov_g) = moments(x, &goods);
    let (mean_b, cov_b) = moments(x, &bads);
    Ok(DivStats {
        c: (cov_g + cov_b) * 0.5,
        d: &mean_g - &mean_b,
        e: mean_g + mean_b,
    })
}

/// QP Hessian `H = 2(C + (λ/p)·I)`. The λ term is a ridge that keeps `H`
/// positive definite when collinear design columns make `C` singular.
pub fn h_matrix(c: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if c.nrows() != c.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "C must be square, got {}×{}",
            c.nrows(),
            c.ncols()
        )));
    }
    if lambda < 0.0 {
        return Err(Error::NegativeWeight(lambda));
    }
    let p = c.nrows();
    let mut h = c * 2.0;
    let shift = 2.0 * lambda / p as f64;
    for i in 0..p {
        h[(i, i)] += shift;
    }
    Ok(h)
}

/// A roughness Gram matrix destined for a contiguous run of coefficients.
#[derive(Debug, Clone)]
pub struct RoughnessBlock {
    /// 0-based index of the first coefficient the block covers.
    pub start: usize,
    /// Square curvature Gram matrix for that coefficient run.
    pub gram: DMatrix<f64>,
    /// Penalty weight multiplying the block.
    pub weight: f64,
}

/// `H = 2(C + (λ/p)·I + Σ weightᵢ·Gᵢ)` with each Gram matrix embedded at
/// its coefficient range. Blocks must be square, in range, and disjoint.
pub fn h_matrix_with_roughness(
    c: &DMatrix<f64>,
    lambda: f64,
    blocks: &[RoughnessBlock],
) -> Result<DMatrix<f64>> {
    let mut h = h_matrix(c, lambda)?;
    let p = c.nrows();
    let mut spans: Vec<(usize, usize)> = Vec::with_capacity(blocks.len());
    for block in blocks {
        let q = block.gram.nrows();
        if block.gram.ncols() != q {
            return Err(Error::DimensionMismatch(format!(
                "roughness block must be square, got {}×{}",
                q,
                block.gram.ncols()
            )));
        }
        if block.weight < 0.0 {
            return Err(Error::NegativeWeight(block.weight));
        }
        if block.start + q > p {
            return Err(Error::IndexOutOfRange {
                index: block.start + q - 1,
                p,
            });
        }
        spans.push((block.start, block.start + q));
    }
    spans.sort_unstable();
    for pair in spans.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(Error::DimensionMismatch(format!(
                "roughness blocks overlap at coefficient {}",
                pair[1].0
            )));
        }
    }
    for block in blocks {
        let q = block.gram.nrows();
        for r in 0..q {
            for col in 0..q {
                h[(block.start + r, block.start + col)] +=
                    2.0 * block.weight * block.gram[(r, col)];
            }
        }
    }
    Ok(h)
}

fn score_moments(
    s: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &[bool],
) -> Result<(f64, f64)> {
    if s.len() != x.ncols() {
        return Err(Error::LengthMismatch(format!(
            "{} coefficients for {} design columns",
            s.len(),
            x.ncols()
        )));
    }
    let (goods, bads) = check_classes(x, y)?;
    let scores = x * s;
    let stats = |rows: &[usize]| -> (f64, f64) {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|&r| scores[r]).sum::<f64>() / n;
        let ss = rows.iter().map(|&r| (scores[r] - mean).powi(2)).sum::<f64>();
        (mean, ss / (n - 1.0))
    };
    let (mean_g, var_g) = stats(&goods);
    let (mean_b, var_b) = stats(&bads);
    let num = mean_g - mean_b;
    let denom = 0.5 * (var_g + var_b);
    if denom <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((num, denom))
}

/// Divergence of the score `X·S` between goods and bads.
pub fn score_divergence(s: &DVector<f64>, x: &DMatrix<f64>, y: &[bool]) -> Result<f64> {
    let (num, denom) = score_moments(s, x, y)?;
    Ok(num * num / denom)
}

/// Rescales `S` so the score is in weight-of-evidence units. A WOE-scale
/// score satisfies `beta = 1`: its class separation equals its pooled
/// variance, the normalization under which score differences read as
/// log-odds.
pub fn woe_scale(s: &DVector<f64>, x: &DMatrix<f64>, y: &[bool]) -> Result<WoeResult> {
    let (num, denom) = score_moments(s, x, y)?;
    let beta = num / denom;
    Ok(WoeResult {
        beta,
        div: num * beta,
        coeffs_woe: s * beta,
    })
}
