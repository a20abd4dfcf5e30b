//! Convex quadratic programming by a primal active-set method.
//!
//! Solves `min ½·S'HS + f'S` subject to `Aeq·S = beq`, `A·S ≤ b`, and bounds
//! `l ≤ S ≤ u`, warm-started from a caller-supplied point when one is given
//! and feasible. Infeasible or missing starts fall back to a phase-1 slack
//! program minimizing `½‖s‖²` over `A·x − s ≤ b, s ≥ 0`, solved by the same
//! active-set core from a start that is feasible by construction.
//!
//! Equality systems may contain redundant rows (centering rows become
//! dependent once in-weights pin coefficients); a rank-revealing
//! Gram-Schmidt pass drops them, failing with `INFEASIBLE` when a dropped
//! row's right-hand side disagrees with the rows that imply it.
//!
//! The working-set subproblems solve the saddle system
//! `[H+εI, W'; W, 0]·[p; ν] = [−(Hx+f); 0]` by full-pivot LU. The tiny ε
//! ridge (scaled to H's diagonal) covers positive semidefinite H from
//! partition-of-unity collinear design columns; it perturbs only the step
//! computation, never the reported objective.

use crate::{DMatrix, DVector, Error, Result};

/// Primal/dual feasibility tolerance.
const FEAS_TOL: f64 = 1e-8;
/// Multiplier negativity below which a working constraint is dropped.
const MULT_TOL: f64 = 1e-9;
/// Rank tolerance for equality-row elimination.
const RANK_TOL: f64 = 1e-10;
/// Relative ridge applied to H inside saddle-point factorizations.
const RIDGE_REL: f64 = 1e-10;

/// A convex QP instance. Empty constraint blocks are `0×p` matrices; bounds
/// default to ±∞.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    /// Inequality rows, `A·S ≤ b`.
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Equality rows, `Aeq·S = beq`.
    pub aeq: DMatrix<f64>,
    pub beq: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    /// Warm-start point; used when feasible, otherwise phase-1 replaces it.
    pub start: Option<DVector<f64>>,
    /// Iteration cap override; defaults to `50·(p + total inequality rows)`.
    pub max_iter: Option<usize>,
}

impl QpProblem {
    /// Unconstrained problem; fill in constraint fields as needed.
    pub fn new(h: DMatrix<f64>, f: DVector<f64>) -> Self {
        let p = f.len();
        Self {
            h,
            f,
            a: DMatrix::zeros(0, p),
            b: DVector::zeros(0),
            aeq: DMatrix::zeros(0, p),
            beq: DVector::zeros(0),
            lower: DVector::from_element(p, f64::NEG_INFINITY),
            upper: DVector::from_element(p, f64::INFINITY),
            start: None,
            max_iter: None,
        }
    }

    fn p(&self) -> usize {
        self.f.len()
    }
}

/// Termination state of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    /// KKT conditions met within tolerance.
    Optimal,
    /// Phase-1 could not reduce the worst constraint violation below 1e−8.
    Infeasible,
    /// Iteration cap hit; best iterate returned.
    MaxIter,
}

impl std::fmt::Display for QpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QpStatus::Optimal => "OPTIMAL",
            QpStatus::Infeasible => "INFEASIBLE",
            QpStatus::MaxIter => "MAX_ITER",
        })
    }
}

/// Solver output. Multipliers follow the Lagrangian
/// `½x'Hx + f'x + λ'(Aeq·x − beq) + μ'(A·x − b)` with `μ ≥ 0`.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub eq_multipliers: DVector<f64>,
    /// One multiplier per row of `A`, nonnegative.
    pub ineq_multipliers: DVector<f64>,
    /// Multipliers for the internalized bound rows (all finite lower bounds
    /// in column order, then all finite upper bounds); empty when every
    /// bound is infinite.
    pub bound_multipliers: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    /// `½x'Hx + f'x` at the returned point.
    pub objective: f64,
}

/// KKT residuals and the geometrically active inequality rows.
#[derive(Debug, Clone)]
pub struct KktReport {
    /// `‖Aeq·x − beq‖∞`.
    pub eq_residual: f64,
    /// Worst inequality violation, `max(0, max(A·x − b))`, bounds included.
    pub ineq_residual: f64,
    /// `‖Hx + f + Aeq'λ + A'μ‖∞` including bound-row terms.
    pub stationarity: f64,
    /// `max |μᵢ·(A·x − b)ᵢ|` over all inequality rows.
    pub complementarity: f64,
    /// Rows of `A` with `|A·x − b|ᵢ ≤ 1e−8`.
    pub active: Vec<usize>,
}

/// Validated, internalized problem: bounds folded into the inequality rows,
/// equalities reduced to an independent subset.
struct Internal {
    h: DMatrix<f64>,
    f: DVector<f64>,
    /// All inequality rows: the user's `A`, then bound rows.
    rows: DMatrix<f64>,
    rhs: DVector<f64>,
    n_user: usize,
    aeq: DMatrix<f64>,
    beq: DVector<f64>,
    /// Original indices of the kept equality rows.
    kept_eq: Vec<usize>,
    n_eq_orig: usize,
    ridge: f64,
    max_iter: usize,
}

fn bound_rows(lower: &DVector<f64>, upper: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let p = lower.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for j in 0..p {
        if lower[j].is_finite() {
            let mut r = vec![0.0; p];
            r[j] = -1.0;
            rows.push(r);
            rhs.push(-lower[j]);
        }
    }
    for j in 0..p {
        if upper[j].is_finite() {
            let mut r = vec![0.0; p];
            r[j] = 1.0;
            rows.push(r);
            rhs.push(upper[j]);
        }
    }
    let m = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    (DMatrix::from_row_slice(m, p, &flat), DVector::from_vec(rhs))
}

/// Drops equality rows linearly dependent on earlier ones. Fails when a
/// dependent row's right-hand side contradicts the combination implying it.
fn reduce_equalities(
    aeq: &DMatrix<f64>,
    beq: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>, Vec<usize>)> {
    let p = aeq.ncols();
    let rhs_scale = if beq.is_empty() { 1.0 } else { beq.amax().max(1.0) };
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut basis_rhs: Vec<f64> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    for r in 0..aeq.nrows() {
        let row: DVector<f64> = aeq.row(r).transpose();
        let mut v = row.clone();
        let mut beta = beq[r];
        // Two Gram-Schmidt passes for orthogonality at rank boundaries.
        for _ in 0..2 {
            for (u, g) in basis.iter().zip(&basis_rhs) {
                let c = u.dot(&v);
                v.axpy(-c, u, 1.0);
                beta -= c * g;
            }
        }
        let norm = v.norm();
        if norm <= RANK_TOL * row.norm().max(1.0) {
            if beta.abs() > FEAS_TOL * rhs_scale {
                return Err(Error::Infeasible(format!(
                    "equality row {r} is implied by earlier rows but its \
                     right-hand side differs by {beta:e}"
                )));
            }
            continue;
        }
        basis.push(v / norm);
        basis_rhs.push(beta / norm);
        kept.push(r);
    }
    let reduced = if kept.is_empty() {
        DMatrix::zeros(0, p)
    } else {
        aeq.select_rows(kept.iter())
    };
    let rhs = DVector::from_iterator(kept.len(), kept.iter().map(|&r| beq[r]));
    Ok((reduced, rhs, kept))
}

fn validate(problem: &QpProblem) -> Result<Internal> {
    let p = problem.p();
    let h = &problem.h;
    if h.nrows() != p || h.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "H is {}×{} but f has length {p}",
            h.nrows(),
            h.ncols()
        )));
    }
    let scale = h.amax().max(1.0);
    let asym = (h - h.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let check_block = |name: &str, m: &DMatrix<f64>, v: &DVector<f64>| -> Result<()> {
        if m.nrows() != v.len() || (m.nrows() > 0 && m.ncols() != p) {
            return Err(Error::DimensionMismatch(format!(
                "{name} is {}×{} with right-hand side length {}",
                m.nrows(),
                m.ncols(),
                v.len()
            )));
        }
        Ok(())
    };
    check_block("A", &problem.a, &problem.b)?;
    check_block("Aeq", &problem.aeq, &problem.beq)?;
    if problem.lower.len() != p || problem.upper.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "bounds have lengths {}/{} for p = {p}",
            problem.lower.len(),
            problem.upper.len()
        )));
    }
    for j in 0..p {
        if problem.lower[j] > problem.upper[j] {
            return Err(Error::DimensionMismatch(format!(
                "lower[{j}] = {} exceeds upper[{j}] = {}",
                problem.lower[j], problem.upper[j]
            )));
        }
    }
    if let Some(start) = &problem.start {
        if start.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "start has length {} for p = {p}",
                start.len()
            )));
        }
    }

    let hsym = (h + h.transpose()) * 0.5;
    let min_eig = hsym
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -1e-8 * scale {
        return Err(Error::NotPsd);
    }

    let (brows, brhs) = bound_rows(&problem.lower, &problem.upper);
    let n_user = problem.a.nrows();
    let m_all = n_user + brows.nrows();
    let mut rows = DMatrix::zeros(m_all, p);
    let mut rhs = DVector::zeros(m_all);
    if n_user > 0 {
        rows.view_mut((0, 0), (n_user, p)).copy_from(&problem.a);
        rhs.rows_mut(0, n_user).copy_from(&problem.b);
    }
    if brows.nrows() > 0 {
        rows.view_mut((n_user, 0), (brows.nrows(), p)).copy_from(&brows);
        rhs.rows_mut(n_user, brows.nrows()).copy_from(&brhs);
    }

    let (aeq, beq, kept_eq) = reduce_equalities(&problem.aeq, &problem.beq)?;

    let diag_scale = (0..p).map(|i| hsym[(i, i)].abs()).fold(1.0, f64::max);
    Ok(Internal {
        h: hsym,
        f: problem.f.clone(),
        rows,
        rhs,
        n_user,
        aeq,
        beq,
        kept_eq,
        n_eq_orig: problem.aeq.nrows(),
        ridge: RIDGE_REL * diag_scale,
        max_iter: problem.max_iter.unwrap_or(50 * (p + m_all).max(1)),
    })
}

/// Solves the saddle system `[H+εI, W'; W, 0]·[p; ν] = [−g; 0]`. Retries
/// with a larger ridge if the factorization is singular.
fn kkt_step(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    w: &DMatrix<f64>,
    ridge: f64,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let p = h.nrows();
    let q = w.nrows();
    let mut eps = ridge;
    for _ in 0..3 {
        let mut kkt = DMatrix::zeros(p + q, p + q);
        kkt.view_mut((0, 0), (p, p)).copy_from(h);
        for i in 0..p {
            kkt[(i, i)] += eps;
        }
        if q > 0 {
            kkt.view_mut((0, p), (p, q)).copy_from(&w.transpose());
            kkt.view_mut((p, 0), (q, p)).copy_from(w);
        }
        let mut rhs = DVector::zeros(p + q);
        for i in 0..p {
            rhs[i] = -g[i];
        }
        let lu = kkt.full_piv_lu();
        if let Some(sol) = lu.solve(&rhs) {
            if sol.iter().all(|v| v.is_finite()) {
                return Some((sol.rows(0, p).into_owned(), sol.rows(p, q).into_owned()));
            }
        }
        eps = (eps * 100.0).max(1e-14);
    }
    None
}

fn stack_working(aeq: &DMatrix<f64>, rows: &DMatrix<f64>, working: &[usize]) -> DMatrix<f64> {
    let me = aeq.nrows();
    let p = rows.ncols().max(aeq.ncols());
    let mut w = DMatrix::zeros(me + working.len(), p);
    if me > 0 {
        w.view_mut((0, 0), (me, p)).copy_from(aeq);
    }
    for (k, &i) in working.iter().enumerate() {
        w.row_mut(me + k).copy_from(&rows.row(i));
    }
    w
}

struct CoreResult {
    x: DVector<f64>,
    working: Vec<usize>,
    nu_eq: DVector<f64>,
    nu_working: Vec<f64>,
    status: QpStatus,
    iterations: usize,
}

/// Active-set iteration from a feasible `x0`. `rows`/`rhs` are all
/// inequality rows; the working set starts empty and changes one row at a
/// time, so the stacked working matrix keeps full row rank (a blocking row
/// satisfies `a'p > 0` while `W·p = 0`, hence is independent of `W`).
fn active_set_core(internal: &Internal, x0: DVector<f64>, max_iter: usize) -> CoreResult {
    let mut x = x0;
    let mut working: Vec<usize> = Vec::new();
    let mut nu_eq = DVector::zeros(internal.aeq.nrows());
    let mut nu_working: Vec<f64> = Vec::new();
    let m_all = internal.rows.nrows();
    let me = internal.aeq.nrows();

    for iter in 1..=max_iter {
        let g = &internal.h * &x + &internal.f;
        let w = stack_working(&internal.aeq, &internal.rows, &working);
        let Some((step, nu)) = kkt_step(&internal.h, &g, &w, internal.ridge) else {
            return CoreResult {
                x,
                working,
                nu_eq,
                nu_working,
                status: QpStatus::MaxIter,
                iterations: iter,
            };
        };
        nu_eq = nu.rows(0, me).into_owned();
        nu_working = nu.rows(me, working.len()).iter().cloned().collect();

        // Stationary when the step vanishes, or when the KKT residual on
        // the working set does. The second test matters for singular H: a
        // null-space gradient component of rounding size, divided by the
        // ridge, yields a persistent drift step that never shrinks even
        // though the iterate is already first-order optimal.
        let step_tol = 1e-10 * x.amax().max(1.0);
        let kkt_resid = (&g + w.tr_mul(&nu)).amax();
        if step.amax() <= step_tol || kkt_resid <= 1e-10 * g.amax().max(1.0) {
            // Stationary on the working set: check multiplier signs.
            let mut drop_at: Option<(usize, f64)> = None;
            for (k, &mu) in nu_working.iter().enumerate() {
                if mu < -MULT_TOL && drop_at.is_none_or(|(_, best)| mu < best) {
                    drop_at = Some((k, mu));
                }
            }
            match drop_at {
                None => {
                    return CoreResult {
                        x,
                        working,
                        nu_eq,
                        nu_working,
                        status: QpStatus::Optimal,
                        iterations: iter,
                    };
                }
                Some((k, _)) => {
                    working.remove(k);
                    nu_working.remove(k);
                    continue;
                }
            }
        }

        // Ratio test over non-working rows with ascent along the step.
        let mut alpha = 1.0_f64;
        let mut blocker: Option<usize> = None;
        let step_norm = step.norm();
        for i in 0..m_all {
            if working.contains(&i) {
                continue;
            }
            let row = internal.rows.row(i);
            let dir = row.transpose().dot(&step);
            if dir <= 1e-12 * row.norm() * step_norm {
                continue;
            }
            let slack = internal.rhs[i] - row.transpose().dot(&x);
            let a = (slack / dir).max(0.0);
            if a < alpha - 1e-15 {
                alpha = a;
                blocker = Some(i);
            }
        }
        x.axpy(alpha, &step, 1.0);
        if let Some(i) = blocker {
            working.push(i);
            working.sort_unstable();
            nu_working = vec![0.0; working.len()];
        }
    }

    CoreResult {
        x,
        working,
        nu_eq,
        nu_working,
        status: QpStatus::MaxIter,
        iterations: max_iter,
    }
}

/// Least-squares correction of `x` onto the equality manifold.
fn project_equalities(aeq: &DMatrix<f64>, beq: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    if aeq.nrows() == 0 {
        return x.clone();
    }
    let residual = aeq * x - beq;
    let svd = aeq.clone().svd(true, true);
    let cutoff = svd.singular_values.amax() * 1e-12;
    match svd.solve(&residual, cutoff) {
        Ok(correction) => x - correction,
        Err(_) => x.clone(),
    }
}

fn violations(internal: &Internal, x: &DVector<f64>) -> f64 {
    let mut worst = 0.0_f64;
    if internal.aeq.nrows() > 0 {
        worst = (&internal.aeq * x - &internal.beq).amax();
    }
    for i in 0..internal.rows.nrows() {
        let r = internal.rows.row(i).transpose().dot(x) - internal.rhs[i];
        worst = worst.max(r);
    }
    worst
}

enum Phase1 {
    Feasible(DVector<f64>, usize),
    Infeasible(DVector<f64>, usize, f64),
}

/// Finds a feasible point: equality projection of the seed (the caller's
/// start when one exists), then a slack QP driving inequality violations to
/// zero.
fn phase1(internal: &Internal, seed: Option<&DVector<f64>>) -> Phase1 {
    let p = internal.f.len();
    let m = internal.rows.nrows();
    let seed = seed.cloned().unwrap_or_else(|| DVector::zeros(p));
    let base = project_equalities(&internal.aeq, &internal.beq, &seed);
    if violations(internal, &base) <= FEAS_TOL {
        return Phase1::Feasible(base, 0);
    }
    if m == 0 {
        // Only equalities can be violated here; projection already did its
        // best, so the system is inconsistent beyond tolerance.
        let worst = violations(internal, &base);
        return Phase1::Infeasible(base, 0, worst);
    }

    // Slack program over (x, s): min ½‖s‖² s.t. Aeq·x = beq,
    // A·x − s ≤ b, −s ≤ 0, started at s = max(0, A·base − b).
    let pm = p + m;
    let mut h = DMatrix::zeros(pm, pm);
    for i in p..pm {
        h[(i, i)] = 1.0;
    }
    let f = DVector::zeros(pm);
    let mut rows = DMatrix::zeros(2 * m, pm);
    let mut rhs = DVector::zeros(2 * m);
    for i in 0..m {
        for j in 0..p {
            rows[(i, j)] = internal.rows[(i, j)];
        }
        rows[(i, p + i)] = -1.0;
        rhs[i] = internal.rhs[i];
        rows[(m + i, p + i)] = -1.0;
    }
    let me = internal.aeq.nrows();
    let mut aeq = DMatrix::zeros(me, pm);
    if me > 0 {
        aeq.view_mut((0, 0), (me, p)).copy_from(&internal.aeq);
    }
    let aug = Internal {
        h,
        f,
        rows,
        rhs,
        n_user: 2 * m,
        aeq,
        beq: internal.beq.clone(),
        kept_eq: internal.kept_eq.clone(),
        n_eq_orig: me,
        ridge: RIDGE_REL,
        max_iter: 50 * (pm + 2 * m),
    };
    let mut x0 = DVector::zeros(pm);
    x0.rows_mut(0, p).copy_from(&base);
    for i in 0..m {
        let v = internal.rows.row(i).transpose().dot(&base) - internal.rhs[i];
        x0[p + i] = v.max(0.0);
    }
    let result = active_set_core(&aug, x0, aug.max_iter);
    let x = result.x.rows(0, p).into_owned();
    let x = project_equalities(&internal.aeq, &internal.beq, &x);
    let worst = violations(internal, &x);
    if worst <= FEAS_TOL {
        Phase1::Feasible(x, result.iterations)
    } else {
        Phase1::Infeasible(x, result.iterations, worst)
    }
}

fn objective(problem: &QpProblem, x: &DVector<f64>) -> f64 {
    let hsym = (&problem.h + problem.h.transpose()) * 0.5;
    0.5 * (&hsym * x).dot(x) + problem.f.dot(x)
}

fn assemble_solution(
    problem: &QpProblem,
    internal: &Internal,
    core: CoreResult,
    extra_iterations: usize,
) -> QpSolution {
    let x = project_equalities(&internal.aeq, &internal.beq, &core.x);
    let mut eq_multipliers = DVector::zeros(internal.n_eq_orig);
    for (k, &orig) in internal.kept_eq.iter().enumerate() {
        eq_multipliers[orig] = core.nu_eq[k];
    }
    let n_bound = internal.rows.nrows() - internal.n_user;
    let mut ineq_multipliers = DVector::zeros(internal.n_user);
    let mut bound_multipliers = DVector::zeros(n_bound);
    for (&row, &mu) in core.working.iter().zip(&core.nu_working) {
        let mu = mu.max(0.0);
        if row < internal.n_user {
            ineq_multipliers[row] = mu;
        } else {
            bound_multipliers[row - internal.n_user] = mu;
        }
    }
    let objective = objective(problem, &x);
    QpSolution {
        x,
        eq_multipliers,
        ineq_multipliers,
        bound_multipliers,
        status: core.status,
        iterations: core.iterations + extra_iterations,
        objective,
    }
}

fn infeasible_solution(problem: &QpProblem, x: DVector<f64>, iterations: usize) -> QpSolution {
    let objective = objective(problem, &x);
    QpSolution {
        x,
        eq_multipliers: DVector::zeros(problem.aeq.nrows()),
        ineq_multipliers: DVector::zeros(problem.a.nrows()),
        bound_multipliers: DVector::zeros(0),
        status: QpStatus::Infeasible,
        iterations,
        objective,
    }
}

/// Solves the problem. Structural defects (dimension mismatches, asymmetric
/// or indefinite `H`) are `Err`; infeasibility and iteration exhaustion are
/// reported in [`QpSolution::status`].
pub fn solve(problem: &QpProblem) -> Result<QpSolution> {
    let internal = match validate(problem) {
        Ok(i) => i,
        Err(Error::Infeasible(_)) => {
            // Contradictory equality system detected during reduction.
            let p = problem.p();
            return Ok(infeasible_solution(problem, DVector::zeros(p), 0));
        }
        Err(e) => return Err(e),
    };

    let (x0, phase_iters) = match problem.start.as_ref() {
        Some(start) if violations(&internal, start) <= FEAS_TOL => (start.clone(), 0),
        other => match phase1(&internal, other) {
            Phase1::Feasible(x, iters) => (x, iters),
            Phase1::Infeasible(x, iters, _) => {
                return Ok(infeasible_solution(problem, x, iters));
            }
        },
    };

    let core = active_set_core(&internal, x0, internal.max_iter);
    Ok(assemble_solution(problem, &internal, core, phase_iters))
}

/// Returns a point satisfying all constraints within 1e−8, from the user
/// start when already feasible, otherwise by phase-1.
pub fn feasible_start(problem: &QpProblem) -> Result<DVector<f64>> {
    let internal = validate(problem)?;
    if let Some(start) = problem.start.as_ref() {
        if violations(&internal, start) <= FEAS_TOL {
            return Ok(start.clone());
        }
    }
    match phase1(&internal, problem.start.as_ref()) {
        Phase1::Feasible(x, _) => Ok(x),
        Phase1::Infeasible(_, _, worst) => Err(Error::Infeasible(format!(
            "phase-1 minimum constraint violation {worst:e} exceeds {FEAS_TOL:e}"
        ))),
    }
}

/// Recomputes KKT residuals for a solution against its problem.
pub fn kkt_report(problem: &QpProblem, solution: &QpSolution) -> Result<KktReport> {
    let p = problem.p();
    if solution.x.len() != p
        || solution.eq_multipliers.len() != problem.aeq.nrows()
        || solution.ineq_multipliers.len() != problem.a.nrows()
    {
        return Err(Error::DimensionMismatch(
            "solution dimensions do not match problem".into(),
        ));
    }
    let x = &solution.x;
    let eq_residual = if problem.aeq.nrows() > 0 {
        (&problem.aeq * x - &problem.beq).amax()
    } else {
        0.0
    };

    let (brows, brhs) = bound_rows(&problem.lower, &problem.upper);
    if solution.bound_multipliers.len() != brows.nrows() {
        return Err(Error::DimensionMismatch(
            "bound multiplier count does not match finite bounds".into(),
        ));
    }
    let mut ineq_residual = 0.0_f64;
    let mut complementarity = 0.0_f64;
    let mut active = Vec::new();
    for i in 0..problem.a.nrows() {
        let r = problem.a.row(i).transpose().dot(x) - problem.b[i];
        ineq_residual = ineq_residual.max(r);
        complementarity = complementarity.max((solution.ineq_multipliers[i] * r).abs());
        if r.abs() <= FEAS_TOL {
            active.push(i);
        }
    }
    for i in 0..brows.nrows() {
        let r = brows.row(i).transpose().dot(x) - brhs[i];
        ineq_residual = ineq_residual.max(r);
        complementarity = complementarity.max((solution.bound_multipliers[i] * r).abs());
    }
    let ineq_residual = ineq_residual.max(0.0);

    let hsym = (&problem.h + problem.h.transpose()) * 0.5;
    let mut grad = &hsym * x + &problem.f;
    if problem.aeq.nrows() > 0 {
        grad += problem.aeq.transpose() * &solution.eq_multipliers;
    }
    if problem.a.nrows() > 0 {
        grad += problem.a.transpose() * &solution.ineq_multipliers;
    }
    if brows.nrows() > 0 {
        grad += brows.transpose() * &solution.bound_multipliers;
    }
    Ok(KktReport {
        eq_residual,
        ineq_residual,
        stationarity: grad.amax(),
        complementarity,
        active,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_qp(p: usize) -> QpProblem {
        QpProblem::new(DMatrix::identity(p, p) * 2.0, DVector::zeros(p))
    }

    fn row(p: usize, entries: &[(usize, f64)]) -> Vec<f64> {
        let mut r = vec![0.0; p];
        for &(j, v) in entries {
            r[j] = v;
        }
        r
    }

    #[test]
    fn symmetric_equality_split() {
        let mut qp = identity_qp(2);
        qp.aeq = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        qp.beq = DVector::from_element(1, 1.0);
        let sol = solve(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(sol.x[1], 0.5, epsilon = 1e-9);
        assert_relative_eq!(sol.objective, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn active_inequality_shifts_solution() {
        let mut qp = identity_qp(2);
        qp.aeq = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        qp.beq = DVector::from_element(1, 1.0);
        qp.a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        qp.b = DVector::from_element(1, 0.2);
        let sol = solve(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 0.2, epsilon = 1e-8);
        assert_relative_eq!(sol.x[1], 0.8, epsilon = 1e-8);
        assert!(sol.ineq_multipliers[0] > 0.0);
        let report = kkt_report(&qp, &sol).unwrap();
        assert!(report.eq_residual <= 1e-8);
        assert!(report.ineq_residual <= 1e-8);
        assert!(report.stationarity <= 1e-6);
        assert!(report.complementarity <= 1e-6);
        assert_eq!(report.active, vec![0]);
    }

    #[test]
    fn equality_only_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let p = rng.random_range(2..7);
            let me = rng.random_range(1..p);
            let base = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
            let h = &base * base.transpose() + DMatrix::identity(p, p) * 0.5;
            let f = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
            let aeq = DMatrix::from_fn(me, p, |_, _| rng.random_range(-1.0..1.0));
            let beq = DVector::from_fn(me, |_, _| rng.random_range(-1.0..1.0));

            let mut qp = QpProblem::new(h.clone(), f.clone());
            qp.aeq = aeq.clone();
            qp.beq = beq.clone();
            let sol = solve(&qp).unwrap();
            assert_eq!(sol.status, QpStatus::Optimal);

            let mut kkt = DMatrix::zeros(p + me, p + me);
            kkt.view_mut((0, 0), (p, p)).copy_from(&h);
            kkt.view_mut((0, p), (p, me)).copy_from(&aeq.transpose());
            kkt.view_mut((p, 0), (me, p)).copy_from(&aeq);
            let mut rhs = DVector::zeros(p + me);
            rhs.rows_mut(0, p).copy_from(&(-&f));
            rhs.rows_mut(p, me).copy_from(&beq);
            let closed = kkt.full_piv_lu().solve(&rhs).unwrap();
            for i in 0..p {
                assert_relative_eq!(sol.x[i], closed[i], epsilon = 1e-9, max_relative = 1e-9);
            }
            for k in 0..me {
                assert_relative_eq!(
                    sol.eq_multipliers[k],
                    closed[p + k],
                    epsilon = 1e-7,
                    max_relative = 1e-7
                );
            }
        }
    }

    /// Enumerates every subset of inequality rows as a candidate active set,
    /// solves the resulting equality-constrained KKT system, and keeps the
    /// best feasible candidate with nonnegative multipliers.
    fn enumeration_oracle(qp: &QpProblem) -> Option<(DVector<f64>, f64)> {
        let p = qp.p();
        let m = qp.a.nrows();
        let me = qp.aeq.nrows();
        let mut best: Option<(DVector<f64>, f64)> = None;
        for mask in 0..(1u32 << m) {
            let subset: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let k = subset.len();
            let dim = p + k + me;
            let mut kkt = DMatrix::zeros(dim, dim);
            kkt.view_mut((0, 0), (p, p))
                .copy_from(&((&qp.h + qp.h.transpose()) * 0.5));
            for (r, &i) in subset.iter().enumerate() {
                for j in 0..p {
                    kkt[(j, p + r)] = qp.a[(i, j)];
                    kkt[(p + r, j)] = qp.a[(i, j)];
                }
            }
            for r in 0..me {
                for j in 0..p {
                    kkt[(j, p + k + r)] = qp.aeq[(r, j)];
                    kkt[(p + k + r, j)] = qp.aeq[(r, j)];
                }
            }
            let mut rhs = DVector::zeros(dim);
            for j in 0..p {
                rhs[j] = -qp.f[j];
            }
            for (r, &i) in subset.iter().enumerate() {
                rhs[p + r] = qp.b[i];
            }
            for r in 0..me {
                rhs[p + k + r] = qp.beq[r];
            }
            let lu = kkt.clone().full_piv_lu();
            let Some(sol) = lu.solve(&rhs) else { continue };
            if (kkt * &sol - rhs).amax() > 1e-8 {
                continue;
            }
            let x = sol.rows(0, p).into_owned();
            let feasible = (0..m).all(|i| {
                qp.a.row(i).transpose().dot(&x) - qp.b[i] <= 1e-8
            }) && (0..me).all(|r| {
                (qp.aeq.row(r).transpose().dot(&x) - qp.beq[r]).abs() <= 1e-8
            });
            if !feasible {
                continue;
            }
            if (0..k).any(|r| sol[p + r] < -1e-8) {
                continue;
            }
            let obj = objective(qp, &x);
            if best.as_ref().is_none_or(|(_, b)| obj < *b) {
                best = Some((x, obj));
            }
        }
        best
    }

    fn random_qp(rng: &mut ChaCha8Rng, p: usize) -> QpProblem {
        let base = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
        let h = &base * base.transpose() + DMatrix::identity(p, p) * 1.0;
        let f = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
        let mut qp = QpProblem::new(h, f);
        let m = rng.random_range(1..6);
        qp.a = DMatrix::from_fn(m, p, |_, _| rng.random_range(-1.0..1.0));
        qp.b = DVector::from_fn(m, |_, _| rng.random_range(0.1..1.5));
        if rng.random_range(0..2) == 1 && p >= 2 {
            qp.aeq = DMatrix::from_fn(1, p, |_, _| rng.random_range(-1.0..1.0));
            qp.beq = DVector::from_fn(1, |_, _| rng.random_range(-0.5..0.5));
        }
        qp
    }

    #[test]
    fn matches_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut checked = 0;
        while checked < 40 {
            let p = rng.random_range(2..7);
            let qp = random_qp(&mut rng, p);
            let Some((ox, oobj)) = enumeration_oracle(&qp) else {
                continue;
            };
            let sol = solve(&qp).unwrap();
            assert_eq!(sol.status, QpStatus::Optimal, "problem {checked}");
            assert!(
                (sol.objective - oobj).abs() <= 1e-6,
                "objective {} vs oracle {}",
                sol.objective,
                oobj
            );
            for i in 0..p {
                assert!(
                    (sol.x[i] - ox[i]).abs() <= 1e-6,
                    "x[{i}] = {} vs oracle {}",
                    sol.x[i],
                    ox[i]
                );
            }
            checked += 1;
        }
    }

    #[test]
    fn feasible_start_satisfies_system() {
        let p = 6;
        let mut qp = identity_qp(p);
        // Scorecard-style system: in-weight pins plus a separation row.
        qp.aeq = DMatrix::from_row_slice(
            3,
            p,
            &[
                row(p, &[(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0), (4, 1.0), (5, 1.0)]),
                row(p, &[(1, 1.0)]),
                row(p, &[(4, 1.0)]),
            ]
            .concat(),
        );
        qp.beq = DVector::from_vec(vec![1.775, 0.0, 0.0]);
        qp.a = DMatrix::from_row_slice(2, p, &[row(p, &[(0, 1.0), (2, -1.0)]), row(p, &[(2, 1.0), (3, -1.0)])].concat());
        qp.b = DVector::zeros(2);
        let x = feasible_start(&qp).unwrap();
        assert!((&qp.aeq * &x - &qp.beq).amax() <= 1e-8);
        assert!(x[1].abs() <= 1e-8);
        assert!(x[4].abs() <= 1e-8);
        assert!((&qp.a * &x - &qp.b).max() <= 1e-8);
    }

    #[test]
    fn infeasible_pattern_pair_detected() {
        // S₁ ≤ 0 and −S₁ ≤ −1 cannot both hold.
        let mut qp = identity_qp(2);
        qp.a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
        qp.b = DVector::from_vec(vec![0.0, -1.0]);
        assert!(matches!(feasible_start(&qp), Err(Error::Infeasible(_))));
        let sol = solve(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn redundant_consistent_equality_is_dropped() {
        let mut qp = identity_qp(3);
        qp.aeq = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0, 0.0, 0.0, 1.0],
        );
        qp.beq = DVector::from_vec(vec![1.0, 2.0, 0.5]);
        let sol = solve(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(sol.x[1], 0.5, epsilon = 1e-9);
        assert_relative_eq!(sol.x[2], 0.5, epsilon = 1e-9);
        // Dropped row keeps a zero multiplier slot.
        assert_eq!(sol.eq_multipliers.len(), 3);
        assert_eq!(sol.eq_multipliers[1], 0.0);
    }

    #[test]
    fn contradictory_equalities_are_infeasible() {
        let mut qp = identity_qp(2);
        qp.aeq = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        qp.beq = DVector::from_vec(vec![1.0, 3.0]);
        let sol = solve(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn row_permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let qp = {
            let mut qp = random_qp(&mut rng, 5);
            qp.aeq = DMatrix::from_row_slice(2, 5, &[1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, -1.0, 0.0, 0.0]);
            qp.beq = DVector::from_vec(vec![1.0, 0.2]);
            qp
        };
        let base = solve(&qp).unwrap();
        assert_eq!(base.status, QpStatus::Optimal);

        let mut permuted = qp.clone();
        let order: Vec<usize> = (0..qp.a.nrows()).rev().collect();
        permuted.a = qp.a.select_rows(order.iter());
        permuted.b = DVector::from_iterator(order.len(), order.iter().map(|&i| qp.b[i]));
        permuted.aeq = DMatrix::from_row_slice(2, 5, &[0.0, 1.0, -1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        permuted.beq = DVector::from_vec(vec![0.2, 1.0]);
        let other = solve(&permuted).unwrap();
        assert_eq!(other.status, QpStatus::Optimal);
        assert!((&base.x - &other.x).amax() <= 1e-8);
    }

    #[test]
    fn optimal_beats_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = 4;
        let qp = {
            let mut qp = random_qp(&mut rng, p);
            qp.aeq = DMatrix::from_row_slice(1, p, &[1.0, 1.0, 1.0, 1.0]);
            qp.beq = DVector::from_element(1, 1.0);
            qp
        };
        let sol = solve(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);

        let svd = qp.aeq.clone().svd(true, true);
        let cutoff = svd.singular_values.amax() * 1e-12;
        let mut tried = 0;
        for _ in 0..100_000 {
            if tried >= 100 {
                break;
            }
            let z = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
            let correction = svd.solve(&(&qp.aeq * &z - &qp.beq), cutoff).unwrap();
            let candidate = &z - correction;
            let feasible = (0..qp.a.nrows())
                .all(|i| qp.a.row(i).transpose().dot(&candidate) - qp.b[i] <= 1e-8);
            if !feasible {
                continue;
            }
            tried += 1;
            assert!(sol.objective <= objective(&qp, &candidate) + 1e-8);
        }
        assert!(tried >= 100, "only {tried} feasible candidates found");
    }

    #[test]
    fn bounds_fold_into_inequalities() {
        // Minimize ‖x − (2, −3)‖²: unconstrained optimum outside the box.
        let h = DMatrix::identity(2, 2) * 2.0;
        let f = DVector::from_vec(vec![-4.0, 6.0]);
        let mut qp = QpProblem::new(h, f);
        qp.lower = DVector::from_vec(vec![0.0, -1.0]);
        qp.upper = DVector::from_vec(vec![1.0, 1.0]);
        let sol = solve(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(sol.x[1], -1.0, epsilon = 1e-8);
        assert_eq!(sol.bound_multipliers.len(), 4);
        let report = kkt_report(&qp, &sol).unwrap();
        assert!(report.stationarity <= 1e-6);
    }

    #[test]
    fn warm_start_is_honored() {
        let mut qp = identity_qp(2);
        qp.aeq = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        qp.beq = DVector::from_element(1, 1.0);
        qp.start = Some(DVector::from_vec(vec![0.5, 0.5]));
        let sol = solve(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(sol.iterations <= 2);
    }

    #[test]
    fn iteration_cap_reports_max_iter() {
        // Minimize ‖x − (2,2)‖² under x ≤ (1,1) from the feasible origin:
        // needs more than one active-set change.
        let h = DMatrix::identity(2, 2) * 2.0;
        let f = DVector::from_vec(vec![-4.0, -4.0]);
        let mut qp = QpProblem::new(h, f);
        qp.a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        qp.b = DVector::from_vec(vec![1.0, 1.0]);
        qp.start = Some(DVector::zeros(2));
        qp.max_iter = Some(1);
        let sol = solve(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::MaxIter);
        assert!(sol.x.iter().all(|v| v.is_finite()));

        let mut full = qp.clone();
        full.max_iter = None;
        let done = solve(&full).unwrap();
        assert_eq!(done.status, QpStatus::Optimal);
        assert_relative_eq!(done.x[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(done.x[1], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn structural_defects_are_errors() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let qp = QpProblem::new(h, DVector::zeros(2));
        assert!(matches!(solve(&qp), Err(Error::NotSymmetric(_))));

        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let qp = QpProblem::new(h, DVector::zeros(2));
        assert!(matches!(solve(&qp), Err(Error::NotPsd)));

        let mut qp = identity_qp(2);
        qp.lower = DVector::from_vec(vec![1.0, 0.0]);
        qp.upper = DVector::from_vec(vec![0.0, 1.0]);
        assert!(matches!(solve(&qp), Err(Error::DimensionMismatch(_))));

        let mut qp = identity_qp(2);
        qp.a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        qp.b = DVector::zeros(2);
        assert!(matches!(solve(&qp), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn zero_h_is_accepted_as_lp_like() {
        // H = 0 passes the PSD gate; the ridge keeps iterations finite.
        let mut qp = QpProblem::new(DMatrix::zeros(2, 2), DVector::from_vec(vec![1.0, 1.0]));
        qp.lower = DVector::from_vec(vec![0.0, 0.0]);
        qp.upper = DVector::from_vec(vec![1.0, 1.0]);
        let sol = solve(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(sol.x.amax() <= 1e-6);
    }

    #[test]
    fn kkt_report_detects_perturbation() {
        let mut qp = identity_qp(2);
        qp.aeq = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        qp.beq = DVector::from_element(1, 1.0);
        let sol = solve(&qp).unwrap();
        let clean = kkt_report(&qp, &sol).unwrap();
        let mut bumped = sol.clone();
        bumped.x[0] += 1e-2;
        let dirty = kkt_report(&qp, &bumped).unwrap();
        assert!(dirty.stationarity > clean.stationarity + 1e-3);
        assert!(dirty.eq_residual > clean.eq_residual);
    }
}
