//! Scorecard specification, design-matrix assembly, and the fitting
//! pipeline.
//!
//! A characteristic contributes discrete attribute indicators (sentinel
//! codes and labeled bins) and, when it has a liquid part, a block of
//! B-spline basis columns over its knot vector. Coefficient numbering is a
//! pure function of the spec: first the indicator columns of purely
//! discrete characteristics, then the discrete parts of liquid
//! characteristics, then the liquid basis blocks, each group in declared
//! characteristic order.
//!
//! `fit` runs the full pipeline: build the design matrix, split into
//! development and validation samples, compute divergence statistics, add
//! optional roughness penalties to the Hessian, assemble the engineered
//! constraints, solve the QP, rescale to weight-of-evidence units, and
//! evaluate validation divergence and plot series.

use crate::divstats::{self, RoughnessBlock};
use crate::engineering::{self, ConstraintSet, Pattern, Relation};
use crate::qpsolver::{self, KktReport, QpProblem, QpStatus};
use crate::splines::{self, KnotVector, SplineOrder};
use crate::{DMatrix, DVector, Error, Result};

/// A sentinel code mapped to its own attribute indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialValue {
    pub value: f64,
    pub label: String,
}

/// Half-open numeric bin `[low, high)`; the last bin of a characteristic is
/// closed at `high`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBin {
    pub low: f64,
    pub high: f64,
    pub label: String,
}

/// Continuous part of a characteristic. Values are clamped to
/// `[k(1), k(m)]` before basis evaluation, so the clamp bounds are the end
/// knots by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LiquidSpec {
    pub knots: KnotVector,
    pub order: SplineOrder,
    /// Plot the characteristic's axis on a shifted log scale.
    pub log_axis: bool,
    /// Step weights of a traditional scorecard over the knot intervals
    /// (`m−1` values), used for the comparison trace in plots.
    pub comparison_weights: Option<Vec<f64>>,
}

impl LiquidSpec {
    pub fn clamp_low(&self) -> f64 {
        self.knots.first()
    }

    pub fn clamp_high(&self) -> f64 {
        self.knots.last()
    }

    /// Number of basis columns, `m + order − 2`.
    pub fn basis_count(&self) -> usize {
        self.order.basis_count(self.knots.m())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicSpec {
    pub name: String,
    /// Column of the input data holding the raw values.
    pub source_column: String,
    pub special_values: Vec<SpecialValue>,
    pub discrete_bins: Vec<DiscreteBin>,
    pub liquid: Option<LiquidSpec>,
}

/// Reference to one coefficient: a raw 1-based index, or a characteristic
/// plus column label (`s1`..`sq` for basis columns, with `first`/`last`
/// aliases for the block ends).
#[derive(Debug, Clone, PartialEq)]
pub enum CoeffRef {
    Index(usize),
    Labeled { characteristic: String, label: String },
}

/// How centering groups are formed.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CenteringMode {
    /// No centering rows.
    #[default]
    None,
    /// One group per characteristic covering all its coefficients.
    Auto,
    /// Explicit groups.
    Groups(Vec<Vec<CoeffRef>>),
}

/// Declarative constraints, resolved against the design-matrix columns.
#[derive(Debug, Clone, Default)]
pub struct ConstraintDecls {
    pub inweights: Vec<(CoeffRef, f64)>,
    pub crosses: Vec<(CoeffRef, CoeffRef)>,
    pub centering: CenteringMode,
    pub patterns: Vec<(CoeffRef, CoeffRef, Relation)>,
}

/// Validation-sample membership: rows whose split column takes one of the
/// listed values.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRule {
    pub column: String,
    pub validation_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ScorecardSpec {
    pub characteristics: Vec<CharacteristicSpec>,
    pub constraints: ConstraintDecls,
    /// Target separation `d'S`.
    pub delta: f64,
    /// Ridge weight in the Hessian.
    pub lambda: f64,
    /// Curvature penalty weight applied to cubic liquid blocks.
    pub roughness_weight: f64,
    pub split: Option<SplitRule>,
    /// Warm-start coefficients for the QP.
    pub start_point: Option<Vec<f64>>,
}

/// Numeric table with named columns.
#[derive(Debug, Clone)]
pub struct DataSet {
    columns: Vec<String>,
    values: DMatrix<f64>,
}

impl DataSet {
    pub fn new(columns: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if columns.len() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} column names for {} data columns",
                columns.len(),
                values.ncols()
            )));
        }
        for (i, name) in columns.iter().enumerate() {
            if columns[..i].contains(name) {
                return Err(Error::InvalidSpec(format!("duplicate column '{name}'")));
            }
        }
        Ok(Self { columns, values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn column_names(&self) -> &[String] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn value(&self, row: usize, column: usize) -> f64 {
        self.values[(row, column)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Indicator,
    Basis,
}

/// Metadata for one design-matrix column.
#[derive(Debug, Clone)]
pub struct ColumnInfo {
    pub characteristic: String,
    pub label: String,
    pub kind: ColumnKind,
    /// 0-based position within the characteristic's basis block.
    pub basis_position: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub values: DMatrix<f64>,
    pub columns: Vec<ColumnInfo>,
}

impl DesignMatrix {
    pub fn p(&self) -> usize {
        self.columns.len()
    }
}

/// Plot axis treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisMode {
    Linear,
    /// Log₁₀ spacing of sample points, shifted by +1 when `k(1) = 0`.
    LogShifted,
}

/// Paired step and spline traces on a common axis.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub x_step: Vec<f64>,
    pub y_step: Vec<f64>,
    pub x_liquid: Vec<f64>,
    pub y_liquid: Vec<f64>,
    pub axis_mode: AxisMode,
}

#[derive(Debug, Clone)]
pub struct CharacteristicPlot {
    pub characteristic: String,
    pub series: PlotSeries,
}

/// QP outcome retained on the fit result.
#[derive(Debug, Clone)]
pub struct QpSummary {
    pub status: QpStatus,
    pub iterations: usize,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub columns: Vec<ColumnInfo>,
    pub coeffs_raw: DVector<f64>,
    /// Weight-of-evidence scale factor.
    pub beta: f64,
    pub coeffs_woe: DVector<f64>,
    pub dev_divergence: f64,
    /// `None` when the spec has no split rule or the validation sample is
    /// empty.
    pub val_divergence: Option<f64>,
    pub qp: QpSummary,
    pub kkt: KktReport,
    pub plot_series: Vec<CharacteristicPlot>,
}

fn spec_err(msg: String) -> Error {
    Error::InvalidSpec(msg)
}

/// Structural validation of a spec, independent of any data.
pub fn validate_spec(spec: &ScorecardSpec) -> Result<()> {
    if spec.characteristics.is_empty() {
        return Err(spec_err("no characteristics declared".into()));
    }
    if !spec.delta.is_finite() {
        return Err(spec_err(format!("delta must be finite, got {}", spec.delta)));
    }
    if spec.lambda < 0.0 {
        return Err(Error::NegativeWeight(spec.lambda));
    }
    if spec.roughness_weight < 0.0 {
        return Err(Error::NegativeWeight(spec.roughness_weight));
    }
    for (i, ch) in spec.characteristics.iter().enumerate() {
        if ch.name.is_empty() {
            return Err(spec_err(format!("characteristic {} has an empty name", i + 1)));
        }
        if spec.characteristics[..i].iter().any(|o| o.name == ch.name) {
            return Err(spec_err(format!("duplicate characteristic '{}'", ch.name)));
        }
        if ch.source_column.is_empty() {
            return Err(spec_err(format!("'{}' has no source column", ch.name)));
        }
        if ch.special_values.is_empty() && ch.discrete_bins.is_empty() && ch.liquid.is_none() {
            return Err(spec_err(format!(
                "'{}' declares no special values, bins, or liquid part",
                ch.name
            )));
        }
        for (j, sv) in ch.special_values.iter().enumerate() {
            if !sv.value.is_finite() {
                return Err(spec_err(format!(
                    "'{}' special value {} is not finite",
                    ch.name, sv.value
                )));
            }
            if ch.special_values[..j].iter().any(|o| o.value == sv.value) {
                return Err(spec_err(format!(
                    "'{}' lists special value {} twice",
                    ch.name, sv.value
                )));
            }
        }
        for bin in &ch.discrete_bins {
            if !bin.low.is_finite() || !bin.high.is_finite() || bin.low >= bin.high {
                return Err(spec_err(format!(
                    "'{}' bin [{}, {}) is empty, reversed, or not finite",
                    ch.name, bin.low, bin.high
                )));
            }
        }
        if let Some(liquid) = &ch.liquid {
            let lo = liquid.clamp_low();
            let hi = liquid.clamp_high();
            for sv in &ch.special_values {
                if (lo..=hi).contains(&sv.value) {
                    return Err(spec_err(format!(
                        "'{}' special value {} lies inside the liquid domain [{lo}, {hi}]",
                        ch.name, sv.value
                    )));
                }
            }
            for bin in &ch.discrete_bins {
                if bin.low <= hi && bin.high > lo {
                    return Err(spec_err(format!(
                        "'{}' bin [{}, {}) overlaps the liquid domain [{lo}, {hi}]",
                        ch.name, bin.low, bin.high
                    )));
                }
            }
            if let Some(w) = &liquid.comparison_weights {
                if w.len() + 1 != liquid.knots.m() {
                    return Err(Error::LengthMismatch(format!(
                        "'{}' comparison weights: {} values for {} knot intervals",
                        ch.name,
                        w.len(),
                        liquid.knots.m() - 1
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Deterministic column numbering for a validated spec.
pub fn design_columns(spec: &ScorecardSpec) -> Vec<ColumnInfo> {
    let mut columns = Vec::new();
    let indicators = |ch: &CharacteristicSpec, columns: &mut Vec<ColumnInfo>| {
        for sv in &ch.special_values {
            columns.push(ColumnInfo {
                characteristic: ch.name.clone(),
                label: sv.label.clone(),
                kind: ColumnKind::Indicator,
                basis_position: None,
            });
        }
        for bin in &ch.discrete_bins {
            columns.push(ColumnInfo {
                characteristic: ch.name.clone(),
                label: bin.label.clone(),
                kind: ColumnKind::Indicator,
                basis_position: None,
            });
        }
    };
    for ch in spec.characteristics.iter().filter(|c| c.liquid.is_none()) {
        indicators(ch, &mut columns);
    }
    for ch in spec.characteristics.iter().filter(|c| c.liquid.is_some()) {
        indicators(ch, &mut columns);
    }
    for ch in &spec.characteristics {
        if let Some(liquid) = &ch.liquid {
            for i in 0..liquid.basis_count() {
                columns.push(ColumnInfo {
                    characteristic: ch.name.clone(),
                    label: format!("s{}", i + 1),
                    kind: ColumnKind::Basis,
                    basis_position: Some(i),
                });
            }
        }
    }
    columns
}

/// 0-based column offsets of one characteristic within the design matrix.
struct CharLayout {
    source: usize,
    /// Indicator columns in declaration order (specials then bins).
    indicator_cols: Vec<usize>,
    /// Start of the basis block, when liquid.
    basis_start: Option<usize>,
}

fn layout(
    spec: &ScorecardSpec,
    columns: &[ColumnInfo],
    data: &DataSet,
) -> Result<Vec<CharLayout>> {
    spec.characteristics
        .iter()
        .map(|ch| {
            let source = data.column_index(&ch.source_column)?;
            let mine: Vec<usize> = columns
                .iter()
                .enumerate()
                .filter(|(_, c)| c.characteristic == ch.name)
                .map(|(i, _)| i)
                .collect();
            let indicator_cols: Vec<usize> = mine
                .iter()
                .copied()
                .filter(|&i| columns[i].kind == ColumnKind::Indicator)
                .collect();
            let basis_start = mine
                .iter()
                .copied()
                .find(|&i| columns[i].kind == ColumnKind::Basis);
            Ok(CharLayout {
                source,
                indicator_cols,
                basis_start,
            })
        })
        .collect()
}

/// Assembles the `n × p` design matrix: one indicator or one basis row per
/// record per characteristic. Liquid values outside the knot range are
/// clamped to the end knots before basis evaluation.
pub fn build_design_matrix(spec: &ScorecardSpec, data: &DataSet) -> Result<DesignMatrix> {
    validate_spec(spec)?;
    let columns = design_columns(spec);
    let layouts = layout(spec, &columns, data)?;
    let n = data.n();
    let mut values = DMatrix::zeros(n, columns.len());

    for (ch, lay) in spec.characteristics.iter().zip(&layouts) {
        for row in 0..n {
            let v = data.value(row, lay.source);
            let mut indicator_at = None;
            if v.is_finite() {
                indicator_at = ch
                    .special_values
                    .iter()
                    .position(|sv| sv.value == v)
                    .or_else(|| {
                        let nbins = ch.discrete_bins.len();
                        ch.discrete_bins
                            .iter()
                            .enumerate()
                            .position(|(i, bin)| {
                                let closed = i + 1 == nbins;
                                bin.low <= v && (v < bin.high || (closed && v == bin.high))
                            })
                            .map(|i| ch.special_values.len() + i)
                    });
            }
            match (indicator_at, &ch.liquid) {
                (Some(slot), _) => {
                    values[(row, lay.indicator_cols[slot])] = 1.0;
                }
                (None, Some(liquid)) if v.is_finite() => {
                    let x = v.clamp(liquid.clamp_low(), liquid.clamp_high());
                    let basis = splines::basis_row(x, &liquid.knots, liquid.order)
                        .expect("clamped value is inside the knot range");
                    let start = lay.basis_start.expect("liquid block exists");
                    for (i, b) in basis.iter().enumerate() {
                        values[(row, start + i)] = *b;
                    }
                }
                _ => {
                    return Err(Error::UnmatchedValue {
                        row,
                        value: v,
                        characteristic: ch.name.clone(),
                    });
                }
            }
        }
    }
    Ok(DesignMatrix { values, columns })
}

/// Partitions row indices into `(development, validation)` by the split
/// rule: a row is validation when its split-column value equals one of the
/// listed values.
pub fn split(data: &DataSet, rule: &SplitRule) -> Result<(Vec<usize>, Vec<usize>)> {
    let col = data.column_index(&rule.column)?;
    let mut dev = Vec::new();
    let mut val = Vec::new();
    for row in 0..data.n() {
        let v = data.value(row, col);
        if rule.validation_values.contains(&v) {
            val.push(row);
        } else {
            dev.push(row);
        }
    }
    Ok((dev, val))
}

fn resolve_ref(r: &CoeffRef, columns: &[ColumnInfo]) -> Result<usize> {
    let p = columns.len();
    match r {
        CoeffRef::Index(i) => {
            if *i == 0 || *i > p {
                return Err(Error::IndexOutOfRange { index: *i, p });
            }
            Ok(*i)
        }
        CoeffRef::Labeled {
            characteristic,
            label,
        } => {
            if !columns.iter().any(|c| &c.characteristic == characteristic) {
                return Err(spec_err(format!(
                    "constraint references unknown characteristic '{characteristic}'"
                )));
            }
            let matches: Vec<usize> = columns
                .iter()
                .enumerate()
                .filter(|(_, c)| &c.characteristic == characteristic)
                .filter(|(_, c)| match label.as_str() {
                    "first" => c.kind == ColumnKind::Basis && c.basis_position == Some(0),
                    "last" => {
                        c.kind == ColumnKind::Basis
                            && columns
                                .iter()
                                .filter(|o| {
                                    &o.characteristic == characteristic
                                        && o.kind == ColumnKind::Basis
                                })
                                .count()
                                == c.basis_position.map_or(0, |b| b + 1)
                    }
                    other => c.label == other,
                })
                .map(|(i, _)| i + 1)
                .collect();
            match matches.as_slice() {
                [] => Err(spec_err(format!(
                    "no coefficient labeled '{label}' in characteristic '{characteristic}'"
                ))),
                [only] => Ok(*only),
                many => Err(spec_err(format!(
                    "label '{label}' in characteristic '{characteristic}' is ambiguous \
                     ({} matches)",
                    many.len()
                ))),
            }
        }
    }
}

/// Resolves declarative constraints to the index-based [`ConstraintSet`].
pub fn resolve_constraints(
    spec: &ScorecardSpec,
    columns: &[ColumnInfo],
) -> Result<ConstraintSet> {
    let decls = &spec.constraints;
    let mut inweights = Vec::with_capacity(decls.inweights.len());
    for (r, value) in &decls.inweights {
        inweights.push((resolve_ref(r, columns)?, *value));
    }
    let mut crosses = Vec::with_capacity(decls.crosses.len());
    for (a, b) in &decls.crosses {
        crosses.push((resolve_ref(a, columns)?, resolve_ref(b, columns)?));
    }
    let centering_groups = match &decls.centering {
        CenteringMode::None => Vec::new(),
        CenteringMode::Auto => spec
            .characteristics
            .iter()
            .map(|ch| {
                columns
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.characteristic == ch.name)
                    .map(|(i, _)| i + 1)
                    .collect()
            })
            .collect(),
        CenteringMode::Groups(groups) => {
            let mut resolved = Vec::with_capacity(groups.len());
            for group in groups {
                let mut indices = Vec::with_capacity(group.len());
                for r in group {
                    indices.push(resolve_ref(r, columns)?);
                }
                resolved.push(indices);
            }
            resolved
        }
    };
    let mut patterns = Vec::with_capacity(decls.patterns.len());
    for (left, right, relation) in &decls.patterns {
        let (mut l, mut r) = (resolve_ref(left, columns)?, resolve_ref(right, columns)?);
        let mut relation = *relation;
        if l > r {
            // Normalize to left < right, flipping the relation.
            std::mem::swap(&mut l, &mut r);
            relation = match relation {
                Relation::Less => Relation::Greater,
                Relation::Greater => Relation::Less,
            };
        }
        patterns.push(Pattern {
            left: l,
            right: r,
            relation,
        });
    }
    Ok(ConstraintSet {
        inweights,
        crosses,
        centering_groups,
        patterns,
        delta: spec.delta,
    })
}

/// Score-weight step function over knot intervals: half-open, closed last.
pub fn step_eval(x: f64, weights: &[f64], knots: &KnotVector) -> Result<f64> {
    let m = knots.m();
    if weights.len() + 1 != m {
        return Err(Error::LengthMismatch(format!(
            "{} step weights for {} knot intervals",
            weights.len(),
            m - 1
        )));
    }
    if !x.is_finite() || !knots.contains(x) {
        return Err(Error::OutOfDomain {
            x,
            low: knots.first(),
            high: knots.last(),
        });
    }
    let k = knots.as_slice();
    for i in 0..m - 1 {
        let closed = i + 2 == m;
        if k[i] <= x && (x < k[i + 1] || (closed && x <= k[i + 1])) {
            return Ok(weights[i]);
        }
    }
    unreachable!("domain check covers all intervals")
}

/// Plot grid over the knot range: uniform in `x`, or uniform in
/// `log₁₀(x + shift)` with a +1 shift when `k(1) = 0`. Endpoints are the
/// end knots exactly.
pub fn axis_points(log_mode: bool, m_points: usize, knots: &KnotVector) -> Result<Vec<f64>> {
    if m_points < 1 {
        return Err(spec_err("axis needs at least 1 interval".into()));
    }
    let lo = knots.first();
    let hi = knots.last();
    let mut xs = Vec::with_capacity(m_points + 1);
    if log_mode {
        if lo < 0.0 {
            return Err(spec_err(format!(
                "log axis requires non-negative knots, got k(1) = {lo}"
            )));
        }
        let shift = if lo == 0.0 { 1.0 } else { 0.0 };
        let llo = (lo + shift).log10();
        let lhi = (hi + shift).log10();
        for i in 0..=m_points {
            let t = llo + (lhi - llo) * i as f64 / m_points as f64;
            xs.push(10f64.powf(t) - shift);
        }
    } else {
        for i in 0..=m_points {
            xs.push(lo + (hi - lo) * i as f64 / m_points as f64);
        }
    }
    xs[0] = lo;
    xs[m_points] = hi;
    Ok(xs)
}

/// Builds the paired step/spline traces for one liquid characteristic. The
/// step trace uses the supplied traditional weights when given; otherwise
/// it steps through the fitted spline's values at interval midpoints, a
/// step-scorecard rendering of the same fit.
pub fn plot_series(
    ch: &CharacteristicSpec,
    traditional_weights: Option<&[f64]>,
    coeffs: &[f64],
    m_points: usize,
) -> Result<PlotSeries> {
    let liquid = ch
        .liquid
        .as_ref()
        .ok_or_else(|| spec_err(format!("'{}' has no liquid part to plot", ch.name)))?;
    let knots = &liquid.knots;
    let xs = axis_points(liquid.log_axis, m_points, knots)?;
    let mut y_liquid = Vec::with_capacity(xs.len());
    for &x in &xs {
        y_liquid.push(splines::spline_eval(x, coeffs, knots, liquid.order)?);
    }
    let weights: Vec<f64> = match traditional_weights {
        Some(w) => {
            if w.len() + 1 != knots.m() {
                return Err(Error::LengthMismatch(format!(
                    "{} step weights for {} knot intervals",
                    w.len(),
                    knots.m() - 1
                )));
            }
            w.to_vec()
        }
        None => knots
            .as_slice()
            .windows(2)
            .map(|w| splines::spline_eval(0.5 * (w[0] + w[1]), coeffs, knots, liquid.order))
            .collect::<Result<_>>()?,
    };
    let mut y_step = Vec::with_capacity(xs.len());
    for &x in &xs {
        y_step.push(step_eval(x, &weights, knots)?);
    }
    Ok(PlotSeries {
        x_step: xs.clone(),
        y_step,
        x_liquid: xs,
        y_liquid,
        axis_mode: if liquid.log_axis {
            AxisMode::LogShifted
        } else {
            AxisMode::Linear
        },
    })
}

fn basis_block_range(columns: &[ColumnInfo], name: &str) -> Option<(usize, usize)> {
    let start = columns
        .iter()
        .position(|c| c.characteristic == name && c.kind == ColumnKind::Basis)?;
    let len = columns[start..]
        .iter()
        .take_while(|c| c.characteristic == name && c.kind == ColumnKind::Basis)
        .count();
    Some((start, len))
}

/// Runs the full fitting pipeline. Stage failures carry the stage name.
pub fn fit(spec: &ScorecardSpec, data: &DataSet, labels: &[bool]) -> Result<FitResult> {
    if labels.len() != data.n() {
        return Err(Error::LengthMismatch(format!(
            "{} labels for {} records",
            labels.len(),
            data.n()
        )));
    }
    let design = build_design_matrix(spec, data).map_err(|e| e.at_stage("build_design_matrix"))?;
    let p = design.p();

    let (dev_rows, val_rows) = match &spec.split {
        Some(rule) => split(data, rule).map_err(|e| e.at_stage("split"))?,
        None => ((0..data.n()).collect(), Vec::new()),
    };
    if dev_rows.is_empty() {
        return Err(Error::DegenerateClass("development sample is empty".into())
            .at_stage("split"));
    }
    let x_dev = design.values.select_rows(dev_rows.iter());
    let y_dev: Vec<bool> = dev_rows.iter().map(|&r| labels[r]).collect();

    let stats = divstats::divergence_stats(&x_dev, &y_dev)
        .map_err(|e| e.at_stage("divergence_stats(dev)"))?;

    let mut blocks = Vec::new();
    if spec.roughness_weight > 0.0 {
        for ch in &spec.characteristics {
            let Some(liquid) = &ch.liquid else { continue };
            if liquid.order != SplineOrder::Cubic {
                continue;
            }
            let (start, _) = basis_block_range(&design.columns, &ch.name)
                .expect("liquid characteristic has a basis block");
            blocks.push(RoughnessBlock {
                start,
                gram: splines::roughness_matrix(&liquid.knots).values,
                weight: spec.roughness_weight,
            });
        }
    }
    let h = divstats::h_matrix_with_roughness(&stats.c, spec.lambda, &blocks)
        .map_err(|e| e.at_stage("h_matrix"))?;

    let constraints = resolve_constraints(spec, &design.columns)
        .map_err(|e| e.at_stage("resolve_constraints"))?;
    let assembled = engineering::assemble(&stats, &constraints)
        .map_err(|e| e.at_stage("assemble"))?;

    let mut problem = QpProblem::new(h, DVector::zeros(p));
    problem.aeq = assembled.aeq;
    problem.beq = assembled.beq;
    problem.a = assembled.a;
    problem.b = assembled.b;
    if let Some(start) = &spec.start_point {
        if start.len() != p {
            return Err(Error::LengthMismatch(format!(
                "start point has {} entries for p = {p}",
                start.len()
            )));
        }
        problem.start = Some(DVector::from_vec(start.clone()));
    }
    let solution = qpsolver::solve(&problem).map_err(|e| e.at_stage("qp_solve"))?;
    if solution.status == QpStatus::Infeasible {
        return Err(Error::Infeasible(
            "constraint system has no feasible point".into(),
        )
        .at_stage("qp_solve"));
    }
    let kkt = qpsolver::kkt_report(&problem, &solution).map_err(|e| e.at_stage("qp_solve"))?;

    let woe = divstats::woe_scale(&solution.x, &x_dev, &y_dev)
        .map_err(|e| e.at_stage("woe_scale"))?;

    let val_divergence = if val_rows.is_empty() {
        None
    } else {
        let x_val = design.values.select_rows(val_rows.iter());
        let y_val: Vec<bool> = val_rows.iter().map(|&r| labels[r]).collect();
        Some(
            divstats::score_divergence(&woe.coeffs_woe, &x_val, &y_val)
                .map_err(|e| e.at_stage("score_divergence(val)"))?,
        )
    };

    let mut plots = Vec::new();
    for ch in &spec.characteristics {
        let Some(liquid) = &ch.liquid else { continue };
        let (start, len) =
            basis_block_range(&design.columns, &ch.name).expect("liquid block exists");
        let coeffs: Vec<f64> = woe.coeffs_woe.rows(start, len).iter().cloned().collect();
        let series = plot_series(
            ch,
            liquid.comparison_weights.as_deref(),
            &coeffs,
            100,
        )
        .map_err(|e| e.at_stage("plot_series"))?;
        plots.push(CharacteristicPlot {
            characteristic: ch.name.clone(),
            series,
        });
    }

    Ok(FitResult {
        columns: design.columns,
        coeffs_raw: solution.x.clone(),
        beta: woe.beta,
        coeffs_woe: woe.coeffs_woe,
        dev_divergence: woe.div,
        val_divergence,
        qp: QpSummary {
            status: solution.status,
            iterations: solution.iterations,
            objective: solution.objective,
        },
        kkt,
        plot_series: plots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn knots170() -> KnotVector {
        KnotVector::new(vec![0.0, 5.0, 25.0, 35.0, 300.0, 1000.0]).unwrap()
    }

    /// A spec shaped like the months-on-books characteristic: one sentinel
    /// plus a cubic liquid part on six knots.
    fn mob_char(order: SplineOrder) -> CharacteristicSpec {
        CharacteristicSpec {
            name: "months_on_books".into(),
            source_column: "mob".into(),
            special_values: vec![SpecialValue {
                value: -9999999.0,
                label: "NO INFORMATION".into(),
            }],
            discrete_bins: vec![],
            liquid: Some(LiquidSpec {
                knots: knots170(),
                order,
                log_axis: true,
                comparison_weights: None,
            }),
        }
    }

    fn single_char_spec(order: SplineOrder) -> ScorecardSpec {
        ScorecardSpec {
            characteristics: vec![mob_char(order)],
            constraints: ConstraintDecls::default(),
            delta: 1.0,
            lambda: 0.0,
            roughness_weight: 0.0,
            split: None,
            start_point: None,
        }
    }

    fn dataset(rows: &[(f64, f64)]) -> DataSet {
        // columns: mob, sn
        let mut values = DMatrix::zeros(rows.len(), 2);
        for (r, &(mob, sn)) in rows.iter().enumerate() {
            values[(r, 0)] = mob;
            values[(r, 1)] = sn;
        }
        DataSet::new(vec!["mob".into(), "sn".into()], values).unwrap()
    }

    #[test]
    fn numbering_follows_three_sections() {
        let purely_discrete = CharacteristicSpec {
            name: "region".into(),
            source_column: "region".into(),
            special_values: vec![
                SpecialValue { value: 1.0, label: "NORTH".into() },
                SpecialValue { value: 2.0, label: "SOUTH".into() },
            ],
            discrete_bins: vec![],
            liquid: None,
        };
        let spec = ScorecardSpec {
            characteristics: vec![mob_char(SplineOrder::Cubic), purely_discrete],
            constraints: ConstraintDecls::default(),
            delta: 1.0,
            lambda: 0.0,
            roughness_weight: 0.0,
            split: None,
            start_point: None,
        };
        let columns = design_columns(&spec);
        // Section 1: region's 2 indicators; section 2: the sentinel of the
        // liquid characteristic; section 3: its 8 basis columns.
        assert_eq!(columns.len(), 2 + 1 + 8);
        assert_eq!(columns[0].characteristic, "region");
        assert_eq!(columns[1].characteristic, "region");
        assert_eq!(columns[2].label, "NO INFORMATION");
        assert_eq!(columns[3].label, "s1");
        assert_eq!(columns[10].label, "s8");
        assert!(columns[3..].iter().all(|c| c.kind == ColumnKind::Basis));
    }

    #[test]
    fn design_rows_for_sentinel_clamped_and_interior_values() {
        let spec = single_char_spec(SplineOrder::Cubic);
        let data = dataset(&[(-9999999.0, 0.0), (1500.0, 0.0), (3.0, 0.0)]);
        let design = build_design_matrix(&spec, &data).unwrap();
        assert_eq!(design.p(), 9);

        // Sentinel row: indicator set, basis zero.
        assert_eq!(design.values[(0, 0)], 1.0);
        assert_eq!(design.values.row(0).columns(1, 8).amax(), 0.0);

        // 1500 clamps to the right end knot: last basis function pinned.
        assert_eq!(design.values[(1, 0)], 0.0);
        assert_eq!(design.values[(1, 8)], 1.0);
        assert_eq!(design.values.row(1).columns(1, 7).amax(), 0.0);

        // Interior value: basis row sums to one, supported on the first
        // four cubic functions.
        let row: Vec<f64> = design.values.row(2).columns(1, 8).iter().cloned().collect();
        assert_relative_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(row[..4].iter().all(|&v| v > 0.0));
        assert!(row[4..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn partition_of_unity_per_characteristic() {
        let spec = single_char_spec(SplineOrder::Cubic);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                if i % 17 == 0 {
                    (-9999999.0, 0.0)
                } else {
                    (rng.random_range(-50.0..1200.0), 0.0)
                }
            })
            .collect();
        let design = build_design_matrix(&spec, &dataset(&rows)).unwrap();
        for r in 0..design.values.nrows() {
            let total: f64 = design.values.row(r).iter().sum();
            assert!((total - 1.0).abs() <= 1e-12, "row {r} sums to {total}");
        }
    }

    #[test]
    fn unmatched_values_are_rejected() {
        let spec = ScorecardSpec {
            characteristics: vec![CharacteristicSpec {
                name: "code".into(),
                source_column: "mob".into(),
                special_values: vec![SpecialValue { value: 1.0, label: "A".into() }],
                discrete_bins: vec![],
                liquid: None,
            }],
            constraints: ConstraintDecls::default(),
            delta: 1.0,
            lambda: 0.0,
            roughness_weight: 0.0,
            split: None,
            start_point: None,
        };
        let err = build_design_matrix(&spec, &dataset(&[(1.0, 0.0), (7.0, 0.0)]))
            .unwrap_err();
        match err.root() {
            Error::UnmatchedValue { row, value, characteristic } => {
                assert_eq!(*row, 1);
                assert_eq!(*value, 7.0);
                assert_eq!(characteristic, "code");
            }
            other => panic!("unexpected error {other:?}"),
        }

        let nan = build_design_matrix(&spec, &dataset(&[(f64::NAN, 0.0)]));
        assert!(matches!(
            nan.unwrap_err().root(),
            Error::UnmatchedValue { .. }
        ));
    }

    #[test]
    fn discrete_bins_match_half_open_with_closed_last() {
        let spec = ScorecardSpec {
            characteristics: vec![CharacteristicSpec {
                name: "util".into(),
                source_column: "mob".into(),
                special_values: vec![],
                discrete_bins: vec![
                    DiscreteBin { low: 0.0, high: 50.0, label: "LOW".into() },
                    DiscreteBin { low: 50.0, high: 100.0, label: "HIGH".into() },
                ],
                liquid: None,
            }],
            constraints: ConstraintDecls::default(),
            delta: 1.0,
            lambda: 0.0,
            roughness_weight: 0.0,
            split: None,
            start_point: None,
        };
        let design = build_design_matrix(
            &spec,
            &dataset(&[(0.0, 0.0), (49.9, 0.0), (50.0, 0.0), (100.0, 0.0)]),
        )
        .unwrap();
        assert_eq!(design.values[(0, 0)], 1.0);
        assert_eq!(design.values[(1, 0)], 1.0);
        assert_eq!(design.values[(2, 1)], 1.0);
        assert_eq!(design.values[(3, 1)], 1.0);

        let out = build_design_matrix(&spec, &dataset(&[(100.5, 0.0)]));
        assert!(matches!(
            out.unwrap_err().root(),
            Error::UnmatchedValue { .. }
        ));
    }

    #[test]
    fn spec_validation_catches_conflicts() {
        let mut spec = single_char_spec(SplineOrder::Cubic);
        spec.characteristics[0].special_values[0].value = 500.0;
        assert!(matches!(
            validate_spec(&spec),
            Err(Error::InvalidSpec(_))
        ));

        let mut spec = single_char_spec(SplineOrder::Cubic);
        spec.roughness_weight = -1.0;
        assert!(matches!(validate_spec(&spec), Err(Error::NegativeWeight(_))));

        let mut spec = single_char_spec(SplineOrder::Cubic);
        spec.characteristics.push(spec.characteristics[0].clone());
        assert!(matches!(validate_spec(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn split_partitions_rows() {
        let data = dataset(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0)]);
        let rule = SplitRule { column: "sn".into(), validation_values: vec![1.0, 4.0] };
        let (dev, val) = split(&data, &rule).unwrap();
        assert_eq!(dev, vec![1, 2]);
        assert_eq!(val, vec![0, 3]);

        let missing = SplitRule { column: "nope".into(), validation_values: vec![] };
        assert!(matches!(
            split(&data, &missing),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn step_eval_examples() {
        let weights = [0.306, 0.157, -0.067, -0.259, -0.888];
        let knots = knots170();
        assert_eq!(step_eval(3.0, &weights, &knots).unwrap(), 0.306);
        assert_eq!(step_eval(1000.0, &weights, &knots).unwrap(), -0.888);
        assert_eq!(step_eval(5.0, &weights, &knots).unwrap(), 0.157);
        assert!(matches!(
            step_eval(-1.0, &weights, &knots),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            step_eval(3.0, &weights[..4], &knots),
            Err(Error::LengthMismatch(_))
        ));
    }

    #[test]
    fn axis_point_examples() {
        let lin = axis_points(false, 4, &KnotVector::new(vec![0.0, 8.0]).unwrap()).unwrap();
        assert_eq!(lin, vec![0.0, 2.0, 4.0, 6.0, 8.0]);

        let log = axis_points(true, 2, &KnotVector::new(vec![0.0, 99.0]).unwrap()).unwrap();
        assert_relative_eq!(log[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(log[1], 9.0, epsilon = 1e-12);
        assert_relative_eq!(log[2], 99.0, epsilon = 1e-12);

        let one = axis_points(true, 1, &KnotVector::new(vec![1.0, 100.0]).unwrap()).unwrap();
        assert_eq!(one, vec![1.0, 100.0]);

        assert!(axis_points(true, 3, &KnotVector::new(vec![-1.0, 5.0]).unwrap()).is_err());
        assert!(axis_points(false, 0, &knots170()).is_err());
    }

    #[test]
    fn plot_series_endpoints_and_shape() {
        let ch = mob_char(SplineOrder::Cubic);
        let coeffs = [1.0, 0.8, 0.4, 0.1, -0.2, -0.5, -0.7, -0.9];
        let series = plot_series(&ch, None, &coeffs, 100).unwrap();
        assert_eq!(series.x_liquid.len(), 101);
        assert_eq!(series.y_liquid.len(), 101);
        assert_eq!(series.y_step.len(), 101);
        assert_eq!(series.axis_mode, AxisMode::LogShifted);
        // Endpoint values equal the first and last coefficients.
        assert_relative_eq!(series.y_liquid[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(series.y_liquid[100], -0.9, epsilon = 1e-12);
        assert!(series.x_liquid.windows(2).all(|w| w[0] <= w[1]));

        // Constant coefficients flatten both traces.
        let flat = plot_series(&ch, None, &[0.3; 8], 50).unwrap();
        assert!(flat.y_liquid.iter().all(|&y| (y - 0.3).abs() <= 1e-12));
        assert!(flat.y_step.iter().all(|&y| (y - 0.3).abs() <= 1e-12));

        // Supplied traditional weights drive the step trace.
        let weights = [0.306, 0.157, -0.067, -0.259, -0.888];
        let cmp = plot_series(&ch, Some(&weights), &coeffs, 10).unwrap();
        assert_eq!(cmp.y_step[0], 0.306);
        assert_eq!(cmp.y_step[10], -0.888);
    }

    #[test]
    fn worked_cubic_example_series_shape() {
        let ch = CharacteristicSpec {
            name: "toy".into(),
            source_column: "mob".into(),
            special_values: vec![],
            discrete_bins: vec![],
            liquid: Some(LiquidSpec {
                knots: KnotVector::new(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(),
                order: SplineOrder::Cubic,
                log_axis: false,
                comparison_weights: None,
            }),
        };
        let coeffs = [1.0, 0.0, -1.0, 0.0, 0.5, 1.0, 1.5, 2.0];
        let series = plot_series(&ch, None, &coeffs, 1000).unwrap();
        assert_relative_eq!(series.y_liquid[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(series.y_liquid[1000], 2.0, epsilon = 1e-12);
        let mut changes = 0;
        let mut last = 0i8;
        for w in series.y_liquid.windows(2) {
            let s = if w[1] > w[0] { 1 } else if w[1] < w[0] { -1 } else { 0 };
            if s != 0 {
                if last != 0 && s != last {
                    changes += 1;
                }
                last = s;
            }
        }
        assert_eq!(changes, 1);
    }

    /// Synthetic monotone-decreasing log-odds sample on the mob scale.
    fn synthetic_monotone(n: usize, seed: u64) -> (DataSet, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let mob = rng.random_range(0.0..1000.0f64);
            let sn = (i % 10) as f64;
            let logit = 1.2 - 0.45 * (mob + 1.0).ln();
            let p_good = 1.0 / (1.0 + (-logit).exp());
            labels.push(rng.random_range(0.0..1.0) < p_good);
            rows.push((mob, sn));
        }
        (dataset(&rows), labels)
    }

    fn monotone_spec(order: SplineOrder) -> ScorecardSpec {
        let q = order.basis_count(6);
        let mut spec = single_char_spec(order);
        spec.characteristics[0].special_values.clear();
        spec.split = Some(SplitRule {
            column: "sn".into(),
            validation_values: vec![1.0, 4.0, 8.0],
        });
        spec.constraints.centering = CenteringMode::None;
        spec.constraints.patterns = (1..q)
            .map(|i| {
                (
                    CoeffRef::Labeled {
                        characteristic: "months_on_books".into(),
                        label: format!("s{i}"),
                    },
                    CoeffRef::Labeled {
                        characteristic: "months_on_books".into(),
                        label: format!("s{}", i + 1),
                    },
                    Relation::Greater,
                )
            })
            .collect();
        spec
    }

    #[test]
    fn fit_enforces_patterns_delta_and_determinism() {
        let (data, labels) = synthetic_monotone(2000, 7);
        let spec = monotone_spec(SplineOrder::Cubic);
        let result = fit(&spec, &data, &labels).unwrap();
        assert_eq!(result.qp.status, QpStatus::Optimal);

        // Monotone non-increasing coefficients per the declared patterns.
        let s = &result.coeffs_raw;
        for i in 0..s.len() - 1 {
            assert!(s[i] >= s[i + 1] - 1e-9, "s{} < s{}", i + 1, i + 2);
        }
        assert!(result.kkt.eq_residual <= 1e-8);
        assert!(result.kkt.ineq_residual <= 1e-8);

        // WOE bookkeeping.
        assert_eq!(result.coeffs_woe, &result.coeffs_raw * result.beta);
        assert!(result.val_divergence.is_some());
        assert!(result.dev_divergence > 0.0);

        // Determinism: bitwise identical rerun.
        let again = fit(&spec, &data, &labels).unwrap();
        assert_eq!(result.coeffs_raw, again.coeffs_raw);
        assert_eq!(result.dev_divergence, again.dev_divergence);
    }

    #[test]
    fn fit_reports_stage_on_failure() {
        let (data, _) = synthetic_monotone(100, 3);
        let labels = vec![true; 100];
        let spec = monotone_spec(SplineOrder::Cubic);
        let err = fit(&spec, &data, &labels).unwrap_err();
        match &err {
            Error::Stage { stage, .. } => assert_eq!(*stage, "divergence_stats(dev)"),
            other => panic!("expected staged error, got {other:?}"),
        }
        assert!(matches!(err.root(), Error::DegenerateClass(_)));
    }

    #[test]
    fn infeasible_constraints_surface_as_errors() {
        let (data, labels) = synthetic_monotone(500, 11);
        let mut spec = monotone_spec(SplineOrder::Cubic);
        // Pin first and last while demanding first < last via two patterns
        // with contradictory fixed values and an impossible delta of the
        // pinned pair is not enough; instead pin all coefficients to zero,
        // making d'S = 1 unreachable.
        spec.constraints.patterns.clear();
        spec.constraints.inweights = (1..=8)
            .map(|i| (CoeffRef::Index(i), 0.0))
            .collect();
        let err = fit(&spec, &data, &labels).unwrap_err();
        assert!(matches!(err.root(), Error::Infeasible(_)));
    }

    #[test]
    fn order_one_fit_matches_step_function() {
        let (data, labels) = synthetic_monotone(1500, 5);
        let spec = monotone_spec(SplineOrder::Step);
        let result = fit(&spec, &data, &labels).unwrap();
        assert_eq!(result.qp.status, QpStatus::Optimal);
        // 5 interval indicators for 6 knots.
        assert_eq!(result.coeffs_raw.len(), 5);

        let knots = knots170();
        let weights: Vec<f64> = result.coeffs_woe.iter().cloned().collect();
        for x in [0.0, 3.0, 5.0, 17.0, 25.0, 34.9, 35.0, 299.0, 300.0, 734.0, 1000.0] {
            let step = step_eval(x, &weights, &knots).unwrap();
            let spline =
                splines::spline_eval(x, &weights, &knots, SplineOrder::Step).unwrap();
            assert_eq!(step, spline);
        }
    }

    #[test]
    fn resolve_labels_and_indices() {
        let spec = single_char_spec(SplineOrder::Cubic);
        let columns = design_columns(&spec);
        let by_index = resolve_ref(&CoeffRef::Index(3), &columns).unwrap();
        assert_eq!(by_index, 3);
        let first = resolve_ref(
            &CoeffRef::Labeled {
                characteristic: "months_on_books".into(),
                label: "first".into(),
            },
            &columns,
        )
        .unwrap();
        assert_eq!(first, 2); // sentinel occupies column 1
        let last = resolve_ref(
            &CoeffRef::Labeled {
                characteristic: "months_on_books".into(),
                label: "last".into(),
            },
            &columns,
        )
        .unwrap();
        assert_eq!(last, 9);
        let s3 = resolve_ref(
            &CoeffRef::Labeled {
                characteristic: "months_on_books".into(),
                label: "s3".into(),
            },
            &columns,
        )
        .unwrap();
        assert_eq!(s3, 4);
        let sentinel = resolve_ref(
            &CoeffRef::Labeled {
                characteristic: "months_on_books".into(),
                label: "NO INFORMATION".into(),
            },
            &columns,
        )
        .unwrap();
        assert_eq!(sentinel, 1);

        assert!(resolve_ref(&CoeffRef::Index(0), &columns).is_err());
        assert!(resolve_ref(&CoeffRef::Index(10), &columns).is_err());
        assert!(resolve_ref(
            &CoeffRef::Labeled {
                characteristic: "months_on_books".into(),
                label: "s99".into()
            },
            &columns
        )
        .is_err());
        assert!(resolve_ref(
            &CoeffRef::Labeled { characteristic: "nope".into(), label: "s1".into() },
            &columns
        )
        .is_err());
    }

    #[test]
    fn auto_centering_groups_cover_each_characteristic() {
        let purely = CharacteristicSpec {
            name: "region".into(),
            source_column: "region".into(),
            special_values: vec![
                SpecialValue { value: 1.0, label: "NORTH".into() },
                SpecialValue { value: 2.0, label: "SOUTH".into() },
            ],
            discrete_bins: vec![],
            liquid: None,
        };
        let mut spec = ScorecardSpec {
            characteristics: vec![mob_char(SplineOrder::Cubic), purely],
            constraints: ConstraintDecls {
                centering: CenteringMode::Auto,
                ..Default::default()
            },
            delta: 1.0,
            lambda: 0.0,
            roughness_weight: 0.0,
            split: None,
            start_point: None,
        };
        let columns = design_columns(&spec);
        let set = resolve_constraints(&spec, &columns).unwrap();
        assert_eq!(set.centering_groups.len(), 2);
        // months_on_books: sentinel (col 3) plus the basis block 4..=11.
        assert_eq!(set.centering_groups[0], vec![3, 4, 5, 6, 7, 8, 9, 10, 11]);
        assert_eq!(set.centering_groups[1], vec![1, 2]);

        // Patterns normalize to left < right by flipping the relation.
        spec.constraints.patterns = vec![(
            CoeffRef::Index(5),
            CoeffRef::Index(4),
            Relation::Less,
        )];
        let set = resolve_constraints(&spec, &columns).unwrap();
        assert_eq!(
            set.patterns,
            vec![Pattern { left: 4, right: 5, relation: Relation::Greater }]
        );
    }
}
