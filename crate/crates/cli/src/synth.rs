//! Seeded synthetic dataset generator. Each characteristic carries a true
//! score-weight curve (step weights for order 1, spline coefficients
//! otherwise); a record's label is drawn with probability
//! logistic(intercept + sum of curve values), so the generating log-odds
//! surface is known exactly.

use std::path::Path;

use liquid_scorecard::scorecard::{self, DataSet};
use liquid_scorecard::splines::{self, KnotVector, SplineOrder};
use liquid_scorecard::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::data;
use crate::error::CmdError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_records: usize,
    /// Intercept class balance P(Good) before curve contributions.
    #[serde(default = "default_balance")]
    pub class_balance: f64,
    /// Values the sample-number column is drawn from, uniformly.
    #[serde(default = "default_sample_numbers")]
    pub sample_numbers: Vec<f64>,
    #[serde(default = "default_split_column")]
    pub split_column: String,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    pub characteristics: Vec<SyntheticCharacteristic>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticCharacteristic {
    pub column: String,
    pub knots: Vec<f64>,
    #[serde(default = "default_order")]
    pub order: u8,
    /// True score-weight curve: `m−1` step weights for order 1, else
    /// `m+order−2` spline coefficients.
    pub coefficients: Vec<f64>,
    /// Draw values log-uniformly over the knot range.
    #[serde(default)]
    pub log_scale: bool,
    #[serde(default)]
    pub specials: Vec<SyntheticSpecial>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpecial {
    pub value: f64,
    pub probability: f64,
    /// Log-odds contribution when this sentinel is drawn.
    #[serde(default)]
    pub logit: f64,
}

fn default_balance() -> f64 {
    0.5
}

fn default_sample_numbers() -> Vec<f64> {
    (1..=10).map(f64::from).collect()
}

fn default_split_column() -> String {
    "sn".into()
}

fn default_label_column() -> String {
    "gb".into()
}

fn default_order() -> u8 {
    4
}

pub struct Synthetic {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Synthetic {
    pub fn to_dataset(&self) -> DataSet {
        let n = self.rows.len();
        let p = self.headers.len();
        let values = DMatrix::from_fn(n, p, |i, j| self.rows[i][j]);
        DataSet::new(self.headers.clone(), values).expect("generated headers are unique")
    }
}

struct CurveSpec {
    knots: KnotVector,
    order: SplineOrder,
}

fn check(cfg: &SyntheticConfig) -> Result<Vec<CurveSpec>, CmdError> {
    if cfg.n_records == 0 {
        return Err(CmdError::usage("n_records must be positive"));
    }
    if !(cfg.class_balance > 0.0 && cfg.class_balance < 1.0) {
        return Err(CmdError::usage(format!(
            "class_balance must lie in (0, 1), got {}",
            cfg.class_balance
        )));
    }
    if cfg.sample_numbers.is_empty() {
        return Err(CmdError::usage("sample_numbers must not be empty"));
    }
    if cfg.characteristics.is_empty() {
        return Err(CmdError::usage("no characteristics configured"));
    }
    let mut curves = Vec::with_capacity(cfg.characteristics.len());
    for (i, ch) in cfg.characteristics.iter().enumerate() {
        if ch.column.is_empty() {
            return Err(CmdError::usage(format!("characteristic {} has no column", i + 1)));
        }
        let clash = cfg.characteristics[..i].iter().any(|o| o.column == ch.column)
            || ch.column == cfg.label_column
            || ch.column == cfg.split_column;
        if clash {
            return Err(CmdError::usage(format!("duplicate column '{}'", ch.column)));
        }
        let knots = KnotVector::new(ch.knots.clone())
            .map_err(|e| CmdError::usage(format!("column '{}': {e}", ch.column)))?;
        let order = SplineOrder::try_from(ch.order)
            .map_err(|e| CmdError::usage(format!("column '{}': {e}", ch.column)))?;
        let want = match order {
            SplineOrder::Step => knots.m() - 1,
            _ => order.basis_count(knots.m()),
        };
        if ch.coefficients.len() != want {
            return Err(CmdError::usage(format!(
                "column '{}': {} coefficients for order {} on {} knots, expected {}",
                ch.column,
                ch.coefficients.len(),
                ch.order,
                knots.m(),
                want
            )));
        }
        if ch.log_scale && knots.first() < 0.0 {
            return Err(CmdError::usage(format!(
                "column '{}': log_scale needs non-negative knots",
                ch.column
            )));
        }
        let total: f64 = ch.specials.iter().map(|s| s.probability).sum();
        if ch.specials.iter().any(|s| !(0.0..=1.0).contains(&s.probability)) || total > 1.0 {
            return Err(CmdError::usage(format!(
                "column '{}': special probabilities must be in [0, 1] and sum to at most 1",
                ch.column
            )));
        }
        curves.push(CurveSpec { knots, order });
    }
    Ok(curves)
}

fn curve_value(ch: &SyntheticCharacteristic, curve: &CurveSpec, x: f64) -> f64 {
    match curve.order {
        SplineOrder::Step => scorecard::step_eval(x, &ch.coefficients, &curve.knots),
        order => splines::spline_eval(x, &ch.coefficients, &curve.knots, order),
    }
    .expect("draws stay inside the knot range")
}

pub fn generate(cfg: &SyntheticConfig) -> Result<Synthetic, CmdError> {
    let curves = check(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let intercept = (cfg.class_balance / (1.0 - cfg.class_balance)).ln();

    let mut headers: Vec<String> =
        cfg.characteristics.iter().map(|c| c.column.clone()).collect();
    headers.push(cfg.label_column.clone());
    headers.push(cfg.split_column.clone());

    let mut rows = Vec::with_capacity(cfg.n_records);
    for _ in 0..cfg.n_records {
        let mut row = Vec::with_capacity(headers.len());
        let mut score = intercept;
        for (ch, curve) in cfg.characteristics.iter().zip(&curves) {
            let roll: f64 = rng.random_range(0.0..1.0);
            let mut cum = 0.0;
            let mut special = None;
            for s in &ch.specials {
                cum += s.probability;
                if roll < cum {
                    special = Some(s);
                    break;
                }
            }
            match special {
                Some(s) => {
                    score += s.logit;
                    row.push(s.value);
                }
                None => {
                    let t: f64 = rng.random_range(0.0..1.0);
                    let (lo, hi) = (curve.knots.first(), curve.knots.last());
                    let x = if ch.log_scale {
                        let shift = if lo == 0.0 { 1.0 } else { 0.0 };
                        ((lo + shift) * ((hi + shift) / (lo + shift)).powf(t) - shift)
                            .clamp(lo, hi)
                    } else {
                        lo + t * (hi - lo)
                    };
                    score += curve_value(ch, curve, x);
                    row.push(x);
                }
            }
        }
        let p_good = 1.0 / (1.0 + (-score).exp());
        let label: f64 = rng.random_range(0.0..1.0);
        row.push(if label < p_good { 1.0 } else { 0.0 });
        let sn = cfg.sample_numbers[rng.random_range(0..cfg.sample_numbers.len())];
        row.push(sn);
        rows.push(row);
    }
    Ok(Synthetic { headers, rows })
}

pub fn load_config(path: &Path) -> Result<SyntheticConfig, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CmdError::usage(format!("{}: {e}", path.display())))
}

pub fn write(synthetic: &Synthetic, path: &Path) -> Result<(), CmdError> {
    data::write_csv(path, &synthetic.headers, &synthetic.rows)
}
