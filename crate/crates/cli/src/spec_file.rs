//! JSON spec-file schema. Unknown keys are rejected everywhere; the
//! document is converted into the library's `ScorecardSpec` after parsing.

use std::path::Path;

use liquid_scorecard::engineering::Relation;
use liquid_scorecard::scorecard::{
    CenteringMode, CharacteristicSpec, CoeffRef, ConstraintDecls, DiscreteBin, LiquidSpec,
    ScorecardSpec, SpecialValue, SplitRule,
};
use liquid_scorecard::splines::{KnotVector, SplineOrder};
use serde::Deserialize;

use crate::error::CmdError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub characteristics: Vec<CharacteristicFile>,
    #[serde(default)]
    pub constraints: ConstraintsFile,
    pub fit: FitFile,
    pub labels: LabelsSpec,
    #[serde(default)]
    pub start_point: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicFile {
    pub name: String,
    pub source_column: String,
    #[serde(default)]
    pub special_values: Vec<SpecialValueFile>,
    #[serde(default)]
    pub discrete_bins: Vec<DiscreteBinFile>,
    #[serde(default)]
    pub liquid: Option<LiquidFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecialValueFile {
    pub value: f64,
    pub label: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteBinFile {
    pub low: f64,
    pub high: f64,
    pub label: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiquidFile {
    pub knots: Vec<f64>,
    #[serde(default = "default_order")]
    pub order: u8,
    #[serde(default)]
    pub log_axis: bool,
    #[serde(default)]
    pub comparison_weights: Option<Vec<f64>>,
}

fn default_order() -> u8 {
    4
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsFile {
    #[serde(default)]
    pub inweights: Vec<InweightFile>,
    #[serde(default)]
    pub crosses: Vec<CrossFile>,
    #[serde(default)]
    pub centering_groups: Option<CenteringFile>,
    #[serde(default)]
    pub patterns: Vec<PatternFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InweightFile {
    pub coeff: CoeffRefFile,
    pub value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossFile {
    pub a: CoeffRefFile,
    pub b: CoeffRefFile,
}

/// `"auto-per-characteristic"` or an explicit list of groups.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum CenteringFile {
    Mode(String),
    Groups(Vec<Vec<CoeffRefFile>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternFile {
    pub left: CoeffRefFile,
    pub right: CoeffRefFile,
    pub direction: String,
}

/// Raw 1-based coefficient index, or a characteristic/label pair.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum CoeffRefFile {
    Index(usize),
    Labeled { characteristic: String, label: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub delta: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub roughness_weight: f64,
    #[serde(default)]
    pub split: Option<SplitFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFile {
    pub column: String,
    pub validation_values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelsSpec {
    pub column: String,
    #[serde(default = "default_good_values")]
    pub good_values: Vec<f64>,
}

fn default_good_values() -> Vec<f64> {
    vec![1.0]
}

pub fn load(path: &Path) -> Result<SpecFile, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CmdError::usage(format!("{}: {e}", path.display())))
}

fn convert_ref(r: &CoeffRefFile) -> CoeffRef {
    match r {
        CoeffRefFile::Index(i) => CoeffRef::Index(*i),
        CoeffRefFile::Labeled { characteristic, label } => CoeffRef::Labeled {
            characteristic: characteristic.clone(),
            label: label.clone(),
        },
    }
}

impl SpecFile {
    pub fn into_spec(self) -> Result<(ScorecardSpec, LabelsSpec), CmdError> {
        let mut characteristics = Vec::with_capacity(self.characteristics.len());
        for ch in &self.characteristics {
            let liquid = match &ch.liquid {
                None => None,
                Some(l) => {
                    let knots = KnotVector::new(l.knots.clone()).map_err(|e| {
                        CmdError::usage(format!("characteristic '{}': {e}", ch.name))
                    })?;
                    let order = SplineOrder::try_from(l.order).map_err(|e| {
                        CmdError::usage(format!("characteristic '{}': {e}", ch.name))
                    })?;
                    Some(LiquidSpec {
                        knots,
                        order,
                        log_axis: l.log_axis,
                        comparison_weights: l.comparison_weights.clone(),
                    })
                }
            };
            characteristics.push(CharacteristicSpec {
                name: ch.name.clone(),
                source_column: ch.source_column.clone(),
                special_values: ch
                    .special_values
                    .iter()
                    .map(|s| SpecialValue { value: s.value, label: s.label.clone() })
                    .collect(),
                discrete_bins: ch
                    .discrete_bins
                    .iter()
                    .map(|b| DiscreteBin { low: b.low, high: b.high, label: b.label.clone() })
                    .collect(),
                liquid,
            });
        }

        let centering = match &self.constraints.centering_groups {
            None => CenteringMode::None,
            Some(CenteringFile::Mode(mode)) if mode == "auto-per-characteristic" => {
                CenteringMode::Auto
            }
            Some(CenteringFile::Mode(mode)) => {
                return Err(CmdError::usage(format!(
                    "centering_groups: unknown mode '{mode}' \
                     (expected \"auto-per-characteristic\" or explicit groups)"
                )));
            }
            Some(CenteringFile::Groups(groups)) => CenteringMode::Groups(
                groups
                    .iter()
                    .map(|g| g.iter().map(convert_ref).collect())
                    .collect(),
            ),
        };
        let mut patterns = Vec::with_capacity(self.constraints.patterns.len());
        for p in &self.constraints.patterns {
            let relation = match p.direction.as_str() {
                "<" => Relation::Less,
                ">" => Relation::Greater,
                other => {
                    return Err(CmdError::usage(format!(
                        "pattern direction '{other}' (expected \"<\" or \">\")"
                    )));
                }
            };
            patterns.push((convert_ref(&p.left), convert_ref(&p.right), relation));
        }
        let constraints = ConstraintDecls {
            inweights: self
                .constraints
                .inweights
                .iter()
                .map(|iw| (convert_ref(&iw.coeff), iw.value))
                .collect(),
            crosses: self
                .constraints
                .crosses
                .iter()
                .map(|c| (convert_ref(&c.a), convert_ref(&c.b)))
                .collect(),
            centering,
            patterns,
        };

        let spec = ScorecardSpec {
            characteristics,
            constraints,
            delta: self.fit.delta,
            lambda: self.fit.lambda,
            roughness_weight: self.fit.roughness_weight,
            split: self.fit.split.as_ref().map(|s| SplitRule {
                column: s.column.clone(),
                validation_values: s.validation_values.clone(),
            }),
            start_point: self.start_point.clone(),
        };
        Ok((spec, self.labels))
    }
}
