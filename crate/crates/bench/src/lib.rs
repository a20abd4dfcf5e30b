//! Shared fixtures for the benchmark targets.

use liquid_scorecard::scorecard::{
    CenteringMode, CharacteristicSpec, CoeffRef, ConstraintDecls, DataSet, LiquidSpec,
    ScorecardSpec, SpecialValue, SplitRule,
};
use liquid_scorecard::splines::{KnotVector, SplineOrder};
use liquid_scorecard_cli::synth::{self, SyntheticCharacteristic, SyntheticConfig, SyntheticSpecial};

pub fn mob_knots() -> KnotVector {
    KnotVector::new(vec![0.0, 5.0, 25.0, 35.0, 300.0, 1000.0]).unwrap()
}

pub fn fit_spec() -> ScorecardSpec {
    ScorecardSpec {
        characteristics: vec![CharacteristicSpec {
            name: "mob".into(),
            source_column: "mob".into(),
            special_values: vec![SpecialValue {
                value: -9999999.0,
                label: "NO INFORMATION".into(),
            }],
            discrete_bins: vec![],
            liquid: Some(LiquidSpec {
                knots: mob_knots(),
                order: SplineOrder::Cubic,
                log_axis: true,
                comparison_weights: None,
            }),
        }],
        constraints: ConstraintDecls {
            inweights: vec![(
                CoeffRef::Labeled {
                    characteristic: "mob".into(),
                    label: "NO INFORMATION".into(),
                },
                0.0,
            )],
            crosses: vec![],
            centering: CenteringMode::Auto,
            patterns: vec![],
        },
        delta: 1.0,
        lambda: 0.01,
        roughness_weight: 0.1,
        split: Some(SplitRule {
            column: "sn".into(),
            validation_values: vec![1.0, 4.0, 8.0],
        }),
        start_point: None,
    }
}

pub fn synthetic_data(n: usize) -> (DataSet, Vec<bool>) {
    let cfg = SyntheticConfig {
        seed: 0xbe,
        n_records: n,
        class_balance: 0.5,
        sample_numbers: (1..=10).map(f64::from).collect(),
        split_column: "sn".into(),
        label_column: "gb".into(),
        characteristics: vec![SyntheticCharacteristic {
            column: "mob".into(),
            knots: vec![0.0, 5.0, 25.0, 35.0, 300.0, 1000.0],
            order: 4,
            coefficients: vec![1.0, 0.8, 0.3, 0.0, -0.4, -0.8, -1.0, -1.2],
            log_scale: true,
            specials: vec![SyntheticSpecial {
                value: -9999999.0,
                probability: 0.03,
                logit: 0.0,
            }],
        }],
    };
    let synthetic = synth::generate(&cfg).unwrap();
    let data = synthetic.to_dataset();
    let gb = data.column_index("gb").unwrap();
    let labels = (0..data.n()).map(|r| data.value(r, gb) == 1.0).collect();
    (data, labels)
}
