use serde::{Deserialize, Serialize};

use super::{evaluate, train, EpochStats, EvalReport, TrainConfig};
use crate::attention::AttentionMode;
use crate::model::{ModelConfig, ModelParams};
use crate::skeleton::{Dataset, SplitName};

#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
    pub report: EvalReport,
}

/// One trained variant. A failed row keeps its error message so the other
/// rows still run.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub mode: AttentionMode,
    pub result: Result<AblationOutcome, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub mode: AttentionMode,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
}

impl AblationRow {
    pub fn summary(&self) -> AblationSummary {
        match &self.result {
            Ok(o) => AblationSummary {
                mode: self.mode,
                accuracy: Some(o.report.accuracy),
                error: None,
            },
            Err(e) => AblationSummary {
                mode: self.mode,
                accuracy: None,
                error: Some(e.clone()),
            },
        }
    }
}

/// Trains one model per attention mode from the same seed and evaluates each
/// on the test split. The mode in `model` is ignored.
pub fn ablation_suite(dataset: &Dataset, model: &ModelConfig, config: &TrainConfig) -> Vec<AblationRow> {
    ablation_suite_with(dataset, model, config, |_, _| {})
}

/// [`ablation_suite`], calling `on_row` as each row finishes.
pub fn ablation_suite_with(
    dataset: &Dataset,
    model: &ModelConfig,
    config: &TrainConfig,
    mut on_row: impl FnMut(usize, &AblationRow),
) -> Vec<AblationRow> {
    let mut rows = Vec::with_capacity(AttentionMode::ALL.len());
    for (i, mode) in AttentionMode::ALL.into_iter().enumerate() {
        let variant = ModelConfig { mode, ..model.clone() };
        let result = train(dataset, &variant, config)
            .and_then(|out| {
                let report = evaluate(dataset, SplitName::Test, &out.params)?;
                Ok(AblationOutcome {
                    params: out.params,
                    history: out.history,
                    report,
                })
            })
            .map_err(|e| e.to_string());
        let row = AblationRow { mode, result };
        on_row(i, &row);
        rows.push(row);
    }
    rows
}
