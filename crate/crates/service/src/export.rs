//! CSV exports: UTF-8, header row, RFC 4180 quoting.

use std::collections::HashMap;

use crowdlabel_core::annotation::Round;
use crowdlabel_core::sampling::SampleOrigin;
use crowdlabel_core::stats::{agreement_tier, tally_posts};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::store::JudgmentRow;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportVariant {
    /// One row per post with its majority label.
    #[default]
    Majority,
    /// One row per judgment.
    Judgments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub post_id: String,
    pub text: String,
    /// Empty when the top vote count is tied.
    pub majority_label: Option<String>,
    pub agreement_fraction: Option<f64>,
    pub tier: Option<String>,
    pub sample_origin: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentExportRow {
    pub round_id: String,
    pub post_id: String,
    pub worker_id: String,
    pub top_label: String,
    /// Semicolon-separated.
    pub sub_labels: String,
    pub other_text: Option<String>,
    pub submitted_at: String,
    pub quarantined: bool,
}

fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>, ServiceError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| ServiceError::Corrupt(e.to_string()))?;
    }
    w.into_inner()
        .map_err(|e| ServiceError::Corrupt(e.to_string()))
}

pub fn majority_rows(
    round: &Round,
    texts: &HashMap<String, String>,
    origins: &HashMap<String, SampleOrigin>,
) -> Vec<ExportRow> {
    tally_posts(round.posts(), round.accepted_judgments())
        .into_iter()
        .map(|t| {
            let result = agreement_tier(&t).ok();
            ExportRow {
                text: texts.get(&t.post_id).cloned().unwrap_or_default(),
                sample_origin: origins.get(&t.post_id).map(|o| o.code().to_string()),
                majority_label: result
                    .as_ref()
                    .and_then(|r| r.majority_label.as_ref())
                    .map(|l| l.to_string()),
                agreement_fraction: result.as_ref().map(|r| r.agreement_fraction),
                tier: result
                    .as_ref()
                    .and_then(|r| r.tier)
                    .map(|t| t.as_str().to_string()),
                post_id: t.post_id,
            }
        })
        .collect()
}

pub fn majority_csv(
    round: &Round,
    texts: &HashMap<String, String>,
    origins: &HashMap<String, SampleOrigin>,
) -> Result<Vec<u8>, ServiceError> {
    write_rows(majority_rows(round, texts, origins))
}

pub fn judgments_csv(rows: &[JudgmentRow]) -> Result<Vec<u8>, ServiceError> {
    write_rows(rows.iter().map(|r| {
        let j = &r.judgment;
        JudgmentExportRow {
            round_id: j.round_id.clone(),
            post_id: j.post_id.clone(),
            worker_id: j.worker_id.clone(),
            top_label: j.top_label.to_string(),
            sub_labels: j
                .sub_labels
                .iter()
                .map(|l| l.as_str())
                .collect::<Vec<_>>()
                .join(";"),
            other_text: j.other_text.clone(),
            submitted_at: j.submitted_at.to_rfc3339(),
            quarantined: r.quarantined,
        }
    }))
}
