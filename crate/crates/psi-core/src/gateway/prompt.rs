use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ModelJudgment, Verdict};
use crate::labels::{Direction, Relevance};

const EN_V1: &str = include_str!("../../templates/en-v1.toml");
const JA_V1: &str = include_str!("../../templates/ja-v1.toml");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("requested {k} shots but only {available} are available")]
    NotEnoughShots { k: usize, available: usize },
    #[error("shot {index} has no confidence/reason but confidence output was requested")]
    ShotMissingConfidence { index: usize },
    #[error("shot {index}: {message}")]
    InvalidShot { index: usize, message: String },
    #[error("integration needs at least 2 judgments, got {0}")]
    TooFewJudgments(usize),
    #[error("judgment {index} lacks {field}")]
    IncompleteJudgment { index: usize, field: &'static str },
    #[error("judgment {index} carries a relevance label; integration expects directions")]
    WrongJudgmentTask { index: usize },
    #[error("unknown built-in prompt set {0:?} (available: en-v1, ja-v1)")]
    UnknownPromptSet(String),
    #[error("prompt set: {0}")]
    Template(String),
}

/// One in-context example. Confidence and reason travel together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub text: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl FewShotExample {
    pub fn answer_only(text: impl Into<String>, answer: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            answer: answer.into(),
            confidence: None,
            reason: None,
        }
    }

    pub fn with_confidence(
        text: impl Into<String>,
        answer: impl Into<String>,
        confidence: u8,
        reason: impl Into<String>,
    ) -> Self {
        Self {
            text: text.into(),
            answer: answer.into(),
            confidence: Some(confidence),
            reason: Some(reason.into()),
        }
    }

    fn check(&self, index: usize) -> Result<(), PromptError> {
        if self.confidence.is_some() != self.reason.is_some() {
            return Err(PromptError::InvalidShot {
                index,
                message: "confidence and reason must be both present or both absent".into(),
            });
        }
        if self.confidence.is_some_and(|c| c > 100) {
            return Err(PromptError::InvalidShot {
                index,
                message: "confidence exceeds 100".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelNames {
    pub rise: String,
    pub stable: String,
    pub fall: String,
    pub not_related: String,
    pub yes: String,
    pub no: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldNames {
    pub text: String,
    pub answer: String,
    pub confidence: String,
    pub reason: String,
    pub classification_result: String,
    /// `{index}` is replaced by the zero-based model position.
    pub model_heading: String,
    pub integration_stub: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub instruction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionInstruction {
    pub instruction: String,
    pub confidence_instruction: String,
}

/// A versioned set of instructions, field labels and default shots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub version: String,
    pub language: String,
    pub labels: LabelNames,
    pub fields: FieldNames,
    pub filtration: Instruction,
    pub direction: DirectionInstruction,
    pub integration: Instruction,
    #[serde(default)]
    pub filtration_shots: Vec<FewShotExample>,
    #[serde(default)]
    pub direction_shots: Vec<FewShotExample>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin("en-v1").expect("bundled English prompt set parses")
    }
}

impl PromptSet {
    pub fn builtin(name: &str) -> Result<Self, PromptError> {
        match name {
            "en-v1" | "en" => Self::from_toml_str(EN_V1),
            "ja-v1" | "ja" => Self::from_toml_str(JA_V1),
            other => Err(PromptError::UnknownPromptSet(other.to_string())),
        }
    }

    pub fn from_toml_str(data: &str) -> Result<Self, PromptError> {
        let set: PromptSet = toml::from_str(data).map_err(|e| PromptError::Template(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    /// Loads a template file, or a built-in set when `spec` names one.
    pub fn load(spec: &str) -> Result<Self, PromptError> {
        if let Ok(set) = Self::builtin(spec) {
            return Ok(set);
        }
        let data =
            std::fs::read_to_string(Path::new(spec)).map_err(|e| PromptError::Template(format!("{spec}: {e}")))?;
        Self::from_toml_str(&data)
    }

    fn validate(&self) -> Result<(), PromptError> {
        for (i, shot) in self.filtration_shots.iter().enumerate() {
            shot.check(i)?;
            if shot.confidence.is_some() {
                return Err(PromptError::InvalidShot {
                    index: i,
                    message: "filtration shots carry no confidence or reason".into(),
                });
            }
            self.relevance_of(&shot.answer)
                .ok_or_else(|| PromptError::InvalidShot {
                    index: i,
                    message: format!("answer {:?} is not a filtration label", shot.answer),
                })?;
        }
        for (i, shot) in self.direction_shots.iter().enumerate() {
            shot.check(i)?;
            self.direction_of(&shot.answer)
                .ok_or_else(|| PromptError::InvalidShot {
                    index: i,
                    message: format!("answer {:?} is not a direction label", shot.answer),
                })?;
        }
        Ok(())
    }

    pub fn direction_name(&self, d: Direction) -> &str {
        match d {
            Direction::Rise => &self.labels.rise,
            Direction::Stable => &self.labels.stable,
            Direction::Fall => &self.labels.fall,
            Direction::NotRelated => &self.labels.not_related,
        }
    }

    pub fn relevance_name(&self, r: Relevance) -> &str {
        match r {
            Relevance::PriceRelated => &self.labels.yes,
            Relevance::NotPriceRelated => &self.labels.no,
        }
    }

    pub fn verdict_name(&self, v: Verdict) -> &str {
        match v {
            Verdict::Direction(d) => self.direction_name(d),
            Verdict::Relevance(r) => self.relevance_name(r),
        }
    }

    fn direction_of(&self, name: &str) -> Option<Direction> {
        Direction::ALL
            .into_iter()
            .find(|d| self.direction_name(*d) == name)
            .or_else(|| name.parse().ok())
    }

    fn relevance_of(&self, name: &str) -> Option<Relevance> {
        [Relevance::PriceRelated, Relevance::NotPriceRelated]
            .into_iter()
            .find(|r| self.relevance_name(*r) == name)
            .or_else(|| name.parse().ok())
    }

    fn query_block(&self, text: &str) -> String {
        format!("{}{}\n{}", self.fields.text, text, self.fields.answer.trim_end())
    }

    /// Filtration prompt: instruction, `k` answered examples, then the query.
    pub fn filtration_prompt(&self, text: &str, shots: &[FewShotExample], k: usize) -> Result<String, PromptError> {
        if k > shots.len() {
            return Err(PromptError::NotEnoughShots {
                k,
                available: shots.len(),
            });
        }
        let mut blocks = vec![self.filtration.instruction.clone()];
        for (i, shot) in shots[..k].iter().enumerate() {
            shot.check(i)?;
            if shot.confidence.is_some() {
                return Err(PromptError::InvalidShot {
                    index: i,
                    message: "filtration shots carry no confidence or reason".into(),
                });
            }
            blocks.push(format!(
                "{}{}\n{}{}",
                self.fields.text, shot.text, self.fields.answer, shot.answer
            ));
        }
        blocks.push(self.query_block(text));
        Ok(blocks.join("\n\n"))
    }

    /// Direction prompt. Without confidence, the confidence sentence and every
    /// `Confidence:`/`Reason:` line are left out.
    pub fn direction_prompt(
        &self,
        text: &str,
        shots: &[FewShotExample],
        k: usize,
        with_confidence: bool,
    ) -> Result<String, PromptError> {
        if k > shots.len() {
            return Err(PromptError::NotEnoughShots {
                k,
                available: shots.len(),
            });
        }
        let mut instruction = self.direction.instruction.clone();
        if with_confidence {
            instruction.push('\n');
            instruction.push_str(&self.direction.confidence_instruction);
        }
        let mut blocks = vec![instruction];
        for (i, shot) in shots[..k].iter().enumerate() {
            shot.check(i)?;
            let mut block = format!(
                "{}{}\n{}{}",
                self.fields.text, shot.text, self.fields.answer, shot.answer
            );
            if with_confidence {
                let (Some(confidence), Some(reason)) = (shot.confidence, shot.reason.as_ref()) else {
                    return Err(PromptError::ShotMissingConfidence { index: i });
                };
                block.push_str(&format!(
                    "\n{}{}%\n{}{}",
                    self.fields.confidence, confidence, self.fields.reason, reason
                ));
            }
            blocks.push(block);
        }
        blocks.push(self.query_block(text));
        Ok(blocks.join("\n\n"))
    }

    /// Integration prompt listing each model's label, confidence and reason.
    pub fn integration_prompt(&self, text: &str, judgments: &[ModelJudgment]) -> Result<String, PromptError> {
        if judgments.len() < 2 {
            return Err(PromptError::TooFewJudgments(judgments.len()));
        }
        let mut blocks = vec![
            self.integration.instruction.clone(),
            format!("{}{}", self.fields.text, text),
        ];
        for (i, j) in judgments.iter().enumerate() {
            let Verdict::Direction(label) = j.label else {
                return Err(PromptError::WrongJudgmentTask { index: i });
            };
            let confidence = j.confidence.ok_or(PromptError::IncompleteJudgment {
                index: i,
                field: "confidence",
            })?;
            let reason = j.reason.as_ref().ok_or(PromptError::IncompleteJudgment {
                index: i,
                field: "reason",
            })?;
            blocks.push(format!(
                "{}\n{}{}\n{}{}%\n{}{}",
                self.fields.model_heading.replace("{index}", &i.to_string()),
                self.fields.classification_result,
                self.direction_name(label),
                self.fields.confidence,
                confidence,
                self.fields.reason,
                reason
            ));
        }
        blocks.push(self.fields.integration_stub.clone());
        Ok(blocks.join("\n\n"))
    }
}

pub fn build_filtration_prompt(
    set: &PromptSet,
    text: &str,
    shots: &[FewShotExample],
    k: usize,
) -> Result<String, PromptError> {
    set.filtration_prompt(text, shots, k)
}

pub fn build_direction_prompt(
    set: &PromptSet,
    text: &str,
    shots: &[FewShotExample],
    k: usize,
    with_confidence: bool,
) -> Result<String, PromptError> {
    set.direction_prompt(text, shots, k, with_confidence)
}

pub fn build_integration_prompt(
    set: &PromptSet,
    text: &str,
    judgments: &[ModelJudgment],
) -> Result<String, PromptError> {
    set.integration_prompt(text, judgments)
}
