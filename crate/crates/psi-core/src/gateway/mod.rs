//! Prompt construction, chat-model dispatch and reply parsing.
//!
//! Prompts are rendered from versioned [`PromptSet`] template files. Replies
//! go through a [`ReplyCache`] keyed on model, prompt bytes and decoding
//! parameters, so a warm cache makes a rerun fully offline and deterministic.

mod batch;
mod cache;
mod client;
mod parse;
mod prompt;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::{Direction, Relevance};

pub use batch::{classify_batch, BatchOutput, ItemError, RetryPolicy};
pub use cache::{CacheEntry, CacheError, CacheKey, ReplyCache};
pub use client::{
    anthropic_request_body, extract_anthropic_text, extract_gemini_text, extract_openai_text, gemini_request_body,
    openai_request_body, ChatClient, ChatRequest, DecodingParams, EndpointConfig, FixtureClient, HttpChatClient,
    Provider, TransportError,
};
pub use parse::{parse_judgment, render_reply, ParseError};
pub use prompt::{
    build_direction_prompt, build_filtration_prompt, build_integration_prompt, FewShotExample, PromptError, PromptSet,
};

/// Which prompt family a request belongs to; selects the reply vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Filtration,
    Direction,
    Integration,
}

/// A parsed label from either vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Verdict {
    Direction(Direction),
    Relevance(Relevance),
}

impl Verdict {
    pub fn direction(self) -> Option<Direction> {
        match self {
            Verdict::Direction(d) => Some(d),
            Verdict::Relevance(_) => None,
        }
    }

    pub fn relevance(self) -> Option<Relevance> {
        match self {
            Verdict::Relevance(r) => Some(r),
            Verdict::Direction(_) => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Direction(d) => d.fmt(f),
            Verdict::Relevance(r) => r.fmt(f),
        }
    }
}

/// One model's answer for one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelJudgment {
    pub label: Verdict,
    /// Percent in `0..=100`.
    pub confidence: Option<u8>,
    pub reason: Option<String>,
    pub model_id: String,
    pub raw: String,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Cache(#[from] CacheError),
}
