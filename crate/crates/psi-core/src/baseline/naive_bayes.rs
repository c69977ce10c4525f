use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::BaselineError;

/// Log-scores closer than this are treated as tied.
const TIE_EPS: f64 = 1e-9;

/// How a token contributes to per-label word counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermCounting {
    /// Every occurrence counts.
    #[default]
    Counts,
    /// A word counts at most once per document.
    Presence,
}

/// Trained multinomial Naive Bayes parameters over a closed vocabulary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "NbModelFields")]
pub struct NbModel {
    labels: Vec<String>,
    log_priors: Vec<f64>,
    /// `[label][word]`, aligned with `labels` and `vocab`.
    log_likelihoods: Vec<Vec<f64>>,
    vocab: Vec<String>,
    alpha: f64,
    counting: TermCounting,
    #[serde(skip)]
    word_index: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct NbModelFields {
    labels: Vec<String>,
    log_priors: Vec<f64>,
    log_likelihoods: Vec<Vec<f64>>,
    vocab: Vec<String>,
    alpha: f64,
    counting: TermCounting,
}

impl From<NbModelFields> for NbModel {
    fn from(f: NbModelFields) -> Self {
        let word_index = index_vocab(&f.vocab);
        NbModel {
            labels: f.labels,
            log_priors: f.log_priors,
            log_likelihoods: f.log_likelihoods,
            vocab: f.vocab,
            alpha: f.alpha,
            counting: f.counting,
            word_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NbPrediction {
    pub label: String,
    /// Normalized log posterior per label, in model label order.
    pub log_posteriors: Vec<(String, f64)>,
}

impl NbModel {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn log_prior(&self, label: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.log_priors[i])
    }

    pub fn log_likelihood(&self, word: &str, label: &str) -> Option<f64> {
        let li = self.labels.iter().position(|l| l == label)?;
        let wi = *self.word_index.get(word)?;
        Some(self.log_likelihoods[li][wi])
    }

    /// Unnormalized `log P(c) + Σ log P(w|c)` per label; out-of-vocab tokens are skipped.
    pub fn joint_log_scores(&self, tokens: &[String]) -> Vec<f64> {
        let mut scores = self.log_priors.clone();
        let mut seen = std::collections::HashSet::new();
        for token in tokens {
            let Some(&wi) = self.word_index.get(token) else {
                continue;
            };
            if self.counting == TermCounting::Presence && !seen.insert(wi) {
                continue;
            }
            for (score, row) in scores.iter_mut().zip(&self.log_likelihoods) {
                *score += row[wi];
            }
        }
        scores
    }
}

fn index_vocab(vocab: &[String]) -> HashMap<String, usize> {
    let mut index = HashMap::with_capacity(vocab.len());
    for (i, w) in vocab.iter().enumerate() {
        index.entry(w.clone()).or_insert(i);
    }
    index
}

/// Index of the largest score. Scores within `1e-9` of the maximum count as
/// tied, and ties go to the earliest index.
pub fn pick_label(scores: &[f64]) -> Option<usize> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|&s| s >= max - TIE_EPS)
}

#[derive(Debug, Clone)]
pub struct NbTrainer {
    pub alpha: f64,
    pub counting: TermCounting,
    /// Fixed label order (also the tie-break order). Defaults to first appearance.
    pub labels: Option<Vec<String>>,
}

impl Default for NbTrainer {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            counting: TermCounting::Counts,
            labels: None,
        }
    }
}

impl NbTrainer {
    pub fn train<L: AsRef<str>>(&self, docs: &[(Vec<String>, L)], vocab: &[String]) -> Result<NbModel, BaselineError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(BaselineError::InvalidAlpha(self.alpha));
        }
        if docs.is_empty() {
            return Err(BaselineError::EmptyTrainingSet);
        }
        if vocab.is_empty() {
            return Err(BaselineError::EmptyVocabulary);
        }
        let labels: Vec<String> = match &self.labels {
            Some(ls) => ls.clone(),
            None => {
                let mut ls: Vec<String> = Vec::new();
                for (_, l) in docs {
                    if !ls.iter().any(|x| x == l.as_ref()) {
                        ls.push(l.as_ref().to_string());
                    }
                }
                ls
            }
        };
        let word_index = index_vocab(vocab);
        let mut doc_counts = vec![0usize; labels.len()];
        let mut word_counts = vec![vec![0usize; vocab.len()]; labels.len()];
        for (tokens, label) in docs {
            let Some(li) = labels.iter().position(|l| l == label.as_ref()) else {
                // documents outside an explicit label set are ignored
                continue;
            };
            doc_counts[li] += 1;
            let mut seen = std::collections::HashSet::new();
            for token in tokens {
                if let Some(&wi) = word_index.get(token) {
                    if self.counting == TermCounting::Presence && !seen.insert(wi) {
                        continue;
                    }
                    word_counts[li][wi] += 1;
                }
            }
        }
        if let Some(li) = doc_counts.iter().position(|&c| c == 0) {
            return Err(BaselineError::LabelWithoutDocuments(labels[li].clone()));
        }
        let n_docs: usize = doc_counts.iter().sum();
        let log_priors = doc_counts.iter().map(|&c| (c as f64 / n_docs as f64).ln()).collect();
        let v = vocab.len() as f64;
        let log_likelihoods = word_counts
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                let denom = (total as f64 + self.alpha * v).ln();
                row.iter().map(|&c| (c as f64 + self.alpha).ln() - denom).collect()
            })
            .collect();
        Ok(NbModel {
            labels,
            log_priors,
            log_likelihoods,
            vocab: vocab.to_vec(),
            alpha: self.alpha,
            counting: self.counting,
            word_index,
        })
    }
}

/// Trains with occurrence counts and labels in order of first appearance.
pub fn nb_train<L: AsRef<str>>(
    docs: &[(Vec<String>, L)],
    vocab: &[String],
    alpha: f64,
) -> Result<NbModel, BaselineError> {
    NbTrainer {
        alpha,
        ..Default::default()
    }
    .train(docs, vocab)
}

pub fn nb_predict(model: &NbModel, tokens: &[String]) -> NbPrediction {
    let scores = model.joint_log_scores(tokens);
    let best = pick_label(&scores).expect("model has at least one label");
    let max = scores[best];
    let log_norm = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    NbPrediction {
        label: model.labels[best].clone(),
        log_posteriors: model
            .labels
            .iter()
            .cloned()
            .zip(scores.iter().map(|s| s - log_norm))
            .collect(),
    }
}
