//! The five pipeline stages. Each reads its inputs from files, writes its
//! outputs atomically and records a manifest when every item succeeded.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use psi_core::analytics::{granger_test, lagged_correlation, transform_series, weighted_f1, TimeSeries, Transform};
use psi_core::baseline::{load_vocabulary, nb_predict, NbTrainer, Tokenizer};
use psi_core::corpus::{
    load_comments, load_labeled, normalize_industry, split_dataset, CommentFormat, IndustryMapping, LoadOptions,
    SurveyComment,
};
use psi_core::ensemble::{
    integrate_llm_batch, integrate_vote, read_decisions, write_decisions, DecisionRecord, IntegrationItem,
};
use psi_core::fsutil::write_atomic;
use psi_core::gateway::{
    classify_batch, ChatClient, ChatRequest, ItemError, ModelJudgment, PromptSet, ReplyCache, Task, Verdict,
};
use psi_core::index::{build_index, index_csv, join_decisions, read_index_csv, PsiVariant};
use psi_core::{Direction, Relevance};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{EnsembleMethod, FilterBackend, PipelineConfig};
use crate::manifest::{config_digest, digest_inputs, is_up_to_date, now, write_manifest};

pub const FILTERED: &str = "filtered.jsonl";
pub const FILTER_ERRORS: &str = "filter_errors.jsonl";
pub const JUDGMENTS: &str = "judgments.jsonl";
pub const CLASSIFY_ERRORS: &str = "classify_errors.jsonl";
pub const DECISIONS: &str = "decisions.jsonl";
pub const INTEGRATE_ERRORS: &str = "integrate_errors.jsonl";
pub const INDEX_ALL: &str = "index/all.csv";
pub const PLOT_DATA: &str = "plot_data.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Skipped,
    /// Stage finished but this many items failed.
    ItemFailures(usize),
}

impl Outcome {
    pub fn failures(self) -> usize {
        match self {
            Outcome::ItemFailures(n) => n,
            _ => 0,
        }
    }
}

/// Command-line settings that are not part of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub force: bool,
    pub emit_plot_data: bool,
    pub evaluate: EvaluateOverrides,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct EvaluateOverrides {
    pub psi: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub variant: Option<PsiVariant>,
    pub transform: Option<Transform>,
    pub lag_min: Option<i64>,
    pub lag_max: Option<i64>,
    pub min_overlap: Option<usize>,
    pub max_lag: Option<usize>,
}

// ---------- records ----------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceProvenance {
    pub backend: String,
    pub label: Relevance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    /// Posterior probability of price relevance (Naive Bayes only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredRecord {
    #[serde(flatten)]
    pub comment: SurveyComment,
    pub relevance: RelevanceProvenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub comment_id: String,
    pub judge: String,
    pub model_id: String,
    pub label: Direction,
    pub confidence: Option<u8>,
    pub reason: Option<String>,
    pub raw: String,
}

impl JudgmentRecord {
    fn judgment(&self) -> ModelJudgment {
        ModelJudgment {
            label: Verdict::Direction(self.label),
            confidence: self.confidence,
            reason: self.reason.clone(),
            model_id: self.model_id.clone(),
            raw: self.raw.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct ErrorRecord<'a> {
    comment_id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<&'a str>,
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    raw: Option<String>,
}

fn jsonl<T: Serialize>(rows: &[T]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

fn write(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn item_error_raw(e: &ItemError) -> Option<String> {
    match e {
        ItemError::Parse { raw, .. } => Some(raw.clone()),
        _ => None,
    }
}

/// Skips the stage when its manifest matches; otherwise runs `body` and
/// records a manifest if no item failed.
fn staged<F>(
    cfg: &PipelineConfig,
    opts: &RunOptions,
    stage: &str,
    stage_config: serde_json::Value,
    inputs: Vec<PathBuf>,
    body: F,
) -> Result<Outcome>
where
    F: FnOnce() -> Result<(Vec<PathBuf>, usize)>,
{
    let digest = config_digest(&stage_config);
    let input_digests = digest_inputs(&inputs)?;
    if !opts.force && is_up_to_date(&cfg.output_dir, stage, &digest, &input_digests) {
        eprintln!("{stage}: up to date");
        return Ok(Outcome::Skipped);
    }
    let started = now();
    let (outputs, failures) = body()?;
    if failures > 0 {
        // no manifest, so the next run retries
        let _ = std::fs::remove_file(crate::manifest::manifest_path(&cfg.output_dir, stage));
        return Ok(Outcome::ItemFailures(failures));
    }
    write_manifest(&cfg.output_dir, stage, digest, input_digests, &outputs, started)?;
    Ok(Outcome::Done)
}

fn open_cache(cfg: &PipelineConfig) -> Result<ReplyCache> {
    let cache = ReplyCache::open(&cfg.cache)?;
    if cache.skipped_lines() > 0 {
        eprintln!(
            "cache: skipped {} unreadable line(s) in {}",
            cache.skipped_lines(),
            cfg.cache.display()
        );
    }
    Ok(cache)
}

fn client(cfg: &PipelineConfig, name: &str) -> Result<Box<dyn ChatClient>> {
    Ok(cfg.endpoint(name)?.build()?)
}

fn load_corpus(cfg: &PipelineConfig) -> Result<Vec<SurveyComment>> {
    let options = LoadOptions {
        window: cfg.corpus.window(),
        ..LoadOptions::default()
    };
    let all = load_comments(&cfg.corpus.path, cfg.corpus.format(), &options)
        .with_context(|| format!("loading corpus {}", cfg.corpus.path.display()))?;
    Ok(all
        .into_iter()
        .filter(|c| cfg.corpus.kinds.contains(&c.survey_kind))
        .collect())
}

fn read_filtered(cfg: &PipelineConfig) -> Result<Vec<FilteredRecord>> {
    read_jsonl(&cfg.out(FILTERED))
}

// ---------- filter ----------

/// A provenance record, or an error message with the raw reply if any.
type FilterResult = Result<RelevanceProvenance, (String, Option<String>)>;

fn load_external_predictions(path: &Path) -> Result<HashMap<String, Relevance>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = HashMap::new();
    if CommentFormat::from_path(path) == CommentFormat::Csv {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(id_col), Some(label_col)) = (col("id"), col("relevance")) else {
            bail!("{}: header must contain id and relevance", path.display());
        };
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let label: Relevance = rec[label_col]
                .parse()
                .with_context(|| format!("{} row {}", path.display(), i + 2))?;
            out.insert(rec[id_col].to_string(), label);
        }
    } else {
        #[derive(Deserialize)]
        struct Row {
            id: String,
            relevance: String,
        }
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row: Row = serde_json::from_str(line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
            let label: Relevance = row
                .relevance
                .parse()
                .with_context(|| format!("{} line {}", path.display(), i + 1))?;
            out.insert(row.id, label);
        }
    }
    Ok(out)
}

fn labeled_relevance(path: &Path) -> Result<Vec<(SurveyComment, Relevance)>> {
    let options = LoadOptions {
        window: psi_core::corpus::CorpusWindow::unbounded(),
        ..LoadOptions::default()
    };
    let labeled = load_labeled(path, CommentFormat::from_path(path), &options)
        .with_context(|| format!("loading labels {}", path.display()))?;
    Ok(labeled
        .into_iter()
        .filter_map(|l| l.relevance.map(|r| (l.comment, r)))
        .collect())
}

struct NbFilter {
    model: psi_core::baseline::NbModel,
    tokenizer: Tokenizer,
}

impl NbFilter {
    fn predict(&self, comment: &SurveyComment) -> Result<(Relevance, f64)> {
        let tokens = self.tokenizer.tokenize(&comment.id, &comment.text)?;
        let p = nb_predict(&self.model, &tokens);
        let label: Relevance = p.label.parse()?;
        let score = p
            .log_posteriors
            .iter()
            .find(|(l, _)| l == Relevance::PriceRelated.as_str())
            .map(|(_, lp)| lp.exp())
            .unwrap_or(0.0);
        Ok((label, score))
    }
}

fn train_nb(cfg: &PipelineConfig) -> Result<(NbFilter, serde_json::Value)> {
    let vocab_path = cfg
        .filter
        .vocabulary
        .as_ref()
        .context("filter.vocabulary is required for naive_bayes")?;
    let train_path = cfg
        .filter
        .training
        .as_ref()
        .context("filter.training is required for naive_bayes")?;
    let vocab = load_vocabulary(vocab_path)?;
    let labeled = labeled_relevance(train_path)?;
    let (train, _dev, test) = split_dataset(&labeled, &cfg.filter.split.spec(cfg.seed))?;
    let tokenizer = Tokenizer::lexicon(vocab.clone());
    let docs = train
        .iter()
        .map(|(c, r)| Ok((tokenizer.tokenize(&c.id, &c.text)?, r.as_str())))
        .collect::<Result<Vec<_>>>()?;
    let trainer = NbTrainer {
        alpha: cfg.filter.alpha,
        labels: Some(vec![
            Relevance::PriceRelated.as_str().into(),
            Relevance::NotPriceRelated.as_str().into(),
        ]),
        ..NbTrainer::default()
    };
    let model = trainer.train(&docs, &vocab)?;
    let filter = NbFilter { model, tokenizer };
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for (c, r) in &test {
        gold.push(r.as_str());
        pred.push(filter.predict(c)?.0.as_str());
    }
    let holdout = weighted_f1(&gold, &pred)?;
    let report = json!({
        "train": train.len(),
        "test": test.len(),
        "seed": cfg.seed,
        "weighted_f1": holdout.weighted_f1,
        "report": holdout,
    });
    Ok((filter, report))
}

pub fn cmd_filter(cfg: &PipelineConfig, opts: &RunOptions) -> Result<Outcome> {
    let backend = cfg.filter_backend();
    let mut inputs = vec![cfg.corpus.path.clone()];
    let mut endpoint = None;
    match &backend {
        FilterBackend::NaiveBayes => {
            inputs.extend(cfg.filter.vocabulary.clone());
            inputs.extend(cfg.filter.training.clone());
        }
        FilterBackend::External(p) => inputs.push(p.clone()),
        FilterBackend::Llm(name) => endpoint = Some(cfg.endpoint(name)?.clone()),
    }
    inputs.extend(cfg.corpus.labels.clone());
    let stage_config = json!({
        "corpus": cfg.corpus,
        "filter": cfg.filter,
        "seed": cfg.seed,
        "endpoint": endpoint,
    });
    staged(cfg, opts, "filter", stage_config, inputs, || {
        let comments = load_corpus(cfg)?;
        let mut decided: Vec<(usize, FilterResult)> = Vec::new();
        let mut outputs = vec![cfg.out(FILTERED), cfg.out(FILTER_ERRORS)];
        match &backend {
            FilterBackend::NaiveBayes => {
                let (nb, holdout) = train_nb(cfg)?;
                for (i, c) in comments.iter().enumerate() {
                    let (label, score) = nb.predict(c)?;
                    decided.push((
                        i,
                        Ok(RelevanceProvenance {
                            backend: "naive_bayes".into(),
                            label,
                            model_id: None,
                            score: Some(score),
                        }),
                    ));
                }
                let path = cfg.out("eval/filter_holdout.json");
                write(&path, &format!("{}\n", serde_json::to_string_pretty(&holdout)?))?;
                eprintln!(
                    "filter: naive_bayes holdout weighted F1 {:.4} on {} comments",
                    holdout["weighted_f1"].as_f64().unwrap_or(f64::NAN),
                    holdout["test"]
                );
                outputs.push(path);
            }
            FilterBackend::External(path) => {
                let preds = load_external_predictions(path)?;
                for (i, c) in comments.iter().enumerate() {
                    let r = preds
                        .get(&c.id)
                        .map(|&label| RelevanceProvenance {
                            backend: "external".into(),
                            label,
                            model_id: None,
                            score: None,
                        })
                        .ok_or_else(|| (format!("no external prediction for {}", c.id), None));
                    decided.push((i, r));
                }
            }
            FilterBackend::Llm(name) => {
                let set = PromptSet::load(&cfg.filter.prompt_set)?;
                let client = client(cfg, name)?;
                let cache = open_cache(cfg)?;
                let requests = comments
                    .iter()
                    .map(|c| {
                        Ok(ChatRequest::user(set.filtration_prompt(
                            &c.text,
                            &set.filtration_shots,
                            cfg.filter.shots,
                        )?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let batch = classify_batch(
                    client.as_ref(),
                    &requests,
                    Task::Filtration,
                    &cache,
                    cfg.max_in_flight,
                    &cfg.retry,
                );
                for (i, r) in batch.results.into_iter().enumerate() {
                    let r = match r {
                        Ok(j) => Ok(RelevanceProvenance {
                            backend: format!("llm:{name}"),
                            label: j.label.relevance().expect("filtration vocabulary"),
                            model_id: Some(j.model_id),
                            score: None,
                        }),
                        Err(e) => Err((e.to_string(), item_error_raw(&e))),
                    };
                    decided.push((i, r));
                }
            }
        }

        let mut kept = Vec::new();
        let mut errors = Vec::new();
        let mut predictions: HashMap<&str, Relevance> = HashMap::new();
        for (i, r) in &decided {
            let c = &comments[*i];
            match r {
                Ok(prov) => {
                    predictions.insert(c.id.as_str(), prov.label);
                    if prov.label.is_price_related() {
                        kept.push(FilteredRecord {
                            comment: c.clone(),
                            relevance: prov.clone(),
                        });
                    }
                }
                Err((message, raw)) => errors.push(ErrorRecord {
                    comment_id: &c.id,
                    source: None,
                    error: message.clone(),
                    raw: raw.clone(),
                }),
            }
        }
        write(&cfg.out(FILTERED), &jsonl(&kept))?;
        write(&cfg.out(FILTER_ERRORS), &jsonl(&errors))?;
        eprintln!(
            "filter: kept {} of {} comments ({})",
            kept.len(),
            comments.len(),
            cfg.filter.backend
        );

        if let Some(labels) = &cfg.corpus.labels {
            let gold = labeled_relevance(labels)?;
            let (g, p): (Vec<&str>, Vec<&str>) = gold
                .iter()
                .filter_map(|(c, r)| predictions.get(c.id.as_str()).map(|pr| (r.as_str(), pr.as_str())))
                .unzip();
            if g.is_empty() {
                eprintln!("filter: no labeled comment overlaps the predictions; skipping evaluation");
            } else {
                let report = weighted_f1(&g, &p)?;
                println!("filter weighted F1: {:.4} (n = {})", report.weighted_f1, report.n);
                let path = cfg.out("eval/filter.json");
                write(&path, &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
                outputs.push(path);
            }
        }
        Ok((outputs, errors.len()))
    })
}

// ---------- classify ----------

pub fn cmd_classify(cfg: &PipelineConfig, opts: &RunOptions) -> Result<Outcome> {
    if cfg.classify.judges.is_empty() {
        bail!("classify.judges is empty");
    }
    let endpoints = cfg
        .classify
        .judges
        .iter()
        .map(|j| cfg.endpoint(j).cloned())
        .collect::<Result<Vec<_>>>()?;
    let stage_config = json!({ "classify": cfg.classify, "endpoints": endpoints, "retry": cfg.retry });
    staged(cfg, opts, "classify", stage_config, vec![cfg.out(FILTERED)], || {
        let filtered = read_filtered(cfg)?;
        let set = PromptSet::load(&cfg.classify.prompt_set)?;
        let requests = filtered
            .iter()
            .map(|r| {
                Ok(ChatRequest::user(set.direction_prompt(
                    &r.comment.text,
                    &set.direction_shots,
                    cfg.classify.shots,
                    cfg.classify.with_confidence,
                )?))
            })
            .collect::<Result<Vec<_>>>()?;
        let cache = open_cache(cfg)?;
        let mut per_judge = Vec::new();
        let (mut hits, mut dispatches) = (0, 0);
        for judge in &cfg.classify.judges {
            let client = client(cfg, judge)?;
            let batch = classify_batch(
                client.as_ref(),
                &requests,
                Task::Direction,
                &cache,
                cfg.max_in_flight,
                &cfg.retry,
            );
            hits += batch.cache_hits;
            dispatches += batch.dispatches;
            per_judge.push(batch.results);
        }
        let mut judgments = Vec::new();
        let mut errors = Vec::new();
        for (i, rec) in filtered.iter().enumerate() {
            for (judge, results) in cfg.classify.judges.iter().zip(&per_judge) {
                match &results[i] {
                    Ok(j) => judgments.push(JudgmentRecord {
                        comment_id: rec.comment.id.clone(),
                        judge: judge.clone(),
                        model_id: j.model_id.clone(),
                        label: j.label.direction().expect("direction vocabulary"),
                        confidence: j.confidence,
                        reason: j.reason.clone(),
                        raw: j.raw.clone(),
                    }),
                    Err(e) => errors.push(ErrorRecord {
                        comment_id: &rec.comment.id,
                        source: Some(judge),
                        error: e.to_string(),
                        raw: item_error_raw(e),
                    }),
                }
            }
        }
        write(&cfg.out(JUDGMENTS), &jsonl(&judgments))?;
        write(&cfg.out(CLASSIFY_ERRORS), &jsonl(&errors))?;
        eprintln!(
            "classify: {} judgments, {} errors ({} cache hits, {} dispatches)",
            judgments.len(),
            errors.len(),
            hits,
            dispatches
        );
        Ok((vec![cfg.out(JUDGMENTS), cfg.out(CLASSIFY_ERRORS)], errors.len()))
    })
}

// ---------- integrate ----------

pub fn cmd_integrate(cfg: &PipelineConfig, opts: &RunOptions) -> Result<Outcome> {
    let integrator = match cfg.ensemble.method {
        EnsembleMethod::Vote => None,
        EnsembleMethod::Llm => {
            if cfg.classify.judges.len() < 2 {
                bail!("LLM integration needs at least two judges; use ensemble.method = \"vote\"");
            }
            let name = cfg
                .ensemble
                .integrator
                .as_ref()
                .context("ensemble.integrator is required")?;
            Some(cfg.endpoint(name)?.clone())
        }
    };
    let stage_config = json!({
        "ensemble": cfg.ensemble,
        "judges": cfg.classify.judges,
        "prompt_set": cfg.classify.prompt_set,
        "integrator": integrator,
    });
    let inputs = vec![cfg.out(FILTERED), cfg.out(JUDGMENTS)];
    staged(cfg, opts, "integrate", stage_config, inputs, || {
        let filtered = read_filtered(cfg)?;
        let judgments: Vec<JudgmentRecord> = read_jsonl(&cfg.out(JUDGMENTS))?;
        let mut by_key: HashMap<(&str, &str), &JudgmentRecord> = HashMap::new();
        for j in &judgments {
            by_key.insert((j.comment_id.as_str(), j.judge.as_str()), j);
        }

        let mut errors = Vec::new();
        let mut ready = Vec::new();
        for rec in &filtered {
            let id = rec.comment.id.as_str();
            let missing: Vec<&str> = cfg
                .classify
                .judges
                .iter()
                .map(String::as_str)
                .filter(|judge| !by_key.contains_key(&(id, *judge)))
                .collect();
            if !missing.is_empty() {
                errors.push(ErrorRecord {
                    comment_id: id,
                    source: None,
                    error: format!("missing judgments from {}", missing.join(", ")),
                    raw: None,
                });
                continue;
            }
            let js: Vec<ModelJudgment> = cfg
                .classify
                .judges
                .iter()
                .map(|judge| by_key[&(id, judge.as_str())].judgment())
                .collect();
            ready.push(IntegrationItem {
                comment_id: id.to_string(),
                text: rec.comment.text.clone(),
                judgments: js,
            });
        }

        let mut decisions: Vec<DecisionRecord> = Vec::new();
        match &integrator {
            None => {
                for item in &ready {
                    decisions.push(integrate_vote(&item.comment_id, &item.judgments, &cfg.ensemble.priority)?.record());
                }
            }
            Some(endpoint) => {
                let set = PromptSet::load(&cfg.classify.prompt_set)?;
                let client = endpoint.build()?;
                let cache = open_cache(cfg)?;
                let results = integrate_llm_batch(&ready, &set, client.as_ref(), &cache, cfg.max_in_flight, &cfg.retry);
                for (item, r) in ready.iter().zip(results) {
                    match r {
                        Ok(d) => decisions.push(d.record()),
                        Err(e) => {
                            let raw = match &e {
                                psi_core::ensemble::EnsembleError::UnintegrableReply { raw, .. } => Some(raw.clone()),
                                _ => None,
                            };
                            errors.push(ErrorRecord {
                                comment_id: &item.comment_id,
                                source: Some(endpoint.name.as_str()),
                                error: e.to_string(),
                                raw,
                            })
                        }
                    }
                }
            }
        }
        write_decisions(&cfg.out(DECISIONS), &decisions)?;
        write(&cfg.out(INTEGRATE_ERRORS), &jsonl(&errors))?;
        eprintln!("integrate: {} decisions, {} errors", decisions.len(), errors.len());
        Ok((vec![cfg.out(DECISIONS), cfg.out(INTEGRATE_ERRORS)], errors.len()))
    })
}

// ---------- index ----------

fn load_mapping(cfg: &PipelineConfig) -> Result<IndustryMapping> {
    match &cfg.corpus.industry_mapping {
        Some(path) => IndustryMapping::from_path(path, cfg.strict_industry)
            .with_context(|| format!("loading industry mapping {}", path.display())),
        None => Ok(IndustryMapping::new(cfg.strict_industry)),
    }
}

fn plot_rows(out: &mut String, series: &str, points: &[(psi_core::YearMonth, f64)]) {
    for (m, v) in points {
        let _ = writeln!(out, "{series},{m},{v}");
    }
}

pub fn cmd_index(cfg: &PipelineConfig, opts: &RunOptions) -> Result<Outcome> {
    let needs_mapping = cfg.index.variants.iter().any(|v| v.segment().industry.is_some());
    if needs_mapping && cfg.corpus.industry_mapping.is_none() {
        let names: Vec<&str> = cfg
            .index
            .variants
            .iter()
            .filter(|v| v.segment().industry.is_some())
            .map(|v| v.as_str())
            .collect();
        bail!(
            "variants {} filter by industry but corpus.industry_mapping is not set",
            names.join(", ")
        );
    }
    let mut inputs = vec![cfg.out(FILTERED), cfg.out(DECISIONS)];
    inputs.extend(cfg.corpus.industry_mapping.clone());
    let stage_config = json!({
        "variants": cfg.index.variants,
        "strict_industry": cfg.strict_industry,
        "emit_plot_data": opts.emit_plot_data,
    });
    staged(cfg, opts, "index", stage_config, inputs, || {
        let mapping = load_mapping(cfg)?;
        let comments: Vec<SurveyComment> = read_filtered(cfg)?.into_iter().map(|r| r.comment).collect();
        if mapping.strict() {
            for c in &comments {
                normalize_industry(&c.industry_raw, &mapping).with_context(|| format!("comment {}", c.id))?;
            }
        }
        let decisions = read_decisions(&cfg.out(DECISIONS))?;
        let decided = join_decisions(&comments, &decisions)?;

        let mut outputs = Vec::new();
        let mut all = Vec::new();
        let mut plot = String::from("series,month,value\n");
        for &variant in &cfg.index.variants {
            let series = build_index(&decided, variant, &mapping);
            let path = cfg.out(&format!("index/{variant}.csv"));
            write(&path, &index_csv(std::slice::from_ref(&series)))?;
            outputs.push(path);
            let flagged = series.flagged_months();
            eprintln!(
                "index: {variant}: {} months{}",
                series.points.len(),
                if flagged.is_empty() {
                    String::new()
                } else {
                    format!(", {} without directional comments", flagged.len())
                }
            );
            plot_rows(&mut plot, variant.as_str(), &series.values());
            all.push(series);
        }
        write(&cfg.out(INDEX_ALL), &index_csv(&all))?;
        outputs.push(cfg.out(INDEX_ALL));
        if opts.emit_plot_data {
            write(&cfg.out(PLOT_DATA), &plot)?;
            outputs.push(cfg.out(PLOT_DATA));
        }
        Ok((outputs, 0))
    })
}

// ---------- evaluate ----------

#[derive(Debug, Serialize)]
struct EvalSummary {
    psi_variant: PsiVariant,
    psi_path: PathBuf,
    reference_name: String,
    reference_path: PathBuf,
    transform: Transform,
    lag_min: i64,
    lag_max: i64,
    min_overlap: usize,
    best_lag: i64,
    best_r: f64,
    n: usize,
    granger: Vec<psi_core::analytics::GrangerResult>,
}

pub fn cmd_evaluate(cfg: &PipelineConfig, opts: &RunOptions) -> Result<Outcome> {
    let o = &opts.evaluate;
    let e = &cfg.evaluate;
    let psi_path = o.psi.clone().unwrap_or_else(|| cfg.out(INDEX_ALL));
    let reference_path = o
        .reference
        .clone()
        .or_else(|| e.reference.clone())
        .context("no reference series: set evaluate.reference or pass --reference")?;
    let variant = o.variant.unwrap_or(e.variant);
    let transform = o.transform.unwrap_or(e.transform);
    let lag_min = o.lag_min.unwrap_or(e.lag_min);
    let lag_max = o.lag_max.unwrap_or(e.lag_max);
    let min_overlap = o.min_overlap.unwrap_or(e.min_overlap);
    let max_lag = o.max_lag.unwrap_or(e.max_lag);
    let reference_name = e.reference_name.clone().unwrap_or_else(|| {
        reference_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let stage_config = json!({
        "variant": variant,
        "transform": transform,
        "lag_min": lag_min,
        "lag_max": lag_max,
        "min_overlap": min_overlap,
        "max_lag": max_lag,
        "reference_name": reference_name,
        "emit_plot_data": opts.emit_plot_data,
    });
    let inputs = vec![psi_path.clone(), reference_path.clone()];
    staged(cfg, opts, "evaluate", stage_config, inputs, || {
        let all = read_index_csv(&psi_path)?;
        let series = all
            .iter()
            .find(|s| s.variant == variant)
            .with_context(|| format!("{} has no {variant} rows", psi_path.display()))?;
        let psi_name = format!("{variant} PSI");
        let psi = TimeSeries::new(psi_name.clone(), series.values())?;
        let reference = TimeSeries::from_csv_path(reference_name.clone(), &reference_path)
            .with_context(|| format!("loading reference {}", reference_path.display()))?;
        let reference = transform_series(&reference, transform)?.rename(reference_name.clone());

        let lags = lagged_correlation(&psi, &reference, lag_min, lag_max, min_overlap)?;
        let forward = granger_test(&psi, &reference, max_lag)?;
        let backward = granger_test(&reference, &psi, max_lag)?;

        let mut corr = String::from("lag,r,n_overlap\n");
        for entry in &lags.per_lag {
            let _ = writeln!(corr, "{},{},{}", entry.lag, entry.r, entry.n_overlap);
        }
        let mut granger = String::from("a,b,lag,f_value,p_value,n_effective\n");
        for g in [&forward, &backward] {
            let _ = writeln!(
                granger,
                "{},{},{},{},{},{}",
                g.cause, g.effect, g.lag, g.f_value, g.p_value, g.n_effective
            );
        }
        let summary = EvalSummary {
            psi_variant: variant,
            psi_path: cfg.relative(&psi_path).to_path_buf(),
            reference_name: reference_name.clone(),
            reference_path: cfg.relative(&reference_path).to_path_buf(),
            transform,
            lag_min,
            lag_max,
            min_overlap,
            best_lag: lags.best_lag,
            best_r: lags.best_r,
            n: lags.at(lags.best_lag).map(|e| e.n_overlap).unwrap_or(0),
            granger: vec![forward.clone(), backward.clone()],
        };
        let mut outputs = vec![
            cfg.out("eval/correlation.csv"),
            cfg.out("eval/granger.csv"),
            cfg.out("eval/summary.json"),
        ];
        write(&outputs[0], &corr)?;
        write(&outputs[1], &granger)?;
        write(&outputs[2], &format!("{}\n", serde_json::to_string_pretty(&summary)?))?;
        if opts.emit_plot_data {
            let mut plot = String::from("series,month,value\n");
            plot_rows(&mut plot, &psi_name, psi.points());
            plot_rows(
                &mut plot,
                &format!("{reference_name} ({transform})"),
                reference.points(),
            );
            let path = cfg.out("eval/plot_data.csv");
            write(&path, &plot)?;
            outputs.push(path);
        }
        println!(
            "evaluate: best lag {:+} months, r = {:.4} (n = {}, {transform})",
            lags.best_lag, lags.best_r, summary.n
        );
        for g in [&forward, &backward] {
            println!(
                "granger: {} -> {}: F = {:.4}, p = {:.4}",
                g.cause, g.effect, g.f_value, g.p_value
            );
        }
        Ok((outputs, 0))
    })
}

/// Runs every stage in order; evaluation only when a reference is configured.
/// Item failures do not stop later stages.
pub fn cmd_run_all(cfg: &PipelineConfig, opts: &RunOptions) -> Result<Outcome> {
    let mut failures = 0;
    failures += cmd_filter(cfg, opts)?.failures();
    failures += cmd_classify(cfg, opts)?.failures();
    failures += cmd_integrate(cfg, opts)?.failures();
    failures += cmd_index(cfg, opts)?.failures();
    if cfg.evaluate.reference.is_some() || opts.evaluate.reference.is_some() {
        failures += cmd_evaluate(cfg, opts)?.failures();
    } else {
        eprintln!("evaluate: skipped (no reference series configured)");
    }
    Ok(if failures > 0 {
        Outcome::ItemFailures(failures)
    } else {
        Outcome::Done
    })
}
