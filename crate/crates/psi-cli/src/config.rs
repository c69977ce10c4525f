//! Pipeline configuration file.
//!
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use psi_core::analytics::Transform;
use psi_core::corpus::{CommentFormat, CorpusWindow, SplitSpec, SurveyKind};
use psi_core::gateway::{EndpointConfig, PromptSet, RetryPolicy};
use psi_core::index::PsiVariant;
use psi_core::{Direction, YearMonth};
use serde::{Deserialize, Serialize};

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_cache() -> PathBuf {
    PathBuf::from("cache/replies.jsonl")
}
fn default_seed() -> u64 {
    42
}
fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_cache")]
    pub cache: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub strict_industry: bool,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    pub corpus: CorpusConfig,
    pub filter: FilterConfig,
    #[serde(default)]
    pub classify: ClassifyConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub index: IndexConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub endpoints: Vec<EndpointConfig>,
    /// Directory the relative paths were resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_kinds() -> Vec<SurveyKind> {
    vec![SurveyKind::Current]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<CommentFormat>,
    /// Survey questions to keep; the outlook question is excluded by default.
    #[serde(default = "default_kinds")]
    pub kinds: Vec<SurveyKind>,
    #[serde(default)]
    pub start: Option<YearMonth>,
    #[serde(default)]
    pub end: Option<YearMonth>,
    #[serde(default)]
    pub industry_mapping: Option<PathBuf>,
    /// Gold labels used to score the filter.
    #[serde(default)]
    pub labels: Option<PathBuf>,
}

impl CorpusConfig {
    pub fn window(&self) -> CorpusWindow {
        CorpusWindow {
            start: self.start.or(CorpusWindow::default().start),
            end: self.end,
        }
    }

    pub fn format(&self) -> CommentFormat {
        self.format.unwrap_or_else(|| CommentFormat::from_path(&self.path))
    }
}

fn default_alpha() -> f64 {
    1.0
}
fn default_shots() -> usize {
    5
}
fn default_prompt_set() -> String {
    "en-v1".into()
}

/// Where the price-relevance decision comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterBackend {
    NaiveBayes,
    Llm(String),
    External(PathBuf),
}

impl FilterBackend {
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "naive_bayes" {
            Ok(FilterBackend::NaiveBayes)
        } else if let Some(name) = spec.strip_prefix("llm:") {
            Ok(FilterBackend::Llm(name.to_string()))
        } else if let Some(path) = spec.strip_prefix("external:") {
            Ok(FilterBackend::External(PathBuf::from(path)))
        } else {
            bail!("unknown filter backend {spec:?} (naive_bayes, llm:<endpoint>, external:<path>)")
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// `naive_bayes`, `llm:<endpoint>` or `external:<path>`.
    pub backend: String,
    #[serde(default)]
    pub vocabulary: Option<PathBuf>,
    /// Labeled comments the Naive Bayes model is fitted on.
    #[serde(default)]
    pub training: Option<PathBuf>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub split: SplitRatios,
    #[serde(default = "default_prompt_set")]
    pub prompt_set: String,
    #[serde(default = "default_shots")]
    pub shots: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        let d = SplitSpec::default();
        SplitRatios {
            train: d.train_ratio,
            dev: d.dev_ratio,
            test: d.test_ratio,
        }
    }
}

impl SplitRatios {
    pub fn spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            train_ratio: self.train,
            dev_ratio: self.dev,
            test_ratio: self.test,
            seed,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    /// Endpoint names, in the order their outputs are shown to the integrator.
    #[serde(default)]
    pub judges: Vec<String>,
    #[serde(default = "default_prompt_set")]
    pub prompt_set: String,
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default = "default_true")]
    pub with_confidence: bool,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            judges: Vec::new(),
            prompt_set: default_prompt_set(),
            shots: default_shots(),
            with_confidence: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMethod {
    #[default]
    Llm,
    Vote,
}

fn default_priority() -> Vec<Direction> {
    psi_core::ensemble::DEFAULT_PRIORITY.to_vec()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default)]
    pub method: EnsembleMethod,
    #[serde(default)]
    pub integrator: Option<String>,
    #[serde(default = "default_priority")]
    pub priority: Vec<Direction>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            method: EnsembleMethod::Llm,
            integrator: None,
            priority: default_priority(),
        }
    }
}

fn default_variants() -> Vec<PsiVariant> {
    PsiVariant::ALL.to_vec()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexConfig {
    #[serde(default = "default_variants")]
    pub variants: Vec<PsiVariant>,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            variants: default_variants(),
        }
    }
}

fn default_lag_max() -> i64 {
    24
}
fn default_min_overlap() -> usize {
    24
}
fn default_max_lag() -> usize {
    12
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    /// PSI variant compared with the reference series.
    #[serde(default)]
    pub variant: PsiVariant,
    #[serde(default)]
    pub reference: Option<PathBuf>,
    #[serde(default)]
    pub reference_name: Option<String>,
    #[serde(default)]
    pub transform: Transform,
    #[serde(default)]
    pub lag_min: i64,
    #[serde(default = "default_lag_max")]
    pub lag_max: i64,
    #[serde(default = "default_min_overlap")]
    pub min_overlap: usize,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            variant: PsiVariant::General,
            reference: None,
            reference_name: None,
            transform: Transform::default(),
            lag_min: 0,
            lag_max: default_lag_max(),
            min_overlap: default_min_overlap(),
            max_lag: default_max_lag(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).context("parsing pipeline config")?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let parent = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let base = parent
            .canonicalize()
            .with_context(|| format!("resolving {}", parent.display()))?;
        Self::from_toml_str(&text, &base)
    }

    fn resolve(&mut self, base: &Path) {
        self.base_dir = base.to_path_buf();
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.cache);
        fix(&mut self.corpus.path);
        for p in [
            &mut self.corpus.industry_mapping,
            &mut self.corpus.labels,
            &mut self.filter.vocabulary,
            &mut self.filter.training,
            &mut self.evaluate.reference,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Some(path) = self.filter.backend.strip_prefix("external:") {
            let mut p = PathBuf::from(path);
            fix(&mut p);
            self.filter.backend = format!("external:{}", p.display());
        }
        for set in [&mut self.filter.prompt_set, &mut self.classify.prompt_set] {
            if PromptSet::builtin(set).is_err() && Path::new(set.as_str()).is_relative() {
                *set = base.join(&*set).display().to_string();
            }
        }
        for e in &mut self.endpoints {
            if let Some(dir) = &mut e.fixture_dir {
                fix(dir);
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let backend = FilterBackend::parse(&self.filter.backend)?;
        if let FilterBackend::Llm(name) = &backend {
            self.endpoint(name)?;
        }
        for judge in &self.classify.judges {
            self.endpoint(judge)?;
        }
        if let Some(name) = &self.ensemble.integrator {
            self.endpoint(name)?;
        }
        if self.max_in_flight == 0 {
            bail!("max_in_flight must be at least 1");
        }
        let mut names: Vec<&str> = self.endpoints.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            bail!("endpoint {:?} is defined twice", w[0]);
        }
        Ok(())
    }

    pub fn filter_backend(&self) -> FilterBackend {
        FilterBackend::parse(&self.filter.backend).expect("validated on load")
    }

    pub fn endpoint(&self, name: &str) -> Result<&EndpointConfig> {
        self.endpoints
            .iter()
            .find(|e| e.name == name)
            .with_context(|| format!("no endpoint named {name:?} in config"))
    }

    pub fn out(&self, rel: &str) -> PathBuf {
        self.output_dir.join(rel)
    }

    /// `path` relative to the config directory when it lies below it, so
    /// reports do not depend on where the pipeline directory lives.
    pub fn relative<'a>(&self, path: &'a Path) -> &'a Path {
        path.strip_prefix(&self.base_dir).unwrap_or(path)
    }
}
