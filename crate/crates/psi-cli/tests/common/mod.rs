#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use psi_core::corpus::{write_comments, CommentFormat, Domain, SurveyComment, SurveyKind};
use psi_core::gateway::{ChatRequest, PromptSet};
use psi_core::YearMonth;
use tempfile::TempDir;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/pipeline")
}

fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// A scratch copy of the shipped 200-comment pipeline.
pub fn fixture_copy() -> TempDir {
    let dir = TempDir::new().unwrap();
    copy_tree(&fixture_dir(), dir.path());
    let _ = fs::remove_dir_all(dir.path().join("out"));
    dir
}

pub fn psi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psi"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("psi runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn lines(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

pub fn comment(id: &str, month: &str, domain: Domain, industry: &str, text: &str) -> SurveyComment {
    SurveyComment {
        id: id.into(),
        month: month.parse::<YearMonth>().unwrap(),
        domain,
        industry_raw: industry.into(),
        text: text.into(),
        survey_kind: SurveyKind::Current,
    }
}

pub fn write_corpus(dir: &Path, comments: &[SurveyComment]) {
    write_comments(&dir.join("corpus.jsonl"), comments, CommentFormat::Jsonl).unwrap();
}

/// External predictions marking `flagged` ids as price related.
pub fn write_external(dir: &Path, comments: &[SurveyComment], flagged: &[&str]) {
    let mut csv = String::from("id,relevance\n");
    for c in comments {
        let label = if flagged.contains(&c.id.as_str()) {
            "price_related"
        } else {
            "not_price_related"
        };
        csv.push_str(&format!("{},{label}\n", c.id));
    }
    fs::write(dir.join("external.csv"), csv).unwrap();
}

pub fn direction_request(text: &str) -> ChatRequest {
    let set = PromptSet::builtin("en-v1").unwrap();
    ChatRequest::user(set.direction_prompt(text, &set.direction_shots, 5, true).unwrap())
}

/// Saves `reply` as endpoint `judge`'s canned answer to the direction prompt for `text`.
pub fn save_direction_reply(dir: &Path, judge: &str, text: &str, reply: &str) {
    let replies = dir.join("replies").join(judge);
    fs::create_dir_all(&replies).unwrap();
    fs::write(replies.join(format!("{}.txt", direction_request(text).digest())), reply).unwrap();
}

/// A config with an external filter, two fixture judges and `extra` appended.
pub fn write_config(dir: &Path, extra: &str) {
    let toml = format!(
        r#"output_dir = "out"
cache = "out/cache.jsonl"

[retry]
max_attempts = 1
base_delay_ms = 0
max_delay_ms = 0

[corpus]
path = "corpus.jsonl"

[filter]
backend = "external:external.csv"

[classify]
judges = ["a", "b"]

[[endpoints]]
name = "a"
provider = "fixture"
model = "model-a"
fixture_dir = "replies/a"

[[endpoints]]
name = "b"
provider = "fixture"
model = "model-b"
fixture_dir = "replies/b"
{extra}"#
    );
    fs::write(dir.join("pipeline.toml"), toml).unwrap();
}
