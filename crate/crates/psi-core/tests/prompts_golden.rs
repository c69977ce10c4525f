use std::path::PathBuf;

use psi_core::gateway::{
    build_direction_prompt, build_filtration_prompt, build_integration_prompt, ModelJudgment, PromptSet, Verdict,
};
use psi_core::Direction;

const QUERY: &str = "Due to the decrease in summer visitors, surrounding courses significantly lowered their play fees in September, resulting in a decrease in visitors to our golf course, but the average spending per customer has not dropped significantly.";

fn golden(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden", name].iter().collect();
    std::fs::read_to_string(path).unwrap()
}

fn judgment(label: Direction, confidence: u8, reason: &str, model: &str) -> ModelJudgment {
    ModelJudgment {
        label: Verdict::Direction(label),
        confidence: Some(confidence),
        reason: Some(reason.to_string()),
        model_id: model.to_string(),
        raw: String::new(),
    }
}

#[test]
fn filtration_zero_shot() {
    let set = PromptSet::builtin("en-v1").unwrap();
    let p = build_filtration_prompt(&set, QUERY, &set.filtration_shots, 0).unwrap();
    assert_eq!(p, golden("filtration_k0.txt"));
}

#[test]
fn filtration_five_shot() {
    let set = PromptSet::builtin("en-v1").unwrap();
    let p = build_filtration_prompt(&set, QUERY, &set.filtration_shots, 5).unwrap();
    assert_eq!(p, golden("filtration_k5.txt"));
    assert_eq!(p.matches("\nAnswer: ").count(), 5);
    assert!(p.contains("\nAnswer: Yes\n"));
}

#[test]
fn direction_zero_shot_with_confidence() {
    let set = PromptSet::builtin("en-v1").unwrap();
    let p = build_direction_prompt(&set, QUERY, &set.direction_shots, 0, true).unwrap();
    assert_eq!(p, golden("direction_k0_confidence.txt"));
    assert!(p.contains("a confidence level and a brief explanation"));
}

#[test]
fn direction_five_shot_with_confidence() {
    let set = PromptSet::builtin("en-v1").unwrap();
    let p = build_direction_prompt(&set, QUERY, &set.direction_shots, 5, true).unwrap();
    assert_eq!(p, golden("direction_k5_confidence.txt"));
    assert!(p.contains("Answer: Rise\nConfidence: 100%\nReason: "));
}

#[test]
fn direction_five_shot_plain() {
    let set = PromptSet::builtin("en-v1").unwrap();
    let p = build_direction_prompt(&set, QUERY, &set.direction_shots, 5, false).unwrap();
    assert_eq!(p, golden("direction_k5_plain.txt"));
    assert!(!p.contains("Confidence"));
}

#[test]
fn integration_three_models() {
    let set = PromptSet::builtin("en-v1").unwrap();
    let judgments = [
        judgment(
            Direction::Stable,
            80,
            "The text clearly states that \"the average spending per customer has not dropped significantly.\" Despite other golf courses lowering their fees, the average spending per customer at this golf course has not changed significantly, leading to the classification as stable.",
            "gpt-4o",
        ),
        judgment(Direction::Fall, 60, "Surrounding courses lowered their play fees.", "claude-3-5-sonnet"),
        judgment(Direction::Stable, 90, "Spending per customer is roughly unchanged.", "gemini-1.5-flash"),
    ];
    let p = build_integration_prompt(&set, QUERY, &judgments).unwrap();
    assert_eq!(p, golden("integration_3.txt"));
    let m0 = p.find("【Model 0】").unwrap();
    let m1 = p.find("【Model 1】").unwrap();
    let m2 = p.find("【Model 2】").unwrap();
    assert!(m0 < m1 && m1 < m2);
    assert!(p.contains("Classification Result: Stable\nConfidence: 80%"));
}

#[test]
fn builders_are_deterministic() {
    let set = PromptSet::builtin("en-v1").unwrap();
    let a = build_direction_prompt(&set, QUERY, &set.direction_shots, 5, true).unwrap();
    let b = build_direction_prompt(&set.clone(), QUERY, &set.direction_shots, 5, true).unwrap();
    assert_eq!(a.as_bytes(), b.as_bytes());
}

#[test]
fn japanese_set_uses_japanese_fields() {
    let set = PromptSet::builtin("ja-v1").unwrap();
    let p = build_direction_prompt(&set, "客単価が下がっている。", &set.direction_shots, 1, true).unwrap();
    assert!(p.contains("回答：上昇\n確信度：100%\n理由："));
    assert!(p.ends_with("テキスト：客単価が下がっている。\n回答："));
}
