//! Regenerates `fixtures/pipeline/`: a 200-comment synthetic corpus, labels,
//! an industry mapping, a reference price series and canned model replies.
//!
//!     cargo run -p psi-cli --example make_fixtures -- crates/psi-cli/fixtures/pipeline

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use psi_core::corpus::{write_labeled, CommentFormat, Domain, LabeledComment, SurveyComment, SurveyKind};
use psi_core::gateway::{parse_judgment, ChatRequest, ModelJudgment, PromptSet, Task, Verdict};
use psi_core::{Direction, Relevance, YearMonth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const JUDGES: [&str; 2] = ["gpt-4o", "gemini-1.5-flash"];
const INTEGRATOR: &str = "gemini-1.5-pro";
const SHOTS: usize = 5;

const ITEMS: [&str; 8] = [
    "vegetables",
    "rice",
    "gasoline",
    "electricity",
    "imported beef",
    "steel sheets",
    "freight",
    "paper",
];

const HOUSEHOLD: [&str; 8] = [
    "Supermarket",
    "Bakery (in-store baking)",
    "Confectionery maker",
    "Department store (food floor)",
    "Convenience store",
    "Gas station",
    "Taxi driver",
    "Street vendor (festival)",
];
const CORPORATE: [&str; 5] = [
    "Food manufacturing",
    "Metal products (sheet)",
    "Transport",
    "Real estate",
    "Consulting (independent)",
];

fn mapping_csv() -> &'static str {
    "industry,class\n\
     Supermarket,non_manufacturing\n\
     Department store,non_manufacturing\n\
     Convenience store,non_manufacturing\n\
     Gas station,non_manufacturing\n\
     Taxi driver,non_manufacturing\n\
     Bakery,manufacturing\n\
     Confectionery maker,manufacturing\n\
     Food manufacturing,manufacturing\n\
     Metal products,manufacturing\n\
     Transport,non_manufacturing\n\
     Real estate,non_manufacturing\n"
}

const VOCAB: [&str; 22] = [
    "price",
    "prices",
    "expensive",
    "cheaper",
    "cost",
    "costs",
    "raised",
    "discount",
    "markdown",
    "unchanged",
    "flat",
    "surcharge",
    "customers",
    "sales",
    "weather",
    "rain",
    "staff",
    "holiday",
    "traffic",
    "orders",
    "tourists",
    "busy",
];

const REGIONS: [&str; 6] = ["Hokkaido", "Tohoku", "Kanto", "Kinki", "Kyushu", "Okinawa"];

fn latent(m: YearMonth) -> f64 {
    let t = (m.ordinal() - YearMonth::new(2020, 1).unwrap().ordinal()) as f64;
    (2.0 * PI * t / 30.0).sin() + 0.025 * t - 0.4
}

fn direction_text(d: Direction, item: &str, rng: &mut ChaCha8Rng) -> String {
    let options: &[&str] = match d {
        Direction::Rise => &[
            "Prices of {} went up again and customers say everything is expensive.",
            "Suppliers raised the cost of {} for the third time.",
            "A fuel surcharge was added, so {} prices are higher.",
        ],
        Direction::Fall => &[
            "Competitors started a discount on {} and our prices came down.",
            "{} became cheaper after the markdown season began.",
            "Input costs for {} eased and we cut prices.",
        ],
        Direction::Stable => &[
            "Prices of {} are unchanged from last month.",
            "The price of {} stayed flat despite busy sales.",
        ],
        Direction::NotRelated => &[
            "Rain kept customers away and sales of {} were weak.",
            "Holiday traffic brought tourists, orders for {} were busy.",
            "Staff shortages mean we cannot keep up with {} orders.",
        ],
    };
    let template = options[rng.random_range(0..options.len())];
    let region = REGIONS[rng.random_range(0..REGIONS.len())];
    let text = format!(
        "{} ({region}, about {} visitors a day)",
        template.replace("{}", item),
        rng.random_range(10..400) * 10
    );
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => text,
    }
}

fn pick_direction(z: f64, rng: &mut ChaCha8Rng) -> Direction {
    let s = 1.0 / (1.0 + (-2.0 * z).exp());
    let p_rise = 0.15 + 0.6 * s;
    let p_fall = 0.15 + 0.6 * (1.0 - s);
    let u: f64 = rng.random();
    if u < p_rise {
        Direction::Rise
    } else if u < p_rise + p_fall {
        Direction::Fall
    } else {
        Direction::Stable
    }
}

const REASONS: [&str; 4] = [
    "The comment describes the price level directly.",
    "Mentions of costs and discounts indicate the direction.",
    "The respondent compares prices with the previous month.",
    "No statement about prices beyond the sales situation.",
];

/// One judge's reply in that judge's house style.
fn judge_reply(judge: usize, label: Direction, confidence: u8, reason: &str, variant: usize) -> String {
    let name = label.prompt_name();
    match (judge, variant % 4) {
        (0, 0 | 1) => format!("Answer: {name}\nConfidence: {confidence}%\nReason: {reason}"),
        (0, 2) => format!(
            "Answer: {}\nConfidence: {confidence} %\nReason: {reason}",
            name.to_uppercase()
        ),
        (0, _) => format!("Sure.\nAnswer: {name}\nConfidence: {confidence}%\nReason: {reason}\n"),
        (_, 0 | 1) => format!("Classification Result: {name}\nConfidence: {confidence}%\nReason: {reason}"),
        (_, 2) => format!("Ａｎｓｗｅｒ：{name}\nＣｏｎｆｉｄｅｎｃｅ：{confidence}％\nＲｅａｓｏｎ：{reason}"),
        (_, _) => format!(
            "**Answer:** {}\nConfidence: {confidence}%\nReason: {reason}",
            name.to_lowercase()
        ),
    }
}

fn save_reply(dir: &Path, request: &ChatRequest, reply: &str) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join(format!("{}.txt", request.digest())), reply).unwrap();
}

fn noisy_direction(truth: Direction, accuracy: f64, rng: &mut ChaCha8Rng) -> Direction {
    if rng.random::<f64>() < accuracy {
        truth
    } else {
        let others: Vec<Direction> = Direction::ALL.into_iter().filter(|d| *d != truth).collect();
        others[rng.random_range(0..others.len())]
    }
}

fn main() {
    let out: PathBuf = std::env::args().nth(1).expect("usage: make_fixtures <dir>").into();
    if out.exists() {
        fs::remove_dir_all(&out).unwrap();
    }
    fs::create_dir_all(&out).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);

    // corpus: 48 months, 5 comments in the first 8 months and 4 afterwards
    let mut labeled = Vec::new();
    let start = YearMonth::new(2020, 1).unwrap();
    for k in 0..48 {
        let month = start.offset(k);
        let per_month = if k < 8 { 5 } else { 4 };
        for j in 0..per_month {
            let id = format!("ew-{}-{:02}", month.to_string().replace('-', ""), j);
            let household = rng.random::<f64>() < 0.6;
            let (domain, industry) = if household {
                (Domain::Household, HOUSEHOLD[rng.random_range(0..HOUSEHOLD.len())])
            } else {
                (Domain::Corporate, CORPORATE[rng.random_range(0..CORPORATE.len())])
            };
            // the first comment of each month always talks about prices
            let price_related = j == 0 || rng.random::<f64>() < 0.75;
            let direction = if price_related {
                pick_direction(latent(month), &mut rng)
            } else {
                Direction::NotRelated
            };
            let item = ITEMS[rng.random_range(0..ITEMS.len())];
            let kind = if j == per_month - 1 && k % 5 == 0 {
                SurveyKind::Future
            } else {
                SurveyKind::Current
            };
            labeled.push(LabeledComment {
                comment: SurveyComment {
                    id,
                    month,
                    domain,
                    industry_raw: industry.to_string(),
                    text: direction_text(direction, item, &mut rng),
                    survey_kind: kind,
                },
                relevance: Some(Relevance::from_bool(price_related)),
                direction: Some(direction),
            });
        }
    }
    assert_eq!(labeled.len(), 200);
    let comments: Vec<SurveyComment> = labeled.iter().map(|l| l.comment.clone()).collect();
    psi_core::corpus::write_comments(&out.join("corpus.jsonl"), &comments, CommentFormat::Jsonl).unwrap();
    write_labeled(&out.join("labeled.jsonl"), &labeled, CommentFormat::Jsonl).unwrap();
    fs::write(out.join("industry_mapping.csv"), mapping_csv()).unwrap();
    fs::write(out.join("vocab.txt"), VOCAB.join("\n") + "\n").unwrap();

    let mut external = String::from("id,relevance\n");
    for l in &labeled {
        external.push_str(&format!("{},{}\n", l.comment.id, l.relevance.unwrap().as_str()));
    }
    fs::write(out.join("external_predictions.csv"), external).unwrap();

    // reference: a price level whose year-on-year change follows the latent
    // trend three months later
    let noise = Normal::new(0.0, 0.15).unwrap();
    let ref_start = YearMonth::new(2019, 1).unwrap();
    let mut levels: Vec<f64> = Vec::new();
    for k in 0..60 {
        let month = ref_start.offset(k);
        let level = if k < 12 {
            100.0 + 0.05 * k as f64
        } else {
            let yoy = 1.2 * latent(month.offset(-3)) + noise.sample(&mut rng);
            levels[k as usize - 12] * (1.0 + yoy / 100.0)
        };
        levels.push(level);
    }
    let mut reference = String::from("month,value\n");
    for (k, v) in levels.iter().enumerate() {
        reference.push_str(&format!("{},{:.3}\n", ref_start.offset(k as i64), v));
    }
    fs::write(out.join("reference_cpi.csv"), reference).unwrap();

    // canned replies for both judges and the integrator, for every comment
    let set = PromptSet::builtin("en-v1").unwrap();
    let replies = out.join("replies");
    for l in &labeled {
        let c = &l.comment;
        let truth = l.direction.unwrap();
        let prompt = set
            .direction_prompt(&c.text, &set.direction_shots, SHOTS, true)
            .unwrap();
        let request = ChatRequest::user(prompt);
        let mut judgments: Vec<ModelJudgment> = Vec::new();
        for (j, judge) in JUDGES.iter().enumerate() {
            let label = noisy_direction(truth, 0.85, &mut rng);
            let confidence = [60u8, 70, 80, 90, 95, 100][rng.random_range(0..6)];
            let reason = if label == Direction::NotRelated {
                REASONS[3]
            } else {
                REASONS[rng.random_range(0..3)]
            };
            let reply = judge_reply(j, label, confidence, reason, rng.random_range(0..4));
            let parsed = parse_judgment(&reply, Task::Direction, judge).expect("judge fixture parses");
            assert_eq!(parsed.label, Verdict::Direction(label), "{reply}");
            save_reply(&replies.join(judge), &request, &reply);
            judgments.push(parsed);
        }
        let prompt = set.integration_prompt(&c.text, &judgments).unwrap();
        let label = noisy_direction(truth, 0.92, &mut rng);
        let reply = format!(
            "Classification result considering the above: {}\nReason: The models mostly agree with the comment's wording.",
            label.prompt_name()
        );
        let parsed = parse_judgment(&reply, Task::Integration, INTEGRATOR).expect("integrator fixture parses");
        assert_eq!(parsed.label, Verdict::Direction(label));
        save_reply(&replies.join(INTEGRATOR), &ChatRequest::user(prompt), &reply);

        // filtration replies, for the llm filter backend
        let prompt = set.filtration_prompt(&c.text, &set.filtration_shots, SHOTS).unwrap();
        let answer = if l.relevance.unwrap().is_price_related() {
            "Yes"
        } else {
            "No"
        };
        save_reply(
            &replies.join("filter"),
            &ChatRequest::user(prompt),
            &format!("Answer: {answer}"),
        );
    }

    fs::write(out.join("pipeline.toml"), PIPELINE_TOML).unwrap();
    println!("wrote fixtures to {}", out.display());
}

const PIPELINE_TOML: &str = r#"# Synthetic 200-comment pipeline with recorded model replies.
output_dir = "out"
cache = "out/cache/replies.jsonl"
seed = 42
max_in_flight = 4

[retry]
max_attempts = 1
base_delay_ms = 0
max_delay_ms = 0

[corpus]
path = "corpus.jsonl"
kinds = ["current"]
industry_mapping = "industry_mapping.csv"
labels = "labeled.jsonl"

[filter]
backend = "naive_bayes"
vocabulary = "vocab.txt"
training = "labeled.jsonl"
alpha = 1.0
split = { train = 0.6, dev = 0.2, test = 0.2 }

[classify]
judges = ["gpt-4o", "gemini-flash"]
prompt_set = "en-v1"
shots = 5
with_confidence = true

[ensemble]
method = "llm"
integrator = "gemini-pro"

[index]
variants = ["general", "consumer_general", "consumer_goods", "consumer_services", "corporate_goods", "corporate_services"]

[evaluate]
variant = "general"
reference = "reference_cpi.csv"
reference_name = "CPI"
transform = "yoy_pct"
lag_min = 0
lag_max = 12
min_overlap = 24
max_lag = 6

[[endpoints]]
name = "gpt-4o"
provider = "fixture"
model = "gpt-4o"
fixture_dir = "replies/gpt-4o"

[[endpoints]]
name = "gemini-flash"
provider = "fixture"
model = "gemini-1.5-flash"
fixture_dir = "replies/gemini-1.5-flash"

[[endpoints]]
name = "gemini-pro"
provider = "fixture"
model = "gemini-1.5-pro"
fixture_dir = "replies/gemini-1.5-pro"

[[endpoints]]
name = "filter-llm"
provider = "fixture"
model = "gpt-4o-mini"
fixture_dir = "replies/filter"
"#;
