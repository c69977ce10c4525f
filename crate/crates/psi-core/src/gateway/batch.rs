use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cache::{CacheError, CacheKey, ReplyCache};
use super::client::{ChatClient, ChatRequest, TransportError};
use super::parse::{parse_judgment, ParseError};
use super::{ModelJudgment, Task};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total tries per prompt, including the first.
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay_ms: 500,
            max_delay_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            base_delay_ms: 0,
            max_delay_ms: 0,
        }
    }

    /// Wait before retry number `retry` (1-based): exponential, capped.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

/// Why one prompt produced no judgment.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ItemError {
    #[error("transport failed after {attempts} attempt(s): {error}")]
    Transport { error: TransportError, attempts: u32 },
    #[error("unparseable reply: {error}")]
    Parse { error: ParseError, raw: String },
    #[error("cache write failed: {0}")]
    Cache(String),
}

#[derive(Debug)]
pub struct BatchOutput {
    /// One entry per input prompt, in input order.
    pub results: Vec<Result<ModelJudgment, ItemError>>,
    pub cache_hits: usize,
    /// Number of calls made to the client, retries included.
    pub dispatches: usize,
}

impl BatchOutput {
    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| r.is_err()).count()
    }
}

fn fetch(
    client: &dyn ChatClient,
    request: &ChatRequest,
    cache: &ReplyCache,
    retry: &RetryPolicy,
    hits: &AtomicUsize,
    dispatches: &AtomicUsize,
) -> Result<String, ItemError> {
    let key = CacheKey::for_request(client, request);
    if let Some(reply) = cache.get(&key) {
        hits.fetch_add(1, Ordering::Relaxed);
        return Ok(reply);
    }
    let attempts = retry.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        dispatches.fetch_add(1, Ordering::Relaxed);
        match client.complete(request) {
            Ok(reply) => {
                cache
                    .put(key, client.model_id(), &request.digest(), &reply)
                    .map_err(|e: CacheError| ItemError::Cache(e.to_string()))?;
                return Ok(reply);
            }
            Err(error) if error.retryable && attempt < attempts => {
                thread::sleep(retry.delay(attempt));
            }
            Err(error) => {
                return Err(ItemError::Transport {
                    error,
                    attempts: attempt,
                })
            }
        }
    }
}

/// Sends every prompt through `client`, consulting `cache` first.
///
/// Up to `max_in_flight` requests run at once. Failures are reported per
/// item; the batch itself never aborts. Replies are cached before parsing, so
/// a reply that fails to parse is not re-requested on the next run.
pub fn classify_batch(
    client: &dyn ChatClient,
    prompts: &[ChatRequest],
    task: Task,
    cache: &ReplyCache,
    max_in_flight: usize,
    retry: &RetryPolicy,
) -> BatchOutput {
    let hits = AtomicUsize::new(0);
    let dispatches = AtomicUsize::new(0);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<ModelJudgment, ItemError>>>> = Mutex::new(vec![None; prompts.len()]);
    let workers = max_in_flight.max(1).min(prompts.len().max(1));

    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= prompts.len() {
                    break;
                }
                let result = fetch(client, &prompts[i], cache, retry, &hits, &dispatches).and_then(|raw| {
                    parse_judgment(&raw, task, client.model_id()).map_err(|error| ItemError::Parse { error, raw })
                });
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });

    BatchOutput {
        results: slots
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|r| r.expect("every index is visited"))
            .collect(),
        cache_hits: hits.into_inner(),
        dispatches: dispatches.into_inner(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{DecodingParams, FixtureClient, Verdict};
    use crate::labels::Direction;
    use proptest::prelude::*;
    use std::fs;

    /// Fails the first `fail_first` calls for each prompt, then answers with
    /// the prompt's last word.
    struct Flaky {
        fail_first: usize,
        retryable: bool,
        seen: Mutex<std::collections::HashMap<String, usize>>,
        calls: AtomicUsize,
    }

    impl Flaky {
        fn new(fail_first: usize, retryable: bool) -> Self {
            Flaky {
                fail_first,
                retryable,
                seen: Mutex::default(),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl ChatClient for Flaky {
        fn model_id(&self) -> &str {
            "flaky"
        }
        fn params(&self) -> DecodingParams {
            DecodingParams::default()
        }
        fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let mut seen = self.seen.lock().unwrap();
            let n = seen.entry(request.user.clone()).or_insert(0);
            *n += 1;
            if *n <= self.fail_first {
                return Err(TransportError {
                    message: "boom".into(),
                    retryable: self.retryable,
                });
            }
            Ok(request.user.split_whitespace().last().unwrap_or("").to_string())
        }
    }

    fn prompts(words: &[&str]) -> Vec<ChatRequest> {
        words
            .iter()
            .enumerate()
            .map(|(i, w)| ChatRequest::user(format!("item {i} {w}")))
            .collect()
    }

    #[test]
    fn retries_then_succeeds() {
        let client = Flaky::new(2, true);
        let cache = ReplyCache::in_memory();
        let out = classify_batch(
            &client,
            &prompts(&["Rise"]),
            Task::Direction,
            &cache,
            1,
            &RetryPolicy::no_delay(3),
        );
        assert_eq!(
            out.results[0].as_ref().unwrap().label,
            Verdict::Direction(Direction::Rise)
        );
        assert_eq!(out.dispatches, 3);
    }

    #[test]
    fn gives_up_after_policy() {
        let client = Flaky::new(5, true);
        let cache = ReplyCache::in_memory();
        let out = classify_batch(
            &client,
            &prompts(&["Rise", "Fall"]),
            Task::Direction,
            &cache,
            2,
            &RetryPolicy::no_delay(3),
        );
        assert_eq!(out.results.len(), 2);
        for r in &out.results {
            assert!(matches!(r, Err(ItemError::Transport { attempts: 3, .. })));
        }
        assert!(cache.is_empty());
    }

    #[test]
    fn fatal_errors_are_not_retried() {
        let client = Flaky::new(1, false);
        let cache = ReplyCache::in_memory();
        let out = classify_batch(
            &client,
            &prompts(&["Rise"]),
            Task::Direction,
            &cache,
            1,
            &RetryPolicy::no_delay(3),
        );
        assert!(matches!(&out.results[0], Err(ItemError::Transport { attempts: 1, .. })));
    }

    #[test]
    fn parse_failures_are_per_item_and_cached() {
        let client = Flaky::new(0, true);
        let cache = ReplyCache::in_memory();
        let ps = prompts(&["Rise", "gibberish", "Stable"]);
        let out = classify_batch(&client, &ps, Task::Direction, &cache, 3, &RetryPolicy::no_delay(1));
        assert!(out.results[0].is_ok());
        assert!(matches!(&out.results[1], Err(ItemError::Parse { raw, .. }) if raw == "gibberish"));
        assert!(out.results[2].is_ok());
        assert_eq!(out.failures(), 1);
        assert_eq!(cache.len(), 3);
    }

    #[test]
    fn warm_cache_means_no_dispatch() {
        let client = Flaky::new(0, true);
        let cache = ReplyCache::in_memory();
        let ps = prompts(&["Rise", "Fall", "Stable", "Not related"]);
        let first = classify_batch(&client, &ps, Task::Direction, &cache, 2, &RetryPolicy::no_delay(1));
        let calls = client.calls.load(Ordering::SeqCst);
        let second = classify_batch(&client, &ps, Task::Direction, &cache, 2, &RetryPolicy::no_delay(1));
        assert_eq!(client.calls.load(Ordering::SeqCst), calls);
        assert_eq!(second.dispatches, 0);
        assert_eq!(second.cache_hits, 4);
        assert_eq!(first.results, second.results);
    }

    #[test]
    fn fixture_client_batch() {
        let dir = tempfile::tempdir().unwrap();
        let replies = [
            "Answer: Rise\nConfidence: 90%\nReason: prices went up.",
            "Answer: Stable\nConfidence: 70%\nReason: unchanged.",
            "Answer: Not related\nConfidence: 100%\nReason: no prices.",
        ];
        let ps = prompts(&["a", "b", "c"]);
        for (p, r) in ps.iter().zip(replies) {
            fs::write(dir.path().join(format!("{}.txt", p.digest())), r).unwrap();
        }
        let client = FixtureClient::new("fixture-model", dir.path());
        let cache = ReplyCache::in_memory();
        let out = classify_batch(&client, &ps, Task::Direction, &cache, 3, &RetryPolicy::default());
        let got: Vec<(Direction, Option<u8>)> = out
            .results
            .iter()
            .map(|r| {
                let j = r.as_ref().unwrap();
                (j.label.direction().unwrap(), j.confidence)
            })
            .collect();
        assert_eq!(
            got,
            [
                (Direction::Rise, Some(90)),
                (Direction::Stable, Some(70)),
                (Direction::NotRelated, Some(100))
            ]
        );
        assert_eq!(client.calls(), 3);
    }

    #[test]
    fn delay_schedule() {
        let p = RetryPolicy {
            max_attempts: 5,
            base_delay_ms: 100,
            max_delay_ms: 350,
        };
        assert_eq!(p.delay(1), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(200));
        assert_eq!(p.delay(3), Duration::from_millis(350));
        assert_eq!(p.delay(80), Duration::from_millis(350));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn order_and_length_preserved(labels in proptest::collection::vec(0usize..5, 0..40), inflight in 1usize..9) {
            let words = ["Rise", "Stable", "Fall", "related", "junk"];
            let ws: Vec<&str> = labels.iter().map(|&i| words[i]).collect();
            let ps = prompts(&ws);
            let client = Flaky::new(0, true);
            let cache = ReplyCache::in_memory();
            let out = classify_batch(&client, &ps, Task::Direction, &cache, inflight, &RetryPolicy::no_delay(1));
            prop_assert_eq!(out.results.len(), ps.len());
            for (r, w) in out.results.iter().zip(&ws) {
                match r {
                    Ok(j) => prop_assert_eq!(j.raw.as_str(), *w),
                    Err(ItemError::Parse { raw, .. }) => prop_assert_eq!(raw.as_str(), *w),
                    Err(e) => prop_assert!(false, "unexpected {e}"),
                }
            }
        }
    }
}
