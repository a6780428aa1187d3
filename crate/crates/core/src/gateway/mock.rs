//! Deterministic offline stand-in for a chat model.
//!
//! Ratings are a pure function of (seed, respondent key, condition key, item
//! index). Each item starts from a fixed level shared by every mock, shifted
//! by a per-respondent offset and a seeded per-cell offset. Above temperature
//! zero a repeat-dependent ±1 nudge is applied per item with probability equal
//! to the temperature; the nudge direction is fixed per cell, so two repeats
//! never differ by more than one point on any item.

use std::collections::BTreeMap;

use super::backend::{CompletionBackend, RawCompletion, TransportError};
use super::{CompletionRequest, CompletionResult};
use crate::prompt::format::render_ratings_block;
use crate::seed::{splitmix64, stable_hash};

/// Condition part of the mock key; only `repeat_index` varies between repeats.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MockConditionKey {
    pub condition: String,
    pub repeat_index: u32,
}

fn clamp(r: i64, lo: i32, hi: i32) -> i32 {
    r.clamp(i64::from(lo), i64::from(hi)) as i32
}

fn unit(x: u64) -> f64 {
    (x >> 11) as f64 / (1u64 << 53) as f64
}

pub fn mock_ratings(
    seed: u64,
    respondent_key: &str,
    condition_key: &MockConditionKey,
    temperature: f64,
    item_count: usize,
    scale: (i32, i32),
) -> Vec<i32> {
    let (lo, hi) = scale;
    let points = (hi - lo + 1).max(1) as u64;
    let person = stable_hash(&[b"mock-person", respondent_key.as_bytes()]);
    let person_offset = (person % 3) as i64 - 1;
    let cell = stable_hash(&[
        b"mock-cell",
        &seed.to_le_bytes(),
        respondent_key.as_bytes(),
        condition_key.condition.as_bytes(),
    ]);
    let repeat = stable_hash(&[
        b"mock-repeat",
        &seed.to_le_bytes(),
        respondent_key.as_bytes(),
        condition_key.condition.as_bytes(),
        &condition_key.repeat_index.to_le_bytes(),
    ]);
    let p_jitter = if temperature.is_finite() { temperature.clamp(0.0, 1.0) } else { 0.0 };

    (0..item_count as u64)
        .map(|i| {
            let level = i64::from(lo) + (splitmix64(stable_hash(&[b"mock-item", &i.to_le_bytes()])) % points) as i64;
            let noise = (splitmix64(cell ^ i.wrapping_mul(0xA24B_AED4_963E_E407)) % 3) as i64 - 1;
            let base = clamp(level + person_offset + noise, lo, hi);
            if p_jitter == 0.0 {
                return base;
            }
            let direction = if splitmix64(cell.rotate_left(17) ^ i) & 1 == 0 { 1 } else { -1 };
            if unit(splitmix64(repeat ^ i.wrapping_mul(0x9FB2_1C65_1E98_DF25))) < p_jitter {
                clamp(i64::from(base) + direction, lo, hi)
            } else {
                base
            }
        })
        .collect()
}

/// Mock reply for `request`; item count and scale come from its context.
pub fn mock_complete(
    request: &CompletionRequest,
    seed: u64,
    respondent_key: &str,
    condition_key: &MockConditionKey,
) -> CompletionResult {
    let (item_count, scale) = request
        .context
        .as_ref()
        .map(|c| (c.item_count, (c.scale_min, c.scale_max)))
        .unwrap_or((0, (1, 1)));
    let ratings = mock_ratings(seed, respondent_key, condition_key, request.temperature, item_count, scale);
    let raw_text = format!("Answering as the participant.\n\n{}", render_ratings_block(&ratings));
    let mut provider_metadata = BTreeMap::new();
    provider_metadata.insert("adapter".to_string(), "mock".to_string());
    provider_metadata.insert("mock_seed".to_string(), seed.to_string());
    CompletionResult {
        output_tokens: (raw_text.len() / 4) as u64,
        prompt_tokens: (request.prompt_text.len() / 4) as u64,
        raw_text,
        latency_ms: 0,
        provider_metadata,
        attempt_count: 1,
    }
}

/// Backend wrapper; the effective seed mixes the run's master seed with the
/// provider's own `mock_seed`, so identically configured mocks agree.
#[derive(Debug, Clone)]
pub struct MockBackend {
    mock_seed: u64,
}

impl MockBackend {
    pub fn new(mock_seed: u64) -> Self {
        Self { mock_seed }
    }
}

impl CompletionBackend for MockBackend {
    fn send(&self, request: &CompletionRequest) -> Result<RawCompletion, TransportError> {
        let ctx = request
            .context
            .as_ref()
            .ok_or_else(|| TransportError::BadRequest("mock provider needs a request context".into()))?;
        let seed = stable_hash(&[b"mock", &ctx.master_seed.to_le_bytes(), &self.mock_seed.to_le_bytes()]);
        let key = MockConditionKey { condition: ctx.condition_key.clone(), repeat_index: ctx.repeat_index };
        let r = mock_complete(request, seed, &ctx.respondent_key, &key);
        Ok(RawCompletion {
            text: r.raw_text,
            prompt_tokens: r.prompt_tokens,
            output_tokens: r.output_tokens,
            metadata: r.provider_metadata,
            latency_ms: Some(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::RequestContext;

    fn key(c: &str, r: u32) -> MockConditionKey {
        MockConditionKey { condition: c.into(), repeat_index: r }
    }

    fn request(t: f64) -> CompletionRequest {
        CompletionRequest {
            prompt_text: "prompt".into(),
            temperature: t,
            max_output_tokens: 256,
            seed: None,
            context: Some(RequestContext {
                master_seed: 1,
                respondent_key: "p".into(),
                condition_key: "P_BR/0".into(),
                repeat_index: 0,
                item_count: 15,
                scale_min: 1,
                scale_max: 6,
            }),
        }
    }

    #[test]
    fn zero_temperature_is_deterministic_across_repeats() {
        let a = mock_ratings(7, "p1", &key("c", 0), 0.0, 15, (1, 6));
        let b = mock_ratings(7, "p1", &key("c", 1), 0.0, 15, (1, 6));
        assert_eq!(a, b);
        assert!(a.iter().all(|r| (1..=6).contains(r)));
    }

    #[test]
    fn raw_text_is_byte_identical() {
        let r1 = mock_complete(&request(0.5), 9, "p", &key("c", 0));
        let r2 = mock_complete(&request(0.5), 9, "p", &key("c", 0));
        assert_eq!(r1.raw_text, r2.raw_text);
    }

    #[test]
    fn jitter_is_bounded_by_one_point() {
        // enumerate repeats and respondents; diff each pair of repeats
        let mut any_diff = false;
        for p in 0..40 {
            let resp = format!("r{p}");
            let base = mock_ratings(3, &resp, &key("c", 0), 0.0, 15, (1, 6));
            let reps: Vec<Vec<i32>> = (0..4).map(|k| mock_ratings(3, &resp, &key("c", k), 0.5, 15, (1, 6))).collect();
            for a in &reps {
                for (x, y) in a.iter().zip(&base) {
                    assert!((x - y).abs() <= 1);
                }
                for b in &reps {
                    for (x, y) in a.iter().zip(b) {
                        assert!([-1, 0, 1].contains(&(x - y)));
                        any_diff |= x != y;
                    }
                }
            }
        }
        assert!(any_diff);
    }

    #[test]
    fn each_key_part_matters() {
        let base = mock_ratings(1, "a", &key("c", 0), 0.0, 30, (1, 6));
        assert_ne!(base, mock_ratings(2, "a", &key("c", 0), 0.0, 30, (1, 6)));
        assert_ne!(base, mock_ratings(1, "b", &key("c", 0), 0.0, 30, (1, 6)));
        assert_ne!(base, mock_ratings(1, "a", &key("d", 0), 0.0, 30, (1, 6)));
        assert_eq!(mock_ratings(1, "a", &key("c", 0), 0.0, 10, (1, 6)), base[..10]);
    }

    #[test]
    fn backend_requires_context() {
        let mut req = request(0.0);
        req.context = None;
        assert!(MockBackend::new(0).send(&req).is_err());
    }
}
