//! Token counting backends, selected by encoding id.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

pub const O200K_BASE: &str = "o200k_base";
pub const APPROX: &str = "approx";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenizerError {
    #[error("unknown encoding {encoding:?}; registered: {}", known.join(", "))]
    UnknownEncoding { encoding: String, known: Vec<String> },
}

pub trait TokenCounter: Send + Sync {
    /// Encoding this counter answers for.
    fn encoding(&self) -> &str;
    /// Backend name as reported in output metadata.
    fn backend(&self) -> &str;
    fn count(&self, text: &str) -> usize;
    /// Upper bound on `count(a + b) - count(a) - count(b)`.
    fn merge_slack(&self) -> usize;
    fn is_approximation(&self) -> bool;
}

/// Word runs and single punctuation marks each count as one token.
/// Concatenation can only join two word runs, so counts never grow on merge.
#[derive(Debug, Clone)]
pub struct ApproxCounter {
    encoding: String,
}

impl ApproxCounter {
    pub fn new(encoding: impl Into<String>) -> Self {
        Self { encoding: encoding.into() }
    }
}

impl TokenCounter for ApproxCounter {
    fn encoding(&self) -> &str {
        &self.encoding
    }

    fn backend(&self) -> &str {
        "approx-whitespace-punct"
    }

    fn count(&self, text: &str) -> usize {
        let mut n = 0;
        let mut in_word = false;
        for c in text.chars() {
            if c.is_alphanumeric() {
                if !in_word {
                    n += 1;
                    in_word = true;
                }
            } else {
                in_word = false;
                if !c.is_whitespace() {
                    n += 1;
                }
            }
        }
        n
    }

    fn merge_slack(&self) -> usize {
        0
    }

    fn is_approximation(&self) -> bool {
        true
    }
}

#[cfg(feature = "o200k")]
pub struct TiktokenCounter {
    bpe: tiktoken_rs::CoreBPE,
}

#[cfg(feature = "o200k")]
impl TiktokenCounter {
    pub fn o200k() -> Self {
        Self { bpe: tiktoken_rs::o200k_base().expect("bundled o200k_base tables load") }
    }
}

#[cfg(feature = "o200k")]
impl TokenCounter for TiktokenCounter {
    fn encoding(&self) -> &str {
        O200K_BASE
    }

    fn backend(&self) -> &str {
        "tiktoken"
    }

    fn count(&self, text: &str) -> usize {
        self.bpe.encode_ordinary(text).len()
    }

    // Only the pre-token straddling the join can re-merge.
    fn merge_slack(&self) -> usize {
        1
    }

    fn is_approximation(&self) -> bool {
        false
    }
}

#[derive(Clone, Default)]
pub struct TokenizerRegistry {
    counters: BTreeMap<String, Arc<dyn TokenCounter>>,
}

impl TokenizerRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `o200k_base` (BPE tables when compiled in, flagged approximation
    /// otherwise) and `approx`.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        #[cfg(feature = "o200k")]
        reg.register(Arc::new(TiktokenCounter::o200k()));
        #[cfg(not(feature = "o200k"))]
        reg.register(Arc::new(ApproxCounter::new(O200K_BASE)));
        reg.register(Arc::new(ApproxCounter::new(APPROX)));
        reg
    }

    pub fn register(&mut self, counter: Arc<dyn TokenCounter>) {
        self.counters.insert(counter.encoding().to_string(), counter);
    }

    pub fn resolve(&self, encoding: &str) -> Result<Arc<dyn TokenCounter>, TokenizerError> {
        self.counters.get(encoding).cloned().ok_or_else(|| TokenizerError::UnknownEncoding {
            encoding: encoding.to_string(),
            known: self.counters.keys().cloned().collect(),
        })
    }

    pub fn encodings(&self) -> impl Iterator<Item = &str> {
        self.counters.keys().map(String::as_str)
    }
}

/// Process-wide builtin registry; the BPE tables load once.
pub fn builtin_registry() -> &'static TokenizerRegistry {
    static REGISTRY: OnceLock<TokenizerRegistry> = OnceLock::new();
    REGISTRY.get_or_init(TokenizerRegistry::builtin)
}

pub fn count_tokens(text: &str, encoding: &str) -> Result<usize, TokenizerError> {
    Ok(builtin_registry().resolve(encoding)?.count(text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text_is_zero() {
        assert_eq!(count_tokens("", O200K_BASE).unwrap(), 0);
        assert_eq!(count_tokens("", APPROX).unwrap(), 0);
    }

    #[test]
    fn single_word_is_at_least_one() {
        for w in ["exercise", "a", "Z", "pleasurable"] {
            assert!(count_tokens(w, O200K_BASE).unwrap() >= 1);
            assert_eq!(count_tokens(w, APPROX).unwrap(), 1);
        }
    }

    #[test]
    fn unknown_encoding_is_config_error() {
        let err = count_tokens("x", "cl_nonexistent").unwrap_err();
        assert!(matches!(err, TokenizerError::UnknownEncoding { .. }));
    }

    #[test]
    fn approx_counts_words_and_punctuation() {
        assert_eq!(count_tokens("I don't exercise, ever.", APPROX).unwrap(), 8);
    }

    #[cfg(feature = "o200k")]
    #[test]
    fn o200k_backend_is_exact() {
        let c = builtin_registry().resolve(O200K_BASE).unwrap();
        assert_eq!(c.backend(), "tiktoken");
        assert!(!c.is_approximation());
        assert_eq!(c.count("hello world hello"), 3);
    }

    fn text() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop::sample::select(vec!['a', 'b', 'e', 'X', ' ', ' ', '1', '7', '.', ',', '\'', '\n', '-', 'é', '中', '😀']),
            0..24,
        )
        .prop_map(|v| v.into_iter().collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn concatenation_within_merge_slack(a in text(), b in text()) {
            let reg = builtin_registry();
            for enc in reg.encodings() {
                let c = reg.resolve(enc).unwrap();
                let joined = format!("{a}{b}");
                prop_assert!(c.count(&joined) <= c.count(&a) + c.count(&b) + c.merge_slack(),
                    "{enc}: {:?} + {:?}", a, b);
            }
        }
    }
}
