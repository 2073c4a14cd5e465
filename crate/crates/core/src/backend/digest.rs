use serde_json::json;
use sha2::{Digest, Sha256};

use super::ChatRequest;

/// Hex SHA-256 over a canonical JSON serialization of the request's model,
/// messages, temperature and token limit.
///
/// The tag is excluded, and object keys are emitted in sorted order, so the
/// digest is stable across runs and platforms.
pub fn canonical_digest(request: &ChatRequest) -> String {
    // -0.0 and 0.0 must hash alike.
    let temperature = if request.temperature == 0.0 { 0.0 } else { request.temperature };
    let messages: Vec<_> = request
        .messages
        .iter()
        .map(|m| json!({ "content": m.content, "role": m.role }))
        .collect();
    // Keys are written in sorted order so the output is the same whether or
    // not serde_json preserves insertion order.
    let canonical = json!({
        "max_tokens": request.max_tokens,
        "messages": messages,
        "model_id": request.model_id,
        "temperature": temperature,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::Message;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn req(content: &str, temperature: f64, tag: &str) -> ChatRequest {
        ChatRequest {
            model_id: "m".into(),
            messages: vec![Message::system("sys"), Message::user(content)],
            temperature,
            max_tokens: 256,
            tag: tag.into(),
        }
    }

    #[test]
    fn identical_requests_share_a_digest() {
        assert_eq!(canonical_digest(&req("hi", 0.0, "a")), canonical_digest(&req("hi", 0.0, "a")));
        assert_eq!(canonical_digest(&req("hi", 0.0, "a")).len(), 64);
    }

    #[test]
    fn temperature_changes_the_digest() {
        assert_ne!(canonical_digest(&req("hi", 0.0, "a")), canonical_digest(&req("hi", 0.2, "a")));
    }

    #[test]
    fn tag_is_excluded() {
        assert_eq!(canonical_digest(&req("hi", 0.0, "planner")), canonical_digest(&req("hi", 0.0, "coder")));
    }

    #[test]
    fn negative_zero_temperature_hashes_like_zero() {
        assert_eq!(canonical_digest(&req("hi", -0.0, "a")), canonical_digest(&req("hi", 0.0, "a")));
    }

    #[test]
    fn role_changes_the_digest() {
        let mut r = req("hi", 0.0, "a");
        let before = canonical_digest(&r);
        r.messages[1] = Message::assistant("hi");
        assert_ne!(before, canonical_digest(&r));
    }

    #[test]
    fn ten_thousand_distinct_requests_never_collide() {
        let mut seen = HashSet::new();
        for i in 0..10_000u32 {
            let mut r = req(&format!("prompt {i}"), 0.0, "t");
            if i % 3 == 0 {
                r.temperature = 0.1 * (i % 7) as f64 + 0.05;
            }
            if i % 5 == 0 {
                r.max_tokens = 100 + i;
            }
            assert!(seen.insert(canonical_digest(&r)), "collision at {i}");
        }
    }

    proptest! {
        #[test]
        fn single_character_edits_change_the_digest(s in "[a-z ]{1,40}", pos in 0usize..40, c in "[A-Z]") {
            let pos = pos % s.len();
            let mut edited: Vec<char> = s.chars().collect();
            edited[pos] = c.chars().next().unwrap();
            let edited: String = edited.into_iter().collect();
            prop_assert_ne!(canonical_digest(&req(&s, 0.0, "t")), canonical_digest(&req(&edited, 0.0, "t")));
        }
    }
}
