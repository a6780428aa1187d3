//! Extraction of Likert ratings from model replies.
//!
//! Stage one reads `item_id: rating` lines, inside the last
//! `BEGIN RATINGS`/`END RATINGS` block when one exists. Stage two scans the
//! whole reply for `item N <rating>` and `N. <rating>` patterns. Either stage
//! succeeds only with one in-range rating for every item id.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::prompt::format::{BLOCK_BEGIN, BLOCK_END};
use crate::survey::SurveyInstrument;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Unparseable,
    WrongCount,
    OutOfRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub failure_kind: FailureKind,
    pub excerpt: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParsedRatings {
    Ratings(Vec<i32>),
    Failure(ParseFailure),
}

impl ParsedRatings {
    pub fn ratings(&self) -> Option<&[i32]> {
        match self {
            ParsedRatings::Ratings(r) => Some(r),
            ParsedRatings::Failure(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&ParseFailure> {
        match self {
            ParsedRatings::Failure(f) => Some(f),
            ParsedRatings::Ratings(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    item_id: i64,
    rating: i64,
    excerpt: String,
}

fn strict_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?im)^[ \t]*(?:[-*][ \t]+)?(?:item[ \t]*)?#?(\d{1,9})[ \t]*[:=][ \t]*([+-]?\d{1,9})[ \t]*\.?[ \t]*$")
            .unwrap()
    })
}

fn block() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(&format!(r"(?is){}(.*?){}", regex::escape(BLOCK_BEGIN), regex::escape(BLOCK_END))).unwrap()
    })
}

fn item_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\bitem[ \t]*#?[ \t]*(\d{1,9})\b[ \t]*[:.)=\-\x{2013}\x{2014}]?[ \t]*(?:rating[ \t]*[:=]?[ \t]*)?([+-]?\d{1,9})\b").unwrap()
    })
}

fn numbered_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^[ \t]*(\d{1,9})[.)][ \t]+(?:rating[ \t]*[:=]?[ \t]*)?([+-]?\d{1,9})\b").unwrap())
}

fn capture(re: &Regex, text: &str) -> Vec<(usize, Candidate)> {
    re.captures_iter(text)
        .filter_map(|c| {
            let whole = c.get(0)?;
            Some((
                whole.start(),
                Candidate {
                    item_id: c[1].parse().ok()?,
                    rating: c[2].parse().ok()?,
                    excerpt: whole.as_str().trim().to_string(),
                },
            ))
        })
        .collect()
}

fn strict_candidates(raw: &str) -> Vec<Candidate> {
    let region = block().captures_iter(raw).last().and_then(|c| c.get(1)).map_or(raw, |m| m.as_str());
    capture(strict_line(), region).into_iter().map(|(_, c)| c).collect()
}

fn fallback_candidates(raw: &str) -> Vec<Candidate> {
    let mut found = capture(item_pattern(), raw);
    found.extend(capture(numbered_pattern(), raw));
    found.sort_by_key(|(pos, _)| *pos);
    found.dedup_by_key(|(pos, _)| *pos);
    found.into_iter().map(|(_, c)| c).collect()
}

fn excerpt_of(text: &str) -> String {
    let t = text.trim();
    let mut out: String = t.chars().take(120).collect();
    if t.chars().count() > 120 {
        out.push('…');
    }
    out
}

fn evaluate(cands: &[Candidate], instrument: &SurveyInstrument, raw: &str) -> ParsedRatings {
    let n = instrument.item_count() as i64;
    let scale = &instrument.scale;
    if cands.is_empty() {
        return ParsedRatings::Failure(ParseFailure {
            failure_kind: FailureKind::Unparseable,
            excerpt: excerpt_of(raw),
            detail: "no ratings found".into(),
        });
    }
    if let Some(c) = cands
        .iter()
        .find(|c| (1..=n).contains(&c.item_id) && !(i64::from(scale.min_rating)..=i64::from(scale.max_rating)).contains(&c.rating))
    {
        return ParsedRatings::Failure(ParseFailure {
            failure_kind: FailureKind::OutOfRange,
            excerpt: c.excerpt.clone(),
            detail: format!(
                "item {}: rating {} outside [{}, {}]",
                c.item_id, c.rating, scale.min_rating, scale.max_rating
            ),
        });
    }
    let mut by_id: BTreeMap<i64, i32> = BTreeMap::new();
    let mut duplicates = Vec::new();
    let mut strays = Vec::new();
    for c in cands {
        if !(1..=n).contains(&c.item_id) {
            strays.push(c.item_id);
        } else if by_id.insert(c.item_id, c.rating as i32).is_some() {
            duplicates.push(c.item_id);
        }
    }
    if by_id.len() as i64 == n && duplicates.is_empty() && strays.is_empty() {
        return ParsedRatings::Ratings(by_id.into_values().collect());
    }
    let missing: Vec<i64> = (1..=n).filter(|i| !by_id.contains_key(i)).collect();
    let mut detail = format!("found {} ratings, expected {n}", cands.len());
    if !missing.is_empty() {
        detail.push_str(&format!("; missing items {missing:?}"));
    }
    if !duplicates.is_empty() {
        detail.push_str(&format!("; repeated items {duplicates:?}"));
    }
    if !strays.is_empty() {
        detail.push_str(&format!("; unknown items {strays:?}"));
    }
    ParsedRatings::Failure(ParseFailure {
        failure_kind: FailureKind::WrongCount,
        excerpt: excerpt_of(&cands.iter().map(|c| c.excerpt.as_str()).collect::<Vec<_>>().join(" | ")),
        detail,
    })
}

pub fn parse_ratings(raw_text: &str, instrument: &SurveyInstrument) -> ParsedRatings {
    let strict = strict_candidates(raw_text);
    let first = evaluate(&strict, instrument, raw_text);
    if first.ratings().is_some() {
        return first;
    }
    let fallback = fallback_candidates(raw_text);
    let second = evaluate(&fallback, instrument, raw_text);
    if second.ratings().is_some() || strict.is_empty() {
        second
    } else {
        first
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::format::render_ratings_block;

    fn breq() -> SurveyInstrument {
        SurveyInstrument::breq()
    }

    fn kind(p: &ParsedRatings) -> Option<FailureKind> {
        p.failure().map(|f| f.failure_kind)
    }

    const V: [i32; 15] = [2, 1, 1, 3, 4, 2, 2, 6, 5, 6, 3, 5, 5, 6, 4];

    #[test]
    fn clean_block() {
        let text: String = V.iter().enumerate().map(|(i, r)| format!("{}: {r}\n", i + 1)).collect();
        assert_eq!(parse_ratings(&text, &breq()), ParsedRatings::Ratings(V.to_vec()));
        assert_eq!(parse_ratings(&render_ratings_block(&V), &breq()), ParsedRatings::Ratings(V.to_vec()));
    }

    #[test]
    fn preamble_does_not_change_result() {
        let bare = parse_ratings(&render_ratings_block(&V), &breq());
        let chatty = format!(
            "Sure! As this 34-year-old coordinator, here is how I'd answer.\nItem 3 was tricky: 2 reasons.\n\n{}Hope that helps.",
            render_ratings_block(&V)
        );
        assert_eq!(parse_ratings(&chatty, &breq()), bare);
    }

    #[test]
    fn out_of_range_names_item_and_value() {
        let mut v = V;
        v[6] = 7;
        let p = parse_ratings(&render_ratings_block(&v), &breq());
        let f = p.failure().unwrap();
        assert_eq!(f.failure_kind, FailureKind::OutOfRange);
        assert!(f.detail.contains("item 7") && f.detail.contains("rating 7"), "{}", f.detail);
    }

    #[test]
    fn wrong_counts() {
        let short = render_ratings_block(&V[..14]);
        assert_eq!(kind(&parse_ratings(&short, &breq())), Some(FailureKind::WrongCount));
        let long = render_ratings_block(&[V.as_slice(), &[3]].concat());
        assert_eq!(kind(&parse_ratings(&long, &breq())), Some(FailureKind::WrongCount));
        let dup = render_ratings_block(&V).replace("2: 1\n", "1: 1\n");
        let p = parse_ratings(&dup, &breq());
        assert_eq!(kind(&p), Some(FailureKind::WrongCount));
        assert!(p.failure().unwrap().detail.contains("missing items [2]"));
    }

    #[test]
    fn garbage_is_unparseable() {
        for text in ["", "I'd rather not answer.", "BEGIN RATINGS\nnothing here\nEND RATINGS"] {
            assert_eq!(kind(&parse_ratings(text, &breq())), Some(FailureKind::Unparseable), "{text:?}");
        }
    }

    #[test]
    fn fallback_patterns() {
        let items: String = V.iter().enumerate().map(|(i, r)| format!("Item {} - {r}\n", i + 1)).collect();
        assert_eq!(parse_ratings(&items, &breq()), ParsedRatings::Ratings(V.to_vec()));
        let numbered: String = V.iter().enumerate().map(|(i, r)| format!("{}. {r} (agree-ish)\n", i + 1)).collect();
        assert_eq!(parse_ratings(&numbered, &breq()), ParsedRatings::Ratings(V.to_vec()));
        let labelled: String =
            V.iter().enumerate().map(|(i, r)| format!("**Item {}:** rating: {r}\n", i + 1)).collect();
        assert_eq!(parse_ratings(&labelled.replace("**", ""), &breq()), ParsedRatings::Ratings(V.to_vec()));
    }

    #[test]
    fn last_block_wins() {
        let mut other = V;
        other[0] = 6;
        let text = format!("{}\nCorrection:\n{}", render_ratings_block(&V), render_ratings_block(&other));
        assert_eq!(parse_ratings(&text, &breq()).ratings().unwrap()[0], 6);
    }

    #[test]
    fn failure_serializes_with_kind() {
        let p = parse_ratings("nope", &breq());
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"failure_kind\":\"unparseable\""), "{json}");
        let back: ParsedRatings = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    proptest::proptest! {
        #[test]
        fn rendered_blocks_round_trip(
            v in proptest::collection::vec(1i32..=6, 15),
            pre in "[A-Za-z ,.!]{0,60}",
            post in "[A-Za-z ,.!]{0,60}",
        ) {
            let text = format!("{pre}\n{}{post}", render_ratings_block(&v));
            proptest::prop_assert_eq!(parse_ratings(&text, &breq()), ParsedRatings::Ratings(v));
        }
    }
}
