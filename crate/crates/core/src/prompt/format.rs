//! The ratings block the model is asked to produce, and its canonical rendering.

use crate::survey::SurveyInstrument;

pub const BLOCK_BEGIN: &str = "BEGIN RATINGS";
pub const BLOCK_END: &str = "END RATINGS";

pub fn format_instruction(instrument: &SurveyInstrument) -> String {
    let n = instrument.item_count();
    let (lo, hi) = (instrument.scale.min_rating, instrument.scale.max_rating);
    format!(
        "Answer every item as the participant would. Reply with a block that starts with the line \
{BLOCK_BEGIN} and ends with the line {BLOCK_END}. Inside the block write exactly {n} lines, one per \
item in item order, each of the form `item_id: rating`, where item_id is the item number (1 to {n}) \
and rating is a single whole number from {lo} to {hi}. Do not write anything else inside the block."
    )
}

/// Appended to the original prompt when a reply could not be parsed.
pub fn corrective_instruction(instrument: &SurveyInstrument, problem: &str) -> String {
    format!(
        "\n\nYour previous reply could not be used ({problem}). Reply again with only the {BLOCK_BEGIN} / \
{BLOCK_END} block containing exactly {} lines of the form `item_id: rating`, each rating a whole number \
from {} to {}.",
        instrument.item_count(),
        instrument.scale.min_rating,
        instrument.scale.max_rating
    )
}

/// Canonical rendering of a rating vector (1-based item ids).
pub fn render_ratings_block(ratings: &[i32]) -> String {
    let mut out = String::with_capacity(32 + ratings.len() * 6);
    out.push_str(BLOCK_BEGIN);
    out.push('\n');
    for (i, r) in ratings.iter().enumerate() {
        out.push_str(&format!("{}: {r}\n", i + 1));
    }
    out.push_str(BLOCK_END);
    out.push('\n');
    out
}

pub fn render_survey_block(instrument: &SurveyInstrument) -> String {
    let scale = &instrument.scale;
    let anchors: Vec<String> = scale
        .labels
        .iter()
        .enumerate()
        .map(|(k, label)| format!("{} = {label}", scale.min_rating + k as i32))
        .collect();
    let mut out = format!(
        "{} ({} items). Rate each statement from {} to {}: {}.\n\n",
        instrument.name,
        instrument.item_count(),
        scale.min_rating,
        scale.max_rating,
        anchors.join(", ")
    );
    for item in &instrument.items {
        out.push_str(&format!("{}. {}\n", item.item_id, item.text));
    }
    out
}
