//! Extraction of (c1, c2) from free-text agent responses.
//!
//! The contract: locate the last "Final Answer" marker (models sometimes
//! restate it), then take the first two numeric literals after it as the
//! working- and retirement-period consumptions. Comma thousands separators
//! and decimals are accepted; percent-suffixed numbers and digits glued to
//! identifiers ("c1") are not consumption values and are skipped. Ranges
//! ("between X and Y", "X - Y") are refused rather than midpointed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseFailure {
    #[error("response contains no \"Final Answer\" marker")]
    NoFinalAnswer,
    #[error("could not extract two unambiguous consumption numbers")]
    MalformedNumbers,
}

const MARKER: &str = "final answer";

#[derive(Debug, Clone, Copy)]
struct Numeral {
    value: f64,
    start: usize,
    end: usize,
    negative: bool,
}

/// Parse the final answer into (working, retirement) consumption.
pub fn parse_final_answer(raw_response: &str) -> Result<(f64, f64), ParseFailure> {
    let lowered = raw_response.to_lowercase();
    let marker_at = lowered.rfind(MARKER).ok_or(ParseFailure::NoFinalAnswer)?;
    let tail = &lowered[marker_at + MARKER.len()..];

    let numerals = extract_numerals(tail);
    if numerals.len() < 2 {
        return Err(ParseFailure::MalformedNumbers);
    }
    let first = numerals[0];
    let second = numerals[1];

    // Range guards: "between X and Y" or "X - Y" describe one quantity.
    if tail[..first.start].contains("between") {
        return Err(ParseFailure::MalformedNumbers);
    }
    let separator = tail[first.end..second.start].trim();
    if matches!(separator, "-" | "--" | "\u{2013}" | "\u{2014}" | "to" | "~") {
        return Err(ParseFailure::MalformedNumbers);
    }

    if first.negative || second.negative {
        return Err(ParseFailure::MalformedNumbers);
    }
    Ok((first.value, second.value))
}

fn extract_numerals(text: &str) -> Vec<Numeral> {
    let bytes = text.as_bytes();
    let mut numerals = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        // Digits glued to a letter ("c1", "step3") are identifiers.
        if i > 0 && (bytes[i - 1].is_ascii_alphabetic() || bytes[i - 1] == b'_') {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            continue;
        }
        let start = i;
        let mut literal = String::new();
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            literal.push(bytes[i] as char);
            i += 1;
        }
        // Strict comma grouping: take ",ddd" only when the group is exactly
        // three digits long.
        while i + 3 < bytes.len()
            && bytes[i] == b','
            && bytes[i + 1].is_ascii_digit()
            && bytes[i + 2].is_ascii_digit()
            && bytes[i + 3].is_ascii_digit()
            && (i + 4 >= bytes.len() || !bytes[i + 4].is_ascii_digit())
        {
            literal.push(bytes[i + 1] as char);
            literal.push(bytes[i + 2] as char);
            literal.push(bytes[i + 3] as char);
            i += 4;
        }
        if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
            literal.push('.');
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                literal.push(bytes[i] as char);
                i += 1;
            }
        }
        // A percent suffix marks a rate, not a consumption amount.
        if i < bytes.len() && bytes[i] == b'%' {
            i += 1;
            continue;
        }
        let negative = start > 0
            && bytes[start - 1] == b'-'
            && (start < 2 || !bytes[start - 2].is_ascii_digit());
        if let Ok(value) = literal.parse::<f64>() {
            numerals.push(Numeral {
                value,
                start,
                end: i,
                negative,
            });
        }
    }
    numerals
}
