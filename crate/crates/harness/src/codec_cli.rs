//! Text front end for encoding, classifying and decoding tone lists.

use std::collections::BTreeSet;

use tonedisc::codec::{classify, decode_resolved, encode_tdid, Classification, CodecParams, Codeword, ToneSets};

use crate::error::{HarnessError, Result};

/// Parses a comma or whitespace separated list of decimal integers.
pub fn parse_list(text: &str) -> Result<Vec<u32>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u32>()
                .map_err(|_| HarnessError::Usage(format!("'{s}' is not a non-negative integer")))
        })
        .collect()
}

fn check_tones(tones: &[u32], params: &CodecParams) -> Result<()> {
    if let Some(t) = tones.iter().find(|&&t| t >= params.p()) {
        return Err(HarnessError::Usage(format!("tone {t} is not below p = {}", params.p())));
    }
    Ok(())
}

/// Tone indices of a TDID, comma separated.
pub fn encode(tdid: u64, params: &CodecParams) -> Result<String> {
    if tdid >= params.tdid_count() {
        return Err(HarnessError::Usage(format!(
            "TDID {tdid} out of range 0..{}",
            params.tdid_count()
        )));
    }
    let word = encode_tdid(tdid, params)?;
    Ok(join(word.tones()))
}

pub fn classify_text(list: &str, params: &CodecParams) -> Result<String> {
    let tones = parse_list(list)?;
    if tones.len() != params.n() {
        return Err(HarnessError::Usage(format!(
            "expected {} tones, got {}",
            params.n(),
            tones.len()
        )));
    }
    check_tones(&tones, params)?;
    let word = Codeword::from_tones(tones, params)?;
    Ok(match classify(&word, params) {
        Classification::Valid(msg) => format!("Valid tdid={}", msg.tdid),
        Classification::Shifted { msg, delta } => format!("Shifted tdid={} delta={delta}", msg.tdid),
        Classification::Invalid => "Invalid".into(),
    })
}

/// Decodes per-symbol tone sets written as `a,b;c;;d,e,f` (one `;`-separated
/// group per symbol, possibly empty). Prints one line per decoded TDID.
pub fn decode_text(text: &str, params: &CodecParams) -> Result<String> {
    let groups: Vec<&str> = text.split(';').collect();
    if groups.len() != params.n() {
        return Err(HarnessError::Usage(format!(
            "expected {} ';'-separated symbols, got {}",
            params.n(),
            groups.len()
        )));
    }
    let mut sets = Vec::with_capacity(groups.len());
    for g in groups {
        let tones = parse_list(g)?;
        check_tones(&tones, params)?;
        sets.push(tones.into_iter().collect::<BTreeSet<u32>>());
    }
    let decoded = decode_resolved(&ToneSets::from_sets(&sets, params.p())?, params)?;
    if decoded.is_empty() {
        return Ok("Decoded none".into());
    }
    let lines: Vec<String> = decoded
        .entries
        .iter()
        .map(|e| format!("Decoded tdid={} delta={} matches={}", e.tdid, e.delta, e.match_count))
        .collect();
    Ok(lines.join("\n"))
}

fn join(tones: &[u32]) -> String {
    tones.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}
