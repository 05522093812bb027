//! Splits a transaction's log messages into per-outer-instruction segments.

use std::sync::OnceLock;

use regex::Regex;

fn invoke_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^Program (\S+) invoke \[(\d+)\]$").expect("static regex"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogSegment<'a> {
    pub program_id: &'a str,
    pub lines: Vec<&'a str>,
}

/// One segment per top-level (`invoke [1]`) invocation, in order.
pub fn split_by_outer(logs: &[String]) -> Vec<LogSegment<'_>> {
    let mut segments: Vec<LogSegment<'_>> = Vec::new();
    for line in logs {
        if let Some(c) = invoke_re().captures(line) {
            if &c[2] == "1" {
                segments.push(LogSegment {
                    program_id: c.get(1).expect("group").as_str(),
                    lines: Vec::new(),
                });
                continue;
            }
        }
        if let Some(seg) = segments.last_mut() {
            seg.lines.push(line);
        }
    }
    segments
}

/// Picks the segment for outer instruction `outer` invoking `program_id`:
/// the same-numbered segment when its program matches, otherwise the
/// n-th segment of that program where n counts earlier outers of it.
pub fn segment_for<'s, 'a>(
    segments: &'s [LogSegment<'a>],
    outer: usize,
    program_id: &str,
    outer_programs: &[&str],
) -> Option<&'s LogSegment<'a>> {
    if let Some(seg) = segments.get(outer) {
        if seg.program_id == program_id {
            return Some(seg);
        }
    }
    let nth = outer_programs[..outer.min(outer_programs.len())]
        .iter()
        .filter(|p| **p == program_id)
        .count();
    segments.iter().filter(|s| s.program_id == program_id).nth(nth)
}
