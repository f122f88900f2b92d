//! Recovery of structured recommendations from stage-two markdown.
//!
//! The grammar is deliberately loose. A block starts at any line whose
//! leading text (after list markers, heading hashes, emphasis, and an optional
//! `Course:` label) is a course identifier. Within a block the parser looks
//! for a rationale (a `Rationale:`/`Reason:`/`Why:` field, or otherwise the
//! block's free text) and a confidence token (`high`, `medium`, or `low`, in
//! any case). Markdown tables with an identifier cell per row are read too.
//!
//! Identifiers not present in the context are dropped, duplicates keep their
//! first occurrence, order of appearance is preserved, and the result is
//! capped. Each adjustment leaves a warning.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::{Confidence, ContextBundle, Recommendation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseFailure {
    #[error("no recommendation blocks could be recovered")]
    NoBlocks,
    #[error("none of the {blocks} recommended course(s) appear in the context")]
    NoGroundedBlocks { blocks: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRecommendations {
    pub recommendations: Vec<Recommendation>,
    pub warnings: Vec<String>,
}

/// Parses `raw` against the course ids in `context`, keeping at most ten.
pub fn parse_recommendations(
    raw: &str,
    context: &ContextBundle,
) -> Result<ParsedRecommendations, ParseFailure> {
    let ids: Vec<&str> = context.courses.iter().map(|c| c.course_id.as_str()).collect();
    parse_with_ids(raw, &ids, super::MAX_RECOMMENDATIONS)
}

static LIST_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:(?:#{1,6}|[-*+•]|\d+[.)])\s*)*").unwrap());
static COURSE_LABEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:course(?:\s+(?:id|code|number))?|id)\s*[:\-–—]\s*").unwrap());
static GENERIC_ID: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([A-Z][A-Z&]{1,11})\s?(\d{3,4}[A-Z]?)\b").unwrap());
static FIELD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^(rationale|reasoning|reason|why|explanation|justification|confidence(?:\s+level)?|fit)\s*[:\-–—]\s*(.*)$",
    )
    .unwrap()
});
static TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(high|medium|low)\b").unwrap());
static NEAR_CONFIDENCE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)confidence\W{0,4}(high|medium|low)\b|\b(high|medium|low)\W{0,4}confidence").unwrap()
});
static PAREN_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)[(\[]\s*(high|medium|low)\s*[)\]]").unwrap());
static BARE_TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^\W*(high|medium|low)\W*$").unwrap());
static RULE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:-{3,}|\*{3,}|_{3,})\s*$").unwrap());

fn strip_emphasis(text: &str) -> String {
    text.replace(['*', '`'], "").replace("__", "")
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn confidence_of(token: &str) -> Confidence {
    match token.to_ascii_lowercase().as_str() {
        "high" => Confidence::High,
        "medium" => Confidence::Medium,
        _ => Confidence::Low,
    }
}

/// Matches known course ids at the start of a string, tolerant of case and
/// of whitespace differences inside the id.
struct IdMatcher {
    known: Vec<(String, Regex)>,
}

impl IdMatcher {
    fn new(ids: &[&str]) -> Self {
        let known = ids
            .iter()
            .map(|id| {
                let pattern = id
                    .split_whitespace()
                    .map(regex::escape)
                    .collect::<Vec<_>>()
                    .join(r"\s*");
                let re = Regex::new(&format!(r"(?i)^{pattern}(?:\b|$)")).unwrap();
                (id.to_string(), re)
            })
            .collect();
        Self { known }
    }

    /// Returns (canonical id, whether it is known, bytes consumed).
    fn match_start(&self, text: &str) -> Option<(String, bool, usize)> {
        let best_known = self
            .known
            .iter()
            .filter_map(|(id, re)| re.find(text).map(|m| (id, m.end())))
            .max_by_key(|(_, end)| *end);
        if let Some((id, end)) = best_known {
            return Some((id.clone(), true, end));
        }
        GENERIC_ID.captures(text).map(|c| {
            let id = format!("{} {}", &c[1], &c[2]);
            (id, false, c.get(0).unwrap().end())
        })
    }
}

struct Header {
    id: String,
    known: bool,
    rest: String,
}

fn header_of(line: &str, matcher: &IdMatcher) -> Option<Header> {
    let cleaned = strip_emphasis(line);
    let after_prefix = &cleaned[LIST_PREFIX.find(&cleaned).map_or(0, |m| m.end())..];
    let after_label = match COURSE_LABEL.find(after_prefix) {
        Some(m) => &after_prefix[m.end()..],
        None => after_prefix,
    };
    let text = after_label.trim_start();
    let (id, known, end) = matcher.match_start(text)?;
    let rest = text[end..]
        .trim_start_matches(|c: char| c.is_whitespace() || matches!(c, ':' | '-' | '–' | '—' | '|' | ')'))
        .trim_end()
        .to_string();
    Some(Header { id, known, rest })
}

#[derive(Default)]
struct Fields {
    rationale: Option<String>,
    free_text: Vec<String>,
    confidence: Option<Confidence>,
}

fn read_block(header: &Header, lines: &[&str]) -> (Option<String>, Option<Confidence>) {
    let mut fields = Fields::default();
    let mut in_rationale = false;
    let mut free_closed = false;

    for raw in lines {
        let cleaned = strip_emphasis(raw);
        let body = cleaned[LIST_PREFIX.find(&cleaned).map_or(0, |m| m.end())..].trim();
        let complete =
            fields.confidence.is_some() && (fields.rationale.is_some() || !fields.free_text.is_empty());
        if body.is_empty() {
            in_rationale = false;
            if !fields.free_text.is_empty() {
                free_closed = true;
            }
            if complete {
                break;
            }
            continue;
        }
        if complete && (RULE.is_match(raw) || raw.trim_start().starts_with('#')) {
            break;
        }
        if let Some(caps) = FIELD.captures(body) {
            let label = caps[1].to_ascii_lowercase();
            let value = caps[2].trim();
            if label.starts_with("confidence") || label == "fit" {
                in_rationale = false;
                if let Some(token) = TOKEN.captures(value) {
                    fields.confidence.get_or_insert(confidence_of(&token[1]));
                }
            } else if fields.rationale.is_none() {
                fields.rationale = Some(value.to_string());
                in_rationale = true;
            }
            continue;
        }
        if in_rationale {
            if let Some(r) = fields.rationale.as_mut() {
                r.push(' ');
                r.push_str(body);
            }
            continue;
        }
        if let Some(caps) = BARE_TOKEN.captures(body) {
            fields.confidence.get_or_insert(confidence_of(&caps[1]));
            continue;
        }
        if let Some(caps) = NEAR_CONFIDENCE.captures(body) {
            let token = caps.get(1).or_else(|| caps.get(2)).unwrap().as_str();
            fields.confidence.get_or_insert(confidence_of(token));
            let stripped = NEAR_CONFIDENCE.replace(body, "");
            let stripped = stripped.trim_matches(|c: char| c.is_whitespace() || ".,;:()[]-".contains(c));
            if !stripped.is_empty() && !free_closed {
                fields.free_text.push(stripped.to_string());
            }
            continue;
        }
        if !free_closed {
            fields.free_text.push(body.to_string());
        }
    }

    let mut header_rest = header.rest.clone();
    if fields.confidence.is_none() {
        let found = NEAR_CONFIDENCE
            .captures(&header_rest)
            .map(|c| c.get(1).or_else(|| c.get(2)).unwrap().as_str().to_string())
            .or_else(|| PAREN_TOKEN.captures(&header_rest).map(|c| c[1].to_string()));
        if let Some(token) = found {
            fields.confidence = Some(confidence_of(&token));
        }
    }
    header_rest = PAREN_TOKEN.replace_all(&header_rest, "").into_owned();
    header_rest = NEAR_CONFIDENCE.replace_all(&header_rest, "").into_owned();

    let rationale = fields
        .rationale
        .filter(|r| !r.trim().is_empty())
        .or_else(|| (!fields.free_text.is_empty()).then(|| fields.free_text.join(" ")))
        .or_else(|| {
            let rest = header_rest
                .trim_start_matches(|c: char| c.is_whitespace() || ".,;:()[]-–—".contains(c))
                .trim_end_matches(|c: char| c.is_whitespace() || ",;:([-–—".contains(c));
            (!rest.is_empty()).then(|| rest.to_string())
        })
        .map(|r| collapse_whitespace(&r))
        .filter(|r| !r.is_empty());

    (rationale, fields.confidence)
}

struct RawBlock {
    id: String,
    known: bool,
    rationale: Option<String>,
    confidence: Option<Confidence>,
}

fn table_cells(line: &str) -> Option<Vec<String>> {
    let trimmed = line.trim();
    if !trimmed.starts_with('|') {
        return None;
    }
    let inner = trimmed.trim_start_matches('|').trim_end_matches('|');
    Some(
        inner
            .split('|')
            .map(|c| collapse_whitespace(&strip_emphasis(c)))
            .collect(),
    )
}

fn is_separator_row(cells: &[String]) -> bool {
    cells
        .iter()
        .all(|c| !c.is_empty() && c.chars().all(|ch| matches!(ch, '-' | ':' | ' ')))
}

#[derive(Default)]
struct TableColumns {
    title: Option<usize>,
    rationale: Option<usize>,
    confidence: Option<usize>,
}

fn table_header(cells: &[String]) -> Option<TableColumns> {
    let mut cols = TableColumns::default();
    let mut any = false;
    for (i, cell) in cells.iter().enumerate() {
        let lower = cell.to_ascii_lowercase();
        if lower.contains("rationale") || lower.contains("reason") || lower == "why" {
            cols.rationale = Some(i);
            any = true;
        } else if lower.contains("confidence") {
            cols.confidence = Some(i);
            any = true;
        } else if lower.contains("title") || lower == "name" {
            cols.title = Some(i);
            any = true;
        }
    }
    any.then_some(cols)
}

fn table_block(cells: &[String], columns: Option<&TableColumns>, matcher: &IdMatcher) -> Option<RawBlock> {
    let (id_col, (id, known, _)) = cells.iter().enumerate().find_map(|(i, cell)| {
        matcher
            .match_start(cell)
            .filter(|(_, _, end)| *end == cell.len() || cell[*end..].trim_start().starts_with(':'))
            .map(|m| (i, m))
    })?;
    let confidence_col = columns
        .and_then(|c| c.confidence)
        .or_else(|| cells.iter().position(|c| BARE_TOKEN.is_match(c)));
    let confidence = confidence_col
        .and_then(|i| cells.get(i))
        .and_then(|c| TOKEN.captures(c))
        .map(|c| confidence_of(&c[1]));
    let title_col = columns.and_then(|c| c.title);
    let rationale = columns
        .and_then(|c| c.rationale)
        .and_then(|i| cells.get(i).cloned())
        .or_else(|| {
            cells
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != id_col && Some(*i) != confidence_col && Some(*i) != title_col)
                .map(|(_, c)| c)
                .max_by_key(|c| c.len())
                .cloned()
        })
        .filter(|r| !r.is_empty());
    Some(RawBlock {
        id,
        known,
        rationale,
        confidence,
    })
}

pub(crate) fn parse_with_ids(
    raw: &str,
    ids: &[&str],
    limit: usize,
) -> Result<ParsedRecommendations, ParseFailure> {
    let matcher = IdMatcher::new(ids);
    let lines: Vec<&str> = raw.lines().collect();
    let mut blocks = Vec::new();
    let mut warnings = Vec::new();

    let mut columns: Option<TableColumns> = None;
    let mut headers = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if let Some(cells) = table_cells(line) {
            if is_separator_row(&cells) {
                continue;
            }
            if let Some(block) = table_block(&cells, columns.as_ref(), &matcher) {
                blocks.push((i, block));
            } else if let Some(cols) = table_header(&cells) {
                columns = Some(cols);
            }
            continue;
        }
        if let Some(header) = header_of(line, &matcher) {
            headers.push((i, header));
        }
    }

    for (n, (start, header)) in headers.iter().enumerate() {
        let end = headers.get(n + 1).map_or(lines.len(), |(next, _)| *next);
        let body: Vec<&str> = lines[start + 1..end]
            .iter()
            .copied()
            .take_while(|l| table_cells(l).is_none())
            .collect();
        let (rationale, confidence) = read_block(header, &body);
        blocks.push((
            *start,
            RawBlock {
                id: header.id.clone(),
                known: header.known,
                rationale,
                confidence,
            },
        ));
    }
    blocks.sort_by_key(|(line, _)| *line);

    let mut recovered = 0;
    let mut seen = HashSet::new();
    let mut recommendations = Vec::new();
    for (line, block) in blocks {
        let (Some(rationale), Some(confidence)) = (block.rationale, block.confidence) else {
            warnings.push(format!(
                "line {}: skipped {}: missing rationale or confidence",
                line + 1,
                block.id
            ));
            continue;
        };
        recovered += 1;
        if !block.known {
            warnings.push(format!("dropped {}: not in the provided context", block.id));
            continue;
        }
        if !seen.insert(block.id.clone()) {
            warnings.push(format!("dropped duplicate recommendation of {}", block.id));
            continue;
        }
        if recommendations.len() == limit {
            warnings.push(format!("dropped {}: more than {limit} recommendations", block.id));
            continue;
        }
        recommendations.push(Recommendation {
            course_id: block.id,
            rationale,
            confidence,
        });
    }

    if recovered == 0 {
        return Err(ParseFailure::NoBlocks);
    }
    if recommendations.is_empty() {
        return Err(ParseFailure::NoGroundedBlocks { blocks: recovered });
    }
    Ok(ParsedRecommendations {
        recommendations,
        warnings,
    })
}
