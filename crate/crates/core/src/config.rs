//! Mapping of TOML parse errors to dotted key paths and line numbers.

use crate::error::Error;

pub(crate) fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Dotted path of the table enclosing `offset`, with array-of-tables
/// entries indexed, e.g. `population[1]`.
fn table_at(text: &str, offset: usize) -> Option<String> {
    let head = &text[..offset.min(text.len())];
    let mut current = None;
    let mut seen: Vec<(String, usize)> = Vec::new();
    // the line holding `offset` counts when it is itself a header
    let end = text[head.len()..]
        .find('\n')
        .map_or(text.len(), |i| head.len() + i);
    for raw in text[..end].lines() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix("[[").and_then(|l| l.split("]]").next()) {
            let name = name.trim().to_string();
            let idx = match seen.iter_mut().find(|(n, _)| *n == name) {
                Some((_, c)) => {
                    *c += 1;
                    *c
                }
                None => {
                    seen.push((name.clone(), 0));
                    0
                }
            };
            current = Some(format!("{name}[{idx}]"));
        } else if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = Some(name.trim().to_string());
        }
    }
    current
}

/// Key named on the line holding `offset`, if the line is `key = value`.
fn key_on_line(text: &str, offset: usize) -> Option<String> {
    let start = text[..offset.min(text.len())]
        .rfind('\n')
        .map_or(0, |i| i + 1);
    let line = text[start..].lines().next()?;
    let (key, _) = line.split_once('=')?;
    let key = key.trim();
    (!key.starts_with('[') && !key.is_empty()).then(|| key.to_string())
}

/// Field quoted in a serde message such as "missing field `size`".
fn quoted_field(message: &str) -> Option<String> {
    for marker in ["missing field `", "unknown field `", "duplicate field `"] {
        if let Some(rest) = message.split(marker).nth(1) {
            return rest.split('`').next().map(str::to_string);
        }
    }
    None
}

fn join(table: Option<String>, key: Option<String>) -> Option<String> {
    match (table, key) {
        (Some(t), Some(k)) => Some(format!("{t}.{k}")),
        (t, k) => k.or(t),
    }
}

/// Config error for a failed parse of `text`, naming the offending key.
pub(crate) fn toml_error(text: &str, e: &toml::de::Error, fallback: &str) -> Error {
    let offset = e.span().map(|s| s.start);
    let message = e.message().trim().to_string();
    let key = offset.and_then(|o| {
        let table = table_at(text, o);
        let key = quoted_field(&message).or_else(|| key_on_line(text, o));
        join(table, key)
    });
    Error::Config {
        key: key
            .or_else(|| quoted_field(&message))
            .unwrap_or_else(|| fallback.to_string()),
        line: offset.map(|o| line_of(text, o)),
        message,
    }
}
