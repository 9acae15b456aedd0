use std::collections::HashSet;

use super::{Element, ElementKind, Netlist, PwlWaveform, SourceValue, Tran};
use crate::error::{Error, Result};

/// Parses a numeric token with an optional engineering suffix. Trailing
/// alphabetic unit text after the suffix is ignored (`10pF`, `1kohm`).
pub fn parse_value(token: &str) -> Option<f64> {
    let bytes = token.as_bytes();
    let mut end = 0;
    // Longest prefix that parses as a float, allowing an exponent.
    for i in (1..=bytes.len()).rev() {
        if token.is_char_boundary(i) && token[..i].parse::<f64>().is_ok() {
            end = i;
            break;
        }
    }
    if end == 0 {
        return None;
    }
    // "1e" style prefixes parse only with digits after 'e', so a bare
    // trailing 'e' is left to the suffix check and rejected there.
    let mantissa: f64 = token[..end].parse().ok()?;
    let rest = token[end..].to_ascii_lowercase();
    let (scale, unit) = if let Some(u) = rest.strip_prefix("meg") {
        (1e6, u)
    } else {
        let mut chars = rest.chars();
        match chars.next() {
            None => (1.0, ""),
            Some(c) => {
                let s = match c {
                    'f' => 1e-15,
                    'p' => 1e-12,
                    'n' => 1e-9,
                    'u' => 1e-6,
                    'm' => 1e-3,
                    'k' => 1e3,
                    'g' => 1e9,
                    _ => return None,
                };
                (s, &rest[1..])
            }
        }
    };
    if !unit.chars().all(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    let v = mantissa * scale;
    v.is_finite().then_some(v)
}

fn syntax(line: usize, token: &str, reason: &str) -> Error {
    Error::Syntax {
        line,
        token: token.to_string(),
        reason: reason.to_string(),
    }
}

fn value_at(line: usize, token: &str) -> Result<f64> {
    parse_value(token).ok_or_else(|| syntax(line, token, "expected a number"))
}

fn parse_source(line: usize, spec: &str) -> Result<SourceValue> {
    let trimmed = spec.trim();
    let upper = trimmed.to_ascii_uppercase();
    if upper.starts_with("PWL") {
        let open = trimmed
            .find('(')
            .ok_or_else(|| syntax(line, trimmed, "expected `(` after PWL"))?;
        let close = trimmed
            .rfind(')')
            .ok_or_else(|| syntax(line, trimmed, "missing `)`"))?;
        if close < open || !trimmed[close + 1..].trim().is_empty() || !trimmed[3..open].trim().is_empty() {
            return Err(syntax(line, trimmed, "malformed PWL(...)"));
        }
        let toks: Vec<&str> = trimmed[open + 1..close]
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if toks.is_empty() || toks.len() % 2 != 0 {
            return Err(syntax(line, trimmed, "PWL needs time/value pairs"));
        }
        let mut pts = Vec::with_capacity(toks.len() / 2);
        for pair in toks.chunks(2) {
            pts.push((value_at(line, pair[0])?, value_at(line, pair[1])?));
        }
        let w = PwlWaveform::new(pts).map_err(|e| syntax(line, trimmed, &e.to_string()))?;
        return Ok(SourceValue::Pwl(w));
    }
    let toks: Vec<&str> = trimmed.split_whitespace().collect();
    match toks.as_slice() {
        [dc, v] if dc.eq_ignore_ascii_case("DC") => Ok(SourceValue::Dc(value_at(line, v)?)),
        [v] => Ok(SourceValue::Dc(value_at(line, v)?)),
        [] => Err(syntax(line, "", "missing source value")),
        [first, ..] => Err(syntax(line, first, "expected `DC <value>` or `PWL(...)`")),
    }
}

/// Parses the line-oriented netlist format. Line numbers in errors are
/// 1-based.
pub fn parse_netlist(text: &str) -> Result<Netlist> {
    let mut nl = Netlist::default();
    let mut names = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('*') {
            continue;
        }
        let mut toks = l.split_whitespace();
        let head = toks.next().unwrap_or_default();

        if let Some(directive) = head.strip_prefix('.') {
            match directive.to_ascii_lowercase().as_str() {
                "tran" => {
                    let args: Vec<&str> = toks.collect();
                    let (stop, step) = match args.as_slice() {
                        [stop] => (value_at(line, stop)?, None),
                        [stop, step] => (value_at(line, stop)?, Some(value_at(line, step)?)),
                        _ => return Err(syntax(line, l, "expected `.tran <tstop> [<tstep>]`")),
                    };
                    if stop <= 0.0 || step.is_some_and(|s| s <= 0.0) {
                        return Err(syntax(line, l, "times must be positive"));
                    }
                    nl.tran = Some(Tran { stop, step });
                }
                "probe" => {
                    let before = nl.probes.len();
                    nl.probes.extend(toks.map(str::to_string));
                    if nl.probes.len() == before {
                        return Err(syntax(line, l, "`.probe` needs at least one node"));
                    }
                }
                "end" => break,
                _ => {
                    return Err(Error::UnknownDirective {
                        line,
                        directive: head.to_string(),
                    })
                }
            }
            continue;
        }

        let kind = head
            .chars()
            .next()
            .and_then(ElementKind::from_prefix)
            .ok_or_else(|| syntax(line, head, "unknown element type"))?;
        let pos = toks.next().ok_or_else(|| syntax(line, head, "missing nodes"))?;
        let neg = toks.next().ok_or_else(|| syntax(line, head, "missing second node"))?;
        if !names.insert(head.to_ascii_uppercase()) {
            return Err(Error::DuplicateElement {
                line,
                name: head.to_string(),
            });
        }

        let element = if kind.is_source() {
            // Everything after the two node tokens.
            let after_head = &l[head.len()..];
            let after_pos = &after_head[after_head.find(pos).unwrap() + pos.len()..];
            let rest = &after_pos[after_pos.find(neg).unwrap() + neg.len()..];
            Element::source(kind, head, pos, neg, parse_source(line, rest)?)
        } else {
            let vtok = toks.next().ok_or_else(|| syntax(line, head, "missing value"))?;
            if let Some(extra) = toks.next() {
                return Err(syntax(line, extra, "unexpected token"));
            }
            let value = value_at(line, vtok)?;
            if value <= 0.0 {
                return Err(Error::NonPositiveValue {
                    line,
                    name: head.to_string(),
                    value,
                });
            }
            Element::passive(kind, head, pos, neg, value)
        };
        nl.elements.push(element);
    }
    Ok(nl)
}
