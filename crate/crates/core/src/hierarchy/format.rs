//! Line-oriented text format for hierarchies.
//!
//! ```text
//! # two-way interactions of three predictors
//! p 6
//! node 1 1
//! node 2 2
//! node 3 3
//! node 12 4
//! edge 1 12
//! edge 2 12
//! ```
//!
//! Node ids are arbitrary tokens; coordinate indices are 1-based.

use std::collections::HashMap;

use super::{Hierarchy, Violation};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `p` line")]
    MissingP,
    #[error(transparent)]
    Invalid(#[from] Violation),
}

fn syntax(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax { line, message: message.into() }
}

pub fn parse_hierarchy(text: &str) -> Result<Hierarchy, FormatError> {
    let mut p = None;
    let mut labels: Vec<String> = Vec::new();
    let mut nodes: Vec<Vec<usize>> = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("p") => {
                if p.is_some() {
                    return Err(syntax(line, "duplicate `p` line"));
                }
                let value = tokens.next().ok_or_else(|| syntax(line, "`p` needs a value"))?;
                let value: usize = value.parse().map_err(|_| syntax(line, format!("bad p `{value}`")))?;
                if value == 0 {
                    return Err(syntax(line, "p must be positive"));
                }
                if tokens.next().is_some() {
                    return Err(syntax(line, "trailing tokens after p"));
                }
                p = Some(value);
            }
            Some("node") => {
                let id = tokens.next().ok_or_else(|| syntax(line, "`node` needs an id"))?;
                if ids.contains_key(id) {
                    return Err(syntax(line, format!("duplicate node id `{id}`")));
                }
                let mut indices = Vec::new();
                for t in tokens {
                    let i: usize = t.parse().map_err(|_| syntax(line, format!("bad index `{t}`")))?;
                    if i == 0 {
                        return Err(syntax(line, "indices are 1-based"));
                    }
                    indices.push(i - 1);
                }
                ids.insert(id.to_string(), nodes.len());
                labels.push(id.to_string());
                nodes.push(indices);
            }
            Some("edge") => {
                let (a, b) = match (tokens.next(), tokens.next(), tokens.next()) {
                    (Some(a), Some(b), None) => (a, b),
                    _ => return Err(syntax(line, "`edge` needs exactly two node ids")),
                };
                edges.push((line, a.to_string(), b.to_string()));
            }
            Some(other) => return Err(syntax(line, format!("unknown directive `{other}`"))),
            None => unreachable!(),
        }
    }

    let p = p.ok_or(FormatError::MissingP)?;
    let mut resolved = Vec::with_capacity(edges.len());
    for (line, a, b) in edges {
        let lookup = |id: &str| ids.get(id).copied().ok_or_else(|| syntax(line, format!("unknown node id `{id}`")));
        resolved.push((lookup(&a)?, lookup(&b)?));
    }
    Ok(Hierarchy::with_labels(p, nodes, labels, &resolved)?)
}

pub fn write_hierarchy(h: &Hierarchy) -> String {
    let mut out = format!("p {}\n", h.p());
    for i in 0..h.num_nodes() {
        out.push_str("node ");
        out.push_str(h.label(i));
        for &idx in h.node(i) {
            out.push_str(&format!(" {}", idx + 1));
        }
        out.push('\n');
    }
    for (a, b) in h.edges() {
        out.push_str(&format!("edge {} {}\n", h.label(a), h.label(b)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "# comment\np 4\n\nnode a 1 2\nnode b 3 # trailing\nnode c 4\nedge a b\nedge b c\n";
        let h = parse_hierarchy(text).unwrap();
        assert_eq!(h.num_nodes(), 3);
        assert_eq!(h.node(0), &[0, 1]);
        assert_eq!(h.as_path(), Some(vec![0, 1, 2]));
        assert_eq!(parse_hierarchy(&write_hierarchy(&h)).unwrap(), h);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_hierarchy("node 1 1"), Err(FormatError::MissingP)));
        assert!(matches!(parse_hierarchy("p 2\nnode 1 0"), Err(FormatError::Syntax { line: 2, .. })));
        assert!(matches!(parse_hierarchy("p 2\nnode 1 1\nedge 1 9"), Err(FormatError::Syntax { line: 3, .. })));
        assert!(matches!(parse_hierarchy("p 2\nnode 1 1\nnode 2 1"), Err(FormatError::Invalid(Violation::Overlap { .. }))));
        assert!(matches!(parse_hierarchy("p 2\nvertex 1 1"), Err(FormatError::Syntax { .. })));
        assert!(matches!(
            parse_hierarchy("p 2\nnode a 1\nnode b 2\nedge a b\nedge b a"),
            Err(FormatError::Invalid(Violation::Cycle { .. }))
        ));
    }
}
