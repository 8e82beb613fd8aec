//! RMF text format for instances and `pick` selections.
//!
//! ```text
//! rmf 1
//! k 2
//! vertices 4
//! m 2
//! # optional, only for families whose classes are not matchings
//! colouring improper
//! e 0 0 1
//! e 0 2 3
//! e 1 0 2
//! ```
//!
//! Selections are one `pick <matching_index> <v1> ... <vk>` line per chosen
//! edge. Blank lines and `#` comments are ignored in both.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Colouring, MatchingFamily, RainbowMatching, Vertex};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Non-empty, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn header_value(line: Option<(usize, &str)>, key: &str) -> Result<(usize, usize)> {
    let (no, text) = line.ok_or_else(|| parse_err(0, format!("missing `{key}` header")))?;
    let mut parts = text.split_whitespace();
    if parts.next() != Some(key) {
        return Err(parse_err(no, format!("expected `{key} <value>`")));
    }
    let value = parts
        .next()
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(|| parse_err(no, format!("`{key}` needs a non-negative integer")))?;
    if parts.next().is_some() {
        return Err(parse_err(no, "trailing tokens"));
    }
    Ok((no, value))
}

fn parse_vertices(
    no: usize,
    tokens: std::str::SplitWhitespace<'_>,
    k: usize,
    num_vertices: usize,
) -> Result<Vec<Vertex>> {
    let mut verts = Vec::with_capacity(k);
    for tok in tokens {
        let v: u64 = tok
            .parse()
            .map_err(|_| parse_err(no, format!("bad vertex id `{tok}`")))?;
        if v >= num_vertices as u64 {
            return Err(parse_err(no, format!("vertex {v} out of range 0..{num_vertices}")));
        }
        verts.push(v as Vertex);
    }
    if verts.len() != k {
        return Err(parse_err(no, format!("expected {k} vertices, found {}", verts.len())));
    }
    if verts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(parse_err(no, "edge vertices must be strictly increasing"));
    }
    Ok(verts)
}

pub fn parse_family(text: &str) -> Result<MatchingFamily> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, "rmf 1")) => {}
        Some((no, other)) => return Err(parse_err(no, format!("expected `rmf 1`, found `{other}`"))),
        None => return Err(parse_err(0, "empty input")),
    }
    let (_, k) = header_value(lines.next(), "k")?;
    if k < 2 {
        return Err(parse_err(0, format!("edge arity {k} is below 2")));
    }
    let (_, num_vertices) = header_value(lines.next(), "vertices")?;
    if num_vertices > u32::MAX as usize {
        return Err(parse_err(0, "too many vertices"));
    }
    let (_, m) = header_value(lines.next(), "m")?;

    let mut colouring = Colouring::Proper;
    let mut classes: Vec<Vec<Vertex>> = vec![Vec::new(); m];
    let mut seen_edge = false;
    for (no, line) in lines {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("colouring") if !seen_edge => {
                colouring = match tokens.next() {
                    Some("proper") => Colouring::Proper,
                    Some("improper") => Colouring::Improper,
                    _ => return Err(parse_err(no, "expected `colouring proper|improper`")),
                };
            }
            Some("e") => {
                seen_edge = true;
                let class: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(no, "missing matching index"))?;
                if class >= m {
                    return Err(parse_err(no, format!("matching index {class} out of range 0..{m}")));
                }
                let verts = parse_vertices(no, tokens, k, num_vertices)?;
                classes[class].extend(verts);
            }
            Some(other) => return Err(parse_err(no, format!("unexpected record `{other}`"))),
            None => unreachable!(),
        }
    }
    Ok(MatchingFamily::from_flat(k, num_vertices, classes)?.with_colouring(colouring))
}

pub fn write_family(family: &MatchingFamily) -> String {
    let mut out = String::with_capacity(16 * family.total_edges() + 64);
    let _ = writeln!(out, "rmf 1");
    let _ = writeln!(out, "k {}", family.k());
    let _ = writeln!(out, "vertices {}", family.num_vertices());
    let _ = writeln!(out, "m {}", family.m());
    if family.colouring() == Colouring::Improper {
        let _ = writeln!(out, "colouring improper");
    }
    for (class, edge) in family.iter_edges() {
        let _ = write!(out, "e {class}");
        for v in edge {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

pub fn read_family(path: &Path) -> Result<MatchingFamily> {
    parse_family(&fs::read_to_string(path)?)
}

pub fn save_family(path: &Path, family: &MatchingFamily) -> Result<()> {
    fs::write(path, write_family(family))?;
    Ok(())
}

/// Parses `pick` lines; `k` fixes the expected arity.
pub fn parse_selection(text: &str, k: usize) -> Result<RainbowMatching> {
    let mut rm = RainbowMatching::new();
    for (no, line) in content_lines(text) {
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("pick") {
            return Err(parse_err(no, "expected `pick <matching_index> <v1> ... <vk>`"));
        }
        let class: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(no, "missing matching index"))?;
        let verts = parse_vertices(no, tokens, k, u32::MAX as usize)?;
        if rm.insert(class, &verts).is_some() {
            return Err(parse_err(no, format!("matching {class} picked twice")));
        }
    }
    Ok(rm)
}

pub fn write_selection(rm: &RainbowMatching) -> String {
    let mut out = String::new();
    for (class, edge) in rm.iter() {
        let _ = write!(out, "pick {class}");
        for v in edge {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str = "rmf 1\nk 2\nvertices 4\nm 2\n\n# two colours\ne 0 0 1\ne 0 2 3\ne 1 0 2 # trailing comment\n";

    #[test]
    fn parses_sample() {
        let f = parse_family(SAMPLE).unwrap();
        assert_eq!((f.k(), f.num_vertices(), f.m()), (2, 4, 2));
        assert_eq!(f.class_len(0), 2);
        assert_eq!(f.edge(1, 0), &[0, 2]);
        assert!(f.is_proper());
    }

    #[test]
    fn rejects_out_of_range_with_line_number() {
        let err = parse_family("rmf 1\nk 2\nvertices 3\nm 1\ne 0 1 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
    }

    #[test]
    fn rejects_arity_mismatch() {
        let err = parse_family("rmf 1\nk 3\nvertices 9\nm 1\n\ne 0 1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 6, .. }), "{err}");
    }

    #[test]
    fn rejects_bad_class_and_magic() {
        assert!(matches!(
            parse_family("rmf 1\nk 2\nvertices 3\nm 1\ne 1 0 1\n"),
            Err(Error::Parse { line: 5, .. })
        ));
        assert!(matches!(parse_family("rmf 2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_family("rmf 1\nk 2\nvertices 3\nm 1\ne 0 1 0\n"),
            Err(Error::Parse { line: 5, .. })
        ));
    }

    #[test]
    fn improper_directive() {
        let f = parse_family("rmf 1\nk 2\nvertices 3\nm 1\ncolouring improper\ne 0 0 1\ne 0 1 2\n").unwrap();
        assert_eq!(f.colouring(), Colouring::Improper);
        assert!(write_family(&f).contains("colouring improper\n"));
    }

    #[test]
    fn selection_format() {
        let rm = parse_selection("pick 1 2 3\npick 0 0 1\n", 2).unwrap();
        assert_eq!(write_selection(&rm), "pick 0 0 1\npick 1 2 3\n");
        assert!(parse_selection("pick 0 0 1\npick 0 2 3\n", 2).is_err());
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(
            k in 2usize..5,
            classes in prop::collection::vec(prop::collection::vec(0u32..40, 0..12), 0..6),
            improper in any::<bool>(),
        ) {
            // turn arbitrary ids into valid, strictly increasing edges
            let classes: Vec<Vec<Vertex>> = classes
                .into_iter()
                .map(|ids| ids.chunks_exact(1).flat_map(|c| (0..k as u32).map(move |j| c[0] * 8 + j)).collect())
                .collect();
            let colouring = if improper { Colouring::Improper } else { Colouring::Proper };
            let f = MatchingFamily::from_flat(k, 400, classes).unwrap().with_colouring(colouring);
            let text = write_family(&f);
            prop_assert_eq!(parse_family(&text).unwrap(), f);
        }
    }
}
