//! MFrag definitions.
//!
//! ```text
//! mfrag Delivery
//! action merge
//! agent server
//! event delivered
//! instance merge server
//! edge merge server
//! edge server delivered
//! values merge T F
//! values server busy idle
//! values delivered T F
//! dist server given merge
//! row T : 0.9 0.1
//! row F : 0,2 0,8
//! ```
//!
//! Fields are whitespace separated. `row` lines belong to the most recent
//! `dist`; the words before `:` pick the parent states in `given` order.
//! Several `mfrag` blocks in one file form a theory.

use super::{code_lines, IoError, ParseError};
use crate::mfrag::{LocalDistribution, MFrag, MTheory};

/// Whitespace-separated words with their 1-based columns.
fn words(code: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in code.char_indices().chain(std::iter::once((code.len(), ' '))) {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s + 1, &code[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    out
}

fn parse_error(line: usize, column: usize, expected: &str, found: &str) -> IoError {
    ParseError {
        line,
        column,
        expected: vec![expected.into()],
        found: found.into(),
        opened_at: None,
    }
    .into()
}

fn probability(line: usize, column: usize, word: &str) -> Result<f64, IoError> {
    let value: f64 = word
        .replace(',', ".")
        .parse()
        .map_err(|_| parse_error(line, column, "probability", &format!("`{word}`")))?;
    Ok(value)
}

pub fn parse_fragments(text: &str) -> Result<MTheory, IoError> {
    let mut theory = MTheory::default();
    // Node whose distribution receives `row` lines.
    let mut open_dist: Option<String> = None;

    for (line_no, code) in code_lines(text) {
        let ws = words(code);
        let (kw_col, keyword) = ws[0];
        let args = &ws[1..];
        let end_col = code.trim_end().len() + 1;
        let need = |n: usize, what: &str| -> Result<(), IoError> {
            if args.len() < n {
                Err(parse_error(line_no, end_col, what, "end of line"))
            } else {
                Ok(())
            }
        };
        let exact = |n: usize| -> Result<(), IoError> {
            match args.get(n) {
                Some((col, w)) => Err(parse_error(line_no, *col, "end of line", &format!("`{w}`"))),
                None => Ok(()),
            }
        };

        if keyword == "mfrag" {
            need(1, "fragment name")?;
            exact(1)?;
            theory.fragments.push(MFrag::new(args[0].1));
            open_dist = None;
            continue;
        }
        let Some(frag) = theory.fragments.last_mut() else {
            return Err(parse_error(line_no, kw_col, "`mfrag`", &format!("`{keyword}`")));
        };
        match keyword {
            "event" | "action" | "agent" => {
                need(1, "node name")?;
                let set = match keyword {
                    "event" => &mut frag.events,
                    "action" => &mut frag.actions,
                    _ => &mut frag.agents,
                };
                set.extend(args.iter().map(|(_, w)| w.to_string()));
            }
            "instance" => {
                need(2, "agent node")?;
                exact(2)?;
                frag.action_instance_of
                    .insert(args[0].1.to_string(), args[1].1.to_string());
            }
            "edge" => {
                need(2, "child node")?;
                exact(2)?;
                frag.edges.insert((args[0].1.to_string(), args[1].1.to_string()));
            }
            "values" => {
                need(2, "possible value")?;
                frag.possible_values.insert(
                    args[0].1.to_string(),
                    args[1..].iter().map(|(_, w)| w.to_string()).collect(),
                );
            }
            "dist" => {
                need(1, "node name")?;
                let node = args[0].1.to_string();
                let parents = match args.get(1) {
                    None => Vec::new(),
                    Some((_, "given")) => args[2..].iter().map(|(_, w)| w.to_string()).collect(),
                    Some((col, w)) => {
                        return Err(parse_error(line_no, *col, "`given`", &format!("`{w}`")))
                    }
                };
                if frag.distributions.contains_key(&node) {
                    return Err(IoError::Invalid {
                        line: line_no,
                        message: format!("second distribution for `{node}` in `{}`", frag.name),
                    });
                }
                frag.distributions.insert(
                    node.clone(),
                    LocalDistribution {
                        agent_node: node.clone(),
                        parents,
                        rows: Default::default(),
                    },
                );
                open_dist = Some(node);
            }
            "row" => {
                let Some(node) = &open_dist else {
                    return Err(parse_error(line_no, kw_col, "`dist` before `row`", "`row`"));
                };
                let Some(split) = args.iter().position(|(_, w)| *w == ":") else {
                    return Err(parse_error(line_no, end_col, "`:`", "end of line"));
                };
                let key: Vec<String> = args[..split].iter().map(|(_, w)| w.to_string()).collect();
                let probs = args[split + 1..]
                    .iter()
                    .map(|(col, w)| probability(line_no, *col, w))
                    .collect::<Result<Vec<f64>, _>>()?;
                if probs.is_empty() {
                    return Err(parse_error(line_no, end_col, "probability", "end of line"));
                }
                let dist = frag.distributions.get_mut(node).expect("open distribution");
                if dist.rows.insert(key.clone(), probs).is_some() {
                    return Err(IoError::Invalid {
                        line: line_no,
                        message: format!("repeated row [{}] for `{node}`", key.join(" ")),
                    });
                }
            }
            other => {
                return Err(parse_error(
                    line_no,
                    kw_col,
                    "`mfrag`, `event`, `action`, `agent`, `instance`, `edge`, `values`, `dist` or `row`",
                    &format!("`{other}`"),
                ))
            }
        }
    }
    Ok(theory)
}
