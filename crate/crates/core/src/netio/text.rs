//! Line-oriented evidence and deletion-plan files. Blank lines and text
//! after `#` are ignored.
//!
//! Evidence: `variable = state`.
//! Plan: `parent -> child`, optionally followed by `| pm p1 p2 ... | se s1 s2 ...`.

use super::ParseError;
use crate::deletion::EdgeParams;
use crate::model::{Evidence, Network, VarId};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn column_of(text: &str, line: usize, needle: &str) -> usize {
    text.lines()
        .nth(line - 1)
        .and_then(|l| l.find(needle))
        .map_or(1, |c| c + 1)
}

pub fn parse_evidence(text: &str, net: &Network) -> Result<Evidence, ParseError> {
    let mut ev = Evidence::new();
    for (line, l) in content_lines(text) {
        let Some((var, state)) = l.split_once('=') else {
            return Err(ParseError::syntax(line, 1, "expected `variable = state`"));
        };
        let (var, state) = (var.trim(), state.trim());
        let v = net
            .find(var)
            .ok_or_else(|| ParseError::syntax(line, column_of(text, line, var), format!("unknown variable `{var}`")))?;
        let s = net.variable(v).state_index(state).ok_or_else(|| {
            ParseError::syntax(
                line,
                column_of(text, line, state),
                format!("variable `{var}` has no state `{state}`"),
            )
        })?;
        if ev.get(v).is_some_and(|old| old != s) {
            return Err(ParseError::syntax(line, 1, format!("conflicting observations of `{var}`")));
        }
        ev.set(v, s);
    }
    Ok(ev)
}

pub fn serialize_evidence(ev: &Evidence, net: &Network) -> String {
    ev.iter()
        .map(|(v, s)| format!("{} = {}\n", net.name(v), net.variable(v).states[s]))
        .collect()
}

/// One line of a plan file, resolved against the original network.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanLine {
    pub edge: (VarId, VarId),
    pub params: Option<EdgeParams>,
}

fn parse_vector(line: usize, field: &str, tag: &str) -> Result<Vec<f64>, ParseError> {
    let mut words = field.split_whitespace();
    if words.next() != Some(tag) {
        return Err(ParseError::syntax(line, 1, format!("expected `{tag}` vector")));
    }
    words
        .map(|w| {
            w.parse::<f64>()
                .map_err(|_| ParseError::syntax(line, 1, format!("bad number `{w}` in {tag}")))
        })
        .collect()
}

pub fn parse_plan(text: &str, net: &Network) -> Result<Vec<PlanLine>, ParseError> {
    let mut out: Vec<PlanLine> = Vec::new();
    for (line, l) in content_lines(text) {
        let mut fields = l.split('|');
        let edge = fields.next().unwrap_or("");
        let Some((parent, child)) = edge.split_once("->") else {
            return Err(ParseError::syntax(line, 1, "expected `parent -> child`"));
        };
        let lookup = |name: &str| {
            let name = name.trim();
            net.find(name)
                .ok_or_else(|| ParseError::syntax(line, column_of(text, line, name), format!("unknown variable `{name}`")))
        };
        let (u, x) = (lookup(parent)?, lookup(child)?);
        let context = || format!("edge {} -> {}", net.name(u), net.name(x));
        if !net.parents(x).contains(&u) {
            return Err(ParseError::semantic(context(), "not an edge of the network"));
        }
        if out.iter().any(|p| p.edge == (u, x)) {
            return Err(ParseError::semantic(context(), "listed twice"));
        }
        let rest: Vec<&str> = fields.collect();
        let params = match rest.as_slice() {
            [] => None,
            [pm, se] => {
                let pm = parse_vector(line, pm, "pm")?;
                let se = parse_vector(line, se, "se")?;
                if pm.len() != net.card(u) {
                    return Err(ParseError::semantic(context(), format!("expected {} entries", net.card(u))));
                }
                Some(EdgeParams::new(pm, se).map_err(|e| ParseError::semantic(context(), e.to_string()))?)
            }
            _ => return Err(ParseError::syntax(line, 1, "expected `| pm ... | se ...`")),
        };
        out.push(PlanLine { edge: (u, x), params });
    }
    Ok(out)
}

pub fn serialize_plan(lines: &[PlanLine], net: &Network) -> String {
    let vec = |xs: &[f64]| xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
    lines
        .iter()
        .map(|p| {
            let head = format!("{} -> {}", net.name(p.edge.0), net.name(p.edge.1));
            match &p.params {
                None => head + "\n",
                Some(e) => format!("{head} | pm {} | se {}\n", vec(&e.pm), vec(&e.se)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn evidence_round_trip_with_comments() {
        let (net, ev) = fixtures::equivalence_loop();
        let text = "# observed\nX1 = x\n\nX2 = x   # both agree\n";
        assert_eq!(parse_evidence(text, &net).unwrap(), ev);
        assert_eq!(parse_evidence(&serialize_evidence(&ev, &net), &net).unwrap(), ev);
    }

    #[test]
    fn evidence_errors_are_positioned() {
        let (net, _) = fixtures::equivalence_loop();
        let err = parse_evidence("X1 = x\nX2 = maybe\n", &net).unwrap_err();
        assert_eq!(err, ParseError::syntax(2, 6, "variable `X2` has no state `maybe`"));
        assert!(matches!(parse_evidence("X1 x\n", &net), Err(ParseError::Syntax { line: 1, .. })));
        assert!(parse_evidence("X1 = x\nX1 = not_x\n", &net).is_err());
    }

    #[test]
    fn plan_round_trip() {
        let (net, _) = fixtures::equivalence_loop();
        let lines = vec![
            PlanLine {
                edge: (VarId(0), VarId(2)),
                params: Some(EdgeParams::new(vec![0.7, 0.3], vec![0.25, 0.75]).unwrap()),
            },
            PlanLine {
                edge: (VarId(1), VarId(3)),
                params: None,
            },
        ];
        let text = serialize_plan(&lines, &net);
        assert_eq!(text, "U1 -> X1 | pm 0.7 0.3 | se 0.25 0.75\nU2 -> X2\n");
        assert_eq!(parse_plan(&text, &net).unwrap(), lines);
    }

    #[test]
    fn plan_rejects_non_edges_and_duplicates() {
        let (net, _) = fixtures::equivalence_loop();
        assert!(matches!(parse_plan("X1 -> U1\n", &net), Err(ParseError::Semantic { .. })));
        assert!(parse_plan("U1 -> X1\nU1 -> X1\n", &net).is_err());
        assert!(parse_plan("U1 -> X1 | pm 0.5 0.5\n", &net).is_err());
    }
}
