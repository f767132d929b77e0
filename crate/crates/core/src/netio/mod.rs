//! Text formats: networks (canonical TOML and a Hugin `.net` subset),
//! evidence files, deletion-plan files, and CSV reports.

mod canonical;
mod hugin;
mod report;
mod text;

pub use canonical::{parse_network, serialize_network};
pub use hugin::{parse_hugin_subset, serialize_hugin};
pub use report::{format_float, read_report, write_report, ReportRow, REPORT_HEADER};
pub use text::{parse_evidence, parse_plan, serialize_evidence, serialize_plan, PlanLine};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("{context}: {msg}")]
    Semantic { context: String, msg: String },

    #[error("unsupported feature: {0}")]
    Unsupported(String),
}

impl ParseError {
    pub(crate) fn syntax(line: usize, col: usize, msg: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    pub(crate) fn semantic(context: impl Into<String>, msg: impl Into<String>) -> Self {
        ParseError::Semantic {
            context: context.into(),
            msg: msg.into(),
        }
    }
}

/// 1-based line and column of a byte offset.
pub(crate) fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, col)
}

/// Checks family shapes and the [`crate::validate_network`] rules before a
/// parsed network is handed out.
pub(crate) fn build_network(
    variables: Vec<crate::Variable>,
    families: Vec<(String, Vec<String>, Vec<f64>)>,
) -> Result<crate::Network, ParseError> {
    use crate::{Cpt, VarId};
    use std::collections::HashMap;

    let mut index = HashMap::new();
    for (i, v) in variables.iter().enumerate() {
        if index.insert(v.name.clone(), i).is_some() {
            return Err(ParseError::semantic(format!("variable `{}`", v.name), "declared twice"));
        }
    }
    let mut cpts: Vec<Option<Cpt>> = vec![None; variables.len()];
    for (child, parents, table) in families {
        let context = format!("cpt `{child}`");
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| ParseError::semantic(&context, format!("unknown variable `{name}`")))
        };
        let c = lookup(&child)?;
        let ps = parents.iter().map(|p| lookup(p)).collect::<Result<Vec<_>, _>>()?;
        let want: usize = ps.iter().map(|&p| variables[p].cardinality()).product::<usize>()
            * variables[c].cardinality();
        if table.len() != want {
            return Err(ParseError::semantic(
                &context,
                format!("table has {} entries, expected {want}", table.len()),
            ));
        }
        if cpts[c].is_some() {
            return Err(ParseError::semantic(&context, "defined twice"));
        }
        cpts[c] = Some(Cpt::new(VarId(c), ps.into_iter().map(VarId).collect(), table));
    }
    let cpts = cpts
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| ParseError::semantic(format!("variable `{}`", variables[i].name), "has no cpt")))
        .collect::<Result<Vec<_>, _>>()?;
    let net = crate::Network::new(variables, cpts).map_err(|e| ParseError::semantic("network", e.to_string()))?;
    if let Some(v) = crate::validate_network(&net).into_iter().next() {
        return Err(ParseError::semantic(
            format!("variable `{}`", v.variable),
            format!("{:?}: {}", v.rule, v.detail),
        ));
    }
    Ok(net)
}
