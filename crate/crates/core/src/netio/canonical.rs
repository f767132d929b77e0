//! Canonical network documents:
//!
//! ```toml
//! [[variables]]
//! name = "A"
//! states = ["a0", "a1"]
//!
//! [[cpts]]
//! child = "A"
//! parents = []
//! table = [0.3, 0.7]
//! ```
//!
//! Tables use the CPT layout: first parent most significant, child fastest.

use serde::{Deserialize, Serialize};

use super::{build_network, line_col, ParseError};
use crate::model::{Network, Variable};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default)]
    variables: Vec<VariableDoc>,
    #[serde(default)]
    cpts: Vec<CptDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    name: String,
    states: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CptDoc {
    child: String,
    #[serde(default)]
    parents: Vec<String>,
    table: Vec<f64>,
}

pub fn parse_network(text: &str) -> Result<Network, ParseError> {
    let doc: Document = toml::from_str(text).map_err(|e| {
        let (line, col) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        ParseError::syntax(line, col, e.message().to_string())
    })?;
    let variables = doc
        .variables
        .into_iter()
        .map(|v| Variable {
            name: v.name,
            states: v.states,
        })
        .collect();
    let families = doc
        .cpts
        .into_iter()
        .map(|c| (c.child, c.parents, c.table))
        .collect();
    build_network(variables, families)
}

/// Renders the variables and CPTs of `net` (the kind and deletion registry
/// are not part of the document).
pub fn serialize_network(net: &Network) -> String {
    let doc = Document {
        variables: net
            .variables()
            .iter()
            .map(|v| VariableDoc {
                name: v.name.clone(),
                states: v.states.clone(),
            })
            .collect(),
        cpts: net
            .cpts()
            .iter()
            .map(|c| CptDoc {
                child: net.name(c.child).to_string(),
                parents: c.parents.iter().map(|&p| net.name(p).to_string()).collect(),
                table: c.table.clone(),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("network documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::enumerate_posterior;
    use crate::fixtures;
    use crate::synth;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const APPENDIX: &str = r#"
[[variables]]
name = "U1"
states = ["u", "not_u"]

[[variables]]
name = "U2"
states = ["u", "not_u"]

[[variables]]
name = "X1"
states = ["x", "not_x"]

[[variables]]
name = "X2"
states = ["x", "not_x"]

[[cpts]]
child = "U1"
table = [0.5, 0.5]

[[cpts]]
child = "U2"
table = [0.5, 0.5]

[[cpts]]
child = "X1"
parents = ["U1", "U2"]
table = [1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0]

[[cpts]]
child = "X2"
parents = ["U1", "U2"]
table = [1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0]
"#;

    #[test]
    fn minimal_document() {
        let net = parse_network(
            "[[variables]]\nname = \"A\"\nstates = [\"a0\", \"a1\"]\n[[cpts]]\nchild = \"A\"\ntable = [0.3, 0.7]\n",
        )
        .unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!(net.cpt(crate::VarId(0)).table, vec![0.3, 0.7]);
    }

    #[test]
    fn appendix_document_matches_fixture() {
        let net = parse_network(APPENDIX).unwrap();
        let (fixture, ev) = fixtures::equivalence_loop();
        assert_eq!(net, fixture);
        let post = enumerate_posterior(&net, &ev, &[crate::VarId(0)]).unwrap();
        assert_abs_diff_eq!(post.values()[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn random_networks_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let net = synth::random_network(&mut rng, 10, 3, 3);
            assert_eq!(parse_network(&serialize_network(&net)).unwrap(), net);
        }
    }

    #[test]
    fn syntax_errors_are_positioned() {
        let err = parse_network("[[variables]]\nname = \"A\"\nstates = [\"a0\", \n").unwrap_err();
        match err {
            ParseError::Syntax { line, .. } => assert!(line >= 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_cpt() {
        let bad_len = APPENDIX.replace("table = [0.5, 0.5]\n\n[[cpts]]\nchild = \"U2\"", "table = [1.0]\n\n[[cpts]]\nchild = \"U2\"");
        let err = parse_network(&bad_len).unwrap_err();
        assert!(err.to_string().contains("cpt `U1`"), "{err}");
        let unknown = APPENDIX.replace("parents = [\"U1\", \"U2\"]", "parents = [\"U1\", \"U9\"]");
        let err = parse_network(&unknown).unwrap_err();
        assert!(err.to_string().contains("U9"), "{err}");
        let unnormalized = APPENDIX.replacen("table = [0.5, 0.5]", "table = [0.5, 0.4]", 1);
        assert!(matches!(parse_network(&unnormalized), Err(ParseError::Semantic { .. })));
    }
}
