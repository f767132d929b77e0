//! Reader for a subset of the Hugin `.net` language: a `net` block, discrete
//! `node` blocks with `states`, and `potential` blocks with a dense `data`
//! table. Other attributes are skipped; other constructs are refused.

use super::{build_network, ParseError};
use crate::model::{Network, Variable};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    let (mut line, mut line_start) = (1, 0);
    while let Some(&(i, c)) = chars.peek() {
        let col = i - line_start + 1;
        if c == '\n' {
            chars.next();
            line += 1;
            line_start = i + 1;
        } else if c.is_whitespace() {
            chars.next();
        } else if c == '%' {
            while chars.peek().is_some_and(|&(_, c)| c != '\n') {
                chars.next();
            }
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some((_, '"')) => break,
                    Some((_, '\n')) | None => return Err(ParseError::syntax(line, col, "unterminated string")),
                    Some((_, ch)) => s.push(ch),
                }
            }
            out.push(Token { tok: Tok::Str(s), line, col });
        } else if "(){}=;|".contains(c) {
            chars.next();
            out.push(Token { tok: Tok::Punct(c), line, col });
        } else if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            let mut s = String::new();
            while let Some(&(_, ch)) = chars.peek() {
                if ch.is_ascii_alphanumeric() || "+-.".contains(ch) {
                    s.push(ch);
                    chars.next();
                } else {
                    break;
                }
            }
            let x = s
                .parse()
                .map_err(|_| ParseError::syntax(line, col, format!("bad number `{s}`")))?;
            out.push(Token { tok: Tok::Num(x), line, col });
        } else if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&(_, ch)) = chars.peek() {
                if ch.is_alphanumeric() || ch == '_' {
                    s.push(ch);
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Ident(s), line, col });
        } else {
            return Err(ParseError::syntax(line, col, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.end, |t| (t.line, t.col))
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::syntax(line, col, msg)
    }

    fn next(&mut self) -> Result<Tok, ParseError> {
        let t = self.toks.get(self.pos).ok_or_else(|| self.err("unexpected end of input"))?;
        self.pos += 1;
        Ok(t.tok.clone())
    }

    fn punct(&mut self, c: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Punct(p)) if *p == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{c}`"))),
        }
    }

    fn is_punct(&self, c: char) -> bool {
        matches!(self.peek(), Some(Tok::Punct(p)) if *p == c)
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.next()? {
            Tok::Ident(s) => Ok(s),
            _ => {
                self.pos -= 1;
                Err(self.err("expected a name"))
            }
        }
    }

    /// Skips one attribute value: a string, number, name, or a
    /// parenthesized list of those.
    fn skip_value(&mut self) -> Result<(), ParseError> {
        if self.is_punct('(') {
            let mut depth = 0;
            loop {
                match self.next()? {
                    Tok::Punct('(') => depth += 1,
                    Tok::Punct(')') => {
                        depth -= 1;
                        if depth == 0 {
                            return Ok(());
                        }
                    }
                    _ => {}
                }
            }
        }
        match self.next()? {
            Tok::Str(_) | Tok::Num(_) | Tok::Ident(_) => Ok(()),
            _ => {
                self.pos -= 1;
                Err(self.err("expected a value"))
            }
        }
    }

    /// `{ name = value; ... }`, calling `on` for each attribute; `on`
    /// returns false to have the value skipped.
    fn attributes(
        &mut self,
        mut on: impl FnMut(&mut Parser, &str) -> Result<bool, ParseError>,
    ) -> Result<(), ParseError> {
        self.punct('{')?;
        while !self.is_punct('}') {
            let name = self.ident()?;
            self.punct('=')?;
            if !on(self, &name)? {
                self.skip_value()?;
            }
            self.punct(';')?;
        }
        self.punct('}')
    }

    fn strings(&mut self) -> Result<Vec<String>, ParseError> {
        self.punct('(')?;
        let mut out = Vec::new();
        while !self.is_punct(')') {
            match self.next()? {
                Tok::Str(s) => out.push(s),
                _ => {
                    self.pos -= 1;
                    return Err(self.err("expected a state label"));
                }
            }
        }
        self.punct(')')?;
        Ok(out)
    }

    /// Flattens arbitrarily nested parenthesized numbers.
    fn numbers(&mut self, out: &mut Vec<f64>) -> Result<(), ParseError> {
        self.punct('(')?;
        while !self.is_punct(')') {
            if self.is_punct('(') {
                self.numbers(out)?;
            } else {
                match self.next()? {
                    Tok::Num(x) => out.push(x),
                    _ => {
                        self.pos -= 1;
                        return Err(self.err("expected a number"));
                    }
                }
            }
        }
        self.punct(')')
    }
}

const UNSUPPORTED_NODE_KINDS: [&str; 4] = ["continuous", "decision", "utility", "function"];

pub fn parse_hugin_subset(text: &str) -> Result<Network, ParseError> {
    let toks = tokenize(text)?;
    let end = super::line_col(text, text.len());
    let mut p = Parser { toks, pos: 0, end };
    let mut variables = Vec::new();
    let mut families = Vec::new();
    while p.peek().is_some() {
        let mut kw = p.ident()?;
        if kw == "discrete" {
            kw = p.ident()?;
            if kw != "node" {
                p.pos -= 1;
                return Err(p.err("expected `node`"));
            }
        }
        match kw.as_str() {
            "net" => p.attributes(|_, _| Ok(false))?,
            "node" => {
                let name = p.ident()?;
                let mut states = None;
                p.attributes(|p, attr| {
                    if attr == "states" {
                        states = Some(p.strings()?);
                        return Ok(true);
                    }
                    Ok(false)
                })?;
                let states = states.ok_or_else(|| ParseError::semantic(format!("node `{name}`"), "no states"))?;
                variables.push(Variable { name, states });
            }
            "potential" => {
                p.punct('(')?;
                let child = p.ident()?;
                let mut parents = Vec::new();
                if p.is_punct('|') {
                    p.punct('|')?;
                    while !p.is_punct(')') {
                        parents.push(p.ident()?);
                    }
                }
                p.punct(')')?;
                let mut data = None;
                p.attributes(|p, attr| match attr {
                    "data" => {
                        let mut v = Vec::new();
                        p.numbers(&mut v)?;
                        data = Some(v);
                        Ok(true)
                    }
                    "model_nodes" | "model_data" | "experience" | "fading" => {
                        Err(ParseError::Unsupported(format!("potential attribute `{attr}`")))
                    }
                    _ => Ok(false),
                })?;
                let data = data.ok_or_else(|| ParseError::semantic(format!("cpt `{child}`"), "potential has no data"))?;
                families.push((child, parents, data));
            }
            k if UNSUPPORTED_NODE_KINDS.contains(&k) => {
                return Err(ParseError::Unsupported(format!("{k} node")));
            }
            "class" | "temporal" | "instance" => return Err(ParseError::Unsupported(format!("`{kw}` declaration"))),
            _ => {
                p.pos -= 1;
                return Err(p.err(format!("unexpected `{kw}`")));
            }
        }
    }
    build_network(variables, families)
}

fn quote(s: &str) -> String {
    format!("\"{s}\"")
}

/// Writes `net` in the subset accepted by [`parse_hugin_subset`].
pub fn serialize_hugin(net: &Network) -> String {
    let mut out = String::from("net\n{\n}\n");
    for v in net.variables() {
        let states: Vec<String> = v.states.iter().map(|s| quote(s)).collect();
        out += &format!("\nnode {}\n{{\n    states = ({});\n}}\n", v.name, states.join(" "));
    }
    for c in net.cpts() {
        let child = net.name(c.child);
        let head = if c.parents.is_empty() {
            child.to_string()
        } else {
            let ps: Vec<&str> = c.parents.iter().map(|&p| net.name(p)).collect();
            format!("{child} | {}", ps.join(" "))
        };
        let card = net.card(c.child);
        let rows: Vec<String> = c
            .table
            .chunks(card)
            .map(|r| {
                let xs: Vec<String> = r.iter().map(|x| format!("{x:?}")).collect();
                format!("({})", xs.join(" "))
            })
            .collect();
        out += &format!("\npotential ({head})\n{{\n    data = ({});\n}}\n", rows.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::netio::parse_network;
    use crate::synth;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TWO_NODE: &str = r#"
% asymmetric chain
net
{
    node_size = (80 40);
    name = "chain";
}

node A
{
    label = "A";
    position = (100 100);
    states = ("a0" "a1");
}

node B
{
    states = ("b0" "b1");
}

potential (A)
{
    data = ( 0.3 0.7 );
}

potential (B | A)
{
    data = (( 0.9 0.1 )    % A = a0
            ( 0.2 0.8 ));  % A = a1
}
"#;

    #[test]
    fn two_node_file_matches_canonical_twin() {
        let net = parse_hugin_subset(TWO_NODE).unwrap();
        let twin = parse_network(&crate::netio::serialize_network(&fixtures::two_node_chain())).unwrap();
        assert_eq!(net, twin);
    }

    #[test]
    fn continuous_nodes_are_unsupported() {
        let text = "continuous node C\n{\n}\n";
        assert_eq!(parse_hugin_subset(text), Err(ParseError::Unsupported("continuous node".into())));
    }

    #[test]
    fn data_length_mismatch_is_semantic() {
        let text = TWO_NODE.replace("( 0.3 0.7 )", "( 0.3 0.2 0.5 )");
        let err = parse_hugin_subset(&text).unwrap_err();
        assert!(matches!(&err, ParseError::Semantic { context, .. } if context == "cpt `A`"), "{err}");
    }

    #[test]
    fn syntax_errors_are_positioned() {
        let text = TWO_NODE.replace("states = (\"b0\" \"b1\");", "states = (\"b0\" \"b1\")");
        match parse_hugin_subset(&text).unwrap_err() {
            ParseError::Syntax { line, .. } => assert_eq!(line, 19),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let net = synth::random_network(&mut rng, 8, 3, 3);
            assert_eq!(parse_hugin_subset(&serialize_hugin(&net)).unwrap(), net);
        }
        let (net, _) = fixtures::equivalence_loop();
        assert_eq!(parse_hugin_subset(&serialize_hugin(&net)).unwrap(), net);
    }
}
