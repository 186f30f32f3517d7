//! Line-based model format:
//!
//! ```text
//! mdp                                   # or `game`
//! name recharge                         # optional
//! state q0 owner=p1 priority=1
//! state q1 owner=prob priority=1
//! edge q0 q1 weight=-10
//! edge q1 q0 weight=0 prob=1/2
//! ```
//!
//! `#` starts a comment. States must be declared before their edges.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Arena, Model, ModelDraft, ModelKind, Owner, Prob, Weight};

#[derive(Clone, Debug)]
pub struct ModelDocument {
    pub name: Option<String>,
    pub draft: ModelDraft,
}

impl ModelDocument {
    /// Validates the parsed model.
    pub fn into_model(self) -> Result<Model> {
        self.draft.into_model()
    }
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Splits `key=value`, requiring the given key.
fn field<'a>(line: usize, token: Option<&'a str>, key: &str) -> Result<&'a str> {
    let token = token.ok_or_else(|| err(line, format!("missing `{key}=`")))?;
    match token.split_once('=') {
        Some((k, v)) if k == key => Ok(v),
        _ => Err(err(line, format!("expected `{key}=...`, found `{token}`"))),
    }
}

fn parse_prob(line: usize, text: &str) -> Result<Prob> {
    let (n, d) = text.split_once('/').unwrap_or((text, "1"));
    let n: i64 = n.parse().map_err(|_| err(line, format!("bad probability `{text}`")))?;
    let d: i64 = d.parse().map_err(|_| err(line, format!("bad probability `{text}`")))?;
    Prob::new(n, d).ok_or_else(|| err(line, format!("probability `{text}` outside (0, 1]")))
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.contains('=') && !id.starts_with('#')
}

/// Parses the syntax only; semantic checks happen on [`ModelDocument::into_model`].
pub fn parse_document(text: &str) -> Result<ModelDocument> {
    let mut kind = None;
    let mut name = None;
    let mut draft = ModelDraft::new(ModelKind::Mdp);
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut edges = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let head = tokens.next().expect("non-empty line");
        let Some(kind) = kind else {
            kind = Some(match head {
                "mdp" => ModelKind::Mdp,
                "game" => ModelKind::Game,
                _ => return Err(err(line, format!("expected `mdp` or `game`, found `{head}`"))),
            });
            if tokens.next().is_some() {
                return Err(err(line, "unexpected text after the header"));
            }
            draft = ModelDraft::new(kind.expect("just set"));
            continue;
        };
        match head {
            "name" => {
                let rest = content["name".len()..].trim();
                if rest.is_empty() {
                    return Err(err(line, "empty name"));
                }
                name = Some(rest.to_string());
                continue;
            }
            "state" => {
                let id = tokens.next().filter(|t| valid_id(t)).ok_or_else(|| err(line, "missing state id"))?;
                let owner = match field(line, tokens.next(), "owner")? {
                    "p1" => Owner::Player1,
                    "prob" if kind == ModelKind::Mdp => Owner::Random,
                    "p2" if kind == ModelKind::Game => Owner::Player2,
                    o => return Err(err(line, format!("owner `{o}` not allowed in a {} model", kind.keyword()))),
                };
                let priority = field(line, tokens.next(), "priority")?
                    .parse()
                    .map_err(|_| err(line, "priority must be a natural number"))?;
                if ids.contains_key(id) {
                    return Err(err(line, format!("duplicate state `{id}`")));
                }
                ids.insert(id.to_string(), draft.add_state(id, owner, priority));
            }
            "edge" => {
                let mut endpoint = |what: &str| -> Result<usize> {
                    let id = tokens.next().ok_or_else(|| err(line, format!("missing {what} state")))?;
                    ids.get(id).copied().ok_or_else(|| err(line, format!("undeclared state `{id}`")))
                };
                let src = endpoint("source")?;
                let dst = endpoint("target")?;
                let weight: Weight = field(line, tokens.next(), "weight")?
                    .parse()
                    .map_err(|_| err(line, "weight must be an integer"))?;
                let prob = match tokens.next() {
                    Some(t) => Some(parse_prob(line, field(line, Some(t), "prob")?)?),
                    None => None,
                };
                let random = draft.arena().owner(src) == Owner::Random;
                match (random, prob.is_some()) {
                    (true, false) => return Err(err(line, "edges of probabilistic states need `prob=`")),
                    (false, true) => return Err(err(line, "`prob=` is only allowed on probabilistic states")),
                    _ => {}
                }
                if !edges.insert((src, dst)) {
                    return Err(err(line, "duplicate edge"));
                }
                draft.add_edge(src, dst, weight, prob);
            }
            other => return Err(err(line, format!("unknown directive `{other}`"))),
        }
        if let Some(extra) = tokens.next() {
            return Err(err(line, format!("unexpected `{extra}`")));
        }
    }
    if kind.is_none() {
        return Err(err(1, "missing `mdp` or `game` header"));
    }
    Ok(ModelDocument { name, draft })
}

/// Parses and validates.
pub fn parse_model(text: &str) -> Result<Model> {
    parse_document(text)?.into_model()
}

/// Canonical text: states by index, edges sorted by (source, target) index.
pub fn write_model(arena: &Arena, name: Option<&str>) -> String {
    let mut out = String::new();
    writeln!(out, "{}", arena.kind().keyword()).unwrap();
    if let Some(name) = name {
        writeln!(out, "name {name}").unwrap();
    }
    for q in arena.states() {
        writeln!(out, "state {} owner={} priority={}", arena.name(q), arena.owner(q).keyword(), arena.priority(q)).unwrap();
    }
    let mut edges: Vec<_> = arena.edges().iter().collect();
    edges.sort_by_key(|e| (e.src, e.dst));
    for e in edges {
        write!(out, "edge {} {} weight={}", arena.name(e.src), arena.name(e.dst), e.weight).unwrap();
        if let Some(p) = e.prob {
            write!(out, " prob={p}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    const RECHARGE: &str = "\
mdp
# the three-state example
state q0 owner=p1 priority=1
state q1 owner=prob priority=1
state q2 owner=p1 priority=0
edge q0 q0 weight=1
edge q0 q1 weight=-10
edge q1 q0 weight=0 prob=1/2
edge q1 q2 weight=0 prob=1/2
edge q2 q0 weight=-10
";

    #[test]
    fn parses_recharge_loop() {
        let m = parse_model(RECHARGE).unwrap();
        let arena = m.arena();
        assert_eq!(arena.len(), 3);
        assert_eq!(arena.max_weight(), 10);
        assert_eq!(arena.max_priority(), 1);
        assert_eq!(arena.edges(), fixtures::recharge_loop().edges());
    }

    #[test]
    fn round_trip_is_stable() {
        let m = parse_model(RECHARGE).unwrap();
        let text = write_model(m.arena(), Some("recharge"));
        let again = parse_document(&text).unwrap();
        assert_eq!(again.name.as_deref(), Some("recharge"));
        let again = again.into_model().unwrap();
        assert_eq!(write_model(again.arena(), Some("recharge")), text);
        assert_eq!(text, RECHARGE.replace("# the three-state example\n", "name recharge\n"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "mdp\nstate a owner=p1 priority=0\nedge a a weight=0 prob=1/2\n";
        match parse_document(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let dup = "mdp\nstate a owner=p1 priority=0\nedge a a weight=0\nedge a a weight=1\n";
        assert!(matches!(parse_document(dup), Err(Error::Parse { line: 4, .. })));
        assert!(matches!(parse_document("game\nstate a owner=prob priority=0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_document("mdp\nedge a a weight=0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_document("mdp\nstate a owner=p1 priority=-1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_document("# nothing\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn semantic_errors_are_deferred() {
        let doc = parse_document("mdp\nstate a owner=p1 priority=0\n").unwrap();
        assert!(matches!(doc.into_model(), Err(Error::InvalidModel(_))));
        let half = "mdp\nstate a owner=prob priority=0\nedge a a weight=0 prob=1/2\n";
        assert!(matches!(parse_model(half), Err(Error::InvalidModel(_))));
    }
}
