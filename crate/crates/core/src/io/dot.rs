//! Graphviz rendering.

use std::fmt::Write as _;

use crate::model::{Arena, Owner, StateSet};

#[derive(Clone, Debug, Default)]
pub struct DotOptions {
    /// States filled with the highlight colour.
    pub highlight: StateSet,
    pub title: Option<String>,
}

fn shape(owner: Owner) -> &'static str {
    match owner {
        Owner::Player1 => "circle",
        Owner::Random => "diamond",
        Owner::Player2 => "box",
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Player-1 states are circles, probabilistic states diamonds, player-2
/// states boxes. Nodes show name and priority, edges weight and probability.
pub fn export_dot(arena: &Arena, options: &DotOptions) -> String {
    let mut out = String::from("digraph model {\n");
    if let Some(t) = &options.title {
        writeln!(out, "  label={};", quote(t)).unwrap();
    }
    for q in arena.states() {
        let label = format!("{}\\np={}", arena.name(q), arena.priority(q));
        write!(out, "  n{q} [shape={}, label={}", shape(arena.owner(q)), quote(&label)).unwrap();
        if options.highlight.contains(&q) {
            out.push_str(", style=filled, fillcolor=palegreen");
        }
        out.push_str("];\n");
    }
    for e in arena.edges() {
        let label = match e.prob {
            Some(p) => format!("{} ({p})", e.weight),
            None => e.weight.to_string(),
        };
        writeln!(out, "  n{} -> n{} [label={}];", e.src, e.dst, quote(&label)).unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn shapes_and_colouring() {
        let m = fixtures::recharge_loop();
        let dot = export_dot(&m, &DotOptions { highlight: [0, 1, 2].into(), title: None });
        assert_eq!(dot.matches("shape=diamond").count(), 1);
        assert_eq!(dot.matches("shape=circle").count(), 2);
        assert_eq!(dot.matches("fillcolor").count(), 3);
        assert!(dot.contains("label=\"0 (1/2)\""));
        assert_eq!(dot, export_dot(&m, &DotOptions { highlight: [0, 1, 2].into(), title: None }));
    }
}
