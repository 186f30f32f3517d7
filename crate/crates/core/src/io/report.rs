//! Versioned JSON result reports.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::energy_game::{Credit, CreditVector};
use crate::error::{Error, Result};
use crate::model::{Arena, Owner, Prob, StateId, StateSet};
use crate::strategy::{Choice, MemoryUpdate, Transducer};

pub const SCHEMA: &str = "qparity-report/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: String,
    pub states: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreditEntry {
    pub state: String,
    pub credit: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveEntry {
    pub state: String,
    pub prob: String,
}

/// One step of a state's step function: from memory `from_memory` upwards
/// (until the next row of the same state) play `choice`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub state: String,
    pub from_memory: u64,
    pub choice: Vec<MoveEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyTable {
    /// `constant` or `energy-level`.
    pub memory: String,
    /// Saturation level of the energy memory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    pub size: u64,
    pub rows: Vec<StrategyRow>,
}

impl StrategyTable {
    pub fn of(arena: &Arena, t: &Transducer) -> StrategyTable {
        let (memory, cap) = match t.update_rule() {
            MemoryUpdate::Constant => ("constant", None),
            MemoryUpdate::EnergyLevel { cap } => ("energy-level", Some(cap)),
        };
        let rows = arena
            .states()
            .flat_map(|q| {
                t.breakpoints(q).iter().map(move |(m, c)| StrategyRow {
                    state: arena.name(q).to_string(),
                    from_memory: *m,
                    choice: c.0.iter().map(|(s, p)| MoveEntry { state: arena.name(*s).to_string(), prob: p.to_string() }).collect(),
                })
            })
            .collect();
        StrategyTable { memory: memory.into(), cap, size: t.memory_size(), rows }
    }

    /// Rebuilds the transducer over `arena`, checking every move is an edge.
    pub fn to_transducer(&self, arena: &Arena) -> Result<Transducer> {
        let mut t = match (self.memory.as_str(), self.cap) {
            ("constant", _) => Transducer::memoryless(arena.len()),
            ("energy-level", Some(cap)) => Transducer::energy_based(arena.len(), cap),
            (m, _) => return Err(bad(format!("unknown memory kind `{m}`"))),
        };
        for row in &self.rows {
            let q = lookup(arena, &row.state)?;
            let mut choice = Vec::new();
            for mv in &row.choice {
                let s = lookup(arena, &mv.state)?;
                if arena.edge(q, s).is_none() {
                    return Err(bad(format!("move {} -> {} is not an edge", row.state, mv.state)));
                }
                choice.push((s, parse_prob(&mv.prob)?));
            }
            if arena.owner(q) != Owner::Player1 {
                return Err(bad(format!("strategy row for non-player-1 state {}", row.state)));
            }
            let before = t.breakpoints(q).len();
            if before > 0 && t.breakpoints(q)[before - 1].0 >= row.from_memory {
                return Err(bad(format!("rows of {} are not increasing", row.state)));
            }
            t.push(q, row.from_memory, Choice(choice));
        }
        t.check(arena)?;
        Ok(t)
    }
}

fn bad(msg: String) -> Error {
    Error::CrossCheck(format!("report: {msg}"))
}

fn lookup(arena: &Arena, name: &str) -> Result<StateId> {
    arena.state_by_name(name).ok_or_else(|| bad(format!("unknown state `{name}`")))
}

fn parse_prob(text: &str) -> Result<Prob> {
    let (n, d) = text.split_once('/').unwrap_or((text, "1"));
    n.parse()
        .ok()
        .zip(d.parse().ok())
        .and_then(|(n, d)| Prob::new(n, d))
        .ok_or_else(|| bad(format!("bad probability `{text}`")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub command: String,
    pub model: ModelSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winning: Option<Vec<String>>,
    /// Least credits of winning states, in state order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credits: Option<Vec<CreditEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyTable>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl Report {
    pub fn new(command: &str, arena: &Arena, name: Option<&str>) -> Report {
        Report {
            schema: SCHEMA.into(),
            command: command.into(),
            model: ModelSummary {
                name: name.map(str::to_string),
                kind: arena.kind().keyword().into(),
                states: arena.names(),
            },
            winning: None,
            credits: None,
            strategy: None,
            details: Value::Null,
        }
    }

    pub fn with_winning(mut self, arena: &Arena, set: &StateSet) -> Report {
        self.winning = Some(set.iter().map(|&q| arena.name(q).to_string()).collect());
        self
    }

    pub fn with_credits(mut self, arena: &Arena, credits: &CreditVector) -> Report {
        self.credits = Some(
            credits
                .0
                .iter()
                .enumerate()
                .filter_map(|(q, c)| match c {
                    Credit::Finite(c) => Some(CreditEntry { state: arena.name(q).to_string(), credit: *c }),
                    Credit::Unwinnable => None,
                })
                .collect(),
        );
        self
    }

    pub fn with_strategy(mut self, arena: &Arena, t: &Transducer) -> Report {
        self.strategy = Some(StrategyTable::of(arena, t));
        self
    }

    pub fn with_details(mut self, details: Value) -> Report {
        self.details = details;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Report> {
        let r: Report = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if r.schema != SCHEMA {
            return Err(bad(format!("unsupported schema `{}`", r.schema)));
        }
        Ok(r)
    }

    /// Consistency against the model: winning sets name existing states,
    /// credits appear only on winning states, strategy moves are edges.
    pub fn check(&self, arena: &Arena) -> Result<()> {
        if self.model.states != arena.names() {
            return Err(bad("state list differs from the model".into()));
        }
        let mut winning = StateSet::new();
        if let Some(w) = &self.winning {
            for name in w {
                winning.insert(lookup(arena, name)?);
            }
        }
        if let Some(credits) = &self.credits {
            for c in credits {
                let q = lookup(arena, &c.state)?;
                if self.winning.is_some() && !winning.contains(&q) {
                    return Err(bad(format!("credit on non-winning state {}", c.state)));
                }
            }
        }
        if let Some(t) = &self.strategy {
            t.to_transducer(arena)?;
        }
        Ok(())
    }

    /// Credit recorded for `q`, if any.
    pub fn credit_of(&self, name: &str) -> Option<u64> {
        self.credits.as_ref()?.iter().find(|c| c.state == name).map(|c| c.credit)
    }
}
