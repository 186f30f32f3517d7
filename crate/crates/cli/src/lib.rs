//! Command-line front end. [`run_cli`] parses arguments, runs one command and
//! writes a JSON report (or model/DOT text) to `out`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qparity::decomposition::{mec_decompose, random_attractor, reach_value, EndComponent};
use qparity::energy_game::{solve_energy_buchi_game, Credit};
use qparity::energy_parity::solve_energy_parity;
use qparity::generate::{random_instance, random_mec, GenParams};
use qparity::io::{export_dot, parse_document, write_model, DotOptions, Report};
use qparity::meanpayoff::{certify_gain, mec_value};
use qparity::mp_parity::{
    solve_disjunction_energy_parity, solve_disjunction_mp_parity, solve_mp_parity, WinningEcReport,
};
use qparity::oracle::{mp_parity_oracle, product_energy_oracle};
use qparity::simulate::simulate;
use qparity::strategy::{Choice, Transducer, TransducerRun};
use qparity::{Arena, Error, Mdp, Model, ModelKind, Rational, StateSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_GUARD: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "qparity", version, about = "Energy-parity and mean-payoff-parity solvers for MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check model invariants.
    Validate { file: PathBuf },
    /// Maximal end-component decomposition.
    Mec { file: PathBuf },
    /// Random attractor of a set of states.
    Attractor {
        file: PathBuf,
        /// Comma-separated state names.
        #[arg(long, value_delimiter = ',', required = true)]
        target: Vec<String>,
    },
    /// Optimal mean payoff of end-components (all maximal ones by default).
    MpValue {
        file: PathBuf,
        /// Comma-separated states of one end-component.
        #[arg(long, value_delimiter = ',')]
        component: Option<Vec<String>>,
    },
    #[command(subcommand)]
    Solve(Solve),
    /// Least credit of one state (energy parity for MDPs, energy Büchi for games).
    MinCredit {
        file: PathBuf,
        #[arg(long)]
        state: String,
    },
    /// Brute-force reference answers.
    #[command(subcommand)]
    Oracle(Oracle),
    /// Monte-Carlo plays of a strategy stored in a report.
    Simulate {
        file: PathBuf,
        /// Report carrying a strategy table.
        #[arg(long)]
        strategy_from: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        horizon: u64,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        /// Start state; defaults to the first winning state of the report.
        #[arg(long)]
        state: Option<String>,
        /// Initial credit; defaults to the credit recorded for the start state.
        #[arg(long)]
        credit: Option<u64>,
    },
    /// Random model in the text format.
    Gen(GenArgs),
    /// Graphviz rendering.
    ExportDot {
        file: PathBuf,
        /// Colour the winning states of this report.
        #[arg(long)]
        highlight_from: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum Solve {
    MpParity(Threshold),
    EnergyParity { file: PathBuf },
    DisjunctionMpParity(Threshold),
    DisjunctionEnergyParity { file: PathBuf },
}

#[derive(Subcommand, Debug)]
enum Oracle {
    Energy {
        file: PathBuf,
        #[arg(long)]
        cap: Option<u64>,
    },
    Mp(Threshold),
}

#[derive(Args, Debug)]
struct Threshold {
    file: PathBuf,
    /// Integer or fraction `a/b`.
    #[arg(long, allow_hyphen_values = true)]
    threshold: String,
    #[arg(long)]
    strict: bool,
    /// Also report the maximal satisfaction probability per state.
    #[arg(long)]
    values: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Mdp,
    Game,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    states: usize,
    #[arg(long, default_value_t = 3)]
    max_weight: i64,
    #[arg(long, default_value_t = 4)]
    max_priority: u32,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    #[arg(long, default_value_t = 0.4)]
    random_fraction: f64,
    #[arg(long, value_enum, default_value_t = Kind::Mdp)]
    kind: Kind,
    /// Generate a single end-component with this maximal out-degree.
    #[arg(long)]
    mec: Option<usize>,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Guard(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Guard(_) => EXIT_GUARD,
            CliError::Internal(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Guard(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::GuardExceeded(_) => CliError::Guard(e.to_string()),
            Error::CrossCheck(_) | Error::NoConvergence(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

struct Loaded {
    model: Model,
    name: Option<String>,
}

impl Loaded {
    fn arena(&self) -> &Arena {
        self.model.arena()
    }

    fn mdp(&self) -> CliResult<&Mdp> {
        match &self.model {
            Model::Mdp(m) => Ok(m),
            Model::Game(_) => Err(CliError::Input("this command needs an mdp model".into())),
        }
    }

    fn report(&self, command: &str) -> Report {
        Report::new(command, self.arena(), self.name.as_deref())
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> CliResult<Loaded> {
    let doc = parse_document(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let name = doc.name.clone();
    let model = doc.into_model().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(Loaded { model, name })
}

fn states_named(arena: &Arena, names: &[String]) -> CliResult<StateSet> {
    names
        .iter()
        .map(|n| arena.state_by_name(n).ok_or_else(|| CliError::Input(format!("unknown state `{n}`"))))
        .collect()
}

fn names(arena: &Arena, set: &StateSet) -> Value {
    json!(set.iter().map(|&q| arena.name(q)).collect::<Vec<_>>())
}

fn parse_threshold(text: &str) -> CliResult<Rational> {
    Rational::from_str(text.trim()).map_err(|_| CliError::Input(format!("bad threshold `{text}`")))
}

fn credit_json(c: Credit) -> Value {
    match c {
        Credit::Finite(v) => json!(v),
        Credit::Unwinnable => json!("unwinnable"),
    }
}

fn trace_json(arena: &Arena, rep: &WinningEcReport) -> Value {
    json!(rep
        .iterations
        .iter()
        .map(|it| json!({
            "priority": it.priority,
            "domain": names(arena, &it.domain),
            "candidates": it.candidates.iter().map(|c| names(arena, c)).collect::<Vec<_>>(),
            "qualified": it.qualified.iter()
                .map(|(c, g)| json!({ "states": names(arena, c), "gain": g.to_string() }))
                .collect::<Vec<_>>(),
            "win": names(arena, &it.win),
            "attractor": names(arena, &it.attractor),
        }))
        .collect::<Vec<_>>())
}

fn memoryless(m: &Mdp, moves: &[Option<usize>]) -> Transducer {
    let mut t = Transducer::memoryless(m.len());
    for (q, mv) in moves.iter().enumerate() {
        if let Some(s) = mv {
            t.set(q, Choice::pure(*s));
        }
    }
    t
}

enum Output {
    Report(Report),
    Text(String),
}

fn solve(cmd: Solve) -> CliResult<Output> {
    Ok(Output::Report(match cmd {
        Solve::MpParity(t) => {
            let l = load(&t.file)?;
            let m = l.mdp()?;
            let nu = parse_threshold(&t.threshold)?;
            let res = solve_mp_parity(m, &nu, t.strict)?;
            let mut details = json!({
                "threshold": nu.to_string(),
                "strict": t.strict,
                "winning_end_components": names(m, &res.report.win),
                "trace": trace_json(m, &res.report),
            });
            if t.values {
                let v = reach_value::<Rational>(m, &res.report.win)?;
                details["values"] = json!(v.iter().map(|x| x.to_string()).collect::<Vec<_>>());
            }
            l.report("solve mp-parity")
                .with_winning(m, &res.almost_sure)
                .with_strategy(m, &memoryless(m, &res.reach_strategy))
                .with_details(details)
        }
        Solve::EnergyParity { file } => {
            let l = load(&file)?;
            let m = l.mdp()?;
            let res = solve_energy_parity(m)?;
            let copies: Vec<Value> = res.copy_index.iter().map(|c| json!(c)).collect();
            l.report("solve energy-parity")
                .with_winning(m, &res.winning)
                .with_credits(m, &res.credits)
                .with_strategy(m, &res.strategy)
                .with_details(json!({
                    "copy_index": copies,
                    "memory_size": res.memory_size(),
                    "memory_bound": res.memory_bound,
                }))
        }
        Solve::DisjunctionMpParity(t) => {
            let l = load(&t.file)?;
            let m = l.mdp()?;
            let nu = parse_threshold(&t.threshold)?;
            let res = solve_disjunction_mp_parity(m, &nu, t.strict)?;
            l.report("solve disjunction-mp-parity").with_winning(m, &res.almost_sure).with_details(json!({
                "threshold": nu.to_string(),
                "strict": t.strict,
                "parity_end_components": names(m, &res.parity_part),
                "mean_payoff_end_components": names(m, &res.mean_payoff_part),
            }))
        }
        Solve::DisjunctionEnergyParity { file } => {
            let l = load(&file)?;
            let m = l.mdp()?;
            let res = solve_disjunction_energy_parity(m)?;
            let admission: serde_json::Map<String, Value> =
                res.energy_admission.iter().map(|(&q, &c)| (m.name(q).to_string(), json!(c))).collect();
            l.report("solve disjunction-energy-parity")
                .with_winning(m, &res.winning)
                .with_credits(m, &res.credits)
                .with_details(json!({
                    "parity_region": names(m, &res.parity_region),
                    "energy_admission": admission,
                }))
        }
    }))
}

fn oracle(cmd: Oracle) -> CliResult<Output> {
    Ok(Output::Report(match cmd {
        Oracle::Energy { file, cap } => {
            let l = load(&file)?;
            let m = l.mdp()?;
            let credits = product_energy_oracle(m, cap)?;
            l.report("oracle energy").with_winning(m, &credits.winning()).with_credits(m, &credits)
        }
        Oracle::Mp(t) => {
            let l = load(&t.file)?;
            let m = l.mdp()?;
            let nu = parse_threshold(&t.threshold)?;
            let win = mp_parity_oracle(m, &nu, t.strict)?;
            l.report("oracle mp")
                .with_winning(m, &win)
                .with_details(json!({ "threshold": nu.to_string(), "strict": t.strict }))
        }
    }))
}

fn min_credit(file: &Path, state: &str) -> CliResult<Report> {
    let l = load(file)?;
    let arena = l.arena();
    let q = arena.state_by_name(state).ok_or_else(|| CliError::Input(format!("unknown state `{state}`")))?;
    let (objective, credit) = match &l.model {
        Model::Mdp(m) => ("energy-parity", solve_energy_parity(m)?.credits.get(q)),
        Model::Game(g) => {
            if g.max_priority() > 1 {
                return Err(CliError::Input("games must use priorities 0 and 1 (energy Büchi)".into()));
            }
            ("energy-buchi", solve_energy_buchi_game(g, None)?.credits.get(q))
        }
    };
    Ok(l.report("min-credit").with_details(json!({
        "state": state,
        "objective": objective,
        "credit": credit_json(credit),
    })))
}

fn run_simulation(
    file: &Path,
    strategy_from: &Path,
    seed: u64,
    horizon: u64,
    runs: u64,
    state: Option<String>,
    credit: Option<u64>,
) -> CliResult<Report> {
    let l = load(file)?;
    let arena = l.arena();
    let source = Report::from_json(&read(strategy_from)?)?;
    source.check(arena)?;
    let table = source.strategy.as_ref().ok_or_else(|| CliError::Input("report has no strategy table".into()))?;
    let t = table.to_transducer(arena)?;
    let start_name = match state {
        Some(s) => s,
        None => source
            .winning
            .as_ref()
            .and_then(|w| w.first().cloned())
            .ok_or_else(|| CliError::Input("no winning state to start from; pass --state".into()))?,
    };
    let start = arena
        .state_by_name(&start_name)
        .ok_or_else(|| CliError::Input(format!("unknown state `{start_name}`")))?;
    let credit = credit.or_else(|| source.credit_of(&start_name)).unwrap_or(0);
    let mut stats = Vec::new();
    for k in 0..runs {
        let mut run = TransducerRun::new(&t);
        stats.push(simulate(arena, &mut run, None, start, credit, seed.wrapping_add(k), horizon)?);
    }
    let energy_ok = stats.iter().filter(|s| s.energy_ok()).count();
    let parity_ok = stats.iter().filter(|s| s.tail_parity_ok()).count();
    Ok(l.report("simulate").with_details(json!({
        "start": start_name,
        "credit": credit,
        "runs": runs,
        "horizon": horizon,
        "energy_ok": energy_ok,
        "tail_parity_ok": parity_ok,
        "stats": stats.iter().map(|s| json!({
            "seed": s.seed,
            "min_energy": s.min_energy,
            "final_energy": s.final_energy,
            "mean_payoff": s.mean_payoff,
            "tail_min_priority": s.tail_min_priority,
            "tail_priorities": s.tail_priorities,
            "buchi_visits": s.buchi_visits,
        })).collect::<Vec<_>>(),
    })))
}

fn generate(a: &GenArgs) -> CliResult<String> {
    let params = GenParams {
        states: a.states,
        max_weight: a.max_weight,
        max_priority: a.max_priority,
        density: a.density,
        random_fraction: a.random_fraction,
        kind: match a.kind {
            Kind::Mdp => ModelKind::Mdp,
            Kind::Game => ModelKind::Game,
        },
        seed: a.seed,
    };
    let name = format!("random-{}", a.seed);
    let model = match a.mec {
        Some(out) => Model::Mdp(random_mec(&params, out)?),
        None => random_instance(&params)?,
    };
    Ok(write_model(model.arena(), Some(&name)))
}

fn mec_values(l: &Loaded, component: Option<Vec<String>>) -> CliResult<Report> {
    let m = l.mdp()?;
    let comps = match component {
        Some(c) => vec![EndComponent::new(m, states_named(m, &c)?)?],
        None => mec_decompose(m).components,
    };
    let mut out = Vec::new();
    for u in comps {
        let v = mec_value::<Rational>(m, &u)?;
        out.push(json!({
            "states": names(m, &u.states),
            "gain": v.gain.to_string(),
            "certified": certify_gain(m, &u, &v),
            "policy": v.policy.iter().map(|(&q, &s)| (m.name(q).to_string(), json!(m.name(s)))).collect::<serde_json::Map<_, _>>(),
            "bias": v.bias.iter().map(|(&q, b)| (m.name(q).to_string(), json!(b.to_string()))).collect::<serde_json::Map<_, _>>(),
        }));
    }
    Ok(l.report("mp-value").with_details(json!({ "components": out })))
}

fn dispatch(cmd: Command) -> CliResult<Output> {
    Ok(Output::Report(match cmd {
        Command::Validate { file } => {
            let doc = parse_document(&read(&file)?).map_err(|e| CliError::Input(format!("{}: {e}", file.display())))?;
            let diags = doc.draft.validate();
            if diags.is_empty() {
                let l = load(&file)?;
                l.report("validate").with_details(json!({ "valid": true, "diagnostics": [] }))
            } else {
                let text: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
                return Err(CliError::Input(format!("invalid model:\n  {}", text.join("\n  "))));
            }
        }
        Command::Mec { file } => {
            let l = load(&file)?;
            let m = l.mdp()?;
            let dec = mec_decompose(m);
            let comps: Vec<Value> = dec.components.iter().map(|u| names(m, &u.states)).collect();
            l.report("mec").with_details(json!({ "components": comps }))
        }
        Command::Attractor { file, target } => {
            let l = load(&file)?;
            let m = l.mdp()?;
            let t = states_named(m, &target)?;
            let attr = random_attractor(m, &t);
            l.report("attractor").with_details(json!({ "target": names(m, &t), "attractor": names(m, &attr) }))
        }
        Command::MpValue { file, component } => mec_values(&load(&file)?, component)?,
        Command::Solve(s) => return solve(s),
        Command::MinCredit { file, state } => min_credit(&file, &state)?,
        Command::Oracle(o) => return oracle(o),
        Command::Simulate { file, strategy_from, seed, horizon, runs, state, credit } => {
            run_simulation(&file, &strategy_from, seed, horizon, runs, state, credit)?
        }
        Command::Gen(a) => return Ok(Output::Text(generate(&a)?)),
        Command::ExportDot { file, highlight_from } => {
            let l = load(&file)?;
            let mut options = DotOptions { title: l.name.clone(), ..DotOptions::default() };
            if let Some(path) = highlight_from {
                let r = Report::from_json(&read(&path)?)?;
                r.check(l.arena())?;
                options.highlight = states_named(l.arena(), r.winning.as_deref().unwrap_or(&[]))?;
            }
            return Ok(Output::Text(export_dot(l.arena(), &options)));
        }
    }))
}

/// Runs the command line `argv` (including the program name) and returns the
/// exit code: 0 solved, 2 input error, 3 guard refused, 1 internal failure.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(Output::Report(r)) => {
            let _ = writeln!(out, "{}", r.to_json());
            EXIT_OK
        }
        Ok(Output::Text(t)) => {
            let _ = write!(out, "{t}");
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}
