use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use cascade_core::axioms::{self, impossibility_losses, Check, CheckConfig, RuleSource, Target, Verdict};
use cascade_core::game::{spe_outcomes, SolveOptions, DEFAULT_HISTORY_CAP};
use cascade_core::io::{parse_loss_map, GraphFile};
use cascade_core::sim::{run_simulation, write_outputs, SimConfig};
use cascade_core::weights::{to_weight_vector, wstar_exact, Method};
use cascade_core::{count_paths, efficient_paths, enumerate_paths, make_rule, validate, Dag, LossFunction, Path, RuleSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

const DEFAULT_PATH_CAP: usize = 1_000_000;

#[derive(Parser)]
#[command(name = "cascade", version, about = "Liability allocation for cascading failures on directed acyclic networks")]
struct Cli {
    /// Print a human-readable table instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural checks on a graph file.
    Validate { graph: PathBuf },
    /// Count and list source-to-sink paths.
    Paths {
        graph: PathBuf,
        #[arg(long)]
        count_only: bool,
        #[arg(long, default_value_t = DEFAULT_PATH_CAP)]
        cap_paths: usize,
    },
    /// Path-counting Shapley weights.
    Weights {
        graph: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Dp)]
        method: MethodArg,
        #[arg(long, default_value_t = DEFAULT_PATH_CAP)]
        cap_paths: usize,
    },
    /// Minimum-loss paths.
    Efficient {
        #[command(flatten)]
        input: LossInput,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Liabilities a rule assigns along a path.
    Liability {
        #[command(flatten)]
        input: LossInput,
        #[arg(long)]
        rule: RuleSpec,
        /// Comma-separated node labels; every path when omitted.
        #[arg(long)]
        path: Option<String>,
        #[arg(long, default_value_t = DEFAULT_PATH_CAP)]
        cap_paths: usize,
    },
    /// Subgame-perfect outcomes of the induced game.
    Spe {
        #[command(flatten)]
        input: LossInput,
        #[arg(long)]
        rule: RuleSpec,
        #[arg(long)]
        tol: Option<f64>,
        /// Maximum number of histories explored.
        #[arg(long, default_value_t = DEFAULT_HISTORY_CAP)]
        cap_paths: usize,
    },
    /// Property-check an axiom or property for a rule.
    Check(CheckArgs),
    /// Run the layered-network simulation.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        draws: Option<usize>,
    },
}

#[derive(Args)]
struct LossInput {
    graph: PathBuf,
    /// JSON mapping `"from->to": loss`; overrides losses embedded in the graph.
    #[arg(long)]
    losses: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Graph to test on; random graphs when omitted.
    graph: Option<PathBuf>,
    #[arg(long, required_unless_present = "property", conflicts_with = "property")]
    axiom: Option<axioms::Axiom>,
    #[arg(long)]
    property: Option<axioms::Property>,
    /// Rule spec, or `fixed:random` for fresh decider-positive weights per trial.
    #[arg(long)]
    rule: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    losses: Option<PathBuf>,
    #[arg(long, value_enum, requires = "graph", conflicts_with = "losses")]
    fixture: Option<Fixture>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Enumerate,
    Shapley,
    Dp,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Enumerate => Method::Enumerate,
            MethodArg::Shapley => Method::Shapley,
            MethodArg::Dp => Method::Dp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    #[value(name = "appendixC")]
    Impossibility,
}

/// What a command produced: JSON, a table, and its exit status.
struct Output {
    json: Value,
    table: String,
    code: u8,
}

impl Output {
    fn ok(json: Value, table: String) -> Output {
        Output { json, table, code: 0 }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(out) => {
            let text = if cli.pretty {
                out.table
            } else {
                serde_json::to_string_pretty(&out.json).expect("output serializes") + "\n"
            };
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<Output> {
    match command {
        Command::Validate { graph } => cmd_validate(&graph),
        Command::Paths { graph, count_only, cap_paths } => cmd_paths(&graph, count_only, cap_paths),
        Command::Weights { graph, method, cap_paths } => cmd_weights(&graph, method.into(), cap_paths),
        Command::Efficient { input, tol } => cmd_efficient(&input, tol),
        Command::Liability { input, rule, path, cap_paths } => cmd_liability(&input, &rule, path.as_deref(), cap_paths),
        Command::Spe { input, rule, tol, cap_paths } => cmd_spe(&input, &rule, tol, cap_paths),
        Command::Check(args) => cmd_check(&args),
        Command::Simulate { config, out, workers, seed, draws } => {
            cmd_simulate(config.as_deref(), out, workers, seed, draws)
        }
    }
}

fn read(path: &FsPath) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_graph(path: &FsPath) -> Result<(GraphFile, Dag)> {
    let file = GraphFile::from_json(&read(path)?).with_context(|| format!("malformed graph file {}", path.display()))?;
    let dag = file.to_dag().with_context(|| format!("invalid graph in {}", path.display()))?;
    Ok((file, dag))
}

fn load_losses(input: &LossInput) -> Result<(Dag, LossFunction)> {
    let (file, dag) = load_graph(&input.graph)?;
    let losses = match &input.losses {
        Some(path) => parse_loss_map(&read(path)?, &dag).with_context(|| format!("invalid loss map {}", path.display()))?,
        None => file.losses(&dag)?.with_context(|| {
            format!("{} has no edge losses; add `loss` to every edge or pass --losses", input.graph.display())
        })?,
    };
    Ok((dag, losses))
}

fn path_json(dag: &Dag, path: &Path) -> Value {
    json!(path.labels(dag))
}

fn cmd_validate(graph: &FsPath) -> Result<Output> {
    let file = GraphFile::from_json(&read(graph)?).with_context(|| format!("malformed graph file {}", graph.display()))?;
    let digraph = file.to_digraph()?;
    let report = validate(&digraph, file.source.as_deref());
    let mut table = String::new();
    for c in &report.checks {
        table += &format!("{:<16} {:<8} {}\n", c.name, format!("{:?}", c.status).to_lowercase(), c.detail);
    }
    let mut json = serde_json::to_value(&report)?;
    json["valid"] = json!(report.is_valid());
    Ok(Output { json, table, code: if report.is_valid() { 0 } else { 2 } })
}

fn cmd_paths(graph: &FsPath, count_only: bool, cap: usize) -> Result<Output> {
    let (_, dag) = load_graph(graph)?;
    let count = count_paths(&dag);
    if count_only {
        return Ok(Output::ok(json!({ "count": count.to_string() }), format!("{count} paths\n")));
    }
    let paths = enumerate_paths(&dag, Some(cap))
        .with_context(|| format!("{count} paths exceed --cap-paths {cap}; raise the cap or pass --count-only"))?;
    let table = paths.iter().map(|p| p.display(&dag) + "\n").collect::<String>() + &format!("{count} paths\n");
    let list: Vec<Value> = paths.iter().map(|p| path_json(&dag, p)).collect();
    Ok(Output::ok(json!({ "count": count.to_string(), "paths": list }), table))
}

fn cmd_weights(graph: &FsPath, method: Method, cap: usize) -> Result<Output> {
    let (_, dag) = load_graph(graph)?;
    let start = Instant::now();
    let exact = wstar_exact(&dag, method, Some(cap)).context("weight computation failed; try --method dp")?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let weights = to_weight_vector(&exact);
    let mut map = serde_json::Map::new();
    let mut exact_map = serde_json::Map::new();
    let mut table = String::new();
    for v in dag.nodes() {
        let label = dag.label(v).to_string();
        table += &format!("{label:<12} {:<14.10} {}\n", weights[v], exact[v.index()]);
        map.insert(label.clone(), json!(weights[v]));
        exact_map.insert(label, json!(exact[v.index()].to_string()));
    }
    let json = json!({
        "weights": map,
        "exact": exact_map,
        "metadata": {
            "method": method,
            "path_count": count_paths(&dag).to_string(),
            "runtime_ms": runtime_ms,
        },
    });
    Ok(Output::ok(json, table))
}

fn cmd_efficient(input: &LossInput, tol: Option<f64>) -> Result<Output> {
    let (dag, losses) = load_losses(input)?;
    let eff = efficient_paths(&dag, &losses, tol.unwrap_or_else(|| losses.comparison_tolerance()));
    let continuation: BTreeMap<&str, f64> = dag.nodes().map(|v| (dag.label(v), eff.continuation[v.index()])).collect();
    let mut table = format!("minimum loss {}\n", eff.min_cost);
    for p in &eff.paths {
        table += &format!("{}\n", p.display(&dag));
    }
    let paths: Vec<Value> = eff.paths.iter().map(|p| path_json(&dag, p)).collect();
    Ok(Output::ok(json!({ "min_cost": eff.min_cost, "paths": paths, "continuation": continuation }), table))
}

fn liability_entry(dag: &Dag, losses: &LossFunction, rule: &cascade_core::Rule<'_>, path: &Path) -> Result<Value> {
    let liab = rule.apply(path, losses)?;
    let by_label: BTreeMap<&str, f64> = liab.labelled(dag).collect();
    Ok(json!({ "path": path.labels(dag), "total_loss": losses.path_loss(dag, path), "liabilities": by_label }))
}

fn liability_table(dag: &Dag, entries: &[Value]) -> String {
    let mut table = format!("{:<24}{:>10}", "path", "total");
    for v in dag.nodes() {
        table += &format!("{:>10}", dag.label(v));
    }
    table.push('\n');
    for e in entries {
        let labels: Vec<&str> = e["path"].as_array().unwrap().iter().map(|l| l.as_str().unwrap()).collect();
        table += &format!("{:<24}{:>10.4}", labels.join(" -> "), e["total_loss"].as_f64().unwrap());
        for v in dag.nodes() {
            table += &format!("{:>10.4}", e["liabilities"][dag.label(v)].as_f64().unwrap());
        }
        table.push('\n');
    }
    table
}

fn cmd_liability(input: &LossInput, spec: &RuleSpec, path: Option<&str>, cap: usize) -> Result<Output> {
    let (dag, losses) = load_losses(input)?;
    let rule = make_rule(spec, &dag)?;
    let paths = match path {
        Some(text) => {
            let labels: Vec<&str> = text.split(',').map(str::trim).collect();
            vec![Path::from_labels(&dag, &labels).with_context(|| format!("`{text}` is not a source-to-sink path"))?]
        }
        None => enumerate_paths(&dag, Some(cap))
            .with_context(|| format!("too many paths for --cap-paths {cap}; pass --path"))?,
    };
    let entries = paths.iter().map(|p| liability_entry(&dag, &losses, &rule, p)).collect::<Result<Vec<_>>>()?;
    let table = liability_table(&dag, &entries);
    Ok(Output::ok(json!({ "rule": spec, "paths": entries }), table))
}

fn cmd_spe(input: &LossInput, spec: &RuleSpec, tol: Option<f64>, cap: usize) -> Result<Output> {
    let (dag, losses) = load_losses(input)?;
    let rule = make_rule(spec, &dag)?;
    let options = SolveOptions { tolerance: tol, history_cap: cap, ..SolveOptions::default() };
    let outcomes = spe_outcomes(&rule, &losses, &options).context("equilibrium search failed; raise --cap-paths")?;
    let eff = efficient_paths(&dag, &losses, tol.unwrap_or_else(|| losses.comparison_tolerance()));
    let coincide = outcomes == eff.paths;
    let mut listed: Vec<&Path> = outcomes.iter().collect();
    for p in &eff.paths {
        if !listed.contains(&p) {
            listed.push(p);
        }
    }
    let entries = listed.iter().map(|p| liability_entry(&dag, &losses, &rule, p)).collect::<Result<Vec<_>>>()?;
    let mut table = format!("rule {spec}\nequilibrium outcomes:\n");
    for p in &outcomes {
        table += &format!("  {}\n", p.display(&dag));
    }
    table += "efficient paths:\n";
    for p in &eff.paths {
        table += &format!("  {}\n", p.display(&dag));
    }
    table += &format!("coincide: {coincide}\n\n{}", liability_table(&dag, &entries));
    let json = json!({
        "rule": spec,
        "outcomes": outcomes.iter().map(|p| path_json(&dag, p)).collect::<Vec<_>>(),
        "efficient": eff.paths.iter().map(|p| path_json(&dag, p)).collect::<Vec<_>>(),
        "coincide": coincide,
        "liabilities": entries,
    });
    Ok(Output::ok(json, table))
}

fn cmd_check(args: &CheckArgs) -> Result<Output> {
    let check = match (args.axiom, args.property) {
        (Some(a), _) => Check::Axiom(a),
        (None, Some(p)) => Check::Property(p),
        (None, None) => bail!("pass --axiom or --property"),
    };
    let source = if args.rule == "fixed:random" {
        RuleSource::RandomDeciderWeights
    } else {
        RuleSource::Spec(args.rule.parse()?)
    };
    let config = CheckConfig {
        trials: args.trials,
        seed: args.seed,
        solve: SolveOptions { tolerance: args.tol, ..SolveOptions::default() },
        ..CheckConfig::default()
    };
    let loaded = args.graph.as_deref().map(load_graph).transpose()?;
    let instances: Vec<LossFunction> = match (&loaded, args.fixture, &args.losses) {
        (Some((_, dag)), Some(Fixture::Impossibility), _) => impossibility_losses(dag)?,
        (Some((_, dag)), None, Some(path)) => vec![parse_loss_map(&read(path)?, dag)?],
        (None, _, Some(_)) => bail!("--losses needs a graph"),
        _ => Vec::new(),
    };
    let target = match &loaded {
        None => Target::RandomGraphs,
        Some((_, dag)) if instances.is_empty() => Target::Graph(dag),
        Some((_, dag)) => Target::Instances(dag, &instances),
    };
    let report = axioms::check(check, &source, target, &config)?;
    let code = match report.verdict {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::NotApplicable => 2,
    };
    let mut table = format!(
        "{} under {}: {:?} ({} of {} trials passed)\n",
        report.check, report.rule, report.verdict, report.passes, report.trials_run
    );
    if let Some(note) = &report.note {
        table += &format!("note: {note}\n");
    }
    if let Some(cex) = &report.counterexample {
        table += &format!("counterexample at trial {}:\n{}\n", cex.trial, serde_json::to_string_pretty(&cex.detail)?);
    }
    Ok(Output { json: serde_json::to_value(&report)?, table, code })
}

fn cmd_simulate(
    config: Option<&FsPath>,
    out: Option<PathBuf>,
    workers: usize,
    seed: Option<u64>,
    draws: Option<usize>,
) -> Result<Output> {
    let mut cfg: SimConfig = match config {
        Some(path) => serde_json::from_str(&read(path)?).with_context(|| format!("invalid config {}", path.display()))?,
        None => SimConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(draws) = draws {
        cfg.draws = draws;
    }
    let stats = run_simulation(&cfg, workers)?;
    if let Some(dir) = out.or_else(|| cfg.output_dir.clone()) {
        write_outputs(&stats, &cfg, &dir)?;
    }
    let mut table = format!(
        "{} nodes, {} edges, {} sources x {} draws\nmean efficient loss {:.4}\n",
        stats.nodes, stats.edges, stats.sources, stats.draws_per_source, stats.mean_efficient_loss
    );
    table += &format!("{:<14}{:>12}{:>10}{:>10}{:>10}\n", "rule", "mean loss", "ratio", "edges", "gini");
    for r in &stats.per_rule {
        table += &format!(
            "{:<14}{:>12.4}{:>10.4}{:>10.4}{:>10.4}\n",
            r.rule, r.mean_realized_loss, r.realized_over_efficient, r.mean_path_edges, r.gini_mean_liability
        );
    }
    table += &format!("\n{:<8}{:>8}", "layer", "agents");
    for r in &stats.rules {
        table += &format!("{:>16}{:>16}", format!("mean {r}"), format!("sq {r}"));
    }
    table.push('\n');
    for l in &stats.layers {
        table += &format!("{:<8}{:>8}", l.layer, l.agents);
        for (m, s) in l.mean_liability.iter().zip(&l.mean_sq_liability) {
            table += &format!("{m:>16.4}{s:>16.4}");
        }
        table.push('\n');
    }
    if let Some(c) = &stats.comparison {
        table += &format!(
            "\nlower mean under {}: {}/{}; lower mean square: {}/{}\n",
            c.first, c.lower_mean_under_first, c.agents, c.lower_mean_sq_under_first, c.agents
        );
    }
    Ok(Output::ok(json!({ "config": cfg, "stats": stats }), table))
}
