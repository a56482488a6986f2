use std::fs;
use std::io::{self, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use securecast::analysis::{
    fmt_g, monte_carlo_conflict_rate, overall_conflict_bound, solve_epsilon, worker_threads, AnalysisParams,
    BoundReport, CsvTable, MonteCarloEstimate,
};
use securecast::adversary::AdversarySpec;
use securecast::protocol::ProtocolKind;
use securecast::sim::{ConfigError, InvariantChecker, SimConfig, SimWorld, TraceFile};

const EXIT_CONFIG: u8 = 1;
const EXIT_VIOLATION: u8 = 2;

#[derive(Parser)]
#[command(name = "securecast", version, about = "Secure reliable multicast simulator and analysis tool")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulated execution and print its report.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Write the event trace here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Estimate the conflict rate over many independent runs.
    Montecarlo {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Worlds run concurrently (capped by SECURECAST_THREADS).
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Print the closed-form bounds for one parameter set as CSV.
    Analyze {
        #[command(flatten)]
        params: BoundArgs,
        /// Also search for the cheapest (kappa, delta) reaching this target.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Tabulate bounds over a parameter grid as CSV.
    Sweep {
        #[command(flatten)]
        params: BoundArgs,
        /// Grid spec such as "kappa=1..6,delta=1..12" or "n=31|100".
        #[arg(long, default_value = "")]
        grid: String,
        /// Add a Monte Carlo estimate to every row.
        #[arg(long)]
        montecarlo: bool,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value = "regime-split")]
        adversary: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        parallel: Option<usize>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a trace file through the invariant checker.
    TraceCheck { path: PathBuf },
}

#[derive(Args, Clone, Default)]
struct SimArgs {
    /// key=value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long)]
    slack_c: Option<usize>,
    #[arg(long)]
    messages: Option<usize>,
    /// none, silent, crash, equivocate, collusive, regime-split or seq-burner.
    #[arg(long)]
    adversary: Option<String>,
    #[arg(long)]
    crash_at: Option<u64>,
    /// round-robin, uniform or faulty.
    #[arg(long)]
    workload: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    drop_prob: Option<f64>,
    /// Any other configuration key, as key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl SimArgs {
    fn to_config(&self) -> Result<SimConfig, ConfigError> {
        let mut text = match &self.config {
            Some(path) => fs::read_to_string(path)
                .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?,
            None => String::new(),
        };
        text.push('\n');
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                text.push_str(&format!("{k}={v}\n"));
            }
        };
        push("protocol", self.protocol.clone());
        push("n", self.n.map(|v| v.to_string()));
        push("t", self.t.map(|v| v.to_string()));
        push("kappa", self.kappa.map(|v| v.to_string()));
        push("delta", self.delta.map(|v| v.to_string()));
        push("slack_c", self.slack_c.map(|v| v.to_string()));
        push("messages", self.messages.map(|v| v.to_string()));
        push("adversary", self.adversary.clone());
        push("crash_at", self.crash_at.map(|v| v.to_string()));
        push("workload", self.workload.clone());
        push("seed", self.seed.map(|v| v.to_string()));
        push("drop_prob", self.drop_prob.map(|v| v.to_string()));
        for kv in &self.set {
            if !kv.contains('=') {
                return Err(ConfigError::new("set", format!("expected KEY=VALUE, got {kv:?}")));
            }
            text.push_str(kv);
            text.push('\n');
        }
        let config = SimConfig::from_kv(&text)?;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Clone)]
struct BoundArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    t: usize,
    #[arg(long, default_value_t = 3)]
    kappa: usize,
    /// Defaults to min(5, 3t).
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long, default_value_t = 0)]
    slack_c: usize,
}

impl BoundArgs {
    fn params(&self) -> AnalysisParams {
        AnalysisParams {
            n: self.n,
            t: self.t,
            kappa: self.kappa,
            delta: self.delta.unwrap_or(5.min(3 * self.t)),
            slack_c: self.slack_c,
            epsilon: None,
        }
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Simulate { sim, trace_out } => simulate(&sim, trace_out),
        Command::Montecarlo { sim, trials, parallel } => montecarlo(&sim, trials, parallel),
        Command::Analyze { params, epsilon } => analyze(&params, epsilon),
        Command::Sweep { params, grid, montecarlo, trials, adversary, seed, parallel, out } => {
            let mc = montecarlo.then_some(SweepMc { trials, adversary, seed, parallel });
            sweep(&params, &grid, mc, out)
        }
        Command::TraceCheck { path } => trace_check(&path),
    }
}

fn simulate(sim: &SimArgs, trace_out: Option<PathBuf>) -> ExitCode {
    let mut config = match sim.to_config() {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    config.record_trace |= trace_out.is_some();
    let protocol = config.protocol;
    let mut world = match SimWorld::build(config) {
        Ok(w) => w,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let report = world.run_and_report();
    if let Some(path) = trace_out {
        let written = fs::File::create(&path).and_then(|f| {
            let mut w = io::BufWriter::new(f);
            world.write_trace(&mut w)?;
            w.flush()
        });
        if let Err(e) = written {
            return fail(EXIT_CONFIG, format!("trace_out: cannot write {}: {e}", path.display()));
        }
    }
    print!("{}", report.summary());
    if !report.quiescent {
        eprintln!("warning: run stopped at max_ticks before quiescence");
    }
    let conflict_violation = protocol.has_absolute_agreement() && report.conflicts > 0;
    if conflict_violation || !report.violations.is_empty() {
        return ExitCode::from(EXIT_VIOLATION);
    }
    ExitCode::SUCCESS
}

fn conflict_bound(config: &SimConfig) -> f64 {
    if config.protocol != ProtocolKind::Act {
        return 0.0;
    }
    let params = AnalysisParams { n: config.n, t: config.t, kappa: config.kappa, delta: config.delta, slack_c: 0, epsilon: None };
    overall_conflict_bound(&params).specific
}

fn verdict(config: &SimConfig, est: &MonteCarloEstimate, bound: f64) -> bool {
    let within = if config.protocol == ProtocolKind::Act { est.passes(bound) } else { est.conflicts == 0 };
    within && est.violations == 0
}

const MC_COLUMNS: [&str; 9] =
    ["trials", "attacked", "conflicts", "estimate", "ci_low", "ci_high", "bound", "violations", "verdict"];

fn mc_cells(est: &MonteCarloEstimate, bound: f64, pass: bool) -> Vec<String> {
    vec![
        est.trials.to_string(),
        est.attacked.to_string(),
        est.conflicts.to_string(),
        fmt_g(est.estimate),
        fmt_g(est.ci_low),
        fmt_g(est.ci_high),
        fmt_g(bound),
        est.violations.to_string(),
        if pass { "PASS" } else { "FAIL" }.to_string(),
    ]
}

fn montecarlo(sim: &SimArgs, trials: usize, parallel: Option<usize>) -> ExitCode {
    let config = match sim.to_config() {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let est = match monte_carlo_conflict_rate(&config, trials, worker_threads(parallel)) {
        Ok(e) => e,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let bound = conflict_bound(&config);
    if config.protocol == ProtocolKind::Act && config.adversary != AdversarySpec::None {
        if let Some(w) = est.insufficient_trials(bound) {
            eprintln!("{w}");
        }
    }
    let pass = verdict(&config, &est, bound);
    let mut table = CsvTable::new(["protocol", "n", "t", "kappa", "delta", "adversary"].into_iter().chain(MC_COLUMNS));
    let mut row = vec![
        config.protocol.to_string(),
        config.n.to_string(),
        config.t.to_string(),
        config.kappa.to_string(),
        config.delta.to_string(),
        config.adversary.to_string(),
    ];
    row.extend(mc_cells(&est, bound, pass));
    table.push(row);
    print!("{}", table.render());
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VIOLATION)
    }
}

fn analyze(args: &BoundArgs, epsilon: Option<f64>) -> ExitCode {
    let params = args.params();
    let report = match BoundReport::compute(&params) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let mut table = CsvTable::new(BoundReport::CSV_HEADER);
    table.push(report.csv_row());
    print!("{}", table.render());
    if let Some(eps) = epsilon {
        match solve_epsilon(params.n, params.t, eps) {
            Ok((kappa, delta)) => {
                let solved = AnalysisParams { kappa, delta, ..params };
                let mut t = CsvTable::new(["epsilon", "kappa", "delta", "overall_conflict", "accesses"]);
                t.push(vec![
                    fmt_g(eps),
                    kappa.to_string(),
                    delta.to_string(),
                    fmt_g(overall_conflict_bound(&solved).specific),
                    (kappa * (delta + 1)).to_string(),
                ]);
                print!("\n{}", t.render());
            }
            Err(e) => return fail(EXIT_CONFIG, e),
        }
    }
    ExitCode::SUCCESS
}

struct SweepMc {
    trials: usize,
    adversary: String,
    seed: u64,
    parallel: Option<usize>,
}

const GRID_KEYS: [&str; 5] = ["n", "t", "kappa", "delta", "slack_c"];

fn parse_values(key: &str, spec: &str) -> Result<Vec<usize>, String> {
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| format!("grid: bad number {s:?} for {key}"));
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        return Ok((a..=b).collect());
    }
    spec.split('|').map(num).collect()
}

fn parse_grid(spec: &str) -> Result<Vec<(&'static str, Vec<usize>)>, String> {
    let mut axes = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("grid: expected key=values, got {part:?}"))?;
        let key = GRID_KEYS
            .into_iter()
            .find(|g| *g == k.trim().replace('-', "_"))
            .ok_or_else(|| format!("grid: unknown key {:?}, expected one of {}", k.trim(), GRID_KEYS.join(", ")))?;
        axes.push((key, parse_values(key, v)?));
    }
    Ok(axes)
}

fn grid_points(base: &AnalysisParams, axes: &[(&str, Vec<usize>)]) -> Vec<AnalysisParams> {
    if axes.is_empty() {
        return Vec::new();
    }
    let mut points = vec![base.clone()];
    for (key, values) in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    match *key {
                        "n" => q.n = v,
                        "t" => q.t = v,
                        "kappa" => q.kappa = v,
                        "delta" => q.delta = v,
                        _ => q.slack_c = v,
                    }
                    q
                })
            })
            .collect();
    }
    points
}

fn sweep(args: &BoundArgs, grid: &str, mc: Option<SweepMc>, out: Option<PathBuf>) -> ExitCode {
    let axes = match parse_grid(grid) {
        Ok(a) => a,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let mut header: Vec<&str> = BoundReport::CSV_HEADER.to_vec();
    if mc.is_some() {
        header.extend(MC_COLUMNS);
    }
    let mut table = CsvTable::new(header);
    let mut skipped = 0;
    let mut failed = false;
    for params in grid_points(&args.params(), &axes) {
        let report = match BoundReport::compute(&params) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("skipping n={} t={} kappa={} delta={} C={}: {e}", params.n, params.t, params.kappa, params.delta, params.slack_c);
                skipped += 1;
                continue;
            }
        };
        let mut row = report.csv_row();
        if let Some(mc) = &mc {
            let mut config = SimConfig::act(params.n, params.t, params.kappa, params.delta);
            config.slack_c = params.slack_c;
            config.seed = mc.seed;
            config.workload = securecast::sim::Workload::Faulty;
            if let Err(e) = config.set("adversary", &mc.adversary) {
                return fail(EXIT_CONFIG, e);
            }
            let est = match monte_carlo_conflict_rate(&config, mc.trials, worker_threads(mc.parallel)) {
                Ok(e) => e,
                Err(e) => {
                    eprintln!("skipping n={} t={} kappa={} delta={}: {e}", params.n, params.t, params.kappa, params.delta);
                    skipped += 1;
                    continue;
                }
            };
            let bound = report.overall_conflict.specific;
            let pass = verdict(&config, &est, bound);
            failed |= !pass;
            row.extend(mc_cells(&est, bound, pass));
        }
        table.push(row);
    }
    if skipped > 0 {
        eprintln!("{skipped} grid points skipped");
    }
    let text = table.render();
    match out {
        Some(path) => {
            if let Err(e) = fs::write(&path, text) {
                return fail(EXIT_CONFIG, format!("out: cannot write {}: {e}", path.display()));
            }
        }
        None => print!("{text}"),
    }
    if failed {
        ExitCode::from(EXIT_VIOLATION)
    } else {
        ExitCode::SUCCESS
    }
}

fn trace_check(path: &PathBuf) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, format!("cannot read {}: {e}", path.display())),
    };
    let file = match TraceFile::parse(&text) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", path.display())),
    };
    let header = |key: &str| file.header_value(key).ok_or_else(|| format!("{}: header lacks {key}", path.display()));
    let setup = (|| {
        let n: usize = header("n")?.parse().map_err(|_| "bad n in header".to_string())?;
        let kind = ProtocolKind::parse(header("protocol")?).ok_or("bad protocol in header")?;
        let faulty = header("faulty")?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<u32>().map(securecast::ProcessId).map_err(|_| format!("bad faulty entry {s:?}")))
            .collect::<Result<_, String>>()?;
        Ok::<_, String>((n, kind, faulty))
    })();
    let (n, kind, faulty) = match setup {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let mut checker = InvariantChecker::new(n, kind, faulty);
    for (_, record) in &file.records {
        checker.observe(record);
    }
    let summary = checker.finish();
    println!("records: {}", file.records.len());
    println!("conflicts: {}", summary.conflicts.len());
    if summary.quiescent != Some(true) {
        println!("note: trace does not end quiescent, liveness checks skipped");
    }
    if summary.violations.is_empty() {
        println!("ok");
        return ExitCode::SUCCESS;
    }
    for v in &summary.violations {
        match v.record.and_then(|i| file.records.get(i)) {
            Some((line, _)) => println!("line {line}: {v}"),
            None => println!("end of trace: {v}"),
        }
    }
    ExitCode::from(EXIT_VIOLATION)
}
