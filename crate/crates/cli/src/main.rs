use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use ecpp_core::bench::{parse_sweep, run_bench, BenchCell, BenchPlan};
use ecpp_core::svg::write_svg;
use ecpp_core::{check_layout, global_search, make_schedule, Instance, LayoutFile, RadiusTable, SearchConfig};

const FEASIBLE: u8 = 0;
const ERROR: u8 = 1;
const INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(name = "ecpp", version, about = "Pack n unit circles into a circular container")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for an overlap-free layout.
    Solve(SolveArgs),
    /// Verify a layout file against the packing constraints.
    Check {
        layout: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Draw a layout file as SVG.
    Render {
        layout: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded batch runs with hit-count summaries.
    Bench(BenchArgs),
    /// Print the group-size schedule used for `n` circles.
    Schedule {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        s0: usize,
        #[arg(long, default_value_t = 10)]
        k0: usize,
    },
}

#[derive(Args, Clone)]
struct Tuning {
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    #[arg(long, default_value_t = 0.03)]
    beta: f64,
    /// Candidate layouts per hop.
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    s0: usize,
    #[arg(long, default_value_t = 10)]
    k0: usize,
    /// Iteration cap of each local BFGS call.
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
}

impl Tuning {
    fn config(&self, seed: u64, time_limit: f64) -> anyhow::Result<SearchConfig> {
        if !(time_limit >= 0.0) || !time_limit.is_finite() {
            bail!("time limit must be a non-negative number of seconds");
        }
        let config = SearchConfig {
            alpha: self.alpha,
            beta: self.beta,
            m: self.m,
            s0: self.s0,
            k0: self.k0,
            seed,
            time_limit: Duration::from_secs_f64(time_limit),
            max_iter: self.max_iter,
            ..SearchConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    n: usize,
    /// Container radius; looked up from the bundled table when omitted.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wall-clock budget in seconds.
    #[arg(long, default_value_t = 900.0)]
    time_limit: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct BenchArgs {
    /// `N` or `N:R`; the radius comes from the bundled table when omitted.
    #[arg(long = "instance")]
    instances: Vec<String>,
    /// Number of seeds, numbered from --first-seed.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 1)]
    first_seed: u64,
    /// Per-run wall-clock budget in seconds.
    #[arg(long, default_value_t = 900.0)]
    time_limit: f64,
    /// Multiplies every radius (e.g. 1.005 for a relaxed container).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Vary the initial group size as `from:to:step`.
    #[arg(long)]
    sweep_group_size: Option<String>,
    /// Concurrent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also append records to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
}

fn radius_for(n: usize, given: Option<f64>) -> anyhow::Result<f64> {
    match given {
        Some(r) => Ok(r),
        None => RadiusTable::lookup(n)
            .ok_or_else(|| anyhow!("no bundled radius for n = {n}; pass --radius")),
    }
}

fn solve(args: SolveArgs) -> anyhow::Result<u8> {
    let radius = radius_for(args.n, args.radius)?;
    let instance = Instance::new(args.n, radius)?;
    let config = args.tuning.config(args.seed, args.time_limit)?;
    let outcome = global_search(&instance, &config)?;
    LayoutFile::new(outcome.layout.clone(), radius).write(&args.out)?;
    if let Some(svg) = &args.svg {
        write_svg(&outcome.layout, radius, svg)?;
    }
    println!(
        "n={} R={} seed={} feasible={} energy={:e} hops={} sidm_calls={} seconds={:.3}",
        args.n,
        radius,
        args.seed,
        outcome.feasible,
        outcome.energy,
        outcome.hops_executed,
        outcome.sidm_calls,
        outcome.elapsed.as_secs_f64()
    );
    Ok(if outcome.feasible { FEASIBLE } else { INFEASIBLE })
}

fn check(path: PathBuf, tolerance: f64) -> anyhow::Result<u8> {
    let file = LayoutFile::read(&path)?;
    let report = check_layout(&file.layout, file.radius);
    let ok = report.passes(tolerance);
    println!("n\t{}", report.n);
    println!("radius\t{}", report.radius);
    println!("max_pair_violation\t{:e}", report.max_pair_violation);
    println!("max_container_violation\t{:e}", report.max_container_violation);
    println!("total_energy\t{:e}", report.total_energy);
    println!("feasible\t{ok}");
    Ok(if ok { FEASIBLE } else { INFEASIBLE })
}

fn parse_instance(spec: &str) -> anyhow::Result<(usize, f64)> {
    let (n, radius) = match spec.split_once(':') {
        Some((n, r)) => (n, Some(r.parse::<f64>().with_context(|| format!("bad radius in {spec:?}"))?)),
        None => (spec, None),
    };
    let n: usize = n.parse().with_context(|| format!("bad circle count in {spec:?}"))?;
    Ok((n, radius_for(n, radius)?))
}

fn bench(args: BenchArgs) -> anyhow::Result<u8> {
    let base = args.tuning.config(0, args.time_limit)?;
    let group_sizes = match &args.sweep_group_size {
        Some(spec) => parse_sweep(spec)?,
        None => vec![args.tuning.s0],
    };
    let mut cells = Vec::new();
    for spec in &args.instances {
        let (n, radius) = parse_instance(spec)?;
        for &s0 in &group_sizes {
            cells.push(BenchCell {
                n,
                radius: radius * args.scale,
                s0,
            });
        }
    }
    let plan = BenchPlan {
        cells,
        seeds: (args.first_seed..args.first_seed + args.seeds).collect(),
        time_limit: base.time_limit,
        jobs: args.jobs,
    };
    let mut log = match &args.out {
        Some(path) => Some(
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .with_context(|| format!("opening {}", path.display()))?,
        ),
        None => None,
    };
    let stdout = std::io::stdout();
    let mut io_error = None;
    let summaries = run_bench(&plan, &base, |record| {
        let line = record.to_tsv();
        let mut out = stdout.lock();
        let _ = writeln!(out, "{line}");
        if let Some(reason) = &record.failure {
            let _ = writeln!(out, "# failed\tn={}\tseed={}\t{reason}", record.n, record.seed);
        }
        let _ = out.flush();
        if let Some(file) = log.as_mut() {
            if let Err(e) = writeln!(file, "{line}") {
                io_error.get_or_insert(e);
            }
        }
    });
    for summary in &summaries {
        println!("{summary}");
    }
    if let Some(e) = io_error {
        bail!("writing bench log: {e}");
    }
    Ok(FEASIBLE)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Solve(args) => solve(args),
        Command::Check { layout, tolerance } => check(layout, tolerance),
        Command::Render { layout, out } => {
            let file = LayoutFile::read(&layout)?;
            write_svg(&file.layout, file.radius, &out)?;
            Ok(FEASIBLE)
        }
        Command::Bench(args) => bench(args),
        Command::Schedule { n, s0, k0 } => {
            let schedule = make_schedule(n, s0, k0)?;
            println!("round\tgroup_size\trepetitions\tgroups");
            for (i, round) in schedule.rounds().iter().enumerate() {
                println!("{i}\t{}\t{}\t{}", round.group_size, round.repetitions, n / round.group_size);
            }
            Ok(FEASIBLE)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ERROR } else { FEASIBLE };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(ERROR)
        }
    }
}
