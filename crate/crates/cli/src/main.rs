use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use relzk::coding::gen_yes_instance;
use relzk::harness::{
    self, bench_csv, bench_histograms, median, obtain_instance, summarize, write_json, write_report, ConfigFile,
    InstanceSource, NoInstanceSize, ScenarioPreset,
};
use relzk::params::{self, SecurityPlan};
use relzk::stern::ProverStrategy;
use relzk::transport::net::{run_role, NetOptions, RoleOutcome};
use relzk::transport::sim::{ComputeModel, LinkSpec, SimOptions};
use relzk::transport::{light_time_ns, ProtocolConfig, Role, Seeds, SessionReport};

/// Exit status for a rejected session.
const EXIT_REJECTED: u8 = 1;
/// Exit status for errors.
const EXIT_ERROR: u8 = 2;
/// Exit status when a saved report's stored decision does not reproduce.
const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(name = "relzk", version, about = "Relativistic zero-knowledge proofs for syndrome decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one role, or all four, of a proving session.
    Run(RunArgs),
    /// Compute a parameter set and its security bounds.
    Plan(PlanArgs),
    /// Measure phase computation and loopback round-trip times.
    Bench(BenchArgs),
    /// Re-check a saved session report.
    VerifyReport {
        /// Path to a session report JSON file.
        file: PathBuf,
    },
    /// Write a planted instance and its witness as JSON.
    GenInstance(GenArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RoleArg {
    All,
    P1,
    P2,
    V1,
    V2,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ComputeArg {
    Zero,
    Measured,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "all")]
    role: RoleArg,
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the in-process simulated channel (requires --role all).
    #[arg(long)]
    sim: bool,
    #[arg(long)]
    preset: Option<ScenarioPreset>,
    /// honest, cheat_fixed_fail(c), cheat_rotating, abort_rate(x), spooky_relay.
    #[arg(long)]
    adversary: Option<ProverStrategy>,
    /// Derives every shared seed and the channel randomness.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "relzk-out")]
    out_dir: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    w: Option<usize>,
    /// Field exponent: Q = 2^q - 1.
    #[arg(long)]
    q: Option<u32>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Use a certified NO instance of the given size class.
    #[arg(long)]
    no_instance: Option<NoInstanceSize>,
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    witness: Option<PathBuf>,
    /// Simulated one-way delay between each verifier and its prover.
    #[arg(long, default_value_t = 0.0)]
    delay_us: f64,
    #[arg(long, default_value_t = 0.0)]
    jitter_us: f64,
    /// Simulated per-frame loss probability between verifiers and provers.
    #[arg(long, default_value_t = 0.0)]
    drop_prob: f64,
    #[arg(long, value_enum, default_value = "zero")]
    compute: ComputeArg,
    #[arg(long, default_value_t = 10_000)]
    connect_timeout_ms: u64,
    /// Histogram bucket width.
    #[arg(long, default_value_t = 10)]
    bucket_us: u64,
}

#[derive(Args)]
struct PlanArgs {
    /// Target security in bits.
    #[arg(long, default_value_t = 100.0)]
    target: f64,
    #[arg(long, default_value_t = 0.001)]
    p_loss: f64,
    /// Minimum ratio between the loss allowance F/R and p_loss.
    #[arg(long, default_value_t = 2.0)]
    margin: f64,
    /// Evaluate at this R instead of searching (requires --failures).
    #[arg(long, requires = "failures")]
    rounds: Option<u64>,
    #[arg(long, requires = "rounds")]
    failures: Option<u64>,
    /// Print only JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated code lengths.
    #[arg(long, value_delimiter = ',', default_value = "1704")]
    n: Vec<usize>,
    /// Field exponent; chosen per n when absent.
    #[arg(long)]
    q: Option<u32>,
    #[arg(long, default_value_t = 1000)]
    rounds: u32,
    #[arg(long, default_value_t = 10)]
    bucket_us: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "relzk-bench")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1704)]
    n: usize,
    #[arg(long, default_value_t = 769)]
    k: usize,
    #[arg(long, default_value_t = 216)]
    w: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Bench(a) => cmd_bench(a),
        Command::VerifyReport { file } => cmd_verify(&file),
        Command::GenInstance(a) => cmd_gen(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn resolve_config(a: &RunArgs) -> Result<(ProtocolConfig, InstanceSource)> {
    let file = match &a.config {
        Some(p) => ConfigFile::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ConfigFile::default(),
    };
    let no_instance = a.no_instance.or(file.no_instance);
    let mut c = ConfigFile { no_instance, ..file.clone() }.resolve()?;
    if let Some(p) = a.preset {
        c = p.apply(c);
    }
    if let Some(s) = a.seed {
        c.seeds = Seeds::from_u64(s);
    }
    if let Some(adv) = a.adversary {
        c.adversary = adv;
    }
    macro_rules! set {
        ($($arg:ident => $field:ident),*) => { $(if let Some(v) = a.$arg { c.$field = v; })* };
    }
    set!(n => n, k => k, w => w, q => q_exponent, rounds => rounds, lambda => lambda);
    c.validate()?;

    let instance = a.instance.clone().or(file.instance);
    let witness = a.witness.clone().or(file.witness);
    let source = match (instance, no_instance) {
        (Some(instance), _) => InstanceSource::Files { instance, witness },
        (None, Some(_)) => InstanceSource::GenerateNo,
        (None, None) => InstanceSource::GenerateYes,
    };
    Ok((c, source))
}

fn role_of(a: &RunArgs, config_role: Option<&str>) -> Result<RoleArg> {
    if a.role != RoleArg::All {
        return Ok(a.role);
    }
    Ok(match config_role {
        None | Some("all") => RoleArg::All,
        Some(r) => match r.parse::<Role>().map_err(|e| anyhow!(e))? {
            Role::P1 => RoleArg::P1,
            Role::P2 => RoleArg::P2,
            Role::V1 => RoleArg::V1,
            Role::V2 => RoleArg::V2,
        },
    })
}

fn us_to_ns(us: f64) -> i64 {
    (us * 1e3).round() as i64
}

fn report_exit(report: &SessionReport) -> u8 {
    if report.accepted {
        0
    } else {
        EXIT_REJECTED
    }
}

fn cmd_run(a: RunArgs) -> Result<u8> {
    let (config, source) = resolve_config(&a)?;
    let config_role = match &a.config {
        Some(p) => ConfigFile::load(p)?.role,
        None => None,
    };
    let role = role_of(&a, config_role.as_deref())?;

    if a.sim {
        if role != RoleArg::All {
            bail!("--sim runs all four roles; use --role all");
        }
        let link = LinkSpec {
            delay_ns: us_to_ns(a.delay_us),
            jitter_ns: us_to_ns(a.jitter_us),
            drop_prob: a.drop_prob,
        };
        // the provers sit as far apart as the verifiers and signal no faster than light
        let opts = SimOptions {
            verifier_prover: link,
            prover_prover: LinkSpec::fixed(light_time_ns(config.d_km).ceil() as i64),
            compute: match a.compute {
                ComputeArg::Zero => ComputeModel::Zero,
                ComputeArg::Measured => ComputeModel::Measured,
            },
            seed: a.seed.unwrap_or(0),
            ..SimOptions::default()
        };
        let out = harness::simulate(&config, &source, &opts)?;
        write_report(&out.report, &a.out_dir, "", a.bucket_us)?;
        println!("{}", summarize(&out.report));
        println!("per-round win rate {:.4}", out.report.pass_rate());
        println!("report written to {}", a.out_dir.display());
        return Ok(report_exit(&out.report));
    }

    let opts = NetOptions {
        connect_timeout: Duration::from_millis(a.connect_timeout_ms),
        ..NetOptions::default()
    };
    let (instance, witness) = obtain_instance(&config, &source)?;
    let witness = if config.adversary.needs_witness() || config.adversary.relays() {
        witness
    } else {
        None
    };
    let roles: Vec<Role> = match role {
        RoleArg::All => Role::ALL.to_vec(),
        RoleArg::P1 => vec![Role::P1],
        RoleArg::P2 => vec![Role::P2],
        RoleArg::V1 => vec![Role::V1],
        RoleArg::V2 => vec![Role::V2],
    };
    let handles: Vec<_> = roles
        .into_iter()
        .map(|r| {
            let (config, instance, opts) = (config.clone(), Arc::clone(&instance), opts.clone());
            let witness = if r.is_verifier() { None } else { witness.clone() };
            (r, thread::spawn(move || run_role(r, &config, instance, witness, &opts)))
        })
        .collect();
    let mut code = 0u8;
    for (r, h) in handles {
        let outcome = h.join().map_err(|_| anyhow!("{r} panicked"))?.with_context(|| format!("role {r}"))?;
        match outcome {
            RoleOutcome::Verifier(report) => {
                write_report(&report, &a.out_dir, &format!("{r}_"), a.bucket_us)?;
                println!("{r}: {}", summarize(&report));
                code = code.max(report_exit(&report));
            }
            RoleOutcome::Prover { answered } => println!("{r}: completed, answered {answered} rounds"),
        }
    }
    Ok(code)
}

fn print_plan(plan: &SecurityPlan, json: bool) -> Result<()> {
    if !json {
        println!("{plan}");
        println!();
    }
    println!("{}", serde_json::to_string_pretty(plan)?);
    Ok(())
}

fn cmd_plan(a: PlanArgs) -> Result<u8> {
    let planned = params::plan(a.target, a.p_loss, a.margin)?;
    let plan = match (a.rounds, a.failures) {
        (Some(r), Some(f)) => SecurityPlan::evaluate(planned.n, planned.k, planned.w, planned.q_exponent, r, f, a.p_loss)?,
        _ => planned,
    };
    print_plan(&plan, a.json)?;
    Ok(0)
}

fn cmd_bench(a: BenchArgs) -> Result<u8> {
    let rows = harness::bench(&a.n, a.q, a.rounds, a.seed)?;
    std::fs::create_dir_all(&a.out_dir)?;
    std::fs::write(a.out_dir.join("bench.csv"), bench_csv(&rows))?;
    for &n in &a.n {
        let of_n: Vec<_> = rows.iter().filter(|r| r.n == n).cloned().collect();
        let (h1, h2) = bench_histograms(&of_n, a.bucket_us);
        std::fs::write(a.out_dir.join(format!("phase1_hist_n{n}.csv")), h1)?;
        std::fs::write(a.out_dir.join(format!("phase2_hist_n{n}.csv")), h2)?;
        let mut c1: Vec<i64> = of_n.iter().map(|r| r.phase1_compute_ns).collect();
        let mut t1: Vec<i64> = of_n.iter().map(|r| r.phase1_total_ns).collect();
        let mut t2: Vec<i64> = of_n.iter().map(|r| r.phase2_total_ns).collect();
        let max_c1 = c1.iter().copied().max().unwrap_or(0);
        println!(
            "n={n} q={} rounds={}: phase1 compute median {:.1} us (max {:.1} us), phase1 loopback median {:.1} us, phase2 loopback median {:.1} us",
            of_n.first().map_or(0, |r| r.q_exponent),
            of_n.len(),
            median(&mut c1) as f64 / 1e3,
            max_c1 as f64 / 1e3,
            median(&mut t1) as f64 / 1e3,
            median(&mut t2) as f64 / 1e3,
        );
    }
    println!("bench output written to {}", a.out_dir.display());
    Ok(0)
}

fn cmd_verify(file: &Path) -> Result<u8> {
    let stored = harness::load_report(file).with_context(|| format!("loading {}", file.display()))?;
    let fresh = stored.recheck()?;
    println!("{}", summarize(&fresh));
    let same = fresh.accepted == stored.accepted
        && fresh.f_observed == stored.f_observed
        && fresh.rounds.iter().zip(&stored.rounds).all(|(a, b)| a.verdict == b.verdict && a.timing_ok == b.timing_ok);
    if !same {
        eprintln!("stored decision does not match the recomputed one");
        return Ok(EXIT_MISMATCH);
    }
    println!("stored decision reproduced");
    Ok(report_exit(&fresh))
}

fn cmd_gen(a: GenArgs) -> Result<u8> {
    let seeds = Seeds::from_u64(a.seed);
    let mut rng = seeds.instance.rng("instance", 0, 0);
    let (instance, witness) = gen_yes_instance(a.n, a.k, a.w, &mut rng)?;
    std::fs::create_dir_all(&a.out_dir)?;
    write_json(&a.out_dir.join("instance.json"), &instance.to_file())?;
    write_json(&a.out_dir.join("witness.json"), &witness.to_file())?;
    println!("wrote instance.json and witness.json to {}", a.out_dir.display());
    Ok(0)
}
