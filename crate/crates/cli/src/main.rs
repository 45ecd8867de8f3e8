use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use optcast_core::format::{parse_capacity, parse_graph, parse_scenario, write_scenario, ParsedScenario};
use optcast_core::oracle::{max_broadcast_rate_cut, max_broadcast_rate_neighbor};
use optcast_core::{
    edge_capacitated, gen_random_dag, node_capacitated, reports_to_csv, run_fluid, run_packet_sim, size_sweep,
    times_increasing, CapacityModel, Convergence, FluidConfig, LogUtility, OverlayGraph, PacketSimConfig, Setting,
    StepParams, SweepConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sides above this need `--large`.
const DESK_SIDE_LIMIT: usize = 25;

#[derive(Parser)]
#[command(name = "optcast", version, about = "Broadcast rate maximization on acyclic overlays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a grid scenario file.
    GenGrid {
        #[arg(long)]
        side: usize,
        #[arg(long, value_parser = parse_setting)]
        setting: Setting,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the maximum broadcast rate from both oracles.
    Solve { scenario: PathBuf },
    /// Run the fluid dynamics until convergence or the slot limit.
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value_t = 200_000)]
        max_slots: usize,
        #[arg(long, default_value_t = 0.02)]
        eps: f64,
        #[arg(long, default_value_t = 200)]
        window: usize,
        /// Trajectory CSV output.
        #[arg(long)]
        traj: Option<PathBuf>,
        #[arg(long)]
        allow_nonconverged: bool,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Push packets over the rates of a fluid run or of the oracle optimum.
    PacketSim {
        scenario: PathBuf,
        /// Use the time-averaged rates of a fluid run instead of the oracle optimum.
        #[arg(long)]
        from_fluid: bool,
        #[arg(long, default_value_t = 4000)]
        slots: usize,
        /// Source rate; defaults to the oracle optimum.
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long, default_value_t = 200_000)]
        max_slots: usize,
        /// Seed for random tie-breaking among equally rare packets.
        #[arg(long)]
        tie_seed: Option<u64>,
        /// Per-node CSV output.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Check that both oracles agree, on random DAGs or on given files.
    Verify {
        /// A scenario file, or a graph file followed by a capacity file.
        files: Vec<PathBuf>,
        #[arg(long)]
        random_dags: Option<usize>,
        #[arg(long, default_value_t = 8)]
        max_nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convergence times of one setting over several grid sides.
    Sweep {
        #[arg(long, value_parser = parse_setting)]
        setting: Setting,
        #[arg(long, value_delimiter = ',', default_value = "5,15")]
        sides: Vec<usize>,
        #[arg(long, default_value_t = 200_000)]
        max_slots: usize,
        #[arg(long, default_value_t = 0.02)]
        eps: f64,
        #[arg(long, default_value_t = 200)]
        window: usize,
        /// Allow sides above 25; side 105 can take hours.
        #[arg(long)]
        large: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
    },
}

#[derive(Args, Default)]
struct ParamArgs {
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    zfloor: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    zcap: Option<f64>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<StepParams> {
        let d = StepParams::default();
        let p = StepParams {
            alpha: self.alpha.unwrap_or(d.alpha),
            gamma: self.gamma.unwrap_or(d.gamma),
            beta: self.beta.unwrap_or(d.beta),
            sigma: self.sigma.unwrap_or(d.sigma),
            dt: self.dt.unwrap_or(d.dt),
            z_floor: self.zfloor.unwrap_or(d.z_floor),
            z_cap: self.zcap.or(d.z_cap),
            ..d
        };
        p.validate()?;
        Ok(p)
    }
}

fn parse_setting(s: &str) -> std::result::Result<Setting, String> {
    match s {
        "1" => Ok(Setting::One),
        "2" => Ok(Setting::Two),
        _ => Err(format!("setting must be 1 or 2, got `{s}`")),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load(path: &Path) -> Result<(OverlayGraph, CapacityModel)> {
    let ParsedScenario { graph, model, .. } =
        parse_scenario(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let model = model.with_context(|| format!("{} has no capacity lines", path.display()))?;
    Ok((graph, model))
}

fn oracle_line(g: &OverlayGraph, m: &CapacityModel) -> Result<(String, bool)> {
    let cut = max_broadcast_rate_cut(g, m)?.rate;
    let neighbor = max_broadcast_rate_neighbor(g, m)?.rate;
    let agree = (cut - neighbor).abs() <= 1e-6 * cut.abs().max(1.0);
    Ok((format!("B_cut={cut} B_neighbor={neighbor} agree={agree}"), agree))
}

fn verify_random(count: usize, max_nodes: usize, seed: u64) -> Result<bool> {
    if max_nodes < 2 {
        bail!("--max-nodes must be at least 2");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disagreements = 0;
    for i in 0..count {
        let n = rng.gen_range(2..=max_nodes);
        let g = gen_random_dag(n, rng.gen_range(0.2..0.8), rng.gen())?;
        let m = if i % 2 == 0 {
            let caps = g.edge_ids().map(|e| (e, rng.gen_range(0.1..=10.0))).collect::<BTreeMap<_, _>>();
            edge_capacitated(&g, &caps)?
        } else {
            let caps = g
                .nodes()
                .filter(|&v| g.out_degree(v) > 0)
                .map(|v| (v, rng.gen_range(0.1..=10.0)))
                .collect::<BTreeMap<_, _>>();
            node_capacitated(&g, &caps)?
        };
        let (line, agree) = oracle_line(&g, &m)?;
        println!("instance={i} nodes={n} edges={} {line}", g.edge_count());
        disagreements += usize::from(!agree);
    }
    println!("instances={count} disagreements={disagreements}");
    Ok(disagreements == 0)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenGrid { side, setting, output } => {
            let s = setting.scenario(side)?;
            write(&output, &write_scenario(&s.graph, s.layout.as_ref(), &s.model))?;
            println!(
                "{}: {} nodes, {} edges -> {}",
                s.label,
                s.graph.node_count(),
                s.graph.edge_count(),
                output.display()
            );
        }
        Command::Solve { scenario } => {
            let (g, m) = load(&scenario)?;
            println!("{}", oracle_line(&g, &m)?.0);
        }
        Command::Simulate { scenario, max_slots, eps, window, traj, allow_nonconverged, params } => {
            let (g, m) = load(&scenario)?;
            let params = params.resolve()?;
            let b = max_broadcast_rate_cut(&g, &m)?.rate;
            let convergence = Convergence { reference: b, eps_rel: eps, window };
            let t = run_fluid(&g, &m, &params, &LogUtility, &FluidConfig::new(max_slots, Some(convergence)))?;
            if let Some(path) = traj {
                write(&path, &t.to_csv())?;
            }
            let at = t.convergence_slot.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
            println!("{} convergence_slot={at} reference={b}", t.summary_line());
            if !t.converged && !allow_nonconverged {
                eprintln!("error: no convergence within {max_slots} slots");
                return Ok(ExitCode::from(2));
            }
        }
        Command::PacketSim { scenario, from_fluid, slots, rate, max_slots, tie_seed, output, params } => {
            let (g, m) = load(&scenario)?;
            let optimum = max_broadcast_rate_cut(&g, &m)?;
            let rates = if from_fluid {
                let config = FluidConfig::new(max_slots, Some(Convergence::new(optimum.rate)));
                let t = run_fluid(&g, &m, &params.resolve()?, &LogUtility, &config)?;
                println!("fluid: {}", t.summary_line());
                t.mean_rates
            } else {
                optimum.rates
            };
            let config = PacketSimConfig { random_ties: tie_seed, ..PacketSimConfig::new(slots) };
            let report = run_packet_sim(&g, &rates, rate.unwrap_or(optimum.rate), &config)?;
            if let Some(path) = output {
                write(&path, &report.to_csv())?;
            }
            println!(
                "worst_ratio={} min_cut={} invalid_rate={} invariant_violations={}",
                report.worst_ratio(&g),
                report.min_cut,
                report.invalid_rate,
                report.invariants.total()
            );
        }
        Command::Verify { files, random_dags, max_nodes, seed } => {
            let agree = match (random_dags, files.as_slice()) {
                (Some(k), []) => verify_random(k, max_nodes, seed)?,
                (None, [scenario]) => {
                    let (g, m) = load(scenario)?;
                    let (line, agree) = oracle_line(&g, &m)?;
                    println!("{line}");
                    agree
                }
                (None, [graph, capacity]) => {
                    let g = parse_graph(&read(graph)?).with_context(|| format!("parsing {}", graph.display()))?;
                    let m = parse_capacity(&g, &read(capacity)?)
                        .with_context(|| format!("parsing {}", capacity.display()))?;
                    let (line, agree) = oracle_line(&g, &m)?;
                    println!("{line}");
                    agree
                }
                _ => bail!("give either --random-dags K, a scenario file, or a graph file and a capacity file"),
            };
            if !agree {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Sweep { setting, sides, max_slots, eps, window, large, output, params } => {
            if let Some(&side) = sides.iter().find(|&&s| s > DESK_SIDE_LIMIT) {
                if !large {
                    bail!("side {side} exceeds {DESK_SIDE_LIMIT}; pass --large to run it anyway");
                }
            }
            let config = SweepConfig { params: params.resolve()?, max_slots, eps_rel: eps, window };
            let reports = size_sweep(setting, &sides, &config)?;
            let csv = reports_to_csv(&reports);
            match output {
                Some(path) => write(&path, &csv)?,
                None => print!("{csv}"),
            }
            eprintln!("times increasing with side: {}", times_increasing(&reports));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
