//! `ncbf`: verify neural control barrier functions against builtin systems.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ncbf_core::condition::Problem;
use ncbf_core::dynamics::{builtin_system, DynamicsModel, BUILTIN_NAMES};
use ncbf_core::network::{Activation, Layer, Network};
use ncbf_core::safe_set::SafeSetDef;
use ncbf_core::verifier::{verify, write_mesh_csv_file, write_mesh_json, Status, VerdictReport};
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use config::RunConfig;

const EXIT_ERROR: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "ncbf", version, about = "Certify or falsify neural control barrier functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the refinement verifier; exit 0 valid, 1 invalid, 2 inconclusive.
    Verify(VerifyArgs),
    /// Evaluate the barrier, its gradient, the dynamics and the invariance condition at a point.
    CheckPoint(CheckPointArgs),
    /// Convert the per-simplex records of a report to a mesh file (.json or .csv).
    ExportMesh {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Describe a builtin system and optionally a network file.
    Info {
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Write a randomly initialised network in the weight-file format.
    RandomNetwork {
        #[arg(long)]
        input_dim: usize,
        /// Hidden widths, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "16,16")]
        hidden: Vec<usize>,
        #[arg(long, default_value = "tanh")]
        activation: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct ProblemArgs {
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Safe set JSON replacing the system's default.
    #[arg(long)]
    safe_set: Option<PathBuf>,
    /// System parameter override, `name=value`.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mesh_out: Option<PathBuf>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    max_depth: Option<u32>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, env = "CBF_VERIFY_WORKERS")]
    workers: Option<usize>,
    #[arg(long)]
    exhaustive: bool,
    /// Recorded for reproducibility; verification itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct CheckPointArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Comma-separated coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    point: Vec<f64>,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("parameter `{k}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

struct Loaded {
    cfg: RunConfig,
    net: Network,
    model: DynamicsModel,
    safe: SafeSetDef,
}

fn load_problem(args: &ProblemArgs) -> Result<Loaded> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &args.system {
        cfg.system = Some(s.clone());
    }
    if let Some(n) = &args.network {
        cfg.network = Some(n.clone());
    }
    if let Some(s) = &args.safe_set {
        cfg.safe_set = Some(s.clone());
    }
    cfg.params.extend(args.params.iter().cloned());
    if let Some(a) = args.alpha {
        cfg.verifier.alpha = a;
    }
    let system = cfg.system.clone().context("no system given (use --system or `system` in the config)")?;
    let net_path = cfg.network.clone().context("no network given (use --network or `network` in the config)")?;
    let net = Network::load(&net_path).with_context(|| format!("loading network {}", net_path.display()))?;
    let model = builtin_system(&system, &cfg.params)?;
    let safe = match &cfg.safe_set {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading safe set {}", p.display()))?;
            let s: SafeSetDef = serde_json::from_str(&text).with_context(|| format!("parsing safe set {}", p.display()))?;
            s.validate()?;
            s
        }
        None => model.system().default_safe_set(),
    };
    Ok(Loaded { cfg, net, model, safe })
}

fn write_mesh(path: &Path, report: &VerdictReport) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => write_mesh_csv_file(path, &report.per_simplex)?,
        _ => write_mesh_json(path, &report.per_simplex)?,
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    let Loaded { mut cfg, net, model, safe } = load_problem(&args.problem)?;
    let v = &mut cfg.verifier;
    if let Some(e) = args.eta {
        v.eta = e;
    }
    if let Some(d) = args.max_depth {
        v.max_depth = d;
    }
    if let Some(b) = args.batch_size {
        v.batch_size = b;
    }
    if let Some(w) = args.workers {
        v.worker_count = w;
    }
    v.exhaustive |= args.exhaustive;
    let report = verify(&net, &model, &safe, &cfg.verifier)?;
    println!(
        "status: {:?}\nregions: {} ({} certified)\ncertified fraction: {}\nmax depth: {}\nwall time: {:.3} s",
        report.status,
        report.regions_total,
        report.regions_certified,
        report.certified_fraction,
        report.max_depth_reached,
        report.wall_time
    );
    if let Some(seed) = args.seed {
        println!("seed: {seed}");
    }
    for c in &report.counterexamples {
        println!(
            "counterexample ({:?}) at {:?}: B = {:?}, invariance = {:?}",
            c.kind, c.evidence.point, c.evidence.value, c.evidence.invariance
        );
    }
    if let Some(out) = &args.out {
        report.save(out)?;
    }
    if let Some(m) = &args.mesh_out {
        write_mesh(m, &report)?;
    }
    Ok(match report.status {
        Status::Valid => 0,
        Status::Invalid => 1,
        Status::Inconclusive => 2,
    })
}

fn cmd_check_point(args: CheckPointArgs) -> Result<u8> {
    let Loaded { cfg, net, model, safe } = load_problem(&args.problem)?;
    let x = &args.point;
    if x.len() != model.state_dim() {
        bail!("point has {} coordinates, {} expects {}", x.len(), model.name(), model.state_dim());
    }
    if !safe.state_box.contains(x) {
        return Err(ncbf_core::Error::OutOfBox { point: x.clone() }.into());
    }
    let mut p = Problem::new(&net, &model, &safe)?;
    p.alpha = cfg.verifier.alpha;
    let e = p.evaluate_point(x)?;
    println!("x = {:?}", e.point);
    println!("B(x) = {:?}", e.value);
    println!("dB/dx = {:?}", e.gradient);
    println!("f = {:?}", e.f);
    println!("g = {:?}", e.g);
    println!("dB/dx f = {:?}", e.drift);
    println!("sup_u dB/dx g u = {:?}", e.control);
    println!("invariance = {:?}", e.invariance);
    println!("in safe set: {}", e.in_safe_set);
    match p.violation_at(x)? {
        Some((kind, _)) => println!("violation: {kind:?}"),
        None => println!("violation: none"),
    }
    Ok(0)
}

fn cmd_export_mesh(report: &Path, out: &Path) -> Result<u8> {
    let r = VerdictReport::load(report)?;
    write_mesh(out, &r)?;
    println!("wrote {} simplices to {}", r.per_simplex.len(), out.display());
    Ok(0)
}

fn cmd_info(system: Option<String>, network: Option<PathBuf>) -> Result<u8> {
    if system.is_none() && network.is_none() {
        println!("systems: {}", BUILTIN_NAMES.join(", "));
    }
    if let Some(name) = system {
        let m = builtin_system(&name, &BTreeMap::new())?;
        let safe = m.system().default_safe_set();
        println!("system: {}", m.name());
        println!("state dim: {}, control dim: {}", m.state_dim(), m.control_dim());
        println!("state box: lo {:?} hi {:?}", safe.state_box.lo, safe.state_box.hi);
        for u in m.control_bounds() {
            println!("control bound: {u}");
        }
        println!("obstacles: {}", serde_json::to_string(&safe.obstacles)?);
    }
    if let Some(path) = network {
        let net = Network::load(&path)?;
        let widths: Vec<String> = net.layers().iter().map(|l| format!("{}:{}", l.out_dim(), l.activation)).collect();
        println!("network: input {} -> [{}]", net.input_dim(), widths.join(", "));
    }
    Ok(0)
}

fn cmd_random_network(input_dim: usize, hidden: &[usize], activation: &str, seed: u64, out: &Path) -> Result<u8> {
    let act = Activation::from_name(activation, None).with_context(|| format!("unknown activation `{activation}`"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut fan_in = input_dim;
    let widths = hidden.iter().copied().chain(std::iter::once(1));
    for (i, w) in widths.enumerate() {
        let normal = Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).expect("positive std");
        let weight = Array2::from_shape_fn((w, fan_in), |_| normal.sample(&mut rng));
        let bias = Array1::from_shape_fn(w, |_| 0.1 * normal.sample(&mut rng));
        let a = if i == hidden.len() { Activation::Identity } else { act };
        layers.push(Layer::new(weight, bias, a));
        fan_in = w;
    }
    Network::new(input_dim, layers)?.save(out)?;
    println!("wrote {}", out.display());
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::CheckPoint(a) => cmd_check_point(a),
        Command::ExportMesh { report, out } => cmd_export_mesh(&report, &out),
        Command::Info { system, network } => cmd_info(system, network),
        Command::RandomNetwork {
            input_dim,
            hidden,
            activation,
            seed,
            out,
        } => cmd_random_network(input_dim, &hidden, &activation, seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
