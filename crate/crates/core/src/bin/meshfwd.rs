use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use meshfwd::experiment::{pick_endpoints, run_sweep, ExperimentConfig};
use meshfwd::forwarding::{route_observed, Decision, RouteOptions};
use meshfwd::predictor::divided_coefficients;
use meshfwd::report::{emit_table, sig6, Format};
use meshfwd::{
    generate_topology, Area, DriftMode, LinkProcessConfig, NetworkState, NodeId, Outcome, RouterKind,
    Topology,
};

#[derive(Debug, Parser)]
#[command(name = "meshfwd", version, about = "Bandwidth-predicting greedy forwarding in wireless mesh networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random unit-disk topology.
    GenTopo(GenTopoArgs),
    /// Route one payload and report its outcome.
    Route(RouteArgs),
    /// Run the node-count sweep and emit per-trial metrics.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct GenTopoArgs {
    #[arg(long)]
    nodes: usize,
    /// `W` or `WxH`, meters.
    #[arg(long, default_value = "100x100", value_parser = parse_area)]
    area: Area,
    #[arg(long, default_value_t = 15.0)]
    radius: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RouteArgs {
    /// Topology file written by `gen-topo`.
    #[arg(long, conflicts_with = "nodes")]
    topo: Option<PathBuf>,
    /// Generate a topology with this many nodes instead of loading one.
    #[arg(long, required_unless_present = "topo")]
    nodes: Option<usize>,
    #[arg(long, default_value = "100x100", value_parser = parse_area)]
    area: Area,
    #[arg(long, default_value_t = 15.0)]
    radius: f64,
    /// Seeds topology generation and the link processes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Source node; defaults to one end of the farthest connected pair.
    #[arg(long)]
    src: Option<usize>,
    #[arg(long)]
    dst: Option<usize>,
    #[arg(long, default_value = "ml-forwarding")]
    router: RouterKind,
    /// MB
    #[arg(long, default_value_t = 8.0)]
    payload: f64,
    /// ms of link evolution before routing; defaults to 50 mean dwells.
    #[arg(long)]
    warmup: Option<f64>,
    #[arg(long, default_value = "linear-drift", value_parser = parse_drift)]
    drift_mode: DriftMode,
    #[arg(long)]
    recompute_region: bool,
    /// Print one JSON record per hop.
    #[arg(long)]
    trace: bool,
    /// Print every candidate scored at each forwarding decision.
    #[arg(long)]
    explain: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// TOML config file, or `defaults`.
    #[arg(long, default_value = "defaults")]
    config: String,
    /// Rows file; the summary goes to a sibling `<stem>_summary` file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

/// Failures that map to exit status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn parse_area(s: &str) -> Result<Area, String> {
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("bad area {s:?}: {e}"));
    let (w, h) = match s.split_once(['x', 'X', ',']) {
        Some((w, h)) => (parse(w)?, parse(h)?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    Ok(Area::new(w, h))
}

fn parse_drift(s: &str) -> Result<DriftMode, String> {
    match s {
        "resample-uniform" => Ok(DriftMode::ResampleUniform),
        "linear-drift" => Ok(DriftMode::LinearDrift),
        "static" => Ok(DriftMode::Static),
        _ => Err(format!("unknown drift mode {s:?}")),
    }
}

fn open_out(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn gen_topo(args: GenTopoArgs) -> anyhow::Result<ExitCode> {
    let topo = generate_topology(args.nodes, args.area, args.radius, args.seed)
        .map_err(|e| Usage(e.to_string()))?;
    let mut out = open_out(args.out.as_deref())?;
    topo.write_json(&mut out)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn explain(out: &mut dyn Write, state: &NetworkState, d: &Decision) -> io::Result<()> {
    let chosen = d.chosen.map_or("none".to_string(), |c| c.to_string());
    writeln!(
        out,
        "decision at={} clock_ms={} direct={} chosen={}",
        d.at,
        sig6(d.clock),
        d.direct,
        chosen
    )?;
    writeln!(out, "  node in_region visited last_observed predicted alpha0 alpha1 alpha2")?;
    for c in &d.candidates {
        let coeffs = state.history(d.at, c.node).ok().and_then(|h| divided_coefficients(h).ok());
        let fmt_opt = |v: Option<f64>| v.map_or("-".to_string(), sig6);
        writeln!(
            out,
            "  {} {} {} {} {} {} {} {}",
            c.node,
            c.in_region,
            c.visited,
            sig6(c.last_observed),
            sig6(c.predicted),
            fmt_opt(coeffs.map(|k| k.alpha0)),
            fmt_opt(coeffs.and_then(|k| k.alpha1)),
            fmt_opt(coeffs.and_then(|k| k.alpha2)),
        )?;
    }
    Ok(())
}

fn route_cmd(args: RouteArgs) -> anyhow::Result<ExitCode> {
    let topo = match (&args.topo, args.nodes) {
        (Some(path), _) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Topology::read_json(io::BufReader::new(f)).map_err(|e| Usage(e.to_string()))?
        }
        (None, Some(n)) => {
            generate_topology(n, args.area, args.radius, args.seed).map_err(|e| Usage(e.to_string()))?
        }
        (None, None) => bail!(Usage("either --topo or --nodes is required".into())),
    };

    let (default_src, default_dst) = pick_endpoints(&topo);
    let src = args.src.map_or(default_src, NodeId);
    let dst = args.dst.map_or(default_dst, NodeId);
    if src == dst {
        bail!(Usage(format!("--src and --dst must differ (both {src})")));
    }
    for id in [src, dst] {
        if !topo.contains(id) {
            bail!(Usage(format!("node {id} is not in the topology ({} nodes)", topo.len())));
        }
    }

    let link = LinkProcessConfig { drift_mode: args.drift_mode, ..LinkProcessConfig::default() };
    let warmup = args.warmup.unwrap_or(50.0 * link.mean_dwell);
    let mut state = NetworkState::init_links(topo, link, args.seed).map_err(|e| Usage(e.to_string()))?;
    state.advance_to(warmup).map_err(|e| Usage(e.to_string()))?;
    let opts = RouteOptions { payload: args.payload, recompute_region: args.recompute_region };

    let mut out = BufWriter::new(io::stdout().lock());
    let mut explain_err = None;
    let result = route_observed(&mut state, src, dst, args.router, &opts, |s, d| {
        if args.explain && explain_err.is_none() {
            explain_err = explain(&mut out, s, d).err();
        }
    })
    .map_err(|e| Usage(e.to_string()))?;
    if let Some(e) = explain_err {
        return Err(e.into());
    }

    if args.trace {
        for hop in &result.hops {
            writeln!(out, "{}", serde_json::to_string(hop)?)?;
        }
    }
    let delay = result.total_delay();
    let (delay_s, speed_s) = if result.outcome == Outcome::Delivered {
        (sig6(delay), sig6(args.payload / delay))
    } else {
        (String::new(), String::new())
    };
    writeln!(
        out,
        "router={} src={} dst={} outcome={} hops={} delay_ms={} speed_mb_per_ms={}",
        args.router,
        src,
        dst,
        result.outcome,
        result.hops.len(),
        delay_s,
        speed_s
    )?;
    out.flush()?;

    Ok(match result.outcome {
        Outcome::Delivered => ExitCode::SUCCESS,
        Outcome::NoRoute | Outcome::HopLimit => ExitCode::from(1),
    })
}

fn summary_path(out: &Path, format: Format) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| format.extension().to_string());
    out.with_file_name(format!("{stem}_summary.{ext}"))
}

fn sweep(args: SweepArgs) -> anyhow::Result<ExitCode> {
    let config = if args.config == "defaults" {
        ExperimentConfig::default()
    } else {
        let text = std::fs::read_to_string(&args.config)
            .map_err(|e| Usage(format!("reading {}: {e}", args.config)))?;
        ExperimentConfig::from_toml(&text).map_err(|e| Usage(e.to_string()))?
    };
    let table = run_sweep(&config).map_err(|e| Usage(e.to_string()))?;
    match &args.out {
        Some(path) => {
            let rows = open_out(Some(path))?;
            let summary = open_out(Some(&summary_path(path, args.format)))?;
            emit_table(&table, args.format, rows, summary)?;
        }
        None => emit_table(&table, args.format, open_out(None)?, io::sink())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::GenTopo(args) => gen_topo(args),
        Command::Route(args) => route_cmd(args),
        Command::Sweep(args) => sweep(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
