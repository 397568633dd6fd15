//! Command-line front end: run simulations, dump channel tables, and
//! plan sensing routes. Every run writes a manifest that reproduces it
//! bit for bit.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uav_aoi::agents::Policy;
use uav_aoi::baselines::build_route_plan;
use uav_aoi::channel::{self, ChannelParams};
use uav_aoi::config::{parse_config, ScenarioConfig};
use uav_aoi::runner::{
    aoi_csv, build_agents, learning_curve_csv, manifest_text, resolve_config, rolling_mean,
    run_eval, run_sweep, run_training, sweep_csv, trajectory_csv, AgentKind, Mode, SweepAxis,
    ROLLING_WINDOW,
};

#[derive(Parser)]
#[command(name = "uav-aoi", version, about = "UAV sensing-fleet simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train or evaluate a fleet policy on a scenario.
    Simulate(SimulateArgs),
    /// Dump the uplink channel closed forms over an altitude/radius grid.
    ChannelTable(ChannelTableArgs),
    /// Plan the shortest closed sensing route over all task targets.
    PlanRoute(PlanRouteArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file (key=value lines). Defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Decision-maker steering every UAV.
    #[arg(long, value_parser = parse_agent)]
    agent: AgentKind,
    /// train: learn and checkpoint; eval: frozen policies, no learning.
    #[arg(long, default_value = "train", value_parser = parse_mode)]
    mode: Mode,
    /// Master seed; overrides the scenario's rng_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Episode count; overrides the scenario's num_episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Output directory for all run files.
    #[arg(long)]
    out: PathBuf,
    /// Also write per-cycle trajectory.csv and aoi.csv.
    #[arg(long)]
    log_trajectories: bool,
    /// Sweep one knob instead of a single run: axis=v1,v2,...
    /// (axes: altitude, subcarriers, num_uavs).
    #[arg(long, value_name = "AXIS=V1,V2,...")]
    sweep: Option<String>,
    /// Pick the fleet scheme: true = shared reward with exclusive task
    /// selection, false = individual rewards without exclusivity.
    #[arg(long, value_name = "BOOL")]
    cooperative: Option<bool>,
    /// Let agents pick altitude inside the scenario's altitude band.
    #[arg(long)]
    enable_3d: bool,
}

#[derive(Args)]
struct ChannelTableArgs {
    /// Scenario file for the channel constants. Defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Altitudes (m), comma-separated.
    #[arg(long, default_value = "50,100,150,200,250,300", value_delimiter = ',')]
    altitudes: Vec<f64>,
    /// Horizontal distances from the base station (m), comma-separated.
    #[arg(long, default_value = "0,100,200,300,400,500,600,700,800,900,1000",
          value_delimiter = ',')]
    radii: Vec<f64>,
    /// Subcarriers granted to the link.
    #[arg(long, default_value_t = 80)]
    subcarriers: usize,
    /// Output CSV file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanRouteArgs {
    /// Scenario file with the task targets. Defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for sampling targets when the scenario leaves them empty.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_agent(s: &str) -> Result<AgentKind, String> {
    AgentKind::parse(s).ok_or_else(|| {
        format!("unknown agent '{s}' (expected ca2c, dqn, ddpg, greedy, shortest-route or random)")
    })
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "train" => Ok(Mode::Train),
        "eval" => Ok(Mode::Eval),
        _ => Err(format!("unknown mode '{s}' (expected train or eval)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::ChannelTable(args) => channel_table(args),
        Command::PlanRoute(args) => plan_route(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<ScenarioConfig, String> {
    match path {
        None => Ok(ScenarioConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            parse_config(&text).map_err(|e| format!("bad config {}: {e}", p.display()))
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), String> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn parse_sweep(spec: &str) -> Result<(SweepAxis, Vec<f64>), String> {
    let (axis_name, list) = spec
        .split_once('=')
        .ok_or_else(|| format!("sweep '{spec}' is not of the form axis=v1,v2,..."))?;
    let axis = SweepAxis::parse(axis_name).ok_or_else(|| {
        format!("unknown sweep axis '{axis_name}' (expected altitude, subcarriers or num_uavs)")
    })?;
    let values = list
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad sweep value '{v}': {e}")))
        .collect::<Result<Vec<f64>, String>>()?;
    if values.is_empty() {
        return Err("sweep needs at least one value".into());
    }
    Ok((axis, values))
}

fn simulate(args: SimulateArgs) -> Result<(), String> {
    let mut cfg = load_config(&args.config)?;
    if let Some(coop) = args.cooperative {
        // The two fleet schemes bundle reward sharing with selection
        // exclusivity; the flags stay separate in the scenario file.
        cfg.cooperative = coop;
        cfg.exclusive_task_selection = coop;
    }
    if args.enable_3d {
        cfg.enable_3d = true;
    }
    if let Some(episodes) = args.episodes {
        cfg.num_episodes = episodes;
    }
    let seed = args.seed.unwrap_or(cfg.rng_seed);

    fs::create_dir_all(&args.out)
        .map_err(|e| format!("cannot create {}: {e}", args.out.display()))?;

    let resolved = resolve_config(&cfg, seed);
    for warning in resolved.validate().map_err(|e| e.to_string())? {
        eprintln!("warning: {warning}");
    }

    if let Some(spec) = &args.sweep {
        let (axis, values) = parse_sweep(spec)?;
        let rows = run_sweep(&resolved, axis, &values, args.agent, seed, 5)
            .map_err(|e| e.to_string())?;
        write_file(&args.out, "sweep.csv", &sweep_csv(axis, &rows))?;
        write_file(
            &args.out,
            "manifest.txt",
            &manifest_text(&resolved, args.agent, args.mode, resolved.num_episodes),
        )?;
        let best = rows
            .iter()
            .min_by(|a, b| a.mean_psi.total_cmp(&b.mean_psi))
            .expect("sweep produced rows");
        println!(
            "sweep over {} values of {}: best {} = {} (mean psi {:.4} s)",
            rows.len(),
            axis.name(),
            axis.name(),
            best.value,
            best.mean_psi
        );
        return Ok(());
    }

    match args.mode {
        Mode::Train => {
            let run = run_training(&resolved, args.agent, seed, args.episodes, args.log_trajectories)
                .map_err(|e| e.to_string())?;
            write_file(&args.out, "learning_curve.csv", &learning_curve_csv(&run.records, &run.rolling))?;
            write_file(
                &args.out,
                "manifest.txt",
                &manifest_text(&run.cfg, args.agent, Mode::Train, run.records.len()),
            )?;
            if let Some(logs) = &run.logs {
                write_file(&args.out, "trajectory.csv", &trajectory_csv(&logs.trajectory))?;
                write_file(&args.out, "aoi.csv", &aoi_csv(&logs.aoi))?;
            }
            write_checkpoints(&args.out, &run.agents)?;
            let last = run.rolling.last().expect("at least one episode");
            println!(
                "trained {} for {} episodes: rolling mean psi {:.4} s",
                args.agent.name(),
                run.records.len(),
                last
            );
        }
        Mode::Eval => {
            let mut agents =
                build_agents(args.agent, &resolved, seed).map_err(|e| e.to_string())?;
            if args.agent.is_learner() {
                read_checkpoints(&args.out, &mut agents)?;
            }
            let episodes = args.episodes.unwrap_or(1);
            let (records, logs) = run_eval(&resolved, &mut agents, seed, episodes, args.log_trajectories)
                .map_err(|e| e.to_string())?;
            let psi: Vec<f64> = records.iter().map(|r| r.psi_s).collect();
            let rolling = rolling_mean(&psi, ROLLING_WINDOW);
            write_file(&args.out, "learning_curve.csv", &learning_curve_csv(&records, &rolling))?;
            write_file(
                &args.out,
                "manifest.txt",
                &manifest_text(&resolved, args.agent, Mode::Eval, episodes),
            )?;
            if let Some(logs) = &logs {
                write_file(&args.out, "trajectory.csv", &trajectory_csv(&logs.trajectory))?;
                write_file(&args.out, "aoi.csv", &aoi_csv(&logs.aoi))?;
            }
            let mean = psi.iter().sum::<f64>() / psi.len() as f64;
            println!(
                "evaluated {} over {} episode(s): mean psi {:.4} s",
                args.agent.name(),
                episodes,
                mean
            );
        }
    }
    Ok(())
}

fn write_checkpoints(dir: &Path, agents: &[Box<dyn Policy>]) -> Result<(), String> {
    for (i, agent) in agents.iter().enumerate() {
        let mut buf = Vec::new();
        let has_params = agent.write_checkpoint(&mut buf).map_err(|e| e.to_string())?;
        if has_params {
            let path = dir.join(format!("checkpoint_uav{i}.txt"));
            fs::write(&path, &buf).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        }
    }
    Ok(())
}

fn read_checkpoints(dir: &Path, agents: &mut [Box<dyn Policy>]) -> Result<(), String> {
    for (i, agent) in agents.iter_mut().enumerate() {
        let path = dir.join(format!("checkpoint_uav{i}.txt"));
        let file = fs::File::open(&path).map_err(|e| {
            format!("cannot open checkpoint {}: {e} (train first?)", path.display())
        })?;
        let mut reader = BufReader::new(file);
        agent.read_checkpoint(&mut reader).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn channel_table(args: ChannelTableArgs) -> Result<(), String> {
    let cfg = load_config(&args.config)?;
    let params = ChannelParams::from_config(&cfg);
    let mut out = String::from("altitude,radius,prob_los,avg_pathloss_db,snr_db,rate_bps\n");
    for &h in &args.altitudes {
        for &r in &args.radii {
            let uav = uav_aoi::geometry::Vec3::new(r, 0.0, h);
            let p = channel::prob_los(uav, &params).map_err(|e| e.to_string())?;
            let pl = channel::avg_pathloss_db(uav, &params).map_err(|e| e.to_string())?;
            let snr = channel::snr(uav, &params).map_err(|e| e.to_string())?;
            let rate =
                channel::rate_bps(uav, args.subcarriers, &params).map_err(|e| e.to_string())?;
            use std::fmt::Write as _;
            let _ = writeln!(out, "{h},{r},{p},{pl},{},{rate}", 10.0 * snr.log10());
        }
    }
    emit(args.out.as_deref(), &out)
}

fn plan_route(args: PlanRouteArgs) -> Result<(), String> {
    let cfg = load_config(&args.config)?;
    let resolved = resolve_config(&cfg, args.seed.unwrap_or(cfg.rng_seed));
    let plan = build_route_plan(&resolved).map_err(|e| e.to_string())?;
    let mut out = String::from("order,x,y,leg_length\n");
    use std::fmt::Write as _;
    for (k, &task) in plan.order.iter().enumerate() {
        let here = plan.points[task - 1];
        let next = plan.points[plan.order[(k + 1) % plan.order.len()] - 1];
        let leg = ((here.x - next.x).powi(2) + (here.y - next.y).powi(2)).sqrt();
        let _ = writeln!(out, "{task},{},{},{leg}", here.x, here.y);
    }
    let _ = writeln!(out, "# tour_length={}", plan.length);
    emit(args.out.as_deref(), &out)?;
    eprintln!("closed tour over {} targets: {:.2} m", plan.order.len(), plan.length);
    Ok(())
}

fn emit(path: Option<&Path>, contents: &str) -> Result<(), String> {
    match path {
        None => {
            std::io::stdout()
                .write_all(contents.as_bytes())
                .map_err(|e| format!("cannot write to stdout: {e}"))
        }
        Some(p) => {
            if let Some(parent) = p.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent)
                        .map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
                }
            }
            fs::write(p, contents).map_err(|e| format!("cannot write {}: {e}", p.display()))
        }
    }
}
