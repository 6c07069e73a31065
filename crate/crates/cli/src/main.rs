mod provenance;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use vehchan::chstats::{analyze, read_stats_csv, write_stats_csv, StatsConfig};
use vehchan::compare::{compare_stats, stats_in_envelope, time_in_envelope, write_offset_csv};
use vehchan::dpsinterp::{plan_grids, InterpConfig, Interpolator};
use vehchan::gscm::ModelParams;
use vehchan::linksim::{
    ensemble_per, read_envelope_csv, read_per_csv, run_link, write_envelope_csv, write_per_csv, Mcs, PhyConfig,
};
use vehchan::mnct::ChannelTensor;
use vehchan::presets::{self, Preset};
use vehchan::scenario::{load_scenario, Role};
use vehchan::synth::{synthesize, SounderConfig};
use vehchan::{Error, Result};

use provenance::{digest_file, write_sidecar};

/// Vehicular channel simulation, statistics, interpolation and link-level
/// evaluation.
#[derive(Parser)]
#[command(name = "vehchan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize channel tensors for a scenario.
    Simulate(SimulateArgs),
    /// Per-region statistics of one link of a tensor.
    Analyze(AnalyzeArgs),
    /// Offset CDFs between a reference statistics file and simulated ones.
    CompareStats(CompareArgs),
    /// Resample a tensor onto an emulation grid.
    Interp(InterpArgs),
    /// Time-variant packet error rate of one link.
    Per(PerArgs),
}

fn parse_link(s: &str) -> std::result::Result<(u16, u16), String> {
    let (a, b) = s.split_once('-').ok_or_else(|| format!("link '{s}' is not of the form a-b"))?;
    let node = |x: &str| x.trim().parse::<u16>().map_err(|e| format!("link '{s}': {e}"));
    Ok((node(a)?, node(b)?))
}

fn parse_presets(names: &[String]) -> Result<Vec<Preset>> {
    names.iter().map(|n| n.parse()).collect()
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Links as `a-b`, comma separated. Defaults to every pair of nodes.
    #[arg(long, value_delimiter = ',', value_parser = parse_link)]
    links: Vec<(u16, u16)>,
    /// Duration, s.
    #[arg(long, default_value_t = 15.0)]
    duration: f64,
    /// Seed of the (first) run. Defaults to the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds; `--out` then names a directory.
    #[arg(long)]
    seeds: Option<u64>,
    /// `paper_table2` (sounder) and/or `paper_table5` (model).
    #[arg(long = "preset", value_delimiter = ',')]
    presets: Vec<String>,
    /// Model parameters as TOML, replacing the preset.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct SimulateConfig<'a> {
    scenario: &'a str,
    links: &'a [(u16, u16)],
    duration: f64,
    sounder: &'a SounderConfig,
    model: &'a ModelParams,
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let scenario = load_scenario(&a.scenario)?;
    let mut sounder = presets::table2();
    let mut model = presets::table5();
    for p in parse_presets(&a.presets)? {
        match p {
            Preset::PaperTable2 => sounder = presets::table2(),
            Preset::PaperTable5 => model = presets::table5(),
            other => return Err(Error::Validation(format!("preset {other:?} does not apply to simulate"))),
        }
    }
    if let Some(path) = &a.model {
        model = read_toml(path)?;
    }
    let links = if a.links.is_empty() {
        let mut nodes: Vec<u16> = scenario
            .vehicles
            .iter()
            .filter(|v| v.role == Role::Node)
            .filter_map(|v| v.node)
            .filter(|&n| u32::from(n) <= sounder.nodes)
            .collect();
        nodes.sort_unstable();
        let mut pairs = Vec::new();
        for (i, &x) in nodes.iter().enumerate() {
            for &y in &nodes[i + 1..] {
                pairs.push((x, y));
            }
        }
        pairs
    } else {
        a.links.clone()
    };
    let first = a.seed.unwrap_or(scenario.seed);
    let inputs = [digest_file(&a.scenario)?];
    let config = SimulateConfig {
        scenario: &scenario.name,
        links: &links,
        duration: a.duration,
        sounder: &sounder,
        model: &model,
    };
    let run = |seed: u64, out: &Path| -> Result<()> {
        let tensor = synthesize(&scenario, &links, a.duration, &sounder, &model, seed)?;
        tensor.write_to(create(out)?)?;
        write_sidecar(out, "simulate", Some(seed), &inputs, &config)?;
        println!("{}: {} links x {} snapshots x {} subcarriers", out.display(), links.len(), tensor.grid.t, tensor.grid.q);
        Ok(())
    };
    match a.seeds {
        None => run(first, &a.out),
        Some(0) => Err(Error::Validation("--seeds must be at least 1".into())),
        Some(n) => {
            fs::create_dir_all(&a.out)?;
            (first..first + n).try_for_each(|seed| run(seed, &a.out.join(format!("seed_{seed:04}.mnct"))))
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Link `a-b`; the first link of the tensor by default.
    #[arg(long, value_parser = parse_link)]
    link: Option<(u16, u16)>,
    /// Stationarity region length, s.
    #[arg(long, default_value_t = 0.12)]
    t_stat: f64,
    #[arg(long, default_value_t = 3)]
    tapers: usize,
    /// Fixed noise floor in dB instead of the per-region estimate.
    #[arg(long)]
    noise_floor_db: Option<f64>,
    /// Disable the noise and dynamic-range thresholds.
    #[arg(long)]
    no_thresholds: bool,
    #[arg(long)]
    out: PathBuf,
}

fn link_index(tensor: &ChannelTensor, link: Option<(u16, u16)>) -> Result<usize> {
    match link {
        None => Ok(0),
        Some((a, b)) => tensor
            .link_index(a, b)
            .ok_or_else(|| Error::Validation(format!("tensor does not contain link {a}-{b}"))),
    }
}

fn load_tensor(path: &Path) -> Result<ChannelTensor> {
    ChannelTensor::read_from(BufReader::new(File::open(path)?))
}

fn analyze_cmd(a: AnalyzeArgs) -> Result<()> {
    let tensor = load_tensor(&a.input)?;
    let link = link_index(&tensor, a.link)?;
    let g = &tensor.grid;
    let m = (a.t_stat / g.t_sys).round() as usize;
    let mut config = StatsConfig::new(m, g.q, g.t_sys, g.delta_f);
    config.i_tapers = a.tapers;
    config.j_tapers = a.tapers;
    config.noise_floor_db = a.noise_floor_db;
    if a.no_thresholds {
        config = config.without_thresholds();
    }
    let stats = analyze(&tensor, link, &config)?;
    write_stats_csv(&stats.rows(), create(&a.out)?)?;
    write_sidecar(&a.out, "analyze", None, &[digest_file(&a.input)?], &(stats.link, &config))?;
    println!("{}: {} regions of {m} snapshots, link {}-{}", a.out.display(), stats.regions.len(), stats.link.0, stats.link.1);
    Ok(())
}

#[derive(Args)]
struct CompareArgs {
    /// Reference statistics CSV.
    #[arg(long)]
    reference: PathBuf,
    /// Simulated statistics CSVs.
    #[arg(long, num_args = 1.., required = true)]
    sims: Vec<PathBuf>,
    /// Percentile reported per quantity.
    #[arg(long, default_value_t = 80.0)]
    percentile: f64,
    #[arg(long)]
    out: PathBuf,
}

fn compare_cmd(a: CompareArgs) -> Result<()> {
    let reference = read_stats_csv(&a.reference)?;
    let sims = a.sims.iter().map(|p| read_stats_csv(p)).collect::<Result<Vec<_>>>()?;
    let cdfs = compare_stats(&reference, &sims)?;
    write_offset_csv(&cdfs, create(&a.out)?)?;
    let envelope = stats_in_envelope(&reference, &sims)?;
    for (c, (_, inside)) in cdfs.iter().zip(&envelope) {
        let inside = inside.map_or("n/a".to_string(), |f| format!("{:.1}%", 100.0 * f));
        println!(
            "{}: p{} offset {} (in envelope {inside})",
            c.quantity,
            a.percentile,
            c.percentile(a.percentile)
        );
    }
    let mut inputs = vec![digest_file(&a.reference)?];
    for p in &a.sims {
        inputs.push(digest_file(p)?);
    }
    write_sidecar(&a.out, "compare-stats", None, &inputs, &a.percentile)?;
    Ok(())
}

#[derive(Args)]
struct InterpArgs {
    #[arg(long)]
    input: PathBuf,
    /// `desk` (default) or `paper_table6`; the flags below override it.
    #[arg(long, default_value = "desk")]
    preset: String,
    /// Output snapshot interval, s.
    #[arg(long)]
    t_out: Option<f64>,
    /// Output subcarrier spacing, Hz.
    #[arg(long)]
    f_out: Option<f64>,
    /// Output subcarriers.
    #[arg(long)]
    n_out: Option<usize>,
    /// Input subcarriers used (the central ones).
    #[arg(long)]
    n_in: Option<usize>,
    /// Input snapshots per block.
    #[arg(long)]
    block: Option<usize>,
    /// Overlap per side, input snapshots.
    #[arg(long)]
    overlap: Option<usize>,
    #[arg(long)]
    v_max: Option<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
    #[arg(long)]
    d_t: Option<usize>,
    #[arg(long)]
    d_f: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn interp_cmd(a: InterpArgs) -> Result<()> {
    let base = match a.preset.parse()? {
        Preset::Desk => presets::desk_interp(),
        Preset::PaperTable6 => presets::table6(),
        other => return Err(Error::Validation(format!("preset {other:?} does not apply to interp"))),
    };
    let tensor = load_tensor(&a.input)?;
    let g = &tensor.grid;
    let p = &base.plan;
    let plan = plan_grids(
        g.t_sys,
        a.t_out.unwrap_or(p.t_e),
        g.delta_f,
        a.f_out.unwrap_or(p.f_e),
        a.block.unwrap_or(p.m_s),
        a.n_in.unwrap_or(p.n_s),
        a.n_out.unwrap_or(p.n_e),
        a.overlap.unwrap_or(p.overlap),
    )?;
    let config = InterpConfig {
        plan,
        f_c: g.f_c,
        v_max: a.v_max.unwrap_or(base.v_max),
        tau_max: a.tau_max.unwrap_or(base.tau_max),
        d_t: a.d_t.or(if a.v_max.is_some() { None } else { base.d_t }),
        d_f: a.d_f.or(if a.tau_max.is_some() { None } else { base.d_f }),
    };
    let interp = Interpolator::new(config.clone(), g.q)?;
    let out = interp.run(&tensor)?;
    out.write_to(create(&a.out)?)?;
    write_sidecar(&a.out, "interp", None, &[digest_file(&a.input)?], &config)?;
    let (dt, df) = interp.basis.dims();
    println!(
        "{}: {} snapshots x {} subcarriers, subspace {dt} x {df}",
        a.out.display(),
        out.grid.t,
        out.grid.q
    );
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
enum McsArg {
    Qpsk12,
    Qam64_34,
}

#[derive(Args)]
struct PerArgs {
    /// Channel tensors; several inputs form an ensemble.
    #[arg(long, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, value_parser = parse_link)]
    link: Option<(u16, u16)>,
    #[arg(long, value_enum)]
    mcs: Option<McsArg>,
    /// PHY parameters as TOML.
    #[arg(long)]
    phy: Option<PathBuf>,
    /// Link-level seed of the first input; input `i` uses `seed + i`.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Envelope CSV to compare against instead of computing one.
    #[arg(long)]
    envelope: Option<PathBuf>,
    /// Reference PER CSV; prints the share of windows inside the envelope.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn per_cmd(a: PerArgs) -> Result<()> {
    let mut phy: PhyConfig = match &a.phy {
        Some(p) => read_toml(p)?,
        None => PhyConfig::default(),
    };
    if let Some(m) = a.mcs {
        phy.mcs = match m {
            McsArg::Qpsk12 => Mcs::Qpsk12,
            McsArg::Qam64_34 => Mcs::Qam64_34,
        };
    }
    if a.input.is_empty() && a.envelope.is_none() {
        return Err(Error::Validation("give --input tensors or an --envelope file".into()));
    }
    let mut runs = Vec::new();
    let mut inputs = Vec::new();
    for (i, path) in a.input.iter().enumerate() {
        let tensor = load_tensor(path)?;
        let link = link_index(&tensor, a.link)?;
        runs.push(run_link(&tensor, link, &phy, a.seed + i as u64)?);
        inputs.push(digest_file(path)?);
    }
    let envelope = match &a.envelope {
        Some(p) => {
            inputs.push(digest_file(p)?);
            Some(read_envelope_csv(BufReader::new(File::open(p)?))?)
        }
        None if runs.len() > 1 || a.reference.is_some() => Some(ensemble_per(&runs)?),
        None => None,
    };
    if let Some(out) = &a.out {
        match (&envelope, runs.as_slice()) {
            (None, [single]) => write_per_csv(single, create(out)?)?,
            (Some(env), _) => write_envelope_csv(env, create(out)?)?,
            (None, _) => unreachable!("an ensemble always has an envelope"),
        }
        write_sidecar(out, "per", Some(a.seed), &inputs, &phy)?;
    }
    for (i, r) in runs.iter().enumerate() {
        let mean = r.per.iter().filter(|p| p.is_finite()).sum::<f64>() / r.per.len().max(1) as f64;
        println!("run {i}: {} windows, mean PER {mean:.4}", r.per.len());
    }
    if let (Some(env), Some(reference)) = (&envelope, &a.reference) {
        let r = read_per_csv(BufReader::new(File::open(reference)?))?;
        match time_in_envelope(&r.per, &env.min, &env.max)? {
            Some(f) => println!("time in envelope: {:.1}%", 100.0 * f),
            None => println!("time in envelope: n/a"),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::CompareStats(a) => compare_cmd(a),
        Command::Interp(a) => interp_cmd(a),
        Command::Per(a) => per_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
