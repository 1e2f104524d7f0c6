use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rissim::config::{parse_config, parse_override, ScenarioConfig};
use rissim::engine::{heatmap, run_drop};
use rissim::output::{write_drop_outputs, write_heatmap_csv, write_pattern_csv, write_placements_csv};
use rissim::ris::{inject_failures, panel_beam_pattern, steered_panel, PatternCut};
use rissim::rng::{stream_rng, Stream};
use rissim::SimError;
use serde_json::{json, Value};

/// Exit code for invalid configurations and overrides.
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "rissim", version, about = "RIS-aided multi-cell downlink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One drop: summary.json, ue.csv, cdf_rsrp.csv, cdf_sinr.csv.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        /// Also write placements.csv (base stations and panels).
        #[arg(long)]
        placements: bool,
    },
    /// Cartesian grid over every multi-valued --set; one directory per point.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[arg(long)]
        placements: bool,
    },
    /// RSRP-gain map: heatmap.csv and placements.csv.
    Heatmap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        /// Restrict the map to one sector's area.
        #[arg(long)]
        sector: Option<usize>,
    },
    /// Far-field beam-pattern cut of a single panel: pattern.csv, pattern.json.
    Pattern {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[arg(long, value_enum, default_value = "azimuth")]
        cut: Cut,
        /// Steering azimuth offset from the panel normal, degrees.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        steer_az: f64,
        /// Steering elevation offset from the panel normal, degrees.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        steer_el: f64,
        /// Half-width of the cut, degrees.
        #[arg(long, default_value_t = 30.0)]
        span: f64,
        /// Angular step, degrees.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
    },
    /// Parse and validate the configuration only.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// JSON scenario file; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Drop seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Override a field: key=value, or key=v1,v2,... for sweeps.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Output {
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Cut {
    Azimuth,
    Elevation,
}

/// Base config plus the parsed overrides, in command-line order.
struct Scenario {
    base: ScenarioConfig,
    overrides: Vec<(String, Vec<Value>)>,
}

impl Scenario {
    fn load(common: &Common) -> anyhow::Result<Self> {
        let mut base = match &common.config {
            Some(p) => parse_config(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(seed) = common.seed {
            base.seed = seed;
        }
        let overrides = common
            .overrides
            .iter()
            .map(|s| parse_override(s))
            .collect::<rissim::Result<Vec<_>>>()?;
        let scenario = Self { base, overrides };
        // Validate every grid point up front so nothing is written for a bad sweep.
        scenario.points()?;
        Ok(scenario)
    }

    /// Every combination of override values; the last key varies fastest.
    fn points(&self) -> anyhow::Result<Vec<(ScenarioConfig, Vec<(String, Value)>)>> {
        let mut points = vec![(self.base.clone(), Vec::new())];
        for (key, values) in &self.overrides {
            let mut next = Vec::with_capacity(points.len() * values.len());
            for (cfg, set) in &points {
                for v in values {
                    let mut set = set.clone();
                    set.push((key.clone(), v.clone()));
                    next.push((cfg.with_override(key, v)?, set));
                }
            }
            points = next;
        }
        Ok(points)
    }

    /// The single configuration of a non-sweep command.
    fn single(&self) -> anyhow::Result<ScenarioConfig> {
        if let Some((k, _)) = self.overrides.iter().find(|(_, v)| v.len() > 1) {
            return Err(SimError::Config(format!("--set {k} has several values; use `sweep`")).into());
        }
        Ok(self.points()?.remove(0).0)
    }
}

/// Output files and directories created so far, removed again on failure.
#[derive(Default)]
struct Created {
    paths: Vec<PathBuf>,
}

impl Created {
    fn dir(&mut self, dir: &Path) -> anyhow::Result<()> {
        let mut missing = Vec::new();
        let mut d = Some(dir);
        while let Some(p) = d {
            if p.as_os_str().is_empty() || p.exists() {
                break;
            }
            missing.push(p.to_path_buf());
            d = p.parent();
        }
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        self.paths.extend(missing.into_iter().rev());
        Ok(())
    }

    fn file(&mut self, path: PathBuf) -> anyhow::Result<fs::File> {
        let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.paths.push(path);
        Ok(f)
    }

    fn cleanup(self) {
        for p in self.paths.iter().rev() {
            let _ = if p.is_dir() { fs::remove_dir_all(p) } else { fs::remove_file(p) };
        }
    }
}

/// Writes one drop's files, tracking them even if a later file fails.
fn write_run(dir: &Path, cfg: &ScenarioConfig, placements: bool, created: &mut Created) -> anyhow::Result<()> {
    let result = run_drop(cfg, cfg.seed)?;
    created.dir(dir)?;
    for name in ["summary.json", "ue.csv", "cdf_rsrp.csv", "cdf_sinr.csv", "placements.csv"] {
        let p = dir.join(name);
        if !p.exists() && (placements || name != "placements.csv") {
            created.paths.push(p);
        }
    }
    write_drop_outputs(dir, &result, placements)?;
    log::info!("{}: {} UEs, {} panels", dir.display(), result.ues.len(), result.panels.len());
    Ok(())
}

fn execute(command: Command, created: &mut Created) -> anyhow::Result<()> {
    match command {
        Command::Run { common, output, placements } => {
            let cfg = Scenario::load(&common)?.single()?;
            write_run(&output.out, &cfg, placements, created)?;
        }
        Command::Sweep { common, output, placements } => {
            let scenario = Scenario::load(&common)?;
            let points = scenario.points()?;
            let base_seed = scenario.base.seed;
            created.dir(&output.out)?;
            let mut index = Vec::with_capacity(points.len());
            for (i, (mut cfg, set)) in points.into_iter().enumerate() {
                cfg.seed = base_seed + i as u64;
                let name = format!("point_{i:03}");
                write_run(&output.out.join(&name), &cfg, placements, created)?;
                let set: serde_json::Map<String, Value> = set.into_iter().collect();
                index.push(json!({ "dir": name, "seed": cfg.seed, "set": set }));
            }
            let text = serde_json::to_string_pretty(&Value::Array(index))? + "\n";
            std::io::Write::write_all(&mut created.file(output.out.join("sweep.json"))?, text.as_bytes())?;
        }
        Command::Heatmap { common, output, sector } => {
            let cfg = Scenario::load(&common)?.single()?;
            let (drop, map) = heatmap(&cfg, cfg.seed, sector)?;
            created.dir(&output.out)?;
            write_heatmap_csv(created.file(output.out.join("heatmap.csv"))?, &map)?;
            let nodes: Vec<_> = drop.bss.iter().chain(drop.panels.iter().map(|p| &p.placement)).collect();
            write_placements_csv(created.file(output.out.join("placements.csv"))?, nodes)?;
        }
        Command::Pattern { common, output, cut, steer_az, steer_el, span, step } => {
            let cfg = Scenario::load(&common)?.single()?;
            if !(step > 0.0 && span > 0.0 && span <= 90.0 && span / step <= 1e6) {
                bail!(SimError::Config(format!("need 0 < step, 0 < span <= 90 and span/step <= 1e6 (step {step}, span {span})")));
            }
            let mut panel = steered_panel(
                cfg.panel_grid,
                cfg.panel_grid,
                cfg.carrier_ghz,
                cfg.radio_model().ris_pattern,
                cfg.phase_bits,
                steer_az,
                steer_el,
            );
            if cfg.failure_rate > 0.0 {
                inject_failures(&mut panel, cfg.failure_rate, &mut stream_rng(cfg.seed, Stream::Failure, 0, 0));
            }
            let (cut, fixed, center) = match cut {
                Cut::Azimuth => (PatternCut::Azimuth, steer_el, steer_az),
                Cut::Elevation => (PatternCut::Elevation, steer_az, steer_el),
            };
            let n = (span / step).floor() as i64;
            let angles: Vec<f64> = (-n..=n).map(|i| center + i as f64 * step).collect();
            let n_hat = panel.frame().boresight;
            let bp = panel_beam_pattern(&panel, n_hat, cut, fixed, &angles, cfg.carrier_ghz);
            created.dir(&output.out)?;
            write_pattern_csv(created.file(output.out.join("pattern.csv"))?, &bp)?;
            let margin = bp.sidelobe_margin_db.is_finite().then_some(bp.sidelobe_margin_db);
            let info = json!({
                "config": cfg,
                "peak_angle_deg": bp.peak_angle_deg,
                "hpbw_deg": bp.hpbw_deg,
                "sidelobe_margin_db": margin,
                "failed_elements": panel.failed_count(),
            });
            let text = serde_json::to_string_pretty(&info)? + "\n";
            std::io::Write::write_all(&mut created.file(output.out.join("pattern.json"))?, text.as_bytes())?;
        }
        Command::Validate { common } => {
            let scenario = Scenario::load(&common)?;
            println!("ok: {} configuration(s) valid", scenario.points()?.len());
        }
    }
    Ok(())
}

fn threads(command: &Command) -> Option<usize> {
    match command {
        Command::Run { common, .. }
        | Command::Sweep { common, .. }
        | Command::Heatmap { common, .. }
        | Command::Pattern { common, .. }
        | Command::Validate { common } => common.threads,
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    matches!(
        e.downcast_ref::<SimError>(),
        Some(SimError::Config(_) | SimError::Range { .. } | SimError::Parse { .. })
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = threads(&cli.command) {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let mut created = Created::default();
    match execute(cli.command, &mut created) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            created.cleanup();
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
