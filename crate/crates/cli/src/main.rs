use std::path::PathBuf;
use std::process::ExitCode;

use capdyn_cli::config::{Format, RunConfig};
use capdyn_cli::experiment::{parse_axis, run_experiment, Experiment, Preset, SimulateMode};
use capdyn_core::sweep::{Axis, Statistic};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Capability-delegation dynamics: simulation, sweeps, fitting and figure data.
#[derive(Debug, Parser)]
#[command(name = "capdyn", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set params.beta=0.05` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "CAPDYN_THREADS", global = true)]
    threads: Option<usize>,
    /// Output root; results go to `<out>/<experiment>/`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Directory with pisa.csv, adoption.csv, benchmarks.csv and deskill.csv.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StatArg {
    Median,
    Mean,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the mean-field ODE and/or run one agent-based replicate.
    Simulate {
        #[arg(long, value_enum, default_value = "both")]
        mode: SimulateMode,
        /// ODE integration horizon.
        #[arg(long, default_value_t = 200.0)]
        t_end: f64,
    },
    /// Monte Carlo sweep over one or two parameters.
    Sweep {
        /// `param:lo:hi:n`, e.g. `k_ai:0.5:0.99:50` (one or two).
        #[arg(long = "axis", required = true, value_parser = parse_axis)]
        axes: Vec<Axis>,
        #[arg(long, value_enum, default_value = "median")]
        statistic: StatArg,
    },
    /// Fit the driven ODE to the average series and the country panel.
    Fit {
        /// Also compute profile likelihoods of α.
        #[arg(long)]
        profile: bool,
    },
    /// Compare the ODE with phenomenological models and their recovery predictions.
    Compare,
    /// Effective decay rates from deskilling studies.
    Calibrate,
    /// Capability ratios from benchmark scores.
    Benchmark,
    /// Two-skill reallocation scenarios.
    TwoSkill,
    /// Regenerate the data behind a figure or table.
    Reproduce {
        /// Preset name; `list` prints the registry.
        preset: String,
    },
}

fn flags(g: &Global) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(s) = g.seed {
        out.push(format!("seed={s}"));
    }
    if let Some(t) = g.threads {
        out.push(format!("threads={t}"));
    }
    if let Some(o) = &g.out {
        out.push(format!("output_dir={}", toml_string(o)));
    }
    if let Some(f) = g.format {
        out.push(format!("format=\"{}\"", if f == Format::Csv { "csv" } else { "json" }));
    }
    if let Some(d) = &g.data_dir {
        out.push(format!("data_dir={}", toml_string(d)));
    }
    out
}

fn toml_string(p: &std::path::Path) -> String {
    toml::Value::String(p.to_string_lossy().into_owned()).to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let experiment = match cli.command {
        Command::Simulate { mode, t_end } => Experiment::Simulate { mode, t_end },
        Command::Sweep { axes, statistic } => {
            let statistic = match statistic {
                StatArg::Median => Statistic::Median,
                StatArg::Mean => Statistic::Mean,
            };
            Experiment::Sweep { axes, statistic }
        }
        Command::Fit { profile } => Experiment::Fit { profile },
        Command::Compare => Experiment::Compare,
        Command::Calibrate => Experiment::Calibrate,
        Command::Benchmark => Experiment::Benchmark,
        Command::TwoSkill => Experiment::TwoSkill,
        Command::Reproduce { preset } if preset == "list" => {
            for p in Preset::ALL {
                println!("{:<24} {}", p.name(), p.description());
            }
            return ExitCode::SUCCESS;
        }
        Command::Reproduce { preset } => match preset.parse::<Preset>() {
            Ok(p) => Experiment::Preset(p),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
    };

    let presets = match &experiment {
        Experiment::Preset(p) => p.config_overrides(),
        other => vec![format!("experiment=\"{}\"", other.name())],
    };
    // Explicit flags take precedence over `--set`.
    let mut overrides = cli.global.set.clone();
    overrides.extend(flags(&cli.global));
    let cfg = match RunConfig::resolve_with(&presets, cli.global.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: stage `config` failed: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.global.print_config {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }

    match run_experiment(&cfg, &experiment) {
        Ok(manifest) => {
            let dir = cfg.output_dir.join(experiment.name());
            for f in &manifest.files {
                println!("{}  ({} rows)", dir.join(&f.path).display(), f.rows);
            }
            println!("{}  [seed {}, {} threads, {:.2} s]", dir.join("manifest.json").display(), manifest.seed, manifest.threads, manifest.wall_time);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
