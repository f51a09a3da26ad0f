use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use weakcollapse::experiment::{run, validate, ExperimentConfig, OutputFormat};

/// Simulations of measurement outcomes chosen by policies other than Born's rule.
#[derive(Parser, Debug)]
#[command(name = "weakcollapse", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Master seed; every trial derives its own stream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of trials (or instances / sequences, per experiment).
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Flat TOML file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra parameter as key=value; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Emit per-trial records where the experiment supports them.
    #[arg(long, global = true)]
    records: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    JsonLines,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Coloring search and parity check over a ray table.
    Ks {
        /// Ray table file, one context per line.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Print the table in text form instead of running the checks.
        #[arg(long)]
        export: bool,
    },
    /// Twin-particle trials over the built-in table.
    Fwt {
        /// Alice's collapse policy.
        #[arg(long)]
        policy: Option<String>,
        /// How Bob picks his ray: in_context or any.
        #[arg(long)]
        bob: Option<String>,
    },
    /// Bob's marginals under two Alice settings on a shared qubit pair.
    Signal {
        /// bell or product.
        #[arg(long)]
        state: Option<String>,
        #[arg(long)]
        basis0: Option<String>,
        #[arg(long)]
        basis1: Option<String>,
        #[arg(long)]
        bob_basis: Option<String>,
        #[arg(long)]
        policy0: Option<String>,
        #[arg(long)]
        policy1: Option<String>,
        /// analytic or empirical.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Mean energy before and after a non-selective measurement.
    Energy {
        /// Diagonal energies, comma separated.
        #[arg(long)]
        energies: Option<String>,
        /// Dense real symmetric matrix, rows separated by `;`.
        #[arg(long)]
        hamiltonian: Option<String>,
        /// Real amplitudes, comma separated.
        #[arg(long)]
        state: Option<String>,
        /// energy or computational.
        #[arg(long)]
        basis: Option<String>,
        #[arg(long)]
        eigenvalues: Option<String>,
        /// Branch weights, comma separated, or `born`.
        #[arg(long)]
        weights: Option<String>,
    },
    /// Satisfiability through a forced flag outcome.
    Sat {
        #[arg(long, conflicts_with_all = ["truth_table", "n"])]
        cnf: Option<PathBuf>,
        #[arg(long, conflicts_with = "n")]
        truth_table: Option<PathBuf>,
        /// Bits for randomly drawn functions.
        #[arg(long)]
        n: Option<usize>,
        /// Probability that a random function is true at each input.
        #[arg(long)]
        density: Option<f64>,
    },
    /// Norm-driven choice among weighted alternatives.
    Asc {
        #[arg(long)]
        labels: Option<String>,
        #[arg(long)]
        priorities: Option<String>,
        #[arg(long)]
        norm: Option<String>,
        #[arg(long)]
        mixing: Option<f64>,
    },
    /// Generate or classify inter-event interval sequences.
    Behavior {
        #[arg(value_enum)]
        action: BehaviorAction,
        /// Interval file for `classify`, one per line.
        input: Option<PathBuf>,
        /// exponential or pareto.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        xmin: Option<f64>,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        levy_below: Option<f64>,
        #[arg(long)]
        noise_above: Option<f64>,
    },
    /// Run whatever experiment the --config file names.
    Run,
    /// Check a configuration without running it.
    Validate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BehaviorAction {
    Generate,
    Classify,
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

impl Command {
    fn experiment(&self) -> Option<&'static str> {
        Some(match self {
            Command::Ks { .. } => "ks",
            Command::Fwt { .. } => "fwt",
            Command::Signal { .. } => "signal",
            Command::Energy { .. } => "energy",
            Command::Sat { .. } => "sat",
            Command::Asc { .. } => "asc",
            Command::Behavior { .. } => "behavior",
            Command::Run | Command::Validate => return None,
        })
    }

    /// Parameters set by subcommand flags.
    fn params(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        match self {
            Command::Ks { table, export } => {
                put("table", table.as_deref().map(path_str));
                put("export", export.then(|| "true".to_string()));
            }
            Command::Fwt { policy, bob } => {
                put("policy", policy.clone());
                put("bob", bob.clone());
            }
            Command::Signal {
                state,
                basis0,
                basis1,
                bob_basis,
                policy0,
                policy1,
                mode,
            } => {
                put("state", state.clone());
                put("basis0", basis0.clone());
                put("basis1", basis1.clone());
                put("bob_basis", bob_basis.clone());
                put("policy0", policy0.clone());
                put("policy1", policy1.clone());
                put("mode", mode.clone());
            }
            Command::Energy {
                energies,
                hamiltonian,
                state,
                basis,
                eigenvalues,
                weights,
            } => {
                put("energies", energies.clone());
                put("hamiltonian", hamiltonian.clone());
                put("state", state.clone());
                put("basis", basis.clone());
                put("eigenvalues", eigenvalues.clone());
                put("weights", weights.clone());
            }
            Command::Sat {
                cnf,
                truth_table,
                n,
                density,
            } => {
                put("cnf", cnf.as_deref().map(path_str));
                put("truth_table", truth_table.as_deref().map(path_str));
                put("n", n.map(|n| n.to_string()));
                put("density", density.map(|d| d.to_string()));
            }
            Command::Asc {
                labels,
                priorities,
                norm,
                mixing,
            } => {
                put("labels", labels.clone());
                put("priorities", priorities.clone());
                put("norm", norm.clone());
                put("mixing", mixing.map(|m| m.to_string()));
            }
            Command::Behavior {
                action,
                input,
                model,
                rate,
                alpha,
                xmin,
                length,
                levy_below,
                noise_above,
            } => {
                put(
                    "mode",
                    Some(match action {
                        BehaviorAction::Generate => "generate".into(),
                        BehaviorAction::Classify => "classify".into(),
                    }),
                );
                put("input", input.as_deref().map(path_str));
                put("model", model.clone());
                put("rate", rate.map(|x| x.to_string()));
                put("alpha", alpha.map(|x| x.to_string()));
                put("xmin", xmin.map(|x| x.to_string()));
                put("length", length.map(|x| x.to_string()));
                put("levy_below", levy_below.map(|x| x.to_string()));
                put("noise_above", noise_above.map(|x| x.to_string()));
            }
            Command::Run | Command::Validate => {}
        }
        out
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.global.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => match cli.command.experiment() {
            Some(name) => ExperimentConfig::new(name),
            None => bail!("`run` and `validate` need --config"),
        },
    };
    if let Some(name) = cli.command.experiment() {
        if config.experiment != name {
            bail!(
                "config file is for `{}` but the command is `{name}`",
                config.experiment
            );
        }
    }
    if let Some(seed) = cli.global.seed {
        config.seed = seed;
    }
    if let Some(trials) = cli.global.trials {
        config.trials = Some(trials);
    }
    if let Some(format) = cli.global.format {
        config.format = match format {
            Format::JsonLines => OutputFormat::JsonLines,
            Format::Csv => OutputFormat::Csv,
        };
    }
    for (k, v) in cli.command.params() {
        config.set(k, &v)?;
    }
    if cli.global.records {
        config.set("records", "true")?;
    }
    for pair in &cli.global.set {
        let (k, v) = pair
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got `{pair}`"))?;
        config.set(k.trim(), v.trim())?;
    }
    Ok(config)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main(cli: &Cli) -> Result<ExitCode> {
    let config = build_config(cli)?;
    let violations = validate(&config);
    if matches!(cli.command, Command::Validate) {
        if violations.is_empty() {
            println!("ok");
            return Ok(ExitCode::SUCCESS);
        }
        for v in &violations {
            println!("{v}");
        }
        return Ok(ExitCode::from(2));
    }
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("invalid config: {v}");
        }
        return Ok(ExitCode::from(2));
    }
    let report = run(&config)?;
    let text = match &report.artifact {
        Some(artifact) => artifact.clone(),
        None => report.render(),
    };
    emit(cli.global.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}
