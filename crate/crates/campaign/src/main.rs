use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lipfrag_campaign::config::AxisKind;
use lipfrag_campaign::ensemble::parse_case;
use lipfrag_campaign::io::read_reference_csv;
use lipfrag_campaign::{
    run_ensemble, run_single, run_sweep, CampaignError, Overrides, RunConfig, SchemeKind, SweepAxis, Variant,
};

#[derive(Parser)]
#[command(name = "lipfrag", about = "Dynamic fragmentation of a 1D brittle bar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run {
        #[command(flatten)]
        common: Common,
        /// Seed for the modulus field (default: first configured seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the configured seeds and report mean and standard deviation.
    Ensemble {
        #[command(flatten)]
        common: Common,
    },
    /// Run one ensemble per value of a configuration axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// mesh-ratio, strain-rate or variant-scheme (default: the file's [sweep] table).
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated axis values, e.g. `1e4,1e5` or `czm/explicit,czm/implicit`.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<String>>,
        /// Literature points to include in the table.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Check a configuration and print it with all defaults filled in.
    ValidateConfig {
        #[command(flatten)]
        common: Common,
    },
    /// Print the version.
    Version,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    /// Imposed strain rate, 1/s.
    #[arg(long)]
    strain_rate: Option<f64>,
    /// Element size as a fraction of the regularization length: h_e = ℓ / k.
    #[arg(long)]
    ell_ratio: Option<f64>,
    /// Explicit element count (replaces ell-ratio).
    #[arg(long)]
    elements: Option<usize>,
    /// Coefficient of variation of the modulus; 0 for a uniform bar.
    #[arg(long)]
    cv: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    max_steps: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CampaignError> {
        let overrides = Overrides {
            variant: self.variant.as_deref().map(str::parse::<Variant>).transpose()?,
            scheme: self.scheme.as_deref().map(str::parse::<SchemeKind>).transpose()?,
            strain_rate: self.strain_rate,
            ell_ratio: self.ell_ratio,
            elements: self.elements,
            cv: self.cv,
            seeds: self.seeds.clone(),
            t_max: self.t_max,
            max_steps: self.max_steps,
            output: self.out.clone(),
            workers: self.workers,
        };
        let cfg = RunConfig::load(self.config.as_deref(), &overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_axis(cfg: &RunConfig, axis: Option<&str>, values: Option<&[String]>) -> Result<SweepAxis, CampaignError> {
    let mut sweep = cfg.sweep.clone().unwrap_or_default();
    if let Some(a) = axis {
        sweep.axis = match a {
            "mesh-ratio" | "mesh" => AxisKind::MeshRatio,
            "strain-rate" | "rate" => AxisKind::StrainRate,
            "variant-scheme" => AxisKind::VariantScheme,
            other => return Err(CampaignError::Validation(format!("unknown sweep axis '{other}'"))),
        };
    }
    if let Some(v) = values {
        if sweep.axis == AxisKind::VariantScheme {
            for c in v {
                parse_case(c)?;
            }
            sweep.cases = v.to_vec();
        } else {
            sweep.values = v
                .iter()
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| CampaignError::Validation(format!("bad axis value '{s}'")))
                })
                .collect::<Result<_, _>>()?;
        }
    }
    SweepAxis::from_config(&sweep)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), CampaignError> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v)?;
    // a closed pipe (e.g. `| head`) is not an error of the run
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CampaignError> {
    match cli.command {
        Command::Version => println!("lipfrag {}", env!("CARGO_PKG_VERSION")),
        Command::ValidateConfig { common } => {
            let cfg = common.load()?;
            print!("{}", cfg.to_toml_string()?);
            eprintln!("config_hash = {}", cfg.hash());
        }
        Command::Run { common, seed } => {
            let cfg = common.load()?;
            let seed = seed.or_else(|| cfg.stochastic.seeds.first().copied()).unwrap_or(0);
            let result = run_single(&cfg, seed)?;
            print_json(&result.summary)?;
        }
        Command::Ensemble { common } => {
            let cfg = common.load()?;
            let e = run_ensemble(&cfg, &cfg.stochastic.seeds)?;
            print_json(&e.aggregate)?;
            if e.aggregate.partial {
                return Err(CampaignError::Numerical(format!("{} runs failed", e.aggregate.failed)));
            }
        }
        Command::Sweep {
            common,
            axis,
            values,
            reference,
        } => {
            let cfg = common.load()?;
            let axis = parse_axis(&cfg, axis.as_deref(), values.as_deref())?;
            let reference_path = reference.or_else(|| cfg.sweep.as_ref().and_then(|s| s.reference.clone()));
            let reference = match reference_path {
                Some(p) => read_reference_csv(&p)?,
                None => Vec::new(),
            };
            let s = run_sweep(&cfg, &axis, &cfg.stochastic.seeds, &reference)?;
            println!("value,dissipated_mean,fragment_size_mean,error");
            for r in &s.rows {
                if let Some(a) = &r.aggregate {
                    println!(
                        "{},{:e},{:e},{}",
                        r.value,
                        a.dissipated_mean,
                        a.fragment_size_mean,
                        r.error.clone().unwrap_or_default()
                    );
                } else if r.reference.is_none() {
                    println!("{},,,{}", r.value, r.error.clone().unwrap_or_default());
                }
            }
            if s.rows.iter().any(|r| r.error.is_some()) {
                return Err(CampaignError::Numerical("some sweep cells failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
