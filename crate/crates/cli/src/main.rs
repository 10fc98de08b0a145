mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{ConfigError, RunConfig};
use gqfi_core::GqfiError;

/// Gaussian QFI experiment runner.
#[derive(Parser, Debug)]
#[command(name = "gqfi", version)]
struct Cli {
    /// trajectory, sweep, asymptotics, validate, bounds, dephasing, skin,
    /// or a figure preset (fig2b, fig3b, fig4, fig5, fig6f, fig6g, fig7b, fig8)
    mode: String,
    /// Flat `key = value` config file; optional for presets.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "GQFI_JOBS")]
    jobs: Option<usize>,
}

enum Failure {
    Config(String),
    Numerical(GqfiError),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<GqfiError> for Failure {
    fn from(e: GqfiError) -> Self {
        match e {
            GqfiError::InvalidInput(msg) => Failure::Config(msg),
            e => Failure::Numerical(e),
        }
    }
}

fn load(cli: &Cli) -> Result<(String, String, RunConfig), Failure> {
    let (mode, mut kv) = match run::preset_defaults(&cli.mode) {
        Some((mode, text)) => (mode.to_string(), config::parse(text)?),
        None if run::MODES.contains(&cli.mode.as_str()) => (cli.mode.clone(), Default::default()),
        None => return Err(Failure::Config(format!("unknown mode '{}'", cli.mode))),
    };
    match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            kv.extend(config::parse(&text)?);
        }
        None if !run::PRESETS.contains(&cli.mode.as_str()) => return Err(Failure::Config("--config is required".into())),
        None => {}
    }
    Ok((cli.mode.clone(), mode, RunConfig::resolve(&kv)?))
}

fn execute(cli: &Cli) -> Result<PathBuf, Failure> {
    let (name, mode, cfg) = load(cli)?;
    let body = match mode.as_str() {
        "trajectory" => run::trajectory(&cfg)?,
        "sweep" => run::sweep(&cfg, cfg.sweep()?, run::preset_extra(&name))?,
        "asymptotics" => run::asymptotics(&cfg)?,
        "validate" => run::validate(&cfg)?,
        "bounds" => run::bounds(&cfg, cfg.sweep()?)?,
        "dephasing" => run::dephasing(&cfg, cfg.sweep()?)?,
        "skin" => run::skin(&cfg)?,
        _ => unreachable!("mode resolved in load"),
    };
    std::fs::create_dir_all(&cli.out).map_err(|e| Failure::Config(format!("{}: {e}", cli.out.display())))?;
    let path = cli.out.join(format!("{}{name}.csv", cfg.prefix));
    let text = cfg.header(&name) + &body;
    std::fs::write(&path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build().expect("thread pool");
    match pool.install(|| execute(&cli)) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical error {}: {e}", e.name());
            ExitCode::from(2)
        }
    }
}
