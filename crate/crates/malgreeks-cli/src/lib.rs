//! Command-line front end: flat JSON experiment configs with flag
//! overrides, CSV/JSON reports, and scriptable exit codes
//! (0 success, 2 config error, 3 unreliable estimate, 4 engine error).

pub mod config;
pub mod runner;

use clap::Parser;

use config::{CliError, ExperimentConfig, ModelRef};
use runner::{format_comparisons, run, write_output};

/// Monte Carlo Greeks under stochastic volatility via integration-by-parts
/// weights.
#[derive(Debug, Parser)]
#[command(name = "malgreeks", version, about)]
pub struct Args {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Built-in model name (bs, scott), a model JSON file path, or an
    /// inline JSON document.
    #[arg(long)]
    pub model: Option<String>,
    /// call | put | digital-call | identity | constant-one
    #[arg(long)]
    pub payoff: Option<String>,
    #[arg(long)]
    pub strike: Option<f64>,
    /// Comma-separated list: price,delta,gamma,rho,vega
    #[arg(long, value_delimiter = ',')]
    pub greek: Option<Vec<String>>,
    /// Comma-separated list: malliavin,malliavin-paper-literal,
    /// finite-difference,closed-form,pathwise-tangent
    #[arg(long, value_delimiter = ',')]
    pub method: Option<Vec<String>>,
    #[arg(long)]
    pub paths: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores). With 1, reports are byte-identical
    /// across runs and the timing column is zeroed.
    #[arg(long)]
    pub workers: Option<usize>,
    /// corrected | paper-literal (promotes plain malliavin rows)
    #[arg(long)]
    pub mode: Option<String>,
    /// full-square | paper-region
    #[arg(long)]
    pub region: Option<String>,
    /// chain-rule | paper-literal
    #[arg(long)]
    pub convention: Option<String>,
    /// discrete-exact | analytic
    #[arg(long)]
    pub backend: Option<String>,
    /// Report derivatives of the undiscounted expectation.
    #[arg(long)]
    pub no_discount: bool,
    /// Average each path with its antithetic mirror.
    #[arg(long)]
    pub antithetic: bool,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    /// csv | json
    #[arg(long)]
    pub format: Option<String>,
    /// Write per-step path states (first 1000 paths) to this CSV.
    #[arg(long)]
    pub dump_paths: Option<std::path::PathBuf>,
    /// Write per-path Malliavin scalars to this CSV.
    #[arg(long)]
    pub dump_malliavin: Option<std::path::PathBuf>,
    /// Print the fully resolved config (all defaults explicit) and exit.
    #[arg(long)]
    pub print_config: bool,
}

fn parse_enum<T: serde::de::DeserializeOwned>(field: &str, value: &str) -> Result<T, CliError> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|e| CliError::config(format!("config error in `{field}`: {e}")))
}

pub fn build_config(args: &Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("config error in `config`: {}: {e}", path.display()))
            })?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &args.model {
        cfg.model = ModelRef::Name(m.clone());
    }
    if let Some(p) = &args.payoff {
        cfg.payoff = p.clone();
    }
    if let Some(s) = args.strike {
        cfg.strike = s;
    }
    if let Some(g) = &args.greek {
        cfg.greeks = g.clone();
    }
    if let Some(m) = &args.method {
        cfg.methods = m.clone();
    }
    if let Some(n) = args.paths {
        cfg.n_paths = n;
    }
    if let Some(n) = args.steps {
        cfg.n_steps = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(m) = &args.mode {
        cfg.mode = parse_enum("mode", m)?;
    }
    if let Some(r) = &args.region {
        cfg.region = parse_enum("region", r)?;
    }
    if let Some(c) = &args.convention {
        cfg.convention = parse_enum("convention", c)?;
    }
    if let Some(b) = &args.backend {
        cfg.backend = parse_enum("backend", b)?;
    }
    if args.no_discount {
        cfg.discount = false;
    }
    if args.antithetic {
        cfg.antithetic = true;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if let Some(f) = &args.format {
        cfg.format = f.clone();
    }
    if let Some(p) = &args.dump_paths {
        cfg.dump_paths = Some(p.clone());
    }
    if let Some(p) = &args.dump_malliavin {
        cfg.dump_malliavin = Some(p.clone());
    }
    Ok(cfg)
}

/// Full CLI entry point; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            // clap handles --help/--version by "erroring" with the text
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn execute(args: &Args) -> Result<i32, CliError> {
    let cfg = build_config(args)?;
    if args.print_config {
        println!("{}", cfg.to_json());
        return Ok(0);
    }
    let resolved = cfg.resolve()?;
    let output = run(&resolved)?;
    write_output(&output, &resolved)?;

    println!("{}", output.csv.trim_end());
    if !output.report.comparisons.is_empty() {
        println!("\npairwise comparisons:");
        print!("{}", format_comparisons(&output.report.comparisons));
    }
    if output.unreliable {
        eprintln!(
            "warning: at least one estimate excluded more than {:.1}% of paths",
            100.0 * malgreeks::greeks::estimator::MAX_EXCLUSION_RATIO
        );
        return Ok(3);
    }
    Ok(0)
}
