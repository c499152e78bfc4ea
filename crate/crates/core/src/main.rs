use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use fdedim::commands::{run, Command, Outcome};
use fdedim::config::{set_path, RunConfig};
use fdedim::{Error, ErrorClass};

const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

/// Dimension bounds for delay-equation attractors and the numerical checks
/// behind them.
///
/// Every verb reads a JSON config (`--config`) and writes its results into
/// `output_dir`. Flags override the matching config keys; `--set path=json`
/// overrides any key. Set FDEDIM_THREADS to limit the worker threads.
#[derive(Parser)]
#[command(name = "fdedim", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Ordered spectrum of the reaction-diffusion equation.
    Roots(Flags),
    /// Hausdorff and fractal bounds at one (alpha, t0).
    Bounds(Flags),
    /// Grid and golden-section search for the smallest bound.
    Optimize(Flags),
    /// One trajectory from a random initial history.
    Simulate(Flags),
    /// Squeezing inequalities along random trajectory pairs.
    SqueezeCheck(Flags),
    /// Absorbing-ball entry or the norm envelope along random runs.
    AbsorbingCheck(Flags),
    /// Box-counting estimate on a sampled attractor.
    Boxdim(Flags),
    /// Build or check a covering of a ball by smaller balls.
    CoverCheck(Flags),
    /// Roots through box counting for the reaction-diffusion equation.
    Pipeline(Flags),
}

#[derive(Args, Default)]
struct Flags {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set decomposition.trials=50`.
    #[arg(long = "set", value_name = "PATH=JSON")]
    set: Vec<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// rde or rfde, when the config has both.
    #[arg(long)]
    system: Option<String>,

    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    num_modes: Option<usize>,
    /// Nonlinearity `kappa tanh(u) + offset` of the reaction-diffusion equation.
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "kappa")]
    offset: Option<f64>,

    #[arg(long)]
    max_mode: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    floor: Option<f64>,
    /// Literal sign convention `n^2 - (lambda + a + b e^{-lambda r}) = 0`.
    #[arg(long)]
    paper_sign: bool,

    /// Spectral cut.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,

    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    /// derived or statement.
    #[arg(long)]
    m1: Option<String>,
    /// raw, rde or rfde.
    #[arg(long)]
    source: Option<String>,
    /// hausdorff or fractal.
    #[arg(long)]
    target: Option<String>,

    #[arg(long)]
    horizon: Option<f64>,
}

impl Flags {
    /// `(json path, value)` pairs for every flag given.
    fn overrides(&self, verb: Command) -> Result<Vec<(String, Value)>, Error> {
        let mut o: Vec<(String, Value)> = Vec::new();
        let mut put = |path: &str, v: Value| o.push((path.to_string(), v));
        if let Some(d) = &self.output_dir {
            put("/output_dir", json!(d));
        }
        if let Some(s) = self.seed {
            put("/seed", json!(s));
        }
        if let Some(s) = &self.system {
            put("/system", json!(s));
        }
        for (key, v) in [("a", self.a), ("b", self.b), ("r", self.r)] {
            if let Some(v) = v {
                put(&format!("/rde/{key}"), json!(v));
            }
        }
        if let Some(n) = self.num_modes {
            put("/rde/num_modes", json!(n));
        }
        match (self.kappa, self.offset) {
            (Some(k), Some(off)) => put("/rde/nonlinearity", json!({"kind": "affine_tanh", "kappa": k, "offset": off})),
            (Some(k), None) => put("/rde/nonlinearity", json!({"kind": "tanh", "kappa": k})),
            _ => {}
        }
        if let Some(n) = self.max_mode {
            put("/spectrum/max_mode", json!(n));
        }
        if let Some(f) = self.floor {
            put("/spectrum/floor", json!(f));
        }
        if self.paper_sign {
            put("/spectrum/paper_sign", json!(true));
        }
        for (key, v) in [("m", self.m), ("nodes", self.nodes), ("trials", self.trials)] {
            if let Some(v) = v {
                put(&format!("/decomposition/{key}"), json!(v));
            }
        }
        if let Some(dt) = self.dt {
            put("/decomposition/dt", json!(dt));
            put("/simulate/dt", json!(dt));
        }
        if let Some(a) = self.alpha {
            put("/bounds/alpha", json!(a));
        }
        if let Some(t) = self.t0 {
            put("/bounds/t0", json!(t));
        }
        for (key, v) in [("m1", &self.m1), ("source", &self.source)] {
            if let Some(v) = v {
                put(&format!("/bounds/{key}"), json!(v));
            }
        }
        if let Some(t) = &self.target {
            put("/optimize/target", json!(t));
        }
        if let Some(h) = self.horizon {
            let block = match verb {
                Command::SqueezeCheck => "squeeze_check",
                Command::AbsorbingCheck => "absorbing_check",
                Command::Boxdim => "boxdim",
                _ => "simulate",
            };
            put(&format!("/{block}/horizon"), json!(h));
        }
        for s in &self.set {
            let (path, text) =
                s.split_once('=').ok_or_else(|| Error::Config(format!("--set expects PATH=JSON, got `{s}`")))?;
            let value = serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()));
            o.push((format!("/{}", path.replace('.', "/")), value));
        }
        Ok(o)
    }

    fn config(&self, verb: Command) -> Result<RunConfig, Error> {
        let mut value = match &self.config {
            Some(path) => RunConfig::read_value(path)?,
            None => json!({}),
        };
        for (path, v) in self.overrides(verb)? {
            set_path(&mut value, &path, v)?;
        }
        RunConfig::from_value(value)
    }
}

fn init_threads() -> Result<(), Error> {
    let Ok(text) = std::env::var("FDEDIM_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("FDEDIM_THREADS must be a positive integer, got `{text}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Usage | ErrorClass::Io => EXIT_USAGE,
        ErrorClass::Numerical => EXIT_NUMERICAL,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (verb, flags) = match cli.verb {
        Verb::Roots(f) => (Command::Roots, f),
        Verb::Bounds(f) => (Command::Bounds, f),
        Verb::Optimize(f) => (Command::Optimize, f),
        Verb::Simulate(f) => (Command::Simulate, f),
        Verb::SqueezeCheck(f) => (Command::SqueezeCheck, f),
        Verb::AbsorbingCheck(f) => (Command::AbsorbingCheck, f),
        Verb::Boxdim(f) => (Command::Boxdim, f),
        Verb::CoverCheck(f) => (Command::CoverCheck, f),
        Verb::Pipeline(f) => (Command::Pipeline, f),
    };
    let result = init_threads().and_then(|_| flags.config(verb)).and_then(|cfg| run(verb, &cfg));
    match result {
        Ok(res) => {
            for f in &res.files {
                eprintln!("wrote {}", f.display());
            }
            println!("{}", res.summary);
            match res.outcome {
                Outcome::Success => ExitCode::SUCCESS,
                Outcome::Infeasible(reason) => {
                    eprintln!("infeasible: {reason}");
                    ExitCode::from(EXIT_INFEASIBLE)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
