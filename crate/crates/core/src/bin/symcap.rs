use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use symcap::cli::{error_json, run, Command, OutputFormat, RunConfig};

#[derive(Parser)]
#[command(
    name = "symcap",
    version,
    about = "Action spectra and spectral capacities of convex bodies"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Body as inline JSON or a path to a JSON file.
    #[arg(long, global = true)]
    body: Option<String>,
    #[arg(long = "k", global = true, default_value_t = 4)]
    k: usize,
    #[arg(long, global = true, default_value_t = 32)]
    lmax: usize,
    #[arg(long, global = true, default_value_t = 512)]
    grid: usize,
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long = "tol-grad", global = true, default_value_t = 1e-9)]
    tol_grad: f64,
    #[arg(long, global = true, value_enum, default_value_t = Out::Json)]
    out: Out,
    /// JSON-lines solver trace on stderr.
    #[arg(long, global = true)]
    trace: bool,
    #[arg(long = "no-timestamp", global = true)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Critical circles with indices and orbit residuals
    Spectrum,
    /// c_1..c_k from the index dictionary
    Capacities,
    /// Besse and Zoll verdicts
    Besse,
    /// Finite-difference and identity checks
    Gradcheck,
    /// Closed-form ellipsoid values
    Oracle {
        /// Comma separated ellipsoid axes.
        #[arg(long, value_delimiter = ',')]
        a: Option<Vec<f64>>,
    },
    /// Capacities across the l_max and grid sweep
    Converge,
}

#[derive(Clone, Copy, ValueEnum)]
enum Out {
    Json,
    Csv,
}

struct JsonLines;

impl log::Log for JsonLines {
    fn enabled(&self, _: &log::Metadata) -> bool {
        true
    }

    fn log(&self, r: &log::Record) {
        let msg = r.args().to_string();
        let data = serde_json::from_str::<serde_json::Value>(&msg)
            .unwrap_or(serde_json::Value::String(msg));
        let line =
            serde_json::json!({"level": r.level().as_str(), "target": r.target(), "data": data});
        let _ = writeln!(std::io::stderr(), "{line}");
    }

    fn flush(&self) {}
}

static LOGGER: JsonLines = JsonLines;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, a) = match cli.command {
        Cmd::Spectrum => (Command::Spectrum, None),
        Cmd::Capacities => (Command::Capacities, None),
        Cmd::Besse => (Command::Besse, None),
        Cmd::Gradcheck => (Command::Gradcheck, None),
        Cmd::Oracle { a } => (Command::Oracle, a),
        Cmd::Converge => (Command::Converge, None),
    };
    let cfg = RunConfig {
        command,
        body: cli.body,
        a,
        l_max: cli.lmax,
        grid: cli.grid,
        k_max: cli.k,
        eta: cli.eta,
        seed: cli.seed,
        tol_grad: cli.tol_grad,
        out: match cli.out {
            Out::Json => OutputFormat::Json,
            Out::Csv => OutputFormat::Csv,
        },
        trace: cli.trace,
        no_timestamp: cli.no_timestamp,
    };
    if cfg.trace {
        let _ = log::set_logger(&LOGGER).map(|()| log::set_max_level(log::LevelFilter::Debug));
    }
    match run(&cfg) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
