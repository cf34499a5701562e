use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evolad_cli::{run_ablate, run_replay, run_sweep, run_synth_gen, CliError, Overrides, Result, RunConfig};
use evolad_service::{Mode, Server, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "evolad", version, about = "Self-evolving anomaly detection: replays, ablations, sweeps and the service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the loop over a labeled stream with an oracle labeler.
    Replay(BatchArgs),
    /// Replay every combination of the SMOTE / biased-init / self-evolving toggles.
    Ablate {
        #[command(flatten)]
        args: BatchArgs,
        /// Axes to vary; the others stay at the configured value.
        #[arg(long, value_delimiter = ',')]
        axes: Option<Vec<Axis>>,
    },
    /// Rank attributes at several λ values.
    Sweep {
        #[command(flatten)]
        args: BatchArgs,
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[arg(long)]
        top_k: Option<usize>,
        /// Records generated when sweeping a synthetic stream.
        #[arg(long)]
        records: Option<usize>,
    },
    /// Write a labeled synthetic stream as CSV.
    SynthGen(BatchArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct BatchArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

impl BatchArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        self.overrides.apply(&mut cfg);
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Axis {
    Smote,
    BiasedInit,
    SelfEvolving,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// TOML service configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// `replay` closes epochs when the verification timeout lapses.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    timeout_secs: Option<u64>,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    match s {
        "live" => Ok(Mode::Live),
        "replay" => Ok(Mode::Replay),
        other => Err(format!("expected live or replay, got `{other}`")),
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Replay(_) => "replay",
            Command::Ablate { .. } => "ablate",
            Command::Sweep { .. } => "sweep",
            Command::SynthGen(_) => "synth-gen",
            Command::Serve(_) => "serve",
        }
    }
}

fn restrict_axes(cfg: &mut RunConfig, axes: &[Axis]) {
    let g = &mut cfg.ablation;
    if !axes.contains(&Axis::Smote) {
        g.smote = vec![cfg.replay.evolution.smote.is_some()];
    }
    if !axes.contains(&Axis::BiasedInit) {
        g.biased_init = vec![cfg.replay.detector.biased_init];
    }
    if !axes.contains(&Axis::SelfEvolving) {
        g.self_evolving = vec![!cfg.replay.evolution.all_evolving];
    }
}

fn serve(args: &ServeArgs) -> Result<serde_json::Value> {
    let mut cfg = match &args.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    if let Some(v) = &args.bind {
        cfg.bind = v.clone();
    }
    if let Some(v) = &args.data_dir {
        cfg.data_dir = v.clone();
    }
    if let Some(v) = args.mode {
        cfg.mode = v;
    }
    if let Some(v) = args.timeout_secs {
        cfg.verification_timeout_secs = v;
    }
    cfg.validate()?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Write {
        path: PathBuf::from("<runtime>"),
        source: e,
    })?;
    runtime.block_on(async move {
        let server = Server::bind(cfg).await?;
        // first stdout line: where to connect
        println!("{}", serde_json::json!({ "listening": server.local_addr()?.to_string() }));
        server.run().await?;
        Ok(serde_json::json!({ "stopped": true }))
    })
}

fn run(command: &Command) -> Result<serde_json::Value> {
    match command {
        Command::Replay(a) => run_replay(&a.resolve()?, &a.out),
        Command::Ablate { args, axes } => {
            let mut cfg = args.resolve()?;
            if let Some(axes) = axes {
                restrict_axes(&mut cfg, axes);
            }
            run_ablate(&cfg, &args.out)
        }
        Command::Sweep { args, lambdas, top_k, records } => {
            let mut cfg = args.resolve()?;
            if let Some(v) = lambdas {
                cfg.sweep.lambdas = v.clone();
            }
            if let Some(v) = top_k {
                cfg.sweep.top_k = *v;
            }
            if let Some(v) = records {
                cfg.sweep.records = *v;
            }
            run_sweep(&cfg, &args.out)
        }
        Command::SynthGen(a) => run_synth_gen(&a.resolve()?, &a.out),
        Command::Serve(a) => serve(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_owned());
            eprintln!("{}", err.summary("evolad"));
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    tracing_subscriber::fmt().with_writer(std::io::stderr).with_target(false).init();
    match run(&cli.command) {
        Ok(out) => {
            // a closed stdout is not a failure of the run
            let _ = writeln!(std::io::stdout(), "{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.summary(cli.command.name()));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
