mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "photon-tn",
    version,
    about = "Photonic MPS/PEPS from sequential photon scattering"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Model file replacing the one named by the protocol
    #[arg(long, global = true, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Graph edge-list file
    #[arg(long, global = true, value_name = "FILE")]
    pub graph: Option<PathBuf>,
    /// Where to write the command's artifact (tensor, protocol or model file)
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Seed for randomized checks
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for independent checks (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Override the pass threshold of numerical checks
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a protocol on the full state vector
    Run { protocol: PathBuf },
    /// Compile a protocol to an MPS or (with --graph) a PEPS and compare with the oracle
    Build {
        protocol: PathBuf,
        #[arg(long, conflicts_with = "peps")]
        mps: bool,
        #[arg(long, requires = "graph")]
        peps: bool,
    },
    /// Decompose --graph into Euler trails and emit the protocol skeleton
    Schedule,
    /// Compile --graph into a cluster-state protocol and check its stabilizers
    Cluster,
    /// Design an S-matrix that regenerates a translation-invariant MPS
    Synthesize { mps: PathBuf },
    /// Run the randomized verification suites
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let g = &cli.global;
    let result = match &cli.command {
        Command::Run { protocol } => commands::run(argv, g, protocol),
        Command::Build {
            protocol,
            mps,
            peps,
        } => commands::build(argv, g, protocol, *mps || !*peps),
        Command::Schedule => commands::schedule(argv, g),
        Command::Cluster => commands::cluster(argv, g),
        Command::Synthesize { mps } => commands::synthesize(argv, g, mps),
        Command::Verify => commands::verify(argv, g),
    };
    match result {
        Ok(report) => {
            let pass = report.pass();
            println!(
                "{}",
                serde_json::to_string_pretty(&report.finish()).expect("report serializes")
            );
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
