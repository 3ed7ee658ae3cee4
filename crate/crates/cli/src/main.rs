use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use twinloop_core::collide::SolverConfig;
use twinloop_core::families::DEFAULT_EPS;
use twinloop_core::Error;

mod commands;
mod manifest;

use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "twinloop", version, about = "W1/W2 invariants of loops of circles in S1 x S3")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute W1 and W2 of a family.
    #[command(subcommand)]
    Invariants(InvariantsCommand),
    /// Export families in the sampled text format.
    #[command(subcommand)]
    Families(FamiliesCommand),
    /// Dump the collision classes of a family.
    #[command(subcommand)]
    Collisions(CollisionsCommand),
    /// Signed crossings of each circle with a slice, as CSV.
    SliceProfile(SliceProfileArgs),
    /// Abelian presentations and their Smith normal form.
    #[command(subcommand)]
    Presentation(PresentationCommand),
    /// Run the order-two certification end to end.
    Theorem(TheoremArgs),
}

#[derive(Subcommand, Debug)]
enum InvariantsCommand {
    Compute(ComputeArgs),
}

#[derive(Subcommand, Debug)]
enum FamiliesCommand {
    Export(ExportArgs),
}

#[derive(Subcommand, Debug)]
enum CollisionsCommand {
    Dump(DumpArgs),
}

#[derive(Subcommand, Debug)]
enum PresentationCommand {
    M0(M0Args),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    T,
    Tbar,
    Spin,
    Import,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct FamilyArgs {
    #[arg(long, value_enum)]
    pub family: FamilyKind,
    /// Family index; the winding number for `spin`.
    #[arg(long = "i", default_value_t = 1, allow_negative_numbers = true)]
    pub index: i64,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    /// Sampled family file, required with `--family import`.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Scan grid size per axis.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-12)]
    pub newton_tol: f64,
    #[arg(long, default_value_t = 30)]
    pub max_newton: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dedupe_radius: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub transversality_floor: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub slice_angle: f64,
}

impl SolverArgs {
    pub fn config(&self) -> twinloop_core::Result<SolverConfig> {
        let cfg = SolverConfig {
            grid: (self.grid, self.grid, self.grid),
            newton_tol: self.newton_tol,
            max_newton: self.max_newton,
            dedupe_radius: self.dedupe_radius,
            transversality_floor: self.transversality_floor,
            slice_angle: self.slice_angle,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct ComputeArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = 256)]
    pub nt: usize,
    #[arg(long, default_value_t = 256)]
    pub nz: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DumpArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SliceProfileArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Number of time samples, taken at cell midpoints.
    #[arg(long, default_value_t = 64)]
    pub t_samples: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub slice_angle: f64,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct M0Args {
    /// Multipliers n1,n2,...
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub n: Vec<i64>,
    /// Signs, one per multiplier, written `+` or `-`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_sign, required = true)]
    pub signs: Vec<i8>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TheoremArgs {
    /// Number of T̄ families to include.
    #[arg(long = "N", default_value_t = 2)]
    pub count: i64,
    /// Sampled files replacing T̄(1), T̄(2), ... in order.
    #[arg(long = "import")]
    pub imports: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn parse_sign(s: &str) -> Result<i8, String> {
    match s.trim() {
        "+" | "+1" | "1" => Ok(1),
        "-" | "-1" => Ok(-1),
        other => Err(format!("expected + or -, got {other:?}")),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) => 1,
        Error::Format(_) | Error::UnitSphereViolation { .. } | Error::LoopConditionViolation { .. } | Error::Io(_) => 3,
        _ => 2,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("TWIN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| format!("TWIN_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err("TWIN_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }

    let started = Instant::now();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let result = match &cli.command {
        Command::Invariants(InvariantsCommand::Compute(a)) => commands::invariants(a),
        Command::Families(FamiliesCommand::Export(a)) => commands::export(a),
        Command::Collisions(CollisionsCommand::Dump(a)) => commands::collisions(a),
        Command::SliceProfile(a) => commands::slice_profile(a),
        Command::Presentation(PresentationCommand::M0(a)) => commands::presentation(a),
        Command::Theorem(a) => commands::theorem(a),
    };
    match result {
        Ok(run) => {
            let manifest = RunManifest::new(argv, run.config, started.elapsed(), run.outputs.clone());
            if let Err(e) = manifest.emit(run.outputs.first()) {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code(&e));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
