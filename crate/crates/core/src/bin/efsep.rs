use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use efsep::cli::{emit_report, exit_code, interactive_play, read_json, run_scenario_file, Format, GroupJson, RunOptions};
use efsep::efgame::{GameSpec, Player, SolveOptions};
use efsep::trees::{Tree, TreeJson};
use efsep::Error;

#[derive(Parser)]
#[command(name = "efsep", version, about = "Tree-indexed EF games and filtration checks for abelian groups")]
struct Cli {
    /// Seed for every randomized step; overrides seeds inside scenario files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// State budget for the game solver.
    #[arg(long, global = true, default_value_t = SolveOptions::default().max_states)]
    max_states: usize,
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: FormatArg,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SideArg {
    Forall,
    Exists,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file and report every check.
    Run { scenario: PathBuf },
    /// Play a game interactively against the solver.
    Play {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// The player you control.
        #[arg(long, value_enum)]
        side: SideArg,
        #[arg(long, default_value_t = 4096)]
        max_order: usize,
        /// Write the finished transcript as JSON here.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

fn play(cli: &Cli) -> Result<(), Error> {
    let Cmd::Play { tree, left, right, side, max_order, transcript } = &cli.cmd else {
        unreachable!()
    };
    let schema = |e: Error| Error::Schema(e.to_string());
    let tree = Tree::from_json(&read_json::<TreeJson>(tree)?).map_err(schema)?;
    let left = read_json::<GroupJson>(left)?.to_presentation()?;
    let right = read_json::<GroupJson>(right)?.to_presentation()?;
    let spec = GameSpec::finite(&left, &right, &tree, *max_order).map_err(schema)?;
    let human = match side {
        SideArg::Forall => Player::Forall,
        SideArg::Exists => Player::Exists,
    };
    let stdin = std::io::stdin();
    let t = interactive_play(&spec, human, &mut stdin.lock(), &mut std::io::stdout(), cli.max_states)?;
    let body = serde_json::to_string_pretty(&t).expect("serialize");
    if let Some(p) = transcript {
        std::fs::write(p, &body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    }
    if matches!(cli.format, FormatArg::Json) {
        println!("{body}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = match cli.format {
        FormatArg::Text => Format::Text,
        FormatArg::Json => Format::Json,
    };
    let code = match &cli.cmd {
        Cmd::Run { scenario } => {
            let opts = RunOptions { seed: cli.seed, max_states: cli.max_states };
            let r = run_scenario_file(scenario, &opts);
            match &r {
                Ok(rep) => print!("{}", emit_report(rep, format)),
                Err(e) => eprintln!("efsep: {e}"),
            }
            exit_code(&r)
        }
        Cmd::Play { .. } => match play(&cli) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("efsep: {e}");
                if matches!(e, Error::Schema(_) | Error::Io(_)) {
                    2
                } else {
                    1
                }
            }
        },
    };
    ExitCode::from(code as u8)
}
