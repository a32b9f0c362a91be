use clap::{Parser, Subcommand};
use smms_core::cli::{self, CliError, KSource, Mode, Report, EXIT_INPUT};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "smms", version, about = "Weighted curvature and quasi-Einstein obstructions on sampled metric measure spaces")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an obstruction pipeline over the sample points
    Check {
        file: String,
        #[arg(long, default_value = "qe")]
        mode: Mode,
        /// decision threshold
        #[arg(long)]
        tol: Option<f64>,
        /// relative singular-value floor for genericity
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        json: Option<String>,
    },
    /// Check the trace and divergence identities of the weighted curvature
    Verify {
        file: String,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        json: Option<String>,
    },
    /// Integrate K along a polygon `x0,y0;x1,y1;…`
    Potential {
        file: String,
        #[arg(long)]
        path: String,
        /// `file` for the file's k field, or a pipeline: qe, soliton, static
        #[arg(long, default_value = "file")]
        from: String,
        #[arg(long, default_value_t = 16)]
        nodes: usize,
        #[arg(long)]
        json: Option<String>,
    },
    /// Harnack-form identities and asymptotics for the unit density with μ = −1/2
    Harnack {
        file: String,
        #[arg(long, value_delimiter = ',', default_value = "1e2,1e3,1e4")]
        m: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        json: Option<String>,
    },
}

fn run(args: Args) -> Result<(Report, Option<String>), CliError> {
    match args.cmd {
        Cmd::Check { file, mode, tol, eps, json } => {
            let mut f = cli::load(&file)?;
            if let Some(t) = tol {
                f.config.decision_tol = t;
            }
            if let Some(e) = eps {
                f.config.generic_eps = e;
            }
            Ok((cli::cmd_check(&f, mode)?, json))
        }
        Cmd::Verify { file, tol, json } => {
            let mut f = cli::load(&file)?;
            if let Some(t) = tol {
                f.config.identity_tol = t;
            }
            Ok((cli::cmd_verify(&f)?, json))
        }
        Cmd::Potential { file, path, from, nodes, json } => {
            let f = cli::load(&file)?;
            let source = match from.as_str() {
                "file" => KSource::File,
                m => KSource::Pipeline(m.parse().map_err(CliError::Mode)?),
            };
            let path = cli::parse_path(&path, f.spec.n())?;
            Ok((cli::cmd_potential(&f, &path, source, nodes)?, json))
        }
        Cmd::Harnack { file, m, trials, tol, json } => {
            let mut f = cli::load(&file)?;
            if let Some(t) = tol {
                f.config.identity_tol = t;
            }
            Ok((cli::cmd_harnack(&f, &m, trials)?, json))
        }
    }
}

fn main() -> ExitCode {
    if let Some(t) = std::env::var("SMMS_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().ok();
    }
    let args = Args::parse();
    match run(args) {
        Ok((rep, json)) => {
            let text = rep.to_json();
            match json {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, text + "\n") {
                        eprintln!("error: {path}: {e}");
                        return ExitCode::from(EXIT_INPUT as u8);
                    }
                }
                None => println!("{text}"),
            }
            eprintln!("{}: {} ({} points)", rep.command, rep.status, rep.points);
            ExitCode::from(rep.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
