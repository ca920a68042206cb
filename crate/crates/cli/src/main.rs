use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use reqflow_core::flow::{
    cmd_flow, cmd_sweep, parse_matrix, read_artifact, read_config, step_derive,
    step_generate, step_plan, step_report, step_run, FlowOptions, FIXTURE_SUPERSET, IPVS_FILE,
    ROLLUP_FILE, SESSION_FILE, SESSION_RESULT_FILE, VPLAN_FILE,
};
use reqflow_core::regression::{
    exit_code, generate_tests, testcases_from_ipvs, SessionFile, SessionResult, EXIT_INFRA,
    EXIT_OK,
};
use reqflow_core::rmt::http::serve_until_interrupt;
use reqflow_core::rmt::SharedStore;
use reqflow_core::vplan::{format_pct, VPlan};

#[derive(Parser)]
#[command(name = "reqflow", version, about = "Requirements-driven verification flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive, plan, generate, run and report for one configuration.
    Flow(FlowArgs),
    /// Derive the configuration subset and export its IPVS.
    Derive {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        store: StoreArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the vPlan from `<out>/ipvs.xml`.
    Plan {
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the session file for `<out>/ipvs.xml`.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run `<out>/session.vsif` and roll results into the vPlan.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Emit, archive and push the reports for a finished run.
    Report {
        #[command(flatten)]
        store: StoreArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "REQFLOW_ARCHIVE")]
        archive: Option<PathBuf>,
        #[arg(long)]
        stamp: bool,
    },
    /// Serve the store over HTTP until interrupted.
    Serve {
        #[command(flatten)]
        store: StoreArg,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
    /// Run the flow over every valid configuration of a matrix.
    Sweep {
        #[arg(long)]
        matrix: PathBuf,
        #[command(flatten)]
        store: StoreArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, env = "REQFLOW_ARCHIVE")]
        archive: Option<PathBuf>,
    },
    /// Write the bundled superset to the store path.
    InitSuperset {
        #[command(flatten)]
        store: StoreArg,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct StoreArg {
    /// Store file (the superset for `flow` and `sweep`).
    #[arg(long = "superset", env = "REQFLOW_STORE")]
    path: PathBuf,
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    store: StoreArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, env = "REQFLOW_ARCHIVE")]
    archive: Option<PathBuf>,
    #[arg(long)]
    stamp: bool,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INFRA as u8)
        }
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Flow(a) => {
            let opts = FlowOptions {
                config: a.config,
                superset: a.store.path,
                out: a.out,
                seed: a.seed,
                archive: a.archive,
                stamp: a.stamp,
                jobs: a.jobs,
            };
            let o = cmd_flow(&opts);
            if let Some((step, msg)) = o.error() {
                eprintln!("error: {step}: {msg}");
            } else {
                println!(
                    "{}: {} runs, {} failed, coverage {}%, {} results pushed",
                    o.config_tag.as_deref().unwrap_or_default(),
                    o.runs,
                    o.fails,
                    o.coverage_mean.as_ref().map(format_pct).unwrap_or_default(),
                    o.pushed
                );
                if let Some(link) = &o.archive_link {
                    println!("report: {link}");
                }
            }
            Ok(o.exit_code)
        }
        Command::Derive { config, store, out } => {
            let cfg = read_config(&config)?;
            let shared = SharedStore::open(&store.path)
                .with_context(|| format!("store {}", store.path.display()))?;
            fs::create_dir_all(&out)?;
            step_derive(&shared, &cfg, &out)?;
            println!("{}", cfg.config_tag());
            Ok(EXIT_OK)
        }
        Command::Plan { out } => {
            let ipvs = read_artifact(&out.join(IPVS_FILE))?;
            let plan = step_plan(&ipvs, &out)?;
            println!("{} items", plan.items().count());
            Ok(EXIT_OK)
        }
        Command::Generate { config, out, seed } => {
            let cfg = read_config(&config)?;
            let ipvs = read_artifact(&out.join(IPVS_FILE))?;
            let g = step_generate(&ipvs, &cfg, seed, &out)?;
            println!("{} tests, {} skipped", g.descriptors.len(), g.skipped.len());
            Ok(EXIT_OK)
        }
        Command::Run { config, out, jobs } => {
            let cfg = read_config(&config)?;
            let ipvs = read_artifact(&out.join(IPVS_FILE))?;
            let session_text = read_artifact(&out.join(SESSION_FILE))?;
            let plan = VPlan::from_xml(&read_artifact(&out.join(VPLAN_FILE))?)?;
            let seed = SessionFile::parse(&session_text)?.seed;
            let (_, tcs) = testcases_from_ipvs(&ipvs)?;
            let descriptors = generate_tests(&tcs, &cfg, seed).descriptors;
            let (session, _) = step_run(&session_text, &cfg, &descriptors, &plan, jobs, &out)?;
            println!("{} runs, {} failed", session.run_count(), session.fail_count());
            Ok(exit_code(&session))
        }
        Command::Report {
            store,
            out,
            archive,
            stamp,
        } => {
            let rolled = VPlan::from_xml(&read_artifact(&out.join(ROLLUP_FILE))?)?;
            let session = SessionResult::from_xml(&read_artifact(&out.join(SESSION_RESULT_FILE))?)?;
            let shared = SharedStore::open(&store.path)
                .with_context(|| format!("store {}", store.path.display()))?;
            let archive = archive.unwrap_or_else(|| out.join("archive"));
            let (link, pushed) = step_report(&rolled, &session.name, &shared, &archive, stamp, &out)?;
            println!("report: {link}");
            println!("{pushed} results pushed");
            Ok(exit_code(&session))
        }
        Command::Serve { store, bind } => {
            let shared = SharedStore::open(&store.path)
                .with_context(|| format!("store {}", store.path.display()))?;
            serve_until_interrupt(shared, bind, |addr| println!("listening on http://{addr}"))?;
            Ok(EXIT_OK)
        }
        Command::Sweep {
            matrix,
            store,
            out,
            seed,
            jobs,
            archive,
        } => {
            let m = parse_matrix(&read_artifact(&matrix)?)
                .with_context(|| format!("matrix {}", matrix.display()))?;
            let summary = cmd_sweep(&m, &store.path, &out, seed, jobs, archive.as_deref())?;
            let worst = summary.rows.iter().map(|r| r.exit_code).max().unwrap_or(EXIT_OK);
            let clean = summary.rows.iter().filter(|r| r.exit_code == EXIT_OK).count();
            println!(
                "{} configurations ({} skipped as invalid), {} clean",
                summary.rows.len(),
                summary.skipped,
                clean
            );
            println!("summary: {}", summary.table.display());
            Ok(worst)
        }
        Command::InitSuperset { store, force } => {
            init_superset(&store.path, force)?;
            println!("{}", store.path.display());
            Ok(EXIT_OK)
        }
    }
}

fn init_superset(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        bail!("{} exists; pass --force to overwrite", path.display());
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, FIXTURE_SUPERSET).with_context(|| path.display().to_string())?;
    Ok(())
}
