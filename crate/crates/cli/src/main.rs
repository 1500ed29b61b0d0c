use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use codei::catalog::Catalog;
use codei::codesign::codei::Demand;
use codei::commands::{self, CommandOutcome, Format, EXIT_USAGE};
use codei::geom::PolarGridSpec;
use codei::percreq::RequirementSet;
use codei::store::RunStore;
use codei::world::TaskFile;
use codei::{Error, Result};

#[derive(Parser)]
#[command(
    name = "codei",
    version,
    about = "Task-driven co-design of perception, planning and robot body"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Svg,
    Both,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Svg => Format::Svg,
            FormatArg::Both => Format::Both,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Component catalog (JSON).
    #[arg(long)]
    catalog: PathBuf,
    /// Task file (JSON).
    #[arg(long)]
    task: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Polar grid (JSON) replacing the catalog grid.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Coverage threshold replacing the catalog default.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Number of weight vectors in the Pareto sweep.
    #[arg(long)]
    weights: Option<usize>,
    /// Store directory; CODEI_STORE takes precedence.
    #[arg(long, default_value = "codei-store")]
    out: PathBuf,
    /// Cross-check against brute-force enumeration (small instances only).
    #[arg(long)]
    oracle: bool,
    #[arg(long, value_enum, default_value = "both")]
    format: FormatArg,
}

#[derive(Subcommand)]
enum Command {
    /// Run a planner on every task instance and log its occupancy queries.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        planner: String,
        #[arg(long)]
        body: String,
    },
    /// Turn query logs into perception requirements (simulating if needed).
    Requirements {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        planner: String,
        #[arg(long)]
        body: String,
    },
    /// Select sensors covering a requirement set and sweep the Pareto front.
    Select {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        body: String,
        /// Requirement set file; derived from --planner when absent.
        #[arg(long)]
        requirements: Option<PathBuf>,
        #[arg(long)]
        planner: Option<String>,
    },
    /// Solve for minimal resources given demanded speed and range.
    Codesign {
        #[command(flatten)]
        common: Common,
        /// Demanded average speed in km/h.
        #[arg(long, default_value_t = 0.0)]
        speed: f64,
        /// Demanded driving range in m.
        #[arg(long, default_value_t = 0.0)]
        range: f64,
    },
}

struct Context {
    store: RunStore,
    catalog: Catalog,
}

fn context(c: &Common) -> Result<Context> {
    let out = std::env::var_os("CODEI_STORE")
        .map(PathBuf::from)
        .unwrap_or_else(|| c.out.clone());
    let mut catalog = Catalog::load(&c.catalog)?;
    if let Some(g) = &c.grid {
        catalog.grid = serde_json::from_str::<PolarGridSpec>(&std::fs::read_to_string(g)?)?;
    }
    if let Some(e) = c.epsilon {
        catalog.epsilon = e;
    }
    if let Some(w) = c.weights {
        if w == 0 {
            return Err(Error::Invalid("--weights must be positive".into()));
        }
        catalog.n_weights = w;
    }
    Ok(Context {
        store: RunStore::open(out)?,
        catalog,
    })
}

fn task(c: &Common) -> Result<TaskFile> {
    let p = c
        .task
        .as_deref()
        .ok_or_else(|| Error::Invalid("--task is required".into()))?;
    TaskFile::load(p)
}

fn report(out: &CommandOutcome, root: &Path) {
    for l in &out.lines {
        println!("{l}");
    }
    for a in &out.artifacts {
        println!("wrote {}", a.strip_prefix(root).unwrap_or(a).display());
    }
}

fn run(cli: Cli) -> Result<i32> {
    let out = match cli.command {
        Command::Simulate {
            common,
            planner,
            body,
        } => {
            let ctx = context(&common)?;
            let tf = task(&common)?;
            let (o, _) = commands::cmd_simulate(
                &ctx.store,
                &ctx.catalog,
                &tf,
                &planner,
                &body,
                common.seed,
            )?;
            report(&o, ctx.store.root());
            o
        }
        Command::Requirements {
            common,
            planner,
            body,
        } => {
            let ctx = context(&common)?;
            let tf = task(&common)?;
            let (o, _) = commands::cmd_requirements(
                &ctx.store,
                &ctx.catalog,
                &tf,
                &planner,
                &body,
                common.seed,
            )?;
            report(&o, ctx.store.root());
            o
        }
        Command::Select {
            common,
            body,
            requirements,
            planner,
        } => {
            let ctx = context(&common)?;
            let tf = task(&common)?;
            let req = match (requirements, planner) {
                (Some(p), _) => RequirementSet::from_json(&std::fs::read_to_string(p)?)?,
                (None, Some(planner)) => {
                    let (o, req) = commands::cmd_requirements(
                        &ctx.store,
                        &ctx.catalog,
                        &tf,
                        &planner,
                        &body,
                        common.seed,
                    )?;
                    report(&o, ctx.store.root());
                    req
                }
                (None, None) => {
                    return Err(Error::Invalid(
                        "select needs --requirements or --planner".into(),
                    ))
                }
            };
            let (o, _) = commands::cmd_select(
                &ctx.store,
                &ctx.catalog,
                &req,
                &tf.classes,
                &body,
                common.format.into(),
                common.oracle,
            )?;
            report(&o, ctx.store.root());
            o
        }
        Command::Codesign {
            common,
            speed,
            range,
        } => {
            let ctx = context(&common)?;
            let tf = task(&common)?;
            let demand = Demand {
                speed_kmh: speed,
                range_m: range,
            };
            let (o, _) = commands::cmd_codesign(
                &ctx.store,
                &ctx.catalog,
                &tf,
                common.seed,
                demand,
                common.format.into(),
                common.oracle,
            )?;
            report(&o, ctx.store.root());
            o
        }
    };
    Ok(out.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
