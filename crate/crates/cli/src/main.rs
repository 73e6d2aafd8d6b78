use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use coded_incentives::coded::{self, read_matrix, read_vector, simulate_round};
use coded_incentives::experiments::{self, config::read_population_file, ExperimentName};
use coded_incentives::mechanism::{
    solve_complete, solve_cost_only, solve_incomplete, Mechanism, PlatformConfig,
};
use coded_incentives::worker::{build_population, reference_types, Population, WorkerType};
use coded_incentives::{rng, verify_ir_ic, Error};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "codedml",
    version,
    about = "Incentive mechanisms for coded distributed computation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the platform's optimal mechanism.
    Solve {
        #[command(flatten)]
        instance: Instance,
        /// Print the mechanism as JSON (readable by `verify --mechanism`).
        #[arg(long)]
        json: bool,
    },
    /// Check individual rationality and incentive compatibility.
    Verify {
        /// JSON written by `solve --json`; solves from the instance flags otherwise.
        #[arg(long)]
        mechanism: Option<PathBuf>,
        #[command(flatten)]
        instance: Instance,
        /// Tab-separated per-type table instead of the summary.
        #[arg(long)]
        tsv: bool,
    },
    /// Simulate computation rounds under the optimal mechanism.
    Simulate {
        #[command(flatten)]
        instance: Instance,
        #[arg(long, default_value_t = 10)]
        rounds: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Task matrix (`r s` header, then values); random if omitted.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Input vector as an `s 1` matrix; random if omitted.
        #[arg(long)]
        vector: Option<PathBuf>,
        /// Columns of the random task matrix.
        #[arg(long, default_value_t = 4)]
        cols: usize,
    },
    /// Three workers, two blocks: decode `A x` from every pair of results.
    EncodeDemo {
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        vector: Option<PathBuf>,
    },
    /// Run a sweep and write CSV.
    Experiment {
        #[arg(value_enum)]
        name: Figure,
        /// Configuration file, or a CSV produced earlier to replay it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<u64>,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Custom,
}

impl From<Figure> for ExperimentName {
    fn from(f: Figure) -> Self {
        match f {
            Figure::Fig4 => ExperimentName::Fig4,
            Figure::Fig5 => ExperimentName::Fig5,
            Figure::Fig6 => ExperimentName::Fig6,
            Figure::Fig7 => ExperimentName::Fig7,
            Figure::Custom => ExperimentName::Custom,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Complete,
    Incomplete,
    CostOnly,
}

#[derive(Args)]
struct Instance {
    #[arg(long, value_enum, default_value = "incomplete")]
    scenario: ScenarioArg,
    /// Population table, one `c mu a count` line per type; the bundled
    /// ten-type table otherwise.
    #[arg(long)]
    population: Option<PathBuf>,
    /// Workers per type for the bundled table.
    #[arg(long, default_value_t = 140)]
    per_type: u64,
    #[arg(long, default_value_t = 2000.0)]
    gamma_time: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma_pay: f64,
    #[arg(long, default_value_t = 1000.0)]
    rows: f64,
}

#[derive(Serialize, Deserialize)]
struct Solved {
    config: PlatformConfig,
    population: Vec<WorkerType>,
    mechanism: Mechanism,
}

/// Wraps library errors so `main` can map them to exit codes.
fn lib<T, E: Into<Error>>(r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| anyhow::Error::new(e.into()))
}

impl Instance {
    fn population(&self) -> Result<Population> {
        let types = match &self.population {
            Some(path) => lib(read_population_file(path))?,
            None => reference_types(self.per_type),
        };
        lib(build_population(types))
    }

    fn config(&self) -> Result<PlatformConfig> {
        lib(PlatformConfig::new(
            self.gamma_time,
            self.gamma_pay,
            self.rows,
        ))
    }

    fn solve(&self) -> Result<Solved> {
        let pop = self.population()?;
        let config = self.config()?;
        let mechanism = match self.scenario {
            ScenarioArg::Complete => lib(solve_complete(&pop, &config))?,
            ScenarioArg::Incomplete => lib(solve_incomplete(&pop, &config))?,
            ScenarioArg::CostOnly => lib(solve_cost_only(&pop, &config))?,
        };
        Ok(Solved {
            config,
            population: pop.entries().iter().map(|e| e.worker.clone()).collect(),
            mechanism,
        })
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn print_mechanism(s: &Solved) {
    let m = &s.mechanism;
    println!("scenario          {}", m.scenario);
    println!("targeted types    {:?}", m.targeted);
    if let Some(k) = m.recovery_threshold {
        println!("recovery k        {k}");
    }
    println!("expected runtime  {:.6}", m.expected_runtime);
    println!("expected cost     {:.6}", m.expected_cost);
    println!("type  count  reward          load");
    for (w, p) in s.population.iter().zip(&m.rewards) {
        let load = m
            .assignment
            .load(w.id)
            .map_or("-".to_string(), |l| format!("{l:.6}"));
        println!("{:>4}  {:>5}  {p:<14.6}  {load}", w.id, w.count);
    }
}

fn random_task(rows: usize, cols: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut r = rng::stream(seed, &[u64::MAX]);
    let a = DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0));
    let x = DVector::from_fn(cols, |_, _| r.random_range(-1.0..1.0));
    (a, x)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { instance, json } => {
            let solved = instance.solve()?;
            if json {
                println!("{}", serde_json::to_string_pretty(&solved)?);
            } else {
                print_mechanism(&solved);
            }
        }
        Command::Verify {
            mechanism,
            instance,
            tsv,
        } => {
            let solved = match mechanism {
                Some(path) => serde_json::from_str::<Solved>(&read_text(&path)?)
                    .with_context(|| format!("parsing {}", path.display()))?,
                None => instance.solve()?,
            };
            let pop = lib(build_population(solved.population.clone()))?;
            let report = lib(verify_ir_ic(&solved.mechanism, &pop))?;
            if tsv {
                print!("{}", report.to_tsv());
            } else {
                print!("{report}");
            }
            if !report.truthful {
                return Err(anyhow::Error::new(Violations));
            }
        }
        Command::Simulate {
            instance,
            rounds,
            seed,
            matrix,
            vector,
            cols,
        } => {
            let solved = instance.solve()?;
            let pop = lib(build_population(solved.population.clone()))?;
            let (a, x) = match (matrix, vector) {
                (Some(m), Some(v)) => (
                    lib(read_matrix(&read_text(&m)?))?,
                    lib(read_vector(&read_text(&v)?))?,
                ),
                (None, None) => {
                    let rows = solved.config.total_rows;
                    if rows.fract() != 0.0 {
                        return Err(anyhow::Error::new(Error::from(
                            coded_incentives::mechanism::MechanismError::InvalidConfig(
                                "simulation needs a whole number of rows".into(),
                            ),
                        )));
                    }
                    random_task(rows as usize, cols, seed)
                }
                _ => {
                    return Err(anyhow::Error::new(config_error(
                        "give both --matrix and --vector, or neither",
                    )))
                }
            };
            println!("round,runtime,platform_cost,total_paid,used_workers,max_abs_error");
            let mut total = 0.0;
            for round in 0..rounds {
                let out = lib(simulate_round(
                    &solved.mechanism,
                    &pop,
                    &solved.config,
                    &a,
                    &x,
                    seed.wrapping_add(round),
                ))?;
                total += out.runtime;
                println!(
                    "{round},{:.16e},{:.16e},{:.16e},{},{:.3e}",
                    out.runtime,
                    out.platform_cost,
                    out.total_paid,
                    out.used_workers,
                    out.max_abs_error
                );
            }
            if rounds > 0 {
                eprintln!(
                    "mean runtime {:.6} over {rounds} rounds (model {:.6})",
                    total / rounds as f64,
                    solved.mechanism.expected_runtime
                );
            }
        }
        Command::EncodeDemo { matrix, vector } => {
            let (a, x) = match (matrix, vector) {
                (Some(m), Some(v)) => (
                    lib(read_matrix(&read_text(&m)?))?,
                    lib(read_vector(&read_text(&v)?))?,
                ),
                (None, None) => (
                    DMatrix::from_row_slice(
                        4,
                        3,
                        &[1.0, 2.0, 0.0, -1.0, 3.0, 1.0, 2.0, 0.0, 5.0, 4.0, -2.0, 1.0],
                    ),
                    DVector::from_vec(vec![2.0, -1.0, 3.0]),
                ),
                _ => {
                    return Err(anyhow::Error::new(config_error(
                        "give both --matrix and --vector, or neither",
                    )))
                }
            };
            println!("workers hold A1, A2 and A1 + A2 (A split into two row blocks)");
            println!("direct A x = {:?}", (&a * &x).as_slice());
            for (pair, v) in lib(coded::three_worker_demo(&a, &x))? {
                println!(
                    "from workers {} and {}: {:?}",
                    pair[0] + 1,
                    pair[1] + 1,
                    v.as_slice()
                );
            }
        }
        Command::Experiment {
            name,
            config,
            seed,
            reps,
            out,
        } => {
            let mut spec = match config {
                Some(path) => {
                    let text = read_text(&path)?;
                    if text.lines().any(|l| l.starts_with("#! ")) {
                        lib(experiments::spec_from_csv(&text))?
                    } else {
                        lib(experiments::parse_config(&text, path.parent()))?
                    }
                }
                None => experiments::ExperimentSpec::new(name.into()),
            };
            spec.name = name.into();
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(r) = reps {
                spec.replications = r;
            }
            let table = lib(experiments::run(&spec))?;
            let csv = table.to_csv();
            match out {
                Some(path) => {
                    fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?
                }
                None => std::io::stdout().write_all(csv.as_bytes())?,
            }
        }
    }
    Ok(())
}

#[derive(Debug)]
struct Violations;

impl std::fmt::Display for Violations {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("mechanism violates individual rationality or incentive compatibility")
    }
}

impl std::error::Error for Violations {}

fn config_error(msg: &str) -> Error {
    coded_incentives::experiments::ExperimentError::Invalid(msg.to_string()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.is::<Violations>() {
                1
            } else {
                e.downcast_ref::<Error>().map_or(2, Error::exit_code)
            };
            ExitCode::from(code as u8)
        }
    }
}
