use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use ontoflux::des::{run_simulation, Regime, SimConfig};
use ontoflux::io::{
    parse_config, parse_fragments, parse_mappings, parse_ontology, parse_query, parse_script,
    parse_sweep, ResultRecord,
};
use ontoflux::kb::KnowledgeBase;
use ontoflux::merge::merge;
use ontoflux::monitor::{MergePolicy, MonitorConfig, MonitorState};

#[derive(Parser)]
#[command(name = "ontoflux", version, about = "Temporal, probabilistically merged ontologies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and print its result record.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_regime)]
        regime: Option<Regime>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a config grid over a range of seeds, in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `a..b` (exclusive) or `a..=b`; defaults to the config's seed.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Option<Seeds>,
        #[arg(long, value_parser = parse_regime)]
        regime: Option<Regime>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Merge an external ontology into a local one and answer a query.
    MergeQuery {
        #[arg(long)]
        local: PathBuf,
        #[arg(long)]
        external: PathBuf,
        #[arg(long)]
        mappings: PathBuf,
        /// Conjunction such as `O1:Event(x) ∧ O1:keyword(x, Sea)`.
        #[arg(long)]
        query: String,
    },
    /// Run the monitoring loop over a script and print the event log.
    Monitor {
        /// Local ontology.
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long, requires = "external")]
        mappings: Option<PathBuf>,
        #[arg(long, requires = "mappings")]
        external: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Overrides the script's `ticks`.
        #[arg(long)]
        ticks: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an MFrag file for structural errors.
    Validate { file: PathBuf },
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let bad = || format!("expected `a..b` or `a..=b`, got `{s}`");
    let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        let one: u64 = s.parse().map_err(|_| bad())?;
        return Ok(Seeds(vec![one]));
    };
    let a: u64 = a.parse().map_err(|_| bad())?;
    let b: u64 = b.parse().map_err(|_| bad())?;
    let seeds: Vec<u64> = if inclusive { (a..=b).collect() } else { (a..b).collect() };
    if seeds.is_empty() {
        return Err(format!("empty seed range `{s}`"));
    }
    Ok(Seeds(seeds))
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Self {
            code: 1,
            message: message.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn in_file<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> Failure + '_ {
    move |e| Failure::input(format!("{}: {e}", path.display()))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(in_file(path)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::input(format!("stdout: {e}"))),
    }
}

fn render(records: &[ResultRecord], format: Format) -> String {
    let mut text = String::new();
    match format {
        Format::Csv => {
            text.push_str(&ResultRecord::csv_header());
            text.push('\n');
            for r in records {
                text.push_str(&r.csv_row());
                text.push('\n');
            }
        }
        Format::Json => {
            for r in records {
                text.push_str(&r.json_line());
                text.push('\n');
            }
        }
    }
    text
}

fn simulate_one(config: &SimConfig) -> Result<ResultRecord, Failure> {
    let started = Instant::now();
    let stats = run_simulation(config).map_err(Failure::input)?;
    let elapsed = started.elapsed().as_secs_f64();
    log::info!(
        "{} S={} seed={}: fill rate {:.4} in {elapsed:.3}s",
        config.regime,
        config.base_stock,
        config.seed,
        stats.fill_rate
    );
    Ok(ResultRecord::new(config, &stats, elapsed))
}

fn load_kb(path: &Path) -> Result<KnowledgeBase, Failure> {
    parse_ontology(&read(path)?).map_err(in_file(path))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            regime,
            output,
        } => {
            let mut cfg = parse_config(&read(&config)?).map_err(in_file(&config))?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(regime) = regime {
                cfg.regime = regime;
            }
            let record = simulate_one(&cfg)?;
            emit(&output.out, &render(&[record], output.format))
        }
        Command::Sweep {
            config,
            seeds,
            regime,
            output,
        } => {
            let mut grid = parse_sweep(&read(&config)?).map_err(in_file(&config))?;
            if let Some(regime) = regime {
                for c in &mut grid.configs {
                    c.regime = regime;
                }
            }
            let runs = match seeds {
                Some(Seeds(seeds)) => grid.with_seeds(&seeds),
                None => grid.configs,
            };
            log::info!("sweeping {} runs", runs.len());
            let records = runs
                .par_iter()
                .map(simulate_one)
                .collect::<Result<Vec<_>, _>>()?;
            emit(&output.out, &render(&records, output.format))
        }
        Command::MergeQuery {
            local,
            external,
            mappings,
            query,
        } => {
            let local_kb = load_kb(&local)?;
            let external_kb = load_kb(&external)?;
            let maps = parse_mappings(&read(&mappings)?).map_err(in_file(&mappings))?;
            let conjuncts = parse_query(&query, local_kb.namespace()).map_err(in_file(Path::new("query")))?;
            let merged = merge(&local_kb, &external_kb, &maps).map_err(Failure::input)?;
            let answers = merged.query(&conjuncts).map_err(Failure::input)?;
            let mut text = String::new();
            for answer in answers {
                let binding: Vec<String> = answer
                    .binding
                    .iter()
                    .map(|(var, value)| format!("{var}={value}"))
                    .collect();
                text.push_str(&format!("{} p={:.9}", binding.join(" "), answer.probability));
                if answer.approximate {
                    text.push_str(" approximate");
                }
                text.push('\n');
            }
            emit(&None, &text)
        }
        Command::Monitor {
            kb,
            script,
            mappings,
            external,
            threshold,
            ticks,
            out,
        } => {
            let local_kb = load_kb(&kb)?;
            let parsed = parse_script(&read(&script)?, local_kb.namespace()).map_err(in_file(&script))?;
            let (maps, external_kb) = match (mappings, external) {
                (Some(m), Some(e)) => (parse_mappings(&read(&m)?).map_err(in_file(&m))?, load_kb(&e)?),
                _ => (Vec::new(), KnowledgeBase::new("")),
            };
            let policy = MergePolicy::new(threshold).map_err(Failure::input)?;
            let config = MonitorConfig {
                closed_concepts: parsed.closed_concepts,
                propositions: parsed.propositions,
            };
            let mut state = MonitorState::init(local_kb, &config).map_err(Failure::input)?;
            for input in parsed.inputs {
                state = state.enqueue(input).map_err(Failure::input)?;
            }
            let horizon = ticks.or(parsed.ticks).unwrap_or(0);
            let state = state
                .run(horizon, &policy, &maps, &external_kb)
                .map_err(Failure::input)?;
            emit(&out, &state.log_text())
        }
        Command::Validate { file } => {
            let theory = parse_fragments(&read(&file)?).map_err(in_file(&file))?;
            let errors = theory.validate();
            if errors.is_empty() {
                println!("ok: {} fragment(s)", theory.fragments.len());
                return Ok(());
            }
            let mut message = String::new();
            for e in &errors {
                message.push_str(&format!("{e}\n"));
            }
            Err(Failure {
                code: 2,
                message: message.trim_end().to_string(),
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("ONTOFLUX_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the exit code of malformed input files.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
