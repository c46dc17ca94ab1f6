//! Command-line entry point. Exit codes: 0 success, 1 usage error, 2 data
//! error. Data goes to stdout, diagnostics to stderr.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, ErrorKind, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use unusual_events::analytics::{
    coverage_stats, frequency_report, perception_analysis, sample_survey_artifacts,
    usefulness_ranking, DEFAULT_MIN_VOTES,
};
use unusual_events::ingest::{
    fetch_repository, link_commits_to_artifacts, load_snapshot, qualifies_for_sample,
    save_snapshot, IngestConfig, DEFAULT_MIN_COMMITS, DEFAULT_MIN_ISSUES_OR_PULLS,
};
use unusual_events::model::{EventTypeId, Rating, RepoSnapshot, UnusualEvent};
use unusual_events::outliers::{detect_all, DetectorConfig};

use unusual_events_cli::{
    build_feed, render_feed_text, render_perception_text, render_report_text, render_survey_text,
    render_usefulness_text, EventRecord, ReportJson,
};

#[derive(Parser)]
#[command(
    name = "unusual-events",
    version,
    about = "Detects unusual commits, issues, and pull requests in GitHub repositories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum OutputFormat {
    #[default]
    Text,
    Json,
}

#[derive(Args)]
struct DetectorArgs {
    /// Fence multiplier: values beyond k IQRs from the quartiles are flagged
    #[arg(long, default_value_t = 3.0)]
    k: f64,
    /// Smallest context group that can produce events
    #[arg(long, default_value_t = 10)]
    min_group_size: usize,
}

#[derive(Args)]
struct TypeFilterArgs {
    /// Restrict detection to the six most useful event types
    #[arg(long)]
    useful_only: bool,
    /// Comma-separated event type ids, e.g. commit/loc_added/project
    #[arg(long, value_delimiter = ',')]
    types: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch a repository into the cache and print its qualification verdict
    Ingest {
        /// Repository given as owner/name
        repo: String,
        /// Auth token; falls back to the GITHUB_TOKEN environment variable
        #[arg(long, env = "GITHUB_TOKEN")]
        token: Option<String>,
        #[arg(long, default_value = ".")]
        cache_dir: PathBuf,
        #[arg(long, default_value_t = 4)]
        max_parallel: usize,
        #[arg(long, default_value_t = 100)]
        page_size: usize,
        /// API root override, for mirrors and tests
        #[arg(long)]
        api_base: Option<String>,
    },
    /// Detect unusual events and print them as JSON lines
    Detect {
        snapshot: PathBuf,
        #[command(flatten)]
        detector: DetectorArgs,
        #[command(flatten)]
        filter: TypeFilterArgs,
    },
    /// Print frequency tables and coverage statistics
    Report {
        snapshot: PathBuf,
        #[command(flatten)]
        detector: DetectorArgs,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
    /// Print the per-artifact awareness feed
    Feed {
        snapshot: PathBuf,
        #[command(flatten)]
        detector: DetectorArgs,
        #[command(flatten)]
        filter: TypeFilterArgs,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
    /// Sample survey artifacts for one participant
    Survey {
        snapshot: PathBuf,
        #[arg(long)]
        participant: String,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        detector: DetectorArgs,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
    /// Perception analysis and usefulness ranking over a ratings file
    Odds {
        ratings: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
}

enum CliError {
    Usage(String),
    Data(anyhow::Error),
    Io(std::io::Error),
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err)
    }
}

fn data(err: impl Into<anyhow::Error>) -> CliError {
    CliError::Data(err.into())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(cli, &mut out).and_then(|()| out.flush().map_err(CliError::from));
    match result {
        Ok(()) => {}
        // a closed pipe downstream is not our error
        Err(CliError::Io(err)) if err.kind() == ErrorKind::BrokenPipe => {}
        Err(CliError::Io(err)) => {
            eprintln!("error: {err}");
            std::process::exit(2);
        }
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            std::process::exit(1);
        }
        Err(CliError::Data(err)) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli, out: &mut impl Write) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest {
            repo,
            token,
            cache_dir,
            max_parallel,
            page_size,
            api_base,
        } => ingest(repo, token, cache_dir, max_parallel, page_size, api_base, out),
        Command::Detect {
            snapshot,
            detector,
            filter,
        } => {
            let config = detector_config(&detector, &filter)?;
            let (_, events) = detect(&snapshot, &config)?;
            for event in &events {
                let line = serde_json::to_string(&EventRecord::from_event(event)).map_err(data)?;
                writeln!(out, "{line}")?;
            }
            Ok(())
        }
        Command::Report {
            snapshot,
            detector,
            format,
        } => {
            let config = detector_config(&detector, &TypeFilterArgs { useful_only: false, types: None })?;
            let (snapshot, events) = detect(&snapshot, &config)?;
            let frequency = frequency_report(&events, &snapshot);
            let coverage = coverage_stats(&events, &snapshot);
            match format {
                OutputFormat::Text => {
                    write!(out, "{}", render_report_text(&frequency, &coverage))?
                }
                OutputFormat::Json => {
                    let json = serde_json::to_string(&ReportJson {
                        frequency: &frequency,
                        coverage: &coverage,
                    })
                    .map_err(data)?;
                    writeln!(out, "{json}")?;
                }
            }
            Ok(())
        }
        Command::Feed {
            snapshot,
            detector,
            filter,
            format,
        } => {
            let config = detector_config(&detector, &filter)?;
            let (_, events) = detect(&snapshot, &config)?;
            let entries = build_feed(&events);
            match format {
                OutputFormat::Text => write!(out, "{}", render_feed_text(&entries))?,
                OutputFormat::Json => {
                    for entry in &entries {
                        writeln!(out, "{}", serde_json::to_string(entry).map_err(data)?)?;
                    }
                }
            }
            Ok(())
        }
        Command::Survey {
            snapshot,
            participant,
            seed,
            detector,
            format,
        } => {
            let config = detector_config(&detector, &TypeFilterArgs { useful_only: false, types: None })?;
            let (snapshot, events) = detect(&snapshot, &config)?;
            let sample =
                sample_survey_artifacts(&snapshot, &events, &participant, seed).map_err(data)?;
            match format {
                OutputFormat::Text => write!(out, "{}", render_survey_text(&sample, &events))?,
                OutputFormat::Json => {
                    writeln!(out, "{}", serde_json::to_string(&sample).map_err(data)?)?
                }
            }
            Ok(())
        }
        Command::Odds { ratings, format } => {
            let ratings = load_ratings(&ratings)?;
            let rows = perception_analysis(&ratings).map_err(data)?;
            let mut votes: BTreeMap<EventTypeId, (u64, u64)> = BTreeMap::new();
            for rating in &ratings {
                for (&event_type, &useful) in &rating.per_type_useful {
                    let entry = votes.entry(event_type).or_insert((0, 0));
                    if useful {
                        entry.0 += 1;
                    } else {
                        entry.1 += 1;
                    }
                }
            }
            let ranking = usefulness_ranking(&votes, DEFAULT_MIN_VOTES);
            match format {
                OutputFormat::Text => {
                    write!(out, "{}", render_perception_text(&rows))?;
                    writeln!(out)?;
                    write!(out, "{}", render_usefulness_text(&ranking))?;
                }
                OutputFormat::Json => {
                    let json = serde_json::json!({
                        "perception": rows,
                        "usefulness": ranking,
                    });
                    writeln!(out, "{json}")?;
                }
            }
            Ok(())
        }
    }
}

fn ingest(
    repo: String,
    token: Option<String>,
    cache_dir: PathBuf,
    max_parallel: usize,
    page_size: usize,
    api_base: Option<String>,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let (owner, name) = repo
        .split_once('/')
        .filter(|(owner, name)| !owner.is_empty() && !name.is_empty() && !name.contains('/'))
        .ok_or_else(|| CliError::Usage(format!("expected owner/name, got {repo:?}")))?;
    let mut config = IngestConfig {
        auth_token: token,
        max_parallel_requests: max_parallel,
        page_size,
        cache_dir,
        ..IngestConfig::default()
    };
    if let Some(base) = api_base {
        config.api_base = base;
    }
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let snapshot = fetch_repository(owner, name, &config).map_err(data)?;
    let snapshot = link_commits_to_artifacts(&snapshot);
    fs::create_dir_all(&config.cache_dir)
        .with_context(|| format!("creating {}", config.cache_dir.display()))
        .map_err(CliError::Data)?;
    let path = config.snapshot_path(owner, name);
    save_snapshot(&snapshot, &path).map_err(data)?;
    writeln!(out, "wrote {}", path.display())?;
    writeln!(
        out,
        "{}/{}: {} ({} commits, {} issues, {} pull requests)",
        owner,
        name,
        qualifies_for_sample(&snapshot, DEFAULT_MIN_COMMITS, DEFAULT_MIN_ISSUES_OR_PULLS),
        snapshot.commits.len(),
        snapshot.issues.len(),
        snapshot.pulls.len()
    )?;
    Ok(())
}

fn detector_config(
    detector: &DetectorArgs,
    filter: &TypeFilterArgs,
) -> Result<DetectorConfig, CliError> {
    let enabled = match &filter.types {
        None => EventTypeId::all().into_iter().collect(),
        Some(list) => {
            let mut set = std::collections::BTreeSet::new();
            for raw in list {
                let parsed: EventTypeId = raw
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("unknown event type {raw:?}")))?;
                set.insert(parsed);
            }
            set
        }
    };
    let config = DetectorConfig {
        k: detector.k,
        min_group_size: detector.min_group_size,
        enabled_event_types: enabled,
        useful_only: filter.useful_only,
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn detect(
    path: &Path,
    config: &DetectorConfig,
) -> Result<(RepoSnapshot, Vec<UnusualEvent>), CliError> {
    let snapshot = load_snapshot(path)
        .map_err(|e| CliError::Data(anyhow::Error::new(e).context(format!(
            "reading snapshot {}",
            path.display()
        ))))?;
    let snapshot = link_commits_to_artifacts(&snapshot);
    let events = detect_all(&snapshot, config).map_err(data)?;
    Ok((snapshot, events))
}

fn load_ratings(path: &Path) -> Result<Vec<Rating>, CliError> {
    let file = fs::File::open(path)
        .with_context(|| format!("opening ratings file {}", path.display()))
        .map_err(CliError::Data)?;
    let mut ratings = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(data)?;
        if line.trim().is_empty() {
            continue;
        }
        let rating: Rating = serde_json::from_str(&line)
            .with_context(|| format!("ratings line {}", idx + 1))
            .map_err(CliError::Data)?;
        if !rating.is_consistent() {
            return Err(CliError::Data(anyhow::anyhow!(
                "ratings line {}: flagged_types must be nonempty exactly when is_unusual",
                idx + 1
            )));
        }
        ratings.push(rating);
    }
    Ok(ratings)
}
