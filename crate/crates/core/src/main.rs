use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use clap::{Args, Parser, Subcommand};

use oss_recon::collectors::{
    CollectorSettings, Mode, DEFAULT_GITHUB_API, DEFAULT_OSV_API, DEFAULT_STACKEXCHANGE_API,
};
use oss_recon::pipeline::{self, Formats, RunConfig};

const CACHE_ENV: &str = "OSS_RECON_CACHE";

/// Assess an open-source repository: release history, maintenance-activity
/// crossovers, hosting metadata, support, security and license.
#[derive(Parser)]
#[command(name = "oss-recon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assess one repository (URL or local path) and write its report.
    Assess {
        source: String,
        #[command(flatten)]
        options: RunOptions,
    },
    /// Assess every repository listed in a file, one source per line.
    Batch {
        list_file: PathBuf,
        #[command(flatten)]
        options: RunOptions,
        /// Repositories assessed concurrently.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        parallel: u64,
    },
}

#[derive(Args)]
struct RunOptions {
    /// Collector mode: live, record (live + save fixtures) or replay.
    #[arg(long, default_value = "live")]
    mode: Mode,
    /// Output directory.
    #[arg(long, default_value = "oss-recon-report")]
    out: PathBuf,
    /// Comma-separated report formats.
    #[arg(long, default_value = "json,html")]
    format: Formats,
    /// Only tags matching this regular expression count as releases.
    #[arg(long)]
    tag_filter: Option<String>,
    /// Keyword table replacing the built-in classifier vocabulary.
    #[arg(long)]
    keyword_table: Option<PathBuf>,
    /// Stack Overflow tag (default: repository name, lowercased).
    #[arg(long)]
    support_tag: Option<String>,
    /// Hosting-service repository as owner/repo, when it cannot be derived
    /// from the source URL.
    #[arg(long)]
    repo_slug: Option<String>,
    /// Per-repository time limit in seconds.
    #[arg(long, default_value_t = 600)]
    timeout: u64,
    /// Discard cached clones and clone again.
    #[arg(long)]
    no_cache: bool,
    /// Leave merge commits unclassified.
    #[arg(long)]
    skip_merges: bool,
    /// Dependency manifest to scan (repeatable; default: manifests at the
    /// repository root).
    #[arg(long = "manifest")]
    manifests: Vec<PathBuf>,
    /// Fixture directory for record and replay modes.
    #[arg(long, default_value = "fixtures")]
    fixtures: PathBuf,
    #[arg(long, default_value = DEFAULT_GITHUB_API)]
    github_api: String,
    #[arg(long, default_value = DEFAULT_STACKEXCHANGE_API)]
    stackexchange_api: String,
    #[arg(long, default_value = DEFAULT_OSV_API)]
    osv_api: String,
}

fn cache_root() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    match std::env::var_os("HOME") {
        Some(home) => PathBuf::from(home).join(".cache").join("oss-recon"),
        None => std::env::temp_dir().join("oss-recon-cache"),
    }
}

/// Honour SOURCE_DATE_EPOCH for reproducible reports.
fn reference_time() -> Result<Option<DateTime<Utc>>, String> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) if !v.is_empty() => v
            .parse::<i64>()
            .ok()
            .and_then(|secs| Utc.timestamp_opt(secs, 0).single())
            .map(Some)
            .ok_or_else(|| format!("invalid SOURCE_DATE_EPOCH {v:?}")),
        _ => Ok(None),
    }
}

impl RunOptions {
    fn into_config(self, source: String) -> Result<RunConfig, String> {
        let mut config = RunConfig::new(source, self.out);
        config.tag_filter = self.tag_filter;
        config.keyword_table = self.keyword_table;
        config.support_tag = self.support_tag;
        config.repo_slug = self.repo_slug;
        config.formats = self.format;
        config.timeout_seconds = self.timeout;
        config.cache_dir = cache_root();
        config.no_cache = self.no_cache;
        config.skip_merges = self.skip_merges;
        config.manifests = self.manifests;
        config.reference_time = reference_time()?;
        config.collectors = CollectorSettings {
            mode: self.mode,
            fixtures_dir: self.fixtures,
            github_api: self.github_api,
            stackexchange_api: self.stackexchange_api,
            osv_api: self.osv_api,
            request_timeout: Duration::from_secs(self.timeout.clamp(1, 30)),
            ..CollectorSettings::default()
        }
        .token_from_env();
        Ok(config)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    match cli.command {
        Command::Assess { source, options } => {
            let config = match options.into_config(source) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match pipeline::assess(&config) {
                Ok(outcome) => {
                    for w in &outcome.report.warnings {
                        eprintln!("warning: {w}");
                    }
                    let m = &outcome.report.maturity;
                    println!(
                        "{}: {} releases, {} crossovers, maturity ratio {}",
                        config.source, m.release_count, m.total_crossovers, m.maturity_ratio
                    );
                    for path in &outcome.written {
                        println!("wrote {}", path.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Batch {
            list_file,
            options,
            parallel,
        } => {
            let config = match options.into_config(String::from("batch")) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match pipeline::batch(&list_file, &config, parallel as usize) {
                Ok(summary) => {
                    print!("{}", summary.to_table());
                    println!(
                        "{} assessed, {} failed; summary in {}",
                        summary.succeeded(),
                        summary.failed(),
                        config.output_dir.join("summary.json").display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
