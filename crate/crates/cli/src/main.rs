//! Campaign orchestration: crawl the system under test, validate relation
//! files, run the engine, print reports, and host the training fixture.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use mst_core::collected::CollectedData;
use mst_core::config::CampaignConfig;
use mst_core::crawler::script::LoginTemplate;
use mst_core::crawler::{crawl, store, CrawlConfig};
use mst_core::engine::Engine;
use mst_core::executor::{ReqwestTransport, SutTarget};
use mst_core::smrl;
use mst_core::webutils::ActionClassifier;

#[derive(Parser)]
#[command(name = "mst", about = "Metamorphic security testing for web systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Crawl the system under test and record per-user state graphs.
    Crawl {
        #[arg(long)]
        config: PathBuf,
        /// Credential id to crawl as; repeatable.
        #[arg(long, conflicts_with = "all_users")]
        user: Vec<String>,
        /// Crawl every configured credential plus the anonymous visitor.
        #[arg(long)]
        all_users: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and statically check relation files.
    Check {
        files: Vec<PathBuf>,
    },
    /// Run relations against collected data.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory of crawl-session documents.
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated relation names, or `all`.
        #[arg(long, default_value = "all")]
        mrs: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a previous run.
    Report {
        #[arg(long, name = "in")]
        input: PathBuf,
    },
    /// Host the built-in training fixture.
    Fixture {
        #[command(subcommand)]
        command: FixtureCommand,
    },
}

#[derive(Subcommand)]
enum FixtureCommand {
    Serve {
        #[arg(long, value_parser = parse_mode)]
        mode: mst_fixture::Mode,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = 8081)]
        insecure_port: u16,
    },
}

fn parse_mode(s: &str) -> Result<mst_fixture::Mode, String> {
    mst_fixture::Mode::parse(s).ok_or_else(|| format!("unknown mode `{s}`"))
}

// Exit codes: 0 no failures, 1 violations found, 2 usage/config error,
// 3 runtime error.
fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn load_config(path: &PathBuf) -> Result<CampaignConfig, ExitCode> {
    match CampaignConfig::load(path) {
        Ok(mut cfg) => {
            cfg.apply_env_overrides();
            Ok(cfg)
        }
        Err(e) => {
            eprintln!("config error: {e}");
            Err(ExitCode::from(2))
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Crawl {
            config,
            user,
            all_users,
            out,
        } => {
            let cfg = match load_config(&config) {
                Ok(cfg) => cfg,
                Err(code) => return Ok(code),
            };
            let users = cfg.users();
            let selected: Vec<_> = if all_users {
                users.clone()
            } else {
                if user.is_empty() {
                    eprintln!("usage error: pass --user ID (repeatable) or --all-users");
                    return Ok(ExitCode::from(2));
                }
                let mut selected = Vec::new();
                for id in &user {
                    match users.iter().find(|u| &u.id == id) {
                        Some(u) => selected.push(u.clone()),
                        None => {
                            eprintln!("usage error: unknown credential id `{id}`");
                            return Ok(ExitCode::from(2));
                        }
                    }
                }
                selected
            };
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let target = SutTarget::from_campaign(&cfg);
            let classifier = ActionClassifier::from_settings(&cfg.detection, &cfg.comparator)?;
            let crawl_cfg = CrawlConfig::from_campaign(&cfg);
            for u in &selected {
                let mut transport = ReqwestTransport::new(cfg.sut.insecure_tls)?;
                let session = crawl(&mut transport, &target, &classifier, &crawl_cfg, u)?;
                let path = out.join(format!("session-{}.json", u.id));
                store::save_session(&session, &path)?;
                println!(
                    "crawled {}: {} states, {} edges, {} source inputs -> {}",
                    u.id,
                    session.states.len(),
                    session.edges.len(),
                    session.derived_inputs.len(),
                    path.display()
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { files } => {
            if files.is_empty() {
                eprintln!("usage error: pass at least one .smrl file");
                return Ok(ExitCode::from(2));
            }
            let mut failed = false;
            for path in &files {
                let text = match std::fs::read_to_string(path) {
                    Ok(text) => text,
                    Err(e) => {
                        eprintln!("{}: {e}", path.display());
                        failed = true;
                        continue;
                    }
                };
                match smrl::parse_file(&text) {
                    Ok(file) => {
                        for mr in &file.relations {
                            match smrl::check_relation(mr) {
                                Ok(()) => {
                                    let kinds: Vec<&str> = smrl::extract_source_input_types(mr)
                                        .into_iter()
                                        .map(|k| k.function_name())
                                        .collect();
                                    println!("{}: ok, input kinds: {}", mr.name, kinds.join(", "));
                                }
                                Err(e) => {
                                    eprintln!("{}: {e}", path.display());
                                    failed = true;
                                }
                            }
                        }
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", path.display());
                        failed = true;
                    }
                }
            }
            Ok(if failed {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Run {
            config,
            data,
            mrs,
            out,
        } => {
            let cfg = match load_config(&config) {
                Ok(cfg) => cfg,
                Err(code) => return Ok(code),
            };
            let entries = mst_core::catalog::catalog_entries()?;
            let selected: Vec<_> = if mrs == "all" {
                entries
            } else {
                let wanted: Vec<&str> = mrs.split(',').map(str::trim).collect();
                let mut selected = Vec::new();
                for name in &wanted {
                    match entries.iter().find(|e| e.name == *name) {
                        Some(e) => selected.push(e.clone()),
                        None => {
                            eprintln!("usage error: unknown relation `{name}`");
                            return Ok(ExitCode::from(2));
                        }
                    }
                }
                selected
            };
            let session_files = CollectedData::session_files(&data)
                .with_context(|| format!("listing {}", data.display()))?;
            if session_files.is_empty() {
                eprintln!("config error: no crawl sessions in {}", data.display());
                return Ok(ExitCode::from(2));
            }
            let login = LoginTemplate::default();
            let collected = CollectedData::load(
                &session_files,
                &cfg.scripts,
                &cfg.sut.base_url,
                &cfg.users(),
                &login,
            )?;
            let factory = Engine::reqwest_factory(&cfg)?;
            let engine = Engine::new(&cfg, &collected, &factory);
            let asts: Vec<_> = selected.iter().map(|e| e.ast.clone()).collect();
            let outcome = engine.run_campaign(&asts)?;
            outcome.persist(&out)?;
            print!("{}", outcome.report.render_table());
            if !outcome.errors.is_empty() {
                eprintln!("{} evaluation errors (see report.txt)", outcome.errors.len());
            }
            Ok(if outcome.report.total_kept() > 0 {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Report { input } => {
            let path = input.join("report.json");
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let report: mst_core::engine::CampaignReport = serde_json::from_str(&text)?;
            print!("{}", report.render_table());
            Ok(ExitCode::SUCCESS)
        }
        Command::Fixture { command } => match command {
            FixtureCommand::Serve {
                mode,
                port,
                insecure_port,
            } => {
                let mut config = mst_fixture::FixtureConfig::new(mode);
                config.port = port;
                config.insecure_port = insecure_port;
                if port == insecure_port {
                    eprintln!("usage error: the two ports must differ");
                    return Ok(ExitCode::from(2));
                }
                let handle = mst_fixture::spawn(config)?;
                println!("fixture serving on {} (channel: https)", handle.base_url);
                println!(
                    "          and on {} (channel: http)",
                    handle.insecure_base_url
                );
                println!("press Ctrl-C to stop");
                loop {
                    std::thread::sleep(std::time::Duration::from_secs(3600));
                }
            }
        },
    }
}
