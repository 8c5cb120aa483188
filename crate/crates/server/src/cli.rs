//! Command-line entry points: `serve`, `export`, `seed-demo` and `metrics`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use app_planner_core::catalog::Catalog;
use app_planner_core::chat::ChatSettings;
use app_planner_core::clock::{RandomIds, SystemClock};
use app_planner_core::fixtures::Fixture;
use app_planner_core::llm::{provider_from_config, ProviderConfig, ProviderMode};
use app_planner_core::store::ProjectStore;
use axum::http::HeaderValue;
use clap::{Args, Parser, Subcommand};

use crate::api::{router, AppState};
use crate::service::{Planner, PlannerOptions, DEFAULT_PROVIDER_CAP};

#[derive(Debug, Parser)]
#[command(name = "app-planner", version, about = "Guided app planning for student projects")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Directory holding one file per project.
    #[arg(long, global = true, env = "APP_PLANNER_STORE_DIR", default_value = "data")]
    pub store_dir: PathBuf,
    /// Catalog TOML replacing the built-in presets, guidance and lexicons.
    #[arg(long, global = true, env = "APP_PLANNER_CATALOG")]
    pub catalog: Option<PathBuf>,
    /// Overrides APP_PLANNER_LLM_MODE.
    #[arg(long, global = true, value_parser = ["mock", "live"])]
    pub llm_mode: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Origin allowed by CORS, e.g. http://localhost:5173.
        #[arg(long)]
        ui_origin: Option<String>,
        #[arg(long, default_value_t = DEFAULT_PROVIDER_CAP)]
        provider_cap: usize,
    },
    /// Print a ready project's brief and build instruction.
    Export {
        project_id: String,
        /// Also write the brief as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Create a filled-in example project and print its id.
    SeedDemo {
        #[arg(long, default_value = "lunch-planner")]
        fixture: Fixture,
    },
    /// Print interaction metrics recomputed from a project's event log.
    Metrics { project_id: String },
}

fn build_planner(common: &CommonArgs, provider_cap: usize) -> Result<Planner> {
    let catalog = match &common.catalog {
        Some(path) => Catalog::load(path).with_context(|| format!("loading catalog {}", path.display()))?,
        None => Catalog::default(),
    };
    let mut config = ProviderConfig::from_env()?;
    if let Some(mode) = &common.llm_mode {
        config.mode = mode.parse::<ProviderMode>()?;
    }
    let provider = provider_from_config(&config)?;
    tracing::info!(mode = ?config.mode, model = %config.model, "provider configured");
    let store = ProjectStore::open(&common.store_dir)
        .with_context(|| format!("opening store {}", common.store_dir.display()))?;
    let options = PlannerOptions {
        chat: ChatSettings {
            model: config.model.clone(),
            ..ChatSettings::default()
        },
        provider_cap,
    };
    Ok(Planner::new(
        store,
        Arc::new(catalog),
        provider,
        Arc::new(SystemClock),
        Arc::new(RandomIds),
        options,
    ))
}

pub async fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve {
            port,
            host,
            ui_origin,
            provider_cap,
        } => {
            let planner = build_planner(&cli.common, provider_cap)?;
            let ui_origin = ui_origin
                .map(|o| HeaderValue::from_str(&o).context("--ui-origin is not a valid header value"))
                .transpose()?;
            let api_token = std::env::var("APP_PLANNER_API_TOKEN").ok().filter(|t| !t.is_empty());
            let state = AppState {
                planner: Arc::new(planner),
                api_token,
            };
            let addr = SocketAddr::new(host, port);
            let listener = tokio::net::TcpListener::bind(addr)
                .await
                .with_context(|| format!("binding {addr}"))?;
            tracing::info!(%addr, "listening");
            axum::serve(listener, router(state, ui_origin))
                .with_graceful_shutdown(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
        }
        Command::Export { project_id, out } => {
            let planner = build_planner(&cli.common, DEFAULT_PROVIDER_CAP)?;
            let view = planner.export(&project_id).await?;
            println!("{}", serde_json::to_string_pretty(&view.brief)?);
            println!();
            println!("{}", view.instruction);
            if let Some(path) = out {
                let json = serde_json::to_string_pretty(&view)?;
                std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::SeedDemo { fixture } => {
            let planner = build_planner(&cli.common, DEFAULT_PROVIDER_CAP)?;
            let project = planner.seed_demo(fixture).await?;
            println!("{}", project.id());
        }
        Command::Metrics { project_id } => {
            let planner = build_planner(&cli.common, DEFAULT_PROVIDER_CAP)?;
            println!("{}", serde_json::to_string_pretty(&planner.metrics(&project_id)?)?);
        }
    }
    Ok(())
}
