//! The `rthkp` operator command.
//!
//! Exit codes: 0 success, 1 operational failure, 2 usage error. Machine
//! output goes to stdout and diagnostics to stderr.

use std::ffi::OsString;
use std::io::{self, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rthkp_core::geojson::{
    parse_feature_collection_bytes, properties_json, serialize_feature_collection,
};
use rthkp_core::persist::atomic_write;
use rthkp_core::{Category, ListFilter, RegistryError, Store};
use serde_json::Value;

use crate::api::{router, ApiConfig};
use crate::auth::AdminCredential;
use crate::lock::DataDirLock;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const ADMIN_TOKEN_ENV: &str = "RTHKP_ADMIN_TOKEN";

#[derive(Debug, Parser)]
#[command(
    name = "rthkp",
    version,
    about = "Green open space registry for Palembang"
)]
pub struct Cli {
    /// Directory holding spaces.geojson, photos/ and the lock file
    #[arg(long, global = true, env = "RTHKP_DATA_DIR", default_value = "./data")]
    pub data_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service until interrupted
    Serve {
        #[arg(long, env = "RTHKP_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Webmap bundle to serve at `/`
        #[arg(long, env = "RTHKP_STATIC_DIR")]
        static_dir: Option<PathBuf>,
        /// Allow cross-origin requests from any origin
        #[arg(long)]
        cors_permissive: bool,
    },
    /// Load the default inventory of twelve green spaces
    Seed {
        /// Replace a non-empty store
        #[arg(long)]
        force: bool,
    },
    /// Load a FeatureCollection into the store
    Import {
        file: PathBuf,
        /// Swap the whole store for the file's contents
        #[arg(long, conflicts_with = "merge")]
        replace: bool,
        /// Upsert by id (default)
        #[arg(long)]
        merge: bool,
    },
    /// Write the canonical FeatureCollection
    Export {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a FeatureCollection without touching the store
    Validate { file: PathBuf },
    /// Print records ascending by id
    List {
        #[arg(long)]
        category: Option<Category>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(msg) => {
            let _ = writeln!(err, "rthkp: {msg}");
            EXIT_FAILURE
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), String> {
    let data_dir = cli.data_dir;
    match cli.command {
        Command::Serve {
            bind,
            static_dir,
            cors_permissive,
        } => {
            let _lock = DataDirLock::acquire(&data_dir).map_err(|e| e.to_string())?;
            let store = open(&data_dir)?;
            let admin = std::env::var(ADMIN_TOKEN_ENV)
                .ok()
                .and_then(|t| AdminCredential::new(&t));
            if admin.is_none() {
                let _ = writeln!(
                    err,
                    "rthkp: {ADMIN_TOKEN_ENV} unset; admin endpoints disabled"
                );
            }
            let config = ApiConfig {
                admin,
                static_dir,
                photos_dir: Some(data_dir.join("photos")),
                permissive_cors: cors_permissive,
            };
            serve(bind, Arc::new(store), config, err)
        }
        Command::Seed { force } => {
            let _lock = DataDirLock::acquire(&data_dir).map_err(|e| e.to_string())?;
            let store = open(&data_dir)?;
            match store.seed_default(force) {
                Ok(n) => {
                    let _ = writeln!(
                        err,
                        "seeded {n} green spaces into {}",
                        store.path().display()
                    );
                    Ok(())
                }
                Err(e @ RegistryError::SeedConflict(_)) => Err(format!("{e} (pass --force)")),
                Err(e) => Err(e.to_string()),
            }
        }
        Command::Import { file, replace, .. } => {
            let features = read_collection(&file)?;
            let _lock = DataDirLock::acquire(&data_dir).map_err(|e| e.to_string())?;
            let store = open(&data_dir)?;
            if replace {
                let n = store.replace_all(features).map_err(|e| e.to_string())?;
                let _ = writeln!(err, "replaced store with {n} records");
            } else {
                let (inserted, updated) = store.upsert_all(features).map_err(|e| e.to_string())?;
                let _ = writeln!(err, "merged: {inserted} inserted, {updated} updated");
            }
            Ok(())
        }
        Command::Export { output } => {
            let store = open(&data_dir)?;
            let text = serialize_feature_collection(&store.snapshot().features())
                .map_err(|e| e.to_string())?;
            match output {
                Some(path) => atomic_write(&path, text.as_bytes(), None)
                    .map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => out
                    .write_all(text.as_bytes())
                    .map_err(|e| format!("cannot write to stdout: {e}")),
            }
        }
        Command::Validate { file } => {
            let features = read_collection(&file)?;
            let _ = writeln!(err, "{}: {} valid features", file.display(), features.len());
            Ok(())
        }
        Command::List { category, format } => {
            let store = open(&data_dir)?;
            let spaces = store.list_spaces(&ListFilter {
                category,
                bbox: None,
            });
            let text = match format {
                Format::Json => {
                    let props: Vec<Value> = spaces
                        .iter()
                        .map(|s| properties_json(&s.to_feature()))
                        .collect();
                    let mut s = serde_json::to_string_pretty(&props).expect("json values");
                    s.push('\n');
                    s
                }
                Format::Table => render_table(&spaces),
            };
            out.write_all(text.as_bytes())
                .map_err(|e| format!("cannot write to stdout: {e}"))
        }
    }
}

fn open(data_dir: &Path) -> Result<Store, String> {
    Store::open_dir(data_dir).map_err(|e| e.to_string())
}

/// Reads and fully validates a FeatureCollection; `-` reads stdin.
fn read_collection(file: &Path) -> Result<Vec<rthkp_core::geojson::SpaceFeature>, String> {
    let bytes = if file == Path::new("-") {
        let mut buf = Vec::new();
        io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| format!("cannot read stdin: {e}"))?;
        buf
    } else {
        std::fs::read(file).map_err(|e| format!("cannot read {}: {e}", file.display()))?
    };
    parse_feature_collection_bytes(&bytes).map_err(|e| format!("{}: {e}", file.display()))
}

fn render_table(spaces: &[rthkp_core::GreenSpace]) -> String {
    let rows: Vec<[String; 4]> = spaces
        .iter()
        .map(|s| {
            [
                s.id.clone(),
                s.category.to_string(),
                format!("{:.6},{:.6}", s.marker.lon(), s.marker.lat()),
                s.name.clone(),
            ]
        })
        .collect();
    let header = ["ID", "CATEGORY", "MARKER", "NAME"].map(String::from);
    let mut widths = header.clone().map(|h| h.chars().count());
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut text = String::new();
    for row in std::iter::once(&header).chain(&rows) {
        let line = row
            .iter()
            .zip(widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        text.push_str(line.trim_end());
        text.push('\n');
    }
    text
}

fn serve(
    bind: SocketAddr,
    store: Arc<Store>,
    config: ApiConfig,
    err: &mut dyn Write,
) -> Result<(), String> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| format!("cannot start runtime: {e}"))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| format!("cannot bind {bind}: {e}"))?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        let _ = writeln!(err, "listening on http://{addr}");
        let _ = err.flush();
        axum::serve(listener, router(store, config))
            .with_graceful_shutdown(shutdown_signal())
            .await
            .map_err(|e| format!("server error: {e}"))
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = terminate => {}
    }
}
