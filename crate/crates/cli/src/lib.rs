//! The `sla` command-line tool.
//!
//! Standard output only ever carries machine-readable payload (canonical
//! JSON, report JSON, ids); everything meant for people goes to standard
//! error.

use std::io::{self, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use sla_core::{
    document_id, load_catalog, parse, serialize_canonical, validate_bytes, validate_document, Catalog,
    FileStore, ParseError, SlaStore, StoreError,
};
use sla_service::{activity_list, ServiceConfig, DEFAULT_BODY_LIMIT};

pub mod draft;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sla", version, about = "Build and check IoT SLA documents")]
struct Cli {
    /// Catalog directory
    #[arg(long, global = true, env = "SLA_CATALOG_DIR")]
    catalog: Option<PathBuf>,
    /// Store directory
    #[arg(long, global = true, env = "SLA_STORE_DIR")]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Inspect the catalog
    #[command(subcommand)]
    Catalog(CatalogCommand),
    /// Validate a document (`-` reads standard input)
    Validate { file: String },
    /// Build a canonical document from a draft
    Build {
        #[arg(long)]
        from: String,
    },
    /// Work with stored documents
    #[command(subcommand)]
    Store(StoreCommand),
    /// Run the HTTP service
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, default_value_t = DEFAULT_BODY_LIMIT)]
        body_limit: usize,
        /// Directory with the built wizard
        #[arg(long)]
        assets: Option<PathBuf>,
        /// Extra origin allowed cross-origin; repeatable
        #[arg(long = "allow-origin")]
        allow_origins: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
enum CatalogCommand {
    List,
    Show { activity: String },
}

#[derive(Debug, Subcommand)]
enum StoreCommand {
    Put { file: String },
    Get { id: String },
    List,
}

/// A failed command: exit code plus what to print on standard error.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Failure::new(EXIT_IO, e.to_string())
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::new(EXIT_INVALID, e.to_string())
    }
}

struct Io<'a> {
    stdin: &'a mut dyn Read,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

/// Runs `sla` with process standard streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdin = io::stdin();
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(argv, &mut stdin.lock(), &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut io = Io {
        stdin,
        stdout,
        stderr,
    };
    let result = dispatch(cli, &mut io);
    let _ = io.stdout.flush();
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(io.stderr, "sla: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: Cli, io: &mut Io) -> Result<i32, Failure> {
    match cli.command {
        Command::Catalog(CatalogCommand::List) => {
            let catalog = open_catalog(cli.catalog.as_deref())?;
            emit_json(io, &activity_list(&catalog))?;
            Ok(EXIT_OK)
        }
        Command::Catalog(CatalogCommand::Show { activity }) => {
            let catalog = open_catalog(cli.catalog.as_deref())?;
            let schema = catalog
                .resolve_activity_schema(&activity)
                .map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
            emit_json(io, &schema)?;
            Ok(EXIT_OK)
        }
        Command::Validate { file } => {
            let catalog = open_catalog(cli.catalog.as_deref())?;
            let bytes = read_input(io, &file)?;
            let report = validate_bytes(&catalog, &bytes)?;
            emit_json(io, &report)?;
            Ok(if report.valid { EXIT_OK } else { EXIT_INVALID })
        }
        Command::Build { from } => {
            let catalog = open_catalog(cli.catalog.as_deref())?;
            let bytes = read_input(io, &from)?;
            build(&catalog, &bytes, io)
        }
        Command::Store(cmd) => {
            let root = cli.store.ok_or_else(|| {
                Failure::new(
                    EXIT_USAGE,
                    "no store directory: pass --store or set SLA_STORE_DIR",
                )
            })?;
            let store = FileStore::open(root)?;
            match cmd {
                StoreCommand::Put { file } => {
                    let bytes = read_input(io, &file)?;
                    let doc = parse(&bytes)?;
                    let id = store.put(&doc)?;
                    write_out(io, format!("{id}\n").as_bytes())?;
                }
                StoreCommand::Get { id } => {
                    let bytes = store.get_canonical(&id)?;
                    write_out(io, &bytes)?;
                }
                StoreCommand::List => emit_json(io, &store.list()?)?,
            }
            Ok(EXIT_OK)
        }
        Command::Serve {
            bind,
            body_limit,
            assets,
            allow_origins,
        } => {
            let catalog = cli.catalog.ok_or_else(|| {
                Failure::new(
                    EXIT_USAGE,
                    "no catalog directory: pass --catalog or set SLA_CATALOG_DIR",
                )
            })?;
            let store = cli.store.ok_or_else(|| {
                Failure::new(
                    EXIT_USAGE,
                    "no store directory: pass --store or set SLA_STORE_DIR",
                )
            })?;
            let mut config = ServiceConfig::new(catalog, store, bind);
            config.request_body_limit = body_limit;
            config.assets_dir = assets;
            config.allowed_origins = allow_origins;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
            match runtime.block_on(sla_service::serve(config)) {
                Ok(()) => Ok(EXIT_OK),
                Err(sla_service::ServiceError::ZeroBodyLimit) => {
                    Err(Failure::new(EXIT_USAGE, "--body-limit must be greater than zero"))
                }
                Err(e) => Err(Failure::new(EXIT_IO, e.to_string())),
            }
        }
    }
}

fn build(catalog: &Catalog, bytes: &[u8], io: &mut Io) -> Result<i32, Failure> {
    let mut doc = draft::parse_draft(catalog, bytes)?;
    let report = validate_document(catalog, &doc);
    if !report.valid {
        let json = serde_json::to_string(&report).expect("report serializes");
        let _ = writeln!(io.stderr, "{json}");
        return Ok(EXIT_INVALID);
    }
    doc.workflow = doc.workflow.into_canonical_order();
    write_out(io, &serialize_canonical(&doc))?;
    let _ = writeln!(io.stderr, "{}", document_id(&doc));
    Ok(EXIT_OK)
}

fn open_catalog(dir: Option<&Path>) -> Result<Catalog, Failure> {
    let dir = dir.ok_or_else(|| {
        Failure::new(
            EXIT_USAGE,
            "no catalog directory: pass --catalog or set SLA_CATALOG_DIR",
        )
    })?;
    load_catalog(dir).map_err(|e| Failure::new(EXIT_IO, e.to_string()))
}

fn read_input(io: &mut Io, file: &str) -> Result<Vec<u8>, Failure> {
    if file == "-" {
        let mut buf = Vec::new();
        io.stdin
            .read_to_end(&mut buf)
            .map_err(|e| Failure::new(EXIT_IO, format!("cannot read standard input: {e}")))?;
        return Ok(buf);
    }
    std::fs::read(file).map_err(|e| Failure::new(EXIT_IO, format!("cannot read {file}: {e}")))
}

fn write_out(io: &mut Io, bytes: &[u8]) -> Result<(), Failure> {
    io.stdout
        .write_all(bytes)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot write output: {e}")))
}

fn emit_json<T: serde::Serialize + ?Sized>(io: &mut Io, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_vec(value).expect("value serializes");
    text.push(b'\n');
    write_out(io, &text)
}
