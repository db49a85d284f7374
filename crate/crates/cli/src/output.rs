//! Error contract, run manifests and output-file helpers.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use qaa_core::QaaError;
use serde::Serialize;

/// Error printed as `error[class]: message` on stderr.
#[derive(Debug)]
pub struct CliError {
    pub class: &'static str,
    pub code: u8,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_IO: u8 = 4;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError {
            class: "usage",
            code: EXIT_USAGE,
            message: msg.into(),
        }
    }
}

impl From<QaaError> for CliError {
    fn from(e: QaaError) -> Self {
        let class = e.class();
        let code = match class {
            "invalid-argument" => EXIT_USAGE,
            "io" | "format" => EXIT_IO,
            _ => EXIT_NUMERICAL,
        };
        CliError {
            class,
            code,
            message: e.to_string(),
        }
    }
}

pub fn io_error(path: &Path, e: io::Error) -> CliError {
    QaaError::io(path, e).into()
}

#[derive(Debug, Serialize)]
struct StageTiming {
    stage: String,
    seconds: f64,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    tool_version: &'static str,
    master_seed: Option<u64>,
    config: serde_json::Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
    started_unix_seconds: u64,
    wall_clock_seconds: f64,
    stage_timings: Vec<StageTiming>,
}

/// One command invocation: tracks inputs, outputs and timings, and writes
/// `<stem>.manifest.json` into the output directory when finished. Every
/// tabular output starts with a `# manifest: <file>` line.
pub struct Run {
    manifest: RunManifest,
    start: Instant,
    dir: PathBuf,
    name: String,
    input_paths: Vec<PathBuf>,
}

impl Run {
    pub fn start(
        command: &str,
        config: &impl Serialize,
        seed: Option<u64>,
        dir: &Path,
        stem: &str,
    ) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Run {
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION"),
                master_seed: seed,
                config: serde_json::to_value(config).expect("arguments serialize"),
                inputs: Vec::new(),
                outputs: Vec::new(),
                started_unix_seconds: started,
                wall_clock_seconds: 0.0,
                stage_timings: Vec::new(),
            },
            start: Instant::now(),
            dir: dir.to_path_buf(),
            name: format!("{stem}.manifest.json"),
            input_paths: Vec::new(),
        })
    }

    pub fn manifest_name(&self) -> &str {
        &self.name
    }

    pub fn input(&mut self, path: &Path) {
        self.manifest.inputs.push(path.display().to_string());
        self.input_paths
            .push(fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf()));
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.manifest.stage_timings.push(StageTiming {
            stage: name.to_string(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        out
    }

    /// Registers a file written by someone else (e.g. a library call).
    pub fn output(&mut self, path: &Path) -> CliResult<()> {
        self.guard(path)?;
        self.manifest.outputs.push(path.display().to_string());
        Ok(())
    }

    fn guard(&self, path: &Path) -> CliResult<()> {
        let canon = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        if self.input_paths.contains(&canon) {
            return Err(CliError::usage(format!(
                "refusing to overwrite input file {}",
                path.display()
            )));
        }
        Ok(())
    }

    /// Writes a delimited-text file headed by the manifest reference.
    pub fn csv(
        &mut self,
        path: &Path,
        body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    ) -> CliResult<()> {
        self.output(path)?;
        let file = File::create(path).map_err(|e| io_error(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "# manifest: {}", self.name)
            .and_then(|_| body(&mut w))
            .and_then(|_| w.flush())
            .map_err(|e| io_error(path, e))
    }

    /// Writes a JSON object with a `manifest` field added.
    pub fn json(&mut self, path: &Path, mut value: serde_json::Value) -> CliResult<()> {
        self.output(path)?;
        if let Some(obj) = value.as_object_mut() {
            obj.insert(
                "manifest".into(),
                serde_json::Value::String(self.name.clone()),
            );
        }
        let text = serde_json::to_string_pretty(&value).expect("json serializes") + "\n";
        fs::write(path, text).map_err(|e| io_error(path, e))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.manifest.wall_clock_seconds = self.start.elapsed().as_secs_f64();
        let path = self.dir.join(&self.name);
        let text =
            serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n";
        fs::write(&path, text).map_err(|e| io_error(&path, e))
    }
}
