//! Run directories and the files written into them.
//!
//! Every text file starts with the code version and the resolved config:
//! CSV files as `#` comment lines, JSON files under a `meta` key. Nothing
//! time-dependent is written into a file, so reruns with the same seed give
//! byte-identical contents.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ccc_core::policy::{self, Architecture, PolicyParams};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Meta<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a RunConfig,
}

/// Output directory of one command invocation.
#[derive(Debug, Clone)]
pub struct RunDir {
    path: PathBuf,
    command: String,
    config: RunConfig,
}

impl RunDir {
    /// Creates `<out>/run-<unix seconds>-seed<seed>`, with a numeric suffix if
    /// that name is taken, and writes the config snapshot into it.
    pub fn create(config: &RunConfig, command: &str) -> CliResult<Self> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let base = format!("run-{stamp}-seed{}", config.seed);
        fs::create_dir_all(&config.out).map_err(|e| CliError::io(&config.out, e))?;
        let mut path = config.out.join(&base);
        let mut n = 1;
        loop {
            match fs::create_dir(&path) {
                Ok(()) => break,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    n += 1;
                    path = config.out.join(format!("{base}-{n}"));
                }
                Err(e) => return Err(CliError::io(&path, e)),
            }
        }
        let dir = RunDir { path, command: command.to_string(), config: config.clone() };
        let snapshot = format!("# {} {VERSION} {command}\n{}", env!("CARGO_PKG_NAME"), config.to_toml());
        dir.write_bytes("config.toml", snapshot.as_bytes())?;
        Ok(dir)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn meta(&self) -> Meta<'_> {
        Meta { tool: env!("CARGO_PKG_NAME"), version: VERSION, command: &self.command, config: &self.config }
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// Writes `rows` as CSV under a header block naming the version and config.
    pub fn write_csv<R: Serialize>(&self, name: &str, rows: &[R]) -> CliResult<PathBuf> {
        let mut buf = Vec::new();
        let config = serde_json::to_string(&self.config)?;
        writeln!(buf, "# {} {VERSION} {}", env!("CARGO_PKG_NAME"), self.command).expect("vec write");
        writeln!(buf, "# config: {config}").expect("vec write");
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush().map_err(|e| CliError::io(self.path.join(name), e))?;
        }
        self.write_bytes(name, &buf)
    }

    /// Writes `{"meta": ..., <body fields>}` as pretty JSON.
    pub fn write_json<B: Serialize>(&self, name: &str, body: &B) -> CliResult<PathBuf> {
        #[derive(Serialize)]
        struct Doc<'a, B> {
            meta: Meta<'a>,
            #[serde(flatten)]
            body: &'a B,
        }
        let mut text = serde_json::to_string_pretty(&Doc { meta: self.meta(), body })?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_checkpoint(&self, name: &str, policy: &PolicyParams) -> CliResult<PathBuf> {
        self.write_bytes(name, &policy::encode(policy))
    }
}

pub fn read_checkpoint(path: &Path) -> CliResult<PolicyParams> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    policy::decode(&bytes).map_err(|source| CliError::Checkpoint { path: path.to_path_buf(), source })
}

/// Reads a checkpoint and insists on a particular architecture.
pub fn read_checkpoint_expecting(path: &Path, arch: &Architecture) -> CliResult<PolicyParams> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    policy::decode_expecting(&bytes, arch).map_err(|source| CliError::Checkpoint { path: path.to_path_buf(), source })
}

/// Reads a CSV written by [`RunDir::write_csv`], skipping the header block.
pub fn read_csv<R: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Vec<R>> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    Ok(r.deserialize().collect::<Result<Vec<R>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, serde::Deserialize)]
    struct Row {
        turn: u64,
        value: f64,
    }

    #[test]
    fn csv_round_trip_with_header_block() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = RunConfig { out: tmp.path().to_path_buf(), ..RunConfig::default() };
        let dir = RunDir::create(&cfg, "test").unwrap();
        let rows = vec![Row { turn: 1, value: 0.5 }, Row { turn: 2, value: -1.25 }];
        let path = dir.write_csv("rows.csv", &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&format!("# ccc {VERSION} test\n# config: {{")));
        assert_eq!(read_csv::<Row>(&path).unwrap(), rows);
    }

    #[test]
    fn run_dirs_never_collide() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = RunConfig { out: tmp.path().to_path_buf(), seed: 4, ..RunConfig::default() };
        let a = RunDir::create(&cfg, "x").unwrap();
        let b = RunDir::create(&cfg, "x").unwrap();
        assert_ne!(a.path(), b.path());
        assert!(a.path().file_name().unwrap().to_str().unwrap().ends_with("seed4"));
        assert!(a.path().join("config.toml").exists());
    }

    #[test]
    fn missing_checkpoint_is_an_io_error() {
        let err = read_checkpoint(Path::new("/nonexistent/pi.ckpt")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
