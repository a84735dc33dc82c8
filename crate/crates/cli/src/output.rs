//! Run directories: CSV artifacts with comment headers, TOML reports and the
//! run manifest.
//!
//! Everything except `manifest.toml` is a pure function of the resolved
//! configuration; the manifest alone carries the wall time.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const PRODUCER: &str = concat!("landscape ", env!("CARGO_PKG_VERSION"));

/// A CSV column: name and unit (`"1"` for dimensionless).
pub type Column<'a> = (&'a str, &'a str);

pub struct Run {
    dir: PathBuf,
    command: String,
    hash: String,
    seed: u64,
    started: Instant,
    artifacts: Vec<String>,
    summary: toml::Table,
}

impl Run {
    /// Creates `dir` and writes the resolved configuration into it.
    pub fn create(dir: &Path, command: &str, config: &ExperimentConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        let run = Run {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            hash: config.hash(),
            seed: config.seed,
            started: Instant::now(),
            artifacts: Vec::new(),
            summary: toml::Table::new(),
        };
        let path = run.dir.join("config.toml");
        fs::write(&path, config.canonical())
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        Ok(run)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Writes `name` with a `#` header naming producer, configuration hash,
    /// columns and units.
    pub fn csv<I>(&mut self, name: &str, columns: &[Column], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        self.csv_with(name, columns, rows, &[])
    }

    /// As [`Self::csv`] with extra `# key: value` header lines.
    pub fn csv_with<I>(
        &mut self,
        name: &str,
        columns: &[Column],
        rows: I,
        notes: &[(&str, String)],
    ) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let path = self.dir.join(name);
        let ctx = || format!("writing {}", path.display());
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(ctx(), e))?;
        }
        let mut file = BufWriter::new(File::create(&path).map_err(|e| CliError::io(ctx(), e))?);
        let described: Vec<String> = columns.iter().map(|(c, u)| format!("{c} [{u}]")).collect();
        let mut header = format!(
            "# producer: {PRODUCER} {}\n# config: {}\n# columns: {}\n",
            self.command,
            self.hash,
            described.join(", ")
        );
        for (k, v) in notes {
            header.push_str(&format!("# {k}: {v}\n"));
        }
        file.write_all(header.as_bytes())
            .map_err(|e| CliError::io(ctx(), e))?;
        let mut writer = csv::Writer::from_writer(file);
        let to_io = |e: csv::Error| CliError::io(ctx(), e.into());
        writer
            .write_record(columns.iter().map(|c| c.0))
            .map_err(to_io)?;
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            writer
                .write_record(row.iter().map(|v| v.to_string()))
                .map_err(to_io)?;
        }
        writer.flush().map_err(|e| CliError::io(ctx(), e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    /// Writes a structured-text report.
    pub fn report(&mut self, name: &str, table: &toml::Table) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let text = toml::to_string(table).map_err(|e| CliError::Config(format!("report: {e}")))?;
        fs::write(&path, text)
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    /// Adds a summary value to the manifest.
    pub fn record(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let mut manifest = toml::Table::new();
        manifest.insert("producer".into(), PRODUCER.into());
        manifest.insert("command".into(), self.command.clone().into());
        manifest.insert("config_hash".into(), self.hash.clone().into());
        // u64 seeds above i64::MAX are stored as strings
        manifest.insert(
            "seed".into(),
            i64::try_from(self.seed).map_or_else(|_| self.seed.to_string().into(), Into::into),
        );
        manifest.insert(
            "wall_time_s".into(),
            self.started.elapsed().as_secs_f64().into(),
        );
        manifest.insert(
            "artifacts".into(),
            toml::Value::Array(self.artifacts.iter().map(|a| a.as_str().into()).collect()),
        );
        manifest.insert("summary".into(), toml::Value::Table(self.summary));
        let path = self.dir.join("manifest.toml");
        let text =
            toml::to_string(&manifest).map_err(|e| CliError::Config(format!("manifest: {e}")))?;
        fs::write(&path, text)
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        Ok(self.dir)
    }
}

/// `[x0, x1, ...]` as a TOML array.
pub fn point(x: &[f64]) -> toml::Value {
    toml::Value::Array(x.iter().map(|v| (*v).into()).collect())
}

/// Reads the numeric columns of a CSV written by [`Run::csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let ctx = || format!("reading {}", path.display());
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::io(ctx(), e.into()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::io(ctx(), e.into()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::io(ctx(), e.into()))?;
        let row = record
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    CliError::Config(format!(
                        "{}: row {} has non-numeric field `{f}`",
                        path.display(),
                        line + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}
