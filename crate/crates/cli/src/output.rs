use crate::config::RunConfig;
use crate::error::CliError;
use intrinsic_engine::table::ResultTable;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const OUT_DIR_ENV: &str = "INTRINSIC_OUT_DIR";

/// Where results go and what every file is stamped with.
pub struct Output {
    dir: PathBuf,
    command: String,
    config_hash: String,
    seed: u64,
    written: Vec<PathBuf>,
    started: Instant,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(cfg.canonical().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Output {
    /// Flag, then config, then the environment, then `./out`.
    pub fn new(command: &str, flag: Option<&Path>, cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = flag
            .map(Path::to_path_buf)
            .or_else(|| cfg.run.out_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            command: command.to_string(),
            config_hash: config_hash(cfg),
            seed: cfg.run.seed,
            written: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, file: &str, mut table: ResultTable) -> Result<PathBuf, CliError> {
        table.add_provenance("command", &self.command);
        table.add_provenance("config_sha256", &self.config_hash);
        table.add_provenance("seed", &self.seed.to_string());
        table.add_provenance("version", env!("CARGO_PKG_VERSION"));
        let path = self.dir.join(file);
        std::fs::write(&path, table.to_csv())?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// `<command>.manifest.toml`: the config echo, seed, hash, outputs and
    /// wall time.
    pub fn finish(self, cfg: &RunConfig) -> Result<PathBuf, CliError> {
        let mut run = toml::Table::new();
        run.insert("command".into(), self.command.clone().into());
        run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        run.insert("seed".into(), toml::Value::Integer(self.seed as i64));
        run.insert("config_sha256".into(), self.config_hash.clone().into());
        run.insert("wall_time_s".into(), self.started.elapsed().as_secs_f64().into());
        let outputs = self
            .written
            .iter()
            .map(|p| toml::Value::String(p.file_name().unwrap_or_default().to_string_lossy().into_owned()))
            .collect::<Vec<_>>();
        run.insert("outputs".into(), toml::Value::Array(outputs));
        let mut doc = toml::Table::new();
        doc.insert("manifest".into(), toml::Value::Table(run));
        let echo: toml::Table = cfg.canonical().parse().expect("canonical config parses");
        doc.insert("config".into(), toml::Value::Table(echo));
        let path = self.dir.join(format!("{}.manifest.toml", self.command));
        std::fs::write(&path, toml::to_string(&doc).expect("manifest serialises"))?;
        Ok(path)
    }
}
