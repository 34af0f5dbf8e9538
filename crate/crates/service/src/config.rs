use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ServiceError;

/// Runtime configuration, read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    /// Directory holding the per-field reading logs.
    #[serde(default = "default_store_path")]
    pub store_path: PathBuf,
    /// Model file; its evaluation report lives next to it.
    #[serde(default = "default_model_path")]
    pub model_path: PathBuf,
    /// Crop growth parameter CSV. The bundled table is used when absent.
    #[serde(default)]
    pub crop_params_path: Option<PathBuf>,
    /// Weather replay CSV used to fill snapshot days without weather readings.
    #[serde(default)]
    pub weather_fixture_path: Option<PathBuf>,
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_top_k")]
    pub default_top_k: usize,
    /// Fill a day missing soil or weather from the latest earlier day.
    #[serde(default)]
    pub carry_forward: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_store_path() -> PathBuf {
    PathBuf::from("agritwin-store")
}

fn default_model_path() -> PathBuf {
    PathBuf::from("agritwin-model.json")
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

fn default_top_k() -> usize {
    3
}

fn default_workers() -> usize {
    4
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            store_path: default_store_path(),
            model_path: default_model_path(),
            crop_params_path: None,
            weather_fixture_path: None,
            bind: default_bind(),
            default_top_k: default_top_k(),
            carry_forward: false,
            workers: default_workers(),
        }
    }
}

impl AppConfig {
    /// Parses and validates a config file. Relative paths inside it are
    /// resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut config: AppConfig = serde_json::from_str(&text)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        config.validate()?;
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.store_path);
        fix(&mut self.model_path);
        if let Some(p) = self.crop_params_path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.weather_fixture_path.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let bad = |m: String| Err(ServiceError::Config(m));
        if !(1..=agritwin_core::recommender::CropClass::COUNT).contains(&self.default_top_k) {
            return bad(format!("default_top_k must lie in 1..=22, got {}", self.default_top_k));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.bind.parse::<SocketAddr>().is_err() {
            return bad(format!("bind `{}` is not a socket address", self.bind));
        }
        if self.store_path.exists() && !self.store_path.is_dir() {
            return bad(format!("store_path {} is not a directory", self.store_path.display()));
        }
        if self.model_path.is_dir() {
            return bad(format!("model_path {} is a directory", self.model_path.display()));
        }
        for p in self.crop_params_path.iter().chain(&self.weather_fixture_path) {
            if !p.is_file() {
                return bad(format!("{} does not exist", p.display()));
            }
        }
        Ok(())
    }

    /// `<model>.report.json`, written by `train` and served by the API.
    pub fn report_path(&self) -> PathBuf {
        report_path_for(&self.model_path)
    }
}

pub fn report_path_for(model: &Path) -> PathBuf {
    let mut name = model.file_stem().unwrap_or_default().to_os_string();
    name.push(".report.json");
    model.with_file_name(name)
}
