//! Named UCI datasets with an on-disk cache.
//!
//! Cache layout, one set per key: `<key>.data` (the file as downloaded),
//! `<key>.data.sha256` (hex digest sidecar) and `<key>.lock`.

use std::fs::{self, OpenOptions};
use std::io::Read;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::load::{load_csv_with, CsvOptions, LabelColumn};
use super::Dataset;
use crate::error::{Error, Result};

pub const CACHE_ENV: &str = "EVODT_CACHE";
/// Overrides download locations: `<mirror>/<key>.data`. Accepts `http(s)://`,
/// `file://` or a plain directory path.
pub const MIRROR_ENV: &str = "EVODT_MIRROR";

const UCI_BASE: &str = "https://archive.ics.uci.edu/ml/machine-learning-databases";

#[derive(Debug, Clone, PartialEq)]
pub struct RegistryEntry {
    pub key: String,
    pub url: String,
    /// Pinned SHA-256 of the file. When absent, the digest of the first
    /// download is recorded in the sidecar and enforced afterwards.
    pub sha256: Option<String>,
    pub options: CsvOptions,
}

impl RegistryEntry {
    pub fn new(key: &str, url: impl Into<String>) -> Self {
        RegistryEntry {
            key: key.to_owned(),
            url: url.into(),
            sha256: None,
            options: CsvOptions::default(),
        }
    }

    pub fn with_sha256(mut self, digest: impl Into<String>) -> Self {
        self.sha256 = Some(digest.into());
        self
    }

    pub fn with_options(mut self, options: CsvOptions) -> Self {
        self.options = options;
        self
    }
}

/// Source of file bytes for a URL.
pub trait Fetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>>;
}

/// Blocking HTTP(S) client; `file://` URLs are read from disk.
#[derive(Debug, Default, Clone, Copy)]
pub struct HttpFetcher;

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>> {
        if let Some(path) = url.strip_prefix("file://") {
            return fs::read(path).map_err(|e| Error::Network {
                url: url.to_owned(),
                message: e.to_string(),
            });
        }
        let net_err = |e: ureq::Error| Error::Network {
            url: url.to_owned(),
            message: e.to_string(),
        };
        let mut response = ureq::get(url).call().map_err(net_err)?;
        response
            .body_mut()
            .with_config()
            .limit(256 << 20)
            .read_to_vec()
            .map_err(net_err)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    entries: Vec<RegistryEntry>,
}

impl Registry {
    pub fn new(entries: Vec<RegistryEntry>) -> Self {
        Registry { entries }
    }

    /// The built-in UCI datasets.
    pub fn builtin() -> Self {
        let uci = |key: &str, path: &str| RegistryEntry::new(key, format!("{UCI_BASE}/{path}"));
        let label_first = CsvOptions {
            label_column: LabelColumn::Index(0),
            ..CsvOptions::default()
        };
        Registry::new(vec![
            uci("iris", "iris/iris.data"),
            uci("tic-tac-toe", "tic-tac-toe/tic-tac-toe.data").with_options(CsvOptions {
                feature_tokens: vec![("o".into(), 0.0), ("b".into(), 0.5), ("x".into(), 1.0)],
                ..CsvOptions::default()
            }),
            uci("glass", "glass/glass.data").with_options(CsvOptions {
                ignore_columns: vec![0],
                ..CsvOptions::default()
            }),
            uci("haberman", "haberman/haberman.data"),
            uci(
                "sonar",
                "undocumented/connectionist-bench/sonar/sonar.all-data",
            ),
            uci("ionosphere", "ionosphere/ionosphere.data"),
            uci(
                "diabetes",
                "pima-indians-diabetes/pima-indians-diabetes.data",
            ),
            uci("balance-scale", "balance-scale/balance-scale.data")
                .with_options(label_first.clone()),
            uci("wine", "wine/wine.data").with_options(label_first),
        ])
    }

    /// Built-in registry, redirected to `$EVODT_MIRROR` when set.
    pub fn from_env() -> Self {
        match std::env::var(MIRROR_ENV) {
            Ok(m) if !m.is_empty() => Registry::builtin().with_mirror(&m),
            _ => Registry::builtin(),
        }
    }

    /// Points every entry at `<base>/<key>.data`.
    pub fn with_mirror(mut self, base: &str) -> Self {
        let base = base.trim_end_matches('/');
        let base = if base.contains("://") {
            base.to_owned()
        } else {
            let abs = std::path::absolute(base).unwrap_or_else(|_| PathBuf::from(base));
            format!("file://{}", abs.display())
        };
        for e in &mut self.entries {
            e.url = format!("{base}/{}.data", e.key);
        }
        self
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.key.as_str())
    }

    pub fn get(&self, key: &str) -> Result<&RegistryEntry> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .ok_or_else(|| Error::UnknownDataset(key.to_owned()))
    }

    pub fn fetch(&self, key: &str, cache_dir: &Path) -> Result<PathBuf> {
        self.fetch_with(key, cache_dir, &HttpFetcher)
    }

    /// Returns the cached file for `key`, downloading it only when the cache
    /// holds no checksum-valid copy.
    pub fn fetch_with(
        &self,
        key: &str,
        cache_dir: &Path,
        fetcher: &dyn Fetcher,
    ) -> Result<PathBuf> {
        let entry = self.get(key)?;
        fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
        let data_path = cache_dir.join(format!("{key}.data"));
        let sum_path = cache_dir.join(format!("{key}.data.sha256"));
        let lock_path = cache_dir.join(format!("{key}.lock"));

        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(|e| Error::io(&lock_path, e))?;
        lock.lock().map_err(|e| Error::io(&lock_path, e))?;

        if cache_is_valid(&data_path, &sum_path, entry.sha256.as_deref())? {
            return Ok(data_path);
        }

        let bytes = fetcher.fetch(&entry.url)?;
        let actual = sha256_hex(&bytes);
        if let Some(expected) = &entry.sha256 {
            if !expected.eq_ignore_ascii_case(&actual) {
                return Err(Error::Checksum {
                    key: key.to_owned(),
                    expected: expected.clone(),
                    actual,
                });
            }
        }
        let tmp = cache_dir.join(format!("{key}.data.partial"));
        fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &data_path).map_err(|e| Error::io(&data_path, e))?;
        fs::write(&sum_path, format!("{actual}\n")).map_err(|e| Error::io(&sum_path, e))?;
        drop(lock);
        Ok(data_path)
    }

    /// Fetches `key` and parses it with the entry's CSV options.
    pub fn load(&self, key: &str, cache_dir: &Path) -> Result<Dataset> {
        let path = self.fetch(key, cache_dir)?;
        let raw = load_csv_with(&path, &self.get(key)?.options)?;
        Dataset::from_raw(&raw)
    }
}

fn cache_is_valid(data_path: &Path, sum_path: &Path, pinned: Option<&str>) -> Result<bool> {
    if !data_path.is_file() || !sum_path.is_file() {
        return Ok(false);
    }
    let recorded = fs::read_to_string(sum_path).map_err(|e| Error::io(sum_path, e))?;
    let recorded = recorded.trim();
    let mut file = fs::File::open(data_path).map_err(|e| Error::io(data_path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)
        .map_err(|e| Error::io(data_path, e))?;
    let actual = sha256_hex(&bytes);
    Ok(actual == recorded && pinned.is_none_or(|p| p.eq_ignore_ascii_case(&actual)))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `$EVODT_CACHE`, or `./.evodt_cache`.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".evodt_cache"))
}

/// Fetches a built-in dataset into `cache_dir` and returns the cached path.
pub fn fetch_uci(name: &str, cache_dir: &Path) -> Result<PathBuf> {
    Registry::from_env().fetch(name, cache_dir)
}

/// Fetches and parses a built-in dataset.
pub fn load_dataset(name: &str, cache_dir: &Path) -> Result<Dataset> {
    Registry::from_env().load(name, cache_dir)
}
