//! Plain-text `key=value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored; later assignments
//! win. Training keys map onto [`TrainConfig`]; any other key is kept so
//! callers can read their own settings from the same file.

use std::path::Path;

use crate::bayesopt::HyperConfig;
use crate::error::{Error, Result};
use crate::training::TrainConfig;

/// Keys understood by [`ConfigFile::apply_train`].
pub const TRAIN_KEYS: &[&str] = &[
    "epochs",
    "lr",
    "z_dim",
    "gamma_init",
    "beta_init",
    "lambda_kl",
    "window",
    "seeds",
    "eval_seed",
    "pos_weight",
    "persist_memory",
    "d_p",
    "d_hidden",
    "heads",
    "layers",
    "p_drop",
    "s_init",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_named(text, Path::new("<config>"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_named(&text, path)
    }

    fn parse_named(text: &str, path: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i as u64 + 1,
                    message: format!("expected key=value, got {line:?}"),
                });
            };
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i as u64 + 1,
                    message: "empty key".into(),
                });
            }
            entries.push((key.to_string(), v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    /// Last value assigned to `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Every value assigned to `key`, in file order.
    pub fn get_all(&self, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .collect()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("invalid value {v:?} for key {key}")))
            })
            .transpose()
    }

    /// Overwrites every training field present in the file.
    pub fn apply_train(&self, cfg: &mut TrainConfig) -> Result<()> {
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = self.get_parsed($key)? {
                    $field = v;
                }
            };
        }
        set!("epochs", cfg.epochs);
        set!("lr", cfg.lr);
        set!("z_dim", cfg.encoder.d_z);
        set!("gamma_init", cfg.gamma_init);
        set!("beta_init", cfg.beta_init);
        set!("lambda_kl", cfg.kl_weight);
        set!("window", cfg.window);
        set!("eval_seed", cfg.eval_seed);
        set!("pos_weight", cfg.pos_weight);
        set!("persist_memory", cfg.persist_memory);
        set!("d_p", cfg.encoder.d_p);
        set!("d_hidden", cfg.encoder.d_hidden);
        set!("heads", cfg.encoder.heads);
        set!("layers", cfg.encoder.layers);
        set!("p_drop", cfg.encoder.p_drop);
        set!("s_init", cfg.encoder.s_init);
        if let Some(v) = self.get("seeds") {
            cfg.seeds = parse_seed_list(v)?;
        }
        Ok(())
    }
}

/// All training settings as ordered `key=value` pairs. Floats use the
/// shortest representation that parses back to the same value.
pub fn train_entries(cfg: &TrainConfig) -> Vec<(&'static str, String)> {
    let seeds = cfg.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
    vec![
        ("epochs", cfg.epochs.to_string()),
        ("lr", cfg.lr.to_string()),
        ("z_dim", cfg.encoder.d_z.to_string()),
        ("gamma_init", cfg.gamma_init.to_string()),
        ("beta_init", cfg.beta_init.to_string()),
        ("lambda_kl", cfg.kl_weight.to_string()),
        ("window", cfg.window.to_string()),
        ("seeds", seeds),
        ("eval_seed", cfg.eval_seed.to_string()),
        ("pos_weight", cfg.pos_weight.to_string()),
        ("persist_memory", cfg.persist_memory.to_string()),
        ("d_p", cfg.encoder.d_p.to_string()),
        ("d_hidden", cfg.encoder.d_hidden.to_string()),
        ("heads", cfg.encoder.heads.to_string()),
        ("layers", cfg.encoder.layers.to_string()),
        ("p_drop", cfg.encoder.p_drop.to_string()),
        ("s_init", cfg.encoder.s_init.to_string()),
    ]
}

/// The searched hyperparameters in the order lr, z_dim, gamma_init,
/// beta_init, lambda_kl.
pub fn hyper_entries(h: &HyperConfig) -> Vec<(&'static str, String)> {
    vec![
        ("lr", h.lr.to_string()),
        ("z_dim", h.z_dim.to_string()),
        ("gamma_init", h.gamma_init.to_string()),
        ("beta_init", h.beta_init.to_string()),
        ("lambda_kl", h.lambda_kl.to_string()),
    ]
}

pub fn render<K: AsRef<str>>(entries: &[(K, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{}={v}\n", k.as_ref())).collect()
}

/// Parses `a..b` (inclusive), a comma list, or a single integer.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("invalid seed list {s:?}; expected e.g. 1000..1009 or 1,2,3"));
    let s = s.trim();
    let out: Vec<u64> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if hi < lo {
            return Err(bad());
        }
        (lo..=hi).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// Same syntax as [`parse_seed_list`], for window lengths.
pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    parse_seed_list(s)?
        .into_iter()
        .map(|v| usize::try_from(v).map_err(|_| Error::Config(format!("value {v} too large"))))
        .collect()
}
