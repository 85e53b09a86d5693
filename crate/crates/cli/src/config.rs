//! Flat key-value experiment configs: one `key = value` per line, `#`
//! comments, values are scalars or comma-separated lists. Every numeric
//! field is validated at parse time with line information.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
    pub text: String,
}

pub fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    let mut entries = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| ConfigError {
            line: line_no,
            message: format!("expected `key = value`, got `{body}`"),
        })?;
        let key = key.trim().to_string();
        if entries.contains_key(&key) {
            return Err(ConfigError {
                line: line_no,
                message: format!("duplicate key `{key}`"),
            });
        }
        entries.insert(key, (line_no, value.trim().to_string()));
    }
    Ok(RawConfig {
        entries,
        text: text.to_string(),
    })
}

impl RawConfig {
    fn take(&self, key: &str) -> Option<&(usize, String)> {
        self.entries.get(key)
    }

    pub fn floats(&self, key: &str, default: Option<&[f64]>) -> Result<Vec<f64>, ConfigError> {
        match self.take(key) {
            None => default.map(|d| d.to_vec()).ok_or_else(|| ConfigError {
                line: 0,
                message: format!("missing required key `{key}`"),
            }),
            Some(&(line, ref v)) => v
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| ConfigError {
                        line,
                        message: format!("`{key}`: `{tok}` is not a number"),
                    })
                })
                .collect(),
        }
    }

    pub fn float(&self, key: &str, default: Option<f64>) -> Result<f64, ConfigError> {
        let vals = self.floats(key, default.map(|d| vec![d]).as_deref())?;
        if vals.len() != 1 {
            let line = self.take(key).map(|e| e.0).unwrap_or(0);
            return Err(ConfigError {
                line,
                message: format!("`{key}` must be a single number"),
            });
        }
        Ok(vals[0])
    }

    pub fn usize_val(&self, key: &str, default: Option<usize>) -> Result<usize, ConfigError> {
        match self.take(key) {
            None => default.ok_or_else(|| ConfigError {
                line: 0,
                message: format!("missing required key `{key}`"),
            }),
            Some(&(line, ref v)) => v.trim().parse::<usize>().map_err(|_| ConfigError {
                line,
                message: format!("`{key}`: `{v}` is not a nonnegative integer"),
            }),
        }
    }

    pub fn degrees(&self, key: &str, default: (i32, i32)) -> Result<(i32, i32), ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(&(line, ref v)) => {
                let parts: Vec<_> = v.split(',').map(str::trim).collect();
                let bad = || ConfigError {
                    line,
                    message: format!("`{key}` must be two integers `n+,n-`"),
                };
                if parts.len() != 2 {
                    return Err(bad());
                }
                let a = parts[0].parse::<i32>().map_err(|_| bad())?;
                let b = parts[1].parse::<i32>().map_err(|_| bad())?;
                Ok((a, b))
            }
        }
    }

    /// Reject keys outside the allowed set, with line info.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for (key, &(line, _)) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                return Err(ConfigError {
                    line,
                    message: format!("unknown key `{key}`"),
                });
            }
        }
        Ok(())
    }

    pub fn line_of(&self, key: &str) -> usize {
        self.take(key).map(|e| e.0).unwrap_or(0)
    }
}

pub fn validate_betas(cfg: &RawConfig, betas: &[f64]) -> Result<(), ConfigError> {
    for &b in betas {
        if b <= 0.0 {
            return Err(ConfigError {
                line: cfg.line_of("beta"),
                message: "beta > 0 required".into(),
            });
        }
    }
    Ok(())
}

pub fn validate_positive(
    cfg: &RawConfig,
    key: &str,
    vals: &[f64],
) -> Result<(), ConfigError> {
    for &v in vals {
        if !(v > 0.0) || !v.is_finite() {
            return Err(ConfigError {
                line: cfg.line_of(key),
                message: format!("`{key}` values must be positive and finite"),
            });
        }
    }
    Ok(())
}
