//! Settings resolution: command-line flags override an optional plain
//! `key = value` config file, which overrides built-in defaults. Every
//! resolved value is recorded so the run manifest can state exactly
//! what the command executed with.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    /// Loads `key = value` lines. Blank lines and `#` comments are
    /// ignored; unknown keys are kept and simply never consulted, so one
    /// file can hold settings for several pipeline stages.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        if let Some(p) = path {
            let body = fs::read_to_string(p)
                .map_err(|source| CliError::Io { path: p.display().to_string(), source })?;
            for (lineno, line) in body.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(CliError::invalid(
                        format!("config line {}", lineno + 1),
                        format!("expected `key = value`, got `{line}`"),
                    ));
                };
                file.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Settings { file, resolved: BTreeMap::new() })
    }

    fn parse_file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.file.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::invalid(format!("config key `{key}`"), format!("bad value `{raw}`"))
            }),
        }
    }

    /// Flag value if given, else config value, else the default.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
    {
        let value = match flag {
            Some(v) => v,
            None => self.parse_file_value(key)?.unwrap_or(default),
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Like [`Settings::get`] but without a default.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => self.parse_file_value(key)?,
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    /// Boolean switch: a bare flag turns it on; otherwise the config
    /// value (`true`/`false`) decides.
    pub fn get_switch(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        let value = if flag { true } else { self.parse_file_value(key)?.unwrap_or(false) };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// The final merged settings, for the run manifest.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.resolved.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn settings_from(body: &str) -> Settings {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        Settings::load(Some(f.path())).unwrap()
    }

    #[test]
    fn flags_override_config_which_overrides_defaults() {
        let mut s = settings_from("n = 50\nseed = 9\n");
        assert_eq!(s.get("n", Some(10usize), 200).unwrap(), 10);
        assert_eq!(s.get("seed", None::<u64>, 0).unwrap(), 9);
        assert_eq!(s.get("epochs", None::<usize>, 30).unwrap(), 30);
    }

    #[test]
    fn resolved_map_records_what_was_used() {
        let mut s = settings_from("n = 50\n");
        s.get("n", None::<usize>, 200).unwrap();
        s.get("seed", Some(3u64), 0).unwrap();
        let r = s.resolved();
        assert_eq!(r.get("n").unwrap(), "50");
        assert_eq!(r.get("seed").unwrap(), "3");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let mut s = settings_from("# a comment\n\n  lr = 0.5  \n");
        assert_eq!(s.get("lr", None::<f64>, 1e-3).unwrap(), 0.5);
    }

    #[test]
    fn malformed_line_is_a_validation_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"just words\n").unwrap();
        let err = Settings::load(Some(f.path())).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unparseable_value_is_a_validation_error() {
        let mut s = settings_from("n = banana\n");
        let err = s.get("n", None::<usize>, 1).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn missing_config_file_is_a_file_error() {
        let err = Settings::load(Some(Path::new("/no/such/config"))).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn switch_prefers_flag_then_config() {
        let mut s = settings_from("downscale = true\n");
        assert!(s.get_switch("downscale", false).unwrap());
        assert!(s.get_switch("other", true).unwrap());
        assert!(!s.get_switch("absent", false).unwrap());
    }
}
