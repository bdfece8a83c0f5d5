//! Loading experiment configs from TOML, with errors that point at a line.

use std::fmt;
use std::path::{Path, PathBuf};

use eve_core::harness::{ExperimentConfig, HarnessError};

/// A config problem the user has to fix. Always maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.path.display(), line, self.msg),
            None => write!(f, "{}: {}", self.path.display(), self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

/// First line that assigns `key` or opens a `[key]` table.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            let header = l
                .strip_prefix('[')
                .map(|rest| rest.trim_start_matches('[').trim_start().starts_with(key));
            let assign = l
                .strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('=') || rest.starts_with('.'));
            header == Some(true) || assign
        })
        .map(|i| i + 1)
}

pub fn parse(text: &str, path: &Path) -> Result<ExperimentConfig, ConfigError> {
    toml::from_str::<ExperimentConfig>(text).map_err(|e| ConfigError {
        path: path.to_path_buf(),
        line: e.span().map(|s| line_of_offset(text, s.start)),
        msg: e.message().trim_end().to_string(),
    })
}

pub fn load(path: &Path) -> Result<(ExperimentConfig, String), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        path: path.to_path_buf(),
        line: None,
        msg: format!("cannot read config: {e}"),
    })?;
    Ok((parse(&text, path)?, text))
}

/// Runs semantic validation and attributes a failure to the offending line
/// when the field appears in the file.
pub fn validate(cfg: &ExperimentConfig, text: &str, path: &Path) -> Result<(), ConfigError> {
    match cfg.validate() {
        Ok(()) => Ok(()),
        Err(HarnessError::InvalidConfig { field, msg }) => Err(ConfigError {
            path: path.to_path_buf(),
            line: line_of_key(text, &field),
            msg: format!("invalid `{field}`: {msg}"),
        }),
        Err(other) => Err(ConfigError {
            path: path.to_path_buf(),
            line: None,
            msg: other.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
optimizer = "eve"
steps = 100

[objective]
kind = "quadratic"
dim = 4
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = parse(GOOD, Path::new("c.toml")).unwrap();
        assert_eq!(cfg.steps, 100);
        assert_eq!(cfg.lr_grid.len(), 5);
    }

    #[test]
    fn syntax_error_has_a_line() {
        let bad = "optimizer = \"eve\"\nsteps = \n[objective]\nkind = \"beale\"\n";
        let e = parse(bad, Path::new("c.toml")).unwrap_err();
        assert_eq!(e.line, Some(2), "{e}");
    }

    #[test]
    fn unknown_key_has_a_line() {
        let bad = format!("{GOOD}stepz = 3\n");
        let e = parse(&bad, Path::new("c.toml")).unwrap_err();
        assert!(e.line.is_some(), "{e}");
        assert!(e.msg.contains("stepz"), "{e}");
    }

    #[test]
    fn semantic_error_points_at_the_key() {
        let text = GOOD.replace("steps = 100", "steps = 0");
        let cfg = parse(&text, Path::new("c.toml")).unwrap();
        let e = validate(&cfg, &text, Path::new("c.toml")).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().starts_with("c.toml:3: invalid `steps`"));
        let text = GOOD.replace("dim = 4", "dim = 0");
        let cfg = parse(&text, Path::new("c.toml")).unwrap();
        let e = validate(&cfg, &text, Path::new("c.toml")).unwrap_err();
        assert_eq!(e.line, Some(5));
    }

    #[test]
    fn key_lookup() {
        let text = "a = 1\n[eve]\nbeta1 = 0.9\nlr_grid=[1]\n";
        assert_eq!(line_of_key(text, "eve"), Some(2));
        assert_eq!(line_of_key(text, "lr_grid"), Some(4));
        assert_eq!(line_of_key(text, "lr2_grid"), None);
    }
}
