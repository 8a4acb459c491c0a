//! Flat `key = value` config files layered under command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parses `key = value` lines. `#` starts a comment; keys are normalized
/// so that `n-paths` and `n_paths` are the same key.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{raw}`", i + 1)))?;
        let key = normalize(k.trim());
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(out)
}

fn normalize(key: &str) -> String {
    key.replace('-', "_").to_ascii_lowercase()
}

/// Resolves settings as flag, else config file, else default, and keeps
/// the resolved values for output headers.
#[derive(Debug, Default)]
pub struct Layers {
    file: BTreeMap<String, String>,
    resolved: Vec<(String, String)>,
}

impl Layers {
    pub fn new(file: BTreeMap<String, String>) -> Self {
        Layers {
            file,
            resolved: Vec::new(),
        }
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Layers::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                Ok(Layers::new(parse_config(&text)?))
            }
        }
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("config key `{key}`: cannot parse `{v}`: {e}"))),
        }
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let file = self.file_value(key)?;
        let v = flag.or(file).unwrap_or(default);
        self.resolved.push((key.to_string(), v.to_string()));
        Ok(v)
    }

    /// Like [`Layers::get`] for comma-separated lists.
    pub fn get_list<T: FromStr + Display + Clone>(&mut self, key: &str, flag: Option<String>, default: &[T]) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        let file: Option<String> = self.file_value(key)?;
        let v = match flag.or(file) {
            Some(s) => parse_list(key, &s)?,
            None => default.to_vec(),
        };
        let shown: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        self.resolved.push((key.to_string(), shown.join(",")));
        Ok(v)
    }

    /// Fails on config keys outside `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        let unknown: Vec<&String> = self.file.keys().filter(|k| !known.contains(&k.as_str())).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown config keys: {unknown:?}")))
        }
    }

    /// Records a derived value alongside the resolved settings.
    pub fn note(&mut self, key: &str, value: String) {
        self.resolved.push((key.to_string(), value));
    }

    pub fn resolved(&self) -> &[(String, String)] {
        &self.resolved
    }
}

pub fn parse_list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{p}`: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_normalizes() {
        let m = parse_config("# header\nn-paths = 20  # inline\n\nDT=1e-3\n").unwrap();
        assert_eq!(m["n_paths"], "20");
        assert_eq!(m["dt"], "1e-3");
        assert!(parse_config("novalue\n").is_err());
        assert!(parse_config("a = 1\na = 2\n").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let mut l = Layers::new(parse_config("dt = 0.01\nseed = 5\n").unwrap());
        assert_eq!(l.get("dt", Some(0.5), 1.0).unwrap(), 0.5);
        assert_eq!(l.get::<u64>("seed", None, 1).unwrap(), 5);
        assert_eq!(l.get("horizon", None, 50.0).unwrap(), 50.0);
        assert!(l.check_known(&["dt", "seed"]).is_ok());
        assert_eq!(l.resolved()[0], ("dt".into(), "0.5".into()));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut l = Layers::new(parse_config("dt = abc\n").unwrap());
        assert!(l.get("dt", None, 1.0).is_err());
        let l = Layers::new(parse_config("bogus = 1\n").unwrap());
        assert!(l.check_known(&["dt"]).is_err());
    }

    #[test]
    fn lists() {
        let mut l = Layers::new(parse_config("meshes = 16, 64\n").unwrap());
        assert_eq!(l.get_list::<usize>("meshes", None, &[1]).unwrap(), vec![16, 64]);
        assert_eq!(l.get_list::<f64>("x0", Some("0,0,1".into()), &[]).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(l.resolved()[1].1, "0,0,1");
    }
}
