//! Tiny flag parser: `--key value` pairs merged over an optional
//! `key=value` config file. Flag names drop the leading dashes; in the
//! config file the same names are used without dashes.

use std::collections::BTreeMap;

use splatcast::{Error, Result};

pub struct Args {
    values: BTreeMap<String, String>,
    pub help: bool,
}

impl Args {
    pub fn parse(argv: &[String]) -> Result<Args> {
        let mut flags: BTreeMap<String, String> = BTreeMap::new();
        let mut help = false;
        let mut i = 0;
        while i < argv.len() {
            let a = &argv[i];
            if a == "--help" || a == "-h" {
                help = true;
                i += 1;
                continue;
            }
            let Some(name) = a.strip_prefix("--") else {
                return Err(Error::contract(format!("unexpected argument {a:?}")));
            };
            let value = argv
                .get(i + 1)
                .ok_or_else(|| Error::contract(format!("flag --{name} needs a value")))?;
            flags.insert(name.to_string(), value.clone());
            i += 2;
        }

        let mut values = BTreeMap::new();
        if let Some(path) = flags.get("config") {
            let text = std::fs::read_to_string(path)?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    return Err(Error::format(format!(
                        "config line {}: expected key=value",
                        lineno + 1
                    )));
                };
                values.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        values.extend(flags); // flags override the file
        Ok(Args { values, help })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn required(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::contract(format!("missing required flag --{key}")))
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::contract(format!("flag --{key}: cannot parse {s:?}"))),
        }
    }

    pub fn parsed_required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let s = self.required(key)?;
        s.parse()
            .map_err(|_| Error::contract(format!("flag --{key}: cannot parse {s:?}")))
    }
}
