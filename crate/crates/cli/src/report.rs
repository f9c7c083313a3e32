//! Output assembly: a `# key: value` metadata block followed by a delimited table.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use modelmap::io::{digest_bytes, format_f64};

pub const CONVENTIONS: &str =
    "g_ij = sum_s (q_is - q_js)^2; kl = g / (2N); w = c / (n pi); floats use 17 significant digits";

/// Ordered configuration entries. Thread settings are deliberately absent so the
/// output does not depend on them.
#[derive(Debug, Default)]
pub struct Config(Vec<(String, String)>);

impl Config {
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub fn digest(&self) -> String {
        let mut text = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(text, "{k}={v}");
        }
        digest_bytes(text.as_bytes())
    }
}

pub struct Report {
    meta: Vec<(String, String)>,
    body: String,
}

impl Report {
    pub fn new(command: &str, config: &Config, dataset_digest: &str) -> Self {
        let mut meta = vec![
            ("modelmap_version".to_string(), modelmap::VERSION.to_string()),
            ("command".to_string(), command.to_string()),
            ("config_digest".to_string(), config.digest()),
            ("dataset_digest".to_string(), dataset_digest.to_string()),
            ("conventions".to_string(), CONVENTIONS.to_string()),
        ];
        meta.extend(config.0.iter().map(|(k, v)| (format!("config.{k}"), v.clone())));
        Self { meta, body: String::new() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let line: Vec<String> = cells.into_iter().map(|c| c.as_ref().to_string()).collect();
        self.body.push_str(&line.join(","));
        self.body.push('\n');
    }

    pub fn body_mut(&mut self) -> &mut String {
        &mut self.body
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.body);
        out
    }

    pub fn emit(&self, output: Option<&Path>) -> std::io::Result<()> {
        let text = self.render();
        match output {
            Some(p) => std::fs::write(p, text),
            None => std::io::stdout().lock().write_all(text.as_bytes()),
        }
    }
}

pub fn num(v: f64) -> String {
    format_f64(v)
}

pub fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}
