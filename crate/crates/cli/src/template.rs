//! External command templates.
//!
//! A template is a shell-style command line whose tokens may contain
//! `{placeholder}` fields. It is split into arguments before substitution, so
//! substituted paths never need quoting and no shell is involved.

use std::collections::BTreeMap;
use std::process::Command;

use crate::exit::usage;

pub const PLACEHOLDERS: &[&str] = &[
    "input", "output", "decoded", "bitrate", "width", "height", "fps", "pass", "pix_fmt", "passlog",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    source: String,
    tokens: Vec<String>,
}

impl Template {
    pub fn parse(source: &str) -> anyhow::Result<Template> {
        let tokens = shell_words::split(source).map_err(|e| usage(format!("template `{source}`: {e}")))?;
        if tokens.is_empty() {
            return Err(usage("empty command template"));
        }
        for t in &tokens {
            for name in placeholders_in(t)? {
                if !PLACEHOLDERS.contains(&name.as_str()) {
                    return Err(usage(format!("template `{source}`: unknown placeholder {{{name}}}")));
                }
            }
        }
        Ok(Template {
            source: source.to_string(),
            tokens,
        })
    }

    pub fn program(&self) -> &str {
        &self.tokens[0]
    }

    pub fn uses(&self, name: &str) -> bool {
        let needle = format!("{{{name}}}");
        self.tokens.iter().any(|t| t.contains(&needle))
    }

    /// Substitutes every placeholder; all used names must be present in `vars`.
    pub fn render(&self, vars: &BTreeMap<&str, String>) -> anyhow::Result<Vec<String>> {
        self.tokens
            .iter()
            .map(|t| {
                let mut out = String::with_capacity(t.len());
                let mut rest = t.as_str();
                while let Some(open) = rest.find('{') {
                    let close = rest[open..].find('}').map(|c| open + c).expect("checked at parse");
                    let name = &rest[open + 1..close];
                    let value = vars
                        .get(name)
                        .ok_or_else(|| usage(format!("template `{}`: no value for {{{name}}}", self.source)))?;
                    out.push_str(&rest[..open]);
                    out.push_str(value);
                    rest = &rest[close + 1..];
                }
                out.push_str(rest);
                Ok(out)
            })
            .collect()
    }

    pub fn command(&self, vars: &BTreeMap<&str, String>) -> anyhow::Result<Command> {
        let argv = self.render(vars)?;
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..]);
        Ok(cmd)
    }
}

impl std::fmt::Display for Template {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.source)
    }
}

fn placeholders_in(token: &str) -> anyhow::Result<Vec<String>> {
    let mut names = Vec::new();
    let mut rest = token;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else {
            return Err(usage(format!("unterminated placeholder in `{token}`")));
        };
        names.push(rest[open + 1..open + close].to_string());
        rest = &rest[open + close + 1..];
    }
    Ok(names)
}
