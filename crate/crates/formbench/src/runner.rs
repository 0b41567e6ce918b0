//! Script dialects: how a dialect is syntax-checked and executed.
//!
//! `action-json` is checked and executed natively. Other dialects run as
//! subprocesses built from argument templates: `{script_path}` is the
//! path of the script file, `{url}` the URL of the form under test and
//! `{timeout_ms}` the execution budget.
//! The WebDriver endpoint reaches the process as `WEBDRIVER_URL`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Stdio};

use formbench_core::script::{ACTION_JSON, PYTHON_SELENIUM};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Checker {
    /// Built-in `action-json` parser.
    Builtin,
    /// External command; a non-zero exit means a syntax error.
    Command(Vec<String>),
    /// No static check.
    None,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Executor {
    Native,
    Command(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialect {
    pub name: String,
    /// File extension for the script file.
    pub extension: String,
    pub check: Checker,
    pub run: Executor,
}

#[derive(Debug, thiserror::Error)]
pub enum RunnerConfigError {
    #[error("cannot read runner config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid runner config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("dialect `{0}`: command template is empty")]
    EmptyCommand(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    pub dialects: BTreeMap<String, Dialect>,
}

fn args(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for Registry {
    fn default() -> Self {
        let mut dialects = BTreeMap::new();
        dialects.insert(
            ACTION_JSON.to_string(),
            Dialect {
                name: ACTION_JSON.to_string(),
                extension: "json".into(),
                check: Checker::Builtin,
                run: Executor::Native,
            },
        );
        dialects.insert(
            PYTHON_SELENIUM.to_string(),
            Dialect {
                name: PYTHON_SELENIUM.to_string(),
                extension: "py".into(),
                check: Checker::Command(args(&["python3", "-m", "py_compile", "{script_path}"])),
                run: Executor::Command(args(&["python3", "{script_path}", "{url}"])),
            },
        );
        Self { dialects }
    }
}

#[derive(Deserialize)]
struct FileDialect {
    extension: Option<String>,
    check: Option<Vec<String>>,
    run: Vec<String>,
}

impl Registry {
    pub fn get(&self, name: &str) -> Option<&Dialect> {
        self.dialects.get(name)
    }

    /// Adds or replaces dialects from a TOML file of the form
    ///
    /// ```toml
    /// [python-selenium]
    /// extension = "py"
    /// check = ["python3", "-m", "py_compile", "{script_path}"]
    /// run = ["/opt/venv/bin/python", "{script_path}", "{url}"]
    /// ```
    pub fn load_overrides(&mut self, path: &Path) -> Result<(), RunnerConfigError> {
        let text = std::fs::read_to_string(path)?;
        self.apply_overrides(&text)
    }

    pub fn apply_overrides(&mut self, text: &str) -> Result<(), RunnerConfigError> {
        let table: BTreeMap<String, FileDialect> = toml::from_str(text)?;
        for (name, d) in table {
            if d.run.is_empty() || d.check.as_ref().is_some_and(Vec::is_empty) {
                return Err(RunnerConfigError::EmptyCommand(name));
            }
            let dialect = Dialect {
                name: name.clone(),
                extension: d.extension.unwrap_or_else(|| "txt".into()),
                check: d.check.map_or(Checker::None, Checker::Command),
                run: Executor::Command(d.run),
            };
            self.dialects.insert(name, dialect);
        }
        Ok(())
    }
}

/// Substitutes the placeholders of a command template.
pub fn expand(template: &[String], script: &Path, url: &str, timeout_ms: u64) -> Vec<String> {
    template
        .iter()
        .map(|a| {
            a.replace("{script_path}", &script.to_string_lossy())
                .replace("{url}", url)
                .replace("{timeout_ms}", &timeout_ms.to_string())
        })
        .collect()
}

/// Whether the Python Selenium runner can start: `python3` exists and
/// imports `selenium`.
pub fn python_selenium_available(registry: &Registry) -> bool {
    let Some(Dialect {
        run: Executor::Command(tpl),
        ..
    }) = registry.get(PYTHON_SELENIUM)
    else {
        return false;
    };
    Command::new(&tpl[0])
        .args(["-c", "import selenium.webdriver"])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .is_ok_and(|s| s.success())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_replace_and_add() {
        let mut r = Registry::default();
        r.apply_overrides(
            "[python-selenium]\nextension = \"py\"\nrun = [\"py\", \"{script_path}\", \"{url}\"]\n\n[shell]\nrun = [\"sh\", \"{script_path}\"]\n",
        )
        .unwrap();
        assert_eq!(r.get("python-selenium").unwrap().check, Checker::None);
        assert!(r.get("shell").is_some());
        assert!(r.apply_overrides("[x]\nrun = []\n").is_err());
    }

    #[test]
    fn expands_placeholders() {
        let t = args(&["python3", "{script_path}", "--url={url}", "{timeout_ms}"]);
        assert_eq!(
            expand(&t, Path::new("/tmp/a.py"), "http://h/f/", 500),
            args(&["python3", "/tmp/a.py", "--url=http://h/f/", "500"])
        );
    }
}
