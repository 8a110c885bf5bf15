//! Scenario configuration (TOML).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use santalo_core::catalog::{parse_potential, BodyCatalog, RuleSpec};
use santalo_core::duality::Route;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Tau,
    Santalo,
    Borell,
    Couple,
    Body,
    Sharpness,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Tau => "tau",
            Mode::Santalo => "santalo",
            Mode::Borell => "borell",
            Mode::Couple => "couple",
            Mode::Body => "body",
            Mode::Sharpness => "sharpness",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub mode: Mode,
    pub potential: Option<OneOrMany<String>>,
    pub c: Option<OneOrMany<f64>>,
    pub a: Option<OneOrMany<f64>>,
    pub rule: Option<String>,
    pub route: Option<Route>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    /// `optimal`, `zero` or `constant:a=A`.
    pub drift: Option<String>,
    pub body: Option<String>,
    /// Expected headline value; the row fails when it is off by more than `tolerance`.
    pub expect: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub scenario: Vec<Scenario>,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub file: ConfigFile,
    pub path: PathBuf,
    pub bodies: BodyCatalog,
}

/// A configuration problem with the 1-based line it was found on, when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{l}: {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn line_of(text: &str, needle: &str) -> Option<usize> {
    text.lines().position(|l| l.contains(needle)).map(|i| i + 1)
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub const DEFAULT_PATHS: usize = 100_000;
pub const DEFAULT_STEPS: usize = 1_000;

impl Scenario {
    pub fn potentials(&self) -> Vec<String> {
        self.potential.as_ref().map(|p| p.to_vec()).unwrap_or_default()
    }

    pub fn cs(&self) -> Vec<f64> {
        self.c.as_ref().map(|c| c.to_vec()).unwrap_or_default()
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.a.as_ref().map(|a| a.to_vec()).unwrap_or_default()
    }

    fn uses_mc(&self) -> bool {
        matches!(self.mode, Mode::Borell | Mode::Couple)
            || self.rule.as_deref().is_some_and(|r| r.trim_start().starts_with("mc"))
    }
}

impl Config {
    /// Parses and validates; every referenced id must resolve.
    pub fn load(path: &Path, corpus_override: Option<&Path>, seed_override: Option<u64>) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let err = |line: Option<usize>, message: String| ConfigError { path: shown.clone(), line, message };
        let text = std::fs::read_to_string(path).map_err(|e| err(None, format!("cannot read config: {e}")))?;
        let file: ConfigFile = toml::from_str(&text).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(&text, s.start));
            err(line, e.message().to_string())
        })?;
        let mut bodies = BodyCatalog::builtin();
        let corpus = corpus_override.map(Path::to_path_buf).or_else(|| {
            file.corpus.as_ref().map(|c| path.parent().unwrap_or(Path::new(".")).join(c))
        });
        if let Some(c) = &corpus {
            bodies.load_corpus(c).map_err(|e| err(line_of(&text, "corpus"), e.to_string()))?;
        }
        if file.scenario.is_empty() {
            return Err(err(None, "no [[scenario]] entries".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &file.scenario {
            let at = |needle: &str| line_of(&text, needle).or_else(|| line_of(&text, &format!("\"{}\"", s.id)));
            let fail = |needle: &str, msg: String| Err(err(at(needle), format!("scenario '{}': {msg}", s.id)));
            if !seen.insert(s.id.clone()) {
                return fail(&s.id, "duplicate scenario id".into());
            }
            if s.id.is_empty() || s.id.contains(['/', '\\']) {
                return fail(&s.id, "scenario id must be non-empty and contain no path separators".into());
            }
            for p in s.potentials() {
                if let Err(e) = parse_potential(&p, &bodies) {
                    return fail(&p, format!("potential '{p}': {e}"));
                }
            }
            if let Some(r) = &s.rule {
                if let Err(e) = RuleSpec::parse(r) {
                    return fail(r, format!("rule '{r}': {e}"));
                }
            }
            if let Some(b) = &s.body {
                if let Err(e) = bodies.get(b) {
                    return fail(b, format!("body '{b}': {e}"));
                }
            }
            let need_potential = matches!(s.mode, Mode::Tau | Mode::Santalo | Mode::Borell | Mode::Couple);
            if need_potential && s.potentials().is_empty() {
                return fail("mode", format!("mode '{}' needs 'potential'", s.mode.name()));
            }
            if matches!(s.mode, Mode::Tau | Mode::Couple | Mode::Sharpness) && s.cs().is_empty() {
                return fail("mode", format!("mode '{}' needs 'c'", s.mode.name()));
            }
            if s.mode == Mode::Sharpness && s.slopes().is_empty() {
                return fail("mode", "mode 'sharpness' needs 'a'".into());
            }
            if s.mode == Mode::Body && s.body.is_none() {
                return fail("mode", "mode 'body' needs 'body'".into());
            }
            if s.cs().iter().any(|c| !(*c > 0.0 && c.is_finite())) {
                return fail("c", "every c must be positive and finite".into());
            }
            if let Some(d) = &s.drift {
                if parse_drift(d).is_none() {
                    return fail(d, format!("drift '{d}' must be optimal, zero or constant:a=A"));
                }
            }
            let mc_seed = match s.rule.as_deref().map(RuleSpec::parse) {
                Some(Ok(RuleSpec::MonteCarlo { seed, .. })) => seed,
                _ => None,
            };
            if s.uses_mc() && s.seed.or(mc_seed).or(seed_override).is_none() {
                return fail("mode", "Monte Carlo needs a seed (scenario 'seed', rule seed, or --seed)".into());
            }
            if s.paths == Some(0) || s.steps.is_some_and(|m| m < 2) {
                return fail("paths", "need paths >= 1 and steps >= 2".into());
            }
        }
        Ok(Self { file, path: path.to_path_buf(), bodies })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DriftChoice {
    Optimal,
    Zero,
    Constant(f64),
}

pub fn parse_drift(s: &str) -> Option<DriftChoice> {
    match s.trim() {
        "optimal" => Some(DriftChoice::Optimal),
        "zero" => Some(DriftChoice::Zero),
        other => other
            .strip_prefix("constant:a=")
            .and_then(|a| a.parse::<f64>().ok())
            .filter(|a| a.is_finite())
            .map(DriftChoice::Constant),
    }
}
