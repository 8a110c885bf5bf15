//! Named potentials, bodies and integration rules.
//!
//! Potential ids:
//! - `const:c=C[,n=N]`
//! - `linear:a=A[,n=N]` (slope `A` along the first axis)
//! - `quad:lambda=L[,a=A][,n=N]` (`-L|x|^2/2 + A x_1`)
//! - `quartic[:coeff=K][,n=N]` (`-K|x|^4/4`)
//! - `gauge2:BODY[,p=P]` (`-||x||_BODY^P / P`, planar)
//!
//! Rule ids: `gh:m=M`, `polar:radial=R,panel=K`, `mc:N=SAMPLES[,seed=S]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::duality::ConvexPolygon;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::quad::QuadratureRule;

fn parse_err(input: &str, reason: impl Into<String>) -> Error {
    Error::Parse { input: input.to_string(), reason: reason.into() }
}

/// `key=value` pairs after the head; bare tokens are returned separately in order.
fn params(input: &str, rest: &str) -> Result<(Vec<String>, BTreeMap<String, String>)> {
    let mut bare = Vec::new();
    let mut kv = BTreeMap::new();
    for tok in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match tok.split_once('=') {
            Some((k, v)) => {
                if kv.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                    return Err(parse_err(input, format!("duplicate key '{}'", k.trim())));
                }
            }
            None => bare.push(tok.to_string()),
        }
    }
    Ok((bare, kv))
}

struct Params<'a> {
    input: &'a str,
    kv: BTreeMap<String, String>,
}

impl Params<'_> {
    fn take_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.kv.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| parse_err(self.input, format!("'{key}' must be a finite number, got '{v}'"))),
        }
    }

    fn take_usize(&mut self, key: &str) -> Result<Option<usize>> {
        match self.kv.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| parse_err(self.input, format!("'{key}' must be a non-negative integer, got '{v}'"))),
        }
    }

    fn require_f64(&mut self, key: &str) -> Result<f64> {
        self.take_f64(key)?.ok_or_else(|| parse_err(self.input, format!("missing '{key}='")))
    }

    fn finish(self) -> Result<()> {
        match self.kv.keys().next() {
            Some(k) => Err(parse_err(self.input, format!("unknown key '{k}'"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusEntry {
    name: String,
    vertices: Vec<[f64; 2]>,
}

/// Built-in bodies plus any loaded from a corpus file.
#[derive(Debug, Clone)]
pub struct BodyCatalog {
    bodies: BTreeMap<String, Arc<ConvexPolygon>>,
}

impl Default for BodyCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

impl BodyCatalog {
    pub fn builtin() -> Self {
        let mut bodies = BTreeMap::new();
        let mut add = |name: &str, p: Result<ConvexPolygon>| {
            bodies.insert(name.to_string(), Arc::new(p.expect("built-in body is valid")));
        };
        add("square", Ok(ConvexPolygon::square()));
        add("rectangle", ConvexPolygon::rectangle(2.0, 0.5));
        add("triangle", ConvexPolygon::regular(3, 1.0, PI / 2.0));
        add("hexagon", ConvexPolygon::regular(6, 1.0, 0.0));
        add("octagon", ConvexPolygon::regular(8, 1.0, PI / 8.0));
        add("ngon64", ConvexPolygon::regular(64, 1.0, 0.0));
        Self { bodies }
    }

    /// Adds the entries of a JSON corpus `[{"name": .., "vertices": [[x, y], ..]}, ..]`.
    pub fn load_corpus(&mut self, path: &Path) -> Result<usize> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| parse_err(&shown, format!("cannot read: {e}")))?;
        let entries: Vec<CorpusEntry> =
            serde_json::from_str(&text).map_err(|e| parse_err(&shown, format!("invalid body corpus: {e}")))?;
        let count = entries.len();
        for e in entries {
            if e.name.is_empty() || e.name.contains([':', ',', '=']) {
                return Err(parse_err(&shown, format!("invalid body name '{}'", e.name)));
            }
            let poly = ConvexPolygon::new(e.vertices).map_err(|err| parse_err(&shown, format!("body '{}': {err}", e.name)))?;
            self.bodies.insert(e.name, Arc::new(poly));
        }
        Ok(count)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bodies.keys().map(String::as_str)
    }

    /// A named body, or `ngon:m=M` (unit circumradius) / `rect:w=W,h=H` (`[-W, W] x [-H, H]`).
    pub fn get(&self, id: &str) -> Result<Arc<ConvexPolygon>> {
        if let Some(b) = self.bodies.get(id) {
            return Ok(b.clone());
        }
        let (head, rest) = id.split_once(':').unwrap_or((id, ""));
        let (bare, kv) = params(id, rest)?;
        if !bare.is_empty() {
            return Err(parse_err(id, format!("unexpected token '{}'", bare[0])));
        }
        let mut p = Params { input: id, kv };
        let body = match head {
            "ngon" => {
                let m = p.take_usize("m")?.ok_or_else(|| parse_err(id, "missing 'm='"))?;
                ConvexPolygon::regular(m, 1.0, 0.0)?
            }
            "rect" => {
                let (w, h) = (p.require_f64("w")?, p.require_f64("h")?);
                ConvexPolygon::rectangle(w, h)?
            }
            _ => return Err(Error::UnknownId(id.to_string())),
        };
        p.finish()?;
        Ok(Arc::new(body))
    }
}

fn dim_of(p: &mut Params, default: usize) -> Result<usize> {
    let n = p.take_usize("n")?.unwrap_or(default);
    if n == 0 || n > crate::potential::MAX_DIM {
        return Err(parse_err(p.input, format!("dimension must be in 1..=10, got {n}")));
    }
    Ok(n)
}

fn first_axis(n: usize, a: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = a;
    v
}

/// Resolves a potential id.
pub fn parse_potential(id: &str, bodies: &BodyCatalog) -> Result<Potential> {
    let id = id.trim();
    let (head, rest) = id.split_once(':').unwrap_or((id, ""));
    let (bare, kv) = params(id, rest)?;
    let mut p = Params { input: id, kv };
    let no_bare = |bare: &[String]| match bare.first() {
        Some(b) => Err(parse_err(id, format!("unexpected token '{b}'"))),
        None => Ok(()),
    };
    let out = match head {
        "const" => {
            no_bare(&bare)?;
            let c = p.require_f64("c")?;
            let n = dim_of(&mut p, 1)?;
            Potential::constant(n, c)?
        }
        "linear" => {
            no_bare(&bare)?;
            let a = p.require_f64("a")?;
            let n = dim_of(&mut p, 1)?;
            Potential::linear(first_axis(n, a))?
        }
        "quad" => {
            no_bare(&bare)?;
            let lambda = p.require_f64("lambda")?;
            let a = p.take_f64("a")?.unwrap_or(0.0);
            let n = dim_of(&mut p, 1)?;
            Potential::quadratic(DMatrix::identity(n, n) * lambda, first_axis(n, a), 0.0)?
        }
        "quartic" => {
            no_bare(&bare)?;
            let k = p.take_f64("coeff")?.unwrap_or(1.0);
            let n = dim_of(&mut p, 1)?;
            Potential::quartic(n, k)?
        }
        "gauge2" => {
            let name = match bare.as_slice() {
                [one] => one.as_str(),
                [] => return Err(parse_err(id, "missing body name")),
                [_, extra, ..] => return Err(parse_err(id, format!("unexpected token '{extra}'"))),
            };
            let exp = p.take_f64("p")?.unwrap_or(2.0);
            let body = bodies.get(name)?;
            crate::duality::gauge_potential(&body, exp)?
        }
        _ => return Err(Error::UnknownId(id.to_string())),
    };
    p.finish()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RuleSpec {
    GaussHermite { m: usize },
    Polar { radial: usize, panel: usize },
    MonteCarlo { samples: usize, seed: Option<u64> },
}

impl RuleSpec {
    pub fn parse(id: &str) -> Result<Self> {
        let id = id.trim();
        let (head, rest) = id.split_once(':').unwrap_or((id, ""));
        let (bare, kv) = params(id, rest)?;
        if let Some(b) = bare.first() {
            return Err(parse_err(id, format!("unexpected token '{b}'")));
        }
        let mut p = Params { input: id, kv };
        let spec = match head {
            "gh" => RuleSpec::GaussHermite { m: p.take_usize("m")?.ok_or_else(|| parse_err(id, "missing 'm='"))? },
            "polar" => RuleSpec::Polar {
                radial: p.take_usize("radial")?.unwrap_or(96),
                panel: p.take_usize("panel")?.unwrap_or(32),
            },
            "mc" => {
                let samples = p.take_usize("N")?.ok_or_else(|| parse_err(id, "missing 'N='"))?;
                let seed = p.kv.remove("seed").map(|s| s.parse::<u64>()).transpose().map_err(|_| parse_err(id, "seed must be a u64"))?;
                RuleSpec::MonteCarlo { samples, seed }
            }
            _ => return Err(Error::UnknownId(id.to_string())),
        };
        p.finish()?;
        Ok(spec)
    }

    /// Deterministic rule for `dim`, with angular breakpoints for polar rules.
    pub fn quadrature(&self, dim: usize, breakpoints: &[f64]) -> Result<Option<QuadratureRule>> {
        match self {
            RuleSpec::GaussHermite { m } => QuadratureRule::gauss_hermite(dim, *m).map(Some),
            RuleSpec::Polar { radial, panel } => {
                if dim != 2 {
                    return Err(Error::UnsupportedDimension { dim, context: "polar rules are planar" });
                }
                QuadratureRule::polar(*radial, *panel, breakpoints).map(Some)
            }
            RuleSpec::MonteCarlo { .. } => Ok(None),
        }
    }
}

/// Id templates of the potential families, in listing order.
pub const POTENTIAL_FORMS: [&str; 5] =
    ["const:c=…", "linear:a=…", "quad:lambda=…", "quartic", "gauge2:BODY"];

/// Every resolvable id family and every body, in stable order.
pub fn listing(bodies: &BodyCatalog) -> Vec<String> {
    let mut out: Vec<String> = POTENTIAL_FORMS.iter().map(|s| s.to_string()).collect();
    out.extend(bodies.names().map(|b| format!("gauge2:{b}")));
    out.extend(bodies.names().map(|b| format!("body:{b}")));
    out.push("body:ngon:m=…".into());
    out.push("body:rect:w=…,h=…".into());
    out
}

/// Concrete catalog entries used by the verification suites.
pub fn standard_potentials() -> Vec<&'static str> {
    vec![
        "const:c=1",
        "linear:a=1",
        "quad:lambda=1",
        "quad:lambda=0.5,a=0.3",
        "quad:lambda=3",
        "quartic",
        "quartic:coeff=0.5",
        "linear:a=1,n=2",
        "quad:lambda=1,n=2",
        "quartic:n=2",
        "gauge2:square",
        "gauge2:hexagon",
        "gauge2:square,p=1.5",
    ]
}
