//! Run configuration: raw key/value input, validation and defaults.

use breather_core::sweep::parse_range;
use serde::Serialize;
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Breather,
    Spectrum,
    SweepLambda2,
    Evolve,
    Twist,
    TwoSite,
    Escape,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Breather => "breather",
            Command::Spectrum => "spectrum",
            Command::SweepLambda2 => "sweep-lambda2",
            Command::Evolve => "evolve",
            Command::Twist => "twist",
            Command::TwoSite => "two-site",
            Command::Escape => "escape",
        }
    }

    /// Keys the command reads, beyond `out` and `threads`.
    fn keys(self) -> &'static [&'static str] {
        const LATTICE: &[&str] = &["n", "eps", "gamma", "omega"];
        const EVOLVE: &[&str] = &[
            "n",
            "eps",
            "gamma",
            "omega",
            "beta",
            "t_end",
            "sample_stride",
            "seed_profile",
            "seed_file",
            "amplitude",
            "rel_tol",
            "checkpoint_interval",
            "resume",
        ];
        const ESCAPE: &[&str] = &[
            "n",
            "eps",
            "gamma",
            "omega",
            "t_end",
            "sample_stride",
            "seed_profile",
            "seed_file",
            "amplitude",
            "rel_tol",
            "checkpoint_interval",
            "resume",
            "escape_fraction",
            "escape_dwell",
            "escape_settle",
        ];
        const TWO_SITE: &[&str] = &[
            "e0",
            "eps",
            "gamma",
            "t_end",
            "sample_stride",
            "rel_tol",
            "escape_fraction",
            "escape_dwell",
            "escape_settle",
        ];
        match self {
            Command::Breather | Command::Spectrum | Command::SweepLambda2 | Command::Twist => {
                LATTICE
            }
            Command::Evolve => EVOLVE,
            Command::Escape => ESCAPE,
            Command::TwoSite => TWO_SITE,
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Command::Evolve | Command::Escape => &["n", "eps", "gamma", "t_end"],
            Command::TwoSite => &["e0", "eps", "gamma"],
            _ => &["n", "eps", "gamma"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedProfile {
    Asymptotic,
    SingleSite,
    File,
}

/// A validated run. `n_sites` and `eps` hold more than one value only for
/// `twist` and `sweep-lambda2` respectively.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(skip)]
    pub command: Command,
    #[serde(rename = "n", skip_serializing_if = "Vec::is_empty")]
    pub n_sites: Vec<usize>,
    pub eps: Vec<f64>,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_stride: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_profile: Option<SeedProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resume: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escape_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escape_dwell: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escape_settle: Option<f64>,
    #[serde(rename = "out")]
    pub output_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn n(&self) -> usize {
        self.n_sites[0]
    }

    pub fn eps1(&self) -> f64 {
        self.eps[0]
    }

    pub fn omega(&self) -> f64 {
        self.omega.unwrap_or(1.0)
    }

    /// The normalized config as a JSON object that `--config` accepts back.
    pub fn to_raw(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            // Resume is an invocation detail, not part of the experiment.
            m.remove("resume");
        }
        v
    }
}

/// Parses a raw key/value map. Every problem is reported, not just the first.
pub fn validate_config(
    command: Command,
    raw: &BTreeMap<String, Value>,
) -> Result<RunConfig, Vec<String>> {
    let mut errs = Vec::new();
    let allowed = command.keys();
    for k in raw.keys() {
        if !allowed.contains(&k.as_str()) && k != "out" && k != "threads" {
            let known = KNOWN.contains(&k.as_str());
            errs.push(if known {
                format!("{k}: not used by `{}`", command.name())
            } else {
                format!("{k}: unknown key")
            });
        }
    }
    for k in command.required() {
        if !raw.contains_key(*k) {
            errs.push(format!("{k}: required by `{}`", command.name()));
        }
    }

    let mut p = Reader {
        raw,
        errs: &mut errs,
    };
    let n_sites = match raw.get("n") {
        None => Vec::new(),
        Some(_) => {
            let v = p.list("n");
            let mut out = Vec::new();
            for x in v {
                if x.fract() != 0.0 || !(1.0..=4096.0).contains(&x) {
                    p.errs
                        .push(format!("n: expected an integer in 1..=4096, got {x}"));
                } else {
                    out.push(x as usize);
                }
            }
            if command != Command::TwoSite && out.iter().any(|&n| n < 2) {
                p.errs.push("n: the chain needs at least 2 sites".into());
            }
            out
        }
    };
    if n_sites.len() > 1 && command != Command::Twist {
        p.errs.push(format!(
            "n: `{}` takes a single value, got {}",
            command.name(),
            n_sites.len()
        ));
    }
    let eps = if raw.contains_key("eps") {
        p.list("eps")
    } else {
        Vec::new()
    };
    if eps.len() > 1 && command != Command::SweepLambda2 {
        p.errs.push(format!(
            "eps: `{}` takes a single value, got {}",
            command.name(),
            eps.len()
        ));
    }
    for &e in &eps {
        if e == 0.0 {
            p.errs.push("eps: must be nonzero".into());
        }
    }
    let gamma = p.num("gamma").unwrap_or(0.0);
    p.check("gamma", gamma, gamma >= 0.0, "must be >= 0");
    let omega = p.opt_num("omega", Some(1.0));
    if let Some(w) = omega {
        p.check("omega", w, w > 0.0, "must be > 0");
    }
    let has = |k: &str| allowed.contains(&k);
    let beta = p.opt_num_if(has("beta"), "beta", Some(0.0));
    if let Some(b) = beta {
        p.check("beta", b, b >= 0.0, "must be >= 0");
    }
    let e0 = p.opt_num_if(has("e0"), "e0", None);
    if let Some(e) = e0 {
        p.check("e0", e, e > 0.0, "must be > 0");
    }
    let t_end = p.opt_num_if(has("t_end"), "t_end", None);
    if let Some(t) = t_end {
        p.check("t_end", t, t > 0.0, "must be > 0");
    }
    let default_stride = if command == Command::TwoSite {
        1.0
    } else {
        10.0
    };
    let sample_stride = p.opt_num_if(has("sample_stride"), "sample_stride", Some(default_stride));
    if let Some(s) = sample_stride {
        p.check("sample_stride", s, s > 0.0, "must be > 0");
    }
    let seed_profile = if has("seed_profile") {
        match raw.get("seed_profile") {
            None => Some(SeedProfile::Asymptotic),
            Some(v) => match v.as_str() {
                Some("asymptotic") => Some(SeedProfile::Asymptotic),
                Some("single_site") | Some("single-site") => Some(SeedProfile::SingleSite),
                Some("file") => Some(SeedProfile::File),
                _ => {
                    p.errs.push(format!(
                        "seed_profile: expected asymptotic, single_site or file, got {v}"
                    ));
                    None
                }
            },
        }
    } else {
        None
    };
    let seed_file = match raw.get("seed_file") {
        Some(Value::String(s)) if has("seed_file") => Some(PathBuf::from(s)),
        Some(v) if has("seed_file") => {
            p.errs.push(format!("seed_file: expected a path, got {v}"));
            None
        }
        _ => None,
    };
    if seed_profile == Some(SeedProfile::File) && seed_file.is_none() {
        p.errs
            .push("seed_file: required when seed_profile is file".into());
    }
    if seed_file.is_some() && seed_profile != Some(SeedProfile::File) {
        p.errs
            .push("seed_file: only read when seed_profile is file".into());
    }
    let amplitude = p.opt_num_if(has("amplitude"), "amplitude", Some(1.0));
    if let Some(a) = amplitude {
        p.check("amplitude", a, a > 0.0, "must be > 0");
    }
    let rel_tol = p.opt_num_if(has("rel_tol"), "rel_tol", Some(1e-10));
    if let Some(r) = rel_tol {
        p.check("rel_tol", r, r > 0.0 && r < 1e-2, "must be in (0, 1e-2)");
    }
    let checkpoint_interval =
        p.opt_num_if(has("checkpoint_interval"), "checkpoint_interval", Some(1e4));
    if let Some(c) = checkpoint_interval {
        p.check("checkpoint_interval", c, c > 0.0, "must be > 0");
    }
    let resume = if has("resume") {
        Some(p.flag("resume"))
    } else {
        None
    };
    let escape_fraction = p.opt_num_if(has("escape_fraction"), "escape_fraction", Some(0.25));
    if let Some(f) = escape_fraction {
        p.check(
            "escape_fraction",
            f,
            f > 0.0 && f < 1.0,
            "must be in (0, 1)",
        );
    }
    let escape_dwell = p.opt_num_if(has("escape_dwell"), "escape_dwell", Some(1000.0));
    if let Some(d) = escape_dwell {
        p.check("escape_dwell", d, d >= 0.0, "must be >= 0");
    }
    let escape_settle = p.opt_num_if(has("escape_settle"), "escape_settle", Some(100.0));
    if let Some(s) = escape_settle {
        p.check("escape_settle", s, s >= 0.0, "must be >= 0");
    }
    let output_dir = match raw.get("out") {
        None => PathBuf::from("out"),
        Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
        Some(v) => {
            p.errs
                .push(format!("out: expected a directory path, got {v}"));
            PathBuf::new()
        }
    };
    let threads = match raw.get("threads") {
        None => None,
        Some(_) => p.num("threads").and_then(|t| {
            if t.fract() == 0.0 && (0.0..=1024.0).contains(&t) {
                Some(t as usize)
            } else {
                p.errs
                    .push(format!("threads: expected an integer in 0..=1024, got {t}"));
                None
            }
        }),
    };
    // Two-site runs have no omega; keep it out of the normalized config.
    let omega = if command == Command::TwoSite {
        None
    } else {
        omega
    };

    if !errs.is_empty() {
        errs.sort();
        errs.dedup();
        return Err(errs);
    }
    Ok(RunConfig {
        command,
        n_sites,
        eps,
        gamma,
        omega,
        beta,
        e0,
        t_end,
        sample_stride,
        seed_profile,
        seed_file,
        amplitude,
        rel_tol,
        checkpoint_interval,
        resume,
        escape_fraction,
        escape_dwell,
        escape_settle,
        output_dir,
        threads,
    })
}

const KNOWN: &[&str] = &[
    "n",
    "eps",
    "gamma",
    "omega",
    "beta",
    "e0",
    "t_end",
    "sample_stride",
    "seed_profile",
    "seed_file",
    "amplitude",
    "rel_tol",
    "checkpoint_interval",
    "resume",
    "escape_fraction",
    "escape_dwell",
    "escape_settle",
];

/// Merges a `--config` JSON object with flags; flags win. Keys are
/// normalized to snake_case.
pub fn merge_raw(
    file: Option<Map<String, Value>>,
    flags: Vec<(String, Value)>,
) -> BTreeMap<String, Value> {
    let mut raw = BTreeMap::new();
    for (k, v) in file.into_iter().flatten().chain(flags) {
        raw.insert(k.replace('-', "_"), v);
    }
    raw
}

struct Reader<'a> {
    raw: &'a BTreeMap<String, Value>,
    errs: &'a mut Vec<String>,
}

impl Reader<'_> {
    fn parse(&mut self, key: &str, v: &Value) -> Option<f64> {
        let x = match v {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => s.trim().parse::<f64>().ok(),
            _ => None,
        };
        match x {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.errs
                    .push(format!("{key}: expected a finite number, got {v}"));
                None
            }
        }
    }

    fn num(&mut self, key: &str) -> Option<f64> {
        let v = self.raw.get(key)?;
        self.parse(key, v)
    }

    fn opt_num(&mut self, key: &str, default: Option<f64>) -> Option<f64> {
        match self.raw.get(key) {
            None => default,
            Some(v) => self.parse(key, v),
        }
    }

    fn opt_num_if(&mut self, used: bool, key: &str, default: Option<f64>) -> Option<f64> {
        if used {
            self.opt_num(key, default)
        } else {
            None
        }
    }

    /// A number, an `a:b:step` range, or an array of numbers.
    fn list(&mut self, key: &str) -> Vec<f64> {
        match self.raw.get(key) {
            None => Vec::new(),
            Some(Value::String(s)) => match parse_range(s) {
                Ok(v) => v,
                Err(e) => {
                    self.errs.push(format!("{key}: {e}"));
                    Vec::new()
                }
            },
            Some(Value::Array(a)) if !a.is_empty() => {
                a.iter().filter_map(|v| self.parse(key, v)).collect()
            }
            Some(v) => self.parse(key, v).into_iter().collect(),
        }
    }

    fn flag(&mut self, key: &str) -> bool {
        match self.raw.get(key) {
            None => false,
            Some(Value::Bool(b)) => *b,
            Some(Value::String(s)) if s == "true" => true,
            Some(Value::String(s)) if s == "false" => false,
            Some(v) => {
                self.errs
                    .push(format!("{key}: expected true or false, got {v}"));
                false
            }
        }
    }

    fn check(&mut self, key: &str, x: f64, ok: bool, what: &str) {
        if !ok {
            self.errs.push(format!("{key}: {what}, got {x}"));
        }
    }
}
