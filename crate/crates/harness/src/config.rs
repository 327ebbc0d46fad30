//! Experiment configuration: a flat `key = value` text format.
//!
//! ```text
//! # delay-threshold sweep over n
//! name = bernoulli-sweep
//! policies = dwm, dwm-n, hybrid, d-mws, fbs(h=2,analysis)
//! n_values = 10, 20, 30
//! arrival = bernoulli(p=0.3)
//! channel = iid(q=0.75)
//! horizon = 1000000
//! warmup = 10000
//! thresholds = 0, 1, 2
//! seeds = 1, 2
//! replications = 4
//! coupled = true
//! output_dir = out/bernoulli
//! ```
//!
//! Lists are comma separated. Numbers may be written as fractions
//! (`p = 17/96`). Arrival models: `bernoulli(p)`, `markov_burst(batch,
//! p11, p21)` where `p11` is the probability of staying in the burst state
//! and `p21` of entering it, `counterexample(k, p)`. Channel models:
//! `iid(q)`, `gilbert_elliott(near_p11, near_p21, far_p11, far_p21)` with
//! state 1 = ON. Optional keys: `trace_stride` (backlog samples, default
//! 100) and `prefill` (packets per queue placed before slot 0, default 0).

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use mcsched::policies::{PolicyKind, PolicySpec};
use mcsched::traffic::{ArrivalModel, ChannelModel};
use mcsched::SystemParams;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration:\n{}", .0.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub policies: Vec<PolicySpec>,
    pub n_values: Vec<usize>,
    pub arrival: ArrivalModel,
    pub channel: ChannelModel,
    pub horizon: u64,
    pub warmup: u64,
    pub thresholds: Vec<u64>,
    pub seeds: Vec<u64>,
    pub replications: u64,
    pub coupled: bool,
    pub output_dir: PathBuf,
    pub trace_stride: u64,
    pub prefill: u32,
}

const KEYS: [&str; 14] = [
    "name",
    "policies",
    "n_values",
    "arrival",
    "channel",
    "horizon",
    "warmup",
    "thresholds",
    "seeds",
    "replications",
    "coupled",
    "output_dir",
    "trace_stride",
    "prefill",
];

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    /// Parses and validates; every problem found is reported at once.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut issues = Vec::new();
        let mut raw: HashMap<&str, (usize, &str)> = HashMap::new();
        for (k, line) in text.lines().enumerate() {
            let lineno = k + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                issues.push(format!("line {lineno}: expected `key = value`"));
                continue;
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                issues.push(format!("line {lineno}: unknown key `{key}`"));
            } else if let Some((first, _)) = raw.insert(key, (lineno, value.trim())) {
                issues.push(format!("line {lineno}: `{key}` already set on line {first}"));
            }
        }

        let field = |key: &str| raw.get(key).copied();
        let mut p = Parser { issues: &mut issues };
        let name = field("name").map_or_else(|| "experiment".to_string(), |(_, v)| v.to_string());
        let policies = p.required(field("policies"), "policies", |v| {
            split_top_level(v)
                .into_iter()
                .map(|s| s.parse::<PolicySpec>().map_err(|e| e.to_string()))
                .collect::<Result<Vec<_>, _>>()
        });
        let n_values = p.required(field("n_values"), "n_values", parse_list::<usize>);
        let arrival = p.required(field("arrival"), "arrival", parse_arrival);
        let channel = p.required(field("channel"), "channel", parse_channel);
        let horizon = p.optional(field("horizon"), "horizon", parse_int, 1_000_000);
        let warmup = p.optional(field("warmup"), "warmup", parse_int, 10_000);
        let thresholds = p.optional(field("thresholds"), "thresholds", parse_list::<u64>, vec![2]);
        let seeds = p.optional(field("seeds"), "seeds", parse_list::<u64>, vec![1]);
        let replications = p.optional(field("replications"), "replications", parse_int, 4);
        let coupled = p.optional(field("coupled"), "coupled", parse_bool, true);
        let output_dir = field("output_dir").map_or_else(|| PathBuf::from("out"), |(_, v)| PathBuf::from(v));
        let trace_stride = p.optional(field("trace_stride"), "trace_stride", parse_int, 100);
        let prefill = p.optional(
            field("prefill"),
            "prefill",
            |v| parse_int(v).and_then(|x| u32::try_from(x).map_err(|e| e.to_string())),
            0,
        );

        let (Some(policies), Some(n_values), Some(arrival), Some(channel)) = (policies, n_values, arrival, channel)
        else {
            return Err(ConfigError::Invalid(issues));
        };
        let cfg = ExperimentConfig {
            name,
            policies,
            n_values,
            arrival,
            channel,
            horizon,
            warmup,
            thresholds,
            seeds,
            replications,
            coupled,
            output_dir,
            trace_stride,
            prefill,
        };
        issues.extend(cfg.violations());
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(issues))
        }
    }

    /// Every constraint the configuration breaks.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.policies.is_empty() {
            v.push("policies must not be empty".into());
        }
        if self.n_values.is_empty() {
            v.push("n_values must not be empty".into());
        }
        if self.n_values.contains(&0) {
            v.push("n_values must be positive".into());
        }
        if self.horizon > 0 && self.warmup >= self.horizon {
            v.push(format!("warmup ({}) must be smaller than horizon ({})", self.warmup, self.horizon));
        }
        if self.horizon == 0 && self.warmup > 0 {
            v.push("warmup must be 0 when horizon is 0".into());
        }
        if self.thresholds.is_empty() {
            v.push("thresholds must not be empty".into());
        }
        if self.seeds.is_empty() {
            v.push("seeds must not be empty".into());
        }
        if self.replications == 0 {
            v.push("replications must be at least 1".into());
        }
        if self.trace_stride == 0 {
            v.push("trace_stride must be at least 1".into());
        }
        if let Err(e) = self.arrival.validate() {
            v.push(format!("arrival: {e}"));
        }
        if let Err(e) = self.channel.validate() {
            v.push(format!("channel: {e}"));
        }
        if matches!(self.arrival, ArrivalModel::Counterexample { .. }) && self.n_values != [2] {
            v.push("the counterexample arrival model requires n_values = 2".into());
        }
        let l = self.arrival.max_arrivals();
        for &n in self.n_values.iter().filter(|&&n| n > 0) {
            let params = SystemParams::new(n, l.max(1)).expect("n and L are positive");
            for spec in &self.policies {
                if let Err(e) = spec.validate(&params) {
                    v.push(format!("policy {spec} at n = {n}: {e}"));
                }
            }
        }
        v
    }

    /// Canonical text form; parsing it yields an equal configuration.
    pub fn to_text(&self) -> String {
        let join = |xs: Vec<String>| xs.join(", ");
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        line("name", self.name.clone());
        line("policies", join(self.policies.iter().map(|p| p.to_string()).collect()));
        line("n_values", join(self.n_values.iter().map(|n| n.to_string()).collect()));
        line("arrival", self.arrival.to_string());
        line("channel", self.channel.to_string());
        line("horizon", self.horizon.to_string());
        line("warmup", self.warmup.to_string());
        line("thresholds", join(self.thresholds.iter().map(|b| b.to_string()).collect()));
        line("seeds", join(self.seeds.iter().map(|x| x.to_string()).collect()));
        line("replications", self.replications.to_string());
        line("coupled", self.coupled.to_string());
        line("output_dir", self.output_dir.display().to_string());
        line("trace_stride", self.trace_stride.to_string());
        line("prefill", self.prefill.to_string());
        s
    }

    pub fn opf_policies(&self) -> impl Iterator<Item = &PolicySpec> {
        self.policies.iter().filter(|p| p.kind.is_opf())
    }

    pub fn dominated_policies(&self) -> impl Iterator<Item = &PolicySpec> {
        self.policies
            .iter()
            .filter(|p| p.analysis_variant && matches!(p.kind, PolicyKind::Fbs | PolicyKind::PerfectMatching))
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

struct Parser<'a> {
    issues: &'a mut Vec<String>,
}

impl Parser<'_> {
    fn required<T>(
        &mut self,
        field: Option<(usize, &str)>,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Option<T> {
        match field {
            None => {
                self.issues.push(format!("missing required key `{key}`"));
                None
            }
            Some((line, v)) => match parse(v) {
                Ok(x) => Some(x),
                Err(e) => {
                    self.issues.push(format!("line {line}: {key}: {e}"));
                    None
                }
            },
        }
    }

    fn optional<T>(
        &mut self,
        field: Option<(usize, &str)>,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
        default: T,
    ) -> T {
        match field {
            None => default,
            Some((line, v)) => parse(v).unwrap_or_else(|e| {
                self.issues.push(format!("line {line}: {key}: {e}"));
                default
            }),
        }
    }
}

/// Splits on commas outside parentheses.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (k, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..k].trim());
                start = k + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out.retain(|x| !x.is_empty());
    out
}

fn parse_list<T: std::str::FromStr>(v: &str) -> Result<Vec<T>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|_| format!("`{x}` is not a valid number")))
        .collect()
}

fn parse_int(v: &str) -> Result<u64, String> {
    v.trim().replace('_', "").parse().map_err(|_| format!("`{v}` is not a nonnegative integer"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

/// A real number, optionally written as `a/b`.
pub fn parse_real(v: &str) -> Result<f64, String> {
    let v = v.trim();
    let bad = || format!("`{v}` is not a number");
    match v.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0.0 {
                Err(bad())
            } else {
                Ok(a / b)
            }
        }
        None => v.parse().map_err(|_| bad()),
    }
}

/// `name(k=v, ...)` into the name and its arguments.
fn parse_call(v: &str) -> Result<(String, HashMap<String, String>), String> {
    let v = v.trim();
    let (name, args) = match v.find('(') {
        Some(open) => {
            let inner = v.strip_suffix(')').ok_or_else(|| format!("`{v}`: missing `)`"))?;
            (&v[..open], &inner[open + 1..])
        }
        None => (v, ""),
    };
    let mut map = HashMap::new();
    for arg in args.split(',').map(str::trim).filter(|a| !a.is_empty()) {
        let (k, val) = arg.split_once('=').ok_or_else(|| format!("argument `{arg}` is not `key=value`"))?;
        if map.insert(k.trim().to_ascii_lowercase(), val.trim().to_string()).is_some() {
            return Err(format!("argument `{}` given twice", k.trim()));
        }
    }
    Ok((name.trim().to_ascii_lowercase(), map))
}

fn take_real(args: &mut HashMap<String, String>, key: &str) -> Result<f64, String> {
    let v = args.remove(key).ok_or_else(|| format!("missing argument `{key}`"))?;
    parse_real(&v)
}

fn take_int(args: &mut HashMap<String, String>, key: &str) -> Result<u32, String> {
    let v = args.remove(key).ok_or_else(|| format!("missing argument `{key}`"))?;
    v.trim().parse().map_err(|_| format!("`{v}` is not a nonnegative integer"))
}

fn no_leftovers(args: HashMap<String, String>) -> Result<(), String> {
    let mut extra: Vec<String> = args.into_keys().collect();
    extra.sort();
    if extra.is_empty() {
        Ok(())
    } else {
        Err(format!("unknown arguments: {}", extra.join(", ")))
    }
}

fn two_state(stay: f64, enter: f64) -> [[f64; 2]; 2] {
    [[stay, 1.0 - stay], [enter, 1.0 - enter]]
}

pub fn parse_arrival(v: &str) -> Result<ArrivalModel, String> {
    let (name, mut args) = parse_call(v)?;
    let model = match name.as_str() {
        "bernoulli" => ArrivalModel::Bernoulli { p: take_real(&mut args, "p")? },
        "markov_burst" => {
            let batch = take_int(&mut args, "batch")?;
            let p11 = take_real(&mut args, "p11")?;
            let p21 = take_real(&mut args, "p21")?;
            ArrivalModel::MarkovBurst { batch, p: two_state(p11, p21) }
        }
        "counterexample" => {
            ArrivalModel::Counterexample { k: take_int(&mut args, "k")?, p: take_real(&mut args, "p")? }
        }
        other => return Err(format!("unknown arrival model `{other}`")),
    };
    no_leftovers(args)?;
    Ok(model)
}

pub fn parse_channel(v: &str) -> Result<ChannelModel, String> {
    let (name, mut args) = parse_call(v)?;
    let model = match name.as_str() {
        "iid" => ChannelModel::Iid { q: take_real(&mut args, "q")? },
        "gilbert_elliott" => {
            let near = two_state(take_real(&mut args, "near_p11")?, take_real(&mut args, "near_p21")?);
            let far = two_state(take_real(&mut args, "far_p11")?, take_real(&mut args, "far_p21")?);
            ChannelModel::GilbertElliott { near, far }
        }
        other => return Err(format!("unknown channel model `{other}`")),
    };
    no_leftovers(args)?;
    Ok(model)
}
