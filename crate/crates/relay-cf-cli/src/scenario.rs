//! Scenario files: a flat key-value format with section headers describing
//! the chain, the power model, the budget, and the numeric controls.
//!
//! ```text
//! [chain]
//! protocol = df
//! hops = 2
//! m = 1 1            # one value broadcasts to all hops
//! spacing = uniform  # or: d = 0.3 0.7
//! nu = 4
//! omega = 1
//! bandwidth = 1
//! n0 = 1
//!
//! [power]
//! epsilon = 0.35
//! circuit = reference  # 0.1 W per node and mode; DF adds 0.1N decoding
//! budget = 0 db        # or plain watts: budget = 1.0
//!
//! [run]
//! strategies = upa cfso-upa cfsopa cfopa copa
//! series_terms = 200
//! quad_order = 30
//! samples = 1000000
//! seed = 1
//! streams = 16
//! ```
//!
//! Unknown keys are rejected. dB values carry an explicit `db` suffix and
//! are converted at this boundary only; everything downstream is linear
//! watts.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use relay_cf::channel::{HopProfile, PowerModel, Protocol, RelayChain};
use relay_cf::metrics::{CfControls, SeriesControl};
use relay_cf::montecarlo::McConfig;
use relay_cf::optimizer::Strategy;
use relay_cf::specfun::gauss_laguerre;

/// Parse or validation failure with a line-level diagnostic.
#[derive(Debug, Clone)]
pub struct ScenarioError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line > 0 {
            write!(f, "scenario line {}: {}", self.line, self.message)
        } else {
            write!(f, "scenario: {}", self.message)
        }
    }
}

impl std::error::Error for ScenarioError {}

fn err(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError {
        line,
        message: message.into(),
    }
}

/// Hop spacing: uniform over the unit source-destination distance, or
/// explicit per-hop lengths.
#[derive(Debug, Clone, PartialEq)]
pub enum Spacing {
    Uniform,
    Explicit(Vec<f64>),
}

/// Circuit power specification.
#[derive(Debug, Clone, PartialEq)]
pub enum CircuitSpec {
    /// 0.1 W per node in each mode; DF decoding adds 0.1N. Aggregates to
    /// 0.3N (AF) and 0.4N (DF).
    Reference,
    /// Explicit uniform per-node powers plus a protocol processing total.
    Uniform {
        p_ct: f64,
        p_cr: f64,
        p_ci: f64,
        p_proc: f64,
    },
}

/// The power budget, kept in the unit it was written in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Db(f64),
    Watts(f64),
}

impl Budget {
    pub fn watts(self) -> f64 {
        match self {
            Budget::Db(db) => 10f64.powf(db / 10.0),
            Budget::Watts(w) => w,
        }
    }
}

/// A fully parsed scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub protocol: Protocol,
    pub hops: usize,
    pub m: Vec<u32>,
    pub spacing: Spacing,
    pub nu: Vec<f64>,
    pub omega: Vec<f64>,
    pub bandwidth: f64,
    pub n0: f64,
    pub epsilon: f64,
    pub circuit: CircuitSpec,
    pub budget: Budget,
    pub strategies: Vec<Strategy>,
    pub series_terms: usize,
    pub quad_order: usize,
    pub samples: u64,
    pub seed: u64,
    pub streams: u32,
}

impl Scenario {
    /// Parse the flat key-value text.
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut b = Builder::default();
        let mut section = String::new();
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(lineno, "unterminated section header"))?;
                section = name.trim().to_string();
                if !matches!(section.as_str(), "chain" | "power" | "run") {
                    return Err(err(lineno, format!("unknown section '[{section}]'")));
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(lineno, format!("expected 'key = value', got '{line}'")))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if section.is_empty() {
                return Err(err(lineno, "key outside any [section]"));
            }
            if !seen.insert((section.clone(), key.clone())) {
                return Err(err(lineno, format!("duplicate key '{key}' in [{section}]")));
            }
            b.set(&section, &key, &value, lineno)?;
        }
        b.finish()
    }

    /// Canonical serialization; reparsing yields an identical scenario.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[chain]");
        let _ = writeln!(s, "protocol = {}", self.protocol);
        let _ = writeln!(s, "hops = {}", self.hops);
        let _ = writeln!(s, "m = {}", join_u32(&self.m));
        match &self.spacing {
            Spacing::Uniform => {
                let _ = writeln!(s, "spacing = uniform");
            }
            Spacing::Explicit(d) => {
                let _ = writeln!(s, "d = {}", join_f64(d));
            }
        }
        let _ = writeln!(s, "nu = {}", join_f64(&self.nu));
        let _ = writeln!(s, "omega = {}", join_f64(&self.omega));
        let _ = writeln!(s, "bandwidth = {}", self.bandwidth);
        let _ = writeln!(s, "n0 = {}", self.n0);
        let _ = writeln!(s);
        let _ = writeln!(s, "[power]");
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        match self.circuit {
            CircuitSpec::Reference => {
                let _ = writeln!(s, "circuit = reference");
            }
            CircuitSpec::Uniform {
                p_ct,
                p_cr,
                p_ci,
                p_proc,
            } => {
                let _ = writeln!(s, "p_ct = {p_ct}");
                let _ = writeln!(s, "p_cr = {p_cr}");
                let _ = writeln!(s, "p_ci = {p_ci}");
                let _ = writeln!(s, "p_proc = {p_proc}");
            }
        }
        match self.budget {
            Budget::Db(db) => {
                let _ = writeln!(s, "budget = {db} db");
            }
            Budget::Watts(w) => {
                let _ = writeln!(s, "budget = {w}");
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "[run]");
        let strategies: Vec<String> = self.strategies.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "strategies = {}", strategies.join(" "));
        let _ = writeln!(s, "series_terms = {}", self.series_terms);
        let _ = writeln!(s, "quad_order = {}", self.quad_order);
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "streams = {}", self.streams);
        s
    }

    /// Build the relay chain with the scenario's own hop count.
    pub fn chain(&self) -> Result<RelayChain, ScenarioError> {
        self.chain_with_hops(self.hops)
    }

    /// Build a chain with `n` hops; per-hop fields must be uniform unless
    /// `n` equals the scenario hop count.
    pub fn chain_with_hops(&self, n: usize) -> Result<RelayChain, ScenarioError> {
        let resample = n != self.hops;
        if resample {
            let uniform = self.m.windows(2).all(|w| w[0] == w[1])
                && self.nu.windows(2).all(|w| w[0] == w[1])
                && self.omega.windows(2).all(|w| w[0] == w[1])
                && self.spacing == Spacing::Uniform;
            if !uniform {
                return Err(err(
                    0,
                    "hop-count sweeps need the uniform-chain shorthand (scalar m/nu/omega, spacing = uniform)",
                ));
            }
        }
        let d: Vec<f64> = match &self.spacing {
            Spacing::Uniform => vec![1.0 / n as f64; n],
            Spacing::Explicit(d) => d.clone(),
        };
        let hops: Vec<HopProfile> = (0..n)
            .map(|i| {
                let pick = |v: &[f64]| if resample { v[0] } else { v[i] };
                HopProfile {
                    m: if resample { self.m[0] } else { self.m[i] },
                    d: d[i],
                    nu: pick(&self.nu),
                    omega: pick(&self.omega),
                }
            })
            .collect();
        RelayChain::new(
            hops,
            self.protocol,
            self.bandwidth,
            self.n0,
            self.power_model_for(n),
        )
        .map_err(|e| err(0, e.to_string()))
    }

    /// The scenario's power model sized for an `n`-hop chain.
    pub fn power_model_for(&self, n: usize) -> PowerModel {
        match self.circuit {
            CircuitSpec::Reference => {
                let mut pm = PowerModel::reference(n);
                pm.epsilon = self.epsilon;
                pm
            }
            CircuitSpec::Uniform {
                p_ct,
                p_cr,
                p_ci,
                p_proc,
            } => {
                let mut pm = PowerModel::uniform(n, self.epsilon, p_ct, p_cr, p_ci);
                pm.p_proc_af = p_proc;
                pm.p_proc_df = p_proc;
                pm
            }
        }
    }

    /// Numeric controls for the closed forms.
    pub fn controls(&self) -> Result<CfControls, ScenarioError> {
        Ok(CfControls {
            series: SeriesControl {
                max_terms: self.series_terms,
                rel_tol: 1e-12,
            },
            quad: gauss_laguerre(self.quad_order).map_err(|e| err(0, e.to_string()))?,
        })
    }

    /// Monte-Carlo configuration.
    pub fn mc_config(&self) -> McConfig {
        McConfig {
            samples: self.samples,
            seed: self.seed,
            streams: self.streams,
        }
    }
}

fn join_f64(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn join_u32(v: &[u32]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Default)]
struct Builder {
    protocol: Option<Protocol>,
    hops: Option<usize>,
    m: Option<Vec<u32>>,
    spacing: Option<Spacing>,
    nu: Option<Vec<f64>>,
    omega: Option<Vec<f64>>,
    bandwidth: Option<f64>,
    n0: Option<f64>,
    epsilon: Option<f64>,
    circuit_ref: bool,
    p_ct: Option<f64>,
    p_cr: Option<f64>,
    p_ci: Option<f64>,
    p_proc: Option<f64>,
    budget: Option<Budget>,
    strategies: Option<Vec<Strategy>>,
    series_terms: Option<usize>,
    quad_order: Option<usize>,
    samples: Option<u64>,
    seed: Option<u64>,
    streams: Option<u32>,
}

impl Builder {
    fn set(
        &mut self,
        section: &str,
        key: &str,
        value: &str,
        line: usize,
    ) -> Result<(), ScenarioError> {
        match (section, key) {
            ("chain", "protocol") => {
                self.protocol = Some(match value.to_ascii_lowercase().as_str() {
                    "af" => Protocol::Af,
                    "df" => Protocol::Df,
                    other => return Err(err(line, format!("unknown protocol '{other}'"))),
                })
            }
            ("chain", "hops") => self.hops = Some(parse_num(value, line)?),
            ("chain", "m") => self.m = Some(parse_list(value, line)?),
            ("chain", "spacing") => {
                if value != "uniform" {
                    return Err(err(
                        line,
                        "spacing accepts only 'uniform' (or give 'd = ...')",
                    ));
                }
                if self.spacing.is_some() {
                    return Err(err(line, "both 'spacing' and 'd' given"));
                }
                self.spacing = Some(Spacing::Uniform);
            }
            ("chain", "d") => {
                if self.spacing.is_some() {
                    return Err(err(line, "both 'spacing' and 'd' given"));
                }
                self.spacing = Some(Spacing::Explicit(parse_list(value, line)?));
            }
            ("chain", "nu") => self.nu = Some(parse_list(value, line)?),
            ("chain", "omega") => self.omega = Some(parse_list(value, line)?),
            ("chain", "bandwidth") => self.bandwidth = Some(parse_num(value, line)?),
            ("chain", "n0") => self.n0 = Some(parse_num(value, line)?),
            ("power", "epsilon") => self.epsilon = Some(parse_num(value, line)?),
            ("power", "circuit") => {
                if value != "reference" {
                    return Err(err(
                        line,
                        "circuit accepts only 'reference' (or give p_ct/p_cr/p_ci/p_proc)",
                    ));
                }
                self.circuit_ref = true;
            }
            ("power", "p_ct") => self.p_ct = Some(parse_num(value, line)?),
            ("power", "p_cr") => self.p_cr = Some(parse_num(value, line)?),
            ("power", "p_ci") => self.p_ci = Some(parse_num(value, line)?),
            ("power", "p_proc") => self.p_proc = Some(parse_num(value, line)?),
            ("power", "budget") => {
                let v = value.to_ascii_lowercase();
                self.budget = Some(if let Some(db) = v.strip_suffix("db") {
                    Budget::Db(parse_num(db.trim(), line)?)
                } else {
                    Budget::Watts(parse_num(&v, line)?)
                });
            }
            ("run", "strategies") => {
                let mut out = Vec::new();
                for tok in value.split_whitespace() {
                    out.push(tok.parse::<Strategy>().map_err(|e| err(line, e))?);
                }
                if out.is_empty() {
                    return Err(err(line, "empty strategy list"));
                }
                self.strategies = Some(out);
            }
            ("run", "series_terms") => self.series_terms = Some(parse_num(value, line)?),
            ("run", "quad_order") => self.quad_order = Some(parse_num(value, line)?),
            ("run", "samples") => self.samples = Some(parse_num(value, line)?),
            ("run", "seed") => self.seed = Some(parse_num(value, line)?),
            ("run", "streams") => self.streams = Some(parse_num(value, line)?),
            (s, k) => return Err(err(line, format!("unknown key '{k}' in [{s}]"))),
        }
        Ok(())
    }

    fn finish(self) -> Result<Scenario, ScenarioError> {
        let protocol = self
            .protocol
            .ok_or_else(|| err(0, "missing [chain] protocol"))?;
        let spacing = self.spacing.unwrap_or(Spacing::Uniform);
        let hops = match (&spacing, self.hops) {
            (Spacing::Explicit(d), Some(n)) if d.len() != n => {
                return Err(err(0, format!("hops = {n} but {} entries in d", d.len())));
            }
            (Spacing::Explicit(d), _) => d.len(),
            (Spacing::Uniform, Some(n)) => n,
            (Spacing::Uniform, None) => return Err(err(0, "missing [chain] hops")),
        };
        if hops == 0 {
            return Err(err(0, "hops must be >= 1"));
        }
        let budget = self
            .budget
            .ok_or_else(|| err(0, "missing [power] budget"))?;
        let broadcast =
            |v: Option<Vec<f64>>, default: f64, name: &str| -> Result<Vec<f64>, ScenarioError> {
                let v = v.unwrap_or_else(|| vec![default]);
                if v.len() == 1 {
                    Ok(vec![v[0]; hops])
                } else if v.len() == hops {
                    Ok(v)
                } else {
                    Err(err(
                        0,
                        format!("{name} needs 1 or {hops} values, got {}", v.len()),
                    ))
                }
            };
        let m = {
            let v = self.m.unwrap_or_else(|| vec![1u32]);
            if v.len() == 1 {
                vec![v[0]; hops]
            } else if v.len() == hops {
                v
            } else {
                return Err(err(
                    0,
                    format!("m needs 1 or {hops} values, got {}", v.len()),
                ));
            }
        };
        let circuit = if self.circuit_ref {
            if self.p_ct.is_some()
                || self.p_cr.is_some()
                || self.p_ci.is_some()
                || self.p_proc.is_some()
            {
                return Err(err(
                    0,
                    "give either 'circuit = reference' or explicit powers, not both",
                ));
            }
            CircuitSpec::Reference
        } else if self.p_ct.is_some()
            || self.p_cr.is_some()
            || self.p_ci.is_some()
            || self.p_proc.is_some()
        {
            CircuitSpec::Uniform {
                p_ct: self.p_ct.unwrap_or(0.1),
                p_cr: self.p_cr.unwrap_or(0.1),
                p_ci: self.p_ci.unwrap_or(0.1),
                p_proc: self.p_proc.unwrap_or(0.0),
            }
        } else {
            CircuitSpec::Reference
        };
        let scenario = Scenario {
            protocol,
            hops,
            m,
            nu: broadcast(self.nu, 4.0, "nu")?,
            omega: broadcast(self.omega, 1.0, "omega")?,
            spacing,
            bandwidth: self.bandwidth.unwrap_or(1.0),
            n0: self.n0.unwrap_or(1.0),
            epsilon: self.epsilon.unwrap_or(0.35),
            circuit,
            budget,
            strategies: self.strategies.unwrap_or_else(|| {
                vec![
                    Strategy::Upa,
                    Strategy::CfsoUpa,
                    Strategy::Cfsopa,
                    Strategy::Cfopa,
                    Strategy::Copa,
                ]
            }),
            series_terms: self.series_terms.unwrap_or(200),
            quad_order: self.quad_order.unwrap_or(30),
            samples: self.samples.unwrap_or(1_000_000),
            seed: self.seed.unwrap_or(1),
            streams: self.streams.unwrap_or(16),
        };
        // an eager chain build surfaces config errors at parse time
        scenario.chain()?;
        scenario.controls()?;
        Ok(scenario)
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize) -> Result<T, ScenarioError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| err(line, format!("cannot parse '{value}': {e}")))
}

fn parse_list<T: std::str::FromStr>(value: &str, line: usize) -> Result<Vec<T>, ScenarioError>
where
    T::Err: std::fmt::Display,
{
    let v: Result<Vec<T>, _> = value
        .split_whitespace()
        .map(|t| parse_num(t, line))
        .collect();
    let v = v?;
    if v.is_empty() {
        return Err(err(line, "empty value list"));
    }
    Ok(v)
}
