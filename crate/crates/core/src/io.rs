//! File formats: run configuration, edge-list snapshots, CSV tables and JSON
//! reports.
//!
//! Every float written to a CSV or JSON report carries at most 12
//! significant digits. Configuration files are the exception: they are
//! written with the shortest exact representation so that a run can be
//! reproduced bit for bit from its echo.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::{AvalancheRecord, DynamicsConfig};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::{DegreeHistogram, DegreeMode, DegreeTable};
use crate::netcore::{AgentId, GrowthConfig, TradeNetwork};
use crate::renorm::{FractalFit, DEFAULT_COVER_SEEDS};

// ---------------------------------------------------------------------------
// Number formatting

/// Rounds to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// `%.12g`-style text: fixed notation for moderate magnitudes, scientific
/// otherwise, trailing zeros removed.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Recursively rounds every non-integer number in a JSON value.
fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with floats rounded to 12 significant digits and a trailing
/// newline.
pub fn to_report_json<T: Serialize>(value: &T) -> Result<String> {
    let v = round_json(serde_json::to_value(value)?);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

// ---------------------------------------------------------------------------
// Run configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    pub theta: f64,
    pub steps: usize,
    pub new_agent_probability: f64,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        let d = DynamicsConfig::default();
        Self {
            theta: d.theta,
            steps: d.steps,
            new_agent_probability: d.new_agent_probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    pub degree_mode: DegreeMode,
    /// Regression cutoff; `None` selects the 90th percentile.
    pub s_min: Option<f64>,
    pub tail_fraction: f64,
    /// BFS sources for the path-length profile.
    pub path_sources: usize,
    /// Degree classes with fewer agents are left out of profile summaries.
    pub profile_min_samples: usize,
    /// Seed for the sampling substream; `None` uses the master seed.
    pub sampling_seed: Option<u64>,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            degree_mode: DegreeMode::Total,
            s_min: None,
            tail_fraction: 0.1,
            path_sources: 1000,
            profile_min_samples: 20,
            sampling_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenormSettings {
    pub scales: Vec<usize>,
    pub cover_seeds: usize,
    /// Seed for the covering substream; `None` uses the master seed.
    pub seed: Option<u64>,
}

impl Default for RenormSettings {
    fn default() -> Self {
        Self {
            scales: vec![2, 3, 4, 6, 8],
            cover_seeds: DEFAULT_COVER_SEEDS,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VarSettings {
    pub alpha: Vec<f64>,
    /// Pareto scale; `None` uses the smallest loss.
    pub x_min: Option<f64>,
    pub horizon: usize,
    /// Tail exponent for the point estimate; `None` gives bounds only.
    pub m_hat: Option<f64>,
}

impl Default for VarSettings {
    fn default() -> Self {
        Self {
            alpha: vec![0.95, 0.99],
            x_min: None,
            horizon: 1,
            m_hat: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: String,
    pub dynamics: DynamicsSection,
    pub growth: GrowthConfig,
    pub analysis: AnalysisSettings,
    pub renorm: RenormSettings,
    pub var: VarSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: "out".to_string(),
            dynamics: DynamicsSection::default(),
            growth: GrowthConfig::default(),
            analysis: AnalysisSettings::default(),
            renorm: RenormSettings::default(),
            var: VarSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn dynamics_config(&self) -> DynamicsConfig {
        DynamicsConfig {
            theta: self.dynamics.theta,
            steps: self.dynamics.steps,
            growth: self.growth,
            new_agent_probability: self.dynamics.new_agent_probability,
        }
    }

    pub fn sampling_seed(&self) -> u64 {
        self.analysis.sampling_seed.unwrap_or(self.seed)
    }

    pub fn covering_seed(&self) -> u64 {
        self.renorm.seed.unwrap_or(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.dynamics_config().validate()?;
        let a = &self.analysis;
        if let Some(s) = a.s_min {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config("analysis.s_min", "must be a finite value > 0 or auto"));
            }
        }
        if !(a.tail_fraction > 0.0 && a.tail_fraction < 1.0) {
            return Err(Error::config("analysis.tail_fraction", "must lie in (0, 1)"));
        }
        if a.path_sources == 0 {
            return Err(Error::config("analysis.path_sources", "must be at least 1"));
        }
        validate_scales(&self.renorm.scales)?;
        if self.renorm.cover_seeds == 0 {
            return Err(Error::config("renorm.cover_seeds", "must be at least 1"));
        }
        validate_alphas(&self.var.alpha)?;
        if let Some(x) = self.var.x_min {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::config("var.x_min", "must be a finite value > 0 or auto"));
            }
        }
        if self.var.horizon == 0 {
            return Err(Error::config("var.horizon", "must be at least 1"));
        }
        if let Some(m) = self.var.m_hat {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::config("var.m_hat", "must be a finite value > 0"));
            }
        }
        Ok(())
    }

    /// Flat `section.key = value` text that [`parse_config`] reads back to
    /// an identical configuration.
    pub fn to_flat(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        let mut out = String::new();
        let mut leaves = Vec::new();
        flatten(&v, "", &mut leaves);
        for (key, value) in leaves {
            out.push_str(&key);
            out.push_str(" = ");
            out.push_str(&flat_value(&value));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

pub fn validate_scales(scales: &[usize]) -> Result<()> {
    if scales.len() < 3 {
        return Err(Error::config("renorm.scales", "at least 3 scales are required"));
    }
    if scales.contains(&0) {
        return Err(Error::config("renorm.scales", "scales must be at least 1"));
    }
    Ok(())
}

pub fn validate_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::config("var.alpha", "at least one confidence level is required"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::config("var.alpha", format!("{a} is outside (0, 1)")));
    }
    Ok(())
}

fn flat_value(v: &Value) -> String {
    match v {
        Value::Null => "auto".to_string(),
        Value::String(s) => s.clone(),
        Value::Array(a) => a.iter().map(flat_value).collect::<Vec<_>>().join(", "),
        other => other.to_string(),
    }
}

fn flatten(v: &Value, prefix: &str, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(child, &key, out);
            }
        }
        leaf => out.push((prefix.to_string(), leaf.clone())),
    }
}

fn lookup<'a>(root: &'a Value, key: &str) -> Option<&'a Value> {
    key.split('.').try_fold(root, |v, part| v.as_object()?.get(part))
}

fn lookup_mut<'a>(root: &'a mut Value, key: &str) -> Option<&'a mut Value> {
    key.split('.')
        .try_fold(root, |v, part| v.as_object_mut()?.get_mut(part))
}

/// Reads a run configuration, either flat `key = value` text or JSON (when
/// the first non-blank character is `{`). Keys may be given in any order and
/// missing keys keep their defaults. The result is validated.
pub fn parse_config(text: &str, source_name: &str) -> Result<RunConfig> {
    let assignments = if text.trim_start().starts_with('{') {
        json_assignments(text, source_name)?
    } else {
        flat_assignments(text, source_name)?
    };
    let defaults = serde_json::to_value(RunConfig::default())?;
    let mut doc = defaults.clone();
    let mut seen = HashSet::new();
    for (key, raw, line) in assignments {
        let at = line.map(|l| format!(" (line {l})")).unwrap_or_default();
        let template = match lookup(&defaults, &key) {
            Some(Value::Object(_)) => {
                return Err(Error::config(&key, format!("names a section, not a value{at}")));
            }
            Some(t) => t,
            None => return Err(Error::config(&key, format!("unknown key{at}"))),
        };
        if !seen.insert(key.clone()) {
            return Err(Error::config(&key, format!("given more than once{at}")));
        }
        let value = match raw {
            Raw::Text(s) => coerce(&s, template).map_err(|r| Error::config(&key, format!("{r}{at}")))?,
            Raw::Json(v) => v,
        };
        *lookup_mut(&mut doc, &key).expect("key checked against defaults") = value;
        if let Err(e) = serde_json::from_value::<RunConfig>(doc.clone()) {
            return Err(Error::config(&key, format!("{e}{at}")));
        }
    }
    let cfg: RunConfig = serde_json::from_value(doc)?;
    cfg.validate()?;
    Ok(cfg)
}

enum Raw {
    Text(String),
    Json(Value),
}

type Assignment = (String, Raw, Option<usize>);

fn flat_assignments(text: &str, source_name: &str) -> Result<Vec<Assignment>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let Some((k, v)) = t.split_once('=') else {
            return Err(Error::parse(source_name, line_no, "expected `key = value`"));
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::parse(source_name, line_no, "missing key before `=`"));
        }
        out.push((key.to_string(), Raw::Text(v.trim().to_string()), Some(line_no)));
    }
    Ok(out)
}

fn json_assignments(text: &str, source_name: &str) -> Result<Vec<Assignment>> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::parse(source_name, e.line(), e.to_string()))?;
    if !v.is_object() {
        return Err(Error::parse(source_name, 1, "top level must be an object"));
    }
    let mut leaves = Vec::new();
    flatten_json_partial(&v, "", &mut leaves);
    Ok(leaves.into_iter().map(|(k, v)| (k, Raw::Json(v), None)).collect())
}

/// Like [`flatten`], but stops at objects the defaults do not know so that
/// the unknown key is reported at its own level.
fn flatten_json_partial(v: &Value, prefix: &str, out: &mut Vec<(String, Value)>) {
    let defaults = serde_json::to_value(RunConfig::default()).expect("config serializes");
    flatten_guided(v, prefix, &defaults, out);
}

fn flatten_guided(v: &Value, prefix: &str, defaults: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(map) if prefix.is_empty() || lookup(defaults, prefix).is_some_and(Value::is_object) => {
            for (k, child) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_guided(child, &key, defaults, out);
            }
        }
        leaf => out.push((prefix.to_string(), leaf.clone())),
    }
}

/// Converts flat text to the JSON shape of the default value at that key.
fn coerce(s: &str, template: &Value) -> std::result::Result<Value, String> {
    let unquoted = s.strip_prefix('"').and_then(|x| x.strip_suffix('"')).unwrap_or(s);
    match template {
        Value::String(_) => Ok(Value::String(unquoted.to_string())),
        Value::Bool(_) => match s {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("expected true or false, got {s:?}")),
        },
        Value::Array(_) => {
            if s.is_empty() {
                return Ok(Value::Array(Vec::new()));
            }
            s.split(',')
                .map(|x| number(x.trim()))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Value::Array)
        }
        Value::Null => match s {
            "auto" | "none" | "" => Ok(Value::Null),
            _ => number(s),
        },
        _ => number(s),
    }
}

fn number(s: &str) -> std::result::Result<Value, String> {
    if let Ok(u) = s.parse::<u64>() {
        return Ok(Value::from(u));
    }
    if let Ok(i) = s.parse::<i64>() {
        return Ok(Value::from(i));
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Value::from(x)),
        _ => Err(format!("expected a number, got {s:?}")),
    }
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, &path.display().to_string())
}

// ---------------------------------------------------------------------------
// Edge lists

/// A directed weighted link list with an optional `# agents=N links=L
/// step=t` header.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub agents: usize,
    pub step: Option<usize>,
    pub links: Vec<(usize, usize, f64)>,
}

impl EdgeList {
    pub fn from_network(net: &TradeNetwork, step: Option<usize>) -> Self {
        let mut links = Vec::with_capacity(net.link_count());
        for a in net.agents() {
            let mut out: Vec<(AgentId, f64)> = a.out_links().collect();
            out.sort_unstable_by_key(|l| l.0);
            links.extend(out.into_iter().map(|(t, w)| (a.id().index(), t.index(), w)));
        }
        Self {
            agents: net.len(),
            step,
            links,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# agents={} links={}", self.agents, self.links.len());
        if let Some(t) = self.step {
            s.push_str(&format!(" step={t}"));
        }
        s.push('\n');
        for (a, b, w) in &self.links {
            s.push_str(&format!("{a}\t{b}\t{}\n", fmt_num(*w)));
        }
        s
    }

    pub fn to_graph(&self) -> Graph {
        Graph::from_edges(self.agents, self.links.iter().map(|l| (l.0, l.1)))
            .expect("edge list indices checked on parse")
    }

    /// Rebuilds the links of a trade network. Energies start at zero.
    pub fn to_network(&self, cfg: GrowthConfig) -> Result<TradeNetwork> {
        let mut net = TradeNetwork::empty(cfg, 0)?;
        for _ in 0..self.agents {
            net.add_agent();
        }
        for &(a, b, w) in &self.links {
            net.add_link(AgentId(a), AgentId(b), w)?;
        }
        Ok(net)
    }
}

/// Parses an edge list. Without a header the agent count is one past the
/// largest index. Blank lines and further `#` lines are skipped; the weight
/// column is optional and defaults to 1.
pub fn parse_edge_list(text: &str, source_name: &str) -> Result<EdgeList> {
    let mut header: Option<(usize, Option<usize>, Option<usize>, usize)> = None;
    let mut links = Vec::new();
    let mut seen = HashSet::new();
    let mut first_content = true;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            if first_content && rest.contains('=') {
                header = Some(parse_header(rest, source_name, line_no)?);
            }
            first_content = false;
            continue;
        }
        first_content = false;
        let fields: Vec<&str> = t.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("expected `source target [weight]`, found {} fields", fields.len()),
            ));
        }
        let index = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|&v| v < usize::MAX)
                .ok_or_else(|| Error::parse(source_name, line_no, format!("bad agent index {s:?}")))
        };
        let a = index(fields[0])?;
        let b = index(fields[1])?;
        let w = match fields.get(2) {
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|w| *w > 0.0 && w.is_finite())
                .ok_or_else(|| Error::parse(source_name, line_no, format!("bad weight {s:?}")))?,
            None => 1.0,
        };
        if a == b {
            return Err(Error::parse(source_name, line_no, format!("self-link at agent {a}")));
        }
        if let Some((n, ..)) = header {
            if a >= n || b >= n {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("agent index out of range for {n} agents"),
                ));
            }
        }
        if !seen.insert((a, b)) {
            return Err(Error::parse(source_name, line_no, format!("duplicate link {a} -> {b}")));
        }
        links.push((a, b, w));
    }
    let agents = match header {
        Some((n, declared, _, line_no)) => {
            if let Some(l) = declared {
                if l != links.len() {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        format!("header declares {l} links, found {}", links.len()),
                    ));
                }
            }
            n
        }
        None => links.iter().map(|l| l.0.max(l.1) + 1).max().unwrap_or(0),
    };
    Ok(EdgeList {
        agents,
        step: header.and_then(|h| h.2),
        links,
    })
}

fn parse_header(rest: &str, source_name: &str, line_no: usize) -> Result<(usize, Option<usize>, Option<usize>, usize)> {
    let mut fields = BTreeMap::new();
    for tok in rest.split_whitespace() {
        let Some((k, v)) = tok.split_once('=') else {
            return Err(Error::parse(source_name, line_no, format!("bad header field {tok:?}")));
        };
        let v: usize = v
            .parse()
            .map_err(|_| Error::parse(source_name, line_no, format!("bad header value {tok:?}")))?;
        if !matches!(k, "agents" | "links" | "step") {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("unknown header field {k:?}"),
            ));
        }
        fields.insert(k, v);
    }
    let agents = *fields
        .get("agents")
        .ok_or_else(|| Error::parse(source_name, line_no, "header lacks agents="))?;
    Ok((
        agents,
        fields.get("links").copied(),
        fields.get("step").copied(),
        line_no,
    ))
}

// ---------------------------------------------------------------------------
// CSV tables

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn ut_csv(u_t: &[f64]) -> String {
    csv_text(
        &["step", "u_t"],
        u_t.iter().enumerate().map(|(t, u)| vec![t.to_string(), fmt_num(*u)]),
    )
}

/// Return `t` is realized at step `t + 1`. Gaps are empty fields.
pub fn returns_csv(returns: &[Option<f64>]) -> String {
    csv_text(
        &["step", "log_return"],
        returns
            .iter()
            .enumerate()
            .map(|(t, r)| vec![(t + 1).to_string(), opt_num(*r)]),
    )
}

pub fn avalanches_csv(records: &[AvalancheRecord]) -> String {
    csv_text(
        &["step", "r", "k_t", "seed_agent"],
        records.iter().map(|a| {
            vec![
                a.step.to_string(),
                a.r.to_string(),
                a.k_t.to_string(),
                a.seed_agent.to_string(),
            ]
        }),
    )
}

pub fn pk_csv(h: &DegreeHistogram) -> String {
    csv_text(
        &["k", "count", "p"],
        h.entries
            .iter()
            .map(|(k, (c, p))| vec![k.to_string(), c.to_string(), fmt_num(*p)]),
    )
}

pub fn dk_csv(t: &DegreeTable) -> String {
    csv_text(
        &["k", "D", "samples"],
        t.rows
            .iter()
            .map(|r| vec![r.k.to_string(), fmt_num(r.value), r.samples.to_string()]),
    )
}

pub fn ck_csv(t: &DegreeTable) -> String {
    csv_text(
        &["k", "C", "samples", "flagged"],
        t.rows.iter().map(|r| {
            vec![
                r.k.to_string(),
                fmt_num(r.value),
                r.samples.to_string(),
                u8::from(r.flagged).to_string(),
            ]
        }),
    )
}

pub fn lk_csv(t: &DegreeTable) -> String {
    csv_text(
        &["k", "l", "samples"],
        t.rows
            .iter()
            .map(|r| vec![r.k.to_string(), fmt_num(r.value), r.samples.to_string()]),
    )
}

pub fn renorm_csv(fit: &FractalFit) -> String {
    csv_text(
        &["l_b", "n_p_mean", "n_p_std", "k_p_mean"],
        fit.scales.iter().map(|s| {
            vec![
                s.l_b.to_string(),
                fmt_num(s.n_p_mean),
                fmt_num(s.n_p_std),
                fmt_num(s.k_p_mean),
            ]
        }),
    )
}

/// A parsed CSV: header names and raw rows, each row tagged with its
/// 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn read_table(text: &str, source_name: &str) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(e, source_name))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(Error::parse(source_name, 1, "missing header line"));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(e, source_name))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Table { header, rows })
}

fn csv_error(e: csv::Error, source_name: &str) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(source_name, line, e.to_string())
}

fn required_column(t: &Table, name: &str, source_name: &str) -> Result<usize> {
    t.column(name)
        .ok_or_else(|| Error::parse(source_name, 1, format!("missing column {name:?}")))
}

/// A numeric column; empty fields read as `None`.
pub fn read_column(text: &str, source_name: &str, column: &str) -> Result<Vec<Option<f64>>> {
    let t = read_table(text, source_name)?;
    let c = required_column(&t, column, source_name)?;
    t.rows
        .iter()
        .map(|(line, row)| {
            let s = &row[c];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| Error::parse(source_name, *line, format!("bad number {s:?} in {column}")))
        })
        .collect()
}

/// The `log_return` column of a returns CSV.
pub fn read_returns_csv(text: &str, source_name: &str) -> Result<Vec<Option<f64>>> {
    read_column(text, source_name, "log_return")
}

/// The `loss` column of a losses CSV. Gaps are not allowed.
pub fn read_losses_csv(text: &str, source_name: &str) -> Result<Vec<f64>> {
    let t = read_table(text, source_name)?;
    let c = required_column(&t, "loss", source_name)?;
    t.rows
        .iter()
        .map(|(line, row)| {
            row[c]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(source_name, *line, format!("bad loss {:?}", row[c])))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// External series

/// A dated positive series such as a stock index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExternalSeries {
    pub label: String,
    pub observations: Vec<(String, f64)>,
}

impl ExternalSeries {
    /// `(date of the later observation, log-return)`.
    pub fn returns(&self) -> Vec<(String, f64)> {
        self.observations
            .windows(2)
            .map(|w| (w[1].0.clone(), (w[1].1 / w[0].1).ln()))
            .collect()
    }

    /// Sign-flipped negative returns, dated like [`returns`](Self::returns).
    pub fn losses(&self) -> Vec<(String, f64)> {
        self.returns()
            .into_iter()
            .filter(|r| r.1 < 0.0)
            .map(|(d, r)| (d, -r))
            .collect()
    }

    pub fn returns_csv(&self) -> String {
        csv_text(
            &["date", "log_return"],
            self.returns().into_iter().map(|(d, r)| vec![d, fmt_num(r)]),
        )
    }

    pub fn losses_csv(&self) -> String {
        csv_text(
            &["date", "loss"],
            self.losses().into_iter().map(|(d, r)| vec![d, fmt_num(r)]),
        )
    }
}

fn parse_date(s: &str) -> Option<NaiveDateTime> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    let s = s.strip_suffix('Z').unwrap_or(s);
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Reads a `(date, value)` CSV. Rows in validation errors are 1-based line
/// numbers of the file.
pub fn parse_series_csv(
    text: &str,
    source_name: &str,
    date_column: &str,
    value_column: &str,
    label: &str,
) -> Result<ExternalSeries> {
    let t = read_table(text, source_name)?;
    let dc = required_column(&t, date_column, source_name)?;
    let vc = required_column(&t, value_column, source_name)?;
    let mut observations = Vec::with_capacity(t.rows.len());
    let mut stamps = Vec::with_capacity(t.rows.len());
    let mut nonpositive = Vec::new();
    for (line, row) in &t.rows {
        let date = &row[dc];
        let stamp = parse_date(date)
            .ok_or_else(|| Error::parse(source_name, *line, format!("{date:?} is not an ISO-8601 date")))?;
        let value: f64 = row[vc]
            .parse()
            .ok()
            .filter(|x: &f64| !x.is_nan() && !x.is_infinite())
            .ok_or_else(|| Error::parse(source_name, *line, format!("bad value {:?}", row[vc])))?;
        if value <= 0.0 {
            nonpositive.push(*line);
        }
        stamps.push((*line, stamp));
        observations.push((date.clone(), value));
    }
    if !nonpositive.is_empty() {
        return Err(Error::Validation {
            source_name: source_name.to_string(),
            reason: "values must be positive".to_string(),
            rows: nonpositive,
        });
    }
    let out_of_order: Vec<usize> = stamps.windows(2).filter(|w| w[1].1 <= w[0].1).map(|w| w[1].0).collect();
    if !out_of_order.is_empty() {
        return Err(Error::Validation {
            source_name: source_name.to_string(),
            reason: "dates must be strictly increasing".to_string(),
            rows: out_of_order,
        });
    }
    Ok(ExternalSeries {
        label: label.to_string(),
        observations,
    })
}

// ---------------------------------------------------------------------------
// Filesystem helpers

pub fn write_text(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

/// Map of output file name to contents, written in name order.
pub type FileSet = BTreeMap<String, String>;

pub fn write_all(dir: &Path, files: &FileSet) -> Result<()> {
    for (name, contents) in files {
        write_text(dir, name, contents)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(3.0), "3");
        assert_eq!(fmt_num(0.1), "0.1");
        assert_eq!(fmt_num(std::f64::consts::PI), "3.14159265359");
        assert_eq!(fmt_num(-2.0f64.ln()), "-0.69314718056");
        assert_eq!(fmt_num(1.5e-9), "1.5e-9");
        assert_eq!(fmt_num(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
    }

    #[test]
    fn default_config_round_trips_through_both_formats() {
        let cfg = RunConfig::default();
        assert_eq!(parse_config(&cfg.to_flat(), "flat").unwrap(), cfg);
        assert_eq!(parse_config(&cfg.to_json(), "json").unwrap(), cfg);
    }

    #[test]
    fn flat_config_overrides() {
        let text = "# experiment\nseed = 9\ndynamics.theta = 0.25\ngrowth.m_new = 2\n\
                    analysis.s_min = 3.5\nrenorm.scales = 2, 4, 8\nvar.alpha = 0.9\n\
                    analysis.degree_mode = in\noutput_dir = runs/a b\n";
        let cfg = parse_config(text, "t").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.dynamics.theta, 0.25);
        assert_eq!(cfg.growth.m_new, 2);
        assert_eq!(cfg.analysis.s_min, Some(3.5));
        assert_eq!(cfg.renorm.scales, vec![2, 4, 8]);
        assert_eq!(cfg.var.alpha, vec![0.9]);
        assert_eq!(cfg.analysis.degree_mode, DegreeMode::In);
        assert_eq!(cfg.output_dir, "runs/a b");
        assert_eq!(parse_config(&cfg.to_flat(), "t").unwrap(), cfg);
    }

    fn config_key(text: &str) -> String {
        match parse_config(text, "t") {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn config_errors_name_the_key() {
        assert_eq!(config_key("dynamics.theta = -1\n"), "theta");
        assert_eq!(config_key("dynamics.thetaa = 1\n"), "dynamics.thetaa");
        assert_eq!(config_key("{\"dynamics\": {\"bogus\": 1}}"), "dynamics.bogus");
        assert_eq!(config_key("{\"nope\": {\"x\": 1}}"), "nope");
        assert_eq!(config_key("growth.n0 = 2.5\n"), "growth.n0");
        assert_eq!(config_key("growth.n0 = many\n"), "growth.n0");
        assert_eq!(config_key("seed = 1\nseed = 2\n"), "seed");
        assert_eq!(config_key("growth = 1\n"), "growth");
        assert_eq!(config_key("renorm.scales = 2, 4\n"), "renorm.scales");
        assert_eq!(config_key("var.alpha = 1.0\n"), "var.alpha");
    }

    #[test]
    fn malformed_lines_are_parse_errors() {
        assert!(matches!(
            parse_config("seed 4\n", "cfg"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("{\n\"seed\": ,\n}", "cfg"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn edge_list_round_trip() {
        let mut net = TradeNetwork::new(GrowthConfig::default(), 3).unwrap();
        for _ in 0..20 {
            net.attach_preferential(2, 0.5);
        }
        let el = EdgeList::from_network(&net, Some(20));
        let text = el.to_text();
        assert!(text.starts_with(&format!("# agents={} links={} step=20\n", net.len(), net.link_count())));
        let back = parse_edge_list(&text, "snap").unwrap();
        assert_eq!(back, el);
        let rebuilt = back.to_network(GrowthConfig::default()).unwrap();
        assert_eq!(EdgeList::from_network(&rebuilt, Some(20)), el);
    }

    #[test]
    fn edge_list_without_header() {
        let el = parse_edge_list("0 1\n1 2 2.5\n\n# note\n", "p").unwrap();
        assert_eq!(el.agents, 3);
        assert_eq!(el.step, None);
        assert_eq!(el.links, vec![(0, 1, 1.0), (1, 2, 2.5)]);
        assert_eq!(el.to_graph().edge_count(), 2);
    }

    #[test]
    fn edge_list_errors_carry_lines() {
        let line_of = |text: &str| match parse_edge_list(text, "e") {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line_of("# agents=2 links=1\n0\t5\t1\n"), 2);
        assert_eq!(line_of("0 1\n1 1\n"), 2);
        assert_eq!(line_of("0 1\n0 1\n"), 2);
        assert_eq!(line_of("0 1 -3\n"), 1);
        assert_eq!(line_of("0 x\n"), 1);
        assert_eq!(line_of("# agents=3 links=2\n0 1\n"), 1);
        assert_eq!(line_of("# agents=3 colour=2\n"), 1);
    }

    #[test]
    fn simulation_tables_parse_back() {
        let u = [3.0, 4.0, 0.0, 2.5];
        let r = crate::metrics::log_returns(&u);
        assert_eq!(
            read_returns_csv(&returns_csv(&r), "r").unwrap(),
            r.iter().map(|x| x.map(round_sig)).collect::<Vec<_>>()
        );
        let ut = read_column(&ut_csv(&u), "u", "u_t").unwrap();
        assert_eq!(ut, u.iter().map(|x| Some(*x)).collect::<Vec<_>>());
    }

    #[test]
    fn series_ingest_example() {
        let text = "date,value\n2020-01-01,100\n2020-01-02,110\n2020-01-03,99\n";
        let s = parse_series_csv(text, "s", "date", "value", "idx").unwrap();
        let r = s.returns();
        assert!((r[0].1 - 1.1f64.ln()).abs() < 1e-15);
        assert!((r[1].1 - 0.9f64.ln()).abs() < 1e-15);
        let l = s.losses();
        assert_eq!(l.len(), 1);
        assert!((l[0].1 + 0.9f64.ln()).abs() < 1e-15);
        let back = read_losses_csv(&s.losses_csv(), "l").unwrap();
        assert_eq!(back, vec![round_sig(-(0.9f64.ln()))]);
    }

    #[test]
    fn series_validation_rows() {
        let bad = "date,value\n2020-01-01,1\n2020-01-02,-1\n2020-01-03,0\n";
        match parse_series_csv(bad, "s", "date", "value", "x") {
            Err(Error::Validation { rows, .. }) => assert_eq!(rows, vec![3, 4]),
            other => panic!("{other:?}"),
        }
        let dup = "date,value\n2020-01-01,1\n2020-01-01,2\n2019-12-31,2\n";
        match parse_series_csv(dup, "s", "date", "value", "x") {
            Err(Error::Validation { rows, .. }) => assert_eq!(rows, vec![3, 4]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_series_csv("date,value\n01/02/2020,1\n", "s", "date", "value", "x"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_series_csv("when,value\n2020-01-01,1\n", "s", "date", "value", "x"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_series_csv("date,value\n2020-01-01,1,7\n", "s", "date", "value", "x"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn timestamps_are_accepted() {
        let text = "date,value\n2020-01-01T09:30:00Z,1\n2020-01-01T16:00:00Z,2\n";
        assert_eq!(
            parse_series_csv(text, "s", "date", "value", "x")
                .unwrap()
                .observations
                .len(),
            2
        );
    }

    #[test]
    fn report_json_rounds_floats() {
        let v = serde_json::json!({"a": 1.0 / 3.0, "n": 7, "xs": [0.1, 2.0 / 3.0]});
        let s = to_report_json(&v).unwrap();
        assert!(s.contains("0.333333333333"));
        assert!(!s.contains("0.3333333333333"));
        assert!(s.contains("\"n\": 7"));
        assert!(s.ends_with('\n'));
    }
}
