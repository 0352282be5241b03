//! Run configuration: merging of config file and flags, validation, and the
//! header form written at the top of every CSV.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use ldrate::{builtin_model, ModelEntry};

use crate::ini::Ini;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Rate,
    RateDiscrete,
    SmallTime,
    Simulate,
    Tail,
    Lmgf,
    Converge,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Rate,
        Command::RateDiscrete,
        Command::SmallTime,
        Command::Simulate,
        Command::Tail,
        Command::Lmgf,
        Command::Converge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Rate => "rate",
            Command::RateDiscrete => "rate-discrete",
            Command::SmallTime => "small-time",
            Command::Simulate => "simulate",
            Command::Tail => "tail",
            Command::Lmgf => "lmgf",
            Command::Converge => "converge",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every key accepted in a config file section or as a flag.
pub const KEYS: &[&str] = &[
    "model", "a", "c", "s", "base", "amp", "dim", "x0", "x", "x_grid", "T", "theta", "N", "h",
    "h_values", "h_ref", "path_n", "epsilon", "epsilon_values", "samples", "seed", "delta",
    "lambda_min", "lambda_max", "lambda_step", "order_target", "order_max", "multistart", "output",
];

const MODEL_PARAM_KEYS: &[&str] = &["a", "c", "s", "base", "amp", "dim"];

/// Parameter names of each built-in family, in constructor order.
fn family_params(family: &str) -> Option<&'static [&'static str]> {
    Some(match family {
        "brownian" => &["dim"],
        "ou-additive" => &["a"],
        "mult-sine" => &[],
        "scalar-additive" => &["a", "c", "s"],
        "scalar-sine" => &["a", "c", "base", "amp"],
        _ => return None,
    })
}

pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_LAMBDA: (f64, f64, f64) = (-4.0, 4.0, 0.01);

/// A complete, validated run.
///
/// Fields a subcommand does not use hold their defaults, so two configs
/// that drive the same computation compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// Canonical model name, e.g. `ou-additive(-1)`.
    pub model: String,
    pub x0: Vec<f64>,
    pub x_grid: Vec<Vec<f64>>,
    pub t_end: f64,
    pub theta: f64,
    /// θ-method steps `N`.
    pub steps: usize,
    pub h_values: Vec<f64>,
    /// Fine-grid reference step; `None` selects the closed form.
    pub h_ref: Option<f64>,
    pub path_steps: usize,
    pub epsilon_values: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub delta: f64,
    pub lambda: (f64, f64, f64),
    pub order_target: Option<f64>,
    pub order_max: Option<f64>,
    pub multistart: usize,
    /// Not part of the header, so the same run written to two places gives
    /// identical bytes.
    pub output: Option<PathBuf>,
}

impl RunConfig {
    fn defaults(command: Command) -> RunConfig {
        RunConfig {
            command,
            model: String::new(),
            x0: Vec::new(),
            x_grid: Vec::new(),
            t_end: 1.0,
            theta: 0.0,
            steps: 1,
            h_values: Vec::new(),
            h_ref: None,
            path_steps: ldrate::rate::DEFAULT_PATH_STEPS,
            epsilon_values: Vec::new(),
            samples: DEFAULT_SAMPLES,
            seed: 0,
            delta: 0.0,
            lambda: DEFAULT_LAMBDA,
            order_target: None,
            order_max: None,
            multistart: 0,
            output: None,
        }
    }

    pub fn model_entry(&self) -> ldrate::Result<ModelEntry> {
        builtin_model(&self.model)
    }

    /// Builds and validates a config from the merged file and flag values.
    pub fn from_sources(
        command: Command,
        file: Option<&Ini>,
        flags: &BTreeMap<String, String>,
    ) -> Result<RunConfig, Vec<String>> {
        let mut errors = Vec::new();
        let mut raw = BTreeMap::new();
        let mut presets = BTreeMap::new();
        if let Some(ini) = file {
            check_keys(&ini.global, "top level", &mut errors);
            raw.extend(ini.global.clone());
            for (name, section) in &ini.sections {
                if let Some(preset) = name.strip_prefix("model.") {
                    presets.insert(preset.to_string(), section.clone());
                } else if Command::from_name(name).is_some() {
                    check_keys(section, &format!("section [{name}]"), &mut errors);
                } else {
                    errors.push(format!("unknown config section [{name}]"));
                }
            }
            if let Some(section) = ini.section(command.name()) {
                raw.extend(section.clone());
            }
        }
        raw.extend(flags.clone());
        match build(command, &raw, &presets) {
            Ok(cfg) if errors.is_empty() => Ok(cfg),
            Ok(_) => Err(errors),
            Err(more) => {
                errors.extend(more);
                Err(errors)
            }
        }
    }

    /// `(key, value)` pairs recorded in the CSV header, in a fixed order.
    pub fn header_pairs(&self) -> Vec<(&'static str, String)> {
        let c = self.command;
        let mut v: Vec<(&'static str, String)> = vec![("model", self.model.clone()), ("x0", join(&self.x0))];
        let uses_grid = matches!(
            c,
            Command::Rate | Command::RateDiscrete | Command::SmallTime | Command::Converge | Command::Lmgf
        );
        if uses_grid {
            v.push(("x_grid", join_points(&self.x_grid)));
        }
        if c != Command::SmallTime {
            v.push(("T", self.t_end.to_string()));
        }
        if c != Command::Rate {
            v.push(("theta", self.theta.to_string()));
        }
        if matches!(
            c,
            Command::RateDiscrete | Command::SmallTime | Command::Simulate | Command::Tail | Command::Lmgf
        ) {
            v.push(("N", self.steps.to_string()));
        }
        if c == Command::Converge {
            v.push(("h_values", join(&self.h_values)));
            if let Some(h) = self.h_ref {
                v.push(("h_ref", h.to_string()));
            }
            if let Some(t) = self.order_target {
                v.push(("order_target", t.to_string()));
            }
            if let Some(t) = self.order_max {
                v.push(("order_max", t.to_string()));
            }
        }
        if matches!(c, Command::Rate | Command::Tail) {
            v.push(("path_n", self.path_steps.to_string()));
        }
        if matches!(c, Command::Simulate | Command::Tail | Command::Lmgf) {
            v.push(("epsilon_values", join(&self.epsilon_values)));
            v.push(("samples", self.samples.to_string()));
            v.push(("seed", self.seed.to_string()));
        }
        if c == Command::Tail {
            v.push(("delta", self.delta.to_string()));
        }
        if c == Command::Lmgf {
            v.push(("lambda_min", self.lambda.0.to_string()));
            v.push(("lambda_max", self.lambda.1.to_string()));
            v.push(("lambda_step", self.lambda.2.to_string()));
        }
        if !matches!(c, Command::Simulate | Command::Lmgf) {
            v.push(("multistart", self.multistart.to_string()));
        }
        v
    }

    /// Rebuilds a config from the `# key = value` header of a CSV written by
    /// this tool.
    pub fn from_header(text: &str) -> Result<RunConfig, Vec<String>> {
        let mut lines = text.lines().map_while(|l| l.strip_prefix("# "));
        let command = lines
            .next()
            .and_then(|l| l.strip_prefix("ldrate "))
            .and_then(|c| Command::from_name(c.trim()))
            .ok_or_else(|| vec!["header does not start with `# ldrate <command>`".to_string()])?;
        let mut raw = BTreeMap::new();
        for l in lines {
            if let Some((k, v)) = l.split_once(" = ") {
                raw.insert(k.to_string(), v.to_string());
            }
        }
        build(command, &raw, &BTreeMap::new())
    }
}

fn check_keys(map: &BTreeMap<String, String>, place: &str, errors: &mut Vec<String>) {
    for k in map.keys() {
        if !KEYS.contains(&k.as_str()) {
            errors.push(format!("unknown key `{k}` at {place}"));
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

fn join_points(points: &[Vec<f64>]) -> String {
    points.iter().map(|p| join(p)).collect::<Vec<_>>().join("; ")
}

/// Typed access to the raw key-value map that records every problem.
struct Reader<'a> {
    raw: &'a BTreeMap<String, String>,
    errors: Vec<String>,
    command: Command,
}

impl Reader<'_> {
    fn has(&self, key: &str) -> bool {
        self.raw.contains_key(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let s = self.raw.get(key)?;
        match s.trim().parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors.push(format!("field `{key}`: expected {what}, got `{s}`"));
                None
            }
        }
    }

    fn real(&mut self, key: &str) -> Option<f64> {
        let v: f64 = self.parse(key, "a number")?;
        if v.is_finite() {
            Some(v)
        } else {
            self.errors.push(format!("field `{key}`: must be finite, got {v}"));
            None
        }
    }

    fn count(&mut self, key: &str) -> Option<usize> {
        self.parse(key, "a nonnegative integer")
    }

    fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        let s = self.raw.get(key)?.clone();
        let mut out = Vec::new();
        for item in s.split([',', ';']).map(str::trim) {
            if item.is_empty() {
                continue;
            }
            match item.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => {
                    self.errors.push(format!("field `{key}`: `{item}` is not a finite number"));
                    return None;
                }
            }
        }
        Some(out)
    }

    /// Points separated by `;`, components by `,`. Without a `;` a
    /// one-dimensional model reads each comma-separated value as a point.
    fn points(&mut self, key: &str, dim: usize) -> Option<Vec<Vec<f64>>> {
        let s = self.raw.get(key)?.clone();
        let groups: Vec<&str> = if s.contains(';') || dim != 1 {
            s.split(';').collect()
        } else {
            s.split(',').collect()
        };
        let mut out = Vec::new();
        for g in groups {
            if g.trim().is_empty() {
                continue;
            }
            let mut p = Vec::new();
            for item in g.split(',').map(str::trim) {
                match item.parse::<f64>() {
                    Ok(v) if v.is_finite() => p.push(v),
                    _ => {
                        self.errors.push(format!("field `{key}`: `{item}` is not a finite number"));
                        return None;
                    }
                }
            }
            if p.len() != dim {
                self.errors.push(format!(
                    "field `{key}`: point `{}` has {} component(s), model dimension is {dim}",
                    g.trim(),
                    p.len()
                ));
                return None;
            }
            out.push(p);
        }
        Some(out)
    }

    fn missing(&mut self, key: &str) {
        self.errors.push(format!(
            "missing field `{key}` (required by `{}`)",
            self.command
        ));
    }

    fn fail(&mut self, msg: String) {
        self.errors.push(msg);
    }
}

fn resolve_model(
    r: &mut Reader<'_>,
    presets: &BTreeMap<String, BTreeMap<String, String>>,
) -> Option<(String, ModelEntry)> {
    let name = match r.raw.get("model") {
        Some(n) => n.trim().to_string(),
        None => {
            r.missing("model");
            return None;
        }
    };
    let given: Vec<&str> = MODEL_PARAM_KEYS.iter().copied().filter(|k| r.has(k)).collect();
    let canonical = if let Some(open) = name.find('(') {
        for k in &given {
            r.fail(format!("field `{k}` cannot be combined with the parameterized model `{name}`"));
        }
        let family = name[..open].trim();
        let inner = name[open + 1..].trim_end_matches(')');
        let params: Result<Vec<f64>, _> = inner.split(',').map(|p| p.trim().parse::<f64>()).collect();
        match params {
            Ok(p) if name.ends_with(')') => canonical_name(family, &p),
            _ => {
                r.fail(format!("field `model`: cannot parse `{name}`"));
                return None;
            }
        }
    } else {
        let (family, mut values) = if family_params(&name).is_some() {
            (name.clone(), BTreeMap::new())
        } else if let Some(p) = presets.get(&name) {
            let Some(family) = p.get("family").cloned() else {
                r.fail(format!("model preset `{name}` has no `family` key"));
                return None;
            };
            let mut values = BTreeMap::new();
            for (k, v) in p {
                if k == "family" {
                    continue;
                }
                if !MODEL_PARAM_KEYS.contains(&k.as_str()) {
                    r.fail(format!("model preset `{name}`: unknown parameter `{k}`"));
                    continue;
                }
                match v.trim().parse::<f64>() {
                    Ok(x) => {
                        values.insert(k.clone(), x);
                    }
                    Err(_) => r.fail(format!("model preset `{name}`: `{k}` is not a number")),
                }
            }
            (family, values)
        } else {
            r.fail(format!("field `model`: unknown model `{name}`"));
            return None;
        };
        let Some(names) = family_params(&family) else {
            r.fail(format!("field `model`: unknown model family `{family}`"));
            return None;
        };
        for k in &given {
            if let Some(v) = r.real(k) {
                values.insert(k.to_string(), v);
            }
        }
        for k in values.keys() {
            if !names.contains(&k.as_str()) {
                r.fail(format!("field `{k}` is not a parameter of model `{family}`"));
            }
        }
        let mut params = Vec::new();
        for k in names {
            match values.get(*k) {
                Some(v) => params.push(*v),
                None if family == "brownian" => {}
                None => r.fail(format!("missing field `{k}` (parameter of model `{family}`)")),
            }
        }
        canonical_name(&family, &params)
    };
    match builtin_model(&canonical) {
        Ok(entry) => Some((canonical, entry)),
        Err(e) => {
            r.fail(format!("field `model`: {e}"));
            None
        }
    }
}

fn canonical_name(family: &str, params: &[f64]) -> String {
    if params.is_empty() {
        family.to_string()
    } else {
        format!("{family}({})", join(params))
    }
}

/// Integer step count for `t_end / h`, if `h` divides it.
fn divide(t_end: f64, h: f64) -> Option<usize> {
    let n = (t_end / h).round();
    (h > 0.0 && n >= 1.0 && (n * h - t_end).abs() <= 1e-9 * t_end).then_some(n as usize)
}

fn build(
    command: Command,
    raw: &BTreeMap<String, String>,
    presets: &BTreeMap<String, BTreeMap<String, String>>,
) -> Result<RunConfig, Vec<String>> {
    use Command::*;
    let mut r = Reader {
        raw,
        errors: Vec::new(),
        command,
    };
    let mut cfg = RunConfig::defaults(command);
    let model = resolve_model(&mut r, presets);
    let dim = model.as_ref().map(|m| m.1.model.dim());
    let lipschitz = model.as_ref().map(|m| m.1.model.lipschitz());

    // x0
    match (r.list("x0"), dim) {
        (Some(x0), Some(d)) if x0.len() != d => {
            r.fail(format!("field `x0`: has {} component(s), model dimension is {d}", x0.len()))
        }
        (Some(x0), _) => cfg.x0 = x0,
        (None, _) if !r.has("x0") => r.missing("x0"),
        _ => {}
    }

    // horizon
    if command != SmallTime {
        if let Some(t) = r.real("T") {
            if t > 0.0 {
                cfg.t_end = t;
            } else {
                r.fail(format!("field `T`: must be positive, got {t}"));
            }
        }
    }

    if command != Rate {
        if let Some(theta) = r.real("theta") {
            if (0.0..=1.0).contains(&theta) {
                cfg.theta = theta;
            } else {
                r.fail(format!("field `theta`: theta ∈ [0,1] required, got {theta}"));
            }
        }
    }

    // evaluation points
    let needs_grid = matches!(command, Rate | RateDiscrete | SmallTime | Converge);
    if needs_grid || command == Lmgf {
        if let Some(d) = dim {
            let mut pts = Vec::new();
            let mut any = false;
            if r.has("x") {
                any = true;
                if let Some(p) = r.points("x", d) {
                    pts.extend(p);
                }
            }
            if r.has("x_grid") {
                any = true;
                if let Some(p) = r.points("x_grid", d) {
                    pts.extend(p);
                }
            }
            if needs_grid && !any {
                r.missing("x_grid` or `x");
            }
            cfg.x_grid = pts;
        }
    }

    // θ-grid
    let step_field = if r.has("h") && !r.has("N") { "h" } else { "N" };
    let uses_steps = matches!(command, RateDiscrete | SmallTime | Simulate | Tail | Lmgf);
    if uses_steps {
        let t_end = if command == SmallTime { 1.0 } else { cfg.t_end };
        let from_n = r.count("N");
        let from_h = r.real("h");
        if from_n == Some(0) {
            r.fail("field `N`: must be at least 1".to_string());
        }
        let from_h = from_h.and_then(|h| match divide(t_end, h) {
            Some(n) => Some(n),
            None => {
                r.fail(format!("field `h`: h = {h} is not T/N for an integer N (T = {t_end})"));
                None
            }
        });
        match (from_n.filter(|&n| n > 0), from_h) {
            (Some(n), Some(m)) if n != m => {
                r.fail(format!("fields `N` and `h` disagree: N = {n} but T/h = {m}"))
            }
            (Some(n), _) | (None, Some(n)) => cfg.steps = n,
            (None, None) if !r.has("N") && !r.has("h") => r.missing("N` or `h"),
            _ => {}
        }
    }

    let path_n = matches!(command, Rate | Tail).then(|| r.count("path_n")).flatten();
    if let Some(n) = path_n {
        if n == 0 {
            r.fail("field `path_n`: must be at least 1".to_string());
        } else {
            cfg.path_steps = n;
        }
    }
    if !matches!(command, Simulate | Lmgf) {
        if let Some(m) = r.count("multistart") {
            cfg.multistart = m;
        }
    }

    let h = cfg.t_end / cfg.steps as f64;
    match command {
        RateDiscrete => {
            if let Some(l) = lipschitz {
                let bound = if l > 0.0 { 0.5 / l } else { f64::INFINITY };
                if h > bound * (1.0 + 1e-12) {
                    r.fail(format!(
                        "field `{step_field}`: h = {h} violates h ≤ 1/(2L) = {bound} (L = {l})"
                    ));
                }
            }
        }
        SmallTime => cfg.t_end = 1.0,
        _ => {}
    }

    if matches!(command, Simulate | Tail | Lmgf) {
        let mut eps = r.list("epsilon_values").unwrap_or_default();
        if let Some(e) = r.real("epsilon") {
            eps.insert(0, e);
        }
        if eps.is_empty() {
            r.missing("epsilon");
        } else if command != Tail && eps.len() > 1 {
            r.fail(format!("field `epsilon`: `{command}` takes a single epsilon"));
        }
        for &e in &eps {
            if !(e > 0.0) {
                r.fail(format!("field `epsilon`: must be positive, got {e}"));
            }
        }
        cfg.epsilon_values = eps;
        if let Some(s) = r.count("samples") {
            if s == 0 {
                r.fail("field `samples`: must be at least 1".to_string());
            } else {
                cfg.samples = s;
            }
        }
        if let Some(s) = r.parse::<u64>("seed", "a 64-bit unsigned integer") {
            cfg.seed = s;
        }
        if let Some(l) = lipschitz {
            if h * l * cfg.theta >= 1.0 {
                r.fail(format!(
                    "field `theta`: h·L·θ = {} must be below 1 for the implicit solve",
                    h * l * cfg.theta
                ));
            }
        }
    }

    if command == Tail {
        match r.real("delta") {
            Some(d) if d > 0.0 => cfg.delta = d,
            Some(d) => r.fail(format!("field `delta`: must be positive, got {d}")),
            None if !r.has("delta") => r.missing("delta"),
            None => {}
        }
        if let Some(d) = dim.filter(|&d| d > 3) {
            r.fail(format!("field `model`: tail studies support dimensions 1 to 3, got {d}"));
        }
    }

    if command == Lmgf {
        let (mut lo, mut hi, mut st) = DEFAULT_LAMBDA;
        if let Some(v) = r.real("lambda_min") {
            lo = v;
        }
        if let Some(v) = r.real("lambda_max") {
            hi = v;
        }
        if let Some(v) = r.real("lambda_step") {
            st = v;
        }
        if !(st > 0.0 && hi > lo) {
            r.fail(format!(
                "fields `lambda_min`, `lambda_max`, `lambda_step`: need min < max and step > 0, got [{lo}, {hi}] step {st}"
            ));
        }
        cfg.lambda = (lo, hi, st);
        if let Some(d) = dim.filter(|&d| d > 2) {
            r.fail(format!("field `model`: λ-grids support dimensions 1 and 2, got {d}"));
        }
    }

    if command == Converge {
        match r.list("h_values") {
            Some(hs) if hs.is_empty() => r.fail("field `h_values`: empty".to_string()),
            Some(hs) => {
                if hs.windows(2).any(|w| !(w[1] < w[0])) {
                    r.fail("field `h_values`: must be strictly decreasing".to_string());
                }
                for &h in &hs {
                    if divide(cfg.t_end, h).is_none() {
                        r.fail(format!("field `h_values`: h = {h} is not T/N for an integer N"));
                    }
                    if let Some(l) = lipschitz {
                        let bound = if l > 0.0 { 0.5 / l } else { f64::INFINITY };
                        if h > bound * (1.0 + 1e-12) {
                            r.fail(format!(
                                "field `h_values`: h = {h} violates h ≤ 1/(2L) = {bound} (L = {l})"
                            ));
                        }
                    }
                }
                cfg.h_values = hs;
            }
            None if !r.has("h_values") => r.missing("h_values"),
            None => {}
        }
        let h_min = cfg.h_values.iter().copied().fold(f64::INFINITY, f64::min);
        match r.real("h_ref") {
            Some(h) => {
                if h_min.is_finite() && h > h_min / 8.0 * (1.0 + 1e-12) {
                    r.fail(format!("field `h_ref`: must be at most min(h_values)/8 = {}", h_min / 8.0));
                }
                if divide(cfg.t_end, h).is_none() {
                    r.fail(format!("field `h_ref`: h = {h} is not T/N for an integer N"));
                }
                cfg.h_ref = Some(h);
            }
            None => {
                let closed = model.as_ref().is_some_and(|m| m.1.exact_rate.is_some());
                if !closed && h_min.is_finite() {
                    cfg.h_ref = Some(h_min / 8.0);
                }
            }
        }
        cfg.order_target = r.real("order_target");
        cfg.order_max = r.real("order_max");
        if let (Some(a), Some(b)) = (cfg.order_target, cfg.order_max) {
            if a > b {
                r.fail(format!("fields `order_target`, `order_max`: {a} > {b}"));
            }
        }
    }

    if let Some(out) = raw.get("output") {
        cfg.output = Some(PathBuf::from(out));
    }
    if let Some((name, _)) = model {
        cfg.model = name;
    }
    if r.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(r.errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn family_flags_build_canonical_name() {
        let cfg = RunConfig::from_sources(
            Command::Converge,
            None,
            &raw(&[("model", "ou-additive"), ("a", "-1"), ("x0", "0"), ("x_grid", "-2, 1"), ("h_values", "0.25, 0.125")]),
        )
        .unwrap();
        assert_eq!(cfg.model, "ou-additive(-1)");
        assert_eq!(cfg.x_grid, vec![vec![-2.0], vec![1.0]]);
        assert_eq!(cfg.h_ref, None);
    }

    #[test]
    fn all_violations_are_reported() {
        let errs = RunConfig::from_sources(
            Command::RateDiscrete,
            None,
            &raw(&[("model", "ou-additive"), ("a", "-1"), ("theta", "1.5"), ("N", "1"), ("x0", "0")]),
        )
        .unwrap_err();
        assert!(errs.iter().any(|e| e.contains("theta ∈ [0,1]")), "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("h ≤ 1/(2L)")), "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("missing field `x_grid` or `x`")), "{errs:?}");
    }

    #[test]
    fn presets_from_file() {
        let ini = Ini::parse("[model.wobbly]\nfamily = scalar-sine\na = -1\nc = 0\nbase = 2\namp = 0.5\n").unwrap();
        let cfg = RunConfig::from_sources(
            Command::Rate,
            Some(&ini),
            &raw(&[("model", "wobbly"), ("x0", "0"), ("x", "1")]),
        )
        .unwrap();
        assert_eq!(cfg.model, "scalar-sine(-1, 0, 2, 0.5)");
        // flags override preset parameters
        let cfg = RunConfig::from_sources(
            Command::Rate,
            Some(&ini),
            &raw(&[("model", "wobbly"), ("amp", "1"), ("x0", "0"), ("x", "1")]),
        )
        .unwrap();
        assert_eq!(cfg.model, "scalar-sine(-1, 0, 2, 1)");
    }

    #[test]
    fn header_round_trip() {
        let cfg = RunConfig::from_sources(
            Command::Tail,
            None,
            &raw(&[
                ("model", "brownian(2)"),
                ("x0", "0, 0.1"),
                ("N", "64"),
                ("epsilon_values", "0.2, 0.1"),
                ("delta", "1"),
                ("seed", "18446744073709551615"),
            ]),
        )
        .unwrap();
        let mut text = format!("# ldrate {}\n", cfg.command);
        for (k, v) in cfg.header_pairs() {
            text.push_str(&format!("# {k} = {v}\n"));
        }
        assert_eq!(RunConfig::from_header(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_sections() {
        let ini = Ini::parse("colour = red\n[plot]\nx = 1\n").unwrap();
        let errs = RunConfig::from_sources(Command::Rate, Some(&ini), &raw(&[])).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("unknown key `colour`")));
        assert!(errs.iter().any(|e| e.contains("unknown config section [plot]")));
        assert!(errs.iter().any(|e| e.contains("missing field `model`")));
    }

    #[test]
    fn fine_reference_defaults_without_closed_form() {
        let cfg = RunConfig::from_sources(
            Command::Converge,
            None,
            &raw(&[("model", "mult-sine"), ("x0", "0"), ("x", "1"), ("h_values", "0.25, 0.125")]),
        )
        .unwrap();
        assert_eq!(cfg.h_ref, Some(0.125 / 8.0));
    }
}
