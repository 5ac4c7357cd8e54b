//! `key = value` sweep configuration with `start:stop:step` grids.

use std::fmt;

use thiserror::Error;

use micromaser::MaserParams;

/// Largest number of points accepted on a single grid.
pub const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("--set {arg}: {message}")]
    Override { arg: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    OrderScan,
    PotentialBranches,
    PhaseDiagram,
    ThermalProfile,
    OrderVsA,
    CorrelationScan,
    CorrelationCompare,
    TrappingScan,
    SumruleCheck,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::OrderScan,
        Command::PotentialBranches,
        Command::PhaseDiagram,
        Command::ThermalProfile,
        Command::OrderVsA,
        Command::CorrelationScan,
        Command::CorrelationCompare,
        Command::TrappingScan,
        Command::SumruleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::OrderScan => "order-scan",
            Command::PotentialBranches => "potential-branches",
            Command::PhaseDiagram => "phase-diagram",
            Command::ThermalProfile => "thermal-profile",
            Command::OrderVsA => "order-vs-a",
            Command::CorrelationScan => "correlation-scan",
            Command::CorrelationCompare => "correlation-compare",
            Command::TrappingScan => "trapping-scan",
            Command::SumruleCheck => "sumrule-check",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    /// The variable every run sweeps, and an optional second one.
    fn sweeps(self) -> (Var, Option<Var>) {
        match self {
            Command::OrderScan | Command::CorrelationScan | Command::TrappingScan => (Var::Theta, Some(Var::Flux)),
            Command::PhaseDiagram | Command::OrderVsA => (Var::A, None),
            _ => (Var::Theta, None),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A model parameter that can be fixed or swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    A,
    Nb,
    Delta,
    Theta,
    Flux,
}

impl Var {
    pub const ALL: [Var; 5] = [Var::A, Var::Nb, Var::Delta, Var::Theta, Var::Flux];

    pub fn key(self) -> &'static str {
        match self {
            Var::A => "a",
            Var::Nb => "nb",
            Var::Delta => "delta",
            Var::Theta => "theta",
            Var::Flux => "N",
        }
    }

    fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.key() == key)
    }

    fn default_value(self) -> Option<f64> {
        match self {
            Var::A => Some(1.0),
            Var::Nb => Some(0.15),
            Var::Delta => Some(0.0),
            Var::Theta => None,
            Var::Flux => Some(100.0),
        }
    }
}

/// Inclusive grid `start:stop:step`; the last point may overshoot `stop`
/// by less than half a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self, String> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err("grid bounds and step must be finite".into());
        }
        if !(step > 0.0) {
            return Err(format!("grid step must be positive, got {step}"));
        }
        if stop < start {
            return Err(format!("grid stop {stop} is below start {start}"));
        }
        let grid = Self { start, stop, step };
        if grid.count() > MAX_GRID_POINTS {
            return Err(format!("grid has more than {MAX_GRID_POINTS} points"));
        }
        Ok(grid)
    }

    pub fn count(&self) -> usize {
        ((self.stop - self.start) / self.step + 0.5).floor() as usize + 1
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count()).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Fixed(f64),
    Swept(Grid),
}

impl Value {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Value::Fixed(v) => vec![*v],
            Value::Swept(g) => g.points(),
        }
    }

    fn corners(&self) -> [f64; 2] {
        match self {
            Value::Fixed(v) => [*v, *v],
            Value::Swept(g) => [g.start, g.start + (g.count() - 1) as f64 * g.step],
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Fixed(v) => write!(f, "{v}"),
            Value::Swept(g) => write!(f, "{g}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Ndjson,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Ndjson => "ndjson",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub command: Command,
    pub a: Value,
    pub nb: Value,
    pub delta: Value,
    /// Absent only for commands that never read `θ`.
    pub theta: Option<Value>,
    pub flux: Value,
    pub output: Option<String>,
    pub format: Format,
}

impl SweepConfig {
    pub fn value(&self, var: Var) -> Option<Value> {
        match var {
            Var::A => Some(self.a),
            Var::Nb => Some(self.nb),
            Var::Delta => Some(self.delta),
            Var::Theta => self.theta,
            Var::Flux => Some(self.flux),
        }
    }

    /// Model parameters with every swept variable at its first grid point.
    pub fn base_params(&self) -> MaserParams {
        let first = |v: Option<Value>| v.map_or(0.0, |v| v.points()[0]);
        MaserParams {
            a: first(Some(self.a)),
            nb: first(Some(self.nb)),
            delta: first(Some(self.delta)),
            theta: first(self.theta),
            flux: first(Some(self.flux)),
        }
    }

    /// `key = value` lines that parse back to this configuration.
    pub fn to_lines(&self) -> Vec<String> {
        let mut lines = vec![format!("command = {}", self.command)];
        for var in Var::ALL {
            if let Some(v) = self.value(var) {
                lines.push(format!("{} = {v}", var.key()));
            }
        }
        if let Some(out) = &self.output {
            lines.push(format!("output = {out}"));
        }
        lines.push(format!("format = {}", self.format.name()));
        lines
    }

    /// Parses the `# key = value` lines of an emitted metadata block.
    pub fn from_metadata(text: &str) -> Result<Self, ConfigError> {
        let body: String = text.lines().filter_map(|l| l.strip_prefix("# ")).map(|l| format!("{l}\n")).collect();
        parse_config(&body)
    }
}

#[derive(Debug, Default)]
struct Builder {
    command: Option<Command>,
    values: Vec<(Var, Value)>,
    output: Option<String>,
    format: Option<Format>,
}

fn parse_number(text: &str) -> Result<f64, String> {
    let v: f64 = text.parse().map_err(|_| format!("malformed number `{text}`"))?;
    if !v.is_finite() {
        return Err(format!("non-finite number `{text}`"));
    }
    Ok(v)
}

fn parse_value(text: &str) -> Result<Value, String> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [v] => Ok(Value::Fixed(parse_number(v)?)),
        [start, stop, step] => {
            Ok(Value::Swept(Grid::new(parse_number(start)?, parse_number(stop)?, parse_number(step)?)?))
        }
        _ => Err(format!("expected a number or start:stop:step, got `{text}`")),
    }
}

impl Builder {
    fn is_set(&self, key: &str) -> bool {
        match key {
            "command" => self.command.is_some(),
            "output" => self.output.is_some(),
            "format" => self.format.is_some(),
            _ => Var::from_key(key).is_some_and(|var| self.values.iter().any(|(v, _)| *v == var)),
        }
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "command" => {
                self.command = Some(Command::from_name(value).ok_or_else(|| format!("unknown command `{value}`"))?);
            }
            "output" => {
                if value.is_empty() {
                    return Err("empty output path".into());
                }
                self.output = Some(value.to_string());
            }
            "format" => {
                self.format = Some(match value {
                    "csv" => Format::Csv,
                    "ndjson" => Format::Ndjson,
                    _ => return Err(format!("unknown format `{value}` (csv or ndjson)")),
                });
            }
            _ => {
                let var = Var::from_key(key).ok_or_else(|| format!("unknown key `{key}`"))?;
                let parsed = parse_value(value)?;
                self.values.retain(|(v, _)| *v != var);
                self.values.push((var, parsed));
            }
        }
        Ok(())
    }

    fn finish(self, end_line: usize) -> Result<SweepConfig, ConfigError> {
        let command =
            self.command.ok_or_else(|| ConfigError::Line { line: end_line, message: "missing `command`".into() })?;
        let explicit = |var: Var| self.values.iter().find(|(v, _)| *v == var).map(|(_, value)| *value);
        let resolve = |var: Var| explicit(var).or_else(|| var.default_value().map(Value::Fixed));
        let mut a = resolve(Var::A).expect("a has a default");
        if command == Command::PhaseDiagram && explicit(Var::A).is_none() {
            a = Value::Swept(Grid { start: 0.5, stop: 1.0, step: 0.002 });
        }
        let config = SweepConfig {
            command,
            a,
            nb: resolve(Var::Nb).expect("nb has a default"),
            delta: resolve(Var::Delta).expect("delta has a default"),
            theta: resolve(Var::Theta),
            flux: resolve(Var::Flux).expect("N has a default"),
            output: self.output,
            format: self.format.unwrap_or_default(),
        };
        validate(&config)?;
        Ok(config)
    }
}

fn validate(config: &SweepConfig) -> Result<(), ConfigError> {
    let command = config.command;
    let invalid = |msg: String| Err(ConfigError::Invalid(format!("{command}: {msg}")));
    let (primary, secondary) = command.sweeps();
    for var in Var::ALL {
        let swept = matches!(config.value(var), Some(Value::Swept(_)));
        if var == primary && !swept {
            return invalid(format!("`{}` must be a start:stop:step grid", var.key()));
        }
        if swept && var != primary && Some(var) != secondary {
            return invalid(format!("`{}` cannot be swept", var.key()));
        }
    }
    let needs_theta = !matches!(command, Command::PhaseDiagram);
    if needs_theta && config.theta.is_none() {
        return invalid("missing `theta`".into());
    }
    if command == Command::TrappingScan && config.nb != Value::Fixed(0.0) {
        return invalid("trapping needs `nb = 0`".into());
    }
    // Every corner of the swept box must be a valid parameter point.
    let corners = |v: Option<Value>| v.map_or([0.0; 2], |v| v.corners());
    for a in corners(Some(config.a)) {
        for theta in corners(config.theta) {
            for flux in corners(Some(config.flux)) {
                let (nb, delta) = (corners(Some(config.nb))[0], corners(Some(config.delta))[0]);
                if let Err(e) = MaserParams::new(a, nb, delta, theta, flux) {
                    return invalid(e.to_string());
                }
            }
        }
    }
    Ok(())
}

fn split_line(line: &str) -> Option<Result<(&str, &str), String>> {
    let body = line.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return None;
    }
    Some(match body.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => Err(format!("expected `key = value`, got `{body}`")),
    })
}

/// Parses a configuration file. Keys may appear once each.
pub fn parse_config(text: &str) -> Result<SweepConfig, ConfigError> {
    parse_with_overrides(text, &[])
}

/// Parses a configuration file, then applies `key=value` overrides in order.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<SweepConfig, ConfigError> {
    let mut builder = Builder::default();
    let mut lines = 0;
    for (i, line) in text.lines().enumerate() {
        lines = i + 1;
        let at = |message: String| ConfigError::Line { line: i + 1, message };
        let Some(kv) = split_line(line) else { continue };
        let (key, value) = kv.map_err(at)?;
        if builder.is_set(key) {
            return Err(at(format!("duplicate key `{key}`")));
        }
        builder.apply(key, value).map_err(at)?;
    }
    for arg in overrides {
        let fail = |message: String| ConfigError::Override { arg: arg.clone(), message };
        let (key, value) = match split_line(arg) {
            Some(kv) => kv.map_err(fail)?,
            None => return Err(fail("expected `key=value`".into())),
        };
        builder.apply(key, value).map_err(fail)?;
    }
    builder.finish(lines.max(1))
}
