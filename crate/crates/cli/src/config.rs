//! Experiment configs: `[section]` headers and `key = value` lines.
//!
//! Keys before the first header belong to `[run]`. `#` starts a comment.
//! Every key a command does not read is rejected, and every resolved value
//! (given or defaulted) is echoed in resolution order.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::path::PathBuf;

use rmb_core::{
    Boundary, Complex64, DerivativeScheme, Formulation, Grid1D, KinkProblem, LaxForm, ModelParams, Sign,
    StepControl, DEFAULT_N_INF,
};
use rmb_core::ode::BlochVariant;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type Res<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Collide,
    MiScan,
    Ode,
    Bloch,
    Kink,
    LaxCheck,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Simulate,
        Command::Collide,
        Command::MiScan,
        Command::Ode,
        Command::Bloch,
        Command::Kink,
        Command::LaxCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Collide => "collide",
            Command::MiScan => "mi-scan",
            Command::Ode => "ode",
            Command::Bloch => "bloch",
            Command::Kink => "kink",
            Command::LaxCheck => "lax-check",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

/// Initial data for `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// Superposition of one or two sech pulses.
    Solitons(SolitonBlock),
    /// Stationary background with a cosine seed on `E`.
    Background {
        q0: f64,
        n0: f64,
        formulation: Formulation,
        amplitude: f64,
        /// The seed is `amplitude cos(2 pi mode x / L)`.
        mode: usize,
    },
    /// `E = a sech x`, `P = sinh(phi)`, `N = cosh(phi)`, `Q = 0` with
    /// `phi = b sech x`.
    SinhGordon { e_amplitude: f64, phi_amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolitonBlock {
    pub e0: Vec<f64>,
    pub x0: Vec<f64>,
    pub polarity: Vec<Sign>,
    pub n_inf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanBlock {
    pub pairs: Vec<(Sign, Sign)>,
    pub q0: Vec<f64>,
    /// `None` means `N0 = -sigma1` for each pair.
    pub n0: Option<Vec<f64>>,
    pub c: Vec<f64>,
    pub kappas: Vec<f64>,
    pub formulations: Vec<Formulation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeBlock {
    pub p: f64,
    pub n: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochBlock {
    pub variant: BlochVariant,
    pub f: f64,
    pub p: Complex64,
    pub omega: Complex64,
    pub omega0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaxData {
    /// Random smooth fields (seeded by `--seed`).
    Random,
    /// An exact sech pulse in the swapped orientation.
    Soliton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaxBlock {
    pub form: LaxForm,
    pub data: LaxData,
    /// `None` selects the default samples.
    pub lambdas: Option<Vec<Complex64>>,
    pub nx: usize,
    pub nt: usize,
    pub hx: f64,
    pub ht: f64,
    pub e0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CommandBlock {
    Simulate(InitialData),
    Collide(SolitonBlock),
    MiScan(ScanBlock),
    Ode(OdeBlock),
    Bloch(BlochBlock),
    Kink { problem: KinkProblem, output_stride: usize },
    LaxCheck(LaxBlock),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub label: String,
    pub output_dir: PathBuf,
    /// Absent for `bloch` and `kink`.
    pub params: Option<ModelParams>,
    /// Present for `simulate` and `collide`.
    pub grid: Option<Grid1D>,
    /// Present for `simulate`, `collide`, `ode` and `bloch`.
    pub step: Option<StepControl>,
    /// Spatial decimation of `trajectory.csv`.
    pub x_stride: usize,
    pub block: CommandBlock,
    /// `section.key = value` for every resolved entry.
    pub echo: Vec<String>,
}

#[derive(Debug, Clone)]
struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
    used: Cell<bool>,
}

/// Tokenised document with use tracking.
struct Doc {
    entries: Vec<Entry>,
    echo: RefCell<Vec<String>>,
}

fn strip_comment(s: &str) -> &str {
    match s.find('#') {
        Some(i) => &s[..i],
        None => s,
    }
}

fn tokenize(text: &str) -> Res<Vec<Entry>> {
    let mut section = String::from("run");
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = strip_comment(raw).trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, format!("malformed section header `{s}`")))?
                .trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(ConfigError::at(line, format!("bad section name `{name}`")));
            }
            section = name.to_string();
            continue;
        }
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{s}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::at(line, "empty key"));
        }
        if v.is_empty() {
            return Err(ConfigError::at(line, format!("empty value for `{k}`")));
        }
        if let Some(prev) = out.iter().find(|e| e.section == section && e.key == k) {
            return Err(ConfigError::at(
                line,
                format!("duplicate key `{section}.{k}` (first set on line {})", prev.line),
            ));
        }
        out.push(Entry {
            section: section.clone(),
            key: k.to_string(),
            value: v.to_string(),
            line,
            used: Cell::new(false),
        });
    }
    Ok(out)
}

fn parse_f64(e: &Entry) -> Res<f64> {
    let v: f64 = e
        .value
        .parse()
        .map_err(|_| ConfigError::at(e.line, format!("`{}`: expected a real number, got `{}`", e.key, e.value)))?;
    if !v.is_finite() {
        return Err(ConfigError::at(e.line, format!("`{}` must be finite", e.key)));
    }
    Ok(v)
}

fn parse_usize(e: &Entry) -> Res<usize> {
    e.value
        .parse()
        .map_err(|_| ConfigError::at(e.line, format!("`{}`: expected a non-negative integer, got `{}`", e.key, e.value)))
}

fn parse_sign_str(s: &str, e: &Entry) -> Res<Sign> {
    match s.trim() {
        "1" | "+1" | "+" => Ok(Sign::Plus),
        "-1" | "-" => Ok(Sign::Minus),
        other => Err(ConfigError::at(
            e.line,
            format!("`{}`: sign must be 1 or -1, got `{other}`", e.key),
        )),
    }
}

fn split_list(e: &Entry) -> Res<Vec<&str>> {
    let items: Vec<&str> = e.value.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(ConfigError::at(e.line, format!("`{}`: empty list item", e.key)));
    }
    Ok(items)
}

fn fmt_list<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

impl Doc {
    fn new(text: &str) -> Res<Doc> {
        Ok(Doc {
            entries: tokenize(text)?,
            echo: RefCell::new(Vec::new()),
        })
    }

    fn take(&self, section: &str, key: &str) -> Option<&Entry> {
        let e = self.entries.iter().find(|e| e.section == section && e.key == key)?;
        e.used.set(true);
        Some(e)
    }

    fn record(&self, section: &str, key: &str, shown: String) {
        self.echo.borrow_mut().push(format!("{section}.{key} = {shown}"));
    }

    fn f64_or(&self, section: &str, key: &str, default: f64) -> Res<f64> {
        let v = match self.take(section, key) {
            Some(e) => parse_f64(e)?,
            None => default,
        };
        self.record(section, key, format!("{v:?}"));
        Ok(v)
    }

    fn f64_checked(&self, section: &str, key: &str, default: f64, ok: impl Fn(f64) -> bool, what: &str) -> Res<f64> {
        let v = self.f64_or(section, key, default)?;
        if !ok(v) {
            let line = self.line_of(section, key);
            return Err(self.err(line, format!("`{key}` {what}, got {v:?}")));
        }
        Ok(v)
    }

    fn usize_or(&self, section: &str, key: &str, default: usize) -> Res<usize> {
        let v = match self.take(section, key) {
            Some(e) => parse_usize(e)?,
            None => default,
        };
        self.record(section, key, v.to_string());
        Ok(v)
    }

    fn positive_usize(&self, section: &str, key: &str, default: usize) -> Res<usize> {
        let v = self.usize_or(section, key, default)?;
        if v == 0 {
            return Err(self.err(self.line_of(section, key), format!("`{key}` must be >= 1")));
        }
        Ok(v)
    }

    fn sign(&self, section: &str, key: &str, default: Option<Sign>) -> Res<Sign> {
        let v = match (self.take(section, key), default) {
            (Some(e), _) => parse_sign_str(&e.value, e)?,
            (None, Some(d)) => d,
            (None, None) => return Err(ConfigError::general(format!("missing required key `{section}.{key}`"))),
        };
        self.record(section, key, v.to_string());
        Ok(v)
    }

    fn choice<T: Copy>(&self, section: &str, key: &str, options: &[(&str, T)], default: &str) -> Res<T> {
        let (shown, line) = match self.take(section, key) {
            Some(e) => (e.value.as_str(), Some(e.line)),
            None => (default, None),
        };
        let found = options.iter().find(|(name, _)| *name == shown);
        match found {
            Some((name, v)) => {
                self.record(section, key, name.to_string());
                Ok(*v)
            }
            None => {
                let names: Vec<&str> = options.iter().map(|o| o.0).collect();
                Err(self.err(line, format!("`{key}`: expected one of {}, got `{shown}`", names.join(", "))))
            }
        }
    }

    fn f64_list(&self, section: &str, key: &str) -> Res<Option<Vec<f64>>> {
        let Some(e) = self.take(section, key) else {
            return Ok(None);
        };
        let items = split_list(e)?;
        let mut out = Vec::with_capacity(items.len());
        for s in items {
            let v: f64 = s.parse().map_err(|_| {
                ConfigError::at(e.line, format!("`{key}`: expected a list of reals, got item `{s}`"))
            })?;
            if !v.is_finite() {
                return Err(ConfigError::at(e.line, format!("`{key}`: items must be finite")));
            }
            out.push(v);
        }
        self.record(section, key, fmt_list(&out, |v| format!("{v:?}")));
        Ok(Some(out))
    }

    fn f64_list_or(&self, section: &str, key: &str, default: Vec<f64>) -> Res<Vec<f64>> {
        match self.f64_list(section, key)? {
            Some(v) => Ok(v),
            None => {
                self.record(section, key, fmt_list(&default, |v| format!("{v:?}")));
                Ok(default)
            }
        }
    }

    fn sign_list_or(&self, section: &str, key: &str, default: Vec<Sign>) -> Res<Vec<Sign>> {
        let out = match self.take(section, key) {
            Some(e) => split_list(e)?
                .into_iter()
                .map(|s| parse_sign_str(s, e))
                .collect::<Res<Vec<_>>>()?,
            None => default,
        };
        self.record(section, key, fmt_list(&out, |s| s.to_string()));
        Ok(out)
    }

    fn string_or(&self, section: &str, key: &str, default: &str) -> String {
        let v = self.take(section, key).map(|e| e.value.clone()).unwrap_or_else(|| default.to_string());
        self.record(section, key, v.clone());
        v
    }

    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.section == section && e.key == key)
            .map(|e| e.line)
    }

    fn err(&self, line: Option<usize>, message: String) -> ConfigError {
        ConfigError { line, message }
    }

    fn finish(&self) -> Res<()> {
        match self.entries.iter().find(|e| !e.used.get()) {
            Some(e) => Err(ConfigError::at(
                e.line,
                format!("unknown key `{}` in section [{}]", e.key, e.section),
            )),
            None => Ok(()),
        }
    }
}

/// Attributes a core validation error to the line of the named key.
fn core_err(doc: &Doc, section: &str, e: rmb_core::RmbError) -> ConfigError {
    let line = match &e {
        rmb_core::RmbError::InvalidParameter { name, .. } => doc.line_of(section, name),
        _ => None,
    };
    ConfigError { line, message: e.to_string() }
}

fn read_params(doc: &Doc, command: Command) -> Res<ModelParams> {
    let s1 = doc.sign("params", "sigma1", None)?;
    let s2 = doc.sign("params", "sigma2", None)?;
    let omega0 = doc.f64_or("params", "omega0", 0.5)?;
    let alpha = doc.f64_or("params", "alpha", 1.0)?;
    let c_default = if command == Command::LaxCheck { 0.0 } else { 1.0 };
    let c = doc.f64_or("params", "c", c_default)?;
    ModelParams::new(s1, s2, omega0, alpha, c).map_err(|e| core_err(doc, "params", e))
}

fn read_grid(doc: &Doc, boundary_default: &str) -> Res<Grid1D> {
    let length = doc.f64_or("grid", "length", 100.0)?;
    let n = doc.usize_or("grid", "n_points", 2048)?;
    let boundary = doc.choice(
        "grid",
        "boundary",
        &[("periodic", Boundary::Periodic), ("vanishing", Boundary::Vanishing)],
        boundary_default,
    )?;
    Grid1D::new(length, n, boundary).map_err(|e| core_err(doc, "grid", e))
}

fn read_step(doc: &Doc, dt: f64, t_end: f64, stride: usize, with_scheme: bool) -> Res<StepControl> {
    let dt = doc.f64_checked("step", "dt", dt, |v| v > 0.0, "must be > 0")?;
    let t_end = doc.f64_checked("step", "t_end", t_end, |v| v > dt, "must exceed dt")?;
    let stride = doc.positive_usize("step", "snapshot_stride", stride)?;
    let scheme = if with_scheme {
        doc.choice(
            "step",
            "scheme",
            &[("spectral", DerivativeScheme::Spectral), ("central4", DerivativeScheme::Central4)],
            "spectral",
        )?
    } else {
        DerivativeScheme::Spectral
    };
    Ok(StepControl::new(dt, t_end, stride, scheme))
}

fn read_solitons(doc: &Doc, defaults: (&[f64], &[f64]), count: Option<usize>) -> Res<SolitonBlock> {
    let e0 = doc.f64_list_or("soliton", "e0", defaults.0.to_vec())?;
    let x0 = doc.f64_list_or("soliton", "x0", defaults.1.to_vec())?;
    let polarity = doc.sign_list_or("soliton", "polarity", vec![Sign::Plus; e0.len()])?;
    let n_inf = doc.f64_checked("soliton", "n_inf", DEFAULT_N_INF, |v| v != 0.0, "must be nonzero")?;
    let line = doc.line_of("soliton", "e0").or(doc.line_of("soliton", "x0"));
    if e0.len() != x0.len() || e0.len() != polarity.len() {
        return Err(doc.err(line, "`e0`, `x0` and `polarity` must have equal lengths".into()));
    }
    match count {
        Some(n) if e0.len() != n => {
            return Err(doc.err(line, format!("expected {n} pulses, got {}", e0.len())));
        }
        None if !(1..=2).contains(&e0.len()) => {
            return Err(doc.err(line, "simulate takes one or two pulses".into()));
        }
        _ => {}
    }
    if let Some(bad) = e0.iter().find(|&&v| v <= 0.0) {
        return Err(doc.err(doc.line_of("soliton", "e0"), format!("amplitudes must be > 0, got {bad:?}")));
    }
    Ok(SolitonBlock { e0, x0, polarity, n_inf })
}

const FORMULATIONS: [(&str, Formulation); 2] = [("rederived", Formulation::Rederived), ("paper", Formulation::Paper)];

fn read_scan(doc: &Doc, params: &ModelParams) -> Res<ScanBlock> {
    let s1 = doc.sign_list_or("scan", "sigma1", vec![params.sigma1])?;
    let s2 = doc.sign_list_or("scan", "sigma2", vec![params.sigma2])?;
    let pairs: Vec<(Sign, Sign)> = s1.iter().flat_map(|&a| s2.iter().map(move |&b| (a, b))).collect();
    let q0 = doc.f64_list_or("scan", "q0", vec![0.5])?;
    let n0 = doc.f64_list("scan", "n0")?;
    if n0.is_none() {
        doc.record("scan", "n0", "-sigma1".into());
    }
    if let Some(v) = &n0 {
        if v.contains(&0.0) {
            return Err(doc.err(doc.line_of("scan", "n0"), "`n0` entries must be nonzero".into()));
        }
    }
    let c = doc.f64_list_or("scan", "c", vec![params.c])?;
    if c.contains(&0.0) {
        return Err(doc.err(doc.line_of("scan", "c"), "`c` = 0 has no dispersion relation".into()));
    }
    let lo = doc.f64_checked("scan", "kappa_min", 0.0, |v| v >= 0.0, "must be >= 0")?;
    let hi = doc.f64_checked("scan", "kappa_max", 10.0 * params.omega0, |v| v > lo, "must exceed kappa_min")?;
    let n = doc.usize_or("scan", "kappa_points", 512)?;
    if n < 2 {
        return Err(doc.err(doc.line_of("scan", "kappa_points"), "`kappa_points` must be >= 2".into()));
    }
    let mode = doc.choice(
        "scan",
        "mode",
        &[("rederived", Some(Formulation::Rederived)), ("paper", Some(Formulation::Paper)), ("both", None)],
        "rederived",
    )?;
    let formulations = match mode {
        Some(f) => vec![f],
        None => FORMULATIONS.iter().map(|f| f.1).collect(),
    };
    Ok(ScanBlock {
        pairs,
        q0,
        n0,
        c,
        kappas: rmb_core::linspace(lo, hi, n),
        formulations,
    })
}

fn read_lax(doc: &Doc) -> Res<LaxBlock> {
    let form = doc.choice(
        "lax",
        "form",
        &[("consistent", LaxForm::Consistent), ("printed", LaxForm::Printed)],
        "consistent",
    )?;
    let data = doc.choice("lax", "data", &[("random", LaxData::Random), ("soliton", LaxData::Soliton)], "random")?;
    let re = doc.f64_list("lax", "lambda_re")?;
    let im = doc.f64_list("lax", "lambda_im")?;
    let lambdas = match (re, im) {
        (None, None) => {
            doc.record("lax", "lambda", "default".into());
            None
        }
        (Some(re), Some(im)) if re.len() == im.len() => {
            Some(re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect())
        }
        _ => {
            let line = doc.line_of("lax", "lambda_re").or(doc.line_of("lax", "lambda_im"));
            return Err(doc.err(line, "`lambda_re` and `lambda_im` must both be given with equal lengths".into()));
        }
    };
    let nx = doc.usize_or("lax", "nx", 24)?;
    let nt = doc.usize_or("lax", "nt", 24)?;
    let hx = doc.f64_checked("lax", "hx", 0.05, |v| v > 0.0, "must be > 0")?;
    let ht = doc.f64_checked("lax", "ht", 0.05, |v| v > 0.0, "must be > 0")?;
    let e0 = doc.f64_checked("lax", "e0", 1.2, |v| v > 0.0, "must be > 0")?;
    Ok(LaxBlock {
        form,
        data,
        lambdas,
        nx,
        nt,
        hx,
        ht,
        e0,
    })
}

fn read_kink(doc: &Doc) -> Res<CommandBlock> {
    let d = KinkProblem::default();
    let problem = KinkProblem {
        quartic_coeff: doc.f64_or("kink", "quartic_coeff", d.quartic_coeff)?,
        quadratic_coeff: doc.f64_or("kink", "quadratic_coeff", d.quadratic_coeff)?,
        forcing: doc.f64_or("kink", "forcing", d.forcing)?,
        half_width: doc.f64_or("kink", "half_width", d.half_width)?,
        n_points: doc.usize_or("kink", "n_points", d.n_points)?,
        tol: doc.f64_or("kink", "tol", d.tol)?,
        max_iter: doc.usize_or("kink", "max_iter", d.max_iter)?,
    };
    let output_stride = doc.positive_usize("kink", "output_stride", 10)?;
    Ok(CommandBlock::Kink { problem, output_stride })
}

fn read_simulate(doc: &Doc) -> Res<InitialData> {
    let kind = doc.choice(
        "initial",
        "kind",
        &[("soliton", 0u8), ("background", 1), ("sinh_gordon", 2)],
        "soliton",
    )?;
    Ok(match kind {
        0 => InitialData::Solitons(read_solitons(doc, (&[1.0], &[0.0]), None)?),
        1 => InitialData::Background {
            q0: doc.f64_or("initial", "q0", 0.5)?,
            n0: doc.f64_checked("initial", "n0", -1.0, |v| v != 0.0, "must be nonzero")?,
            formulation: doc.choice("initial", "formulation", &FORMULATIONS, "rederived")?,
            amplitude: doc.f64_or("initial", "amplitude", 1e-6)?,
            mode: doc.usize_or("initial", "mode", 1)?,
        },
        _ => InitialData::SinhGordon {
            e_amplitude: doc.f64_or("initial", "e_amplitude", 0.5)?,
            phi_amplitude: doc.f64_or("initial", "phi_amplitude", 0.8)?,
        },
    })
}

/// Parses and validates a config, resolving every default.
pub fn parse_config(text: &str) -> Res<RunConfig> {
    let doc = Doc::new(text)?;
    let cmd_entry = doc
        .take("run", "command")
        .ok_or_else(|| ConfigError::general("missing command"))?;
    let command = Command::parse(&cmd_entry.value).ok_or_else(|| {
        let names: Vec<&str> = Command::ALL.iter().map(|c| c.as_str()).collect();
        ConfigError::at(
            cmd_entry.line,
            format!("unknown command `{}` (expected one of {})", cmd_entry.value, names.join(", ")),
        )
    })?;
    doc.record("run", "command", command.as_str().into());
    let label = doc.string_or("run", "label", command.as_str());
    let output_dir = PathBuf::from(doc.string_or("run", "output_dir", &format!("out/{label}")));

    let params = match command {
        Command::Bloch | Command::Kink => None,
        _ => Some(read_params(&doc, command)?),
    };
    let pde = matches!(command, Command::Simulate | Command::Collide);
    let grid = if pde {
        let default = if command == Command::Collide { "vanishing" } else { "periodic" };
        Some(read_grid(&doc, default)?)
    } else {
        None
    };
    let step = match command {
        Command::Simulate | Command::Collide => Some(read_step(&doc, 5e-4, 20.0, 2000, true)?),
        Command::Ode => Some(read_step(&doc, 1e-3, 100.0, 100, false)?),
        Command::Bloch => Some(read_step(&doc, 1e-3, 50.0, 100, false)?),
        _ => None,
    };
    let x_stride = if pde { doc.positive_usize("output", "x_stride", 1)? } else { 1 };

    let block = match command {
        Command::Simulate => CommandBlock::Simulate(read_simulate(&doc)?),
        Command::Collide => CommandBlock::Collide(read_solitons(&doc, (&[1.0, 2.5], &[20.0, -4.0]), Some(2))?),
        Command::MiScan => CommandBlock::MiScan(read_scan(&doc, params.as_ref().expect("params read"))?),
        Command::Ode => CommandBlock::Ode(OdeBlock {
            p: doc.f64_or("ode", "p", 0.1)?,
            n: doc.f64_or("ode", "n", -1.0)?,
            q: doc.f64_or("ode", "q", 0.2)?,
        }),
        Command::Bloch => {
            let variant = doc.choice("bloch", "variant", &[("sbe", BlochVariant::Sbe), ("hbe", BlochVariant::Hbe)], "sbe")?;
            let f = doc.f64_or("bloch", "f", 0.0)?;
            let p = Complex64::new(doc.f64_or("bloch", "p_re", 0.3)?, doc.f64_or("bloch", "p_im", 0.0)?);
            let omega = Complex64::new(doc.f64_or("bloch", "omega_re", 0.3)?, doc.f64_or("bloch", "omega_im", 0.0)?);
            let omega0 = doc.f64_or("bloch", "omega0", 0.5)?;
            CommandBlock::Bloch(BlochBlock {
                variant,
                f,
                p,
                omega,
                omega0,
            })
        }
        Command::Kink => read_kink(&doc)?,
        Command::LaxCheck => CommandBlock::LaxCheck(read_lax(&doc)?),
    };
    doc.finish()?;

    if let (Some(p), Some(g), Some(s)) = (params.as_ref(), grid.as_ref(), step.as_ref()) {
        s.validate(p, g).map_err(|e| core_err(&doc, "step", e))?;
    }
    let echo = doc.echo.into_inner();
    Ok(RunConfig {
        command,
        label,
        output_dir,
        params,
        grid,
        step,
        x_stride,
        block,
        echo,
    })
}
