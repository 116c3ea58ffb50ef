//! Batch front-end: flag and config-file parsing, job dispatch, JSON
//! reports, CSV traces, SVG convergence plots, and a content-addressed
//! result cache.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::fk::{epsilon_sweep, fk_det_general, ApproximationTrace, Verdict};
use crate::groupring::RingMatrix;
use crate::groups::GroupDescriptor;
use crate::invariants::{
    entropy_principal, l2_torsion, mahler_jensen, mahler_quadrature, parse_complex_file,
    two_term_complex, validate_complex, ChainComplex, Entropy, ExactEntropy, TorsionMethod,
};
use crate::parse::{parse_element, parse_ring_expr};
use crate::section::{assemble, Side};
use crate::spectral::eigs_sym;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_NONCONVERGED: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
    fn parse(message: impl Into<String>) -> Self {
        Self { code: EXIT_PARSE, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operation {
    Fkdet,
    Mahler,
    Entropy,
    Torsion,
    Spectrum,
    Selftest,
}

impl Operation {
    fn name(self) -> &'static str {
        match self {
            Operation::Fkdet => "fkdet",
            Operation::Mahler => "mahler",
            Operation::Entropy => "entropy",
            Operation::Torsion => "torsion",
            Operation::Spectrum => "spectrum",
            Operation::Selftest => "selftest",
        }
    }

    fn from_name(s: &str) -> Result<Self, CliError> {
        match s {
            "fkdet" => Ok(Operation::Fkdet),
            "mahler" => Ok(Operation::Mahler),
            "entropy" => Ok(Operation::Entropy),
            "torsion" => Ok(Operation::Torsion),
            "spectrum" => Ok(Operation::Spectrum),
            "selftest" => Ok(Operation::Selftest),
            other => Err(CliError::usage(format!("unknown operation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Svg,
}

impl OutputFormat {
    fn from_name(s: &str) -> Result<Self, CliError> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(CliError::usage(format!("unknown format `{other}`"))),
        }
    }
}

/// One batch job. Output locations (`out`, `cache_dir`, `format`) are not
/// part of the job identity.
#[derive(Debug, Clone)]
pub struct JobConfig {
    pub op: Operation,
    pub group: Option<String>,
    pub expr: Option<String>,
    pub complex_file: Option<PathBuf>,
    pub cap: u64,
    pub tol: f64,
    pub theta: Option<f64>,
    pub method: Option<String>,
    pub eps_sweep: Option<Vec<f64>>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub format: OutputFormat,
}

impl JobConfig {
    pub fn new(op: Operation) -> Self {
        Self {
            op,
            group: None,
            expr: None,
            complex_file: None,
            cap: 64,
            tol: 5e-3,
            theta: None,
            method: None,
            eps_sweep: None,
            seed: 0,
            out: None,
            cache_dir: None,
            format: OutputFormat::Json,
        }
    }

    /// Canonical content-addressed identity: sorted key=value lines over
    /// everything that can change the numbers, including the tool version
    /// and the complex file *content* (not its path).
    pub fn job_hash(&self) -> Result<String, CliError> {
        let mut lines = vec![
            format!("cap={}", self.cap),
            format!("expr={}", self.expr.as_deref().unwrap_or("-")),
            format!("group={}", self.group.as_deref().unwrap_or("-")),
            format!("op={}", self.op.name()),
            format!("seed={}", self.seed),
            format!("tol={:?}", self.tol),
            format!("version={}", env!("CARGO_PKG_VERSION")),
        ];
        lines.push(match self.theta {
            Some(t) => format!("theta={t:?}"),
            None => "theta=-".into(),
        });
        lines.push(format!("method={}", self.method.as_deref().unwrap_or("-")));
        lines.push(match &self.eps_sweep {
            Some(eps) => format!(
                "eps={}",
                eps.iter().map(|e| format!("{e:?}")).collect::<Vec<_>>().join(",")
            ),
            None => "eps=-".into(),
        });
        lines.push(match &self.complex_file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::usage(format!("cannot read {}: {e}", path.display()))
                })?;
                let mut h = Sha256::new();
                h.update(text.as_bytes());
                format!("complex={:x}", h.finalize())
            }
            None => "complex=-".into(),
        });
        lines.sort();
        let mut h = Sha256::new();
        h.update(lines.join("\n").as_bytes());
        Ok(format!("{:x}", h.finalize()))
    }

    /// Key=value config file mirroring the flags; `#` comments allowed.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        let mut op = None;
        let mut fields: Vec<(String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::parse(format!(
                    "{} line {}: expected key=value",
                    path.display(),
                    idx + 1
                )));
            };
            let (k, v) = (k.trim(), v.trim());
            if k == "op" {
                op = Some(Operation::from_name(v)?);
            } else {
                fields.push((k.to_string(), v.to_string()));
            }
        }
        let Some(op) = op else {
            return Err(CliError::usage(format!("{}: missing op=<operation>", path.display())));
        };
        let mut config = JobConfig::new(op);
        for (k, v) in fields {
            match k.as_str() {
                "group" => config.group = Some(v),
                "expr" => config.expr = Some(v),
                "complex_file" => config.complex_file = Some(PathBuf::from(v)),
                "cap" => {
                    config.cap = v
                        .parse()
                        .map_err(|_| CliError::usage(format!("bad cap `{v}`")))?
                }
                "tol" => {
                    config.tol = v
                        .parse()
                        .map_err(|_| CliError::usage(format!("bad tol `{v}`")))?
                }
                "theta" => {
                    config.theta = Some(
                        v.parse()
                            .map_err(|_| CliError::usage(format!("bad theta `{v}`")))?,
                    )
                }
                "method" => config.method = Some(v),
                "eps_sweep" => config.eps_sweep = Some(parse_eps_list(&v)?),
                "seed" => {
                    config.seed = v
                        .parse()
                        .map_err(|_| CliError::usage(format!("bad seed `{v}`")))?
                }
                "out" => config.out = Some(PathBuf::from(v)),
                "cache_dir" => config.cache_dir = Some(PathBuf::from(v)),
                "format" => config.format = OutputFormat::from_name(&v)?,
                other => {
                    return Err(CliError::usage(format!("unknown config key `{other}`")));
                }
            }
        }
        Ok(config)
    }
}

fn parse_eps_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("bad epsilon `{}`", s.trim())))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Report records
// ---------------------------------------------------------------------------

fn ser_f64<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&format!("{v}"))
    }
}

fn ser_opt_f64<S: serde::Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => ser_f64(x, s),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedValue {
    pub name: String,
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
    #[serde(serialize_with = "ser_opt_f64", skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl NamedValue {
    fn new(name: &str, value: f64) -> Self {
        Self { name: name.into(), value, error: None, note: None }
    }
    fn with_error(name: &str, value: f64, error: f64) -> Self {
        Self { name: name.into(), value, error: Some(error), note: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRecord {
    pub job_hash: String,
    pub tool_version: String,
    pub operation: String,
    pub group: String,
    pub verdict: String,
    pub values: Vec<NamedValue>,
    pub warnings: Vec<String>,
    pub flags: Vec<String>,
    /// CSV trace carried inline so cache replay is self-contained
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_csv: Option<String>,
    /// unix seconds; excluded from the determinism contract
    pub timestamp: u64,
}

impl ReportRecord {
    fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization") + "\n"
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9}")
    } else {
        format!("{v}")
    }
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

// ---------------------------------------------------------------------------
// SVG convergence plot
// ---------------------------------------------------------------------------

/// Standalone SVG of v_n against n with the running-infimum band. No
/// external assets.
pub fn emit_plot(trace: &ApproximationTrace) -> String {
    let (w, h) = (640.0, 400.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 20.0, 45.0);
    let pts = &trace.points;
    assert!(!pts.is_empty(), "plot needs a nonempty trace");
    let xs: Vec<f64> = pts.iter().map(|p| p.n as f64).collect();
    let vs: Vec<f64> = pts.iter().map(|p| p.v).collect();
    let mut infs = Vec::with_capacity(vs.len());
    let mut inf = f64::INFINITY;
    for &v in &vs {
        inf = inf.min(v);
        infs.push(inf);
    }
    let (x0, x1) = (xs[0], *xs.last().unwrap());
    let finite: Vec<f64> = vs.iter().chain(&infs).copied().filter(|v| v.is_finite()).collect();
    let (mut y0, mut y1) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !y0.is_finite() {
        y0 = -1.0;
        y1 = 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.06 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let px = |x: f64| {
        if x1 > x0 {
            ml + (x - x0) / (x1 - x0) * (w - ml - mr)
        } else {
            (ml + w - mr) / 2.0
        }
    };
    let py = |y: f64| mt + (y1 - y.clamp(y0, y1)) / (y1 - y0) * (h - mt - mb);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    // axes
    let _ = writeln!(
        svg,
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        h - mb,
        w - mr,
        h - mb
    );
    let _ = writeln!(svg, "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>", h - mb);
    for (frac, label) in [(0.0, y1), (0.5, (y0 + y1) / 2.0), (1.0, y0)] {
        let y = mt + frac * (h - mt - mb);
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\" font-family=\"monospace\">{}</text>",
            ml - 6.0,
            y + 4.0,
            fmt_f64(label)
        );
    }
    for p in pts {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\" font-family=\"monospace\">{}</text>",
            px(p.n as f64),
            h - mb + 16.0,
            p.n
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"monospace\">n</text>",
        (ml + w - mr) / 2.0,
        h - 8.0
    );
    // band between v_n and the running infimum
    if pts.len() > 1 {
        let mut path = String::from("M");
        for (x, v) in xs.iter().zip(&vs) {
            let _ = write!(path, " {} {}", px(*x), py(*v));
        }
        for (x, v) in xs.iter().zip(&infs).rev() {
            let _ = write!(path, " L {} {}", px(*x), py(*v));
        }
        let _ = writeln!(svg, "<path d=\"{path} Z\" fill=\"#cfe2ff\" stroke=\"none\"/>");
        let poly = |ys: &[f64], color: &str, dash: &str| {
            let body: Vec<String> =
                xs.iter().zip(ys).map(|(x, y)| format!("{},{}", px(*x), py(*y))).collect();
            format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>",
                body.join(" ")
            )
        };
        let _ = writeln!(svg, "{}", poly(&vs, "#1f4e9c", ""));
        let _ = writeln!(svg, "{}", poly(&infs, "#b02a2a", " stroke-dasharray=\"5,3\""));
    }
    for (x, v) in xs.iter().zip(&vs) {
        let _ = writeln!(
            svg,
            "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"#1f4e9c\"/>",
            px(*x),
            py(*v)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
struct CacheEnvelope {
    exit_code: i32,
    report_json: String,
}

/// Byte-identical replay on hit; a corrupted entry is a miss with a warning.
pub fn cache_lookup(cache_dir: &Path, hash: &str) -> Option<(String, i32)> {
    let path = cache_dir.join(format!("{hash}.json"));
    let bytes = std::fs::read_to_string(&path).ok()?;
    match serde_json::from_str::<CacheEnvelope>(&bytes) {
        Ok(env) => Some((env.report_json, env.exit_code)),
        Err(_) => {
            eprintln!("warning: corrupted cache entry {} ignored", path.display());
            None
        }
    }
}

fn cache_store(cache_dir: &Path, hash: &str, report_json: &str, exit_code: i32) {
    let envelope = CacheEnvelope { exit_code, report_json: report_json.to_string() };
    let Ok(body) = serde_json::to_string(&envelope) else { return };
    if std::fs::create_dir_all(cache_dir).is_err() {
        eprintln!("warning: cannot create cache dir {}", cache_dir.display());
        return;
    }
    // atomic: write a temp file in the same directory, then rename
    let tmp = cache_dir.join(format!(".{hash}.tmp"));
    let path = cache_dir.join(format!("{hash}.json"));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(body.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, &path)
    };
    if let Err(e) = write() {
        eprintln!("warning: cache write failed: {e}");
        let _ = std::fs::remove_file(&tmp);
    }
}

// ---------------------------------------------------------------------------
// Job execution
// ---------------------------------------------------------------------------

fn resolve_group(config: &JobConfig) -> Result<GroupDescriptor, CliError> {
    let Some(spec) = &config.group else {
        return Err(CliError::usage("--group is required for this operation"));
    };
    let mut g = GroupDescriptor::parse(spec).map_err(|e| CliError::parse(e.to_string()))?;
    if let Some(theta) = config.theta {
        g = g.with_theta(theta).map_err(|e| CliError::usage(e.to_string()))?;
    }
    Ok(g)
}

fn resolve_matrix(config: &JobConfig, g: &GroupDescriptor) -> Result<RingMatrix, CliError> {
    let Some(expr) = &config.expr else {
        return Err(CliError::usage("--expr is required for this operation"));
    };
    Ok(parse_ring_expr(expr, g).map_err(|e| CliError::parse(e.to_string()))?.into_matrix())
}

fn schedule_for(g: &GroupDescriptor, cap: u64) -> Result<Vec<u64>, CliError> {
    g.schedule(cap).map_err(|e| CliError::usage(e.to_string()))
}

struct JobOutput {
    record: ReportRecord,
    exit_code: i32,
}

fn verdict_parts(trace: &ApproximationTrace) -> (String, Vec<NamedValue>, Vec<String>, i32) {
    let mut warnings = Vec::new();
    match &trace.verdict {
        Verdict::Converged { value, est_error } => (
            "converged".into(),
            vec![
                NamedValue::with_error("log_det", *value, *est_error),
                NamedValue::new("det", value.exp()),
            ],
            warnings,
            EXIT_OK,
        ),
        Verdict::UpperBoundOnly { running_inf } => {
            warnings.push(
                "not converged at the schedule cap; the value is only a certified upper bound \
                 (consider raising --cap or running --eps-sweep)"
                    .into(),
            );
            (
                "upper-bound-only".into(),
                vec![NamedValue::new("log_det_upper_bound", *running_inf)],
                warnings,
                EXIT_NONCONVERGED,
            )
        }
        Verdict::KernelDetected => (
            "kernel-detected".into(),
            vec![NamedValue::new("log_det", f64::NEG_INFINITY), NamedValue::new("det", 0.0)],
            warnings,
            EXIT_OK,
        ),
    }
}

fn run_fkdet(config: &JobConfig) -> Result<JobOutput, CliError> {
    let g = resolve_group(config)?;
    let f = resolve_matrix(config, &g)?;
    let schedule = schedule_for(&g, config.cap)?;
    let trace =
        fk_det_general(&f, &schedule, config.tol).map_err(|e| CliError::parse(e.to_string()))?;
    let (verdict, mut values, mut warnings, exit_code) = verdict_parts(&trace);
    if let Some(eps) = &config.eps_sweep {
        // sweep det(f*f + eps) and halve, consistent with the general route
        let h = f.star().mat_mul(&f).map_err(|e| CliError::parse(e.to_string()))?;
        let sweep = epsilon_sweep(&h, eps, &schedule, 2.0 * config.tol)
            .map_err(|e| CliError::usage(e.to_string()))?;
        for (e, t) in &sweep {
            values.push(NamedValue::new(&format!("log_det_eps_{e:?}"), 0.5 * t.value()));
        }
        if sweep.len() >= 2 {
            let drop = 0.5
                * (sweep[sweep.len() - 2].1.value() - sweep[sweep.len() - 1].1.value());
            if drop.abs() > 10.0 * config.tol {
                warnings.push(
                    "epsilon sweep has not stabilized; determinant may vanish".into(),
                );
            }
        }
    }
    let record = ReportRecord {
        job_hash: String::new(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        operation: config.op.name().into(),
        group: g.to_string(),
        verdict,
        values,
        warnings,
        flags: Vec::new(),
        trace_csv: Some(trace.to_csv()),
        timestamp: 0,
    };
    Ok(JobOutput { record, exit_code })
}

fn run_mahler(config: &JobConfig) -> Result<JobOutput, CliError> {
    let g = resolve_group(config)?;
    let Some(expr) = &config.expr else {
        return Err(CliError::usage("--expr is required for mahler"));
    };
    let f = parse_element(expr, &g).map_err(|e| CliError::parse(e.to_string()))?;
    let method = config.method.as_deref().unwrap_or("both");
    let mut values = Vec::new();
    let mut verdict = "ok".to_string();
    match method {
        "jensen" | "both" if g.rank() == 1 => {
            let v = mahler_jensen(&f).map_err(|e| CliError::parse(e.to_string()))?;
            values.push(NamedValue::new("log_mahler_jensen", v));
            values.push(NamedValue::new("mahler_jensen", v.exp()));
        }
        _ => {}
    }
    if method == "quadrature" || method == "both" {
        let grid = config.cap.clamp(2, 4096) as usize;
        let (v, err) = mahler_quadrature(&f, grid, 5, config.seed)
            .map_err(|e| CliError::parse(e.to_string()))?;
        values.push(NamedValue::with_error("log_mahler_quadrature", v, err));
        if err > config.tol {
            verdict = "quadrature-error-above-tol".into();
        }
    }
    if values.is_empty() {
        return Err(CliError::usage(format!(
            "method `{method}` produced nothing (jensen needs a one-variable polynomial)"
        )));
    }
    let exit_code = if verdict == "ok" { EXIT_OK } else { EXIT_NONCONVERGED };
    let record = ReportRecord {
        job_hash: String::new(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        operation: config.op.name().into(),
        group: g.to_string(),
        verdict,
        values,
        warnings: Vec::new(),
        flags: Vec::new(),
        trace_csv: None,
        timestamp: 0,
    };
    Ok(JobOutput { record, exit_code })
}

fn run_entropy(config: &JobConfig) -> Result<JobOutput, CliError> {
    let g = resolve_group(config)?;
    let f = resolve_matrix(config, &g)?;
    let schedule = schedule_for(&g, config.cap)?;
    let report = entropy_principal(&f, &schedule, config.tol)
        .map_err(|e| CliError::parse(e.to_string()))?;
    let mut values = Vec::new();
    let mut warnings = Vec::new();
    let (verdict, exit_code) = match &report.entropy {
        Entropy::Finite { value } => {
            values.push(NamedValue::new("entropy", *value));
            let converged = report.trace.as_ref().map(|t| t.is_converged()).unwrap_or(true);
            if converged {
                ("finite".to_string(), EXIT_OK)
            } else {
                warnings.push("determinant route not converged at the schedule cap".into());
                ("finite-upper-bound".to_string(), EXIT_NONCONVERGED)
            }
        }
        Entropy::UpperBound { value } => {
            values.push(NamedValue::new("entropy_upper_bound", *value));
            warnings.push("rectangular presentation: value is only an upper bound".into());
            ("upper-bound".to_string(), EXIT_OK)
        }
        Entropy::Infinite => {
            values.push(NamedValue::new("entropy", f64::INFINITY));
            ("infinite".to_string(), EXIT_OK)
        }
    };
    if let Some(ExactEntropy::Exact { det, group_order, value }) = &report.exact {
        values.push(NamedValue {
            name: "exact_cokernel_log_order".into(),
            value: *value,
            error: None,
            note: Some(format!("|det| = {det}, |G| = {group_order}")),
        });
    }
    let record = ReportRecord {
        job_hash: String::new(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        operation: config.op.name().into(),
        group: g.to_string(),
        verdict,
        values,
        warnings,
        flags: Vec::new(),
        trace_csv: report.trace.as_ref().map(|t| t.to_csv()),
        timestamp: 0,
    };
    Ok(JobOutput { record, exit_code })
}

fn resolve_complex(config: &JobConfig) -> Result<ChainComplex, CliError> {
    match (&config.complex_file, &config.expr) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            parse_complex_file(&text).map_err(|e| CliError::parse(e.to_string()))
        }
        (None, Some(_)) => {
            let g = resolve_group(config)?;
            let f = resolve_matrix(config, &g)?;
            two_term_complex(&f).map_err(|e| CliError::parse(e.to_string()))
        }
        (Some(_), Some(_)) => {
            Err(CliError::usage("give either --complex-file or --expr, not both"))
        }
        (None, None) => Err(CliError::usage("torsion needs --complex-file or --expr")),
    }
}

fn run_torsion(config: &JobConfig) -> Result<JobOutput, CliError> {
    let c = resolve_complex(config)?;
    let g = c.group().clone();
    let schedule = schedule_for(&g, config.cap)?;
    let method = match config.method.as_deref().unwrap_or("both") {
        "pseudo" => TorsionMethod::Pseudo,
        "laplacian" => TorsionMethod::Laplacian,
        "both" => TorsionMethod::Both,
        other => return Err(CliError::usage(format!("unknown torsion method `{other}`"))),
    };
    let check = validate_complex(&c).map_err(|e| CliError::parse(e.to_string()))?;
    if !check.chain_ok {
        return Err(CliError::parse("boundary maps do not compose to zero"));
    }
    let mut values = vec![NamedValue::new("euler_characteristic", check.euler as f64)];
    let mut warnings = Vec::new();
    let (verdict, exit_code, flags) = match l2_torsion(&c, &schedule, config.tol, method) {
        Ok(report) => {
            values.push(NamedValue::with_error("rho", report.rho, report.rho_error));
            for l in &report.per_level {
                values.push(NamedValue {
                    name: format!("log_pdet_level_{}", l.level),
                    value: l.log_pdet,
                    error: Some(l.est_error),
                    note: Some(l.method.to_string()),
                });
            }
            if let Some(cc) = &report.cross_check {
                values.push(NamedValue::with_error("rho_laplacian", cc.rho, cc.est_error));
                values.push(NamedValue::new("method_discrepancy", cc.discrepancy));
            }
            let all_converged = report.per_level.iter().all(|l| l.converged);
            if all_converged {
                ("converged".to_string(), EXIT_OK, report.flags)
            } else {
                warnings.push("some levels did not converge; rho is an interval".into());
                ("nonconverged".to_string(), EXIT_NONCONVERGED, report.flags)
            }
        }
        Err(crate::invariants::InvariantError::NotWeaklyAcyclic { level, fraction }) => {
            warnings.push(format!(
                "level {level} Laplacian has kernel fraction {fraction}; torsion undefined"
            ));
            ("not-weakly-acyclic".to_string(), EXIT_NONCONVERGED, Vec::new())
        }
        Err(e) => return Err(CliError::parse(e.to_string())),
    };
    let record = ReportRecord {
        job_hash: String::new(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        operation: config.op.name().into(),
        group: g.to_string(),
        verdict,
        values,
        warnings,
        flags,
        trace_csv: None,
        timestamp: 0,
    };
    Ok(JobOutput { record, exit_code })
}

fn run_spectrum(config: &JobConfig) -> Result<JobOutput, CliError> {
    let g = resolve_group(config)?;
    let f = resolve_matrix(config, &g)?;
    let h = f.star().mat_mul(&f).map_err(|e| CliError::parse(e.to_string()))?;
    let set = g.folner_box(config.cap).map_err(|e| CliError::usage(e.to_string()))?;
    let section = assemble(&h, &set, Side::Left).map_err(|e| CliError::usage(e.to_string()))?;
    let summary = eigs_sym(&section).map_err(|e| CliError::parse(e.to_string()))?;
    let mut csv = String::from("index,eigenvalue\n");
    for (i, l) in summary.eigenvalues.iter().enumerate() {
        let _ = writeln!(csv, "{i},{l:?}");
    }
    let values = vec![
        NamedValue::new("size", summary.size as f64),
        NamedValue::new("lambda_min", summary.eigenvalues[0]),
        NamedValue::new("lambda_max", *summary.eigenvalues.last().unwrap()),
        NamedValue::new("kernel_dim", summary.kernel_dim as f64),
        NamedValue::new("kernel_fraction", summary.kernel_fraction()),
    ];
    let record = ReportRecord {
        job_hash: String::new(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        operation: config.op.name().into(),
        group: g.to_string(),
        verdict: "ok".into(),
        values,
        warnings: Vec::new(),
        flags: Vec::new(),
        trace_csv: Some(csv),
        timestamp: 0,
    };
    Ok(JobOutput { record, exit_code: EXIT_OK })
}

fn run_selftest(config: &JobConfig) -> Result<JobOutput, CliError> {
    let mut values = Vec::new();
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool, got: f64| {
        values.push(NamedValue {
            name: name.into(),
            value: got,
            error: None,
            note: Some(if ok { "ok" } else { "FAIL" }.into()),
        });
        if !ok {
            failures.push(name.to_string());
        }
    };

    let z = GroupDescriptor::lattice(1).expect("Z");
    let z2 = GroupDescriptor::lattice(2).expect("Z^2");

    // identity determinant is exactly 0 at every box
    let id = parse_ring_expr("1", &z2).unwrap().into_matrix();
    let tr = fk_det_general(&id, &z2.schedule(8).unwrap(), config.tol).unwrap();
    check("identity_log_det", tr.value() == 0.0, tr.value());

    // scalar: log |c| at every box
    let three = parse_ring_expr("3", &z).unwrap().into_matrix();
    let tr = fk_det_general(&three, &z.schedule(8).unwrap(), config.tol).unwrap();
    check("scalar_log_det", (tr.value() - 3f64.ln()).abs() < 1e-12, tr.value());

    // finite group: section route equals the exact cokernel order
    let z4 = GroupDescriptor::finite_cyclic(vec![4]).expect("Z/4");
    let f = parse_ring_expr("x-2", &z4).unwrap().into_matrix();
    let tr = fk_det_general(&f, &z4.schedule(4).unwrap(), config.tol).unwrap();
    check(
        "finite_group_log_det",
        (tr.value() - 15f64.ln() / 4.0).abs() < 1e-12,
        tr.value(),
    );

    // kernel detection on Z/2
    let z2f = GroupDescriptor::finite_cyclic(vec![2]).expect("Z/2");
    let f = parse_ring_expr("1+x", &z2f).unwrap().into_matrix();
    let report = entropy_principal(&f, &z2f.schedule(2).unwrap(), config.tol).unwrap();
    check("kernel_entropy_infinite", report.entropy == Entropy::Infinite, f64::INFINITY);

    // one-variable Mahler oracle
    let f = parse_element("x-2", &z).unwrap();
    let v = mahler_jensen(&f).unwrap();
    check("mahler_jensen_x_minus_2", (v - 2f64.ln()).abs() < 1e-12, v);

    // Koszul complex shape check
    let text = "group Z^2\n[[x-1],[y-1]]\n[[y-1, -(x-1)]]\n";
    let c = parse_complex_file(text).unwrap();
    let chk = validate_complex(&c).unwrap();
    check("koszul_euler", chk.euler == 0 && chk.chain_ok, chk.euler as f64);

    let verdict =
        if failures.is_empty() { "ok".to_string() } else { format!("failed: {}", failures.join(", ")) };
    let exit_code = if failures.is_empty() { EXIT_OK } else { EXIT_NONCONVERGED };
    let record = ReportRecord {
        job_hash: String::new(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        operation: "selftest".into(),
        group: "-".into(),
        verdict,
        values,
        warnings: Vec::new(),
        flags: Vec::new(),
        trace_csv: None,
        timestamp: 0,
    };
    Ok(JobOutput { record, exit_code })
}

/// Execute a job end to end: cache lookup, dispatch, report emission,
/// cache store. Returns the report JSON and the process exit code.
pub fn run(config: &JobConfig) -> Result<(String, i32), CliError> {
    if config.cap == 0 {
        return Err(CliError::usage("--cap must be at least 1"));
    }
    let hash = config.job_hash()?;
    if let Some(dir) = &config.cache_dir {
        if let Some((report_json, exit_code)) = cache_lookup(dir, &hash) {
            emit_outputs(config, &report_json)?;
            return Ok((report_json, exit_code));
        }
    }
    let mut output = match config.op {
        Operation::Fkdet => run_fkdet(config)?,
        Operation::Mahler => run_mahler(config)?,
        Operation::Entropy => run_entropy(config)?,
        Operation::Torsion => run_torsion(config)?,
        Operation::Spectrum => run_spectrum(config)?,
        Operation::Selftest => run_selftest(config)?,
    };
    output.record.job_hash = hash.clone();
    output.record.timestamp = now_unix();
    let report_json = output.record.to_json();
    if let Some(dir) = &config.cache_dir {
        cache_store(dir, &hash, &report_json, output.exit_code);
    }
    emit_outputs(config, &report_json)?;
    Ok((report_json, output.exit_code))
}

/// Write the requested artifact to `--out` (or stdout when absent) and the
/// aligned summary to stderr.
fn emit_outputs(config: &JobConfig, report_json: &str) -> Result<(), CliError> {
    let value: serde_json::Value = serde_json::from_str(report_json)
        .map_err(|e| CliError::parse(format!("internal report error: {e}")))?;
    let trace_csv = value.get("trace_csv").and_then(|v| v.as_str());
    let body = match config.format {
        OutputFormat::Json => report_json.to_string(),
        OutputFormat::Csv => trace_csv
            .map(|s| s.to_string())
            .ok_or_else(|| CliError::usage("this operation has no CSV trace"))?,
        OutputFormat::Svg => {
            let csv = trace_csv.ok_or_else(|| CliError::usage("this operation has no trace"))?;
            let trace = trace_from_csv(csv)
                .ok_or_else(|| CliError::usage("this operation's trace cannot be plotted"))?;
            emit_plot(&trace)
        }
    };
    // human summary
    eprint!("{}", summary_from_json(&value));
    match &config.out {
        Some(path) => {
            std::fs::write(path, body).map_err(|e| {
                CliError::usage(format!("cannot write {}: {e}", path.display()))
            })?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

/// Rebuild enough of a trace from its CSV to plot it (cache replays carry
/// only the CSV).
fn trace_from_csv(csv: &str) -> Option<ApproximationTrace> {
    use crate::fk::TracePoint;
    let mut lines = csv.lines();
    let header = lines.next()?;
    if !header.starts_with("n,size,logdet_per_site") {
        return None;
    }
    let mut points = Vec::new();
    let mut running_inf = f64::INFINITY;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 4 {
            return None;
        }
        let n: u64 = cols[0].parse().ok()?;
        let size: usize = cols[1].parse().ok()?;
        let v: f64 = cols[2].parse().ok()?;
        running_inf = running_inf.min(v);
        points.push(TracePoint {
            n,
            size,
            set_size: size,
            v,
            kernel_fraction: 0.0,
            wall: std::time::Duration::ZERO,
        });
    }
    if points.is_empty() {
        return None;
    }
    Some(ApproximationTrace {
        points,
        running_inf,
        verdict: Verdict::UpperBoundOnly { running_inf },
    })
}

fn summary_from_json(value: &serde_json::Value) -> String {
    let mut s = String::new();
    let mut row = |k: &str, v: &str| {
        let _ = writeln!(s, "{k:<12} {v}");
    };
    for key in ["operation", "group", "verdict"] {
        if let Some(v) = value.get(key).and_then(|v| v.as_str()) {
            row(key, v);
        }
    }
    if let Some(values) = value.get("values").and_then(|v| v.as_array()) {
        for nv in values {
            let name = nv.get("name").and_then(|v| v.as_str()).unwrap_or("?");
            let render = |v: &serde_json::Value| match v {
                serde_json::Value::Number(n) => {
                    fmt_f64(n.as_f64().unwrap_or(f64::NAN))
                }
                serde_json::Value::String(s) => s.clone(),
                _ => "?".into(),
            };
            let mut text = nv.get("value").map(render).unwrap_or_default();
            if let Some(err) = nv.get("error") {
                text = format!("{text} +/- {}", render(err));
            }
            if let Some(note) = nv.get("note").and_then(|v| v.as_str()) {
                text = format!("{text}  ({note})");
            }
            row(name, &text);
        }
    }
    for key in ["warnings", "flags"] {
        if let Some(items) = value.get(key).and_then(|v| v.as_array()) {
            for item in items {
                if let Some(text) = item.as_str() {
                    row(key.trim_end_matches('s'), text);
                }
            }
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Argument parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
struct JobArgs {
    /// Group spec: Z, Z^d, Z/n, "Z/2 x Z/3", H3
    #[arg(long)]
    group: Option<String>,
    /// Operator in the expression grammar, e.g. "x-2" or "[[x-1],[y-1]]"
    #[arg(long)]
    expr: Option<String>,
    /// Chain complex file (torsion)
    #[arg(long)]
    complex_file: Option<PathBuf>,
    /// Largest Folner box parameter
    #[arg(long, default_value_t = 64)]
    cap: u64,
    /// Convergence tolerance on consecutive per-site values
    #[arg(long, default_value_t = 5e-3)]
    tol: f64,
    /// Twist parameter for Z^2
    #[arg(long)]
    theta: Option<f64>,
    /// torsion: pseudo|laplacian|both; mahler: jensen|quadrature|both
    #[arg(long)]
    method: Option<String>,
    /// Strictly decreasing epsilon list for the regularized sweep
    #[arg(long, value_name = "E1,E2,...")]
    eps_sweep: Option<String>,
    /// Output path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cache directory for content-addressed replay
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Seed for the quasi-random quadrature fallback
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// json | csv | svg
    #[arg(long, default_value = "json")]
    format: String,
}

impl JobArgs {
    fn into_config(self, op: Operation) -> Result<JobConfig, CliError> {
        let mut config = JobConfig::new(op);
        config.group = self.group;
        config.expr = self.expr;
        config.complex_file = self.complex_file;
        config.cap = self.cap;
        config.tol = self.tol;
        config.theta = self.theta;
        config.method = self.method;
        config.eps_sweep = self.eps_sweep.as_deref().map(parse_eps_list).transpose()?;
        config.seed = self.seed;
        config.out = self.out;
        config.cache_dir = self.cache_dir;
        config.format = OutputFormat::from_name(&self.format)?;
        Ok(config)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fkdet",
    version,
    about = "Fuglede-Kadison determinants, Mahler measures, entropy, and L2-torsion \
             over amenable group rings via Folner finite sections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fuglede-Kadison determinant of a group-ring operator
    Fkdet(JobArgs),
    /// Logarithmic Mahler measure (root-finding and quadrature oracles)
    Mahler(JobArgs),
    /// Entropy of the principal algebraic action of the operator
    Entropy(JobArgs),
    /// L2-torsion of a finite free chain complex
    Torsion(JobArgs),
    /// Eigenvalue spectrum of one finite section of f*f
    Spectrum(JobArgs),
    /// Run the built-in example suite
    Selftest(JobArgs),
    /// Run a job described by a key=value config file
    Run { config: PathBuf },
}

/// Entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let config = match cli.command {
        Command::Fkdet(a) => a.into_config(Operation::Fkdet),
        Command::Mahler(a) => a.into_config(Operation::Mahler),
        Command::Entropy(a) => a.into_config(Operation::Entropy),
        Command::Torsion(a) => a.into_config(Operation::Torsion),
        Command::Spectrum(a) => a.into_config(Operation::Spectrum),
        Command::Selftest(a) => a.into_config(Operation::Selftest),
        Command::Run { config } => JobConfig::from_file(&config),
    };
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.code;
        }
    };
    match run(&config) {
        Ok((_, code)) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
