//! Portable text formats. All floats are written with Rust's shortest
//! round-trip formatting, so serialize → deserialize reproduces finite
//! values bit-exactly. All writes are atomic (temp file + rename).
//!
//! Formats:
//! * signal — one complex per line as `re,im`; 2D signals carry a leading
//!   `# shape2d=ROWSxCOLS` comment;
//! * measurements — one non-negative real per line;
//! * matrix — header `PRSAMP-MAT v1 M N kind`, then M rows of N entries,
//!   each `re:im` (binary matrices may use bare `0`/`1` tokens);
//! * config — `key=value` lines, `#` comments;
//! * trial record — `key=value` lines.

use crate::model::{
    ComplexSignal, InitSpec, MatrixKind, MeasurementMatrix, PriorSpec, SolverConfig, TrialRecord,
};
use crate::model::ChannelSpec;
use crate::{Error, Result};
use num_complex::Complex64;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Writes `bytes` to `path` atomically: temp file in the same directory,
/// then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let err = |source: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let name = format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    );
    let tmp = match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(d) => d.join(name),
        None => std::path::PathBuf::from(name),
    };
    {
        let mut f = fs::File::create(&tmp).map_err(err)?;
        f.write_all(bytes).map_err(err)?;
        f.sync_all().ok();
    }
    fs::rename(&tmp, path).map_err(err)
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn fmt_c(z: Complex64) -> String {
    format!("{},{}", z.re, z.im)
}

pub fn write_signal(path: &Path, signal: &ComplexSignal) -> Result<()> {
    let mut out = String::new();
    if let Some((r, c)) = signal.shape2d {
        out.push_str(&format!("# shape2d={r}x{c}\n"));
    }
    for z in &signal.values {
        out.push_str(&fmt_c(*z));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_signal(path: &Path) -> Result<ComplexSignal> {
    let text = read_to_string(path)?;
    let mut values = Vec::new();
    let mut shape2d = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(spec) = comment.strip_prefix("shape2d=") {
                shape2d = Some(parse_shape(spec).ok_or_else(|| {
                    parse_err(path, idx + 1, format!("bad shape2d `{spec}`"))
                })?);
            }
            continue;
        }
        let (re_s, im_s) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, idx + 1, "expected `re,im`"))?;
        let re: f64 = re_s
            .trim()
            .parse()
            .map_err(|_| parse_err(path, idx + 1, format!("bad real part `{re_s}`")))?;
        let im: f64 = im_s
            .trim()
            .parse()
            .map_err(|_| parse_err(path, idx + 1, format!("bad imaginary part `{im_s}`")))?;
        values.push(Complex64::new(re, im));
    }
    if values.is_empty() {
        return Err(parse_err(path, 1, "signal file has no entries"));
    }
    ComplexSignal::with_shape(values, shape2d)
}

pub fn parse_shape(spec: &str) -> Option<(usize, usize)> {
    let (r, c) = spec.split_once('x')?;
    let rows = r.trim().parse().ok()?;
    let cols = c.trim().parse().ok()?;
    if rows == 0 || cols == 0 {
        return None;
    }
    Some((rows, cols))
}

pub fn write_measurements(path: &Path, y: &[f64]) -> Result<()> {
    let mut out = String::new();
    for v in y {
        out.push_str(&format!("{v}\n"));
    }
    atomic_write(path, out.as_bytes())
}

/// Reads magnitudes, or intensities when `intensity` is set (square-rooted
/// on load; negative intensities are parse errors).
pub fn read_measurements(path: &Path, intensity: bool) -> Result<Vec<f64>> {
    let text = read_to_string(path)?;
    let mut y = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| parse_err(path, idx + 1, format!("bad measurement `{line}`")))?;
        if intensity {
            if v < 0.0 {
                return Err(parse_err(path, idx + 1, format!("negative intensity {v}")));
            }
            y.push(v.sqrt());
        } else {
            y.push(v);
        }
    }
    if y.is_empty() {
        return Err(parse_err(path, 1, "measurement file has no entries"));
    }
    Ok(y)
}

const MATRIX_MAGIC: &str = "PRSAMP-MAT";
const MATRIX_VERSION: &str = "v1";

pub fn write_matrix(path: &Path, matrix: &MeasurementMatrix) -> Result<()> {
    let m = matrix.rows();
    let n = matrix.cols();
    let mut out = String::new();
    out.push_str(&format!(
        "{MATRIX_MAGIC} {MATRIX_VERSION} {m} {n} {}\n",
        matrix.kind().name()
    ));
    let binary = matrix.kind() == MatrixKind::Binary01;
    for mu in 0..m {
        let row = matrix.row(mu);
        for (i, z) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            if binary {
                out.push(if z.re == 1.0 { '1' } else { '0' });
            } else {
                out.push_str(&format!("{}:{}", z.re, z.im));
            }
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_matrix(path: &Path) -> Result<MeasurementMatrix> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty matrix file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != MATRIX_MAGIC || fields[1] != MATRIX_VERSION {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{MATRIX_MAGIC} {MATRIX_VERSION} M N kind`"),
        ));
    }
    let m: usize = fields[2]
        .parse()
        .map_err(|_| parse_err(path, 1, format!("bad M `{}`", fields[2])))?;
    let n: usize = fields[3]
        .parse()
        .map_err(|_| parse_err(path, 1, format!("bad N `{}`", fields[3])))?;
    let kind = MatrixKind::parse(fields[4])
        .ok_or_else(|| parse_err(path, 1, format!("unknown matrix kind `{}`", fields[4])))?;
    let mut entries = Vec::with_capacity(m * n);
    let mut rows_seen = 0;
    for (idx, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut count = 0;
        for tok in line.split_whitespace() {
            let z = if let Some((re_s, im_s)) = tok.split_once(':') {
                let re: f64 = re_s
                    .parse()
                    .map_err(|_| parse_err(path, idx + 1, format!("bad entry `{tok}`")))?;
                let im: f64 = im_s
                    .parse()
                    .map_err(|_| parse_err(path, idx + 1, format!("bad entry `{tok}`")))?;
                Complex64::new(re, im)
            } else {
                let re: f64 = tok
                    .parse()
                    .map_err(|_| parse_err(path, idx + 1, format!("bad entry `{tok}`")))?;
                Complex64::new(re, 0.0)
            };
            entries.push(z);
            count += 1;
        }
        if count != n {
            return Err(parse_err(
                path,
                idx + 1,
                format!("row has {count} entries, expected {n}"),
            ));
        }
        rows_seen += 1;
    }
    if rows_seen != m {
        return Err(parse_err(
            path,
            1,
            format!("matrix has {rows_seen} rows, header said {m}"),
        ));
    }
    MeasurementMatrix::new(m, n, entries, kind)
}

/// Partial solver configuration parsed from a `key=value` file or CLI flags.
/// `apply` lays it over a preset; unset fields keep the preset's values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigPatch {
    pub alpha: Option<f64>,
    pub alpha2d: Option<f64>,
    pub shape2d: Option<(usize, usize)>,
    pub t_max: Option<usize>,
    pub epsilon: Option<f64>,
    pub v0: Option<f64>,
    pub restarts: Option<usize>,
    pub xv0: Option<f64>,
    pub seed: Option<u64>,
    pub clamp_vmin: Option<f64>,
    pub damp_output: Option<bool>,
    pub prior: Option<PriorSpec>,
    pub channel: Option<ChannelSpec>,
    pub x0: Option<InitSpec>,
}

impl ConfigPatch {
    pub fn apply(&self, config: &mut SolverConfig) {
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = self.alpha2d {
            config.alpha2d = v;
        }
        if let Some(v) = self.shape2d {
            config.shape2d = Some(v);
        }
        if let Some(v) = self.t_max {
            config.t_max = v;
        }
        if let Some(v) = self.epsilon {
            config.epsilon = v;
        }
        if let Some(v) = self.v0 {
            config.v0 = v;
        }
        if let Some(v) = self.restarts {
            config.restarts = v;
        }
        if let Some(v) = self.xv0 {
            config.xv0 = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.clamp_vmin {
            config.clamp_vmin = v;
        }
        if let Some(v) = self.damp_output {
            config.damp_output = v;
        }
        if let Some(v) = self.prior {
            config.input_prior = v;
        }
        if let Some(v) = self.channel {
            config.output_channel = v;
        }
        if let Some(v) = &self.x0 {
            config.x0 = v.clone();
        }
    }
}

pub fn parse_prior(spec: &str) -> Result<PriorSpec> {
    let bad = || Error::config(format!("bad prior `{spec}`; expected gaussian:MRE,MIM,SIGMA or binary:RHO"));
    let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
    match name {
        "gaussian" => {
            if args.is_empty() {
                return Ok(PriorSpec::Gaussian {
                    mean: Complex64::new(0.0, 0.0),
                    variance: 1.0,
                });
            }
            let parts: Vec<&str> = args.split(',').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            let mre: f64 = parts[0].parse().map_err(|_| bad())?;
            let mim: f64 = parts[1].parse().map_err(|_| bad())?;
            let sigma: f64 = parts[2].parse().map_err(|_| bad())?;
            Ok(PriorSpec::Gaussian {
                mean: Complex64::new(mre, mim),
                variance: sigma,
            })
        }
        "binary" => {
            let rho: f64 = args.parse().map_err(|_| bad())?;
            Ok(PriorSpec::Binary { rho })
        }
        _ => Err(bad()),
    }
}

pub fn prior_string(prior: &PriorSpec) -> String {
    match prior {
        PriorSpec::Gaussian { mean, variance } => {
            format!("gaussian:{},{},{}", mean.re, mean.im, variance)
        }
        PriorSpec::Binary { rho } => format!("binary:{rho}"),
    }
}

pub fn parse_channel(spec: &str) -> Result<ChannelSpec> {
    let bad = || Error::config(format!("bad channel `{spec}`; expected rician:DELTA or awgn:DELTA"));
    let (name, args) = spec.split_once(':').unwrap_or((spec, "0"));
    let delta: f64 = args.parse().map_err(|_| bad())?;
    match name {
        "rician" => Ok(ChannelSpec::RicianMagnitude { delta }),
        "awgn" => Ok(ChannelSpec::Awgn { delta }),
        _ => Err(bad()),
    }
}

pub fn channel_string(channel: &ChannelSpec) -> String {
    match channel {
        ChannelSpec::RicianMagnitude { delta } => format!("rician:{delta}"),
        ChannelSpec::Awgn { delta } => format!("awgn:{delta}"),
    }
}

pub fn parse_x0(spec: &str) -> Result<InitSpec> {
    let bad = || Error::config(format!("bad x0 `{spec}`; expected random or constant:RE,IM"));
    if spec == "random" {
        return Ok(InitSpec::Random);
    }
    if let Some(args) = spec.strip_prefix("constant:") {
        let (re_s, im_s) = args.split_once(',').ok_or_else(bad)?;
        let re: f64 = re_s.parse().map_err(|_| bad())?;
        let im: f64 = im_s.parse().map_err(|_| bad())?;
        return Ok(InitSpec::Constant(Complex64::new(re, im)));
    }
    Err(bad())
}

pub fn x0_string(x0: &InitSpec) -> String {
    match x0 {
        InitSpec::Random => "random".into(),
        InitSpec::Constant(c) => format!("constant:{},{}", c.re, c.im),
        InitSpec::Vector(_) => "vector".into(),
    }
}

/// Parses a `key=value` config file into a patch.
pub fn read_config(path: &Path) -> Result<ConfigPatch> {
    let text = read_to_string(path)?;
    let mut patch = ConfigPatch::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, idx + 1, "expected key=value"))?;
        let key = key.trim();
        let value = value.trim();
        let num = |p: &Path| parse_err(p, idx + 1, format!("bad value for {key}: `{value}`"));
        match key {
            "alpha" => patch.alpha = Some(value.parse().map_err(|_| num(path))?),
            "alpha2d" => patch.alpha2d = Some(value.parse().map_err(|_| num(path))?),
            "shape2d" => {
                patch.shape2d = Some(parse_shape(value).ok_or_else(|| num(path))?);
            }
            "t_max" => patch.t_max = Some(value.parse().map_err(|_| num(path))?),
            "epsilon" => patch.epsilon = Some(value.parse().map_err(|_| num(path))?),
            "v0" => patch.v0 = Some(value.parse().map_err(|_| num(path))?),
            "restarts" => patch.restarts = Some(value.parse().map_err(|_| num(path))?),
            "xv0" => patch.xv0 = Some(value.parse().map_err(|_| num(path))?),
            "seed" => patch.seed = Some(value.parse().map_err(|_| num(path))?),
            "clamp_vmin" => patch.clamp_vmin = Some(value.parse().map_err(|_| num(path))?),
            "damp_output" => patch.damp_output = Some(value.parse().map_err(|_| num(path))?),
            "prior" => patch.prior = Some(parse_prior(value)?),
            "channel" => patch.channel = Some(parse_channel(value)?),
            "x0" => patch.x0 = Some(parse_x0(value)?),
            _ => return Err(parse_err(path, idx + 1, format!("unknown key `{key}`"))),
        }
    }
    Ok(patch)
}

/// Full config dump in the same `key=value` format `read_config` accepts.
pub fn config_string(config: &SolverConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("alpha={}\n", config.alpha));
    out.push_str(&format!("alpha2d={}\n", config.alpha2d));
    if let Some((r, c)) = config.shape2d {
        out.push_str(&format!("shape2d={r}x{c}\n"));
    }
    out.push_str(&format!("t_max={}\n", config.t_max));
    out.push_str(&format!("epsilon={}\n", config.epsilon));
    out.push_str(&format!("v0={}\n", config.v0));
    out.push_str(&format!("restarts={}\n", config.restarts));
    out.push_str(&format!("xv0={}\n", config.xv0));
    out.push_str(&format!("seed={}\n", config.seed));
    out.push_str(&format!("clamp_vmin={}\n", config.clamp_vmin));
    out.push_str(&format!("damp_output={}\n", config.damp_output));
    out.push_str(&format!("prior={}\n", prior_string(&config.input_prior)));
    out.push_str(&format!("channel={}\n", channel_string(&config.output_channel)));
    out.push_str(&format!("x0={}\n", x0_string(&config.x0)));
    out
}

pub fn write_config(path: &Path, config: &SolverConfig) -> Result<()> {
    atomic_write(path, config_string(config).as_bytes())
}

/// Record dump as `key=value`. `include_timing = false` zeroes `wall_s` so
/// reruns produce identical files.
pub fn record_string(record: &TrialRecord, include_timing: bool) -> String {
    let mut out = String::new();
    out.push_str(&format!("converged={}\n", record.converged));
    out.push_str(&format!("iterations={}\n", record.iterations_used));
    out.push_str(&format!("nr={}\n", record.nr));
    if let Some(nmse) = record.nmse {
        out.push_str(&format!("nmse={nmse}\n"));
    }
    if let Some(corr) = record.correlation {
        out.push_str(&format!("correlation={corr}\n"));
    }
    out.push_str(&format!(
        "wall_s={}\n",
        if include_timing { record.wall_time } else { 0.0 }
    ));
    out.push_str(&format!("seed={}\n", record.seed));
    for line in config_string(&record.config).lines() {
        out.push_str(&format!("config.{line}\n"));
    }
    out
}

pub fn write_record(path: &Path, record: &TrialRecord, include_timing: bool) -> Result<()> {
    atomic_write(path, record_string(record, include_timing).as_bytes())
}
