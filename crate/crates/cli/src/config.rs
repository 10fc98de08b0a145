//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use gqfi_core::dynamics::Scheme;
use gqfi_core::models::{ModelName, ModelParams};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

type Parsed<T> = Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Parsed<T> {
    Err(ConfigError(msg.into()))
}

const KEYS: &[&str] = &[
    "model.name",
    "model.M",
    "model.omega0",
    "model.delta",
    "model.zeta",
    "model.omega",
    "model.K",
    "model.gamma",
    "model.E",
    "model.dphi",
    "integrator.dt",
    "integrator.t_max",
    "integrator.stride",
    "integrator.scheme",
    "sweep.M_list",
    "dephasing.dphi_list",
    "skin.L_list",
    "fock.cutoff",
    "fock.dt",
    "fock.eps",
    "fock.t",
    "output.prefix",
];

/// Raw key/value pairs, in file order, with duplicate and unknown keys rejected.
pub fn parse(text: &str) -> Parsed<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("line {}: expected 'key = value'", n + 1));
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return err(format!("line {}: unknown key '{k}'", n + 1));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return err(format!("line {}: duplicate key '{k}'", n + 1));
        }
    }
    Ok(out)
}

fn float(key: &str, v: &str) -> Parsed<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        Ok(_) => err(format!("{key}: value must be finite, got '{v}'")),
        Err(_) => err(format!("{key}: not a number: '{v}'")),
    }
}

fn count(key: &str, v: &str) -> Parsed<usize> {
    v.parse::<usize>().or_else(|_| err(format!("{key}: not a non-negative integer: '{v}'")))
}

/// `8, 10, 20..30, 32..60:4` with inclusive ranges.
pub fn usize_list(key: &str, v: &str) -> Parsed<Vec<usize>> {
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, rest)) = item.split_once("..") {
            let (b, step) = match rest.split_once(':') {
                Some((b, s)) => (b, count(key, s.trim())?),
                None => (rest, 1),
            };
            let (a, b) = (count(key, a.trim())?, count(key, b.trim())?);
            if step == 0 || b < a {
                return err(format!("{key}: bad range '{item}'"));
            }
            out.extend((a..=b).step_by(step));
        } else {
            out.push(count(key, item)?);
        }
    }
    Ok(out)
}

fn float_list(key: &str, v: &str) -> Parsed<Vec<f64>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| float(key, s)).collect()
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelName,
    pub modes: usize,
    pub params: ModelParams,
    pub dt: f64,
    pub t_max: f64,
    pub stride: usize,
    pub scheme: Scheme,
    pub m_list: Vec<usize>,
    pub dphi_list: Vec<f64>,
    pub l_list: Vec<usize>,
    pub fock_cutoff: usize,
    pub fock_dt: f64,
    pub fock_eps: f64,
    pub fock_t: f64,
    pub prefix: String,
}

impl RunConfig {
    pub fn resolve(kv: &BTreeMap<String, String>) -> Parsed<Self> {
        let get = |k: &str| kv.get(k).map(String::as_str);
        let model: ModelName = match get("model.name") {
            Some(s) => s.parse().map_err(|e: gqfi_core::GqfiError| ConfigError(format!("model.name: {e}")))?,
            None => ModelName::CavityLocal,
        };
        let mut p = ModelParams::defaults_for(model);
        for (key, slot) in [
            ("model.omega0", &mut p.omega0),
            ("model.delta", &mut p.delta),
            ("model.zeta", &mut p.zeta),
            ("model.omega", &mut p.omega),
            ("model.K", &mut p.k),
            ("model.gamma", &mut p.gamma),
            ("model.E", &mut p.drive_e),
            ("model.dphi", &mut p.dphi),
        ] {
            if let Some(v) = get(key) {
                *slot = float(key, v)?;
            }
        }
        let f = |k: &str, d: f64| get(k).map_or(Ok(d), |v| float(k, v));
        let n = |k: &str, d: usize| get(k).map_or(Ok(d), |v| count(k, v));
        let scheme = match get("integrator.scheme").unwrap_or("rk4") {
            "rk4" => Scheme::Rk4,
            "midpoint" => Scheme::Midpoint,
            s => return err(format!("integrator.scheme: expected rk4 or midpoint, got '{s}'")),
        };
        let cfg = RunConfig {
            model,
            modes: n("model.M", 4)?,
            params: p,
            dt: f("integrator.dt", 0.01)?,
            t_max: f("integrator.t_max", 100.0)?,
            stride: n("integrator.stride", 10)?,
            scheme,
            m_list: get("sweep.M_list").map_or(Ok(Vec::new()), |v| usize_list("sweep.M_list", v))?,
            dphi_list: get("dephasing.dphi_list").map_or(Ok(Vec::new()), |v| float_list("dephasing.dphi_list", v))?,
            l_list: get("skin.L_list").map_or(Ok(vec![10, 40]), |v| usize_list("skin.L_list", v))?,
            fock_cutoff: n("fock.cutoff", 30)?,
            fock_dt: f("fock.dt", 0.01)?,
            fock_eps: f("fock.eps", 1e-3)?,
            fock_t: f("fock.t", 10.0)?,
            prefix: get("output.prefix").unwrap_or("").to_string(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Parsed<()> {
        if self.modes == 0 {
            return err("model.M must be at least 1");
        }
        if !(self.dt > 0.0 && self.t_max >= 0.0 && self.fock_dt > 0.0 && self.fock_eps > 0.0 && self.fock_t >= 0.0) {
            return err("time steps and eps must be positive, times non-negative");
        }
        if self.stride == 0 || self.fock_cutoff == 0 {
            return err("integrator.stride and fock.cutoff must be at least 1");
        }
        if self.m_list.contains(&0) || self.l_list.contains(&0) {
            return err("mode counts and chain lengths must be at least 1");
        }
        if self.prefix.contains('/') {
            return err("output.prefix must not contain '/'");
        }
        Ok(())
    }

    /// Sweep list, which must be non-empty for sweep-style modes.
    pub fn sweep(&self) -> Parsed<&[usize]> {
        if self.m_list.is_empty() {
            return err("sweep.M_list is empty");
        }
        Ok(&self.m_list)
    }

    /// Header comment: artifact version, mode and every resolved key.
    pub fn header(&self, mode: &str) -> String {
        let p = &self.params;
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let scheme = match self.scheme {
            Scheme::Rk4 => "rk4",
            Scheme::Midpoint => "midpoint",
        };
        let dphis = self.dphi_list.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let rows: [(&str, String); 22] = [
            ("model.name", self.model.as_str().to_string()),
            ("model.M", self.modes.to_string()),
            ("model.omega0", p.omega0.to_string()),
            ("model.delta", p.delta.to_string()),
            ("model.zeta", p.zeta.to_string()),
            ("model.omega", p.omega.to_string()),
            ("model.K", p.k.to_string()),
            ("model.gamma", p.gamma.to_string()),
            ("model.E", p.drive_e.to_string()),
            ("model.dphi", p.dphi.to_string()),
            ("integrator.dt", self.dt.to_string()),
            ("integrator.t_max", self.t_max.to_string()),
            ("integrator.stride", self.stride.to_string()),
            ("integrator.scheme", scheme.to_string()),
            ("sweep.M_list", join(&self.m_list)),
            ("dephasing.dphi_list", dphis),
            ("skin.L_list", join(&self.l_list)),
            ("fock.cutoff", self.fock_cutoff.to_string()),
            ("fock.dt", self.fock_dt.to_string()),
            ("fock.eps", self.fock_eps.to_string()),
            ("fock.t", self.fock_t.to_string()),
            ("output.prefix", self.prefix.clone()),
        ];
        let mut s = format!("# gqfi {} mode={mode}\n", env!("CARGO_PKG_VERSION"));
        for (k, v) in rows {
            let _ = writeln!(s, "# {k} = {v}");
        }
        s
    }
}
