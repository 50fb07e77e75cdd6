//! Run configuration: a `key = value` text file with `#` comments.
//!
//! Every key is optional except `frames_dir` when `stimulus = frames`.
//! Lists are comma separated. Relative paths resolve against the directory
//! holding the config file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    CellAxis, DEFAULT_BIN_WIDTH, DEFAULT_CELL_HALF_WIDTH, DEFAULT_FLOOR_FRACTION,
    DEFAULT_L_CENTERS, DEFAULT_MU_CENTERS,
};
use crate::circuit::{CircuitError, PixelParams};
use crate::simulator::{SimConfig, SimError, SimMode, DEFAULT_ORACLE_STEP};
use crate::stimulus::RampStimulus;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{source_name}:{line}: {message}")]
pub struct ConfigError {
    pub source_name: String,
    /// 1-based; 0 when the problem is not tied to one line.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RampGrid {
    pub mu: Vec<f64>,
    pub l: Vec<f64>,
    /// Each cell's ramp sweeps `l (1 +- span)`.
    pub span: f64,
    pub pixels_per_cell: u32,
}

impl RampGrid {
    /// `(mu, l, ramp)` for every cell in row-major `(mu, l)` order.
    pub fn cells(&self) -> Vec<(f64, f64, RampStimulus)> {
        let mut out = Vec::with_capacity(self.mu.len() * self.l.len());
        for &mu in &self.mu {
            for &l in &self.l {
                // Values are validated on load.
                if let Ok(r) = RampStimulus::centered(l, mu, self.span) {
                    out.push((mu, l, r));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSource {
    pub dir: PathBuf,
    pub interpolation_factor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StimulusSpec {
    Ramps(RampGrid),
    Frames(FrameSource),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisGrid {
    pub mu_centers: Vec<f64>,
    pub l_centers: Vec<f64>,
    pub mu_half_width: f64,
    pub l_half_width: f64,
    pub bin_width: f64,
    pub floor_fraction: f64,
}

impl Default for AnalysisGrid {
    fn default() -> Self {
        Self {
            mu_centers: DEFAULT_MU_CENTERS.to_vec(),
            l_centers: DEFAULT_L_CENTERS.to_vec(),
            mu_half_width: DEFAULT_CELL_HALF_WIDTH,
            l_half_width: DEFAULT_CELL_HALF_WIDTH,
            bin_width: DEFAULT_BIN_WIDTH,
            floor_fraction: DEFAULT_FLOOR_FRACTION,
        }
    }
}

impl AnalysisGrid {
    pub fn mu_axis(&self) -> CellAxis {
        CellAxis::from_centers(&self.mu_centers, self.mu_half_width).expect("validated on load")
    }

    pub fn l_axis(&self) -> CellAxis {
        CellAxis::from_centers(&self.l_centers, self.l_half_width).expect("validated on load")
    }
}

/// Log-spaced current steps checked by the `oracle` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleGrid {
    pub di_min: f64,
    pub di_max: f64,
    pub points: usize,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self {
            di_min: 1e-11,
            di_max: 1e-7,
            points: 20,
        }
    }
}

impl OracleGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.di_min];
        }
        let (a, b) = (self.di_min.ln(), self.di_max.ln());
        (0..self.points)
            .map(|i| (a + (b - a) * i as f64 / (self.points - 1) as f64).exp())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub stimulus: StimulusSpec,
    pub analysis: AnalysisGrid,
    pub output_dir: PathBuf,
    pub oracle: OracleGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            stimulus: StimulusSpec::Ramps(RampGrid {
                mu: DEFAULT_MU_CENTERS.to_vec(),
                l: DEFAULT_L_CENTERS.to_vec(),
                span: DEFAULT_CELL_HALF_WIDTH,
                pixels_per_cell: 1000,
            }),
            analysis: AnalysisGrid::default(),
            output_dir: PathBuf::from("out"),
            oracle: OracleGrid::default(),
        }
    }
}

const KEYS: &[&str] = &[
    "mode",
    "theta_on",
    "theta_off",
    "gain_diff",
    "kappa_sf",
    "kappa_fb",
    "v_thermal",
    "gain_cascode",
    "c_junction",
    "k_photo",
    "delta_q_e",
    "r_shunt",
    "r_series",
    "k_delay",
    "noise_sigma",
    "rng_seed",
    "time_step_oracle",
    "stimulus",
    "ramp_mu",
    "ramp_l",
    "ramp_span",
    "pixels_per_cell",
    "frames_dir",
    "interpolation_factor",
    "analysis_mu",
    "analysis_l",
    "mu_half_width",
    "l_half_width",
    "bin_width",
    "floor_fraction",
    "output_dir",
    "oracle_di_min",
    "oracle_di_max",
    "oracle_points",
];

struct Entries<'a> {
    source_name: &'a str,
    map: BTreeMap<&'static str, (String, usize)>,
}

impl Entries<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> ConfigError {
        ConfigError {
            source_name: self.source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.map.get(key).map_or(0, |(_, l)| *l)
    }

    fn parse<T: std::str::FromStr>(&self, key: &'static str, default: T) -> Result<T, ConfigError> {
        match self.map.get(key) {
            None => Ok(default),
            Some((v, line)) => v
                .parse()
                .map_err(|_| self.err(*line, format!("{key}: cannot parse '{v}'"))),
        }
    }

    fn list(&self, key: &'static str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.map.get(key) {
            None => Ok(default.to_vec()),
            Some((v, line)) => v
                .split(',')
                .map(|item| {
                    item.trim().parse::<f64>().map_err(|_| {
                        self.err(
                            *line,
                            format!("{key}: cannot parse list item '{}'", item.trim()),
                        )
                    })
                })
                .collect(),
        }
    }

    fn raw(&self, key: &str) -> Option<&(String, usize)> {
        self.map.get(key)
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| ConfigError {
            source_name: name.clone(),
            line: 0,
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse_str(&text, &name, base)
    }

    pub fn parse_str(text: &str, source_name: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut entries = Entries {
            source_name,
            map: BTreeMap::new(),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(entries.err(line, format!("expected 'key = value', got '{content}'")));
            };
            let k = k.trim();
            let Some(&key) = KEYS.iter().find(|&&known| known == k) else {
                return Err(entries.err(line, format!("unknown key '{k}'")));
            };
            if let Some((_, first)) = entries.map.get(key) {
                return Err(entries.err(
                    line,
                    format!("duplicate key '{key}' (first set on line {first})"),
                ));
            }
            entries.map.insert(key, (v.trim().to_string(), line));
        }
        Self::from_entries(&entries, base_dir)
    }

    fn from_entries(e: &Entries<'_>, base_dir: &Path) -> Result<Self, ConfigError> {
        let d = RunConfig::default();
        let dp = PixelParams::default();
        let mode: SimMode = match e.raw("mode") {
            None => d.sim.mode,
            Some((v, line)) => v.parse().map_err(|m: String| e.err(*line, m))?,
        };
        let mut params = PixelParams {
            theta_on: e.parse("theta_on", dp.theta_on)?,
            theta_off: e.parse("theta_off", dp.theta_off)?,
            gain_diff: e.parse("gain_diff", dp.gain_diff)?,
            kappa_sf: e.parse("kappa_sf", dp.kappa_sf)?,
            kappa_fb: e.parse("kappa_fb", dp.kappa_fb)?,
            v_thermal: e.parse("v_thermal", dp.v_thermal)?,
            gain_cascode: e.parse("gain_cascode", dp.gain_cascode)?,
            c_junction: e.parse("c_junction", dp.c_junction)?,
            k_photo: e.parse("k_photo", dp.k_photo)?,
            delta_q_e: 0.0,
            r_shunt: e.parse("r_shunt", dp.r_shunt)?,
            r_series: e.parse("r_series", dp.r_series)?,
        };
        params.delta_q_e = e.parse("delta_q_e", params.consistent_delta_q_e())?;

        let sim = SimConfig {
            mode,
            params,
            k_delay: e.parse("k_delay", d.sim.k_delay)?,
            noise_sigma: e.parse("noise_sigma", d.sim.noise_sigma)?,
            rng_seed: e.parse("rng_seed", d.sim.rng_seed)?,
            time_step_oracle: e.parse("time_step_oracle", DEFAULT_ORACLE_STEP)?,
        };
        if let Err(err) = sim.validate() {
            let line = match &err {
                SimError::Circuit(CircuitError::InvalidParam { name, .. }) => e.line_of(name),
                SimError::InvalidConfig(msg) => ["noise_sigma", "time_step_oracle", "k_delay"]
                    .iter()
                    .find(|k| msg.starts_with(*k))
                    .map_or(0, |k| e.line_of(k)),
                _ => 0,
            };
            return Err(e.err(line, err.to_string()));
        }

        let stimulus_kind: String = e.parse("stimulus", "ramps".to_string())?;
        let stimulus = match stimulus_kind.as_str() {
            "ramps" => {
                let StimulusSpec::Ramps(dr) = &d.stimulus else {
                    unreachable!()
                };
                let grid = RampGrid {
                    mu: e.list("ramp_mu", &dr.mu)?,
                    l: e.list("ramp_l", &dr.l)?,
                    span: e.parse("ramp_span", dr.span)?,
                    pixels_per_cell: e.parse("pixels_per_cell", dr.pixels_per_cell)?,
                };
                for (key, values) in [("ramp_mu", &grid.mu), ("ramp_l", &grid.l)] {
                    if values.is_empty() || values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                        return Err(
                            e.err(e.line_of(key), format!("{key}: values must be positive"))
                        );
                    }
                }
                if !(grid.span > 0.0 && grid.span < 1.0) {
                    return Err(e.err(e.line_of("ramp_span"), "ramp_span must lie in (0, 1)"));
                }
                if grid.pixels_per_cell == 0 {
                    return Err(e.err(e.line_of("pixels_per_cell"), "pixels_per_cell must be >= 1"));
                }
                StimulusSpec::Ramps(grid)
            }
            "frames" => {
                let Some((dir, line)) = e.raw("frames_dir") else {
                    return Err(e.err(
                        e.line_of("stimulus"),
                        "stimulus = frames requires frames_dir",
                    ));
                };
                let dir = base_dir.join(dir);
                if !dir.is_dir() {
                    return Err(e.err(
                        *line,
                        format!("frames_dir '{}' does not exist", dir.display()),
                    ));
                }
                let interpolation_factor: usize = e.parse("interpolation_factor", 1)?;
                if interpolation_factor < 1 {
                    return Err(e.err(
                        e.line_of("interpolation_factor"),
                        "interpolation_factor must be >= 1",
                    ));
                }
                StimulusSpec::Frames(FrameSource {
                    dir,
                    interpolation_factor,
                })
            }
            other => {
                return Err(e.err(
                    e.line_of("stimulus"),
                    format!("stimulus must be 'ramps' or 'frames', got '{other}'"),
                ))
            }
        };

        let analysis = AnalysisGrid {
            mu_centers: e.list("analysis_mu", &d.analysis.mu_centers)?,
            l_centers: e.list("analysis_l", &d.analysis.l_centers)?,
            mu_half_width: e.parse("mu_half_width", d.analysis.mu_half_width)?,
            l_half_width: e.parse("l_half_width", d.analysis.l_half_width)?,
            bin_width: e.parse("bin_width", d.analysis.bin_width)?,
            floor_fraction: e.parse("floor_fraction", d.analysis.floor_fraction)?,
        };
        CellAxis::from_centers(&analysis.mu_centers, analysis.mu_half_width).map_err(|err| {
            e.err(
                e.line_of("analysis_mu").max(e.line_of("mu_half_width")),
                err.to_string(),
            )
        })?;
        CellAxis::from_centers(&analysis.l_centers, analysis.l_half_width).map_err(|err| {
            e.err(
                e.line_of("analysis_l").max(e.line_of("l_half_width")),
                err.to_string(),
            )
        })?;
        if !(analysis.bin_width > 0.0 && analysis.bin_width.is_finite()) {
            return Err(e.err(e.line_of("bin_width"), "bin_width must be positive"));
        }
        if !(0.0..1.0).contains(&analysis.floor_fraction) {
            return Err(e.err(
                e.line_of("floor_fraction"),
                "floor_fraction must lie in [0, 1)",
            ));
        }

        let output_dir = match e.raw("output_dir") {
            None => base_dir.join(&d.output_dir),
            Some((v, _)) => base_dir.join(v),
        };

        let oracle = OracleGrid {
            di_min: e.parse("oracle_di_min", d.oracle.di_min)?,
            di_max: e.parse("oracle_di_max", d.oracle.di_max)?,
            points: e.parse("oracle_points", d.oracle.points)?,
        };
        if !(oracle.di_min > 0.0 && oracle.di_max >= oracle.di_min && oracle.points >= 1) {
            return Err(e.err(
                e.line_of("oracle_di_min").max(e.line_of("oracle_points")),
                "oracle grid needs 0 < oracle_di_min <= oracle_di_max and oracle_points >= 1",
            ));
        }

        Ok(Self {
            sim,
            stimulus,
            analysis,
            output_dir,
            oracle,
        })
    }

    /// Canonical text form; loading it back yields an equal config.
    pub fn to_config_string(&self) -> String {
        let p = &self.sim.params;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("mode", self.sim.mode.to_string());
        kv("theta_on", p.theta_on.to_string());
        kv("theta_off", p.theta_off.to_string());
        kv("gain_diff", p.gain_diff.to_string());
        kv("kappa_sf", p.kappa_sf.to_string());
        kv("kappa_fb", p.kappa_fb.to_string());
        kv("v_thermal", p.v_thermal.to_string());
        kv("gain_cascode", p.gain_cascode.to_string());
        kv("c_junction", p.c_junction.to_string());
        kv("k_photo", p.k_photo.to_string());
        kv("delta_q_e", p.delta_q_e.to_string());
        kv("r_shunt", p.r_shunt.to_string());
        kv("r_series", p.r_series.to_string());
        kv("k_delay", self.sim.k_delay.to_string());
        kv("noise_sigma", self.sim.noise_sigma.to_string());
        kv("rng_seed", self.sim.rng_seed.to_string());
        kv("time_step_oracle", self.sim.time_step_oracle.to_string());
        match &self.stimulus {
            StimulusSpec::Ramps(g) => {
                kv("stimulus", "ramps".into());
                kv("ramp_mu", fmt_list(&g.mu));
                kv("ramp_l", fmt_list(&g.l));
                kv("ramp_span", g.span.to_string());
                kv("pixels_per_cell", g.pixels_per_cell.to_string());
            }
            StimulusSpec::Frames(f) => {
                kv("stimulus", "frames".into());
                kv("frames_dir", f.dir.display().to_string());
                kv("interpolation_factor", f.interpolation_factor.to_string());
            }
        }
        let a = &self.analysis;
        kv("analysis_mu", fmt_list(&a.mu_centers));
        kv("analysis_l", fmt_list(&a.l_centers));
        kv("mu_half_width", a.mu_half_width.to_string());
        kv("l_half_width", a.l_half_width.to_string());
        kv("bin_width", a.bin_width.to_string());
        kv("floor_fraction", a.floor_fraction.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv("oracle_di_min", self.oracle.di_min.to_string());
        kv("oracle_di_max", self.oracle.di_max.to_string());
        kv("oracle_points", self.oracle.points.to_string());
        s
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn hash_hex(&self) -> String {
        hex::encode(Sha256::digest(self.to_config_string().as_bytes()))
    }
}
