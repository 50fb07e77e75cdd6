//! Subcommand implementations behind the `dimlight` binary.
//!
//! Each function returns the text to print and an exit code; hard failures
//! come back as [`CliError`], which carries its own exit code.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analysis::{
    analyze_cells, bin_samples, intervals_from_events, product_check, IntervalSet,
};
use crate::circuit::{self, calibrate_k_delay};
use crate::io::config::{RunConfig, StimulusSpec};
use crate::io::events::{format_events, read_event_file};
use crate::io::pgm::load_frame_dir;
use crate::io::report::{histogram_svg, parse_gap_rows, report_csv};
use crate::io::write_atomic;
use crate::simulator::{
    oracle_checked, pixels_from_frames, ramp_pixels, simulate_sensor, SimError,
};
use crate::stimulus::{synth_ramp, LumaTrace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

pub const EVENTS_FILE: &str = "events.txt";
pub const PROVENANCE_FILE: &str = "provenance.txt";
pub const REPORT_FILE: &str = "report.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Verification(_) => EXIT_VERIFY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

pub fn cell_events_file(mu: f64, l: f64) -> String {
    format!("events_mu{mu}_l{l}.txt")
}

pub fn cell_figure_file(mu: f64, l: f64) -> String {
    format!("cell_mu{mu}_l{l}.svg")
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(seed) = seed {
        cfg.sim.rng_seed = seed;
    }
    Ok(cfg)
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn write_out(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    write_atomic(&path, contents)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Parses `--cells "mu:l,mu:l"`.
pub fn parse_cells(list: &str) -> Result<Vec<(f64, f64)>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (mu, l) = item.split_once(':').ok_or_else(|| {
                CliError::Config(format!("--cells: expected 'mu:l', got '{item}'"))
            })?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Config(format!("--cells: bad number '{v}'")))
            };
            Ok((parse(mu)?, parse(l)?))
        })
        .collect()
}

pub fn simulate(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<Outcome, CliError> {
    let cfg = load_config(config, seed)?;
    let out_dir = out.map_or_else(|| cfg.output_dir.clone(), Path::to_path_buf);

    // Everything is simulated in memory before the first write, so a bad
    // input leaves no partial output behind.
    let mut files: Vec<(String, String)> = Vec::new();
    let mut total = 0usize;
    let mut skipped = 0usize;
    match &cfg.stimulus {
        StimulusSpec::Ramps(grid) => {
            for (cell, (mu, l, ramp)) in grid.cells().into_iter().enumerate() {
                let pixels = ramp_pixels(&ramp, 0, grid.pixels_per_cell, cell as u32);
                let run = simulate_sensor(&pixels, &cfg.sim).map_err(sim_err)?;
                total += run.events.len();
                skipped += run.skipped_segments;
                files.push((cell_events_file(mu, l), format_events(&run.events)));
            }
        }
        StimulusSpec::Frames(src) => {
            let seq = load_frame_dir(&src.dir).map_err(data_err)?;
            let seq = seq
                .interpolate(src.interpolation_factor)
                .map_err(data_err)?;
            let pixels = pixels_from_frames(&seq).map_err(sim_err)?;
            let run = simulate_sensor(&pixels, &cfg.sim).map_err(sim_err)?;
            total = run.events.len();
            skipped = run.skipped_segments;
            files.push((EVENTS_FILE.to_string(), format_events(&run.events)));
        }
    }

    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", out_dir.display())))?;
    let mut provenance = String::new();
    let _ = writeln!(provenance, "config_sha256 = {}", cfg.hash_hex());
    let _ = writeln!(provenance, "rng_seed = {}", cfg.sim.rng_seed);
    let _ = writeln!(provenance, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(provenance, "mode = {}", cfg.sim.mode);
    for (name, body) in &files {
        write_out(&out_dir, name, body.as_bytes())?;
        let _ = writeln!(provenance, "file = {name}");
    }
    write_out(&out_dir, PROVENANCE_FILE, provenance.as_bytes())?;

    let mut stdout = format!(
        "wrote {} event file(s), {} events, to {}\n",
        files.len(),
        total,
        out_dir.display()
    );
    if skipped > 0 {
        let _ = writeln!(stdout, "skipped {skipped} zero-intensity segment(s)");
    }
    Ok(Outcome {
        stdout,
        code: EXIT_OK,
    })
}

fn sim_err(e: SimError) -> CliError {
    match e {
        SimError::InvalidConfig(_) | SimError::Circuit(_) => CliError::Config(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

pub fn analyze(
    config: &Path,
    out: Option<&Path>,
    cells: Option<&str>,
) -> Result<Outcome, CliError> {
    let cfg = load_config(config, None)?;
    let subset = cells.map(parse_cells).transpose()?;
    let out_dir = out.map_or_else(|| cfg.output_dir.clone(), Path::to_path_buf);

    let mut intervals = IntervalSet::default();
    match &cfg.stimulus {
        StimulusSpec::Ramps(grid) => {
            for (mu, l, ramp) in grid.cells() {
                let path = out_dir.join(cell_events_file(mu, l));
                let events = read_event_file(&path).map_err(data_err)?;
                let trace = synth_ramp(&ramp);
                let part = intervals_from_events(&events, |_, _| Some(&trace));
                intervals.samples.extend(part.samples);
                intervals.skipped += part.skipped;
            }
        }
        StimulusSpec::Frames(src) => {
            let seq = load_frame_dir(&src.dir).map_err(data_err)?;
            let seq = seq
                .interpolate(src.interpolation_factor)
                .map_err(data_err)?;
            let (w, h) = (seq.width(), seq.height());
            let traces: Vec<LumaTrace> = (0..h)
                .flat_map(|y| (0..w).map(move |x| (x, y)))
                .map(|(x, y)| seq.trace_at(x, y))
                .collect::<Result<_, _>>()
                .map_err(data_err)?;
            let path = out_dir.join(EVENTS_FILE);
            let events = read_event_file(&path).map_err(data_err)?;
            intervals = intervals_from_events(&events, |x, y| {
                let (x, y) = (x as usize, y as usize);
                (x < w && y < h).then(|| &traces[y * w + x])
            });
        }
    }

    let mu_axis = cfg.analysis.mu_axis();
    let l_axis = cfg.analysis.l_axis();
    let binned = bin_samples(&intervals.samples, &mu_axis, &l_axis);
    let (mut report, mut hists) = analyze_cells(
        &binned,
        &mu_axis,
        &l_axis,
        cfg.analysis.bin_width,
        cfg.analysis.floor_fraction,
    )
    .map_err(data_err)?;
    if let Some(subset) = &subset {
        let keep: Vec<bool> = report
            .cells
            .iter()
            .map(|c| subset.iter().any(|&(mu, l)| mu == c.mu_bin && l == c.l_bin))
            .collect();
        let mut k = keep.iter();
        report.cells.retain(|_| *k.next().unwrap_or(&false));
        let mut k = keep.iter();
        hists.retain(|_| *k.next().unwrap_or(&false));
    }

    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", out_dir.display())))?;
    write_out(&out_dir, REPORT_FILE, report_csv(&report).as_bytes())?;
    for (cell, hist) in report.cells.iter().zip(&hists) {
        let svg = histogram_svg(hist, cell.ig_raw.as_ref(), cell.gap_length);
        write_out(
            &out_dir,
            &cell_figure_file(cell.mu_bin, cell.l_bin),
            svg.as_bytes(),
        )?;
    }

    let mut stdout = format!(
        "{} interval(s): {} binned, {} outside cells, {} skipped; {} populated cell(s)\n",
        intervals.samples.len() + intervals.skipped,
        binned.assigned(),
        binned.rejected,
        intervals.skipped,
        report.cells.len()
    );
    match product_check(&report) {
        Ok(s) => {
            let _ = writeln!(
                stdout,
                "mean gap*mu product: {:.6} (max relative deviation {:.4}, {} cells)",
                s.mean_product, s.max_rel_deviation, s.n_cells
            );
        }
        Err(e) => {
            let _ = writeln!(stdout, "mean gap*mu product: n/a ({e})");
        }
    }
    Ok(Outcome {
        stdout,
        code: EXIT_OK,
    })
}

pub fn calibrate(gaps_csv: &Path) -> Result<Outcome, CliError> {
    let text = fs::read_to_string(gaps_csv)
        .map_err(|e| CliError::Data(format!("{}: {e}", gaps_csv.display())))?;
    let rows = parse_gap_rows(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", gaps_csv.display())))?;
    let k = calibrate_k_delay(&rows).map_err(data_err)?;
    let mut stdout = format!("k_delay = {k}\n");
    let _ = writeln!(stdout, "mu,gap,model,residual");
    for (mu, gap) in rows {
        let model = k / mu;
        let _ = writeln!(stdout, "{mu},{gap},{model},{}", gap - model);
    }
    Ok(Outcome {
        stdout,
        code: EXIT_OK,
    })
}

/// Largest relative error tolerated between the closed-form delay and the
/// capacitor integrator.
pub const ORACLE_REL_TOL: f64 = 0.01;

pub fn oracle(config: &Path) -> Result<Outcome, CliError> {
    let cfg = load_config(config, None)?;
    let params = cfg.sim.params;
    let dt = cfg.sim.time_step_oracle;
    let mut stdout = String::from("delta_i_A,closed_form_s,oracle_s,rel_err\n");
    let mut worst: f64 = 0.0;
    for di in cfg.oracle.values() {
        let closed = circuit::event_delay(di, &params).map_err(data_err)?;
        let brute = oracle_checked(0.0, di, &params, dt).map_err(|e| {
            CliError::Verification(format!("oracle failed at delta_i = {di:e} A: {e}"))
        })?;
        let rel = if closed == brute {
            0.0
        } else {
            (brute - closed).abs() / closed.abs()
        };
        worst = worst.max(rel);
        let _ = writeln!(stdout, "{di:e},{closed:e},{brute:e},{rel:e}");
    }
    let pass = worst <= ORACLE_REL_TOL;
    let _ = writeln!(
        stdout,
        "max relative error {worst:e} ({})",
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(Outcome {
        stdout,
        code: if pass { EXIT_OK } else { EXIT_VERIFY },
    })
}
