//! Binary PGM (P5, maxval 255) rasters and frame directories with a
//! `timestamps.txt` sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::stimulus::{Frame, FrameSequence, StimulusError};

pub const TIMESTAMPS_FILE: &str = "timestamps.txt";

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}:{line}: bad timestamp '{value}'")]
    Timestamp {
        path: PathBuf,
        line: usize,
        value: String,
    },
    #[error("{dir}: {frames} frame files but {stamps} timestamps")]
    CountMismatch {
        dir: PathBuf,
        frames: usize,
        stamps: usize,
    },
    #[error("{path}: raster is {got:?}, expected {expected:?}")]
    SizeMismatch {
        path: PathBuf,
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error(transparent)]
    Stimulus(#[from] StimulusError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// Parses a P5 raster. Header comments (`#` to end of line) are allowed.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, String> {
    let mut pos = 0;
    let mut token = || -> Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    if magic != "P5" {
        return Err(format!("expected P5 magic, got '{magic}'"));
    }
    let mut number = |what: &str| -> Result<usize, String> {
        let t = token()?;
        t.parse().map_err(|_| format!("bad {what} '{t}'"))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(format!("only maxval 255 is supported, got {maxval}"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let data_start = pos + 1;
    let len = width * height;
    if bytes.len() < data_start + len {
        return Err(format!(
            "raster truncated: need {len} bytes, have {}",
            bytes.len().saturating_sub(data_start)
        ));
    }
    Ok(GrayImage {
        width,
        height,
        data: bytes[data_start..data_start + len].to_vec(),
    })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn parse_timestamps(text: &str, path: &Path) -> Result<Vec<f64>, PgmError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let v = line.trim();
        if v.is_empty() {
            continue;
        }
        let t: f64 = v.parse().map_err(|_| PgmError::Timestamp {
            path: path.to_path_buf(),
            line: idx + 1,
            value: v.to_string(),
        })?;
        out.push(t);
    }
    Ok(out)
}

/// `*.pgm` files of `dir` in numeric order of the digits in their names
/// (name order breaks ties).
pub fn frame_files(dir: &Path) -> Result<Vec<PathBuf>, PgmError> {
    let entries = fs::read_dir(dir).map_err(|source| PgmError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    let key = |p: &PathBuf| {
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let digits: String = name.chars().filter(char::is_ascii_digit).collect();
        (digits.parse::<u128>().ok(), name)
    };
    files.sort_by_key(key);
    Ok(files)
}

/// Loads a frame directory into a sequence with luma in `[0, 255]`.
pub fn load_frame_dir(dir: &Path) -> Result<FrameSequence, PgmError> {
    let stamps_path = dir.join(TIMESTAMPS_FILE);
    let stamps_text = fs::read_to_string(&stamps_path).map_err(|source| PgmError::Io {
        path: stamps_path.clone(),
        source,
    })?;
    let stamps = parse_timestamps(&stamps_text, &stamps_path)?;
    let files = frame_files(dir)?;
    if files.len() != stamps.len() {
        return Err(PgmError::CountMismatch {
            dir: dir.to_path_buf(),
            frames: files.len(),
            stamps: stamps.len(),
        });
    }
    let mut dims = None;
    let mut frames = Vec::with_capacity(files.len());
    for (path, t) in files.iter().zip(stamps) {
        let bytes = fs::read(path).map_err(|source| PgmError::Io {
            path: path.clone(),
            source,
        })?;
        let img = decode_pgm(&bytes).map_err(|message| PgmError::Format {
            path: path.clone(),
            message,
        })?;
        let got = (img.width, img.height);
        match dims {
            None => dims = Some(got),
            Some(expected) if expected != got => {
                return Err(PgmError::SizeMismatch {
                    path: path.clone(),
                    got,
                    expected,
                })
            }
            _ => {}
        }
        frames.push(Frame {
            t,
            pixels: img.data.iter().map(|&v| v as f64).collect(),
        });
    }
    let (w, h) = dims.unwrap_or((0, 0));
    Ok(FrameSequence::new(w, h, frames)?)
}

/// Writes `frames` as `frame_00000.pgm`, ... plus `timestamps.txt`.
pub fn write_frame_dir(dir: &Path, frames: &[(f64, GrayImage)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut stamps = String::new();
    for (i, (t, img)) in frames.iter().enumerate() {
        fs::write(dir.join(format!("frame_{i:05}.pgm")), encode_pgm(img))?;
        stamps.push_str(&format!("{t}\n"));
    }
    fs::write(dir.join(TIMESTAMPS_FILE), stamps)
}
