//! Plain-text program and trajectory files.
//!
//! A `.cmds` file holds one editor command per line; blank lines and `#`
//! comments are ignored. A `.traj` file holds one point per line as `x y`
//! (a comma may separate the two numbers); a file starting with `[` is read
//! as a JSON array of `[x, y]` pairs instead.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use turtle_synth::{parse_commands, EditCommand, Point, Trajectory};

use crate::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn read_commands(path: &Path) -> Result<Vec<EditCommand>, CliError> {
    parse_commands(&read_text(path)?)
        .map_err(|(line, e)| CliError::Validation(format!("{}:{line}: {e}", path.display())))
}

/// The command lines of a program file, without comments or blank lines.
pub fn read_command_lines(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(read_commands(path)?.iter().map(|c| c.to_string()).collect())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, CliError> {
    let text = read_text(path)?;
    let bad = |line: usize, msg: String| CliError::Validation(format!("{}:{line}: {msg}", path.display()));
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(|e| bad(e.line(), e.to_string()));
    }
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let [x, y] = fields[..] else {
            return Err(bad(i + 1, format!("expected two numbers, got {line:?}")));
        };
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(i + 1, format!("not a finite number: {s:?}")))
        };
        points.push(Point::new(parse(x)?, parse(y)?));
    }
    Ok(Trajectory::new(points))
}

pub fn format_trajectory(t: &Trajectory) -> String {
    let mut out = String::new();
    for p in &t.points {
        writeln!(out, "{} {}", p.x, p.y).unwrap();
    }
    out
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
