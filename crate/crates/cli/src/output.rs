//! Per-run output directories and file writers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use swarm_avatar::lstm::EpochStats;
use swarm_avatar::sim::TrajectoryLog;

use crate::CliError;

/// Creates `<root>/<command>-<UTC timestamp>`, adding a counter if that name is taken.
pub fn create_run_dir(root: &Path, command: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(root).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", root.display())))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let base = format!("{command}-{stamp}");
    for k in 0.. {
        let name = if k == 0 { base.clone() } else { format!("{base}-{k}") };
        let dir = root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CliError::runtime(format!("cannot create {}: {e}", dir.display()))),
        }
    }
    unreachable!()
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::runtime(format!("writing {}: {e}", path.display()))
}

pub fn write_trajectory(path: &Path, log: &TrajectoryLog) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["t", "drone_id", "role", "x", "y", "z", "vx", "vy", "vz", "r", "g", "b"])
        .map_err(|e| io_err(path, e))?;
    for s in &log.states {
        for (i, d) in s.drones.iter().enumerate() {
            let (p, v, c) = (d.position, d.velocity, d.color);
            w.write_record([
                s.t.to_string(),
                i.to_string(),
                d.role.as_str().to_string(),
                p.x.to_string(),
                p.y.to_string(),
                p.z.to_string(),
                v.x.to_string(),
                v.y.to_string(),
                v.z.to_string(),
                c.0.to_string(),
                c.1.to_string(),
                c.2.to_string(),
            ])
            .map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_history(path: &Path, history: &[EpochStats]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for h in history {
        w.serialize(h).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_classifications(path: &Path, rows: &[(f64, swarm_avatar::Emotion, f64)]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["t", "label", "confidence"])
        .map_err(|e| io_err(path, e))?;
    for (t, e, p) in rows {
        w.write_record([t.to_string(), e.as_str().to_string(), p.to_string()])
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_stream(path: &Path, frames: &[swarm_avatar::pose::LandmarkFrame]) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    for frame in frames {
        writeln!(f, "{}", swarm_avatar::pose::frame_to_json(frame)).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}
