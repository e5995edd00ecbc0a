use std::io::{self, Write};
use std::path::Path;

use geomech::dynamics::Trajectory;
use geomech::geometry::{Chart, VELOCITY_SUFFIX};
use serde::Serialize;
use tempfile::NamedTempFile;

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
    bytes.push(b'\n');
    bytes
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

/// `t, x*, v*, monitors` in declaration order.
pub fn trajectory_header(chart: &Chart, monitors: &[String]) -> Vec<String> {
    let mut header = vec!["t".to_string()];
    header.extend(chart.coords().iter().cloned());
    header.extend(chart.coords().iter().map(|c| format!("{c}{VELOCITY_SUFFIX}")));
    header.extend(monitors.iter().cloned());
    header
}

pub fn trajectory_csv(chart: &Chart, traj: &Trajectory) -> Vec<u8> {
    let names: Vec<String> = traj.monitors.iter().map(|m| m.name.clone()).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(trajectory_header(chart, &names)).expect("in-memory write");
    for (k, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        let row = std::iter::once(*t)
            .chain(s.x.iter().copied())
            .chain(s.v.iter().copied())
            .chain(traj.monitors.iter().map(|m| m.values[k]))
            .map(number);
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = number(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17);
        }
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
