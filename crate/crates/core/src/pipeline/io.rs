//! On-disk formats: the trajectory CSV and versioned JSON artifacts.
//!
//! Trajectory files start with `# key=value` metadata lines followed by a CSV
//! header `vehicle_id,t,x,y,speed,heading`; rows of one vehicle are contiguous.
//! Every other artifact is a JSON envelope
//! `{"format_version", "kind", "config_hash", "data"}`. Floats are written in
//! their shortest round-trip form, so reloading is exact. All writes go to a
//! temporary file that is renamed into place.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::{DeserializeOwned, IgnoredAny};
use serde::{Deserialize, Serialize};

use crate::model::{TracePoint, Trajectory};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

pub const TRAJECTORY_HEADER: [&str; 6] = ["vehicle_id", "t", "x", "y", "speed", "heading"];

/// Writes through a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let tmp = builder.tempfile_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        write(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    format_version: u32,
    kind: &'a str,
    config_hash: &'a str,
    data: &'a T,
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    format_version: u32,
    kind: String,
    config_hash: String,
    data: T,
}

fn parse_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        what: path.display().to_string(),
        detail: e.to_string(),
    }
}

pub fn save_artifact<T: Serialize>(path: &Path, kind: &str, config_hash: &str, data: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer(
            &mut *w,
            &EnvelopeOut {
                format_version: FORMAT_VERSION,
                kind,
                config_hash,
                data,
            },
        )
        .map_err(|e| parse_error(path, e))?;
        writeln!(w)?;
        Ok(())
    })
}

/// Kind and config hash of an artifact, after checking its format version.
pub fn artifact_header(path: &Path) -> Result<(String, String)> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let reader = BufReader::new(File::open(path)?);
    let env: EnvelopeIn<IgnoredAny> = serde_json::from_reader(reader).map_err(|e| parse_error(path, e))?;
    if env.format_version != FORMAT_VERSION {
        return Err(Error::Version {
            what: path.display().to_string(),
            found: env.format_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok((env.kind, env.config_hash))
}

/// Loads an artifact of the given kind. With `expected_hash`, an artifact from a
/// different configuration is rejected as stale.
pub fn load_artifact<T: DeserializeOwned>(path: &Path, kind: &str, expected_hash: Option<&str>) -> Result<T> {
    let (found_kind, hash) = artifact_header(path)?;
    if found_kind != kind {
        return Err(parse_error(path, format!("expected a `{kind}` artifact, found `{found_kind}`")));
    }
    if let Some(expected) = expected_hash {
        if hash != expected {
            return Err(Error::StaleArtifact {
                path: path.to_path_buf(),
                found: hash,
                expected: expected.to_string(),
            });
        }
    }
    let reader = BufReader::new(File::open(path)?);
    let env: EnvelopeIn<T> = serde_json::from_reader(reader).map_err(|e| parse_error(path, e))?;
    Ok(env.data)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryFileMeta {
    pub format_version: u32,
    pub seed: u64,
    pub config_hash: String,
}

pub fn write_trajectories(path: &Path, trajs: &[Trajectory], meta: &TrajectoryFileMeta) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "# format_version={}", meta.format_version)?;
        writeln!(w, "# seed={}", meta.seed)?;
        writeln!(w, "# config_hash={}", meta.config_hash)?;
        let mut csv = csv::Writer::from_writer(w);
        let err = |e: csv::Error| parse_error(path, e);
        csv.write_record(TRAJECTORY_HEADER).map_err(err)?;
        for traj in trajs {
            for p in &traj.points {
                csv.write_record([
                    traj.vehicle_id.clone(),
                    p.t.to_string(),
                    p.x.to_string(),
                    p.y.to_string(),
                    p.speed.to_string(),
                    p.heading.to_string(),
                ])
                .map_err(err)?;
            }
        }
        csv.flush()?;
        Ok(())
    })
}

fn read_meta(path: &Path) -> Result<TrajectoryFileMeta> {
    let reader = BufReader::new(File::open(path)?);
    let (mut version, mut seed, mut hash) = (None, None, None);
    for line in reader.lines() {
        let line = line?;
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        let Some((k, v)) = rest.trim().split_once('=') else {
            continue;
        };
        let bad = |e: &dyn std::fmt::Display| parse_error(path, format!("metadata `{k}`: {e}"));
        match k.trim() {
            "format_version" => version = Some(v.trim().parse::<u32>().map_err(|e| bad(&e))?),
            "seed" => seed = Some(v.trim().parse::<u64>().map_err(|e| bad(&e))?),
            "config_hash" => hash = Some(v.trim().to_string()),
            _ => {}
        }
    }
    let version = version.ok_or_else(|| parse_error(path, "missing format_version metadata"))?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            what: path.display().to_string(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(TrajectoryFileMeta {
        format_version: version,
        seed: seed.ok_or_else(|| parse_error(path, "missing seed metadata"))?,
        config_hash: hash.ok_or_else(|| parse_error(path, "missing config_hash metadata"))?,
    })
}

pub fn read_trajectory_meta(path: &Path) -> Result<TrajectoryFileMeta> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    read_meta(path)
}

pub fn read_trajectories(path: &Path) -> Result<(TrajectoryFileMeta, Vec<Trajectory>)> {
    let meta = read_trajectory_meta(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(BufReader::new(File::open(path)?));
    let header = reader.headers().map_err(|e| parse_error(path, e))?;
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(parse_error(path, format!("unexpected header {header:?}")));
    }
    let mut trajs: Vec<Trajectory> = Vec::new();
    let mut current: Option<(String, Vec<TracePoint>)> = None;
    let mut seen = std::collections::HashSet::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| parse_error(path, e))?;
        if rec.len() != 6 {
            return Err(parse_error(path, format!("record {} has {} fields", line + 1, rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| parse_error(path, format!("record {} field `{}`: {e}", line + 1, TRAJECTORY_HEADER[i])))
        };
        let point = TracePoint {
            t: num(1)?,
            x: num(2)?,
            y: num(3)?,
            speed: num(4)?,
            heading: num(5)?,
        };
        let id = &rec[0];
        match &mut current {
            Some((cur, pts)) if cur == id => pts.push(point),
            _ => {
                if let Some((cur, pts)) = current.take() {
                    trajs.push(Trajectory::new(cur, pts)?);
                }
                if !seen.insert(id.to_string()) {
                    return Err(parse_error(path, format!("rows of vehicle {id} are not contiguous")));
                }
                current = Some((id.to_string(), vec![point]));
            }
        }
    }
    if let Some((cur, pts)) = current {
        trajs.push(Trajectory::new(cur, pts)?);
    }
    Ok((meta, trajs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> TrajectoryFileMeta {
        TrajectoryFileMeta {
            format_version: FORMAT_VERSION,
            seed: 42,
            config_hash: "abc".into(),
        }
    }

    #[test]
    fn trajectories_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let pts = |x0: f64| {
            (0..5)
                .map(|i| TracePoint {
                    t: i as f64,
                    x: x0 + 0.1 * i as f64 / 3.0,
                    y: -1.8,
                    speed: 13.4 - i as f64 * 0.3,
                    heading: 90.0,
                })
                .collect::<Vec<_>>()
        };
        let trajs = vec![
            Trajectory::new("I01-E-000001", pts(0.0)).unwrap(),
            Trajectory::new("I01-E-000002", pts(1e-7)).unwrap(),
        ];
        write_trajectories(&path, &trajs, &meta()).unwrap();
        let (m, back) = read_trajectories(&path).unwrap();
        assert_eq!(m, meta());
        assert_eq!(back, trajs);
    }

    #[test]
    fn empty_file_has_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trajectories(&path, &[], &meta()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>(), vec!["vehicle_id,t,x,y,speed,heading"]);
        assert!(read_trajectories(&path).unwrap().1.is_empty());
    }

    #[test]
    fn artifact_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        save_artifact(&path, "numbers", "h1", &vec![0.1, 1.0 / 3.0, f64::MAX]).unwrap();
        let v: Vec<f64> = load_artifact(&path, "numbers", Some("h1")).unwrap();
        assert_eq!(v, vec![0.1, 1.0 / 3.0, f64::MAX]);
        assert!(matches!(
            load_artifact::<Vec<f64>>(&path, "numbers", Some("h2")),
            Err(Error::StaleArtifact { .. })
        ));
        assert!(matches!(load_artifact::<Vec<f64>>(&path, "other", None), Err(Error::Parse { .. })));
        assert!(matches!(
            load_artifact::<Vec<f64>>(&dir.path().join("none.json"), "numbers", None),
            Err(Error::MissingArtifact(_))
        ));

        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_artifact::<Vec<f64>>(&path, "numbers", None), Err(Error::Parse { .. })));

        std::fs::write(&path, text.replace("\"format_version\":1", "\"format_version\":9")).unwrap();
        assert!(matches!(
            load_artifact::<Vec<f64>>(&path, "numbers", None),
            Err(Error::Version { found: 9, .. })
        ));
    }
}
