//! File formats: trajectory CSV, SKCH channel dumps and report CSVs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{Trajectory, Vec3};
use crate::synth::{ChannelTensor, TensorMeta};

pub const DUMP_MAGIC: &[u8; 4] = b"SKCH";
pub const DUMP_VERSION: u16 = 1;
const DUMP_HEADER_LEN: usize = 4 + 2 + 8 + 8 + 4 + 4;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: not a channel dump (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("{path}: unsupported dump version {version}")]
    Version { path: PathBuf, version: u16 },
    #[error("{path}: truncated dump ({got} bytes, expected {expected})")]
    Truncated { path: PathBuf, got: usize, expected: usize },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, IoError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Formats a float so that it parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-3..1e7).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Trajectory CSV with header `t_s,x_m,y_m,z_m[,vx_mps,vy_mps,vz_mps]`.
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let file = File::open(path).map_err(io_err(path))?;
    let parse_err = |line: usize, message: String| IoError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))?;
    let header = header.map_err(io_err(path))?;
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    let with_velocity = match cols.as_slice() {
        ["t_s", "x_m", "y_m", "z_m"] => false,
        ["t_s", "x_m", "y_m", "z_m", "vx_mps", "vy_mps", "vz_mps"] => true,
        _ => return Err(parse_err(1, format!("unexpected header '{}'", header.trim()))),
    };
    let (mut ts, mut pos, mut vel) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines {
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(i + 1, e.to_string()))?;
        if values.len() != cols.len() {
            return Err(parse_err(
                i + 1,
                format!("expected {} columns, got {}", cols.len(), values.len()),
            ));
        }
        ts.push(values[0]);
        pos.push(Vec3::new(values[1], values[2], values[3]));
        if with_velocity {
            vel.push(Vec3::new(values[4], values[5], values[6]));
        }
    }
    Trajectory::new(ts, pos, with_velocity.then_some(vel)).map_err(|e| IoError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory, with_velocity: bool) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut text = String::from("t_s,x_m,y_m,z_m");
    if with_velocity {
        text.push_str(",vx_mps,vy_mps,vz_mps");
    }
    text.push('\n');
    for ((t, p), v) in trajectory
        .timestamps()
        .iter()
        .zip(trajectory.positions())
        .zip(trajectory.velocities())
    {
        let mut row = vec![*t, p.x, p.y, p.z];
        if with_velocity {
            row.extend([v.x, v.y, v.z]);
        }
        text.push_str(&join(&row));
        text.push('\n');
    }
    w.write_all(text.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Serialises a tensor in the SKCH little-endian layout.
pub fn encode_dump(tensor: &ChannelTensor) -> Vec<u8> {
    let (l, t) = (tensor.n_paths(), tensor.n_snapshots());
    let mut out = Vec::with_capacity(DUMP_HEADER_LEN + l * t * 24 + t * 8);
    out.extend_from_slice(DUMP_MAGIC);
    out.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    out.extend_from_slice(&tensor.fc_hz().to_le_bytes());
    out.extend_from_slice(&tensor.rate_hz().to_le_bytes());
    out.extend_from_slice(&(l as u32).to_le_bytes());
    out.extend_from_slice(&(t as u32).to_le_bytes());
    for h in tensor.h() {
        out.extend_from_slice(&h.re.to_le_bytes());
        out.extend_from_slice(&h.im.to_le_bytes());
    }
    for d in tensor.tau() {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for s in tensor.timestamps() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn decode_dump(bytes: &[u8], path: &Path) -> Result<ChannelTensor> {
    let truncated = |expected: usize| IoError::Truncated {
        path: path.to_path_buf(),
        got: bytes.len(),
        expected,
    };
    if bytes.len() < 4 || &bytes[..4] != DUMP_MAGIC {
        return Err(IoError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < DUMP_HEADER_LEN {
        return Err(truncated(DUMP_HEADER_LEN));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != DUMP_VERSION {
        return Err(IoError::Version {
            path: path.to_path_buf(),
            version,
        });
    }
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let fc_hz = f64_at(6);
    let rate_hz = f64_at(14);
    let l = u32_at(22);
    let t = u32_at(26);
    let expected = DUMP_HEADER_LEN + l * t * 24 + t * 8;
    if bytes.len() < expected {
        return Err(truncated(expected));
    }
    if bytes.len() > expected {
        return Err(IoError::Invalid {
            path: path.to_path_buf(),
            message: format!("{} trailing bytes", bytes.len() - expected),
        });
    }
    let mut o = DUMP_HEADER_LEN;
    let mut h = Vec::with_capacity(l * t);
    for _ in 0..l * t {
        h.push(Complex64::new(f64_at(o), f64_at(o + 8)));
        o += 16;
    }
    let mut tau = Vec::with_capacity(l * t);
    for _ in 0..l * t {
        tau.push(f64_at(o));
        o += 8;
    }
    let mut ts = Vec::with_capacity(t);
    for _ in 0..t {
        ts.push(f64_at(o));
        o += 8;
    }
    ChannelTensor::new(l, h, tau, ts, TensorMeta { fc_hz, rate_hz }).map_err(|e| IoError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_dump(path: &Path, tensor: &ChannelTensor) -> Result<()> {
    std::fs::write(path, encode_dump(tensor)).map_err(io_err(path))
}

pub fn read_dump(path: &Path) -> Result<ChannelTensor> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    decode_dump(&bytes, path)
}

/// Tensor as CSV, one row per (path, snapshot).
pub fn write_tensor_csv(path: &Path, tensor: &ChannelTensor) -> Result<()> {
    let mut text = String::from("l,t,t_s,tau_s,re,im\n");
    for l in 0..tensor.n_paths() {
        for t in 0..tensor.n_snapshots() {
            let h = tensor.h_at(l, t);
            text.push_str(&format!(
                "{l},{t},{},{},{},{}\n",
                fmt_f64(tensor.timestamps()[t]),
                fmt_f64(tensor.tau_at(l, t)),
                fmt_f64(h.re),
                fmt_f64(h.im)
            ));
        }
    }
    std::fs::write(path, text).map_err(io_err(path))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

/// Numeric CSV with optional `# ` comment lines before the header.
pub fn write_csv<I>(path: &Path, comments: &[String], header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut text = String::new();
    for c in comments {
        text.push_str("# ");
        text.push_str(c);
        text.push('\n');
    }
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&join(&row));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(io_err(path))
}

/// Comment lines, header fields and numeric rows of a CSV file.
pub type CsvTable = (Vec<String>, Vec<String>, Vec<Vec<f64>>);

/// Reads a numeric CSV written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut comments = Vec::new();
    let mut header = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(c) = line.strip_prefix("# ") {
            comments.push(c.to_string());
        } else if header.is_none() {
            header = Some(line.split(',').map(str::to_string).collect());
        } else if !line.is_empty() {
            let row = line
                .split(',')
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| IoError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
            rows.push(row);
        }
    }
    Ok((comments, header.unwrap_or_default(), rows))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| IoError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor() -> ChannelTensor {
        let h = vec![
            Complex64::new(1.0, -2.0),
            Complex64::new(0.5, 0.25),
            Complex64::new(-1e-9, 3.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(7.0, 8.0),
            Complex64::new(1e300, -1e-300),
        ];
        let tau = vec![0.0, 0.0, 0.0, 1e-7, 2e-7, 3e-7];
        ChannelTensor::new(
            2,
            h,
            tau,
            vec![0.0, 1e-5, 2e-5],
            TensorMeta {
                fc_hz: 1.575_42e9,
                rate_hz: 1e5,
            },
        )
        .unwrap()
    }

    #[test]
    fn dump_layout_and_round_trip() {
        let t = tensor();
        let bytes = encode_dump(&t);
        assert_eq!(&bytes[..4], b"SKCH");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(f64::from_le_bytes(bytes[6..14].try_into().unwrap()), 1.575_42e9);
        assert_eq!(u32::from_le_bytes(bytes[22..26].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[26..30].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 30 + 6 * 16 + 6 * 8 + 3 * 8);
        assert_eq!(f64::from_le_bytes(bytes[30..38].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(bytes[38..46].try_into().unwrap()), -2.0);
        let back = decode_dump(&bytes, Path::new("x")).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn dump_corruption_detected() {
        let bytes = encode_dump(&tensor());
        let p = Path::new("x");
        assert!(matches!(
            decode_dump(&bytes[..bytes.len() - 1], p),
            Err(IoError::Truncated { .. })
        ));
        assert!(matches!(decode_dump(&bytes[..10], p), Err(IoError::Truncated { .. })));
        assert!(matches!(decode_dump(b"NOPE", p), Err(IoError::BadMagic { .. })));
        let mut v = bytes.clone();
        v[4] = 9;
        assert!(matches!(decode_dump(&v, p), Err(IoError::Version { .. })));
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, 1.0, -2.5, 1e-300, 123456789.123, 1e-9, 3.0e8, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("traj.csv");
        let traj = Trajectory::new(
            vec![0.0, 1.0, 2.0],
            vec![
                Vec3::new(1.0, 2.0, 3.0),
                Vec3::new(2.0, 2.0, 3.0),
                Vec3::new(3.0, 2.0, 3.0),
            ],
            None,
        )
        .unwrap();
        write_trajectory_csv(&p, &traj, true).unwrap();
        assert_eq!(read_trajectory_csv(&p).unwrap(), traj);
        write_trajectory_csv(&p, &traj, false).unwrap();
        assert_eq!(read_trajectory_csv(&p).unwrap().positions(), traj.positions());
        std::fs::write(&p, "t_s,x_m,y_m,z_m\n0,1,2,3\n1,1,2\n").unwrap();
        match read_trajectory_csv(&p) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "time,x,y,z\n").unwrap();
        assert!(read_trajectory_csv(&p).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_csv(&p, &["rmse=1".into()], "a,b", vec![vec![1.0, 2e-9], vec![3.0, -4.0]]).unwrap();
        let (c, h, rows) = read_csv(&p).unwrap();
        assert_eq!(c, vec!["rmse=1"]);
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows, vec![vec![1.0, 2e-9], vec![3.0, -4.0]]);
    }
}
