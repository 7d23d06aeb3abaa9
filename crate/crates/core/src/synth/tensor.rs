use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ds_mse_series, Result, SynthError};
use crate::analysis::rms_delay_spread;

/// Carrier and sampling of a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub fc_hz: f64,
    pub rate_hz: f64,
}

/// Time-varying channel impulse response: `n_paths` rows by `T` snapshots,
/// row-major. Delays are sorted ascending within every snapshot; rows that
/// carry no path have `h = 0` and repeat the last delay of the snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    n_paths: usize,
    h: Vec<Complex64>,
    tau: Vec<f64>,
    timestamps: Vec<f64>,
    meta: TensorMeta,
}

impl ChannelTensor {
    pub fn new(
        n_paths: usize,
        h: Vec<Complex64>,
        tau: Vec<f64>,
        timestamps: Vec<f64>,
        meta: TensorMeta,
    ) -> Result<Self> {
        let t = timestamps.len();
        if h.len() != n_paths * t || tau.len() != n_paths * t {
            return Err(SynthError::DimensionMismatch(format!(
                "{n_paths} paths x {t} snapshots needs {} entries, got h={} tau={}",
                n_paths * t,
                h.len(),
                tau.len()
            )));
        }
        if !tau.iter().all(|d| d.is_finite() && *d >= 0.0) {
            return Err(SynthError::DimensionMismatch(
                "delays must be finite and non-negative".into(),
            ));
        }
        if !h.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(SynthError::DimensionMismatch("non-finite channel coefficient".into()));
        }
        if timestamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SynthError::DimensionMismatch("timestamps must increase".into()));
        }
        Ok(Self {
            n_paths,
            h,
            tau,
            timestamps,
            meta,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_snapshots(&self) -> usize {
        self.timestamps.len()
    }

    pub fn h(&self) -> &[Complex64] {
        &self.h
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn meta(&self) -> TensorMeta {
        self.meta
    }

    pub fn fc_hz(&self) -> f64 {
        self.meta.fc_hz
    }

    pub fn rate_hz(&self) -> f64 {
        self.meta.rate_hz
    }

    pub fn h_at(&self, path: usize, snapshot: usize) -> Complex64 {
        self.h[path * self.n_snapshots() + snapshot]
    }

    pub fn tau_at(&self, path: usize, snapshot: usize) -> f64 {
        self.tau[path * self.n_snapshots() + snapshot]
    }

    /// Coefficient row of one path.
    pub fn path_row(&self, path: usize) -> &[Complex64] {
        let t = self.n_snapshots();
        &self.h[path * t..(path + 1) * t]
    }

    pub fn delay_row(&self, path: usize) -> &[f64] {
        let t = self.n_snapshots();
        &self.tau[path * t..(path + 1) * t]
    }

    /// `(tau, h)` of every row at one snapshot.
    pub fn snapshot(&self, snapshot: usize) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        (0..self.n_paths).map(move |l| (self.tau_at(l, snapshot), self.h_at(l, snapshot)))
    }

    /// Total power `sum |h|^2` at one snapshot.
    pub fn snapshot_power(&self, snapshot: usize) -> f64 {
        self.snapshot(snapshot).map(|(_, h)| h.norm_sqr()).sum()
    }

    /// Rms delay spread (s) of one snapshot.
    pub fn snapshot_delay_spread(&self, snapshot: usize) -> f64 {
        let (tau, p): (Vec<f64>, Vec<f64>) = self.snapshot(snapshot).map(|(t, h)| (t, h.norm_sqr())).unzip();
        rms_delay_spread(&p, &tau).unwrap_or(0.0)
    }

    fn column(&self, snapshot: usize, active_only: bool) -> Vec<(f64, Complex64)> {
        self.snapshot(snapshot)
            .filter(|(_, h)| !active_only || *h != Complex64::new(0.0, 0.0))
            .collect()
    }
}

/// Diagnostics of one cross-fade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub overlap: usize,
    /// Mismatch (dB) between the merged per-snapshot delay spread and the
    /// weight-interpolated spreads of the two inputs; `None` without overlap.
    pub ds_mse_db: Option<f64>,
}

fn write_column(
    h: &mut [Complex64],
    tau: &mut [f64],
    n_out: usize,
    t_out: usize,
    col: usize,
    entries: &[(f64, Complex64)],
) {
    let fill_tau = entries.last().map_or(0.0, |e| e.0);
    for l in 0..n_out {
        let (d, c) = entries.get(l).copied().unwrap_or((fill_tau, Complex64::new(0.0, 0.0)));
        h[l * t_out + col] = c;
        tau[l * t_out + col] = d;
    }
}

/// Cross-fade `b` onto the tail of `a`; the last `overlap` snapshots of `a`
/// coincide with the first `overlap` of `b`.
///
/// Within the overlap, paths present in both inputs at the same delay fade
/// linearly in amplitude; other paths fade with square-root weights so that
/// the total power moves smoothly from `a` to `b`.
pub fn merge_segments(a: &ChannelTensor, b: &ChannelTensor, overlap: usize) -> Result<(ChannelTensor, MergeReport)> {
    if a.meta != b.meta {
        return Err(SynthError::Incompatible("carrier or rate differ".into()));
    }
    let (ta, tb) = (a.n_snapshots(), b.n_snapshots());
    if overlap > ta || overlap > tb {
        return Err(SynthError::Incompatible(format!(
            "overlap {overlap} exceeds segment lengths {ta} and {tb}"
        )));
    }
    let a_only = ta - overlap;
    for j in 0..overlap {
        let (x, y) = (a.timestamps[a_only + j], b.timestamps[j]);
        if (x - y).abs() > 1e-9 * x.abs().max(1.0) {
            return Err(SynthError::Incompatible(format!(
                "overlap timestamps differ at {j}: {x} vs {y}"
            )));
        }
    }
    if overlap == 0 {
        if let (Some(x), Some(y)) = (a.timestamps.last(), b.timestamps.first()) {
            if !(y > x) {
                return Err(SynthError::Incompatible(
                    "second tensor does not follow the first".into(),
                ));
            }
        }
    }

    let mut columns = Vec::with_capacity(overlap);
    let mut ds_merged = Vec::with_capacity(overlap);
    let mut ds_target = Vec::with_capacity(overlap);
    for j in 0..overlap {
        let w = (j + 1) as f64 / (overlap + 1) as f64;
        let (wa, wb) = ((1.0 - w).sqrt(), w.sqrt());
        let ca = a.column(a_only + j, true);
        let cb = b.column(j, true);
        let mut out = Vec::with_capacity(ca.len() + cb.len());
        let (mut i, mut k) = (0, 0);
        while i < ca.len() || k < cb.len() {
            match (ca.get(i), cb.get(k)) {
                (Some(&(da, ha)), Some(&(db, hb))) if da == db => {
                    out.push((da, ha * (1.0 - w) + hb * w));
                    i += 1;
                    k += 1;
                }
                (Some(&(da, ha)), Some(&(db, _))) if da < db => {
                    out.push((da, ha * wa));
                    i += 1;
                }
                (Some(&(da, ha)), None) => {
                    out.push((da, ha * wa));
                    i += 1;
                }
                (_, Some(&(db, hb))) => {
                    out.push((db, hb * wb));
                    k += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        let spread = |c: &[(f64, Complex64)]| {
            let (t, p): (Vec<f64>, Vec<f64>) = c.iter().map(|(d, h)| (*d, h.norm_sqr())).unzip();
            rms_delay_spread(&p, &t).unwrap_or(0.0)
        };
        ds_merged.push(spread(&out));
        ds_target.push((1.0 - w) * spread(&ca) + w * spread(&cb));
        columns.push(out);
    }

    let n_out = a
        .n_paths
        .max(b.n_paths)
        .max(columns.iter().map(Vec::len).max().unwrap_or(0));
    let t_out = ta + tb - overlap;
    let mut h = vec![Complex64::new(0.0, 0.0); n_out * t_out];
    let mut tau = vec![0.0; n_out * t_out];
    for t in 0..a_only {
        write_column(&mut h, &mut tau, n_out, t_out, t, &a.column(t, false));
    }
    for (j, col) in columns.iter().enumerate() {
        write_column(&mut h, &mut tau, n_out, t_out, a_only + j, col);
    }
    for t in overlap..tb {
        write_column(&mut h, &mut tau, n_out, t_out, ta + t - overlap, &b.column(t, false));
    }
    let mut timestamps = a.timestamps.clone();
    timestamps.extend_from_slice(&b.timestamps[overlap..]);
    let merged = ChannelTensor::new(n_out, h, tau, timestamps, a.meta)?;
    let report = MergeReport {
        overlap,
        ds_mse_db: (overlap > 0).then(|| ds_mse_series(&ds_merged, &ds_target)),
    };
    Ok((merged, report))
}
