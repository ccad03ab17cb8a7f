//! Periodic lattice, its dual, Fourier transforms and the discrete delta.
//!
//! Sites `x` and dual points `k = j/L` share one row-major index layout with
//! the last axis fastest.  The forward transform is unnormalized,
//! `f̂(k) = Σ_x f(x) e^{-i2πk·x}`, and the inverse carries the factor `1/|Λ|`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length and dimension of the periodic lattice `{0,…,L−1}^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeConfig {
    d: usize,
    l: usize,
}

impl LatticeConfig {
    pub fn new(d: usize, l: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if l < 2 {
            return Err(Error::InvalidInput(format!("side length must be at least 2, got {l}")));
        }
        let vol = (l as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
        if vol > (1u128 << 32) {
            return Err(Error::Guard(format!("lattice with L={l}, d={d} is too large")));
        }
        Ok(Self { d, l })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// Number of sites `|Λ| = L^d`.
    pub fn volume(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    /// Row-major index of the coordinates, each reduced mod `L`.
    pub fn index(&self, coords: &[i64]) -> usize {
        debug_assert_eq!(coords.len(), self.d);
        let l = self.l as i64;
        coords.iter().fold(0usize, |acc, &c| acc * self.l + c.rem_euclid(l) as usize)
    }

    /// Coordinates in `{0,…,L−1}^d` of a row-major index.
    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.d];
        for a in (0..self.d).rev() {
            out[a] = idx % self.l;
            idx /= self.l;
        }
        out
    }

    /// Coordinates mapped to the symmetric range `(−L/2, L/2]`.
    pub fn signed_coords(&self, idx: usize) -> Vec<i64> {
        let l = self.l as i64;
        self.coords(idx)
            .into_iter()
            .map(|c| {
                let c = c as i64;
                if 2 * c > l {
                    c - l
                } else {
                    c
                }
            })
            .collect()
    }

    /// Dual-lattice point `k = j/L` stored at index `idx`.
    pub fn momentum(&self, idx: usize) -> Vec<f64> {
        self.coords(idx).into_iter().map(|j| j as f64 / self.l as f64).collect()
    }

    /// Index of a dual point given in torus coordinates, if it lies on the grid.
    pub fn momentum_index(&self, k: &[f64]) -> Option<usize> {
        if k.len() != self.d {
            return None;
        }
        let mut num = Vec::with_capacity(self.d);
        for &kv in k {
            let s = kv * self.l as f64;
            let r = s.round();
            if (s - r).abs() > 1e-9 {
                return None;
            }
            num.push(r as i64);
        }
        Some(self.index(&num))
    }

    /// Index of `−k` (equivalently `−x`).
    pub fn neg_index(&self, idx: usize) -> usize {
        let c: Vec<i64> = self.coords(idx).into_iter().map(|v| -(v as i64)).collect();
        self.index(&c)
    }

    /// Index of the sum of two points.
    pub fn add_index(&self, a: usize, b: usize) -> usize {
        let ca = self.coords(a);
        let cb = self.coords(b);
        let c: Vec<i64> = ca.iter().zip(&cb).map(|(&u, &v)| (u + v) as i64).collect();
        self.index(&c)
    }

    /// Index of `q·k` for an integer multiplier `q`.
    pub fn scale_index(&self, idx: usize, q: i64) -> usize {
        let c: Vec<i64> = self.coords(idx).into_iter().map(|v| q * v as i64).collect();
        self.index(&c)
    }
}

/// Which representation a [`FieldState`] currently holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    Site,
    Spectral,
}

impl Representation {
    fn flag(self) -> u8 {
        match self {
            Representation::Site => 0,
            Representation::Spectral => 1,
        }
    }

    fn from_flag(f: u8) -> Result<Self> {
        match f {
            0 => Ok(Representation::Site),
            1 => Ok(Representation::Spectral),
            other => Err(Error::Format(format!("unknown representation flag {other}"))),
        }
    }
}

/// Complex field on the lattice in either site or spectral representation.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub lattice: LatticeConfig,
    pub values: Vec<Complex64>,
    pub repr: Representation,
}

impl FieldState {
    pub fn new(lattice: LatticeConfig, values: Vec<Complex64>, repr: Representation) -> Result<Self> {
        if values.len() != lattice.volume() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, lattice has {} sites",
                values.len(),
                lattice.volume()
            )));
        }
        Ok(Self { lattice, values, repr })
    }

    pub fn zeros(lattice: LatticeConfig, repr: Representation) -> Self {
        Self { lattice, values: vec![Complex64::new(0.0, 0.0); lattice.volume()], repr }
    }

    /// Returns the site-space values, transforming if necessary.
    pub fn to_site(&self) -> FieldState {
        match self.repr {
            Representation::Site => self.clone(),
            Representation::Spectral => inverse_transform(self).expect("representation checked"),
        }
    }

    /// Returns the spectral values, transforming if necessary.
    pub fn to_spectral(&self) -> FieldState {
        match self.repr {
            Representation::Spectral => self.clone(),
            Representation::Site => forward_transform(self).expect("representation checked"),
        }
    }
}

/// Multi-dimensional FFT on an `n^d` grid built from one-dimensional passes.
#[derive(Clone)]
pub struct NdFft {
    d: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for NdFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NdFft").field("d", &self.d).field("n", &self.n).finish()
    }
}

impl NdFft {
    pub fn new(lattice: LatticeConfig) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            d: lattice.d(),
            n: lattice.l(),
            fwd: planner.plan_fft_forward(lattice.l()),
            inv: planner.plan_fft_inverse(lattice.l()),
        }
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let total = n.pow(self.d as u32);
        assert_eq!(data.len(), total, "grid size mismatch");
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // Contiguous last axis: all rows in one call.
        plan.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in (0..self.d.saturating_sub(1)).rev() {
            let stride = n.pow((self.d - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..total).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[start + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[start + j * stride] = *v;
                    }
                }
            }
        }
    }

    /// In-place unnormalized forward transform `Σ_x f(x) e^{-i2πk·x}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
    }

    /// In-place inverse transform including the factor `1/n^d`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
        let s = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    /// In-place inverse transform without normalization.
    pub fn inverse_unnormalized(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
    }
}

/// Forward transform of a site-space field.
pub fn forward_transform(f: &FieldState) -> Result<FieldState> {
    if f.repr != Representation::Site {
        return Err(Error::InvalidInput("forward transform expects a site-space field".into()));
    }
    let mut values = f.values.clone();
    NdFft::new(f.lattice).forward(&mut values);
    Ok(FieldState { lattice: f.lattice, values, repr: Representation::Spectral })
}

/// Inverse transform of a spectral field.
pub fn inverse_transform(g: &FieldState) -> Result<FieldState> {
    if g.repr != Representation::Spectral {
        return Err(Error::InvalidInput("inverse transform expects a spectral field".into()));
    }
    let mut values = g.values.clone();
    NdFft::new(g.lattice).inverse(&mut values);
    Ok(FieldState { lattice: g.lattice, values, repr: Representation::Site })
}

/// Discrete delta `δ_Λ(k)` for `k` given by integer numerators over `L`.
pub fn delta_lattice(lattice: &LatticeConfig, k_numerators: &[i64]) -> f64 {
    let l = lattice.l() as i64;
    if k_numerators.iter().all(|&n| n.rem_euclid(l) == 0) {
        lattice.volume() as f64
    } else {
        0.0
    }
}

/// Mode average `(1/|Λ|) Σ_k F(k)` of values tabulated on the dual lattice.
pub fn mode_average<T>(values: &[T]) -> T
where
    T: Copy + std::iter::Sum<T> + std::ops::Div<f64, Output = T>,
{
    values.iter().copied().sum::<T>() / values.len() as f64
}

/// Mode average of a function evaluated on every dual-lattice point.
pub fn mode_average_fn<F>(lattice: &LatticeConfig, f: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let n = lattice.volume();
    (0..n).map(|i| f(&lattice.momentum(i))).sum::<f64>() / n as f64
}

const SNAPSHOT_MAGIC: &[u8; 5] = b"WKIN1";

/// Writes a field in the `WKIN1` binary snapshot layout.
pub fn write_snapshot<W: Write>(mut w: W, field: &FieldState) -> Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(field.lattice.d() as u32).to_le_bytes())?;
    w.write_all(&(field.lattice.l() as u32).to_le_bytes())?;
    w.write_all(&[field.repr.flag()])?;
    for v in &field.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a field stored in the `WKIN1` binary snapshot layout.
pub fn read_snapshot<R: Read>(mut r: R) -> Result<FieldState> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Format("missing WKIN1 magic bytes".into()));
    }
    let mut u = [0u8; 4];
    r.read_exact(&mut u)?;
    let d = u32::from_le_bytes(u) as usize;
    r.read_exact(&mut u)?;
    let l = u32::from_le_bytes(u) as usize;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let repr = Representation::from_flag(flag[0])?;
    let lattice = LatticeConfig::new(d, l).map_err(|e| Error::Format(e.to_string()))?;
    let mut values = Vec::with_capacity(lattice.volume());
    let mut b = [0u8; 8];
    for _ in 0..lattice.volume() {
        r.read_exact(&mut b)?;
        let re = f64::from_le_bytes(b);
        r.read_exact(&mut b)?;
        let im = f64::from_le_bytes(b);
        values.push(Complex64::new(re, im));
    }
    FieldState::new(lattice, values, repr)
}

pub fn save_snapshot(path: &Path, field: &FieldState) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<FieldState> {
    read_snapshot(BufReader::new(File::open(path)?))
}
