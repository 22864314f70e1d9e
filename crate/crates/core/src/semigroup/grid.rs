use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lattice geometry: `p_i = p_min + i·dp`, `q_j = q_min + j·dq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub np: usize,
    pub nq: usize,
    pub p_min: f64,
    pub q_min: f64,
    pub dp: f64,
    pub dq: f64,
}

impl GridGeometry {
    /// Symmetric lattice on `[−half_p, half_p) × [−half_q, half_q)`, which
    /// contains the origin when the sizes are even.
    pub fn symmetric(np: usize, nq: usize, half_p: f64, half_q: f64) -> Result<Self> {
        if np < 2 || nq < 2 {
            return Err(Error::InvalidParameter(format!("grid needs at least 2x2 points, got {np}x{nq}")));
        }
        if !(half_p > 0.0 && half_q > 0.0 && half_p.is_finite() && half_q.is_finite()) {
            return Err(Error::InvalidParameter("grid extents must be positive and finite".into()));
        }
        Ok(Self {
            np,
            nq,
            p_min: -half_p,
            q_min: -half_q,
            dp: 2.0 * half_p / np as f64,
            dq: 2.0 * half_q / nq as f64,
        })
    }

    pub fn p(&self, i: usize) -> f64 {
        self.p_min + i as f64 * self.dp
    }

    pub fn q(&self, j: usize) -> f64 {
        self.q_min + j as f64 * self.dq
    }

    pub fn cell(&self) -> f64 {
        self.dp * self.dq
    }

    pub fn len(&self) -> usize {
        self.np * self.nq
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.np < 2 || self.nq < 2 || !(self.dp > 0.0) || !(self.dq > 0.0) {
            return Err(Error::InvalidParameter("invalid grid geometry".into()));
        }
        if !self.p_min.is_finite() || !self.q_min.is_finite() || !self.dp.is_finite() || !self.dq.is_finite() {
            return Err(Error::InvalidParameter("non-finite grid geometry".into()));
        }
        Ok(())
    }
}

/// Sampled phase-space density. Values are stored row-major with the
/// momentum index outermost: `values[i * nq + j] = w(p_i, q_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub geometry: GridGeometry,
    pub values: Vec<f64>,
    pub hbar: f64,
    /// Marks a classical probability density rather than a Wigner function.
    pub classical: bool,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    #[serde(flatten)]
    geometry: GridGeometry,
    hbar: f64,
    classical: bool,
}

impl WignerGrid {
    pub fn zeros(geometry: GridGeometry, hbar: f64) -> Result<Self> {
        geometry.validate()?;
        if !(hbar >= 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be finite and >= 0, got {hbar}")));
        }
        Ok(Self { geometry, values: vec![0.0; geometry.len()], hbar, classical: false })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(geometry: GridGeometry, hbar: f64, f: F) -> Result<Self> {
        let mut g = Self::zeros(geometry, hbar)?;
        for i in 0..geometry.np {
            let p = geometry.p(i);
            for j in 0..geometry.nq {
                g.values[i * geometry.nq + j] = f(p, geometry.q(j));
            }
        }
        Ok(g)
    }

    /// Gaussian density with the given mean `(p, q)` and covariance (in
    /// `(p, q)` ordering). It is a pure state when `det cov = ħ²/4`.
    pub fn gaussian(geometry: GridGeometry, hbar: f64, mean: [f64; 2], cov: Matrix2<f64>) -> Result<Self> {
        let det = cov.determinant();
        if !(det > 0.0) || cov[(0, 0)] <= 0.0 {
            return Err(Error::InvalidParameter("covariance must be positive definite".into()));
        }
        if hbar > 0.0 && det < hbar * hbar / 4.0 * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "covariance violates the uncertainty bound: det {det} < hbar^2/4"
            )));
        }
        let inv = cov.try_inverse().expect("positive definite");
        let norm = 1.0 / (2.0 * PI * det.sqrt());
        Self::from_fn(geometry, hbar, |p, q| {
            let (x, y) = (p - mean[0], q - mean[1]);
            let quad = inv[(0, 0)] * x * x + 2.0 * inv[(0, 1)] * x * y + inv[(1, 1)] * y * y;
            norm * (-0.5 * quad).exp()
        })
    }

    pub fn as_classical(mut self) -> Self {
        self.classical = true;
        self
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.geometry.nq + j]
    }

    /// `∫ f w dp dq` by the rectangle rule.
    pub fn expectation<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        let g = &self.geometry;
        let mut sum = 0.0;
        for i in 0..g.np {
            let p = g.p(i);
            let row = &self.values[i * g.nq..(i + 1) * g.nq];
            sum += row.iter().enumerate().map(|(j, w)| f(p, g.q(j)) * w).sum::<f64>();
        }
        sum * g.cell()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.geometry.cell()
    }

    /// `⟨w, w⟩`.
    pub fn purity(&self) -> f64 {
        self.values.iter().map(|w| w * w).sum::<f64>() * self.geometry.cell()
    }

    /// Second-order Rényi entropy `−ln(2πħ⟨w, w⟩)`.
    pub fn renyi2_entropy(&self) -> Result<f64> {
        if self.hbar <= 0.0 {
            return Err(Error::InvalidParameter("Renyi entropy of a Wigner function needs hbar > 0".into()));
        }
        Ok(-(2.0 * PI * self.hbar * self.purity()).ln())
    }

    /// Boltzmann–Gibbs entropy `−∫ ρ ln(2πħρ)`, with the `2πħ` factor
    /// replaced by one when `ħ = 0`. Non-positive samples are skipped.
    pub fn bg_entropy(&self) -> f64 {
        let unit = if self.hbar > 0.0 { 2.0 * PI * self.hbar } else { 1.0 };
        let s: f64 = self.values.iter().filter(|&&r| r > 0.0).map(|&r| -r * (unit * r).ln()).sum();
        s * self.geometry.cell()
    }

    /// `max |w|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    /// `∫|w|` over the cells within `width` cells of the boundary.
    pub fn edge_mass(&self, width: usize) -> f64 {
        let g = &self.geometry;
        let mut sum = 0.0;
        for i in 0..g.np {
            let edge_row = i < width || i + width >= g.np;
            for j in 0..g.nq {
                if edge_row || j < width || j + width >= g.nq {
                    sum += self.get(i, j).abs();
                }
            }
        }
        sum * g.cell()
    }

    /// Mean vector and covariance matrix in `(p, q)` ordering.
    pub fn moments(&self) -> ([f64; 2], Matrix2<f64>) {
        let m = self.mass();
        let mp = self.expectation(|p, _| p) / m;
        let mq = self.expectation(|_, q| q) / m;
        let pp = self.expectation(|p, _| (p - mp).powi(2)) / m;
        let pq = self.expectation(|p, q| (p - mp) * (q - mq)) / m;
        let qq = self.expectation(|_, q| (q - mq).powi(2)) / m;
        ([mp, mq], Matrix2::new(pp, pq, pq, qq))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Writes `p,q,w` rows to `path` and the geometry to `path` with a
    /// `.json` extension.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        writeln!(out, "p,q,w")?;
        let g = &self.geometry;
        for i in 0..g.np {
            for j in 0..g.nq {
                writeln!(out, "{:e},{:e},{:e}", g.p(i), g.q(j), self.get(i, j))?;
            }
        }
        out.flush()?;
        let sidecar = Sidecar { geometry: *g, hbar: self.hbar, classical: self.classical };
        fs::write(path.with_extension("json"), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(path.with_extension("json"))?)?;
        let mut grid = Self::zeros(sidecar.geometry, sidecar.hbar)?;
        grid.classical = sidecar.classical;
        let reader = BufReader::new(fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::Csv("empty file".into()))??;
        if header.trim() != "p,q,w" {
            return Err(Error::Csv(format!("unexpected header {header:?}")));
        }
        let mut count = 0;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let w = line
                .split(',')
                .nth(2)
                .ok_or_else(|| Error::Csv(format!("short row {line:?}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Csv(format!("{e} in row {line:?}")))?;
            if count >= grid.values.len() {
                return Err(Error::Csv("more rows than the geometry allows".into()));
            }
            grid.values[count] = w;
            count += 1;
        }
        if count != grid.values.len() {
            return Err(Error::Csv(format!("expected {} rows, found {count}", grid.values.len())));
        }
        Ok(grid)
    }
}
