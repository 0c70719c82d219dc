//! Tensor state lattice, time-sliced value iterates and the weighted norms.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// `nodes_per_dim^dim` points on `[-x_max, x_max]^dim`, first coordinate fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLattice {
    dim: usize,
    nodes_per_dim: usize,
    x_max: f64,
    axis: Vec<f64>,
}

/// Corner indices and multilinear weights of a lattice cell.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub corners: Vec<(usize, f64)>,
    pub clamped: bool,
}

impl StateLattice {
    pub const MAX_DIM: usize = 4;

    pub fn new(dim: usize, nodes_per_dim: usize, x_max: f64) -> Result<Self> {
        if dim == 0 || dim > Self::MAX_DIM {
            return Err(Error::Lattice(format!(
                "state dimension {dim} outside 1..={}",
                Self::MAX_DIM
            )));
        }
        if nodes_per_dim < 2 {
            return Err(Error::Lattice(
                "a lattice needs at least two nodes per dimension".into(),
            ));
        }
        if !(x_max > 0.0) || !x_max.is_finite() {
            return Err(Error::Lattice(format!(
                "box half-width {x_max} must be positive"
            )));
        }
        let h = 2.0 * x_max / (nodes_per_dim - 1) as f64;
        let mut axis: Vec<f64> = (0..nodes_per_dim).map(|k| -x_max + k as f64 * h).collect();
        axis[nodes_per_dim - 1] = x_max;
        Ok(StateLattice {
            dim,
            nodes_per_dim,
            x_max,
            axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_dim(&self) -> usize {
        self.nodes_per_dim
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.x_max / (self.nodes_per_dim - 1) as f64
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn len(&self) -> usize {
        self.nodes_per_dim.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-dimension indices of a flat node index.
    pub fn multi_index(&self, mut node: usize) -> Vec<usize> {
        (0..self.dim)
            .map(|_| {
                let k = node % self.nodes_per_dim;
                node /= self.nodes_per_dim;
                k
            })
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .rev()
            .fold(0, |acc, &k| acc * self.nodes_per_dim + k)
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .into_iter()
            .map(|k| self.axis[k])
            .collect()
    }

    /// Multilinear stencil of `y`, clamping coordinates to the box.
    pub fn stencil(&self, y: &[f64]) -> Stencil {
        let n = self.nodes_per_dim;
        let h = self.spacing();
        let mut base = [0usize; Self::MAX_DIM];
        let mut frac = [0.0f64; Self::MAX_DIM];
        let mut clamped = false;
        for d in 0..self.dim {
            let mut u = (y[d] + self.x_max) / h;
            if !(u >= 0.0) {
                clamped = true;
                u = 0.0;
            } else if u > (n - 1) as f64 {
                clamped = true;
                u = (n - 1) as f64;
            }
            let i0 = (u.floor() as usize).min(n - 2);
            base[d] = i0;
            frac[d] = u - i0 as f64;
        }
        let mut corners = Vec::with_capacity(1 << self.dim);
        for mask in 0..(1usize << self.dim) {
            let mut w = 1.0;
            let mut flat = 0;
            let mut stride = 1;
            for d in 0..self.dim {
                let up = (mask >> d) & 1 == 1;
                w *= if up { frac[d] } else { 1.0 - frac[d] };
                flat += (base[d] + up as usize) * stride;
                stride *= n;
            }
            if w != 0.0 {
                corners.push((flat, w));
            }
        }
        Stencil { corners, clamped }
    }

    /// Interpolate a field of `width` components per node into `out`; returns
    /// whether the query was clamped.
    pub fn interpolate_into(
        &self,
        field: &[f64],
        width: usize,
        y: &[f64],
        out: &mut [f64],
    ) -> bool {
        let st = self.stencil(y);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (node, w) in st.corners {
            for (o, v) in out.iter_mut().zip(&field[node * width..(node + 1) * width]) {
                *o += w * v;
            }
        }
        st.clamped
    }
}

/// Values and gradients on `time grid × lattice`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueIterate {
    pub times: Vec<f64>,
    pub lattice: StateLattice,
    pub alpha: f64,
    /// `values[i][node]`
    pub values: Vec<Vec<f64>>,
    /// `gradients[i][node * dim + d]`
    pub gradients: Vec<Vec<f64>>,
}

impl ValueIterate {
    pub fn zeros(times: Vec<f64>, lattice: StateLattice, alpha: f64) -> Self {
        let (m, n, d) = (times.len(), lattice.len(), lattice.dim());
        ValueIterate {
            times,
            alpha,
            values: vec![vec![0.0; n]; m],
            gradients: vec![vec![0.0; n * d]; m],
            lattice,
        }
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty time grid")
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn gradient(&self, i: usize, node: usize) -> &[f64] {
        let d = self.dim();
        &self.gradients[i][node * d..(node + 1) * d]
    }

    pub fn sup_value(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_t (T - t)^α sup_x |D v(t, x)|`
    pub fn sup_weighted_gradient(&self) -> f64 {
        let horizon = self.horizon();
        (0..self.times.len())
            .map(|i| (horizon - self.times[i]).powf(self.alpha) * self.max_gradient_norm(i))
            .fold(0.0, f64::max)
    }

    pub fn max_gradient_norm(&self, i: usize) -> f64 {
        self.gradients[i]
            .chunks(self.dim())
            .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Unweighted solution-space norm.
    pub fn s_norm(&self) -> f64 {
        self.sup_value() + self.sup_weighted_gradient()
    }

    fn check_compatible(&self, other: &ValueIterate) -> Result<()> {
        if self.times != other.times || self.lattice != other.lattice || self.alpha != other.alpha {
            return Err(Error::GridMismatch(
                "iterates differ in time grid, lattice or exponent".into(),
            ));
        }
        Ok(())
    }

    /// Per-slice `max|Δv| + (T - t)^α max|ΔDv|`.
    pub fn slice_distances(&self, other: &ValueIterate) -> Result<Vec<f64>> {
        self.check_compatible(other)?;
        let horizon = self.horizon();
        let d = self.dim();
        Ok((0..self.times.len())
            .map(|i| {
                let dv = self.values[i]
                    .iter()
                    .zip(&other.values[i])
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                let dg = self.gradients[i]
                    .chunks(d)
                    .zip(other.gradients[i].chunks(d))
                    .map(|(a, b)| {
                        a.iter()
                            .zip(b)
                            .map(|(x, y)| (x - y).powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .fold(0.0f64, f64::max);
                let tau = horizon - self.times[i];
                dv + if tau > 0.0 {
                    tau.powf(self.alpha) * dg
                } else {
                    0.0
                }
            })
            .collect())
    }

    /// Writes `t,x1..xN,v,g1..gN` rows with round-trip float formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|k| format!("x{k}")));
        header.push("v".into());
        header.extend((1..=d).map(|k| format!("g{k}")));
        w.write_record(&header)?;
        for (i, &t) in self.times.iter().enumerate() {
            for node in 0..self.lattice.len() {
                let mut row = vec![format!("{t}")];
                row.extend(self.lattice.point(node).iter().map(|x| format!("{x}")));
                row.push(format!("{}", self.values[i][node]));
                row.extend(self.gradient(i, node).iter().map(|g| format!("{g}")));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl ValueIterate {
    /// Reads the layout written by [`ValueIterate::write_csv`]. The lattice is
    /// rebuilt from the node count and the largest first coordinate.
    pub fn read_csv<R: Read>(input: R, alpha: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let width = header.len();
        if width < 4 || (width - 2) % 2 != 0 || &header[0] != "t" {
            return Err(Error::Lattice(format!(
                "unexpected solution header {header:?}"
            )));
        }
        let d = (width - 2) / 2;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Lattice(format!("bad number {f:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let mut times: Vec<f64> = Vec::new();
        for row in &rows {
            if times.last() != Some(&row[0]) {
                times.push(row[0]);
            }
        }
        if times.is_empty() || !rows.len().is_multiple_of(times.len()) {
            return Err(Error::Lattice(
                "solution rows do not form a time x lattice table".into(),
            ));
        }
        let per_slice = rows.len() / times.len();
        let nodes = (per_slice as f64).powf(1.0 / d as f64).round() as usize;
        let x_max = rows[..per_slice]
            .iter()
            .fold(f64::NEG_INFINITY, |m, r| m.max(r[1]));
        let lattice = StateLattice::new(d, nodes, x_max)?;
        if lattice.len() != per_slice {
            return Err(Error::Lattice(format!(
                "{per_slice} rows per slice is not a {d}-dimensional tensor"
            )));
        }
        let mut v = ValueIterate::zeros(times, lattice, alpha);
        for (k, row) in rows.iter().enumerate() {
            let (i, node) = (k / per_slice, k % per_slice);
            if row[0] != v.times[i] || row[1..=d] != v.lattice.point(node)[..] {
                return Err(Error::Lattice(format!(
                    "row {} is out of lattice order",
                    k + 1
                )));
            }
            v.values[i][node] = row[d + 1];
            v.gradients[i][node * d..(node + 1) * d].copy_from_slice(&row[d + 2..]);
        }
        Ok(v)
    }
}

/// `ln sup_t e^{-β(T-t)} [‖Δv‖₀ + (T-t)^α ‖ΔDv‖₀]`, `-∞` for identical iterates.
pub fn log_weighted_norm(v1: &ValueIterate, v2: &ValueIterate, beta: f64) -> Result<f64> {
    let horizon = v1.horizon();
    Ok(v1
        .slice_distances(v2)?
        .into_iter()
        .zip(&v1.times)
        .filter(|(m, _)| *m > 0.0)
        .map(|(m, t)| -beta * (horizon - t) + m.ln())
        .fold(f64::NEG_INFINITY, f64::max))
}

/// The β-weighted distance; may underflow to zero for large β, use
/// `log_weighted_norm` for ratios.
pub fn weighted_norm(v1: &ValueIterate, v2: &ValueIterate, beta: f64) -> Result<f64> {
    Ok(log_weighted_norm(v1, v2, beta)?.exp())
}

/// `exp(num - den)` with `0/0 = 0`.
pub fn ratio_from_logs(num: f64, den: f64) -> f64 {
    if num == f64::NEG_INFINITY {
        0.0
    } else {
        (num - den).exp()
    }
}
