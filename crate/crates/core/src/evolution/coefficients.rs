//! Time-dependent coefficients of the second-order operators and the noise profile.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};

pub type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Coefficients a, b, c of `-a x'' + b x' + c x` and the noise multiplier g,
/// all functions of (time, space) on [0, T] x [0, 1].
#[derive(Clone)]
pub struct CoefficientField {
    pub a: FieldFn,
    pub b: FieldFn,
    pub c: FieldFn,
    pub g: FieldFn,
    pub horizon: f64,
    /// Hölder exponent in time, in (1/4, 1].
    pub holder_mu: f64,
    pub sector_shift: f64,
    pub space_holder_eps: f64,
    pub name: String,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("name", &self.name)
            .field("horizon", &self.horizon)
            .field("holder_mu", &self.holder_mu)
            .field("sector_shift", &self.sector_shift)
            .finish()
    }
}

/// Sampled bounds 0 < k1 <= |g| <= k2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBounds {
    pub k1: f64,
    pub k2: f64,
}

const SAMPLE_TIMES: usize = 65;
const SAMPLE_POINTS: usize = 129;

impl CoefficientField {
    pub fn new(
        name: impl Into<String>,
        horizon: f64,
        a: FieldFn,
        b: FieldFn,
        c: FieldFn,
        g: FieldFn,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::arg(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let field = CoefficientField {
            a,
            b,
            c,
            g,
            horizon,
            holder_mu: 1.0,
            sector_shift: 0.0,
            space_holder_eps: 1.0,
            name: name.into(),
        };
        field.validate()?;
        Ok(field)
    }

    pub fn with_metadata(
        mut self,
        holder_mu: f64,
        sector_shift: f64,
        space_holder_eps: f64,
    ) -> Result<Self> {
        if !(holder_mu > 0.25 && holder_mu <= 1.0) {
            return Err(Error::arg(format!(
                "holder_mu must lie in (1/4, 1], got {holder_mu}"
            )));
        }
        if !(sector_shift >= 0.0) {
            return Err(Error::arg("sector_shift must be nonnegative"));
        }
        if !(space_holder_eps > 0.0) {
            return Err(Error::arg("space_holder_eps must be positive"));
        }
        self.holder_mu = holder_mu;
        self.sector_shift = sector_shift;
        self.space_holder_eps = space_holder_eps;
        Ok(self)
    }

    /// Constant coefficients.
    pub fn constant(a: f64, b: f64, c: f64, g: f64, horizon: f64) -> Result<Self> {
        Self::new(
            "constant",
            horizon,
            Arc::new(move |_, _| a),
            Arc::new(move |_, _| b),
            Arc::new(move |_, _| c),
            Arc::new(move |_, _| g),
        )
    }

    /// Space-independent coefficients affine in time: `a = a0 + a1 t`, and so on.
    pub fn linear_in_time(p: &LinearInTime, horizon: f64) -> Result<Self> {
        let p = *p;
        Self::new(
            "linear_in_time",
            horizon,
            Arc::new(move |t, _| p.a0 + p.a1 * t),
            Arc::new(move |t, _| p.b0 + p.b1 * t),
            Arc::new(move |t, _| p.c0 + p.c1 * t),
            Arc::new(move |t, _| p.g0 + p.g1 * t),
        )
    }

    /// Variable-coefficient field used by the L^p scenario:
    ///
    /// ```text
    /// a = a0 + a1 t + a2 sin(pi xi)
    /// b = b0 (1 - 2 xi)
    /// c = c0 (1 + t xi)
    /// g = g0 (1 + g1 sin(pi xi) cos(2 pi t))
    /// ```
    pub fn lp_example(p: &LpExample, horizon: f64) -> Result<Self> {
        let p = *p;
        if !(p.g0 > 0.0 && p.g1.abs() < 1.0) {
            return Err(Error::arg(
                "lp_example needs g0 > 0 and |g1| < 1 so that k1 < |g| < k2",
            ));
        }
        Self::new(
            "lp_example",
            horizon,
            Arc::new(move |t, xi| p.a0 + p.a1 * t + p.a2 * (PI * xi).sin()),
            Arc::new(move |_, xi| p.b0 * (1.0 - 2.0 * xi)),
            Arc::new(move |t, xi| p.c0 * (1.0 + t * xi)),
            Arc::new(move |t, xi| p.g0 * (1.0 + p.g1 * (PI * xi).sin() * (2.0 * PI * t).cos())),
        )
    }

    /// Builds a named built-in from a parameter map; unknown parameter names are rejected.
    pub fn builtin(name: &str, params: &BTreeMap<String, f64>, horizon: f64) -> Result<Self> {
        match name {
            "constant" => {
                let mut p = ConstantParams::default();
                apply_params(
                    params,
                    &mut [
                        ("a", &mut p.a),
                        ("b", &mut p.b),
                        ("c", &mut p.c),
                        ("g", &mut p.g),
                    ],
                )?;
                Self::constant(p.a, p.b, p.c, p.g, horizon)
            }
            "linear_in_time" => {
                let mut p = LinearInTime::default();
                apply_params(
                    params,
                    &mut [
                        ("a0", &mut p.a0),
                        ("a1", &mut p.a1),
                        ("b0", &mut p.b0),
                        ("b1", &mut p.b1),
                        ("c0", &mut p.c0),
                        ("c1", &mut p.c1),
                        ("g0", &mut p.g0),
                        ("g1", &mut p.g1),
                    ],
                )?;
                Self::linear_in_time(&p, horizon)
            }
            "lp_example" => {
                let mut p = LpExample::default();
                apply_params(
                    params,
                    &mut [
                        ("a0", &mut p.a0),
                        ("a1", &mut p.a1),
                        ("a2", &mut p.a2),
                        ("b0", &mut p.b0),
                        ("c0", &mut p.c0),
                        ("g0", &mut p.g0),
                        ("g1", &mut p.g1),
                    ],
                )?;
                Self::lp_example(&p, horizon)
            }
            other => Err(Error::arg(format!("unknown coefficient builtin '{other}'"))),
        }
    }

    /// Reads a tabulated field from CSV with header `t,xi,a,b,c,g`.
    ///
    /// Rows must cover a full (time x space) tensor lattice; values in between
    /// are bilinearly interpolated and queries outside are clamped.
    pub fn from_lattice_csv(path: &Path) -> Result<Self> {
        let lattice = CoefficientLattice::read(path)?;
        let horizon = *lattice.times.last().unwrap();
        let lat = Arc::new(lattice);
        let mk = |k: usize| -> FieldFn {
            let lat = Arc::clone(&lat);
            Arc::new(move |t, xi| lat.interpolate(k, t, xi))
        };
        let mut field = Self::new("lattice", horizon, mk(0), mk(1), mk(2), mk(3))?;
        field.name = format!("lattice:{}", path.display());
        Ok(field)
    }

    /// Checks ellipticity and noise bounds on a dense sample grid.
    pub fn validate(&self) -> Result<NoiseBounds> {
        let mut k1 = f64::INFINITY;
        let mut k2 = 0.0f64;
        for i in 0..SAMPLE_TIMES {
            let t = self.horizon * i as f64 / (SAMPLE_TIMES - 1) as f64;
            for j in 0..SAMPLE_POINTS {
                let xi = j as f64 / (SAMPLE_POINTS - 1) as f64;
                let a = (self.a)(t, xi);
                if !(a > 0.0) {
                    return Err(Error::Ellipticity { t, xi, value: a });
                }
                for v in [(self.b)(t, xi), (self.c)(t, xi)] {
                    if !v.is_finite() {
                        return Err(Error::arg(format!("non-finite coefficient at ({t}, {xi})")));
                    }
                }
                let g = (self.g)(t, xi).abs();
                if !g.is_finite() {
                    return Err(Error::arg(format!(
                        "non-finite noise coefficient at ({t}, {xi})"
                    )));
                }
                k1 = k1.min(g);
                k2 = k2.max(g);
                if g == 0.0 {
                    return Err(Error::NoiseBounds {
                        t,
                        xi,
                        value: g,
                        k1: 0.0,
                        k2,
                    });
                }
            }
        }
        Ok(NoiseBounds { k1, k2 })
    }
}

fn apply_params(params: &BTreeMap<String, f64>, slots: &mut [(&str, &mut f64)]) -> Result<()> {
    for (key, value) in params {
        match slots.iter_mut().find(|(name, _)| name == key) {
            Some((_, slot)) => **slot = *value,
            None => {
                let known: Vec<&str> = slots.iter().map(|(n, _)| *n).collect();
                return Err(Error::arg(format!(
                    "unknown coefficient parameter '{key}' (known: {})",
                    known.join(", ")
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct ConstantParams {
    a: f64,
    b: f64,
    c: f64,
    g: f64,
}

impl Default for ConstantParams {
    fn default() -> Self {
        ConstantParams {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            g: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearInTime {
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
    pub c0: f64,
    pub c1: f64,
    pub g0: f64,
    pub g1: f64,
}

impl Default for LinearInTime {
    fn default() -> Self {
        LinearInTime {
            a0: 1.0,
            a1: 1.0,
            b0: 0.0,
            b1: 0.0,
            c0: 0.0,
            c1: 0.0,
            g0: 1.0,
            g1: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpExample {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub b0: f64,
    pub c0: f64,
    pub g0: f64,
    pub g1: f64,
}

impl Default for LpExample {
    fn default() -> Self {
        LpExample {
            a0: 1.0,
            a1: 0.5,
            a2: 0.2,
            b0: 0.5,
            c0: 0.5,
            g0: 1.0,
            g1: 0.25,
        }
    }
}

#[derive(Debug, Deserialize)]
struct LatticeRow {
    t: f64,
    xi: f64,
    a: f64,
    b: f64,
    c: f64,
    g: f64,
}

/// Tabulated coefficients on a tensor (time x space) lattice.
#[derive(Debug, Clone)]
pub struct CoefficientLattice {
    pub times: Vec<f64>,
    pub points: Vec<f64>,
    /// values[k][i * points.len() + j] for field k in (a, b, c, g)
    values: [Vec<f64>; 4],
}

impl CoefficientLattice {
    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("lattice file {} not found", path.display()),
            )));
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)?;
        let header: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
        if header != ["t", "xi", "a", "b", "c", "g"] {
            return Err(Error::Lattice(format!(
                "expected header t,xi,a,b,c,g, got {}",
                header.join(",")
            )));
        }
        let rows: Vec<LatticeRow> = reader
            .deserialize()
            .collect::<std::result::Result<_, _>>()?;
        Self::from_rows(rows.iter().map(|r| (r.t, r.xi, [r.a, r.b, r.c, r.g])))
    }

    fn from_rows(rows: impl Iterator<Item = (f64, f64, [f64; 4])>) -> Result<Self> {
        let rows: Vec<_> = rows.collect();
        let mut times: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut points: Vec<f64> = rows.iter().map(|r| r.1).collect();
        for v in [&mut times, &mut points] {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.dedup();
        }
        if times.len() < 2 || points.len() < 2 {
            return Err(Error::Lattice(
                "need at least two distinct times and two points".into(),
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::Lattice("time axis must start at 0".into()));
        }
        if points[0] > 0.0 || *points.last().unwrap() < 1.0 {
            return Err(Error::Lattice("space axis must cover [0, 1]".into()));
        }
        let np = points.len();
        if rows.len() != times.len() * np {
            return Err(Error::Lattice(format!(
                "expected {} rows for a {}x{} lattice, got {}",
                times.len() * np,
                times.len(),
                np,
                rows.len()
            )));
        }
        let mut values: [Vec<f64>; 4] = std::array::from_fn(|_| vec![f64::NAN; times.len() * np]);
        for (t, xi, vals) in rows {
            let i = times
                .binary_search_by(|p| p.partial_cmp(&t).unwrap())
                .unwrap();
            let j = points
                .binary_search_by(|p| p.partial_cmp(&xi).unwrap())
                .unwrap();
            for k in 0..4 {
                if !values[k][i * np + j].is_nan() {
                    return Err(Error::Lattice(format!("duplicate row at t={t}, xi={xi}")));
                }
                values[k][i * np + j] = vals[k];
            }
        }
        Ok(CoefficientLattice {
            times,
            points,
            values,
        })
    }

    pub fn interpolate(&self, field: usize, t: f64, xi: f64) -> f64 {
        let (i, wt) = bracket(&self.times, t);
        let (j, wx) = bracket(&self.points, xi);
        let np = self.points.len();
        let v = &self.values[field];
        let v00 = v[i * np + j];
        let v01 = v[i * np + j + 1];
        let v10 = v[(i + 1) * np + j];
        let v11 = v[(i + 1) * np + j + 1];
        (1.0 - wt) * ((1.0 - wx) * v00 + wx * v01) + wt * ((1.0 - wx) * v10 + wx * v11)
    }
}

/// Index of the lower bracket and the interpolation weight, clamped to the axis.
fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    let n = axis.len();
    if x <= axis[0] {
        return (0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let k = axis.partition_point(|&p| p <= x) - 1;
    let k = k.min(n - 2);
    (k, (x - axis[k]) / (axis[k + 1] - axis[k]))
}
