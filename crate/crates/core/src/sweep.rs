//! Parallel two-dimensional parameter sweeps.
//!
//! A sweep evaluates a pure cell kernel at every `(x, y)` point of a
//! [`GridSpec`]. Cells are independent work units; results are written back
//! by position, so the output is bitwise identical for any worker count.
//! Cells whose kernel fails become NaN and are listed in the error ledger.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid worker count {0}")]
    InvalidWorkers(usize),
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// One axis of a sweep grid.
///
/// Points are generated from `(min, max, count, scale)` unless `values` is
/// set, in which case the explicit list is used and the other fields mirror
/// it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Axis {
    pub fn linear(name: impl Into<String>, min: f64, max: f64, count: usize) -> Self {
        Self {
            name: name.into(),
            min,
            max,
            count,
            scale: Scale::Linear,
            values: None,
        }
    }

    pub fn log(name: impl Into<String>, min: f64, max: f64, count: usize) -> Self {
        Self {
            scale: Scale::Log,
            ..Self::linear(name, min, max, count)
        }
    }

    pub fn explicit(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            min: values.first().copied().unwrap_or(f64::NAN),
            max: values.last().copied().unwrap_or(f64::NAN),
            count: values.len(),
            scale: Scale::Linear,
            values: Some(values),
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |msg: String| Err(SweepError::InvalidGrid(format!("axis '{}': {msg}", self.name)));
        if self.count == 0 {
            return bad("count must be >= 1".into());
        }
        if !self.min.is_finite() || !self.max.is_finite() {
            return bad("bounds must be finite".into());
        }
        if self.count == 1 {
            if self.min > self.max {
                return bad(format!("min {} > max {}", self.min, self.max));
            }
        } else if self.min >= self.max {
            return bad(format!("min {} must be < max {}", self.min, self.max));
        }
        if self.scale == Scale::Log && self.min <= 0.0 {
            return bad("log scale requires min > 0".into());
        }
        if let Some(v) = &self.values {
            if v.len() != self.count {
                return bad(format!("{} values but count {}", v.len(), self.count));
            }
            if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
                return bad("explicit values must be finite and strictly increasing".into());
            }
            if v[0] != self.min || v[v.len() - 1] != self.max {
                return bad("explicit values disagree with min/max".into());
            }
        }
        Ok(())
    }

    /// Grid points, endpoints exact.
    pub fn points(&self) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        if self.count == 1 {
            return vec![self.min];
        }
        let last = (self.count - 1) as f64;
        let mut out: Vec<f64> = (0..self.count)
            .map(|i| {
                let s = i as f64 / last;
                match self.scale {
                    Scale::Linear => self.min + (self.max - self.min) * s,
                    Scale::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * s).exp(),
                }
            })
            .collect();
        out[0] = self.min;
        out[self.count - 1] = self.max;
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_axis: Axis,
    pub y_axis: Axis,
    #[serde(default)]
    pub fixed_params: BTreeMap<String, f64>,
}

impl GridSpec {
    pub fn new(x_axis: Axis, y_axis: Axis) -> Self {
        Self {
            x_axis,
            y_axis,
            fixed_params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: impl Into<String>, value: f64) -> Self {
        self.fixed_params.insert(key.into(), value);
        self
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        self.x_axis.validate()?;
        self.y_axis.validate()
    }

    pub fn len(&self) -> usize {
        self.x_axis.count * self.y_axis.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub ix: usize,
    pub iy: usize,
    pub x: f64,
    pub y: f64,
    pub message: String,
}

/// Real-valued sweep result. `cells[iy * nx + ix]`, i.e. row-major over y then x.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    pub spec: GridSpec,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub cells: Vec<f64>,
    /// Extremes over the finite cells; NaN when there are none.
    pub min: f64,
    pub max: f64,
    pub errors: Vec<CellError>,
}

impl HeatmapGrid {
    pub fn from_cells(spec: GridSpec, cells: Vec<f64>, errors: Vec<CellError>) -> Self {
        let x = spec.x_axis.points();
        let y = spec.y_axis.points();
        assert_eq!(cells.len(), x.len() * y.len(), "cell count does not match grid");
        let (min, max) = cells
            .iter()
            .filter(|v| v.is_finite())
            .fold((f64::NAN, f64::NAN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Self {
            spec,
            x,
            y,
            cells,
            min,
            max,
            errors,
        }
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.cells[iy * self.nx() + ix]
    }
}

/// Sign-valued map with bookkeeping of positive cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SignMap {
    pub spec: GridSpec,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub cells: Vec<i8>,
    pub positive_count: usize,
    /// Indices of cells whose source value was NaN (reported as 0).
    pub nan_cells: Vec<usize>,
    pub metadata: BTreeMap<String, String>,
}

impl SignMap {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn get(&self, ix: usize, iy: usize) -> i8 {
        self.cells[iy * self.nx() + ix]
    }

    /// Positive cells whose x coordinate satisfies `pred`.
    pub fn positive_where_x(&self, pred: impl Fn(f64) -> bool) -> usize {
        let nx = self.nx();
        self.cells
            .iter()
            .enumerate()
            .filter(|(i, &s)| s > 0 && pred(self.x[i % nx]))
            .count()
    }

    /// Positive cells whose y coordinate satisfies `pred`.
    pub fn positive_where_y(&self, pred: impl Fn(f64) -> bool) -> usize {
        let nx = self.nx();
        self.cells
            .iter()
            .enumerate()
            .filter(|(i, &s)| s > 0 && pred(self.y[i / nx]))
            .count()
    }
}

/// `Sign[v]` with |v| ≤ `zero_band` mapped to 0; NaN maps to 0 and is flagged.
pub fn to_sign_map(h: &HeatmapGrid, zero_band: f64) -> SignMap {
    assert!(zero_band >= 0.0, "zero band must be non-negative");
    let mut nan_cells = Vec::new();
    let cells: Vec<i8> = h
        .cells
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.is_nan() {
                nan_cells.push(i);
                0
            } else if v.abs() <= zero_band {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    let positive_count = cells.iter().filter(|&&s| s > 0).count();
    let mut metadata: BTreeMap<String, String> = h
        .spec
        .fixed_params
        .iter()
        .map(|(k, v)| (k.clone(), format!("{v:?}")))
        .collect();
    metadata.insert("code_version".into(), CODE_VERSION.into());
    metadata.insert("zero_band".into(), format!("{zero_band:?}"));
    SignMap {
        spec: h.spec.clone(),
        x: h.x.clone(),
        y: h.y.clone(),
        cells,
        positive_count,
        nan_cells,
        metadata,
    }
}

/// Sweep driver. Progress lines go to stderr when enabled.
#[derive(Debug, Clone, Copy)]
pub struct Sweep {
    workers: usize,
    progress: bool,
}

impl Sweep {
    pub fn new(workers: usize) -> Self {
        Self {
            workers,
            progress: false,
        }
    }

    pub fn progress(mut self, on: bool) -> Self {
        self.progress = on;
        self
    }

    pub fn run<K, E>(&self, spec: &GridSpec, kernel: K) -> Result<HeatmapGrid, SweepError>
    where
        K: Fn(f64, f64, &BTreeMap<String, f64>) -> Result<f64, E> + Sync,
        E: Display,
    {
        spec.validate()?;
        if self.workers == 0 {
            return Err(SweepError::InvalidWorkers(0));
        }
        let xs = spec.x_axis.points();
        let ys = spec.y_axis.points();
        let nx = xs.len();
        let total = nx * ys.len();
        let done = AtomicUsize::new(0);
        let step = (total / 20).max(1);

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| SweepError::Pool(e.to_string()))?;

        let results: Vec<Result<f64, String>> = pool.install(|| {
            (0..total)
                .into_par_iter()
                .map(|i| {
                    let out = kernel(xs[i % nx], ys[i / nx], &spec.fixed_params)
                        .map_err(|e| e.to_string());
                    if self.progress {
                        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                        if n % step == 0 || n == total {
                            eprintln!("progress: {n}/{total} cells ({}%)", n * 100 / total);
                        }
                    }
                    out
                })
                .collect()
        });

        let mut errors = Vec::new();
        let cells = results
            .into_iter()
            .enumerate()
            .map(|(i, r)| match r {
                Ok(v) => v,
                Err(message) => {
                    let (ix, iy) = (i % nx, i / nx);
                    errors.push(CellError {
                        ix,
                        iy,
                        x: xs[ix],
                        y: ys[iy],
                        message,
                    });
                    f64::NAN
                }
            })
            .collect();
        Ok(HeatmapGrid::from_cells(spec.clone(), cells, errors))
    }
}

/// Runs `kernel` over the grid with `workers` threads and no progress output.
pub fn run_sweep<K, E>(spec: &GridSpec, kernel: K, workers: usize) -> Result<HeatmapGrid, SweepError>
where
    K: Fn(f64, f64, &BTreeMap<String, f64>) -> Result<f64, E> + Sync,
    E: Display,
{
    Sweep::new(workers).run(spec, kernel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid() -> GridSpec {
        GridSpec::new(Axis::linear("x", 0.0, 1.0, 2), Axis::linear("y", 0.0, 1.0, 2))
    }

    #[test]
    fn arithmetic_kernel() {
        let h = run_sweep(&unit_grid(), |x, y, _| Ok::<_, String>(x + y), 1).unwrap();
        assert_eq!(h.cells, vec![0.0, 1.0, 1.0, 2.0]);
        assert_eq!((h.min, h.max), (0.0, 2.0));
        assert!(h.errors.is_empty());
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let spec = GridSpec::new(Axis::log("x", 0.01, 10.0, 17), Axis::linear("y", -1.0, 3.0, 13));
        let k = |x: f64, y: f64, _: &BTreeMap<String, f64>| Ok::<_, String>((x * y).sin() / (1.0 + x));
        let a = run_sweep(&spec, k, 1).unwrap();
        let b = run_sweep(&spec, k, 8).unwrap();
        let bits = |h: &HeatmapGrid| h.cells.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn failing_cell_is_isolated() {
        let h = run_sweep(
            &unit_grid(),
            |x, y, _| if x == 1.0 && y == 0.0 { Err("boom") } else { Ok(x - y) },
            4,
        )
        .unwrap();
        assert!(h.cells[1].is_nan());
        assert_eq!(h.errors.len(), 1);
        assert_eq!((h.errors[0].ix, h.errors[0].iy), (1, 0));
        assert_eq!(h.errors[0].message, "boom");
        assert_eq!(h.cells[0], 0.0);
        assert_eq!(h.cells[2], -1.0);
        assert_eq!(h.cells[3], 0.0);
        assert_eq!((h.min, h.max), (-1.0, 0.0));
    }

    #[test]
    fn sign_conversion() {
        let spec = GridSpec::new(Axis::linear("x", 0.0, 2.0, 3), Axis::linear("y", 0.0, 0.0, 1));
        let h = HeatmapGrid::from_cells(spec.clone(), vec![-0.3, 0.0, 0.2], vec![]);
        let s = to_sign_map(&h, 1e-12);
        assert_eq!(s.cells, vec![-1, 0, 1]);
        assert_eq!(s.positive_count, 1);

        let saturated = to_sign_map(&h, 0.5);
        assert_eq!(saturated.cells, vec![0, 0, 0]);
        assert_eq!(saturated.positive_count, 0);

        let with_nan = HeatmapGrid::from_cells(spec, vec![f64::NAN, 1.0, 2.0], vec![]);
        let s = to_sign_map(&with_nan, 0.0);
        assert_eq!(s.cells, vec![0, 1, 1]);
        assert_eq!(s.nan_cells, vec![0]);
        assert_eq!(s.positive_count, s.cells.iter().filter(|&&c| c == 1).count());
    }

    #[test]
    fn axis_points_hit_endpoints() {
        let a = Axis::log("tau", 0.02, 5.0, 50);
        let p = a.points();
        assert_eq!(p[0], 0.02);
        assert_eq!(p[49], 5.0);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
        let l = Axis::linear("t", 0.0, 10.0, 11).points();
        assert!((l[3] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        assert!(Axis::linear("x", 0.0, 1.0, 0).validate().is_err());
        assert!(Axis::linear("x", 1.0, 1.0, 2).validate().is_err());
        assert!(Axis::linear("x", 1.0, 1.0, 1).validate().is_ok());
        assert!(Axis::log("x", 0.0, 1.0, 3).validate().is_err());
        assert!(Axis::explicit("x", vec![0.1, 0.05]).validate().is_err());
        assert!(Axis::explicit("x", vec![0.05, 0.1, 0.2]).validate().is_ok());
        assert!(matches!(
            run_sweep(
                &GridSpec::new(Axis::linear("x", 0.0, 1.0, 0), Axis::linear("y", 0.0, 1.0, 1)),
                |_, _, _| Ok::<_, String>(0.0),
                1
            ),
            Err(SweepError::InvalidGrid(_))
        ));
        assert_eq!(
            run_sweep(&unit_grid(), |_, _, _| Ok::<_, String>(0.0), 0),
            Err(SweepError::InvalidWorkers(0))
        );
    }
}
