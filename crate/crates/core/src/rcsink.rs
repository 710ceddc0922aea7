//! Donor–acceptor pair with a dissipative sink on the acceptor.
//!
//! The exciton starts on the donor. Populations follow from the non-Hermitian
//! two-level Hamiltonian `[[0, V], [V, −iλ/2]]`; the remainder `1 − ξ² − η²`
//! has been captured by the sink. A fixed 8×8 density matrix over
//! (donor, sink 1, sink 2) is built from these populations and probed with a
//! relative trace-distance measure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bipartite::BellState;
use crate::linalg::{self, ComplexMatrix, DensityMatrix, LinalgError, C64};
use crate::sweep::{Axis, GridSpec, HeatmapGrid, Sweep, SweepError};

/// χ² below this is a breakdown of the closed forms, not rounding.
pub const NONPHYSICAL_TOL: f64 = 1e-10;
/// D[ρ(0), ρ(τ)] below this makes the relative measure meaningless.
pub const MIN_REFERENCE_DISTANCE: f64 = 1e-12;

const IMAG_TOL: f64 = 1e-12;
// |Ωt| below which cos and sin(x)/x use their Taylor series.
const SERIES_SWITCH: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RcError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("closed-form populations are not physical at t = {t}, sink rate {sink_rate}: {detail}")]
    NonPhysical { t: f64, sink_rate: f64, detail: String },
    #[error("reference distance D[rho(0), rho({tau})] = {distance:e} is too small")]
    DegenerateDenominator { tau: f64, distance: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> RcError {
    RcError::InvalidParameter { name, value, reason }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RCParams {
    /// Donor–acceptor coupling V.
    pub coupling: f64,
    /// Sink capture rate λ.
    pub sink_rate: f64,
    pub bell: BellState,
}

impl RCParams {
    pub fn new(coupling: f64, sink_rate: f64) -> Self {
        Self {
            coupling,
            sink_rate,
            bell: BellState::maximal(),
        }
    }

    pub fn validate(&self) -> Result<(), RcError> {
        if !(self.coupling.is_finite() && self.coupling > 0.0) {
            return Err(invalid("coupling", self.coupling, "must be > 0"));
        }
        if !(self.sink_rate.is_finite() && self.sink_rate >= 0.0) {
            return Err(invalid("sink_rate", self.sink_rate, "must be >= 0"));
        }
        self.bell
            .validate()
            .map_err(|_| invalid("a^2+b^2", self.bell.a.powi(2) + self.bell.b.powi(2), "must equal 1"))
    }
}

impl Default for RCParams {
    fn default() -> Self {
        Self::new(1.0, 0.0)
    }
}

/// Donor, acceptor and sink populations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RCAmplitudes {
    pub xi2: f64,
    pub eta2: f64,
    pub chi2: f64,
}

/// Ω = ½√(4V² − (λ/2)²); imaginary when λ > 4V.
pub fn rabi_frequency(p: &RCParams) -> C64 {
    let half_rate = 0.5 * p.sink_rate;
    0.5 * C64::new(4.0 * p.coupling * p.coupling - half_rate * half_rate, 0.0).sqrt()
}

/// (e^{−λt/4}·cos Ωt, e^{−λt/4}·sin(Ωt)/Ω), evaluated without overflow.
fn damped_cos_sinc(omega: C64, t: f64, damping: f64) -> (C64, C64) {
    let x = omega * t;
    if x.norm() < SERIES_SWITCH {
        let x2 = x * x;
        let e = (-damping * t).exp();
        let cos = 1.0 - x2 / 2.0 + x2 * x2 / 24.0 - x2 * x2 * x2 / 720.0;
        let sinc = 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
        return (cos * e, sinc * (t * e));
    }
    // e^{±iΩt − dt}: the growing exponential of an imaginary Ω is tamed by the damping.
    let i = C64::new(0.0, 1.0);
    let up = (i * x - damping * t).exp();
    let down = (-i * x - damping * t).exp();
    ((up + down) * 0.5, (up - down) / (2.0 * i * omega))
}

pub fn rc_amplitudes(t: f64, p: &RCParams) -> Result<RCAmplitudes, RcError> {
    p.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", t, "must be >= 0"));
    }
    let lam = p.sink_rate;
    let omega = rabi_frequency(p);
    let (cos, sinc) = damped_cos_sinc(omega, t, 0.25 * lam);
    let xi = cos + 0.25 * lam * sinc;
    let eta: C64 = sinc * p.coupling;
    for (name, z) in [("xi", xi), ("eta", eta)] {
        if z.im.abs() > IMAG_TOL * (1.0 + z.re.abs()) {
            return Err(RcError::NonPhysical {
                t,
                sink_rate: lam,
                detail: format!("{name} has imaginary residue {:e}", z.im),
            });
        }
    }
    let xi2 = xi.re * xi.re;
    let eta2 = eta.re * eta.re;
    let chi2 = 1.0 - xi2 - eta2;
    if chi2 < -NONPHYSICAL_TOL {
        return Err(RcError::NonPhysical {
            t,
            sink_rate: lam,
            detail: format!("sink population {chi2:e} < 0"),
        });
    }
    Ok(RCAmplitudes {
        xi2,
        eta2,
        chi2: chi2.max(0.0),
    })
}

/// The 8×8 (donor, sink 1, sink 2) matrix built from raw populations.
pub fn tripartite_matrix(amps: &RCAmplitudes, bell: &BellState) -> ComplexMatrix {
    let (a, b) = (bell.a, bell.b);
    let RCAmplitudes { xi2, eta2, chi2 } = *amps;
    let xi_chi = (xi2 * chi2).sqrt();
    let mut m = ComplexMatrix::zeros(8);
    let mut set = |i: usize, j: usize, v: f64| {
        m[(i, j)] = C64::new(v, 0.0);
        m[(j, i)] = C64::new(v, 0.0);
    };
    set(0, 0, (eta2 + xi2) * b * b + a * a * eta2);
    set(1, 1, b * b * chi2);
    set(1, 2, a * b * chi2);
    set(1, 4, a * b * xi_chi);
    set(2, 2, a * a * chi2);
    set(2, 4, a * a * xi_chi);
    set(4, 4, a * a * xi2);
    m
}

pub fn tripartite_density(t: f64, p: &RCParams) -> Result<DensityMatrix, RcError> {
    let amps = rc_amplitudes(t, p)?;
    Ok(DensityMatrix::new(tripartite_matrix(&amps, &p.bell), "rho_d1r1r2")?)
}

/// D(t, τ) = (D[ρ(t), ρ(t+τ)] − D₀)/D₀ with D₀ = D[ρ(0), ρ(τ)].
pub fn rc_distance_measure(t: f64, tau: f64, p: &RCParams) -> Result<f64, RcError> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid("tau", tau, "must be > 0"));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", t, "must be >= 0"));
    }
    let reference = linalg::trace_distance(&tripartite_density(0.0, p)?, &tripartite_density(tau, p)?)?;
    if reference < MIN_REFERENCE_DISTANCE {
        return Err(RcError::DegenerateDenominator {
            tau,
            distance: reference,
        });
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let moved = linalg::trace_distance(&tripartite_density(t, p)?, &tripartite_density(t + tau, p)?)?;
    Ok((moved - reference) / reference)
}

/// D(t, τ) over t (x) × sink rate (y).
#[derive(Debug, Clone, PartialEq)]
pub struct RcMap {
    pub heat: HeatmapGrid,
    /// Cells with D > 0, one entry per sink-rate value.
    pub positive_per_rate: Vec<usize>,
    pub positive_count: usize,
}

pub fn rc_grid_spec(t_axis: &Axis, rate_axis: &Axis, tau: f64, p: &RCParams) -> GridSpec {
    GridSpec::new(t_axis.clone(), rate_axis.clone())
        .with_param("tau", tau)
        .with_param("coupling", p.coupling)
        .with_param("a", p.bell.a)
        .with_param("b", p.bell.b)
}

pub fn rc_map(t_axis: &Axis, rate_axis: &Axis, tau: f64, p: &RCParams, runner: &Sweep) -> Result<RcMap, SweepError> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(SweepError::InvalidGrid(format!("tau = {tau} must be > 0")));
    }
    let spec = rc_grid_spec(t_axis, rate_axis, tau, p);
    let heat = runner.run(&spec, |t, rate, _| {
        let cell = RCParams { sink_rate: rate, ..*p };
        rc_distance_measure(t, tau, &cell)
    })?;
    let nx = heat.nx();
    let positive_per_rate: Vec<usize> = heat
        .cells
        .chunks(nx)
        .map(|row| row.iter().filter(|&&v| v > 0.0).count())
        .collect();
    let positive_count = positive_per_rate.iter().sum();
    Ok(RcMap {
        heat,
        positive_per_rate,
        positive_count,
    })
}
