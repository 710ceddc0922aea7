//! Measurement-modified decay of a qubit coupled to a Lorentzian-Ohmic bath.
//!
//! The effective decay rate under projective measurements at interval τ is
//! the overlap of the bath spectral density `J(ω) = 2Λω/(ω² + α²)` with the
//! measurement-broadened line `F_τ(ω − ΔΩ) = (τ/2π)·sinc²[(ω − ΔΩ)τ/2]`:
//!
//! ```text
//! γ(τ) = ∫₀^∞ J(ω) F_τ(ω − ΔΩ) dω
//! ```
//!
//! Comparing γ(τ) with the unmeasured rate γ₀ = J(ΔΩ) separates the Zeno
//! (γ < γ₀) from the anti-Zeno (γ > γ₀) regime.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{self, QuadratureError};
use crate::sweep::{self, Axis, GridSpec, HeatmapGrid, SignMap, Sweep, SweepError};

/// Half-width of the band around γ/γ₀ = 1 that is labelled [`ZenoKind::Boundary`].
pub const BOUNDARY_BAND: f64 = 1e-9;

/// Hard cap on the number of sinc lobes seeded as quadrature panels.
const MAX_SEEDED_PANELS: usize = 2_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("quadrature failed: {0}")]
    ToleranceNotMet(#[from] QuadratureError),
    #[error("no Zeno/anti-Zeno crossing in [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },
}

fn require(cond: bool, name: &'static str, value: f64, reason: &'static str) -> Result<(), SpectralError> {
    if cond {
        Ok(())
    } else {
        Err(SpectralError::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}

/// Bath and qubit constants, in units where ΔΩ = 1 and ħ = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralParams {
    /// Dimensionless coupling strength Λ.
    pub coupling: f64,
    /// Characteristic bath frequency α.
    pub alpha: f64,
    /// Qubit energy splitting ΔΩ.
    #[serde(default = "default_delta_omega")]
    pub delta_omega: f64,
    /// Tunneling amplitude Δ. Carried for the unit convention only; it does
    /// not enter γ(τ) in the rotating-wave treatment.
    #[serde(default = "default_tunneling")]
    pub tunneling: f64,
}

fn default_delta_omega() -> f64 {
    1.0
}

fn default_tunneling() -> f64 {
    2.0
}

impl SpectralParams {
    pub fn new(coupling: f64, alpha: f64) -> Self {
        Self {
            coupling,
            alpha,
            delta_omega: default_delta_omega(),
            tunneling: default_tunneling(),
        }
    }

    pub fn with_delta_omega(mut self, delta_omega: f64) -> Self {
        self.delta_omega = delta_omega;
        self
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        require(self.coupling.is_finite() && self.coupling > 0.0, "coupling", self.coupling, "must be > 0")?;
        require(self.alpha.is_finite() && self.alpha > 0.0, "alpha", self.alpha, "must be > 0")?;
        require(
            self.delta_omega.is_finite() && self.delta_omega > 0.0,
            "delta_omega",
            self.delta_omega,
            "must be > 0",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureOptions {
    /// Absolute tolerance on γ/Λ.
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Certified tail bound relative to γ₀; fixes the integration cutoff.
    pub tail_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-9,
            tail_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureOptions {
    pub fn validate(&self) -> Result<(), SpectralError> {
        require(self.abs_tol > 0.0, "abs_tol", self.abs_tol, "must be > 0")?;
        require(self.rel_tol > 0.0, "rel_tol", self.rel_tol, "must be > 0")?;
        require(self.tail_tol > 0.0, "tail_tol", self.tail_tol, "must be > 0")?;
        require(
            self.max_subdivisions > 0,
            "max_subdivisions",
            self.max_subdivisions as f64,
            "must be > 0",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZenoKind {
    Zeno,
    AntiZeno,
    Boundary,
}

impl ZenoKind {
    pub fn sign(self) -> i8 {
        match self {
            ZenoKind::Zeno => -1,
            ZenoKind::AntiZeno => 1,
            ZenoKind::Boundary => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZenoClass {
    pub kind: ZenoKind,
    /// γ(τ)/γ₀.
    pub ratio: f64,
}

impl ZenoClass {
    pub fn from_ratio(ratio: f64, band: f64) -> Self {
        let kind = if ratio < 1.0 - band {
            ZenoKind::Zeno
        } else if ratio > 1.0 + band {
            ZenoKind::AntiZeno
        } else {
            ZenoKind::Boundary
        };
        Self { kind, ratio }
    }
}

/// `sin(x)/x`, with the removable singularity handled by its Taylor series.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// J(ω) = 2Λω/(ω² + α²).
pub fn spectral_density(omega: f64, p: &SpectralParams) -> f64 {
    2.0 * p.coupling * omega / (omega * omega + p.alpha * p.alpha)
}

/// F_τ(ω − ΔΩ) = (τ/2π)·sinc²[(ω − ΔΩ)τ/2].
pub fn modulating_function(omega: f64, tau: f64, p: &SpectralParams) -> f64 {
    let s = sinc(0.5 * (omega - p.delta_omega) * tau);
    tau / (2.0 * PI) * s * s
}

/// γ₀ = J(ΔΩ), the long-interval limit of γ(τ).
pub fn natural_decay_rate(p: &SpectralParams) -> f64 {
    spectral_density(p.delta_omega, p)
}

/// Analytic bound on ∫_{ω_cut}^∞ J·F dω, valid for ω_cut > ΔΩ.
pub fn tail_bound(omega_cut: f64, tau: f64, p: &SpectralParams) -> f64 {
    let d = omega_cut - p.delta_omega;
    8.0 * p.coupling / (PI * tau * d * d)
}

/// Cutoff at which [`tail_bound`] equals `tail_tol·γ₀`, rounded up to the next
/// sinc node.
pub fn cutoff_frequency(tau: f64, p: &SpectralParams, q: &QuadratureOptions) -> f64 {
    let gamma0 = natural_decay_rate(p);
    let d = (8.0 * p.coupling / (PI * tau * q.tail_tol * gamma0)).sqrt();
    let node_spacing = 2.0 * PI / tau;
    let k = (d / node_spacing).ceil().max(1.0);
    p.delta_omega + k * node_spacing
}

/// Panel boundaries for γ(τ): zero, every sinc node inside (0, ω_cut), ω_cut.
fn breakpoints(tau: f64, omega_cut: f64, p: &SpectralParams) -> Result<Vec<f64>, SpectralError> {
    let spacing = 2.0 * PI / tau;
    let k_min = -(p.delta_omega / spacing).floor() as i64;
    let k_max = ((omega_cut - p.delta_omega) / spacing).round() as i64;
    let count = (k_max - k_min + 2).max(2) as usize;
    if count > MAX_SEEDED_PANELS {
        return Err(QuadratureError::ToleranceNotMet {
            value: f64::NAN,
            abs_error: f64::INFINITY,
            target: 0.0,
            subdivisions: 0,
        }
        .into());
    }
    let mut points = Vec::with_capacity(count);
    points.push(0.0);
    for k in k_min..=k_max {
        let w = p.delta_omega + k as f64 * spacing;
        if w > *points.last().expect("non-empty") {
            points.push(w);
        }
    }
    if *points.last().expect("non-empty") < omega_cut {
        points.push(omega_cut);
    }
    Ok(points)
}

/// γ(τ) with the rotating-wave choice f(ω) = 1.
pub fn effective_decay_rate(
    tau: f64,
    p: &SpectralParams,
    q: &QuadratureOptions,
) -> Result<f64, SpectralError> {
    effective_decay_rate_with_filter(tau, p, q, None)
}

/// γ(τ) with an optional multiplicative frequency filter f(ω) in the integrand.
///
/// The tail certificate assumes |f(ω)| ≤ 1.
pub fn effective_decay_rate_with_filter(
    tau: f64,
    p: &SpectralParams,
    q: &QuadratureOptions,
    filter: Option<&(dyn Fn(f64) -> f64 + Sync)>,
) -> Result<f64, SpectralError> {
    p.validate()?;
    q.validate()?;
    require(tau.is_finite() && tau > 0.0, "tau", tau, "must be > 0")?;

    // γ is linear in Λ: integrate at unit coupling so the refinement path, and
    // hence γ/γ₀, does not depend on Λ. Tolerances apply to γ/Λ.
    let unit = SpectralParams {
        coupling: 1.0,
        ..*p
    };
    let omega_cut = cutoff_frequency(tau, &unit, q);
    let points = breakpoints(tau, omega_cut, &unit)?;
    let integrand = |w: f64| {
        let base = spectral_density(w, &unit) * modulating_function(w, tau, &unit);
        match filter {
            Some(f) => base * f(w),
            None => base,
        }
    };
    let res = quadrature::integrate(integrand, &points, q.abs_tol, q.rel_tol, q.max_subdivisions)?;
    Ok(p.coupling * res.value.max(0.0))
}

pub fn classify_zeno(
    tau: f64,
    p: &SpectralParams,
    q: &QuadratureOptions,
) -> Result<ZenoClass, SpectralError> {
    let gamma = effective_decay_rate(tau, p, q)?;
    Ok(ZenoClass::from_ratio(gamma / natural_decay_rate(p), BOUNDARY_BAND))
}

/// Memo table for γ(τ), keyed by the bit patterns of every input.
///
/// Lookups take a read lock. Two workers may race to compute the same key;
/// both produce the same bits, so the second insert is a no-op.
#[derive(Debug, Default)]
pub struct DecayRateCache {
    table: RwLock<HashMap<[u64; 9], f64>>,
}

impl DecayRateCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(tau: f64, p: &SpectralParams, q: &QuadratureOptions) -> [u64; 9] {
        [
            tau.to_bits(),
            p.coupling.to_bits(),
            p.alpha.to_bits(),
            p.delta_omega.to_bits(),
            p.tunneling.to_bits(),
            q.abs_tol.to_bits(),
            q.rel_tol.to_bits(),
            q.tail_tol.to_bits(),
            q.max_subdivisions as u64,
        ]
    }

    pub fn gamma(
        &self,
        tau: f64,
        p: &SpectralParams,
        q: &QuadratureOptions,
    ) -> Result<f64, SpectralError> {
        let key = Self::key(tau, p, q);
        if let Some(&g) = self.table.read().expect("cache lock poisoned").get(&key) {
            return Ok(g);
        }
        let g = effective_decay_rate(tau, p, q)?;
        self.table
            .write()
            .expect("cache lock poisoned")
            .entry(key)
            .or_insert(g);
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.table.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Signed relative deviation γ(τ)/γ₀ − 1; its sign is the Zeno/anti-Zeno label.
pub fn zeno_ratio_deviation(
    tau: f64,
    alpha: f64,
    base: &SpectralParams,
    q: &QuadratureOptions,
) -> Result<f64, SpectralError> {
    let p = SpectralParams { alpha, ..*base };
    let gamma = effective_decay_rate(tau, &p, q)?;
    Ok(gamma / natural_decay_rate(&p) - 1.0)
}

/// γ/γ₀ − 1 over τ (x) × α (y).
pub fn zeno_deviation_map(
    tau_axis: &Axis,
    alpha_axis: &Axis,
    p: &SpectralParams,
    q: &QuadratureOptions,
    runner: &Sweep,
) -> Result<HeatmapGrid, SweepError> {
    let spec = zeno_grid_spec(tau_axis, alpha_axis, p);
    runner.run(&spec, |tau, alpha, _| zeno_ratio_deviation(tau, alpha, p, q))
}

/// Phase map over (τ, α): x axis τ, y axis α, cells `sign(γ/γ₀ − 1)`.
pub fn zeno_phase_map(
    tau_axis: &Axis,
    alpha_axis: &Axis,
    p: &SpectralParams,
    q: &QuadratureOptions,
    runner: &Sweep,
) -> Result<SignMap, SweepError> {
    let heat = zeno_deviation_map(tau_axis, alpha_axis, p, q, runner)?;
    Ok(sweep::to_sign_map(&heat, BOUNDARY_BAND))
}

pub fn zeno_grid_spec(tau_axis: &Axis, alpha_axis: &Axis, p: &SpectralParams) -> GridSpec {
    GridSpec::new(tau_axis.clone(), alpha_axis.clone())
        .with_param("coupling", p.coupling)
        .with_param("delta_omega", p.delta_omega)
        .with_param("tunneling", p.tunneling)
}

/// Jump time: the τ in `[lo, hi]` where γ(τ) crosses γ₀, found by bisection.
pub fn jump_time(
    lo: f64,
    hi: f64,
    p: &SpectralParams,
    q: &QuadratureOptions,
    tol: f64,
) -> Result<f64, SpectralError> {
    require(lo > 0.0 && hi > lo, "lo", lo, "need 0 < lo < hi")?;
    let gamma0 = natural_decay_rate(p);
    let g = |tau: f64| effective_decay_rate(tau, p, q).map(|v| v - gamma0);
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (g(a)?, g(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(SpectralError::NoCrossing { lo, hi });
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = g(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}
