//! Two qubits, each decaying into its own reservoir under repeated
//! measurement, prepared in a Bell-like state `a|00⟩ + b|11⟩`.
//!
//! Provides the closed-form 4×4 reduced density matrices for the three
//! bipartitions, a 16-dimensional pure-state oracle they can be checked
//! against, and the trace-distance difference Δ(τ₁, τ₂) whose positive
//! values flag non-Markovian behaviour.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, ComplexMatrix, DensityMatrix, LinalgError, PureState, C64};
use crate::spectral::{DecayRateCache, QuadratureOptions, SpectralError, SpectralParams};
use crate::sweep::{self, Axis, GridSpec, HeatmapGrid, SignMap, Sweep, SweepError};

/// |Δ| at or below this is reported as sign 0.
pub const SIGN_ZERO_BAND: f64 = 1e-12;

const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BipartiteError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> BipartiteError {
    BipartiteError::InvalidParameter { name, value, reason }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellState {
    pub a: f64,
    pub b: f64,
}

impl BellState {
    pub fn new(a: f64, b: f64) -> Result<Self, BipartiteError> {
        let s = Self { a, b };
        s.validate()?;
        Ok(s)
    }

    /// a = b = 1/√2.
    pub fn maximal() -> Self {
        Self {
            a: std::f64::consts::FRAC_1_SQRT_2,
            b: std::f64::consts::FRAC_1_SQRT_2,
        }
    }

    /// Real `a` in [-1, 1] with b = √(1 − a²).
    pub fn from_a(a: f64) -> Result<Self, BipartiteError> {
        if !(a.is_finite() && a.abs() <= 1.0) {
            return Err(invalid("a", a, "must lie in [-1, 1]"));
        }
        Ok(Self {
            a,
            b: (1.0 - a * a).sqrt(),
        })
    }

    pub fn validate(&self) -> Result<(), BipartiteError> {
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(invalid("a", self.a, "amplitudes must be finite"));
        }
        let norm = self.a * self.a + self.b * self.b;
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(invalid("a^2+b^2", norm, "must equal 1"));
        }
        Ok(())
    }
}

impl Default for BellState {
    fn default() -> Self {
        Self::maximal()
    }
}

/// Repeated-measurement protocol: N measurements spaced τ apart, with the
/// bath of each qubit described by its own spectral parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementModel {
    pub n_measurements: u32,
    pub first: SpectralParams,
    pub second: SpectralParams,
}

impl MeasurementModel {
    pub fn symmetric(n_measurements: u32, spectral: SpectralParams) -> Self {
        Self {
            n_measurements,
            first: spectral,
            second: spectral,
        }
    }

    pub fn validate(&self) -> Result<(), BipartiteError> {
        if self.n_measurements == 0 {
            return Err(invalid("n_measurements", 0.0, "must be >= 1"));
        }
        self.first.validate()?;
        self.second.validate()?;
        Ok(())
    }

    /// Amplitudes of both qubits at interval `tau`, sharing `cache`.
    pub fn amplitudes(
        &self,
        tau: f64,
        q: &QuadratureOptions,
        cache: &DecayRateCache,
    ) -> Result<(SurvivalAmplitudes, SurvivalAmplitudes), BipartiteError> {
        let s1 = survival_amplitudes_cached(tau, self.n_measurements, &self.first, q, cache)?;
        let s2 = if self.second == self.first {
            s1
        } else {
            survival_amplitudes_cached(tau, self.n_measurements, &self.second, q, cache)?
        };
        Ok((s1, s2))
    }
}

/// Excited-state amplitude `u` and the amplitude `v` transferred to the reservoir.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalAmplitudes {
    pub u: f64,
    pub v: f64,
}

impl SurvivalAmplitudes {
    pub const UNDECAYED: Self = Self { u: 1.0, v: 0.0 };

    /// `u` in [0, 1] with `v = √(1 − u²)`.
    pub fn from_u(u: f64) -> Result<Self, BipartiteError> {
        if !(0.0..=1.0).contains(&u) {
            return Err(invalid("u", u, "must lie in [0, 1]"));
        }
        Ok(Self {
            u,
            v: (1.0 - u * u).sqrt(),
        })
    }

    /// Amplitudes after an exponent `x = γNτ`: u = e^{−x/2}, v = √(1 − e^{−x}).
    pub fn from_exponent(x: f64) -> Self {
        Self {
            u: (-0.5 * x).exp(),
            v: (-(-x).exp_m1()).sqrt(),
        }
    }

    fn swapped(self) -> Self {
        Self { u: self.v, v: self.u }
    }
}

/// u(τ) = exp(−γ(τ)Nτ/2), v = √(1 − u²). τ = 0 is the undecayed state.
pub fn survival_amplitudes(
    tau: f64,
    n_measurements: u32,
    p: &SpectralParams,
    q: &QuadratureOptions,
) -> Result<SurvivalAmplitudes, BipartiteError> {
    survival_amplitudes_cached(tau, n_measurements, p, q, &DecayRateCache::new())
}

pub fn survival_amplitudes_cached(
    tau: f64,
    n_measurements: u32,
    p: &SpectralParams,
    q: &QuadratureOptions,
    cache: &DecayRateCache,
) -> Result<SurvivalAmplitudes, BipartiteError> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(invalid("tau", tau, "must be >= 0"));
    }
    if n_measurements == 0 {
        return Err(invalid("n_measurements", 0.0, "must be >= 1"));
    }
    if tau == 0.0 {
        return Ok(SurvivalAmplitudes::UNDECAYED);
    }
    let gamma = cache.gamma(tau, p, q)?;
    Ok(SurvivalAmplitudes::from_exponent(gamma * n_measurements as f64 * tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartitionKind {
    #[serde(rename = "qq")]
    QubitQubit,
    #[serde(rename = "rr")]
    ReservoirReservoir,
    #[serde(rename = "qr")]
    QubitReservoir,
}

impl PartitionKind {
    pub const ALL: [PartitionKind; 3] = [
        PartitionKind::QubitQubit,
        PartitionKind::ReservoirReservoir,
        PartitionKind::QubitReservoir,
    ];

    /// Subsystems kept from the (q1, q2, r1, r2) factorization.
    pub fn kept_subsystems(self) -> [usize; 2] {
        match self {
            PartitionKind::QubitQubit => [0, 1],
            PartitionKind::ReservoirReservoir => [2, 3],
            PartitionKind::QubitReservoir => [0, 3],
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            PartitionKind::QubitQubit => "qq",
            PartitionKind::ReservoirReservoir => "rr",
            PartitionKind::QubitReservoir => "qr",
        }
    }
}

impl fmt::Display for PartitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for PartitionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qq" => Ok(PartitionKind::QubitQubit),
            "rr" => Ok(PartitionKind::ReservoirReservoir),
            "qr" => Ok(PartitionKind::QubitReservoir),
            other => Err(format!("unknown partition '{other}' (expected qq, rr or qr)")),
        }
    }
}

/// Which population sits in the |00⟩ corner of the qubit–reservoir matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReducedConvention {
    /// f₁ = a² + b²v₁²u₂², the value the partial trace gives.
    #[default]
    Corrected,
    /// f₁ = a² + b²u₁²v₂²; not unit trace unless u₁ = u₂.
    AsPrinted,
}

/// The X-state entries (f₁, f₂, f₃, f₄, f₅): diagonal then the (|00⟩,|11⟩) coherence.
pub fn reduced_entries(
    partition: PartitionKind,
    convention: ReducedConvention,
    bell: &BellState,
    s1: SurvivalAmplitudes,
    s2: SurvivalAmplitudes,
) -> [f64; 5] {
    let (a, b) = (bell.a, bell.b);
    let b2 = b * b;
    let x_state = |s1: SurvivalAmplitudes, s2: SurvivalAmplitudes| {
        let (u1, v1, u2, v2) = (s1.u, s1.v, s2.u, s2.v);
        [
            a * a + b2 * v1 * v1 * v2 * v2,
            b2 * v1 * v1 * u2 * u2,
            b2 * u1 * u1 * v2 * v2,
            b2 * u1 * u1 * u2 * u2,
            a * b * u1 * u2,
        ]
    };
    match partition {
        PartitionKind::QubitQubit => x_state(s1, s2),
        PartitionKind::ReservoirReservoir => x_state(s1.swapped(), s2.swapped()),
        PartitionKind::QubitReservoir => {
            let (u1, v1, u2, v2) = (s1.u, s1.v, s2.u, s2.v);
            let f1 = match convention {
                ReducedConvention::Corrected => a * a + b2 * v1 * v1 * u2 * u2,
                ReducedConvention::AsPrinted => a * a + b2 * u1 * u1 * v2 * v2,
            };
            [
                f1,
                b2 * v1 * v1 * v2 * v2,
                b2 * u1 * u1 * u2 * u2,
                b2 * u1 * u1 * v2 * v2,
                a * b * u1 * v2,
            ]
        }
    }
}

/// Raw 4×4 matrix in the basis (|00⟩, |01⟩, |10⟩, |11⟩). No validation.
pub fn reduced_matrix(
    partition: PartitionKind,
    convention: ReducedConvention,
    bell: &BellState,
    s1: SurvivalAmplitudes,
    s2: SurvivalAmplitudes,
) -> ComplexMatrix {
    let [f1, f2, f3, f4, f5] = reduced_entries(partition, convention, bell, s1, s2);
    let mut m = ComplexMatrix::diag_real(&[f1, f2, f3, f4]);
    m[(0, 3)] = C64::new(f5, 0.0);
    m[(3, 0)] = C64::new(f5, 0.0);
    m
}

pub fn reduced_density(
    partition: PartitionKind,
    bell: &BellState,
    s1: SurvivalAmplitudes,
    s2: SurvivalAmplitudes,
) -> Result<DensityMatrix, BipartiteError> {
    bell.validate()?;
    let m = reduced_matrix(partition, ReducedConvention::Corrected, bell, s1, s2);
    Ok(DensityMatrix::new(m, format!("rho_{partition}"))?)
}

/// Full 16-dim state in factor order (q1, q2, r1, r2), subsystem 0 most significant.
pub fn full_state_oracle(
    bell: &BellState,
    s1: SurvivalAmplitudes,
    s2: SurvivalAmplitudes,
) -> Result<PureState, BipartiteError> {
    const Q1: usize = 8;
    const Q2: usize = 4;
    const R1: usize = 2;
    const R2: usize = 1;
    let mut amps = vec![C64::new(0.0, 0.0); 16];
    amps[0] = C64::new(bell.a, 0.0);
    amps[Q1 | Q2] += bell.b * s1.u * s2.u;
    amps[Q1 | R2] += bell.b * s1.u * s2.v;
    amps[R1 | Q2] += bell.b * s1.v * s2.u;
    amps[R1 | R2] += bell.b * s1.v * s2.v;
    Ok(PureState::new(amps)?)
}

/// Partial trace of the oracle state onto `partition`.
pub fn oracle_reduced(
    partition: PartitionKind,
    bell: &BellState,
    s1: SurvivalAmplitudes,
    s2: SurvivalAmplitudes,
) -> Result<DensityMatrix, BipartiteError> {
    let rho = full_state_oracle(bell, s1, s2)?.density("oracle")?;
    Ok(linalg::partial_trace(&rho, &[2, 2, 2, 2], &partition.kept_subsystems())?)
}

/// Everything Δ(τ₁, τ₂) depends on besides the two intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSetup {
    pub partition: PartitionKind,
    pub bell: BellState,
    pub model: MeasurementModel,
    pub quadrature: QuadratureOptions,
}

impl DeltaSetup {
    pub fn validate(&self) -> Result<(), BipartiteError> {
        self.bell.validate()?;
        self.model.validate()?;
        self.quadrature.validate()?;
        Ok(())
    }

    /// ρ(x): the reduced state with both qubits measured at interval x.
    pub fn state_at(&self, tau: f64, cache: &DecayRateCache) -> Result<DensityMatrix, BipartiteError> {
        let (s1, s2) = self.model.amplitudes(tau, &self.quadrature, cache)?;
        reduced_density(self.partition, &self.bell, s1, s2)
    }

    /// Δ = D[ρ(τ₂), ρ(τ₁+τ₂)] − D[ρ(0), ρ(τ₁)].
    pub fn delta(&self, tau1: f64, tau2: f64, cache: &DecayRateCache) -> Result<f64, BipartiteError> {
        if !(tau1.is_finite() && tau1 >= 0.0) {
            return Err(invalid("tau1", tau1, "must be >= 0"));
        }
        if !(tau2.is_finite() && tau2 >= 0.0) {
            return Err(invalid("tau2", tau2, "must be >= 0"));
        }
        let late = linalg::trace_distance(&self.state_at(tau2, cache)?, &self.state_at(tau1 + tau2, cache)?)?;
        let early = linalg::trace_distance(&self.state_at(0.0, cache)?, &self.state_at(tau1, cache)?)?;
        Ok(late - early)
    }
}

pub fn delta_measure(
    tau1: f64,
    tau2: f64,
    partition: PartitionKind,
    bell: &BellState,
    model: &MeasurementModel,
    q: &QuadratureOptions,
) -> Result<f64, BipartiteError> {
    let setup = DeltaSetup {
        partition,
        bell: *bell,
        model: *model,
        quadrature: *q,
    };
    setup.validate()?;
    setup.delta(tau1, tau2, &DecayRateCache::new())
}

pub fn nonmarkov_grid_spec(tau1_axis: &Axis, tau2_axis: &Axis, setup: &DeltaSetup) -> GridSpec {
    let m = &setup.model;
    GridSpec::new(tau1_axis.clone(), tau2_axis.clone())
        .with_param("a", setup.bell.a)
        .with_param("b", setup.bell.b)
        .with_param("n_measurements", m.n_measurements as f64)
        .with_param("coupling", m.first.coupling)
        .with_param("alpha", m.first.alpha)
        .with_param("delta_omega", m.first.delta_omega)
        .with_param("coupling_2", m.second.coupling)
        .with_param("alpha_2", m.second.alpha)
        .with_param("delta_omega_2", m.second.delta_omega)
}

/// Δ over τ₁ (x) × τ₂ (y).
pub fn nonmarkov_heatmap(
    tau1_axis: &Axis,
    tau2_axis: &Axis,
    setup: &DeltaSetup,
    cache: &DecayRateCache,
    runner: &Sweep,
) -> Result<HeatmapGrid, SweepError> {
    setup
        .validate()
        .map_err(|e| SweepError::InvalidGrid(e.to_string()))?;
    for axis in [tau1_axis, tau2_axis] {
        if axis.min <= 0.0 {
            return Err(SweepError::InvalidGrid(format!("axis '{}' must be > 0", axis.name)));
        }
    }
    let spec = nonmarkov_grid_spec(tau1_axis, tau2_axis, setup);
    runner.run(&spec, |t1, t2, _| setup.delta(t1, t2, cache))
}

pub fn nonmarkov_sign_map(
    tau1_axis: &Axis,
    tau2_axis: &Axis,
    setup: &DeltaSetup,
    cache: &DecayRateCache,
    runner: &Sweep,
) -> Result<SignMap, SweepError> {
    let heat = nonmarkov_heatmap(tau1_axis, tau2_axis, setup, cache, runner)?;
    let mut map = sweep::to_sign_map(&heat, SIGN_ZERO_BAND);
    map.metadata.insert("partition".into(), setup.partition.to_string());
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amps(u: f64) -> SurvivalAmplitudes {
        SurvivalAmplitudes::from_u(u).unwrap()
    }

    fn setup(partition: PartitionKind, alpha: f64) -> DeltaSetup {
        DeltaSetup {
            partition,
            bell: BellState::maximal(),
            model: MeasurementModel::symmetric(20, SpectralParams::new(0.01, alpha)),
            quadrature: QuadratureOptions::default(),
        }
    }

    #[test]
    fn bell_state_validation() {
        assert!(BellState::new(0.6, 0.8).is_ok());
        assert!(BellState::new(0.6, 0.7).is_err());
        assert!(BellState::from_a(1.5).is_err());
        let s = BellState::from_a(-0.3).unwrap();
        assert!((s.a * s.a + s.b * s.b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_interval_is_undecayed() {
        let s = survival_amplitudes(0.0, 20, &SpectralParams::new(0.01, 0.25), &QuadratureOptions::default())
            .unwrap();
        assert_eq!(s, SurvivalAmplitudes::UNDECAYED);
    }

    #[test]
    fn amplitudes_follow_exponential_survival() {
        let p = SpectralParams::new(0.01, 0.25);
        let q = QuadratureOptions::default();
        let gamma = crate::spectral::effective_decay_rate(1.0, &p, &q).unwrap();
        let s = survival_amplitudes(1.0, 20, &p, &q).unwrap();
        assert!((s.u - (-10.0 * gamma).exp()).abs() < 1e-15);
        assert!((s.u * s.u + s.v * s.v - 1.0).abs() < 1e-12);
        assert!(survival_amplitudes(-1.0, 20, &p, &q).is_err());
        assert!(survival_amplitudes(1.0, 0, &p, &q).is_err());
    }

    #[test]
    fn no_decay_gives_bell_projector() {
        let rho = reduced_density(PartitionKind::QubitQubit, &BellState::maximal(), amps(1.0), amps(1.0)).unwrap();
        let m = rho.matrix();
        for (i, j, v) in [(0, 0, 0.5), (3, 3, 0.5), (0, 3, 0.5), (3, 0, 0.5), (1, 1, 0.0), (2, 2, 0.0)] {
            assert!((m[(i, j)].re - v).abs() < 1e-15, "({i},{j})");
        }
    }

    #[test]
    fn full_decay_gives_ground_state() {
        let rho = reduced_density(PartitionKind::QubitQubit, &BellState::maximal(), amps(0.0), amps(0.0)).unwrap();
        let expected = ComplexMatrix::diag_real(&[1.0, 0.0, 0.0, 0.0]);
        assert!(rho.matrix().max_abs_diff(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn partial_decay_matches_oracle() {
        let bell = BellState::maximal();
        let [_, _, _, f4, _] =
            reduced_entries(PartitionKind::QubitQubit, ReducedConvention::Corrected, &bell, amps(0.6), amps(0.6));
        assert!((f4 - 0.0648).abs() < 1e-15);
        for partition in PartitionKind::ALL {
            let closed = reduced_density(partition, &bell, amps(0.6), amps(0.6)).unwrap();
            let oracle = oracle_reduced(partition, &bell, amps(0.6), amps(0.6)).unwrap();
            assert!(closed.matrix().max_abs_diff(oracle.matrix()).unwrap() < 1e-12, "{partition}");
        }
    }

    #[test]
    fn oracle_state_without_decay() {
        let bell = BellState::new(0.6, 0.8).unwrap();
        let psi = full_state_oracle(&bell, amps(1.0), amps(1.0)).unwrap();
        let amps = psi.amplitudes();
        assert_eq!(amps[0].re, 0.6);
        assert_eq!(amps[0b1100].re, 0.8);
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn as_printed_breaks_trace_for_unequal_amplitudes() {
        let bell = BellState::maximal();
        let m = reduced_matrix(PartitionKind::QubitReservoir, ReducedConvention::AsPrinted, &bell, amps(0.3), amps(0.9));
        assert!((m.trace().re - 1.0).abs() > 1e-3);
        let same =
            reduced_matrix(PartitionKind::QubitReservoir, ReducedConvention::AsPrinted, &bell, amps(0.5), amps(0.5));
        assert!((same.trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partition_names_round_trip() {
        for p in PartitionKind::ALL {
            assert_eq!(p.short_name().parse::<PartitionKind>().unwrap(), p);
        }
        assert!("qx".parse::<PartitionKind>().is_err());
    }

    #[test]
    fn delta_vanishes_on_the_axes() {
        let s = setup(PartitionKind::QubitQubit, 0.3);
        let cache = DecayRateCache::new();
        assert_eq!(s.delta(0.0, 0.7, &cache).unwrap(), 0.0);
        assert_eq!(s.delta(0.7, 0.0, &cache).unwrap(), 0.0);
    }

    #[test]
    fn delta_point_is_finite_and_bounded() {
        let d = delta_measure(
            0.5,
            0.5,
            PartitionKind::QubitQubit,
            &BellState::maximal(),
            &MeasurementModel::symmetric(20, SpectralParams::new(0.01, 0.3)),
            &QuadratureOptions::default(),
        )
        .unwrap();
        assert!(d.is_finite() && d.abs() <= 1.0);
    }

    #[test]
    fn sign_map_counts_and_metadata() {
        let s = setup(PartitionKind::QubitQubit, 0.3);
        let axis = Axis::log("tau1", 0.05, 5.0, 6);
        let axis2 = Axis::log("tau2", 0.05, 5.0, 6);
        let map = nonmarkov_sign_map(&axis, &axis2, &s, &DecayRateCache::new(), &Sweep::new(2)).unwrap();
        assert_eq!(map.cells.len(), 36);
        assert_eq!(map.positive_count, map.cells.iter().filter(|&&c| c == 1).count());
        assert_eq!(map.metadata["partition"], "qq");
        let bad = Axis::linear("tau1", 0.0, 5.0, 6);
        assert!(nonmarkov_sign_map(&bad, &axis2, &s, &DecayRateCache::new(), &Sweep::new(1)).is_err());
    }
}
