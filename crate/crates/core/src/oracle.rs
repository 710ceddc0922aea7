//! Independent reference computations used to cross-check the fast paths.
//!
//! Each oracle takes a deliberately different route from the production code:
//! explicit time stepping instead of closed forms, a brute-force trapezoid
//! instead of adaptive quadrature, Sturm bisection on a Householder
//! tridiagonal form instead of Jacobi rotations, and a full 16-dimensional
//! state instead of closed-form reduced matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bipartite::{self, BellState, PartitionKind, ReducedConvention, SurvivalAmplitudes};
use crate::linalg::{self, ComplexMatrix, C64};
use crate::rcsink::{self, RCParams};
use crate::spectral::{self, QuadratureOptions, SpectralParams};

/// Populations (ξ², η², 1 − ξ² − η²) at each of `times` from classical RK4 on
/// i dψ/dt = Hψ, H = [[0, V], [V, −iλ/2]], ψ(0) = (1, 0).
///
/// `times` must be sorted ascending and non-negative.
pub fn rk4_populations(times: &[f64], coupling: f64, sink_rate: f64, step: f64) -> Vec<[f64; 3]> {
    assert!(step > 0.0, "step must be positive");
    assert!(times.windows(2).all(|w| w[1] >= w[0]), "times must be sorted");
    let minus_i = C64::new(0.0, -1.0);
    let rhs = |psi: [C64; 2]| -> [C64; 2] {
        let h0 = psi[1] * coupling;
        let h1 = psi[0] * coupling + psi[1] * C64::new(0.0, -0.5 * sink_rate);
        [minus_i * h0, minus_i * h1]
    };
    let advance = |psi: [C64; 2], h: f64| -> [C64; 2] {
        let add = |a: [C64; 2], k: [C64; 2], s: f64| [a[0] + k[0] * s, a[1] + k[1] * s];
        let k1 = rhs(psi);
        let k2 = rhs(add(psi, k1, 0.5 * h));
        let k3 = rhs(add(psi, k2, 0.5 * h));
        let k4 = rhs(add(psi, k3, h));
        [
            psi[0] + (k1[0] + k2[0] * 2.0 + k3[0] * 2.0 + k4[0]) * (h / 6.0),
            psi[1] + (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * (h / 6.0),
        ]
    };

    let mut psi = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let mut now = 0.0;
    let mut steps_taken: u64 = 0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        // Step on a fixed lattice k·step so sample times do not perturb the path.
        let full_steps = (target / step).floor() as u64;
        while steps_taken < full_steps {
            psi = advance(psi, step);
            steps_taken += 1;
            now = steps_taken as f64 * step;
        }
        let tail = target - now;
        let at = if tail > 0.0 { advance(psi, tail) } else { psi };
        let xi2 = at[0].norm_sqr();
        let eta2 = at[1].norm_sqr();
        out.push([xi2, eta2, 1.0 - xi2 - eta2]);
    }
    out
}

/// γ(τ) by a composite trapezoid with `points` nodes on [0, ω_max], graded as
/// ω = ω_max·s³ with s uniform so both the peak near ω ≈ α and the lobes near
/// ΔΩ are resolved.
pub fn trapezoid_decay_rate(tau: f64, p: &SpectralParams, points: usize, omega_max: f64) -> f64 {
    assert!(points >= 2);
    let h = 1.0 / (points - 1) as f64;
    let g = |s: f64| {
        let w = omega_max * s * s * s;
        spectral::spectral_density(w, p) * spectral::modulating_function(w, tau, p) * 3.0 * omega_max * s * s
    };
    let mut sum = 0.5 * (g(0.0) + g(1.0));
    let mut comp = 0.0;
    for k in 1..points - 1 {
        let y = g(k as f64 * h) - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum * h
}

/// Symmetric tridiagonal form (diagonal, off-diagonal) of the real 2n×2n
/// embedding [[Re M, −Im M], [Im M, Re M]] of Hermitian `m`, by Householder
/// reflections. Every eigenvalue of `m` appears twice in the embedding.
pub fn tridiagonal_embedding(m: &ComplexMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.dim();
    let size = 2 * n;
    let mut a = vec![0.0; size * size];
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            a[i * size + j] = z.re;
            a[(i + n) * size + j + n] = z.re;
            a[i * size + j + n] = -z.im;
            a[(i + n) * size + j] = z.im;
        }
    }
    for k in 0..size.saturating_sub(2) {
        let mut v: Vec<f64> = (k + 1..size).map(|i| a[i * size + k]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if v[0] > 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);
        let off = k + 1;
        let len = size - off;
        // p = A v on the trailing block, q = p − (vᵀp) v, A ← A − 2(v qᵀ + q vᵀ).
        let p: Vec<f64> = (0..len)
            .map(|i| (0..len).map(|j| a[(off + i) * size + off + j] * v[j]).sum())
            .collect();
        let kappa: f64 = v.iter().zip(&p).map(|(x, y)| x * y).sum();
        let q: Vec<f64> = p.iter().zip(&v).map(|(pi, vi)| pi - kappa * vi).collect();
        for i in 0..len {
            for j in 0..len {
                a[(off + i) * size + off + j] -= 2.0 * (v[i] * q[j] + q[i] * v[j]);
            }
        }
        for i in off..size {
            a[i * size + k] = 0.0;
            a[k * size + i] = 0.0;
        }
        a[off * size + k] = alpha;
        a[k * size + off] = alpha;
    }
    let diag = (0..size).map(|i| a[i * size + i]).collect();
    let sub = (0..size - 1).map(|i| a[(i + 1) * size + i]).collect();
    (diag, sub)
}

/// Sturm count: eigenvalues of the tridiagonal (diag, sub) strictly below `sigma`.
pub fn sturm_count(diag: &[f64], sub: &[f64], sigma: f64) -> usize {
    let scale = diag
        .iter()
        .chain(sub)
        .fold(1.0f64, |acc, x| acc.max(x.abs()));
    let pivmin = f64::MIN_POSITIVE.max(f64::EPSILON * f64::EPSILON * scale * scale);
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let coupling = if i == 0 { 0.0 } else { sub[i - 1] * sub[i - 1] / q };
        q = diag[i] - sigma - coupling;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Number of eigenvalues of Hermitian `m` strictly below `sigma`.
pub fn count_below(m: &ComplexMatrix, sigma: f64) -> usize {
    let (d, e) = tridiagonal_embedding(m);
    sturm_count(&d, &e, sigma) / 2
}

/// Ascending eigenvalues of Hermitian `m` by Sturm bisection.
pub fn bisection_eigenvalues(m: &ComplexMatrix, tol: f64) -> Vec<f64> {
    let n = m.dim();
    let (d, e) = tridiagonal_embedding(m);
    // Gershgorin bounds on the tridiagonal.
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..d.len() {
        let radius = if i > 0 { e[i - 1].abs() } else { 0.0 } + e.get(i).map_or(0.0, |x| x.abs());
        lo = lo.min(d[i] - radius);
        hi = hi.max(d[i] + radius);
    }
    lo -= 1.0;
    hi += 1.0;
    (0..n)
        .map(|k| {
            // Eigenvalue k of m sits at positions 2k and 2k+1 of the doubled spectrum.
            let (mut a, mut b) = (lo, hi);
            while b - a > tol {
                let mid = 0.5 * (a + b);
                if sturm_count(&d, &e, mid) > 2 * k + 1 {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Random Hermitian matrix with entries uniform in [−1, 1].
pub fn random_hermitian(rng: &mut impl Rng, dim: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        m[(i, i)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in i + 1..dim {
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl OracleOutcome {
    fn new(name: &'static str, worst: f64, tol: f64, what: &str) -> Self {
        Self {
            name,
            passed: worst <= tol,
            detail: format!("{what}: worst {worst:.3e} (tol {tol:.0e})"),
        }
    }
}

/// Closed-form reduced matrices vs. the partial trace of the full state.
pub fn check_reduced_matrices(seed: u64, samples: usize) -> Vec<OracleOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 3];
    let mut printed_fails = 0;
    let mut unequal = 0;
    for _ in 0..samples {
        let bell = BellState::from_a(rng.gen_range(-1.0..=1.0)).expect("a in range");
        let s1 = SurvivalAmplitudes::from_u(rng.gen_range(0.0..=1.0)).expect("u in range");
        let s2 = SurvivalAmplitudes::from_u(rng.gen_range(0.0..=1.0)).expect("u in range");
        for (slot, partition) in PartitionKind::ALL.into_iter().enumerate() {
            let closed = bipartite::reduced_matrix(partition, ReducedConvention::Corrected, &bell, s1, s2);
            let diff = bipartite::oracle_reduced(partition, &bell, s1, s2)
                .map_err(|e| e.to_string())
                .and_then(|o| closed.max_abs_diff(o.matrix()).map_err(|e| e.to_string()))
                .unwrap_or(f64::INFINITY);
            worst[slot] = worst[slot].max(diff);
        }
        if s1.u != s2.u && bell.b != 0.0 {
            unequal += 1;
            let printed =
                bipartite::reduced_matrix(PartitionKind::QubitReservoir, ReducedConvention::AsPrinted, &bell, s1, s2);
            if (printed.trace().re - 1.0).abs() > linalg::TRACE_TOL {
                printed_fails += 1;
            }
        }
    }
    let mut out: Vec<OracleOutcome> = PartitionKind::ALL
        .into_iter()
        .zip(worst)
        .map(|(p, w)| {
            let name = match p {
                PartitionKind::QubitQubit => "reduced qq vs partial trace",
                PartitionKind::ReservoirReservoir => "reduced rr vs partial trace",
                PartitionKind::QubitReservoir => "reduced qr vs partial trace",
            };
            OracleOutcome::new(name, w, 1e-12, &format!("{samples} samples"))
        })
        .collect();
    out.push(OracleOutcome {
        name: "as-printed qr breaks unit trace",
        passed: printed_fails == unequal,
        detail: format!("{printed_fails}/{unequal} samples with u1 != u2 fail the trace check"),
    });
    out
}

/// Closed-form populations vs. RK4 over t ∈ [0, 10].
pub fn check_rc_amplitudes() -> Vec<OracleOutcome> {
    let times: Vec<f64> = (0..=200).map(|k| 0.05 * k as f64).collect();
    let mut worst: f64 = 0.0;
    for rate in [0.0, 0.5, 1.0, 2.0] {
        let p = RCParams::new(1.0, rate);
        let reference = rk4_populations(&times, p.coupling, rate, 1e-4);
        for (&t, r) in times.iter().zip(&reference) {
            let err = match rcsink::rc_amplitudes(t, &p) {
                Ok(a) => (a.xi2 - r[0]).abs().max((a.eta2 - r[1]).abs()).max((a.chi2 - r[2]).abs()),
                Err(_) => f64::INFINITY,
            };
            worst = worst.max(err);
        }
    }
    vec![OracleOutcome::new(
        "rc populations vs RK4",
        worst,
        1e-6,
        "sink rates {0, 0.5, 1, 2}, t in [0, 10]",
    )]
}

/// Jacobi eigenvalues vs. inertia bisection on random Hermitian matrices.
pub fn check_eigenvalues(seed: u64, samples: usize) -> Vec<OracleOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut worst: f64 = 0.0;
    for k in 0..samples {
        let dim = [2, 4, 8, 16][k % 4];
        let m = random_hermitian(&mut rng, dim);
        let err = match linalg::eigenvalues_hermitian(&m) {
            Ok(fast) => fast
                .iter()
                .zip(bisection_eigenvalues(&m, 1e-13))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(err);
    }
    vec![OracleOutcome::new(
        "jacobi vs bisection eigenvalues",
        worst,
        1e-10,
        &format!("{samples} matrices of dim 2..16"),
    )]
}

/// Adaptive γ(τ) vs. the graded trapezoid on a few probe points.
pub fn check_decay_rate() -> Vec<OracleOutcome> {
    let q = QuadratureOptions::default();
    let mut worst: f64 = 0.0;
    for (tau, alpha) in [(0.1, 0.25), (1.0, 0.1), (3.0, 0.5)] {
        let p = SpectralParams::new(0.01, alpha);
        let err = match spectral::effective_decay_rate(tau, &p, &q) {
            Ok(g) => ((g - trapezoid_decay_rate(tau, &p, 1_000_000, 1e6)) / g).abs(),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(err);
    }
    vec![OracleOutcome::new("decay rate vs trapezoid", worst, 1e-6, "3 probe points")]
}

/// Every oracle suite; `seed` drives the randomized ones.
pub fn run_all(seed: u64) -> Vec<OracleOutcome> {
    let mut out = check_reduced_matrices(seed, 500);
    out.extend(check_rc_amplitudes());
    out.extend(check_eigenvalues(seed, 200));
    out.extend(check_decay_rate());
    out
}
