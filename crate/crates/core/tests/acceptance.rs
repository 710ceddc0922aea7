//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zeno_core::bipartite::{
    self, BellState, DeltaSetup, MeasurementModel, PartitionKind, ReducedConvention, SurvivalAmplitudes,
};
use zeno_core::linalg::{self, ComplexMatrix, DensityMatrix, C64};
use zeno_core::oracle;
use zeno_core::output::{self, Plane};
use zeno_core::rcsink::{self, RCParams, RcMap};
use zeno_core::spectral::{self, DecayRateCache, QuadratureOptions, SpectralParams};
use zeno_core::sweep::{Axis, HeatmapGrid, SignMap, Sweep};

const ALPHAS: [f64; 4] = [0.05, 0.1, 0.2, 0.3];
const COUPLING: f64 = 0.01;

struct Outcome {
    id: &'static str,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(id: &'static str, title: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome {
        id,
        title,
        passed,
        detail,
    }
}

fn report(o: &Outcome) {
    println!(
        "criterion {:<3} [{}] {}: {}",
        o.id,
        if o.passed { "PASS" } else { "FAIL" },
        o.title,
        o.detail
    );
}

fn strictly_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn non_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn non_decreasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

// ---------------------------------------------------------------------------
// Shared sweeps

fn zeno_map(workers: usize) -> (HeatmapGrid, SignMap, f64) {
    let p = SpectralParams::new(COUPLING, 1.0);
    let start = Instant::now();
    let heat = spectral::zeno_deviation_map(
        &Axis::log("tau", 0.02, 5.0, 50),
        &Axis::log("alpha", 0.05, 1.0, 50),
        &p,
        &QuadratureOptions::default(),
        &Sweep::new(workers),
    )
    .expect("zeno map");
    let elapsed = start.elapsed().as_secs_f64();
    let signs = zeno_core::sweep::to_sign_map(&heat, spectral::BOUNDARY_BAND);
    (heat, signs, elapsed)
}

fn nm_setup(partition: PartitionKind, alpha: f64) -> DeltaSetup {
    DeltaSetup {
        partition,
        bell: BellState::maximal(),
        model: MeasurementModel::symmetric(20, SpectralParams::new(COUPLING, alpha)),
        quadrature: QuadratureOptions::default(),
    }
}

fn nm_axes() -> (Axis, Axis) {
    (Axis::log("tau1", 0.05, 5.0, 40), Axis::log("tau2", 0.05, 5.0, 40))
}

/// Δ maps for every α, qubit–qubit then qubit–reservoir, each α with a fresh cache.
struct NmRun {
    qq: Vec<HeatmapGrid>,
    qr: Vec<HeatmapGrid>,
    qq_seconds: f64,
}

fn nm_run(workers: usize) -> NmRun {
    let (x, y) = nm_axes();
    let runner = Sweep::new(workers);
    let mut run = NmRun {
        qq: vec![],
        qr: vec![],
        qq_seconds: 0.0,
    };
    for alpha in ALPHAS {
        let cache = DecayRateCache::new();
        let start = Instant::now();
        let qq = bipartite::nonmarkov_heatmap(&x, &y, &nm_setup(PartitionKind::QubitQubit, alpha), &cache, &runner)
            .expect("qq map");
        run.qq_seconds += start.elapsed().as_secs_f64();
        let qr = bipartite::nonmarkov_heatmap(&x, &y, &nm_setup(PartitionKind::QubitReservoir, alpha), &cache, &runner)
            .expect("qr map");
        run.qq.push(qq);
        run.qr.push(qr);
    }
    run
}

fn signs(h: &HeatmapGrid) -> SignMap {
    zeno_core::sweep::to_sign_map(h, bipartite::SIGN_ZERO_BAND)
}

fn rc_run(tau: f64, workers: usize) -> RcMap {
    rcsink::rc_map(
        &Axis::linear("t", 0.0, 10.0, 40),
        &Axis::linear("sink_rate", 0.0, 3.0, 40),
        tau,
        &RCParams::new(1.0, 0.0),
        &Sweep::new(workers),
    )
    .expect("rc map")
}

// ---------------------------------------------------------------------------
// Criteria

fn criterion_1(signs: &SignMap, seconds: f64) -> Outcome {
    let nx = signs.nx();
    let mut short_ok = true;
    let mut anti_rows_ok = true;
    let mut no_anti_large_alpha = true;
    for (iy, &alpha) in signs.y.iter().enumerate() {
        let row = &signs.cells[iy * nx..(iy + 1) * nx];
        for (ix, &tau) in signs.x.iter().enumerate() {
            if tau <= 0.5 && row[ix] != -1 {
                short_ok = false;
            }
            if alpha >= 0.4 && row[ix] == 1 {
                no_anti_large_alpha = false;
            }
        }
        if alpha <= 0.2 {
            let has_anti = signs.x.iter().zip(row).any(|(&tau, &s)| tau > 1.0 && tau <= 5.0 && s == 1);
            anti_rows_ok &= has_anti;
        }
    }
    let fast = seconds <= 60.0;
    outcome(
        "1",
        "Zeno short-interval law",
        short_ok && anti_rows_ok && no_anti_large_alpha && fast,
        format!(
            "tau<=0.5 all Zeno: {short_ok}; anti-Zeno in (1,5] for every alpha<=0.2: {anti_rows_ok}; \
             none for alpha>=0.4: {no_anti_large_alpha}; {seconds:.1} s on 1 worker (limit 60 s)"
        ),
    )
}

fn criterion_2() -> Outcome {
    let q = QuadratureOptions::default();
    let taus = [0.02, 0.1, 0.5, 2.0, 5.0];
    let alphas = [0.05, 0.1, 0.25, 0.5, 1.0];
    let mut worst_rel: f64 = 0.0;
    let mut worst_invariance: f64 = 0.0;
    let mut failures = 0;
    for &tau in &taus {
        for &alpha in &alphas {
            let p = SpectralParams::new(COUPLING, alpha);
            let gamma = match spectral::effective_decay_rate(tau, &p, &q) {
                Ok(g) => g,
                Err(_) => {
                    failures += 1;
                    continue;
                }
            };
            let reference = oracle::trapezoid_decay_rate(tau, &p, 1_000_000, 1e6);
            worst_rel = worst_rel.max(((gamma - reference) / reference).abs());
            let ratio = gamma / spectral::natural_decay_rate(&p);
            for coupling in [1e-4, 0.1, 1.0] {
                let scaled = SpectralParams::new(coupling, alpha);
                match spectral::effective_decay_rate(tau, &scaled, &q) {
                    Ok(g) => {
                        let r = g / spectral::natural_decay_rate(&scaled);
                        worst_invariance = worst_invariance.max((r - ratio).abs());
                    }
                    Err(_) => failures += 1,
                }
            }
        }
    }
    outcome(
        "2",
        "quadrature correctness",
        failures == 0 && worst_rel <= 1e-6 && worst_invariance <= 1e-12,
        format!(
            "max rel. error vs 1e6-point trapezoid {worst_rel:.2e} (tol 1e-6); \
             max |ratio change| over coupling {worst_invariance:.2e} (tol 1e-12); quadrature failures {failures}"
        ),
    )
}

fn criterion_3(rng: &mut ChaCha8Rng) -> (Outcome, Vec<DensityMatrix>) {
    let mut worst = [0.0f64; 3];
    let mut produced = Vec::new();
    let mut printed_checked = 0;
    let mut printed_rejected = 0;
    let mut errors = 0;
    for _ in 0..500 {
        let bell = BellState::from_a(rng.gen_range(-1.0..=1.0)).unwrap();
        let s1 = SurvivalAmplitudes::from_u(rng.gen_range(0.0..=1.0)).unwrap();
        let s2 = SurvivalAmplitudes::from_u(rng.gen_range(0.0..=1.0)).unwrap();
        for (k, partition) in PartitionKind::ALL.into_iter().enumerate() {
            match (
                bipartite::reduced_density(partition, &bell, s1, s2),
                bipartite::oracle_reduced(partition, &bell, s1, s2),
            ) {
                (Ok(closed), Ok(oracle)) => {
                    worst[k] = worst[k].max(closed.matrix().max_abs_diff(oracle.matrix()).unwrap());
                    produced.push(closed);
                }
                _ => errors += 1,
            }
        }
        if s1.u != s2.u {
            printed_checked += 1;
            let printed =
                bipartite::reduced_matrix(PartitionKind::QubitReservoir, ReducedConvention::AsPrinted, &bell, s1, s2);
            if DensityMatrix::new(printed, "printed").is_err() {
                printed_rejected += 1;
            }
        }
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    let o = outcome(
        "3",
        "reduced-matrix oracle equivalence",
        errors == 0 && max <= 1e-12 && printed_checked > 0 && printed_rejected == printed_checked,
        format!(
            "max entry diff qq {:.1e}, rr {:.1e}, qr {:.1e} (tol 1e-12); as-printed qr rejected in \
             {printed_rejected}/{printed_checked} samples with u1 != u2; construction errors {errors}",
            worst[0], worst[1], worst[2]
        ),
    );
    (o, produced)
}

fn random_density(rng: &mut ChaCha8Rng, dim: usize) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(dim, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let m = g.matmul(&g.adjoint()).unwrap();
    let tr = m.trace().re;
    let mut m = m.scale(1.0 / tr);
    // Remove rounding asymmetry so the Hermiticity check sees an exact copy.
    for i in 0..dim {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in i + 1..dim {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    DensityMatrix::new(m, "random").unwrap()
}

fn valid(rho: &DensityMatrix) -> bool {
    let m = rho.matrix();
    m.hermiticity_defect() <= 1e-12
        && (m.trace().re - 1.0).abs() <= 1e-10
        && m.trace().im.abs() <= 1e-10
        && linalg::eigenvalues_hermitian(m).map_or(false, |e| e.iter().all(|&x| x >= -1e-10))
}

fn criterion_4(rng: &mut ChaCha8Rng, from_3: &[DensityMatrix]) -> Outcome {
    let mut checked = 0;
    let mut invalid = 0;
    for rho in from_3 {
        checked += 1;
        if !valid(rho) {
            invalid += 1;
        }
    }
    // Every state entering the Δ maps of criteria 5 and 6: ρ(x) for x in τ₁, τ₂, τ₁+τ₂ and 0.
    let (x, y) = nm_axes();
    let (xs, ys) = (x.points(), y.points());
    let mut taus: Vec<f64> = vec![0.0];
    taus.extend(&xs);
    taus.extend(&ys);
    for &a in &xs {
        for &b in &ys {
            taus.push(a + b);
        }
    }
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    for alpha in ALPHAS {
        let cache = DecayRateCache::new();
        for partition in [PartitionKind::QubitQubit, PartitionKind::QubitReservoir] {
            let setup = nm_setup(partition, alpha);
            for &tau in &taus {
                checked += 1;
                match setup.state_at(tau, &cache) {
                    Ok(rho) if valid(&rho) => {}
                    _ => invalid += 1,
                }
            }
        }
    }

    let mut worst_sym: f64 = 0.0;
    let mut triangle_violations = 0;
    for dim in [4, 8] {
        for _ in 0..1000 {
            let (r1, r2, r3) = (random_density(rng, dim), random_density(rng, dim), random_density(rng, dim));
            for r in [&r1, &r2, &r3] {
                checked += 1;
                if !valid(r) {
                    invalid += 1;
                }
            }
            let d12 = linalg::trace_distance(&r1, &r2).unwrap();
            let d21 = linalg::trace_distance(&r2, &r1).unwrap();
            let d13 = linalg::trace_distance(&r1, &r3).unwrap();
            let d23 = linalg::trace_distance(&r2, &r3).unwrap();
            worst_sym = worst_sym.max((d12 - d21).abs());
            if d13 > d12 + d23 + 1e-12 {
                triangle_violations += 1;
            }
        }
    }
    outcome(
        "4",
        "density-matrix validity",
        invalid == 0 && worst_sym <= 1e-12 && triangle_violations == 0,
        format!(
            "{invalid}/{checked} matrices invalid; trace distance max asymmetry {worst_sym:.1e}, \
             triangle violations {triangle_violations}/2000"
        ),
    )
}

fn criterion_5(run: &NmRun) -> Outcome {
    let counts: Vec<usize> = run.qq.iter().map(|h| signs(h).positive_count).collect();
    let fast = run.qq_seconds <= 300.0;
    outcome(
        "5",
        "qubit-qubit non-Markovian area grows with alpha",
        strictly_increasing(&counts) && fast,
        format!(
            "positive cells for alpha {ALPHAS:?}: {counts:?} (need strictly increasing); {:.1} s (limit 300 s)",
            run.qq_seconds
        ),
    )
}

fn criterion_6(run: &NmRun) -> (Outcome, Outcome) {
    let maps: Vec<SignMap> = run.qr.iter().map(signs).collect();
    let low: Vec<usize> = maps.iter().map(|m| m.positive_where_x(|t1| t1 < 0.1)).collect();
    let high: Vec<usize> = maps.iter().map(|m| m.positive_where_x(|t1| t1 > 2.0)).collect();
    let low_ok = low[0] > 0 && non_increasing(&low) && *low.last().unwrap() == 0;
    (
        outcome(
            "6i",
            "qubit-reservoir short-tau1 area erased as alpha grows",
            low_ok,
            format!("positive cells with tau1<0.1 for alpha {ALPHAS:?}: {low:?} (need decreasing to 0)"),
        ),
        outcome(
            "6ii",
            "qubit-reservoir long-tau1 area grows with alpha",
            strictly_increasing(&high),
            format!("positive cells with tau1>2 for alpha {ALPHAS:?}: {high:?} (need strictly increasing)"),
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut worst_sum: f64 = 0.0;
    let mut errors = 0;
    for i in 0..=6 {
        let v = 0.5 + 0.25 * i as f64;
        for j in 0..=13 {
            let rate = 0.3 * j as f64;
            for k in 0..=80 {
                let t = 0.25 * k as f64;
                match rcsink::rc_amplitudes(t, &RCParams::new(v, rate)) {
                    Ok(a) => worst_sum = worst_sum.max((a.xi2 + a.eta2 + a.chi2 - 1.0).abs()),
                    Err(_) => errors += 1,
                }
            }
        }
    }
    let mut worst_lossless: f64 = 0.0;
    for k in 0..=2000 {
        let t = 0.01 * k as f64;
        match rcsink::rc_amplitudes(t, &RCParams::new(1.0, 0.0)) {
            Ok(a) => worst_lossless = worst_lossless.max(a.chi2.abs()),
            Err(_) => errors += 1,
        }
    }
    let times: Vec<f64> = (0..=1000).map(|k| 0.01 * k as f64).collect();
    let mut worst_rk4: f64 = 0.0;
    for rate in [0.0, 0.5, 1.0, 2.0] {
        let p = RCParams::new(1.0, rate);
        for (&t, r) in times.iter().zip(oracle::rk4_populations(&times, 1.0, rate, 1e-4)) {
            match rcsink::rc_amplitudes(t, &p) {
                Ok(a) => {
                    let e = (a.xi2 - r[0]).abs().max((a.eta2 - r[1]).abs()).max((a.chi2 - r[2]).abs());
                    worst_rk4 = worst_rk4.max(e);
                }
                Err(_) => errors += 1,
            }
        }
    }
    outcome(
        "7",
        "sink-model population law",
        errors == 0 && worst_sum <= 1e-10 && worst_lossless <= 1e-12 && worst_rk4 <= 1e-6,
        format!(
            "max |sum-1| {worst_sum:.1e} (tol 1e-10); lossless max chi2 {worst_lossless:.1e} (tol 1e-12); \
             max diff vs RK4 {worst_rk4:.1e} (tol 1e-6); errors {errors}"
        ),
    )
}

fn criterion_8(small: &RcMap, mid: &RcMap, large: &RcMap) -> (Outcome, Outcome) {
    (
        outcome(
            "8i",
            "sink-model positive area non-decreasing in sink rate (tau=0.1)",
            non_decreasing(&mid.positive_per_rate),
            format!("positive cells per sink rate: {:?}", mid.positive_per_rate),
        ),
        outcome(
            "8ii",
            "sink-model positive area larger at small tau",
            small.positive_count > large.positive_count,
            format!(
                "positive cells tau=0.05: {}, tau=0.5: {} (need first > second)",
                small.positive_count, large.positive_count
            ),
        ),
    )
}

fn criterion_9(groups: &[(&str, Vec<String>)]) -> Outcome {
    let mut mismatched = Vec::new();
    for (name, csvs) in groups {
        if csvs.windows(2).any(|w| w[0] != w[1]) {
            mismatched.push(*name);
        }
    }
    outcome(
        "9",
        "determinism",
        mismatched.is_empty(),
        format!(
            "{} CSV groups compared (workers 1 and 8, two consecutive runs); mismatched: {:?}",
            groups.len(),
            mismatched
        ),
    )
}

fn csv(h: &HeatmapGrid) -> String {
    output::to_csv(Plane::Values(h))
}

fn main() -> ExitCode {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut outcomes = Vec::new();
    let emit = |o: Outcome, all: &mut Vec<Outcome>| {
        report(&o);
        all.push(o);
    };

    let (zeno_heat_1, zeno_signs, zeno_seconds) = zeno_map(1);
    emit(criterion_1(&zeno_signs, zeno_seconds), &mut outcomes);
    emit(criterion_2(), &mut outcomes);
    let (c3, produced) = criterion_3(&mut rng);
    emit(c3, &mut outcomes);
    emit(criterion_4(&mut rng, &produced), &mut outcomes);

    let nm_8 = nm_run(8);
    emit(criterion_5(&nm_8), &mut outcomes);
    let (c6i, c6ii) = criterion_6(&nm_8);
    emit(c6i, &mut outcomes);
    emit(c6ii, &mut outcomes);
    emit(criterion_7(), &mut outcomes);

    let rc_small = rc_run(0.05, 8);
    let rc_mid = rc_run(0.1, 8);
    let rc_large = rc_run(0.5, 8);
    let (c8i, c8ii) = criterion_8(&rc_small, &rc_mid, &rc_large);
    emit(c8i, &mut outcomes);
    emit(c8ii, &mut outcomes);

    // Repeat runs for byte comparison: workers 8 twice, workers 1 once.
    let (zeno_heat_8a, _, _) = zeno_map(8);
    let (zeno_heat_8b, _, _) = zeno_map(8);
    let nm_1 = nm_run(1);
    let nm_8b = nm_run(8);
    let mut groups: Vec<(&str, Vec<String>)> = vec![(
        "zeno map",
        vec![csv(&zeno_heat_1), csv(&zeno_heat_8a), csv(&zeno_heat_8b)],
    )];
    for (k, _) in ALPHAS.iter().enumerate() {
        groups.push(("qq map", vec![csv(&nm_8.qq[k]), csv(&nm_1.qq[k]), csv(&nm_8b.qq[k])]));
        groups.push(("qr map", vec![csv(&nm_8.qr[k]), csv(&nm_1.qr[k]), csv(&nm_8b.qr[k])]));
    }
    for (tau, first) in [(0.05, &rc_small), (0.1, &rc_mid), (0.5, &rc_large)] {
        groups.push((
            "sink map",
            vec![csv(&first.heat), csv(&rc_run(tau, 1).heat), csv(&rc_run(tau, 8).heat)],
        ));
    }
    emit(criterion_9(&groups), &mut outcomes);

    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        outcomes.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" ({})", failed.join(", "))
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
