//! Globally adaptive Gauss–Kronrod (7/15) integration over seeded panels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// 7-point Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error(
        "tolerance not met after {subdivisions} subdivisions: estimate {value:e}, error {abs_error:e}, target {target:e}"
    )]
    ToleranceNotMet {
        value: f64,
        abs_error: f64,
        target: f64,
        subdivisions: usize,
    },
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
    #[error("breakpoints must be finite and strictly increasing")]
    BadBreakpoints,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    pub subdivisions: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    // Max-heap on error; ties broken by position so runs are reproducible.
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadratureError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadratureError::NonFinite(x))
        }
    };

    let fc = eval(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = kronrod.abs();
    let mut fv = [(0.0, 0.0); 7];
    for (j, slot) in fv.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        *slot = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for (j, (f1, f2)) in fv.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }

    let result = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((result, err))
}

/// Neumaier-compensated sum of the panel values in ascending position order.
fn ordered_sum(panels: &mut [Panel]) -> (f64, f64) {
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut err = 0.0;
    for p in panels.iter() {
        let t = sum + p.value;
        if sum.abs() >= p.value.abs() {
            comp += (sum - t) + p.value;
        } else {
            comp += (p.value - t) + sum;
        }
        sum = t;
        err += p.error;
    }
    (sum + comp, err)
}

/// Integrates `f` over `[breakpoints[0], breakpoints[last]]`.
///
/// Every interval between consecutive breakpoints starts as its own panel.
/// The panel with the largest error estimate is bisected until the total
/// error drops below `max(abs_tol, rel_tol·|I|)` or `max_subdivisions`
/// bisections have been spent.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<QuadResult, QuadratureError> {
    if breakpoints.len() < 2
        || breakpoints.iter().any(|x| !x.is_finite())
        || breakpoints.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(QuadratureError::BadBreakpoints);
    }

    let mut heap = BinaryHeap::with_capacity(breakpoints.len() + max_subdivisions);
    let mut evaluations = 0;
    for w in breakpoints.windows(2) {
        let (value, error) = gauss_kronrod_15(&f, w[0], w[1])?;
        evaluations += 15;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    let mut subdivisions = 0;
    let mut running_value: f64 = heap.iter().map(|p| p.value).sum();
    let mut running_error: f64 = heap.iter().map(|p| p.error).sum();
    loop {
        let target = abs_tol.max(rel_tol * running_value.abs());
        if running_error <= target || subdivisions >= max_subdivisions {
            // Exact, order-independent totals for the verdict and the result.
            let mut all: Vec<Panel> = heap.into_vec();
            let (value, abs_error) = ordered_sum(&mut all);
            let target = abs_tol.max(rel_tol * value.abs());
            if abs_error <= target {
                return Ok(QuadResult {
                    value,
                    abs_error,
                    evaluations,
                    subdivisions,
                });
            }
            if subdivisions >= max_subdivisions {
                return Err(QuadratureError::ToleranceNotMet {
                    value,
                    abs_error,
                    target,
                    subdivisions,
                });
            }
            // Running sums drifted below the target; resynchronize and go on.
            running_value = value;
            running_error = abs_error;
            heap = all.into_iter().collect();
            continue;
        }

        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel can no longer be split in floating point; accept it.
            running_error -= worst.error;
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            continue;
        }
        let (lv, le) = gauss_kronrod_15(&f, worst.a, mid)?;
        let (rv, re) = gauss_kronrod_15(&f, mid, worst.b)?;
        evaluations += 30;
        running_value += lv + rv - worst.value;
        running_error += le + re - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
        subdivisions += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x + 1.0, &[0.0, 2.0], 1e-12, 1e-12, 10).unwrap();
        let exact = 64.0 / 6.0 - 8.0 + 2.0;
        assert!((r.value - exact).abs() < 1e-13);
        assert_eq!(r.subdivisions, 0);
    }

    #[test]
    fn adapts_to_a_sharp_peak() {
        let eps: f64 = 1e-3;
        let r = integrate(|x| eps / (x * x + eps * eps), &[-1.0, 1.0], 1e-12, 1e-12, 500).unwrap();
        let exact = 2.0 * (1.0 / eps).atan();
        assert!((r.value - exact).abs() < 1e-10, "{} vs {}", r.value, exact);
        assert!(r.subdivisions > 0);
    }

    #[test]
    fn oscillatory_with_node_breakpoints() {
        // ∫_0^{20π} sin²x dx = 10π
        let nodes: Vec<f64> = (0..=20).map(|k| k as f64 * PI).collect();
        let r = integrate(|x| x.sin().powi(2), &nodes, 1e-12, 1e-12, 200).unwrap();
        assert!((r.value - 10.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let err = integrate(|x: f64| x.abs().sqrt().recip().min(1e8), &[-1.0, 1.0], 1e-15, 1e-15, 3)
            .unwrap_err();
        assert!(matches!(err, QuadratureError::ToleranceNotMet { subdivisions: 3, .. }));
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert_eq!(
            integrate(|x| x, &[1.0, 0.0], 1e-10, 1e-10, 10),
            Err(QuadratureError::BadBreakpoints)
        );
        assert_eq!(
            integrate(|x| x, &[0.0], 1e-10, 1e-10, 10),
            Err(QuadratureError::BadBreakpoints)
        );
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        assert!(matches!(
            integrate(|_| f64::NAN, &[0.0, 1.0], 1e-10, 1e-10, 10),
            Err(QuadratureError::NonFinite(_))
        ));
    }
}
