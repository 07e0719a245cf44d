//! One-dimensional Gauss-Kronrod (7/15) quadrature: a globally adaptive
//! driver and a fixed composite rule. Nested use (for surface integrals)
//! shares one evaluation [`Budget`].

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{LisError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Points evaluated per Gauss-Kronrod panel.
pub const PANEL_EVALS: usize = 15;

/// Result of a numerical integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Estimated absolute error (one standard error for Monte Carlo).
    pub error: f64,
    /// Integrand evaluations consumed, counted at every nesting level.
    pub evals: usize,
}

/// Evaluation counter shared by nested integrations.
#[derive(Debug)]
pub struct Budget {
    limit: usize,
    used: Cell<usize>,
}

impl Budget {
    pub fn new(limit: usize) -> Self {
        Self {
            limit,
            used: Cell::new(0),
        }
    }

    pub fn used(&self) -> usize {
        self.used.get()
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    fn take(&self, n: usize) -> bool {
        let next = self.used.get() + n;
        self.used.set(next);
        next <= self.limit
    }
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
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod_panel<F>(f: &mut F, a: f64, b: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center)?;
    let mut kronrod = f_center * WGK[7];
    let mut gauss = f_center * WG[3];
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let lo = f(center - dx)?;
        let hi = f(center + dx)?;
        fv1[j] = lo;
        fv2[j] = hi;
        kronrod += WGK[j] * (lo + hi);
        abs_sum += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let abs_half = half.abs();
    let value = kronrod * half;
    let res_abs = abs_sum * abs_half;
    let res_asc = asc * abs_half;
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel { a, b, value, error })
}

/// Globally adaptive integration of `f` over `[a, b]`.
///
/// Panels are bisected worst-first until the summed error estimate drops
/// below `max(abs_tol, rel_tol * |value|)`. Fails with
/// [`LisError::BudgetExhausted`] once the shared budget runs out.
pub fn adaptive<F>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, budget: &Budget) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    let start = budget.used();
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evals: 0,
        });
    }
    let exhausted = |value: f64, error: f64| LisError::BudgetExhausted {
        max_evals: budget.limit(),
        estimate: value,
        error,
    };
    if !budget.take(PANEL_EVALS) {
        return Err(exhausted(f64::NAN, f64::INFINITY));
    }
    let first = kronrod_panel(&mut f, a, b)?;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    loop {
        let tol = abs_tol.max(rel_tol * value.abs());
        if error <= tol {
            break;
        }
        let worst = *heap.peek().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // panel cannot be split further in floating point
            break;
        }
        if !budget.take(2 * PANEL_EVALS) {
            return Err(exhausted(value, error));
        }
        heap.pop();
        let left = kronrod_panel(&mut f, worst.a, mid)?;
        let right = kronrod_panel(&mut f, mid, worst.b)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // resum in a fixed order so the running-sum drift does not leak out
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().map(|p| p.value).sum();
    let error = panels.iter().map(|p| p.error).sum();
    Ok(Integral {
        value,
        error,
        evals: budget.used() - start,
    })
}

/// Composite Gauss-Kronrod rule on `panels` equal panels.
pub fn fixed<F>(mut f: F, a: f64, b: f64, panels: usize, budget: &Budget) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    let start = budget.used();
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    for k in 0..panels {
        if !budget.take(PANEL_EVALS) {
            return Err(LisError::BudgetExhausted {
                max_evals: budget.limit(),
                estimate: value,
                error: f64::INFINITY,
            });
        }
        let lo = a + width * k as f64;
        let hi = if k + 1 == panels { b } else { lo + width };
        let p = kronrod_panel(&mut f, lo, hi)?;
        value += p.value;
        error += p.error;
    }
    Ok(Integral {
        value,
        error,
        evals: budget.used() - start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ok(f: impl Fn(f64) -> f64) -> impl FnMut(f64) -> Result<f64> {
        move |x| Ok(f(x))
    }

    #[test]
    fn polynomials_are_exact() {
        let b = Budget::new(1000);
        // Gauss and Kronrod agree up to degree 13: one panel suffices
        let r = adaptive(ok(|x: f64| x.powi(12)), 0.0, 1.0, 1e-13, 1e-13, &b).unwrap();
        assert!((r.value - 1.0 / 13.0).abs() < 1e-15);
        assert_eq!(r.evals, PANEL_EVALS);
        let r = adaptive(ok(|x: f64| x.powi(22)), 0.0, 1.0, 1e-14, 1e-14, &b).unwrap();
        assert!((r.value - 1.0 / 23.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_and_peaked_integrands() {
        let b = Budget::new(1_000_000);
        let r = adaptive(ok(f64::sin), 0.0, PI, 0.0, 1e-12, &b).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        let eps = 1e-4;
        let r = adaptive(ok(move |x: f64| eps / (x * x + eps * eps)), -1.0, 1.0, 0.0, 1e-10, &b).unwrap();
        let exact = 2.0 * (1.0 / eps).atan();
        assert!((r.value - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn kink_converges() {
        let b = Budget::new(1_000_000);
        let r = adaptive(ok(|x: f64| (x - 0.3).abs()), 0.0, 1.0, 0.0, 1e-10, &b).unwrap();
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-10);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let b = Budget::new(100);
        let err = adaptive(ok(|x: f64| 1.0 / x.sqrt()), 0.0, 1.0, 0.0, 1e-15, &b).unwrap_err();
        assert!(matches!(err, LisError::BudgetExhausted { max_evals: 100, .. }));
    }

    #[test]
    fn integrand_errors_propagate() {
        let b = Budget::new(1000);
        let err = adaptive(
            |_| Err(LisError::SingularIntegrand { value: 0.0 }),
            0.0,
            1.0,
            1e-8,
            1e-8,
            &b,
        )
        .unwrap_err();
        assert!(matches!(err, LisError::SingularIntegrand { .. }));
    }

    #[test]
    fn fixed_rule_and_reversed_limits() {
        let b = Budget::new(10_000);
        let r = fixed(ok(f64::exp), 0.0, 1.0, 4, &b).unwrap();
        assert!((r.value - (1f64.exp() - 1.0)).abs() < 1e-14);
        assert_eq!(r.evals, 4 * PANEL_EVALS);
        let r = adaptive(ok(|x| x), 1.0, 0.0, 1e-12, 1e-12, &b).unwrap();
        assert!((r.value + 0.5).abs() < 1e-15);
    }
}
