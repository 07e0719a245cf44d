//! Bracketed scalar root finding (Brent's method).

use crate::error::{LisError, Result};

/// Finds a root of `f` in `[a, b]`, which must bracket a sign change.
/// Stops once the bracket is narrower than `xtol + 4 eps |x|`.
pub fn brent<F>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(LisError::NotBracketed { lo: a, hi: b });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;

    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, secant when only two points
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * m * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_roots() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 0.0, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        let r = brent(|x| x.cos() - x, 0.0, 1.0, 0.0, 200).unwrap();
        assert!((r - 0.739_085_133_215_160_6).abs() < 1e-15);
    }

    #[test]
    fn steep_and_flat_functions() {
        let r = brent(|x| (x - 1e-3).powi(3), -1.0, 1.0, 0.0, 500).unwrap();
        assert!((r - 1e-3).abs() < 1e-5);
        let r = brent(|x| (20.0 * (x - 0.5)).tanh(), 0.0, 1.0, 0.0, 200).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_missing_bracket() {
        assert!(matches!(
            brent(|x| x * x + 1.0, -1.0, 1.0, 0.0, 100),
            Err(LisError::NotBracketed { .. })
        ));
    }
}
