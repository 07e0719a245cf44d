//! Spiral (Fibonacci) lattice on the unit sphere.
//!
//! Point `i` of `n` sits at height `z = 1 - (2i + 1)/n` and longitude
//! `i * golden_angle`. Every point owns an equal-area band slice, so the
//! lattice is area-uniform with cell area `4 pi / n`, and the first `k`
//! points fill a polar cap.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;

/// `pi (3 - sqrt(5))`.
pub const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

pub fn fibonacci_point(i: usize, n: usize) -> Vector3<f64> {
    let z = 1.0 - (2 * i + 1) as f64 / n as f64;
    let rho = (1.0 - z * z).max(0.0).sqrt();
    let phi = (i as f64 * GOLDEN_ANGLE).rem_euclid(TAU);
    Vector3::new(rho * phi.cos(), rho * phi.sin(), z)
}

/// All `n` lattice points as unit vectors, north pole first.
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    (0..n).map(|i| fibonacci_point(i, n)).collect()
}

/// Number of lattice points strictly inside the polar cap of half-angle
/// `half_angle` for a lattice of `n` points.
pub fn points_in_cap(n: usize, half_angle: f64) -> usize {
    let c = half_angle.cos();
    // z_i > c  <=>  2i + 1 < n (1 - c)
    let bound = n as f64 * (1.0 - c);
    let mut k = ((bound - 1.0) / 2.0).ceil().max(0.0) as usize;
    // settle rounding at the boundary
    while k > 0 && fibonacci_z(k - 1, n) <= c {
        k -= 1;
    }
    while k < n && fibonacci_z(k, n) > c {
        k += 1;
    }
    k.min(n)
}

fn fibonacci_z(i: usize, n: usize) -> f64 {
    1.0 - (2 * i + 1) as f64 / n as f64
}

/// Smallest lattice size whose polar cap of `half_angle` holds exactly
/// `count` points.
pub fn lattice_size_for_cap(count: usize, half_angle: f64) -> usize {
    let frac = 0.5 * (1.0 - half_angle.cos());
    // the cap population grows by at most one per added point, so starting
    // below the estimate and walking up finds the smallest size
    let mut n = (((count as f64 - 1.0) / frac).floor().max(0.0) as usize)
        .saturating_sub(2)
        .max(count);
    while points_in_cap(n, half_angle) < count {
        n += 1;
    }
    n
}

/// Typical nearest-neighbor spacing, in radians, of an `n`-point lattice.
pub fn spacing(n: usize) -> f64 {
    (4.0 * PI / n as f64).sqrt()
}
