//! Brute-force surface integration of the pointwise field model.
//!
//! These routines never touch the closed forms in [`crate::rss`]; they
//! integrate `|s|^2` from [`crate::geometry`] over the surface so that every
//! closed form can be checked against an independent number.
//!
//! The spherical integrand does not depend on azimuth once the terminal is
//! on the +z axis, so the azimuth integral is the factor `2 pi` and only the
//! polar angle is integrated numerically. The disk integrand couples radius
//! and azimuth through `sin(theta) sin(phi)` and is integrated in both.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ensure_finite, invalid, LisError, Result};
use crate::geometry::{
    cos_aoa, disk_power_density_cartesian, distance_eta, power_density_cartesian, spherical_to_cartesian,
    visibility_angle, LisGeometry, SurfacePoint, TerminalPose, VISIBILITY_SLACK,
};
use crate::quadrature::{self, Budget, Integral, PANEL_EVALS};

/// Samples per independently seeded Monte Carlo chunk.
const MC_CHUNK: usize = 8192;

/// Smallest `tau cos(theta)` accepted by the disk integrals.
pub const DISK_SINGULARITY_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureMethod {
    /// Globally adaptive Gauss-Kronrod, nested per dimension.
    Adaptive,
    /// Composite Gauss-Kronrod with a fixed number of panels per dimension,
    /// sized from `max_evals`.
    FixedTensor,
    /// Area-uniform sampling with `max_evals` samples.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub method: QuadratureMethod,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
    /// Monte Carlo seed; ignored by the deterministic rules.
    pub seed: u64,
}

impl QuadratureSpec {
    pub fn adaptive(rel_tol: f64) -> Self {
        Self {
            method: QuadratureMethod::Adaptive,
            abs_tol: 1e-300,
            rel_tol,
            max_evals: 200_000_000,
            seed: 0,
        }
    }

    pub fn fixed_tensor(max_evals: usize) -> Self {
        Self {
            method: QuadratureMethod::FixedTensor,
            abs_tol: 1e-300,
            rel_tol: 1e-300,
            max_evals,
            seed: 0,
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            method: QuadratureMethod::MonteCarlo,
            abs_tol: 1e-300,
            rel_tol: 1e-300,
            max_evals: samples,
            seed,
        }
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_max_evals(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(invalid("abs_tol", format!("must be > 0, got {}", self.abs_tol)));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(invalid("rel_tol", format!("must be > 0, got {}", self.rel_tol)));
        }
        if self.max_evals == 0 {
            return Err(invalid("max_evals", "must be >= 1"));
        }
        Ok(())
    }

    /// Tolerances for an integral nested inside an outer one over a range
    /// of the given width.
    fn inner(&self, width: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * 0.1 / width.abs().max(1.0),
            rel_tol: self.rel_tol * 0.1,
            ..*self
        }
    }
}

/// Integrates `|s|^2 R^2 sin(theta)` over the cap `theta in [0, theta_hat]`,
/// full azimuth, for a terminal at normalized distance `tau`.
pub fn integrate_sphere_power(tau: f64, theta_hat: f64, geom: &LisGeometry, quad: &QuadratureSpec) -> Result<Integral> {
    quad.validate()?;
    if !geom.is_sphere() {
        return Err(invalid("geometry", "sphere integration needs a spherical surface"));
    }
    let theta0 = visibility_angle(tau)?;
    let theta_hat = ensure_finite("theta_hat", theta_hat)?;
    if theta_hat < 0.0 {
        return Err(invalid("theta_hat", format!("must be >= 0, got {theta_hat}")));
    }
    if theta_hat > theta0 + VISIBILITY_SLACK {
        return Err(LisError::NotVisible {
            theta: theta_hat,
            theta0,
        });
    }
    let theta_hat = theta_hat.min(theta0);
    let radius = geom.radius();
    let terminal = TerminalPose::at_tau(tau, radius)?;

    // |s|^2 = cos(psi) / (4 pi eta^2), straight from the pointwise model
    let density = |theta: f64, phi: f64| -> Result<f64> {
        let p = SurfacePoint::Spherical { theta, phi };
        let cos_psi = cos_aoa(&p, &terminal, geom)?;
        if cos_psi == 0.0 {
            return Ok(0.0);
        }
        let eta = distance_eta(&p, &terminal, geom)?;
        Ok(cos_psi / (4.0 * PI * eta * eta))
    };

    if theta_hat == 0.0 {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evals: 0,
        });
    }

    match quad.method {
        QuadratureMethod::Adaptive | QuadratureMethod::FixedTensor => {
            let budget = Budget::new(quad.max_evals);
            let ring = |theta: f64| Ok(TAU * radius * radius * theta.sin() * density(theta, 0.0)?);
            if quad.method == QuadratureMethod::Adaptive {
                quadrature::adaptive(ring, 0.0, theta_hat, quad.abs_tol, quad.rel_tol, &budget)
            } else {
                quadrature::fixed(ring, 0.0, theta_hat, quad.max_evals / PANEL_EVALS, &budget)
            }
        }
        QuadratureMethod::MonteCarlo => {
            // u = cos(theta) uniform on [cos(theta_hat), 1] is area-uniform on the cap
            let cos_hat = theta_hat.cos();
            let area = TAU * radius * radius * (1.0 - cos_hat);
            monte_carlo(quad.max_evals, quad.seed, area, |rng| {
                let u = cos_hat + (1.0 - cos_hat) * rng.random::<f64>();
                let theta = u.clamp(-1.0, 1.0).acos().min(theta_hat);
                let phi = TAU * rng.random::<f64>();
                density(theta, phi)
            })
        }
    }
}

/// Integrates the exact disk power: terminal at distance `tau * disk_radius`
/// from the disk center, tilted by `theta` off the disk axis, received over
/// the whole disk. No far-field approximation is made.
pub fn integrate_disk_power(tau: f64, theta: f64, disk_radius: f64, quad: &QuadratureSpec) -> Result<Integral> {
    quad.validate()?;
    let geom = LisGeometry::disk(disk_radius)?;
    let tau = ensure_finite("tau", tau)?;
    let theta = ensure_finite("theta", theta)?;
    if tau <= 0.0 {
        return Err(invalid("tau", format!("must be > 0, got {tau}")));
    }
    if !(0.0..FRAC_PI_2).contains(&theta) {
        return Err(invalid("theta", format!("must lie in [0, pi/2), got {theta}")));
    }
    let guard = tau * theta.cos();
    if guard < DISK_SINGULARITY_GUARD {
        return Err(LisError::SingularIntegrand { value: guard });
    }
    let a = geom.radius();
    let z = tau * a;
    let terminal = Vector3::new(0.0, z * theta.sin(), z * theta.cos());
    let density = move |r: f64, phi: f64| {
        let (s, c) = phi.sin_cos();
        disk_power_density_cartesian(&Vector3::new(r * c, r * s, 0.0), &terminal)
    };

    match quad.method {
        QuadratureMethod::MonteCarlo => monte_carlo(quad.max_evals, quad.seed, geom.area(), |rng| {
            let r = a * rng.random::<f64>().sqrt();
            let phi = TAU * rng.random::<f64>();
            Ok(density(r, phi))
        }),
        _ => {
            let budget = Budget::new(quad.max_evals);
            integrate_rect(|r, phi| Ok(r * density(r, phi)), (0.0, a), (0.0, TAU), quad, &budget)
        }
    }
}

/// Power received over the whole sphere from a terminal anywhere outside
/// it, integrated in world coordinates with the Cartesian distance and
/// triangle-cosine forms. Invisible points contribute zero.
pub fn integrate_sphere_power_at(
    terminal: &TerminalPose,
    geom: &LisGeometry,
    quad: &QuadratureSpec,
) -> Result<Integral> {
    quad.validate()?;
    if !geom.is_sphere() {
        return Err(invalid("geometry", "sphere integration needs a spherical surface"));
    }
    let radius = geom.radius();
    visibility_angle(terminal.tau(geom))?;
    let t = terminal.position();
    let density =
        move |theta: f64, phi: f64| power_density_cartesian(&spherical_to_cartesian(radius, theta, phi), &t, radius);

    match quad.method {
        QuadratureMethod::MonteCarlo => monte_carlo(quad.max_evals, quad.seed, geom.area(), |rng| {
            let u = 2.0 * rng.random::<f64>() - 1.0;
            let phi = TAU * rng.random::<f64>();
            Ok(density(u.acos(), phi))
        }),
        _ => {
            let budget = Budget::new(quad.max_evals);
            integrate_rect(
                |theta, phi| Ok(radius * radius * theta.sin() * density(theta, phi)),
                (0.0, PI),
                (0.0, TAU),
                quad,
                &budget,
            )
        }
    }
}

/// Mean of the exact disk power over tilts `theta in [0, pi/2)`.
pub fn disk_power_tilt_mean(tau: f64, disk_radius: f64, quad: &QuadratureSpec) -> Result<Integral> {
    quad.validate()?;
    let scale = 2.0 / PI;
    let inner_quad = quad.inner(FRAC_PI_2);
    let total = match quad.method {
        QuadratureMethod::Adaptive => {
            let budget = Budget::new(quad.max_evals);
            let mut evals = 0;
            let tilt = |theta: f64| -> Result<f64> {
                let r = integrate_disk_power(tau, theta, disk_radius, &inner_quad)?;
                evals += r.evals;
                Ok(r.value)
            };
            let mut r = quadrature::adaptive(tilt, 0.0, FRAC_PI_2, quad.abs_tol, quad.rel_tol, &budget)?;
            r.evals += evals;
            r
        }
        QuadratureMethod::FixedTensor => {
            let panels = ((quad.max_evals as f64).cbrt() / PANEL_EVALS as f64).floor().max(1.0) as usize;
            let inner_quad = QuadratureSpec {
                max_evals: (panels * PANEL_EVALS).pow(2),
                ..*quad
            };
            let budget = Budget::new(quad.max_evals);
            let tilt =
                |theta: f64| -> Result<f64> { Ok(integrate_disk_power(tau, theta, disk_radius, &inner_quad)?.value) };
            quadrature::fixed(tilt, 0.0, FRAC_PI_2, panels, &budget)?
        }
        QuadratureMethod::MonteCarlo => {
            let a = disk_radius;
            if tau <= 0.0 || !tau.is_finite() || a.is_nan() || a <= 0.0 {
                return Err(invalid("tau", "disk tilt mean needs tau > 0 and a positive radius"));
            }
            let z = tau * a;
            let measure = FRAC_PI_2 * PI * a * a;
            monte_carlo(quad.max_evals, quad.seed, measure, |rng| {
                let theta = FRAC_PI_2 * rng.random::<f64>();
                let r = a * rng.random::<f64>().sqrt();
                let phi = TAU * rng.random::<f64>();
                let t = Vector3::new(0.0, z * theta.sin(), z * theta.cos());
                let (s, c) = phi.sin_cos();
                Ok(disk_power_density_cartesian(&Vector3::new(r * c, r * s, 0.0), &t))
            })?
        }
    };
    Ok(Integral {
        value: total.value * scale,
        error: total.error * scale,
        evals: total.evals,
    })
}

/// Tensor integration over a rectangle: outer variable `x`, inner `y`.
fn integrate_rect<F>(f: F, x: (f64, f64), y: (f64, f64), quad: &QuadratureSpec, budget: &Budget) -> Result<Integral>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    match quad.method {
        QuadratureMethod::Adaptive => {
            let inner = quad.inner(x.1 - x.0);
            let row = |xv: f64| -> Result<f64> {
                Ok(quadrature::adaptive(|yv| f(xv, yv), y.0, y.1, inner.abs_tol, inner.rel_tol, budget)?.value)
            };
            quadrature::adaptive(row, x.0, x.1, quad.abs_tol, quad.rel_tol, budget)
        }
        QuadratureMethod::FixedTensor => {
            let panels = (((quad.max_evals as f64).sqrt() / PANEL_EVALS as f64).floor() as usize).max(1);
            let row =
                |xv: f64| -> Result<f64> { Ok(quadrature::fixed(|yv| f(xv, yv), y.0, y.1, panels, budget)?.value) };
            quadrature::fixed(row, x.0, x.1, panels, budget)
        }
        QuadratureMethod::MonteCarlo => unreachable!("Monte Carlo handled by callers"),
    }
}

/// Mean-times-measure Monte Carlo estimate with one standard error.
///
/// Samples are drawn in fixed-size chunks; chunk `k` uses the ChaCha stream
/// `k` of `seed`, and chunk statistics are merged in chunk order, so the
/// result does not depend on how many threads ran the chunks.
fn monte_carlo<F>(samples: usize, seed: u64, measure: f64, sample: F) -> Result<Integral>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    let chunks = samples.div_ceil(MC_CHUNK);
    let stats: Vec<Result<(usize, f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let n = MC_CHUNK.min(samples - k * MC_CHUNK);
            let (mut mean, mut m2) = (0.0, 0.0);
            for i in 0..n {
                let x = sample(&mut rng)?;
                let delta = x - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (x - mean);
            }
            Ok((n, mean, m2))
        })
        .collect();

    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for s in stats {
        let (nb, mb, m2b) = s?;
        if nb == 0 {
            continue;
        }
        let total = n + nb;
        let delta = mb - mean;
        mean += delta * nb as f64 / total as f64;
        m2 += m2b + delta * delta * (n as f64) * (nb as f64) / total as f64;
        n = total;
    }
    let variance = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    Ok(Integral {
        value: measure * mean,
        error: measure * (variance / n as f64).sqrt(),
        evals: n,
    })
}
