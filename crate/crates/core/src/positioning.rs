//! Distance estimation for a terminal in front of a spherical surface.
//!
//! Two estimators are provided. The boundary of the illuminated cap gives
//! `z = R / cos(theta0)` directly. Alternatively a series of cap powers
//! measured on nested caps `theta_n = theta0 / n` is inverted for `tau` by
//! least squares. The Cramér-Rao factors `(dP/dtau)^-2` bound both.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_finite, invalid, LisError, Result};
use crate::geometry::sphere_power_density;
use crate::lattice::{fibonacci_point, spacing};
use crate::rss::{drss_sphere_visible_cap_dtau, rss_sphere_visible_cap};
use crate::solve::brent;

/// Measured boundary angle of the illuminated cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleMeasurement {
    pub theta0_hat: f64,
    pub sigma_theta: f64,
}

impl AngleMeasurement {
    pub fn new(theta0_hat: f64, sigma_theta: f64) -> Result<Self> {
        let theta0_hat = ensure_finite("theta0_hat", theta0_hat)?;
        let sigma_theta = ensure_finite("sigma_theta", sigma_theta)?;
        if !(0.0..=FRAC_PI_2).contains(&theta0_hat) {
            return Err(invalid(
                "theta0_hat",
                format!("must lie in [0, pi/2], got {theta0_hat}"),
            ));
        }
        if sigma_theta < 0.0 {
            return Err(invalid("sigma_theta", format!("must be >= 0, got {sigma_theta}")));
        }
        Ok(Self {
            theta0_hat,
            sigma_theta,
        })
    }
}

/// Cap powers measured on nested caps of decreasing half-angle.
#[derive(Debug, Clone, PartialEq)]
pub struct RssSeries {
    entries: Vec<(f64, f64)>,
    sigma_p: f64,
}

impl RssSeries {
    /// `entries` are `(theta_n, measured_power)` pairs with strictly
    /// decreasing angles.
    pub fn new(entries: Vec<(f64, f64)>, sigma_p: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("series", "needs at least one measurement"));
        }
        for &(theta, p) in &entries {
            ensure_finite("theta_n", theta)?;
            ensure_finite("measured power", p)?;
            if !(0.0..=FRAC_PI_2).contains(&theta) || theta == 0.0 {
                return Err(invalid("theta_n", format!("must lie in (0, pi/2], got {theta}")));
            }
        }
        if entries.windows(2).any(|w| w[1].0 >= w[0].0) {
            return Err(invalid("theta_n", "angles must be strictly decreasing"));
        }
        let sigma_p = ensure_finite("sigma_p", sigma_p)?;
        if sigma_p < 0.0 {
            return Err(invalid("sigma_p", format!("must be >= 0, got {sigma_p}")));
        }
        Ok(Self { entries, sigma_p })
    }

    /// Series on the caps `theta0_hat / n`, `n = 1..=powers.len()`.
    pub fn from_boundary(theta0_hat: f64, powers: &[f64], sigma_p: f64) -> Result<Self> {
        let entries = powers
            .iter()
            .enumerate()
            .map(|(i, &p)| (theta0_hat / (i + 1) as f64, p))
            .collect();
        Self::new(entries, sigma_p)
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn angles(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sigma_p(&self) -> f64 {
        self.sigma_p
    }
}

/// The Cramér-Rao proportionality factor `(dP/dtau)^-2`; multiply by the
/// noise variance for the bound itself.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CrlbFactor(f64);

impl CrlbFactor {
    pub fn factor(self) -> f64 {
        self.0
    }

    /// Variance bound `sigma^2 * factor` for AWGN of standard deviation `sigma`.
    pub fn bound(self, sigma: f64) -> f64 {
        sigma * sigma * self.0
    }
}

/// `z = R / cos(theta0_hat)`.
pub fn estimate_z_from_angle(m: &AngleMeasurement, radius: f64) -> Result<f64> {
    let radius = ensure_finite("radius", radius)?;
    if radius <= 0.0 {
        return Err(invalid("radius", format!("must be > 0, got {radius}")));
    }
    if m.theta0_hat >= FRAC_PI_2 {
        return Err(invalid(
            "theta0_hat",
            "a boundary at pi/2 puts the terminal at infinity",
        ));
    }
    Ok(radius / m.theta0_hat.cos())
}

/// Search interval and scan density for [`estimate_tau_from_rss_series_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub tau_min: f64,
    pub tau_max: f64,
    /// Gradient samples (log-spaced in `tau - 1`) used to bracket minima.
    pub scan_points: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            tau_min: 1.0 + 1e-9,
            tau_max: 1e6,
            scan_points: 400,
        }
    }
}

/// Least-squares `tau` for an RSS series with the default search interval.
pub fn estimate_tau_from_rss_series(series: &RssSeries) -> Result<f64> {
    estimate_tau_from_rss_series_with(series, &EstimatorConfig::default())
}

/// Minimizes `sum_n (m_n - P(tau, theta_n))^2` over `[tau_min, tau_max]`.
///
/// Measured powers are first clamped into `(0, 1/2)`. Stationary points are
/// bracketed by scanning the gradient and polished with Brent's method; the
/// best stationary point or interval end wins.
pub fn estimate_tau_from_rss_series_with(series: &RssSeries, cfg: &EstimatorConfig) -> Result<f64> {
    if !(cfg.tau_min >= 1.0 && cfg.tau_max > cfg.tau_min && cfg.tau_max.is_finite()) {
        return Err(invalid(
            "tau bracket",
            format!("[{}, {}] is not a valid range", cfg.tau_min, cfg.tau_max),
        ));
    }
    let (lo, hi) = (cfg.tau_min, cfg.tau_max);
    let data: Vec<(f64, f64)> = series
        .entries()
        .iter()
        .map(|&(theta, p)| (theta, p.clamp(f64::MIN_POSITIVE, 0.5 - f64::EPSILON)))
        .collect();

    let model = |tau: f64, theta: f64| {
        rss_sphere_visible_cap(tau, theta)
            .map(|v| v.power())
            .unwrap_or(f64::NAN)
    };

    let attainable = data
        .iter()
        .any(|&(theta, p)| p >= model(hi, theta) && p <= model(lo, theta));
    if !attainable {
        return Err(LisError::NoRoot { lo, hi });
    }

    let cost = |tau: f64| -> f64 { data.iter().map(|&(theta, p)| (model(tau, theta) - p).powi(2)).sum() };
    let gradient = |tau: f64| -> f64 {
        data.iter()
            .map(|&(theta, p)| (model(tau, theta) - p) * drss_sphere_visible_cap_dtau(tau, theta))
            .sum()
    };

    let n = cfg.scan_points.max(2);
    let (u_lo, u_hi) = ((lo - 1.0).max(f64::MIN_POSITIVE).ln(), (hi - 1.0).ln());
    let grid: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                1.0 + (u_lo + (u_hi - u_lo) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect();
    let grads: Vec<f64> = grid.iter().map(|&t| gradient(t)).collect();

    let mut candidates = vec![lo, hi];
    for i in 0..n - 1 {
        let (g0, g1) = (grads[i], grads[i + 1]);
        if g0 == 0.0 {
            candidates.push(grid[i]);
        } else if g0 < 0.0 && g1 > 0.0 {
            let root = brent(gradient, grid[i], grid[i + 1], 1e-15 * grid[i + 1], 200)?;
            candidates.push(root);
        }
    }

    candidates
        .into_iter()
        .map(|t| (cost(t), t))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .map(|(_, t)| t)
        .ok_or(LisError::NoRoot { lo, hi })
}

/// `4 tau^4 (tau^2 - 1)`: CRLB factor for `tau` from the full-cap power.
pub fn crlb_sphere(tau: f64) -> Result<CrlbFactor> {
    let tau = ensure_finite("tau", tau)?;
    if tau < 1.0 {
        return Err(LisError::InsideSphere { tau });
    }
    Ok(CrlbFactor(4.0 * tau.powi(4) * (tau - 1.0) * (tau + 1.0)))
}

/// `4 (tau^2 + 1)^3`: CRLB factor for `tau` from the on-axis disk power.
pub fn crlb_plane(tau: f64) -> Result<CrlbFactor> {
    let tau = ensure_finite("tau", tau)?;
    if tau < 0.0 {
        return Err(invalid("tau", format!("must be >= 0, got {tau}")));
    }
    Ok(CrlbFactor(4.0 * (tau * tau + 1.0).powi(3)))
}

/// CRLB factor for `tau` from independent equal-variance measurements on
/// the caps `angles`: `1 / sum_n (dP_n/dtau)^2`.
pub fn crlb_series(tau: f64, angles: &[f64]) -> Result<CrlbFactor> {
    let tau = ensure_finite("tau", tau)?;
    if tau <= 1.0 {
        return Err(LisError::InsideSphere { tau });
    }
    if angles.is_empty() {
        return Err(invalid("angles", "needs at least one cap"));
    }
    let info: f64 = angles
        .iter()
        .map(|&t| drss_sphere_visible_cap_dtau(tau, t).powi(2))
        .sum();
    Ok(CrlbFactor(1.0 / info))
}

/// Per-cell noise and detection settings for the simulated boundary search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleNoise {
    /// AWGN standard deviation on each cell's received power.
    pub sigma_p: f64,
    pub element_count: usize,
    /// A ring counts as illuminated when its mean power exceeds
    /// `threshold_mult * sigma_p`.
    pub threshold_mult: f64,
}

impl Default for AngleNoise {
    fn default() -> Self {
        Self {
            sigma_p: 0.0,
            element_count: 10_000,
            threshold_mult: 3.0,
        }
    }
}

/// Width of the polar-angle rings used for boundary detection.
pub fn ring_width(element_count: usize) -> f64 {
    spacing(element_count)
}

/// Simulates the boundary-angle measurement on a discretized sphere.
///
/// The sphere is split into `element_count` equal-area cells on a spiral
/// lattice; each cell reports its received power plus Gaussian noise. Cells
/// are grouped into polar rings of width [`ring_width`], and the estimate is
/// the outer edge of the outermost ring whose mean power clears the
/// threshold.
pub fn simulate_angle_measurement(
    true_tau: f64,
    radius: f64,
    noise: &AngleNoise,
    seed: u64,
) -> Result<AngleMeasurement> {
    let true_tau = ensure_finite("tau", true_tau)?;
    if true_tau <= 1.0 {
        return Err(LisError::InsideSphere { tau: true_tau });
    }
    if noise.element_count < 100 {
        return Err(invalid(
            "element_count",
            format!("must be >= 100, got {}", noise.element_count),
        ));
    }
    if !(noise.sigma_p >= 0.0 && noise.sigma_p.is_finite()) {
        return Err(invalid("sigma_p", format!("must be >= 0, got {}", noise.sigma_p)));
    }
    if !(noise.threshold_mult >= 0.0 && noise.threshold_mult.is_finite()) {
        return Err(invalid("threshold_mult", "must be >= 0"));
    }
    let n = noise.element_count;
    let cell_area = 4.0 * std::f64::consts::PI * radius * radius / n as f64;
    let width = ring_width(n);
    let rings = (std::f64::consts::PI / width).ceil() as usize;
    let mut sums = vec![0.0; rings];
    let mut counts = vec![0usize; rings];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for i in 0..n {
        let p = fibonacci_point(i, n);
        let theta = p.x.hypot(p.y).atan2(p.z);
        let clean = sphere_power_density(true_tau, theta, radius) * cell_area;
        let eps: f64 = StandardNormal.sample(&mut rng);
        let k = ((theta / width) as usize).min(rings - 1);
        sums[k] += clean + noise.sigma_p * eps;
        counts[k] += 1;
    }

    let threshold = noise.threshold_mult * noise.sigma_p;
    let detected = (0..rings)
        .rev()
        .find(|&k| counts[k] > 0 && sums[k] / counts[k] as f64 > threshold)
        .ok_or(LisError::DetectionFailure { threshold })?;
    let theta0_hat = ((detected + 1) as f64 * width).min(FRAC_PI_2);
    AngleMeasurement::new(theta0_hat, width)
}

/// Simulates the nested-cap power series `P(tau, theta0_hat / n) + noise`.
pub fn simulate_rss_series(true_tau: f64, theta0_hat: f64, len: usize, sigma_p: f64, seed: u64) -> Result<RssSeries> {
    if len == 0 {
        return Err(invalid("series length", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut powers = Vec::with_capacity(len);
    for k in 1..=len {
        let clean = rss_sphere_visible_cap(true_tau, theta0_hat / k as f64)?.power();
        let eps: f64 = StandardNormal.sample(&mut rng);
        powers.push(clean + sigma_p * eps);
    }
    RssSeries::from_boundary(theta0_hat, &powers, sigma_p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::visibility_angle;
    use crate::rss::{rss_sphere_cap, rss_sphere_full};
    use std::f64::consts::{PI, SQRT_2};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn angle_estimator_examples() {
        let m = |t| AngleMeasurement::new(t, 0.0).unwrap();
        assert_eq!(estimate_z_from_angle(&m(0.0), 1.0).unwrap(), 1.0);
        assert!((estimate_z_from_angle(&m(PI / 3.0), 1.0).unwrap() - 2.0).abs() < 1e-14);
        let z = estimate_z_from_angle(&m(1.2), 2.0).unwrap();
        assert!(rel(z, 2.0 / 1.2f64.cos()) < 1e-15);
        // round trip through the visibility angle
        let theta0 = visibility_angle(z / 2.0).unwrap();
        assert!(rel(theta0, 1.2) < 1e-12);
        assert!(estimate_z_from_angle(&m(FRAC_PI_2), 1.0).is_err());
        assert!(AngleMeasurement::new(1.7, 0.0).is_err());
    }

    #[test]
    fn series_validation() {
        assert!(RssSeries::new(vec![], 0.0).is_err());
        assert!(RssSeries::new(vec![(0.5, 0.1), (0.6, 0.1)], 0.0).is_err());
        assert!(RssSeries::new(vec![(0.5, 0.1)], -1.0).is_err());
        let s = RssSeries::from_boundary(0.9, &[0.1, 0.05, 0.02], 0.0).unwrap();
        assert_eq!(s.angles(), vec![0.9, 0.45, 0.3]);
    }

    #[test]
    fn series_noiseless_recovery() {
        let theta0 = PI / 3.0;
        let powers: Vec<f64> = (1..=3)
            .map(|n| rss_sphere_cap(2.0, theta0 / n as f64).unwrap().power())
            .collect();
        let s = RssSeries::from_boundary(theta0, &powers, 0.0).unwrap();
        assert!((estimate_tau_from_rss_series(&s).unwrap() - 2.0).abs() < 1e-9);

        let p = rss_sphere_full(4.0).unwrap().power();
        let s = RssSeries::from_boundary(visibility_angle(4.0).unwrap(), &[p], 0.0).unwrap();
        assert!((estimate_tau_from_rss_series(&s).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn series_unattainable_is_no_root() {
        let cfg = EstimatorConfig {
            tau_max: 10.0,
            ..Default::default()
        };
        // far below anything a terminal within tau <= 10 produces
        let s = RssSeries::from_boundary(0.3, &[1e-12, 1e-13], 0.0).unwrap();
        assert!(matches!(
            estimate_tau_from_rss_series_with(&s, &cfg),
            Err(LisError::NoRoot { .. })
        ));
    }

    #[test]
    fn crlb_examples() {
        assert_eq!(crlb_sphere(1.0).unwrap().factor(), 0.0);
        assert!(rel(crlb_sphere(SQRT_2).unwrap().factor(), 16.0) < 1e-14);
        assert_eq!(crlb_sphere(2.0).unwrap().factor(), 192.0);
        assert!(crlb_sphere(0.99).is_err());
        assert_eq!(crlb_plane(0.0).unwrap().factor(), 4.0);
        assert_eq!(crlb_plane(1.0).unwrap().factor(), 32.0);
        assert!(rel(crlb_plane(SQRT_2).unwrap().factor(), 108.0) < 1e-14);
        assert!(crlb_plane(-0.1).is_err());
        assert_eq!(crlb_plane(1.0).unwrap().bound(0.5), 8.0);
    }

    #[test]
    fn crlb_series_single_full_cap_matches_crlb_sphere() {
        let tau = 3.0;
        let f = crlb_series(tau, &[visibility_angle(tau).unwrap()]).unwrap().factor();
        assert!(rel(f, crlb_sphere(tau).unwrap().factor()) < 1e-12);
    }

    #[test]
    fn noiseless_boundary_within_one_ring() {
        for &(tau, n) in &[(2.0, 10_000usize), (1.3, 5_000), (6.0, 20_000)] {
            let noise = AngleNoise {
                sigma_p: 0.0,
                element_count: n,
                threshold_mult: 3.0,
            };
            let m = simulate_angle_measurement(tau, 1.0, &noise, 7).unwrap();
            let theta0 = visibility_angle(tau).unwrap();
            assert!((m.theta0_hat - theta0).abs() <= ring_width(n), "tau={tau}");
        }
    }

    #[test]
    fn boundary_converges_with_element_count() {
        let theta0 = PI / 3.0;
        let mut last = f64::INFINITY;
        for &n in &[1_000usize, 10_000, 100_000] {
            let noise = AngleNoise {
                sigma_p: 1e-12,
                element_count: n,
                threshold_mult: 3.0,
            };
            let m = simulate_angle_measurement(2.0, 1.0, &noise, 1).unwrap();
            let err = (m.theta0_hat - theta0).abs();
            assert!(err <= ring_width(n) + 1e-12);
            assert!(err <= last + 1e-12 || err <= ring_width(n));
            last = err;
        }
        assert!(last < 0.02);
    }

    #[test]
    fn buried_signal_fails_detection() {
        let noise = AngleNoise {
            sigma_p: 1.0,
            element_count: 2_000,
            threshold_mult: 3.0,
        };
        assert!(matches!(
            simulate_angle_measurement(2.0, 1.0, &noise, 3),
            Err(LisError::DetectionFailure { .. })
        ));
    }

    #[test]
    fn simulation_is_seed_deterministic() {
        let noise = AngleNoise {
            sigma_p: 1e-6,
            element_count: 4_000,
            threshold_mult: 3.0,
        };
        let a = simulate_angle_measurement(2.5, 1.0, &noise, 11).unwrap();
        let b = simulate_angle_measurement(2.5, 1.0, &noise, 11).unwrap();
        assert_eq!(a, b);
        let s1 = simulate_rss_series(2.0, 1.0, 4, 1e-3, 5).unwrap();
        let s2 = simulate_rss_series(2.0, 1.0, 4, 1e-3, 5).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn element_count_floor() {
        let noise = AngleNoise {
            element_count: 99,
            ..Default::default()
        };
        assert!(simulate_angle_measurement(2.0, 1.0, &noise, 0).is_err());
    }
}
