//! Closed-form received signal strength for spherical caps and disks, and
//! the spherical-versus-planar gain ratio.
//!
//! All powers are fractions of the unit transmit power. The textbook forms
//! such as `1/2 (1 - (tau - cos t) / sqrt(tau^2 - 2 tau cos t + 1))` lose
//! every significant digit once `tau` is large, so each is evaluated through
//! an equivalent rationalized expression.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::error::{ensure_finite, invalid, LisError, Result};
use crate::geometry::{normalized_distance_sq, visibility_angle, VISIBILITY_SLACK};

/// Received power as a fraction of the unit transmit power, in `[0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RssValue(f64);

impl RssValue {
    /// Wraps a power, rejecting values outside `[0, 1/2]` beyond rounding.
    pub fn new(power: f64) -> Result<Self> {
        let power = ensure_finite("power", power)?;
        if !(-1e-15..=0.5 + 1e-15).contains(&power) {
            return Err(invalid("power", format!("{power} outside [0, 1/2]")));
        }
        Ok(Self(power.clamp(0.0, 0.5)))
    }

    pub fn power(self) -> f64 {
        self.0
    }
}

impl From<RssValue> for f64 {
    fn from(v: RssValue) -> f64 {
        v.0
    }
}

/// Disk radius relative to the sphere radius in the gain comparison. The
/// default `sqrt(2)` gives the disk the area of the receiving hemisphere.
pub const DEFAULT_PLANAR_RADIUS_SCALE: f64 = SQRT_2;

/// Limit of [`gamma_ratio`] as the terminal approaches the sphere, for the
/// equal-area disk: `sqrt(3) pi / (2 (sqrt(3) - 1))`.
pub const GAMMA_NEAR_SURFACE: f64 = 3.716_544_013_368_008_3;

fn check_tau_sphere(tau: f64) -> Result<f64> {
    let tau = ensure_finite("tau", tau)?;
    if tau < 1.0 {
        return Err(LisError::InsideSphere { tau });
    }
    Ok(tau)
}

fn check_tau_plane(tau: f64) -> Result<f64> {
    let tau = ensure_finite("tau", tau)?;
    if tau < 0.0 {
        return Err(invalid("tau", format!("must be >= 0, got {tau}")));
    }
    Ok(tau)
}

/// Integrand of the cap power in `theta`, after the azimuth has been
/// integrated out: `1/2 (tau cos t - 1) sin t / (1 - 2 tau cos t + tau^2)^(3/2)`.
/// Zero outside the visible cap.
pub fn sphere_cap_integrand(tau: f64, theta: f64) -> f64 {
    let numerator = tau * theta.cos() - 1.0;
    if numerator <= 0.0 {
        return 0.0;
    }
    let d2 = normalized_distance_sq(tau, theta);
    0.5 * numerator * theta.sin() / (d2 * d2.sqrt())
}

/// Power collected by the spherical cap `theta in [0, theta_hat]` from a
/// terminal at normalized distance `tau`.
pub fn rss_sphere_cap(tau: f64, theta_hat: f64) -> Result<RssValue> {
    let tau = check_tau_sphere(tau)?;
    let theta_hat = ensure_finite("theta_hat", theta_hat)?;
    if theta_hat < 0.0 {
        return Err(invalid("theta_hat", format!("must be >= 0, got {theta_hat}")));
    }
    let theta0 = visibility_angle(tau)?;
    if theta_hat > theta0 + VISIBILITY_SLACK {
        return Err(LisError::NotVisible {
            theta: theta_hat,
            theta0,
        });
    }
    RssValue::new(cap_power(tau, theta_hat.min(theta0)))
}

/// Cap power with the cap clipped to the visible region; total in `tau`
/// for any `theta_hat >= 0`.
pub fn rss_sphere_visible_cap(tau: f64, theta_hat: f64) -> Result<RssValue> {
    let tau = check_tau_sphere(tau)?;
    let theta_hat = ensure_finite("theta_hat", theta_hat)?;
    if theta_hat < 0.0 {
        return Err(invalid("theta_hat", format!("must be >= 0, got {theta_hat}")));
    }
    let theta0 = visibility_angle(tau)?;
    if theta_hat >= theta0 {
        rss_sphere_full(tau)
    } else {
        RssValue::new(cap_power(tau, theta_hat))
    }
}

// 1/2 (1 - (tau - c)/D) = 1/2 sin^2(t) / (D (D + tau - c))
fn cap_power(tau: f64, theta_hat: f64) -> f64 {
    if theta_hat == 0.0 {
        return 0.0;
    }
    let s = (0.5 * theta_hat).sin();
    let d = normalized_distance_sq(tau, theta_hat).sqrt();
    let tau_minus_cos = (tau - 1.0) + 2.0 * s * s;
    let sin_t = theta_hat.sin();
    0.5 * sin_t * sin_t / (d * (d + tau_minus_cos))
}

/// Power collected by the whole visible cap, `1/2 (1 - sqrt(tau^2 - 1)/tau)`.
pub fn rss_sphere_full(tau: f64) -> Result<RssValue> {
    let tau = check_tau_sphere(tau)?;
    let root = ((tau - 1.0) * (tau + 1.0)).sqrt();
    RssValue::new(0.5 / (tau * (tau + root)))
}

/// `d/dtau` of the cap power at fixed `theta_hat`: `-sin^2(t) / (2 D^3)`.
pub fn drss_sphere_cap_dtau(tau: f64, theta_hat: f64) -> f64 {
    let d2 = normalized_distance_sq(tau, theta_hat);
    let s = theta_hat.sin();
    -0.5 * s * s / (d2 * d2.sqrt())
}

/// `d/dtau` of the full-cap power: `-1 / (2 tau^2 sqrt(tau^2 - 1))`.
pub fn drss_sphere_full_dtau(tau: f64) -> f64 {
    -0.5 / (tau * tau * ((tau - 1.0) * (tau + 1.0)).sqrt())
}

/// `d/dtau` of the visible-cap power, matching [`rss_sphere_visible_cap`].
pub fn drss_sphere_visible_cap_dtau(tau: f64, theta_hat: f64) -> f64 {
    match visibility_angle(tau) {
        Ok(theta0) if theta_hat < theta0 => drss_sphere_cap_dtau(tau, theta_hat),
        _ => drss_sphere_full_dtau(tau),
    }
}

/// Approximate disk power for a terminal at normalized distance `tau`
/// (relative to the disk radius) and tilt `theta` off the disk axis:
/// `cos(theta)/2 (1 - tau / sqrt(tau^2 + 1))`. Exact for `theta = 0`.
pub fn rss_disk_approx(tau: f64, theta: f64) -> Result<RssValue> {
    let tau = check_tau_plane(tau)?;
    let theta = ensure_finite("theta", theta)?;
    if !(0.0..FRAC_PI_2).contains(&theta) {
        return Err(invalid("theta", format!("must lie in [0, pi/2), got {theta}")));
    }
    RssValue::new(theta.cos() * disk_axis_power(tau))
}

// 1/2 (1 - tau/sqrt(tau^2+1)) = 1/2 / (sqrt(tau^2+1) (sqrt(tau^2+1) + tau))
pub(crate) fn disk_axis_power(tau: f64) -> f64 {
    let h = tau.hypot(1.0);
    0.5 / (h * (h + tau))
}

/// `d/dtau` of the on-axis disk power: `-1/2 (tau^2 + 1)^(-3/2)`.
pub fn drss_disk_axis_dtau(tau: f64) -> f64 {
    let h2 = tau * tau + 1.0;
    -0.5 / (h2 * h2.sqrt())
}

/// Average of [`rss_disk_approx`] over `theta in [0, pi/2)`; the cosine
/// averages to `2/pi`.
pub fn rss_disk_approx_mean(tau: f64) -> Result<RssValue> {
    let tau = check_tau_plane(tau)?;
    RssValue::new(disk_axis_power(tau) * 2.0 / PI)
}

/// Options for the gain ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaConfig {
    /// Disk radius in units of the sphere radius.
    pub planar_radius_scale: f64,
}

impl Default for GammaConfig {
    fn default() -> Self {
        Self {
            planar_radius_scale: DEFAULT_PLANAR_RADIUS_SCALE,
        }
    }
}

impl GammaConfig {
    pub fn validate(&self) -> Result<()> {
        let s = ensure_finite("planar_radius_scale", self.planar_radius_scale)?;
        if s <= 0.0 {
            return Err(invalid("planar_radius_scale", format!("must be > 0, got {s}")));
        }
        Ok(())
    }

    /// Large-`tau` limit of the ratio, `pi / (2 s^2)`.
    pub fn far_limit(&self) -> f64 {
        PI / (2.0 * self.planar_radius_scale * self.planar_radius_scale)
    }

    /// Ratio at `tau = 1`.
    pub fn near_limit(&self) -> f64 {
        FRAC_PI_2 * 0.5 / disk_axis_power(1.0 / self.planar_radius_scale)
    }
}

/// Ratio of the sphere's full-cap power to the disk's tilt-averaged
/// approximate power, with the default equal-area disk.
pub fn gamma_ratio(tau: f64) -> Result<f64> {
    gamma_ratio_with(tau, &GammaConfig::default())
}

/// Ratio `(pi/2) P_sp(tau) / int_0^{pi/2} P_pl(tau / s, theta) dtheta` for a
/// disk of radius `s R`.
pub fn gamma_ratio_with(tau: f64, config: &GammaConfig) -> Result<f64> {
    config.validate()?;
    let tau = check_tau_sphere(tau)?;
    if tau == 1.0 {
        if config.planar_radius_scale == DEFAULT_PLANAR_RADIUS_SCALE {
            return Ok(GAMMA_NEAR_SURFACE);
        }
        return Ok(config.near_limit());
    }
    let sphere = rss_sphere_full(tau)?.power();
    let disk = disk_axis_power(tau / config.planar_radius_scale);
    Ok(FRAC_PI_2 * sphere / disk)
}
