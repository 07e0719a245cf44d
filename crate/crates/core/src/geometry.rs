//! Surface geometry and the pointwise line-of-sight field model.
//!
//! A spherical surface of radius `R` sits at the origin. Because the sphere
//! is isotropic, every terminal is rotated onto the positive z axis at
//! `(0, 0, z_k)` and surface points are addressed by polar angle `theta`
//! measured from that axis. The normalized distance is `tau = z_k / R`.
//!
//! A disk surface lies in the xy-plane with its normal along +z; it is not
//! isotropic, so terminals keep their Cartesian position.
//!
//! The received field at a surface point, for unit transmit power, is
//!
//! ```text
//! s = sqrt(cos(psi) / (4 pi eta^2)) * exp(-2 pi j eta / lambda)
//! ```
//!
//! with `eta` the terminal-to-point distance and `psi` the angle of arrival
//! against the local surface normal.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Rotation3, Unit, Vector3};
use num_complex::Complex64;

use crate::error::{ensure_finite, invalid, LisError, Result};

/// Tolerance on `theta <= theta0` before a point is declared invisible.
pub const VISIBILITY_SLACK: f64 = 1e-12;

/// Propagation speed used to relate carrier frequency and wavelength.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Sphere,
    Disk,
}

/// A spherical or disk-shaped surface centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LisGeometry {
    kind: SurfaceKind,
    radius: f64,
}

impl LisGeometry {
    pub fn sphere(radius: f64) -> Result<Self> {
        Self::new(SurfaceKind::Sphere, radius)
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Self::new(SurfaceKind::Disk, radius)
    }

    fn new(kind: SurfaceKind, radius: f64) -> Result<Self> {
        let radius = ensure_finite("radius", radius)?;
        if radius <= 0.0 {
            return Err(invalid("radius", format!("must be > 0, got {radius}")));
        }
        Ok(Self { kind, radius })
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn is_sphere(&self) -> bool {
        self.kind == SurfaceKind::Sphere
    }

    /// Total surface area.
    pub fn area(&self) -> f64 {
        match self.kind {
            SurfaceKind::Sphere => 4.0 * PI * self.radius * self.radius,
            SurfaceKind::Disk => PI * self.radius * self.radius,
        }
    }

    /// Largest area that can see a single terminal: a hemisphere for the
    /// sphere (reached as the terminal recedes), the whole face for a disk.
    pub fn max_receiving_area(&self) -> f64 {
        match self.kind {
            SurfaceKind::Sphere => 2.0 * PI * self.radius * self.radius,
            SurfaceKind::Disk => self.area(),
        }
    }

    pub(crate) fn require_sphere(&self) -> Result<()> {
        if self.is_sphere() {
            Ok(())
        } else {
            Err(invalid("geometry", "operation requires a spherical surface"))
        }
    }
}

/// Terminal position together with the rotation that maps it onto +z.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalPose {
    position: Vector3<f64>,
    distance: f64,
    to_canonical: Rotation3<f64>,
}

impl TerminalPose {
    pub fn new(position: Vector3<f64>) -> Result<Self> {
        for c in position.iter() {
            ensure_finite("terminal position", *c)?;
        }
        let distance = position.norm();
        if distance == 0.0 {
            return Err(invalid("terminal position", "must not coincide with the origin"));
        }
        let direction = position / distance;
        let to_canonical = Rotation3::rotation_between(&direction, &Vector3::z())
            // Antiparallel to +z: any half turn about a horizontal axis works.
            .unwrap_or_else(|| Rotation3::from_axis_angle(&Vector3::x_axis(), PI));
        Ok(Self {
            position,
            distance,
            to_canonical,
        })
    }

    pub fn from_xyz(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(Vector3::new(x, y, z))
    }

    /// Terminal already on the +z axis at height `z_k`.
    pub fn on_axis(z_k: f64) -> Result<Self> {
        Self::new(Vector3::new(0.0, 0.0, z_k))
    }

    /// Terminal at normalized distance `tau` from a sphere of radius `radius`.
    pub fn at_tau(tau: f64, radius: f64) -> Result<Self> {
        Self::on_axis(tau * radius)
    }

    pub fn position(&self) -> Vector3<f64> {
        self.position
    }

    /// Distance to the origin, `z_k` after canonical rotation.
    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn direction(&self) -> Unit<Vector3<f64>> {
        Unit::new_unchecked(self.position / self.distance)
    }

    /// Canonical position `(0, 0, z_k)`.
    pub fn canonical_position(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.distance)
    }

    /// Rotation taking world coordinates into the frame where the terminal
    /// sits on +z.
    pub fn to_canonical(&self) -> Rotation3<f64> {
        self.to_canonical
    }

    /// Maps a point given in the canonical frame back to world coordinates.
    pub fn from_canonical(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.to_canonical.inverse_transform_vector(v)
    }

    pub fn tau(&self, geom: &LisGeometry) -> f64 {
        self.distance / geom.radius()
    }

    /// Visibility angle of this terminal on a spherical surface.
    pub fn theta0(&self, geom: &LisGeometry) -> Result<f64> {
        geom.require_sphere()?;
        visibility_angle(self.tau(geom))
    }
}

/// Carrier description. The wavelength is primary; the frequency is kept
/// for reporting only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    wavelength: f64,
    carrier_frequency: f64,
}

impl RadioConfig {
    pub fn from_wavelength(wavelength: f64) -> Result<Self> {
        let wavelength = ensure_finite("wavelength", wavelength)?;
        if wavelength <= 0.0 {
            return Err(invalid("wavelength", format!("must be > 0, got {wavelength}")));
        }
        Ok(Self {
            wavelength,
            carrier_frequency: SPEED_OF_LIGHT / wavelength,
        })
    }

    pub fn from_frequency(carrier_frequency: f64) -> Result<Self> {
        let f = ensure_finite("carrier frequency", carrier_frequency)?;
        if f <= 0.0 {
            return Err(invalid("carrier frequency", format!("must be > 0, got {f}")));
        }
        Ok(Self {
            wavelength: SPEED_OF_LIGHT / f,
            carrier_frequency: f,
        })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn carrier_frequency(&self) -> f64 {
        self.carrier_frequency
    }

    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength
    }

    /// Propagation phase `-2 pi eta / lambda` wrapped into `[0, 2pi)`.
    pub fn propagation_phase(&self, eta: f64) -> f64 {
        wrap_phase(-TAU * eta / self.wavelength)
    }
}

/// Complex field amplitude at one surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    /// Field magnitude per unit area, in 1/m.
    pub amplitude: f64,
    /// Phase in `[0, 2pi)`.
    pub phase: f64,
}

impl FieldSample {
    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }

    /// Power density `|s|^2`.
    pub fn power_density(&self) -> f64 {
        self.amplitude * self.amplitude
    }
}

/// A point on the surface. Spherical points are expressed in the canonical
/// frame of the terminal they are paired with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfacePoint {
    Spherical { theta: f64, phi: f64 },
    Polar { r: f64, phi: f64 },
}

impl SurfacePoint {
    pub fn spherical(theta: f64, phi: f64) -> Result<Self> {
        let theta = ensure_finite("theta", theta)?;
        let phi = ensure_finite("phi", phi)?;
        if !(0.0..=PI).contains(&theta) {
            return Err(invalid("theta", format!("must lie in [0, pi], got {theta}")));
        }
        Ok(Self::Spherical {
            theta,
            phi: phi.rem_euclid(TAU),
        })
    }

    pub fn polar(r: f64, phi: f64) -> Result<Self> {
        let r = ensure_finite("r", r)?;
        let phi = ensure_finite("phi", phi)?;
        if r < 0.0 {
            return Err(invalid("r", format!("must be >= 0, got {r}")));
        }
        Ok(Self::Polar {
            r,
            phi: phi.rem_euclid(TAU),
        })
    }

    /// Cartesian position on the given surface.
    pub fn to_cartesian(&self, geom: &LisGeometry) -> Result<Vector3<f64>> {
        match (*self, geom.kind()) {
            (Self::Spherical { theta, phi }, SurfaceKind::Sphere) => {
                Ok(spherical_to_cartesian(geom.radius(), theta, phi))
            }
            (Self::Polar { r, phi }, SurfaceKind::Disk) => {
                if r > geom.radius() {
                    return Err(invalid("r", format!("{r} lies outside the disk")));
                }
                Ok(Vector3::new(r * phi.cos(), r * phi.sin(), 0.0))
            }
            _ => Err(invalid("point", "coordinate system does not match the surface kind")),
        }
    }

    /// Spherical coordinates of a point on (or near) a sphere centered at
    /// the origin. The radius is dropped.
    pub fn from_cartesian_sphere(v: &Vector3<f64>) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 {
            return Err(invalid("point", "origin has no spherical angles"));
        }
        // atan2 keeps full precision near both poles
        let rho = v.x.hypot(v.y);
        let theta = rho.atan2(v.z);
        let phi = v.y.atan2(v.x).rem_euclid(TAU);
        Ok(Self::Spherical { theta, phi })
    }
}

pub fn spherical_to_cartesian(radius: f64, theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(radius * st * cp, radius * st * sp, radius * ct)
}

/// Visibility angle `theta0 = arccos(1/tau)` of a terminal at normalized
/// distance `tau >= 1`.
pub fn visibility_angle(tau: f64) -> Result<f64> {
    let tau = ensure_finite("tau", tau)?;
    if tau < 1.0 {
        return Err(LisError::InsideSphere { tau });
    }
    // arccos(1/tau) written as atan(sqrt(tau^2 - 1)) to stay accurate near tau = 1
    let theta0 = ((tau - 1.0) * (tau + 1.0)).sqrt().atan();
    Ok(theta0.clamp(0.0, FRAC_PI_2))
}

/// Normalized squared distance `1 - 2 tau cos(theta) + tau^2`, arranged to
/// avoid cancellation when the terminal is close to the surface.
pub(crate) fn normalized_distance_sq(tau: f64, theta: f64) -> f64 {
    let s = (0.5 * theta).sin();
    (tau - 1.0) * (tau - 1.0) + 4.0 * tau * s * s
}

fn check_visible(tau: f64, theta: f64) -> Result<f64> {
    let theta0 = visibility_angle(tau)?;
    if theta > theta0 + VISIBILITY_SLACK {
        return Err(LisError::NotVisible { theta, theta0 });
    }
    Ok(theta0)
}

/// Terminal-to-point distance `eta`.
///
/// On a sphere the point is read in the terminal's canonical frame and the
/// closed form `R sqrt(1 - 2 tau cos(theta) + tau^2)` is used. On a disk the
/// Cartesian distance to the terminal position is returned.
pub fn distance_eta(point: &SurfacePoint, terminal: &TerminalPose, geom: &LisGeometry) -> Result<f64> {
    match (*point, geom.kind()) {
        (SurfacePoint::Spherical { theta, .. }, SurfaceKind::Sphere) => {
            let tau = terminal.tau(geom);
            Ok(geom.radius() * normalized_distance_sq(tau, theta).sqrt())
        }
        (SurfacePoint::Polar { .. }, SurfaceKind::Disk) => {
            let p = point.to_cartesian(geom)?;
            Ok(eta_cartesian(&p, &terminal.position()))
        }
        _ => Err(invalid("point", "coordinate system does not match the surface kind")),
    }
}

/// Euclidean distance between a surface point and a terminal.
pub fn eta_cartesian(point: &Vector3<f64>, terminal: &Vector3<f64>) -> f64 {
    (terminal - point).norm()
}

/// Cosine of the angle of arrival from the triangle (origin, point,
/// terminal): `(|t|^2 - eta^2 - R^2) / (2 R eta)`. Negative values mean the
/// point faces away from the terminal.
pub fn cos_aoa_sphere_cartesian(point: &Vector3<f64>, terminal: &Vector3<f64>, radius: f64) -> f64 {
    let eta = eta_cartesian(point, terminal);
    if eta == 0.0 {
        return 1.0;
    }
    let zk2 = terminal.norm_squared();
    (zk2 - eta * eta - radius * radius) / (2.0 * radius * eta)
}

/// Received power density `max(cos psi, 0) / (4 pi eta^2)` at a point on a
/// sphere of the given radius, for an arbitrarily placed terminal.
pub fn power_density_cartesian(point: &Vector3<f64>, terminal: &Vector3<f64>, radius: f64) -> f64 {
    let eta = eta_cartesian(point, terminal);
    let cos_psi = cos_aoa_sphere_cartesian(point, terminal, radius);
    if cos_psi <= 0.0 {
        return 0.0;
    }
    cos_psi / (4.0 * PI * eta * eta)
}

/// Received power density at a point of a disk lying in the xy-plane
/// (normal +z): `(t_z / eta) / (4 pi eta^2)`, zero for terminals below the
/// plane.
pub fn disk_power_density_cartesian(point: &Vector3<f64>, terminal: &Vector3<f64>) -> f64 {
    let height = terminal.z - point.z;
    if height <= 0.0 {
        return 0.0;
    }
    let eta2 = (terminal - point).norm_squared();
    height / (4.0 * PI * eta2 * eta2.sqrt())
}

/// Cosine of the angle of arrival at a surface point.
///
/// Fails with [`LisError::NotVisible`] when the point lies beyond the
/// visibility angle (sphere) or the terminal is below the disk plane.
pub fn cos_aoa(point: &SurfacePoint, terminal: &TerminalPose, geom: &LisGeometry) -> Result<f64> {
    let eta = distance_eta(point, terminal, geom)?;
    match (*point, geom.kind()) {
        (SurfacePoint::Spherical { theta, .. }, SurfaceKind::Sphere) => {
            check_visible(terminal.tau(geom), theta)?;
            if eta == 0.0 {
                return Ok(1.0);
            }
            let r = geom.radius();
            let zk = terminal.distance();
            let c = (zk * zk - eta * eta - r * r) / (2.0 * r * eta);
            Ok(c.clamp(0.0, 1.0))
        }
        (SurfacePoint::Polar { .. }, SurfaceKind::Disk) => {
            let height = terminal.position().z;
            if height < 0.0 {
                return Err(LisError::NotVisible {
                    theta: FRAC_PI_2,
                    theta0: FRAC_PI_2,
                });
            }
            if eta == 0.0 {
                return Ok(1.0);
            }
            Ok((height / eta).clamp(0.0, 1.0))
        }
        _ => unreachable!("distance_eta rejects mismatched coordinates"),
    }
}

/// Complex field received at a surface point from a unit-power terminal.
pub fn field_sample(
    point: &SurfacePoint,
    terminal: &TerminalPose,
    geom: &LisGeometry,
    radio: &RadioConfig,
) -> Result<FieldSample> {
    let cos_psi = cos_aoa(point, terminal, geom)?;
    let eta = distance_eta(point, terminal, geom)?;
    let amplitude = if cos_psi == 0.0 {
        0.0
    } else {
        (cos_psi / (4.0 * PI)).sqrt() / eta
    };
    Ok(FieldSample {
        amplitude,
        phase: radio.propagation_phase(eta),
    })
}

/// Power density `|s|^2` on a sphere in normalized form,
/// `(tau cos(theta) - 1) / (4 pi R^2 (1 - 2 tau cos(theta) + tau^2)^(3/2))`,
/// clamped to zero outside the visible cap.
pub fn sphere_power_density(tau: f64, theta: f64, radius: f64) -> f64 {
    let numerator = tau * theta.cos() - 1.0;
    if numerator <= 0.0 {
        return 0.0;
    }
    let d2 = normalized_distance_sq(tau, theta);
    numerator / (4.0 * PI * radius * radius * d2 * d2.sqrt())
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_signed(x: f64) -> f64 {
    let w = wrap_phase(x);
    if w > PI {
        w - TAU
    } else {
        w
    }
}
