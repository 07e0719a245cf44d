//! Two-cap reflector on a spherical surface.
//!
//! Elements on a receive cap facing the base station pick up the incident
//! field and hand it to partner elements on a transmit cap facing the
//! terminal, which re-radiate it after a programmable phase shift. Each
//! receive element is the mirror image of its transmit partner across the
//! plane bisecting the two cap axes, so both caps hold the same number of
//! equal-area elements.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Unit, Vector3};
use num_complex::Complex64;

use crate::error::{ensure_finite, invalid, LisError, Result};
use crate::geometry::{
    cos_aoa_sphere_cartesian, eta_cartesian, visibility_angle, wrap_phase, wrap_signed, LisGeometry, RadioConfig,
    TerminalPose,
};
use crate::lattice::{fibonacci_point, lattice_size_for_cap};

/// Gap kept between the two caps when half-angles are chosen automatically.
pub const CAP_MARGIN: f64 = 0.01;

/// Polar cap on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cap {
    pub axis: Unit<Vector3<f64>>,
    pub half_angle: f64,
}

impl Cap {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        angle_between(&self.axis, p) <= self.half_angle
    }
}

fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    // atan2 form stays accurate for nearly parallel vectors
    a.cross(b).norm().atan2(a.dot(b))
}

/// Element positions of a two-cap reflector.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectorLayout {
    radius: f64,
    rx_cap: Cap,
    tx_cap: Cap,
    rx_elements: Vec<Vector3<f64>>,
    tx_elements: Vec<Vector3<f64>>,
    element_area: f64,
}

impl ReflectorLayout {
    /// Places `elements` transmit elements on the cap around `tx_axis` and
    /// their mirrored receive partners around `rx_axis`. Both caps share
    /// `half_angle`.
    ///
    /// The transmit elements are the cap points of a global spiral lattice
    /// sized so that the cap holds exactly `elements` of them; every element
    /// carries the lattice cell area `4 pi R^2 / N_total`.
    pub fn new(
        geom: &LisGeometry,
        rx_axis: Vector3<f64>,
        tx_axis: Vector3<f64>,
        half_angle: f64,
        elements: usize,
    ) -> Result<Self> {
        geom.require_sphere()?;
        let radius = geom.radius();
        let half_angle = ensure_finite("cap half-angle", half_angle)?;
        if !(half_angle > 0.0 && half_angle <= FRAC_PI_2) {
            return Err(invalid(
                "cap half-angle",
                format!("must lie in (0, pi/2], got {half_angle}"),
            ));
        }
        if elements == 0 {
            return Err(invalid("elements", "must be >= 1"));
        }
        let rx_axis = unit_axis("rx axis", rx_axis)?;
        let tx_axis = unit_axis("tx axis", tx_axis)?;
        let separation = angle_between(&rx_axis, &tx_axis);
        if separation <= 2.0 * half_angle {
            return Err(LisError::CapOverlap {
                separation,
                rx_half: half_angle,
                tx_half: half_angle,
            });
        }

        let total = lattice_size_for_cap(elements, half_angle);
        let frame = TerminalPose::new(tx_axis.into_inner())?;
        let tx_elements: Vec<Vector3<f64>> = (0..elements)
            .map(|i| frame.from_canonical(&fibonacci_point(i, total)) * radius)
            .collect();
        let v = (tx_axis.into_inner() - rx_axis.into_inner()).normalize();
        let rx_elements = tx_elements.iter().map(|p| p - 2.0 * v * v.dot(p)).collect();

        Ok(Self {
            radius,
            rx_cap: Cap {
                axis: rx_axis,
                half_angle,
            },
            tx_cap: Cap {
                axis: tx_axis,
                half_angle,
            },
            rx_elements,
            tx_elements,
            element_area: 4.0 * PI * radius * radius / total as f64,
        })
    }

    /// Caps centered on the base-station and terminal directions with the
    /// common half-angle `min(theta0_bs, theta0_ue, separation/2 - margin)`,
    /// unless `half_angle` overrides it.
    pub fn for_poses(
        geom: &LisGeometry,
        bs: &TerminalPose,
        ue: &TerminalPose,
        elements: usize,
        half_angle: Option<f64>,
    ) -> Result<Self> {
        geom.require_sphere()?;
        let theta0_bs = visibility_angle(bs.tau(geom))?;
        let theta0_ue = visibility_angle(ue.tau(geom))?;
        let separation = angle_between(&bs.position(), &ue.position());
        let alpha = match half_angle {
            Some(a) => a,
            None => {
                let a = theta0_bs.min(theta0_ue).min(0.5 * separation - CAP_MARGIN);
                if a <= 0.0 {
                    return Err(LisError::CapOverlap {
                        separation,
                        rx_half: theta0_bs,
                        tx_half: theta0_ue,
                    });
                }
                a
            }
        };
        Self::new(geom, bs.position(), ue.position(), alpha, elements)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn rx_cap(&self) -> Cap {
        self.rx_cap
    }

    pub fn tx_cap(&self) -> Cap {
        self.tx_cap
    }

    pub fn rx_elements(&self) -> &[Vector3<f64>] {
        &self.rx_elements
    }

    pub fn tx_elements(&self) -> &[Vector3<f64>] {
        &self.tx_elements
    }

    pub fn element_area(&self) -> f64 {
        self.element_area
    }

    pub fn len(&self) -> usize {
        self.tx_elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tx_elements.is_empty()
    }

    /// The same reflector operated in the opposite direction.
    pub fn swapped(&self) -> Self {
        Self {
            radius: self.radius,
            rx_cap: self.tx_cap,
            tx_cap: self.rx_cap,
            rx_elements: self.tx_elements.clone(),
            tx_elements: self.rx_elements.clone(),
            element_area: self.element_area,
        }
    }
}

fn unit_axis(name: &'static str, v: Vector3<f64>) -> Result<Unit<Vector3<f64>>> {
    for c in v.iter() {
        ensure_finite(name, *c)?;
    }
    Unit::try_new(v, 0.0).ok_or_else(|| invalid(name, "must be a nonzero vector"))
}

/// Phase shifts applied by the transmit elements, in `[0, 2pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile(Vec<f64>);

impl PhaseProfile {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        for &p in &phases {
            ensure_finite("phase", p)?;
        }
        Ok(Self(phases.into_iter().map(wrap_phase).collect()))
    }

    /// No compensation.
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn phases(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy with element `index` shifted by `delta`.
    pub fn perturbed(&self, index: usize, delta: f64) -> Result<Self> {
        let mut phases = self.0.clone();
        let slot = phases
            .get_mut(index)
            .ok_or_else(|| invalid("element index", format!("{index} out of range")))?;
        *slot = wrap_phase(*slot + delta);
        Ok(Self(phases))
    }
}

/// Per-element path data: amplitude product and total path length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPath {
    pub amplitude: f64,
    pub path_length: f64,
}

fn hop(point: &Vector3<f64>, terminal: &TerminalPose, radius: f64, area: f64) -> Result<(f64, f64)> {
    let t = terminal.position();
    let eta = eta_cartesian(point, &t);
    let cos_psi = cos_aoa_sphere_cartesian(point, &t, radius);
    if cos_psi < -1e-12 {
        let tau = terminal.distance() / radius;
        return Err(LisError::NotVisible {
            theta: angle_between(point, &t),
            theta0: visibility_angle(tau).unwrap_or(0.0),
        });
    }
    let amplitude = (area * cos_psi.max(0.0) / (4.0 * PI)).sqrt() / eta;
    Ok((amplitude, eta))
}

/// Amplitude `a_in a_out` and path length `eta_in + eta_out` of every
/// element pair. Fails when an element faces away from its terminal.
pub fn element_paths(layout: &ReflectorLayout, bs: &TerminalPose, ue: &TerminalPose) -> Result<Vec<ElementPath>> {
    let (r, a) = (layout.radius, layout.element_area);
    layout
        .rx_elements
        .iter()
        .zip(&layout.tx_elements)
        .map(|(rx, tx)| {
            let (a_in, eta_in) = hop(rx, bs, r, a)?;
            let (a_out, eta_out) = hop(tx, ue, r, a)?;
            Ok(ElementPath {
                amplitude: a_in * a_out,
                path_length: eta_in + eta_out,
            })
        })
        .collect()
}

/// Phase shifts `k (eta_in + eta_out) mod 2pi` that cancel the propagation
/// phase of every element for the given (possibly estimated) poses.
pub fn design_phase_profile(
    layout: &ReflectorLayout,
    bs: &TerminalPose,
    ue: &TerminalPose,
    radio: &RadioConfig,
) -> Result<PhaseProfile> {
    let k = radio.wavenumber();
    let paths = element_paths(layout, bs, ue)?;
    Ok(PhaseProfile(
        paths.iter().map(|p| wrap_phase(k * p.path_length)).collect(),
    ))
}

fn check_profile(layout: &ReflectorLayout, profile: &PhaseProfile) -> Result<()> {
    if profile.len() != layout.len() {
        return Err(invalid(
            "phase profile",
            format!("has {} entries for {} elements", profile.len(), layout.len()),
        ));
    }
    Ok(())
}

/// End-to-end phase of each element, `chi_n - k (eta_in + eta_out)`,
/// wrapped into `(-pi, pi]`.
pub fn end_to_end_phases(
    layout: &ReflectorLayout,
    profile: &PhaseProfile,
    bs: &TerminalPose,
    ue: &TerminalPose,
    radio: &RadioConfig,
) -> Result<Vec<f64>> {
    check_profile(layout, profile)?;
    let k = radio.wavenumber();
    let paths = element_paths(layout, bs, ue)?;
    Ok(paths
        .iter()
        .zip(profile.phases())
        .map(|(p, chi)| wrap_signed(chi - wrap_phase(k * p.path_length)))
        .collect())
}

/// Power delivered to the terminal, `|sum_n a_in a_out exp(j(chi_n - k eta_n))|^2`.
pub fn evaluate_reflected_power(
    layout: &ReflectorLayout,
    profile: &PhaseProfile,
    bs: &TerminalPose,
    ue: &TerminalPose,
    radio: &RadioConfig,
) -> Result<f64> {
    check_profile(layout, profile)?;
    let k = radio.wavenumber();
    let paths = element_paths(layout, bs, ue)?;
    let sum: Complex64 = paths
        .iter()
        .zip(profile.phases())
        .map(|(p, chi)| Complex64::from_polar(p.amplitude, chi - wrap_phase(k * p.path_length)))
        .sum();
    Ok(sum.norm_sqr())
}

/// Upper bound `(sum_n a_in a_out)^2` reached by perfect compensation.
pub fn coherent_power(layout: &ReflectorLayout, bs: &TerminalPose, ue: &TerminalPose) -> Result<f64> {
    let s: f64 = element_paths(layout, bs, ue)?.iter().map(|p| p.amplitude).sum();
    Ok(s * s)
}

/// Expected power of a random-phase sum, `sum_n (a_in a_out)^2`.
pub fn incoherent_power(layout: &ReflectorLayout, bs: &TerminalPose, ue: &TerminalPose) -> Result<f64> {
    Ok(element_paths(layout, bs, ue)?.iter().map(|p| p.amplitude.powi(2)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize) -> (LisGeometry, TerminalPose, TerminalPose, ReflectorLayout) {
        let geom = LisGeometry::sphere(1.0).unwrap();
        let bs = TerminalPose::from_xyz(3.0, 0.5, 1.0).unwrap();
        let ue = TerminalPose::from_xyz(-1.0, 2.0, -0.5).unwrap();
        let layout = ReflectorLayout::for_poses(&geom, &bs, &ue, n, None).unwrap();
        (geom, bs, ue, layout)
    }

    #[test]
    fn layout_is_disjoint_and_mirrored() {
        let (_, _, _, layout) = setup(500);
        assert_eq!(layout.len(), 500);
        let (rx, tx) = (layout.rx_cap(), layout.tx_cap());
        for (p, q) in layout.rx_elements().iter().zip(layout.tx_elements()) {
            assert!((p.norm() - 1.0).abs() < 1e-12);
            assert!(tx.contains(q) && !rx.contains(q));
            assert!(rx.contains(p) && !tx.contains(p));
        }
    }

    #[test]
    fn designed_profile_zeroes_every_phase() {
        let (_, bs, ue, layout) = setup(300);
        let radio = RadioConfig::from_wavelength(1e-3).unwrap();
        let profile = design_phase_profile(&layout, &bs, &ue, &radio).unwrap();
        let phases = end_to_end_phases(&layout, &profile, &bs, &ue, &radio).unwrap();
        assert!(phases.iter().all(|p| p.abs() < 1e-9));
        let power = evaluate_reflected_power(&layout, &profile, &bs, &ue, &radio).unwrap();
        let bound = coherent_power(&layout, &bs, &ue).unwrap();
        assert!((power - bound).abs() / bound < 1e-12);
    }

    #[test]
    fn single_element_is_phase_blind() {
        let (_, bs, ue, layout) = setup(1);
        let radio = RadioConfig::from_wavelength(0.05).unwrap();
        let profile = design_phase_profile(&layout, &bs, &ue, &radio).unwrap();
        let e2e = end_to_end_phases(&layout, &profile, &bs, &ue, &radio).unwrap();
        assert!(e2e[0].abs() < 1e-12);
        let pc = evaluate_reflected_power(&layout, &profile, &bs, &ue, &radio).unwrap();
        let pu = evaluate_reflected_power(&layout, &PhaseProfile::zeros(1), &bs, &ue, &radio).unwrap();
        assert!((pc - pu).abs() / pc < 1e-14);
    }

    #[test]
    fn long_wavelength_needs_no_compensation() {
        let (_, bs, ue, layout) = setup(200);
        let radio = RadioConfig::from_wavelength(1e9).unwrap();
        let profile = design_phase_profile(&layout, &bs, &ue, &radio).unwrap();
        let pc = evaluate_reflected_power(&layout, &profile, &bs, &ue, &radio).unwrap();
        let pu = evaluate_reflected_power(&layout, &PhaseProfile::zeros(200), &bs, &ue, &radio).unwrap();
        assert!((pc - pu).abs() / pc < 1e-6);
    }

    #[test]
    fn reciprocity() {
        let (_, bs, ue, layout) = setup(400);
        let radio = RadioConfig::from_wavelength(0.01).unwrap();
        let p = design_phase_profile(&layout, &bs, &ue, &radio).unwrap();
        let fwd = evaluate_reflected_power(&layout, &p, &bs, &ue, &radio).unwrap();
        let back = layout.swapped();
        let q = design_phase_profile(&back, &ue, &bs, &radio).unwrap();
        let rev = evaluate_reflected_power(&back, &q, &ue, &bs, &radio).unwrap();
        assert!((fwd - rev).abs() / fwd < 1e-12);
    }

    #[test]
    fn overlapping_caps_are_rejected() {
        let geom = LisGeometry::sphere(1.0).unwrap();
        let bs = TerminalPose::from_xyz(3.0, 0.0, 0.0).unwrap();
        let ue = TerminalPose::from_xyz(3.0, 0.3, 0.0).unwrap();
        let err = ReflectorLayout::for_poses(&geom, &bs, &ue, 10, Some(0.5)).unwrap_err();
        assert!(matches!(err, LisError::CapOverlap { .. }));
    }

    #[test]
    fn pose_error_spreads_phase_continuously() {
        let (_, bs, ue, layout) = setup(300);
        let radio = RadioConfig::from_wavelength(0.01).unwrap();
        let spread = |delta: f64| {
            let est = TerminalPose::new(ue.position() * (1.0 + delta)).unwrap();
            let p = design_phase_profile(&layout, &bs, &est, &radio).unwrap();
            let e = end_to_end_phases(&layout, &p, &bs, &ue, &radio).unwrap();
            e.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - e.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let s: Vec<f64> = [1e-3, 1e-4, 1e-5, 1e-6].iter().map(|&d| spread(d)).collect();
        assert!(s.windows(2).all(|w| w[1] < w[0]));
        assert!(s[3] < 1e-3);
    }

    #[test]
    fn invisible_element_is_an_error() {
        let geom = LisGeometry::sphere(1.0).unwrap();
        let bs = TerminalPose::from_xyz(1.1, 0.0, 0.0).unwrap();
        let ue = TerminalPose::from_xyz(-3.0, 0.0, 0.0).unwrap();
        // half-angle well beyond the base station's visibility angle
        let layout = ReflectorLayout::for_poses(&geom, &bs, &ue, 100, Some(1.2)).unwrap();
        let radio = RadioConfig::from_wavelength(0.1).unwrap();
        assert!(matches!(
            design_phase_profile(&layout, &bs, &ue, &radio),
            Err(LisError::NotVisible { .. })
        ));
    }
}
