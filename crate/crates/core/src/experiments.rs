//! Parameter sweeps and simulations written as CSV.
//!
//! Every run is a pure function of its [`SweepSpec`]: rows are computed in
//! parallel but emitted in grid order, and all randomness is derived from
//! the spec seed, so equal specs give byte-identical output.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, LisError, Result};
use crate::geometry::{
    normalized_distance_sq, sphere_power_density, visibility_angle, wrap_phase, LisGeometry, RadioConfig, TerminalPose,
};
use crate::oracle::{disk_power_tilt_mean, integrate_sphere_power, QuadratureSpec};
use crate::positioning::{
    crlb_plane, crlb_series, crlb_sphere, estimate_tau_from_rss_series, estimate_z_from_angle,
    simulate_angle_measurement, simulate_rss_series, AngleNoise,
};
use crate::reflector::{design_phase_profile, evaluate_reflected_power, PhaseProfile, ReflectorLayout};
use crate::rss::{gamma_ratio_with, rss_disk_approx_mean, rss_sphere_full, GammaConfig, DEFAULT_PLANAR_RADIUS_SCALE};

/// Range of terminal distances drawn for random reflector geometries, in
/// sphere radii.
pub const REFLECTOR_TAU_RANGE: (f64, f64) = (1.5, 6.0);
/// Smallest angle between base station and terminal in random geometries.
pub const REFLECTOR_MIN_SEPARATION: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    RssSweep,
    GammaSweep,
    CrlbSweep,
    PositionSim,
    ReflectorSim,
    FieldMap,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::RssSweep,
        Experiment::GammaSweep,
        Experiment::CrlbSweep,
        Experiment::PositionSim,
        Experiment::ReflectorSim,
        Experiment::FieldMap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::RssSweep => "rss-sweep",
            Experiment::GammaSweep => "gamma-sweep",
            Experiment::CrlbSweep => "crlb-sweep",
            Experiment::PositionSim => "position-sim",
            Experiment::ReflectorSim => "reflector-sim",
            Experiment::FieldMap => "field-map",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = LisError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| invalid("experiment", format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

/// Parameters of one run. Fields irrelevant to the chosen experiment are
/// ignored but still recorded in the CSV header.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub experiment: Experiment,
    /// Terminal distance from the sphere center, meters.
    pub zk: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
    pub spacing: Spacing,
    pub seed: u64,
    /// AWGN standard deviation of each simulated RSS-series measurement.
    pub sigma: f64,
    /// AWGN standard deviation of each lattice cell's power in the
    /// boundary search. Cell powers are about `1/elements` of a cap power,
    /// so this is set separately from `sigma`.
    pub cell_sigma: f64,
    /// Surface elements: lattice cells for positioning, reflector pairs for
    /// the reflector.
    pub elements: usize,
    pub planar_radius_scale: f64,
    pub wavelength: f64,
    pub trials: usize,
    /// Number of nested caps in the RSS series.
    pub series_len: usize,
    pub threshold_mult: f64,
    /// Sphere radius for experiments run at a single radius.
    pub radius: f64,
    pub cap_half_angle: Option<f64>,
    /// Relative tolerance handed to the quadrature oracles.
    pub rel_tol: f64,
}

impl SweepSpec {
    /// Defaults span `tau in [1.05, 40]` at `z_k = 4`.
    pub fn new(experiment: Experiment) -> Self {
        let (sigma, elements, wavelength, trials) = match experiment {
            Experiment::PositionSim => (1e-4, 10_000, 0.1, 100),
            Experiment::ReflectorSim => (0.0, 1000, 1e-3, 50),
            _ => (0.0, 1000, 0.1, 1),
        };
        Self {
            experiment,
            zk: 4.0,
            r_min: 0.1,
            r_max: 4.0 / 1.05,
            points: 50,
            spacing: Spacing::Linear,
            seed: 42,
            sigma,
            cell_sigma: 1e-8,
            elements,
            planar_radius_scale: DEFAULT_PLANAR_RADIUS_SCALE,
            wavelength,
            trials,
            series_len: 5,
            threshold_mult: 3.0,
            radius: 1.0,
            cap_half_angle: None,
            rel_tol: 1e-7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be a positive finite number, got {v}")))
            }
        };
        positive("zk", self.zk)?;
        positive("wavelength", self.wavelength)?;
        positive("radius", self.radius)?;
        positive("rel-tol", self.rel_tol)?;
        positive("planar-radius-scale", self.planar_radius_scale)?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", format!("must be >= 0, got {}", self.sigma)));
        }
        if !(self.cell_sigma >= 0.0 && self.cell_sigma.is_finite()) {
            return Err(invalid("cell-sigma", format!("must be >= 0, got {}", self.cell_sigma)));
        }
        if !(self.threshold_mult >= 0.0 && self.threshold_mult.is_finite()) {
            return Err(invalid(
                "threshold-mult",
                format!("must be >= 0, got {}", self.threshold_mult),
            ));
        }

        match self.experiment {
            Experiment::RssSweep | Experiment::GammaSweep | Experiment::CrlbSweep => {
                positive("r-min", self.r_min)?;
                positive("r-max", self.r_max)?;
                let single = self.points == 1 && self.r_min == self.r_max;
                if !single {
                    if self.r_min >= self.r_max {
                        return Err(invalid(
                            "r-min",
                            format!("range [{}, {}] is empty", self.r_min, self.r_max),
                        ));
                    }
                    if self.points < 2 {
                        return Err(invalid("points", "a range needs at least 2 points"));
                    }
                }
                let tau_min = self.zk / self.r_max;
                if tau_min < 1.0 {
                    return Err(invalid(
                        "r-max",
                        format!("zk / r-max = {tau_min} puts the terminal inside the sphere"),
                    ));
                }
                if tau_min == 1.0 && self.experiment != Experiment::CrlbSweep {
                    return Err(invalid("r-max", "the oracle columns need zk / r-max > 1"));
                }
            }
            Experiment::PositionSim => {
                if self.zk <= self.radius {
                    return Err(invalid("zk", "terminal must lie outside the sphere (zk > radius)"));
                }
                if self.elements < 100 {
                    return Err(invalid("elements", format!("must be >= 100, got {}", self.elements)));
                }
                if self.trials == 0 || self.series_len == 0 {
                    return Err(invalid("trials", "trials and series length must be >= 1"));
                }
            }
            Experiment::ReflectorSim => {
                if self.elements == 0 || self.trials == 0 {
                    return Err(invalid("elements", "elements and trials must be >= 1"));
                }
                if let Some(a) = self.cap_half_angle {
                    if !(a > 0.0 && a <= FRAC_PI_2) {
                        return Err(invalid("cap-half-angle", format!("must lie in (0, pi/2], got {a}")));
                    }
                }
            }
            Experiment::FieldMap => {
                if self.zk < self.radius {
                    return Err(invalid("zk", "terminal must not lie inside the sphere"));
                }
                if self.points < 2 {
                    return Err(invalid("points", "the field grid needs at least 2 points per axis"));
                }
            }
        }
        Ok(())
    }

    /// Sphere radii of the sweep grid, in order.
    pub fn radii(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.r_min];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let t = i as f64 / last;
                match (i, self.spacing) {
                    (0, _) => self.r_min,
                    (i, _) if i == self.points - 1 => self.r_max,
                    (_, Spacing::Linear) => self.r_min + (self.r_max - self.r_min) * t,
                    (_, Spacing::Log) => (self.r_min.ln() + (self.r_max / self.r_min).ln() * t).exp(),
                }
            })
            .collect()
    }

    fn metadata(&self) -> Vec<(&'static str, String)> {
        let spacing = match self.spacing {
            Spacing::Linear => "linear",
            Spacing::Log => "log",
        };
        vec![
            ("experiment", self.experiment.name().to_string()),
            ("zk", num(self.zk)),
            ("r_min", num(self.r_min)),
            ("r_max", num(self.r_max)),
            ("points", self.points.to_string()),
            ("spacing", spacing.to_string()),
            ("seed", self.seed.to_string()),
            ("sigma", num(self.sigma)),
            ("cell_sigma", num(self.cell_sigma)),
            ("elements", self.elements.to_string()),
            ("planar_radius_scale", num(self.planar_radius_scale)),
            ("wavelength", num(self.wavelength)),
            ("trials", self.trials.to_string()),
            ("series_len", self.series_len.to_string()),
            ("threshold_mult", num(self.threshold_mult)),
            ("radius", num(self.radius)),
            (
                "cap_half_angle",
                self.cap_half_angle.map_or_else(|| "auto".to_string(), num),
            ),
            ("rel_tol", num(self.rel_tol)),
        ]
    }
}

/// Full-precision float formatting used in every CSV field.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// A finished table: header row, data rows and trailing comment lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub footer: Vec<String>,
}

impl Table {
    /// Renders the table with a `#` metadata block describing `spec`.
    pub fn to_csv(&self, spec: &SweepSpec) -> Result<String> {
        let mut out = format!("# lis {}\n", env!("CARGO_PKG_VERSION"));
        for (k, v) in spec.metadata() {
            out.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| invalid("csv", e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        let body = w.into_inner().map_err(|e| invalid("csv", e.to_string()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| invalid("csv", e.to_string()))?);
        for line in &self.footer {
            out.push_str(&format!("# {line}\n"));
        }
        Ok(out)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[idx].parse().unwrap_or(f64::NAN)).collect())
    }
}

/// Runs the experiment selected in `spec`.
pub fn run(spec: &SweepSpec) -> Result<Table> {
    spec.validate()?;
    match spec.experiment {
        Experiment::RssSweep => run_rss_sweep(spec),
        Experiment::GammaSweep => run_gamma_sweep(spec),
        Experiment::CrlbSweep => run_crlb_sweep(spec),
        Experiment::PositionSim => run_position_sim(spec),
        Experiment::ReflectorSim => run_reflector_sim(spec),
        Experiment::FieldMap => run_field_map(spec),
    }
}

/// Runs `spec` and renders it as CSV text.
pub fn run_to_csv(spec: &SweepSpec) -> Result<String> {
    run(spec)?.to_csv(spec)
}

fn par_rows<T, F>(items: &[T], f: F) -> Result<Vec<Vec<String>>>
where
    T: Sync,
    F: Fn(&T) -> Result<Vec<String>> + Send + Sync,
{
    items.par_iter().map(f).collect()
}

/// Sphere power over the visible cap, integrated numerically.
fn sphere_oracle(tau: f64, rel_tol: f64) -> Result<f64> {
    let geom = LisGeometry::sphere(1.0)?;
    Ok(integrate_sphere_power(tau, visibility_angle(tau)?, &geom, &QuadratureSpec::adaptive(rel_tol))?.value)
}

/// Exact disk power averaged over tilts, for the disk matched to a sphere
/// at `tau` through `scale`.
fn disk_oracle(tau: f64, scale: f64, rel_tol: f64) -> Result<f64> {
    Ok(disk_power_tilt_mean(tau / scale, 1.0, &QuadratureSpec::adaptive(rel_tol))?.value)
}

pub fn run_rss_sweep(spec: &SweepSpec) -> Result<Table> {
    spec.validate()?;
    let s = spec.planar_radius_scale;
    let rows = par_rows(&spec.radii(), |&r| {
        let tau = spec.zk / r;
        let closed = rss_sphere_full(tau)?.power();
        let oracle = sphere_oracle(tau, spec.rel_tol)?;
        let approx = rss_disk_approx_mean(tau / s)?.power();
        let exact = disk_oracle(tau, s, spec.rel_tol)?;
        Ok(vec![
            num(r),
            num(tau),
            num(closed),
            num(oracle),
            num(approx),
            num(exact),
            num((approx - exact).abs() / exact),
        ])
    })?;
    Ok(Table {
        header: vec![
            "R",
            "tau",
            "P_sp_closed",
            "P_sp_oracle",
            "P_pl_approx_avg",
            "P_pl_exact_avg",
            "rel_gap_approx",
        ],
        rows,
        footer: vec![],
    })
}

/// Ratio built from oracle integrals only: sphere power over the
/// tilt-averaged exact power of the matched disk.
pub fn gamma_numeric(tau: f64, scale: f64, rel_tol: f64) -> Result<f64> {
    Ok(sphere_oracle(tau, rel_tol)? / disk_oracle(tau, scale, rel_tol)?)
}

pub fn run_gamma_sweep(spec: &SweepSpec) -> Result<Table> {
    spec.validate()?;
    let cfg = GammaConfig {
        planar_radius_scale: spec.planar_radius_scale,
    };
    let mut taus: Vec<f64> = spec.radii().iter().map(|r| spec.zk / r).collect();
    taus.reverse();
    let values: Vec<(f64, f64, f64)> = taus
        .par_iter()
        .map(|&tau| {
            Ok((
                tau,
                gamma_ratio_with(tau, &cfg)?,
                gamma_numeric(tau, cfg.planar_radius_scale, spec.rel_tol)?,
            ))
        })
        .collect::<Result<_>>()?;
    let rows = values.iter().map(|&(t, c, n)| vec![num(t), num(c), num(n)]).collect();
    let &(tau_far, closed_far, numeric_far) = values.last().expect("at least one point");
    let footer = vec![
        format!("reference_far_limit_pi_over_2={}", num(FRAC_PI_2)),
        format!("series_far_limit_pi_over_2s2={}", num(cfg.far_limit())),
        format!("near_limit={}", num(cfg.near_limit())),
        format!("largest_tau={}", num(tau_far)),
        format!("gamma_closed_at_largest_tau={}", num(closed_far)),
        format!("gamma_numeric_at_largest_tau={}", num(numeric_far)),
    ];
    Ok(Table {
        header: vec!["tau", "gamma_closed", "gamma_numeric"],
        rows,
        footer,
    })
}

/// `d ln(crlb_sphere) / d ln R` at fixed `z_k`.
pub fn crlb_sphere_slope(tau: f64) -> f64 {
    -(4.0 + 2.0 * tau * tau / ((tau - 1.0) * (tau + 1.0)))
}

/// `d ln(crlb_plane) / d ln R` at fixed `z_k`.
pub fn crlb_plane_slope(tau: f64) -> f64 {
    -6.0 * tau * tau / (tau * tau + 1.0)
}

pub fn run_crlb_sweep(spec: &SweepSpec) -> Result<Table> {
    spec.validate()?;
    let rows = par_rows(&spec.radii(), |&r| {
        let tau = spec.zk / r;
        Ok(vec![
            num(r),
            num(tau),
            num(crlb_sphere(tau)?.factor()),
            num(crlb_plane(tau)?.factor()),
            num(crlb_sphere_slope(tau)),
            num(crlb_plane_slope(tau)),
        ])
    })?;
    Ok(Table {
        header: vec!["R", "tau", "crlb_sp_factor", "crlb_pl_factor", "slope_sp", "slope_pl"],
        rows,
        footer: vec![],
    })
}

pub fn run_position_sim(spec: &SweepSpec) -> Result<Table> {
    spec.validate()?;
    let r = spec.radius;
    let tau = spec.zk / r;
    let noise = AngleNoise {
        sigma_p: spec.cell_sigma,
        element_count: spec.elements,
        threshold_mult: spec.threshold_mult,
    };
    let trials: Vec<u64> = (0..spec.trials as u64).collect();
    let results: Vec<[f64; 4]> = trials
        .par_iter()
        .map(|&t| {
            let seed = spec.seed ^ t;
            let m = simulate_angle_measurement(tau, r, &noise, seed)?;
            let z_angle = estimate_z_from_angle(&m, r)?;
            let series = simulate_rss_series(tau, m.theta0_hat, spec.series_len, spec.sigma, seed.rotate_left(32))?;
            let tau_hat = estimate_tau_from_rss_series(&series)?;
            Ok([m.theta0_hat, z_angle, tau_hat, tau_hat * r])
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<Vec<String>> = results
        .iter()
        .zip(&trials)
        .map(|(v, t)| {
            vec![
                "trial".to_string(),
                t.to_string(),
                num(v[0]),
                num(v[1]),
                num(v[2]),
                num(v[3]),
                num(v[1] - spec.zk),
                num(v[3] - spec.zk),
            ]
        })
        .collect();
    let n = results.len() as f64;
    let mean = |k: usize| results.iter().map(|v| v[k]).sum::<f64>() / n;
    let mse = |k: usize| results.iter().map(|v| (v[k] - spec.zk).powi(2)).sum::<f64>() / n;
    rows.push(vec![
        "mse".to_string(),
        spec.trials.to_string(),
        num(mean(0)),
        num(mean(1)),
        num(mean(2)),
        num(mean(3)),
        num(mse(1)),
        num(mse(3)),
    ]);

    let theta0 = visibility_angle(tau)?;
    let angles: Vec<f64> = (1..=spec.series_len).map(|k| theta0 / k as f64).collect();
    let bound_z = crlb_series(tau, &angles)?.bound(spec.sigma) * r * r;
    Ok(Table {
        header: vec![
            "kind",
            "trial",
            "theta0_hat",
            "z_hat_angle",
            "tau_hat_series",
            "z_hat_series",
            "err_z_angle",
            "err_z_series",
        ],
        rows,
        footer: vec![
            format!("theta0_true={}", num(theta0)),
            format!("crlb_z_series_at_true_boundary={}", num(bound_z)),
        ],
    })
}

/// Random base-station and terminal poses around a sphere of radius
/// `radius`: distances uniform in [`REFLECTOR_TAU_RANGE`], directions
/// uniform on the sphere and at least [`REFLECTOR_MIN_SEPARATION`] apart.
pub fn random_reflector_geometry(rng: &mut impl Rng, radius: f64) -> Result<(TerminalPose, TerminalPose)> {
    let (lo, hi) = REFLECTOR_TAU_RANGE;
    fn direction(rng: &mut impl Rng) -> Vector3<f64> {
        let u: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..TAU);
        let s = (1.0 - u * u).sqrt();
        Vector3::new(s * phi.cos(), s * phi.sin(), u)
    }
    loop {
        let a = direction(rng);
        let b = direction(rng);
        if a.angle(&b) < REFLECTOR_MIN_SEPARATION {
            continue;
        }
        let ta: f64 = rng.random_range(lo..hi);
        let tb: f64 = rng.random_range(lo..hi);
        return Ok((TerminalPose::new(a * ta * radius)?, TerminalPose::new(b * tb * radius)?));
    }
}

/// Compensated and uncompensated power for one reflector geometry.
pub fn reflector_trial(
    bs: &TerminalPose,
    ue: &TerminalPose,
    radius: f64,
    elements: usize,
    cap_half_angle: Option<f64>,
    radio: &RadioConfig,
) -> Result<(f64, f64)> {
    let geom = LisGeometry::sphere(radius)?;
    let layout = ReflectorLayout::for_poses(&geom, bs, ue, elements, cap_half_angle)?;
    let profile = design_phase_profile(&layout, bs, ue, radio)?;
    let compensated = evaluate_reflected_power(&layout, &profile, bs, ue, radio)?;
    let uncompensated = evaluate_reflected_power(&layout, &PhaseProfile::zeros(layout.len()), bs, ue, radio)?;
    Ok((compensated, uncompensated))
}

pub fn run_reflector_sim(spec: &SweepSpec) -> Result<Table> {
    spec.validate()?;
    let radio = RadioConfig::from_wavelength(spec.wavelength)?;
    let trials: Vec<u64> = (0..spec.trials as u64).collect();
    let results: Vec<(f64, f64, f64, f64, f64)> = trials
        .par_iter()
        .map(|&t| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ t);
            let (bs, ue) = random_reflector_geometry(&mut rng, spec.radius)?;
            let (c, u) = reflector_trial(&bs, &ue, spec.radius, spec.elements, spec.cap_half_angle, &radio)?;
            let sep = bs.position().angle(&ue.position());
            Ok((bs.distance() / spec.radius, ue.distance() / spec.radius, sep, c, u))
        })
        .collect::<Result<_>>()?;

    let rows = results
        .iter()
        .zip(&trials)
        .map(|(&(tb, tu, sep, c, u), t)| {
            vec![
                t.to_string(),
                spec.elements.to_string(),
                num(tb),
                num(tu),
                num(sep),
                num(c),
                num(u),
                num(c / u),
            ]
        })
        .collect();
    let n = results.len() as f64;
    let mean_c = results.iter().map(|r| r.3).sum::<f64>() / n;
    let mean_u = results.iter().map(|r| r.4).sum::<f64>() / n;
    let mean_ratio = results.iter().map(|r| r.3 / r.4).sum::<f64>() / n;
    Ok(Table {
        header: vec![
            "trial",
            "N",
            "tau_bs",
            "tau_ue",
            "separation",
            "compensated_power",
            "uncompensated_power",
            "ratio",
        ],
        rows,
        footer: vec![
            format!("mean_compensated_power={}", num(mean_c)),
            format!("mean_uncompensated_power={}", num(mean_u)),
            format!("ratio_of_means={}", num(mean_c / mean_u)),
            format!("mean_of_ratios={}", num(mean_ratio)),
        ],
    })
}

pub fn run_field_map(spec: &SweepSpec) -> Result<Table> {
    spec.validate()?;
    let radio = RadioConfig::from_wavelength(spec.wavelength)?;
    let (r, tau) = (spec.radius, spec.zk / spec.radius);
    let n = spec.points;
    let grid: Vec<(f64, f64)> = (0..n)
        .flat_map(|i| {
            let theta = PI * i as f64 / (n - 1) as f64;
            (0..n).map(move |j| (theta, TAU * j as f64 / n as f64))
        })
        .collect();
    let rows = par_rows(&grid, |&(theta, phi)| {
        // the field is symmetric about the terminal axis, phi only labels the grid
        let eta = r * normalized_distance_sq(tau, theta).sqrt();
        Ok(vec![
            num(theta),
            num(phi),
            num(sphere_power_density(tau, theta, r)),
            num(wrap_phase(radio.propagation_phase(eta))),
        ])
    })?;
    Ok(Table {
        header: vec!["theta", "phi", "power", "phase"],
        rows,
        footer: vec![],
    })
}
