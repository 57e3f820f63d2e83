//! Free and bounded-potential fractional Schrödinger evolution, dispersive
//! decay rates and the uncertainty functional along the flow.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::fit_loglog;
use crate::grid::{sample, tail_mass, Field, FunctionSpec, Grid};
use crate::norms::{lp_norm, UncertaintyParams};
use crate::spectral::{
    apply_multiplier, fourier_forward, fourier_inverse, FreqGrid, MultiplierSpec, SpectralField,
};
use crate::uncertainty::{uncertainty_functional, UncertaintyBreakdown};

/// Fraction of the half-width beyond which mass counts as wrapped.
pub const GUARD_RADIUS: f64 = 0.9;
/// Largest relative `L^2` mass allowed beyond the guard radius.
pub const GUARD_MASS: f64 = 1e-6;
/// Upper bound on `sup|V| dt`.
pub const MAX_POTENTIAL_STEP: f64 = 0.5;
/// Slack below the floor tolerated by [`flow_uncertainty_check`].
pub const FLOOR_SLACK: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub s: f64,
    #[serde(default)]
    pub potential: Option<FunctionSpec>,
    pub t_list: Vec<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub grid: Grid,
}

fn default_dt() -> f64 {
    1e-2
}

impl EvolutionConfig {
    pub fn free(s: f64, t_list: Vec<f64>, grid: Grid) -> Self {
        EvolutionConfig {
            s,
            potential: None,
            t_list,
            dt: default_dt(),
            grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_order(self.s)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.t_list.is_empty() {
            return Err(Error::InvalidParameter("t_list is empty".into()));
        }
        if !(self.t_list[0] > 0.0) || self.t_list.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("times must be positive and finite".into()));
        }
        if self.t_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("t_list must be strictly increasing".into()));
        }
        if let Some(v) = &self.potential {
            v.validate()?;
        }
        Ok(())
    }
}

/// `n` log-spaced times from `t0` to `t1` inclusive.
pub fn log_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t0];
    }
    let (a, b) = (t0.ln(), t1.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidParameter(format!("order s must lie in (0, 1], got {s}")));
    }
    Ok(())
}

/// Exact spectral propagation for any real `t`.
fn propagate(u0: &Field, t: f64, s: f64) -> Result<Field> {
    if t == 0.0 {
        return Ok(u0.clone());
    }
    apply_multiplier(u0, &MultiplierSpec::SchrodingerPhase { s, t })
}

/// `exp(-i t (-Delta)^s) u0` in one spectral step.
pub fn evolve_free(u0: &Field, t: f64, s: f64) -> Result<Field> {
    check_order(s)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    propagate(u0, t, s)
}

fn sample_potential(spec: &FunctionSpec, grid: &Grid) -> Result<Vec<f64>> {
    let v: Vec<f64> = sample(spec, grid)?.values().iter().map(|z| z.re).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("potential sample is unbounded".into()));
    }
    Ok(v)
}

/// Strang split-step solution at each time of `config.t_list`.
///
/// Each interval between output times is cut into equal steps no longer
/// than `config.dt`. Without a potential the solution is propagated exactly.
pub fn evolve_potential(u0: &Field, config: &EvolutionConfig) -> Result<Vec<Field>> {
    config.validate()?;
    if *u0.grid() != config.grid {
        return Err(Error::GridMismatch);
    }
    let Some(vspec) = &config.potential else {
        return config
            .t_list
            .iter()
            .map(|&t| propagate(u0, t, config.s))
            .collect();
    };
    let v = sample_potential(vspec, &config.grid)?;
    let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if sup * config.dt >= MAX_POTENTIAL_STEP {
        return Err(Error::InvalidParameter(format!(
            "sup|V| dt = {} must be below {MAX_POTENTIAL_STEP}",
            sup * config.dt
        )));
    }

    let mut out = Vec::with_capacity(config.t_list.len());
    let mut u = u0.clone();
    let mut t_prev = 0.0;
    for &t in &config.t_list {
        let steps = ((t - t_prev) / config.dt).ceil().max(1.0) as usize;
        let dt = (t - t_prev) / steps as f64;
        u = strang_steps(&u, &v, dt, steps, config.s)?;
        out.push(u.clone());
        t_prev = t;
    }
    Ok(out)
}

fn strang_steps(u: &Field, v: &[f64], dt: f64, steps: usize, s: f64) -> Result<Field> {
    let half: Vec<Complex64> = v.iter().map(|x| Complex64::from_polar(1.0, -0.5 * dt * x)).collect();
    let kinetic = MultiplierSpec::SchrodingerPhase { s, t: dt };
    kinetic.validate()?;
    let freq = FreqGrid::of(u.grid());
    let phase: Vec<Complex64> = (0..freq.len()).map(|k| kinetic.symbol(freq.radius(k))).collect();

    let grid = *u.grid();
    let mut vals: Vec<Complex64> = u.values().iter().zip(&half).map(|(z, h)| z * h).collect();
    for step in 0..steps {
        let mut buf = fourier_forward(&Field::from_parts(grid, vals)).values().to_vec();
        for (z, ph) in buf.iter_mut().zip(&phase) {
            *z *= ph;
        }
        vals = fourier_inverse(&SpectralField::from_parts(freq, buf)).into_values();
        // Adjacent half steps merge into one full potential phase.
        let last = step + 1 == steps;
        for (z, h) in vals.iter_mut().zip(&half) {
            *z *= if last { *h } else { h * h };
        }
    }
    Ok(Field::from_parts(grid, vals))
}

/// Final-state differences for steps `dt`, `dt/2` and `dt/4`, and their ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplittingOrder {
    pub dt: f64,
    /// `||u_dt - u_{dt/2}||_2`.
    pub coarse_error: f64,
    /// `||u_{dt/2} - u_{dt/4}||_2`.
    pub fine_error: f64,
    /// `coarse_error / fine_error`, close to 4 for a second-order scheme.
    pub ratio: f64,
    /// `| ||u(T)||_2 / ||u0||_2 - 1 | / T` at the finest step.
    pub norm_drift_per_time: f64,
}

/// Runs the split-step scheme to the last time of `config.t_list` at three
/// step sizes.
pub fn splitting_order(u0: &Field, config: &EvolutionConfig) -> Result<SplittingOrder> {
    if config.potential.is_none() {
        return Err(Error::InvalidParameter("splitting order needs a potential".into()));
    }
    let t_end = *config.t_list.last().ok_or_else(|| Error::InvalidParameter("t_list is empty".into()))?;
    let run = |dt: f64| -> Result<Field> {
        let cfg = EvolutionConfig {
            t_list: vec![t_end],
            dt,
            ..config.clone()
        };
        Ok(evolve_potential(u0, &cfg)?.pop().expect("one time"))
    };
    let (a, b, c) = (run(config.dt)?, run(config.dt / 2.0)?, run(config.dt / 4.0)?);
    let l2 = |f: &Field| lp_norm(f, 2.0);
    let coarse_error = l2(&a.sub(&b)?)?;
    let fine_error = l2(&b.sub(&c)?)?;
    let drift = (l2(&c)? / l2(u0)? - 1.0).abs() / t_end;
    Ok(SplittingOrder {
        dt: config.dt,
        coarse_error,
        fine_error,
        ratio: coarse_error / fine_error,
        norm_drift_per_time: drift,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub times: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub l2_norms: Vec<f64>,
    /// Relative `L^2` mass beyond the guard radius.
    pub tail_mass: Vec<f64>,
    pub retained: Vec<bool>,
    pub l1_initial: f64,
    /// Least-squares slope of `log sup` against `log t` over retained times.
    pub fitted_slope: f64,
    /// `-n / (2 s)`.
    pub expected_slope: f64,
    /// `max/min - 1` of `sup(t) t^{n/(2s)}` over retained times.
    pub plateau_spread: f64,
}

impl DecayReport {
    pub fn retained_count(&self) -> usize {
        self.retained.iter().filter(|r| **r).count()
    }
}

/// Sup norms of the free evolution of `u0_spec` at `config.t_list`.
///
/// Times whose solution has more than [`GUARD_MASS`] of its mass beyond
/// `0.9 L` are dropped from the fit.
pub fn decay_report(u0_spec: &FunctionSpec, config: &EvolutionConfig) -> Result<DecayReport> {
    config.validate()?;
    if config.potential.is_some() {
        return Err(Error::InvalidParameter("decay report needs free evolution".into()));
    }
    let grid = config.grid;
    let u0 = sample(u0_spec, &grid)?;
    let l1_initial = lp_norm(&u0, 1.0)?;
    let radius = GUARD_RADIUS * grid.half_width();
    let rows: Vec<(f64, f64, f64)> = config
        .t_list
        .par_iter()
        .map(|&t| -> Result<(f64, f64, f64)> {
            let u = propagate(&u0, t, config.s)?;
            Ok((u.max_abs(), lp_norm(&u, 2.0)?, tail_mass(&u, radius)))
        })
        .collect::<Result<_>>()?;

    let retained: Vec<bool> = rows.iter().map(|r| r.2 <= GUARD_MASS).collect();
    let (tx, sy): (Vec<f64>, Vec<f64>) = config
        .t_list
        .iter()
        .zip(&rows)
        .zip(&retained)
        .filter(|(_, keep)| **keep)
        .map(|((t, r), _)| (*t, r.0))
        .unzip();
    if tx.len() < 2 {
        return Err(Error::DomainTooSmall);
    }
    let fit = fit_loglog(&tx, &sy).ok_or(Error::DomainTooSmall)?;
    let expected_slope = -(grid.dim() as f64) / (2.0 * config.s);
    let plateau: Vec<f64> = tx
        .iter()
        .zip(&sy)
        .map(|(t, s)| s * t.powf(-expected_slope))
        .collect();
    let pmax = plateau.iter().cloned().fold(f64::MIN, f64::max);
    let pmin = plateau.iter().cloned().fold(f64::MAX, f64::min);

    Ok(DecayReport {
        times: config.t_list.clone(),
        sup_norms: rows.iter().map(|r| r.0).collect(),
        l2_norms: rows.iter().map(|r| r.1).collect(),
        tail_mass: rows.iter().map(|r| r.2).collect(),
        retained,
        l1_initial,
        fitted_slope: fit.slope,
        expected_slope,
        plateau_spread: pmax / pmin - 1.0,
    })
}

/// Slope error `|fitted - expected|` of [`decay_report`] for growing boxes at
/// fixed spacing.
pub fn decay_convergence(
    u0_spec: &FunctionSpec,
    config: &EvolutionConfig,
    half_widths: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let h = config.grid.spacing();
    half_widths
        .iter()
        .map(|&l| {
            let points = ((2.0 * l / h).round() as usize).max(2);
            let points = points + points % 2;
            let grid = crate::grid::make_grid(config.grid.dim(), points, l)?;
            let cfg = EvolutionConfig {
                grid,
                ..config.clone()
            };
            let r = decay_report(u0_spec, &cfg)?;
            Ok((l, (r.fitted_slope - r.expected_slope).abs()))
        })
        .collect()
}

/// `t,sup_norm,l2_norm,tail_mass,retained`.
pub fn write_decay_csv<W: Write>(r: &DecayReport, mut w: W) -> io::Result<()> {
    writeln!(w, "t,sup_norm,l2_norm,tail_mass,retained")?;
    for i in 0..r.times.len() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.times[i], r.sup_norms[i], r.l2_norms[i], r.tail_mass[i], r.retained[i]
        )?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowPoint {
    pub t: f64,
    #[serde(flatten)]
    pub breakdown: UncertaintyBreakdown,
}

/// J along the free flow at `t = 0` and every time of `config.t_list` that
/// passes the aliasing guard.
///
/// Fails with [`Error::FloorViolated`] as soon as some `J(u(t))` drops more
/// than [`FLOOR_SLACK`] below `floor`.
pub fn flow_uncertainty_check(
    u0_spec: &FunctionSpec,
    config: &EvolutionConfig,
    params: &UncertaintyParams,
    floor: f64,
) -> Result<Vec<FlowPoint>> {
    config.validate()?;
    params.validate()?;
    if !params.scaling_admissible() {
        return Err(Error::InvalidParameter(format!(
            "flow check needs p = (alpha + beta) / alpha, got {params:?}"
        )));
    }
    if config.potential.is_some() {
        return Err(Error::InvalidParameter("flow check uses free evolution".into()));
    }
    let u0 = sample(u0_spec, &config.grid)?;
    let radius = GUARD_RADIUS * config.grid.half_width();
    let times: Vec<f64> = std::iter::once(0.0).chain(config.t_list.iter().copied()).collect();
    let points: Vec<Option<FlowPoint>> = times
        .par_iter()
        .map(|&t| -> Result<Option<FlowPoint>> {
            let u = evolve_free(&u0, t, config.s)?;
            if t > 0.0 && tail_mass(&u, radius) > GUARD_MASS {
                return Ok(None);
            }
            Ok(Some(FlowPoint {
                t,
                breakdown: uncertainty_functional(&u, params)?,
            }))
        })
        .collect::<Result<_>>()?;
    let points: Vec<FlowPoint> = points.into_iter().flatten().collect();
    for p in &points {
        if p.breakdown.j < floor - FLOOR_SLACK {
            return Err(Error::FloorViolated {
                t: p.t,
                value: p.breakdown.j,
                floor,
            });
        }
    }
    Ok(points)
}

/// `t,A,B,lp,J`.
pub fn write_flow_csv<W: Write>(points: &[FlowPoint], mut w: W) -> io::Result<()> {
    writeln!(w, "t,A,B,lp,J")?;
    for p in points {
        let b = &p.breakdown;
        writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", p.t, b.a, b.b, b.lp, b.j)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::uncertainty::gaussian_moment;
    use std::f64::consts::PI;

    fn gauss(grid: &Grid) -> Field {
        sample(&FunctionSpec::gaussian([0.0, 0.0], 1.0).unwrap(), grid).unwrap()
    }

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.sub(b).unwrap().max_abs()
    }

    #[test]
    fn zero_time_is_identity() {
        let grid = make_grid(1, 512, 16.0).unwrap();
        let u0 = gauss(&grid);
        assert!(max_diff(&evolve_free(&u0, 0.0, 0.7).unwrap(), &u0) <= 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let grid = make_grid(1, 64, 8.0).unwrap();
        let u0 = gauss(&grid);
        assert!(evolve_free(&u0, -1.0, 1.0).is_err());
        assert!(evolve_free(&u0, 1.0, 1.5).is_err());
        assert!(evolve_free(&u0, 1.0, 0.0).is_err());
        let mut cfg = EvolutionConfig::free(1.0, vec![2.0, 1.0], grid);
        assert!(cfg.validate().is_err());
        cfg.t_list = vec![1.0, 2.0];
        cfg.dt = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unitary_group_and_reversible() {
        let grid = make_grid(1, 1024, 32.0).unwrap();
        let u0 = sample(&FunctionSpec::random_fourier(4, 8, 1.0).unwrap(), &grid).unwrap();
        let n0 = lp_norm(&u0, 2.0).unwrap();
        for s in [0.5, 0.75, 1.0] {
            for t in [0.1, 1.0, 7.5] {
                let u = evolve_free(&u0, t, s).unwrap();
                assert!((lp_norm(&u, 2.0).unwrap() / n0 - 1.0).abs() <= 1e-12);
                let back = propagate(&u, -t, s).unwrap();
                assert!(max_diff(&back, &u0) <= 1e-12);
            }
            let a = evolve_free(&evolve_free(&u0, 0.3, s).unwrap(), 1.2, s).unwrap();
            let b = evolve_free(&u0, 1.5, s).unwrap();
            assert!(max_diff(&a, &b) <= 1e-12);
        }
    }

    #[test]
    fn free_gaussian_matches_closed_form() {
        // u(x, t) = (1 + 4 pi i t)^{-1/2} exp(-pi x^2 / (1 + 4 pi i t)) for s = 1.
        let grid = make_grid(1, 2048, 32.0).unwrap();
        let t = 0.8;
        let u = evolve_free(&gauss(&grid), t, 1.0).unwrap();
        let z = Complex64::new(1.0, 4.0 * PI * t);
        let err = (0..grid.len())
            .map(|j| {
                let x = grid.coord(j);
                let want = z.powf(-0.5) * (-PI * x * x / z).exp();
                (u.values()[j] - want).norm()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn zero_potential_matches_free() {
        let grid = make_grid(1, 1024, 32.0).unwrap();
        let u0 = gauss(&grid);
        let mut cfg = EvolutionConfig::free(0.8, vec![0.5, 1.0, 2.0], grid);
        cfg.potential = Some(FunctionSpec::constant(0.0).unwrap());
        cfg.dt = 0.05;
        let out = evolve_potential(&u0, &cfg).unwrap();
        for (u, &t) in out.iter().zip(&cfg.t_list) {
            assert!(max_diff(u, &evolve_free(&u0, t, 0.8).unwrap()) <= 1e-8);
        }
    }

    #[test]
    fn constant_potential_is_a_phase() {
        let grid = make_grid(1, 1024, 32.0).unwrap();
        let u0 = gauss(&grid);
        let c = 3.0;
        let mut cfg = EvolutionConfig::free(1.0, vec![0.7, 1.3], grid);
        cfg.potential = Some(FunctionSpec::constant(c).unwrap());
        cfg.dt = 0.01;
        let out = evolve_potential(&u0, &cfg).unwrap();
        for (u, &t) in out.iter().zip(&cfg.t_list) {
            let want = evolve_free(&u0, t, 1.0)
                .unwrap()
                .scale(Complex64::from_polar(1.0, -c * t));
            assert!(max_diff(u, &want) <= 1e-8);
        }
    }

    #[test]
    fn potential_step_bound_enforced() {
        let grid = make_grid(1, 64, 8.0).unwrap();
        let mut cfg = EvolutionConfig::free(1.0, vec![1.0], grid);
        cfg.potential = Some(FunctionSpec::constant(100.0).unwrap());
        cfg.dt = 0.01;
        assert!(evolve_potential(&gauss(&grid), &cfg).is_err());
    }

    #[test]
    fn strang_is_second_order_and_unitary() {
        let grid = make_grid(1, 512, 16.0).unwrap();
        let u0 = gauss(&grid);
        let mut cfg = EvolutionConfig::free(1.0, vec![1.0], grid);
        cfg.potential = Some(FunctionSpec::gaussian([0.5, 0.0], 2.0).unwrap().scaled(5.0));
        cfg.dt = 0.02;
        let r = splitting_order(&u0, &cfg).unwrap();
        assert!((3.5..=4.5).contains(&r.ratio), "{r:?}");
        assert!(r.norm_drift_per_time <= 1e-10, "{r:?}");
    }

    #[test]
    fn decay_rate_at_order_one() {
        let grid = make_grid(1, 1 << 12, 100.0).unwrap();
        let cfg = EvolutionConfig::free(1.0, log_times(1.0, 5.0, 8), grid);
        let r = decay_report(&FunctionSpec::gaussian([0.0, 0.0], 1.0).unwrap(), &cfg).unwrap();
        assert_eq!(r.retained_count(), 8);
        assert!((r.fitted_slope + 0.5).abs() < 0.05, "{}", r.fitted_slope);
        assert!(r.plateau_spread < 0.1);
        assert!(r.sup_norms.iter().all(|s| *s > 0.0));
        let mut buf = Vec::new();
        write_decay_csv(&r, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 9);
    }

    #[test]
    fn wrapped_times_are_dropped() {
        let grid = make_grid(1, 256, 8.0).unwrap();
        let cfg = EvolutionConfig::free(1.0, log_times(5.0, 50.0, 6), grid);
        assert_eq!(
            decay_report(&FunctionSpec::gaussian([0.0, 0.0], 1.0).unwrap(), &cfg),
            Err(Error::DomainTooSmall)
        );
    }

    #[test]
    fn flow_tracks_gaussian_moments() {
        let grid = make_grid(1, 4096, 40.0).unwrap();
        let params = UncertaintyParams::new(1.0, 1.0, 2.0, 1).unwrap();
        let spec = FunctionSpec::gaussian([0.0, 0.0], 1.0).unwrap();
        let cfg = EvolutionConfig::free(1.0, vec![0.1, 0.25, 0.5, 1.0], grid);
        let pts = flow_uncertainty_check(&spec, &cfg, &params, 0.0).unwrap();
        assert_eq!(pts.len(), 5);
        let j0 = uncertainty_functional(&gauss(&grid), &params).unwrap();
        assert_eq!(pts[0].breakdown, j0);
        for p in &pts {
            let q = 1.0 + 16.0 * PI * PI * p.t * p.t;
            // |u(t)| = q^{-1/4} exp(-pi x^2 / q), and |u^| does not move.
            let a = q.powf(-0.25) * gaussian_moment(1.0, 1.0 / q, 1);
            assert!((p.breakdown.a / a - 1.0).abs() < 1e-8, "{} {}", p.breakdown.a, a);
            assert!((p.breakdown.b / j0.b - 1.0).abs() < 1e-12);
            assert!(p.breakdown.j >= j0.j - 1e-6);
            assert!(p.breakdown.j.is_finite() && p.breakdown.j > 0.0);
        }
        let mut buf = Vec::new();
        write_flow_csv(&pts, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,A,B,lp,J\n"));
    }

    #[test]
    fn flow_floor_violation_reported() {
        let grid = make_grid(1, 1024, 20.0).unwrap();
        let params = UncertaintyParams::new(1.0, 1.0, 2.0, 1).unwrap();
        let spec = FunctionSpec::gaussian([0.0, 0.0], 1.0).unwrap();
        let cfg = EvolutionConfig::free(1.0, vec![0.1], grid);
        assert!(matches!(
            flow_uncertainty_check(&spec, &cfg, &params, 100.0),
            Err(Error::FloorViolated { .. })
        ));
    }
}
