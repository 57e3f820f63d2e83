//! Distance to the extremal manifold and the quadratic excess law near a
//! minimizer.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extremal::{align_to, normalize, resample, MinimizeResult};
use crate::fit::fit_loglog;
use crate::grid::{sample, Field, FunctionSpec};
use crate::norms::{lp_norm, weighted_freq_norm, weighted_space_norm, UncertaintyParams};
use crate::uncertainty::uncertainty_functional;

/// Points whose J exceeds this multiple of the floor are clipped.
pub const CLIP_FACTOR: f64 = 10.0;

/// Step of the central differences used for the group generators.
const GENERATOR_STEP: f64 = 1e-3;

/// `|| |x|^alpha (f - f0) ||_beta + || |xi|^beta (f^ - f0^) ||_alpha`.
pub fn stability_functional(f: &Field, f0: &Field, params: &UncertaintyParams) -> Result<f64> {
    let d = f.sub(f0)?;
    Ok(weighted_space_norm(&d, params.alpha, params.beta)?
        + weighted_freq_norm(&d, params.alpha, params.beta)?)
}

/// `S(f, f0) / ||f - f0||_p`, or zero when the fields coincide.
pub fn control_ratio(f: &Field, f0: &Field, params: &UncertaintyParams) -> Result<f64> {
    let s = stability_functional(f, f0, params)?;
    let d = lp_norm(&f.sub(f0)?, params.p)?;
    Ok(if d == 0.0 { 0.0 } else { s / d })
}

/// Dilation and translation generators of `x -> lambda^{n/p} f(lambda (x - x0))`
/// at the identity, by central differences of band-limited resampling.
///
/// The dilation generator comes first, then one translation per axis.
pub fn invariance_generators(f: &Field, p: f64) -> Vec<Field> {
    let d = GENERATOR_STEP;
    let central = |plus: Field, minus: Field| {
        plus.add_scaled(-1.0, &minus)
            .expect("same grid")
            .scale(Complex64::new(0.5 / d, 0.0))
    };
    let mut out = vec![central(
        resample(f, 1.0 + d, [0.0, 0.0], p),
        resample(f, 1.0 - d, [0.0, 0.0], p),
    )];
    for axis in 0..f.grid().dim() {
        let mut e = [0.0, 0.0];
        e[axis] = d;
        out.push(central(
            resample(f, 1.0, e, p),
            resample(f, 1.0, [-e[0], -e[1]], p),
        ));
    }
    out
}

/// Component of `h` that is `L^2`-orthogonal to `f0` and to its invariance
/// generators, scaled to unit `L^p` norm.
pub fn tangent_projection(h: &Field, f0: &Field, p: f64) -> Result<Field> {
    h.check_same_grid(f0)?;
    let mut basis: Vec<Field> = Vec::new();
    for v in std::iter::once(f0.clone()).chain(invariance_generators(f0, p)) {
        let mut w = v;
        for b in &basis {
            w = w.add_scaled(-w.inner_re(b)?, b)?;
        }
        let n = w.inner_re(&w)?.sqrt();
        if n > 0.0 {
            basis.push(w.scale(Complex64::new(1.0 / n, 0.0)));
        }
    }
    let mut out = h.clone();
    for b in &basis {
        out = out.add_scaled(-out.inner_re(b)?, b)?;
    }
    normalize(&out, p).map_err(|_| {
        Error::Degenerate("perturbation lies in the span of the invariance directions".into())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub epsilon_list: Vec<f64>,
    /// `J(f_eps) - J(f0)`.
    pub excess: Vec<f64>,
    /// Alignment residual of `f_eps` against `f0`.
    pub dist: Vec<f64>,
    #[serde(rename = "S_values")]
    pub s_values: Vec<f64>,
    pub clipped: Vec<bool>,
    /// J of the reference field, the floor all excesses are measured from.
    pub j_floor: f64,
    /// Slope of `log excess` against `log dist` over unclipped positive points.
    pub fitted_slope: Option<f64>,
    /// `min excess / dist^2` over the same points.
    pub coercivity_estimate: Option<f64>,
    /// Whether `dist` is nondecreasing in `|eps|` along each sign of `eps`.
    pub dist_monotone: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilitySummary {
    pub j_floor: f64,
    pub fitted_slope: Option<f64>,
    pub coercivity_estimate: Option<f64>,
    pub dist_monotone: bool,
    pub points: usize,
    pub clipped: usize,
}

impl StabilityReport {
    pub fn summary(&self) -> StabilitySummary {
        StabilitySummary {
            j_floor: self.j_floor,
            fitted_slope: self.fitted_slope,
            coercivity_estimate: self.coercivity_estimate,
            dist_monotone: self.dist_monotone,
            points: self.epsilon_list.len(),
            clipped: self.clipped.iter().filter(|c| **c).count(),
        }
    }
}

/// Perturbs a converged minimizer along the tangent part of `perturbation`
/// and records excess, distance and `S` for each `eps`.
pub fn stability_sweep(
    f0: &MinimizeResult,
    perturbation: &FunctionSpec,
    epsilon_list: &[f64],
    params: &UncertaintyParams,
) -> Result<StabilityReport> {
    if !f0.converged {
        return Err(Error::InvalidParameter(
            "stability sweep needs a converged minimizer".into(),
        ));
    }
    let h = sample(perturbation, f0.field.grid())?.real_part();
    let h = tangent_projection(&h, &f0.field, params.p)?;
    sweep_along(&f0.field, &h, epsilon_list, params)
}

/// `f_eps = normalize(f0 + eps h)` for each `eps`, with `h` used as given.
pub fn sweep_along(
    f0: &Field,
    h: &Field,
    epsilon_list: &[f64],
    params: &UncertaintyParams,
) -> Result<StabilityReport> {
    h.check_same_grid(f0)?;
    params.validate()?;
    let p = params.p;
    let n0 = lp_norm(f0, p)?;
    if (n0 - 1.0).abs() > crate::extremal::NORMALIZATION_TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "reference field must have unit L^p norm, got {n0}"
        )));
    }
    let j_floor = uncertainty_functional(f0, params)?.j;

    let rows: Vec<(f64, f64, f64, bool)> = epsilon_list
        .par_iter()
        .map(|&eps| -> Result<(f64, f64, f64, bool)> {
            if eps == 0.0 {
                return Ok((0.0, 0.0, 0.0, false));
            }
            let f = normalize(&f0.add_scaled(eps, h)?, p)?;
            let j = uncertainty_functional(&f, params)?.j;
            let excess = j - j_floor;
            if j >= CLIP_FACTOR * j_floor {
                return Ok((excess, f64::NAN, f64::NAN, true));
            }
            let al = align_to(&f, f0, p)?;
            let s = stability_functional(&f, &al.aligned, params)?;
            Ok((excess, al.residual, s, false))
        })
        .collect::<Result<_>>()?;

    let excess: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let dist: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let s_values: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let clipped: Vec<bool> = rows.iter().map(|r| r.3).collect();

    let (mut fx, mut fy) = (Vec::new(), Vec::new());
    let mut coercivity: Option<f64> = None;
    for i in 0..rows.len() {
        if clipped[i] || epsilon_list[i] == 0.0 || !(excess[i] > 0.0 && dist[i] > 0.0) {
            continue;
        }
        fx.push(dist[i]);
        fy.push(excess[i]);
        let c = excess[i] / (dist[i] * dist[i]);
        coercivity = Some(coercivity.map_or(c, |m: f64| m.min(c)));
    }
    let fitted_slope = if fx.len() >= 2 {
        fit_loglog(&fx, &fy).map(|f| f.slope)
    } else {
        None
    };

    Ok(StabilityReport {
        dist_monotone: monotone_in_magnitude(epsilon_list, &dist, &clipped),
        epsilon_list: epsilon_list.to_vec(),
        excess,
        dist,
        s_values,
        clipped,
        j_floor,
        fitted_slope,
        coercivity_estimate: coercivity,
    })
}

fn monotone_in_magnitude(eps: &[f64], dist: &[f64], clipped: &[bool]) -> bool {
    [1.0, -1.0].iter().all(|&sign| {
        let mut pts: Vec<(f64, f64)> = eps
            .iter()
            .zip(dist)
            .zip(clipped)
            .filter(|((e, _), c)| !**c && (**e * sign > 0.0 || **e == 0.0))
            .map(|((e, d), _)| (e.abs(), *d))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12)
    })
}

/// `epsilon,excess,dist,S,clipped`.
pub fn write_stability_csv<W: Write>(report: &StabilityReport, mut w: W) -> io::Result<()> {
    writeln!(w, "epsilon,excess,dist,S,clipped")?;
    for i in 0..report.epsilon_list.len() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{}",
            report.epsilon_list[i],
            report.excess[i],
            report.dist[i],
            report.s_values[i],
            report.clipped[i]
        )?;
    }
    Ok(())
}
