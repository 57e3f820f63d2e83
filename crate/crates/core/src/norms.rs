//! Lebesgue and power-weighted norms on the grid.
//!
//! Weighted sums use rectangle-rule weights `h^n |x_j|^gamma`. In one
//! dimension, when `gamma` is not an even integer, the kink of `|x|^gamma` at
//! the origin node limits the plain rule to `O(h^{gamma+1})`; the default
//! [`WeightRule::OriginCorrected`] adds the generalized Euler-Maclaurin
//! correction (zeta-function coefficients, with derivatives at the origin
//! replaced by central differences), which restores spectral-like accuracy
//! for integrands smooth at the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Point};
use crate::special::zeta;
use crate::spectral::{fourier_forward, FreqGrid, SpectralField};

/// The exponent triple of the uncertainty functional plus the dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyParams {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub n: usize,
}

impl UncertaintyParams {
    pub fn new(alpha: f64, beta: f64, p: f64, n: usize) -> Result<Self> {
        let u = UncertaintyParams { alpha, beta, p, n };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "p must be finite and >= 1, got {}",
                self.p
            )));
        }
        if self.n != 1 && self.n != 2 {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {}", self.n)));
        }
        Ok(())
    }

    /// `p = (alpha + beta) / alpha`, the condition under which J is
    /// dilation invariant.
    pub fn scaling_admissible(&self) -> bool {
        let target = (self.alpha + self.beta) / self.alpha;
        (self.p - target).abs() <= 1e-12 * target
    }

    /// Exponent `beta / (alpha + beta)` on `A`.
    pub fn weight_a(&self) -> f64 {
        self.beta / (self.alpha + self.beta)
    }

    /// Exponent `alpha / (alpha + beta)` on `B`.
    pub fn weight_b(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Power `alpha * beta` of both weights.
    pub fn gamma(&self) -> f64 {
        self.alpha * self.beta
    }

    /// Dilation exponent of J: `J(f_lambda) = lambda^E J(f)`.
    pub fn dilation_exponent(&self) -> f64 {
        let n = self.n as f64;
        n / self.p - self.alpha * n / (self.alpha + self.beta)
    }
}

/// How weighted sums treat the origin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// Plain nodal weights `h^n |x_j|^gamma`.
    Nodal,
    /// Nodal weights plus the origin correction (one dimension only).
    #[default]
    OriginCorrected,
}

/// Whether the origin correction is meaningful for this power.
fn needs_correction(gamma: f64) -> bool {
    gamma > 0.0 && (gamma / 2.0).fract() != 0.0
}

/// Adds the origin correction to quadrature weights on a 1-D lattice whose
/// node `c` sits exactly at the origin.
///
/// Plain sum minus integral is `sum_k 2 zeta(-gamma-k) h^{gamma+k+1} g^(k)(0)/k!`
/// over even `k`. Terms up to `k = 6` are removed, with `h^k g^(k)(0)`
/// expanded in central differences to the same order.
fn add_origin_correction(weights: &mut [f64], c: usize, step: f64, gamma: f64) {
    let s = step.powf(gamma + 1.0);
    let c0 = 2.0 * zeta(-gamma);
    let c2 = zeta(-gamma - 2.0);
    let c4 = 2.0 * zeta(-gamma - 4.0) / 24.0;
    let c6 = 2.0 * zeta(-gamma - 6.0) / 720.0;
    let d4 = c4 - c2 / 12.0;
    let d6 = c2 / 90.0 - c4 / 6.0 + c6;
    let stencils: [(f64, &[f64]); 4] = [
        (c0, &[1.0]),
        (c2, &[1.0, -2.0, 1.0]),
        (d4, &[1.0, -4.0, 6.0, -4.0, 1.0]),
        (d6, &[1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0]),
    ];
    for (coef, stencil) in stencils {
        let half = stencil.len() / 2;
        for (i, w) in stencil.iter().enumerate() {
            weights[c + i - half] -= s * coef * w;
        }
    }
}

/// Quadrature weights for `int |x - center|^gamma g(x) dx` on the spatial grid.
///
/// The correction is applied only when `center` is the origin (the kink is
/// then on a node) and `n = 1`.
pub fn space_weights(grid: &Grid, gamma: f64, center: Point, rule: WeightRule) -> Vec<f64> {
    let vol = grid.cell_volume();
    let mut w: Vec<f64> = (0..grid.len())
        .map(|j| {
            let x = grid.node(j);
            let r = (x[0] - center[0]).hypot(x[1] - center[1]);
            vol * weight_power(r, gamma)
        })
        .collect();
    if rule == WeightRule::OriginCorrected
        && grid.dim() == 1
        && center == [0.0, 0.0]
        && needs_correction(gamma)
    {
        add_origin_correction(&mut w, grid.origin_index(), grid.spacing(), gamma);
    }
    w
}

/// Quadrature weights for `int |xi|^gamma G(xi) dxi` on the frequency grid.
pub fn freq_weights(grid: &Grid, gamma: f64, rule: WeightRule) -> Vec<f64> {
    let fg = FreqGrid::of(grid);
    let vol = fg.cell_volume();
    let mut w: Vec<f64> = (0..fg.len())
        .map(|k| vol * weight_power(fg.radius(k), gamma))
        .collect();
    if rule == WeightRule::OriginCorrected && grid.dim() == 1 && needs_correction(gamma) {
        add_origin_correction(&mut w, grid.origin_index(), fg.spacing(), gamma);
    }
    w
}

fn weight_power(r: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        1.0
    } else {
        r.powf(gamma)
    }
}

/// `(sum_j w_j |v_j|^e)^{1/e}`.
pub(crate) fn weighted_power_sum(values: &[num_complex::Complex64], weights: &[f64], e: f64) -> f64 {
    let s: f64 = values
        .iter()
        .zip(weights)
        .map(|(v, w)| {
            let a = v.norm();
            if a == 0.0 {
                0.0
            } else {
                w * a.powf(e)
            }
        })
        .sum();
    s.max(0.0).powf(1.0 / e)
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    Ok(())
}

/// `(h^n sum |f_j|^p)^{1/p}`, or `max |f_j|` for `p = inf`.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let vol = f.grid().cell_volume();
    let s: f64 = f.values().iter().map(|v| v.norm().powf(p)).sum();
    Ok((vol * s).powf(1.0 / p))
}

/// `(dxi^n sum |F_k|^p)^{1/p}`, or `max |F_k|` for `p = inf`.
pub fn spectral_lp_norm(f: &SpectralField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let vol = f.freq_grid().cell_volume();
    let s: f64 = f.values().iter().map(|v| v.norm().powf(p)).sum();
    Ok((vol * s).powf(1.0 / p))
}

fn check_weights(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "weight exponents must be positive, got alpha = {alpha}, beta = {beta}"
        )));
    }
    Ok(())
}

/// `|| |x|^alpha f ||_{L^beta}`.
pub fn weighted_space_norm(f: &Field, alpha: f64, beta: f64) -> Result<f64> {
    weighted_space_norm_with(f, alpha, beta, [0.0, 0.0], WeightRule::default())
}

pub fn weighted_space_norm_with(
    f: &Field,
    alpha: f64,
    beta: f64,
    center: Point,
    rule: WeightRule,
) -> Result<f64> {
    check_weights(alpha, beta)?;
    let w = space_weights(f.grid(), alpha * beta, center, rule);
    Ok(weighted_power_sum(f.values(), &w, beta))
}

/// `|| |xi|^beta f^ ||_{L^alpha}`.
pub fn weighted_freq_norm(f: &Field, alpha: f64, beta: f64) -> Result<f64> {
    weighted_freq_norm_with(f, alpha, beta, WeightRule::default())
}

pub fn weighted_freq_norm_with(f: &Field, alpha: f64, beta: f64, rule: WeightRule) -> Result<f64> {
    check_weights(alpha, beta)?;
    let spec = fourier_forward(f);
    let w = freq_weights(f.grid(), alpha * beta, rule);
    Ok(weighted_power_sum(spec.values(), &w, alpha))
}
