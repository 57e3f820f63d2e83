//! Minimizers of the uncertainty functional on the unit `L^p` sphere,
//! stationarity residuals, and alignment modulo dilations and translations.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample, Field, FunctionSpec, Grid, Point};
use crate::norms::{freq_weights, lp_norm, space_weights, UncertaintyParams, WeightRule};
use crate::spectral::{fourier_forward, fourier_inverse, FreqGrid, SpectralField};
use crate::uncertainty::UncertaintyBreakdown;

/// Relative tolerance on `||f||_p = 1` for routines that need unit fields.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-8;
/// Admissible dilation range in [`align_to`].
pub const LAMBDA_RANGE: (f64, f64) = (0.125, 8.0);

/// `|v|^{e-2} v`, with the removable singularity at zero filled in.
fn signed_power(v: Complex64, e: f64) -> Complex64 {
    let a = v.norm();
    if a == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        v * a.powf(e - 2.0)
    }
}

fn power_sum(values: &[Complex64], weights: &[f64], e: f64) -> f64 {
    values
        .iter()
        .zip(weights)
        .map(|(v, w)| {
            let a = v.norm();
            if a == 0.0 { 0.0 } else { w * a.powf(e) }
        })
        .sum()
}

/// The discrete functional on a fixed grid with precomputed weights.
#[derive(Clone, Debug)]
pub struct Functional {
    params: UncertaintyParams,
    grid: Grid,
    w_space: Vec<f64>,
    w_freq: Vec<f64>,
}

impl Functional {
    pub fn new(params: UncertaintyParams, grid: Grid, rule: WeightRule) -> Result<Self> {
        params.validate()?;
        if grid.dim() != params.n {
            return Err(Error::InvalidParameter(format!(
                "grid has dimension {}, parameters have n = {}",
                grid.dim(),
                params.n
            )));
        }
        let gamma = params.gamma();
        Ok(Functional {
            params,
            grid,
            w_space: space_weights(&grid, gamma, [0.0, 0.0], rule),
            w_freq: freq_weights(&grid, gamma, rule),
        })
    }

    pub fn params(&self) -> &UncertaintyParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn check(&self, f: &Field) -> Result<()> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        if f.is_zero() {
            return Err(Error::ZeroField);
        }
        Ok(())
    }

    fn parts(&self, f: &Field, spec: &SpectralField) -> UncertaintyBreakdown {
        let UncertaintyParams { alpha, beta, p, .. } = self.params;
        let a = power_sum(f.values(), &self.w_space, beta).max(0.0).powf(1.0 / beta);
        let b = power_sum(spec.values(), &self.w_freq, alpha).max(0.0).powf(1.0 / alpha);
        let vol = self.grid.cell_volume();
        let lp = (vol * f.values().iter().map(|v| v.norm().powf(p)).sum::<f64>()).powf(1.0 / p);
        let j = a.powf(self.params.weight_a()) * b.powf(self.params.weight_b()) / lp;
        UncertaintyBreakdown { a, b, lp, j }
    }

    pub fn value(&self, f: &Field) -> Result<UncertaintyBreakdown> {
        self.check(f)?;
        let br = self.parts(f, &fourier_forward(f));
        if !br.j.is_finite() {
            return Err(Error::NonFinite(format!("J = {}", br.j)));
        }
        Ok(br)
    }

    /// Value and gradient in the real pairing `h^n sum Re(conj(u) v)`.
    pub fn value_and_gradient(&self, f: &Field) -> Result<(UncertaintyBreakdown, Field)> {
        self.check(f)?;
        let UncertaintyParams { alpha, beta, p, .. } = self.params;
        if alpha <= 1.0 || beta <= 1.0 || p <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "gradient needs alpha, beta, p > 1 (got {alpha}, {beta}, {p}); the norms are not differentiable otherwise"
            )));
        }
        let spec = fourier_forward(f);
        let br = self.parts(f, &spec);
        if !(br.a > 0.0 && br.b > 0.0) {
            return Err(Error::Degenerate(format!("A = {}, B = {}", br.a, br.b)));
        }
        let vol = self.grid.cell_volume();
        let fvol = FreqGrid::of(&self.grid).cell_volume();
        let g_freq: Vec<Complex64> = spec
            .values()
            .iter()
            .zip(&self.w_freq)
            .map(|(v, w)| signed_power(*v, alpha) * (w / fvol))
            .collect();
        let gb = fourier_inverse(&SpectralField::from_parts(*spec.freq_grid(), g_freq));
        let ca = self.params.weight_a() * br.a.powf(-beta);
        let cb = self.params.weight_b() * br.b.powf(-alpha);
        let cp = br.lp.powf(-p);
        let grad = f
            .values()
            .iter()
            .zip(&self.w_space)
            .zip(gb.values())
            .map(|((v, w), gbv)| {
                let ga = signed_power(*v, beta) * (w / vol);
                let gp = signed_power(*v, p);
                (ga * ca + gbv * cb - gp * cp) * br.j
            })
            .collect();
        Ok((br, Field::from_parts(self.grid, grad)))
    }

    /// Gradient with the normal component `|f|^{p-2} f` removed.
    pub fn tangent_gradient(&self, f: &Field) -> Result<(UncertaintyBreakdown, Field)> {
        let (br, g) = self.value_and_gradient(f)?;
        Ok((br, project_tangent(f, &g, self.params.p)?))
    }
}

fn project_tangent(f: &Field, g: &Field, p: f64) -> Result<Field> {
    let normal = f.map(|v| signed_power(v, p));
    let nn = normal.inner_re(&normal)?;
    if nn == 0.0 {
        return Ok(g.clone());
    }
    g.add_scaled(-g.inner_re(&normal)? / nn, &normal)
}

fn l2(f: &Field) -> f64 {
    f.inner_re(f).expect("same grid").sqrt()
}

/// Gateaux derivative of J at `f` (default weights).
pub fn functional_gradient(f: &Field, params: &UncertaintyParams) -> Result<Field> {
    Ok(Functional::new(*params, *f.grid(), WeightRule::default())?
        .value_and_gradient(f)?
        .1)
}

/// Scales `f` to unit `L^p` norm.
pub fn normalize(f: &Field, p: f64) -> Result<Field> {
    let n = lp_norm(f, p)?;
    if n == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(f.scale(Complex64::new(1.0 / n, 0.0)))
}

/// Radially nonincreasing rearrangement of the positive part of `f`.
///
/// Values are sorted in decreasing order and laid onto nodes sorted by
/// distance to the origin (ties broken by index).
pub fn radial_rearrangement(f: &Field) -> Field {
    let g = *f.grid();
    let mut vals: Vec<f64> = f.values().iter().map(|v| v.re.max(0.0)).collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    let mut order: Vec<(f64, usize)> = (0..g.len())
        .map(|j| {
            let x = g.node(j);
            (x[0] * x[0] + x[1] * x[1], j)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
    for ((_, j), v) in order.into_iter().zip(vals) {
        out[j] = Complex64::new(v, 0.0);
    }
    Field::from_parts(g, out)
}

fn default_max_iters() -> usize {
    5000
}
fn default_step0() -> f64 {
    0.1
}
fn default_tol_grad() -> f64 {
    1e-6
}
fn default_armijo() -> f64 {
    1e-4
}
fn default_shrink() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeConfig {
    pub params: UncertaintyParams,
    pub grid: Grid,
    pub init: FunctionSpec,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_step0")]
    pub step0: f64,
    #[serde(default = "default_tol_grad")]
    pub tol_grad: f64,
    /// Period of the rearrangement step; 0 disables it.
    #[serde(default)]
    pub symmetrize_every: usize,
    /// Recorded with the result; random initial data carry their own seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_armijo")]
    pub armijo_c: f64,
    #[serde(default = "default_shrink")]
    pub shrink: f64,
    #[serde(default)]
    pub weight_rule: WeightRule,
}

impl MinimizeConfig {
    pub fn new(params: UncertaintyParams, grid: Grid, init: FunctionSpec) -> Self {
        MinimizeConfig {
            params,
            grid,
            init,
            max_iters: default_max_iters(),
            step0: default_step0(),
            tol_grad: default_tol_grad(),
            symmetrize_every: 0,
            seed: 0,
            armijo_c: default_armijo(),
            shrink: default_shrink(),
            weight_rule: WeightRule::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.init.validate()?;
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.max_iters < 1 {
            return bad("max_iters must be >= 1");
        }
        if !(self.step0 > 0.0) {
            return bad("step0 must be > 0");
        }
        if !(self.tol_grad > 0.0) {
            return bad("tol_grad must be > 0");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub grad_norm: f64,
    /// Accepted step (0 for the final record).
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeResult {
    /// Candidate extremizer, real and of unit `L^p` norm.
    pub field: Field,
    pub j_final: f64,
    pub breakdown: UncertaintyBreakdown,
    pub history: Vec<IterationRecord>,
    pub el_residual: f64,
    pub grad_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Line search could not decrease J before convergence.
    pub stalled: bool,
    /// Rearrangement steps rejected because J rose by more than 1e-10.
    pub rearrangement_rejections: usize,
    pub seed: u64,
}

impl MinimizeResult {
    pub fn j_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.j).collect()
    }

    pub fn summary(&self) -> MinimizeSummary {
        MinimizeSummary {
            j_final: self.j_final,
            a: self.breakdown.a,
            b: self.breakdown.b,
            lp: self.breakdown.lp,
            el_residual: self.el_residual,
            grad_norm: self.grad_norm,
            converged: self.converged,
            iterations: self.iterations,
            stalled: self.stalled,
            rearrangement_rejections: self.rearrangement_rejections,
            seed: self.seed,
        }
    }
}

/// Scalar part of a [`MinimizeResult`] for persistence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimizeSummary {
    #[serde(rename = "J_final")]
    pub j_final: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub lp: f64,
    pub el_residual: f64,
    pub grad_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub stalled: bool,
    pub rearrangement_rejections: usize,
    pub seed: u64,
}

/// Writes `iter, J, grad_norm, step`.
pub fn write_history_csv<W: Write>(history: &[IterationRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "iter,J,grad_norm,step")?;
    for r in history {
        writeln!(w, "{},{:.16e},{:.16e},{:.16e}", r.iter, r.j, r.grad_norm, r.step)?;
    }
    Ok(())
}

/// Projected gradient descent on `||f||_p = 1`.
///
/// Each step moves along the negative tangent gradient and renormalizes. The
/// trial step is the Barzilai-Borwein length `<s,s>/<s,y>` (doubling the
/// last accepted step when that is unavailable), shrunk until the Armijo
/// condition holds. Accepted steps never raise J by more than `1e-14 J`.
pub fn minimize(config: &MinimizeConfig) -> Result<MinimizeResult> {
    config.validate()?;
    let p = config.params.p;
    let functional = Functional::new(config.params, config.grid, config.weight_rule)?;
    let mut f = normalize(&sample(&config.init, &config.grid)?.real_part(), p)?;
    let (mut br, mut g) = functional.tangent_gradient(&f)?;
    let j0 = br.j;
    let mut history = Vec::new();
    let mut prev: Option<(Field, Field)> = None;
    let mut last_step = config.step0;
    let mut converged = false;
    let mut stalled = false;
    let mut rejections = 0;
    let mut iterations = 0;

    for iter in 0..config.max_iters {
        let gnorm = l2(&g);
        if gnorm < config.tol_grad {
            converged = true;
            break;
        }
        let mut step = match &prev {
            None => config.step0,
            Some((fp, gp)) => {
                let s = f.sub(fp)?;
                let y = g.sub(gp)?;
                let sy = s.inner_re(&y)?;
                if sy > 0.0 {
                    s.inner_re(&s)? / sy
                } else {
                    2.0 * last_step
                }
            }
        }
        .clamp(1e-12, 1e12);

        let slack = 1e-14 * br.j;
        let mut accepted = None;
        let mut trial_j = br.j;
        for _ in 0..80 {
            let trial = normalize(&f.add_scaled(-step, &g)?.real_part(), p)?;
            let tb = functional.value(&trial)?;
            trial_j = tb.j;
            if tb.j <= br.j - config.armijo_c * step * gnorm * gnorm + slack {
                accepted = Some(trial);
                break;
            }
            step *= config.shrink;
        }
        let Some(mut next) = accepted else {
            if trial_j > 10.0 * j0 {
                return Err(Error::Diverged(format!(
                    "J = {trial_j} after line-search failure at iteration {iter} (initial {j0})"
                )));
            }
            stalled = true;
            break;
        };
        history.push(IterationRecord { iter, j: br.j, grad_norm: gnorm, step });
        last_step = step;

        let mut rearranged = false;
        if config.symmetrize_every > 0 && (iter + 1) % config.symmetrize_every == 0 {
            let r = normalize(&radial_rearrangement(&next), p)?;
            if functional.value(&r)?.j <= functional.value(&next)?.j + 1e-10 {
                next = r;
                rearranged = true;
            } else {
                rejections += 1;
            }
        }

        let (nb, ng) = functional.tangent_gradient(&next)?;
        // A rearranged iterate is not a gradient step; restart the step model.
        prev = if rearranged { None } else { Some((f, g)) };
        f = next;
        br = nb;
        g = ng;
        iterations = iter + 1;
    }
    // J is even in f; report the representative whose largest value is positive.
    let peak = f
        .values()
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .map_or(0.0, |v| v.re);
    if peak < 0.0 {
        f = f.scale(Complex64::new(-1.0, 0.0));
        g = g.scale(Complex64::new(-1.0, 0.0));
    }
    let grad_norm = l2(&g);
    history.push(IterationRecord { iter: iterations, j: br.j, grad_norm, step: 0.0 });
    let el = el_residual_with(&f, &functional)?;
    Ok(MinimizeResult {
        j_final: br.j,
        breakdown: br,
        field: f,
        history,
        el_residual: el,
        grad_norm,
        converged,
        iterations,
        stalled,
        rearrangement_rejections: rejections,
        seed: config.seed,
    })
}

/// Right-hand side of the stationarity equation in its specialized form
/// `b/(a+b) |x|^{2 alpha} f B^{a/(a+b)} + a/(a+b) F^{-1}(|xi|^{2 beta} f^) A^{b/(a+b)}`,
/// meaningful when all exponents equal 2.
pub fn specialized_el_rhs(f: &Field, params: &UncertaintyParams) -> Result<Field> {
    let func = Functional::new(*params, *f.grid(), WeightRule::Nodal)?;
    let br = func.value(f)?;
    let UncertaintyParams { alpha, beta, .. } = *params;
    let g = *f.grid();
    let mut spec = fourier_forward(f);
    let fg = FreqGrid::of(&g);
    let vals: Vec<Complex64> = spec
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| v * fg.radius(k).powf(2.0 * beta))
        .collect();
    spec = SpectralField::from_parts(fg, vals);
    let freq_term = fourier_inverse(&spec);
    let wa = params.weight_a();
    let wb = params.weight_b();
    let out = f
        .values()
        .iter()
        .enumerate()
        .zip(freq_term.values())
        .map(|((j, v), ft)| {
            v * (wa * g.radius(j).powf(2.0 * alpha) * br.b.powf(wb)) + ft * (wb * br.a.powf(wa))
        })
        .collect();
    Ok(Field::from_parts(g, out))
}

/// Stationarity residual of a unit-norm field.
///
/// At `(alpha, beta, p) = (2, 2, 2)` this is `||R - mu f||_2 / ||R||_2` with
/// `R` from [`specialized_el_rhs`] and `mu = <f, R>/<f, f>`. Elsewhere it is
/// the `L^2` norm of the tangent gradient.
pub fn el_residual(f: &Field, params: &UncertaintyParams) -> Result<f64> {
    el_residual_with(f, &Functional::new(*params, *f.grid(), WeightRule::default())?)
}

fn el_residual_with(f: &Field, func: &Functional) -> Result<f64> {
    let params = func.params();
    let norm = lp_norm(f, params.p)?;
    if (norm - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "residual needs a unit L^p field, got norm {norm}"
        )));
    }
    if params.alpha == 2.0 && params.beta == 2.0 && params.p == 2.0 {
        let rhs = specialized_el_rhs(f, params)?;
        let mu = f.inner_re(&rhs)? / f.inner_re(f)?;
        let r = rhs.add_scaled(-mu, f)?;
        let den = l2(&rhs);
        if den == 0.0 {
            return Err(Error::Degenerate("stationarity right-hand side vanishes".into()));
        }
        return Ok(l2(&r) / den);
    }
    Ok(l2(&func.tangent_gradient(f)?.1))
}

/// Band-limited interpolant of a field, evaluated under the group action.
///
/// Uses `f(y) = dxi^n sum_k F_k exp(2 pi i y xi_k)` over the modes whose
/// magnitude exceeds `1e-14` of the peak; the unpaired Nyquist mode enters as
/// a cosine so real data stay real. Points outside the box evaluate to zero.
struct Interpolant {
    grid: Grid,
    /// Per significant mode: flat index and coefficient.
    modes: Vec<(usize, Complex64)>,
}

impl Interpolant {
    fn new(f: &Field) -> Self {
        let spec = fourier_forward(f);
        let peak = spec.max_abs();
        let modes = spec
            .values()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() > 1e-14 * peak)
            .map(|(k, v)| (k, *v * spec.freq_grid().cell_volume()))
            .collect();
        Interpolant { grid: *f.grid(), modes }
    }

    fn axis_factor(&self, k_axis: usize, y: f64) -> Complex64 {
        let fg = FreqGrid::of(&self.grid);
        let xi = fg.coord(k_axis);
        if k_axis == 0 {
            Complex64::new((2.0 * PI * y * xi).cos(), 0.0)
        } else {
            Complex64::from_polar(1.0, 2.0 * PI * y * xi)
        }
    }

    /// Samples of `lambda^{n/p} f(lambda (x - x0))` at every node.
    fn transformed(&self, lambda: f64, x0: Point, p: f64) -> Field {
        let g = self.grid;
        let n = g.dim();
        let pts = g.points();
        let l = g.half_width();
        let pref = lambda.powf(n as f64 / p);
        let ys: [Vec<f64>; 2] = [
            (0..pts).map(|j| lambda * (g.coord(j) - x0[0])).collect(),
            (0..pts).map(|j| lambda * (g.coord(j) - x0[1])).collect(),
        ];
        let inside = |y: f64| (-l..l).contains(&y);
        let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
        if n == 1 {
            for (j, o) in out.iter_mut().enumerate() {
                let y = ys[0][j];
                if inside(y) {
                    *o = self.modes.iter().map(|(k, c)| c * self.axis_factor(*k, y)).sum::<Complex64>()
                        * pref;
                }
            }
        } else {
            // Separable: contract the second axis first, then the first.
            let mut partial = vec![Complex64::new(0.0, 0.0); pts * pts];
            for &(k, c) in &self.modes {
                let [k0, k1] = g.axis_indices(k);
                for (j1, &y1) in ys[1].iter().enumerate() {
                    if inside(y1) {
                        partial[k0 * pts + j1] += c * self.axis_factor(k1, y1);
                    }
                }
            }
            let rows: Vec<usize> = {
                let mut r: Vec<usize> = self.modes.iter().map(|(k, _)| g.axis_indices(*k)[0]).collect();
                r.sort_unstable();
                r.dedup();
                r
            };
            for (j0, &y0) in ys[0].iter().enumerate() {
                if !inside(y0) {
                    continue;
                }
                for &k0 in &rows {
                    let e = self.axis_factor(k0, y0) * pref;
                    for j1 in 0..pts {
                        out[j0 * pts + j1] += partial[k0 * pts + j1] * e;
                    }
                }
            }
        }
        Field::from_parts(g, out)
    }
}

/// `lambda^{n/p} f(lambda (x - x0))` by band-limited resampling.
pub fn resample(f: &Field, lambda: f64, x0: Point, p: f64) -> Field {
    Interpolant::new(f).transformed(lambda, x0, p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentResult {
    pub lambda_opt: f64,
    pub x0_opt: Point,
    /// `||g - (f0)_{lambda, x0}||_p`.
    pub residual: f64,
    /// The transformed reference at the optimum.
    pub aligned: Field,
    pub evaluations: usize,
}

fn second_moment_spread(f: &Field, p: f64) -> (Point, f64) {
    let g = f.grid();
    let mut m = 0.0;
    let mut c = [0.0, 0.0];
    for (j, v) in f.values().iter().enumerate() {
        let w = v.norm().powf(p);
        let x = g.node(j);
        m += w;
        c[0] += w * x[0];
        c[1] += w * x[1];
    }
    c = [c[0] / m, c[1] / m];
    let mut s = 0.0;
    for (j, v) in f.values().iter().enumerate() {
        let x = g.node(j);
        s += v.norm().powf(p) * ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2));
    }
    (c, (s / m).sqrt())
}

/// Translation maximizing the real cross-correlation of `g` with `h`.
fn correlation_peak(g: &Field, h: &Field) -> Point {
    let gs = fourier_forward(g);
    let hs = fourier_forward(h);
    let prod: Vec<Complex64> = gs
        .values()
        .iter()
        .zip(hs.values())
        .map(|(a, b)| a * b.conj())
        .collect();
    let corr = fourier_inverse(&SpectralField::from_parts(*gs.freq_grid(), prod));
    let (best, _) = corr
        .values()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
        .expect("non-empty");
    g.grid().node(best)
}

/// Best `lambda^{n/p} f0(lambda (x - x0))` approximation of `g` in `L^p`.
///
/// `lambda` is searched in [`LAMBDA_RANGE`]. The starting translation is the
/// cross-correlation peak, the starting dilation the ratio of second-moment
/// spreads; both are refined jointly by Nelder-Mead on `(log lambda, x0)`.
/// The identity is always a candidate.
pub fn align_to(g: &Field, f0: &Field, p: f64) -> Result<AlignmentResult> {
    g.check_same_grid(f0)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must be finite and >= 1, got {p}")));
    }
    for (name, f) in [("target", g), ("reference", f0)] {
        let n = lp_norm(f, p)?;
        if (n - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "alignment needs unit L^p fields; {name} has norm {n}"
            )));
        }
    }
    let grid = *g.grid();
    let n = grid.dim();
    let interp = Interpolant::new(f0);
    let vol = grid.cell_volume();
    let dist_p = |h: &Field| -> f64 {
        vol * g
            .values()
            .iter()
            .zip(h.values())
            .map(|(a, b)| (a - b).norm().powf(p))
            .sum::<f64>()
    };
    let identity = dist_p(f0);
    if identity == 0.0 {
        return Ok(AlignmentResult {
            lambda_opt: 1.0,
            x0_opt: [0.0, 0.0],
            residual: 0.0,
            aligned: f0.clone(),
            evaluations: 0,
        });
    }

    let (_, sg) = second_moment_spread(g, p);
    let (_, sf) = second_moment_spread(f0, p);
    let lambda0 = (sf / sg).clamp(LAMBDA_RANGE.0, LAMBDA_RANGE.1);
    let shift0 = correlation_peak(g, &interp.transformed(lambda0, [0.0, 0.0], p));

    let (lo, hi) = (LAMBDA_RANGE.0.ln(), LAMBDA_RANGE.1.ln());
    let l = grid.half_width();
    let unpack = |z: &[f64]| -> (f64, Point) {
        let x0 = if n == 1 { [z[1], 0.0] } else { [z[1], z[2]] };
        (z[0].exp(), x0)
    };
    let objective = |z: &[f64]| -> f64 {
        if z[0] < lo || z[0] > hi || z[1..].iter().any(|v| v.abs() > l) {
            return f64::INFINITY;
        }
        let (lambda, x0) = unpack(z);
        dist_p(&interp.transformed(lambda, x0, p))
    };
    let mut start = vec![lambda0.ln(), shift0[0]];
    if n == 2 {
        start.push(shift0[1]);
    }
    let mut scales = vec![0.1];
    scales.extend(std::iter::repeat_n(2.0 * grid.spacing(), n));
    let budget = 4000;
    let mut nm = nelder_mead(&objective, &start, &scales, budget);
    // One restart from the best point guards against a collapsed simplex.
    if nm.converged {
        let scales2: Vec<f64> = scales.iter().map(|s| s * 0.1).collect();
        let again = nelder_mead(&objective, &nm.x, &scales2, budget);
        let evals = nm.evaluations + again.evaluations;
        if again.value <= nm.value {
            nm = again;
        }
        nm.evaluations = evals;
    }
    let (lambda, x0) = unpack(&nm.x);
    if !nm.converged && nm.value >= identity {
        return Err(Error::AlignmentFailed {
            evaluations: nm.evaluations,
            best_residual: nm.value.powf(1.0 / p),
            lambda,
            x0,
        });
    }
    if nm.value >= identity {
        return Ok(AlignmentResult {
            lambda_opt: 1.0,
            x0_opt: [0.0, 0.0],
            residual: identity.powf(1.0 / p),
            aligned: f0.clone(),
            evaluations: nm.evaluations,
        });
    }
    if !nm.converged {
        return Err(Error::AlignmentFailed {
            evaluations: nm.evaluations,
            best_residual: nm.value.powf(1.0 / p),
            lambda,
            x0,
        });
    }
    Ok(AlignmentResult {
        lambda_opt: lambda,
        x0_opt: x0,
        residual: nm.value.max(0.0).powf(1.0 / p),
        aligned: interp.transformed(lambda, x0, p),
        evaluations: nm.evaluations,
    })
}

struct NelderMead {
    x: Vec<f64>,
    value: f64,
    evaluations: usize,
    converged: bool,
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2). Stops when the simplex diameter falls below 1e-10 or the
/// value spread below 1e-13 of the best value.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], scales: &[f64], budget: usize) -> NelderMead {
    let d = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..d {
        let mut x = start.to_vec();
        x[i] += scales[i];
        let v = f(&x);
        simplex.push((x, v));
    }
    let mut evals = d + 1;
    let mut converged = false;
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
    };
    while evals < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[d].1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < 1e-10 || (worst.is_finite() && worst - best <= 1e-13 * best.abs() + 1e-300) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|i| simplex[..d].iter().map(|(x, _)| x[i]).sum::<f64>() / d as f64)
            .collect();
        let xr = combine(&centroid, &simplex[d].0, -1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < best {
            let xe = combine(&centroid, &simplex[d].0, -2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = combine(&centroid, &xr, 0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = combine(&centroid, &simplex[d].0, 0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < worst.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.0 = combine(&x0, &v.0, 0.5);
                    v.1 = f(&v.0);
                }
                evals += d;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    NelderMead { x, value, evaluations: evals, converged }
}
