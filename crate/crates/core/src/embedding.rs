//! Sobolev, Hardy-Littlewood-Sobolev and Hausdorff-Young ratios on grids,
//! and the corpus proxy for the best Sobolev constant.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample, Field, FunctionSpec, Grid};
use crate::norms::{lp_norm, spectral_lp_norm, UncertaintyParams};
use crate::quad;
use crate::spectral::{apply_multiplier, fft_nd, fourier_forward, MultiplierSpec};
use crate::uncertainty::kappa_upper_bound;

/// Denominators below this are treated as zero.
pub const DENOMINATOR_FLOOR: f64 = 1e-14;

/// Exponents of the fractional Sobolev embedding `||f||_q <= C ||(-Delta)^{s/2} f||_p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EmbeddingSpec", into = "EmbeddingSpec")]
pub struct EmbeddingParams {
    s: f64,
    p: f64,
    q: f64,
    n: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSpec {
    pub s: f64,
    pub p: f64,
    pub n: usize,
}

impl TryFrom<EmbeddingSpec> for EmbeddingParams {
    type Error = Error;
    fn try_from(e: EmbeddingSpec) -> Result<Self> {
        EmbeddingParams::new(e.s, e.p, e.n)
    }
}

impl From<EmbeddingParams> for EmbeddingSpec {
    fn from(e: EmbeddingParams) -> Self {
        EmbeddingSpec { s: e.s, p: e.p, n: e.n }
    }
}

impl EmbeddingParams {
    /// Requires `0 < s < 1` and `1 < p < n/s`; `q = np / (n - sp)`.
    pub fn new(s: f64, p: f64, n: usize) -> Result<Self> {
        if !(n == 1 || n == 2) {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {n}")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {s}")));
        }
        let nf = n as f64;
        if !(p > 1.0 && s * p < nf) {
            return Err(Error::InvalidParameter(format!(
                "p must lie in (1, n/s) = (1, {}), got {p}",
                nf / s
            )));
        }
        Ok(EmbeddingParams {
            s,
            p,
            q: nf * p / (nf - s * p),
            n,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

fn check_dim(grid: &Grid, n: usize) -> Result<()> {
    if grid.dim() != n {
        return Err(Error::InvalidParameter(format!(
            "field is {}-dimensional, parameters are for n = {n}",
            grid.dim()
        )));
    }
    Ok(())
}

/// `||f||_q / ||(-Delta)^{s/2} f||_p`.
pub fn sobolev_ratio(f: &Field, params: &EmbeddingParams) -> Result<f64> {
    check_dim(f.grid(), params.n)?;
    let d = apply_multiplier(f, &MultiplierSpec::FracLaplacian { gamma: params.s })?;
    let den = lp_norm(&d, params.p)?;
    if den < DENOMINATOR_FLOOR {
        return Err(Error::Degenerate(format!("||(-Delta)^(s/2) f||_p = {den:e}")));
    }
    Ok(lp_norm(f, params.q)? / den)
}

/// Exponents of `|| |x|^{-lambda} * f ||_q <= C ||f||_p`.
///
/// The scaling relation is `1/q = 1/p - (n - lambda)/n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HlsParams {
    pub lambda_exp: f64,
    pub p: f64,
    pub q: f64,
    pub n: usize,
}

impl HlsParams {
    /// Derives `q` from `lambda_exp`, `p` and `n`.
    pub fn new(lambda_exp: f64, p: f64, n: usize) -> Result<Self> {
        let nf = n as f64;
        let inv_q = 1.0 / p - (nf - lambda_exp) / nf;
        let h = HlsParams {
            lambda_exp,
            p,
            q: 1.0 / inv_q,
            n,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let nf = self.n as f64;
        if !(self.n == 1 || self.n == 2) {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {}", self.n)));
        }
        if !(self.lambda_exp > 0.0 && self.lambda_exp < nf) {
            return Err(Error::InvalidParameter(format!(
                "kernel exponent must lie in (0, n), got {}",
                self.lambda_exp
            )));
        }
        if !(1.0 < self.p && self.p < self.q && self.q.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 1 < p < q < inf, got p = {}, q = {}",
                self.p, self.q
            )));
        }
        let gap = 1.0 / self.q - (1.0 / self.p - (nf - self.lambda_exp) / nf);
        if gap.abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "1/q = 1/p - (n - lambda)/n violated by {gap:e}"
            )));
        }
        Ok(())
    }
}

/// Mean of `|x|^{-lambda}` over the grid cell centred at the origin.
fn origin_cell_average(h: f64, lambda: f64, n: usize) -> f64 {
    let a = 0.5 * h;
    if n == 1 {
        return a.powf(-lambda) / (1.0 - lambda);
    }
    // Eight copies of the triangle 0 <= y <= x <= a, in polar coordinates.
    let e = 2.0 - lambda;
    let inner = quad::integrate(|t: f64| (a / t.cos()).powf(e) / e, 0.0, PI / 4.0, 1e-13);
    8.0 * inner / (h * h)
}

/// Linear convolution `int |x - y|^{-lambda} f(y) dy` at the grid nodes,
/// with the kernel truncated to the doubled box.
pub fn riesz_kernel_convolution(f: &Field, lambda: f64) -> Field {
    let grid = *f.grid();
    let (n, m, h) = (grid.dim(), grid.points(), grid.spacing());
    let big = 2 * m;
    let total = big.pow(n as u32);
    let centre = origin_cell_average(h, lambda, n);
    let offset = |i: usize| -> f64 {
        let k = if i < m { i as f64 } else { i as f64 - big as f64 };
        k * h
    };
    let mut kernel = vec![Complex64::new(0.0, 0.0); total];
    let mut padded = vec![Complex64::new(0.0, 0.0); total];
    for idx in 0..total {
        let (i0, i1) = if n == 1 { (idx, 0) } else { (idx / big, idx % big) };
        let r = if n == 1 {
            offset(i0).abs()
        } else {
            offset(i0).hypot(offset(i1))
        };
        kernel[idx].re = if r == 0.0 { centre } else { r.powf(-lambda) };
        if i0 < m && i1 < m {
            let j = if n == 1 { i0 } else { i0 * m + i1 };
            padded[idx] = f.values()[j];
        }
    }
    fft_nd(&mut kernel, n, big, FftDirection::Forward);
    fft_nd(&mut padded, n, big, FftDirection::Forward);
    for (a, k) in padded.iter_mut().zip(&kernel) {
        *a *= k;
    }
    fft_nd(&mut padded, n, big, FftDirection::Inverse);
    let scale = grid.cell_volume() / total as f64;
    let out: Vec<Complex64> = (0..grid.len())
        .map(|j| {
            let [i0, i1] = grid.axis_indices(j);
            let idx = if n == 1 { i0 } else { i0 * big + i1 };
            padded[idx] * scale
        })
        .collect();
    Field::from_parts(grid, out)
}

/// `|| |x|^{-lambda} * f ||_q / ||f||_p` with the convolution restricted to the box.
pub fn hls_check(f: &Field, params: &HlsParams) -> Result<f64> {
    params.validate()?;
    check_dim(f.grid(), params.n)?;
    let den = lp_norm(f, params.p)?;
    if den < DENOMINATOR_FLOOR {
        return Err(Error::ZeroField);
    }
    let conv = riesz_kernel_convolution(f, params.lambda_exp);
    Ok(lp_norm(&conv, params.q)? / den)
}

/// `||f||_p - ||f^||_{p'}` for `p` in `[1, 2]`.
pub fn hausdorff_young_check(f: &Field, p: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p must lie in [1, 2], got {p}")));
    }
    let dual = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
    Ok(lp_norm(f, p)? - spectral_lp_norm(&fourier_forward(f), dual)?)
}

/// 20 Gaussians, 20 bumps and 60 seeded random Fourier fields.
pub fn default_corpus(n: usize) -> Vec<FunctionSpec> {
    let mut out = Vec::with_capacity(100);
    let at = |c: f64| if n == 1 { [c, 0.0] } else { [c, -0.5 * c] };
    for k in 0..20 {
        let width = 0.5 + 0.1 * k as f64;
        let centre = at(-1.0 + 0.1 * k as f64);
        out.push(FunctionSpec::gaussian(centre, width).expect("valid gaussian"));
    }
    for k in 0..20 {
        let radius = 1.0 + 0.1 * k as f64;
        let centre = at(0.5 - 0.05 * k as f64);
        out.push(FunctionSpec::bump(centre, radius).expect("valid bump"));
    }
    for seed in 0..60u64 {
        let modes = 4 + (seed as usize % 5) * 2;
        let decay = 0.5 + 0.25 * (seed % 4) as f64;
        out.push(FunctionSpec::random_fourier(seed, modes, decay).expect("valid series"));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusRow {
    pub spec_id: usize,
    pub kind: String,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoptReport {
    pub rows: Vec<CorpusRow>,
    /// Largest Sobolev ratio over the corpus.
    pub c_opt_proxy: f64,
    pub argmax: usize,
    /// Smallest J over the resolvable Gaussian dilates.
    pub kappa_proxy: f64,
    /// `c_opt_proxy / kappa_proxy`.
    pub ratio: f64,
}

/// Sobolev ratios over `corpus` next to the Gaussian upper bound for kappa.
///
/// Nothing is asserted about the pair.
pub fn copt_kappa_ratio(
    params: &EmbeddingParams,
    uparams: &UncertaintyParams,
    corpus: &[FunctionSpec],
    grid: &Grid,
) -> Result<CoptReport> {
    if corpus.is_empty() {
        return Err(Error::InvalidParameter("corpus is empty".into()));
    }
    let rows: Vec<CorpusRow> = corpus
        .par_iter()
        .enumerate()
        .map(|(id, spec)| -> Result<CorpusRow> {
            let f = sample(spec, grid)?;
            Ok(CorpusRow {
                spec_id: id,
                kind: spec.kind().to_string(),
                ratio: sobolev_ratio(&f, params)?,
            })
        })
        .collect::<Result<_>>()?;
    let (argmax, c_opt_proxy) = rows
        .iter()
        .map(|r| (r.spec_id, r.ratio))
        .fold((0, f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best });
    let kappa_proxy = kappa_upper_bound(uparams, grid)?;
    Ok(CoptReport {
        rows,
        c_opt_proxy,
        argmax,
        kappa_proxy,
        ratio: c_opt_proxy / kappa_proxy,
    })
}

/// `spec_id,kind,ratio`.
pub fn write_corpus_csv<W: Write>(report: &CoptReport, mut w: W) -> io::Result<()> {
    writeln!(w, "spec_id,kind,ratio")?;
    for r in &report.rows {
        writeln!(w, "{},{},{:.16e}", r.spec_id, r.kind, r.ratio)?;
    }
    Ok(())
}
