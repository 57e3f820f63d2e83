//! Continuous Fourier transform `f^(xi) = int f(x) exp(-2 pi i x.xi) dx`
//! approximated on the grid, and Fourier multipliers.
//!
//! # Layout
//!
//! Spatial node `j` sits at `x_j = -L + j h`. Frequency node `k` sits at
//! `xi_k = (k - N/2) / (2L)`, so index 0 is the most negative frequency and
//! index `N/2` is zero. With `N/2` even the offset phases collapse to signs:
//!
//! ```text
//! F[k] = h^n (-1)^k  DFT[(-1)^j f_j][k]
//! f[j] = dxi^n (-1)^j IDFT[(-1)^k F_k][j]      (IDFT unnormalized)
//! ```
//!
//! In two dimensions the sign is `(-1)^(k0 + k1)` and transforms are applied
//! along both axes. Both maps are exact inverses and satisfy the discrete
//! Plancherel identity `h^n sum |f|^2 = dxi^n sum |F|^2`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Point};

/// Relative size of the zero mode tolerated by the Riesz potential.
pub const RIESZ_DC_TOLERANCE: f64 = 1e-10;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized transform of a row-major `size^dim` array.
pub(crate) fn fft_nd(buf: &mut [Complex64], dim: usize, size: usize, direction: FftDirection) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft(size, direction));
    if dim == 1 {
        plan.process(buf);
        return;
    }
    // Rows are contiguous.
    plan.process(buf);
    let mut column = vec![Complex64::new(0.0, 0.0); size];
    for c in 0..size {
        for r in 0..size {
            column[r] = buf[r * size + c];
        }
        plan.process(&mut column);
        for r in 0..size {
            buf[r * size + c] = column[r];
        }
    }
}

fn checkerboard(grid: &Grid, flat: usize) -> f64 {
    let [i0, i1] = grid.axis_indices(flat);
    if (i0 + i1) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Frequency nodes dual to a spatial [`Grid`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreqGrid {
    grid: Grid,
}

impl FreqGrid {
    pub fn of(grid: &Grid) -> Self {
        FreqGrid { grid: *grid }
    }

    pub fn spatial(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn points(&self) -> usize {
        self.grid.points()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `1/(2L)`.
    pub fn spacing(&self) -> f64 {
        0.5 / self.grid.half_width()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.grid.dim() as i32)
    }

    /// `N/(4L)`.
    pub fn nyquist(&self) -> f64 {
        self.grid.points() as f64 * 0.25 / self.grid.half_width()
    }

    pub fn coord(&self, k: usize) -> f64 {
        (k as f64 - (self.grid.points() / 2) as f64) * self.spacing()
    }

    pub fn node(&self, flat: usize) -> Point {
        let [k0, k1] = self.grid.axis_indices(flat);
        if self.grid.dim() == 1 {
            [self.coord(k0), 0.0]
        } else {
            [self.coord(k0), self.coord(k1)]
        }
    }

    pub fn radius(&self, flat: usize) -> f64 {
        let p = self.node(flat);
        p[0].hypot(p[1])
    }

    /// Flat index of the zero frequency.
    pub fn zero_index(&self) -> usize {
        let c = self.grid.points() / 2;
        if self.grid.dim() == 1 {
            c
        } else {
            c * self.grid.points() + c
        }
    }
}

/// Samples of `f^` on a [`FreqGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    freq: FreqGrid,
    values: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(freq: FreqGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != freq.len() {
            return Err(Error::InvalidParameter(format!(
                "spectral field has {} values, grid has {} nodes",
                values.len(),
                freq.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite(format!("spectral value at index {k}")));
        }
        Ok(SpectralField { freq, values })
    }

    pub(crate) fn from_parts(freq: FreqGrid, values: Vec<Complex64>) -> Self {
        SpectralField { freq, values }
    }

    pub fn freq_grid(&self) -> &FreqGrid {
        &self.freq
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Grid approximation of `f^` at every frequency node.
pub fn fourier_forward(f: &Field) -> SpectralField {
    let grid = *f.grid();
    let mut buf: Vec<Complex64> = f
        .values()
        .iter()
        .enumerate()
        .map(|(j, v)| v * checkerboard(&grid, j))
        .collect();
    fft_nd(&mut buf, grid.dim(), grid.points(), FftDirection::Forward);
    let vol = grid.cell_volume();
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= vol * checkerboard(&grid, k);
    }
    SpectralField::from_parts(FreqGrid::of(&grid), buf)
}

/// Exact inverse of [`fourier_forward`].
pub fn fourier_inverse(spec: &SpectralField) -> Field {
    let grid = *spec.freq.spatial();
    let mut buf: Vec<Complex64> = spec
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| v * checkerboard(&grid, k))
        .collect();
    fft_nd(&mut buf, grid.dim(), grid.points(), FftDirection::Inverse);
    let vol = spec.freq.cell_volume();
    for (j, v) in buf.iter_mut().enumerate() {
        *v *= vol * checkerboard(&grid, j);
    }
    Field::from_parts(grid, buf)
}

/// Fourier multiplier symbols.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MultiplierSpec {
    /// `(2 pi |xi|)^gamma`
    FracLaplacian { gamma: f64 },
    /// `(2 pi |xi|)^{-s}`, zero mode removed.
    Riesz { s: f64 },
    /// `exp(-i t (2 pi |xi|)^{2s})`
    SchrodingerPhase { s: f64, t: f64 },
}

impl MultiplierSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MultiplierSpec::FracLaplacian { gamma } => gamma >= 0.0 && gamma.is_finite(),
            MultiplierSpec::Riesz { s } => s > 0.0 && s.is_finite(),
            MultiplierSpec::SchrodingerPhase { s, t } => s > 0.0 && s.is_finite() && t.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad multiplier {self:?}")))
        }
    }

    /// Symbol at frequency magnitude `|xi|`.
    pub fn symbol(&self, xi: f64) -> Complex64 {
        let w = 2.0 * PI * xi;
        match *self {
            MultiplierSpec::FracLaplacian { gamma } => {
                if gamma == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(w.powf(gamma), 0.0)
                }
            }
            MultiplierSpec::Riesz { s } => {
                if xi == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(w.powf(-s), 0.0)
                }
            }
            MultiplierSpec::SchrodingerPhase { s, t } => {
                Complex64::from_polar(1.0, -t * w.powf(2.0 * s))
            }
        }
    }
}

/// Multiplies `f^` by the symbol at every frequency node, in place.
pub fn apply_symbol(spec: &mut SpectralField, m: &MultiplierSpec) -> Result<()> {
    m.validate()?;
    if let MultiplierSpec::Riesz { .. } = m {
        let dc = spec.values[spec.freq.zero_index()].norm();
        let allowed = RIESZ_DC_TOLERANCE * spec.max_abs();
        if dc > allowed {
            return Err(Error::RieszMean { dc, allowed });
        }
    }
    let freq = spec.freq;
    for (k, v) in spec.values.iter_mut().enumerate() {
        *v *= m.symbol(freq.radius(k));
    }
    Ok(())
}

/// `F^{-1}( m(xi) f^ )`.
pub fn apply_multiplier(f: &Field, m: &MultiplierSpec) -> Result<Field> {
    let mut spec = fourier_forward(f);
    apply_symbol(&mut spec, m)?;
    Ok(fourier_inverse(&spec))
}

/// Writes `index, xi[, eta], re, im` rows with 17 significant digits.
pub fn write_spectral_csv<W: Write>(f: &SpectralField, mut w: W) -> io::Result<()> {
    let two_d = f.freq.dim() == 2;
    if two_d {
        writeln!(w, "index,xi,eta,re,im")?;
    } else {
        writeln!(w, "index,xi,re,im")?;
    }
    for (k, v) in f.values.iter().enumerate() {
        let p = f.freq.node(k);
        if two_d {
            writeln!(w, "{k},{:.16e},{:.16e},{:.16e},{:.16e}", p[0], p[1], v.re, v.im)?;
        } else {
            writeln!(w, "{k},{:.16e},{:.16e},{:.16e}", p[0], v.re, v.im)?;
        }
    }
    Ok(())
}
