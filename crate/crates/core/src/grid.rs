//! Uniform periodic grids on `[-L, L)^n`, analytic test functions and their
//! exact sampling, rectangle-rule quadrature, and the translation/dilation
//! group acting on function descriptors.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane; one-dimensional problems use only the first slot.
pub type Point = [f64; 2];

/// Width of the Gaussian envelope carried by every random Fourier series.
pub const RANDOM_FOURIER_ENVELOPE: f64 = 2.0;
/// Frequency spacing between successive random Fourier modes.
pub const RANDOM_FOURIER_SPACING: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    dim: usize,
    points: usize,
    half_width: f64,
}

/// Serialized form of a [`Grid`]; validated on the way in.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub points: usize,
    pub half_width: f64,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(s: GridSpec) -> Result<Self> {
        make_grid(s.n, s.points, s.half_width)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            n: g.dim,
            points: g.points,
            half_width: g.half_width,
        }
    }
}

/// Builds the grid with `points` nodes per axis on `[-half_width, half_width)^n`.
pub fn make_grid(n: usize, points: usize, half_width: f64) -> Result<Grid> {
    if n != 1 && n != 2 {
        return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {n}")));
    }
    if points < 8 || !points.is_power_of_two() {
        return Err(Error::InvalidGrid(format!(
            "points per axis must be a power of two >= 8, got {points}"
        )));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::InvalidGrid(format!(
            "half-width must be positive, got {half_width}"
        )));
    }
    Ok(Grid {
        dim: n,
        points,
        half_width,
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Node spacing `2L/N`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Volume element `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of nodes `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `j` along one axis: `-L + j h`.
    pub fn coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Index of the node sitting at the origin along one axis.
    pub fn origin_index(&self) -> usize {
        self.points / 2
    }

    /// Per-axis indices of a flat index. Flat layout is row-major with the
    /// first coordinate slowest: `flat = i0 * N + i1`.
    pub fn axis_indices(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat / self.points, flat % self.points]
        }
    }

    /// Position of a node given its flat index.
    pub fn node(&self, flat: usize) -> Point {
        let [i0, i1] = self.axis_indices(flat);
        if self.dim == 1 {
            [self.coord(i0), 0.0]
        } else {
            [self.coord(i0), self.coord(i1)]
        }
    }

    /// Euclidean norm of the node position.
    pub fn radius(&self, flat: usize) -> f64 {
        let p = self.node(flat);
        p[0].hypot(p[1])
    }

    pub fn nodes(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |j| self.node(j))
    }

    /// Same box, twice the points per axis.
    pub fn refined(&self) -> Grid {
        Grid {
            points: self.points * 2,
            ..*self
        }
    }
}

/// Analytic profile underlying a [`FunctionSpec`], in its own coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// `exp(-pi |x - c|^2 / w^2)`
    Gaussian {
        #[serde(with = "point_serde", default)]
        center: Point,
        width: f64,
    },
    /// Gaussian times the plane wave `exp(2 pi i nu . (x - c))`.
    ModulatedGaussian {
        #[serde(with = "point_serde", default)]
        center: Point,
        width: f64,
        #[serde(with = "point_serde")]
        frequency: Point,
    },
    /// `exp(-1 / (1 - r^2))` for `r = |x - c| / radius < 1`, zero outside.
    Bump {
        #[serde(with = "point_serde", default)]
        center: Point,
        radius: f64,
    },
    /// Seeded real trigonometric series under a fixed Gaussian envelope.
    RandomFourier {
        seed: u64,
        mode_count: usize,
        decay_rate: f64,
    },
    /// Constant function, used for potentials.
    Constant { value: f64 },
}

fn one() -> f64 {
    1.0
}

/// Closed-form descriptor of a test function.
///
/// Evaluates to `amplitude * shape(scale * (x - shift))`. Translations and
/// dilations act on `shift`, `scale` and `amplitude` exactly, so transformed
/// specs are sampled without interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub shape: Shape,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default, with = "point_serde")]
    pub shift: Point,
}

impl FunctionSpec {
    pub fn new(shape: Shape) -> Result<Self> {
        let spec = FunctionSpec {
            shape,
            amplitude: 1.0,
            scale: 1.0,
            shift: [0.0, 0.0],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(center: Point, width: f64) -> Result<Self> {
        Self::new(Shape::Gaussian { center, width })
    }

    pub fn modulated_gaussian(center: Point, width: f64, frequency: Point) -> Result<Self> {
        Self::new(Shape::ModulatedGaussian {
            center,
            width,
            frequency,
        })
    }

    pub fn bump(center: Point, radius: f64) -> Result<Self> {
        Self::new(Shape::Bump { center, radius })
    }

    pub fn random_fourier(seed: u64, mode_count: usize, decay_rate: f64) -> Result<Self> {
        Self::new(Shape::RandomFourier {
            seed,
            mode_count,
            decay_rate,
        })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(Shape::Constant { value })
    }

    /// Same spec with the amplitude multiplied by `c`.
    pub fn scaled(mut self, c: f64) -> Self {
        self.amplitude *= c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match &self.shape {
            Shape::Gaussian { width, .. } | Shape::ModulatedGaussian { width, .. } => {
                if !(*width > 0.0) {
                    return bad(format!("gaussian width must be positive, got {width}"));
                }
            }
            Shape::Bump { radius, .. } => {
                if !(*radius > 0.0) {
                    return bad(format!("bump radius must be positive, got {radius}"));
                }
            }
            Shape::RandomFourier {
                mode_count,
                decay_rate,
                ..
            } => {
                if *mode_count < 1 {
                    return bad("random_fourier needs mode_count >= 1".into());
                }
                if !(*decay_rate >= 0.0) {
                    return bad(format!("decay rate must be >= 0, got {decay_rate}"));
                }
            }
            Shape::Constant { value } => {
                if !value.is_finite() {
                    return bad("constant must be finite".into());
                }
            }
        }
        if !self.amplitude.is_finite() {
            return bad("amplitude must be finite".into());
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return bad(format!("scale must be positive, got {}", self.scale));
        }
        if !self.shift.iter().all(|v| v.is_finite()) {
            return bad("shift must be finite".into());
        }
        Ok(())
    }

    /// Short label for reports.
    pub fn kind(&self) -> &'static str {
        match self.shape {
            Shape::Gaussian { .. } => "gaussian",
            Shape::ModulatedGaussian { .. } => "modulated_gaussian",
            Shape::Bump { .. } => "bump",
            Shape::RandomFourier { .. } => "random_fourier",
            Shape::Constant { .. } => "constant",
        }
    }

    /// Pointwise evaluator for dimension `n` (precomputes series coefficients).
    pub fn evaluator(&self, n: usize) -> Evaluator<'_> {
        let series = match self.shape {
            Shape::RandomFourier {
                seed,
                mode_count,
                decay_rate,
            } => Some(RandomSeries::new(seed, mode_count, decay_rate, n)),
            _ => None,
        };
        Evaluator { spec: self, series }
    }

    /// Value at a single point (convenience; rebuilds random coefficients).
    pub fn eval(&self, x: Point, n: usize) -> Complex64 {
        self.evaluator(n).eval(x)
    }
}

/// Coefficients of a seeded random Fourier series.
#[derive(Clone, Debug)]
struct RandomSeries {
    modes: Vec<(Point, f64, f64)>,
}

impl RandomSeries {
    fn new(seed: u64, mode_count: usize, decay_rate: f64, n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = (0..mode_count)
            .map(|m| {
                let magnitude = m as f64 * RANDOM_FOURIER_SPACING;
                let angle: f64 = rng.random::<f64>() * 2.0 * PI;
                let direction = if n == 1 {
                    [1.0, 0.0]
                } else {
                    [angle.cos(), angle.sin()]
                };
                let damp = (-decay_rate * m as f64).exp();
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                (
                    [magnitude * direction[0], magnitude * direction[1]],
                    a * damp,
                    b * damp,
                )
            })
            .collect();
        RandomSeries { modes }
    }

    fn eval(&self, y: Point) -> f64 {
        let r2 = y[0] * y[0] + y[1] * y[1];
        let envelope = (-PI * r2 / (RANDOM_FOURIER_ENVELOPE * RANDOM_FOURIER_ENVELOPE)).exp();
        let sum: f64 = self
            .modes
            .iter()
            .map(|(k, a, b)| {
                let phase = 2.0 * PI * (k[0] * y[0] + k[1] * y[1]);
                a * phase.cos() + b * phase.sin()
            })
            .sum();
        envelope * sum
    }
}

/// Borrowing evaluator returned by [`FunctionSpec::evaluator`].
pub struct Evaluator<'a> {
    spec: &'a FunctionSpec,
    series: Option<RandomSeries>,
}

impl Evaluator<'_> {
    pub fn eval(&self, x: Point) -> Complex64 {
        let s = self.spec;
        let y = [
            s.scale * (x[0] - s.shift[0]),
            s.scale * (x[1] - s.shift[1]),
        ];
        let base = match &s.shape {
            Shape::Gaussian { center, width } => {
                Complex64::new(gaussian_profile(y, *center, *width), 0.0)
            }
            Shape::ModulatedGaussian {
                center,
                width,
                frequency,
            } => {
                let g = gaussian_profile(y, *center, *width);
                let phase = 2.0
                    * PI
                    * (frequency[0] * (y[0] - center[0]) + frequency[1] * (y[1] - center[1]));
                Complex64::from_polar(g, phase)
            }
            Shape::Bump { center, radius } => {
                let d = (y[0] - center[0]).hypot(y[1] - center[1]) / radius;
                if d < 1.0 {
                    Complex64::new((-1.0 / (1.0 - d * d)).exp(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Shape::RandomFourier { .. } => {
                let series = self.series.as_ref().expect("series built for random shape");
                Complex64::new(series.eval(y), 0.0)
            }
            Shape::Constant { value } => Complex64::new(*value, 0.0),
        };
        base * s.amplitude
    }
}

fn gaussian_profile(y: Point, center: Point, width: f64) -> f64 {
    let d0 = y[0] - center[0];
    let d1 = y[1] - center[1];
    (-PI * (d0 * d0 + d1 * d1) / (width * width)).exp()
}

/// Mass-preserving dilation `f -> lambda^{n/p} f(lambda x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DilationParams {
    pub lambda: f64,
    pub p: f64,
    /// Dimension entering the prefactor exponent `n/p`.
    pub n: usize,
}

impl DilationParams {
    pub fn new(lambda: f64, p: f64, n: usize) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dilation factor must be positive, got {lambda}"
            )));
        }
        if !(p >= 1.0) {
            return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
        }
        if n != 1 && n != 2 {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {n}")));
        }
        Ok(DilationParams { lambda, p, n })
    }

    /// `lambda^{n/p}`; zero exponent for `p = inf`.
    pub fn prefactor(&self) -> f64 {
        if self.p.is_infinite() {
            1.0
        } else {
            self.lambda.powf(self.n as f64 / self.p)
        }
    }
}

/// Spec evaluating to `old(x - x0)`.
pub fn translate(spec: &FunctionSpec, x0: Point) -> FunctionSpec {
    let mut out = spec.clone();
    out.shift = [spec.shift[0] + x0[0], spec.shift[1] + x0[1]];
    out
}

/// Spec evaluating to `lambda^{n/p} old(lambda x)`.
pub fn dilate(spec: &FunctionSpec, d: DilationParams) -> FunctionSpec {
    if d.lambda == 1.0 {
        return spec.clone();
    }
    let mut out = spec.clone();
    out.amplitude = spec.amplitude * d.prefactor();
    out.scale = spec.scale * d.lambda;
    out.shift = [spec.shift[0] / d.lambda, spec.shift[1] / d.lambda];
    out
}

/// Complex samples of a function on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite(format!("field value at index {j}")));
        }
        Ok(Field { grid, values })
    }

    /// Constructor for internal paths that produce finite values by construction.
    pub(crate) fn from_parts(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Field::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field::from_parts(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: Complex64) -> Field {
        self.map(|v| v * c)
    }

    /// Drops imaginary parts.
    pub fn real_part(&self) -> Field {
        self.map(|v| Complex64::new(v.re, 0.0))
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field::from_parts(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b * c)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.add_scaled(-1.0, other)
    }

    /// Real L^2 pairing `h^n sum Re(conj(a) b)`.
    pub fn inner_re(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Samples `spec` at every node.
pub fn sample(spec: &FunctionSpec, grid: &Grid) -> Result<Field> {
    spec.validate()?;
    let ev = spec.evaluator(grid.dim());
    let values = grid.nodes().map(|x| ev.eval(x)).collect();
    Field::new(*grid, values)
}

/// Rectangle rule `h^n sum_j f(x_j)`.
pub fn integrate(f: &Field) -> Complex64 {
    let s: Complex64 = f.values.iter().sum();
    s * f.grid.cell_volume()
}

/// Fraction of `|f|^2` carried by nodes with `|x| > radius`.
pub fn tail_mass(f: &Field, radius: f64) -> f64 {
    let total: f64 = f.values.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let outside: f64 = f
        .values
        .iter()
        .enumerate()
        .filter(|(j, _)| f.grid.radius(*j) > radius)
        .map(|(_, v)| v.norm_sqr())
        .sum();
    outside / total
}

/// Largest modulus on the outermost ring of nodes relative to the peak.
///
/// Test functions are treated as supported inside the box when this is
/// below about `1e-12`.
pub fn boundary_tail(f: &Field) -> f64 {
    let peak = f.max_abs();
    if peak == 0.0 {
        return 0.0;
    }
    let g = f.grid;
    let last = g.points() - 1;
    let edge = f
        .values
        .iter()
        .enumerate()
        .filter(|(j, _)| {
            let [i0, i1] = g.axis_indices(*j);
            i0 == 0 || i0 == last || (g.dim() == 2 && (i1 == 0 || i1 == last))
        })
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max);
    edge / peak
}

/// Writes `index, x[, y], re, im` rows with 17 significant digits.
pub fn write_field_csv<W: Write>(f: &Field, mut w: W) -> io::Result<()> {
    let two_d = f.grid.dim() == 2;
    if two_d {
        writeln!(w, "index,x,y,re,im")?;
    } else {
        writeln!(w, "index,x,re,im")?;
    }
    for (j, v) in f.values.iter().enumerate() {
        let p = f.grid.node(j);
        if two_d {
            writeln!(w, "{j},{:.16e},{:.16e},{:.16e},{:.16e}", p[0], p[1], v.re, v.im)?;
        } else {
            writeln!(w, "{j},{:.16e},{:.16e},{:.16e}", p[0], v.re, v.im)?;
        }
    }
    Ok(())
}

/// Accepts a bare number (1-D) or a one/two-element array for a [`Point`].
pub mod point_serde {
    use super::Point;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Scalar(f64),
        List(Vec<f64>),
    }

    pub fn serialize<S: Serializer>(p: &Point, s: S) -> Result<S::Ok, S::Error> {
        p.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Point, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Scalar(v) => Ok([v, 0.0]),
            Repr::List(v) => match v.as_slice() {
                [a] => Ok([*a, 0.0]),
                [a, b] => Ok([*a, *b]),
                _ => Err(serde::de::Error::custom("point needs one or two coordinates")),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    fn g1(points: usize, l: f64) -> Grid {
        make_grid(1, points, l).unwrap()
    }

    #[test]
    fn grid_spacing_and_nodes() {
        let g = g1(8, 4.0);
        assert_eq!(g.spacing(), 1.0);
        let xs: Vec<f64> = (0..8).map(|j| g.coord(j)).collect();
        assert_eq!(xs, vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        let g2 = make_grid(2, 16, 8.0).unwrap();
        assert_eq!(g2.spacing(), 1.0);
        assert_eq!(g2.len(), 256);
        assert_eq!(g2.node(17), [-7.0, -7.0]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(make_grid(1, 6, 4.0), Err(Error::InvalidGrid(_))));
        assert!(make_grid(1, 4, 4.0).is_err());
        assert!(make_grid(1, 8, 0.0).is_err());
        assert!(make_grid(1, 8, -1.0).is_err());
        assert!(make_grid(3, 8, 1.0).is_err());
    }

    #[test]
    fn gaussian_samples_pointwise() {
        let g = g1(64, 4.0);
        let f = sample(&FunctionSpec::gaussian([0.0, 0.0], 1.0).unwrap(), &g).unwrap();
        for (j, v) in f.values().iter().enumerate() {
            let x = g.coord(j);
            assert!((v.re - (-PI * x * x).exp()).abs() <= 1e-13 * (-PI * x * x).exp());
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let g = g1(128, 4.0);
        let r = 1.3;
        let f = sample(&FunctionSpec::bump([0.0, 0.0], r).unwrap(), &g).unwrap();
        for (j, v) in f.values().iter().enumerate() {
            if g.coord(j).abs() >= r {
                assert_eq!(*v, Complex64::new(0.0, 0.0));
            } else {
                assert!(v.re > 0.0);
            }
        }
    }

    #[test]
    fn random_fourier_is_deterministic() {
        let g = make_grid(2, 32, 6.0).unwrap();
        let spec = FunctionSpec::random_fourier(7, 6, 0.3).unwrap();
        let a = sample(&spec, &g).unwrap();
        let b = sample(&spec, &g).unwrap();
        assert_eq!(a, b);
        let c = sample(&FunctionSpec::random_fourier(8, 6, 0.3).unwrap(), &g).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn integrate_examples() {
        let g = g1(64, 5.0);
        assert_eq!(integrate(&Field::zeros(g)), Complex64::new(0.0, 0.0));
        let ones = Field::from_real(g, &vec![1.0; 64]).unwrap();
        assert_eq!(integrate(&ones).re, 10.0);
        let g2 = make_grid(2, 16, 2.0).unwrap();
        let ones2 = Field::from_real(g2, &vec![1.0; 256]).unwrap();
        assert_eq!(integrate(&ones2).re, 16.0);

        // Reference from adaptive quadrature, not from the closed form alone.
        let reference = quad::integrate(|x| (-PI * x * x).exp(), -20.0, 20.0, 1e-14);
        assert!((reference - 1.0).abs() < 1e-13);
        let g = g1(4096, 20.0);
        let f = sample(&FunctionSpec::gaussian([0.0, 0.0], 1.0).unwrap(), &g).unwrap();
        assert!((integrate(&f).re - reference).abs() < 1e-12);
    }

    #[test]
    fn translate_examples() {
        let g0 = FunctionSpec::gaussian([0.0, 0.0], 1.0).unwrap();
        let t = translate(&g0, [2.0, 0.0]);
        assert_eq!(t.eval([2.0, 0.0], 1), g0.eval([0.0, 0.0], 1));
        let grid = g1(64, 8.0);
        assert_eq!(
            sample(&translate(&g0, [0.0, 0.0]), &grid).unwrap(),
            sample(&g0, &grid).unwrap()
        );
        let b = translate(&FunctionSpec::bump([0.0, 0.0], 1.0).unwrap(), [3.0, 0.0]);
        assert!(b.eval([3.5, 0.0], 1).re > 0.0);
        assert_eq!(b.eval([2.0, 0.0], 1).re, 0.0);
        assert_eq!(b.eval([4.0, 0.0], 1).re, 0.0);
        assert_eq!(b.eval([0.0, 0.0], 1).re, 0.0);
    }

    #[test]
    fn dilate_examples() {
        let g0 = FunctionSpec::gaussian([0.0, 0.0], 1.0).unwrap();
        assert_eq!(dilate(&g0, DilationParams::new(1.0, 2.0, 1).unwrap()), g0);
        let d = dilate(&g0, DilationParams::new(2.0, 2.0, 1).unwrap());
        for x in [-0.7, 0.0, 0.3, 1.1] {
            let expected = 2f64.sqrt() * (-4.0 * PI * x * x).exp();
            assert!((d.eval([x, 0.0], 1).re - expected).abs() <= 1e-15 * expected.max(1e-300));
        }
        assert!(DilationParams::new(0.0, 2.0, 1).is_err());
        assert!(DilationParams::new(1.0, 0.5, 1).is_err());
    }

    #[test]
    fn dilation_preserves_lp_norm() {
        let grid = g1(4096, 20.0);
        let spec = FunctionSpec::gaussian([0.3, 0.0], 1.0).unwrap();
        for p in [1.0, 2.0, 3.0] {
            let base = crate::norms::lp_norm(&sample(&spec, &grid).unwrap(), p).unwrap();
            for lambda in [0.5, 2.0, 4.0] {
                let d = dilate(&spec, DilationParams::new(lambda, p, 1).unwrap());
                let v = crate::norms::lp_norm(&sample(&d, &grid).unwrap(), p).unwrap();
                assert!((v / base - 1.0).abs() < 1e-12, "p={p} lambda={lambda}");
            }
        }
    }

    #[test]
    fn tail_diagnostics() {
        let grid = g1(256, 8.0);
        let f = sample(&FunctionSpec::gaussian([0.0, 0.0], 1.0).unwrap(), &grid).unwrap();
        assert!(boundary_tail(&f) < 1e-12);
        assert!(tail_mass(&f, 4.0) < 1e-20);
        let wide = sample(&FunctionSpec::gaussian([0.0, 0.0], 6.0).unwrap(), &grid).unwrap();
        assert!(boundary_tail(&wide) > 1e-3);
    }

    #[test]
    fn field_csv_layout() {
        let grid = g1(8, 4.0);
        let f = sample(&FunctionSpec::gaussian([0.0, 0.0], 1.0).unwrap(), &grid).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,x,re,im");
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[5], "4,0.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0");
    }

    #[test]
    fn spec_json_accepts_scalar_points() {
        let s: FunctionSpec = serde_json::from_str(
            r#"{"shape":{"kind":"gaussian","center":1.5,"width":2.0}}"#,
        )
        .unwrap();
        assert_eq!(
            s.shape,
            Shape::Gaussian {
                center: [1.5, 0.0],
                width: 2.0
            }
        );
        assert_eq!(s.amplitude, 1.0);
        let back = serde_json::to_string(&s).unwrap();
        assert_eq!(
            back,
            r#"{"shape":{"kind":"gaussian","center":[1.5,0.0],"width":2.0},"amplitude":1.0,"scale":1.0,"shift":[0.0,0.0]}"#
        );
        assert!(serde_json::from_str::<FunctionSpec>(r#"{"shape":{"kind":"bump","radius":1},"bogus":1}"#).is_err());
    }

    proptest::proptest! {
        #[test]
        fn dilations_compose(l1 in 0.3f64..3.0, l2 in 0.3f64..3.0, p in 1.0f64..4.0, x in -2.0f64..2.0) {
            let g0 = FunctionSpec::gaussian([0.4, 0.0], 1.0).unwrap();
            let d = |s: &FunctionSpec, l| dilate(s, DilationParams::new(l, p, 1).unwrap());
            let twice = d(&d(&g0, l1), l2).eval([x, 0.0], 1);
            let once = d(&g0, l1 * l2).eval([x, 0.0], 1);
            proptest::prop_assert!((twice - once).norm() <= 1e-14 * once.norm().max(1e-300));
        }

        #[test]
        fn translations_compose_and_keep_mass(a in -2.0f64..2.0, b in -2.0f64..2.0, p in 1.0f64..3.0) {
            let grid = g1(1024, 16.0);
            let g0 = FunctionSpec::gaussian([0.0, 0.0], 1.0).unwrap();
            let twice = sample(&translate(&translate(&g0, [a, 0.0]), [b, 0.0]), &grid).unwrap();
            let once = sample(&translate(&g0, [a + b, 0.0]), &grid).unwrap();
            for (u, v) in twice.values().iter().zip(once.values()) {
                proptest::prop_assert!((u - v).norm() <= 1e-14);
            }
            let mass = |f: &Field| integrate(&f.map(|z| Complex64::new(z.norm().powf(p), 0.0))).re;
            let m0 = mass(&sample(&g0, &grid).unwrap());
            proptest::prop_assert!((mass(&once) - m0).abs() <= 1e-12 * m0);
        }
    }
}
