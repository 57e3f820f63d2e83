//! Riemann zeta on the real line, needed for the origin correction of
//! `|x|^gamma`-weighted lattice sums.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

// B_{2j} / (2j)! for j = 1..=8
const BERNOULLI_OVER_FACT: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
];

/// `zeta(s)` for real `s != 1`.
///
/// Euler-Maclaurin summation for `s >= 1/2`, the functional equation below.
pub fn zeta(s: f64) -> f64 {
    if s == 1.0 {
        return f64::INFINITY;
    }
    if s == 0.0 {
        return -0.5;
    }
    if s < 0.5 {
        if s == s.floor() && (s as i64) % 2 == 0 && s < 0.0 {
            return 0.0;
        }
        let one_minus = 1.0 - s;
        return 2f64.powf(s)
            * PI.powf(s - 1.0)
            * (0.5 * PI * s).sin()
            * gamma(one_minus)
            * zeta(one_minus);
    }
    let n = 12.0_f64;
    let mut sum: f64 = (1..12).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // Rising product s (s+1) ... (s+2j-2) times N^{-s-2j+1}.
    let mut rising = s;
    let mut power = n.powf(-s - 1.0);
    for (j, c) in BERNOULLI_OVER_FACT.iter().enumerate() {
        sum += c * rising * power;
        let k = 2.0 * j as f64;
        rising *= (s + k + 1.0) * (s + k + 2.0);
        power /= n * n;
    }
    sum
}
