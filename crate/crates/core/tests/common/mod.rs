//! Shared oracles for the integration suites. Everything here is
//! independent of the library's implementation paths: exact rational
//! Rodrigues evaluation, Gauss-Legendre quadrature built from scratch,
//! and direct series/quadrature evaluations.

#![allow(dead_code)]

/// Legendre polynomial P_n(x) by the three-term recurrence (oracle-side
/// copy, kept separate from the crate implementation).
pub fn legendre_poly(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn legendre_poly_deriv(n: usize, x: f64) -> f64 {
    // (1 - x^2) P_n'(x) = n (P_{n-1}(x) - x P_n(x))
    n as f64 * (legendre_poly(n - 1, x) - x * legendre_poly(n, x)) / (1.0 - x * x)
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on
/// the Chebyshev initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let f = legendre_poly(n, x);
            let df = legendre_poly_deriv(n, x);
            let dx = f / df;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let df = legendre_poly_deriv(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * df * df);
    }
    (nodes, weights)
}

/// Exact-rational Rodrigues oracle for the normalized associated
/// Legendre factor sqrt((l-m)!/(l+m)!) P_l^m(x), valid for l <= 12.
///
/// P_l(x) = 2^{-l} sum_k (-1)^k C(l,k) C(2l-2k,l) x^{l-2k}; the m-th
/// derivative is taken on the exact integer coefficients, and
/// P_l^m = (-1)^m (1-x^2)^{m/2} d^m/dx^m P_l (Condon-Shortley phase).
pub fn rodrigues_normalized(l: u32, m: u32, x: f64) -> f64 {
    assert!(l <= 12 && m <= l);
    let l = l as i64;
    let m = m as i64;
    // integer numerator coefficients of 2^l * P_l, degree l down to 0
    let mut coeffs = vec![0i128; (l + 1) as usize];
    for k in 0..=(l / 2) {
        let sign = if k % 2 == 0 { 1i128 } else { -1i128 };
        let c = sign * binom(l, k) * binom(2 * l - 2 * k, l);
        coeffs[(l - 2 * k) as usize] = c;
    }
    // differentiate m times
    for _ in 0..m {
        for p in 0..coeffs.len() - 1 {
            coeffs[p] = coeffs[p + 1] * (p as i128 + 1);
        }
        let last = coeffs.len() - 1;
        coeffs[last] = 0;
    }
    // evaluate at x (Horner) and scale by 2^{-l}
    let mut acc = 0.0f64;
    for &c in coeffs.iter().rev() {
        acc = acc * x + c as f64;
    }
    acc /= 2f64.powi(l as i32);
    let phase = if m % 2 == 0 { 1.0 } else { -1.0 };
    let plm = phase * (1.0 - x * x).powf(m as f64 / 2.0) * acc;
    // sqrt((l-m)!/(l+m)!) as an exact u128 ratio
    let num = factorial_u128((l - m) as u32) as f64;
    let den = factorial_u128((l + m) as u32) as f64;
    (num / den).sqrt() * plm
}

fn binom(n: i64, k: i64) -> i128 {
    let mut acc = 1i128;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

fn factorial_u128(n: u32) -> u128 {
    (1..=n as u128).product::<u128>().max(1)
}

/// Error function via the Abramowitz-Stegun 7.1.26 rational
/// approximation (absolute error < 1.5e-7).
pub fn erf(x: f64) -> f64 {
    let sign = x.signum();
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// One-sample KS distance against a continuous CDF.
pub fn ks_vs_cdf(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - f).abs());
    }
    d
}

/// Independent 2-d quadrature of the normalized annulus average of
/// e(<w, xi>) in the plane: trapezoid in angle (periodic, spectrally
/// accurate) times Gauss-Legendre in radius.
pub fn annulus_kernel_2d(inner: f64, r: f64) -> f64 {
    let n_theta = 2048usize;
    let (gl_nodes, gl_weights) = gauss_legendre(64);
    let mut acc = 0.0;
    for it in 0..n_theta {
        let theta = it as f64 * 2.0 * std::f64::consts::PI / n_theta as f64;
        let ct = theta.cos();
        let mut radial = 0.0;
        for (s, w) in gl_nodes.iter().zip(gl_weights.iter()) {
            // map [-1, 1] -> [inner, 1]
            let rad = 0.5 * (1.0 + inner) + 0.5 * (1.0 - inner) * s;
            radial += w * rad * (2.0 * std::f64::consts::PI * r * rad * ct).cos();
        }
        acc += radial * 0.5 * (1.0 - inner);
    }
    let area = std::f64::consts::PI * (1.0 - inner * inner);
    acc * (2.0 * std::f64::consts::PI / n_theta as f64) / area
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Least-squares slope of y against x.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
