//! Gauss-Legendre rules, on the reference interval and mapped onto knot spans.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `n`-point Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> Result<(Vec<T>, Vec<T>)> {
    if n < 1 {
        return Err(Error::InvalidInput("quadrature order must be at least 1".into()));
    }
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-type initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes.into_iter().map(T::lit).collect(), weights.into_iter().map(T::lit).collect()))
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule: `points_per_span` Gauss points on every interval between
/// consecutive breakpoints.
pub fn span_rule<T: Real>(breakpoints: &[T], points_per_span: usize) -> Result<(Vec<T>, Vec<T>)> {
    let (xg, wg) = gauss_legendre::<T>(points_per_span)?;
    let half = T::lit(0.5);
    let mut nodes = Vec::with_capacity((breakpoints.len().saturating_sub(1)) * points_per_span);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = half * (a + b);
        let rad = half * (b - a);
        for (x, wt) in xg.iter().zip(&wg) {
            nodes.push(mid + rad * *x);
            weights.push(rad * *wt);
        }
    }
    Ok((nodes, weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre::<f64>(n).unwrap();
            for deg in 0..2 * n {
                let num: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((num - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
        assert!(gauss_legendre::<f64>(0).is_err());
    }

    #[test]
    fn span_rule_integrates_x_squared() {
        let (x, w) = span_rule(&[0.0, 0.3, 1.0], 2).unwrap();
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}
