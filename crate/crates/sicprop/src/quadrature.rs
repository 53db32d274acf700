//! Gauss-Legendre rules.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A rule mapped onto `[a, b]`, optionally split into equal panels.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn new(a: f64, b: f64, points: usize) -> Self {
        Self::composite(a, b, points, 1)
    }

    pub fn composite(a: f64, b: f64, points: usize, panels: usize) -> Self {
        let (x, w) = gauss_legendre(points);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(points * panels);
        let mut weights = Vec::with_capacity(points * panels);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 7, 64, 256, 1000] {
            let (_, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let r = Rule::new(-1.0, 2.0, 5);
        // degree 9 is the highest exact degree for 5 nodes
        let exact = (2f64.powi(10) - 1.0) / 10.0;
        assert!((r.integrate(|x| x.powi(9)) - exact).abs() < 1e-12);
    }

    #[test]
    fn gaussian_integral() {
        let r = Rule::composite(-12.0, 12.0, 64, 4);
        let v = r.integrate(|x| (-x * x).exp());
        assert!((v - PI.sqrt()).abs() < 1e-14);
    }
}
