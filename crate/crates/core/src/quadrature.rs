//! Tensor-product Gauss-Legendre quadrature with node doubling.

use crate::error::{Error, Result};
use crate::num::Real;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_n` from the Chebyshev-like guess.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped<T: Real>(&self, a: T, b: T) -> (Vec<T>, Vec<T>) {
        let half = (b - a) / T::lit(2.0);
        let mid = (a + b) / T::lit(2.0);
        let xs = self.nodes.iter().map(|&x| mid + half * T::lit(x)).collect();
        let ws = self.weights.iter().map(|&w| half * T::lit(w)).collect();
        (xs, ws)
    }

    pub fn integrate<T: Real>(&self, a: T, b: T, mut f: impl FnMut(T) -> T) -> T {
        let (xs, ws) = self.mapped(a, b);
        xs.into_iter().zip(ws).fold(T::zero(), |acc, (x, w)| acc + w * f(x))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates a vector-valued `f` over `[a, b]^2` on an `n x n` grid.
/// The reduction runs in fixed row-major order.
pub fn integrate_square<T: Real, const D: usize>(
    rule: &GaussLegendre,
    a: T,
    b: T,
    mut f: impl FnMut(T, T) -> [T; D],
) -> [T; D] {
    let (xs, ws) = rule.mapped(a, b);
    let mut acc = [T::zero(); D];
    for (x, wx) in xs.iter().zip(&ws) {
        for (y, wy) in xs.iter().zip(&ws) {
            let v = f(*x, *y);
            let w = *wx * *wy;
            for (slot, vi) in acc.iter_mut().zip(v) {
                *slot = *slot + w * vi;
            }
        }
    }
    acc
}

/// Result of a converged node-doubling run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Converged<T, const D: usize> {
    pub value: [T; D],
    /// Nodes per axis of the accepted estimate.
    pub nodes: usize,
    /// Largest component-wise relative change at acceptance.
    pub rel_change: T,
}

#[derive(Debug, Clone, Copy)]
pub struct DoublingSchedule {
    pub start: usize,
    pub cap: usize,
}

impl Default for DoublingSchedule {
    fn default() -> Self {
        Self { start: 32, cap: 512 }
    }
}

/// Doubles the nodes per axis until every component changes by at most
/// `rel_tol` relative to the finer estimate.
pub fn integrate_square_converged<T: Real, const D: usize>(
    a: T,
    b: T,
    rel_tol: T,
    schedule: DoublingSchedule,
    mut f: impl FnMut(T, T) -> [T; D],
) -> Result<Converged<T, D>> {
    let mut n = schedule.start;
    let mut coarse = integrate_square(&GaussLegendre::new(n), a, b, &mut f);
    let mut last_change = T::infinity();
    while n * 2 <= schedule.cap {
        n *= 2;
        let fine = integrate_square(&GaussLegendre::new(n), a, b, &mut f);
        let change = relative_change(&coarse, &fine);
        if change <= rel_tol {
            return Ok(Converged {
                value: fine,
                nodes: n,
                rel_change: change,
            });
        }
        last_change = change;
        coarse = fine;
    }
    Err(Error::QuadratureNotConverged {
        nodes: n,
        rel_change: last_change.to_f64().unwrap_or(f64::INFINITY),
    })
}

fn relative_change<T: Real, const D: usize>(coarse: &[T; D], fine: &[T; D]) -> T {
    coarse.iter().zip(fine).fold(T::zero(), |worst, (c, f)| {
        let diff = (*f - *c).abs();
        let rel = if diff == T::zero() {
            T::zero()
        } else if *f == T::zero() {
            T::infinity()
        } else {
            diff / f.abs()
        };
        worst.max(rel)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_nodes_symmetric() {
        for n in [1, 2, 5, 32, 64, 128, 512] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
            for i in 0..n {
                assert!((r.nodes[i] + r.nodes[n - 1 - i]).abs() < 1e-15);
            }
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let r = GaussLegendre::new(5);
        for deg in 0..10 {
            let v = r.integrate(0.0_f64, 1.0, |x| x.powi(deg));
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "deg={deg}");
        }
    }

    #[test]
    fn smooth_2d_integral() {
        // integral of cos(x) e^{-y} over [0,1]^2
        let exact = 1.0_f64.sin() * (1.0 - (-1.0_f64).exp());
        let got = integrate_square_converged(0.0_f64, 1.0, 1e-12, DoublingSchedule::default(), |x, y| {
            [x.cos() * (-y).exp()]
        })
        .unwrap();
        assert!((got.value[0] - exact).abs() < 1e-14);
        assert_eq!(got.nodes, 64);
    }

    #[test]
    fn zero_integrand_converges_immediately() {
        let got =
            integrate_square_converged(0.0_f64, 1.0, 1e-9, DoublingSchedule::default(), |_, _| [0.0, 0.0])
                .unwrap();
        assert_eq!(got.value, [0.0, 0.0]);
    }

    #[test]
    fn reports_non_convergence() {
        // a kink that no rule up to the cap resolves to 1e-15
        let err = integrate_square_converged(-1.0_f64, 1.0, 1e-15, DoublingSchedule { start: 4, cap: 16 }, |x, y| {
            [(x - 0.1234).abs() + y]
        })
        .unwrap_err();
        assert!(matches!(err, Error::QuadratureNotConverged { nodes: 16, .. }));
    }
}
