//! Photon-number statistics of the thermal SPDC source and the heralding
//! statistics of its trigger detector.

use crate::num::{one_minus_pow_complement, Real};

/// Residual tail mass below which photon-number sums are truncated.
pub const TAIL_BOUND: f64 = 1e-15;

/// Hard cap on the truncation order, reached only for very bright sources.
pub const MAX_TERMS: usize = 10_000;

/// Thermal photon-number distribution `mu^n / (1 + mu)^(n + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalSource<T> {
    pub mu: T,
    /// Largest photon number kept in truncated sums.
    pub k_max: usize,
}

impl<T: Real> ThermalSource<T> {
    /// Chooses `k_max` so the discarded tail `(mu / (1 + mu))^(k_max + 1)`
    /// is below [`TAIL_BOUND`].
    pub fn new(mu: T) -> Self {
        Self {
            mu,
            k_max: truncation_order(mu),
        }
    }

    pub fn pmf(&self, n: usize) -> T {
        thermal_pmf(self.mu, n)
    }

    /// Sum of `pmf(k) * f(k)` over `1..=k_max`.
    pub fn expect_nonvacuum(&self, mut f: impl FnMut(usize) -> T) -> T {
        let ratio = self.mu / (T::one() + self.mu);
        let mut p = T::one() / (T::one() + self.mu);
        let mut acc = T::zero();
        for k in 1..=self.k_max {
            p = p * ratio;
            acc = acc + p * f(k);
        }
        acc
    }
}

fn truncation_order<T: Real>(mu: T) -> usize {
    if mu <= T::zero() {
        return 0;
    }
    let ratio = (mu / (T::one() + mu)).to_f64().unwrap_or(0.0);
    if ratio <= 0.0 {
        return 0;
    }
    // smallest k with ratio^(k+1) < TAIL_BOUND
    let k = (TAIL_BOUND.ln() / ratio.ln()).ceil() as usize;
    k.clamp(1, MAX_TERMS)
}

pub fn thermal_pmf<T: Real>(mu: T, n: usize) -> T {
    let denom = T::one() + mu;
    if n == 0 {
        return T::one() / denom;
    }
    (mu / denom).powi(n as i32) / denom
}

/// Probability that the trigger detector clicks on a `k`-photon pulse,
/// `1 - (1 - eta_D)^k`.
pub fn herald_click_prob<T: Real>(k: usize, eta_herald: T) -> T {
    one_minus_pow_complement(eta_herald, k)
}

/// Probability that one pump pulse is heralded.
pub fn herald_prob_per_slot<T: Real>(mu: T, eta_herald: T) -> T {
    ThermalSource::new(mu).expect_nonvacuum(|k| herald_click_prob(k, eta_herald))
}

/// Probability of at least one herald within `j` slots; zero for `j = 0`.
pub fn herald_prob_within<T: Real>(j: usize, p_h1: T) -> T {
    one_minus_pow_complement(p_h1, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pmf_closed_forms() {
        for mu in [0.0, 0.005, 0.4, 2.0_f64] {
            assert_eq!(thermal_pmf(mu, 0), 1.0 / (1.0 + mu));
        }
        assert_eq!(thermal_pmf(0.0_f64, 0), 1.0);
        assert_eq!(thermal_pmf(0.0_f64, 3), 0.0);
    }

    #[test]
    fn pmf_normalizes() {
        for mu in [1e-4, 0.005, 0.1, 0.781, 1.0_f64] {
            let src = ThermalSource::new(mu);
            let total: f64 = (0..=src.k_max).map(|n| src.pmf(n)).sum();
            assert!((total - 1.0).abs() < 1e-12, "mu={mu} total={total}");
        }
    }

    #[test]
    fn click_prob_explicit_sum() {
        // explicit binomial sum over l = 1..=k
        let explicit = |k: usize, eta: f64| -> f64 {
            (1..=k)
                .map(|l| {
                    crate::num::binomial::<f64>(k, l)
                        * eta.powi(l as i32)
                        * (1.0 - eta).powi((k - l) as i32)
                })
                .sum()
        };
        assert_eq!(herald_click_prob(0, 0.93_f64), 0.0);
        assert_eq!(herald_click_prob(1, 0.93_f64), 0.93);
        assert!((herald_click_prob(3, 0.93_f64) - 0.999657).abs() < 1e-15);
        assert!((explicit(3, 0.93) - 0.999657).abs() < 1e-14);
        for k in 0..=50 {
            for eta in [0.0, 0.25, 0.5, 0.93, 1.0] {
                let d = (herald_click_prob(k, eta) - explicit(k, eta)).abs();
                assert!(d < 1e-14, "k={k} eta={eta} diff={d}");
                let closed = 1.0 - (1.0 - eta).powi(k as i32);
                assert!((herald_click_prob(k, eta) - closed).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn per_slot_herald_edges_and_oracle() {
        assert_eq!(herald_prob_per_slot(0.0_f64, 0.93), 0.0);
        assert_eq!(herald_prob_per_slot(0.005_f64, 0.0), 0.0);
        // fixed-order brute force, k up to 200
        let brute: f64 = (1..=200)
            .map(|k| thermal_pmf(0.005_f64, k) * (1.0 - 0.07_f64.powi(k as i32)))
            .sum();
        let v = herald_prob_per_slot(0.005_f64, 0.93);
        assert!((v - brute).abs() < 1e-16, "{v} vs {brute}");
        // geometric-series closed form mu*eta / (1 + mu*eta)
        let closed = 0.005 * 0.93 / (1.0 + 0.005 * 0.93);
        assert!((v - closed).abs() < 1e-15);
    }

    #[test]
    fn within_slots() {
        assert_eq!(herald_prob_within(0, 0.3_f64), 0.0);
        assert_eq!(herald_prob_within(1, 0.3_f64), 0.3);
        assert!((herald_prob_within(10_000, 0.01_f64) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f32_matches_f64() {
        let a = herald_prob_per_slot(0.781_f32, 0.93);
        let b = herald_prob_per_slot(0.781_f64, 0.93);
        assert!((a as f64 - b).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn normalization_for_mu_up_to_one(mu in 0.0..=1.0f64) {
            let src = ThermalSource::new(mu);
            let total: f64 = (0..=src.k_max).map(|n| src.pmf(n)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn per_slot_herald_monotone(mu in 0.0..1.0f64, eta in 0.0..1.0f64, dm in 1e-4..0.5f64, de in 1e-4..0.5f64) {
            let base = herald_prob_per_slot(mu, eta);
            prop_assert!(herald_prob_per_slot(mu + dm, eta) >= base);
            prop_assert!(herald_prob_per_slot(mu, (eta + de).min(1.0)) >= base);
        }
    }
}
