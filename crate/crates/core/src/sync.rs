//! Memory-assisted synchronization of heralded single-photon sources.
//!
//! Each party's heralded photon travels to the measurement node and
//! circulates in a storage loop until every party has heralded; then all
//! memories are read out together. A newer herald replaces the stored
//! photon. A photon that enters at slot `j'` and is read at slot `j`
//! survives the channel with `T_c` and the loop with `T_QM^(j - j' + 1)`.

use crate::error::{Error, Result};
use crate::num::{binomial, Real};
use crate::params::SimParams;
use crate::sources::{herald_click_prob, herald_prob_per_slot, herald_prob_within, ThermalSource};

/// Probability that `k_prime` of `k` photons survive from entry slot
/// `j_prime` to exit slot `j`.
pub fn transit_survival<T: Real>(
    k_prime: usize,
    k: usize,
    j: usize,
    j_prime: usize,
    t_c: T,
    t_qm: T,
) -> Result<T> {
    if k_prime > k {
        return Err(Error::Domain(format!("k' = {k_prime} exceeds k = {k}")));
    }
    if j_prime < 1 || j_prime > j {
        return Err(Error::Domain(format!("need 1 <= j' <= j, got j' = {j_prime}, j = {j}")));
    }
    let s = t_c * t_qm.powi((j - j_prime + 1) as i32);
    Ok(survival_binomial(k_prime, k, s))
}

fn survival_binomial<T: Real>(k_prime: usize, k: usize, s: T) -> T {
    binomial::<T>(k, k_prime) * s.powi(k_prime as i32) * (T::one() - s).powi((k - k_prime) as i32)
}

/// Per-arm source, channel and memory model.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncModel<T> {
    pub p_h1: T,
    pub t_c: T,
    pub t_qm: T,
    pub n_slots: usize,
    pub mu: T,
    pub eta_herald: T,
    source: ThermalSource<T>,
    /// `arrival[d]`: heralded at some slot, exactly one photon left after
    /// `d + 1` round trips.
    arrival: Vec<T>,
}

impl<T: Real> SyncModel<T> {
    pub fn new(mu: T, eta_herald: T, t_c: T, t_qm: T, n_slots: usize) -> Result<Self> {
        let prob = |x: T| x >= T::zero() && x <= T::one();
        if !(mu >= T::zero() && mu.is_finite()) {
            return Err(Error::Domain(format!("mean photon number {mu} must be >= 0")));
        }
        if !prob(eta_herald) || !prob(t_c) || !prob(t_qm) {
            return Err(Error::Domain(
                "efficiencies and transmittances must lie in [0, 1]".into(),
            ));
        }
        if n_slots == 0 {
            return Err(Error::Domain("at least one storage slot is required".into()));
        }
        let source = ThermalSource::new(mu);
        let arrival = (0..n_slots)
            .map(|d| {
                let s = t_c * t_qm.powi(d as i32 + 1);
                source.expect_nonvacuum(|k| {
                    herald_click_prob(k, eta_herald) * survival_binomial(1, k, s)
                })
            })
            .collect();
        Ok(Self {
            p_h1: herald_prob_per_slot(mu, eta_herald),
            t_c,
            t_qm,
            n_slots,
            mu,
            eta_herald,
            source,
            arrival,
        })
    }

    /// Heralded-source model at the parameters' arm length.
    pub fn from_params(p: &SimParams<T>) -> Result<Self> {
        Self::new(p.mu_src, p.eta_herald, p.transmittance(), p.t_qm, p.n_slots)
    }

    pub fn source(&self) -> &ThermalSource<T> {
        &self.source
    }

    fn arrival_after(&self, rounds_minus_one: usize) -> T {
        match self.arrival.get(rounds_minus_one) {
            Some(v) => *v,
            None => {
                let s = self.t_c * self.t_qm.powi(rounds_minus_one as i32 + 1);
                let eta = self.eta_herald;
                self.source
                    .expect_nonvacuum(|k| herald_click_prob(k, eta) * survival_binomial(1, k, s))
            }
        }
    }

    fn heralded_within(&self, j: usize) -> T {
        herald_prob_within(j, self.p_h1)
    }

    /// First herald at slot `j`, exactly one photon stored at readout.
    pub fn first_herald_single(&self, j: usize) -> T {
        assert!(j >= 1, "slots are numbered from 1");
        (T::one() - self.heralded_within(j - 1)) * self.arrival_after(0)
    }

    /// Heralded at least once before slot `j`, exactly one photon stored at
    /// the end of slot `j` (either kept from the last herald or replaced by
    /// a herald at `j`).
    pub fn repeat_herald_single(&self, j: usize) -> T {
        assert!(j >= 1, "slots are numbered from 1");
        let quiet_slot = T::one() - self.p_h1;
        let kept = (1..j).fold(T::zero(), |acc, jp| {
            acc + (T::one() - self.heralded_within(j - 1 - jp)) * self.arrival_after(j - jp) * quiet_slot
        });
        kept + self.heralded_within(j - 1) * self.arrival_after(0)
    }

    /// Probability that `m` parties are read out together with one photon
    /// each within the storage window.
    pub fn sync_success(&self, m: usize) -> T {
        assert!(m >= 1, "at least one party");
        let mut total = self.first_herald_single(1).powi(m as i32);
        for j in 2..=self.n_slots {
            let first = self.first_herald_single(j);
            let repeat = self.repeat_herald_single(j);
            for q in 1..=m {
                total = total
                    + binomial::<T>(m, q) * first.powi(q as i32) * repeat.powi((m - q) as i32);
            }
        }
        total
    }

    /// Three-party success written out term by term.
    pub fn sync_success_three_expanded(&self) -> T {
        let three = T::lit(3.0);
        let l1 = self.first_herald_single(1);
        let mut total = l1 * l1 * l1;
        for j in 2..=self.n_slots {
            let l = self.first_herald_single(j);
            let e = self.repeat_herald_single(j);
            total = total + three * l * e * e + three * l * l * e + l * l * l;
        }
        total
    }
}

/// Storage-loop noise model for a polarized photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryChannel<T> {
    pub e_q: T,
    pub e_b: T,
}

impl<T: Real> MemoryChannel<T> {
    pub fn from_params(p: &SimParams<T>) -> Self {
        Self { e_q: p.e_q, e_b: p.e_b }
    }
}

/// Weight of the input polarization in the memory output state:
/// `(1 - e_b)(1 - e_q) + e_b / 2`.
pub fn memory_fidelity<T: Real>(ch: MemoryChannel<T>) -> T {
    (T::one() - ch.e_b) * (T::one() - ch.e_q) + ch.e_b / T::lit(2.0)
}

/// Overall per-user detection efficiency `eta_d * Ps3^(1/3)`.
pub fn per_arm_efficiency<T: Real>(eta_det: T, ps3: T) -> T {
    eta_det * ps3.cbrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table2(t_c: f64) -> SyncModel<f64> {
        SyncModel::new(0.781, 0.93, t_c, 0.98, 40).unwrap()
    }

    #[test]
    fn transit_examples() {
        assert_eq!(transit_survival(1, 1, 1, 1, 1.0_f64, 1.0).unwrap(), 1.0);
        let v = transit_survival(0, 1, 4, 2, 0.5_f64, 0.9).unwrap();
        assert!((v - (1.0 - 0.5 * 0.9_f64.powi(3))).abs() < 1e-15);
        let v = transit_survival(1, 2, 1, 1, 0.5_f64, 0.98).unwrap();
        assert!((v - 2.0 * 0.49 * 0.51).abs() < 1e-15);
        assert!(transit_survival(3, 2, 1, 1, 0.5_f64, 0.98).is_err());
        assert!(transit_survival(1, 2, 1, 2, 0.5_f64, 0.98).is_err());
        assert!(transit_survival(1, 2, 1, 0, 0.5_f64, 0.98).is_err());
    }

    #[test]
    fn first_herald_edges() {
        let m = SyncModel::new(0.005, 0.93, 0.5, 0.98, 5).unwrap();
        let direct: f64 = (1..=200)
            .map(|k| {
                crate::sources::thermal_pmf(0.005, k)
                    * herald_click_prob(k, 0.93)
                    * transit_survival(1, k, 1, 1, 0.5, 0.98).unwrap()
            })
            .sum();
        assert!((m.first_herald_single(1) - direct).abs() < 1e-16);
        let dark = SyncModel::new(0.005, 0.93, 0.0, 0.98, 5).unwrap();
        for j in 1..=5 {
            assert_eq!(dark.first_herald_single(j), 0.0);
            assert_eq!(dark.repeat_herald_single(j), 0.0);
        }
    }

    #[test]
    fn repeat_herald_edges() {
        let m = table2(0.3);
        assert_eq!(m.repeat_herald_single(1), 0.0);
        let silent = SyncModel::new(0.0, 0.93, 0.3, 0.98, 10).unwrap();
        for j in 1..=10 {
            assert_eq!(silent.repeat_herald_single(j), 0.0);
        }
    }

    #[test]
    fn single_slot_window() {
        let m = SyncModel::<f64>::new(0.781, 0.93, 0.4, 0.98, 1).unwrap();
        for parties in 1..=4 {
            assert_eq!(m.sync_success(parties), m.first_herald_single(1).powi(parties as i32));
        }
    }

    #[test]
    fn fidelity_examples() {
        let f = |e_q, e_b| memory_fidelity(MemoryChannel::<f64> { e_q, e_b });
        assert_eq!(f(0.0, 0.0), 1.0);
        assert!((f(0.015, 0.0) - 0.985).abs() < 1e-15);
        assert_eq!(f(0.0, 1.0), 0.5);
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(per_arm_efficiency(0.93_f64, 1.0), 0.93);
        assert_eq!(per_arm_efficiency(0.93_f64, 0.0), 0.0);
        let v = per_arm_efficiency(0.93_f64, 5.434e-12);
        assert!((v - 0.93 * 5.434e-12_f64.powf(1.0 / 3.0)).abs() < 1e-18);
    }

    #[test]
    fn probabilities_stay_bounded() {
        for t_c in [1.0, 0.5, 0.01] {
            let m = table2(t_c);
            for j in 1..=40 {
                let (l, e) = (m.first_herald_single(j), m.repeat_herald_single(j));
                assert!((0.0..=1.0).contains(&l) && (0.0..=1.0).contains(&e));
                assert!(l + e <= 1.0 + 1e-15);
            }
            let ps = m.sync_success(3);
            assert!((0.0..=1.0).contains(&ps));
        }
    }

    #[test]
    fn f32_tracks_f64() {
        let a = SyncModel::<f32>::new(0.781, 0.93, 0.01, 0.98, 40).unwrap().sync_success(3);
        let b = SyncModel::<f64>::new(0.781, 0.93, 0.01, 0.98, 40).unwrap().sync_success(3);
        assert!(((a as f64) - b).abs() / b < 1e-4, "{a} vs {b}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn generic_form_matches_expanded(
            mu in 0.001..1.5f64, eta in 0.05..1.0f64, t_c in 0.0..1.0f64,
            t_qm in 0.0..1.0f64, n in 1usize..60,
        ) {
            let m = SyncModel::new(mu, eta, t_c, t_qm, n).unwrap();
            let a = m.sync_success(3);
            let b = m.sync_success_three_expanded();
            prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn monotone_in_length_and_memory(l in 0.0..300.0f64, dl in 0.5..50.0f64, t in 0.05..0.95f64, dt in 0.01..0.05f64) {
            let at = |l: f64, t: f64| {
                let t_c = crate::params::channel_transmittance(0.2, l);
                SyncModel::new(0.781, 0.93, t_c, t, 40).unwrap().sync_success(3)
            };
            prop_assert!(at(l + dl, t) <= at(l, t));
            prop_assert!(at(l, (t + dt).min(1.0)) >= at(l, t));
        }
    }
}
