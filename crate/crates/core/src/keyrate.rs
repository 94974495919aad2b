//! Secure key rate with phase post-selection, the no-memory baselines,
//! distance sweeps and cutoff solving.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::decoy::{build_gain_table, estimate, Level, Q111Convention};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::params::{channel_transmittance, SimParams};
use crate::sync::{memory_fidelity, MemoryChannel, SyncModel};

/// Source repetition rate used to convert per-pulse rates to bit/s.
pub const REPETITION_RATE_HZ: f64 = 1e10;

/// Upper end of the distance scan, km.
pub const MAX_SCAN_KM: f64 = 1000.0;

/// Shannon binary entropy in bits.
pub fn binary_entropy<T: Real>(x: T) -> Result<T> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::Domain(format!("entropy argument {x} outside [0, 1]")));
    }
    let term = |p: T| if p > T::zero() { -p * p.log2() } else { T::zero() };
    Ok(term(x) + term(T::one() - x))
}

/// Right-hand side of the key-rate bound, before flooring.
pub fn secure_key_rate_raw<T: Real>(
    q111: T,
    e111_bz: T,
    q_mu: T,
    e_mu: T,
    k_regions: usize,
    f_ec: T,
) -> Result<T> {
    let k = T::from_count(k_regions);
    Ok(q111 / (k * k) * (T::one() - binary_entropy(e111_bz)?) - binary_entropy(e_mu)? * f_ec * q_mu)
}

/// Key rate per pulse, floored at zero.
pub fn secure_key_rate<T: Real>(
    q111: T,
    e111_bz: T,
    q_mu: T,
    e_mu: T,
    k_regions: usize,
    f_ec: T,
) -> Result<T> {
    Ok(secure_key_rate_raw(q111, e111_bz, q_mu, e_mu, k_regions, f_ec)?.max(T::zero()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineModel {
    /// Heralded sources synchronized by storage loops.
    QmHsps,
    /// Heralded sources, single slot, no loop loss.
    HspsNoQmNonIdeal,
    /// Heralded sources with synchronization ignored.
    HspsNoQmIdeal,
    /// Phase-randomized weak coherent pulses, single slot.
    WcpNoQm,
}

impl BaselineModel {
    pub const ALL: [BaselineModel; 4] =
        [Self::QmHsps, Self::HspsNoQmNonIdeal, Self::HspsNoQmIdeal, Self::WcpNoQm];

    pub fn name(self) -> &'static str {
        match self {
            Self::QmHsps => "QM_HSPS",
            Self::HspsNoQmNonIdeal => "HSPS_NOQM_NONIDEAL",
            Self::HspsNoQmIdeal => "HSPS_NOQM_IDEAL",
            Self::WcpNoQm => "WCP_NOQM",
        }
    }

    pub fn uses_memory(self) -> bool {
        matches!(self, Self::QmHsps)
    }
}

impl fmt::Display for BaselineModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Domain(format!("unknown variant `{s}`")))
    }
}

/// Three-party synchronization probability of a variant at arm length `l_km`.
pub fn baseline_sync<T: Real>(variant: BaselineModel, params: &SimParams<T>, l_km: T) -> Result<T> {
    let p = params.with_length(l_km);
    match variant {
        BaselineModel::QmHsps => Ok(SyncModel::from_params(&p)?.sync_success(3)),
        BaselineModel::HspsNoQmNonIdeal => {
            Ok(SyncModel::from_params(&p.with_slots(1).with_t_qm(T::one()))?.sync_success(3))
        }
        BaselineModel::HspsNoQmIdeal => Ok(T::one()),
        BaselineModel::WcpNoQm => {
            let mu = p.mu_wcp;
            let arm = mu * (-mu).exp() * channel_transmittance(p.alpha, l_km);
            Ok(arm * arm * arm)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint<T> {
    pub l_km: T,
    pub ps3: T,
    pub q_x_mu: T,
    pub e_x_mu: T,
    pub q111_xl: T,
    pub e111_bzu: T,
    /// Unfloored key-rate bound.
    pub r_raw: T,
    pub r: T,
    pub r_bits_per_s: T,
    /// False if a decoy bound had to be clamped or no single-photon yield
    /// could be certified.
    pub bounds_valid: bool,
}

/// Full pipeline at one distance.
pub fn rate_point<T: Real>(
    params: &SimParams<T>,
    l_km: T,
    variant: BaselineModel,
    convention: Q111Convention,
) -> Result<RatePoint<T>> {
    let p = params.with_length(l_km);
    let ps3 = baseline_sync(variant, &p, l_km)?;
    let fidelity = if variant.uses_memory() {
        memory_fidelity(MemoryChannel::from_params(&p))
    } else {
        T::one()
    };
    let table = build_gain_table(&p, ps3, fidelity)?;
    let signal = *table.get([Level::Signal; 3]);
    let (q111, e111, valid) = match estimate(&table, convention) {
        Ok(est) => (est.q111_xl, est.e111_bzu, est.y111_xl.valid && est.e111_bxu.valid),
        Err(Error::NoKey(_)) => (T::zero(), T::lit(0.5), false),
        Err(e) => return Err(e),
    };
    let r_raw = secure_key_rate_raw(q111, e111, signal.q_x, signal.e_x, p.k_regions, p.f_ec)?;
    let r = r_raw.max(T::zero());
    Ok(RatePoint {
        l_km,
        ps3,
        q_x_mu: signal.q_x,
        e_x_mu: signal.e_x,
        q111_xl: q111,
        e111_bzu: e111,
        r_raw,
        r,
        r_bits_per_s: r * T::lit(REPETITION_RATE_HZ),
        bounds_valid: valid,
    })
}

/// Rate points for each distance, in input order.
pub fn sweep_rates<T: Real>(
    params: &SimParams<T>,
    distances: &[T],
    variant: BaselineModel,
    convention: Q111Convention,
) -> Result<Vec<RatePoint<T>>> {
    distances
        .par_iter()
        .map(|&l| rate_point(params, l, variant, convention))
        .collect()
}

/// Largest distance with positive key, scanned on a 1 km grid and refined
/// by bisection to 0.1 km.
pub fn max_distance<T: Real>(
    params: &SimParams<T>,
    variant: BaselineModel,
    convention: Q111Convention,
) -> Result<T> {
    max_distance_with_step(params, variant, convention, T::one())
}

pub fn max_distance_with_step<T: Real>(
    params: &SimParams<T>,
    variant: BaselineModel,
    convention: Q111Convention,
    step_km: T,
) -> Result<T> {
    if step_km.is_nan() || step_km <= T::zero() {
        return Err(Error::Domain(format!("scan step {step_km} must be positive")));
    }
    let positive = |l: T| rate_point(params, l, variant, convention).map(|p| p.r > T::zero());
    if !positive(T::zero())? {
        return Err(Error::NoKeyAtZero);
    }
    let cap = T::lit(MAX_SCAN_KM);
    let steps = (cap / step_km).ceil().to_usize().unwrap_or(0);
    const CHUNK: usize = 16;
    let mut lo = T::zero();
    let mut hi = None;
    let mut i = 1;
    while i <= steps && hi.is_none() {
        let end = (i + CHUNK).min(steps + 1);
        let flags = (i..end)
            .into_par_iter()
            .map(|k| positive((step_km * T::from_count(k)).min(cap)))
            .collect::<Result<Vec<_>>>()?;
        match flags.iter().position(|&ok| !ok) {
            Some(at) => {
                lo = step_km * T::from_count(i + at - 1);
                hi = Some((step_km * T::from_count(i + at)).min(cap));
            }
            None => lo = (step_km * T::from_count(end - 1)).min(cap),
        }
        i = end;
    }
    let Some(mut hi) = hi else {
        return Err(Error::NoCutoff(MAX_SCAN_KM));
    };
    let tol = T::lit(0.01);
    while hi - lo > tol {
        let mid = (lo + hi) / T::lit(2.0);
        if positive(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Memory survival at which the memory-assisted synchronization
/// probability equals the weak-coherent baseline at `l_ref_km`.
pub fn tqm_threshold<T: Real>(params: &SimParams<T>, l_ref_km: T) -> Result<T> {
    let wcp = baseline_sync(BaselineModel::WcpNoQm, params, l_ref_km)?;
    let gap = |t: T| -> Result<T> {
        Ok(baseline_sync(BaselineModel::QmHsps, &params.with_t_qm(t), l_ref_km)? - wcp)
    };
    let (mut lo, mut hi) = (T::zero(), T::one());
    let (g_hi, g_lo) = (gap(hi)?, gap(lo)?);
    if g_hi.is_nan() || g_lo.is_nan() || g_hi <= T::zero() || g_lo >= T::zero() {
        return Err(Error::NoCrossing(format!(
            "memory model does not cross the weak-coherent baseline at L = {l_ref_km} km"
        )));
    }
    let tol = T::lit(1e-5);
    while hi - lo > tol {
        let mid = (lo + hi) / T::lit(2.0);
        if gap(mid)? > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}
