//! Vacuum + weak decoy estimation of the three-party single-photon yield,
//! its bit-error rate and the single-photon gain.

use std::fmt;

use crate::error::{Error, Result};
use crate::ghz::{gain_and_qber, GainResult, IntensityTriple};
use crate::num::Real;
use crate::params::SimParams;
use crate::sources::thermal_pmf;
use crate::sync::per_arm_efficiency;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Signal,
    Decoy,
    Vacuum,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Signal, Level::Decoy, Level::Vacuum];

    fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> char {
        match self {
            Level::Signal => 'u',
            Level::Decoy => 'w',
            Level::Vacuum => 'o',
        }
    }
}

/// Intensity labels chosen by Alice, Bob and Charlie.
pub type Labels = [Level; 3];

/// X-basis gain and error rate for every label triple over {μ, ω, 0}.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable<T> {
    pub mu: T,
    pub omega: T,
    entries: [[[GainResult<T>; 3]; 3]; 3],
}

impl<T: Real> GainTable<T> {
    pub fn from_fn(mu: T, omega: T, mut f: impl FnMut(Labels) -> Result<GainResult<T>>) -> Result<Self> {
        let zero = GainResult {
            q_rx: T::zero(),
            q_ex: T::zero(),
            q_x: T::zero(),
            e_x: T::zero(),
        };
        let mut entries = [[[zero; 3]; 3]; 3];
        for a in Level::ALL {
            for b in Level::ALL {
                for c in Level::ALL {
                    entries[a.index()][b.index()][c.index()] = f([a, b, c])?;
                }
            }
        }
        Ok(Self { mu, omega, entries })
    }

    pub fn intensity(&self, level: Level) -> T {
        match level {
            Level::Signal => self.mu,
            Level::Decoy => self.omega,
            Level::Vacuum => T::zero(),
        }
    }

    pub fn get(&self, labels: Labels) -> &GainResult<T> {
        let [a, b, c] = labels;
        &self.entries[a.index()][b.index()][c.index()]
    }

    pub fn gain(&self, labels: Labels) -> T {
        self.get(labels).q_x
    }

    pub fn error_gain(&self, labels: Labels) -> T {
        let g = self.get(labels);
        g.e_x * g.q_x
    }

    /// Same table with the signal and decoy intensities exchanged.
    pub fn swapped(&self) -> Self {
        let swap = |l: Level| match l {
            Level::Signal => Level::Decoy,
            Level::Decoy => Level::Signal,
            Level::Vacuum => Level::Vacuum,
        };
        let mut out = self.clone();
        out.mu = self.omega;
        out.omega = self.mu;
        for a in Level::ALL {
            for b in Level::ALL {
                for c in Level::ALL {
                    out.entries[a.index()][b.index()][c.index()] = *self.get([swap(a), swap(b), swap(c)]);
                }
            }
        }
        out
    }
}

/// Drives the gain model over all 27 label triples with a common per-arm
/// efficiency `eta_d * Ps3^(1/3)`.
pub fn build_gain_table<T: Real>(params: &SimParams<T>, ps3: T, fidelity: T) -> Result<GainTable<T>> {
    let eta = per_arm_efficiency(params.eta_det, ps3);
    let level = |l: Level| match l {
        Level::Signal => params.mu,
        Level::Decoy => params.omega,
        Level::Vacuum => T::zero(),
    };
    GainTable::from_fn(params.mu, params.omega, |[a, b, c]| {
        gain_and_qber(
            IntensityTriple::new(level(a), level(b), level(c)),
            eta,
            params.p_d,
            params.k_regions,
            params.e_d,
            fidelity,
        )
    })
}

/// A bound with its unclamped value kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound<T> {
    pub raw: T,
    pub value: T,
    /// False when `raw` fell outside the admissible interval.
    pub valid: bool,
}

impl<T: Real> Bound<T> {
    fn clamped(raw: T, lo: T, hi: T) -> Self {
        Self {
            raw,
            value: raw.max(lo).min(hi),
            valid: raw >= lo && raw <= hi,
        }
    }
}

/// Inclusion-exclusion over one level and vacuum: the part of the gain in
/// which all three senders emitted at least one photon.
fn nonvacuum_part<T: Real>(t: &GainTable<T>, level: Level, value: impl Fn(Labels) -> T) -> T {
    use Level::Vacuum as O;
    let l = level;
    let p0 = thermal_pmf(t.intensity(level), 0);
    value([l, l, l]) - p0 * (value([l, l, O]) + value([l, O, l]) + value([O, l, l]))
        + p0 * p0 * (value([l, O, O]) + value([O, l, O]) + value([O, O, l]))
        - p0 * p0 * p0 * value([O, O, O])
}

/// Lower bound on the single-photon X-basis yield, clamped to [0, 1].
pub fn yield_lower_bound<T: Real>(t: &GainTable<T>) -> Result<Bound<T>> {
    let pm = |n| thermal_pmf(t.mu, n);
    let pw = |n| thermal_pmf(t.omega, n);
    let gap = pm(2) * pw(1) - pw(2) * pm(1);
    let denom = pm(1) * pm(1) * pw(1) * pw(1) * gap;
    if denom == T::zero() || !denom.is_finite() {
        return Err(Error::DegenerateDecoy);
    }
    let s_decoy = nonvacuum_part(t, Level::Decoy, |l| t.gain(l));
    let s_signal = nonvacuum_part(t, Level::Signal, |l| t.gain(l));
    let numer = pm(1) * pm(1) * pm(2) * s_decoy - pw(1) * pw(1) * pw(2) * s_signal;
    Ok(Bound::clamped(numer / denom, T::zero(), T::one()))
}

/// Upper bound on the single-photon X-basis bit-error rate, clamped to
/// [0, 1/2]. The Z-basis bound is taken equal to it.
pub fn error_upper_bound<T: Real>(t: &GainTable<T>, y111_lower: T) -> Result<Bound<T>> {
    if y111_lower <= T::zero() {
        return Err(Error::NoKey(y111_lower.to_f64().unwrap_or(f64::NAN)));
    }
    let p1 = thermal_pmf(t.omega, 1);
    let s = nonvacuum_part(t, Level::Decoy, |l| t.error_gain(l));
    Ok(Bound::clamped(s / (p1 * p1 * p1 * y111_lower), T::zero(), T::lit(0.5)))
}

/// Coefficient relating the single-photon yield bound to a gain bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Q111Convention {
    /// `mu / (1 + mu^2)`.
    #[default]
    Literal,
    /// `[mu / (1 + mu)^2]^3`, all three thermal sources emitting one photon.
    TripleThermal,
}

impl Q111Convention {
    pub fn coefficient<T: Real>(self, mu: T) -> T {
        match self {
            Self::Literal => mu / (T::one() + mu * mu),
            Self::TripleThermal => {
                let p1 = thermal_pmf(mu, 1);
                p1 * p1 * p1
            }
        }
    }
}

impl fmt::Display for Q111Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Literal => "literal",
            Self::TripleThermal => "triple",
        })
    }
}

impl std::str::FromStr for Q111Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "literal" => Ok(Self::Literal),
            "triple" | "triple_thermal" | "triple-thermal" => Ok(Self::TripleThermal),
            other => Err(Error::Domain(format!("unknown Q111 convention `{other}`"))),
        }
    }
}

pub fn single_photon_gain<T: Real>(y111_lower: T, mu: T, convention: Q111Convention) -> T {
    convention.coefficient(mu) * y111_lower
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonEstimates<T> {
    pub y111_xl: Bound<T>,
    pub e111_bxu: Bound<T>,
    pub q111_xl: T,
    pub e111_bzu: T,
}

/// All single-photon estimates from one table. A non-positive raw yield
/// bound returns [`Error::NoKey`].
pub fn estimate<T: Real>(t: &GainTable<T>, convention: Q111Convention) -> Result<SinglePhotonEstimates<T>> {
    let y = yield_lower_bound(t)?;
    if y.raw <= T::zero() {
        return Err(Error::NoKey(y.raw.to_f64().unwrap_or(f64::NAN)));
    }
    let e = error_upper_bound(t, y.value)?;
    Ok(SinglePhotonEstimates {
        y111_xl: y,
        e111_bxu: e,
        q111_xl: single_photon_gain(y.value, t.mu, convention),
        e111_bzu: e.value,
    })
}
