//! GHZ-state measurement: ideal discrimination logic, sifting rules and the
//! weak-coherent click/gain model used for the key rate.
//!
//! Only `|Φ±⟩ = (|HHH⟩ ± |VVV⟩)/√2` are announced. Ideal projection
//! probabilities are computed from state amplitudes, so the X-basis
//! correlations follow from the expansion
//! `|Φ⁻⟩ = ½(|−−−⟩ + |++−⟩ + |−++⟩ + |+−+⟩)` rather than from a
//! hand-written table.

use std::fmt;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::quadrature::{integrate_square_converged, DoublingSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    H,
    V,
    Plus,
    Minus,
}

impl Polarization {
    pub const ALL: [Polarization; 4] = [Self::H, Self::V, Self::Plus, Self::Minus];

    /// Encoding: `H`/`+` carry bit 0, `V`/`−` carry bit 1.
    pub fn encode(basis: Basis, bit: u8) -> Self {
        match (basis, bit & 1) {
            (Basis::Z, 0) => Self::H,
            (Basis::Z, _) => Self::V,
            (Basis::X, 0) => Self::Plus,
            (Basis::X, _) => Self::Minus,
        }
    }

    pub fn basis(self) -> Basis {
        match self {
            Self::H | Self::V => Basis::Z,
            Self::Plus | Self::Minus => Basis::X,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Self::H | Self::Plus => 0,
            Self::V | Self::Minus => 1,
        }
    }

    /// `(⟨H|ψ⟩, ⟨V|ψ⟩)`.
    pub fn amplitudes(self) -> [f64; 2] {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Self::H => [1.0, 0.0],
            Self::V => [0.0, 1.0],
            Self::Plus => [r, r],
            Self::Minus => [r, -r],
        }
    }
}

/// The six detectors, station-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detector {
    D1H,
    D1V,
    D2H,
    D2V,
    D3H,
    D3V,
}

impl Detector {
    pub const ALL: [Detector; 6] = [Self::D1H, Self::D1V, Self::D2H, Self::D2V, Self::D3H, Self::D3V];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Set of clicked detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ClickPattern(u8);

impl ClickPattern {
    pub fn from_detectors(clicks: &[Detector]) -> Self {
        Self(clicks.iter().fold(0, |m, d| m | (1 << d.index())))
    }

    pub fn from_bits(bits: u8) -> Self {
        Self(bits & 0x3f)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn clicked(self, d: Detector) -> bool {
        self.0 & (1 << d.index()) != 0
    }

    /// All 64 patterns.
    pub fn all() -> impl Iterator<Item = ClickPattern> {
        (0u8..64).map(ClickPattern)
    }
}

impl fmt::Display for ClickPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = Detector::ALL
            .iter()
            .filter(|d| self.clicked(**d))
            .map(|d| format!("{d:?}"))
            .collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GhzOutcome {
    PhiPlus,
    PhiMinus,
    Failure,
}

/// One click per station; an even number of V clicks announces `Φ⁺`, an odd
/// number `Φ⁻`.
pub fn classify_clicks(p: ClickPattern) -> GhzOutcome {
    let mut v_clicks = 0;
    for (h, v) in [
        (Detector::D1H, Detector::D1V),
        (Detector::D2H, Detector::D2V),
        (Detector::D3H, Detector::D3V),
    ] {
        match (p.clicked(h), p.clicked(v)) {
            (true, false) => {}
            (false, true) => v_clicks += 1,
            _ => return GhzOutcome::Failure,
        }
    }
    if v_clicks % 2 == 0 {
        GhzOutcome::PhiPlus
    } else {
        GhzOutcome::PhiMinus
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionProbs {
    pub phi_plus: f64,
    pub phi_minus: f64,
}

impl ProjectionProbs {
    pub fn total(&self) -> f64 {
        self.phi_plus + self.phi_minus
    }
}

/// Born probabilities `|⟨Φ±|a b c⟩|²` for any product input.
pub fn projection_probs_raw(inputs: [Polarization; 3]) -> ProjectionProbs {
    let [a, b, c] = inputs.map(Polarization::amplitudes);
    let hhh = a[0] * b[0] * c[0];
    let vvv = a[1] * b[1] * c[1];
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let plus = r * (hhh + vvv);
    let minus = r * (hhh - vvv);
    ProjectionProbs {
        phi_plus: plus * plus,
        phi_minus: minus * minus,
    }
}

/// Outcome probabilities given that a `Φ±` result is announced, for three
/// inputs prepared in the same basis. Inputs that never yield an
/// announcement give zeros.
pub fn ideal_projection_probs(inputs: [Polarization; 3]) -> Result<ProjectionProbs> {
    let basis = inputs[0].basis();
    if inputs.iter().any(|p| p.basis() != basis) {
        return Err(Error::Domain("inputs prepared in different bases".into()));
    }
    let raw = projection_probs_raw(inputs);
    let total = raw.total();
    if total <= 1e-15 {
        return Ok(ProjectionProbs {
            phi_plus: 0.0,
            phi_minus: 0.0,
        });
    }
    Ok(ProjectionProbs {
        phi_plus: raw.phi_plus / total,
        phi_minus: raw.phi_minus / total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiftResult {
    /// All Z: bits are announced and must satisfy `k_A = k_B = k_C`.
    SecurityCheck { pass: bool },
    /// All X: `k_A = k_B ⊕ k_C` after `Φ⁺`, `k_A ⊕ 1 = k_B ⊕ k_C` after `Φ⁻`.
    RawKey { parity_ok: bool },
    Discard,
}

pub fn sift(outcome: GhzOutcome, bases: [Basis; 3], bits: [u8; 3]) -> SiftResult {
    if outcome == GhzOutcome::Failure {
        return SiftResult::Discard;
    }
    let [a, b, c] = bits.map(|x| x & 1);
    match bases {
        [Basis::Z, Basis::Z, Basis::Z] => SiftResult::SecurityCheck {
            pass: a == b && b == c,
        },
        [Basis::X, Basis::X, Basis::X] => {
            let flip = u8::from(outcome == GhzOutcome::PhiMinus);
            SiftResult::RawKey {
                parity_ok: a ^ flip == b ^ c,
            }
        }
        _ => SiftResult::Discard,
    }
}

/// Mean photon numbers sent by Alice, Bob and Charlie.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityTriple<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> IntensityTriple<T> {
    pub fn new(a: T, b: T, c: T) -> Self {
        Self { a, b, c }
    }
}

/// Click probabilities indexed by [`Detector::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickProbs<T>(pub [T; 6]);

impl<T: Real> ClickProbs<T> {
    pub fn get(&self, d: Detector) -> T {
        self.0[d.index()]
    }
}

/// Station 1 interferes arms (a, b) with relative phase `phi`, station 2
/// arms (b, c) with `varphi - phi`, station 3 arms (a, c) with `varphi`.
pub fn click_probs<T: Real>(phi: T, varphi: T, mu: IntensityTriple<T>, eta: T, p_d: T) -> ClickProbs<T> {
    let log_no_dark = (-p_d).ln_1p();
    let (sa, sb, sc) = (mu.a * eta, mu.b * eta, mu.c * eta);
    let mut out = [T::zero(); 6];
    for (station, (s1, s2, cos)) in [
        (sa, sb, phi.cos()),
        (sb, sc, (varphi - phi).cos()),
        (sa, sc, varphi.cos()),
    ]
    .into_iter()
    .enumerate()
    {
        let (h_load, v_load) = port_loads(s1, s2, cos);
        out[2 * station] = -(log_no_dark - h_load).exp_m1();
        out[2 * station + 1] = -(log_no_dark - v_load).exp_m1();
    }
    ClickProbs(out)
}

fn port_loads<T: Real>(s1: T, s2: T, cos: T) -> (T, T) {
    let quarter = (s1 + s2) / T::lit(4.0);
    let cross = (s1 * s2).sqrt() / T::lit(2.0) * cos;
    ((quarter + cross).max(T::zero()), (quarter - cross).max(T::zero()))
}

// right and error click sets as (station1 V?, station2 V?, station3 V?)
const RIGHT_SETS: [[bool; 3]; 4] = [
    [false, false, false],
    [false, true, true],
    [true, false, true],
    [true, true, false],
];
const ERROR_SETS: [[bool; 3]; 4] = [
    [false, false, true],
    [false, true, false],
    [true, false, false],
    [true, true, true],
];

/// `[right, error]` coincidence integrand at one phase point.
fn coincidence_integrand<T: Real>(phi: T, varphi: T, mu: IntensityTriple<T>, eta: T, p_d: T) -> [T; 2] {
    let log_no_dark = (-p_d).ln_1p();
    let (sa, sb, sc) = (mu.a * eta, mu.b * eta, mu.c * eta);
    // per station: (click, silent) for the H and V ports
    let mut click = [[T::zero(); 2]; 3];
    let mut silent = [[T::zero(); 2]; 3];
    for (station, (s1, s2, cos)) in [
        (sa, sb, phi.cos()),
        (sb, sc, (varphi - phi).cos()),
        (sa, sc, varphi.cos()),
    ]
    .into_iter()
    .enumerate()
    {
        let (h_load, v_load) = port_loads(s1, s2, cos);
        for (port, load) in [h_load, v_load].into_iter().enumerate() {
            let log_silent = log_no_dark - load;
            click[station][port] = -log_silent.exp_m1();
            silent[station][port] = log_silent.exp();
        }
    }
    let pattern = |set: &[bool; 3]| {
        set.iter().enumerate().fold(T::one(), |acc, (station, &v)| {
            let (on, off) = if v { (1, 0) } else { (0, 1) };
            acc * click[station][on] * silent[station][off]
        })
    };
    let right = RIGHT_SETS.iter().fold(T::zero(), |acc, s| acc + pattern(s));
    let error = ERROR_SETS.iter().fold(T::zero(), |acc, s| acc + pattern(s));
    [right, error]
}

/// Phase-post-selected right/error coincidence gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainIntegrals<T> {
    pub q_rx: T,
    pub q_ex: T,
    /// Nodes per axis of the accepted quadrature.
    pub nodes: usize,
    pub rel_change: T,
}

/// `(K/π²) ∬_{[0,π/K]²}` of the right and error coincidence products.
pub fn gain_integrals<T: Real>(mu: IntensityTriple<T>, eta: T, p_d: T, k_regions: usize) -> Result<GainIntegrals<T>> {
    gain_integrals_with(mu, eta, p_d, k_regions, DoublingSchedule::default())
}

pub fn gain_integrals_with<T: Real>(
    mu: IntensityTriple<T>,
    eta: T,
    p_d: T,
    k_regions: usize,
    schedule: DoublingSchedule,
) -> Result<GainIntegrals<T>> {
    if k_regions == 0 {
        return Err(Error::Domain("K must be >= 1".into()));
    }
    let k = T::from_count(k_regions);
    let width = T::PI() / k;
    let conv = integrate_square_converged(T::zero(), width, T::quadrature_rel_tol(), schedule, |phi, varphi| {
        coincidence_integrand(phi, varphi, mu, eta, p_d)
    })?;
    let norm = k / (T::PI() * T::PI());
    Ok(GainIntegrals {
        q_rx: norm * conv.value[0],
        q_ex: norm * conv.value[1],
        nodes: conv.nodes,
        rel_change: conv.rel_change,
    })
}

/// Plain evaluation of the normalized integrand, for independent estimators.
pub fn gain_integrand<T: Real>(phi: T, varphi: T, mu: IntensityTriple<T>, eta: T, p_d: T) -> [T; 2] {
    coincidence_integrand(phi, varphi, mu, eta, p_d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainResult<T> {
    pub q_rx: T,
    pub q_ex: T,
    pub q_x: T,
    pub e_x: T,
}

/// Overall X-basis gain and error rate including misalignment `e_d` and the
/// memory fidelity.
pub fn gain_and_qber<T: Real>(
    mu: IntensityTriple<T>,
    eta: T,
    p_d: T,
    k_regions: usize,
    e_d: T,
    fidelity: T,
) -> Result<GainResult<T>> {
    let g = gain_integrals(mu, eta, p_d, k_regions)?;
    Ok(combine_gains(g.q_rx, g.q_ex, e_d, fidelity))
}

pub fn combine_gains<T: Real>(q_rx: T, q_ex: T, e_d: T, fidelity: T) -> GainResult<T> {
    let q_x = q_rx + q_ex;
    let keep = (T::one() - e_d) * fidelity;
    let e_x = if q_x > T::zero() {
        ((T::one() - keep) * q_rx + keep * q_ex) / q_x
    } else {
        T::zero()
    };
    GainResult { q_rx, q_ex, q_x, e_x }
}
