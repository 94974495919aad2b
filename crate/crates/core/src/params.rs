//! Simulation parameters, their flat `key = value` file format, and the
//! channel geometry helpers.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::Real;

/// Physical and protocol constants for one evaluation.
///
/// Config keys are the names in [`KEYS`]; they differ from the Rust field
/// names only where the conventional symbol is not snake case
/// (`eta_D`, `T_QM`, `N`, `K`, `L_km`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams<T> {
    /// Dark/background click probability per detector per gate.
    pub p_d: T,
    /// Memory polarization error probability.
    pub e_q: T,
    /// Probability the memory emits an unpolarized noise photon.
    pub e_b: T,
    /// Misalignment error of the GHZ measurement module.
    pub e_d: T,
    /// Herald (trigger) detector efficiency, `eta_D`.
    pub eta_herald: T,
    /// GHZ-module detector efficiency, `eta_d`.
    pub eta_det: T,
    /// Error-correction inefficiency.
    pub f_ec: T,
    /// Memory survival per loop round trip, `T_QM`.
    pub t_qm: T,
    /// Fiber loss in dB/km.
    pub alpha: T,
    /// Maximum number of storage slots, `N`.
    pub n_slots: usize,
    /// Number of phase post-selection regions, `K`.
    pub k_regions: usize,
    /// Signal intensity.
    pub mu: T,
    /// Decoy intensity; the third intensity is vacuum.
    pub omega: T,
    /// Per-arm fiber length to the measurement node, km.
    pub l_km: T,
    /// Mean pair number per pump pulse of the heralded SPDC sources.
    pub mu_src: T,
    /// Intensity of the weak-coherent-pulse baseline without memory.
    pub mu_wcp: T,
}

/// Config keys in canonical write order.
pub const KEYS: [&str; 16] = [
    "p_d", "e_q", "e_b", "e_d", "eta_D", "eta_d", "f_ec", "T_QM", "alpha", "N", "K", "mu", "omega",
    "L_km", "mu_src", "mu_wcp",
];

impl<T: Real> Default for SimParams<T> {
    fn default() -> Self {
        Self {
            p_d: T::lit(1e-7),
            e_q: T::lit(0.015),
            e_b: T::zero(),
            e_d: T::lit(0.015),
            eta_herald: T::lit(0.93),
            eta_det: T::lit(0.93),
            f_ec: T::lit(1.16),
            t_qm: T::lit(0.98),
            alpha: T::lit(0.2),
            n_slots: 40,
            k_regions: 8,
            mu: T::lit(0.005),
            omega: T::lit(0.0005),
            l_km: T::lit(100.0),
            mu_src: T::lit(0.781),
            mu_wcp: T::lit(0.4),
        }
    }
}

impl<T: Real> SimParams<T> {
    /// Channel transmittance of one arm at the configured length.
    pub fn transmittance(&self) -> T {
        channel_transmittance(self.alpha, self.l_km)
    }

    pub fn with_length(mut self, l_km: T) -> Self {
        self.l_km = l_km;
        self
    }

    pub fn with_t_qm(mut self, t_qm: T) -> Self {
        self.t_qm = t_qm;
        self
    }

    pub fn with_slots(mut self, n_slots: usize) -> Self {
        self.n_slots = n_slots;
        self
    }

    /// Checks every field invariant.
    pub fn validate(&self) -> Result<()> {
        for key in KEYS {
            check_field(self, key, None)?;
        }
        check_decoy_order(self, None)
    }

    /// Converts to another scalar precision.
    pub fn cast<U: Real>(&self) -> SimParams<U> {
        let c = |x: T| U::lit(x.to_f64().expect("finite"));
        SimParams {
            p_d: c(self.p_d),
            e_q: c(self.e_q),
            e_b: c(self.e_b),
            e_d: c(self.e_d),
            eta_herald: c(self.eta_herald),
            eta_det: c(self.eta_det),
            f_ec: c(self.f_ec),
            t_qm: c(self.t_qm),
            alpha: c(self.alpha),
            n_slots: self.n_slots,
            k_regions: self.k_regions,
            mu: c(self.mu),
            omega: c(self.omega),
            l_km: c(self.l_km),
            mu_src: c(self.mu_src),
            mu_wcp: c(self.mu_wcp),
        }
    }

    fn real_field(&mut self, key: &str) -> Option<&mut T> {
        Some(match key {
            "p_d" => &mut self.p_d,
            "e_q" => &mut self.e_q,
            "e_b" => &mut self.e_b,
            "e_d" => &mut self.e_d,
            "eta_D" => &mut self.eta_herald,
            "eta_d" => &mut self.eta_det,
            "f_ec" => &mut self.f_ec,
            "T_QM" => &mut self.t_qm,
            "alpha" => &mut self.alpha,
            "mu" => &mut self.mu,
            "omega" => &mut self.omega,
            "L_km" => &mut self.l_km,
            "mu_src" => &mut self.mu_src,
            "mu_wcp" => &mut self.mu_wcp,
            _ => return None,
        })
    }

    fn int_field(&mut self, key: &str) -> Option<&mut usize> {
        match key {
            "N" => Some(&mut self.n_slots),
            "K" => Some(&mut self.k_regions),
            _ => None,
        }
    }
}

fn static_key(key: &str) -> &'static str {
    KEYS.iter().find(|k| **k == key).copied().unwrap_or("?")
}

fn check_field<T: Real>(p: &SimParams<T>, key: &str, line: Option<usize>) -> Result<()> {
    let range = |ok: bool, message: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                line,
                key: static_key(key),
                message: message.to_string(),
            })
        }
    };
    let prob = |x: T| x >= T::zero() && x <= T::one();
    let nonneg = |x: T| x >= T::zero() && x.is_finite();
    match key {
        "p_d" => range(prob(p.p_d), "probability must lie in [0, 1]"),
        "e_q" => range(prob(p.e_q), "probability must lie in [0, 1]"),
        "e_b" => range(prob(p.e_b), "probability must lie in [0, 1]"),
        "e_d" => range(prob(p.e_d), "probability must lie in [0, 1]"),
        "eta_D" => range(prob(p.eta_herald), "probability must lie in [0, 1]"),
        "eta_d" => range(prob(p.eta_det), "probability must lie in [0, 1]"),
        "T_QM" => range(prob(p.t_qm), "probability must lie in [0, 1]"),
        "f_ec" => range(p.f_ec >= T::one() && p.f_ec.is_finite(), "must be >= 1"),
        "alpha" => range(nonneg(p.alpha), "must be >= 0"),
        "N" => range(p.n_slots >= 1, "must be >= 1"),
        "K" => range(p.k_regions >= 1, "must be >= 1"),
        "mu" => range(nonneg(p.mu), "must be >= 0"),
        "omega" => range(nonneg(p.omega), "must be >= 0"),
        "L_km" => range(nonneg(p.l_km), "must be >= 0"),
        "mu_src" => range(nonneg(p.mu_src), "must be >= 0"),
        "mu_wcp" => range(nonneg(p.mu_wcp), "must be >= 0"),
        _ => Ok(()),
    }
}

fn check_decoy_order<T: Real>(p: &SimParams<T>, line: Option<usize>) -> Result<()> {
    if p.omega < p.mu {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            line,
            key: "omega",
            message: "decoy intensity must be below the signal intensity mu".into(),
        })
    }
}

/// Parses the flat config text. Absent keys keep their defaults.
pub fn parse_config<T: Real>(text: &str) -> Result<SimParams<T>> {
    let mut params = SimParams::<T>::default();
    let mut seen = HashSet::new();
    let mut omega_line = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, found `{trimmed}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
        let bad_value = |what: &str| Error::Parse {
            line,
            message: format!("`{key}`: cannot parse `{value}` as {what}"),
        };
        if let Some(slot) = params.int_field(key) {
            *slot = value.parse().map_err(|_| bad_value("a non-negative integer"))?;
        } else if let Some(slot) = params.real_field(key) {
            let x: T = value.parse().map_err(|_| bad_value("a number"))?;
            if x.is_nan() {
                return Err(bad_value("a number"));
            }
            *slot = x;
        }
        check_field(&params, key, Some(line))?;
        if key == "omega" || key == "mu" {
            omega_line = Some(line);
        }
    }
    check_decoy_order(&params, omega_line)?;
    Ok(params)
}

pub fn load_config<T: Real>(path: impl AsRef<Path>) -> Result<SimParams<T>> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Canonical writer: every key, in [`KEYS`] order, shortest round-trip floats.
pub fn write_config<T: Real>(p: &SimParams<T>) -> String {
    let mut copy = *p;
    let mut out = String::new();
    for key in KEYS {
        if let Some(v) = copy.int_field(key) {
            let _ = writeln!(out, "{key} = {v}");
        } else if let Some(v) = copy.real_field(key) {
            let _ = writeln!(out, "{key} = {v:e}");
        }
    }
    out
}

/// `10^(-alpha L / 10)`.
pub fn channel_transmittance<T: Real>(alpha: T, l_km: T) -> T {
    T::lit(10.0).powf(-alpha * l_km / T::lit(10.0))
}

/// User-to-user distance for three users at equal arm length `l_km` from
/// a central node in an equilateral layout.
pub fn user_separation<T: Real>(l_km: T) -> T {
    T::lit(3.0).sqrt() * l_km
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_gives_defaults() {
        let p: SimParams<f64> = parse_config("").unwrap();
        assert_eq!(p, SimParams::default());
        assert_eq!(p.p_d, 1e-7);
        assert_eq!(p.e_q, 0.015);
        assert_eq!(p.e_d, 0.015);
        assert_eq!(p.eta_herald, 0.93);
        assert_eq!(p.eta_det, 0.93);
        assert_eq!(p.f_ec, 1.16);
        assert_eq!(p.t_qm, 0.98);
        assert_eq!(p.alpha, 0.2);
        assert_eq!((p.n_slots, p.k_regions), (40, 8));
        assert_eq!((p.mu, p.omega, p.e_b), (0.005, 0.0005, 0.0));
    }

    #[test]
    fn single_override() {
        let p: SimParams<f64> = parse_config("# memory\nT_QM = 0.7\n").unwrap();
        assert_eq!(p, SimParams::default().with_t_qm(0.7));
    }

    #[test]
    fn probability_out_of_range_reports_line() {
        let err = parse_config::<f64>("\n\nT_QM = 1.3").unwrap_err();
        match err {
            Error::OutOfRange { line, key, .. } => {
                assert_eq!(line, Some(3));
                assert_eq!(key, "T_QM");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_and_parse_failures() {
        assert!(matches!(
            parse_config::<f64>("p_d = 1e-7\nfoo = 1"),
            Err(Error::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(
            parse_config::<f64>("alpha = fast"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_config::<f64>("N = -3"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_config::<f64>("no equals sign"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_config::<f64>("mu = 0.1\nmu = 0.2"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_config::<f64>("N = 0"),
            Err(Error::OutOfRange { key: "N", .. })
        ));
        assert!(matches!(
            parse_config::<f64>("f_ec = 0.9"),
            Err(Error::OutOfRange { key: "f_ec", .. })
        ));
    }

    #[test]
    fn decoy_must_be_weaker_than_signal() {
        let err = parse_config::<f64>("mu = 0.001\nomega = 0.001").unwrap_err();
        assert!(matches!(err, Error::OutOfRange { key: "omega", line: Some(2), .. }));
    }

    #[test]
    fn transmittance_examples() {
        assert_eq!(channel_transmittance(0.2_f64, 0.0), 1.0);
        assert!((channel_transmittance(0.2_f64, 50.0) - 0.1).abs() < 1e-15);
        assert!((channel_transmittance(0.2_f64, 100.0) - 0.01).abs() < 1e-16);
    }

    #[test]
    fn separation_examples() {
        assert!((user_separation(261.0_f64) - 452.07).abs() < 0.01);
        assert_eq!(user_separation(0.0_f64), 0.0);
        assert!((user_separation(100.0_f64) - 173.205_080_756_887_7).abs() < 1e-9);
    }

    #[test]
    fn f32_defaults_parse() {
        let p: SimParams<f32> = parse_config("T_QM = 0.9").unwrap();
        assert_eq!(p.t_qm, 0.9_f32);
        assert_eq!(p.cast::<f64>().n_slots, 40);
    }

    fn arb_params() -> impl Strategy<Value = SimParams<f64>> {
        (
            (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64),
            (0.0..=1.0f64, 0.0..=1.0f64, 1.0..3.0f64, 0.0..=1.0f64),
            (0.0..1.0f64, 1usize..200, 1usize..64),
            (1e-4..1.0f64, 0.0..1.0f64, 0.0..500.0f64, 0.0..2.0f64, 0.0..2.0f64),
        )
            .prop_map(|(a, b, c, d)| SimParams {
                p_d: a.0,
                e_q: a.1,
                e_b: a.2,
                e_d: a.3,
                eta_herald: b.0,
                eta_det: b.1,
                f_ec: b.2,
                t_qm: b.3,
                alpha: c.0,
                n_slots: c.1,
                k_regions: c.2,
                mu: d.0,
                omega: d.0 * d.1,
                l_km: d.2,
                mu_src: d.3,
                mu_wcp: d.4,
            })
    }

    proptest! {
        #[test]
        fn write_then_load_round_trips(p in arb_params()) {
            p.validate().unwrap();
            let back: SimParams<f64> = parse_config(&write_config(&p)).unwrap();
            prop_assert_eq!(back, p);
        }

        #[test]
        fn transmittance_strictly_decreasing(alpha in 0.01..1.0f64, l in 0.0..400.0f64, dl in 0.1..50.0f64) {
            prop_assert!(channel_transmittance(alpha, l + dl) < channel_transmittance(alpha, l));
        }
    }
}
