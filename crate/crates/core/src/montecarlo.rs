//! Slot-level Monte Carlo of heralding, storage and readout, a symbolic
//! trace of the storage loop optics, and ideal sifting statistics.
//!
//! Every trial draws from its own ChaCha8 stream (`stream = trial index`),
//! so results for the first `n` trials do not depend on the total count and
//! are identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ghz::{projection_probs_raw, sift, Basis, GhzOutcome, Polarization, SiftResult};
use crate::params::SimParams;
use crate::sync::SyncModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhotonSource {
    /// Heralded SPDC with thermal pair statistics of mean `mu_src`.
    #[default]
    Thermal,
    /// Exactly one photon per slot.
    SinglePhoton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub seed: u64,
    pub trials: u64,
    pub params: SimParams<f64>,
    pub source: PhotonSource,
}

impl McConfig {
    pub fn new(seed: u64, trials: u64, params: SimParams<f64>) -> Self {
        Self {
            seed,
            trials,
            params,
            source: PhotonSource::Thermal,
        }
    }

    fn trial_rng(&self, base: &ChaCha8Rng, trial: u64) -> ChaCha8Rng {
        let mut rng = base.clone();
        rng.set_stream(trial);
        rng
    }
}

/// Binomial success frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
}

impl Estimate {
    pub fn mean(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.successes as f64 / self.trials as f64
    }

    pub fn std_err(&self) -> f64 {
        if self.trials == 0 {
            return f64::INFINITY;
        }
        let p = self.mean();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Deviation from `expected` in units of the binomial standard error
    /// at `expected`; falls back to the empirical error when `expected` is
    /// 0 or 1.
    pub fn z_score(&self, expected: f64) -> f64 {
        let diff = self.mean() - expected;
        if diff == 0.0 {
            return 0.0;
        }
        let se = if expected > 0.0 && expected < 1.0 {
            (expected * (1.0 - expected) / self.trials as f64).sqrt()
        } else {
            self.std_err()
        };
        if se > 0.0 {
            diff / se
        } else {
            f64::INFINITY.copysign(diff)
        }
    }
}

/// Per-arm memory content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ArmState {
    pub stored_photons: u32,
    pub entry_slot: usize,
    pub heralded: bool,
}

struct ArmSampler {
    /// `ln(mu / (1 + mu))` for inverse-transform geometric sampling.
    log_ratio: f64,
    miss: f64,
    source: PhotonSource,
}

impl ArmSampler {
    fn new(p: &SimParams<f64>, source: PhotonSource) -> Self {
        let mu = p.mu_src;
        Self {
            log_ratio: (mu / (1.0 + mu)).ln(),
            miss: 1.0 - p.eta_herald,
            source,
        }
    }

    fn pair_number(&self, rng: &mut ChaCha8Rng) -> u32 {
        match self.source {
            PhotonSource::SinglePhoton => 1,
            PhotonSource::Thermal => {
                if self.log_ratio == f64::NEG_INFINITY {
                    return 0;
                }
                let u: f64 = 1.0 - rng.random::<f64>();
                (u.ln() / self.log_ratio).floor().min(u32::MAX as f64) as u32
            }
        }
    }

    fn heralds(&self, k: u32, rng: &mut ChaCha8Rng) -> bool {
        k > 0 && rng.random::<f64>() >= self.miss.powi(k as i32)
    }
}

fn survivors(k: u32, survival: f64, rng: &mut ChaCha8Rng) -> u32 {
    (0..k).filter(|_| rng.random::<f64>() < survival).count() as u32
}

/// Per-slot event log of one synchronization attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McRecord {
    pub slot: usize,
    pub heralds: [bool; 3],
    pub arms: [ArmState; 3],
    /// Surviving photons per arm, filled in the readout slot only.
    pub readout: Option<[u32; 3]>,
}

/// One synchronization attempt: true if all three memories hold exactly
/// one photon when they are read out.
fn sync_trial(
    p: &SimParams<f64>,
    arm: &ArmSampler,
    t_c: f64,
    rng: &mut ChaCha8Rng,
    mut log: Option<&mut Vec<McRecord>>,
) -> bool {
    let mut arms = [ArmState::default(); 3];
    for slot in 1..=p.n_slots {
        let mut heralds = [false; 3];
        for (a, h) in arms.iter_mut().zip(heralds.iter_mut()) {
            let k = arm.pair_number(rng);
            if arm.heralds(k, rng) {
                *h = true;
                *a = ArmState {
                    stored_photons: k,
                    entry_slot: slot,
                    heralded: true,
                };
            }
        }
        let readout = arms.iter().all(|a| a.heralded).then(|| {
            arms.map(|a| {
                let rounds = (slot - a.entry_slot + 1) as i32;
                survivors(a.stored_photons, t_c * p.t_qm.powi(rounds), rng)
            })
        });
        if let Some(log) = log.as_deref_mut() {
            log.push(McRecord {
                slot,
                heralds,
                arms,
                readout,
            });
        }
        if let Some(left) = readout {
            return left == [1, 1, 1];
        }
    }
    false
}

/// Event log of trial `trial` under `cfg`, identical to the draws used by
/// [`simulate_sync`].
pub fn trace_sync_trial(cfg: &McConfig, trial: u64) -> (bool, Vec<McRecord>) {
    let p = cfg.params;
    let arm = ArmSampler::new(&p, cfg.source);
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = Vec::new();
    let ok = sync_trial(&p, &arm, p.transmittance(), &mut cfg.trial_rng(&base, trial), Some(&mut log));
    (ok, log)
}

/// Frequency with which all three parties are read out with one photon
/// each inside the storage window. A herald in the readout slot replaces
/// the stored photon before readout.
pub fn simulate_sync(cfg: &McConfig) -> Estimate {
    let p = cfg.params;
    let arm = ArmSampler::new(&p, cfg.source);
    let t_c = p.transmittance();
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let successes = (0..cfg.trials)
        .into_par_iter()
        .filter(|&i| sync_trial(&p, &arm, t_c, &mut cfg.trial_rng(&base, i), None))
        .count() as u64;
    Estimate {
        successes,
        trials: cfg.trials,
    }
}

/// Fixed comparison grid: arm length (km), slots, memory survival.
pub fn validation_grid() -> Vec<(f64, usize, f64)> {
    let mut grid = Vec::new();
    for l in [0.0, 10.0, 25.0] {
        for n in [1, 3, 5] {
            for t in [0.9, 0.98] {
                grid.push((l, n, t));
            }
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationRow {
    pub l_km: f64,
    pub n_slots: usize,
    pub t_qm: f64,
    pub analytic: f64,
    pub estimate: Estimate,
    pub z: f64,
}

/// Monte Carlo against the analytic synchronization probability at each
/// grid point. Each point uses the seed offset by its grid index.
pub fn validate_sync(base: &SimParams<f64>, seed: u64, trials: u64) -> Result<Vec<ValidationRow>> {
    validation_grid()
        .into_iter()
        .enumerate()
        .map(|(i, (l, n, t))| {
            let params = base.with_length(l).with_slots(n).with_t_qm(t);
            let analytic = SyncModel::from_params(&params)?.sync_success(3);
            let estimate = simulate_sync(&McConfig::new(seed.wrapping_add(i as u64), trials, params));
            Ok(ValidationRow {
                l_km: l,
                n_slots: n,
                t_qm: t,
                analytic,
                estimate,
                z: estimate.z_score(analytic),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinearPol {
    H,
    V,
}

impl LinearPol {
    pub fn flipped(self) -> Self {
        match self {
            Self::H => Self::V,
            Self::V => Self::H,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoopPort {
    A1In,
    A2,
    A3,
    A4,
    A1Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LoopPhoton {
    pub polarization: LinearPol,
    pub position: LoopPort,
    pub round_trips: usize,
}

impl LoopPhoton {
    pub fn entering(polarization: LinearPol) -> Self {
        Self {
            polarization,
            position: LoopPort::A1In,
            round_trips: 0,
        }
    }
}

/// PBS: H is transmitted, V reflected.
fn pbs(from: LoopPort, pol: LinearPol) -> Result<LoopPort> {
    use LinearPol::*;
    use LoopPort::*;
    Ok(match (from, pol) {
        (A1In, H) => A2,
        (A1In, V) => A3,
        (A3, H) | (A2, V) => A4,
        (A4, H) => A3,
        (A4, V) => A2,
        (A3, V) | (A2, H) => A1Out,
        _ => return Err(Error::Routing(format!("PBS input {from:?} with {pol:?}"))),
    })
}

/// Every mode the photon occupies from entry to exit when it is kept for
/// `rounds` passes through the mirror arm. The modulator is off on the
/// first and last pass and on for the passes in between.
pub fn loop_path(input: LoopPhoton, rounds: usize) -> Result<Vec<LoopPhoton>> {
    if rounds == 0 {
        return Err(Error::Domain("at least one round trip is required".into()));
    }
    if input.position != LoopPort::A1In {
        return Err(Error::Routing(format!("photon enters at {:?}", input.position)));
    }
    let mut path = vec![input];
    let mut cur = input;
    let mut eom_passes = 0;
    loop {
        let next = match cur.position {
            LoopPort::A1In | LoopPort::A4 => LoopPhoton {
                position: pbs(cur.position, cur.polarization)?,
                ..cur
            },
            LoopPort::A2 | LoopPort::A3 if path.len() >= 2 && arrived_through_eom(&path) => LoopPhoton {
                position: pbs(cur.position, cur.polarization)?,
                ..cur
            },
            LoopPort::A2 | LoopPort::A3 => {
                let on = eom_passes > 0 && eom_passes < rounds;
                eom_passes += 1;
                LoopPhoton {
                    polarization: if on { cur.polarization.flipped() } else { cur.polarization },
                    position: if cur.position == LoopPort::A2 { LoopPort::A3 } else { LoopPort::A2 },
                    ..cur
                }
            }
            LoopPort::A1Out => unreachable!("exit handled below"),
        };
        let next = if next.position == LoopPort::A4 {
            // Mirror arm: the double pass through the QWP flips polarization.
            path.push(next);
            LoopPhoton {
                polarization: next.polarization.flipped(),
                round_trips: next.round_trips + 1,
                ..next
            }
        } else {
            next
        };
        path.push(next);
        if next.position == LoopPort::A1Out {
            if next.round_trips != rounds || eom_passes != rounds + 1 {
                return Err(Error::Routing(format!(
                    "exit after {} round trips and {eom_passes} modulator passes, expected {rounds}",
                    next.round_trips
                )));
            }
            return Ok(path);
        }
        if next.round_trips > rounds {
            return Err(Error::Routing(format!("photon still stored after {rounds} round trips")));
        }
        cur = next;
    }
}

/// True if the last move was across the modulator (so the photon now
/// faces the PBS).
fn arrived_through_eom(path: &[LoopPhoton]) -> bool {
    let [.., prev, last] = path else { return false };
    matches!(
        (prev.position, last.position),
        (LoopPort::A2, LoopPort::A3) | (LoopPort::A3, LoopPort::A2)
    )
}

/// Final state of [`loop_path`].
pub fn loop_trace(input: LoopPhoton, rounds: usize) -> Result<LoopPhoton> {
    Ok(*loop_path(input, rounds)?.last().expect("path is never empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SiftStats {
    pub trials: u64,
    pub z_checks: u64,
    pub z_failures: u64,
    pub x_keys: u64,
    pub x_parity_ok: u64,
    pub discards: u64,
}

impl SiftStats {
    fn add(self, o: Self) -> Self {
        Self {
            trials: self.trials + o.trials,
            z_checks: self.z_checks + o.z_checks,
            z_failures: self.z_failures + o.z_failures,
            x_keys: self.x_keys + o.x_keys,
            x_parity_ok: self.x_parity_ok + o.x_parity_ok,
            discards: self.discards + o.discards,
        }
    }

    pub fn success_fraction(&self) -> f64 {
        (self.trials - self.discards) as f64 / self.trials as f64
    }

    pub fn parity_rate(&self) -> f64 {
        self.x_parity_ok as f64 / self.x_keys as f64
    }
}

/// Basis choice used by [`simulate_sifting`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisPolicy {
    #[default]
    Uniform,
    AllZ,
    AllX,
}

/// Ideal single-photon rounds: random bits (and bases under
/// [`BasisPolicy::Uniform`]), GHZ outcomes drawn from the Born
/// probabilities, then sifted. The analyzer's failure branch is a discard.
pub fn simulate_sifting(cfg: &McConfig, policy: BasisPolicy) -> SiftStats {
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.trial_rng(&base, i);
            let bases: [Basis; 3] = std::array::from_fn(|_| match policy {
                BasisPolicy::AllZ => Basis::Z,
                BasisPolicy::AllX => Basis::X,
                BasisPolicy::Uniform => {
                    if rng.random::<bool>() {
                        Basis::X
                    } else {
                        Basis::Z
                    }
                }
            });
            let bits: [u8; 3] = std::array::from_fn(|_| u8::from(rng.random::<bool>()));
            let inputs = std::array::from_fn(|k| Polarization::encode(bases[k], bits[k]));
            let probs = projection_probs_raw(inputs);
            let u: f64 = rng.random();
            let outcome = if u < probs.phi_plus {
                GhzOutcome::PhiPlus
            } else if u < probs.total() {
                GhzOutcome::PhiMinus
            } else {
                GhzOutcome::Failure
            };
            let mut s = SiftStats {
                trials: 1,
                ..SiftStats::default()
            };
            match sift(outcome, bases, bits) {
                SiftResult::SecurityCheck { pass } => {
                    s.z_checks = 1;
                    s.z_failures = u64::from(!pass);
                }
                SiftResult::RawKey { parity_ok } => {
                    s.x_keys = 1;
                    s.x_parity_ok = u64::from(parity_ok);
                }
                SiftResult::Discard => s.discards = 1,
            }
            s
        })
        .reduce(SiftStats::default, SiftStats::add)
}
