//! Counter-based randomness. Every primitive draw is a pure function of
//! `(master seed, family, player, index, extra)`, so any draw can be
//! addressed directly and replayed without generating its predecessors.

use serde::{Deserialize, Serialize};

use crate::game::{DeterministicPolicy, PlayerId, StochasticGame};
use crate::solver::BestResponseSet;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
fn mix(z: u64) -> u64 {
    let mut z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn below(bits: u64, n: u64) -> u64 {
    ((bits as u128 * n as u128) >> 64) as u64
}

/// Primitive random variable families; the tags keep derivation keys disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Family {
    /// `W_t`, drives state transitions.
    Transition = 0x5701,
    /// `ρ̃^i_t`, decides whether to experiment.
    Experiment = 0x5702,
    /// `ũ^i_t`, the uniform experimental action.
    UniformAction = 0x5703,
    /// `λ̃^i_t`, decides inertia at a phase boundary.
    Inertia = 0x5704,
    /// `π̃^i_t(B)`, a uniform element of a candidate set.
    Candidate = 0x5705,
    /// `T^i_k`, exploration phase lengths.
    PhaseLength = 0x5706,
    InitialState = 0x5707,
    InitialPolicy = 0x5708,
    Trial = 0x5709,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomnessStreams {
    master_seed: u64,
}

impl RandomnessStreams {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Raw 64-bit draw for a fully specified key.
    #[inline]
    pub fn bits(&self, family: Family, player: u64, index: u64, extra: u64) -> u64 {
        let mut h = mix(self.master_seed);
        h = mix(h ^ family as u64);
        h = mix(h ^ player);
        h = mix(h ^ index);
        mix(h ^ extra)
    }

    #[inline]
    pub fn uniform(&self, family: Family, player: u64, index: u64, extra: u64) -> f64 {
        unit_f64(self.bits(family, player, index, extra))
    }

    /// Independent streams for one trial of an experiment.
    pub fn for_trial(&self, trial: u64) -> Self {
        Self::new(self.bits(Family::Trial, 0, trial, 0))
    }

    /// `W_t ∈ [0, 1)`.
    #[inline]
    pub fn transition_draw(&self, t: u64) -> f64 {
        self.uniform(Family::Transition, 0, t, 0)
    }

    /// `ρ̃^i_t ∈ [0, 1)`.
    #[inline]
    pub fn experiment_draw(&self, player: PlayerId, t: u64) -> f64 {
        self.uniform(Family::Experiment, player as u64, t, 0)
    }

    /// `ũ^i_t`, uniform over `0..num_actions`.
    #[inline]
    pub fn uniform_action(&self, player: PlayerId, t: u64, num_actions: usize) -> usize {
        below(self.bits(Family::UniformAction, player as u64, t, 0), num_actions as u64) as usize
    }

    /// `λ̃^i_t ∈ [0, 1)`.
    #[inline]
    pub fn inertia_draw(&self, player: PlayerId, t: u64) -> f64 {
        self.uniform(Family::Inertia, player as u64, t, 0)
    }

    /// `π̃^i_t(B)`: a uniform member of `set`, determined by the seed, the
    /// player, the time and the identity of the set. Only the realized set is
    /// ever materialized.
    pub fn candidate_policy(&self, player: PlayerId, t: u64, set: &BestResponseSet) -> DeterministicPolicy {
        let key = set_key(set);
        // a product set is uniform iff each coordinate is uniform and independent
        let choice = set
            .allowed
            .iter()
            .enumerate()
            .map(|(state, actions)| {
                let bits = self.bits(Family::Candidate, player as u64, t, mix(key ^ state as u64));
                actions[below(bits, actions.len() as u64) as usize]
            })
            .collect();
        DeterministicPolicy::new(player, choice)
    }

    /// `T^i_k`, uniform over the integers `[t_min, ratio·t_min]`.
    pub fn phase_length(&self, player: PlayerId, k: u64, t_min: u64, ratio: u64) -> u64 {
        let span = t_min * ratio - t_min + 1;
        t_min + below(self.bits(Family::PhaseLength, player as u64, k, 0), span)
    }

    pub fn initial_state_draw(&self) -> f64 {
        self.uniform(Family::InitialState, 0, 0, 0)
    }

    /// Uniform element of `Γ^i_SD`.
    pub fn initial_policy(&self, game: &StochasticGame, player: PlayerId) -> DeterministicPolicy {
        let na = game.num_actions(player) as u64;
        let choice = (0..game.num_states())
            .map(|x| below(self.bits(Family::InitialPolicy, player as u64, x as u64, 0), na) as usize)
            .collect();
        DeterministicPolicy::new(player, choice)
    }
}

/// Canonical encoding of a candidate set's membership pattern.
fn set_key(set: &BestResponseSet) -> u64 {
    let mut h = mix(set.allowed.len() as u64);
    for (state, actions) in set.allowed.iter().enumerate() {
        for &a in actions {
            h = mix(h ^ ((state as u64) << 32 | a as u64));
        }
        h = mix(h ^ u64::MAX);
    }
    h
}
