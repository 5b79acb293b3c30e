//! Exploration-phase schedules and the active phases derived from them.

use serde::{Deserialize, Serialize};

use super::streams::RandomnessStreams;
use crate::error::{Error, Result};

/// Per-player phase lengths `T^i_k` and boundary times `t^i_k`, with
/// `t^i_0 = 0` and `t^i_{k+1} = t^i_k + T^i_k`. Each player's boundary list
/// runs until the first boundary strictly after `horizon`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub t_min: u64,
    pub ratio: u64,
    pub horizon: u64,
    pub lengths: Vec<Vec<u64>>,
    pub boundaries: Vec<Vec<u64>>,
}

impl Schedule {
    /// Builds a schedule from explicit lengths, checking `T ≤ T^i_k ≤ R·T`
    /// and that each player's phases reach past the horizon.
    pub fn from_lengths(t_min: u64, ratio: u64, horizon: u64, lengths: Vec<Vec<u64>>) -> Result<Self> {
        check_t_r(t_min, ratio)?;
        let mut boundaries = Vec::with_capacity(lengths.len());
        for (player, ls) in lengths.iter().enumerate() {
            let mut b = vec![0u64];
            for &len in ls {
                if len < t_min || len > t_min * ratio {
                    return Err(Error::Invalid(format!(
                        "phase length {len} of player {player} outside [{t_min}, {}]",
                        t_min * ratio
                    )));
                }
                b.push(b.last().unwrap() + len);
            }
            if *b.last().unwrap() <= horizon {
                return Err(Error::Invalid(format!("phases of player {player} end before the horizon")));
            }
            boundaries.push(b);
        }
        Ok(Self { t_min, ratio, horizon, lengths, boundaries })
    }

    pub fn num_players(&self) -> usize {
        self.lengths.len()
    }

    /// `T^i_k`.
    pub fn phase_length(&self, player: usize, k: usize) -> u64 {
        self.lengths[player][k]
    }

    /// Boundary times of one player with `0 < t ≤ horizon`.
    pub fn boundaries_within_horizon(&self, player: usize) -> impl Iterator<Item = u64> + '_ {
        let h = self.horizon;
        self.boundaries[player].iter().copied().filter(move |&t| t > 0 && t <= h)
    }
}

fn check_t_r(t_min: u64, ratio: u64) -> Result<()> {
    if t_min == 0 || ratio == 0 {
        return Err(Error::Invalid("T and R must be at least 1".into()));
    }
    Ok(())
}

/// Draws every `T^i_k` uniformly from the integers `[T, R·T]` until each
/// player's boundaries pass `horizon`.
pub fn draw_schedule(
    streams: &RandomnessStreams,
    num_players: usize,
    t_min: u64,
    ratio: u64,
    horizon: u64,
) -> Result<Schedule> {
    check_t_r(t_min, ratio)?;
    let mut lengths = Vec::with_capacity(num_players);
    let mut boundaries = Vec::with_capacity(num_players);
    for player in 0..num_players {
        let mut ls = Vec::new();
        let mut b = vec![0u64];
        let mut k = 0u64;
        while *b.last().unwrap() <= horizon {
            let len = streams.phase_length(player, k, t_min, ratio);
            ls.push(len);
            b.push(b.last().unwrap() + len);
            k += 1;
        }
        lengths.push(ls);
        boundaries.push(b);
    }
    Ok(Schedule { t_min, ratio, horizon, lengths, boundaries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivePhase {
    pub index: usize,
    pub tau_min: u64,
    pub tau_max: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivePhases {
    pub phases: Vec<ActivePhase>,
    /// Set when some boundary at or before the horizon belongs to a phase
    /// that could not be completed within the known schedule.
    pub truncated: bool,
}

/// Active phases `[τ^min_k, τ^max_k]`, starting from `τ^min_0 = τ^max_0 = 0`.
///
/// `τ^min_{k+1}` is the first boundary after `τ^max_k`; `τ^max_{k+1}` is the
/// first time `t ≥ τ^min_{k+1}` by which every player has had a boundary in
/// `[τ^min_{k+1}, t]` and after which no boundary occurs for `T/N` steps.
/// Only phases with `τ^max ≤ horizon` are returned.
pub fn active_phases(schedule: &Schedule, num_players: usize, t_min: u64) -> ActivePhases {
    let n = num_players as u64;
    let per_player: Vec<&[u64]> = schedule.boundaries.iter().map(|b| &b[1..]).collect();
    // every boundary up to `known` is in the schedule, for every player
    let known = per_player.iter().map(|b| b.last().copied().unwrap_or(0)).min().unwrap_or(0);
    let mut merged: Vec<u64> = per_player.iter().flat_map(|b| b.iter().copied()).filter(|&t| t <= known).collect();
    merged.sort_unstable();
    merged.dedup();

    let mut phases = vec![ActivePhase { index: 0, tau_min: 0, tau_max: 0 }];
    let mut prev_max = 0u64;
    loop {
        let start = merged.partition_point(|&t| t <= prev_max);
        let Some(&tau_min) = merged.get(start) else { break };
        // earliest time by which every player has a boundary in [tau_min, t]
        let cover = per_player
            .iter()
            .map(|b| b.get(b.partition_point(|&t| t < tau_min)).copied())
            .try_fold(0u64, |m, x| x.map(|x| m.max(x)));
        let Some(cover) = cover else { break };
        let mut j = merged.partition_point(|&t| t < cover);
        let tau_max = loop {
            match (merged.get(j), merged.get(j + 1)) {
                // next boundary at least T/N later
                (Some(&t), Some(&next)) if (next - t) * n >= t_min => break Some(t),
                (Some(_), Some(_)) => j += 1,
                _ => break None,
            }
        };
        match tau_max {
            Some(t) if t <= schedule.horizon => {
                phases.push(ActivePhase { index: phases.len(), tau_min, tau_max: t });
                prev_max = t;
            }
            _ => break,
        }
    }
    let truncated = merged.iter().any(|&t| t > prev_max && t <= schedule.horizon)
        || per_player.iter().flat_map(|b| b.iter()).any(|&t| t > known && t <= schedule.horizon);
    ActivePhases { phases, truncated }
}
