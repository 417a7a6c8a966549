//! Cohort layout and per-repetition event sampling.
//!
//! Sampling algorithm (all uniforms are `f64` in `[0,1)` from the ChaCha8
//! stream documented in [`crate::rng`]):
//!
//! * Layout, stream `[COHORT]`: a Fisher-Yates shuffle of the leg (or, for
//!   complementary pairing, subject) indices; the first `round(split * n)` of
//!   the shuffled order are unhealthy. Then, if devices are shuffled, one
//!   uniform per subject; `u < 0.5` swaps the devices.
//! * Events, stream `[EVENTS, session_index]`: one uniform per source for
//!   session-scoped activation, then per repetition one uniform per source for
//!   repetition-scoped activation, then the observation draw: one uniform per
//!   source for a per-source channel (observed iff active and `u < q_k`), or a
//!   single uniform inverted against the channel column for a table channel.
//!   A source is on iff `u < p(on | health)`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::events::index_to_mask;
use super::world::{ActivationScope, DeviceAssignment, DeviceSlot, Pairing, SensorChannel, WorldSpec};
use crate::error::Result;
use crate::labels::{Health, Side};
use crate::rng::{stream, tag};

/// Layout of one recording session before any signal is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub index: usize,
    pub session_id: String,
    pub subject_index: usize,
    pub subject_id: String,
    pub side: Side,
    pub device: DeviceSlot,
    pub health: Health,
    pub day: usize,
    /// Sources forced on for the whole session.
    pub forced_mask: u32,
}

pub fn subject_id(subject_index: usize) -> String {
    format!("s{:03}", subject_index + 1)
}

pub fn session_id(subject_index: usize, side: Side, day: usize) -> String {
    let s = match side {
        Side::Left => 'L',
        Side::Right => 'R',
    };
    format!("{}-{s}-d{}", subject_id(subject_index), day + 1)
}

pub fn plan_sessions(world: &WorldSpec) -> Result<Vec<SessionPlan>> {
    world.validate()?;
    let c = &world.cohort;
    let mut rng = stream(world.seed, &[tag::COHORT]);
    let sides: &[Side] = if c.legs_per_subject == 2 { &[Side::Left, Side::Right] } else { &[Side::Right] };

    // health[subject][leg position within `sides`]
    let health: Vec<Vec<Health>> = match c.pairing {
        Pairing::Independent => {
            let n_legs = c.n_subjects * sides.len();
            let unhealthy = unhealthy_set(n_legs, c.health_split, &mut rng);
            (0..c.n_subjects)
                .map(|s| (0..sides.len()).map(|l| Health::from_unhealthy(unhealthy[s * sides.len() + l])).collect())
                .collect()
        }
        Pairing::Complementary => {
            let left_unhealthy = unhealthy_set(c.n_subjects, c.health_split, &mut rng);
            (0..c.n_subjects)
                .map(|s| {
                    sides
                        .iter()
                        .map(|side| Health::from_unhealthy((*side == Side::Left) == left_unhealthy[s]))
                        .collect()
                })
                .collect()
        }
    };

    let swapped: Vec<bool> = match c.device_assignment {
        DeviceAssignment::SideLocked => vec![false; c.n_subjects],
        DeviceAssignment::Shuffled => (0..c.n_subjects).map(|_| rng.random::<f64>() < 0.5).collect(),
    };

    let mut forced_left: Vec<usize> = world.base_sources.iter().map(|s| s.force_on_healthy_legs).collect();
    let mut plans = Vec::with_capacity(c.n_subjects * sides.len() * c.sessions_per_leg);
    for s in 0..c.n_subjects {
        for (l, &side) in sides.iter().enumerate() {
            let h = health[s][l];
            let mut forced_mask = 0u32;
            if h == Health::Healthy {
                for (k, left) in forced_left.iter_mut().enumerate() {
                    if *left > 0 {
                        *left -= 1;
                        forced_mask |= 1 << k;
                    }
                }
            }
            let device = DeviceSlot::for_side(if swapped[s] { side.other() } else { side });
            for day in 0..c.sessions_per_leg {
                plans.push(SessionPlan {
                    index: plans.len(),
                    session_id: session_id(s, side, day),
                    subject_index: s,
                    subject_id: subject_id(s),
                    side,
                    device,
                    health: h,
                    day,
                    forced_mask,
                });
            }
        }
    }
    Ok(plans)
}

fn unhealthy_set(n: usize, split: f64, rng: &mut impl Rng) -> Vec<bool> {
    let n_unhealthy = ((split * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out = vec![false; n];
    for &i in &order[..n_unhealthy] {
        out[i] = true;
    }
    out
}

/// Ground-truth source states of one repetition, as bit masks over sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepetitionEvents {
    pub active: u32,
    pub observed: u32,
}

pub fn sample_session_events(world: &WorldSpec, plan: &SessionPlan) -> Vec<RepetitionEvents> {
    let n = world.n_sources();
    let mut rng = stream(world.seed, &[tag::EVENTS, plan.index as u64]);
    let probs: Vec<f64> = world.base_sources.iter().map(|s| s.activation.given(plan.health)).collect();
    let session_on: Vec<bool> = probs.iter().map(|&p| rng.random::<f64>() < p).collect();

    (0..world.cohort.n_repetitions)
        .map(|_| {
            let mut active = plan.forced_mask;
            for (k, src) in world.base_sources.iter().enumerate() {
                let rep_on = rng.random::<f64>() < probs[k];
                let on = match src.scope {
                    ActivationScope::Session => session_on[k],
                    ActivationScope::Repetition => rep_on,
                };
                if on {
                    active |= 1 << k;
                }
            }
            let observed = observe(&world.sensor_channel, active, n, &mut rng);
            RepetitionEvents { active, observed }
        })
        .collect()
}

fn observe(channel: &SensorChannel, active: u32, n: usize, rng: &mut impl Rng) -> u32 {
    match channel {
        SensorChannel::PerSource { detection } => {
            let mut observed = 0u32;
            for (k, &q) in detection.iter().enumerate() {
                let u = rng.random::<f64>();
                if active >> k & 1 == 1 && u < q {
                    observed |= 1 << k;
                }
            }
            observed
        }
        SensorChannel::Table { matrix } => {
            let j = index_to_mask(active as usize, n) as usize;
            let u = rng.random::<f64>();
            let mut acc = 0.0;
            let mut chosen = matrix.len() - 1;
            for (i, row) in matrix.iter().enumerate() {
                acc += row[j];
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            index_to_mask(chosen, n)
        }
    }
}
