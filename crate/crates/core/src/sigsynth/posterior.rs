//! Exact Bayes posterior p(H | X) by enumeration over composite events.
//!
//! The feature map is modeled as a quantizer: given the observation event
//! O_i, the feature falls into cell `x` with probability `emission[i][x]`.
//! Then
//!
//! ```text
//! p(h | x) = 1/p(x) * sum_i p(h | x, O_i) p(x | O_i) sum_j p(O_i | S_j) p(S_j)
//! ```
//!
//! with `p(h | x, O_i) = p(h | O_i)` since the quantizer sees only O_i.
//! Forced activations (`force_on_healthy_legs`) are cohort bookkeeping and
//! are not part of this probabilistic model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cohort::{plan_sessions, sample_session_events};
use super::events::{index_to_mask, n_events};
use super::world::WorldSpec;
use crate::error::{Error, Result};
use crate::labels::{Health, Side};
use crate::rng::{stream, tag};

pub const MAX_POSTERIOR_SOURCES: usize = 8;
pub const MAX_CELLS: usize = 100_000;

/// Stochastic map from observation events to feature cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    n_cells: usize,
    /// `emission[i][x]` = p(X = x | O_i), rows indexed by observation event index.
    emission: Vec<Vec<f64>>,
}

impl QuantizerSpec {
    pub fn new(emission: Vec<Vec<f64>>) -> Result<Self> {
        let n_cells = emission.first().map_or(0, Vec::len);
        if n_cells == 0 {
            return Err(Error::param("quantizer needs at least one cell"));
        }
        if n_cells > MAX_CELLS {
            return Err(Error::Capacity { what: "quantizer cells", requested: n_cells, max: MAX_CELLS });
        }
        if !emission.len().is_power_of_two() {
            return Err(Error::param("quantizer rows must cover all 2^N observation events"));
        }
        for (i, row) in emission.iter().enumerate() {
            if row.len() != n_cells {
                return Err(Error::param(format!("quantizer row {i} has {} cells, expected {n_cells}", row.len())));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::param(format!("quantizer row {i} has an entry outside [0,1]")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::param(format!("quantizer row {i} sums to {total}")));
            }
        }
        Ok(Self { n_cells, emission })
    }

    /// One cell per observed-source mask; each source bit is flipped
    /// independently with probability `flip`.
    pub fn noisy_bits(n_sources: usize, flip: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&flip) {
            return Err(Error::param("flip probability outside [0,1]"));
        }
        let m = n_events(n_sources);
        let emission = (0..m)
            .map(|i| {
                let observed = index_to_mask(i, n_sources);
                (0..m as u32)
                    .map(|cell| {
                        let flips = (cell ^ observed).count_ones() as i32;
                        flip.powi(flips) * (1.0 - flip).powi(n_sources as i32 - flips)
                    })
                    .collect()
            })
            .collect();
        Self::new(emission)
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_observations(&self) -> usize {
        self.emission.len()
    }

    pub fn emission(&self, observation: usize, cell: usize) -> f64 {
        self.emission[observation][cell]
    }

    pub fn sample(&self, observation: usize, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let row = &self.emission[observation];
        let mut acc = 0.0;
        for (x, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return x;
            }
        }
        row.iter().rposition(|p| *p > 0.0).unwrap_or(self.n_cells - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPosterior {
    pub cell: usize,
    pub p_cell: f64,
    pub p_healthy: f64,
    pub p_unhealthy: f64,
}

impl CellPosterior {
    pub fn given(&self, h: Health) -> f64 {
        match h {
            Health::Healthy => self.p_healthy,
            Health::Unhealthy => self.p_unhealthy,
        }
    }

    /// Bayes decision, ties to Healthy.
    pub fn decision(&self) -> Health {
        Health::from_unhealthy(self.p_unhealthy > self.p_healthy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorTable {
    pub prior_unhealthy: f64,
    /// Cells with positive probability, ascending.
    pub cells: Vec<CellPosterior>,
    /// Cells that carry no probability mass.
    pub undefined: Vec<usize>,
}

impl PosteriorTable {
    pub fn get(&self, cell: usize) -> Option<&CellPosterior> {
        self.cells.binary_search_by_key(&cell, |c| c.cell).ok().map(|i| &self.cells[i])
    }

    /// Accuracy of the Bayes rule: sum over cells of p(x) max_h p(h | x).
    pub fn bayes_accuracy(&self) -> f64 {
        self.cells.iter().map(|c| c.p_cell * c.p_healthy.max(c.p_unhealthy)).sum()
    }
}

pub fn exact_posterior(world: &WorldSpec, quantizer: &QuantizerSpec) -> Result<PosteriorTable> {
    world.validate()?;
    let n = world.n_sources();
    if n > MAX_POSTERIOR_SOURCES {
        return Err(Error::Capacity { what: "posterior sources", requested: n, max: MAX_POSTERIOR_SOURCES });
    }
    let m = n_events(n);
    if quantizer.n_observations() != m {
        return Err(Error::param(format!(
            "quantizer covers {} observation events, world has {m}",
            quantizer.n_observations()
        )));
    }
    let prior_u = world.cohort.prior_unhealthy();
    let prior = [1.0 - prior_u, prior_u];

    // p(S_j | h) and the channel p(O_i | S_j), both over event indices.
    let p_event: Vec<[f64; 2]> = (0..m)
        .map(|j| {
            let mask = index_to_mask(j, n);
            [world.event_prob_given_health(mask, Health::Healthy), world.event_prob_given_health(mask, Health::Unhealthy)]
        })
        .collect();
    let channel: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| world.sensor_channel.prob_masks(index_to_mask(i, n), index_to_mask(j, n), n)).collect())
        .collect();

    // p(O_i) = sum_j p(O_i|S_j) p(S_j) and p(h | O_i).
    let mut p_obs = vec![0.0; m];
    let mut post_obs = vec![[0.0; 2]; m];
    for i in 0..m {
        let mut joint = [0.0; 2];
        for j in 0..m {
            for h in 0..2 {
                joint[h] += channel[i][j] * p_event[j][h] * prior[h];
            }
        }
        p_obs[i] = joint[0] + joint[1];
        if p_obs[i] > 0.0 {
            post_obs[i] = [joint[0] / p_obs[i], joint[1] / p_obs[i]];
        }
    }

    let mut cells = Vec::new();
    let mut undefined = Vec::new();
    for x in 0..quantizer.n_cells() {
        let mut p_x = 0.0;
        let mut acc = [0.0; 2];
        for i in 0..m {
            let w = quantizer.emission(i, x) * p_obs[i];
            if w == 0.0 {
                continue;
            }
            p_x += w;
            acc[0] += post_obs[i][0] * w;
            acc[1] += post_obs[i][1] * w;
        }
        if p_x > 0.0 {
            let p_u = (acc[1] / p_x).clamp(0.0, 1.0);
            cells.push(CellPosterior { cell: x, p_cell: p_x, p_healthy: 1.0 - p_u, p_unhealthy: p_u });
        } else {
            undefined.push(x);
        }
    }
    Ok(PosteriorTable { prior_unhealthy: prior_u, cells, undefined })
}

/// One repetition of a discretized world: the quantized feature cell in place of audio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedRepetition {
    pub session_id: String,
    pub subject_id: String,
    pub side: Side,
    pub device_id: String,
    pub health: Health,
    pub repetition: usize,
    pub active_mask: u32,
    pub observed_mask: u32,
    pub cell: usize,
}

/// Samples the cohort's events exactly as the audio renderer does, then
/// quantizes each repetition's observation with stream `[QUANTIZER, session, rep]`.
pub fn sample_quantized(world: &WorldSpec, quantizer: &QuantizerSpec) -> Result<Vec<QuantizedRepetition>> {
    let n = world.n_sources();
    if quantizer.n_observations() != n_events(n) {
        return Err(Error::param("quantizer does not match the world's source count"));
    }
    let mut out = Vec::new();
    for plan in plan_sessions(world)? {
        for (r, ev) in sample_session_events(world, &plan).into_iter().enumerate() {
            let mut rng = stream(world.seed, &[tag::QUANTIZER, plan.index as u64, r as u64]);
            let i = index_to_mask(ev.observed as usize, n) as usize;
            out.push(QuantizedRepetition {
                session_id: plan.session_id.clone(),
                subject_id: plan.subject_id.clone(),
                side: plan.side,
                device_id: plan.device.id().to_string(),
                health: plan.health,
                repetition: r,
                active_mask: ev.active,
                observed_mask: ev.observed,
                cell: quantizer.sample(i, &mut rng),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigsynth::world::{
        Activation, BaseSource, CohortSpec, DeviceAssignment, KneeParams, Pairing, SensorChannel, SourceKind,
        ToneParams,
    };

    fn toy(tone: Activation, detection: f64) -> WorldSpec {
        WorldSpec {
            base_sources: vec![
                BaseSource::new("knee", SourceKind::Knee(KneeParams::default()), Activation::constant(0.6)),
                BaseSource::new("tone", SourceKind::Tone(ToneParams { frequency_hz: 1000.0, amplitude: 0.1 }), tone),
            ],
            sensor_channel: SensorChannel::PerSource { detection: vec![0.9, detection] },
            causal_link_enabled: false,
            sample_rate: 8000.0,
            cohort: CohortSpec {
                n_subjects: 4,
                pairing: Pairing::Independent,
                legs_per_subject: 1,
                device_assignment: DeviceAssignment::SideLocked,
                health_split: 0.3,
                n_repetitions: 3,
                sessions_per_leg: 1,
            },
            seed: 3,
            noise_floor_dbfs: -60.0,
            repetition_s: 0.1,
        }
    }

    #[test]
    fn uninformative_world_returns_prior() {
        let w = toy(Activation::constant(0.4), 0.8);
        let q = QuantizerSpec::noisy_bits(2, 0.1).unwrap();
        let t = exact_posterior(&w, &q).unwrap();
        assert_eq!(t.cells.len(), 4);
        for c in &t.cells {
            assert!((c.p_unhealthy - 0.3).abs() < 1e-12);
            assert!((c.p_healthy + c.p_unhealthy - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_chain_is_certain_in_tone_cells() {
        let w = toy(Activation { healthy: 0.0, unhealthy: 1.0 }, 1.0);
        let q = QuantizerSpec::noisy_bits(2, 0.0).unwrap();
        let t = exact_posterior(&w, &q).unwrap();
        for c in &t.cells {
            let tone_cell = c.cell >> 1 & 1 == 1;
            assert_eq!(c.p_unhealthy, if tone_cell { 1.0 } else { 0.0 });
        }
        assert!((t.bayes_accuracy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cells_without_mass_are_undefined() {
        let w = toy(Activation::constant(0.0), 1.0);
        let q = QuantizerSpec::noisy_bits(2, 0.0).unwrap();
        let t = exact_posterior(&w, &q).unwrap();
        assert_eq!(t.undefined, vec![2, 3]);
        let total: f64 = t.cells.iter().map(|c| c.p_cell).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantized_sampling_is_deterministic() {
        let w = toy(Activation { healthy: 0.2, unhealthy: 0.9 }, 0.7);
        let q = QuantizerSpec::noisy_bits(2, 0.05).unwrap();
        assert_eq!(sample_quantized(&w, &q).unwrap(), sample_quantized(&w, &q).unwrap());
        assert_eq!(sample_quantized(&w, &q).unwrap().len(), 12);
    }
}
