//! Composite source events: one sign (active or inactive) per base source.
//!
//! Events are enumerated with source 0 varying fastest and "active" before
//! "inactive", so for two sources (knee, external) the order is
//! `(knee, ext), (!knee, ext), (knee, !ext), (!knee, !ext)`.
//! Event index `j` has source `k` active iff bit `k` of `j` is clear.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ENUMERATED_SOURCES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompositeEvent {
    pub signs: Vec<bool>,
}

impl CompositeEvent {
    pub fn from_index(index: usize, n_sources: usize) -> Self {
        Self { signs: (0..n_sources).map(|k| index >> k & 1 == 0).collect() }
    }

    pub fn from_mask(active: u32, n_sources: usize) -> Self {
        Self { signs: (0..n_sources).map(|k| active >> k & 1 == 1).collect() }
    }

    pub fn n_sources(&self) -> usize {
        self.signs.len()
    }

    /// Position in the enumeration order.
    pub fn index(&self) -> usize {
        self.signs.iter().enumerate().filter(|(_, &on)| !on).map(|(k, _)| 1usize << k).sum()
    }

    /// Bit `k` set iff source `k` is active.
    pub fn active_mask(&self) -> u32 {
        self.signs.iter().enumerate().filter(|(_, &on)| on).map(|(k, _)| 1u32 << k).sum()
    }

    pub fn is_active(&self, source: usize) -> bool {
        self.signs[source]
    }

    /// Two events are disjoint iff they disagree on at least one sign.
    pub fn is_disjoint(&self, other: &CompositeEvent) -> bool {
        self.signs.len() == other.signs.len() && self.signs.iter().zip(&other.signs).any(|(a, b)| a != b)
    }

    /// Render with source names, negated sources prefixed by `!`.
    pub fn describe(&self, names: &[&str]) -> String {
        let parts: Vec<String> = self
            .signs
            .iter()
            .zip(names)
            .map(|(&on, name)| if on { (*name).to_string() } else { format!("!{name}") })
            .collect();
        format!("({})", parts.join(","))
    }
}

pub fn n_events(n_sources: usize) -> usize {
    1usize << n_sources
}

pub fn enumerate_composite_events(n_sources: usize) -> Result<Vec<CompositeEvent>> {
    if n_sources > MAX_ENUMERATED_SOURCES {
        return Err(Error::Capacity { what: "composite event sources", requested: n_sources, max: MAX_ENUMERATED_SOURCES });
    }
    Ok((0..n_events(n_sources)).map(|j| CompositeEvent::from_index(j, n_sources)).collect())
}

/// Converts between an event index and an active-source bit mask (an involution).
pub fn index_to_mask(index: usize, n_sources: usize) -> u32 {
    !(index as u32) & (((1u64 << n_sources) - 1) as u32)
}
