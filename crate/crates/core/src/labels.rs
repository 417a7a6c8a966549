use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Health {
    Healthy,
    Unhealthy,
}

impl Health {
    pub const ALL: [Health; 2] = [Health::Healthy, Health::Unhealthy];

    pub fn is_unhealthy(self) -> bool {
        self == Health::Unhealthy
    }

    pub fn from_unhealthy(flag: bool) -> Self {
        if flag {
            Health::Unhealthy
        } else {
            Health::Healthy
        }
    }

    pub fn flipped(self) -> Self {
        Self::from_unhealthy(!self.is_unhealthy())
    }
}

impl fmt::Display for Health {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Health::Healthy => "Healthy",
            Health::Unhealthy => "Unhealthy",
        })
    }
}

impl FromStr for Health {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "Healthy" => Ok(Health::Healthy),
            "Unhealthy" => Ok(Health::Unhealthy),
            other => Err(Error::param(format!("unknown health label '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(Error::param(format!("unknown side '{other}'"))),
        }
    }
}
