use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probe epochs of the form `n × 10^m` (n in 1..=9, m >= 0) up to
/// `max_epoch`, plus `max_epoch` itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSchedule {
    pub max_epoch: u64,
    pub points: Vec<u64>,
}

impl EpochSchedule {
    pub fn contains(&self, epoch: u64) -> bool {
        self.points.binary_search(&epoch).is_ok()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn build_schedule(max_epoch: u64) -> Result<EpochSchedule> {
    if max_epoch == 0 {
        return Err(Error::InvalidArgument("max_epoch must be >= 1".into()));
    }
    let mut points = Vec::new();
    let mut scale: u64 = 1;
    'outer: loop {
        for n in 1..=9u64 {
            match n.checked_mul(scale) {
                Some(p) if p <= max_epoch => points.push(p),
                _ => break 'outer,
            }
        }
        match scale.checked_mul(10) {
            Some(s) => scale = s,
            None => break,
        }
    }
    if points.last() != Some(&max_epoch) {
        points.push(max_epoch);
    }
    Ok(EpochSchedule { max_epoch, points })
}
