//! Rollout storage and generalized advantage estimation.

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::sim::{AircraftId, AircraftType};

/// One decision of one actor, with everything needed to re-evaluate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Index of the network in the model that acted.
    pub net: usize,
    /// Instance of that network (aircraft type for per-type networks).
    pub instance: usize,
    pub obs: Vec<f32>,
    /// Recurrent state fed into the actor at decision time.
    pub hidden: Option<Vec<f32>>,
    pub actions: Vec<usize>,
    /// Active action heads; empty means all.
    pub mask: Vec<bool>,
    pub log_prob: f64,
    pub value: f64,
    pub critic_input: Vec<f32>,
    pub reward: f64,
    pub done: bool,
    pub agent: AircraftId,
    pub aircraft: AircraftType,
    /// Env steps covered by the decision (1 for low-level actions).
    pub duration: u32,
}

/// Consecutive decisions of one actor. Only the last transition may be
/// `done`; an unfinished trajectory bootstraps from `bootstrap_value`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub bootstrap_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub trajectories: Vec<Trajectory>,
}

impl RolloutBuffer {
    pub fn push(&mut self, t: Trajectory) {
        if !t.transitions.is_empty() {
            self.trajectories.push(t);
        }
    }

    pub fn len(&self) -> usize {
        self.trajectories.iter().map(|t| t.transitions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        self.trajectories.clear();
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.trajectories.iter().flat_map(|t| t.transitions.iter())
    }
}

/// Advantages and value targets in buffer order.
#[derive(Debug, Clone, PartialEq)]
pub struct GaeOutput {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// GAE over every trajectory. A decision lasting `d` env steps discounts the
/// next value (and the advantage carried back from it) by `gamma^d`.
/// Returns are raw advantages plus values.
pub fn compute_gae(buffer: &RolloutBuffer, gamma: f64, lambda: f64) -> Result<GaeOutput, TrainError> {
    if buffer.is_empty() {
        return Err(TrainError::EmptyBuffer);
    }
    let mut advantages = Vec::with_capacity(buffer.len());
    let mut returns = Vec::with_capacity(buffer.len());
    for traj in &buffer.trajectories {
        let ts = &traj.transitions;
        if ts[..ts.len() - 1].iter().any(|t| t.done) {
            return Err(TrainError::Buffer("done flag inside a trajectory".into()));
        }
        let mut adv = vec![0.0; ts.len()];
        let mut next_value = traj.bootstrap_value;
        let mut next_adv = 0.0;
        for (i, t) in ts.iter().enumerate().rev() {
            let disc = gamma.powi(t.duration.max(1) as i32);
            let live = if t.done { 0.0 } else { 1.0 };
            let delta = t.reward + disc * next_value * live - t.value;
            adv[i] = delta + disc * lambda * live * next_adv;
            next_value = t.value;
            next_adv = adv[i];
        }
        for (a, t) in adv.iter().zip(ts) {
            returns.push(a + t.value);
        }
        advantages.extend(adv);
    }
    Ok(GaeOutput { advantages, returns })
}

/// Shifts to zero mean and scales to unit variance (no scaling when the
/// spread vanishes).
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a -= mean;
        if std > 1e-8 {
            *a /= std;
        }
    }
}

#[cfg(test)]
pub(crate) fn transition(reward: f64, value: f64, done: bool) -> Transition {
    Transition {
        net: 0,
        instance: 0,
        obs: vec![],
        hidden: None,
        actions: vec![],
        mask: vec![],
        log_prob: 0.0,
        value,
        critic_input: vec![],
        reward,
        done,
        agent: 0,
        aircraft: AircraftType::Ac1,
        duration: 1,
    }
}
