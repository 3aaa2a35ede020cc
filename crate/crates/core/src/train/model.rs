//! Trained low-level controllers for one team under the three multi-agent
//! training frameworks, plus their on-disk bundle format.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, TrainError};
use crate::env::{CombatEnv, LowLevelAction, ObsLayout, ACTION_ONE_HOT};
use crate::nn::{checkpoint, sample_action, Body, NetworkConfig, NnError, PolicyKind, PolicyNet, LOW_LEVEL_HEADS};
use crate::sim::{AircraftId, AircraftType, Team};

/// How networks map onto agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    /// One network per aircraft type shared by every agent of that type;
    /// critics see the whole team plus opponent actions.
    Ctde,
    /// One network reading the concatenated team observation and emitting
    /// every agent's action heads.
    Ctce,
    /// An independent network per agent slot; critics see only their own
    /// observation.
    Dtde,
}

/// Which low-level behavior a model implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fight,
    Escape,
    /// Single-policy baseline: fight observation, combined reward.
    Standard,
}

impl ModelKind {
    pub fn policy_kind(self) -> PolicyKind {
        match self {
            ModelKind::Fight => PolicyKind::Fight,
            ModelKind::Escape => PolicyKind::Escape,
            ModelKind::Standard => PolicyKind::Standard,
        }
    }

    pub fn layout(self, kind: AircraftType) -> ObsLayout {
        match self {
            ModelKind::Escape => ObsLayout::escape(kind),
            _ => ObsLayout::fight(kind),
        }
    }

    /// Observation width padded to the wider aircraft type.
    pub fn slot_width(self) -> usize {
        AircraftType::ALL.iter().map(|&k| self.layout(k).len()).max().unwrap_or(0)
    }

    pub fn observe(self, env: &CombatEnv, id: AircraftId) -> Result<Vec<f32>, TrainError> {
        let obs = match self {
            ModelKind::Escape => env.obs_escape(id)?,
            _ => env.obs_fight(id)?,
        };
        Ok(obs.to_f32())
    }
}

/// Heads an aircraft can use: aircraft without rockets never sample the
/// rocket trigger.
pub fn head_mask(kind: AircraftType) -> [bool; 4] {
    [true, true, true, kind.spec().has_rockets]
}

/// One sampled decision; for the centralized framework a single decision
/// covers the whole team and `agent` is the first slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub agent: AircraftId,
    pub aircraft: AircraftType,
    pub net: usize,
    pub instance: usize,
    pub obs: Vec<f32>,
    pub actions: Vec<usize>,
    pub mask: Vec<bool>,
    pub log_prob: f64,
}

/// Actions for a team step plus the decisions that produced them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelStep {
    pub actions: Vec<(AircraftId, LowLevelAction)>,
    pub decisions: Vec<Decision>,
    /// Unpadded observation of every acting aircraft.
    pub observations: BTreeMap<AircraftId, Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BundleHeader {
    kind: ModelKind,
    framework: Framework,
    team_size: usize,
    opponents: usize,
    networks: usize,
    metadata: BTreeMap<String, String>,
}

const BUNDLE_MAGIC: &[u8; 4] = b"DFMB";

#[derive(Debug, Clone)]
pub struct LowLevelModel {
    pub kind: ModelKind,
    pub framework: Framework,
    /// Team size the critic layout (and CTCE/DTDE slots) was built for.
    pub team_size: usize,
    pub opponents: usize,
    pub nets: Vec<PolicyNet<f32>>,
}

fn pad(v: &[f32], width: usize) -> impl Iterator<Item = f32> + '_ {
    v.iter().copied().chain(std::iter::repeat(0.0)).take(width)
}

impl LowLevelModel {
    /// Builds fresh networks. `body` overrides the default body of the kind
    /// (attention for fight, dense otherwise; CTCE is always dense unless
    /// overridden).
    pub fn new(
        kind: ModelKind,
        framework: Framework,
        team_size: usize,
        opponents: usize,
        body: Option<Body>,
        seed: u64,
    ) -> Result<Self, TrainError> {
        if team_size == 0 || opponents == 0 {
            return Err(TrainError::Config("teams must be non-empty".into()));
        }
        let p = kind.slot_width();
        let per_type = |critic: usize, seed: u64| -> NetworkConfig {
            let mut c = match kind {
                ModelKind::Escape => NetworkConfig::escape([critic, critic]),
                _ => NetworkConfig::fight([critic, critic]),
            };
            c.kind = kind.policy_kind();
            if let Some(b) = body {
                c = c.with_body(b);
            }
            c.with_seed(seed)
        };
        let configs = match framework {
            Framework::Ctde => {
                vec![per_type(p + (team_size - 1) * (p + ACTION_ONE_HOT) + opponents * ACTION_ONE_HOT, seed)]
            }
            Framework::Dtde => (0..team_size).map(|s| per_type(p, seed.wrapping_add(s as u64))).collect(),
            Framework::Ctce => {
                let mut c = NetworkConfig::central(
                    kind.policy_kind(),
                    &[p],
                    team_size,
                    &LOW_LEVEL_HEADS,
                    team_size * p + opponents * ACTION_ONE_HOT,
                );
                if let Some(b) = body {
                    c = c.with_body(b);
                }
                vec![c.with_seed(seed)]
            }
        };
        let nets = configs.into_iter().map(PolicyNet::new).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { kind, framework, team_size, opponents, nets })
    }

    /// Combined SHA-256 over every network's parameters.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for n in &self.nets {
            h.update(n.store.checksum().as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn num_scalars(&self) -> usize {
        self.nets.iter().map(|n| n.store.num_scalars()).sum()
    }

    fn slot_of(team_ids: &[AircraftId], id: AircraftId) -> usize {
        team_ids.iter().position(|&x| x == id).expect("member of team")
    }

    /// Samples (or, when `greedy`, takes the argmax of) actions for the
    /// alive members of `team` listed in `subset` (all alive members when
    /// `None`).
    pub fn act(
        &self,
        env: &CombatEnv,
        team: Team,
        subset: Option<&[AircraftId]>,
        greedy: bool,
        rng: &mut impl Rng,
    ) -> Result<ModelStep, TrainError> {
        let team_ids: Vec<AircraftId> =
            env.world.aircraft.iter().filter(|a| a.team == team).map(|a| a.id).collect();
        let acting: Vec<AircraftId> = env
            .world
            .alive_ids(team)
            .filter(|id| subset.is_none_or(|s| s.contains(id)))
            .collect();
        let mut step = ModelStep::default();
        for &id in &acting {
            step.observations.insert(id, self.kind.observe(env, id)?);
        }
        match self.framework {
            Framework::Ctde | Framework::Dtde => {
                for &id in &acting {
                    let kind = env.world.get(id).kind();
                    let net = match self.framework {
                        Framework::Ctde => 0,
                        _ => {
                            let slot = Self::slot_of(&team_ids, id);
                            if slot >= self.nets.len() {
                                return Err(TrainError::Config(format!(
                                    "model has {} agent networks, team slot {slot} requested",
                                    self.nets.len()
                                )));
                            }
                            slot
                        }
                    };
                    let instance = kind.index();
                    let obs = step.observations[&id].clone();
                    let out = self.nets[net].forward_actor(instance, &obs, None)?;
                    let mask = head_mask(kind);
                    let s = sample_action(&out.logits, Some(&mask), rng, greedy)?;
                    step.actions.push((id, LowLevelAction::from_indices(&s.actions)?));
                    step.decisions.push(Decision {
                        agent: id,
                        aircraft: kind,
                        net,
                        instance,
                        obs,
                        actions: s.actions,
                        mask: mask.to_vec(),
                        log_prob: s.log_prob,
                    });
                }
            }
            Framework::Ctce => {
                if acting.is_empty() {
                    return Ok(step);
                }
                if team_ids.len() > self.team_size {
                    return Err(TrainError::Config(format!(
                        "centralized model built for {} agents, team has {}",
                        self.team_size,
                        team_ids.len()
                    )));
                }
                let p = self.kind.slot_width();
                let mut obs = Vec::with_capacity(self.team_size * p);
                let mut mask = Vec::with_capacity(self.team_size * 4);
                for slot in 0..self.team_size {
                    match team_ids.get(slot).filter(|id| acting.contains(id)) {
                        Some(id) => {
                            obs.extend(pad(&step.observations[id], p));
                            mask.extend(head_mask(env.world.get(*id).kind()));
                        }
                        None => {
                            obs.extend(std::iter::repeat(0.0).take(p));
                            mask.extend([false; 4]);
                        }
                    }
                }
                let out = self.nets[0].forward_actor(0, &obs, None)?;
                let s = sample_action(&out.logits, Some(&mask), rng, greedy)?;
                for &id in &acting {
                    let slot = Self::slot_of(&team_ids, id);
                    step.actions.push((id, LowLevelAction::from_indices(&s.actions[slot * 4..slot * 4 + 4])?));
                }
                step.decisions.push(Decision {
                    agent: acting[0],
                    aircraft: env.world.get(acting[0]).kind(),
                    net: 0,
                    instance: 0,
                    obs,
                    actions: s.actions,
                    mask,
                    log_prob: s.log_prob,
                });
            }
        }
        Ok(step)
    }

    /// Critic input for `decision`: the decision's own observation (padded),
    /// teammates' observations and actions (CTDE), and every opponent slot's
    /// action. Missing or dead aircraft contribute zeros.
    pub fn critic_input(
        &self,
        env: &CombatEnv,
        team: Team,
        decision: &Decision,
        observations: &BTreeMap<AircraftId, Vec<f32>>,
        actions: &BTreeMap<AircraftId, LowLevelAction>,
    ) -> Vec<f32> {
        let p = self.kind.slot_width();
        let team_ids: Vec<AircraftId> =
            env.world.aircraft.iter().filter(|a| a.team == team).map(|a| a.id).collect();
        let enemy_ids: Vec<AircraftId> =
            env.world.aircraft.iter().filter(|a| a.team != team).map(|a| a.id).collect();
        let mut out = Vec::new();
        let action_of = |out: &mut Vec<f32>, id: Option<&AircraftId>| match id.and_then(|i| actions.get(i)) {
            Some(a) => out.extend(a.one_hot().iter().map(|&x| x as f32)),
            None => out.extend(std::iter::repeat(0.0).take(ACTION_ONE_HOT)),
        };
        match self.framework {
            Framework::Dtde => out.extend(pad(&decision.obs, p)),
            Framework::Ctde => {
                out.extend(pad(&decision.obs, p));
                let mates: Vec<AircraftId> = team_ids.iter().copied().filter(|&i| i != decision.agent).collect();
                for k in 0..self.team_size - 1 {
                    let id = mates.get(k);
                    match id.and_then(|i| observations.get(i)) {
                        Some(o) => out.extend(pad(o, p)),
                        None => out.extend(std::iter::repeat(0.0).take(p)),
                    }
                    action_of(&mut out, id);
                }
            }
            Framework::Ctce => out.extend(decision.obs.iter().copied()),
        }
        if self.framework != Framework::Dtde {
            for k in 0..self.opponents {
                action_of(&mut out, enemy_ids.get(k));
            }
        }
        out
    }

    pub fn value(&self, decision: &Decision, critic_input: &[f32]) -> Result<f64, TrainError> {
        Ok(self.nets[decision.net].forward_critic(decision.instance, critic_input)?.0 as f64)
    }

    fn header(&self, metadata: &BTreeMap<String, String>) -> BundleHeader {
        BundleHeader {
            kind: self.kind,
            framework: self.framework,
            team_size: self.team_size,
            opponents: self.opponents,
            networks: self.nets.len(),
            metadata: metadata.clone(),
        }
    }

    /// Bundle layout: magic `DFMB`, u32 header length, JSON header, then per
    /// network a u64 length and a complete checkpoint blob.
    pub fn to_bytes(&self, metadata: &BTreeMap<String, String>, with_optimizer: bool) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header(metadata)).expect("header serializes");
        let mut out = BUNDLE_MAGIC.to_vec();
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for n in &self.nets {
            let blob = checkpoint::to_bytes(n, &BTreeMap::new(), with_optimizer);
            out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
            out.extend_from_slice(&blob);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, BTreeMap<String, String>), TrainError> {
        let bad = |m: &str| TrainError::Nn(NnError::Checkpoint(m.to_string()));
        if bytes.len() < 8 || &bytes[..4] != BUNDLE_MAGIC {
            return Err(bad("not a model bundle"));
        }
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let hend = 8usize.checked_add(hlen).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
        let header: BundleHeader = serde_json::from_slice(&bytes[8..hend]).map_err(|e| bad(&e.to_string()))?;
        let mut pos = hend;
        let mut nets = Vec::with_capacity(header.networks);
        for _ in 0..header.networks {
            let len_end = pos.checked_add(8).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated bundle"))?;
            let len = u64::from_le_bytes(bytes[pos..len_end].try_into().expect("8 bytes")) as usize;
            let end = len_end.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated network"))?;
            nets.push(checkpoint::from_bytes::<f32>(&bytes[len_end..end])?.0);
            pos = end;
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        let model = Self {
            kind: header.kind,
            framework: header.framework,
            team_size: header.team_size,
            opponents: header.opponents,
            nets,
        };
        Ok((model, header.metadata))
    }

    pub fn save(&self, path: &Path, metadata: &BTreeMap<String, String>, with_optimizer: bool) -> Result<(), TrainError> {
        std::fs::write(path, self.to_bytes(metadata, with_optimizer)).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<(Self, BTreeMap<String, String>), TrainError> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Level, ScenarioConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env() -> CombatEnv {
        CombatEnv::reset(&ScenarioConfig::low_level(Level::L3).with_seed(5)).unwrap()
    }

    #[test]
    fn critic_widths_per_framework() {
        let ctde = LowLevelModel::new(ModelKind::Fight, Framework::Ctde, 2, 2, None, 0).unwrap();
        assert_eq!(ctde.nets[0].config.instances[0].critic_width, 27 + 53 + 52);
        let ctce = LowLevelModel::new(ModelKind::Standard, Framework::Ctce, 2, 2, None, 0).unwrap();
        assert_eq!(ctce.nets[0].config.instances[0].obs_width(), 54);
        assert_eq!(ctce.nets[0].config.instances[0].critic_width, 54 + 52);
        let dtde = LowLevelModel::new(ModelKind::Escape, Framework::Dtde, 2, 2, None, 0).unwrap();
        assert_eq!(dtde.nets.len(), 2);
        assert_eq!(dtde.nets[1].config.instances[1].critic_width, 28);
    }

    #[test]
    fn critic_inputs_match_declared_widths() {
        let e = env();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for fw in [Framework::Ctde, Framework::Ctce, Framework::Dtde] {
            for kind in [ModelKind::Fight, ModelKind::Escape] {
                let m = LowLevelModel::new(kind, fw, 2, 2, None, 1).unwrap();
                let step = m.act(&e, Team::Agent, None, false, &mut rng).unwrap();
                let opp = m.act(&e, Team::Opponent, None, false, &mut rng).unwrap();
                let actions: BTreeMap<_, _> = step.actions.iter().chain(&opp.actions).copied().collect();
                for d in &step.decisions {
                    let ci = m.critic_input(&e, Team::Agent, d, &step.observations, &actions);
                    assert_eq!(ci.len(), m.nets[d.net].config.instances[d.instance].critic_width);
                    assert!(m.value(d, &ci).unwrap().is_finite());
                }
            }
        }
    }

    #[test]
    fn same_type_identical_obs_get_identical_distributions() {
        let m = LowLevelModel::new(ModelKind::Fight, Framework::Ctde, 2, 2, None, 3).unwrap();
        let obs = vec![0.3f32; 27];
        let a = m.nets[0].forward_actor(0, &obs, None).unwrap().logits;
        let b = m.nets[0].forward_actor(0, &obs, None).unwrap().logits;
        assert_eq!(a, b);
    }

    #[test]
    fn rocketless_aircraft_never_fire_rockets() {
        let m = LowLevelModel::new(ModelKind::Fight, Framework::Ctde, 2, 2, None, 3).unwrap();
        let e = env();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            for (id, a) in m.act(&e, Team::Agent, None, false, &mut rng).unwrap().actions {
                if !e.world.get(id).kind().spec().has_rockets {
                    assert!(!a.rocket);
                }
            }
        }
    }

    #[test]
    fn bundle_round_trip() {
        let m = LowLevelModel::new(ModelKind::Escape, Framework::Dtde, 2, 2, None, 9).unwrap();
        let mut meta = BTreeMap::new();
        meta.insert("level".to_string(), "3".to_string());
        let bytes = m.to_bytes(&meta, true);
        let (back, meta2) = LowLevelModel::from_bytes(&bytes).unwrap();
        assert_eq!(back.checksum(), m.checksum());
        assert_eq!(meta2, meta);
        assert_eq!(back.framework, Framework::Dtde);
        assert!(LowLevelModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
