//! Clipped-surrogate PPO update.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{compute_gae, normalize_advantages, RolloutBuffer, Transition};
use super::{PpoConfig, TrainError};
use crate::nn::{categorical_log_prob, PolicyNet};

/// Per-sample clipped objective `min(r A, clip(r, 1-eps, 1+eps) A)` and
/// whether the unclipped branch is the one selected (the only case with a
/// gradient).
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> (f64, bool) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

/// Averages over all minibatches of all epochs, except `initial_ratio`
/// which covers the first minibatch only (parameters still equal the
/// behavior policy there).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub samples: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub initial_ratio: f64,
    pub grad_norm: f64,
}

fn mask_of(t: &Transition) -> Option<&[bool]> {
    (!t.mask.is_empty()).then_some(t.mask.as_slice())
}

/// Runs `epochs` passes of shuffled minibatch descent on the collected
/// buffer, then empties it.
pub fn ppo_update(
    nets: &mut [PolicyNet<f32>],
    buffer: &mut RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut impl Rng,
) -> Result<UpdateStats, TrainError> {
    cfg.validate()?;
    let n = buffer.len();
    if n == 0 {
        return Err(TrainError::EmptyBuffer);
    }
    if n < cfg.batch_size {
        return Err(TrainError::BatchTooSmall { got: n, need: cfg.batch_size });
    }
    let gae = compute_gae(buffer, cfg.gamma, cfg.gae_lambda)?;
    let mut adv = gae.advantages;
    normalize_advantages(&mut adv);
    let samples: Vec<&Transition> = buffer.transitions().collect();
    if let Some(t) = samples.iter().find(|t| t.net >= nets.len()) {
        return Err(TrainError::Buffer(format!("transition refers to network {}", t.net)));
    }

    let mut stats = UpdateStats { samples: n, ..Default::default() };
    let mut order: Vec<usize> = (0..n).collect();
    let mb_size = n.div_ceil(cfg.minibatches);
    let mut batches = 0usize;
    let mut first = true;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(mb_size) {
            for net in nets.iter_mut() {
                net.store.zero_grad();
            }
            let b = chunk.len() as f64;
            let (mut pl, mut vl, mut ent, mut kl, mut clipped, mut ratio_sum) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for &i in chunk {
                let t = samples[i];
                let a = adv[i];
                let net = &mut nets[t.net];
                let out = net.forward_actor(t.instance, &t.obs, t.hidden.as_deref())?;
                let (logp, _, _) = categorical_log_prob(&out.logits, &t.actions, mask_of(t), 0.0, 0.0)?;
                let ratio = (logp - t.log_prob).exp();
                let (surr, active) = clipped_surrogate(ratio, a, cfg.clip);
                debug_assert!(surr <= (1.0 + cfg.clip) * a.abs() + 1e-12);
                let coef = if active { -ratio * a / b } else { 0.0 };
                let (_, entropy, dlogits) =
                    categorical_log_prob(&out.logits, &t.actions, mask_of(t), coef, -cfg.entropy_coef / b)?;
                net.backward_actor(&out.trace, &dlogits, None)?;

                let (v, ctrace) = net.forward_critic(t.instance, &t.critic_input)?;
                let err = v as f64 - gae.returns[i];
                net.backward_critic(&ctrace, (2.0 * cfg.value_coef * err / b) as f32)?;

                pl -= surr;
                vl += err * err;
                ent += entropy;
                kl += t.log_prob - logp;
                ratio_sum += ratio;
                if (ratio - 1.0).abs() > cfg.clip {
                    clipped += 1.0;
                }
            }
            let loss = (pl + cfg.value_coef * vl - cfg.entropy_coef * ent) / b;
            if !loss.is_finite() || nets.iter().any(|n| !n.store.grads_finite()) {
                return Err(TrainError::NonFinite(format!(
                    "policy {:.4e} value {:.4e} entropy {:.4e} over {} samples",
                    pl / b,
                    vl / b,
                    ent / b,
                    chunk.len()
                )));
            }
            let mut gn = 0.0;
            for net in nets.iter_mut() {
                gn += net.store.clip_grad_norm(cfg.max_grad_norm);
                net.store.adam_step(cfg.lr, &cfg.adam);
            }
            if first {
                stats.initial_ratio = ratio_sum / b;
                first = false;
            }
            stats.policy_loss += pl / b;
            stats.value_loss += vl / b;
            stats.entropy += ent / b;
            stats.approx_kl += kl / b;
            stats.clip_fraction += clipped / b;
            stats.grad_norm += gn;
            batches += 1;
        }
    }
    let m = batches as f64;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.approx_kl /= m;
    stats.clip_fraction /= m;
    stats.grad_norm /= m;
    buffer.clear();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{sample_action, NetworkConfig};
    use crate::train::buffer::{transition, Trajectory};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clip_rule_examples() {
        assert_eq!(clipped_surrogate(1.0, 2.0, 0.2), (2.0, true));
        let (v, active) = clipped_surrogate(1.5, 1.0, 0.2);
        assert!((v - 1.2).abs() < 1e-12 && !active);
        // negative advantage below the band: the clipped term is the minimum
        let (v, active) = clipped_surrogate(0.5, -1.0, 0.2);
        assert!((v + 0.8).abs() < 1e-12 && !active);
        // negative advantage above the band: unclipped is more negative
        let (v, active) = clipped_surrogate(1.5, -1.0, 0.2);
        assert!((v + 1.5).abs() < 1e-12 && active);
    }

    fn toy_buffer(net: &PolicyNet<f32>, n: usize, seed: u64) -> RolloutBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = net.config.instances[0].obs_width();
        let cw = net.config.instances[0].critic_width;
        let mut traj = Trajectory::default();
        for i in 0..n {
            let obs: Vec<f32> = (0..w).map(|_| rng.gen()).collect();
            let out = net.forward_actor(0, &obs, None).unwrap();
            let s = sample_action(&out.logits, None, &mut rng, false).unwrap();
            let critic_input: Vec<f32> = (0..cw).map(|_| rng.gen()).collect();
            let value = net.forward_critic(0, &critic_input).unwrap().0 as f64;
            let mut t = transition(if s.actions[0] < 6 { 1.0 } else { -1.0 }, value, i == n - 1);
            t.obs = obs;
            t.actions = s.actions;
            t.log_prob = s.log_prob;
            t.critic_input = critic_input;
            traj.transitions.push(t);
        }
        RolloutBuffer { trajectories: vec![traj] }
    }

    #[test]
    fn first_ratio_is_one_and_buffer_emptied() {
        let mut nets = vec![PolicyNet::<f32>::new(NetworkConfig::escape([10, 10]).with_seed(3)).unwrap()];
        let mut buf = toy_buffer(&nets[0], 64, 1);
        let cfg = PpoConfig { batch_size: 64, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = ppo_update(&mut nets, &mut buf, &cfg, &mut rng).unwrap();
        assert!((s.initial_ratio - 1.0).abs() < 1e-5);
        assert!(s.policy_loss.is_finite() && s.value_loss.is_finite());
        assert!(buf.is_empty());
    }

    #[test]
    fn too_small_batch_is_rejected() {
        let mut nets = vec![PolicyNet::<f32>::new(NetworkConfig::escape([10, 10])).unwrap()];
        let mut buf = toy_buffer(&nets[0], 8, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = ppo_update(&mut nets, &mut buf, &PpoConfig::default(), &mut rng);
        assert!(matches!(r, Err(TrainError::BatchTooSmall { got: 8, need: 2000 })));
    }

    #[test]
    fn updates_raise_probability_of_rewarded_actions() {
        let mut nets = vec![PolicyNet::<f32>::new(NetworkConfig::escape([10, 10]).with_seed(5)).unwrap()];
        let cfg = PpoConfig { batch_size: 256, lr: 3e-3, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let frac = |net: &PolicyNet<f32>| {
            let mut r = ChaCha8Rng::seed_from_u64(99);
            let w = net.config.instances[0].obs_width();
            let mut good = 0;
            for _ in 0..400 {
                let obs: Vec<f32> = (0..w).map(|_| r.gen()).collect();
                let out = net.forward_actor(0, &obs, None).unwrap();
                if sample_action(&out.logits, None, &mut r, false).unwrap().actions[0] < 6 {
                    good += 1;
                }
            }
            good
        };
        let before = frac(&nets[0]);
        for k in 0..15 {
            let mut buf = toy_buffer(&nets[0], 256, 10 + k);
            ppo_update(&mut nets, &mut buf, &cfg, &mut rng).unwrap();
        }
        assert!(frac(&nets[0]) > before + 60, "{before} -> {}", frac(&nets[0]));
    }

    #[test]
    fn deterministic_updates() {
        let run = || {
            let mut nets = vec![PolicyNet::<f32>::new(NetworkConfig::escape([10, 10]).with_seed(3)).unwrap()];
            let mut buf = toy_buffer(&nets[0], 64, 1);
            let cfg = PpoConfig { batch_size: 64, ..Default::default() };
            let s = ppo_update(&mut nets, &mut buf, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
            (s, nets[0].store.checksum())
        };
        assert_eq!(run(), run());
    }
}
