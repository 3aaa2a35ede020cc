//! Actor-critic policy networks.
//!
//! A [`PolicyNet`] holds one or more *instances* (one per aircraft type for
//! the low-level policies, one for the commander) in a single parameter
//! store. Each instance has its own input embedding, body, action heads and
//! critic embedding; a single hidden layer (`shared`) is used by every
//! instance's actor and critic.
//!
//! Bodies:
//! - `Attention`: every observation block (own aircraft, opponent, friendly)
//!   is embedded to a token; tokens go through single-head self-attention and
//!   are mean-pooled.
//! - `Dense`: one embedding of the whole observation.
//! - `Recurrent`: embedding followed by a GRU cell carrying hidden state.
//! - `FullyConnected`: two wide tanh layers, no shared layer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{AttentionCache, Gru, GruCache, Linear, SelfAttention};
use super::{tanh_backward, tanh_in_place, NnError, ParamStore, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Fight,
    Escape,
    Commander,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    Attention,
    Dense,
    Recurrent,
    FullyConnected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub label: String,
    /// Entity block widths of the actor input; they sum to the input width.
    pub obs_blocks: Vec<usize>,
    /// Category count of every action head.
    pub heads: Vec<usize>,
    /// Width of the critic's global input.
    pub critic_width: usize,
}

impl InstanceConfig {
    pub fn obs_width(&self) -> usize {
        self.obs_blocks.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub kind: PolicyKind,
    pub body: Body,
    pub instances: Vec<InstanceConfig>,
    pub embed_width: usize,
    /// Query/key width of the attention body.
    pub key_width: usize,
    pub fc_width: usize,
    pub shared_layer: bool,
    /// Orthogonal gain of the action-head layers.
    pub head_gain: f64,
    /// Seed of the parameter initialization.
    pub seed: u64,
}

pub const LOW_LEVEL_HEADS: [usize; 4] = [13, 9, 2, 2];

impl NetworkConfig {
    fn base(kind: PolicyKind, body: Body, instances: Vec<InstanceConfig>) -> Self {
        Self {
            kind,
            body,
            instances,
            embed_width: 100,
            key_width: 32,
            fc_width: 500,
            shared_layer: body != Body::FullyConnected,
            head_gain: 0.01,
            seed: 0,
        }
    }

    fn per_type(blocks: [Vec<usize>; 2], critic: [usize; 2]) -> Vec<InstanceConfig> {
        ["AC1", "AC2"]
            .iter()
            .zip(blocks)
            .zip(critic)
            .map(|((label, obs_blocks), critic_width)| InstanceConfig {
                label: label.to_string(),
                obs_blocks,
                heads: LOW_LEVEL_HEADS.to_vec(),
                critic_width,
            })
            .collect()
    }

    /// Fight policy: attention body, one instance per aircraft type.
    pub fn fight(critic_widths: [usize; 2]) -> Self {
        Self::base(
            PolicyKind::Fight,
            Body::Attention,
            Self::per_type([vec![12, 9, 6], vec![10, 9, 6]], critic_widths),
        )
    }

    /// Escape policy: plain embedding body, one instance per aircraft type.
    pub fn escape(critic_widths: [usize; 2]) -> Self {
        Self::base(
            PolicyKind::Escape,
            Body::Dense,
            Self::per_type([vec![6, 8, 8, 6], vec![5, 8, 8, 6]], critic_widths),
        )
    }

    /// Commander: recurrent body, a single instance for every aircraft.
    pub fn commander(sensed_opponents: usize, options: usize, critic_width: usize) -> Self {
        let mut blocks = vec![4];
        blocks.extend(std::iter::repeat(10).take(sensed_opponents));
        blocks.extend([5, 5]);
        Self::base(
            PolicyKind::Commander,
            Body::Recurrent,
            vec![InstanceConfig { label: "commander".into(), obs_blocks: blocks, heads: vec![options], critic_width }],
        )
    }

    /// One network driving a whole team: the observation is the
    /// concatenation of per-slot observations and there is one set of heads
    /// per slot.
    pub fn central(kind: PolicyKind, slot_blocks: &[usize], slots: usize, slot_heads: &[usize], critic_width: usize) -> Self {
        let obs_blocks = (0..slots).flat_map(|_| slot_blocks.iter().copied()).collect();
        let heads = (0..slots).flat_map(|_| slot_heads.iter().copied()).collect();
        Self::base(
            kind,
            Body::Dense,
            vec![InstanceConfig { label: "team".into(), obs_blocks, heads, critic_width }],
        )
    }

    pub fn with_body(mut self, body: Body) -> Self {
        self.body = body;
        self.shared_layer = body != Body::FullyConnected;
        self
    }

    pub fn with_widths(mut self, embed: usize, key: usize, fc: usize) -> Self {
        self.embed_width = embed;
        self.key_width = key;
        self.fc_width = fc;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::Checkpoint(format!("network config: {m}")));
        if self.instances.is_empty() {
            return bad("no instances");
        }
        if self.embed_width == 0 || self.key_width == 0 || self.fc_width == 0 {
            return bad("zero width");
        }
        for inst in &self.instances {
            if inst.obs_blocks.is_empty() || inst.obs_blocks.contains(&0) || inst.heads.is_empty() {
                return bad("empty block or head list");
            }
            if inst.heads.contains(&0) || inst.critic_width == 0 {
                return bad("zero-sized head or critic input");
            }
        }
        Ok(())
    }

    pub fn instance_index(&self, label: &str) -> Option<usize> {
        self.instances.iter().position(|i| i.label == label)
    }
}

#[derive(Debug, Clone)]
struct InstanceLayers {
    embeds: Vec<Linear>,
    attn: Option<SelfAttention>,
    gru: Option<Gru>,
    fc2: Option<Linear>,
    heads: Vec<Linear>,
    critic_in: Linear,
    critic_fc2: Option<Linear>,
    value: Linear,
}

/// Activations of one actor forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorTrace<T> {
    version: u64,
    pub instance: usize,
    input: Vec<T>,
    /// Attention tokens after the embedding nonlinearity.
    tokens: Vec<Vec<T>>,
    attn: Option<AttentionCache<T>>,
    /// Embedding output (first layer output for the wide body).
    embed: Vec<T>,
    gru: Option<GruCache<T>>,
    body_out: Vec<T>,
    head_in: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorOutput<T> {
    pub logits: Vec<Vec<T>>,
    /// New recurrent state (recurrent body only).
    pub hidden: Option<Vec<T>>,
    pub trace: ActorTrace<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticTrace<T> {
    version: u64,
    pub instance: usize,
    input: Vec<T>,
    embed: Vec<T>,
    body_out: Vec<T>,
    head_in: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct PolicyNet<T: Scalar> {
    pub config: NetworkConfig,
    pub store: ParamStore<T>,
    layers: Vec<InstanceLayers>,
    shared: Option<Linear>,
}

fn tanh_vec<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    tanh_in_place(&mut v);
    v
}

fn add_into<T: Scalar>(acc: &mut [T], x: &[T]) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

impl<T: Scalar> PolicyNet<T> {
    /// Builds and orthogonally initializes a network.
    pub fn new(config: NetworkConfig) -> Result<Self, NnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let e = config.embed_width;
        let shared = if config.shared_layer {
            Some(Linear::new(&mut store, "shared", e, e, 1.0, &mut rng))
        } else {
            None
        };
        let mut layers = Vec::new();
        for inst in &config.instances {
            let l = &inst.label;
            let inp = inst.obs_width();
            let (embeds, attn, gru, fc2, trunk) = match config.body {
                Body::Attention => {
                    let embeds = inst
                        .obs_blocks
                        .iter()
                        .enumerate()
                        .map(|(k, &w)| Linear::new(&mut store, &format!("{l}.embed{k}"), w, e, 1.0, &mut rng))
                        .collect();
                    let attn = SelfAttention::new(&mut store, &format!("{l}.attn"), e, config.key_width, &mut rng);
                    (embeds, Some(attn), None, None, e)
                }
                Body::Dense => (vec![Linear::new(&mut store, &format!("{l}.embed"), inp, e, 1.0, &mut rng)], None, None, None, e),
                Body::Recurrent => {
                    let embed = Linear::new(&mut store, &format!("{l}.embed"), inp, e, 1.0, &mut rng);
                    let gru = Gru::new(&mut store, &format!("{l}.gru"), e, e, &mut rng);
                    (vec![embed], None, Some(gru), None, e)
                }
                Body::FullyConnected => {
                    let f = config.fc_width;
                    let fc1 = Linear::new(&mut store, &format!("{l}.fc1"), inp, f, 1.0, &mut rng);
                    let fc2 = Linear::new(&mut store, &format!("{l}.fc2"), f, f, 1.0, &mut rng);
                    (vec![fc1], None, None, Some(fc2), f)
                }
            };
            let heads = inst
                .heads
                .iter()
                .enumerate()
                .map(|(h, &n)| Linear::new(&mut store, &format!("{l}.head{h}"), trunk, n, config.head_gain, &mut rng))
                .collect();
            let (critic_in, critic_fc2) = if config.body == Body::FullyConnected {
                let f = config.fc_width;
                (
                    Linear::new(&mut store, &format!("{l}.critic.fc1"), inst.critic_width, f, 1.0, &mut rng),
                    Some(Linear::new(&mut store, &format!("{l}.critic.fc2"), f, f, 1.0, &mut rng)),
                )
            } else {
                (Linear::new(&mut store, &format!("{l}.critic.embed"), inst.critic_width, e, 1.0, &mut rng), None)
            };
            let value = Linear::new(&mut store, &format!("{l}.critic.value"), trunk, 1, 1.0, &mut rng);
            layers.push(InstanceLayers { embeds, attn, gru, fc2, heads, critic_in, critic_fc2, value });
        }
        Ok(Self { config, store, layers, shared })
    }

    /// A network of the given shape with every parameter set to zero.
    pub fn zeroed(config: NetworkConfig) -> Result<Self, NnError> {
        let mut net = Self::new(config)?;
        let ids: Vec<_> = net.store.ids().collect();
        for id in ids {
            net.store.value_mut(id).iter_mut().for_each(|x| *x = T::zero());
        }
        Ok(net)
    }

    /// Rebuilds a network around an existing parameter store (e.g. loaded
    /// from a checkpoint); names and shapes must match the configuration.
    pub fn from_store(config: NetworkConfig, store: ParamStore<T>) -> Result<Self, NnError> {
        let mut net = Self::new(config)?;
        net.store.copy_values_from(&store)?;
        net.store.adam_steps = store.adam_steps;
        for id in store.ids() {
            let (m, v) = store.moments(id);
            let (dm, dv) = net.store.moments_mut(id);
            dm.copy_from_slice(m);
            dv.copy_from_slice(v);
        }
        Ok(net)
    }

    /// The same network in another float type.
    pub fn cast<U: Scalar>(&self) -> PolicyNet<U> {
        PolicyNet::from_store(self.config.clone(), self.store.cast()).expect("identical layout")
    }

    pub fn num_instances(&self) -> usize {
        self.layers.len()
    }

    pub fn instance(&self, i: usize) -> Result<&InstanceConfig, NnError> {
        self.config.instances.get(i).ok_or(NnError::UnknownInstance(i))
    }

    pub fn hidden_width(&self) -> Option<usize> {
        (self.config.body == Body::Recurrent).then_some(self.config.embed_width)
    }

    pub fn shared_layer(&self) -> Option<&Linear> {
        self.shared.as_ref()
    }

    pub fn forward_actor(&self, instance: usize, obs: &[T], hidden: Option<&[T]>) -> Result<ActorOutput<T>, NnError> {
        let inst = self.instance(instance)?;
        let layers = &self.layers[instance];
        if obs.len() != inst.obs_width() {
            return Err(NnError::Shape { expected: inst.obs_width(), got: obs.len() });
        }
        let s = &self.store;
        let mut tokens = Vec::new();
        let mut attn = None;
        let mut gru_cache = None;
        let mut embed = Vec::new();
        let mut new_hidden = None;
        let body_out = match self.config.body {
            Body::Attention => {
                let mut off = 0;
                for (k, &w) in inst.obs_blocks.iter().enumerate() {
                    tokens.push(tanh_vec(layers.embeds[k].forward(s, &obs[off..off + w])));
                    off += w;
                }
                let (pooled, cache) = layers.attn.as_ref().expect("attention body").forward(s, &tokens);
                attn = Some(cache);
                pooled
            }
            Body::Dense => {
                embed = tanh_vec(layers.embeds[0].forward(s, obs));
                embed.clone()
            }
            Body::Recurrent => {
                embed = tanh_vec(layers.embeds[0].forward(s, obs));
                let width = self.config.embed_width;
                let zeros;
                let h_prev = match hidden {
                    Some(h) if h.len() == width => h,
                    Some(h) => return Err(NnError::Shape { expected: width, got: h.len() }),
                    None => {
                        zeros = vec![T::zero(); width];
                        &zeros
                    }
                };
                let (h, cache) = layers.gru.as_ref().expect("recurrent body").forward(s, &embed, h_prev);
                gru_cache = Some(cache);
                new_hidden = Some(h.clone());
                h
            }
            Body::FullyConnected => {
                embed = tanh_vec(layers.embeds[0].forward(s, obs));
                tanh_vec(layers.fc2.as_ref().expect("wide body").forward(s, &embed))
            }
        };
        let head_in = match &self.shared {
            Some(sh) => tanh_vec(sh.forward(s, &body_out)),
            None => body_out.clone(),
        };
        let logits: Vec<Vec<T>> = layers.heads.iter().map(|h| h.forward(s, &head_in)).collect();
        if logits.iter().flatten().any(|x| !x.is_finite()) {
            return Err(NnError::NonFinite("actor logits"));
        }
        Ok(ActorOutput {
            logits,
            hidden: new_hidden,
            trace: ActorTrace {
                version: s.version(),
                instance,
                input: obs.to_vec(),
                tokens,
                attn,
                embed,
                gru: gru_cache,
                body_out,
                head_in,
            },
        })
    }

    /// Accumulates parameter gradients for upstream gradients on the logits
    /// and (recurrent body) on the emitted hidden state. Returns the gradient
    /// on the incoming hidden state.
    pub fn backward_actor(
        &mut self,
        trace: &ActorTrace<T>,
        dlogits: &[Vec<T>],
        dhidden: Option<&[T]>,
    ) -> Result<Option<Vec<T>>, NnError> {
        if trace.version != self.store.version() {
            return Err(NnError::StaleTrace);
        }
        let layers = self.layers[trace.instance].clone();
        if dlogits.len() != layers.heads.len() {
            return Err(NnError::Shape { expected: layers.heads.len(), got: dlogits.len() });
        }
        let s = &mut self.store;
        let mut dhead_in = vec![T::zero(); trace.head_in.len()];
        for (h, d) in layers.heads.iter().zip(dlogits) {
            h.backward(s, &trace.head_in, d, Some(&mut dhead_in));
        }
        let mut dbody = match &self.shared {
            Some(sh) => {
                let mut d = vec![T::zero(); trace.body_out.len()];
                sh.backward(s, &trace.body_out, &tanh_backward(&trace.head_in, &dhead_in), Some(&mut d));
                d
            }
            None => dhead_in,
        };
        let inst = &self.config.instances[trace.instance];
        match self.config.body {
            Body::Attention => {
                let attn = layers.attn.as_ref().expect("attention body");
                let cache = trace.attn.as_ref().expect("attention trace");
                let dtokens = attn.backward(s, &trace.tokens, cache, &dbody);
                let mut off = 0;
                for (k, &w) in inst.obs_blocks.iter().enumerate() {
                    let dpre = tanh_backward(&trace.tokens[k], &dtokens[k]);
                    layers.embeds[k].backward(s, &trace.input[off..off + w], &dpre, None);
                    off += w;
                }
                Ok(None)
            }
            Body::Dense => {
                layers.embeds[0].backward(s, &trace.input, &tanh_backward(&trace.embed, &dbody), None);
                Ok(None)
            }
            Body::Recurrent => {
                if let Some(dh) = dhidden {
                    add_into(&mut dbody, dh);
                }
                let gru = layers.gru.as_ref().expect("recurrent body");
                let cache = trace.gru.as_ref().expect("recurrent trace");
                let (dx, dh_prev) = gru.backward(s, &trace.embed, cache, &dbody);
                layers.embeds[0].backward(s, &trace.input, &tanh_backward(&trace.embed, &dx), None);
                Ok(Some(dh_prev))
            }
            Body::FullyConnected => {
                let fc2 = layers.fc2.as_ref().expect("wide body");
                let mut dh1 = vec![T::zero(); trace.embed.len()];
                fc2.backward(s, &trace.embed, &tanh_backward(&trace.body_out, &dbody), Some(&mut dh1));
                layers.embeds[0].backward(s, &trace.input, &tanh_backward(&trace.embed, &dh1), None);
                Ok(None)
            }
        }
    }

    pub fn forward_critic(&self, instance: usize, input: &[T]) -> Result<(T, CriticTrace<T>), NnError> {
        let inst = self.instance(instance)?;
        if input.len() != inst.critic_width {
            return Err(NnError::Shape { expected: inst.critic_width, got: input.len() });
        }
        let layers = &self.layers[instance];
        let s = &self.store;
        let embed = tanh_vec(layers.critic_in.forward(s, input));
        let body_out = match &layers.critic_fc2 {
            Some(fc2) => tanh_vec(fc2.forward(s, &embed)),
            None => embed.clone(),
        };
        let head_in = match (&self.shared, &layers.critic_fc2) {
            (Some(sh), None) => tanh_vec(sh.forward(s, &body_out)),
            _ => body_out.clone(),
        };
        let v = layers.value.forward(s, &head_in)[0];
        if !v.is_finite() {
            return Err(NnError::NonFinite("critic value"));
        }
        Ok((v, CriticTrace { version: s.version(), instance, input: input.to_vec(), embed, body_out, head_in }))
    }

    pub fn backward_critic(&mut self, trace: &CriticTrace<T>, dvalue: T) -> Result<(), NnError> {
        if trace.version != self.store.version() {
            return Err(NnError::StaleTrace);
        }
        let layers = self.layers[trace.instance].clone();
        let s = &mut self.store;
        let mut dhead = vec![T::zero(); trace.head_in.len()];
        layers.value.backward(s, &trace.head_in, &[dvalue], Some(&mut dhead));
        let dbody = match (&self.shared, &layers.critic_fc2) {
            (Some(sh), None) => {
                let mut d = vec![T::zero(); trace.body_out.len()];
                sh.backward(s, &trace.body_out, &tanh_backward(&trace.head_in, &dhead), Some(&mut d));
                d
            }
            _ => dhead,
        };
        let dembed = match &layers.critic_fc2 {
            Some(fc2) => {
                let mut d = vec![T::zero(); trace.embed.len()];
                fc2.backward(s, &trace.embed, &tanh_backward(&trace.body_out, &dbody), Some(&mut d));
                d
            }
            None => dbody,
        };
        layers.critic_in.backward(s, &trace.input, &tanh_backward(&trace.embed, &dembed), None);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{softmax, AdamConfig};

    #[test]
    fn fight_heads_and_widths() {
        let net = PolicyNet::<f32>::new(NetworkConfig::fight([40, 38])).unwrap();
        let out = net.forward_actor(0, &[0.5; 27], None).unwrap();
        let sizes: Vec<usize> = out.logits.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![13, 9, 2, 2]);
        assert!(net.forward_actor(1, &[0.5; 27], None).is_err());
        assert_eq!(net.forward_actor(1, &[0.5; 25], None).unwrap().logits.len(), 4);
    }

    #[test]
    fn commander_logits() {
        let net = PolicyNet::<f32>::new(NetworkConfig::commander(2, 3, 50)).unwrap();
        let out = net.forward_actor(0, &[0.1; 34], None).unwrap();
        assert_eq!(out.logits[0].len(), 3);
        assert_eq!(out.hidden.as_ref().unwrap().len(), 100);
        let again = net.forward_actor(0, &[0.1; 34], out.hidden.as_deref()).unwrap();
        assert_ne!(again.hidden, out.hidden);
    }

    #[test]
    fn zero_parameters_give_uniform_policy_and_zero_value() {
        let net = PolicyNet::<f64>::zeroed(NetworkConfig::fight([40, 38])).unwrap();
        let out = net.forward_actor(0, &[0.0; 27], None).unwrap();
        for head in &out.logits {
            let p = softmax(head);
            assert!(p.iter().all(|&x| (x - 1.0 / head.len() as f64).abs() < 1e-15));
        }
        assert_eq!(net.forward_critic(0, &[0.3; 40]).unwrap().0, 0.0);
    }

    #[test]
    fn stale_trace_is_rejected() {
        let mut net = PolicyNet::<f64>::new(NetworkConfig::escape([30, 29])).unwrap();
        let out = net.forward_actor(0, &[0.2; 28], None).unwrap();
        let d: Vec<Vec<f64>> = out.logits.iter().map(|h| vec![1.0; h.len()]).collect();
        net.backward_actor(&out.trace, &d, None).unwrap();
        net.store.adam_step(1e-3, &AdamConfig::default());
        assert_eq!(net.backward_actor(&out.trace, &d, None), Err(NnError::StaleTrace));
    }

    #[test]
    fn actor_update_moves_critic_through_shared_layer() {
        let mut net = PolicyNet::<f64>::new(NetworkConfig::fight([40, 38])).unwrap();
        let shared = *net.shared_layer().unwrap();
        let crit_in = vec![0.4; 40];
        let v0 = net.forward_critic(0, &crit_in).unwrap().0;
        let out = net.forward_actor(0, &[0.3; 27], None).unwrap();
        let d: Vec<Vec<f64>> = out.logits.iter().map(|h| (0..h.len()).map(|i| i as f64).collect()).collect();
        net.backward_actor(&out.trace, &d, None).unwrap();
        assert!(net.store.grad(shared.w).iter().any(|&g| g != 0.0));
        // only the actor produced gradients, yet the critic output changes
        net.store.adam_step(1e-2, &AdamConfig::default());
        let v1 = net.forward_critic(0, &crit_in).unwrap().0;
        assert_ne!(v0, v1);
        // both instances reference the one shared layer
        let names: Vec<&str> = net.store.ids().map(|i| net.store.name(i)).filter(|n| n.starts_with("shared")).collect();
        assert_eq!(names, vec!["shared.w", "shared.b"]);
    }

    #[test]
    fn fully_connected_has_no_shared_layer() {
        let net = PolicyNet::<f32>::new(NetworkConfig::fight([40, 38]).with_body(Body::FullyConnected)).unwrap();
        assert!(net.shared_layer().is_none());
        let out = net.forward_actor(0, &[0.5; 27], None).unwrap();
        assert_eq!(out.logits.len(), 4);
    }

    #[test]
    fn forward_is_deterministic() {
        let a = PolicyNet::<f32>::new(NetworkConfig::fight([40, 38]).with_seed(7)).unwrap();
        let b = PolicyNet::<f32>::new(NetworkConfig::fight([40, 38]).with_seed(7)).unwrap();
        assert_eq!(a.store.checksum(), b.store.checksum());
        let x: Vec<f32> = (0..27).map(|i| i as f32 / 27.0).collect();
        assert_eq!(a.forward_actor(0, &x, None).unwrap().logits, b.forward_actor(0, &x, None).unwrap().logits);
    }
}
