//! Central finite-difference verification of the analytic gradients.
//!
//! The scalar under test is a random linear functional of every actor logit
//! (over a short input sequence for recurrent bodies) plus the critic value,
//! summed over all instances, so every parameter is on some gradient path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Body, NetworkConfig, ParamId, PolicyNet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    /// Random parameter/input draws per architecture.
    pub draws: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Random coordinates checked per parameter tensor and draw.
    pub coords_per_tensor: usize,
    /// Sequence length for recurrent bodies.
    pub seq_len: usize,
    /// Gradients below this magnitude are compared absolutely.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self { draws: 100, step: 1e-4, tolerance: 1e-4, coords_per_tensor: 2, seq_len: 5, floor: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub network: String,
    pub draws: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub passed: bool,
}

impl std::fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<24} draws={:<4} coords={:<6} max_rel_err={:.3e} worst={} {}",
            self.network,
            self.draws,
            self.coordinates,
            self.max_rel_error,
            self.worst_param,
            if self.passed { "ok" } else { "FAIL" }
        )
    }
}

struct Probe {
    inputs: Vec<Vec<Vec<f64>>>,
    h0: Vec<Option<Vec<f64>>>,
    critic_inputs: Vec<Vec<f64>>,
    logit_coefs: Vec<Vec<Vec<Vec<f64>>>>,
    value_coefs: Vec<f64>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn make_probe(net: &PolicyNet<f64>, seq_len: usize, rng: &mut ChaCha8Rng) -> Probe {
    let steps = if net.config.body == Body::Recurrent { seq_len } else { 1 };
    let mut p = Probe { inputs: vec![], h0: vec![], critic_inputs: vec![], logit_coefs: vec![], value_coefs: vec![] };
    for inst in &net.config.instances {
        p.inputs.push((0..steps).map(|_| (0..inst.obs_width()).map(|_| rng.gen::<f64>()).collect()).collect());
        p.h0.push(net.hidden_width().map(|w| (0..w).map(|_| 0.5 * normal(rng)).collect()));
        p.critic_inputs.push((0..inst.critic_width).map(|_| rng.gen::<f64>()).collect());
        p.logit_coefs.push(
            (0..steps).map(|_| inst.heads.iter().map(|&n| (0..n).map(|_| normal(rng)).collect()).collect()).collect(),
        );
        p.value_coefs.push(normal(rng));
    }
    p
}

fn loss(net: &PolicyNet<f64>, p: &Probe) -> f64 {
    let mut total = 0.0;
    for i in 0..net.num_instances() {
        let mut h = p.h0[i].clone();
        for (t, x) in p.inputs[i].iter().enumerate() {
            let out = net.forward_actor(i, x, h.as_deref()).expect("probe shapes match");
            for (head, coef) in out.logits.iter().zip(&p.logit_coefs[i][t]) {
                total += head.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>();
            }
            h = out.hidden;
        }
        total += p.value_coefs[i] * net.forward_critic(i, &p.critic_inputs[i]).expect("probe shapes match").0;
    }
    total
}

fn analytic(net: &mut PolicyNet<f64>, p: &Probe) {
    net.store.zero_grad();
    for i in 0..net.num_instances() {
        let mut h = p.h0[i].clone();
        let mut traces = Vec::new();
        for x in &p.inputs[i] {
            let out = net.forward_actor(i, x, h.as_deref()).expect("probe shapes match");
            h = out.hidden.clone();
            traces.push(out.trace);
        }
        let mut dh: Option<Vec<f64>> = None;
        for (t, trace) in traces.iter().enumerate().rev() {
            dh = net.backward_actor(trace, &p.logit_coefs[i][t], dh.as_deref()).expect("fresh trace");
        }
        let (_, ct) = net.forward_critic(i, &p.critic_inputs[i]).expect("probe shapes match");
        net.backward_critic(&ct, p.value_coefs[i]).expect("fresh trace");
    }
}

fn perturb(net: &mut PolicyNet<f64>, rng: &mut ChaCha8Rng) {
    // non-zero biases so every code path sees generic values
    let ids: Vec<ParamId> = net.store.ids().collect();
    for id in ids {
        for v in net.store.value_mut(id) {
            *v += 0.1 * normal(rng);
        }
    }
}

fn compare(net: &mut PolicyNet<f64>, p: &Probe, id: ParamId, idx: usize, cfg: &GradcheckConfig) -> f64 {
    let a = net.store.grad(id)[idx];
    let orig = net.store.value(id)[idx];
    net.store.value_mut(id)[idx] = orig + cfg.step;
    let up = loss(net, p);
    net.store.value_mut(id)[idx] = orig - cfg.step;
    let down = loss(net, p);
    net.store.value_mut(id)[idx] = orig;
    let n = (up - down) / (2.0 * cfg.step);
    (a - n).abs() / a.abs().max(n.abs()).max(cfg.floor)
}

/// Checks one architecture. With `exhaustive` every coordinate of a single
/// draw is compared; otherwise `cfg.draws` draws each compare
/// `coords_per_tensor` random coordinates of every tensor.
pub fn check_network(name: &str, config: &NetworkConfig, cfg: &GradcheckConfig, exhaustive: bool) -> GradcheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draws = if exhaustive { 1 } else { cfg.draws };
    let mut max_err: f64 = 0.0;
    let mut worst = String::new();
    let mut coords = 0;
    for draw in 0..draws {
        let mut c = config.clone().with_seed(cfg.seed.wrapping_add(draw as u64));
        c.head_gain = 1.0;
        let mut net = PolicyNet::<f64>::new(c).expect("valid config");
        perturb(&mut net, &mut rng);
        let probe = make_probe(&net, cfg.seq_len, &mut rng);
        analytic(&mut net, &probe);
        let ids: Vec<ParamId> = net.store.ids().collect();
        for id in ids {
            let n = net.store.value(id).len();
            let picks: Vec<usize> = if exhaustive {
                (0..n).collect()
            } else {
                (0..cfg.coords_per_tensor).map(|_| rng.gen_range(0..n)).collect()
            };
            for idx in picks {
                let e = compare(&mut net, &probe, id, idx, cfg);
                coords += 1;
                if e > max_err || !e.is_finite() {
                    max_err = if e.is_finite() { e } else { f64::INFINITY };
                    worst = format!("{}[{idx}]", net.store.name(id));
                }
            }
        }
    }
    GradcheckReport {
        network: name.to_string(),
        draws,
        coordinates: coords,
        max_rel_error: max_err,
        worst_param: worst,
        passed: max_err < cfg.tolerance,
    }
}

/// The architectures under test, at full and at reduced width.
pub fn architectures(reduced: bool) -> Vec<(String, NetworkConfig)> {
    let fight = NetworkConfig::fight([40, 38]);
    let mut list = vec![
        ("fight-attention".to_string(), fight.clone()),
        ("escape-dense".to_string(), NetworkConfig::escape([30, 29])),
        ("commander-gru".to_string(), NetworkConfig::commander(2, 3, 50)),
        ("fight-fc".to_string(), fight.with_body(crate::nn::Body::FullyConnected)),
    ];
    if reduced {
        for (name, c) in &mut list {
            *c = c.clone().with_widths(6, 3, 7);
            name.push_str("-small");
        }
    }
    list
}

/// Exhaustive check at reduced width plus sampled checks at full width for
/// every architecture.
pub fn run_all(cfg: &GradcheckConfig) -> Vec<GradcheckReport> {
    let mut out = Vec::new();
    for (name, c) in architectures(true) {
        out.push(check_network(&name, &c, cfg, true));
    }
    for (name, c) in architectures(false) {
        out.push(check_network(&name, &c, cfg, false));
    }
    out
}
