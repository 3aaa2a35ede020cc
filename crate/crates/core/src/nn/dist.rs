//! Factored categorical action distributions.

use rand::Rng;

use super::{NnError, Scalar};

pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<f64> {
    let m = logits.iter().map(|x| x.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|x| (x.as_f64() - m).exp()).sum::<f64>().ln();
    logits.iter().map(|x| x.as_f64() - lse).collect()
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledAction {
    /// One category index per head.
    pub actions: Vec<usize>,
    /// Sum of per-head log-probabilities of `actions`.
    pub log_prob: f64,
    /// Sum of per-head entropies.
    pub entropy: f64,
}

fn check_finite<T: Scalar>(logits: &[Vec<T>]) -> Result<(), NnError> {
    if logits.iter().flatten().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFinite("logits"))
    }
}

/// Samples every head independently (or takes each argmax when `greedy`).
/// Heads with `mask[h] == false` are skipped: they report action 0 and do
/// not contribute to log-probability or entropy.
pub fn sample_action<T: Scalar>(
    logits: &[Vec<T>],
    mask: Option<&[bool]>,
    rng: &mut impl Rng,
    greedy: bool,
) -> Result<SampledAction, NnError> {
    check_finite(logits)?;
    let mut actions = Vec::with_capacity(logits.len());
    let mut log_prob = 0.0;
    let mut entropy = 0.0;
    for (h, head) in logits.iter().enumerate() {
        if mask.is_some_and(|m| !m[h]) {
            actions.push(0);
            continue;
        }
        let lp = log_softmax(head);
        let a = if greedy {
            // first maximal index, so ties resolve deterministically
            let mut best = 0;
            for i in 1..lp.len() {
                if lp[i] > lp[best] {
                    best = i;
                }
            }
            best
        } else {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = lp.len() - 1;
            for (i, l) in lp.iter().enumerate() {
                acc += l.exp();
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        };
        log_prob += lp[a];
        entropy -= lp.iter().map(|l| l.exp() * l).sum::<f64>();
        actions.push(a);
    }
    Ok(SampledAction { actions, log_prob, entropy })
}

/// Log-probability and entropy of `actions` under `logits`, with gradients of
/// `coef_logp * log_prob + coef_ent * entropy` w.r.t. every logit.
pub fn categorical_log_prob<T: Scalar>(
    logits: &[Vec<T>],
    actions: &[usize],
    mask: Option<&[bool]>,
    coef_logp: f64,
    coef_ent: f64,
) -> Result<(f64, f64, Vec<Vec<T>>), NnError> {
    check_finite(logits)?;
    let mut log_prob = 0.0;
    let mut entropy = 0.0;
    let mut grads = Vec::with_capacity(logits.len());
    for (h, head) in logits.iter().enumerate() {
        if mask.is_some_and(|m| !m[h]) {
            grads.push(vec![T::zero(); head.len()]);
            continue;
        }
        let lp = log_softmax(head);
        let p: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
        let ent: f64 = -p.iter().zip(&lp).map(|(p, l)| p * l).sum::<f64>();
        let a = actions[h];
        log_prob += lp[a];
        entropy += ent;
        let g = (0..head.len())
            .map(|j| {
                let onehot = if j == a { 1.0 } else { 0.0 };
                let d_logp = onehot - p[j];
                let d_ent = -p[j] * (lp[j] + ent);
                T::from_f64(coef_logp * d_logp + coef_ent * d_ent)
            })
            .collect();
        grads.push(g);
    }
    Ok((log_prob, entropy, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_action(&[vec![0.0f64, 0.0]], None, &mut rng, false).unwrap();
        assert!((s.log_prob - 0.5f64.ln()).abs() < 1e-15);
        assert!((s.entropy - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn peaked_head_and_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let logits = [vec![10.0f32, 0.0, 0.0]];
        let hits = (0..10_000)
            .filter(|_| sample_action(&logits, None, &mut rng, false).unwrap().actions[0] == 0)
            .count();
        assert!(hits > 9_900);
        let g = sample_action(&[vec![0.1f64, 0.7, 0.2]], None, &mut rng, true).unwrap();
        assert_eq!(g.actions, vec![1]);
        assert!(softmax(&[10.0f64, 0.0, 0.0])[0] > 0.99);
    }

    #[test]
    fn nan_logits_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_action(&[vec![f64::NAN, 0.0]], None, &mut rng, false).is_err());
    }

    #[test]
    fn probabilities_sum_to_one_and_logp_matches() {
        let logits = vec![vec![0.3f64, -1.2, 2.0, 0.0], vec![5.0, -5.0]];
        for head in &logits {
            assert!((softmax(head).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = sample_action(&logits, None, &mut rng, false).unwrap();
        let want: f64 = s.actions.iter().zip(&logits).map(|(&a, h)| softmax(h)[a].ln()).sum();
        assert!((s.log_prob - want).abs() < 1e-12);
        let (lp, ent, _) = categorical_log_prob(&logits, &s.actions, None, 1.0, 0.0).unwrap();
        assert!((lp - s.log_prob).abs() < 1e-15);
        assert!((ent - s.entropy).abs() < 1e-12);
    }

    #[test]
    fn masked_heads_are_ignored() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let logits = [vec![0.0f64, 0.0], vec![0.0, 0.0, 0.0]];
        let s = sample_action(&logits, Some(&[true, false]), &mut rng, false).unwrap();
        assert_eq!(s.actions[1], 0);
        assert!((s.log_prob - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_prob_gradient_matches_finite_difference() {
        let logits = vec![vec![0.3f64, -1.2, 2.0]];
        let (_, _, g) = categorical_log_prob(&logits, &[1], None, 0.7, 0.3).unwrap();
        let f = |l: &Vec<Vec<f64>>| {
            let (lp, ent, _) = categorical_log_prob(l, &[1], None, 0.0, 0.0).unwrap();
            0.7 * lp + 0.3 * ent
        };
        for j in 0..3 {
            let mut p = logits.clone();
            let mut m = logits.clone();
            p[0][j] += 1e-6;
            m[0][j] -= 1e-6;
            let fd = (f(&p) - f(&m)) / 2e-6;
            assert!((fd - g[0][j]).abs() < 1e-8);
        }
    }
}
