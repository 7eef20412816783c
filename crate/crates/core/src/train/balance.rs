//! Adaptive loss balancing: SoftAdapt and relative loss balancing with
//! random lookback (ReLoBRaLo).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// SoftAdapt: lambda_i = softmax_i(tau * [L_i(t) - L_i(t-1)]).
/// Weights sum to one and favor the worst-trending loss.
pub fn softadapt_weights(prev: &[f64], curr: &[f64], tau: f64) -> Vec<f64> {
    let deltas: Vec<f64> = curr.iter().zip(prev).map(|(c, p)| tau * (c - p)).collect();
    let max = deltas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = deltas.iter().map(|d| (d - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// ReLoBRaLo balance term: lambda_i^bal(t, t') =
/// m * softmax_i(L_i(t) / (tau * L_i(t'))). Sums to m.
pub fn relobralo_balance(curr: &[f64], reference: &[f64], tau: f64) -> Vec<f64> {
    let m = curr.len() as f64;
    let ratios: Vec<f64> = curr
        .iter()
        .zip(reference)
        .map(|(c, r)| c / (tau * r.max(1e-300)))
        .collect();
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = ratios.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| m * e / sum).collect()
}

/// One ReLoBRaLo update:
/// lambda_i(t) = alpha * [rho lambda_i(t-1) + (1 - rho) lambda^bal(t, 0)]
///             + (1 - alpha) * lambda^bal(t, t-1),
/// with rho the Bernoulli lookback draw.
pub fn relobralo_weights(
    curr: &[f64],
    prev: &[f64],
    initial: &[f64],
    lambda_prev: &[f64],
    alpha: f64,
    tau: f64,
    rho: bool,
) -> Vec<f64> {
    let bal_recent = relobralo_balance(curr, prev, tau);
    let bal_initial = relobralo_balance(curr, initial, tau);
    let rho_f = if rho { 1.0 } else { 0.0 };
    (0..curr.len())
        .map(|i| {
            let hist = rho_f * lambda_prev[i] + (1.0 - rho_f) * bal_initial[i];
            alpha * hist + (1.0 - alpha) * bal_recent[i]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum BalancerMethod {
    /// Constant weights.
    Fixed(Vec<f64>),
    SoftAdapt { tau: f64 },
    /// Defaults alpha = 0.999, tau = 1, rho_prob = 0.999.
    ReLoBRaLo { alpha: f64, tau: f64, rho_prob: f64 },
}

impl BalancerMethod {
    pub fn relobralo_default() -> Self {
        BalancerMethod::ReLoBRaLo {
            alpha: 0.999,
            tau: 1.0,
            rho_prob: 0.999,
        }
    }
}

/// Running balancer state: the loss history and the current weights.
#[derive(Debug, Clone)]
pub struct BalancerState {
    pub method: BalancerMethod,
    history: Vec<Vec<f64>>,
    lambda: Vec<f64>,
}

impl BalancerState {
    pub fn new(method: BalancerMethod, n_terms: usize) -> Result<Self> {
        let lambda = match &method {
            BalancerMethod::Fixed(w) => {
                if w.len() != n_terms {
                    return Err(Error::InvalidArg(format!(
                        "{} fixed weights for {n_terms} loss terms",
                        w.len()
                    )));
                }
                if w.iter().any(|&x| x <= 0.0) {
                    return Err(Error::InvalidArg("loss weights must be positive".into()));
                }
                w.clone()
            }
            _ => vec![1.0; n_terms],
        };
        Ok(BalancerState {
            method,
            history: Vec::new(),
            lambda,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.lambda
    }

    /// Record this step's term losses and refresh the weights.
    pub fn update(&mut self, losses: &[f64], rng: &mut ChaCha8Rng) -> Result<&[f64]> {
        if losses.len() != self.lambda.len() {
            return Err(Error::InvalidArg("loss term count changed".into()));
        }
        self.history.push(losses.to_vec());
        let n = self.history.len();
        match &self.method {
            BalancerMethod::Fixed(_) => {}
            BalancerMethod::SoftAdapt { tau } => {
                if n >= 2 {
                    self.lambda = softadapt_weights(&self.history[n - 2], losses, *tau);
                } else {
                    self.lambda = vec![1.0 / losses.len() as f64; losses.len()];
                }
            }
            BalancerMethod::ReLoBRaLo { alpha, tau, rho_prob } => {
                if n >= 2 {
                    let rho = rng.gen_range(0.0..1.0) < *rho_prob;
                    self.lambda = relobralo_weights(
                        losses,
                        &self.history[n - 2],
                        &self.history[0],
                        &self.lambda,
                        *alpha,
                        *tau,
                        rho,
                    );
                }
            }
        }
        Ok(&self.lambda)
    }
}
