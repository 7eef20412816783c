//! Incremental-FNO scheduling: grow the active mode count during
//! training, triggered by loss stagnation or by the explained spectral
//! energy ratio of the learned weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fno::SpectralWeights;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IfnoCriterion {
    /// Expand when the relative loss improvement over the window drops
    /// below eps_improve.
    LossStagnation { window: usize, eps_improve: f64 },
    /// Expand while the cumulative explained ratio of the active modes
    /// g(K, P) = sum_{k<=K} P_k / sum_k P_k stays below alpha.
    ExplainedRatio { alpha: f64 },
}

/// Schedule state: the trigger, the growth step per expansion (in
/// block size, i.e. 2 adds one +-k pair per axis), an optional data
/// resolution ladder advanced on each expansion, and the hard cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfnoSchedule {
    pub criterion: IfnoCriterion,
    pub mode_step: usize,
    pub resolution_ladder: Vec<usize>,
    pub ladder_index: usize,
}

impl IfnoSchedule {
    pub fn new(criterion: IfnoCriterion) -> Self {
        IfnoSchedule {
            criterion,
            mode_step: 2,
            resolution_ladder: Vec::new(),
            ladder_index: 0,
        }
    }

    /// Current training resolution from the ladder, if one is set.
    pub fn current_resolution(&self) -> Option<usize> {
        if self.resolution_ladder.is_empty() {
            None
        } else {
            Some(self.resolution_ladder[self.ladder_index.min(self.resolution_ladder.len() - 1)])
        }
    }

    pub fn advance_ladder(&mut self) {
        if !self.resolution_ladder.is_empty()
            && self.ladder_index + 1 < self.resolution_ladder.len()
        {
            self.ladder_index += 1;
        }
    }
}

/// Cumulative explained ratio g(K, P) of the first K entries of the
/// mode-energy sequence P_1 .. P_p.
pub fn explained_ratio(mode_energy: &[f64], k: usize) -> Result<f64> {
    if mode_energy.is_empty() {
        return Err(Error::InvalidArg("empty mode-energy sequence".into()));
    }
    let total: f64 = mode_energy.iter().sum();
    if total <= 0.0 {
        return Ok(1.0);
    }
    let covered: f64 = mode_energy.iter().take(k).sum();
    Ok(covered / total)
}

/// Expand when the active modes explain less than `alpha` of the
/// spectral weight energy.
pub fn should_expand_explained(mode_energy: &[f64], k: usize, alpha: f64) -> Result<bool> {
    Ok(explained_ratio(mode_energy, k)? < alpha)
}

/// Expand when the relative improvement of the loss across the window
/// falls below eps_improve. Short histories never trigger.
pub fn should_expand_stagnation(loss_history: &[f64], window: usize, eps_improve: f64) -> bool {
    if loss_history.len() < window + 1 || window == 0 {
        return false;
    }
    let now = loss_history[loss_history.len() - 1];
    let then = loss_history[loss_history.len() - 1 - window];
    let improvement = (then - now) / then.abs().max(1e-300);
    improvement < eps_improve
}

/// Shell energies P_s of the stored spectral weights along one axis:
/// P_s sums |R|^2 over all weight entries whose centered mode offset
/// on that axis has magnitude s (s = 0 is the zero mode).
pub fn spectral_shell_energy(weights: &SpectralWeights, axis: usize) -> Result<Vec<f64>> {
    let tensor = match weights {
        SpectralWeights::Dense(w) => w.clone(),
        SpectralWeights::Tucker { core, factors } => {
            crate::fno::tucker::tucker_reconstruct(core, factors)?
        }
        SpectralWeights::Separable(ws) => ws
            .get(axis)
            .ok_or_else(|| Error::InvalidArg(format!("axis {axis} out of range")))?
            .clone(),
    };
    let mode_axes = match weights {
        SpectralWeights::Separable(_) => 1,
        _ => tensor.ndim() - 2,
    };
    let ax = match weights {
        SpectralWeights::Separable(_) => 0,
        _ => {
            if axis >= mode_axes {
                return Err(Error::InvalidArg(format!("axis {axis} out of range")));
            }
            axis
        }
    };
    let k_max = tensor.shape()[ax];
    let center = k_max / 2;
    let mut shells = vec![0.0; center + 1];
    let strides = tensor.strides();
    for (lin, z) in tensor.data().iter().enumerate() {
        let idx = (lin / strides[ax]) % k_max;
        let shell = (idx as i64 - center as i64).unsigned_abs() as usize;
        shells[shell.min(center)] += z.norm_sqr();
    }
    Ok(shells)
}

/// Active shell count for a centered block of size K
/// (the zero shell plus K/2 pairs).
pub fn active_shells(k: usize) -> usize {
    k / 2 + 1
}

/// Grow a block size by `step`, capped at the stored maximum.
pub fn next_n_modes(current: &[usize], max: &[usize], step: usize) -> Vec<usize> {
    current
        .iter()
        .zip(max)
        .map(|(&k, &m)| (k + step).min(m))
        .collect()
}
