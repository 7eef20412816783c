//! The training loop (deterministic given a seed), evaluation metrics,
//! autoregressive rollouts, and physics-based fine-tuning.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::dataset::DatasetFile;
use crate::error::{Error, Result};
use crate::fno::layers::{fno_forward_tape, spectral_resample_tape};
use crate::fno::FnoModel;
use crate::grid::GridSpec;
use crate::tensor::{ComplexTensor, RealTensor};
use crate::train::balance::{BalancerMethod, BalancerState};
use crate::train::ifno::{
    active_shells, next_n_modes, should_expand_explained, should_expand_stagnation,
    spectral_shell_energy, IfnoCriterion, IfnoSchedule,
};
use crate::train::loss::{h1_loss, h1_loss_tape, lp_loss_tape, relative_l2, LossSpec};
use crate::train::optim::{Adam, LrSchedule};
use crate::train::physics::physics_residual_poisson_tape;
use crate::train::tape::Tape;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub schedule: LrSchedule,
    pub seed: u64,
    /// Primary data loss.
    pub loss: LossSpec,
    /// Add an H1 term as a second balanced loss.
    pub use_h1_term: bool,
    pub balancer: BalancerMethod,
    pub ifno: Option<IfnoSchedule>,
}

impl TrainConfig {
    pub fn new(epochs: usize, lr: f64, seed: u64, grid: &GridSpec) -> Self {
        TrainConfig {
            epochs,
            batch_size: 20,
            lr,
            schedule: LrSchedule::Cosine { total: epochs },
            seed,
            loss: LossSpec::lp_rel(2.0, grid),
            use_h1_term: false,
            balancer: BalancerMethod::Fixed(vec![1.0]),
            ifno: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub losses: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub n_modes: Vec<usize>,
    pub lr: f64,
    pub train_rel_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub loss_names: Vec<String>,
    pub ifno_enabled: bool,
    pub rows: Vec<EpochRow>,
}

impl TrainHistory {
    /// CSV with one row per epoch and a trailing metadata comment line
    /// recording the exact invocation.
    pub fn to_csv(&self, invocation: &str) -> String {
        let mut header = vec!["epoch".to_string()];
        for name in &self.loss_names {
            header.push(format!("loss_{name}"));
        }
        for name in &self.loss_names {
            header.push(format!("lambda_{name}"));
        }
        if self.ifno_enabled {
            if let Some(row) = self.rows.first() {
                for ax in 0..row.n_modes.len() {
                    header.push(format!("k_axis{ax}"));
                }
            }
        }
        header.push("lr".into());
        header.push("train_rel_l2".into());
        let mut out = header.join(",");
        out.push('\n');
        for row in &self.rows {
            let mut cells = vec![row.epoch.to_string()];
            for v in &row.losses {
                cells.push(format!("{v:.17e}"));
            }
            for v in &row.lambdas {
                cells.push(format!("{v:.17e}"));
            }
            if self.ifno_enabled {
                for k in &row.n_modes {
                    cells.push(k.to_string());
                }
            }
            cells.push(format!("{:.17e}", row.lr));
            cells.push(format!("{:.17e}", row.train_rel_l2));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out.push_str(&format!("# invocation: {invocation}\n"));
        out
    }

    pub fn final_train_rel_l2(&self) -> Option<f64> {
        self.rows.last().map(|r| r.train_rel_l2)
    }
}

/// Value-preserving spectral resample of a [C, N..] field.
pub fn field_resample(field: &RealTensor, target: &[usize]) -> Result<RealTensor> {
    if &field.shape()[1..] == target {
        return Ok(field.clone());
    }
    let mut tape = Tape::new();
    let id = tape.constant(field.to_complex());
    let out = spectral_resample_tape(&mut tape, id, target, false)?;
    Ok(tape.value(out).real_part())
}

fn expand_if_due(
    model: &mut FnoModel,
    schedule: &mut IfnoSchedule,
    total_loss_history: &[f64],
) -> Result<bool> {
    let at_max = model
        .config
        .n_modes
        .iter()
        .zip(&model.config.max_n_modes)
        .all(|(k, m)| k >= m);
    if at_max {
        return Ok(false);
    }
    let due = match schedule.criterion {
        IfnoCriterion::LossStagnation { window, eps_improve } => {
            should_expand_stagnation(total_loss_history, window, eps_improve)
        }
        IfnoCriterion::ExplainedRatio { alpha } => {
            let mut due = false;
            for axis in 0..model.config.ndim() {
                // energy pooled over layers along this axis
                let mut shells: Vec<f64> = Vec::new();
                for block in &model.params.blocks {
                    let s = spectral_shell_energy(&block.spectral, axis)?;
                    if shells.len() < s.len() {
                        shells.resize(s.len(), 0.0);
                    }
                    for (a, b) in shells.iter_mut().zip(&s) {
                        *a += b;
                    }
                }
                let k = active_shells(model.config.n_modes[axis]);
                if should_expand_explained(&shells, k, alpha)? {
                    due = true;
                }
            }
            due
        }
    };
    if due {
        model.config.n_modes = next_n_modes(
            &model.config.n_modes,
            &model.config.max_n_modes,
            schedule.mode_step,
        );
        schedule.advance_ladder();
    }
    Ok(due)
}

/// Train the model in place; returns the per-epoch history. The run is
/// deterministic given the seed (one ChaCha stream drives shuffling
/// and the balancer's lookback draws; summation order is fixed).
pub fn train(model: &mut FnoModel, dataset: &DatasetFile, cfg: &TrainConfig) -> Result<TrainHistory> {
    model.config.validate()?;
    if dataset.header.input_shape[0] != model.config.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "dataset provides {} input channels, model expects {}",
            dataset.header.input_shape[0], model.config.in_channels
        )));
    }
    let grid = dataset.header.grid.clone();
    let mut loss_names = vec!["data".to_string()];
    if cfg.use_h1_term {
        loss_names.push("h1".into());
    }
    let n_terms = loss_names.len();
    let mut balancer = BalancerState::new(cfg.balancer.clone(), n_terms)?;
    let mut adam = Adam::new(cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut schedule = cfg.ifno.clone();
    let mut total_history: Vec<f64> = Vec::new();

    let train_indices: Vec<usize> = dataset.train_range().collect();
    let base_inputs: Vec<&RealTensor> = dataset.inputs[dataset.train_range()].iter().collect();
    let base_outputs: Vec<&RealTensor> = dataset.outputs[dataset.train_range()].iter().collect();

    let mut current_res: Vec<usize> = dataset.header.input_shape[1..].to_vec();
    let mut inputs: Vec<RealTensor> = base_inputs.iter().map(|t| (*t).clone()).collect();
    let mut outputs: Vec<RealTensor> = base_outputs.iter().map(|t| (*t).clone()).collect();
    let mut cur_grid = grid.clone();

    let mut rows = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if let Some(s) = schedule.as_mut() {
            if epoch > 0 {
                expand_if_due(model, s, &total_history)?;
            }
            if let Some(res) = s.current_resolution() {
                let target = vec![res; current_res.len()];
                if target != current_res {
                    inputs = base_inputs
                        .iter()
                        .map(|t| field_resample(t, &target))
                        .collect::<Result<_>>()?;
                    outputs = base_outputs
                        .iter()
                        .map(|t| field_resample(t, &target))
                        .collect::<Result<_>>()?;
                    cur_grid = grid.with_resolution(&target)?;
                    current_res = target;
                }
            }
        }

        let lr_factor = cfg.schedule.factor(epoch);
        let mut order: Vec<usize> = (0..train_indices.len()).collect();
        order.shuffle(&mut rng);

        let lambdas = balancer.weights().to_vec();
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let mut tape = Tape::new();
            let reg = model.params.register(&mut tape);
            let mut term_ids: Vec<Option<crate::train::tape::ValueId>> = vec![None; n_terms];
            for &i in batch {
                let x = tape.constant(inputs[i].to_complex());
                let y = fno_forward_tape(&mut tape, x, &reg, &model.config)?;
                let target = outputs[i].to_complex();
                let data_term = lp_loss_tape(&mut tape, y, &target, &cfg.loss)?;
                term_ids[0] = Some(match term_ids[0] {
                    Some(acc) => tape.add(acc, data_term)?,
                    None => data_term,
                });
                if cfg.use_h1_term {
                    let h1_term = h1_loss_tape(&mut tape, y, &target, &cur_grid)?;
                    term_ids[1] = Some(match term_ids[1] {
                        Some(acc) => tape.add(acc, h1_term)?,
                        None => h1_term,
                    });
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let mut total: Option<crate::train::tape::ValueId> = None;
            for (t, lambda) in term_ids.iter().zip(&lambdas) {
                let id = t.expect("term accumulated");
                let weighted = tape.scale(
                    id,
                    num_complex::Complex64::new(scale * lambda, 0.0),
                );
                total = Some(match total {
                    Some(acc) => tape.add(acc, weighted)?,
                    None => weighted,
                });
            }
            let total = total.expect("at least one loss term");
            let grads = tape.grad(total, &reg.flat)?;
            adam.step(model.params.visit_mut(), &grads, lr_factor)?;
        }

        // end-of-epoch metrics on the (possibly resampled) train split
        let mut term_means = vec![0.0; n_terms];
        let mut rel_sum = 0.0;
        for i in 0..inputs.len() {
            let pred = model.forward(&inputs[i].to_complex())?;
            let target = outputs[i].to_complex();
            term_means[0] += crate::train::loss::lp_loss(&pred, &target, &cfg.loss)?;
            if cfg.use_h1_term {
                term_means[1] += h1_loss(&pred, &target, &cur_grid)?;
            }
            rel_sum += relative_l2(&pred.real_part(), &outputs[i]);
        }
        for t in &mut term_means {
            *t /= inputs.len() as f64;
        }
        let train_rel_l2 = rel_sum / inputs.len() as f64;
        let total_mean: f64 = term_means
            .iter()
            .zip(balancer.weights())
            .map(|(l, w)| l * w)
            .sum();
        total_history.push(total_mean);
        let lambdas_now = balancer.weights().to_vec();
        balancer.update(&term_means, &mut rng)?;

        rows.push(EpochRow {
            epoch,
            losses: term_means,
            lambdas: lambdas_now,
            n_modes: model.config.n_modes.clone(),
            lr: cfg.lr * lr_factor,
            train_rel_l2,
        });
    }

    Ok(TrainHistory {
        loss_names,
        ifno_enabled: cfg.ifno.is_some(),
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub per_sample_rel_l2: Vec<f64>,
    pub per_sample_h1: Vec<f64>,
    pub mean_rel_l2: f64,
    pub mean_h1: f64,
}

/// Per-sample relative L2 and H1 metrics over a sample range.
pub fn evaluate(
    model: &FnoModel,
    dataset: &DatasetFile,
    range: std::ops::Range<usize>,
) -> Result<EvalReport> {
    if range.is_empty() || range.end > dataset.inputs.len() {
        return Err(Error::InvalidArg(format!(
            "empty or out-of-range evaluation range {range:?}"
        )));
    }
    let grid = &dataset.header.grid;
    let mut per_sample_rel_l2 = Vec::with_capacity(range.len());
    let mut per_sample_h1 = Vec::with_capacity(range.len());
    for i in range {
        let pred = model.forward(&dataset.inputs[i].to_complex())?;
        per_sample_rel_l2.push(relative_l2(&pred.real_part(), &dataset.outputs[i]));
        // H1 on the flattened single-channel field when 1-channel,
        // channel-wise mean otherwise
        let channels = dataset.header.output_shape[0];
        let per_chan = dataset.outputs[i].len() / channels;
        let mut h1_sum = 0.0;
        for c in 0..channels {
            let p = ComplexTensor::from_real_slice(
                grid.resolution(),
                &pred.real_part().data()[c * per_chan..(c + 1) * per_chan],
            )?;
            let t = ComplexTensor::from_real_slice(
                grid.resolution(),
                &dataset.outputs[i].data()[c * per_chan..(c + 1) * per_chan],
            )?;
            h1_sum += h1_loss(&p, &t, grid)?;
        }
        per_sample_h1.push(h1_sum / channels as f64);
    }
    let mean_rel_l2 = per_sample_rel_l2.iter().sum::<f64>() / per_sample_rel_l2.len() as f64;
    let mean_h1 = per_sample_h1.iter().sum::<f64>() / per_sample_h1.len() as f64;
    Ok(EvalReport {
        per_sample_rel_l2,
        per_sample_h1,
        mean_rel_l2,
        mean_h1,
    })
}

/// Autoregressive rollout: u_{n+1} = G(u_n), or u_{n+1} = u_n + G(u_n)
/// in residual-target mode. Returns steps + 1 states including u0.
pub fn rollout(
    mut step: impl FnMut(&RealTensor) -> Result<RealTensor>,
    u0: &RealTensor,
    steps: usize,
    residual_target: bool,
) -> Result<Vec<RealTensor>> {
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push(u0.clone());
    for _ in 0..steps {
        let current = trajectory.last().unwrap();
        let predicted = step(current)?;
        if predicted.shape() != current.shape() {
            return Err(Error::ShapeMismatch(
                "rollout step changed the field shape".into(),
            ));
        }
        let next = if residual_target {
            RealTensor::from_data(
                current.shape(),
                current
                    .data()
                    .iter()
                    .zip(predicted.data())
                    .map(|(a, b)| a + b)
                    .collect(),
            )?
        } else {
            predicted
        };
        trajectory.push(next);
    }
    Ok(trajectory)
}

/// Data-free fine-tuning of a Poisson surrogate on one instance:
/// minimize the physics residual plus `anchor_weight` times the squared
/// distance to the pretrained prediction. Returns the physics residual
/// before each step and after the last (length steps + 1).
pub fn finetune_anchor(
    model: &mut FnoModel,
    forcing: &RealTensor,
    grid: &GridSpec,
    anchor_weight: f64,
    steps: usize,
    lr: f64,
) -> Result<Vec<f64>> {
    let mut input_shape = vec![1usize];
    input_shape.extend_from_slice(forcing.shape());
    let input = forcing.to_complex().reshape(&input_shape)?;
    let anchor = model.forward(&input)?;
    let quad = grid.quadrature_weight();

    let mut adam = Adam::new(lr);
    let mut residuals = Vec::with_capacity(steps + 1);
    for _ in 0..steps {
        let mut tape = Tape::new();
        let reg = model.params.register(&mut tape);
        let x = tape.constant(input.clone());
        let y = fno_forward_tape(&mut tape, x, &reg, &model.config)?;
        let physics = physics_residual_poisson_tape(&mut tape, y, forcing, grid)?;
        residuals.push(tape.value(physics).data()[0].re);
        let loss = if anchor_weight > 0.0 {
            let a = tape.constant(anchor.clone());
            let diff = tape.sub(y, a)?;
            let sq = tape.abs_pow(diff, 2.0);
            let sum = tape.sum(sq);
            let anchored = tape.scale(
                sum,
                num_complex::Complex64::new(anchor_weight * quad, 0.0),
            );
            tape.add(physics, anchored)?
        } else {
            physics
        };
        let grads = tape.grad(loss, &reg.flat)?;
        adam.step(model.params.visit_mut(), &grads, 1.0)?;
    }
    // residual after the final step
    let pred = model.forward(&input)?;
    let final_residual = {
        let field = pred.real_part();
        let flat = RealTensor::from_data(forcing.shape(), field.data().to_vec())?;
        crate::train::physics::physics_residual_poisson(&flat, forcing, grid, None)?
    };
    residuals.push(final_residual);
    Ok(residuals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::DatasetFile;
    use crate::data::{heat_operator_exact, sample_grf, GrfSpec};
    use crate::fno::FnoConfig;
    use std::f64::consts::PI;

    fn heat_dataset(n_samples: usize, train: usize, n: usize, seed: u64) -> DatasetFile {
        let spec = GrfSpec {
            resolution: vec![n],
            domain_length: vec![2.0 * PI],
            gamma: 1.5,
            k_max: 5,
            seed,
        };
        let grid = spec.grid();
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for i in 0..n_samples {
            let u0 = sample_grf(&spec, i as u64).unwrap();
            let u1 = heat_operator_exact(&u0, 0.05, 1.0, &grid).unwrap();
            inputs.push(RealTensor::from_data(&[1, n], u0.data().to_vec()).unwrap());
            outputs.push(RealTensor::from_data(&[1, n], u1.data().to_vec()).unwrap());
        }
        DatasetFile::new(grid, inputs, outputs, train).unwrap()
    }

    #[test]
    fn zero_epochs_leaves_params_unchanged() {
        let ds = heat_dataset(4, 3, 32, 1);
        let mut model = FnoModel::init(FnoConfig::new_1d(8, 4, 2), 2).unwrap();
        let before = model.params.clone();
        let cfg = TrainConfig::new(0, 1e-3, 3, &ds.header.grid);
        let history = train(&mut model, &ds, &cfg).unwrap();
        assert!(history.rows.is_empty());
        assert_eq!(model.params, before);
    }

    #[test]
    fn same_seed_gives_bit_identical_histories() {
        let ds = heat_dataset(8, 6, 32, 5);
        let cfg = TrainConfig::new(3, 2e-3, 7, &ds.header.grid);
        let mut m1 = FnoModel::init(FnoConfig::new_1d(8, 4, 2), 9).unwrap();
        let mut m2 = FnoModel::init(FnoConfig::new_1d(8, 4, 2), 9).unwrap();
        let h1 = train(&mut m1, &ds, &cfg).unwrap();
        let h2 = train(&mut m2, &ds, &cfg).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(m1.params, m2.params);
    }

    #[test]
    fn short_training_reduces_the_loss() {
        let ds = heat_dataset(16, 12, 32, 11);
        let mut cfg = TrainConfig::new(25, 1e-2, 13, &ds.header.grid);
        cfg.batch_size = 4;
        let mut model = FnoModel::init(FnoConfig::new_1d(8, 6, 2), 17).unwrap();
        let history = train(&mut model, &ds, &cfg).unwrap();
        let first = history.rows.first().unwrap().losses[0];
        let last = history.rows.last().unwrap().losses[0];
        assert!(
            last < 0.5 * first,
            "loss did not drop: {first} -> {last}"
        );
    }

    #[test]
    fn history_csv_has_header_rows_and_invocation() {
        let ds = heat_dataset(4, 3, 32, 19);
        let cfg = TrainConfig::new(2, 1e-3, 1, &ds.header.grid);
        let mut model = FnoModel::init(FnoConfig::new_1d(8, 4, 1), 3).unwrap();
        let history = train(&mut model, &ds, &cfg).unwrap();
        let csv = history.to_csv("sok train --config x.cfg");
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("epoch,loss_data,lambda_data,lr,train_rel_l2"));
        assert_eq!(lines.len(), 1 + 2 + 1);
        assert!(lines.last().unwrap().starts_with("# invocation: sok train"));
    }

    #[test]
    fn ifno_grows_modes_monotonically_under_stagnation() {
        let ds = heat_dataset(6, 5, 32, 23);
        let mut cfg = TrainConfig::new(8, 1e-9, 29, &ds.header.grid); // tiny lr: loss stalls
        let mut model_cfg = FnoConfig::new_1d(4, 4, 1);
        model_cfg.max_n_modes = vec![10];
        cfg.ifno = Some(IfnoSchedule::new(IfnoCriterion::LossStagnation {
            window: 2,
            eps_improve: 1e-3,
        }));
        let mut model = FnoModel::init(model_cfg, 31).unwrap();
        let history = train(&mut model, &ds, &cfg).unwrap();
        let ks: Vec<usize> = history.rows.iter().map(|r| r.n_modes[0]).collect();
        assert!(ks.windows(2).all(|w| w[1] >= w[0]), "{ks:?}");
        assert!(*ks.last().unwrap() <= 10);
        assert!(*ks.last().unwrap() > 4, "never expanded: {ks:?}");
        let csv = history.to_csv("test");
        assert!(csv.lines().next().unwrap().contains("k_axis0"));
    }

    #[test]
    fn rollout_identity_and_exact_heat_composition() {
        let u0 = RealTensor::from_fn(&[32], |idx| ((idx[0] as f64) * 0.3).sin());
        let traj = rollout(|u| Ok(u.clone()), &u0, 5, false).unwrap();
        assert_eq!(traj.len(), 6);
        for state in &traj {
            assert_eq!(state, &u0);
        }

        // exact heat step composed n times equals one big step
        let grid = GridSpec::periodic_unit(&[64]);
        let spec = GrfSpec {
            resolution: vec![64],
            domain_length: vec![2.0 * PI],
            gamma: 1.5,
            k_max: 6,
            seed: 37,
        };
        let u0 = sample_grf(&spec, 0).unwrap();
        let (nu, dt) = (0.08, 0.25);
        let traj = rollout(
            |u| heat_operator_exact(u, nu, dt, &grid),
            &u0,
            4,
            false,
        )
        .unwrap();
        let direct = heat_operator_exact(&u0, nu, 4.0 * dt, &grid).unwrap();
        let max: f64 = traj[4]
            .data()
            .iter()
            .zip(direct.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max <= 1e-12, "{max:e}");

        // residual-target mode adds the prediction to the state
        let zero_step = |u: &RealTensor| Ok(RealTensor::zeros(u.shape()));
        let traj = rollout(zero_step, &u0, 3, true).unwrap();
        assert_eq!(&traj[3], &u0);
    }

    #[test]
    fn anchor_weight_freezes_the_prediction() {
        // as the anchor weight grows the fine-tuned prediction must stay
        // pinned to the pretrained one (weight 1e6 vs 1)
        let spec = GrfSpec {
            resolution: vec![32],
            domain_length: vec![2.0 * PI],
            gamma: 1.5,
            k_max: 5,
            seed: 41,
        };
        let grid = spec.grid();
        let f = sample_grf(&spec, 0).unwrap();
        let input = f.to_complex().reshape(&[1, 32]).unwrap();

        let run = |weight: f64| -> f64 {
            let mut model = FnoModel::init(FnoConfig::new_1d(8, 4, 1), 43).unwrap();
            let before = model.forward(&input).unwrap();
            finetune_anchor(&mut model, &f, &grid, weight, 30, 1e-3).unwrap();
            let after = model.forward(&input).unwrap();
            after
                .data()
                .iter()
                .zip(before.data())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        let anchored = run(1e6);
        let free = run(1.0);
        assert!(
            anchored < 0.1 * free,
            "anchored prediction moved {anchored:e} vs lightly-anchored {free:e}"
        );
    }
}
