//! `sok train`: config-driven training producing a checkpoint and a
//! history CSV.

use std::path::Path;

use sok_core::data::dataset::read_dataset;
use sok_core::fno::checkpoint::save_checkpoint;
use sok_core::fno::{Factorization, FnoConfig, FnoModel, NormKind, SkipKind};
use sok_core::math::Activation;
use sok_core::spectral::validate_nyquist;
use sok_core::train::balance::BalancerMethod;
use sok_core::train::ifno::{IfnoCriterion, IfnoSchedule};
use sok_core::train::loss::{LossKind, LossSpec, Quadrature};
use sok_core::train::optim::LrSchedule;
use sok_core::train::trainer::{train, TrainConfig};
use sok_core::{Error, Result};

use crate::config::ConfigFile;

pub fn run(config_path: &Path) -> Result<()> {
    let cfg = ConfigFile::load(config_path)?;

    let dataset_path = cfg.require("data", "dataset")?.to_string();
    let dataset = read_dataset(Path::new(&dataset_path))?;
    let grid = dataset.header.grid.clone();
    let ndim = grid.ndim();

    // model section
    let n_modes: Vec<usize> = cfg
        .get_list("model", "n_modes")?
        .ok_or_else(|| Error::Format("config is missing [model] n_modes".into()))?;
    let n_modes = if n_modes.len() == 1 && ndim > 1 {
        vec![n_modes[0]; ndim]
    } else {
        n_modes
    };
    let max_n_modes: Vec<usize> = match cfg.get_list("model", "max_n_modes")? {
        Some(m) if m.len() == 1 && ndim > 1 => vec![m[0]; ndim],
        Some(m) => m,
        None => n_modes.clone(),
    };
    let model_config = FnoConfig {
        n_modes,
        max_n_modes,
        hidden_channels: cfg.get_or("model", "hidden_channels", 16)?,
        in_channels: dataset.header.input_shape[0],
        out_channels: dataset.header.output_shape[0],
        n_layers: cfg.get_or("model", "n_layers", 3)?,
        lifting_channel_ratio: cfg.get_or("model", "lifting_channel_ratio", 2.0)?,
        projection_channel_ratio: cfg.get_or("model", "projection_channel_ratio", 2.0)?,
        channel_mlp_expansion: cfg.get_or("model", "channel_mlp_expansion", 0.5)?,
        fno_skip: SkipKind::parse(cfg.get("model", "fno_skip").unwrap_or("soft-gating"))?,
        channel_mlp_skip: SkipKind::parse(
            cfg.get("model", "channel_mlp_skip").unwrap_or("soft-gating"),
        )?,
        activation: Activation::parse(cfg.get("model", "activation").unwrap_or("gelu"))?,
        domain_padding: cfg.get_list("model", "domain_padding")?.unwrap_or_default(),
        resolution_scaling_factor: cfg.get_list("model", "resolution_scaling")?,
        factorization: match cfg.get("model", "factorization").unwrap_or("dense") {
            "dense" => Factorization::Dense,
            "tucker" => Factorization::Tucker,
            other => {
                return Err(Error::Format(format!(
                    "[model] factorization: expected dense | tucker, got '{other}'"
                )))
            }
        },
        rank: cfg.get_or("model", "rank", 1.0)?,
        separable: cfg.get_bool("model", "separable", false)?,
        complex_data: false,
        norm: match cfg.get("model", "norm").unwrap_or("none") {
            "none" => NormKind::None,
            "instance-norm" | "instance_norm" => NormKind::InstanceNorm,
            other => {
                return Err(Error::Format(format!(
                    "[model] norm: expected none | instance-norm, got '{other}'"
                )))
            }
        },
        dropout: cfg.get_or("model", "dropout", 0.0)?,
    };
    model_config.validate()?;

    let report = validate_nyquist(&model_config.n_modes, &grid)?;
    if report.has_hard_violation() {
        return Err(Error::Nyquist(report.message()));
    }
    if report.has_warning() {
        eprintln!("warning: {}", report.message());
    }

    // train section
    let epochs: usize = cfg.get_or("train", "epochs", 100)?;
    let seed = crate::resolve_seed(cfg.get_parsed("train", "seed")?);
    let loss_kind = match cfg.get("train", "loss").unwrap_or("l2-rel") {
        "l2-rel" | "l2_rel" => LossKind::LpRel,
        "l2-abs" | "l2_abs" => LossKind::LpAbs,
        other => {
            return Err(Error::Format(format!(
                "[train] loss: expected l2-rel | l2-abs, got '{other}'"
            )))
        }
    };
    let use_h1_term = cfg.get_bool("train", "h1_term", false)?;
    let n_terms = if use_h1_term { 2 } else { 1 };
    let balancer = match cfg.get("train", "balancer").unwrap_or("fixed") {
        "fixed" => BalancerMethod::Fixed(vec![1.0; n_terms]),
        "softadapt" => BalancerMethod::SoftAdapt {
            tau: cfg.get_or("train", "balancer_tau", 1.0)?,
        },
        "relobralo" => BalancerMethod::ReLoBRaLo {
            alpha: cfg.get_or("train", "balancer_alpha", 0.999)?,
            tau: cfg.get_or("train", "balancer_tau", 1.0)?,
            rho_prob: cfg.get_or("train", "balancer_rho_prob", 0.999)?,
        },
        other => {
            return Err(Error::Format(format!(
                "[train] balancer: expected fixed | softadapt | relobralo, got '{other}'"
            )))
        }
    };
    let ifno = if cfg.get_bool("train", "ifno", false)? {
        let criterion = match cfg.get("train", "ifno_criterion").unwrap_or("explained-ratio") {
            "explained-ratio" | "explained_ratio" => IfnoCriterion::ExplainedRatio {
                alpha: cfg.get_or("train", "ifno_alpha", 0.999)?,
            },
            "loss-stagnation" | "loss_stagnation" => IfnoCriterion::LossStagnation {
                window: cfg.get_or("train", "ifno_window", 10)?,
                eps_improve: cfg.get_or("train", "ifno_eps", 1e-3)?,
            },
            other => {
                return Err(Error::Format(format!(
                    "[train] ifno_criterion: expected explained-ratio | loss-stagnation, \
                     got '{other}'"
                )))
            }
        };
        let mut schedule = IfnoSchedule::new(criterion);
        schedule.mode_step = cfg.get_or("train", "ifno_mode_step", 2)?;
        if let Some(ladder) = cfg.get_list("train", "resolution_ladder")? {
            schedule.resolution_ladder = ladder;
        }
        Some(schedule)
    } else {
        None
    };

    let train_cfg = TrainConfig {
        epochs,
        batch_size: cfg.get_or("train", "batch_size", 20)?,
        lr: cfg.get_or("train", "lr", 3e-3)?,
        schedule: LrSchedule::parse(cfg.get("train", "schedule").unwrap_or("cosine"), epochs)?,
        seed,
        loss: LossSpec {
            kind: loss_kind,
            p: 2.0,
            epsilon: 1e-12,
            weights: None,
            quadrature: Quadrature::from_grid(&grid),
        },
        use_h1_term,
        balancer,
        ifno,
    };

    let checkpoint_path = cfg.require("output", "checkpoint")?.to_string();
    let history_path = cfg.require("output", "history")?.to_string();

    let mut model = FnoModel::init(model_config, seed)?;
    let history = train(&mut model, &dataset, &train_cfg)?;
    save_checkpoint(&model, Path::new(&checkpoint_path))?;
    super::write_text(
        Path::new(&history_path),
        &history.to_csv(&crate::invocation()),
    )?;
    if let Some(rel) = history.final_train_rel_l2() {
        println!(
            "trained {} epochs; final train relative L2 {rel:.4e}; checkpoint {}",
            epochs, checkpoint_path
        );
    } else {
        println!("trained 0 epochs; checkpoint {checkpoint_path}");
    }
    Ok(())
}
