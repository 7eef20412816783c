//! End-to-end CLI contract tests: determinism, exit codes, and file
//! format behavior of every subcommand.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sok() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sok"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sok_cli_{}_{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn sok")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn gen_small(dir: &Path, name: &str, n: usize, n_test: usize, res: usize) -> PathBuf {
    let path = dir.join(name);
    let out = run(sok()
        .args(["gen", "--problem", "heat", "--n", &n.to_string()])
        .args(["--n-test", &n_test.to_string()])
        .args(["--res", &res.to_string()])
        .args(["--nu", "0.05", "--t", "1.0", "--seed", "7"])
        .args(["-o", path.to_str().unwrap()]));
    assert_exit(&out, 0);
    path
}

#[test]
fn gen_is_deterministic_and_rejects_unknown_problems() {
    let dir = workdir("gen");
    let a = gen_small(&dir, "a.fnod", 6, 2, 32);
    let b = gen_small(&dir, "b.fnod", 6, 2, 32);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    // sidecars identical too
    let sa = std::fs::read(dir.join("a.fnod.json")).unwrap();
    let sb = std::fs::read(dir.join("b.fnod.json")).unwrap();
    assert_eq!(sa, sb);

    let out = run(sok().args([
        "gen", "--problem", "navier", "--n", "2", "-o",
        dir.join("x.fnod").to_str().unwrap(),
    ]));
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown problem"));
}

fn write_train_cfg(dir: &Path, dataset: &Path, epochs: usize, n_modes: usize) -> PathBuf {
    let cfg = dir.join("train.cfg");
    std::fs::write(
        &cfg,
        format!(
            "[data]\ndataset = {}\n\n[model]\nn_modes = {n_modes}\nhidden_channels = 4\n\
             n_layers = 1\n\n[train]\nepochs = {epochs}\nbatch_size = 4\nlr = 5e-3\nseed = 3\n\n\
             [output]\ncheckpoint = {}\nhistory = {}\n",
            dataset.display(),
            dir.join("model.fnom").display(),
            dir.join("history.csv").display(),
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn train_and_eval_are_consistent_and_ifno_adds_columns() {
    let dir = workdir("train");
    let dataset = gen_small(&dir, "heat.fnod", 8, 2, 32);
    let cfg = write_train_cfg(&dir, &dataset, 4, 8);
    let out = run(sok().arg("train").arg(&cfg));
    assert_exit(&out, 0);
    assert!(dir.join("model.fnom").exists());
    assert!(dir.join("model.fnom.json").exists());

    // the history CSV has one row per epoch plus header and invocation
    let history = std::fs::read_to_string(dir.join("history.csv")).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines.len(), 1 + 4 + 1);
    assert!(lines[0].starts_with("epoch,"));
    assert!(lines.last().unwrap().starts_with("# invocation:"));

    // evaluating the checkpoint on its own training split reproduces
    // the final logged train metric
    let last_row: Vec<&str> = lines[lines.len() - 2].split(',').collect();
    let logged: f64 = last_row.last().unwrap().parse().unwrap();
    let metrics = dir.join("metrics.csv");
    let out = run(sok()
        .args(["eval", "--checkpoint"])
        .arg(dir.join("model.fnom"))
        .arg("--dataset")
        .arg(&dataset)
        .args(["--split", "train", "-o"])
        .arg(&metrics));
    assert_exit(&out, 0);
    let text = std::fs::read_to_string(&metrics).unwrap();
    let summary_line = text
        .lines()
        .find(|l| l.starts_with("summary"))
        .expect("summary row");
    let evaluated: f64 = summary_line.split(',').nth(1).unwrap().parse().unwrap();
    assert!(
        (evaluated - logged).abs() <= 1e-10,
        "eval {evaluated} vs logged {logged}"
    );
    // one row per sample plus summary
    let data_rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("sample") && !l.is_empty())
        .count();
    assert_eq!(data_rows, 8 + 1);

    // ifno run adds non-decreasing k columns
    let cfg2 = dir.join("train_ifno.cfg");
    std::fs::write(
        &cfg2,
        format!(
            "[data]\ndataset = {}\n\n[model]\nn_modes = 4\nmax_n_modes = 12\n\
             hidden_channels = 4\nn_layers = 1\n\n[train]\nepochs = 5\nbatch_size = 4\n\
             lr = 5e-3\nseed = 3\nifno = true\nifno_criterion = explained-ratio\n\
             ifno_alpha = 0.9999\n\n[output]\ncheckpoint = {}\nhistory = {}\n",
            dataset.display(),
            dir.join("ifno.fnom").display(),
            dir.join("ifno.csv").display(),
        ),
    )
    .unwrap();
    let out = run(sok().arg("train").arg(&cfg2));
    assert_exit(&out, 0);
    let history = std::fs::read_to_string(dir.join("ifno.csv")).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    let k_col = header.iter().position(|c| *c == "k_axis0").expect("k column");
    let ks: Vec<usize> = lines[1..lines.len() - 1]
        .iter()
        .map(|l| l.split(',').nth(k_col).unwrap().parse().unwrap())
        .collect();
    assert!(ks.windows(2).all(|w| w[1] >= w[0]), "{ks:?}");
}

#[test]
fn train_with_missing_dataset_exits_2() {
    let dir = workdir("missing");
    let cfg = write_train_cfg(&dir, &dir.join("nope.fnod"), 1, 4);
    let out = run(sok().arg("train").arg(&cfg));
    assert_exit(&out, 2);
}

#[test]
fn nyquist_hard_violation_exits_1() {
    let dir = workdir("nyquist");
    let dataset = gen_small(&dir, "heat.fnod", 4, 0, 32);
    let cfg = write_train_cfg(&dir, &dataset, 1, 33);
    let out = run(sok().arg("train").arg(&cfg));
    assert_exit(&out, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Nyquist"));
}

#[test]
fn corrupted_formats_exit_2() {
    let dir = workdir("formats");
    let dataset = gen_small(&dir, "heat.fnod", 4, 2, 32);
    let cfg = write_train_cfg(&dir, &dataset, 1, 8);
    assert_exit(&run(sok().arg("train").arg(&cfg)), 0);

    // corrupt the dataset magic
    let corrupted = dir.join("bad.fnod");
    let mut bytes = std::fs::read(&dataset).unwrap();
    bytes[0] ^= 0xFF;
    std::fs::write(&corrupted, &bytes).unwrap();
    let out = run(sok()
        .args(["eval", "--checkpoint"])
        .arg(dir.join("model.fnom"))
        .arg("--dataset")
        .arg(&corrupted)
        .args(["-o"])
        .arg(dir.join("m.csv")));
    assert_exit(&out, 2);

    // corrupt the checkpoint magic
    let bad_ckpt = dir.join("bad.fnom");
    let mut bytes = std::fs::read(dir.join("model.fnom")).unwrap();
    bytes[0] ^= 0xFF;
    std::fs::write(&bad_ckpt, &bytes).unwrap();
    let out = run(sok()
        .args(["eval", "--checkpoint"])
        .arg(&bad_ckpt)
        .arg("--dataset")
        .arg(&dataset)
        .args(["-o"])
        .arg(dir.join("m.csv")));
    assert_exit(&out, 2);

    // empty test split is a usage error
    let no_test = gen_small(&dir, "notest.fnod", 4, 0, 32);
    let out = run(sok()
        .args(["eval", "--checkpoint"])
        .arg(dir.join("model.fnom"))
        .arg("--dataset")
        .arg(&no_test)
        .args(["--split", "test", "-o"])
        .arg(dir.join("m.csv")));
    assert_exit(&out, 2);
}

#[test]
fn rollout_echoes_u0_for_zero_steps() {
    let dir = workdir("rollout");
    let dataset = gen_small(&dir, "heat.fnod", 4, 0, 32);
    let cfg = write_train_cfg(&dir, &dataset, 1, 8);
    assert_exit(&run(sok().arg("train").arg(&cfg)), 0);

    let u0 = dir.join("u0.csv");
    let values: Vec<f64> = (0..32).map(|i| (i as f64 * 0.2).sin()).collect();
    let mut text = String::from("value\n");
    for v in &values {
        text.push_str(&format!("{v}\n"));
    }
    std::fs::write(&u0, text).unwrap();

    let traj = dir.join("traj.csv");
    let out = run(sok()
        .args(["rollout", "--checkpoint"])
        .arg(dir.join("model.fnom"))
        .arg("--u0")
        .arg(&u0)
        .args(["--steps", "0", "-o"])
        .arg(&traj));
    assert_exit(&out, 0);
    let text = std::fs::read_to_string(&traj).unwrap();
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("step"))
        .collect();
    assert_eq!(rows.len(), 1, "steps=0 echoes exactly u0");
    let cells: Vec<f64> = rows[0]
        .split(',')
        .skip(1)
        .map(|c| c.parse().unwrap())
        .collect();
    for (a, b) in cells.iter().zip(&values) {
        assert!((a - b).abs() <= 1e-15);
    }

    // trajectory with steps = 3 has 4 states
    let out = run(sok()
        .args(["rollout", "--checkpoint"])
        .arg(dir.join("model.fnom"))
        .arg("--u0")
        .arg(&u0)
        .args(["--steps", "3", "-o"])
        .arg(&traj));
    assert_exit(&out, 0);
    let text = std::fs::read_to_string(&traj).unwrap();
    let rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("step"))
        .count();
    assert_eq!(rows, 4);
}

#[test]
fn extend_contracts() {
    let dir = workdir("extend");
    // already-periodic signal: zero-pad seam (between the two zero
    // halves) is exactly flat
    let signal = dir.join("periodic.csv");
    let mut text = String::from("value\n");
    for i in 0..64 {
        let x = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
        text.push_str(&format!("{}\n", (3.0 * x).sin()));
    }
    std::fs::write(&signal, text).unwrap();
    let out_path = dir.join("ext.csv");
    let out = run(sok()
        .args(["extend", "--signal"])
        .arg(&signal)
        .args(["--method", "zero-pad", "--c", "16", "-o"])
        .arg(&out_path));
    assert_exit(&out, 0);
    let text = std::fs::read_to_string(&out_path).unwrap();
    let seam: f64 = text
        .lines()
        .find(|l| l.starts_with("# seam_second_diff:"))
        .unwrap()
        .split(':')
        .nth(1)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(seam <= 1e-10, "zero-pad seam {seam:e}");

    // invalid method is a usage error
    let out = run(sok()
        .args(["extend", "--signal"])
        .arg(&signal)
        .args(["--method", "magic", "-o"])
        .arg(dir.join("x.csv")));
    assert_exit(&out, 2);

    // fc-legendre vs none: derivative error ratio >= 1000 on a
    // non-periodic signal
    let (sig, reference) = (dir.join("sig.csv"), dir.join("ref.csv"));
    let n = 128;
    let mut s = String::from("value\n");
    let mut r = String::from("value\n");
    for i in 0..n {
        let x = i as f64 / n as f64;
        s.push_str(&format!("{}\n", (-x).exp() + (3.0 * x).sin()));
        r.push_str(&format!("{}\n", -(-x).exp() + 3.0 * (3.0 * x).cos()));
    }
    std::fs::write(&sig, s).unwrap();
    std::fs::write(&reference, r).unwrap();
    let err_of = |method: &str| -> f64 {
        let out_path = dir.join(format!("ext_{method}.csv"));
        let out = run(sok()
            .args(["extend", "--signal"])
            .arg(&sig)
            .args(["--method", method, "--d", "6", "--c", "32"])
            .args(["--reference-derivative"])
            .arg(&reference)
            .args(["-o"])
            .arg(&out_path));
        assert_exit(&out, 0);
        std::fs::read_to_string(&out_path)
            .unwrap()
            .lines()
            .find(|l| l.starts_with("# max_derivative_error:"))
            .unwrap()
            .split(':')
            .nth(1)
            .unwrap()
            .trim()
            .parse()
            .unwrap()
    };
    let fc = err_of("fc-legendre");
    let none = err_of("none");
    assert!(
        fc * 1000.0 <= none,
        "derivative error ratio too small: fc {fc:e}, none {none:e}"
    );
}

#[test]
fn report_renders_series_and_rejects_empty_input() {
    let dir = workdir("report");
    let hist = dir.join("h.csv");
    std::fs::write(
        &hist,
        "epoch,loss_data,lr\n0,1.0,0.01\n1,0.5,0.009\n2,0.25,0.008\n# invocation: test\n",
    )
    .unwrap();
    let svg_path = dir.join("plot.svg");
    let out = run(sok()
        .args(["report", "--history"])
        .arg(&hist)
        .args(["--log-y", "-o"])
        .arg(&svg_path));
    assert_exit(&out, 0);
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("1e0"), "log axis decade ticks missing");

    let empty = dir.join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = run(sok()
        .args(["report", "--history"])
        .arg(&empty)
        .args(["-o"])
        .arg(dir.join("x.svg")));
    assert_exit(&out, 2);
}

#[test]
fn diagnose_flags_stride_aliasing_with_fold_back_figure() {
    use sok_core::data::dataset::{read_dataset, write_dataset, DatasetFile};
    use sok_core::data::downsample::{downsample, DownsampleStrategy};
    use sok_core::spectral::shell_power_1d;
    use sok_core::RealTensor;

    let dir = workdir("diagnose");
    // band-limited dataset: no flag
    let clean = gen_small(&dir, "clean.fnod", 6, 0, 64);
    let report = dir.join("clean_report.csv");
    let out = run(sok()
        .args(["diagnose", "--dataset"])
        .arg(&clean)
        .args(["-o"])
        .arg(&report));
    assert_exit(&out, 0);
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("# aliasing_suspect: false"), "{text}");

    // stride-downsample a broadband dataset and diagnose it
    let fine_path = dir.join("fine.fnod");
    let out = run(sok()
        .args(["gen", "--problem", "heat", "--n", "6", "--res", "128"])
        .args(["--gamma", "0.4", "--kmax", "60", "--seed", "3", "-o"])
        .arg(&fine_path));
    assert_exit(&out, 0);
    let fine = read_dataset(&fine_path).unwrap();
    let grid = fine.header.grid.with_resolution(&[64]).unwrap();
    let strided = |fields: &[RealTensor]| -> Vec<RealTensor> {
        fields
            .iter()
            .map(|f| {
                let flat = RealTensor::from_data(&[128], f.data().to_vec()).unwrap();
                let down = downsample(&flat, DownsampleStrategy::Stride, 2).unwrap();
                RealTensor::from_data(&[1, 64], down.into_data()).unwrap()
            })
            .collect()
    };
    let coarse = DatasetFile::new(
        grid,
        strided(&fine.inputs),
        strided(&fine.outputs),
        fine.header.train_count,
    )
    .unwrap();
    let coarse_path = dir.join("strided.fnod");
    write_dataset(&coarse, &coarse_path).unwrap();
    let report2 = dir.join("strided_report.csv");
    let out = run(sok()
        .args(["diagnose", "--dataset"])
        .arg(&coarse_path)
        .args(["-o"])
        .arg(&report2));
    assert_exit(&out, 0);
    let text = std::fs::read_to_string(&report2).unwrap();
    assert!(text.contains("# aliasing_suspect: true"), "{text}");

    // the reported tail fraction equals the fold-back energy computed
    // independently from the coarse fields' shells
    let reported: f64 = text
        .lines()
        .find(|l| l.starts_with("# tail_energy_fraction:"))
        .unwrap()
        .split(':')
        .nth(1)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    let tail_of = |fields: &[RealTensor]| -> f64 {
        let mut mean: Vec<f64> = Vec::new();
        for f in fields {
            let flat = RealTensor::from_data(&[64], f.data().to_vec()).unwrap();
            let shells = shell_power_1d(&flat).unwrap();
            if mean.len() < shells.len() {
                mean.resize(shells.len(), 0.0);
            }
            for (a, b) in mean.iter_mut().zip(&shells) {
                *a += b;
            }
        }
        for v in &mut mean {
            *v /= fields.len() as f64;
        }
        let total: f64 = mean.iter().sum();
        let start = ((mean.len() - 1) as f64 * 0.75).ceil() as usize;
        mean[start..].iter().sum::<f64>() / total
    };
    let expected = tail_of(&coarse.inputs).max(tail_of(&coarse.outputs));
    assert!(
        (reported - expected).abs() <= 1e-12,
        "reported {reported:e} vs oracle {expected:e}"
    );
    assert!(expected > 1e-6);
}

#[test]
fn superres_warns_below_model_nyquist() {
    let dir = workdir("superres");
    let dataset = gen_small(&dir, "heat.fnod", 6, 2, 64);
    let cfg = write_train_cfg(&dir, &dataset, 1, 12);
    assert_exit(&run(sok().arg("train").arg(&cfg)), 0);

    // coarse resolution 16 with 12 modes: soft warning recorded
    let report = dir.join("sr.csv");
    let out = run(sok()
        .args(["superres", "--checkpoint"])
        .arg(dir.join("model.fnom"))
        .arg("--fine-dataset")
        .arg(&dataset)
        .args(["--coarse-res", "16", "-o"])
        .arg(&report));
    assert_exit(&out, 0);
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("# nyquist:"), "missing warning comment: {text}");

    // coarse resolution below the mode count is a hard error
    let out = run(sok()
        .args(["superres", "--checkpoint"])
        .arg(dir.join("model.fnom"))
        .arg("--fine-dataset")
        .arg(&dataset)
        .args(["--coarse-res", "8", "-o"])
        .arg(&report));
    assert_exit(&out, 1);
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = workdir("seed");
    let a = dir.join("a.fnod");
    let b = dir.join("b.fnod");
    let c = dir.join("c.fnod");
    for (path, seed) in [(&a, "11"), (&b, "11"), (&c, "12")] {
        let out = run(sok()
            .env("SOK_SEED", seed)
            .args(["gen", "--problem", "heat", "--n", "3", "--res", "32", "-o"])
            .arg(path));
        assert_exit(&out, 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}
