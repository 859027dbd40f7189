use std::io::Write;
use std::path::{Path, PathBuf};

use qkc::born_machine::save_checkpoint;
use qkc::format::num;
use qkc::kernel_correlation::{kc_landscape, uniform_angles};
use qkc::quantum_kernel::{clamp_warnings, gram as gram_matrix, Estimator};
use qkc::registration::{fish_fallback, frame_pair, noise_curve, register, sweep_evaluate};
use qkc::{make_polygon, AngleBinning, KernelHandle, PointSet};
use serde::Serialize;

use crate::manifest::{now, RunManifest};
use crate::settings::{EstimatorKind, Settings};
use crate::CliError;

pub enum Source {
    File(PathBuf),
    Polygon(usize),
    FishFallback,
}

impl Source {
    fn load(&self) -> Result<(PointSet, Vec<PathBuf>), CliError> {
        match self {
            Source::File(p) => Ok((PointSet::load(p)?, vec![p.clone()])),
            Source::Polygon(sides) => {
                Ok((make_polygon(*sides, 10).map_err(CliError::bad)?, vec![]))
            }
            Source::FishFallback => {
                eprintln!("qkc: using the synthetic fish-like fallback curve; results are not comparable to the canonical fish data");
                Ok((fish_fallback(), vec![]))
            }
        }
    }
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let io = |e| CliError::Core(qkc::Error::io(path, e));
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    f(&mut out).map_err(io)?;
    out.flush().map_err(io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Core(e.into()))?;
    std::fs::write(path, text).map_err(|e| CliError::Core(qkc::Error::io(path, e)))
}

fn load_pair(model: &Path, scene: &Path) -> Result<(PointSet, PointSet), CliError> {
    let (m, s) = (PointSet::load(model)?, PointSet::load(scene)?);
    if m.dim() != s.dim() {
        return Err(CliError::BadArgs(format!(
            "model is {}D but scene is {}D",
            m.dim(),
            s.dim()
        )));
    }
    Ok((m, s))
}

#[derive(Serialize)]
struct TransformOut {
    angle_rad: f64,
    axis: Option<qkc::Axis>,
    translation: Vec<f64>,
    rotation: Vec<Vec<f64>>,
    mode_bin: usize,
    mode_probability: f64,
}

/// `train` and `register` share the pipeline; `register` also writes the
/// estimated transform in the input coordinates.
pub fn train(
    model: &Path,
    scene: &Path,
    s: &Settings,
    out: &Path,
    with_transform: bool,
) -> Result<(), CliError> {
    let started = now();
    let (m, sc) = load_pair(model, scene)?;
    let k = s.kernel(m.dim())?;
    let axis = s.axis_for(m.dim())?;
    let mut manifest = RunManifest::new(
        if with_transform { "register" } else { "train" },
        s,
        &[model.to_path_buf(), scene.to_path_buf()],
        started,
    )?;
    let reg = register(&m, &sc, s.qubits, &k, &s.training(), axis)?;

    save_checkpoint(&reg.params, &out.join("params.json"))?;
    reg.trace.save_csv(&out.join("trace.csv"))?;
    reg.distribution.save_csv(&out.join("distribution.csv"))?;
    manifest.outputs = vec![
        "params.json".into(),
        "trace.csv".into(),
        "distribution.csv".into(),
    ];
    let mode = reg.distribution.mode_index();
    if with_transform {
        let dim = m.dim();
        write_json(
            &out.join("transform.json"),
            &TransformOut {
                angle_rad: reg.transform.angle(),
                axis: reg.transform.axis(),
                translation: reg.transform.translation().to_vec(),
                rotation: reg.transform.matrix(dim),
                mode_bin: mode,
                mode_probability: reg.distribution.probs()[mode],
            },
        )?;
        manifest.outputs.push("transform.json".into());
    }
    let final_loss = reg.trace.records.last().map(|r| r.loss);
    println!(
        "mode bin {mode} angle {} prob {}{}",
        num(reg.transform.angle()),
        num(reg.distribution.probs()[mode]),
        final_loss
            .map(|l| format!(" final loss {}", num(l)))
            .unwrap_or_default()
    );
    manifest.save(out)
}

pub fn sweep_kc(
    shape: &Path,
    scene: Option<&Path>,
    s: &Settings,
    out: &Path,
) -> Result<(), CliError> {
    let started = now();
    let model = PointSet::load(shape)?;
    let mut inputs = vec![shape.to_path_buf()];
    let other = match scene {
        Some(p) => {
            inputs.push(p.to_path_buf());
            load_pair(shape, p)?.1
        }
        None => model.clone(),
    };
    let k = s.kernel(model.dim())?;
    let axis = s.axis_for(model.dim())?;
    let angles = match s.grid {
        Some(0) => return Err(CliError::BadArgs("--grid must be positive".into())),
        Some(count) => uniform_angles(count),
        None => AngleBinning::new(s.qubits).map_err(CliError::bad)?.angles(),
    };
    let mut manifest = RunManifest::new("sweep-kc", s, &inputs, started)?;
    let framed = frame_pair(&model, &other, &k)?;
    let land = kc_landscape(&framed.model, &framed.scene, &angles, axis, &k)?;
    land.save_csv(&out.join("landscape.csv"))?;
    manifest.outputs = vec!["landscape.csv".into()];
    let maxima = land.local_maxima();
    println!(
        "{} angles, {} local maxima, argmax angle {}",
        land.len(),
        maxima.len(),
        num(land.angles[land.argmax()])
    );
    manifest.save(out)
}

pub fn benchmark(source: &Source, s: &Settings, out: &Path) -> Result<(), CliError> {
    let started = now();
    let (shape, inputs) = source.load()?;
    let k = s.kernel(shape.dim())?;
    let axis = s.axis_for(shape.dim())?;
    let grid = s.sweep_grid()?;
    let mut manifest = RunManifest::new("benchmark", s, &inputs, started)?;
    let report = sweep_evaluate(&shape, s.qubits, &k, &s.training(), grid, axis)?;
    write_json(&out.join("report.json"), &report)?;
    manifest.outputs = vec!["report.json".into()];
    let failed = report
        .per_angle
        .iter()
        .filter(|r| r.error.is_some())
        .count();
    println!(
        "e {} sigma {} e_R {} sigma_R {} ({} angles, {failed} failed)",
        num(report.e),
        num(report.sigma),
        num(report.e_r),
        num(report.sigma_r),
        report.per_angle.len()
    );
    manifest.save(out)
}

#[derive(Serialize)]
struct NoiseSummary<'a> {
    /// Each mean is at least the previous mean minus one pooled std.
    non_decreasing_within_std: bool,
    points: &'a [qkc::registration::NoisePoint],
}

pub fn noise(source: &Source, s: &Settings, out: &Path) -> Result<(), CliError> {
    let started = now();
    if s.ratios.is_empty() {
        return Err(CliError::BadArgs("no noise ratios given".into()));
    }
    if let Some(r) = s.ratios.iter().find(|r| !(0.0..=0.5).contains(*r)) {
        return Err(CliError::BadArgs(format!(
            "noise ratio {r} outside [0, 0.5]"
        )));
    }
    let (shape, inputs) = source.load()?;
    let k = s.kernel(shape.dim())?;
    let mut manifest = RunManifest::new("noise", s, &inputs, started)?;
    let curve = noise_curve(
        &shape,
        s.qubits,
        &k,
        &s.training(),
        &s.ratios,
        s.runs,
        s.sigma_noise,
    )?;
    write_file(&out.join("noise.csv"), |w| {
        writeln!(w, "ratio,mean_e2d,std_e2d")?;
        for p in &curve {
            writeln!(w, "{},{},{}", num(p.ratio), num(p.mean), num(p.std))?;
        }
        Ok(())
    })?;
    let trend = curve.windows(2).all(|w| {
        let pooled = ((w[0].std.powi(2) + w[1].std.powi(2)) / 2.0).sqrt();
        w[1].mean >= w[0].mean - pooled
    });
    write_json(
        &out.join("noise.json"),
        &NoiseSummary {
            non_decreasing_within_std: trend,
            points: &curve,
        },
    )?;
    manifest.outputs = vec!["noise.csv".into(), "noise.json".into()];
    for p in &curve {
        println!(
            "ratio {} mean e {} std {}",
            num(p.ratio),
            num(p.mean),
            num(p.std)
        );
    }
    println!("trend non-decreasing within one pooled std: {trend}");
    manifest.save(out)
}

pub fn gram(
    points: &Path,
    others: Option<&Path>,
    unit_cube: bool,
    s: &Settings,
    out: &Path,
) -> Result<(), CliError> {
    let started = now();
    let xs = PointSet::load(points)?;
    let mut inputs = vec![points.to_path_buf()];
    let ys = match others {
        Some(p) => {
            inputs.push(p.to_path_buf());
            load_pair(points, p)?.1
        }
        None => xs.clone(),
    };
    let cfg = s.feature_map();
    let (xs, ys) = if unit_cube {
        let f = frame_pair(&xs, &ys, &KernelHandle::Quantum(cfg))?;
        (f.model, f.scene)
    } else {
        (xs, ys)
    };
    let estimator = match s.estimator {
        EstimatorKind::Exact => Estimator::Exact,
        EstimatorKind::Sampled => Estimator::Sampled {
            shots: s.shots,
            seed: s.seed,
        },
    };
    let mut manifest = RunManifest::new("gram", s, &inputs, started)?;
    let before = clamp_warnings();
    let g = gram_matrix(&xs, &ys, &cfg, estimator)?;
    write_file(&out.join("gram.csv"), |w| g.write_csv(w))?;
    write_file(&out.join("gram.bin"), |w| g.write_binary(w))?;
    manifest.outputs = vec!["gram.csv".into(), "gram.bin".into()];
    let clamped = clamp_warnings() - before;
    if clamped > 0 {
        eprintln!(
            "qkc: {clamped} points fell outside the unit cube and were clamped (try --unit-cube)"
        );
    }
    println!(
        "{}x{} Gram matrix, {} qubits per point",
        g.rows(),
        g.cols(),
        cfg.n_qubits(xs.dim())
    );
    manifest.save(out)
}
