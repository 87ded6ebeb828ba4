//! Vertex-labeling correspondence training and prediction.

pub mod config;
mod network;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{self, primitives, Label, Mesh, MeshFormat};
use crate::nn::{softmax_cross_entropy, AdamState, Tensor};

pub use config::{LayerSpec, NetworkConfig, OperatorKind};
pub use network::{build_network, prepare, vertex_features, Network, PreparedMesh};

/// A mesh with per-vertex labels into the reference shape.
#[derive(Clone, Debug)]
pub struct LabeledMesh {
    pub name: String,
    pub mesh: Mesh,
    pub labels: Vec<Label>,
}

#[derive(Clone, Debug)]
pub struct CorrespondenceTask {
    pub reference: Mesh,
    pub train: Vec<LabeledMesh>,
    pub test: Vec<LabeledMesh>,
}

impl CorrespondenceTask {
    /// N_T = number of reference vertices.
    pub fn n_targets(&self) -> usize {
        self.reference.vertex_count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_targets();
        for s in self.train.iter().chain(&self.test) {
            if s.labels.len() != s.mesh.vertex_count() {
                return Err(Error::ShapeMismatch(format!(
                    "{}: {} labels for {} vertices",
                    s.name,
                    s.labels.len(),
                    s.mesh.vertex_count()
                )));
            }
            if let Some(bad) = s.labels.iter().flatten().find(|&&l| l >= n) {
                return Err(Error::LabelOutOfRange {
                    label: *bad as i64,
                    count: n,
                });
            }
        }
        Ok(())
    }

    /// Self-correspondence on an icosphere: every vertex is its own label.
    pub fn icosphere_self(level: u32) -> Self {
        let m = primitives::icosphere(level);
        let labels = (0..m.vertex_count()).map(Some).collect();
        let sample = LabeledMesh {
            name: format!("icosphere-{level}"),
            mesh: m.clone(),
            labels,
        };
        Self {
            reference: m,
            train: vec![sample.clone()],
            test: vec![sample],
        }
    }

    /// Resolves a built-in task name: `icosphere-selfcorr[:LEVEL]` (default level 2).
    pub fn builtin(name: &str) -> Result<Self> {
        let (base, arg) = name.split_once(':').unwrap_or((name, "2"));
        match base {
            "icosphere-selfcorr" => {
                let level: u32 = arg
                    .parse()
                    .map_err(|_| Error::Config(format!("bad icosphere level '{arg}'")))?;
                if level > 5 {
                    return Err(Error::Config("icosphere level must be at most 5".into()));
                }
                Ok(Self::icosphere_self(level))
            }
            other => Err(Error::Config(format!("unknown built-in task '{other}'"))),
        }
    }

    /// Loads a dataset directory described by `manifest.txt`:
    ///
    /// ```text
    /// reference ref.off
    /// train shape_000.off shape_000.lbl
    /// test  shape_080.off shape_080.lbl
    /// ```
    ///
    /// Paths are relative to the directory; `#` starts a comment.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let manifest = dir.join("manifest.txt");
        let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
        let perr = |line: usize, msg: String| Error::Parse {
            path: manifest.clone(),
            line,
            msg,
        };
        let load = |p: &str, line: usize| -> Result<Mesh> {
            let path = dir.join(p);
            let fmt = MeshFormat::from_path(&path)
                .ok_or_else(|| perr(line, format!("cannot infer mesh format of '{p}'")))?;
            mesh::load_mesh(&path, fmt)
        };
        let mut reference = None;
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["reference", p] => reference = Some(load(p, i + 1)?),
                [split @ ("train" | "test"), m, l] => {
                    let sample = LabeledMesh {
                        name: m.to_string(),
                        mesh: load(m, i + 1)?,
                        labels: mesh::read_labels(&dir.join(l))?,
                    };
                    if *split == "train" {
                        train.push(sample);
                    } else {
                        test.push(sample);
                    }
                }
                _ => return Err(perr(i + 1, format!("unrecognized manifest line '{line}'"))),
            }
        }
        let reference = reference.ok_or_else(|| perr(1, "manifest lacks a reference line".into()))?;
        let task = Self {
            reference,
            train,
            test,
        };
        task.validate()?;
        Ok(task)
    }
}

/// A prepared mesh paired with its labels.
#[derive(Clone, Debug)]
pub struct Sample {
    pub input: PreparedMesh,
    pub labels: Vec<Label>,
}

/// Prepares every sample, on up to `jobs` threads. Output order follows input.
pub fn prepare_all(samples: &[LabeledMesh], config: &NetworkConfig, jobs: usize) -> Result<Vec<Sample>> {
    let one = |s: &LabeledMesh| -> Result<Sample> {
        Ok(Sample {
            input: prepare(&s.mesh, config)?,
            labels: s.labels.clone(),
        })
    };
    if jobs <= 1 {
        return samples.iter().map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| samples.par_iter().map(one).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean eval-mode cross-entropy over the training meshes.
    pub loss: f64,
    /// Eval-mode exact-label accuracy over labeled training vertices.
    pub accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub network: Network,
    /// Row 0 is the initialization; row `e` follows epoch `e`'s updates.
    pub log: Vec<EpochLog>,
}

impl TrainOutcome {
    pub fn log_csv(&self) -> String {
        let mut s = String::from("epoch,loss,train_accuracy\n");
        for e in &self.log {
            s.push_str(&format!("{},{},{}\n", e.epoch, e.loss, e.accuracy));
        }
        s
    }
}

pub fn accuracy(predicted: &[usize], labels: &[Label]) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for (p, l) in predicted.iter().zip(labels) {
        if let Some(l) = l {
            total += 1;
            hit += usize::from(p == l);
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Mean eval-mode loss and accuracy over `samples`.
pub fn evaluate_samples(network: &mut Network, samples: &[Sample]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut hits = 0.0;
    let mut labeled = 0usize;
    for s in samples {
        let logits = network.forward(&s.input, false)?;
        let (l, _) = softmax_cross_entropy(&logits, &s.labels)?;
        loss += l;
        let n = s.labels.iter().flatten().count();
        hits += accuracy(&logits.argmax_rows(), &s.labels) * n as f64;
        labeled += n;
    }
    let k = samples.len().max(1) as f64;
    Ok((loss / k, if labeled == 0 { 0.0 } else { hits / labeled as f64 }))
}

/// Trains a fresh network on the task's training split.
pub fn train(task: &CorrespondenceTask, config: &NetworkConfig) -> Result<TrainOutcome> {
    train_with_jobs(task, config, 1)
}

pub fn train_with_jobs(task: &CorrespondenceTask, config: &NetworkConfig, jobs: usize) -> Result<TrainOutcome> {
    task.validate()?;
    if config.n_targets != task.n_targets() {
        return Err(Error::Config(format!(
            "config has {} targets, task reference has {} vertices",
            config.n_targets,
            task.n_targets()
        )));
    }
    let samples = prepare_all(&task.train, config, jobs)?;
    train_samples(&samples, config, |_| {})
}

/// The optimization loop over prepared samples. One Adam step per mesh, or
/// one per epoch with `accumulate`. `on_epoch` sees each log row as produced.
pub fn train_samples(
    samples: &[Sample],
    config: &NetworkConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    let mut network = build_network(config)?;
    let mut adam = AdamState::new(config.adam);
    let mut log = Vec::with_capacity(config.epochs + 1);

    let (loss, acc) = evaluate_samples(&mut network, samples)?;
    let row = EpochLog {
        epoch: 0,
        loss,
        accuracy: acc,
    };
    on_epoch(&row);
    log.push(row);

    for epoch in 1..=config.epochs {
        network.zero_grad();
        for s in samples {
            if !config.accumulate {
                network.zero_grad();
            }
            let logits = network.forward(&s.input, true).map_err(|e| match e {
                Error::NonFinite(_) => Error::NonFiniteLoss(epoch),
                other => other,
            })?;
            let (loss, grad) = softmax_cross_entropy(&logits, &s.labels).map_err(|e| match e {
                Error::NonFinite(_) => Error::NonFiniteLoss(epoch),
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(epoch));
            }
            network.backward(&grad, &s.input)?;
            if !config.accumulate {
                adam.step(&mut network.params_mut());
            }
        }
        if config.accumulate {
            adam.step(&mut network.params_mut());
        }
        let (loss, acc) = evaluate_samples(&mut network, samples)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(epoch));
        }
        let row = EpochLog {
            epoch,
            loss,
            accuracy: acc,
        };
        on_epoch(&row);
        log.push(row);
    }
    Ok(TrainOutcome { network, log })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// Arg-max label per primal vertex; ties go to the lowest label.
    pub labels: Vec<usize>,
    /// Softmax distribution per vertex (N_V x N_T).
    pub probabilities: Tensor,
}

/// Eval-mode prediction (dropout off).
pub fn predict(network: &mut Network, input: &PreparedMesh) -> Result<Prediction> {
    let logits = network.forward(input, false)?;
    let labels = logits.argmax_rows();
    let mut probabilities = logits;
    for r in 0..probabilities.rows() {
        let row = probabilities.row_mut(r);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(Prediction {
        labels,
        probabilities,
    })
}

/// Prepares `mesh` with the network's stored configuration and predicts.
pub fn predict_mesh(network: &mut Network, mesh: &Mesh) -> Result<Prediction> {
    let input = prepare(mesh, network.config())?;
    predict(network, &input)
}

/// Default output locations inside a training directory.
pub fn output_paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (dir.join("model.ckpt"), dir.join("log.csv"), dir.join("config.txt"))
}
