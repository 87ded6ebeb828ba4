use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use dualmesh::decimate::decimate_with;
use dualmesh::dual::build_dual;
use dualmesh::error::{Error, Result};
use dualmesh::features::{assemble_features, FeatureSelection};
use dualmesh::geodesic::{default_radii, evaluate_on, graph_diameter, DiameterMode, EdgeGraph};
use dualmesh::mesh::{load_mesh, read_labels, save_mesh, write_labels, Label, Mesh, MeshFormat};
use dualmesh::persist::{load_network, save_checkpoint};
use dualmesh::selftest;
use dualmesh::train::{
    config::parse_layers, predict, prepare, train_samples, prepare_all, CorrespondenceTask, NetworkConfig,
    OperatorKind, TrainOutcome,
};

#[derive(Parser)]
#[command(name = "dualmesh", version, about = "Dual-mesh convolutional networks for shape correspondence")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the face-dual graph and report its regularity.
    Dualize {
        mesh: PathBuf,
        /// Write the neighbor table (`node: a b c`, -1 = PAD).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write per-face input features as CSV.
    Features {
        mesh: PathBuf,
        #[arg(long, default_value = "xyz")]
        features: String,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Shortest-edge-first decimation to a face fraction.
    Decimate {
        #[arg(long)]
        fraction: f64,
        input: PathBuf,
        output: PathBuf,
        /// Input labels and where to write them after the collapses.
        #[arg(long, num_args = 2, value_names = ["IN", "OUT"])]
        labels: Option<Vec<PathBuf>>,
    },
    /// Train a correspondence network.
    Train(TrainArgs),
    /// Predict reference-vertex labels for a mesh.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Must match the model's training features.
        #[arg(long)]
        features: Option<String>,
        /// Also write the per-vertex softmax as CSV.
        #[arg(long)]
        probs: Option<PathBuf>,
    },
    /// Score predicted labels against ground truth on the reference mesh.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Write the predicted mesh colored by per-vertex error.
        #[arg(long)]
        color_out: Option<PathBuf>,
        /// Mesh the predictions belong to, for --color-out (default: the reference).
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Comma-separated radii; default 64 steps up to 0.3 x diameter.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the built-in verification suites.
    Selftest,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["task", "data"])))]
struct TrainArgs {
    /// Built-in task, e.g. `icosphere-selfcorr` or `icosphere-selfcorr:3`.
    #[arg(long)]
    task: Option<String>,
    /// Dataset directory with a manifest.txt.
    #[arg(long)]
    data: Option<PathBuf>,
    /// `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    op: Option<OperatorKind>,
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "run")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn format_of(path: &Path) -> Result<MeshFormat> {
    MeshFormat::from_path(path).ok_or_else(|| {
        Error::Config(format!("{}: unknown mesh extension (use .off or .obj)", path.display()))
    })
}

fn load(path: &Path) -> Result<Mesh> {
    load_mesh(path, format_of(path)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn csv_table(header: &[&str], t: &dualmesh::nn::Tensor) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in 0..t.rows() {
        let row: Vec<String> = t.row(r).iter().map(f64::to_string).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn run_train(a: TrainArgs) -> Result<()> {
    let task = match (&a.task, &a.data) {
        (Some(name), None) => CorrespondenceTask::builtin(name)?,
        (None, Some(dir)) => CorrespondenceTask::load_dir(dir)?,
        _ => unreachable!("clap enforces exactly one source"),
    };
    let n_targets = task.n_targets();
    let mut cfg = NetworkConfig::new(OperatorKind::DualConvMax, "xyz".parse()?, n_targets);
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        cfg.apply_text(&text)?;
        if cfg.n_targets != n_targets {
            return Err(Error::Config(format!(
                "config sets {} targets, task reference has {n_targets} vertices",
                cfg.n_targets
            )));
        }
    }
    if let Some(op) = a.op {
        cfg.operator = op;
    }
    if let Some(f) = &a.features {
        cfg.features = f.parse()?;
    }
    if let Some(l) = &a.layers {
        cfg.layers = parse_layers(l)?;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.adam.lr = lr;
    }
    if let Some(d) = a.dropout {
        cfg.dropout = d;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;

    create_dir(&a.out)?;
    write(&a.out.join("config.txt"), &cfg.to_text())?;
    let samples = prepare_all(&task.train, &cfg, a.jobs)?;
    let TrainOutcome { network, log } = train_samples(&samples, &cfg, |row| {
        log::info!("epoch {:>4}  loss {:.6}  accuracy {:.4}", row.epoch, row.loss, row.accuracy);
    })?;
    save_checkpoint(&network, &a.out.join("model.ckpt"))?;
    let outcome = TrainOutcome { network, log };
    write(&a.out.join("log.csv"), &outcome.log_csv())?;
    let last = outcome.log.last().expect("row 0 always present");
    println!(
        "trained {} epochs: loss {:.6}, train accuracy {:.4}; wrote {}",
        last.epoch,
        last.loss,
        last.accuracy,
        a.out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Dualize { mesh, out } => {
            let m = load(&mesh)?;
            let dual = build_dual(&m)?;
            println!("{} nodes, 3-regular: {}", dual.node_count(), dual.is_three_regular());
            if let Some(out) = out {
                write(&out, &dual.dump())?;
            }
        }
        Command::Features { mesh, features, out } => {
            let m = load(&mesh)?;
            let sel: FeatureSelection = features.parse()?;
            let dual = build_dual(&m)?;
            let table = assemble_features(&m, &dual, &sel)?.to_table(&sel);
            let csv = csv_table(&sel.channel_names(), &table);
            match out {
                Some(p) => write(&p, &csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Decimate {
            fraction,
            input,
            output,
            labels,
        } => {
            let m = load(&input)?;
            let out_format = format_of(&output)?;
            let (labels_in, labels_out) = match labels.as_deref() {
                Some([i, o]) => (Some(i), Some(o)),
                _ => (None, None),
            };
            let lbl = labels_in.map(|p| read_labels(p)).transpose()?;
            let d = decimate_with(&m, lbl.as_deref(), fraction, false)?;
            save_mesh(&d.mesh, &output, out_format, None)?;
            if let (Some(p), Some(l)) = (labels_out, &d.labels) {
                write_labels(&p, l)?;
            }
            println!(
                "{} -> {} faces, {} -> {} vertices",
                m.face_count(),
                d.mesh.face_count(),
                m.vertex_count(),
                d.mesh.vertex_count()
            );
        }
        Command::Train(a) => run_train(a)?,
        Command::Predict {
            model,
            mesh,
            out,
            features,
            probs,
        } => {
            let mut net = load_network(&model)?;
            if let Some(f) = features {
                net.check_features(&f.parse()?)?;
            }
            let m = load(&mesh)?;
            let input = prepare(&m, net.config())?;
            let p = predict(&mut net, &input)?;
            let labels: Vec<Label> = p.labels.iter().copied().map(Some).collect();
            write_labels(&out, &labels)?;
            if let Some(path) = probs {
                let names: Vec<String> = (0..p.probabilities.cols()).map(|i| format!("p{i}")).collect();
                let names: Vec<&str> = names.iter().map(String::as_str).collect();
                write(&path, &csv_table(&names, &p.probabilities))?;
            }
        }
        Command::Eval {
            pred,
            gt,
            reference,
            out_dir,
            color_out,
            mesh,
            radii,
            jobs,
        } => {
            let pred = read_labels(&pred)?;
            let truth = read_labels(&gt)?;
            let predicted: Vec<usize> = pred
                .iter()
                .enumerate()
                .map(|(i, l)| l.ok_or_else(|| Error::Validation(format!("prediction {i} is unlabeled"))))
                .collect::<Result<_>>()?;
            let reference = load(&reference)?;
            let graph = EdgeGraph::from_mesh(&reference);
            let diameter = graph_diameter(&graph, DiameterMode::Auto)?;
            let radii = radii.unwrap_or_else(|| default_radii(diameter));
            let report = evaluate_on(&graph, diameter, &predicted, &truth, &radii, jobs)?;
            create_dir(&out_dir)?;
            write(&out_dir.join("metrics.json"), &report.to_json())?;
            write(&out_dir.join("curve.csv"), &report.curve_csv())?;
            if let Some(path) = color_out {
                let target = match &mesh {
                    Some(p) => load(p)?,
                    None => reference.clone(),
                };
                let colors = report.error_colors(0.1 * diameter);
                save_mesh(&target, &path, format_of(&path)?, Some(&colors))?;
            }
            println!(
                "accuracy {:.4}, mean geodesic error {:.4}, diameter {:.6}",
                report.accuracy, report.mean_geo_error, diameter
            );
        }
        Command::Selftest => {
            let results = selftest::run_all();
            print!("{}", selftest::format_table(&results));
            let failed = results.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                let mut msg = String::new();
                let _ = write!(msg, "{failed} suite(s) failed");
                return Err(Error::Validation(msg));
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::EmptySelection => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
