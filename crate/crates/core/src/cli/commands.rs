//! Implementations of the `cpdflow` subcommands. Everything here runs at
//! f64 and deals in files under the config's output directory.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::cli::config::{ExperimentConfig, RunManifest};
use crate::cli::plot;
use crate::flow::{self, make_batch, CouplingStrategy};
use crate::linalg::Vector;
use crate::metrics::{evaluate_model, mmd2, transport_cost};
use crate::net::{AdamState, Checkpoint, VelocityNet};
use crate::ode::{sample_flow, SolverSpec};
use crate::prior::{fit_discrete_prior, train_mapper, ContinuousPrior, Prior, PriorFile};
use crate::toy::{self, Condition, LabeledSample, Split};
use crate::{rng_from_seed, Error};

/// Euler step counts swept by `bench-nfe`; an Euler run with n steps costs
/// exactly n field evaluations.
pub const NFE_GRID: &[usize] = &[2, 3, 4, 6, 8, 10, 15, 400];

type Sample = LabeledSample<f64>;

fn ensure_out_dir(cfg: &ExperimentConfig) -> Result<(), Error> {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::io(cfg.out_dir.clone(), e))
}

/// Full dataset for the config, all splits included.
fn build_dataset(cfg: &ExperimentConfig) -> Result<Vec<Sample>, Error> {
    let spec = cfg.dataset.toy_spec(cfg.seed)?;
    toy::generate(&spec)
}

/// Dataset partitioned into (train, reference) where reference is what eval
/// compares against: the test split when one exists or is requested, the
/// training data otherwise.
fn split_dataset(
    cfg: &ExperimentConfig,
    dataset: Vec<Sample>,
) -> Result<(Vec<Sample>, Vec<Sample>), Error> {
    let held = cfg.dataset.holdout_set();
    if !held.is_empty() {
        return toy::holdout_split(dataset, &held);
    }
    let (train, test): (Vec<_>, Vec<_>) =
        dataset.into_iter().partition(|s| s.split == Split::Train);
    Ok((train, test))
}

fn reference_for_eval(cfg: &ExperimentConfig) -> Result<Vec<Sample>, Error> {
    let (train, test) = split_dataset(cfg, build_dataset(cfg)?)?;
    if cfg.eval.use_test_split {
        if test.is_empty() {
            return Err(Error::Empty(
                "eval.use_test_split is set but the dataset has no test split".into(),
            ));
        }
        Ok(test)
    } else {
        Ok(train)
    }
}

fn fit_prior_in_memory(cfg: &ExperimentConfig, train: &[Sample]) -> Result<Prior<f64>, Error> {
    match cfg.prior.mode.as_str() {
        "discrete" => Ok(Prior::Discrete(fit_discrete_prior(train)?)),
        "continuous" => {
            let pairs: Vec<(Vector<f64>, Vector<f64>)> = train
                .iter()
                .map(|s| match &s.condition {
                    Condition::Angle(theta) => {
                        Ok((s.x1.clone(), toy::angle_embedding(*theta)))
                    }
                    Condition::Class(id) => Err(Error::Domain(format!(
                        "continuous prior needs angle conditions, got class '{id}'"
                    ))),
                })
                .collect::<Result<_, _>>()?;
            let (mapper, final_loss) = train_mapper(&pairs, &cfg.prior.mapper_config(cfg.seed))?;
            log::info!("mapper final minibatch loss {final_loss:.6}");
            Ok(Prior::Continuous(ContinuousPrior {
                mapper,
                sigma: cfg.prior.sigma,
            }))
        }
        other => Err(Error::Domain(format!(
            "unknown prior mode '{other}' (expected discrete | continuous)"
        ))),
    }
}

fn load_or_fit_prior(cfg: &ExperimentConfig, train: &[Sample]) -> Result<Prior<f64>, Error> {
    let path = cfg.out_path(&cfg.prior.path);
    if path.exists() {
        PriorFile::<f64>::load(&path)
    } else {
        log::info!("prior file {} not found, fitting from data", path.display());
        fit_prior_in_memory(cfg, train)
    }
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<(), Error> {
    let mut file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    writeln!(file, "{header}").map_err(|e| Error::io(path.display().to_string(), e))?;
    for row in rows {
        writeln!(file, "{row}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

/// `gen-data`: materialize the configured dataset as CSV. For the vlines
/// toy a missing source CSV is synthesized first so the command is
/// self-contained.
pub fn gen_data(cfg: &ExperimentConfig) -> Result<(), Error> {
    let started = chrono::Utc::now();
    ensure_out_dir(cfg)?;
    if cfg.dataset.kind == "vlines" {
        if let Some(csv) = &cfg.dataset.csv {
            let path = Path::new(csv);
            if !path.exists() {
                if let Some(parent) = path.parent() {
                    if !parent.as_os_str().is_empty() {
                        std::fs::create_dir_all(parent)
                            .map_err(|e| Error::io(parent.display().to_string(), e))?;
                    }
                }
                log::info!("synthesizing vlines source at {}", path.display());
                toy::write_synthetic_vlines_csv(path, 9, cfg.dataset.n_per_class, cfg.seed)?;
            }
        }
    }
    let dataset = build_dataset(cfg)?;
    let out = cfg.out_path("dataset.csv");
    toy::write_dataset_csv(&out, &dataset)?;
    println!("wrote {} samples to {}", dataset.len(), out.display());
    RunManifest::write(
        Path::new(&cfg.out_dir),
        "gen-data",
        &cfg.hash(),
        cfg.seed,
        started,
        &[out],
    )
}

/// `fit-prior`: fit the configured prior on the training split and save it.
pub fn fit_prior(cfg: &ExperimentConfig) -> Result<(), Error> {
    let started = chrono::Utc::now();
    ensure_out_dir(cfg)?;
    let (train, _) = split_dataset(cfg, build_dataset(cfg)?)?;
    let prior = fit_prior_in_memory(cfg, &train)?;
    let path = cfg.out_path(&cfg.prior.path);
    let mut files = vec![path.clone()];
    match &prior {
        Prior::Discrete(p) => {
            PriorFile::save_discrete(&path, p)?;
            println!(
                "fitted discrete prior with {} components -> {}",
                p.components.len(),
                path.display()
            );
        }
        Prior::Continuous(p) => {
            let mapper_rel = "mapper.json";
            PriorFile::save_continuous(&path, &p.mapper, cfg.prior.sigma, mapper_rel)?;
            files.push(path.parent().unwrap_or(Path::new(".")).join(mapper_rel));
            println!("fitted continuous prior -> {}", path.display());
        }
    }
    RunManifest::write(
        Path::new(&cfg.out_dir),
        "fit-prior",
        &cfg.hash(),
        cfg.seed,
        started,
        &files,
    )
}

/// `train`: train a velocity net with the configured coupling strategy and
/// write the checkpoint plus a per-epoch loss CSV.
pub fn train(cfg: &ExperimentConfig) -> Result<(), Error> {
    let started = chrono::Utc::now();
    ensure_out_dir(cfg)?;
    let (train_set, _) = split_dataset(cfg, build_dataset(cfg)?)?;
    let prior = load_or_fit_prior(cfg, &train_set)?;
    let tcfg = cfg.training.train_config(cfg.seed)?;
    let (net, adam, history) = flow::train(&train_set, &prior, &tcfg)?;

    let losses_path = cfg.out_path("losses.csv");
    let rows: Vec<String> = history
        .iter()
        .map(|e| format!("{},{},{}", e.epoch, e.mean_loss, e.wall_ms))
        .collect();
    write_csv(&losses_path, "epoch,mean_loss,wall_ms", &rows)?;

    let ckpt_path = cfg.out_path(&cfg.training.checkpoint);
    Checkpoint::new(net, tcfg.strategy.as_str(), &cfg.hash(), Some(adam)).save(&ckpt_path)?;
    if let Some(last) = history.last() {
        println!(
            "trained {} epochs (final mean loss {:.6}) -> {}",
            history.len(),
            last.mean_loss,
            ckpt_path.display()
        );
    } else {
        println!("trained 0 epochs -> {}", ckpt_path.display());
    }
    RunManifest::write(
        Path::new(&cfg.out_dir),
        "train",
        &cfg.hash(),
        cfg.seed,
        started,
        &[losses_path, ckpt_path],
    )
}

fn distinct_conditions(dataset: &[Sample]) -> Vec<Condition> {
    let mut seen: BTreeMap<String, Condition> = BTreeMap::new();
    for s in dataset {
        seen.entry(s.condition.label())
            .or_insert_with(|| s.condition.clone());
    }
    seen.into_values().collect()
}

fn fmt_coords(v: &Vector<f64>) -> String {
    v.0.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// `sample`: integrate the learned field for `n` draws per condition and
/// write them as CSV. With `--trajectories` the full paths go to a second
/// file.
pub fn sample(
    cfg: &ExperimentConfig,
    condition: Option<&str>,
    n: usize,
    record_trajectories: bool,
) -> Result<(), Error> {
    let started = chrono::Utc::now();
    ensure_out_dir(cfg)?;
    let (train_set, _) = split_dataset(cfg, build_dataset(cfg)?)?;
    let prior = load_or_fit_prior(cfg, &train_set)?;
    let ckpt: Checkpoint<f64> = Checkpoint::load(&cfg.out_path(&cfg.training.checkpoint))?;
    let strategy: CouplingStrategy = ckpt.strategy.parse()?;
    let spec = cfg.solver.spec()?;
    let mut rng = rng_from_seed(cfg.seed);

    let conditions = match condition {
        Some(text) => vec![Condition::parse(text, cfg.dataset.is_angle())],
        None => distinct_conditions(&train_set),
    };
    // conditions seen in training are tagged "train", anything else "test"
    let train_labels: std::collections::BTreeSet<String> =
        train_set.iter().map(|s| s.condition.label()).collect();

    let d = ckpt.net.data_dim;
    let coord_header: Vec<String> = (0..d).map(|i| format!("x_{i}")).collect();
    let mut sample_rows = Vec::new();
    let mut traj_rows = Vec::new();
    let mut sample_id = 0usize;
    for cond in &conditions {
        let split = if train_labels.contains(&cond.label()) {
            "train"
        } else {
            "test"
        };
        for _ in 0..n {
            let (res, _x0) = sample_flow(
                &ckpt.net,
                &prior,
                strategy,
                cond,
                &spec,
                &mut rng,
                record_trajectories,
            )?;
            sample_rows.push(format!(
                "{sample_id},{},{},{},{split}",
                cond.label(),
                res.nfe,
                fmt_coords(&res.endpoint)
            ));
            if let Some(traj) = &res.trajectory {
                for (t, x) in traj {
                    traj_rows.push(format!("{sample_id},{t},{}", fmt_coords(x)));
                }
            }
            sample_id += 1;
        }
    }

    let samples_path = cfg.out_path("samples.csv");
    write_csv(
        &samples_path,
        &format!("sample_id,condition,nfe,{},split", coord_header.join(",")),
        &sample_rows,
    )?;
    let mut files = vec![samples_path.clone()];
    if record_trajectories {
        let traj_path = cfg.out_path("trajectories.csv");
        write_csv(
            &traj_path,
            &format!("sample_id,t,{}", coord_header.join(",")),
            &traj_rows,
        )?;
        files.push(traj_path);
    }
    println!(
        "wrote {} samples over {} conditions to {}",
        sample_rows.len(),
        conditions.len(),
        samples_path.display()
    );
    RunManifest::write(
        Path::new(&cfg.out_dir),
        "sample",
        &cfg.hash(),
        cfg.seed,
        started,
        &files,
    )
}

/// `eval`: score the trained model against the reference data and write the
/// metric table.
pub fn eval(cfg: &ExperimentConfig) -> Result<(), Error> {
    let started = chrono::Utc::now();
    ensure_out_dir(cfg)?;
    let (train_set, _) = split_dataset(cfg, build_dataset(cfg)?)?;
    let reference = reference_for_eval(cfg)?;
    let prior = load_or_fit_prior(cfg, &train_set)?;
    let ckpt: Checkpoint<f64> = Checkpoint::load(&cfg.out_path(&cfg.training.checkpoint))?;
    let strategy: CouplingStrategy = ckpt.strategy.parse()?;
    let spec = cfg.solver.spec()?;
    let mut ecfg = cfg.eval.eval_config()?;
    // straightness needs the paths
    ecfg.record_trajectories = true;
    let mut rng = rng_from_seed(cfg.seed);
    let report = evaluate_model(&ckpt.net, &prior, strategy, &reference, &spec, &ecfg, &mut rng)?;

    let mut rows = vec![
        format!("overall,mmd2,{}", report.mmd2),
        format!("overall,transport_cost,{}", report.transport_cost),
        format!("overall,straightness,{}", report.straightness),
        format!("overall,nfe,{}", report.nfe),
    ];
    for (label, score) in &report.per_condition {
        rows.push(format!("condition,{label},{score}"));
    }
    let eval_path = cfg.out_path("eval.csv");
    write_csv(&eval_path, "scope,key,value", &rows)?;
    println!(
        "mmd2 {:.6}  transport {:.4}  straightness {:.4}  nfe {}",
        report.mmd2, report.transport_cost, report.straightness, report.nfe
    );
    RunManifest::write(
        Path::new(&cfg.out_dir),
        "eval",
        &cfg.hash(),
        cfg.seed,
        started,
        &[eval_path],
    )
}

/// `bench-transport`: mean coupling transport cost per strategy over
/// repeated batches, without any training.
pub fn bench_transport(cfg: &ExperimentConfig, n_batches: usize) -> Result<(), Error> {
    let started = chrono::Utc::now();
    ensure_out_dir(cfg)?;
    let (train_set, _) = split_dataset(cfg, build_dataset(cfg)?)?;
    let prior = load_or_fit_prior(cfg, &train_set)?;
    let sigma_min = cfg.training.sigma_min;
    let strategies = [
        CouplingStrategy::Independent,
        CouplingStrategy::MinibatchOt,
        CouplingStrategy::ConditionalPrior,
    ];
    let mut rows = Vec::new();
    for strategy in strategies {
        let mut rng = rng_from_seed(cfg.seed);
        let mut acc = 0.0;
        for batch_idx in 0..n_batches.max(1) {
            let batch = make_batch(
                &train_set,
                &prior,
                strategy,
                cfg.training.batch_size,
                sigma_min,
                &mut rng,
            )?;
            let pairs: Vec<_> = batch
                .iter()
                .map(|p| (p.x0.clone(), p.x1.clone()))
                .collect();
            let cost = transport_cost(&pairs)?;
            acc += cost;
            rows.push(format!("{},{batch_idx},{cost}", strategy.as_str()));
        }
        println!(
            "{}: mean transport cost {:.4}",
            strategy.as_str(),
            acc / n_batches.max(1) as f64
        );
    }
    let path = cfg.out_path("transport.csv");
    write_csv(&path, "strategy,batch,transport_cost", &rows)?;
    RunManifest::write(
        Path::new(&cfg.out_dir),
        "bench-transport",
        &cfg.hash(),
        cfg.seed,
        started,
        &[path],
    )
}

fn eval_mmd2_at(
    net: &VelocityNet<f64>,
    prior: &Prior<f64>,
    strategy: CouplingStrategy,
    reference: &[Sample],
    spec: &SolverSpec,
    n_per_condition: usize,
    cfg: &ExperimentConfig,
    rng: &mut crate::SeedRng,
) -> Result<(f64, f64), Error> {
    let mut by_cond: BTreeMap<String, (Condition, Vec<Vector<f64>>)> = BTreeMap::new();
    for s in reference {
        by_cond
            .entry(s.condition.label())
            .or_insert_with(|| (s.condition.clone(), Vec::new()))
            .1
            .push(s.x1.clone());
    }
    let mmd_cfg = cfg.eval.mmd_config()?;
    let mut acc = 0.0;
    let mut nfe_acc = 0.0;
    let mut nfe_n = 0usize;
    for (_, (cond, targets)) in &by_cond {
        let mut generated = Vec::with_capacity(n_per_condition);
        for _ in 0..n_per_condition {
            let (res, _) = sample_flow(net, prior, strategy, cond, spec, rng, false)?;
            nfe_acc += res.nfe as f64;
            nfe_n += 1;
            generated.push(res.endpoint);
        }
        acc += mmd2(&generated, targets, &mmd_cfg)?;
    }
    Ok((acc / by_cond.len() as f64, nfe_acc / nfe_n as f64))
}

/// `bench-nfe`: sweep fixed Euler budgets for one or more checkpoints and
/// record sample quality at each budget.
pub fn bench_nfe(cfg: &ExperimentConfig, checkpoints: &[String]) -> Result<(), Error> {
    let started = chrono::Utc::now();
    ensure_out_dir(cfg)?;
    let (train_set, _) = split_dataset(cfg, build_dataset(cfg)?)?;
    let reference = reference_for_eval(cfg)?;
    let prior = load_or_fit_prior(cfg, &train_set)?;
    let paths: Vec<PathBuf> = if checkpoints.is_empty() {
        vec![cfg.out_path(&cfg.training.checkpoint)]
    } else {
        checkpoints.iter().map(PathBuf::from).collect()
    };

    let mut rows = Vec::new();
    for path in &paths {
        let ckpt: Checkpoint<f64> = Checkpoint::load(path)?;
        let strategy: CouplingStrategy = ckpt.strategy.parse()?;
        for &nfe in NFE_GRID {
            let spec = SolverSpec::Euler { n_steps: nfe };
            let mut rng = rng_from_seed(cfg.seed);
            let (score, _) = eval_mmd2_at(
                &ckpt.net,
                &prior,
                strategy,
                &reference,
                &spec,
                cfg.eval.n_per_condition,
                cfg,
                &mut rng,
            )?;
            println!("{} nfe {nfe}: mmd2 {score:.6}", strategy.as_str());
            rows.push(format!(
                "{},{},{nfe},{score}",
                path.display(),
                strategy.as_str()
            ));
        }
    }
    let out = cfg.out_path("nfe.csv");
    write_csv(&out, "checkpoint,strategy,nfe,mmd2", &rows)?;
    RunManifest::write(
        Path::new(&cfg.out_dir),
        "bench-nfe",
        &cfg.hash(),
        cfg.seed,
        started,
        &[out],
    )
}

/// `bench-epochs`: train epoch by epoch and, after each epoch, measure
/// sample quality and the adaptive solver's evaluation count.
pub fn bench_epochs(cfg: &ExperimentConfig) -> Result<(), Error> {
    let started = chrono::Utc::now();
    ensure_out_dir(cfg)?;
    let (train_set, _) = split_dataset(cfg, build_dataset(cfg)?)?;
    let reference = reference_for_eval(cfg)?;
    let prior = load_or_fit_prior(cfg, &train_set)?;
    let tcfg = cfg.training.train_config(cfg.seed)?;
    let spec = SolverSpec::dopri5_defaults();

    // mirror of the training loop, paused between epochs for measurement
    let d = train_set[0].x1.dim();
    let mut rng = rng_from_seed(tcfg.seed);
    let encoder = flow::CondEncoder::new(&prior);
    let cond_dim = encoder.dim(d);
    let mut net = VelocityNet::new(d, cond_dim, tcfg.hidden_width, tcfg.hidden_depth, &mut rng);
    let mut adam = AdamState::new(&net.mlp, tcfg.learning_rate);
    let steps_per_epoch = (train_set.len() / tcfg.batch_size).max(1);

    let mut rows = Vec::new();
    for epoch in 0..tcfg.epochs {
        let mut loss_acc = 0.0;
        for _ in 0..steps_per_epoch {
            let batch = make_batch(
                &train_set,
                &prior,
                tcfg.strategy,
                tcfg.batch_size,
                tcfg.sigma_min,
                &mut rng,
            )?;
            let (loss, grads) = net.loss_and_grad(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "training loss became non-finite at epoch {epoch}"
                )));
            }
            adam.step(&mut net.mlp, &grads);
            loss_acc += loss;
        }
        let mean_loss = loss_acc / steps_per_epoch as f64;
        let mut eval_rng = rng_from_seed(cfg.seed.wrapping_add(1));
        let (score, mean_nfe) = eval_mmd2_at(
            &net,
            &prior,
            tcfg.strategy,
            &reference,
            &spec,
            cfg.eval.n_per_condition,
            cfg,
            &mut eval_rng,
        )?;
        println!("epoch {epoch}: loss {mean_loss:.6} mmd2 {score:.6} nfe {mean_nfe:.1}");
        rows.push(format!("{epoch},{mean_loss},{mean_nfe},{score}"));
    }
    let out = cfg.out_path("epochs.csv");
    write_csv(&out, "epoch,mean_loss,mean_nfe,mmd2", &rows)?;
    RunManifest::write(
        Path::new(&cfg.out_dir),
        "bench-epochs",
        &cfg.hash(),
        cfg.seed,
        started,
        &[out],
    )
}

fn read_csv_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::io(
            path.display().to_string(),
            std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
        ))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Format {
            path: path.display().to_string(),
            row: 0,
            detail: e.to_string(),
        })?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format {
            path: path.display().to_string(),
            row: i + 1,
            detail: e.to_string(),
        })?;
        rows.push(record.iter().map(|f| f.to_string()).collect());
    }
    Ok((headers, rows))
}

fn column_index(headers: &[String], name: &str, path: &Path) -> Result<usize, Error> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Format {
        path: path.display().to_string(),
        row: 0,
        detail: format!("missing column '{name}' (have: {})", headers.join(", ")),
    })
}

fn parse_cell(cell: &str, path: &Path, row: usize) -> Result<f64, Error> {
    cell.parse::<f64>().map_err(|_| Error::Format {
        path: path.display().to_string(),
        row,
        detail: format!("expected a number, got '{cell}'"),
    })
}

/// Which picture `plot` draws from a CSV.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// Points colored by a grouping column.
    Scatter,
    /// One polyline per trajectory id.
    Trajectory,
    /// Line chart of y over x, one series per group.
    Curve,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "scatter" => Ok(PlotKind::Scatter),
            "trajectory" => Ok(PlotKind::Trajectory),
            "curve" => Ok(PlotKind::Curve),
            other => Err(Error::Domain(format!(
                "unknown plot kind '{other}' (expected scatter | trajectory | curve)"
            ))),
        }
    }
}

/// `plot`: render a CSV produced by the other commands into a standalone
/// SVG file.
pub fn plot_csv(
    kind: PlotKind,
    input: &Path,
    output: &Path,
    x_col: &str,
    y_col: &str,
    group_col: Option<&str>,
    title: &str,
) -> Result<(), Error> {
    let (headers, rows) = read_csv_table(input)?;
    let xi = column_index(&headers, x_col, input)?;
    let yi = column_index(&headers, y_col, input)?;
    let gi = group_col
        .map(|g| column_index(&headers, g, input))
        .transpose()?;

    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (ri, row) in rows.iter().enumerate() {
        let x = parse_cell(&row[xi], input, ri + 1)?;
        let y = parse_cell(&row[yi], input, ri + 1)?;
        let key = gi.map(|g| row[g].clone()).unwrap_or_default();
        groups.entry(key).or_default().push((x, y));
    }

    let svg = match kind {
        PlotKind::Scatter => {
            let grouped: Vec<(String, Vec<(f64, f64)>)> = groups.into_iter().collect();
            plot::scatter(title, &grouped)
        }
        PlotKind::Trajectory => {
            let lines: Vec<Vec<(f64, f64)>> = groups.into_values().collect();
            plot::trajectories(title, &lines)
        }
        PlotKind::Curve => {
            let mut series: Vec<(String, Vec<(f64, f64)>)> = groups.into_iter().collect();
            for (_, pts) in &mut series {
                pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            }
            plot::curves(title, &series)
        }
    };
    std::fs::write(output, svg).map_err(|e| Error::io(output.display().to_string(), e))?;
    println!("wrote {}", output.display());
    Ok(())
}
