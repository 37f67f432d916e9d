//! Two-sample and trajectory diagnostics: squared MMD with a Gaussian RBF
//! kernel, transport cost, and trajectory straightness.
//!
//! The MMD estimator is the unbiased U-statistic, which can be slightly
//! negative near zero discrepancy; the bandwidth defaults to the median
//! heuristic over pooled pairwise distances.

use serde::{Deserialize, Serialize};

use crate::flow::CouplingStrategy;
use crate::linalg::Vector;
use crate::net::VelocityNet;
use crate::ode::{sample_flow, SolverSpec};
use crate::prior::Prior;
use crate::toy::{Condition, LabeledSample};
use crate::{Error, Real, SeedRng};

/// Bandwidth selection for the RBF kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", untagged)]
pub enum Bandwidth {
    Median,
    Fixed(f64),
}

/// MMD estimator configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmdConfig {
    pub bandwidth: Bandwidth,
}

impl Default for MmdConfig {
    fn default() -> Self {
        MmdConfig {
            bandwidth: Bandwidth::Median,
        }
    }
}

/// Metric bundle for one evaluated model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub mmd2: f64,
    pub transport_cost: f64,
    pub straightness: f64,
    pub nfe: usize,
    pub per_condition: Vec<(String, f64)>,
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn resolve_bandwidth<S: Real>(pooled: &[&Vector<S>], cfg: &MmdConfig) -> f64 {
    match cfg.bandwidth {
        Bandwidth::Fixed(b) => b,
        Bandwidth::Median => {
            let mut dists = Vec::with_capacity(pooled.len() * (pooled.len() - 1) / 2);
            for i in 0..pooled.len() {
                for j in (i + 1)..pooled.len() {
                    dists.push(pooled[i].dist(pooled[j]).to_f64());
                }
            }
            let m = median(dists);
            if m <= 0.0 {
                log::warn!("median pairwise distance is zero; falling back to bandwidth 1.0");
                1.0
            } else {
                m
            }
        }
    }
}

/// Unbiased estimator of squared MMD between two sample sets.
pub fn mmd2<S: Real>(x: &[Vector<S>], y: &[Vector<S>], cfg: &MmdConfig) -> Result<f64, Error> {
    let n = x.len();
    let m = y.len();
    if n < 2 || m < 2 {
        return Err(Error::Empty("mmd2 needs at least two samples per side".into()));
    }
    let pooled: Vec<&Vector<S>> = x.iter().chain(y.iter()).collect();
    let sigma = resolve_bandwidth(&pooled, cfg);
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let k = |a: &Vector<S>, b: &Vector<S>| {
        let d = a.dist(b).to_f64();
        (-gamma * d * d).exp()
    };

    let mut xx = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                xx += k(&x[i], &x[j]);
            }
        }
    }
    xx /= (n * (n - 1)) as f64;

    let mut yy = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                yy += k(&y[i], &y[j]);
            }
        }
    }
    yy /= (m * (m - 1)) as f64;

    // Equal sample sizes use the paired U-statistic (cross term without the
    // diagonal), which is exactly zero when both sets coincide; unequal
    // sizes fall back to the all-pairs cross term.
    let mut xy = 0.0;
    if n == m {
        for i in 0..n {
            for j in 0..m {
                if i != j {
                    xy += k(&x[i], &y[j]);
                }
            }
        }
        xy /= (n * (n - 1)) as f64;
    } else {
        for xi in x {
            for yj in y {
                xy += k(xi, yj);
            }
        }
        xy /= (n * m) as f64;
    }

    Ok(xx + yy - 2.0 * xy)
}

/// Two-sample permutation test on the MMD statistic. Returns the p-value:
/// the fraction of label permutations whose statistic reaches the observed
/// one.
pub fn permutation_test<S: Real>(
    x: &[Vector<S>],
    y: &[Vector<S>],
    cfg: &MmdConfig,
    n_perms: usize,
    rng: &mut SeedRng,
) -> f64 {
    use rand::seq::SliceRandom as _;
    let observed = mmd2(x, y, cfg).unwrap_or(f64::INFINITY);
    let mut pooled: Vec<Vector<S>> = x.iter().chain(y.iter()).cloned().collect();
    let n = x.len();
    let mut hits = 0usize;
    for _ in 0..n_perms {
        pooled.shuffle(rng);
        let stat = mmd2(&pooled[..n], &pooled[n..], cfg).unwrap_or(f64::NEG_INFINITY);
        if stat >= observed {
            hits += 1;
        }
    }
    (hits + 1) as f64 / (n_perms + 1) as f64
}

/// Mean Euclidean distance over coupled pairs.
pub fn transport_cost<S: Real>(pairs: &[(Vector<S>, Vector<S>)]) -> Result<f64, Error> {
    if pairs.is_empty() {
        return Err(Error::Empty("transport_cost got no pairs".into()));
    }
    let total: f64 = pairs.iter().map(|(a, b)| a.dist(b).to_f64()).sum();
    Ok(total / pairs.len() as f64)
}

/// Chord length over arc length of a polyline; 1.0 means straight.
pub fn straightness<S: Real>(trajectory: &[(S, Vector<S>)]) -> Result<f64, Error> {
    if trajectory.len() < 2 {
        return Err(Error::Empty("straightness needs at least two points".into()));
    }
    let chord = trajectory
        .first()
        .unwrap()
        .1
        .dist(&trajectory.last().unwrap().1)
        .to_f64();
    let arc: f64 = trajectory
        .windows(2)
        .map(|w| w[0].1.dist(&w[1].1).to_f64())
        .sum();
    if arc == 0.0 {
        return Ok(1.0); // degenerate path, by convention
    }
    Ok(chord / arc)
}

/// Evaluation configuration: how many samples per condition and the MMD
/// settings.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n_per_condition: usize,
    pub mmd: MmdConfig,
    pub record_trajectories: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_per_condition: 200,
            mmd: MmdConfig::default(),
            record_trajectories: false,
        }
    }
}

/// Generate per-condition samples from the model and score them against the
/// held-out samples of the same condition.
pub fn evaluate_model<S: Real>(
    net: &VelocityNet<S>,
    prior: &Prior<S>,
    strategy: CouplingStrategy,
    dataset: &[LabeledSample<S>],
    spec: &SolverSpec,
    cfg: &EvalConfig,
    rng: &mut SeedRng,
) -> Result<EvalReport, Error> {
    use std::collections::BTreeMap;
    let mut by_cond: BTreeMap<String, (Condition, Vec<Vector<S>>)> = BTreeMap::new();
    for s in dataset {
        by_cond
            .entry(s.condition.label())
            .or_insert_with(|| (s.condition.clone(), Vec::new()))
            .1
            .push(s.x1.clone());
    }
    if by_cond.is_empty() {
        return Err(Error::Empty("evaluate_model got an empty dataset".into()));
    }

    let mut per_condition = Vec::new();
    let mut pairs = Vec::new();
    let mut straight_acc = 0.0;
    let mut straight_n = 0usize;
    let mut nfe = 0usize;
    for (label, (cond, targets)) in &by_cond {
        let mut generated = Vec::with_capacity(cfg.n_per_condition);
        for _ in 0..cfg.n_per_condition {
            let (res, x0) = sample_flow(
                net,
                prior,
                strategy,
                cond,
                spec,
                rng,
                cfg.record_trajectories,
            )?;
            nfe = res.nfe;
            pairs.push((x0, res.endpoint.clone()));
            if let Some(traj) = &res.trajectory {
                straight_acc += straightness(traj)?;
                straight_n += 1;
            }
            generated.push(res.endpoint);
        }
        let score = mmd2(&generated, targets, &cfg.mmd)?;
        per_condition.push((label.clone(), score));
    }

    let mean_mmd2 =
        per_condition.iter().map(|(_, v)| v).sum::<f64>() / per_condition.len() as f64;
    Ok(EvalReport {
        mmd2: mean_mmd2,
        transport_cost: transport_cost(&pairs)?,
        straightness: if straight_n > 0 {
            straight_acc / straight_n as f64
        } else {
            1.0
        },
        nfe,
        per_condition,
    })
}
