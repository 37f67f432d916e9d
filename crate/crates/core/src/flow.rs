//! Conditional interpolant paths, target vector fields, coupling
//! strategies, and the regression training loop.
//!
//! Three couplings are supported: `Independent` (standard-normal source,
//! straight-line path), `MinibatchOt` (independent draws re-paired by the
//! exact assignment within each batch), and `ConditionalPrior` (source drawn
//! from the condition's Gaussian component). In every case the stored `x0`
//! is the realized source point of the coupling; for the conditional-prior
//! coupling that is `sqrt_cov * x + mean` with base point `x ~ N(0, I)`.

use serde::{Deserialize, Serialize};

use crate::linalg::{std_normal_vec, Vector};
use crate::net::{AdamState, Grads, PosEmbedding, VelocityNet};
use crate::prior::{GaussianComponent, Prior};
use crate::toy::{Condition, LabeledSample};
use crate::{Error, Real, SeedRng};

/// One training tuple: interpolation time, endpoints, conditioning vector,
/// interpolated point, and regression target.
#[derive(Clone, Debug)]
pub struct PathSample<S> {
    pub t: S,
    pub x0: Vector<S>,
    pub x1: Vector<S>,
    pub cond_embed: Vector<S>,
    pub x_t: Vector<S>,
    pub u_target: Vector<S>,
}

/// How source points are drawn and paired with data points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingStrategy {
    /// Standard Gaussian source, independent pairing (CondOT paths).
    #[serde(rename = "condot")]
    Independent,
    /// Standard Gaussian source re-paired per batch by exact assignment.
    #[serde(rename = "batchot")]
    MinibatchOt,
    /// Source drawn from the condition's Gaussian component.
    #[serde(rename = "cpd")]
    ConditionalPrior,
}

impl CouplingStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            CouplingStrategy::Independent => "condot",
            CouplingStrategy::MinibatchOt => "batchot",
            CouplingStrategy::ConditionalPrior => "cpd",
        }
    }
}

impl std::str::FromStr for CouplingStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "condot" | "independent" => Ok(CouplingStrategy::Independent),
            "batchot" | "minibatch-ot" => Ok(CouplingStrategy::MinibatchOt),
            "cpd" | "conditional-prior" => Ok(CouplingStrategy::ConditionalPrior),
            other => Err(Error::Domain(format!("unknown coupling strategy '{other}'"))),
        }
    }
}

/// Training-loop configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub sigma_min: f64,
    pub seed: u64,
    pub strategy: CouplingStrategy,
    pub hidden_width: usize,
    pub hidden_depth: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 256,
            learning_rate: 1e-3,
            sigma_min: 1e-2,
            seed: 0,
            strategy: CouplingStrategy::ConditionalPrior,
            hidden_width: 256,
            hidden_depth: 4,
        }
    }
}

/// Conditional-prior interpolant applied to a standardized base point:
/// `[t sigma_min I + (1-t) sqrt_cov] x + t x1 + (1-t) mean`.
pub fn cpd_path<S: Real>(
    x0: &Vector<S>,
    x1: &Vector<S>,
    comp: &GaussianComponent<S>,
    t: S,
    sigma_min: S,
) -> Result<Vector<S>, Error> {
    if t < S::zero() || t > S::one() {
        return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
    }
    let one_mt = S::one() - t;
    let mut out = comp.sqrt_cov.matvec(x0).scale(one_mt);
    out.axpy(t * sigma_min, x0);
    out.axpy(t, x1);
    out.axpy(one_mt, &comp.mean);
    Ok(out)
}

/// Target field for the conditional-prior path, time-free in the base
/// coordinate: `(sigma_min I - sqrt_cov) x + x1 - mean`.
pub fn cpd_velocity<S: Real>(
    x: &Vector<S>,
    x1: &Vector<S>,
    comp: &GaussianComponent<S>,
    sigma_min: S,
) -> Vector<S> {
    let mut out = comp.sqrt_cov.matvec(x).scale(-S::one());
    out.axpy(sigma_min, x);
    out.axpy(S::one(), x1);
    out.axpy(-S::one(), &comp.mean);
    out
}

/// Straight-line path and its constant target: `x_t = (1-t)x0 + t x1`,
/// `u = x1 - x0`.
pub fn condot_pair_path<S: Real>(x0: &Vector<S>, x1: &Vector<S>, t: S) -> (Vector<S>, Vector<S>) {
    let u = x1.sub(x0);
    let mut x_t = x0.clone();
    x_t.axpy(t, &u);
    (x_t, u)
}

/// Exact minimum-cost assignment on squared Euclidean cost (Jonker-Volgenant
/// shortest augmenting path, O(n^3)). Among cost-equal assignments a 2-swap
/// pass canonicalizes toward the lexicographically smallest permutation.
pub fn hungarian_pairing<S: Real>(
    sources: &[Vector<S>],
    targets: &[Vector<S>],
) -> Result<Vec<usize>, Error> {
    let n = sources.len();
    if n != targets.len() {
        return Err(Error::DimMismatch(format!(
            "hungarian_pairing: {} sources vs {} targets",
            n,
            targets.len()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let cost = |i: usize, j: usize| -> f64 {
        let d = sources[i].sub(&targets[j]);
        d.dot(&d).to_f64()
    };

    // shortest augmenting path with potentials (1-based dummy row 0)
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut assignment = vec![0usize; n + 1]; // column -> row (1-based)

    for row in 1..=n {
        let mut links = vec![0usize; n + 1];
        let mut mins = vec![inf; n + 1];
        let mut visited = vec![false; n + 1];
        let mut marked_j = 0usize;
        assignment[0] = row;

        loop {
            visited[marked_j] = true;
            let marked_i = assignment[marked_j];
            let mut delta = inf;
            let mut next_j = 0usize;
            for j in 1..=n {
                if visited[j] {
                    continue;
                }
                let cur = cost(marked_i - 1, j - 1) - u[marked_i] - v[j];
                if cur < mins[j] {
                    mins[j] = cur;
                    links[j] = marked_j;
                }
                if mins[j] < delta {
                    delta = mins[j];
                    next_j = j;
                }
            }
            for j in 0..=n {
                if visited[j] {
                    u[assignment[j]] += delta;
                    v[j] -= delta;
                } else {
                    mins[j] -= delta;
                }
            }
            marked_j = next_j;
            if assignment[marked_j] == 0 {
                break;
            }
        }
        // augment along the alternating path
        while marked_j != 0 {
            let prev = links[marked_j];
            assignment[marked_j] = assignment[prev];
            marked_j = prev;
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[assignment[j] - 1] = j - 1;
    }

    // canonicalize ties: equal-cost 2-swaps toward lexicographic order
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            for j in (i + 1)..n {
                if perm[j] < perm[i] {
                    let before = cost(i, perm[i]) + cost(j, perm[j]);
                    let after = cost(i, perm[j]) + cost(j, perm[i]);
                    if (after - before).abs() <= 1e-12 * before.max(1.0) {
                        perm.swap(i, j);
                        changed = true;
                    }
                }
            }
        }
    }
    Ok(perm)
}

/// Frequency ladder top for the condition embedding. Condition means span
/// a few units and nearby conditions must stay nearby in embedding space
/// for the net to interpolate to unseen conditions, so the ladder is much
/// shorter than the time embedding's (whose input lives in [0, 1]).
pub const COND_EMBED_BASE: f64 = 2.0;

/// Encodes conditions into the net's conditioning vector: the positional
/// embedding of the condition's component mean.
pub struct CondEncoder<'a, S> {
    pub prior: &'a Prior<S>,
    pub embed: PosEmbedding,
}

impl<'a, S: Real> CondEncoder<'a, S> {
    pub fn new(prior: &'a Prior<S>) -> Self {
        CondEncoder {
            prior,
            embed: PosEmbedding {
                base: COND_EMBED_BASE,
                ..PosEmbedding::default()
            },
        }
    }

    pub fn dim(&self, data_dim: usize) -> usize {
        self.embed.output_dim(data_dim)
    }

    pub fn encode(&self, cond: &Condition) -> Result<Vector<S>, Error> {
        let comp = self.prior.component(cond)?;
        Ok(self.embed.embed(&comp.mean))
    }
}

/// Build one training batch for the given coupling strategy.
///
/// `(x1, c)` pairs are drawn uniformly with replacement; `t ~ U(0, 1)` per
/// element. The prior supplies both the conditional source components and
/// the conditioning embedding (the latter for every strategy).
pub fn make_batch<S: Real>(
    dataset: &[LabeledSample<S>],
    prior: &Prior<S>,
    strategy: CouplingStrategy,
    batch_size: usize,
    sigma_min: S,
    rng: &mut SeedRng,
) -> Result<Vec<PathSample<S>>, Error> {
    use rand::Rng as _;
    if dataset.is_empty() {
        return Err(Error::Empty("make_batch got an empty dataset".into()));
    }
    let d = dataset[0].x1.dim();
    let encoder = CondEncoder::new(prior);

    let picks: Vec<&LabeledSample<S>> = (0..batch_size)
        .map(|_| &dataset[rng.gen_range(0..dataset.len())])
        .collect();
    let times: Vec<S> = (0..batch_size).map(|_| S::c(rng.gen::<f64>())).collect();

    let mut out = Vec::with_capacity(batch_size);
    match strategy {
        CouplingStrategy::Independent | CouplingStrategy::MinibatchOt => {
            let mut x0s: Vec<Vector<S>> =
                (0..batch_size).map(|_| std_normal_vec(d, rng)).collect();
            if strategy == CouplingStrategy::MinibatchOt {
                let x1s: Vec<Vector<S>> = picks.iter().map(|s| s.x1.clone()).collect();
                let perm = hungarian_pairing(&x0s, &x1s)?;
                // re-pair: source i goes to target perm[i], so source for
                // target slot j is the one assigned to it
                let mut repaired = vec![Vector::zeros(d); batch_size];
                for (i, &j) in perm.iter().enumerate() {
                    repaired[j] = x0s[i].clone();
                }
                x0s = repaired;
            }
            for ((pick, x0), t) in picks.iter().zip(x0s).zip(times) {
                let (x_t, u_target) = condot_pair_path(&x0, &pick.x1, t);
                out.push(PathSample {
                    t,
                    x0,
                    x1: pick.x1.clone(),
                    cond_embed: encoder.encode(&pick.condition)?,
                    x_t,
                    u_target,
                });
            }
        }
        CouplingStrategy::ConditionalPrior => {
            for (pick, t) in picks.iter().zip(times) {
                let comp = prior.component(&pick.condition)?;
                let base = std_normal_vec(d, rng);
                let x_t = cpd_path(&base, &pick.x1, &comp, t, sigma_min)?;
                let u_target = cpd_velocity(&base, &pick.x1, &comp, sigma_min);
                // realized prior draw: the path's t = 0 point
                let x0 = cpd_path(&base, &pick.x1, &comp, S::zero(), sigma_min)?;
                out.push(PathSample {
                    t,
                    x0,
                    x1: pick.x1.clone(),
                    cond_embed: encoder.encode(&pick.condition)?,
                    x_t,
                    u_target,
                });
            }
        }
    }
    Ok(out)
}

/// Per-epoch training statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_ms: u128,
}

/// Train a velocity net by regressing the strategy's target field.
///
/// Deterministic given `cfg.seed`. Returns the net, the Adam state, and the
/// per-epoch loss history. Aborts with a diagnostic if the loss goes
/// non-finite.
pub fn train<S: Real>(
    dataset: &[LabeledSample<S>],
    prior: &Prior<S>,
    cfg: &TrainConfig,
) -> Result<(VelocityNet<S>, AdamState<S>, Vec<EpochStats>), Error> {
    if dataset.is_empty() {
        return Err(Error::Empty("train got an empty dataset".into()));
    }
    let d = dataset[0].x1.dim();
    let mut rng = crate::rng_from_seed(cfg.seed);
    let encoder = CondEncoder::new(prior);
    let cond_dim = encoder.dim(d);
    let mut net = VelocityNet::new(d, cond_dim, cfg.hidden_width, cfg.hidden_depth, &mut rng);
    let mut adam = AdamState::new(&net.mlp, S::c(cfg.learning_rate));

    let steps_per_epoch = (dataset.len() / cfg.batch_size).max(1);
    let sigma_min = S::c(cfg.sigma_min);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let started = std::time::Instant::now();
        let mut loss_acc = 0.0;
        for _ in 0..steps_per_epoch {
            let batch = make_batch(dataset, prior, cfg.strategy, cfg.batch_size, sigma_min, &mut rng)?;
            let (loss, grads): (S, Grads<S>) = net.loss_and_grad(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "training loss became non-finite at epoch {epoch}"
                )));
            }
            adam.step(&mut net.mlp, &grads);
            loss_acc += loss.to_f64();
        }
        history.push(EpochStats {
            epoch,
            mean_loss: loss_acc / steps_per_epoch as f64,
            wall_ms: started.elapsed().as_millis(),
        });
        log::debug!(
            "epoch {epoch}: mean loss {:.6}",
            history.last().unwrap().mean_loss
        );
    }
    Ok((net, adam, history))
}
