//! Condition-specific Gaussian source distributions.
//!
//! Two constructions: a discrete prior with per-class mean/covariance fitted
//! from training statistics, and a continuous prior whose component center
//! comes from a small mapper network applied to the condition embedding,
//! with isotropic covariance `sigma^2 I`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::{mvn_sample, psd_sqrt, sample_mean_cov, SymMatrix, Vector};
use crate::net::{AdamState, Mlp};
use crate::toy::{Condition, LabeledSample};
use crate::{Error, Real, SeedRng};

/// Default isotropic std for the continuous prior.
pub const DEFAULT_SIGMA: f64 = 0.7;

/// One Gaussian mixture component with its cached principal square root.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct GaussianComponent<S> {
    pub mean: Vector<S>,
    pub cov: SymMatrix<S>,
    pub sqrt_cov: SymMatrix<S>,
}

impl<S: Real> GaussianComponent<S> {
    pub fn new(mean: Vector<S>, cov: SymMatrix<S>) -> Result<Self, Error> {
        let sqrt_cov = psd_sqrt(&cov)?;
        Ok(GaussianComponent { mean, cov, sqrt_cov })
    }

    pub fn isotropic(mean: Vector<S>, sigma: S) -> Self {
        let d = mean.dim();
        GaussianComponent {
            cov: SymMatrix::scaled_identity(d, sigma * sigma),
            sqrt_cov: SymMatrix::scaled_identity(d, sigma),
            mean,
        }
    }

    pub fn sample(&self, rng: &mut SeedRng) -> Result<Vector<S>, Error> {
        mvn_sample(&self.mean, &self.sqrt_cov, rng)
    }
}

/// Per-class components plus empirical mixture weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct DiscretePrior<S> {
    /// Sorted by condition id for deterministic iteration.
    pub components: BTreeMap<String, GaussianComponent<S>>,
    /// Empirical class frequencies, keyed like `components`, summing to 1.
    pub weights: BTreeMap<String, S>,
}

impl<S: Real> DiscretePrior<S> {
    pub fn component(&self, id: &str) -> Result<&GaussianComponent<S>, Error> {
        self.components
            .get(id)
            .ok_or_else(|| Error::UnknownCondition(id.to_string()))
    }

    /// Draw a condition proportionally to the mixture weights, then a point
    /// from its component: the GMM marginal.
    pub fn sample_marginal(&self, rng: &mut SeedRng) -> Result<(Vector<S>, String), Error> {
        use rand::Rng as _;
        let roll = S::c(rng.gen::<f64>());
        let mut acc = S::zero();
        let mut chosen = None;
        for (id, &w) in &self.weights {
            acc += w;
            if roll < acc {
                chosen = Some(id.clone());
                break;
            }
        }
        // guard against accumulated rounding at roll ~= 1
        let id = chosen.unwrap_or_else(|| self.weights.keys().next_back().unwrap().clone());
        let x = self.components[&id].sample(rng)?;
        Ok((x, id))
    }
}

/// Fit per-class statistics and empirical frequencies from labeled data.
pub fn fit_discrete_prior<S: Real>(
    dataset: &[LabeledSample<S>],
) -> Result<DiscretePrior<S>, Error> {
    if dataset.is_empty() {
        return Err(Error::Empty("fit_discrete_prior got an empty dataset".into()));
    }
    let mut by_class: BTreeMap<String, Vec<Vector<S>>> = BTreeMap::new();
    for sample in dataset {
        let id = match &sample.condition {
            Condition::Class(id) => id.clone(),
            Condition::Angle(_) => {
                return Err(Error::Domain(
                    "fit_discrete_prior needs class-conditioned data; got angles".into(),
                ))
            }
        };
        by_class.entry(id).or_default().push(sample.x1.clone());
    }
    let total = S::c(dataset.len() as f64);
    let mut components = BTreeMap::new();
    let mut weights = BTreeMap::new();
    for (id, points) in by_class {
        let (mean, cov) = sample_mean_cov(&points)?;
        weights.insert(id.clone(), S::c(points.len() as f64) / total);
        components.insert(id, GaussianComponent::new(mean, cov)?);
    }
    Ok(DiscretePrior { components, weights })
}

/// Mapper network from condition-embedding space to data space.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct Mapper<S> {
    pub mlp: Mlp<S>,
    pub embed_dim: usize,
    pub data_dim: usize,
}

impl<S: Real> Mapper<S> {
    pub fn predict(&self, embed: &Vector<S>) -> Result<Vector<S>, Error> {
        if embed.dim() != self.embed_dim {
            return Err(Error::DimMismatch(format!(
                "mapper expects embedding dim {}, got {}",
                self.embed_dim,
                embed.dim()
            )));
        }
        Ok(Vector(self.mlp.forward(&embed.0)))
    }
}

/// Mapper training configuration: a 3-layer MLP trained to regress
/// `embedding -> E[x1 | c]` by Adam on mean squared error.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapperConfig {
    pub hidden_width: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MapperConfig {
    fn default() -> Self {
        MapperConfig {
            hidden_width: 64,
            steps: 3000,
            batch_size: 128,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Train the mapper on `(x1, embedding)` pairs; returns it with the final
/// minibatch loss.
pub fn train_mapper<S: Real>(
    dataset: &[(Vector<S>, Vector<S>)],
    cfg: &MapperConfig,
) -> Result<(Mapper<S>, f64), Error> {
    use rand::Rng as _;
    if dataset.is_empty() {
        return Err(Error::Empty("train_mapper got an empty dataset".into()));
    }
    let data_dim = dataset[0].0.dim();
    let embed_dim = dataset[0].1.dim();
    let mut rng = crate::rng_from_seed(cfg.seed);
    let widths = [embed_dim, cfg.hidden_width, cfg.hidden_width, data_dim];
    let mut mlp = Mlp::new(&widths, &mut rng);
    let mut adam = AdamState::new(&mlp, S::c(cfg.learning_rate));

    let mut last_loss = 0.0;
    for _ in 0..cfg.steps {
        let mut grads = mlp.zero_grads();
        let mut loss = S::zero();
        let inv_n = S::one() / S::c(cfg.batch_size as f64);
        for _ in 0..cfg.batch_size {
            let (x1, e_c) = &dataset[rng.gen_range(0..dataset.len())];
            let (out, acts) = mlp.forward_cached(&e_c.0);
            let mut grad_out = Vec::with_capacity(out.len());
            for (o, t) in out.iter().zip(&x1.0) {
                let r = *o - *t;
                loss += r * r * inv_n;
                grad_out.push(S::c(2.0) * r * inv_n);
            }
            mlp.backward(&acts, &grad_out, &mut grads);
        }
        if !loss.is_finite() {
            return Err(Error::Numerical("mapper loss became non-finite".into()));
        }
        adam.step(&mut mlp, &grads);
        last_loss = loss.to_f64();
    }
    Ok((
        Mapper {
            mlp,
            embed_dim,
            data_dim,
        },
        last_loss,
    ))
}

/// Mapper-backed continuous prior with isotropic covariance.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct ContinuousPrior<S> {
    pub mapper: Mapper<S>,
    pub sigma: S,
}

impl<S: Real> ContinuousPrior<S> {
    pub fn component(&self, embed: &Vector<S>) -> Result<GaussianComponent<S>, Error> {
        let mean = self.mapper.predict(embed)?;
        Ok(GaussianComponent::isotropic(mean, self.sigma))
    }
}

/// Either prior construction behind one sampling interface.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Real", tag = "mode", rename_all = "lowercase")]
pub enum Prior<S> {
    Discrete(DiscretePrior<S>),
    Continuous(ContinuousPrior<S>),
}

impl<S: Real> Prior<S> {
    /// The Gaussian component for a condition. Discrete priors look the id
    /// up; continuous priors run the mapper on the condition embedding.
    pub fn component(&self, cond: &Condition) -> Result<GaussianComponent<S>, Error> {
        match (self, cond) {
            (Prior::Discrete(p), Condition::Class(id)) => Ok(p.component(id)?.clone()),
            (Prior::Continuous(p), Condition::Angle(theta)) => {
                p.component(&crate::toy::angle_embedding(*theta))
            }
            (Prior::Discrete(_), Condition::Angle(_)) => Err(Error::Domain(
                "discrete prior cannot serve angle conditions".into(),
            )),
            (Prior::Continuous(_), Condition::Class(id)) => Err(Error::Domain(format!(
                "continuous prior cannot serve class id '{id}'"
            ))),
        }
    }

    pub fn sample(&self, cond: &Condition, rng: &mut SeedRng) -> Result<Vector<S>, Error> {
        self.component(cond)?.sample(rng)
    }
}

const PRIOR_FILE_VERSION: u32 = 1;

/// On-disk prior: components (or a mapper checkpoint reference) plus
/// mixture weights and the mode tag.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct PriorFile<S> {
    pub version: u32,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscretePrior<S>>,
    /// Path to the mapper checkpoint, relative to this file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapper_checkpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl<S: Real> PriorFile<S> {
    pub fn save_discrete(path: &Path, prior: &DiscretePrior<S>) -> Result<(), Error> {
        let file = PriorFile {
            version: PRIOR_FILE_VERSION,
            mode: "discrete".into(),
            discrete: Some(prior.clone()),
            mapper_checkpoint: None,
            sigma: None,
        };
        write_json(path, &file)
    }

    pub fn save_continuous(
        path: &Path,
        mapper: &Mapper<S>,
        sigma: f64,
        mapper_rel_path: &str,
    ) -> Result<(), Error> {
        let mapper_path = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(mapper_rel_path);
        write_json(&mapper_path, mapper)?;
        let file: PriorFile<S> = PriorFile {
            version: PRIOR_FILE_VERSION,
            mode: "continuous".into(),
            discrete: None,
            mapper_checkpoint: Some(mapper_rel_path.to_string()),
            sigma: Some(sigma),
        };
        write_json(path, &file)
    }

    /// Load a prior, resolving the mapper reference relative to `path`.
    pub fn load(path: &Path) -> Result<Prior<S>, Error> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let file: PriorFile<S> = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            row: 0,
            detail: e.to_string(),
        })?;
        if file.version != PRIOR_FILE_VERSION {
            return Err(Error::Format {
                path: path.display().to_string(),
                row: 0,
                detail: format!("unsupported prior file version {}", file.version),
            });
        }
        match file.mode.as_str() {
            "discrete" => Ok(Prior::Discrete(file.discrete.ok_or_else(|| Error::Format {
                path: path.display().to_string(),
                row: 0,
                detail: "discrete prior file without components".into(),
            })?)),
            "continuous" => {
                let rel = file.mapper_checkpoint.ok_or_else(|| Error::Format {
                    path: path.display().to_string(),
                    row: 0,
                    detail: "continuous prior file without mapper reference".into(),
                })?;
                let mapper_path = path.parent().unwrap_or_else(|| Path::new(".")).join(&rel);
                let text = std::fs::read_to_string(&mapper_path)
                    .map_err(|e| Error::io(mapper_path.display().to_string(), e))?;
                let mapper: Mapper<S> =
                    serde_json::from_str(&text).map_err(|e| Error::Format {
                        path: mapper_path.display().to_string(),
                        row: 0,
                        detail: e.to_string(),
                    })?;
                Ok(Prior::Continuous(ContinuousPrior {
                    mapper,
                    sigma: S::c(file.sigma.unwrap_or(DEFAULT_SIGMA)),
                }))
            }
            other => Err(Error::Format {
                path: path.display().to_string(),
                row: 0,
                detail: format!("unknown prior mode '{other}'"),
            }),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let text = serde_json::to_string(value)
        .map_err(|e| Error::Numerical(format!("serialize {}: {e}", path.display())))?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}
