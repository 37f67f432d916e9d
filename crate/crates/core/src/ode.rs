//! ODE integration of velocity fields from t = 0 to t = 1.
//!
//! Fixed-step Euler and classical RK4, plus an adaptive Dormand-Prince 5(4)
//! embedded pair with FSAL and a PI step controller. Every call to the field
//! is counted; for Dopri5 the count satisfies
//! `nfe == 6 * accepted + 6 * rejected + 1`.

use serde::{Deserialize, Serialize};

use crate::flow::CouplingStrategy;
use crate::linalg::{std_normal_vec, Vector};
use crate::net::VelocityNet;
use crate::prior::Prior;
use crate::toy::Condition;
use crate::{Error, Real, SeedRng};

/// Solver choice with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SolverSpec {
    Euler { n_steps: usize },
    Rk4 { n_steps: usize },
    Dopri5 {
        atol: f64,
        rtol: f64,
        h_init: f64,
        max_steps: usize,
    },
}

impl SolverSpec {
    pub fn dopri5_defaults() -> Self {
        SolverSpec::Dopri5 {
            atol: 1e-5,
            rtol: 1e-5,
            h_init: 0.05,
            max_steps: 100_000,
        }
    }
}

/// Integration output: endpoint, evaluation count, and optionally the full
/// trajectory and adaptive-step accounting.
#[derive(Clone, Debug)]
pub struct SolveResult<S> {
    pub endpoint: Vector<S>,
    pub nfe: usize,
    pub trajectory: Option<Vec<(S, Vector<S>)>>,
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrate `dx/dt = field(t, x)` over [0, 1].
pub fn integrate<S: Real, F>(
    mut field: F,
    x0: &Vector<S>,
    spec: &SolverSpec,
    record: bool,
) -> Result<SolveResult<S>, Error>
where
    F: FnMut(S, &Vector<S>) -> Vector<S>,
{
    let mut nfe = 0usize;
    let mut eval = |t: S, x: &Vector<S>, nfe: &mut usize| -> Result<Vector<S>, Error> {
        *nfe += 1;
        let out = field(t, x);
        if !out.is_finite() {
            return Err(Error::Numerical(format!(
                "field returned a non-finite value at t = {t}"
            )));
        }
        Ok(out)
    };

    let mut traj: Option<Vec<(S, Vector<S>)>> = record.then(|| vec![(S::zero(), x0.clone())]);

    match *spec {
        SolverSpec::Euler { n_steps } => {
            let h = S::one() / S::c(n_steps as f64);
            let mut x = x0.clone();
            for step in 0..n_steps {
                let t = S::c(step as f64) * h;
                let k = eval(t, &x, &mut nfe)?;
                x.axpy(h, &k);
                if let Some(traj) = traj.as_mut() {
                    traj.push((t + h, x.clone()));
                }
            }
            Ok(SolveResult {
                endpoint: x,
                nfe,
                trajectory: traj,
                accepted: n_steps,
                rejected: 0,
            })
        }
        SolverSpec::Rk4 { n_steps } => {
            let h = S::one() / S::c(n_steps as f64);
            let half = S::c(0.5);
            let sixth = S::one() / S::c(6.0);
            let mut x = x0.clone();
            for step in 0..n_steps {
                let t = S::c(step as f64) * h;
                let k1 = eval(t, &x, &mut nfe)?;
                let mut x2 = x.clone();
                x2.axpy(h * half, &k1);
                let k2 = eval(t + h * half, &x2, &mut nfe)?;
                let mut x3 = x.clone();
                x3.axpy(h * half, &k2);
                let k3 = eval(t + h * half, &x3, &mut nfe)?;
                let mut x4 = x.clone();
                x4.axpy(h, &k3);
                let k4 = eval(t + h, &x4, &mut nfe)?;
                let mut incr = k1;
                incr.axpy(S::c(2.0), &k2);
                incr.axpy(S::c(2.0), &k3);
                incr.axpy(S::one(), &k4);
                x.axpy(h * sixth, &incr);
                if let Some(traj) = traj.as_mut() {
                    traj.push((t + h, x.clone()));
                }
            }
            Ok(SolveResult {
                endpoint: x,
                nfe,
                trajectory: traj,
                accepted: n_steps,
                rejected: 0,
            })
        }
        SolverSpec::Dopri5 {
            atol,
            rtol,
            h_init,
            max_steps,
        } => dopri5(
            |t, x, n| eval(t, x, n),
            x0,
            S::c(atol),
            S::c(rtol),
            S::c(h_init),
            max_steps,
            traj,
            &mut nfe,
        ),
    }
}

// Dormand-Prince 5(4) Butcher tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// 5th-order weights equal the last row of A (FSAL); E is b5 - b4.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const FACTOR_MIN: f64 = 0.2;
const FACTOR_MAX: f64 = 10.0;
// PI controller exponents for a 5th-order error estimate
const PI_ALPHA: f64 = 0.7 / 5.0;
const PI_BETA: f64 = 0.4 / 5.0;

#[allow(clippy::too_many_arguments)]
fn dopri5<S: Real, F>(
    mut eval: F,
    x0: &Vector<S>,
    atol: S,
    rtol: S,
    h_init: S,
    max_steps: usize,
    mut traj: Option<Vec<(S, Vector<S>)>>,
    nfe: &mut usize,
) -> Result<SolveResult<S>, Error>
where
    F: FnMut(S, &Vector<S>, &mut usize) -> Result<Vector<S>, Error>,
{
    let d = x0.dim();
    let mut t = S::zero();
    let mut x = x0.clone();
    let mut h = h_init.min(S::one());
    let mut k1 = eval(t, &x, nfe)?;
    let mut err_prev = S::one();
    let mut accepted = 0usize;
    let mut rejected = 0usize;

    while t < S::one() {
        if accepted + rejected >= max_steps {
            return Err(Error::StepLimitExceeded(max_steps));
        }
        if t + h > S::one() {
            h = S::one() - t;
        }

        let mut ks: Vec<Vector<S>> = Vec::with_capacity(7);
        ks.push(k1.clone());
        for stage in 0..6 {
            let mut xs = x.clone();
            for (j, k) in ks.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    xs.axpy(h * S::c(a), k);
                }
            }
            ks.push(eval(t + h * S::c(C[stage]), &xs, nfe)?);
        }
        // 5th-order solution: stage 7 input equals it (FSAL)
        let mut x_new = x.clone();
        for (j, k) in ks.iter().take(6).enumerate() {
            let b = A[5][j];
            if b != 0.0 {
                x_new.axpy(h * S::c(b), k);
            }
        }

        // scaled RMS error norm
        let mut err_sq = S::zero();
        for i in 0..d {
            let mut e = S::zero();
            for (j, k) in ks.iter().enumerate() {
                let w = E[j];
                if w != 0.0 {
                    e += S::c(w) * k.0[i];
                }
            }
            e = e * h;
            let scale = atol + rtol * x.0[i].abs().max(x_new.0[i].abs());
            let r = e / scale;
            err_sq += r * r;
        }
        let err = (err_sq / S::c(d as f64)).sqrt();

        if err <= S::one() {
            t = t + h;
            x = x_new;
            k1 = ks.pop().unwrap(); // k7 becomes next k1
            accepted += 1;
            if let Some(traj) = traj.as_mut() {
                traj.push((t, x.clone()));
            }
            let e = err.max(S::c(1e-10));
            let factor = S::c(SAFETY) * e.powf(-S::c(PI_ALPHA)) * err_prev.powf(S::c(PI_BETA));
            h = h * factor.max(S::c(FACTOR_MIN)).min(S::c(FACTOR_MAX));
            err_prev = e;
        } else {
            rejected += 1;
            let factor = S::c(SAFETY) * err.powf(-S::c(PI_ALPHA));
            h = h * factor.max(S::c(FACTOR_MIN)).min(S::one());
        }
    }

    Ok(SolveResult {
        endpoint: x,
        nfe: *nfe,
        trajectory: traj,
        accepted,
        rejected,
    })
}

/// Draw a source point for the model's coupling and integrate the learned
/// field under the given condition.
pub fn sample_flow<S: Real>(
    net: &VelocityNet<S>,
    prior: &Prior<S>,
    strategy: CouplingStrategy,
    condition: &Condition,
    spec: &SolverSpec,
    rng: &mut SeedRng,
    record: bool,
) -> Result<(SolveResult<S>, Vector<S>), Error> {
    let encoder = crate::flow::CondEncoder::new(prior);
    let cond_embed = encoder.encode(condition)?;
    let x0 = match strategy {
        CouplingStrategy::ConditionalPrior => prior.sample(condition, rng)?,
        CouplingStrategy::Independent | CouplingStrategy::MinibatchOt => {
            std_normal_vec(net.data_dim, rng)
        }
    };
    let result = integrate(
        |t, x| net.forward(t, x, &cond_embed).expect("net dims fixed"),
        &x0,
        spec,
        record,
    )?;
    Ok((result, x0))
}

/// Lipschitz estimate and truncation-error bound curve from recorded
/// trajectories.
///
/// `L` is the largest observed `|f(t,x) - f(t,y)| / |x - y|` over pairs of
/// trajectory points at matching times; the local error per step of size `h`
/// is estimated by Richardson step doubling, and the bound curve follows
/// `max_tau / (h L) * (exp(L t) - 1)` (with the `L -> 0` limit
/// `max_tau * t / h`).
pub fn truncation_diagnostics<S: Real, F>(
    mut field: F,
    trajectories: &[Vec<(S, Vector<S>)>],
    h: S,
) -> Result<(S, Vec<(S, S)>), Error>
where
    F: FnMut(S, &Vector<S>) -> Vector<S>,
{
    if trajectories.len() < 2 {
        return Err(Error::Empty(
            "truncation_diagnostics needs at least two trajectories".into(),
        ));
    }

    // Lipschitz estimate from cross-trajectory pairs at matching indices
    let mut lip = S::zero();
    let steps = trajectories.iter().map(|t| t.len()).min().unwrap();
    for idx in 0..steps {
        for a in 0..trajectories.len() {
            for b in (a + 1)..trajectories.len() {
                let (ta, xa) = &trajectories[a][idx];
                let (_, xb) = &trajectories[b][idx];
                let dx = xa.dist(xb);
                if dx <= S::c(1e-12) {
                    continue;
                }
                let df = field(*ta, xa).dist(&field(*ta, xb));
                lip = lip.max(df / dx);
            }
        }
    }

    // local error by step doubling along each trajectory
    let mut max_tau = S::zero();
    let half = h * S::c(0.5);
    for traj in trajectories {
        for (t, x) in traj {
            let t = *t;
            if t + h > S::one() {
                continue;
            }
            let k = field(t, x);
            let mut full = x.clone();
            full.axpy(h, &k);
            let mut mid = x.clone();
            mid.axpy(half, &k);
            let k2 = field(t + half, &mid);
            let mut fine = mid;
            fine.axpy(half, &k2);
            // Euler local error ~ c h^2; difference of the two estimates is
            // ~ c h^2 / 2, so the full-step error is about twice it
            max_tau = max_tau.max(full.dist(&fine) * S::c(2.0));
        }
    }

    let base = &trajectories[0];
    let bound = base
        .iter()
        .map(|(t, _)| {
            let b = if lip > S::c(1e-12) {
                max_tau / (h * lip) * ((lip * *t).exp() - S::one())
            } else {
                max_tau * *t / h
            };
            (*t, b)
        })
        .collect();
    Ok((lip, bound))
}
