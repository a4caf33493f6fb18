//! Projected gradient ascent on the SKI log-likelihood over a box of
//! hyperparameters, with the exact log-likelihood and gradient recorded
//! alongside every iterate.

use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::gp::{self, Mode};
use crate::interp::GridSpec;
use crate::kernels::{Dataset, Hyperparams, ParamBox};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub theta: Hyperparams,
    pub ski_loglik: f64,
    pub exact_loglik: f64,
    pub exact_grad_norm: f64,
    /// Whether the step that produced this iterate was clipped.
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub iterates: Vec<Iterate>,
    pub step_size: f64,
    pub param_box: ParamBox,
    /// Set when a numerical failure cut the run short.
    pub error: Option<String>,
}

impl Trajectory {
    pub fn clipping_activated(&self) -> bool {
        self.iterates.iter().any(|it| it.clipped)
    }

    /// Smallest `‖∇𝓛(θ_k)‖²` over the run.
    pub fn min_grad_norm_sq(&self) -> f64 {
        self.running_min().last().copied().unwrap_or(f64::INFINITY)
    }

    /// Running minimum of `‖∇𝓛(θ_k)‖²`.
    pub fn running_min(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.iterates
            .iter()
            .map(|it| {
                best = best.min(it.exact_grad_norm * it.exact_grad_norm);
                best
            })
            .collect()
    }
}

fn check_start(theta0: &Hyperparams, bx: &ParamBox) -> Result<()> {
    if !bx.contains(theta0.theta()) {
        return Err(Error::InvalidArgument(format!("start {:?} lies outside the box", theta0.theta())));
    }
    Ok(())
}

/// `K` steps of `θ ← clip(θ + η ∇𝓛̃(θ))`.
pub fn ascend(
    data: &Dataset,
    theta0: &Hyperparams,
    eta: f64,
    k: usize,
    grid: &GridSpec,
    bx: &ParamBox,
) -> Result<Trajectory> {
    check_start(theta0, bx)?;
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size {eta} must be nonnegative")));
    }
    let mut traj = Trajectory { iterates: Vec::with_capacity(k + 1), step_size: eta, param_box: *bx, error: None };
    let mut hp = *theta0;
    let mut clipped = false;
    for step in 0..=k {
        let record = gp::log_likelihood_and_score(data, &hp, Mode::Ski(grid)).and_then(|(ski_ll, ski_g)| {
            let (ll, g) = gp::log_likelihood_and_score(data, &hp, Mode::Exact)?;
            Ok((ski_ll, ski_g, ll, g))
        });
        let (ski_ll, ski_g, ll, g) = match record {
            Ok(r) => r,
            Err(e) => {
                traj.error = Some(e.to_string());
                break;
            }
        };
        traj.iterates.push(Iterate {
            theta: hp,
            ski_loglik: ski_ll,
            exact_loglik: ll,
            exact_grad_norm: g.norm(),
            clipped,
        });
        if step == k {
            break;
        }
        let t = hp.theta();
        let (next, c) = bx.clip([t[0] + eta * ski_g.values[0], t[1] + eta * ski_g.values[1]]);
        clipped = c;
        hp = hp.with_theta(next)?;
    }
    Ok(traj)
}

/// Upper anchor for `𝓛*`: the best exact log-likelihood on a `grid × grid`
/// lattice of the box, refined by `refine` projected exact-gradient steps of
/// size `1/μ`.
pub fn estimate_max_loglik(
    data: &Dataset,
    noise_variance: f64,
    bx: &ParamBox,
    mu: f64,
    grid: usize,
    refine: usize,
) -> Result<(Hyperparams, f64)> {
    let mut best: Option<(Hyperparams, f64)> = None;
    for theta in bx.lattice(grid) {
        let hp = Hyperparams::new(theta[0], theta[1], noise_variance)?;
        let ll = gp::log_likelihood(data, &hp, Mode::Exact)?;
        if best.as_ref().is_none_or(|(_, b)| ll > *b) {
            best = Some((hp, ll));
        }
    }
    let (mut hp, mut top) = best.ok_or_else(|| Error::InvalidArgument("empty θ-grid".into()))?;
    let mut cur = hp;
    for _ in 0..refine {
        let g = gp::score(data, &cur, Mode::Exact)?;
        let t = cur.theta();
        let (next, _) = bx.clip([t[0] + g.values[0] / mu, t[1] + g.values[1] / mu]);
        cur = cur.with_theta(next)?;
        let ll = gp::log_likelihood(data, &cur, Mode::Exact)?;
        if ll > top {
            top = ll;
            hp = cur;
        }
    }
    Ok((hp, top))
}

/// Which coordinates of `θ` move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Free {
    Both,
    /// Lengthscale held fixed; only `σ_f²` moves.
    SignalOnly,
}

impl Free {
    fn mask(self) -> [f64; 2] {
        match self {
            Free::Both => [1.0, 1.0],
            Free::SignalOnly => [1.0, 0.0],
        }
    }
}

/// Result of the one-step contraction diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contraction {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Local strong-concavity constant at `θ*`.
    pub mu: f64,
}

fn masked_gradient(data: &Dataset, hp: &Hyperparams, free: Free) -> Result<[f64; 2]> {
    let g = gp::score(data, hp, Mode::Exact)?;
    let m = free.mask();
    Ok([g.values[0] * m[0], g.values[1] * m[1]])
}

/// Locate a maximiser of the exact log-likelihood inside the box by a grid
/// search followed by Newton refinement.
pub fn locate_maximizer(data: &Dataset, start: &Hyperparams, bx: &ParamBox, free: Free) -> Result<Hyperparams> {
    let mut best = *start;
    let mut top = f64::NEG_INFINITY;
    for theta in bx.lattice(33) {
        let t = match free {
            Free::Both => theta,
            Free::SignalOnly => [theta[0], start.lengthscale],
        };
        let hp = start.with_theta(t)?;
        let ll = gp::log_likelihood(data, &hp, Mode::Exact)?;
        if ll > top {
            top = ll;
            best = hp;
        }
    }
    let mut cur = best;
    for _ in 0..50 {
        let g = masked_gradient(data, &cur, free)?;
        let h = bounds::hessian(data, &cur)?;
        let step = match free {
            Free::SignalOnly => [-g[0] / h[0][0], 0.0],
            Free::Both => {
                let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
                [
                    -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                    -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
                ]
            }
        };
        if !step.iter().all(|s| s.is_finite()) {
            break;
        }
        let t = cur.theta();
        let (next, _) = bx.clip([t[0] + step[0], t[1] + step[1]]);
        cur = cur.with_theta(next)?;
        if step.iter().zip(t).all(|(s, v)| s.abs() <= 1e-12 * v.abs()) {
            break;
        }
    }
    let g = masked_gradient(data, &cur, free)?;
    let gn = g[0].hypot(g[1]);
    let ll = gp::log_likelihood(data, &cur, Mode::Exact)?;
    let t = cur.theta();
    let on_edge = (0..2).any(|i| free.mask()[i] > 0.0 && (t[i] <= bx.lo[i] || t[i] >= bx.hi[i]));
    if on_edge || gn > 1e-6 * ll.abs().max(1.0) {
        return Err(Error::DiagnosticUnavailable(format!(
            "no interior stationary point found (gradient norm {gn:e}, θ = {t:?})"
        )));
    }
    Ok(cur)
}

/// One exact-gradient step from `θ₀`, compared with `(1 - μη)‖θ₀ - θ*‖`
/// where `μ` is the local strong-concavity constant at `θ*`.
pub fn one_step_contraction_check(
    data: &Dataset,
    theta_star: &Hyperparams,
    theta0: &Hyperparams,
    eta: f64,
    free: Free,
) -> Result<Contraction> {
    let h = bounds::hessian(data, theta_star)?;
    let mu = match free {
        Free::SignalOnly => -h[0][0],
        Free::Both => -bounds::sym2_eigenvalues(h)[1],
    };
    let g = masked_gradient(data, theta0, free)?;
    let s = theta_star.theta();
    let t0 = theta0.theta();
    let t1 = [t0[0] + eta * g[0], t0[1] + eta * g[1]];
    let dist = |a: [f64; 2]| (a[0] - s[0]).hypot(a[1] - s[1]);
    let lhs = dist(t1);
    let rhs = (1.0 - mu * eta) * dist(t0);
    Ok(Contraction { lhs, rhs, holds: lhs <= rhs, mu })
}
