//! Closed-form SKI error bounds and the calibration of their constants.
//!
//! Every bound is built from the elementwise interpolation error
//! `δ = K′ c^{2d} h³` with `h = 2D / m^{1/d}`, where `m` counts unpadded
//! lattice cells. `K′` and the smoothness constant `μ` are not known in
//! closed form and are measured on probe instances by [`calibrate`] before
//! any bound is compared with a measurement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::gp::{self, Mode};
use crate::interp::{self, GridSpec};
use crate::kernels::{self, Dataset, Hyperparams, KernelKind, Param, ParamBox};
use crate::{Error, Result};

/// Nonzero 1-D weights per stencil.
pub const L_STENCIL: usize = 4;
/// Safety factor applied to the probed interpolation constant.
pub const K_PRIME_SAFETY: f64 = 1.5;
/// Safety factor applied to the probed Hessian norm.
pub const MU_SAFETY: f64 = 1.1;
/// Points per axis of the θ-grid used to probe smoothness.
pub const MU_GRID: usize = 9;
/// Number of hyperparameters in the score.
const P: f64 = 2.0;

/// How each constant was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMeta {
    pub d: usize,
    pub probe_m_per_dim: Vec<usize>,
    /// Per kernel kind, the largest `error / (c^{2d} h³)` on each probe grid.
    pub k_prime_ratios: Vec<(String, Vec<f64>)>,
    /// Whether the ratios agree within 20% across probe grids, per kind.
    pub k_prime_stable: Vec<(String, bool)>,
    pub k_prime_safety: f64,
    pub mu_grid: usize,
    pub mu_max_hessian_norm: f64,
    pub mu_safety: f64,
}

/// Constants entering the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Weight-sum constant of the 1-D stencil.
    pub c: f64,
    /// Interpolation constant of the kernel.
    pub k_prime: f64,
    /// Interpolation constants of the partials, indexed like [`Param`].
    pub k_prime_partial: [f64; 2],
    /// Bound on the kernel partials.
    pub c_grad: f64,
    /// Bound on the kernel.
    pub m: f64,
    pub l: usize,
    /// Smoothness constant of the exact log-likelihood.
    pub mu: f64,
    pub calibration_meta: CalibrationMeta,
}

impl Constants {
    fn k_prime_for(&self, kind: KernelKind) -> f64 {
        match kind {
            KernelKind::Value => self.k_prime,
            KernelKind::Partial(p) => self.k_prime_partial[p.index()],
        }
    }

    fn sqrt_l(&self) -> f64 {
        (self.l as f64).sqrt()
    }
}

/// A theoretical bound next to the quantity it bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub theoretical: f64,
    pub measured: f64,
    pub satisfied: bool,
    pub margin_ratio: f64,
    pub provenance: String,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, theoretical: f64, measured: f64, provenance: impl Into<String>) -> Self {
        let satisfied = measured <= theoretical * (1.0 + 1e-9);
        let margin_ratio = if theoretical > 0.0 {
            measured / theoretical
        } else if measured == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Self { name: name.into(), theoretical, measured, satisfied, margin_ratio, provenance: provenance.into() }
    }
}

fn spacing(m_unpadded: usize, d: usize, domain_halfwidth: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    if m_unpadded < L_STENCIL.pow(d as u32) {
        return Err(Error::InvalidArgument(format!(
            "m = {m_unpadded} is below the minimum {} for d = {d}",
            L_STENCIL.pow(d as u32)
        )));
    }
    Ok(2.0 * domain_halfwidth / (m_unpadded as f64).powf(1.0 / d as f64))
}

fn delta_kind(m_unpadded: usize, d: usize, domain_halfwidth: f64, consts: &Constants, kind: KernelKind) -> Result<f64> {
    let h = spacing(m_unpadded, d, domain_halfwidth)?;
    Ok(consts.k_prime_for(kind) * consts.c.powi(2 * d as i32) * h.powi(3))
}

fn gamma_kind(n: usize, m: usize, d: usize, domain_halfwidth: f64, consts: &Constants, kind: KernelKind) -> Result<f64> {
    let delta = delta_kind(m, d, domain_halfwidth, consts, kind)?;
    Ok(n as f64 * (1.0 + consts.sqrt_l() * consts.c.powi(d as i32)) * delta)
}

/// Elementwise interpolation error bound `K′ c^{2d} h³`.
pub fn delta_interp(m_unpadded: usize, d: usize, domain_halfwidth: f64, consts: &Constants) -> Result<f64> {
    delta_kind(m_unpadded, d, domain_halfwidth, consts, KernelKind::Value)
}

/// Spectral bound `n (1 + √L c^d) δ` on `‖K - K̃‖₂`.
pub fn gamma(n: usize, m_unpadded: usize, d: usize, domain_halfwidth: f64, consts: &Constants) -> Result<f64> {
    gamma_kind(n, m_unpadded, d, domain_halfwidth, consts, KernelKind::Value)
}

/// The same bound for `‖∂K/∂θ - ∂K̃/∂θ‖₂`, with the partial's own `K′`.
pub fn gamma_partial(
    n: usize,
    m_unpadded: usize,
    d: usize,
    domain_halfwidth: f64,
    consts: &Constants,
    which: Param,
) -> Result<f64> {
    gamma_kind(n, m_unpadded, d, domain_halfwidth, consts, KernelKind::Partial(which))
}

/// Bound on `‖K_{·,X} - K̃_{·,X}‖₂` for `t` test and `n` training points.
pub fn cross_kernel_bound(
    n: usize,
    t: usize,
    m_unpadded: usize,
    d: usize,
    domain_halfwidth: f64,
    consts: &Constants,
) -> Result<f64> {
    Ok(gamma(t, m_unpadded, d, domain_halfwidth, consts)?.max(gamma(n, m_unpadded, d, domain_halfwidth, consts)?))
}

/// Inducing points sufficient for `‖K - K̃‖₂ ≤ ε`, rounded up to a perfect
/// `d`-th power (and to at least `4^d`).
pub fn inducing_count(n: usize, epsilon: f64, d: usize, domain_halfwidth: f64, consts: &Constants) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let c = consts.c;
    let base = (n as f64 / epsilon)
        * (1.0 + consts.sqrt_l() * c.powi(d as i32))
        * consts.k_prime
        * 8.0
        * c.powi(2 * d as i32)
        * domain_halfwidth.powi(3);
    let raw = base.powf(d as f64 / 3.0).ceil();
    if !raw.is_finite() || raw > (1u64 << 53) as f64 {
        return Err(Error::InvalidArgument(format!("inducing count {raw:e} is out of range")));
    }
    let raw = raw as usize;
    let mut per_dim = ((raw as f64).powf(1.0 / d as f64).floor() as usize).max(1);
    while per_dim.pow(d as u32) < raw {
        per_dim += 1;
    }
    while per_dim > 1 && (per_dim - 1).pow(d as u32) >= raw {
        per_dim -= 1;
    }
    Ok(per_dim.max(L_STENCIL).pow(d as u32))
}

/// Smallest `ε` compatible with linear-time SKI at sample size `n`.
pub fn linear_time_epsilon(
    n: usize,
    d: usize,
    domain_halfwidth: f64,
    consts: &Constants,
    c_regime: f64,
) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need n ≥ 3, got {n}")));
    }
    let c = consts.c;
    let e = 3.0 / d as f64;
    let lead = (1.0 + consts.sqrt_l() * c.powi(d as i32)) * consts.k_prime * 8.0 * c.powi(2 * d as i32)
        * domain_halfwidth.powi(3)
        / c_regime.powf(e);
    let n = n as f64;
    Ok(lead * n * n.ln().powf(e) / n.powf(e))
}

/// Bound on `‖∇𝓛 - ∇𝓛̃‖₂`.
#[allow(clippy::too_many_arguments)]
pub fn score_error_bound(
    n: usize,
    m_unpadded: usize,
    d: usize,
    domain_halfwidth: f64,
    consts: &Constants,
    y_norm: f64,
    sigma2: f64,
) -> Result<f64> {
    let g = gamma(n, m_unpadded, d, domain_halfwidth, consts)?;
    let mut worst = 0.0f64;
    for p in Param::ALL {
        let gp = gamma_partial(n, m_unpadded, d, domain_halfwidth, consts, p)?;
        worst = worst.max(gp + consts.c_grad * n as f64 * g + g * gp);
    }
    let s4 = sigma2 * sigma2;
    Ok(y_norm * P.sqrt() * worst / (2.0 * s4) + g / (2.0 * s4))
}

/// `γ/σ⁴`, bounding the change of the regularised inverse.
pub fn inverse_action_bound(gamma_val: f64, sigma2: f64) -> f64 {
    gamma_val / (sigma2 * sigma2)
}

/// `γ/σ²`, bounding the change of the log-determinant.
pub fn logdet_bound(gamma_val: f64, sigma2: f64) -> f64 {
    gamma_val / sigma2
}

/// `½(γ‖y‖²/σ⁴ + γ/σ²)`, bounding the change of the log-likelihood.
pub fn loglik_bound(gamma_val: f64, y_norm: f64, sigma2: f64) -> f64 {
    0.5 * (gamma_val * y_norm * y_norm / (sigma2 * sigma2) + gamma_val / sigma2)
}

/// Bound on `‖μ̃ - μ‖₂` over `t` test points.
#[allow(clippy::too_many_arguments)]
pub fn posterior_mean_bound(
    n: usize,
    t: usize,
    m_unpadded: usize,
    d: usize,
    domain_halfwidth: f64,
    consts: &Constants,
    y_norm: f64,
    sigma2: f64,
) -> Result<f64> {
    let gn = gamma(n, m_unpadded, d, domain_halfwidth, consts)?;
    let gt = gamma(t, m_unpadded, d, domain_halfwidth, consts)?;
    let op = ((t * n) as f64).sqrt() * consts.m * consts.c.powi(2 * d as i32);
    Ok((gt.max(gn) / sigma2 + op * gn / (sigma2 * sigma2)) * y_norm)
}

/// Bound on `‖Σ̃ - Σ‖₂` over `t` test points.
pub fn posterior_cov_bound(
    n: usize,
    t: usize,
    m_unpadded: usize,
    d: usize,
    domain_halfwidth: f64,
    consts: &Constants,
    sigma2: f64,
) -> Result<f64> {
    let gn = gamma(n, m_unpadded, d, domain_halfwidth, consts)?;
    let gt = gamma(t, m_unpadded, d, domain_halfwidth, consts)?;
    let mx = gt.max(gn);
    let tn = (t * n) as f64;
    let m = m_unpadded as f64;
    let c2d = consts.c.powi(2 * d as i32);
    let mm = consts.m;
    Ok(gt
        + tn.sqrt() * mm / sigma2 * mx
        + gn / (sigma2 * sigma2) * tn * m * c2d * mm * mm
        + tn.sqrt() * m * c2d * mm / sigma2 * mx)
}

/// Exponent `3/d - 1` of `m` in the decay of the covariance bound; the
/// bound shrinks with `m` only when it is positive.
pub fn posterior_cov_decay_exponent(d: usize) -> f64 {
    3.0 / d as f64 - 1.0
}

/// `2μ(𝓛* - 𝓛(θ₀))/K + ε_g²/(2μ)`, bounding the best squared gradient norm
/// after `K` inexact ascent steps of size `1/μ`.
pub fn ascent_certificate(mu: f64, l_star: f64, l_theta0: f64, k: usize, eps_g: f64) -> Result<f64> {
    if !(mu > 0.0) || k == 0 {
        return Err(Error::InvalidArgument(format!("need μ > 0 and K ≥ 1, got μ = {mu}, K = {k}")));
    }
    Ok(2.0 * mu * (l_star - l_theta0) / k as f64 + eps_g * eps_g / (2.0 * mu))
}

/// Where and how densely to probe the interpolation constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub d: usize,
    pub domain_halfwidth: f64,
    pub hp: Hyperparams,
    pub m_per_dim: Vec<usize>,
    pub anchors: usize,
    pub samples: usize,
    pub seed: u64,
}

impl ProbeSpec {
    /// Two probe grids, a handful of kernel slices and random evaluation points.
    pub fn standard(d: usize, domain_halfwidth: f64, hp: Hyperparams, seed: u64) -> Self {
        let (m_per_dim, anchors, samples) = match d {
            1 => (vec![12, 20], 16, 4000),
            2 => (vec![12, 16], 12, 1500),
            3 => (vec![12, 16], 8, 600),
            _ => (vec![6, 8], 6, 200),
        };
        Self { d, domain_halfwidth, hp, m_per_dim, anchors, samples, seed }
    }
}

fn uniform_point<R: Rng>(rng: &mut R, d: usize, half: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-half..=half)).collect()
}

/// Largest `|g(x) - k(x, x₀)| / (c^{2d} h³)` on each probe grid, where `g`
/// interpolates the slice `k(·, x₀)` from the lattice.
pub fn probe_interpolation_ratios(probe: &ProbeSpec, kind: KernelKind, c: f64) -> Result<Vec<f64>> {
    let d = probe.d;
    probe
        .m_per_dim
        .iter()
        .enumerate()
        .map(|(gi, &m)| {
            let grid = GridSpec::new(d, m, probe.domain_halfwidth)?;
            let mut rng = ChaCha20Rng::seed_from_u64(probe.seed ^ ((gi as u64 + 1) << 32) ^ kind_tag(kind));
            let mut worst = 0.0f64;
            for _ in 0..probe.anchors {
                let x0 = uniform_point(&mut rng, d, probe.domain_halfwidth);
                let f = |z: &[f64]| kernels::eval(z, &x0, &probe.hp, kind).expect("matching dimensions");
                for _ in 0..probe.samples {
                    let x = uniform_point(&mut rng, d, probe.domain_halfwidth);
                    let err = (interp::interpolate_fn(&grid, &x, f)? - f(&x)).abs();
                    worst = worst.max(err);
                }
            }
            let ratio = worst / (c.powi(2 * d as i32) * grid.h().powi(3));
            if !(ratio > 0.0 && ratio.is_finite()) {
                return Err(Error::Calibration(format!(
                    "degenerate probe for {} on a {m}-cell grid (ratio {ratio})",
                    kind.name()
                )));
            }
            Ok(ratio)
        })
        .collect()
}

fn kind_tag(kind: KernelKind) -> u64 {
    match kind {
        KernelKind::Value => 1,
        KernelKind::Partial(Param::SignalVariance) => 2,
        KernelKind::Partial(Param::Lengthscale) => 3,
    }
}

/// Hessian of the exact log-likelihood by central differences of the score.
pub fn hessian(data: &Dataset, hp: &Hyperparams) -> Result<[[f64; 2]; 2]> {
    let theta = hp.theta();
    let mut h = [[0.0; 2]; 2];
    for i in 0..2 {
        let step = 1e-4 * theta[i];
        let mut up = theta;
        let mut down = theta;
        up[i] += step;
        down[i] -= step;
        let su = gp::score(data, &hp.with_theta(up)?, Mode::Exact)?;
        let sd = gp::score(data, &hp.with_theta(down)?, Mode::Exact)?;
        for j in 0..2 {
            h[j][i] = (su.values[j] - sd.values[j]) / (2.0 * step);
        }
    }
    let off = 0.5 * (h[0][1] + h[1][0]);
    h[0][1] = off;
    h[1][0] = off;
    Ok(h)
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym2_eigenvalues(h: [[f64; 2]; 2]) -> [f64; 2] {
    let mean = 0.5 * (h[0][0] + h[1][1]);
    let rad = (0.25 * (h[0][0] - h[1][1]).powi(2) + h[0][1] * h[0][1]).sqrt();
    [mean - rad, mean + rad]
}

/// Largest Hessian spectral norm over a `MU_GRID × MU_GRID` grid of the box.
pub fn probe_smoothness(data: &Dataset, noise_variance: f64, bx: &ParamBox) -> Result<f64> {
    let mut worst = 0.0f64;
    for theta in bx.lattice(MU_GRID) {
        let hp = Hyperparams::new(theta[0], theta[1], noise_variance)?;
        let ev = sym2_eigenvalues(hessian(data, &hp)?);
        worst = worst.max(ev[0].abs()).max(ev[1].abs());
    }
    if !(worst > 0.0 && worst.is_finite()) {
        return Err(Error::Calibration(format!("degenerate smoothness probe ({worst})")));
    }
    Ok(worst)
}

/// Measure `c`, the three interpolation constants and `μ`, and collect the
/// closed-form kernel bounds.
pub fn calibrate(probe: &ProbeSpec, mu_data: &Dataset, bx: &ParamBox) -> Result<Constants> {
    let c = interp::empirical_c();
    let mut k = [0.0; 3];
    let mut ratios = Vec::new();
    let mut stable = Vec::new();
    for (slot, kind) in KernelKind::ALL.into_iter().enumerate() {
        let r = probe_interpolation_ratios(probe, kind, c)?;
        let hi = r.iter().cloned().fold(0.0, f64::max);
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        k[slot] = K_PRIME_SAFETY * hi;
        stable.push((kind.name().to_string(), hi <= 1.2 * lo));
        ratios.push((kind.name().to_string(), r));
    }
    let (m, c_grad) = kernels::kernel_constants(&probe.hp, probe.domain_halfwidth, probe.d);
    let mu_raw = probe_smoothness(mu_data, probe.hp.noise_variance, bx)?;
    Ok(Constants {
        c,
        k_prime: k[0],
        k_prime_partial: [k[1], k[2]],
        c_grad,
        m,
        l: L_STENCIL,
        mu: MU_SAFETY * mu_raw,
        calibration_meta: CalibrationMeta {
            d: probe.d,
            probe_m_per_dim: probe.m_per_dim.clone(),
            k_prime_ratios: ratios,
            k_prime_stable: stable,
            k_prime_safety: K_PRIME_SAFETY,
            mu_grid: MU_GRID,
            mu_max_hessian_norm: mu_raw,
            mu_safety: MU_SAFETY,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn unit_constants() -> Constants {
        Constants {
            c: 1.25,
            k_prime: 1.0,
            k_prime_partial: [1.0, 2.0],
            c_grad: 1.0,
            m: 1.0,
            l: 4,
            mu: 1.0,
            calibration_meta: CalibrationMeta {
                d: 1,
                probe_m_per_dim: vec![],
                k_prime_ratios: vec![],
                k_prime_stable: vec![],
                k_prime_safety: 1.0,
                mu_grid: 0,
                mu_max_hessian_norm: 1.0,
                mu_safety: 1.0,
            },
        }
    }

    #[test]
    fn delta_value() {
        let k = unit_constants();
        let d = delta_interp(64, 1, 1.0, &k).unwrap();
        assert!((d - 1.5625 * (2.0f64 / 64.0).powi(3)).abs() < 1e-18);
        assert!((d - 4.768e-5).abs() < 1e-8);
        assert!(delta_interp(3, 1, 1.0, &k).is_err());
        assert!(delta_interp(15, 2, 1.0, &k).is_err());
        let ratio = delta_interp(64, 1, 1.0, &k).unwrap() / delta_interp(128, 1, 1.0, &k).unwrap();
        assert!((ratio - 8.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_multiplier() {
        let k = unit_constants();
        let g = gamma(10, 64, 1, 1.0, &k).unwrap();
        let d = delta_interp(64, 1, 1.0, &k).unwrap();
        assert!((g - 35.0 * d).abs() < 1e-15);
    }

    #[test]
    fn zero_targets_score_bound() {
        let k = unit_constants();
        let g = gamma(20, 64, 1, 1.0, &k).unwrap();
        let e = score_error_bound(20, 64, 1, 1.0, &k, 0.0, 0.5).unwrap();
        assert!((e - g / (2.0 * 0.25)).abs() < 1e-18);
    }

    #[test]
    fn certificate_limits() {
        assert_eq!(ascent_certificate(2.0, 1.0, 0.0, 4, 0.0).unwrap(), 1.0);
        let floor = ascent_certificate(2.0, 1.0, 0.0, usize::MAX, 3.0).unwrap();
        assert!((floor - 9.0 / 4.0).abs() < 1e-12);
        assert!(ascent_certificate(0.0, 1.0, 0.0, 4, 0.0).is_err());
    }

    #[test]
    fn report_flags() {
        assert!(BoundReport::new("a", 1.0, 1.0 + 1e-12, "x").satisfied);
        assert!(!BoundReport::new("a", 1.0, 1.01, "x").satisfied);
        assert_eq!(BoundReport::new("a", 0.0, 0.0, "x").margin_ratio, 0.0);
    }

    #[test]
    fn decay_exponent_sign() {
        for d in 1..=5 {
            assert_eq!(posterior_cov_decay_exponent(d) > 0.0, d < 3);
        }
    }

    #[test]
    fn symmetric_eigenvalues() {
        let ev = sym2_eigenvalues([[2.0, 1.0], [1.0, 2.0]]);
        assert!((ev[0] - 1.0).abs() < 1e-15 && (ev[1] - 3.0).abs() < 1e-15);
    }
}
