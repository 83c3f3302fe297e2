//! Evaluation quantities: RMSE, conjugacy error and its orbit mean, valid
//! prediction time, histogram densities and their KL divergence.

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{FlowMap, Trajectory, VectorField};
use crate::error::{Error, Result};
use crate::numerics::distance;
use crate::readout::{ClosedLoopModel, BLOWUP_LIMIT};

/// Floor applied to the reference density before taking logarithms.
pub const KL_FLOOR: f64 = 1e-12;

/// Default threshold for [`valid_prediction_time`], as a fraction of the
/// attractor scale.
pub const DEFAULT_VALID_FRACTION: f64 = 0.4;

/// Metrics of one realization. Quantities that were not computed, or that
/// are meaningless because the closed loop diverged, are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunMetrics {
    pub rmse: Option<f64>,
    pub mce: Option<f64>,
    pub kld: Option<f64>,
    pub valid_time: Option<f64>,
    pub diverged: bool,
}

fn check_same_shape(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            op: "trajectory length",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.dim() != b.dim() {
        return Err(Error::Shape {
            op: "trajectory dimension",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// `sqrt(<|y_t - ŷ_t|²>_T)`.
pub fn rmse(targets: &Trajectory, predictions: &Trajectory) -> Result<f64> {
    check_same_shape(targets, predictions)?;
    if targets.is_empty() {
        return Err(Error::InvalidArgument("rmse of an empty trajectory"));
    }
    let sse: f64 = targets
        .iter()
        .zip(predictions.iter())
        .map(|(y, p)| y.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    Ok(libm::sqrt(sse / targets.len() as f64))
}

/// `|φ(ĥ(r)) - ĥ(G(r))|`.
pub fn conjugacy_error<S, M>(phi: &FlowMap<S>, model: &M, r: &[f64]) -> Result<f64>
where
    S: VectorField,
    M: ClosedLoopModel + ?Sized,
{
    let y = model.observe(r)?;
    let pushed = phi.apply(&y)?;
    let next = model.advance(r)?;
    let pulled = model.observe(&next)?;
    Ok(distance(&pushed, &pulled))
}

/// Conjugacy error at `r_0, ..., r_{n-1}` along the orbit `r_{t+1} = G(r_t)`.
///
/// Outputs larger than [`BLOWUP_LIMIT`] abort with [`Error::Diverged`].
pub fn conjugacy_errors<S, M>(phi: &FlowMap<S>, model: &M, r0: &[f64], n_steps: usize) -> Result<Vec<f64>>
where
    S: VectorField,
    M: ClosedLoopModel + ?Sized,
{
    if r0.len() != model.state_dim() {
        return Err(Error::Shape {
            op: "conjugacy_errors",
            expected: model.state_dim(),
            got: r0.len(),
        });
    }
    let mut errors = Vec::with_capacity(n_steps);
    let mut r = r0.to_vec();
    let mut y = model.observe(&r)?;
    for step in 0..n_steps {
        let magnitude = y.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if !(magnitude <= BLOWUP_LIMIT) {
            return Err(Error::Diverged { step, magnitude });
        }
        let pushed = phi.apply(&y)?;
        r = model.advance(&r)?;
        let next_y = model.observe(&r)?;
        errors.push(distance(&pushed, &next_y));
        y = next_y;
    }
    Ok(errors)
}

/// Mean conjugacy error over `n_steps` orbit points starting at `r0`.
pub fn mce<S, M>(phi: &FlowMap<S>, model: &M, r0: &[f64], n_steps: usize) -> Result<f64>
where
    S: VectorField,
    M: ClosedLoopModel + ?Sized,
{
    if n_steps == 0 {
        return Err(Error::InvalidArgument("mce needs at least one step"));
    }
    let errors = conjugacy_errors(phi, model, r0, n_steps)?;
    Ok(errors.iter().sum::<f64>() / n_steps as f64)
}

/// Normalized histogram on `n_bins` uniform bins over `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Histogram {
    lo: f64,
    hi: f64,
    mass: Vec<f64>,
}

impl Histogram {
    /// Builds from explicit non-negative bin weights, normalizing them.
    pub fn from_weights(lo: f64, hi: f64, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || !(hi > lo) {
            return Err(Error::InvalidArgument("histogram needs bins and hi > lo"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("histogram weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("histogram weights sum to zero"));
        }
        Ok(Self {
            lo,
            hi,
            mass: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn n_bins(&self) -> usize {
        self.mass.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.mass.len() as f64
    }

    /// Probability of each bin.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Density values `mass / bin_width`.
    pub fn density(&self) -> Vec<f64> {
        let w = self.bin_width();
        self.mass.iter().map(|m| m / w).collect()
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.bin_width()
    }

    fn same_binning(&self, other: &Histogram) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.mass.len() == other.mass.len()
    }
}

/// Histogram of `samples`. Values outside `[lo, hi]` are clipped into the
/// first or last bin; `hi` itself belongs to the last bin.
pub fn histogram_pdf(samples: &[f64], lo: f64, hi: f64, n_bins: usize) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("histogram of zero samples"));
    }
    if n_bins == 0 || !(hi > lo) {
        return Err(Error::InvalidArgument("histogram needs n_bins >= 1 and hi > lo"));
    }
    let mut counts = vec![0u64; n_bins];
    let scale = n_bins as f64 / (hi - lo);
    for &x in samples {
        let pos = (x - lo) * scale;
        // NaN falls through to bin 0 like -inf
        let bin = if pos >= n_bins as f64 {
            n_bins - 1
        } else if pos > 0.0 {
            pos as usize
        } else {
            0
        };
        counts[bin] += 1;
    }
    let total = samples.len() as f64;
    Ok(Histogram {
        lo,
        hi,
        mass: counts.into_iter().map(|c| c as f64 / total).collect(),
    })
}

/// `D_KL(p || q) = Σ p_i ln(p_i / q_i)` over bins with `p_i > 0`.
///
/// If `q` falls below [`KL_FLOOR`] anywhere `p` has mass, every bin of `q`
/// is floored at [`KL_FLOOR`] and `q` is renormalized before the sum, which
/// keeps the result finite (at most about `ln(1 / KL_FLOOR)`). Otherwise `q`
/// is used as is, so `D_KL(p || p)` is exactly zero.
pub fn kl_divergence(p: &Histogram, q: &Histogram) -> Result<f64> {
    if !p.same_binning(q) {
        return Err(Error::BinningMismatch);
    }
    let needs_floor = p
        .mass
        .iter()
        .zip(&q.mass)
        .any(|(pi, qi)| *pi > 0.0 && *qi < KL_FLOOR);
    let (q_mass, z): (Vec<f64>, f64) = if needs_floor {
        let floored: Vec<f64> = q.mass.iter().map(|m| m.max(KL_FLOOR)).collect();
        let z = floored.iter().sum();
        (floored, z)
    } else {
        (q.mass.clone(), 1.0)
    };
    Ok(p
        .mass
        .iter()
        .zip(&q_mass)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * libm::log(pi * z / qi))
        .sum())
}

/// Time-mean distance of the samples from their mean.
pub fn attractor_scale(traj: &Trajectory) -> f64 {
    if traj.is_empty() {
        return 0.0;
    }
    let n = traj.len() as f64;
    let mut mean = vec![0.0; traj.dim()];
    for x in traj.iter() {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    traj.iter().map(|x| distance(x, &mean)).sum::<f64>() / n
}

/// First time `t · τ` at which `|y_t - ŷ_t|` exceeds `threshold_fraction`
/// times the [`attractor_scale`] of `targets`; the full horizon `len · τ`
/// if it never does.
pub fn valid_prediction_time(
    targets: &Trajectory,
    predictions: &Trajectory,
    threshold_fraction: f64,
) -> Result<f64> {
    check_same_shape(targets, predictions)?;
    if !(threshold_fraction > 0.0) {
        return Err(Error::InvalidArgument("threshold fraction must be positive"));
    }
    let threshold = threshold_fraction * attractor_scale(targets);
    let first = targets
        .iter()
        .zip(predictions.iter())
        .position(|(y, p)| !(distance(y, p) <= threshold));
    Ok(first.unwrap_or(targets.len()) as f64 * targets.tau())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{generate_trajectory, Lorenz};
    use crate::numerics::Rng;

    fn traj(tau: f64, rows: &[&[f64]]) -> Trajectory {
        Trajectory::from_samples(tau, rows).unwrap()
    }

    #[test]
    fn rmse_values() {
        let a = traj(0.1, &[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let b = traj(0.1, &[&[2.0, 2.0, 3.0], &[5.0, 5.0, 6.0]]);
        assert!((rmse(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        let y = traj(1.0, &[&[0.0], &[0.0]]);
        let p = traj(1.0, &[&[3.0], &[4.0]]);
        assert!((rmse(&y, &p).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((12.5f64.sqrt() - 3.5355).abs() < 1e-4);
        assert!(rmse(&a, &y).is_err());
    }

    #[test]
    fn histogram_delta_and_mass() {
        let h = histogram_pdf(&[0.3; 50], -1.0, 1.0, 10).unwrap();
        assert_eq!(h.mass()[6], 1.0);
        assert_eq!(h.mass().iter().filter(|m| **m > 0.0).count(), 1);

        let h = histogram_pdf(&[-5.0, 5.0, 1.0, -1.0, f64::INFINITY], -1.0, 1.0, 4).unwrap();
        assert_eq!(h.mass(), &[0.4, 0.0, 0.0, 0.6]);
        assert!(histogram_pdf(&[], 0.0, 1.0, 3).is_err());
        assert!(histogram_pdf(&[0.5], 1.0, 1.0, 3).is_err());
        assert!(histogram_pdf(&[0.5], 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn uniform_samples_fill_bins_evenly() {
        let mut rng = Rng::new(17);
        let samples: Vec<f64> = (0..1_000_000).map(|_| rng.uniform(-25.0, 25.0)).collect();
        let h = histogram_pdf(&samples, -25.0, 25.0, 100).unwrap();
        // binomial std of one bin is sqrt(0.01 * 0.99 / 1e6) ≈ 1e-4
        for m in h.mass() {
            assert!((m - 0.01).abs() < 0.001, "{m}");
        }
        assert!((h.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kl_values() {
        let p = Histogram::from_weights(0.0, 1.0, vec![0.5, 0.5]).unwrap();
        let q = Histogram::from_weights(0.0, 1.0, vec![0.25, 0.75]).unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl_divergence(&p, &q).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.1438).abs() < 1e-4);

        let other = Histogram::from_weights(0.0, 2.0, vec![0.5, 0.5]).unwrap();
        assert_eq!(kl_divergence(&p, &other), Err(Error::BinningMismatch));
    }

    #[test]
    fn kl_with_missing_support_is_bounded() {
        let p = Histogram::from_weights(0.0, 1.0, vec![1.0, 0.0]).unwrap();
        let q = Histogram::from_weights(0.0, 1.0, vec![0.0, 1.0]).unwrap();
        let d = kl_divergence(&p, &q).unwrap();
        assert!(d > 20.0 && d <= (1.0 / KL_FLOOR).ln() + 1e-9, "{d}");
    }

    #[test]
    fn valid_time_edges() {
        let m = FlowMap::new(Lorenz::default(), 0.02, 0.01).unwrap();
        let y = generate_trajectory(&m, &[1.0, 1.0, 1.0], 10.0, 200).unwrap();
        assert!((valid_prediction_time(&y, &y, 0.4).unwrap() - 200.0 * 0.02).abs() < 1e-12);
        let zeros = Trajectory::from_flat(0.02, 3, vec![0.0; 600]).unwrap();
        assert!(valid_prediction_time(&y, &zeros, 0.4).unwrap() <= 3.0 * 0.02);
        assert!(valid_prediction_time(&y, &y, 0.0).is_err());
    }

    /// Identity readout on a 3-dimensional "reservoir" whose map is the flow.
    struct ExactConjugate(FlowMap<Lorenz>);

    impl ClosedLoopModel for ExactConjugate {
        fn state_dim(&self) -> usize {
            3
        }
        fn observe(&self, r: &[f64]) -> Result<Vec<f64>> {
            Ok(r.to_vec())
        }
        fn advance(&self, r: &[f64]) -> Result<Vec<f64>> {
            self.0.apply(r)
        }
    }

    #[test]
    fn exact_conjugacy_has_zero_error() {
        let phi = FlowMap::new(Lorenz::default(), 0.02, 0.01).unwrap();
        let model = ExactConjugate(phi.clone());
        let r = [1.0, 2.0, 20.0];
        assert_eq!(conjugacy_error(&phi, &model, &r).unwrap(), 0.0);
        assert!(mce(&phi, &model, &r, 500).unwrap() < 1e-10);
        assert!(mce(&phi, &model, &r, 0).is_err());
    }

    /// Observes a constant offset from the flow, so every error is |offset|.
    struct ConstantOffset(FlowMap<Lorenz>, f64);

    impl ClosedLoopModel for ConstantOffset {
        fn state_dim(&self) -> usize {
            3
        }
        fn observe(&self, r: &[f64]) -> Result<Vec<f64>> {
            Ok(r.to_vec())
        }
        fn advance(&self, r: &[f64]) -> Result<Vec<f64>> {
            let mut x = self.0.apply(r)?;
            x[0] += self.1;
            Ok(x)
        }
    }

    #[test]
    fn mce_averages_constant_error() {
        let phi = FlowMap::new(Lorenz::default(), 0.02, 0.01).unwrap();
        let model = ConstantOffset(phi.clone(), 0.25);
        let e = mce(&phi, &model, &[1.0, 2.0, 20.0], 100).unwrap();
        assert!((e - 0.25).abs() < 1e-12, "{e}");
    }
}
