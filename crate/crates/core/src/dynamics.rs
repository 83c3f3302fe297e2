//! Target flows: vector fields, RK4, time-τ maps, trajectories and the
//! maximal Lyapunov exponent.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{distance, Matrix};

/// Default internal RK4 step.
pub const DEFAULT_STEP: f64 = 0.01;

/// Autonomous vector field `ẋ = f(x)` on ℝ^K.
pub trait VectorField {
    fn dim(&self) -> usize;

    /// Writes `f(x)` into `out` (both of length [`dim`](Self::dim)).
    fn eval(&self, x: &[f64], out: &mut [f64]);
}

impl<F: VectorField + ?Sized> VectorField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (**self).eval(x, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Lorenz {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl Default for Lorenz {
    /// The classical chaotic parameters σ = 10, ρ = 28, β = 8/3.
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
        }
    }
}

impl Lorenz {
    /// The two non-trivial equilibria `(±c, ±c, ρ-1)` with `c = sqrt(β(ρ-1))`.
    pub fn wing_equilibria(&self) -> [[f64; 3]; 2] {
        let c = libm::sqrt(self.beta * (self.rho - 1.0));
        [[c, c, self.rho - 1.0], [-c, -c, self.rho - 1.0]]
    }
}

impl VectorField for Lorenz {
    fn dim(&self) -> usize {
        3
    }

    #[inline]
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * (x[1] - x[0]);
        out[1] = self.rho * x[0] - x[1] - x[0] * x[2];
        out[2] = x[0] * x[1] - self.beta * x[2];
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rossler {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for Rossler {
    /// a = b = 0.2, c = 5.7.
    fn default() -> Self {
        Self {
            a: 0.2,
            b: 0.2,
            c: 5.7,
        }
    }
}

impl Rossler {
    /// Both equilibria. With `x = a z`, `y = -z` they solve
    /// `a z² - c z + b = 0`.
    pub fn equilibria(&self) -> [[f64; 3]; 2] {
        let disc = libm::sqrt(self.c * self.c - 4.0 * self.a * self.b);
        let z1 = (self.c - disc) / (2.0 * self.a);
        let z2 = (self.c + disc) / (2.0 * self.a);
        [[self.a * z1, -z1, z1], [self.a * z2, -z2, z2]]
    }
}

impl VectorField for Rossler {
    fn dim(&self) -> usize {
        3
    }

    #[inline]
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -x[1] - x[2];
        out[1] = x[0] + self.a * x[1];
        out[2] = self.b + x[2] * (x[0] - self.c);
    }
}

/// Built-in targets, selectable at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetSystem {
    Lorenz(Lorenz),
    Rossler(Rossler),
}

impl VectorField for TargetSystem {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            TargetSystem::Lorenz(s) => s.eval(x, out),
            TargetSystem::Rossler(s) => s.eval(x, out),
        }
    }
}

/// Scratch space for [`rk4_step_into`].
#[derive(Debug, Clone)]
pub struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }
}

/// One classical RK4 step, in place.
pub fn rk4_step_into<S: VectorField>(
    system: &S,
    x: &mut [f64],
    h: f64,
    s: &mut Rk4Scratch,
) -> Result<()> {
    let half = 0.5 * h;
    system.eval(x, &mut s.k1);
    for i in 0..x.len() {
        s.tmp[i] = x[i] + half * s.k1[i];
    }
    system.eval(&s.tmp, &mut s.k2);
    for i in 0..x.len() {
        s.tmp[i] = x[i] + half * s.k2[i];
    }
    system.eval(&s.tmp, &mut s.k3);
    for i in 0..x.len() {
        s.tmp[i] = x[i] + h * s.k3[i];
    }
    system.eval(&s.tmp, &mut s.k4);
    let sixth = h / 6.0;
    for i in 0..x.len() {
        x[i] += sixth * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
    }
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::BlowUp)
    }
}

/// `x + (h/6)(k1 + 2k2 + 2k3 + k4)`.
pub fn rk4_step<S: VectorField>(system: &S, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("RK4 step must be positive"));
    }
    check_dim(system, x)?;
    let mut out = x.to_vec();
    rk4_step_into(system, &mut out, h, &mut Rk4Scratch::new(x.len()))?;
    Ok(out)
}

fn check_dim<S: VectorField>(system: &S, x: &[f64]) -> Result<()> {
    if x.len() != system.dim() {
        return Err(Error::Shape {
            op: "vector field",
            expected: system.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Integer step count for covering `duration` with steps of `h`.
fn step_count(duration: f64, h: f64) -> Result<usize> {
    let steps = libm::round(duration / h);
    if (steps * h - duration).abs() > 1e-9 * duration.max(h) {
        return Err(Error::InvalidArgument("duration must be an integer multiple of the RK4 step"));
    }
    Ok(steps as usize)
}

/// Time-τ map φ, evaluated by `substeps` RK4 steps of size `h`.
#[derive(Debug, Clone)]
pub struct FlowMap<S> {
    system: S,
    tau: f64,
    h: f64,
    substeps: usize,
}

impl<S: VectorField> FlowMap<S> {
    /// Fails unless `tau / h` is an integer (to 1e-9 relative).
    pub fn new(system: S, tau: f64, h: f64) -> Result<Self> {
        if !(tau > 0.0 && h > 0.0) {
            return Err(Error::InvalidArgument("tau and h must be positive"));
        }
        let substeps = step_count(tau, h)?;
        if substeps == 0 {
            return Err(Error::InvalidArgument("tau must be at least one RK4 step"));
        }
        Ok(Self {
            system,
            tau,
            h,
            substeps,
        })
    }

    pub fn with_default_step(system: S, tau: f64) -> Result<Self> {
        Self::new(system, tau, DEFAULT_STEP)
    }

    pub fn system(&self) -> &S {
        &self.system
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// φ^τ(x).
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(&self.system, x)?;
        let mut out = x.to_vec();
        self.apply_in_place(&mut out, &mut Rk4Scratch::new(x.len()))?;
        Ok(out)
    }

    pub fn apply_in_place(&self, x: &mut [f64], scratch: &mut Rk4Scratch) -> Result<()> {
        for _ in 0..self.substeps {
            rk4_step_into(&self.system, x, self.h, scratch)?;
        }
        Ok(())
    }

    /// Integrates for `duration` (a multiple of the internal step).
    pub fn advance(&self, x: &[f64], duration: f64) -> Result<Vec<f64>> {
        check_dim(&self.system, x)?;
        let mut out = x.to_vec();
        if duration == 0.0 {
            return Ok(out);
        }
        let steps = step_count(duration, self.h)?;
        let mut scratch = Rk4Scratch::new(x.len());
        for _ in 0..steps {
            rk4_step_into(&self.system, &mut out, self.h, &mut scratch)?;
        }
        Ok(out)
    }
}

/// Equally spaced samples of a K-dimensional signal, stored row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    tau: f64,
    dim: usize,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn new(tau: f64, dim: usize) -> Self {
        Self {
            tau,
            dim,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(tau: f64, dim: usize, len: usize) -> Self {
        Self {
            tau,
            dim,
            data: Vec::with_capacity(dim * len),
        }
    }

    pub fn from_flat(tau: f64, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::InvalidArgument("flat trajectory length must be a multiple of dim"));
        }
        Ok(Self { tau, dim, data })
    }

    pub fn from_samples<R: AsRef<[f64]>>(tau: f64, samples: &[R]) -> Result<Self> {
        let dim = samples.first().map_or(0, |s| s.as_ref().len());
        let mut t = Self::with_capacity(tau, dim, samples.len());
        for s in samples {
            t.push(s.as_ref())?;
        }
        Ok(t)
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape {
                op: "Trajectory::push",
                expected: self.dim,
                got: x.len(),
            });
        }
        self.data.extend_from_slice(x);
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Time span covered, `len × τ`.
    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.tau
    }

    pub fn get(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// One scalar coordinate over time.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.iter().map(|x| x[c]).collect()
    }

    /// One row per sample.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::new(self.len(), self.dim, self.data.clone()).expect("trajectory is rectangular")
    }

    /// Samples `start..end` as a new trajectory.
    pub fn slice(&self, start: usize, end: usize) -> Trajectory {
        Trajectory {
            tau: self.tau,
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        }
    }
}

/// Integrates `discard_time` from `x0`, then records `n_samples` states spaced
/// by the map's τ. Sample `t + 1` is exactly `map.apply(sample t)`.
pub fn generate_trajectory<S: VectorField>(
    map: &FlowMap<S>,
    x0: &[f64],
    discard_time: f64,
    n_samples: usize,
) -> Result<Trajectory> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1"));
    }
    if !(discard_time >= 0.0) {
        return Err(Error::InvalidArgument("discard_time must be >= 0"));
    }
    let mut x = map.advance(x0, discard_time)?;
    let mut traj = Trajectory::with_capacity(map.tau(), x.len(), n_samples);
    let mut scratch = Rk4Scratch::new(x.len());
    traj.push(&x)?;
    for _ in 1..n_samples {
        map.apply_in_place(&mut x, &mut scratch)?;
        traj.push(&x)?;
    }
    Ok(traj)
}

/// Benettin two-trajectory settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovOptions {
    /// RK4 step.
    pub h: f64,
    /// Time between renormalizations.
    pub renormalize_every: f64,
    /// Separation restored after every renormalization.
    pub initial_separation: f64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            h: DEFAULT_STEP,
            renormalize_every: 0.1,
            initial_separation: 1e-8,
        }
    }
}

/// Maximal Lyapunov exponent with [`LyapunovOptions::default`].
pub fn max_lyapunov<S: VectorField>(system: &S, x0: &[f64], horizon: f64) -> Result<f64> {
    max_lyapunov_with(system, x0, horizon, &LyapunovOptions::default())
}

/// Benettin's method: a reference and a perturbed trajectory are integrated
/// side by side, and every `renormalize_every` time units the separation is
/// logged and pulled back to `initial_separation` along its current
/// direction. Returns the mean log stretching per unit time.
///
/// `x0` should already lie on the attractor; no transient is discarded here.
pub fn max_lyapunov_with<S: VectorField>(
    system: &S,
    x0: &[f64],
    horizon: f64,
    opts: &LyapunovOptions,
) -> Result<f64> {
    check_dim(system, x0)?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive"));
    }
    let per_interval = step_count(opts.renormalize_every, opts.h)?.max(1);
    let intervals = libm::round(horizon / (per_interval as f64 * opts.h)).max(1.0) as usize;
    let d0 = opts.initial_separation;

    let dim = x0.len();
    let mut x = x0.to_vec();
    let offset = d0 / libm::sqrt(dim as f64);
    let mut y: Vec<f64> = x0.iter().map(|v| v + offset).collect();
    let mut sx = Rk4Scratch::new(dim);
    let mut sy = Rk4Scratch::new(dim);

    let mut log_sum = 0.0;
    for _ in 0..intervals {
        for _ in 0..per_interval {
            rk4_step_into(system, &mut x, opts.h, &mut sx)?;
            rk4_step_into(system, &mut y, opts.h, &mut sy)?;
        }
        let d = distance(&x, &y);
        if d == 0.0 || !d.is_finite() {
            return Err(Error::BlowUp);
        }
        log_sum += libm::log(d / d0);
        let k = d0 / d;
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = xi + (*yi - xi) * k;
        }
    }
    Ok(log_sum / (intervals as f64 * per_interval as f64 * opts.h))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ẋ = a x in one dimension.
    struct Exponential(f64);

    impl VectorField for Exponential {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &[f64], out: &mut [f64]) {
            out[0] = self.0 * x[0];
        }
    }

    fn f(s: &impl VectorField, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        s.eval(x, &mut out);
        out
    }

    #[test]
    fn lorenz_vector_field_values() {
        let l = Lorenz::default();
        assert_eq!(f(&l, &[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        let v = f(&l, &[1.0, 1.0, 1.0]);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 26.0);
        assert!((v[2] - (1.0 - 8.0 / 3.0)).abs() < 1e-15);
        let c = 72f64.sqrt();
        assert!((c - 8.485281).abs() < 1e-6);
        for v in f(&l, &[c, c, 27.0]) {
            assert!(v.abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn rossler_vector_field_values() {
        let r = Rossler::default();
        assert_eq!(r.dim(), 3);
        let v = f(&r, &[0.0, 0.0, 0.0]);
        assert_eq!(v, vec![0.0, 0.0, 0.2]);
        for eq in r.equilibria() {
            for v in f(&r, &eq) {
                assert!(v.abs() < 1e-12, "{v}");
            }
        }
    }

    #[test]
    fn rk4_on_equilibrium_is_stationary() {
        let c = 72f64.sqrt();
        let x = [c, c, 27.0];
        let y = rk4_step(&Lorenz::default(), &x, 0.01).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rk4_matches_exponential() {
        let y = rk4_step(&Exponential(1.0), &[1.0], 0.1).unwrap()[0];
        // 1 + h + h²/2 + h³/6 + h⁴/24
        assert!((y - 1.105_170_833_333_333_3).abs() < 1e-15, "{y}");
        assert!((y - 0.1f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn rk4_rejects_bad_input() {
        assert!(rk4_step(&Lorenz::default(), &[1.0, 1.0], 0.01).is_err());
        assert!(rk4_step(&Lorenz::default(), &[1.0, 1.0, 1.0], 0.0).is_err());
        assert_eq!(
            rk4_step(&Exponential(1.0), &[f64::MAX], 1.0),
            Err(Error::BlowUp)
        );
    }

    #[test]
    fn flow_map_substeps() {
        let m = FlowMap::new(Lorenz::default(), 0.2, 0.01).unwrap();
        assert_eq!(m.substeps(), 20);
        let m = FlowMap::new(Lorenz::default(), 0.02, 0.01).unwrap();
        assert_eq!(m.substeps(), 2);
        assert!(FlowMap::new(Lorenz::default(), 0.015, 0.01).is_err());
    }

    #[test]
    fn flow_is_a_semigroup() {
        let one = FlowMap::new(Lorenz::default(), 0.2, 0.01).unwrap();
        let two = FlowMap::new(Lorenz::default(), 0.4, 0.01).unwrap();
        let x = [1.0, 1.0, 1.0];
        let a = one.apply(&one.apply(&x).unwrap()).unwrap();
        let b = two.apply(&x).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn equilibria_are_fixed_points_of_flow() {
        let l = Lorenz::default();
        let [p, q] = l.wing_equilibria();
        for tau in [0.02, 0.2, 1.0] {
            let m = FlowMap::new(l, tau, 0.01).unwrap();
            for eq in [[0.0, 0.0, 0.0], p, q] {
                let y = m.apply(&eq).unwrap();
                for (a, b) in y.iter().zip(&eq) {
                    assert!((a - b).abs() < 1e-10, "tau {tau}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn trajectory_edge_cases() {
        let m = FlowMap::new(Lorenz::default(), 0.2, 0.01).unwrap();
        let t = generate_trajectory(&m, &[1.0, 1.0, 1.0], 0.0, 1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get(0), &[1.0, 1.0, 1.0]);
        assert!(generate_trajectory(&m, &[1.0, 1.0, 1.0], 0.0, 0).is_err());
    }

    #[test]
    fn trajectory_samples_are_successive_flow_images() {
        let m = FlowMap::new(Lorenz::default(), 0.02, 0.01).unwrap();
        let t = generate_trajectory(&m, &[1.0, 1.0, 1.0], 1.0, 50).unwrap();
        assert_eq!(t.tau(), 0.02);
        for i in 0..49 {
            assert_eq!(m.apply(t.get(i)).unwrap(), t.get(i + 1));
        }
    }

    #[test]
    fn lyapunov_of_linear_decay() {
        let l = max_lyapunov(&Exponential(-1.0), &[1.0], 50.0).unwrap();
        assert!((l + 1.0).abs() < 0.01, "{l}");
        // started at the stable equilibrium itself
        let l = max_lyapunov(&Exponential(-1.0), &[0.0], 20.0).unwrap();
        assert!(l < 0.0);
    }
}
