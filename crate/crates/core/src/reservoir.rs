//! Echo state network: `r_t = tanh(A r_{t-1} + B x_t)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::numerics::{distance, scale_to_radius, uniform_matrix, Matrix, Rng};

/// Scale of the entries of `A` before spectral rescaling. Irrelevant to the
/// result apart from fixing the random stream layout.
const SIGMA_A: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EsnConfig {
    /// Reservoir size N.
    pub n: usize,
    /// Input dimension K.
    pub k: usize,
    pub spectral_radius: f64,
    /// Half-width of the uniform distribution of `B`'s entries.
    pub sigma_b: f64,
    pub seed: u64,
}

impl EsnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 {
            return Err(Error::InvalidArgument("reservoir size and input dimension must be >= 1"));
        }
        if !(self.spectral_radius >= 0.0 && self.spectral_radius.is_finite()) {
            return Err(Error::InvalidArgument("spectral radius must be finite and >= 0"));
        }
        if !(self.sigma_b >= 0.0 && self.sigma_b.is_finite()) {
            return Err(Error::InvalidArgument("sigma_b must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Reservoir matrices plus the current state.
#[derive(Debug, Clone, PartialEq)]
pub struct Esn {
    a: Matrix,
    b: Matrix,
    state: Vec<f64>,
    scratch: Vec<f64>,
}

impl Esn {
    /// Samples `A` and `B` from a generator seeded with `config.seed`.
    pub fn build(config: &EsnConfig) -> Result<Self> {
        Self::build_with_rng(config, &mut Rng::new(config.seed))
    }

    /// `A` is drawn first (row-major, uniform on [-1, 1]) and rescaled to the
    /// configured spectral radius, then `B` (uniform on [-σ_B, σ_B]). The
    /// state starts at zero.
    pub fn build_with_rng(config: &EsnConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut raw = uniform_matrix(rng, config.n, config.n, SIGMA_A);
        let a = match scale_to_radius(&raw, config.spectral_radius) {
            Err(Error::ZeroSpectralRadius) => {
                raw = uniform_matrix(rng, config.n, config.n, SIGMA_A);
                scale_to_radius(&raw, config.spectral_radius)?
            }
            other => other?,
        };
        let b = uniform_matrix(rng, config.n, config.k, config.sigma_b);
        Self::from_parts(a, b)
    }

    /// Wraps explicit matrices; the state starts at zero.
    pub fn from_parts(a: Matrix, b: Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                op: "Esn::from_parts",
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        if b.rows() != a.rows() {
            return Err(Error::Shape {
                op: "Esn::from_parts",
                expected: a.rows(),
                got: b.rows(),
            });
        }
        let n = a.rows();
        Ok(Self {
            a,
            b,
            state: vec![0.0; n],
            scratch: vec![0.0; n],
        })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn k(&self) -> usize {
        self.b.cols()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn set_state(&mut self, r: &[f64]) -> Result<()> {
        self.check_state(r)?;
        self.state.copy_from_slice(r);
        Ok(())
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = 0.0);
    }

    fn check_state(&self, r: &[f64]) -> Result<()> {
        if r.len() != self.n() {
            return Err(Error::Shape {
                op: "reservoir state",
                expected: self.n(),
                got: r.len(),
            });
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.k() {
            return Err(Error::Shape {
                op: "reservoir input",
                expected: self.k(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `F(r, x) = tanh(A r + B x)` written into `out`, without touching the
    /// stored state.
    pub fn map_into(&self, r: &[f64], x: &[f64], out: &mut [f64]) {
        let k = self.k();
        for (i, o) in out.iter_mut().enumerate() {
            let mut s: f64 = self.a.row(i).iter().zip(r).map(|(a, v)| a * v).sum();
            let brow = &self.b.as_slice()[i * k..(i + 1) * k];
            s += brow.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
            *o = libm::tanh(s);
        }
    }

    /// `F(r, x)` for an arbitrary state `r`.
    pub fn map(&self, r: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_state(r)?;
        self.check_input(x)?;
        let mut out = vec![0.0; self.n()];
        self.map_into(r, x, &mut out);
        Ok(out)
    }

    /// Advances the stored state by one input.
    pub fn update(&mut self, x: &[f64]) -> Result<&[f64]> {
        self.check_input(x)?;
        let mut next = core::mem::take(&mut self.scratch);
        self.map_into(&self.state, x, &mut next);
        self.scratch = core::mem::replace(&mut self.state, next);
        Ok(&self.state)
    }

    /// Resets to the zero state, feeds every input in order and returns the
    /// states after `washout`, one row per retained step. Row `i` is the state
    /// produced by input `washout + i`. The final state stays in `self`.
    pub fn drive(&mut self, inputs: &Trajectory, washout: usize) -> Result<Matrix> {
        if washout >= inputs.len() {
            return Err(Error::InvalidArgument("washout must be shorter than the input sequence"));
        }
        if inputs.dim() != self.k() {
            return Err(Error::Shape {
                op: "Esn::drive",
                expected: self.k(),
                got: inputs.dim(),
            });
        }
        self.reset();
        self.continue_drive(inputs, washout)
    }

    /// Like [`drive`](Self::drive) but starting from the current state.
    pub fn continue_drive(&mut self, inputs: &Trajectory, washout: usize) -> Result<Matrix> {
        if inputs.dim() != self.k() {
            return Err(Error::Shape {
                op: "Esn::continue_drive",
                expected: self.k(),
                got: inputs.dim(),
            });
        }
        let n = self.n();
        let kept = inputs.len().saturating_sub(washout);
        let mut states = Vec::with_capacity(kept * n);
        for (t, x) in inputs.iter().enumerate() {
            self.update(x)?;
            if t >= washout {
                states.extend_from_slice(&self.state);
            }
        }
        Matrix::new(kept, n, states)
    }
}

/// Distance `|r_t - r̃_t|` between two copies of the reservoir built from
/// `config`, started at `r0` and `r0_alt` and driven by the same inputs.
/// Entry `t` is the distance after input `t`.
pub fn csis_distance(
    config: &EsnConfig,
    inputs: &Trajectory,
    r0: &[f64],
    r0_alt: &[f64],
) -> Result<Vec<f64>> {
    let esn = Esn::build(config)?;
    csis_distance_for(&esn, inputs, r0, r0_alt)
}

/// [`csis_distance`] for an already built reservoir.
pub fn csis_distance_for(
    esn: &Esn,
    inputs: &Trajectory,
    r0: &[f64],
    r0_alt: &[f64],
) -> Result<Vec<f64>> {
    let mut first = esn.clone();
    let mut second = esn.clone();
    first.set_state(r0)?;
    second.set_state(r0_alt)?;
    let mut out = Vec::with_capacity(inputs.len());
    for x in inputs.iter() {
        first.update(x)?;
        second.update(x)?;
        out.push(distance(first.state(), second.state()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{generate_trajectory, FlowMap, Lorenz};
    use crate::numerics::spectral_radius;

    fn config(n: usize, radius: f64, sigma_b: f64, seed: u64) -> EsnConfig {
        EsnConfig {
            n,
            k: 3,
            spectral_radius: radius,
            sigma_b,
            seed,
        }
    }

    fn lorenz_inputs(tau: f64, len: usize) -> Trajectory {
        let m = FlowMap::new(Lorenz::default(), tau, 0.01).unwrap();
        generate_trajectory(&m, &[1.0, 1.0, 1.0], 10.0, len).unwrap()
    }

    #[test]
    fn shapes_and_zero_state() {
        let esn = Esn::build(&config(10, 0.95, 0.1, 1)).unwrap();
        assert_eq!((esn.a().rows(), esn.a().cols()), (10, 10));
        assert_eq!((esn.b().rows(), esn.b().cols()), (10, 3));
        assert_eq!(esn.state(), &[0.0; 10]);
    }

    #[test]
    fn build_is_deterministic() {
        let c = config(8, 0.95, 0.1, 99);
        assert_eq!(Esn::build(&c).unwrap(), Esn::build(&c).unwrap());
    }

    #[test]
    fn built_radius_matches_config() {
        for seed in 0..5 {
            let esn = Esn::build(&config(10, 0.95, 0.1, seed)).unwrap();
            let rho = spectral_radius(esn.a()).unwrap();
            assert!((rho - 0.95).abs() < 0.95e-4, "seed {seed}: {rho}");
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(Esn::build(&config(0, 0.95, 0.1, 0)).is_err());
        assert!(Esn::build(&config(3, -1.0, 0.1, 0)).is_err());
        assert!(Esn::build(&config(3, 0.9, f64::NAN, 0)).is_err());
    }

    #[test]
    fn update_values() {
        let mut esn = Esn::build(&config(4, 0.9, 0.5, 3)).unwrap();
        esn.update(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(esn.state(), &[0.0; 4]);
        assert!(esn.update(&[1.0]).is_err());

        let mut scalar = Esn::from_parts(Matrix::zeros(1, 1), Matrix::identity(1)).unwrap();
        scalar.update(&[0.5]).unwrap();
        assert!((scalar.state()[0] - 0.462_117_157_260_009_8).abs() < 1e-15);
    }

    #[test]
    fn drive_boundaries() {
        let inputs = lorenz_inputs(0.2, 30);
        let mut esn = Esn::build(&config(5, 0.95, 0.1, 2)).unwrap();
        assert_eq!(esn.drive(&inputs, 29).unwrap().rows(), 1);
        assert!(esn.drive(&inputs, 30).is_err());
        let all = esn.drive(&inputs, 0).unwrap();
        let tail = esn.drive(&inputs, 7).unwrap();
        assert_eq!(tail.rows(), 23);
        for i in 0..tail.rows() {
            assert_eq!(tail.row(i), all.row(i + 7));
        }
        assert_eq!(esn.state(), all.row(29));
    }

    #[test]
    fn zero_radius_forgets_immediately() {
        let inputs = lorenz_inputs(0.2, 20);
        let c = config(6, 0.0, 0.1, 5);
        let d = csis_distance(&c, &inputs, &[0.5; 6], &[-0.5; 6]).unwrap();
        assert!(d.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn identical_starts_never_separate() {
        let inputs = lorenz_inputs(0.2, 50);
        let d = csis_distance(&config(6, 0.95, 0.1, 5), &inputs, &[0.1; 6], &[0.1; 6]).unwrap();
        assert!(d.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn contractive_regime_synchronizes() {
        let inputs = lorenz_inputs(0.2, 500);
        let c = config(10, 0.95, 0.1, 8);
        let r0 = [0.9; 10];
        let r1 = [-0.9; 10];
        let d = csis_distance(&c, &inputs, &r0, &r1).unwrap();
        let initial = crate::numerics::distance(&r0, &r1);
        assert!(d[99] < 1e-6 * initial, "{}", d[99]);
        assert!(d[499] < 1e-10, "{}", d[499]);
    }
}
