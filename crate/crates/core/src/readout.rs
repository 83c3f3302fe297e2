//! Polynomial readouts over reservoir states and the closed-loop map
//! `G(r) = F(r, ĥ(r))`.
//!
//! A readout of degree `d` is linear in the weights but polynomial in the
//! state: `ĥ(r) = Wᵀ φ_d(r)`, where `φ_d(r)` collects a constant and every
//! monomial of the state up to order `d`. Degree 1 is the conventional
//! linear readout, degree 2 adds the quadratic form `rᵀ W^Q r`, degree 3 a
//! cubic form.

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, NormalEquations};
use crate::reservoir::Esn;

/// Output magnitude beyond which a closed loop is declared diverged.
pub const BLOWUP_LIMIT: f64 = 1e3;

/// Feature ordering identifier, written into serialized readouts.
pub const FEATURE_ORDERING: &str = "bias,lin,quad-lex-upper,cubic-lex-upper";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "u8", into = "u8"))]
pub enum PolyDegree {
    Linear = 1,
    Quadratic = 2,
    Cubic = 3,
}

impl PolyDegree {
    pub const ALL: [PolyDegree; 3] = [PolyDegree::Linear, PolyDegree::Quadratic, PolyDegree::Cubic];

    pub fn order(self) -> usize {
        self as usize
    }

    /// `L`, `Q` or `C`.
    pub fn symbol(self) -> char {
        match self {
            PolyDegree::Linear => 'L',
            PolyDegree::Quadratic => 'Q',
            PolyDegree::Cubic => 'C',
        }
    }
}

impl TryFrom<u8> for PolyDegree {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(PolyDegree::Linear),
            2 => Ok(PolyDegree::Quadratic),
            3 => Ok(PolyDegree::Cubic),
            _ => Err(Error::InvalidArgument("polynomial degree must be 1, 2 or 3")),
        }
    }
}

impl From<PolyDegree> for u8 {
    fn from(d: PolyDegree) -> u8 {
        d as u8
    }
}

impl core::fmt::Display for PolyDegree {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

/// Number of features for a state of size `n`: the constant, then
/// `n`, `n(n+1)/2` and `n(n+1)(n+2)/6` monomials of order one to three.
pub fn feature_dim(n: usize, degree: PolyDegree) -> usize {
    let mut d = 1 + n;
    if degree >= PolyDegree::Quadratic {
        d += n * (n + 1) / 2;
    }
    if degree >= PolyDegree::Cubic {
        d += n * (n + 1) * (n + 2) / 6;
    }
    d
}

/// Polynomial features of `r` appended to `out` (which is cleared first).
///
/// Layout: `1`, then `r_j` for ascending `j`, then `r_j r_k` for `j <= k` in
/// lexicographic order, then `r_j r_k r_l` for `j <= k <= l`. Lower degrees
/// are prefixes of higher ones.
pub fn features_into(r: &[f64], degree: PolyDegree, out: &mut Vec<f64>) {
    let n = r.len();
    out.clear();
    out.reserve(feature_dim(n, degree));
    out.push(1.0);
    out.extend_from_slice(r);
    if degree == PolyDegree::Linear {
        return;
    }
    let quad_start = out.len();
    for j in 0..n {
        for k in j..n {
            out.push(r[j] * r[k]);
        }
    }
    if degree == PolyDegree::Quadratic {
        return;
    }
    // r_j r_k r_l = (r_j r_k) r_l; pair (j, k) sits at a known offset.
    let mut pair = quad_start;
    for j in 0..n {
        for k in j..n {
            let p = out[pair];
            for l in k..n {
                out.push(p * r[l]);
            }
            pair += 1;
        }
    }
}

pub fn features(r: &[f64], degree: PolyDegree) -> Vec<f64> {
    let mut out = Vec::new();
    features_into(r, degree, &mut out);
    out
}

/// Trained polynomial readout `ĥ(r) = Wᵀ φ(r)`; `weights` is `D × L`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyReadout {
    degree: PolyDegree,
    n: usize,
    weights: Matrix,
}

impl PolyReadout {
    pub fn from_weights(degree: PolyDegree, n: usize, weights: Matrix) -> Result<Self> {
        let d = feature_dim(n, degree);
        if weights.rows() != d {
            return Err(Error::Shape {
                op: "PolyReadout::from_weights",
                expected: d,
                got: weights.rows(),
            });
        }
        if weights.cols() == 0 {
            return Err(Error::InvalidArgument("readout needs at least one output"));
        }
        Ok(Self { degree, n, weights })
    }

    pub fn zeros(degree: PolyDegree, n: usize, l: usize) -> Self {
        Self {
            degree,
            n,
            weights: Matrix::zeros(feature_dim(n, degree), l),
        }
    }

    /// Ridge fit of `targets` (one row per sample) on the features of
    /// `states` (one row per sample).
    pub fn train(states: &Matrix, targets: &Matrix, degree: PolyDegree, beta: f64) -> Result<Self> {
        if states.rows() != targets.rows() {
            return Err(Error::Shape {
                op: "PolyReadout::train",
                expected: states.rows(),
                got: targets.rows(),
            });
        }
        let n = states.cols();
        if n == 0 {
            return Err(Error::InvalidArgument("reservoir states must be non-empty"));
        }
        let mut acc = NormalEquations::new(feature_dim(n, degree), targets.cols());
        let mut phi = Vec::new();
        for (r, y) in states.row_iter().zip(targets.row_iter()) {
            features_into(r, degree, &mut phi);
            acc.add(&phi, y);
        }
        let weights = acc.solve(beta)?;
        Ok(Self { degree, n, weights })
    }

    pub fn degree(&self) -> PolyDegree {
        self.degree
    }

    /// Reservoir size the readout expects.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Output dimension.
    pub fn l(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    /// `Wᵀ φ(r)`.
    pub fn predict(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n {
            return Err(Error::Shape {
                op: "PolyReadout::predict",
                expected: self.n,
                got: r.len(),
            });
        }
        let mut phi = Vec::new();
        let mut out = vec![0.0; self.l()];
        self.predict_with(r, &mut phi, &mut out);
        Ok(out)
    }

    /// Allocation-free prediction; `phi` is reused as feature scratch.
    pub fn predict_with(&self, r: &[f64], phi: &mut Vec<f64>, out: &mut [f64]) {
        features_into(r, self.degree, phi);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (f, w) in phi.iter().zip(self.weights.row_iter()) {
            for (o, wv) in out.iter_mut().zip(w) {
                *o += f * wv;
            }
        }
    }

    /// `Σ_s |y_s - ĥ(r_s)|² + beta |W|²_F` on the given data.
    pub fn regularized_objective(&self, states: &Matrix, targets: &Matrix, beta: f64) -> Result<f64> {
        let mut phi = Vec::new();
        let mut y = vec![0.0; self.l()];
        let mut sse = 0.0;
        for (r, t) in states.row_iter().zip(targets.row_iter()) {
            if r.len() != self.n {
                return Err(Error::Shape {
                    op: "PolyReadout::regularized_objective",
                    expected: self.n,
                    got: r.len(),
                });
            }
            self.predict_with(r, &mut phi, &mut y);
            sse += y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        let w2 = self.weights.frobenius_norm();
        Ok(sse + beta * w2 * w2)
    }

    /// Symmetric quadratic-form tensor `W^Q` as `L × N × N` (row-major), or
    /// `None` for a linear readout. Each off-diagonal monomial weight is split
    /// equally between `(j, k)` and `(k, j)`, so `rᵀ W^Q_i r` reproduces the
    /// quadratic part of output `i`.
    pub fn quadratic_tensor(&self) -> Option<Vec<f64>> {
        if self.degree == PolyDegree::Linear {
            return None;
        }
        let (n, l) = (self.n, self.l());
        let mut t = vec![0.0; l * n * n];
        let mut row = 1 + n;
        for j in 0..n {
            for k in j..n {
                for i in 0..l {
                    let w = self.weights[(row, i)];
                    if j == k {
                        t[i * n * n + j * n + j] = w;
                    } else {
                        t[i * n * n + j * n + k] = 0.5 * w;
                        t[i * n * n + k * n + j] = 0.5 * w;
                    }
                }
                row += 1;
            }
        }
        Some(t)
    }
}

/// A reservoir whose input is its own readout: `r_{t+1} = F(r_t, ĥ(r_t))`.
pub trait ClosedLoopModel {
    fn state_dim(&self) -> usize;

    /// `ĥ(r)`.
    fn observe(&self, r: &[f64]) -> Result<Vec<f64>>;

    /// `G(r)`.
    fn advance(&self, r: &[f64]) -> Result<Vec<f64>>;
}

/// Reservoir plus readout running autonomously.
#[derive(Debug, Clone)]
pub struct AutonomousEsn {
    esn: Esn,
    readout: PolyReadout,
    tau: f64,
    blowup_limit: f64,
    phi: Vec<f64>,
    output: Vec<f64>,
    steps_taken: usize,
}

impl AutonomousEsn {
    /// `tau` is the sampling interval attached to emitted output trajectories.
    pub fn new(esn: Esn, readout: PolyReadout, tau: f64) -> Result<Self> {
        if readout.l() != esn.k() {
            return Err(Error::Shape {
                op: "AutonomousEsn::new (readout outputs vs reservoir inputs)",
                expected: esn.k(),
                got: readout.l(),
            });
        }
        if readout.n() != esn.n() {
            return Err(Error::Shape {
                op: "AutonomousEsn::new (readout size vs reservoir size)",
                expected: esn.n(),
                got: readout.n(),
            });
        }
        let l = readout.l();
        Ok(Self {
            esn,
            readout,
            tau,
            blowup_limit: BLOWUP_LIMIT,
            phi: Vec::new(),
            output: vec![0.0; l],
            steps_taken: 0,
        })
    }

    pub fn with_blowup_limit(mut self, limit: f64) -> Self {
        self.blowup_limit = limit;
        self
    }

    pub fn esn(&self) -> &Esn {
        &self.esn
    }

    pub fn esn_mut(&mut self) -> &mut Esn {
        &mut self.esn
    }

    pub fn readout(&self) -> &PolyReadout {
        &self.readout
    }

    pub fn state(&self) -> &[f64] {
        self.esn.state()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Emits `ŷ = ĥ(r)` and moves the state to `F(r, ŷ)`.
    pub fn autonomous_step(&mut self) -> Result<&[f64]> {
        self.readout
            .predict_with(self.esn.state(), &mut self.phi, &mut self.output);
        let magnitude = self.output.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if !(magnitude <= self.blowup_limit) {
            return Err(Error::Diverged {
                step: self.steps_taken,
                magnitude,
            });
        }
        self.esn.update(&self.output)?;
        self.steps_taken += 1;
        Ok(&self.output)
    }

    /// Runs `n_steps` autonomous steps and returns the emitted outputs.
    pub fn closed_loop_run(&mut self, n_steps: usize) -> Result<Trajectory> {
        let (outputs, err) = self.closed_loop_run_partial(n_steps);
        match err {
            None => Ok(outputs),
            Some(e) => Err(e),
        }
    }

    /// Like [`closed_loop_run`](Self::closed_loop_run) but keeps the outputs
    /// produced before a divergence. The error's `step` counts from the start
    /// of this run.
    pub fn closed_loop_run_partial(&mut self, n_steps: usize) -> (Trajectory, Option<Error>) {
        let mut outputs = Trajectory::with_capacity(self.tau, self.readout.l(), n_steps);
        let start = self.steps_taken;
        for _ in 0..n_steps {
            match self.autonomous_step() {
                Ok(y) => {
                    outputs.push(y).expect("readout output dimension is fixed");
                }
                Err(Error::Diverged { step, magnitude }) => {
                    return (
                        outputs,
                        Some(Error::Diverged {
                            step: step - start,
                            magnitude,
                        }),
                    )
                }
                Err(e) => return (outputs, Some(e)),
            }
        }
        (outputs, None)
    }
}

impl ClosedLoopModel for AutonomousEsn {
    fn state_dim(&self) -> usize {
        self.esn.n()
    }

    fn observe(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.readout.predict(r)
    }

    fn advance(&self, r: &[f64]) -> Result<Vec<f64>> {
        let y = self.readout.predict(r)?;
        self.esn.map(r, &y)
    }
}
