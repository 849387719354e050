//! Gaussian-mixture forecast, its negative log-likelihood and summary metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::predictor::features::LocalFrame;
use crate::predictor::linalg::Mat4;
use crate::scalar::{log_sum_exp, softmax, Real};

/// Regularizer added to each 2×2 position covariance before inversion.
pub const COV_JITTER: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Mode<T> {
    pub pi: T,
    /// `[x, y, vx, vy]` after each prediction step.
    pub states: Vec<[T; 4]>,
    pub covariances: Vec<Mat4<T>>,
}

impl<T: Real> Mode<T> {
    pub fn position(&self, p: usize) -> Vec2<T> {
        Vec2::new(self.states[p][0], self.states[p][1])
    }

    pub fn velocity(&self, p: usize) -> Vec2<T> {
        Vec2::new(self.states[p][2], self.states[p][3])
    }

    fn position_cov(&self, p: usize) -> [[T; 2]; 2] {
        let c = &self.covariances[p];
        [[c[0][0], c[0][1]], [c[1][0], c[1][1]]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MixturePrediction<T> {
    pub modes: Vec<Mode<T>>,
}

impl<T: Real> MixturePrediction<T> {
    pub fn horizon(&self) -> usize {
        self.modes.first().map_or(0, |m| m.states.len())
    }

    /// Index of the highest-probability mode (first on ties).
    pub fn top_mode(&self) -> usize {
        let mut best = 0;
        for (l, m) in self.modes.iter().enumerate() {
            if m.pi > self.modes[best].pi {
                best = l;
            }
        }
        best
    }

    /// Maps states and covariances from `frame` to world coordinates.
    pub fn to_world(&self, frame: &LocalFrame<T>) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|m| Mode {
                pi: m.pi,
                states: m
                    .states
                    .iter()
                    .map(|s| {
                        let p = frame.point_to_world(Vec2::new(s[0], s[1]));
                        let v = frame.vec_to_world(Vec2::new(s[2], s[3]));
                        [p.x, p.y, v.x, v.y]
                    })
                    .collect(),
                covariances: m.covariances.iter().map(|c| frame.cov_to_world(c)).collect(),
            })
            .collect();
        Self { modes }
    }

    /// A single certain mode following `positions` and `velocities`.
    pub fn deterministic(positions: &[Vec2<T>], velocities: &[Vec2<T>]) -> Self {
        let states = positions
            .iter()
            .zip(velocities)
            .map(|(p, v)| [p.x, p.y, v.x, v.y])
            .collect();
        Self {
            modes: vec![Mode {
                pi: T::one(),
                states,
                covariances: vec![[[T::zero(); 4]; 4]; positions.len()],
            }],
        }
    }
}

/// Log-density of a 2-D Gaussian and its partial derivatives with respect to
/// the mean and the covariance entries `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GaussTerm<T> {
    pub log_n: T,
    pub d_mean: [T; 2],
    pub d_cov: [[T; 2]; 2],
}

pub(crate) fn gauss_log_density<T: Real>(truth: Vec2<T>, mean: Vec2<T>, cov: [[T; 2]; 2], step: usize) -> Result<GaussTerm<T>> {
    let j = T::lit(COV_JITTER);
    let (a, b, c, d) = (cov[0][0] + j, cov[0][1], cov[1][0], cov[1][1] + j);
    let det = a * d - b * c;
    if !(det > T::zero()) || !det.is_finite() || !(a > T::zero()) {
        return Err(Error::DegenerateCovariance(step));
    }
    let dx = truth.x - mean.x;
    let dy = truth.y - mean.y;
    let nq = d * dx * dx - (b + c) * dx * dy + a * dy * dy;
    let half = T::lit(0.5);
    let log_n = -(T::PI() * T::lit(2.0)).ln() - half * det.ln() - half * nq / det;
    let d2 = det * det;
    let d_cov = [
        [
            -half * d / det - half * (dy * dy * det - nq * d) / d2,
            half * c / det - half * (-dx * dy * det + nq * c) / d2,
        ],
        [
            half * b / det - half * (-dx * dy * det + nq * b) / d2,
            -half * a / det - half * (dx * dx * det - nq * a) / d2,
        ],
    ];
    let two = T::lit(2.0);
    let d_mean = [
        (two * d * dx - (b + c) * dy) / (two * det),
        (two * a * dy - (b + c) * dx) / (two * det),
    ];
    Ok(GaussTerm { log_n, d_mean, d_cov })
}

/// Loss and its gradients with respect to the mixture's components.
#[derive(Debug, Clone)]
pub(crate) struct NllGrad<T> {
    pub loss: T,
    /// `∂L/∂ln π_l`.
    pub d_log_pi: Vec<T>,
    /// `[mode][step]` gradients on the state vector and covariance.
    pub d_states: Vec<Vec<[T; 4]>>,
    pub d_covs: Vec<Vec<Mat4<T>>>,
}

pub(crate) fn nll_with_grad<T: Real>(pred: &MixturePrediction<T>, truth: &[Vec2<T>]) -> Result<NllGrad<T>> {
    let n_modes = pred.modes.len();
    let tf = truth.len();
    let mut out = NllGrad {
        loss: T::zero(),
        d_log_pi: vec![T::zero(); n_modes],
        d_states: vec![vec![[T::zero(); 4]; tf]; n_modes],
        d_covs: vec![vec![[[T::zero(); 4]; 4]; tf]; n_modes],
    };
    let log_pi: Vec<T> = pred.modes.iter().map(|m| m.pi.ln()).collect();
    let mut terms = vec![T::zero(); n_modes];
    let mut gauss = Vec::with_capacity(n_modes);
    for (p, &y) in truth.iter().enumerate() {
        gauss.clear();
        for (l, m) in pred.modes.iter().enumerate() {
            let g = gauss_log_density(y, m.position(p), m.position_cov(p), p)?;
            terms[l] = log_pi[l] + g.log_n;
            gauss.push(g);
        }
        out.loss -= log_sum_exp(&terms);
        let gamma = softmax(&terms);
        for l in 0..n_modes {
            let w = -gamma[l];
            out.d_log_pi[l] += w;
            let g = &gauss[l];
            out.d_states[l][p][0] = w * g.d_mean[0];
            out.d_states[l][p][1] = w * g.d_mean[1];
            for i in 0..2 {
                for k in 0..2 {
                    out.d_covs[l][p][i][k] = w * g.d_cov[i][k];
                }
            }
        }
    }
    if !out.loss.is_finite() {
        return Err(Error::DegenerateCovariance(0));
    }
    Ok(out)
}

/// `Σ_p −log Σ_l π_l N(truth_p | mean, Λ + 1e-6 I)` over position blocks.
pub fn nll_loss<T: Real>(pred: &MixturePrediction<T>, truth: &[Vec2<T>]) -> Result<T> {
    check_shapes(pred, truth)?;
    Ok(nll_with_grad(pred, truth)?.loss)
}

fn check_shapes<T: Real>(pred: &MixturePrediction<T>, truth: &[Vec2<T>]) -> Result<()> {
    if pred.modes.is_empty() {
        return Err(Error::ShapeMismatch("prediction has no modes".into()));
    }
    for m in &pred.modes {
        if m.states.len() != truth.len() || m.covariances.len() != truth.len() {
            return Err(Error::ShapeMismatch(format!(
                "prediction horizon {} vs truth length {}",
                m.states.len(),
                truth.len()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub ade: f64,
    pub fde: f64,
    pub apde: f64,
    pub anll: f64,
    pub fnll: f64,
}

impl Metrics {
    pub fn mean(items: &[Metrics]) -> Metrics {
        let n = items.len().max(1) as f64;
        let mut m = Metrics::default();
        for x in items {
            m.ade += x.ade / n;
            m.fde += x.fde / n;
            m.apde += x.apde / n;
            m.anll += x.anll / n;
            m.fnll += x.fnll / n;
        }
        m
    }
}

/// Displacement and likelihood summaries. `ade`/`fde` use the mode with the
/// lowest average displacement, `apde` and `fnll` the highest-probability mode.
pub fn metrics<T: Real>(pred: &MixturePrediction<T>, truth: &[Vec2<T>]) -> Result<Metrics> {
    check_shapes(pred, truth)?;
    let tf = truth.len();
    if tf == 0 {
        return Err(Error::ShapeMismatch("empty truth".into()));
    }
    let errors: Vec<Vec<f64>> = pred
        .modes
        .iter()
        .map(|m| (0..tf).map(|p| (m.position(p) - truth[p]).norm().as_f64()).collect())
        .collect();
    let ade_of = |e: &Vec<f64>| e.iter().sum::<f64>() / tf as f64;
    let mut best = 0;
    for l in 1..errors.len() {
        if ade_of(&errors[l]) < ade_of(&errors[best]) {
            best = l;
        }
    }
    let top = pred.top_mode();
    let nll = nll_loss(pred, truth)?.as_f64();
    let m = &pred.modes[top];
    let mut fnll = 0.0;
    for (p, &y) in truth.iter().enumerate() {
        fnll -= gauss_log_density(y, m.position(p), m.position_cov(p), p)?.log_n.as_f64();
    }
    Ok(Metrics {
        ade: ade_of(&errors[best]),
        fde: errors[best][tf - 1],
        apde: ade_of(&errors[top]),
        anll: nll / tf as f64,
        fnll: fnll / tf as f64,
    })
}
