//! Minibatch SGD with global-norm clipping, and finite-difference checks of
//! the hand-written gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::predictor::features::Sample;
use crate::predictor::hyper::PredictorHyper;
use crate::predictor::model::Model;
use crate::scalar::Real;

/// Mean per-sample loss over `data`.
pub fn mean_loss<T: Real>(model: &Model<T>, data: &[Sample<T>]) -> Result<f64> {
    let mut total = 0.0;
    for s in data {
        total += model.loss(s)?.as_f64();
    }
    Ok(total / data.len().max(1) as f64)
}

/// Trains from a fresh seeded initialization. The returned curve holds the
/// initial mean loss followed by the mean loss after each epoch.
pub fn train<T: Real>(data: &[Sample<T>], hyper: &PredictorHyper) -> Result<(Model<T>, Vec<f64>)> {
    train_with(data, hyper, |_, _| {})
}

/// [`train`] with a callback invoked after each epoch with its mean loss.
pub fn train_with<T: Real>(
    data: &[Sample<T>],
    hyper: &PredictorHyper,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(Model<T>, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::BadParams("training set is empty".into()));
    }
    let mut model = Model::init(hyper)?;
    let initial = mean_loss(&model, data).map_err(|e| non_finite(0, e))?;
    if !initial.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: 0,
            detail: format!("initial mean loss {initial}"),
        });
    }
    let mut curve = vec![initial];
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = model.zeros_like();
    let lr = T::lit(hyper.lr);
    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.batch_size) {
            for t in grads.tensors_mut() {
                t.iter_mut().for_each(|v| *v = T::zero());
            }
            let scale = T::one() / T::lit(batch.len() as f64);
            for &i in batch {
                let l = model.accumulate_grad(&data[i], scale, &mut grads).map_err(|e| non_finite(epoch, e))?;
                if !l.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        detail: format!("sample {i} (agent {}, frame {}) loss {l}", data[i].target, data[i].frame),
                    });
                }
            }
            let norm = grads
                .tensors()
                .iter()
                .flat_map(|t| t.iter())
                .map(|v| v.as_f64() * v.as_f64())
                .sum::<f64>()
                .sqrt();
            if !norm.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    detail: "non-finite gradient".into(),
                });
            }
            let step = if norm > hyper.clip_norm {
                lr * T::lit(hyper.clip_norm / norm)
            } else {
                lr
            };
            for (p, g) in model.tensors_mut().into_iter().zip(grads.tensors()) {
                for (pv, &gv) in p.iter_mut().zip(g) {
                    *pv -= step * gv;
                }
            }
        }
        let m = mean_loss(&model, data).map_err(|e| non_finite(epoch, e))?;
        if !m.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!("mean loss {m}"),
            });
        }
        curve.push(m);
        on_epoch(epoch, m);
    }
    Ok((model, curve))
}

fn non_finite(epoch: usize, e: Error) -> Error {
    match e {
        Error::DegenerateCovariance(step) => Error::NonFiniteLoss {
            epoch,
            detail: format!("degenerate covariance at prediction step {step}"),
        },
        other => other,
    }
}

/// Analytic vs. central-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// Floor on the denominator of the relative error, so that parameters with
/// (near-)zero gradient compare on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_ERROR_FLOOR)
}

/// Compares `grad(x)` against central differences of `f` around `x`.
pub fn finite_difference_check(
    mut f: impl FnMut(&[f64]) -> f64,
    analytic: Vec<f64>,
    x: &[f64],
    eps: f64,
) -> GradCheck {
    let mut numeric = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + eps;
        let up = f(&xp);
        xp[i] = orig - eps;
        let down = f(&xp);
        xp[i] = orig;
        numeric.push((up - down) / (2.0 * eps));
    }
    let max_relative_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max);
    GradCheck {
        max_relative_error,
        analytic,
        numeric,
    }
}

/// Checks the gradient of one sample's NLL with respect to every parameter.
pub fn gradient_check(model: &Model<f64>, sample: &Sample<f64>, eps: f64) -> Result<GradCheck> {
    let mut grads = model.zeros_like();
    model.accumulate_grad(sample, 1.0, &mut grads)?;
    let x = model.flatten();
    let mut probe = model.clone();
    let mut failure = None;
    let report = finite_difference_check(
        |p| {
            probe.set_flat(p).expect("same length");
            match probe.loss(sample) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        grads.flatten(),
        &x,
        eps,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
