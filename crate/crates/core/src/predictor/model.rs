//! The full predictor: encoder, decoder, forward pass and reverse-mode
//! gradients of the mixture negative log-likelihood.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::predictor::cell::{encode, encode_backward, EncoderCache, GraphCellParams};
use crate::predictor::decoder::{attend_backward, attend_cached, rollout, rollout_backward, AttendCache, DecoderParams};
use crate::predictor::features::Sample;
use crate::predictor::hyper::PredictorHyper;
use crate::predictor::linalg::{matvec, matvec_t_acc, outer_acc};
use crate::predictor::mixture::{nll_with_grad, MixturePrediction, Mode};
use crate::scalar::{softmax, Real};

/// Half-width of the uniform initialization range.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub hyper: PredictorHyper,
    pub cell: GraphCellParams<T>,
    pub dec: DecoderParams<T>,
}

struct DecodeCache<T> {
    attn: Vec<AttendCache<T>>,
    ctxs: Vec<Vec<T>>,
    pi: Vec<T>,
    log_scales: Vec<Vec<[T; 2]>>,
}

fn head<T: Real>(w: &[T], b: &[T], l: usize, hidden: usize, x: &[T]) -> [T; 2] {
    let mut out = [T::zero(); 2];
    matvec(&w[l * 2 * hidden..(l + 1) * 2 * hidden], 2, hidden, x, &mut out);
    [out[0] + b[2 * l], out[1] + b[2 * l + 1]]
}

fn decode_cached<T: Real>(dec: &DecoderParams<T>, hiddens: &[Vec<T>], initial: &[T; 4], dt: T) -> (MixturePrediction<T>, DecodeCache<T>) {
    let h = dec.hidden;
    let (ctxs, attn): (Vec<_>, Vec<_>) = (0..dec.horizon).map(|p| attend_cached(dec, hiddens, p)).unzip();
    let last = hiddens.last().expect("at least one history step");
    let mut logits = vec![T::zero(); dec.modes];
    matvec(&dec.logit_w, dec.modes, h, last, &mut logits);
    for (o, &b) in logits.iter_mut().zip(&dec.logit_b) {
        *o += b;
    }
    let pi = softmax(&logits);
    let mut modes = Vec::with_capacity(dec.modes);
    let mut log_scales = Vec::with_capacity(dec.modes);
    for l in 0..dec.modes {
        let controls: Vec<[T; 2]> = ctxs.iter().map(|c| head(&dec.ctrl_w, &dec.ctrl_b, l, h, c)).collect();
        let ls: Vec<[T; 2]> = ctxs.iter().map(|c| head(&dec.noise_w, &dec.noise_b, l, h, c)).collect();
        let (states, covariances) = rollout(initial, &controls, &ls, dt);
        modes.push(Mode {
            pi: pi[l],
            states,
            covariances,
        });
        log_scales.push(ls);
    }
    (
        MixturePrediction { modes },
        DecodeCache {
            attn,
            ctxs,
            pi,
            log_scales,
        },
    )
}

/// Mixture forecast from the target's encoder hiddens and its state at the
/// prediction time.
pub fn decode<T: Real>(dec: &DecoderParams<T>, hiddens: &[Vec<T>], initial: &[T; 4], dt: T) -> MixturePrediction<T> {
    decode_cached(dec, hiddens, initial, dt).0
}

impl<T: Real> Model<T> {
    /// Parameters drawn from a seeded uniform(−0.1, 0.1).
    pub fn init(hyper: &PredictorHyper) -> Result<Self> {
        hyper.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let cell = GraphCellParams::random(hyper.hidden, INIT_SCALE, &mut rng);
        let dec = DecoderParams::random(hyper.hidden, hyper.modes, hyper.horizon, INIT_SCALE, &mut rng);
        Ok(Self {
            hyper: hyper.clone(),
            cell,
            dec,
        })
    }

    pub fn zeros(hyper: &PredictorHyper) -> Self {
        Self {
            hyper: hyper.clone(),
            cell: GraphCellParams::zeros(hyper.hidden),
            dec: DecoderParams::zeros(hyper.hidden, hyper.modes, hyper.horizon),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.hyper)
    }

    /// Tensor names and shapes in serialization order.
    pub fn shapes(hyper: &PredictorHyper) -> Vec<(&'static str, Vec<usize>)> {
        let mut v = GraphCellParams::<T>::shapes(hyper.hidden);
        v.extend(DecoderParams::<T>::shapes(hyper.hidden, hyper.modes, hyper.horizon));
        v
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        let mut v = self.cell.tensors();
        v.extend(self.dec.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.cell.tensors_mut();
        v.extend(self.dec.tensors_mut());
        v
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<T> {
        self.tensors().into_iter().flatten().copied().collect()
    }

    pub fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[off..off + t.len()]);
            off += t.len();
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        let mut m = Model::<U>::zeros(&self.hyper);
        let flat: Vec<U> = self.flatten().into_iter().map(|v| U::lit(v.as_f64())).collect();
        m.set_flat(&flat).expect("same hyperparameters");
        m
    }

    fn check_sample(&self, s: &Sample<T>) -> Result<()> {
        if s.steps.len() != self.hyper.history {
            return Err(Error::ShapeMismatch(format!(
                "sample has {} history steps, model expects {}",
                s.steps.len(),
                self.hyper.history
            )));
        }
        if s.steps.iter().any(|st| st.index_of(s.target).is_none()) {
            return Err(Error::ShapeMismatch(format!("target {} missing from a history step", s.target)));
        }
        Ok(())
    }

    /// Forecast in the sample's local frame.
    pub fn forward(&self, s: &Sample<T>) -> Result<MixturePrediction<T>> {
        self.check_sample(s)?;
        let (hs, _) = encode(&self.cell, &s.steps, s.target);
        Ok(decode(&self.dec, &hs, &s.initial, s.dt))
    }

    /// Forecast in world coordinates.
    pub fn predict_world(&self, s: &Sample<T>) -> Result<MixturePrediction<T>> {
        Ok(self.forward(s)?.to_world(&s.local))
    }

    /// Summed per-step mixture NLL of one sample.
    pub fn loss(&self, s: &Sample<T>) -> Result<T> {
        let pred = self.forward(s)?;
        check_truth(s, self.hyper.horizon)?;
        Ok(nll_with_grad(&pred, &s.truth)?.loss)
    }

    /// Loss of one sample and `scale` times its gradient added into `grads`.
    pub fn accumulate_grad(&self, s: &Sample<T>, scale: T, grads: &mut Model<T>) -> Result<T> {
        self.check_sample(s)?;
        check_truth(s, self.hyper.horizon)?;
        let h = self.hyper.hidden;
        let dec = &self.dec;
        let (hs, enc_cache): (Vec<Vec<T>>, EncoderCache<T>) = encode(&self.cell, &s.steps, s.target);
        let (pred, dc) = decode_cached(dec, &hs, &s.initial, s.dt);
        let ng = nll_with_grad(&pred, &s.truth)?;

        let mut d_hs = vec![vec![T::zero(); h]; hs.len()];
        let last = hs.len() - 1;
        let total: T = ng.d_log_pi.iter().copied().sum();
        let d_logits: Vec<T> = ng
            .d_log_pi
            .iter()
            .zip(&dc.pi)
            .map(|(&g, &p)| (g - p * total) * scale)
            .collect();
        outer_acc(&mut grads.dec.logit_w, dec.modes, h, &d_logits, &hs[last]);
        for (b, &d) in grads.dec.logit_b.iter_mut().zip(&d_logits) {
            *b += d;
        }
        matvec_t_acc(&dec.logit_w, dec.modes, h, &d_logits, &mut d_hs[last]);

        let mut d_ctx = vec![vec![T::zero(); h]; dec.horizon];
        for l in 0..dec.modes {
            let d_states: Vec<[T; 4]> = ng.d_states[l].iter().map(|x| x.map(|v| v * scale)).collect();
            let d_covs: Vec<_> = ng.d_covs[l].iter().map(|c| c.map(|r| r.map(|v| v * scale))).collect();
            let (du, dl) = rollout_backward(&dc.log_scales[l], s.dt, &d_states, &d_covs);
            let rows = l * 2 * h..(l + 1) * 2 * h;
            for p in 0..dec.horizon {
                let ctx = &dc.ctxs[p];
                outer_acc(&mut grads.dec.ctrl_w[rows.clone()], 2, h, &du[p], ctx);
                outer_acc(&mut grads.dec.noise_w[rows.clone()], 2, h, &dl[p], ctx);
                for k in 0..2 {
                    grads.dec.ctrl_b[2 * l + k] += du[p][k];
                    grads.dec.noise_b[2 * l + k] += dl[p][k];
                }
                matvec_t_acc(&dec.ctrl_w[rows.clone()], 2, h, &du[p], &mut d_ctx[p]);
                matvec_t_acc(&dec.noise_w[rows.clone()], 2, h, &dl[p], &mut d_ctx[p]);
            }
        }
        for p in 0..dec.horizon {
            attend_backward(dec, &hs, p, &dc.attn[p], &d_ctx[p], &mut grads.dec, &mut d_hs);
        }
        encode_backward(&self.cell, &enc_cache, &d_hs, &mut grads.cell);
        Ok(ng.loss)
    }
}

fn check_truth<T: Real>(s: &Sample<T>, horizon: usize) -> Result<()> {
    if s.truth.len() != horizon {
        return Err(Error::ShapeMismatch(format!(
            "sample has {} future steps, model expects {horizon}",
            s.truth.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::linalg::is_symmetric_psd;

    #[test]
    fn single_mode_has_unit_weight() {
        let hyper = PredictorHyper {
            modes: 1,
            hidden: 4,
            horizon: 3,
            ..Default::default()
        };
        let m = Model::<f64>::init(&hyper).unwrap();
        let hs = vec![vec![0.3, -0.1, 0.2, 0.5]];
        let pred = decode(&m.dec, &hs, &[0.0, 0.0, 5.0, 0.0], 0.2);
        assert_eq!(pred.modes[0].pi, 1.0);
    }

    #[test]
    fn zero_heads_give_constant_velocity() {
        let mut dec = DecoderParams::<f64>::zeros(3, 2, 4);
        // log-scale bias far negative: Q ≈ 0
        dec.noise_b.iter_mut().for_each(|b| *b = -800.0);
        let hs = vec![vec![0.1, 0.2, 0.3]; 2];
        let pred = decode(&dec, &hs, &[1.0, 2.0, 10.0, -1.0], 0.5);
        for m in &pred.modes {
            assert_eq!(m.pi, 0.5);
            for (p, s) in m.states.iter().enumerate() {
                let t = 0.5 * (p + 1) as f64;
                assert!((s[0] - (1.0 + 10.0 * t)).abs() < 1e-12);
                assert!((s[1] - (2.0 - t)).abs() < 1e-12);
            }
            assert!(m.covariances.iter().all(|c| c.iter().flatten().all(|&v| v == 0.0)));
        }
    }

    #[test]
    fn random_decode_invariants() {
        let hyper = PredictorHyper {
            hidden: 5,
            horizon: 6,
            ..Default::default()
        };
        let m = Model::<f64>::init(&hyper).unwrap();
        let hs = vec![vec![0.3, -0.1, 0.2, 0.5, 0.9], vec![-0.4, 0.1, 0.0, 0.2, 0.3]];
        let pred = decode(&m.dec, &hs, &[0.0, 0.0, 5.0, 0.5], 0.2);
        let sum: f64 = pred.modes.iter().map(|m| m.pi).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for mode in &pred.modes {
            let mut prev_tr = 0.0;
            for c in &mode.covariances {
                assert!(is_symmetric_psd(c, 1e-9));
                let tr: f64 = (0..4).map(|i| c[i][i]).sum();
                assert!(tr >= prev_tr);
                prev_tr = tr;
            }
        }
    }
}
