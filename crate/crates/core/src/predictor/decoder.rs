//! Temporal attention over encoder hiddens, per-mode control and noise heads,
//! and the EKF time update that turns controls into state distributions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::predictor::linalg::{dot, is_symmetric_psd, matvec, matvec_t_acc, mat4_mul, mat4_transpose, mat4_zero, outer_acc, Mat4};
use crate::scalar::{softmax, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams<T> {
    pub hidden: usize,
    pub modes: usize,
    pub horizon: usize,
    /// Per-step decoder query vectors, `horizon × hidden`.
    pub queries: Vec<T>,
    /// Bilinear scoring matrix, `hidden × hidden`.
    pub att_w: Vec<T>,
    /// Control heads, `modes × 2 × hidden` and `modes × 2`.
    pub ctrl_w: Vec<T>,
    pub ctrl_b: Vec<T>,
    /// Process-noise log-scale heads, same shapes as the control heads.
    pub noise_w: Vec<T>,
    pub noise_b: Vec<T>,
    /// Mode logits from the last hidden state, `modes × hidden` and `modes`.
    pub logit_w: Vec<T>,
    pub logit_b: Vec<T>,
}

impl<T: Real> DecoderParams<T> {
    pub fn zeros(hidden: usize, modes: usize, horizon: usize) -> Self {
        Self {
            hidden,
            modes,
            horizon,
            queries: vec![T::zero(); horizon * hidden],
            att_w: vec![T::zero(); hidden * hidden],
            ctrl_w: vec![T::zero(); modes * 2 * hidden],
            ctrl_b: vec![T::zero(); modes * 2],
            noise_w: vec![T::zero(); modes * 2 * hidden],
            noise_b: vec![T::zero(); modes * 2],
            logit_w: vec![T::zero(); modes * hidden],
            logit_b: vec![T::zero(); modes],
        }
    }

    pub fn random<R: Rng>(hidden: usize, modes: usize, horizon: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(hidden, modes, horizon);
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = T::lit(rng.gen_range(-scale..scale));
            }
        }
        p
    }

    pub fn shapes(hidden: usize, modes: usize, horizon: usize) -> Vec<(&'static str, Vec<usize>)> {
        vec![
            ("dec.queries", vec![horizon, hidden]),
            ("dec.att_w", vec![hidden, hidden]),
            ("dec.ctrl_w", vec![modes, 2, hidden]),
            ("dec.ctrl_b", vec![modes, 2]),
            ("dec.noise_w", vec![modes, 2, hidden]),
            ("dec.noise_b", vec![modes, 2]),
            ("dec.logit_w", vec![modes, hidden]),
            ("dec.logit_b", vec![modes]),
        ]
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        vec![
            &self.queries,
            &self.att_w,
            &self.ctrl_w,
            &self.ctrl_b,
            &self.noise_w,
            &self.noise_b,
            &self.logit_w,
            &self.logit_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            &mut self.queries,
            &mut self.att_w,
            &mut self.ctrl_w,
            &mut self.ctrl_b,
            &mut self.noise_w,
            &mut self.noise_b,
            &mut self.logit_w,
            &mut self.logit_b,
        ]
    }

    fn query(&self, p: usize) -> &[T] {
        &self.queries[p * self.hidden..(p + 1) * self.hidden]
    }
}

/// Attention weights and context from explicit scores.
pub fn attend_scores<T: Real>(scores: &[T], hiddens: &[Vec<T>]) -> (Vec<T>, Vec<T>) {
    let a = softmax(scores);
    let mut ctx = vec![T::zero(); hiddens[0].len()];
    for (w, h) in a.iter().zip(hiddens) {
        for (c, &v) in ctx.iter_mut().zip(h) {
            *c += *w * v;
        }
    }
    (a, ctx)
}

#[derive(Debug, Clone)]
pub(crate) struct AttendCache<T> {
    /// `att_w · e_p`.
    w: Vec<T>,
    a: Vec<T>,
}

/// Attention context for prediction step `p` (0-based): scores
/// `q_s = h_sᵀ W e_p`.
pub fn attend<T: Real>(dec: &DecoderParams<T>, hiddens: &[Vec<T>], p: usize) -> Vec<T> {
    attend_cached(dec, hiddens, p).0
}

pub(crate) fn attend_cached<T: Real>(dec: &DecoderParams<T>, hiddens: &[Vec<T>], p: usize) -> (Vec<T>, AttendCache<T>) {
    let h = dec.hidden;
    let mut w = vec![T::zero(); h];
    matvec(&dec.att_w, h, h, dec.query(p), &mut w);
    let scores: Vec<T> = hiddens.iter().map(|hs| dot(hs, &w)).collect();
    let (a, ctx) = attend_scores(&scores, hiddens);
    (ctx, AttendCache { w, a })
}

pub(crate) fn attend_backward<T: Real>(
    dec: &DecoderParams<T>,
    hiddens: &[Vec<T>],
    p: usize,
    cache: &AttendCache<T>,
    d_ctx: &[T],
    grads: &mut DecoderParams<T>,
    d_hiddens: &mut [Vec<T>],
) {
    let h = dec.hidden;
    let da: Vec<T> = hiddens.iter().map(|hs| dot(hs, d_ctx)).collect();
    let mean_da = dot(&cache.a, &da);
    let mut dw = vec![T::zero(); h];
    for (s, hs) in hiddens.iter().enumerate() {
        let a_s = cache.a[s];
        let dq = a_s * (da[s] - mean_da);
        for k in 0..h {
            d_hiddens[s][k] += a_s * d_ctx[k] + dq * cache.w[k];
            dw[k] += dq * hs[k];
        }
    }
    outer_acc(&mut grads.att_w, h, h, &dw, dec.query(p));
    let dq_p = &mut grads.queries[p * h..(p + 1) * h];
    matvec_t_acc(&dec.att_w, h, h, &dw, dq_p);
}

/// Transition Jacobian `F` and noise gain `G` of the constant-acceleration
/// step.
pub(crate) fn transition<T: Real>(dt: T) -> (Mat4<T>, [[T; 2]; 4]) {
    let (o, z) = (T::one(), T::zero());
    let f = [[o, z, dt, z], [z, o, z, dt], [z, z, o, z], [z, z, z, o]];
    let h = dt * dt / T::lit(2.0);
    let g = [[h, z], [z, h], [dt, z], [z, dt]];
    (f, g)
}

fn symmetrize<T: Real>(m: &mut Mat4<T>) {
    for i in 0..4 {
        for j in i + 1..4 {
            let avg = (m[i][j] + m[j][i]) / T::lit(2.0);
            m[i][j] = avg;
            m[j][i] = avg;
        }
    }
}

pub(crate) fn ekf_step<T: Real>(x: &[T; 4], cov: &Mat4<T>, u: [T; 2], q: &[[T; 2]; 2], dt: T) -> ([T; 4], Mat4<T>) {
    let half = dt * dt / T::lit(2.0);
    let xn = [
        x[0] + x[2] * dt + half * u[0],
        x[1] + x[3] * dt + half * u[1],
        x[2] + u[0] * dt,
        x[3] + u[1] * dt,
    ];
    let (f, g) = transition(dt);
    let mut c = mat4_mul(&mat4_mul(&f, cov), &mat4_transpose(&f));
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..2 {
                for l in 0..2 {
                    c[i][j] += g[i][k] * q[k][l] * g[j][l];
                }
            }
        }
    }
    symmetrize(&mut c);
    (xn, c)
}

fn psd_tol<T: Real, const N: usize>(m: &[[T; N]; N]) -> T {
    let scale = m.iter().flatten().fold(T::one(), |acc, v| acc.max(v.abs()));
    T::lit(1e-9) * scale
}

/// One EKF time update. Rejects a non-symmetric or indefinite `cov` or `q`.
pub fn ekf_propagate<T: Real>(
    state: [T; 4],
    cov: &Mat4<T>,
    u: Vec2<T>,
    q: &[[T; 2]; 2],
    dt: T,
) -> Result<([T; 4], Mat4<T>)> {
    if !is_symmetric_psd(cov, psd_tol(cov)) {
        return Err(Error::NotPsd("state covariance".into()));
    }
    if !is_symmetric_psd(q, psd_tol(q)) {
        return Err(Error::NotPsd("process noise".into()));
    }
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::BadParams("dt must be > 0".into()));
    }
    Ok(ekf_step(&state, cov, [u.x, u.y], q, dt))
}

/// Per-mode rollout: states and covariances after each of the steps.
pub(crate) fn rollout<T: Real>(
    initial: &[T; 4],
    controls: &[[T; 2]],
    log_scales: &[[T; 2]],
    dt: T,
) -> (Vec<[T; 4]>, Vec<Mat4<T>>) {
    let mut x = *initial;
    let mut c = mat4_zero();
    let mut xs = Vec::with_capacity(controls.len());
    let mut cs = Vec::with_capacity(controls.len());
    for (u, l) in controls.iter().zip(log_scales) {
        let q = [[l[0].exp(), T::zero()], [T::zero(), l[1].exp()]];
        let (xn, cn) = ekf_step(&x, &c, *u, &q, dt);
        x = xn;
        c = cn;
        xs.push(x);
        cs.push(c);
    }
    (xs, cs)
}

/// Adjoint of [`rollout`]: given loss gradients on each step's state and
/// covariance, returns gradients on controls and log-scales.
pub(crate) fn rollout_backward<T: Real>(
    log_scales: &[[T; 2]],
    dt: T,
    d_states: &[[T; 4]],
    d_covs: &[Mat4<T>],
) -> (Vec<[T; 2]>, Vec<[T; 2]>) {
    let n = log_scales.len();
    let (f, g) = transition(dt);
    let ft = mat4_transpose(&f);
    let mut gx = [T::zero(); 4];
    let mut gc = mat4_zero();
    let mut du = vec![[T::zero(); 2]; n];
    let mut dl = vec![[T::zero(); 2]; n];
    for p in (0..n).rev() {
        for i in 0..4 {
            gx[i] += d_states[p][i];
            for j in 0..4 {
                gc[i][j] += d_covs[p][i][j];
            }
        }
        let mut sym = gc;
        symmetrize(&mut sym);
        for k in 0..2 {
            du[p][k] = (0..4).map(|i| g[i][k] * gx[i]).sum();
            let dq: T = (0..4)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .map(|(i, j)| g[i][k] * sym[i][j] * g[j][k])
                .sum();
            dl[p][k] = dq * log_scales[p][k].exp();
        }
        let mut gxp = [T::zero(); 4];
        for i in 0..4 {
            gxp[i] = (0..4).map(|j| f[j][i] * gx[j]).sum();
        }
        gx = gxp;
        gc = mat4_mul(&mat4_mul(&ft, &sym), &f);
    }
    (du, dl)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ekf_hand_cases() {
        let z = mat4_zero::<f64>();
        let q0 = [[0.0; 2]; 2];
        let (x, c) = ekf_propagate([0.0, 0.0, 10.0, 0.0], &z, Vec2::new(0.0, 0.0), &q0, 0.2).unwrap();
        assert_eq!(x, [2.0, 0.0, 10.0, 0.0]);
        assert_eq!(c, z);
        let (x, _) = ekf_propagate([0.0, 0.0, 10.0, 0.0], &z, Vec2::new(2.0, 0.0), &q0, 0.2).unwrap();
        assert!((x[0] - 2.04).abs() < 1e-12 && (x[2] - 10.4).abs() < 1e-12);
        let mut eye = z;
        (0..4).for_each(|i| eye[i][i] = 1.0);
        let (_, c) = ekf_propagate([0.0; 4], &eye, Vec2::zero(), &[[1.0, 0.0], [0.0, 1.0]], 1.0).unwrap();
        let tr: f64 = (0..4).map(|i| c[i][i]).sum();
        assert!((tr - 8.5).abs() < 1e-12);
    }

    #[test]
    fn ekf_rejects_indefinite() {
        let mut bad = mat4_zero::<f64>();
        bad[0][0] = -1.0;
        let q = [[0.0; 2]; 2];
        assert!(matches!(
            ekf_propagate([0.0; 4], &bad, Vec2::zero(), &q, 0.1),
            Err(Error::NotPsd(_))
        ));
        let q_bad = [[1.0, 2.0], [2.0, 1.0]];
        assert!(ekf_propagate([0.0; 4], &mat4_zero(), Vec2::zero(), &q_bad, 0.1).is_err());
    }

    #[test]
    fn attention_limits() {
        let hs: Vec<Vec<f64>> = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]];
        let (a, ctx) = attend_scores(&[0.3, 0.3, 0.3], &hs);
        assert!(a.iter().all(|&w| (w - 1.0 / 3.0).abs() < 1e-15));
        assert!((ctx[0] - 1.0).abs() < 1e-15 && (ctx[1] - 1.0).abs() < 1e-15);
        let (_, ctx) = attend_scores(&[0.0, 50.0, 0.0], &hs);
        assert!((ctx[0] - 0.0).abs() < 1e-9 && (ctx[1] - 1.0).abs() < 1e-9);
        let (a1, _) = attend_scores(&[0.1, -0.4, 0.9], &hs);
        let (a2, _) = attend_scores(&[7.1, 6.6, 7.9], &hs);
        for (x, y) in a1.iter().zip(&a2) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rollout_adjoint_matches_finite_difference() {
        let init = [0.5, -0.2, 8.0, 0.3];
        let ctrl = vec![[0.3, -0.1], [0.2, 0.4], [-0.5, 0.1]];
        let ls = vec![[0.1, -0.3], [0.2, 0.0], [-0.4, 0.5]];
        let dt = 0.2;
        // scalar functional: weighted sum of states and covariance entries
        let wx = |p: usize, i: usize| 0.3 + 0.1 * (p as f64) - 0.05 * (i as f64);
        let wc = |p: usize, i: usize, j: usize| 0.2 * (p as f64 + 1.0) + 0.07 * (i as f64) - 0.03 * (j as f64);
        let loss = |ctrl: &[[f64; 2]], ls: &[[f64; 2]]| {
            let (xs, cs) = rollout(&init, ctrl, ls, dt);
            let mut s = 0.0;
            for p in 0..xs.len() {
                for i in 0..4 {
                    s += wx(p, i) * xs[p][i];
                    for j in 0..4 {
                        s += wc(p, i, j) * cs[p][i][j];
                    }
                }
            }
            s
        };
        let dxs: Vec<[f64; 4]> = (0..3).map(|p| std::array::from_fn(|i| wx(p, i))).collect();
        let dcs: Vec<Mat4<f64>> = (0..3)
            .map(|p| std::array::from_fn(|i| std::array::from_fn(|j| wc(p, i, j))))
            .collect();
        let (du, dl) = rollout_backward(&ls, dt, &dxs, &dcs);
        let eps = 1e-6;
        for p in 0..3 {
            for k in 0..2 {
                let mut a = ctrl.clone();
                let mut b = ctrl.clone();
                a[p][k] += eps;
                b[p][k] -= eps;
                let num = (loss(&a, &ls) - loss(&b, &ls)) / (2.0 * eps);
                assert!((num - du[p][k]).abs() < 1e-7, "du {p} {k}: {num} vs {}", du[p][k]);
                let mut a = ls.clone();
                let mut b = ls.clone();
                a[p][k] += eps;
                b[p][k] -= eps;
                let num = (loss(&ctrl, &a) - loss(&ctrl, &b)) / (2.0 * eps);
                assert!((num - dl[p][k]).abs() < 1e-7, "dl {p} {k}: {num} vs {}", dl[p][k]);
            }
        }
    }
}
