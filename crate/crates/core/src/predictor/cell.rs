//! Graph-gated recurrent encoder: a GRU whose gates also see the mean of the
//! neighbors' inputs and previous hidden states.

use std::collections::BTreeMap;

use rand::Rng;

use crate::predictor::features::{FeatureVector, HistoryStep, D_IN};
use crate::predictor::linalg::{matvec, matvec_acc, matvec_t_acc, outer_acc};
use crate::scalar::Real;
use crate::scenario::{AgentId, InteractionGraph};

/// Gate blocks are stacked in the order reset, update, candidate; every
/// matrix has `3 * hidden` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphCellParams<T> {
    pub hidden: usize,
    pub w_self: Vec<T>,
    pub w_nbr: Vec<T>,
    pub u_self: Vec<T>,
    pub u_nbr: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> GraphCellParams<T> {
    pub fn zeros(hidden: usize) -> Self {
        let g = 3 * hidden;
        Self {
            hidden,
            w_self: vec![T::zero(); g * D_IN],
            w_nbr: vec![T::zero(); g * D_IN],
            u_self: vec![T::zero(); g * hidden],
            u_nbr: vec![T::zero(); g * hidden],
            bias: vec![T::zero(); g],
        }
    }

    pub fn random<R: Rng>(hidden: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(hidden);
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = T::lit(rng.gen_range(-scale..scale));
            }
        }
        p
    }

    pub fn shapes(hidden: usize) -> Vec<(&'static str, Vec<usize>)> {
        let g = 3 * hidden;
        vec![
            ("cell.w_self", vec![g, D_IN]),
            ("cell.w_nbr", vec![g, D_IN]),
            ("cell.u_self", vec![g, hidden]),
            ("cell.u_nbr", vec![g, hidden]),
            ("cell.bias", vec![g]),
        ]
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        vec![&self.w_self, &self.w_nbr, &self.u_self, &self.u_nbr, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            &mut self.w_self,
            &mut self.w_nbr,
            &mut self.u_self,
            &mut self.u_nbr,
            &mut self.bias,
        ]
    }
}

#[derive(Debug, Clone)]
struct AgentCache<T> {
    x: [T; D_IN],
    xn: [T; D_IN],
    hp: Vec<T>,
    hn: Vec<T>,
    /// Recurrent pre-activations `U_self h + U_nbr h̄`, all three blocks.
    xi: Vec<T>,
    r: Vec<T>,
    z: Vec<T>,
    c: Vec<T>,
}

#[derive(Debug, Clone)]
struct StepCache<T> {
    agents: Vec<AgentCache<T>>,
    /// Index of each agent in the previous step, if it was present.
    prev_idx: Vec<Option<usize>>,
    neighbors: Vec<Vec<usize>>,
}

/// Intermediate values kept by [`encode`] for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache<T> {
    steps: Vec<StepCache<T>>,
    target_idx: Vec<usize>,
}

fn mean_of<T: Real>(rows: &[usize], get: impl Fn(usize) -> Vec<T>, len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); len];
    if rows.is_empty() {
        return out;
    }
    for &w in rows {
        for (o, v) in out.iter_mut().zip(get(w)) {
            *o += v;
        }
    }
    let n = T::lit(rows.len() as f64);
    out.iter_mut().for_each(|o| *o /= n);
    out
}

fn step_forward<T: Real>(
    p: &GraphCellParams<T>,
    features: &[FeatureVector<T>],
    neighbors: &[Vec<usize>],
    hprev: &[Vec<T>],
) -> (Vec<Vec<T>>, Vec<AgentCache<T>>) {
    let h = p.hidden;
    let g = 3 * h;
    let mut out = Vec::with_capacity(features.len());
    let mut caches = Vec::with_capacity(features.len());
    for (j, fv) in features.iter().enumerate() {
        let x = fv.0;
        let xn_v = mean_of(&neighbors[j], |w| features[w].0.to_vec(), D_IN);
        let mut xn = [T::zero(); D_IN];
        xn.copy_from_slice(&xn_v);
        let hp = hprev[j].clone();
        let hn = mean_of(&neighbors[j], |w| hprev[w].clone(), h);

        let mut kappa = vec![T::zero(); g];
        matvec(&p.w_self, g, D_IN, &x, &mut kappa);
        matvec_acc(&p.w_nbr, g, D_IN, &xn, &mut kappa);
        let mut xi = vec![T::zero(); g];
        matvec(&p.u_self, g, h, &hp, &mut xi);
        matvec_acc(&p.u_nbr, g, h, &hn, &mut xi);

        let mut r = vec![T::zero(); h];
        let mut z = vec![T::zero(); h];
        let mut c = vec![T::zero(); h];
        let mut hnew = vec![T::zero(); h];
        for k in 0..h {
            r[k] = (kappa[k] + xi[k] + p.bias[k]).sigmoid();
            z[k] = (kappa[h + k] + xi[h + k] + p.bias[h + k]).sigmoid();
            c[k] = (kappa[2 * h + k] + r[k] * xi[2 * h + k] + p.bias[2 * h + k]).tanh();
            hnew[k] = (T::one() - z[k]) * c[k] + z[k] * hp[k];
        }
        out.push(hnew);
        caches.push(AgentCache {
            x,
            xn,
            hp,
            hn,
            xi,
            r,
            z,
            c,
        });
    }
    (out, caches)
}

/// One recurrent update for every agent in `features`. Neighborhoods come
/// from `graph`; agents missing from `prev` start from a zero hidden state.
pub fn cell_step<T: Real>(
    params: &GraphCellParams<T>,
    features: &BTreeMap<AgentId, FeatureVector<T>>,
    prev: &BTreeMap<AgentId, Vec<T>>,
    graph: &InteractionGraph<T>,
) -> BTreeMap<AgentId, Vec<T>> {
    let step = HistoryStep::new(graph.frame, features, graph);
    let hprev: Vec<Vec<T>> = step
        .ids
        .iter()
        .map(|id| prev.get(id).cloned().unwrap_or_else(|| vec![T::zero(); params.hidden]))
        .collect();
    let (hs, _) = step_forward(params, &step.features, &step.neighbors, &hprev);
    step.ids.into_iter().zip(hs).collect()
}

/// Runs the cell over the history; returns the target's hidden state after
/// each step.
pub fn encode<T: Real>(
    params: &GraphCellParams<T>,
    steps: &[HistoryStep<T>],
    target: AgentId,
) -> (Vec<Vec<T>>, EncoderCache<T>) {
    let h = params.hidden;
    let mut prev: Option<(&HistoryStep<T>, Vec<Vec<T>>)> = None;
    let mut cache = EncoderCache {
        steps: Vec::with_capacity(steps.len()),
        target_idx: Vec::with_capacity(steps.len()),
    };
    let mut target_h = Vec::with_capacity(steps.len());
    for step in steps {
        let prev_idx: Vec<Option<usize>> = step
            .ids
            .iter()
            .map(|&id| prev.as_ref().and_then(|(ps, _)| ps.index_of(id)))
            .collect();
        let hprev: Vec<Vec<T>> = prev_idx
            .iter()
            .map(|pi| match (pi, &prev) {
                (Some(i), Some((_, hs))) => hs[*i].clone(),
                _ => vec![T::zero(); h],
            })
            .collect();
        let (hs, agents) = step_forward(params, &step.features, &step.neighbors, &hprev);
        let ti = step.index_of(target).expect("target present at every history step");
        target_h.push(hs[ti].clone());
        cache.target_idx.push(ti);
        cache.steps.push(StepCache {
            agents,
            prev_idx,
            neighbors: step.neighbors.clone(),
        });
        prev = Some((step, hs));
    }
    (target_h, cache)
}

/// Accumulates parameter gradients given `d_target[s]`, the loss gradient
/// with respect to the target's hidden state after step `s`.
pub fn encode_backward<T: Real>(
    params: &GraphCellParams<T>,
    cache: &EncoderCache<T>,
    d_target: &[Vec<T>],
    grads: &mut GraphCellParams<T>,
) {
    let h = params.hidden;
    let g = 3 * h;
    let n_steps = cache.steps.len();
    let mut dh: Vec<Vec<T>> = vec![vec![T::zero(); h]; cache.steps[n_steps - 1].agents.len()];
    for s in (0..n_steps).rev() {
        let sc = &cache.steps[s];
        for (o, &d) in dh[cache.target_idx[s]].iter_mut().zip(&d_target[s]) {
            *o += d;
        }
        let mut dhprev = vec![vec![T::zero(); h]; sc.agents.len()];
        for (j, ac) in sc.agents.iter().enumerate() {
            let dhj = &dh[j];
            if dhj.iter().all(|&v| v == T::zero()) {
                continue;
            }
            let mut dpre = vec![T::zero(); g];
            let mut dxi = vec![T::zero(); g];
            for k in 0..h {
                let (r, z, c) = (ac.r[k], ac.z[k], ac.c[k]);
                let dc = dhj[k] * (T::one() - z);
                let dz = dhj[k] * (ac.hp[k] - c);
                dhprev[j][k] += dhj[k] * z;
                let dac = dc * (T::one() - c * c);
                let dr = dac * ac.xi[2 * h + k];
                let dar = dr * r * (T::one() - r);
                let daz = dz * z * (T::one() - z);
                dpre[k] = dar;
                dpre[h + k] = daz;
                dpre[2 * h + k] = dac;
                dxi[k] = dar;
                dxi[h + k] = daz;
                dxi[2 * h + k] = dac * r;
            }
            outer_acc(&mut grads.w_self, g, D_IN, &dpre, &ac.x);
            outer_acc(&mut grads.w_nbr, g, D_IN, &dpre, &ac.xn);
            outer_acc(&mut grads.u_self, g, h, &dxi, &ac.hp);
            outer_acc(&mut grads.u_nbr, g, h, &dxi, &ac.hn);
            for (b, &d) in grads.bias.iter_mut().zip(&dpre) {
                *b += d;
            }
            matvec_t_acc(&params.u_self, g, h, &dxi, &mut dhprev[j]);
            let nb = &sc.neighbors[j];
            if !nb.is_empty() {
                let mut dhn = vec![T::zero(); h];
                matvec_t_acc(&params.u_nbr, g, h, &dxi, &mut dhn);
                let n = T::lit(nb.len() as f64);
                for &w in nb {
                    for (o, &d) in dhprev[w].iter_mut().zip(&dhn) {
                        *o += d / n;
                    }
                }
            }
        }
        if s == 0 {
            break;
        }
        let mut next = vec![vec![T::zero(); h]; cache.steps[s - 1].agents.len()];
        for (j, pi) in sc.prev_idx.iter().enumerate() {
            if let Some(i) = pi {
                for (o, &d) in next[*i].iter_mut().zip(&dhprev[j]) {
                    *o += d;
                }
            }
        }
        dh = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn zero_params_keep_half_state() {
        // with all weights zero: r = z = 1/2, c = 0, so h' = h / 2
        let p = GraphCellParams::<f64>::zeros(4);
        let mut feats = BTreeMap::new();
        feats.insert(7, FeatureVector([1.0; D_IN]));
        let mut prev = BTreeMap::new();
        prev.insert(7, vec![1.0, -2.0, 0.5, 0.0]);
        let g = InteractionGraph::empty(7, 0, 50.0);
        let out = cell_step(&p, &feats, &prev, &g);
        assert_eq!(out[&7], vec![0.5, -1.0, 0.25, 0.0]);
    }

    #[test]
    fn neighbor_changes_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = GraphCellParams::<f64>::random(5, 0.5, &mut rng);
        let mut feats = BTreeMap::new();
        feats.insert(1, FeatureVector([0.1, 0.2, 1.0, 0.0, 0.0, 0.0, 0.0]));
        feats.insert(2, FeatureVector([0.5, 0.3, 0.9, 0.1, 0.0, 0.0, 0.0]));
        let prev = BTreeMap::new();
        let alone = InteractionGraph::empty(1, 0, 50.0);
        let mut linked = alone.clone();
        linked.edges = BTreeSet::from([(1, 2), (2, 1)]);
        let a = cell_step(&p, &feats, &prev, &alone);
        let b = cell_step(&p, &feats, &prev, &linked);
        assert_ne!(a[&1], b[&1]);
    }
}
