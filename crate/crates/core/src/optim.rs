//! SGD, AdamW and Muon with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Activation, Gradients, MlpParams};
use crate::numerics::{frobenius_norm, gemm, Matrix};

/// Odd quintic used by the Newton–Schulz iteration.
pub const NS_COEFFS: (f64, f64, f64) = (3.4445, -4.7750, 2.0315);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimKind {
    Sgd,
    AdamW,
    Muon,
}

/// Which weight matrices receive decoupled decay. The bias never does.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WdPolicy {
    VOnly,
    Both,
    None,
}

impl WdPolicy {
    pub fn default_for(act: Activation) -> Self {
        match act {
            Activation::Sine => WdPolicy::VOnly,
            Activation::Relu => WdPolicy::Both,
        }
    }

    fn decays_w(self) -> bool {
        self == WdPolicy::Both
    }

    fn decays_v(self) -> bool {
        self != WdPolicy::None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    pub kind: OptimKind,
    pub lr: f64,
    pub weight_decay: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    pub momentum: f64,
    pub nesterov: bool,
    pub ns_steps: usize,
    pub ns_coeffs: (f64, f64, f64),
    pub wd_policy: WdPolicy,
}

impl OptimConfig {
    pub fn sgd(lr: f64) -> Self {
        Self {
            kind: OptimKind::Sgd,
            lr,
            weight_decay: 0.0,
            betas: (0.9, 0.999),
            eps: 1e-8,
            momentum: 0.0,
            nesterov: false,
            ns_steps: 5,
            ns_coeffs: NS_COEFFS,
            wd_policy: WdPolicy::Both,
        }
    }

    pub fn adamw(lr: f64, weight_decay: f64, wd_policy: WdPolicy) -> Self {
        Self { kind: OptimKind::AdamW, weight_decay, wd_policy, ..Self::sgd(lr) }
    }

    pub fn muon(lr: f64, weight_decay: f64, wd_policy: WdPolicy) -> Self {
        Self { kind: OptimKind::Muon, weight_decay, wd_policy, momentum: 0.95, nesterov: true, ..Self::sgd(lr) }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if !(self.weight_decay >= 0.0) {
            return bad(format!("weight decay {} must be non-negative", self.weight_decay));
        }
        let (b1, b2) = self.betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return bad(format!("betas ({b1}, {b2}) must lie in [0, 1)"));
        }
        if self.ns_steps == 0 {
            return bad("Newton–Schulz needs at least one step".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} must lie in [0, 1)", self.momentum));
        }
        Ok(())
    }
}

/// Per-parameter moment buffers. SGD and Muon use only the first.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub step: u64,
    first_w: Matrix,
    second_w: Matrix,
    first_v: Matrix,
    second_v: Matrix,
    first_b: Vec<f64>,
    second_b: Vec<f64>,
}

impl OptimState {
    pub fn new(theta: &MlpParams) -> Self {
        let (d, p) = theta.w.shape();
        let nb = theta.bias.as_ref().map_or(0, Vec::len);
        Self {
            step: 0,
            first_w: Matrix::zeros(d, p),
            second_w: Matrix::zeros(d, p),
            first_v: Matrix::zeros(p, d),
            second_v: Matrix::zeros(p, d),
            first_b: vec![0.0; nb],
            second_b: vec![0.0; nb],
        }
    }
}

fn check_shapes(theta: &MlpParams, grads: &Gradients, state: &OptimState) -> Result<()> {
    let ok = grads.dw.shape() == theta.w.shape()
        && grads.dv.shape() == theta.v.shape()
        && grads.db.as_ref().map(Vec::len) == theta.bias.as_ref().map(Vec::len)
        && state.first_w.shape() == theta.w.shape()
        && state.first_b.len() == theta.bias.as_ref().map_or(0, Vec::len);
    if ok {
        Ok(())
    } else {
        Err(Error::Shape("parameters, gradients and optimizer state disagree".into()))
    }
}

fn decay(values: &mut [f64], factor: f64) {
    if factor != 1.0 {
        values.iter_mut().for_each(|v| *v *= factor);
    }
}

fn decay_factors(cfg: &OptimConfig) -> (f64, f64) {
    let f = 1.0 - cfg.lr * cfg.weight_decay;
    let pick = |on: bool| if on { f } else { 1.0 };
    (pick(cfg.wd_policy.decays_w()), pick(cfg.wd_policy.decays_v()))
}

pub fn sgd_step(theta: &mut MlpParams, grads: &Gradients, cfg: &OptimConfig, state: &mut OptimState) -> Result<()> {
    check_shapes(theta, grads, state)?;
    state.step += 1;
    let (fw, fv) = decay_factors(cfg);
    let run = |param: &mut [f64], g: &[f64], buf: &mut [f64], factor: f64| {
        decay(param, factor);
        for ((x, &gi), b) in param.iter_mut().zip(g).zip(buf.iter_mut()) {
            let dir = if cfg.momentum == 0.0 {
                gi
            } else {
                *b = cfg.momentum * *b + gi;
                if cfg.nesterov {
                    gi + cfg.momentum * *b
                } else {
                    *b
                }
            };
            *x -= cfg.lr * dir;
        }
    };
    run(theta.w.as_mut_slice(), grads.dw.as_slice(), state.first_w.as_mut_slice(), fw);
    run(theta.v.as_mut_slice(), grads.dv.as_slice(), state.first_v.as_mut_slice(), fv);
    if let (Some(b), Some(db)) = (theta.bias.as_mut(), grads.db.as_ref()) {
        run(b, db, &mut state.first_b, 1.0);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn adam_update(param: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], cfg: &OptimConfig, step: u64, factor: f64) {
    let (b1, b2) = cfg.betas;
    let c1 = 1.0 - b1.powi(step as i32);
    let c2 = 1.0 - b2.powi(step as i32);
    decay(param, factor);
    for i in 0..param.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        param[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// Bias-corrected Adam with decoupled decay applied first, as PyTorch does.
pub fn adamw_step(theta: &mut MlpParams, grads: &Gradients, cfg: &OptimConfig, state: &mut OptimState) -> Result<()> {
    check_shapes(theta, grads, state)?;
    state.step += 1;
    let t = state.step;
    let (fw, fv) = decay_factors(cfg);
    adam_update(theta.w.as_mut_slice(), grads.dw.as_slice(), state.first_w.as_mut_slice(), state.second_w.as_mut_slice(), cfg, t, fw);
    adam_update(theta.v.as_mut_slice(), grads.dv.as_slice(), state.first_v.as_mut_slice(), state.second_v.as_mut_slice(), cfg, t, fv);
    if let (Some(b), Some(db)) = (theta.bias.as_mut(), grads.db.as_ref()) {
        adam_update(b, db, &mut state.first_b, &mut state.second_b, cfg, t, 1.0);
    }
    Ok(())
}

/// `X ← aX + (bA + cA²)X` with `A = XXᵀ`, from `X₀ = G/‖G‖_F`, iterating
/// on the wide orientation.
pub fn newton_schulz_orthogonalize(g: &Matrix, steps: usize) -> Matrix {
    newton_schulz_with(g, steps, NS_COEFFS)
}

pub fn newton_schulz_with(g: &Matrix, steps: usize, (a, b, c): (f64, f64, f64)) -> Matrix {
    let norm = frobenius_norm(g);
    if norm == 0.0 {
        return Matrix::zeros(g.rows(), g.cols());
    }
    let tall = g.rows() > g.cols();
    let mut x = if tall { g.transpose() } else { g.clone() };
    x.scale(1.0 / norm);
    let n = x.rows();
    let mut gram = Matrix::zeros(n, n);
    let mut poly = Matrix::zeros(n, n);
    let mut next = Matrix::zeros(n, x.cols());
    for _ in 0..steps {
        gemm(1.0, &x, false, &x, true, 0.0, &mut gram);
        gemm(c, &gram, false, &gram, false, 0.0, &mut poly);
        poly.axpy(b, &gram);
        next.as_mut_slice().copy_from_slice(x.as_slice());
        gemm(1.0, &poly, false, &x, false, a, &mut next);
        std::mem::swap(&mut x, &mut next);
    }
    if tall {
        x.transpose()
    } else {
        x
    }
}

fn muon_matrix(param: &mut Matrix, g: &Matrix, buf: &mut Matrix, cfg: &OptimConfig, factor: f64) {
    let mu = cfg.momentum;
    buf.scale(mu);
    buf.axpy(1.0, g);
    let dir = if cfg.nesterov {
        let mut d = g.clone();
        d.axpy(mu, buf);
        d
    } else {
        buf.clone()
    };
    let ortho = newton_schulz_with(&dir, cfg.ns_steps, cfg.ns_coeffs);
    let (r, c) = param.shape();
    let aspect = (r.max(c) as f64 / r.min(c).max(1) as f64).sqrt();
    decay(param.as_mut_slice(), factor);
    param.axpy(-cfg.lr * aspect, &ortho);
}

/// Muon on `W` and `V`; the bias goes through AdamW without decay.
pub fn muon_step(theta: &mut MlpParams, grads: &Gradients, cfg: &OptimConfig, state: &mut OptimState) -> Result<()> {
    check_shapes(theta, grads, state)?;
    state.step += 1;
    let (fw, fv) = decay_factors(cfg);
    muon_matrix(&mut theta.w, &grads.dw, &mut state.first_w, cfg, fw);
    muon_matrix(&mut theta.v, &grads.dv, &mut state.first_v, cfg, fv);
    if let (Some(b), Some(db)) = (theta.bias.as_mut(), grads.db.as_ref()) {
        adam_update(b, db, &mut state.first_b, &mut state.second_b, cfg, state.step, 1.0);
    }
    Ok(())
}

/// Muon only applies to matrices; vectors must be routed to AdamW.
pub fn muon_vector_step(_param: &mut [f64]) -> Result<()> {
    Err(Error::NotMatrix("Muon updates matrices only; route 1-D parameters such as the bias to AdamW"))
}

pub fn step(theta: &mut MlpParams, grads: &Gradients, cfg: &OptimConfig, state: &mut OptimState) -> Result<()> {
    match cfg.kind {
        OptimKind::Sgd => sgd_step(theta, grads, cfg, state),
        OptimKind::AdamW => adamw_step(theta, grads, cfg, state),
        OptimKind::Muon => muon_step(theta, grads, cfg, state),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn scalar_net(w: f64) -> MlpParams {
        MlpParams {
            w: Matrix::from_vec(1, 1, vec![w]).unwrap(),
            v: Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            bias: None,
            act: Activation::Relu,
        }
    }

    fn grads(dw: f64, dv: f64) -> Gradients {
        Gradients {
            dw: Matrix::from_vec(1, 1, vec![dw]).unwrap(),
            dv: Matrix::from_vec(1, 1, vec![dv]).unwrap(),
            db: None,
        }
    }

    #[test]
    fn sgd_scalar() {
        let mut theta = scalar_net(1.0);
        let mut state = OptimState::new(&theta);
        sgd_step(&mut theta, &grads(2.0, 0.0), &OptimConfig::sgd(0.1), &mut state).unwrap();
        assert!((theta.w[(0, 0)] - 0.8).abs() < 1e-15);
        assert_eq!(theta.v[(0, 0)], 1.0);
    }

    #[test]
    fn adam_first_step() {
        let mut theta = scalar_net(0.0);
        let mut state = OptimState::new(&theta);
        let cfg = OptimConfig::adamw(1e-3, 0.0, WdPolicy::Both);
        adamw_step(&mut theta, &grads(1.0, 0.0), &cfg, &mut state).unwrap();
        assert!((theta.w[(0, 0)] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn adam_matches_scalar_trace() {
        let cfg = OptimConfig::adamw(1e-2, 0.0, WdPolicy::Both);
        let mut theta = scalar_net(0.5);
        let mut state = OptimState::new(&theta);
        let (mut x, mut m, mut v) = (0.5f64, 0.0f64, 0.0f64);
        for t in 1..=20 {
            let g = (t as f64 * 0.7).sin();
            adamw_step(&mut theta, &grads(g, 0.0), &cfg, &mut state).unwrap();
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 1e-2 * mh / (vh.sqrt() + 1e-8);
            assert!((theta.w[(0, 0)] - x).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_decay_respects_policy() {
        let mut rng = RngStream::new(1, 1);
        let theta0 = MlpParams::random(3, 4, Activation::Sine, true, 1.0, &mut rng);
        let zero = Gradients { dw: Matrix::zeros(3, 4), dv: Matrix::zeros(4, 3), db: Some(vec![0.0; 3]) };
        let cfg = OptimConfig::adamw(0.01, 0.5, WdPolicy::VOnly);
        let mut theta = theta0.clone();
        let mut state = OptimState::new(&theta);
        for _ in 0..7 {
            adamw_step(&mut theta, &zero, &cfg, &mut state).unwrap();
        }
        assert_eq!(theta.w, theta0.w);
        assert_eq!(theta.bias, theta0.bias);
        let f = (1.0 - 0.01 * 0.5f64).powi(7);
        for (a, b) in theta.v.as_slice().iter().zip(theta0.v.as_slice()) {
            assert!((a - b * f).abs() < 1e-12);
        }
    }

    #[test]
    fn muon_zero_gradient_only_decays() {
        let mut rng = RngStream::new(2, 1);
        let theta0 = MlpParams::random(3, 4, Activation::Relu, false, 1.0, &mut rng);
        let zero = Gradients { dw: Matrix::zeros(3, 4), dv: Matrix::zeros(4, 3), db: None };
        let cfg = OptimConfig::muon(0.1, 0.2, WdPolicy::Both);
        let mut theta = theta0.clone();
        let mut state = OptimState::new(&theta);
        muon_step(&mut theta, &zero, &cfg, &mut state).unwrap();
        let mut expect = theta0.w.clone();
        expect.scale(1.0 - 0.02);
        assert_eq!(theta.w, expect);
    }

    #[test]
    fn muon_rejects_vectors() {
        assert!(matches!(muon_vector_step(&mut [1.0]), Err(Error::NotMatrix(_))));
    }

    #[test]
    fn newton_schulz_rank_one() {
        let mut g = Matrix::zeros(3, 5);
        g[(0, 0)] = 2.0;
        let out = newton_schulz_orthogonalize(&g, 5);
        for i in 0..3 {
            for j in 0..5 {
                if (i, j) != (0, 0) {
                    assert_eq!(out[(i, j)], 0.0);
                }
            }
        }
        assert!(out[(0, 0)] > 0.5);
        assert!(newton_schulz_orthogonalize(&Matrix::zeros(2, 2), 5).is_zero());
    }

    #[test]
    fn config_validation() {
        assert!(OptimConfig::sgd(0.0).validate().is_err());
        let mut c = OptimConfig::adamw(1e-3, 0.0, WdPolicy::Both);
        c.betas = (1.0, 0.9);
        assert!(c.validate().is_err());
        c = OptimConfig::muon(1e-3, 0.0, WdPolicy::VOnly);
        assert!(c.validate().is_ok());
        c.ns_steps = 0;
        assert!(c.validate().is_err());
    }
}
