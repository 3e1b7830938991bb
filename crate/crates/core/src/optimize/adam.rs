//! Moment-based first-order update with bias correction, one learning rate
//! per parameter group.

use serde::{Deserialize, Serialize};

use crate::field::GaussianField;
use crate::raster::GradientBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupLrs {
    pub position: f64,
    pub scale: f64,
    pub rotation: f64,
    pub amplitude: f64,
    pub relax: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    fn zeros(n: usize) -> Self {
        Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// Optimizer state; serialized as the JSON checkpoint sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub position: Moments,
    pub scale: Moments,
    pub rotation: Moments,
    pub amplitude: Moments,
    pub relax: Moments,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            step: 0,
            position: Moments::zeros(3 * n),
            scale: Moments::zeros(3 * n),
            rotation: Moments::zeros(4 * n),
            amplitude: Moments::zeros(n),
            relax: Moments::zeros(n),
        }
    }
}

struct Update {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bias1: f64,
    bias2: f64,
}

impl Update {
    fn apply<'a>(&self, params: impl Iterator<Item = &'a mut f64>, grads: impl Iterator<Item = f64>, mom: &mut Moments) {
        for (((p, g), m), v) in params.zip(grads).zip(mom.m.iter_mut()).zip(mom.v.iter_mut()) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / self.bias1;
            let v_hat = *v / self.bias2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// One update of every enabled group followed by quaternion
/// renormalization. Groups disabled by the field's ablation flags keep both
/// their parameters and their moments untouched.
pub fn step_optimizer(
    field: &mut GaussianField,
    grads: &GradientBuffer,
    state: &mut AdamState,
    lrs: &GroupLrs,
    hyper: &AdamParams,
) {
    state.step += 1;
    let t = state.step as i32;
    let flags = field.flags();
    let make = |lr| Update {
        lr,
        beta1: hyper.beta1,
        beta2: hyper.beta2,
        eps: hyper.eps,
        bias1: 1.0 - hyper.beta1.powi(t),
        bias2: 1.0 - hyper.beta2.powi(t),
    };
    {
        let p = field.params_mut();
        make(lrs.position).apply(
            p.positions.iter_mut().flatten(),
            grads.position.iter().flatten().copied(),
            &mut state.position,
        );
        make(lrs.scale).apply(
            p.log_scales.iter_mut().flatten(),
            grads.log_scale.iter().flatten().copied(),
            &mut state.scale,
        );
        make(lrs.rotation).apply(
            p.rotations.iter_mut().flatten(),
            grads.rotation.iter().flatten().copied(),
            &mut state.rotation,
        );
        if flags.amplitude_enabled {
            make(lrs.amplitude).apply(
                p.raw_amplitude.iter_mut(),
                grads.raw_amplitude.iter().copied(),
                &mut state.amplitude,
            );
        }
        if flags.relax_enabled {
            make(lrs.relax).apply(p.raw_relax.iter_mut(), grads.raw_relax.iter().copied(), &mut state.relax);
        }
    }
    field.normalize_rotations();
}
