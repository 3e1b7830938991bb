use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    L1,
    L2,
}

/// Mean loss over voxels and its gradient with respect to each prediction.
pub fn loss_and_grad_values(pred: &[f64], target: &[f64], kind: LossKind) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::GridMismatch(format!(
            "prediction has {} voxels, target {}",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let mut total = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let e = p - t;
            match kind {
                LossKind::L1 => {
                    total += e.abs();
                    // sign(0) = 0
                    if e > 0.0 {
                        1.0 / n
                    } else if e < 0.0 {
                        -1.0 / n
                    } else {
                        0.0
                    }
                }
                LossKind::L2 => {
                    total += e * e;
                    2.0 * e / n
                }
            }
        })
        .collect();
    Ok((total / n, grad))
}

pub fn loss_and_grad(pred: &Volume, target: &Volume, kind: LossKind) -> Result<(f64, Vec<f64>)> {
    pred.check_same_grid(target)?;
    let p: Vec<f64> = pred.data().iter().map(|&x| x as f64).collect();
    let t: Vec<f64> = target.data().iter().map(|&x| x as f64).collect();
    loss_and_grad_values(&p, &t, kind)
}
