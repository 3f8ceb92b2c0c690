//! Proximal operators for the ℓ1 and sorted-ℓ1 penalties.

use crate::error::{Error, Result};
use crate::norms::WeightSchedule;

struct Block {
    start: usize,
    sum: f64,
    len: usize,
}

impl Block {
    fn mean(&self) -> f64 {
        self.sum / self.len as f64
    }
}

/// `argmin_x ½‖x − v‖² + Σ_j λ_j x♯_j`.
///
/// Sorts `|v|` once, subtracts the weights, and runs stack-based pool adjacent
/// violators to get the non-increasing fit. Negative blocks are clipped to
/// zero, then signs and the original order are restored.
pub fn prox_sorted_l1(v: &[f64], w: &WeightSchedule) -> Result<Vec<f64>> {
    if v.len() != w.len() {
        return Err(Error::Dimension(format!(
            "vector has length {} but weights have length {}",
            v.len(),
            w.len()
        )));
    }
    let p = v.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()));

    let lambda = w.as_slice();
    let mut stack: Vec<Block> = Vec::with_capacity(p);
    for (k, &i) in order.iter().enumerate() {
        let mut block = Block {
            start: k,
            sum: v[i].abs() - lambda[k],
            len: 1,
        };
        while let Some(top) = stack.last() {
            if top.mean() > block.mean() {
                break;
            }
            let top = stack.pop().unwrap();
            block = Block {
                start: top.start,
                sum: top.sum + block.sum,
                len: top.len + block.len,
            };
        }
        stack.push(block);
    }

    let mut out = vec![0.0; p];
    for block in &stack {
        let value = block.mean().max(0.0);
        if value == 0.0 {
            // every later block has a smaller mean
            break;
        }
        for &i in &order[block.start..block.start + block.len] {
            out[i] = value.copysign(v[i]);
        }
    }
    Ok(out)
}

/// Componentwise soft thresholding at level `t ≥ 0`.
pub fn soft_threshold(v: &[f64], t: f64) -> Vec<f64> {
    v.iter()
        .map(|&x| (x.abs() - t).max(0.0).copysign(x))
        .collect()
}
