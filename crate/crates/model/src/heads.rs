//! Evidence and imbalance heads, and the ways their outputs combine.

use ndarray::ArrayView1;

use crate::layers::sigmoid;
use crate::params::Linear;
use crate::ModelError;

/// Affine `D -> 2` followed by `2 * sigmoid`, giving `(w_p, w_c)` in `(0, 2)`.
/// Zero weights and zero bias give exactly `(1, 1)`.
pub fn imbalance_head(theta: ArrayView1<f64>, head: &Linear) -> (f64, f64) {
    let z = head.w.dot(&theta) + &head.b;
    (2.0 * sigmoid(z[0]), 2.0 * sigmoid(z[1]))
}

/// How `(w_p, w_c)` act on the evidence vector before `alpha = e + 1`.
pub trait HeadComposition: Send + Sync {
    fn name(&self) -> &'static str;

    fn adjust(&self, evidence: &[f64], w_p: f64, w_c: f64, dominant: usize) -> Vec<f64>;

    /// Maps `dL/d(adjusted)` to `(dL/d evidence, dL/dw_p, dL/dw_c)`.
    fn backward(&self, d_adjusted: &[f64], evidence: &[f64], w_p: f64, w_c: f64, dominant: usize)
        -> (Vec<f64>, f64, f64);
}

/// Dominant class scaled by `w_p`, every other class by `w_c`.
pub struct DualHead;

impl HeadComposition for DualHead {
    fn name(&self) -> &'static str {
        "dual"
    }

    fn adjust(&self, evidence: &[f64], w_p: f64, w_c: f64, dominant: usize) -> Vec<f64> {
        evidence
            .iter()
            .enumerate()
            .map(|(j, &e)| if j == dominant { w_p * e } else { w_c * e })
            .collect()
    }

    fn backward(
        &self,
        d_adjusted: &[f64],
        evidence: &[f64],
        w_p: f64,
        w_c: f64,
        dominant: usize,
    ) -> (Vec<f64>, f64, f64) {
        let mut de = Vec::with_capacity(evidence.len());
        let (mut dwp, mut dwc) = (0.0, 0.0);
        for (j, (&g, &e)) in d_adjusted.iter().zip(evidence).enumerate() {
            if j == dominant {
                de.push(g * w_p);
                dwp += g * e;
            } else {
                de.push(g * w_c);
                dwc += g * e;
            }
        }
        (de, dwp, dwc)
    }
}

/// Ignores the imbalance head: the `w_p = w_c = 1` ablation.
pub struct SingleHead;

impl HeadComposition for SingleHead {
    fn name(&self) -> &'static str {
        "single"
    }

    fn adjust(&self, evidence: &[f64], _: f64, _: f64, _: usize) -> Vec<f64> {
        evidence.to_vec()
    }

    fn backward(&self, d_adjusted: &[f64], _: &[f64], _: f64, _: f64, _: usize) -> (Vec<f64>, f64, f64) {
        (d_adjusted.to_vec(), 0.0, 0.0)
    }
}

pub const COMPOSITION_NAMES: [&str; 2] = ["dual", "single"];

pub fn composition_by_name(name: &str) -> Result<Box<dyn HeadComposition>, ModelError> {
    match name {
        "dual" => Ok(Box::new(DualHead)),
        "single" => Ok(Box::new(SingleHead)),
        other => Err(ModelError::UnknownVariant {
            kind: "head composition",
            name: other.to_string(),
            known: COMPOSITION_NAMES.join(", "),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1, Array2};

    #[test]
    fn identity_at_init_and_bounded() {
        let head = Linear::zeros(2, 4);
        assert_eq!(imbalance_head(Array1::ones(4).view(), &head), (1.0, 1.0));
        let mut big = Linear::zeros(2, 1);
        big.b = array![800.0, -800.0];
        let (wp, wc) = imbalance_head(Array1::zeros(1).view(), &big);
        assert_eq!(wp, 2.0);
        assert!(wc >= 0.0 && wc < 1e-300);
    }

    #[test]
    fn scalar_hand_computation() {
        let head = Linear {
            w: Array2::from_shape_vec((2, 3), vec![0.5, -1.0, 0.25, 0.1, 0.2, -0.3]).unwrap(),
            b: array![0.1, -0.2],
        };
        let theta = array![1.0, 2.0, -4.0];
        let z0: f64 = 0.5 - 2.0 - 1.0 + 0.1;
        let z1: f64 = 0.1 + 0.4 + 1.2 - 0.2;
        let (wp, wc) = imbalance_head(theta.view(), &head);
        assert!((wp - 2.0 / (1.0 + (-z0).exp())).abs() < 1e-15);
        assert!((wc - 2.0 / (1.0 + (-z1).exp())).abs() < 1e-15);
    }

    #[test]
    fn dual_adjustment_by_hand() {
        let mut e = vec![1.0; 10];
        e[0] = 4.0;
        let adj = DualHead.adjust(&e, 0.5, 1.0, 0);
        assert_eq!(adj[0], 2.0);
        assert!(adj[1..].iter().all(|&v| v == 1.0));
        assert_eq!(SingleHead.adjust(&e, 0.5, 1.7, 0), e);
    }

    #[test]
    fn registry() {
        for n in COMPOSITION_NAMES {
            assert_eq!(composition_by_name(n).unwrap().name(), n);
        }
        assert!(composition_by_name("triple").is_err());
    }
}
