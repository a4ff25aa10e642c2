use crate::error::shape_err;
use crate::params::ModelParams;
use crate::ModelError;

/// SGD with momentum and decoupled-into-gradient weight decay:
/// `v = mu v + g + wd p`, `p -= lr v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Option<ModelParams>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, weight_decay: f64) -> Self {
        Sgd {
            lr,
            momentum,
            weight_decay,
            velocity: None,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) -> Result<(), ModelError> {
        let velocity = self.velocity.get_or_insert_with(|| {
            let mut v = grads.clone();
            for (_, _, t) in v.tensors_mut() {
                t.fill(0.0);
            }
            v
        });
        let gs = grads.tensors();
        let vs = velocity.tensors_mut();
        let ps = params.tensors_mut();
        if gs.len() != ps.len() || vs.len() != ps.len() {
            return Err(shape_err("parameter list", &[ps.len()], &[gs.len()]));
        }
        for ((g, (_, vshape, v)), (_, pshape, p)) in gs.iter().zip(vs).zip(ps) {
            if g.shape != pshape || vshape != pshape {
                return Err(shape_err(&g.name, &pshape, &g.shape));
            }
            if !g.data.iter().all(|x| x.is_finite()) {
                return Err(ModelError::NonFiniteActivation {
                    stage: format!("gradient {}", g.name),
                });
            }
            for ((pi, vi), gi) in p.iter_mut().zip(v.iter_mut()).zip(g.data) {
                *vi = self.momentum * *vi + gi + self.weight_decay * *pi;
                *pi -= self.lr * *vi;
            }
        }
        Ok(())
    }
}
