use super::regularizer::reg_grad;
use super::schedule::ScheduleState;
use crate::error::{Error, Result};
use crate::nn::Network;
use crate::quant::QuantPlan;
use crate::tensor::Tensor;

/// Nesterov-momentum SGD state: `v ← μv + g`, `w ← w − η(g + μv)`.
#[derive(Debug, Clone)]
pub struct NesterovSgd {
    pub momentum: f64,
    /// L2 coefficient applied to quantizable weights.
    pub weight_decay: f64,
    /// Clamp quantizable weights to their clip bounds after each update.
    pub clipping: bool,
    buffers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl NesterovSgd {
    pub fn new(net: &Network, momentum: f64, weight_decay: f64, clipping: bool) -> Self {
        let buffers = net
            .layers()
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        NesterovSgd {
            momentum,
            weight_decay,
            clipping,
            buffers,
        }
    }
}

fn check_finite(t: &Tensor, net: &Network, layer: usize, batch: usize) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteGradient {
            layer,
            name: net.layers()[layer].name().to_string(),
            batch,
        })
    }
}

fn nesterov_update(params: &mut [f64], grads: &[f64], buffer: &mut [f64], lr: f64, momentum: f64) {
    for ((w, &g), v) in params.iter_mut().zip(grads).zip(buffer.iter_mut()) {
        *v = momentum * *v + g;
        *w -= lr * (g + momentum * *v);
    }
}

/// One optimizer step on a mini-batch; returns the batch's task loss.
///
/// Quantizable weights receive `∂C/∂w + λ ∂R/∂w` (plus weight decay, if set);
/// biases and batch-norm parameters receive `∂C/∂w` only. Without a plan the
/// step is plain Nesterov SGD.
pub fn sgd_step(
    net: &mut Network,
    batch: &Tensor,
    labels: &[usize],
    schedule: &ScheduleState,
    plan: Option<&QuantPlan>,
    opt: &mut NesterovSgd,
    batch_index: usize,
) -> Result<f64> {
    net.forward(batch)?;
    let grads = net.backward(labels)?;
    let reg = match plan {
        Some(plan) if schedule.lambda != 0.0 => Some(reg_grad(net, plan)?),
        Some(plan) => {
            plan.check(net)?;
            None
        }
        None => None,
    };

    for (i, mut g) in grads.layers.into_iter().enumerate() {
        if g.weights.is_empty() && g.bias.is_empty() {
            continue;
        }
        let quantizable = net.layers()[i].quantizable();
        if quantizable {
            if let Some(r) = reg.as_ref().and_then(|r| r[i].as_ref()) {
                for (gw, &rw) in g.weights.data_mut().iter_mut().zip(r.data()) {
                    *gw += schedule.lambda * rw;
                }
            }
            if opt.weight_decay != 0.0 {
                let wd = opt.weight_decay;
                for (gw, &w) in g.weights.data_mut().iter_mut().zip(net.layers()[i].weights.data()) {
                    *gw += wd * w;
                }
            }
        }
        check_finite(&g.weights, net, i, batch_index)?;
        check_finite(&g.bias, net, i, batch_index)?;

        let layer = &mut net.layers_mut()[i];
        let (wbuf, bbuf) = &mut opt.buffers[i];
        nesterov_update(layer.weights.data_mut(), g.weights.data(), wbuf, schedule.lr, opt.momentum);
        nesterov_update(layer.bias.data_mut(), g.bias.data(), bbuf, schedule.lr, opt.momentum);
    }

    if opt.clipping {
        if let Some(plan) = plan {
            clip_weights(net, plan)?;
        }
    }
    Ok(grads.loss)
}

/// Clamps every quantizable weight into `[−Δ·code_max, Δ·code_max]`.
pub fn clip_weights(net: &mut Network, plan: &QuantPlan) -> Result<()> {
    for i in 0..net.layers().len() {
        if let Some(spec) = plan.for_layer(net, i)? {
            let bound = spec.clip_bound();
            for w in net.layers_mut()[i].weights.data_mut() {
                *w = w.clamp(-bound, bound);
            }
        }
    }
    Ok(())
}
