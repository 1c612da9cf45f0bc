use crate::error::Result;
use crate::layer::EquivariantLayer;
use crate::matrix::Matrix;
use crate::pointcloud::{SegNet, VoxelizedCloud};

use super::loss::loss_ce;

pub const FD_STEP: f64 = 1e-5;
const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorError {
    pub name: String,
    pub size: usize,
    pub max_rel_err: f64,
}

/// Worst relative disagreement between analytic and central-difference gradients,
/// per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub threshold: f64,
    pub tensors: Vec<TensorError>,
}

impl GradReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors.iter().fold(0.0, |m, t| m.max(t.max_rel_err))
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() < self.threshold
    }
}

impl std::fmt::Display for GradReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for t in &self.tensors {
            writeln!(
                f,
                "{} ({} entries): max rel err {:e}",
                t.name, t.size, t.max_rel_err
            )?;
        }
        Ok(())
    }
}

/// `|a − f| / max(|a|, |f|, 1e-8)`.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Perturbs every entry of `params` by `±FD_STEP` and compares the central difference of
/// `loss` with `analytic`.
pub fn gradcheck(
    names: &[String],
    params: &mut [Vec<f64>],
    analytic: &[Vec<f64>],
    mut loss: impl FnMut(&[Vec<f64>]) -> Result<f64>,
    threshold: f64,
) -> Result<GradReport> {
    let mut tensors = Vec::with_capacity(params.len());
    for t in 0..params.len() {
        let mut worst = 0.0f64;
        for i in 0..params[t].len() {
            let orig = params[t][i];
            params[t][i] = orig + FD_STEP;
            let up = loss(params)?;
            params[t][i] = orig - FD_STEP;
            let down = loss(params)?;
            params[t][i] = orig;
            let fd = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_error(analytic[t][i], fd));
        }
        tensors.push(TensorError {
            name: names.get(t).cloned().unwrap_or_else(|| format!("param{t}")),
            size: params[t].len(),
            max_rel_err: worst,
        });
    }
    Ok(GradReport { threshold, tensors })
}

/// Cross-entropy of the network's logits, checked across every parameter tensor.
pub fn segnet_gradcheck(
    net: &SegNet<f64>,
    vox: &VoxelizedCloud,
    x: &Matrix<f64>,
    labels: &[usize],
    threshold: f64,
) -> Result<GradReport> {
    let (_, g) = loss_ce(&net.forward(vox, x)?, labels)?;
    let analytic = net.backward(vox, x, &g)?.params;
    let mut params: Vec<Vec<f64>> = net.params().iter().map(|p| p.to_vec()).collect();
    let mut probe = net.clone();
    gradcheck(
        &net.param_names(),
        &mut params,
        &analytic,
        |p| {
            for (dst, src) in probe.params_mut().into_iter().zip(p) {
                dst.copy_from_slice(src);
            }
            Ok(loss_ce(&probe.forward(vox, x)?, labels)?.0)
        },
        threshold,
    )
}

/// Cross-entropy of the layer output (one logit per output channel), checked across the
/// weights, the bias if present, and the input.
pub fn layer_gradcheck(
    layer: &EquivariantLayer<f64>,
    x: &Matrix<f64>,
    labels: &[usize],
    threshold: f64,
) -> Result<GradReport> {
    let (_, g) = loss_ce(&layer.apply(x)?, labels)?;
    let grads = layer.backward(x, &g)?;
    let mut names = vec!["weights".to_string()];
    let mut analytic = vec![grads.weights];
    let mut params = vec![layer.weights().to_vec()];
    if let (Some(gb), Some(b)) = (grads.bias, layer.bias()) {
        names.push("bias".into());
        analytic.push(gb);
        params.push(b.to_vec());
    }
    names.push("input".into());
    analytic.push(grads.input.into_vec());
    params.push(x.as_slice().to_vec());
    let mut probe = layer.clone();
    let has_bias = layer.bias().is_some();
    let (n, c) = x.shape();
    gradcheck(
        &names,
        &mut params,
        &analytic,
        |p| {
            probe.weights_mut().copy_from_slice(&p[0]);
            if has_bias {
                probe
                    .bias_mut()
                    .expect("bias present")
                    .copy_from_slice(&p[1]);
            }
            let xi = Matrix::from_vec(n, c, p[p.len() - 1].clone())?;
            Ok(loss_ce(&probe.apply(&xi)?, labels)?.0)
        },
        threshold,
    )
}
