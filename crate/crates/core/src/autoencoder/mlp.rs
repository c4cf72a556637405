use crate::error::{Error, Result};
use crate::numcore::{Matrix, SeededRng};

/// Affine layer `y = x W + b` with `W` stored in×out.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Linear {
    /// Kaiming-uniform weights (ReLU gain), zero bias.
    pub fn kaiming(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Self {
        let bound = (6.0 / fan_in.max(1) as f32).sqrt();
        Linear { weight: rng.uniform_matrix(fan_in, fan_out, -bound, bound), bias: Matrix::zeros(1, fan_out) }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = x.matmul(&self.weight)?;
        y.add_row_broadcast(&self.bias)?;
        Ok(y)
    }
}

/// Multilayer perceptron with ReLU between layers and identity output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Activations kept from a forward pass for backprop.
pub struct MlpTrace {
    /// Input to each layer (post-ReLU for all but the first).
    inputs: Vec<Matrix>,
    pub output: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<(Matrix, Matrix)>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrads {
            layers: mlp
                .layers
                .iter()
                .map(|l| (Matrix::zeros(l.weight.rows(), l.weight.cols()), Matrix::zeros(1, l.bias.cols())))
                .collect(),
        }
    }

    pub fn axpy(&mut self, alpha: f32, other: &MlpGrads) -> Result<()> {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.axpy(alpha, ow)?;
            b.axpy(alpha, ob)?;
        }
        Ok(())
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(|(w, b)| [w, b]).collect()
    }
}

impl Mlp {
    /// `dims = [in, hidden.., out]`, so `dims.len() - 1` layers.
    pub fn new(dims: &[usize], rng: &mut SeededRng) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Parameter(format!("invalid MLP dims {dims:?}")));
        }
        Ok(Mlp { layers: dims.windows(2).map(|w| Linear::kaiming(w[0], w[1], rng)).collect() })
    }

    pub fn from_layers(layers: Vec<Linear>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Parameter("MLP needs at least one layer".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::shape(
                    "mlp",
                    format!("layer {i} outputs {} but layer {} takes {}", w[0].out_dim(), i + 1, w[1].in_dim()),
                ));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.rows() != 1 || l.bias.cols() != l.out_dim() {
                return Err(Error::shape("mlp", format!("layer {i} bias shape {:?}", l.bias.shape())));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(Linear::out_dim));
        d
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(
                "mlp_forward",
                format!("input has {} columns, network expects {}", x.cols(), self.input_dim()),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h)?;
            if i < last {
                relu_in_place(&mut h);
            }
        }
        Ok(h)
    }

    pub fn forward_traced(&self, x: &Matrix) -> Result<MlpTrace> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.forward(&h)?;
            inputs.push(h);
            h = next;
            if i < last {
                relu_in_place(&mut h);
            }
        }
        Ok(MlpTrace { inputs, output: h })
    }

    /// Gradients of the parameters and of the input, given `d loss / d output`.
    pub fn backward(&self, trace: &MlpTrace, grad_out: &Matrix) -> Result<(MlpGrads, Matrix)> {
        if grad_out.shape() != trace.output.shape() {
            return Err(Error::shape("mlp_backward", "gradient does not match output"));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.inputs[i];
            let dw = input.t_matmul(&delta)?;
            let db = delta.column_sums();
            let mut dx = delta.matmul_t(&layer.weight)?;
            if i > 0 {
                // input = relu(z) so z > 0 exactly where input > 0
                for (g, &a) in dx.data_mut().iter_mut().zip(input.data()) {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            grads.push((dw, db));
            delta = dx;
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, delta))
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }

    pub fn params(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }
}

fn relu_in_place(m: &mut Matrix) {
    for v in m.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::grad_check;

    fn mse(a: &Matrix, b: &Matrix) -> f64 {
        let n = a.len() as f64;
        a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>() / n
    }

    fn unflatten(template: &Mlp, params: &[Matrix]) -> Mlp {
        let mut m = template.clone();
        for (dst, src) in m.params_mut().into_iter().zip(params) {
            *dst = src.clone();
        }
        m
    }

    #[test]
    fn three_layer_mse_gradients_match_finite_differences() {
        let mut rng = SeededRng::new(7);
        let mlp = Mlp::new(&[5, 8, 6, 3], &mut rng).unwrap();
        let x = rng.normal_matrix(4, 5, 1.0);
        let target = rng.normal_matrix(4, 3, 1.0);

        let trace = mlp.forward_traced(&x).unwrap();
        let n = trace.output.len() as f32;
        let grad_out = trace.output.sub(&target).unwrap().scaled(2.0 / n);
        let (grads, _) = mlp.backward(&trace, &grad_out).unwrap();

        let params: Vec<Matrix> = mlp.params().into_iter().cloned().collect();
        let analytic: Vec<Matrix> = grads.tensors().into_iter().cloned().collect();
        let f = |p: &[Matrix]| mse(&unflatten(&mlp, p).forward(&x).unwrap(), &target);
        let report = grad_check(f, &params, &analytic, 1e-3).unwrap();
        assert!(report.max_rel_error < 1e-2, "{report:?}");
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(9);
        let mlp = Mlp::new(&[3, 4, 2], &mut rng).unwrap();
        let x = rng.normal_matrix(2, 3, 1.0);
        let trace = mlp.forward_traced(&x).unwrap();
        let ones = Matrix::filled(2, 2, 1.0);
        let (_, dx) = mlp.backward(&trace, &ones).unwrap();
        let f = |p: &[Matrix]| mlp.forward(&p[0]).unwrap().data().iter().map(|&v| v as f64).sum();
        let r = grad_check(f, std::slice::from_ref(&x), &[dx], 1e-3).unwrap();
        assert!(r.max_rel_error < 1e-2, "{r:?}");
    }

    #[test]
    fn traced_forward_equals_forward() {
        let mut rng = SeededRng::new(1);
        let mlp = Mlp::new(&[4, 6, 2], &mut rng).unwrap();
        let x = rng.normal_matrix(3, 4, 1.0);
        assert_eq!(mlp.forward(&x).unwrap(), mlp.forward_traced(&x).unwrap().output);
    }

    #[test]
    fn rejects_bad_dims_and_inputs() {
        let mut rng = SeededRng::new(1);
        assert!(Mlp::new(&[4], &mut rng).is_err());
        assert!(Mlp::new(&[4, 0, 2], &mut rng).is_err());
        let mlp = Mlp::new(&[4, 2], &mut rng).unwrap();
        assert!(mlp.forward(&Matrix::zeros(1, 3)).is_err());
        let bad = vec![
            Linear { weight: Matrix::zeros(2, 3), bias: Matrix::zeros(1, 3) },
            Linear { weight: Matrix::zeros(4, 1), bias: Matrix::zeros(1, 1) },
        ];
        assert!(Mlp::from_layers(bad).is_err());
    }
}
