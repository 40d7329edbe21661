use rand::Rng;

use crate::error::{Error, Result};

/// Layer widths used by the application-mode agent: 8 → 12 → 6 → 3.
pub const DEFAULT_LAYER_SIZES: [usize; 4] = [8, 12, 6, 3];

/// Fully connected Q-network with ReLU hidden layers and a linear head.
///
/// All parameters live in one flat vector. Layer `l` occupies
/// `outputs × inputs` weights (row-major, one row per output unit) followed
/// by `outputs` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// One training example: input, taken action, regression target.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub input: &'a [f64],
    pub action: usize,
    pub target: f64,
}

fn layout(sizes: &[usize]) -> Result<(Vec<usize>, usize)> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::Config(format!(
            "network needs at least two non-zero layer sizes, got {sizes:?}"
        )));
    }
    let mut offsets = Vec::with_capacity(sizes.len() - 1);
    let mut total = 0;
    for pair in sizes.windows(2) {
        offsets.push(total);
        total += pair[0] * pair[1] + pair[1];
    }
    Ok((offsets, total))
}

impl QNetwork {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        let (offsets, total) = layout(sizes)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            offsets,
            params: vec![0.0; total],
        })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for l in 0..net.num_layers() {
            let (n_in, n_out) = (net.sizes[l], net.sizes[l + 1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            for w in net.layer_weights_mut(l) {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(net)
    }

    pub fn from_parameters(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let (offsets, total) = layout(sizes)?;
        if params.len() != total {
            return Err(Error::Checkpoint(format!(
                "layer sizes {sizes:?} need {total} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            offsets,
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn weight_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = self.offsets[l];
        start..start + self.sizes[l] * self.sizes[l + 1]
    }

    fn bias_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = self.weight_range(l).end;
        start..start + self.sizes[l + 1]
    }

    pub fn layer_weights(&self, l: usize) -> &[f64] {
        &self.params[self.weight_range(l)]
    }

    pub fn layer_weights_mut(&mut self, l: usize) -> &mut [f64] {
        let r = self.weight_range(l);
        &mut self.params[r]
    }

    pub fn layer_bias(&self, l: usize) -> &[f64] {
        &self.params[self.bias_range(l)]
    }

    pub fn layer_bias_mut(&mut self, l: usize) -> &mut [f64] {
        let r = self.bias_range(l);
        &mut self.params[r]
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Domain(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite network input {input:?}")));
        }
        Ok(())
    }

    /// Q-values for every action.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.trace(input).pop().expect("at least one layer"))
    }

    /// Activations of every layer, input first, output last.
    fn trace(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(input.to_vec());
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = self.layer_weights(l);
            let b = self.layer_bias(l);
            let x = &acts[l];
            let hidden = l + 1 < self.num_layers();
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = b[o] + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
                    if hidden {
                        z.max(0.0)
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    /// Mean squared error over `batch` between the Q-value of each taken
    /// action and its target.
    pub fn loss(&self, batch: &[Sample<'_>]) -> Result<f64> {
        self.validate_batch(batch)?;
        let total: f64 = batch
            .iter()
            .map(|s| {
                let q = self.trace(s.input).pop().expect("output layer");
                (q[s.action] - s.target).powi(2)
            })
            .sum();
        Ok(total / batch.len() as f64)
    }

    fn validate_batch(&self, batch: &[Sample<'_>]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Domain("empty training batch".into()));
        }
        for s in batch {
            self.check_input(s.input)?;
            if s.action >= self.output_dim() {
                return Err(Error::Domain(format!(
                    "action {} out of range for {} outputs",
                    s.action,
                    self.output_dim()
                )));
            }
        }
        Ok(())
    }

    /// Loss and its gradient with respect to every parameter (same layout as
    /// [`parameters`](Self::parameters)). Targets are treated as constants.
    pub fn loss_and_gradient(&self, batch: &[Sample<'_>]) -> Result<(f64, Vec<f64>)> {
        self.validate_batch(batch)?;
        let scale = 1.0 / batch.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for s in batch {
            let acts = self.trace(s.input);
            let q = &acts[acts.len() - 1];
            let err = q[s.action] - s.target;
            loss += err * err;
            let mut delta = vec![0.0; self.output_dim()];
            delta[s.action] = 2.0 * err * scale;
            for l in (0..self.num_layers()).rev() {
                let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
                let x = &acts[l];
                let wr = self.weight_range(l);
                let br = self.bias_range(l);
                for o in 0..n_out {
                    if delta[o] == 0.0 {
                        continue;
                    }
                    grad[br.start + o] += delta[o];
                    let row = &mut grad[wr.start + o * n_in..wr.start + (o + 1) * n_in];
                    for (g, xi) in row.iter_mut().zip(x) {
                        *g += delta[o] * xi;
                    }
                }
                if l == 0 {
                    break;
                }
                let w = self.layer_weights(l);
                delta = (0..n_in)
                    .map(|i| {
                        // x holds post-ReLU activations of layer l-1.
                        if x[i] > 0.0 {
                            (0..n_out).map(|o| w[o * n_in + i] * delta[o]).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
        Ok((loss * scale, grad))
    }

    /// FNV-1a over the parameter bit patterns.
    pub fn checksum(&self) -> u64 {
        self.params.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, p| {
            p.to_bits()
                .to_le_bytes()
                .iter()
                .fold(h, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::zeros(&DEFAULT_LAYER_SIZES).unwrap();
        assert_eq!(net.forward(&[0.3; 8]).unwrap(), vec![0.0; 3]);
        assert_eq!(net.parameters().len(), 8 * 12 + 12 + 12 * 6 + 6 + 6 * 3 + 3);
    }

    #[test]
    fn hand_computed_single_path() {
        // input e_2 → hidden unit 4 (w=2, b=0.5) → hidden unit 1 (w=-1, b=3)
        // → outputs (w=1, 0.5, -2; b=0.1, 0, 1)
        let mut net = QNetwork::zeros(&DEFAULT_LAYER_SIZES).unwrap();
        net.layer_weights_mut(0)[4 * 8 + 2] = 2.0;
        net.layer_bias_mut(0)[4] = 0.5;
        net.layer_weights_mut(1)[12 + 4] = -1.0;
        net.layer_bias_mut(1)[1] = 3.0;
        let w2 = net.layer_weights_mut(2);
        w2[1] = 1.0;
        w2[6 + 1] = 0.5;
        w2[2 * 6 + 1] = -2.0;
        net.layer_bias_mut(2).copy_from_slice(&[0.1, 0.0, 1.0]);
        let mut s = [0.0; 8];
        s[2] = 1.0;
        // h1[4] = relu(2*1 + 0.5) = 2.5; other h1 units see bias 0 → 0
        // h2[1] = relu(-1*2.5 + 3) = 0.5; h2[0] = relu(0) = 0, others 0
        // q = (0.5 + 0.1, 0.25 + 0, -1 + 1)
        assert_eq!(net.forward(&s).unwrap(), vec![0.6, 0.25, 0.0]);
        // With a larger input, h2[1] is clipped by the ReLU.
        s[2] = 2.0;
        // h1[4] = 4.5, h2[1] = relu(-1.5) = 0 → q = biases
        assert_eq!(net.forward(&s).unwrap(), vec![0.1, 0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let net = QNetwork::zeros(&DEFAULT_LAYER_SIZES).unwrap();
        assert!(matches!(net.forward(&[0.0; 7]), Err(Error::Domain(_))));
        assert!(matches!(net.forward(&[f64::NAN; 8]), Err(Error::Domain(_))));
        assert!(net.loss(&[]).is_err());
        assert!(QNetwork::zeros(&[8]).is_err());
        assert!(QNetwork::from_parameters(&[2, 2], vec![0.0; 5]).is_err());
    }

    #[test]
    fn glorot_respects_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = QNetwork::glorot(&DEFAULT_LAYER_SIZES, &mut rng).unwrap();
        for l in 0..3 {
            let (a, b) = (DEFAULT_LAYER_SIZES[l], DEFAULT_LAYER_SIZES[l + 1]);
            let lim = (6.0 / (a + b) as f64).sqrt();
            assert!(net.layer_weights(l).iter().all(|w| w.abs() <= lim));
            assert!(net.layer_bias(l).iter().all(|&b| b == 0.0));
        }
        let q = net.forward(&[1.0; 8]).unwrap();
        assert!(q.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = QNetwork::glorot(&DEFAULT_LAYER_SIZES, &mut rng).unwrap();
        let inputs: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..8).map(|j| ((i * 8 + j) as f64 * 0.37).sin().abs()).collect())
            .collect();
        let batch: Vec<Sample<'_>> = inputs
            .iter()
            .enumerate()
            .map(|(i, x)| Sample { input: x, action: i % 3, target: 0.2 * i as f64 })
            .collect();
        let (_, grad) = net.loss_and_gradient(&batch).unwrap();
        let h = 1e-6;
        for k in 0..net.parameters().len() {
            let mut plus = net.clone();
            plus.parameters_mut()[k] += h;
            let mut minus = net.clone();
            minus.parameters_mut()[k] -= h;
            let fd = (plus.loss(&batch).unwrap() - minus.loss(&batch).unwrap()) / (2.0 * h);
            assert!((fd - grad[k]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", grad[k]);
        }
    }
}
