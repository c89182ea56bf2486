//! Small fully connected networks in f64 with hand-written gradients, an
//! adaptive-moment optimizer, and a binary checkpoint format.
//!
//! Hidden layers use the rectifier (derivative taken as 0 at exactly 0);
//! the output layer is identity or tanh. Weights are stored row-major per
//! layer: `weights[l]` has `sizes[l+1]` rows of `sizes[l]` columns.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("bad architecture: {0}")]
    BadArchitecture(&'static str),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    /// Flat row-major weight matrix per layer, sizes[l+1] x sizes[l].
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub output_activation: Activation,
}

/// Post-activation values per layer (index 0 is the input) plus
/// pre-activation values per weight layer; everything backward needs.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub activations: Vec<Vec<f64>>,
    pub preacts: Vec<Vec<f64>>,
}

/// Same shapes as the weights and biases of the network they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for v in w {
                *v *= factor;
            }
        }
        for b in &mut self.biases {
            for v in b {
                *v *= factor;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Mlp {
    /// Fresh network with uniform fan-in initialization
    /// (U[-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer).
    pub fn new<R: Rng>(
        sizes: &[usize],
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self, NeuralError> {
        if sizes.len() < 2 {
            return Err(NeuralError::BadArchitecture("need at least input and output layers"));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(NeuralError::BadArchitecture("zero-width layer"));
        }
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for l in 0..sizes.len() - 1 {
            let bound = 1.0 / (sizes[l] as f64).sqrt();
            let w: Vec<f64> =
                (0..sizes[l] * sizes[l + 1]).map(|_| rng.random_range(-bound..bound)).collect();
            let b: Vec<f64> = (0..sizes[l + 1]).map(|_| rng.random_range(-bound..bound)).collect();
            weights.push(w);
            biases.push(b);
        }
        Ok(Mlp { sizes: sizes.to_vec(), weights, biases, output_activation })
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Multiply every weight and bias of the last layer by `factor`
    /// (useful to start a policy head near zero).
    pub fn scale_last_layer(&mut self, factor: f64) {
        for v in self.weights.last_mut().unwrap() {
            *v *= factor;
        }
        for v in self.biases.last_mut().unwrap() {
            *v *= factor;
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_len(), "input width mismatch");
        let mut a = x.to_vec();
        let last = self.weights.len() - 1;
        for l in 0..=last {
            let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
            let mut z = vec![0.0; rows];
            for r in 0..rows {
                z[r] = dot(&self.weights[l][r * cols..(r + 1) * cols], &a) + self.biases[l][r];
            }
            if l < last {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            } else if self.output_activation == Activation::Tanh {
                for v in &mut z {
                    *v = v.tanh();
                }
            }
            a = z;
        }
        a
    }

    pub fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, ForwardCache) {
        assert_eq!(x.len(), self.input_len(), "input width mismatch");
        let last = self.weights.len() - 1;
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        let mut preacts = Vec::with_capacity(self.weights.len());
        activations.push(x.to_vec());
        for l in 0..=last {
            let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
            let a = activations.last().unwrap();
            let mut z = vec![0.0; rows];
            for r in 0..rows {
                z[r] = dot(&self.weights[l][r * cols..(r + 1) * cols], a) + self.biases[l][r];
            }
            preacts.push(z.clone());
            if l < last {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            } else if self.output_activation == Activation::Tanh {
                for v in &mut z {
                    *v = v.tanh();
                }
            }
            activations.push(z);
        }
        (activations.last().unwrap().clone(), ForwardCache { activations, preacts })
    }

    /// Accumulate parameter gradients for upstream gradient `dy` into
    /// `grads` and return the gradient with respect to the input.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        dy: &[f64],
        grads: &mut Gradients,
    ) -> Vec<f64> {
        assert_eq!(dy.len(), self.output_len(), "output width mismatch");
        let last = self.weights.len() - 1;
        let mut dz: Vec<f64> = match self.output_activation {
            Activation::Identity => dy.to_vec(),
            Activation::Tanh => {
                let y = &cache.activations[last + 1];
                dy.iter().zip(y).map(|(g, v)| g * (1.0 - v * v)).collect()
            }
        };
        for l in (0..=last).rev() {
            let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
            let a_prev = &cache.activations[l];
            for r in 0..rows {
                let g = dz[r];
                let wrow = &mut grads.weights[l][r * cols..(r + 1) * cols];
                for (wg, ap) in wrow.iter_mut().zip(a_prev) {
                    *wg += g * ap;
                }
                grads.biases[l][r] += g;
            }
            // dx = W^T dz, with the rectifier mask of the previous layer.
            let mut dx = vec![0.0; cols];
            for r in 0..rows {
                let g = dz[r];
                let wrow = &self.weights[l][r * cols..(r + 1) * cols];
                for (d, w) in dx.iter_mut().zip(wrow) {
                    *d += g * w;
                }
            }
            if l > 0 {
                for (d, z) in dx.iter_mut().zip(&cache.preacts[l - 1]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            dz = dx;
        }
        dz
    }

    pub fn backward(&self, cache: &ForwardCache, dy: &[f64]) -> (Gradients, Vec<f64>) {
        let mut grads = Gradients::zeros_like(self);
        let dx = self.backward_into(cache, dy, &mut grads);
        (grads, dx)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second-moment accumulators with bias correction.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub cfg: AdamConfig,
    m: Gradients,
    v: Gradients,
    t: u64,
}

impl AdamState {
    pub fn new(net: &Mlp, cfg: AdamConfig) -> Self {
        AdamState { cfg, m: Gradients::zeros_like(net), v: Gradients::zeros_like(net), t: 0 }
    }

    pub fn step(&mut self, params: &mut Mlp, grads: &Gradients) {
        self.t += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= c.lr * mhat / (vhat.sqrt() + c.eps);
            }
        };
        for l in 0..params.weights.len() {
            update(&mut params.weights[l], &grads.weights[l], &mut self.m.weights[l], &mut self.v.weights[l]);
            update(&mut params.biases[l], &grads.biases[l], &mut self.m.biases[l], &mut self.v.biases[l]);
        }
    }
}

/// Soft update: target <- (1 - tau) * target + tau * source.
pub fn polyak_update(target: &mut Mlp, source: &Mlp, tau: f64) {
    assert_eq!(target.sizes, source.sizes, "architecture mismatch");
    for l in 0..target.weights.len() {
        for (t, s) in target.weights[l].iter_mut().zip(&source.weights[l]) {
            *t += tau * (s - *t);
        }
        for (t, s) in target.biases[l].iter_mut().zip(&source.biases[l]) {
            *t += tau * (s - *t);
        }
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"MLPCKPT1";

/// Binary checkpoint layout, all little-endian:
///
/// ```text
/// 8 bytes  magic "MLPCKPT1"
/// u32      weight layer count L
/// u32      output activation (0 identity, 1 tanh)
/// u32*L+1  layer widths
/// per layer: widths[l+1]*widths[l] f64 weights row-major,
///            then widths[l+1] f64 biases
/// ```
///
/// A human-readable sidecar manifest is written next to the file with the
/// same name plus `.txt`.
pub fn save_checkpoint(path: &Path, net: &Mlp) -> Result<(), NeuralError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(net.weights.len() as u32).to_le_bytes());
    let tag: u32 = match net.output_activation {
        Activation::Identity => 0,
        Activation::Tanh => 1,
    };
    buf.extend_from_slice(&tag.to_le_bytes());
    for s in &net.sizes {
        buf.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    for l in 0..net.weights.len() {
        for v in &net.weights[l] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in &net.biases[l] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;

    let widths: Vec<String> = net.sizes.iter().map(|s| s.to_string()).collect();
    let manifest = format!(
        "format MLPCKPT1\nlayers {}\nwidths {}\nactivation {}\nparameters {}\nbytes {}\n",
        net.weights.len(),
        widths.join(" "),
        match net.output_activation {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
        },
        net.param_count(),
        buf.len(),
    );
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".txt");
    std::fs::write(sidecar, manifest)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Mlp, NeuralError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut off = 0usize;
    let take = |off: &mut usize, n: usize| -> Result<&[u8], NeuralError> {
        if *off + n > bytes.len() {
            return Err(NeuralError::CorruptCheckpoint("truncated file"));
        }
        let s = &bytes[*off..*off + n];
        *off += n;
        Ok(s)
    };
    if take(&mut off, 8)? != CHECKPOINT_MAGIC {
        return Err(NeuralError::CorruptCheckpoint("bad magic"));
    }
    let read_u32 = |off: &mut usize| -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(take(off, 4)?.try_into().unwrap()))
    };
    let layers = read_u32(&mut off)? as usize;
    if layers == 0 || layers > 64 {
        return Err(NeuralError::CorruptCheckpoint("bad layer count"));
    }
    let tag = read_u32(&mut off)?;
    let output_activation = match tag {
        0 => Activation::Identity,
        1 => Activation::Tanh,
        _ => return Err(NeuralError::CorruptCheckpoint("bad activation tag")),
    };
    let mut sizes = Vec::with_capacity(layers + 1);
    for _ in 0..=layers {
        let w = read_u32(&mut off)? as usize;
        if w == 0 || w > 1_000_000 {
            return Err(NeuralError::CorruptCheckpoint("bad layer width"));
        }
        sizes.push(w);
    }
    let read_f64s = |off: &mut usize, n: usize| -> Result<Vec<f64>, NeuralError> {
        let raw = take(off, n * 8)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let mut weights = Vec::with_capacity(layers);
    let mut biases = Vec::with_capacity(layers);
    for l in 0..layers {
        weights.push(read_f64s(&mut off, sizes[l] * sizes[l + 1])?);
        biases.push(read_f64s(&mut off, sizes[l + 1])?);
    }
    if off != bytes.len() {
        return Err(NeuralError::CorruptCheckpoint("trailing bytes"));
    }
    Ok(Mlp { sizes, weights, biases, output_activation })
}
