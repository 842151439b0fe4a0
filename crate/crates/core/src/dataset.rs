use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Inputs with integer class labels; the leading input dimension indexes samples.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub split: Split,
}

impl Dataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, split: Split) -> Result<Self> {
        if inputs.batch() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} inputs but {} labels",
                inputs.batch(),
                labels.len()
            )));
        }
        Ok(Dataset { inputs, labels, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        (
            self.inputs.gather_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// The first `n` samples.
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        let idx: Vec<usize> = (0..n).collect();
        let (inputs, labels) = self.batch(&idx);
        Dataset {
            inputs,
            labels,
            split: self.split,
        }
    }

    /// Isotropic Gaussian clusters, one per class, with centers drawn from
    /// `U(-spread, spread)^dims`. Linearly separable for a large `spread`.
    pub fn gaussian_blobs(n: usize, dims: usize, classes: usize, spread: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers: Vec<Vec<f64>> = (0..classes)
            .map(|_| (0..dims).map(|_| rng.gen_range(-spread..spread)).collect())
            .collect();
        let mut inputs = Vec::with_capacity(n * dims);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % classes;
            for &m in &centers[c] {
                inputs.push(m + standard_normal(&mut rng));
            }
            labels.push(c);
        }
        Dataset {
            inputs: Tensor::new(vec![n, dims], inputs).expect("blob shape"),
            labels,
            split: Split::Train,
        }
    }
}

/// Box-Muller; kept local so the stream is pinned to this crate.
fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
