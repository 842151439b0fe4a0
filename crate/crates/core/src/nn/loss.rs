use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Tensor) -> Tensor {
    let classes = logits.shape()[1];
    let mut out = logits.data().to_vec();
    for row in out.chunks_exact_mut(classes) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Tensor::new(logits.shape().to_vec(), out).expect("softmax shape")
}

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    if logits.rank() != 2 || logits.shape()[0] != labels.len() {
        return Err(Error::shape(
            "softmax cross-entropy",
            format!("({}, classes)", labels.len()),
            logits.shape(),
        ));
    }
    let (batch, classes) = (logits.shape()[0], logits.shape()[1]);
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidArgument(format!("label {bad} >= {classes} classes")));
    }
    let mut grad = softmax(logits).into_data();
    let mut loss = 0.0;
    for (b, row) in logits.data().chunks_exact(classes).enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[labels[b]];
        grad[b * classes + labels[b]] -= 1.0;
    }
    let scale = 1.0 / batch as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, Tensor::new(vec![batch, classes], grad)?))
}

/// Index of the largest logit per row (first on ties).
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let classes = logits.shape()[1];
    logits
        .data()
        .chunks_exact(classes)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
