//! Symmetric uniform N-bit quantizer with a power-of-two step size.
//!
//! A value `x` maps to `Clip(⌊x/Δ⌉, −(2^(N−1)−1), 2^(N−1)−1) · Δ` with `Δ = 2^(−f)`.
//! Rounding is to nearest with ties away from zero, so `Q(−x) = −Q(x)` holds
//! exactly. The code `−2^(N−1)` is never produced.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Network;
use crate::tensor::Tensor;

/// Default exponent search range for [`select_exponent`].
pub const DEFAULT_EXPONENT_RANGE: (i32, i32) = (-8, 8);

/// Bit width and step-size exponent of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct QuantSpec {
    bits: u8,
    exponent: i32,
}

#[derive(Deserialize)]
struct RawSpec {
    bits: u8,
    exponent: i32,
}

impl TryFrom<RawSpec> for QuantSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        QuantSpec::new(raw.bits, raw.exponent)
    }
}

impl QuantSpec {
    pub fn new(bits: u8, exponent: i32) -> Result<Self> {
        if !(2..=16).contains(&bits) {
            return Err(Error::InvalidArgument(format!("bit width {bits} outside 2..=16")));
        }
        if !(i32::from(i8::MIN)..=i32::from(i8::MAX)).contains(&exponent) {
            return Err(Error::InvalidArgument(format!("exponent {exponent} does not fit in i8")));
        }
        Ok(QuantSpec { bits, exponent })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn exponent(&self) -> i32 {
        self.exponent
    }

    /// `Δ = 2^(−f)`, built directly from its IEEE-754 exponent field.
    pub fn step(&self) -> f64 {
        pow2(-self.exponent)
    }

    /// Largest code magnitude, `2^(N−1) − 1`.
    pub fn code_max(&self) -> i32 {
        (1i32 << (self.bits - 1)) - 1
    }

    pub fn clip_bound(&self) -> f64 {
        self.step() * f64::from(self.code_max())
    }

    pub fn quantize(&self, x: f64) -> f64 {
        f64::from(self.mode_code(x)) * self.step()
    }

    pub fn mode_code(&self, x: f64) -> i32 {
        let cmax = f64::from(self.code_max());
        // Division by a power of two is exact; f64::round ties away from zero.
        (x / self.step()).round().clamp(-cmax, cmax) as i32
    }

    /// Inverse of [`QuantSpec::mode_code`] on the grid.
    pub fn dequantize(&self, code: i32) -> f64 {
        f64::from(code) * self.step()
    }
}

/// Exact `2^e` for normal-range exponents.
pub(crate) fn pow2(e: i32) -> f64 {
    assert!((-1022..=1023).contains(&e), "2^{e} is outside the normal f64 range");
    f64::from_bits(((e + 1023) as u64) << 52)
}

pub fn quantize(x: f64, spec: &QuantSpec) -> f64 {
    spec.quantize(x)
}

pub fn mode_code(x: f64, spec: &QuantSpec) -> i32 {
    spec.mode_code(x)
}

/// `(−Δ·code_max, +Δ·code_max)`.
pub fn clip_bounds(spec: &QuantSpec) -> (f64, f64) {
    let hi = spec.clip_bound();
    (-hi, hi)
}

/// Mean squared quantization error `(1/M) Σ (w − Q(w))²`.
pub fn quantization_mse(weights: &[f64], spec: &QuantSpec) -> f64 {
    if weights.is_empty() {
        return 0.0;
    }
    weights.iter().map(|&w| (w - spec.quantize(w)).powi(2)).sum::<f64>() / weights.len() as f64
}

/// Picks the exponent in `range` minimizing the layer's mean squared quantization
/// error; ties go to the larger exponent (finer step).
pub fn select_exponent(weights: &Tensor, bits: u8, range: (i32, i32)) -> Result<QuantSpec> {
    if weights.is_empty() {
        return Err(Error::InvalidArgument("cannot select an exponent for an empty tensor".into()));
    }
    let (lo, hi) = range;
    if lo > hi {
        return Err(Error::InvalidArgument(format!("empty exponent range [{lo}, {hi}]")));
    }
    let mut best: Option<(QuantSpec, f64)> = None;
    for f in lo..=hi {
        let spec = QuantSpec::new(bits, f)?;
        let mse = quantization_mse(weights.data(), &spec);
        if best.is_none_or(|(_, b)| mse <= b) {
            best = Some((spec, mse));
        }
    }
    Ok(best.expect("non-empty range").0)
}

/// Frozen per-layer specs for a network, aligned with its layer list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantPlan {
    specs: Vec<Option<QuantSpec>>,
}

impl QuantPlan {
    pub fn new(specs: Vec<Option<QuantSpec>>) -> Self {
        QuantPlan { specs }
    }

    /// Runs [`select_exponent`] on every quantizable layer of `net`.
    pub fn select(net: &Network, bits: u8, range: (i32, i32)) -> Result<Self> {
        let specs = net
            .layers()
            .iter()
            .map(|l| {
                l.quantizable()
                    .then(|| select_exponent(&l.weights, bits, range))
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(QuantPlan { specs })
    }

    pub fn specs(&self) -> &[Option<QuantSpec>] {
        &self.specs
    }

    /// The spec of layer `index`; an error if that layer is quantizable but unplanned.
    pub fn for_layer(&self, net: &Network, index: usize) -> Result<Option<QuantSpec>> {
        let layer = &net.layers()[index];
        if !layer.quantizable() {
            return Ok(None);
        }
        match self.specs.get(index).copied().flatten() {
            Some(spec) => Ok(Some(spec)),
            None => Err(Error::MissingSpec {
                layer: index,
                name: layer.name().to_string(),
            }),
        }
    }

    /// Checks that every quantizable layer of `net` has a spec.
    pub fn check(&self, net: &Network) -> Result<()> {
        (0..net.layers().len()).try_for_each(|i| self.for_layer(net, i).map(|_| ()))
    }

    pub fn mode_map(&self, net: &Network) -> Result<ModeMap> {
        let layers = (0..net.layers().len())
            .map(|i| {
                Ok(self
                    .for_layer(net, i)?
                    .map(|spec| net.layers()[i].weights.data().iter().map(|&w| spec.mode_code(w)).collect()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModeMap { layers })
    }
}

/// Per-layer integer codes of every weight: the "fixed-point prior" each weight
/// is currently attracted to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeMap {
    /// One entry per network layer; `None` for layers without a spec.
    pub layers: Vec<Option<Vec<i32>>>,
}

impl ModeMap {
    /// Fraction of weights in layer `layer` whose code differs from `previous`.
    pub fn switch_fraction(&self, previous: &ModeMap, layer: usize) -> f64 {
        match (&self.layers[layer], &previous.layers[layer]) {
            (Some(now), Some(before)) if !now.is_empty() => {
                let changed = now.iter().zip(before).filter(|(a, b)| a != b).count();
                changed as f64 / now.len() as f64
            }
            _ => 0.0,
        }
    }
}
