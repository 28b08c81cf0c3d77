use serde::{Deserialize, Serialize};

use super::{NetError, Shape};
use crate::command::GestureClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softmax,
    Linear,
}

/// One row of the architecture table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        filters: usize,
        kernel: [usize; 2],
        activation: Activation,
    },
    /// Non-overlapping: stride equals the pool size.
    MaxPool2d { pool: [usize; 2] },
    BatchNorm { epsilon: f64, momentum: f64 },
    Flatten,
    Dense { units: usize, activation: Activation },
    Dropout { rate: f64 },
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "Convolution 2D",
            LayerSpec::MaxPool2d { .. } => "Pooling 2D",
            LayerSpec::BatchNorm { .. } => "Batch normalization",
            LayerSpec::Flatten => "Flatten",
            LayerSpec::Dense { .. } => "Dense",
            LayerSpec::Dropout { .. } => "Drop out",
        }
    }

    fn short(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv",
            LayerSpec::MaxPool2d { .. } => "pool",
            LayerSpec::BatchNorm { .. } => "bn",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Dropout { .. } => "dropout",
        }
    }
}

/// Per-layer parameter accounting: (trainable, non-trainable).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerParams {
    pub trainable: usize,
    pub non_trainable: usize,
}

impl LayerParams {
    pub fn total(&self) -> usize {
        self.trainable + self.non_trainable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
    pub class_names: Vec<String>,
}

impl NetworkSpec {
    /// The 129×71 log-spectrogram classifier with 9 outputs.
    pub fn reference() -> Self {
        use Activation::*;
        NetworkSpec {
            input: Shape::new(129, 71, 1),
            layers: vec![
                LayerSpec::Conv2d { filters: 8, kernel: [10, 7], activation: Relu },
                LayerSpec::MaxPool2d { pool: [7, 5] },
                LayerSpec::BatchNorm { epsilon: 1e-3, momentum: 0.99 },
                LayerSpec::Conv2d { filters: 32, kernel: [7, 5], activation: Relu },
                LayerSpec::MaxPool2d { pool: [5, 3] },
                LayerSpec::BatchNorm { epsilon: 1e-3, momentum: 0.99 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 64, activation: Relu },
                LayerSpec::Dropout { rate: 0.5 },
                LayerSpec::Dense { units: 9, activation: Softmax },
            ],
            class_names: GestureClass::ALL.iter().map(|c| c.name().to_string()).collect(),
        }
    }

    /// Layer names such as `conv1`, `pool2`, `dense1`.
    pub fn layer_names(&self) -> Vec<String> {
        let mut seen = std::collections::HashMap::new();
        self.layers
            .iter()
            .map(|l| {
                let n = seen.entry(l.short()).or_insert(0);
                *n += 1;
                format!("{}{}", l.short(), n)
            })
            .collect()
    }

    /// Output shape of every layer, checking that each layer fits its input.
    pub fn output_shapes(&self) -> Result<Vec<Shape>, NetError> {
        let names = self.layer_names();
        let mut cur = self.input;
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (layer, name) in self.layers.iter().zip(&names) {
            cur = match *layer {
                LayerSpec::Conv2d { filters, kernel: [fh, fw], .. } => {
                    if cur.h < fh || cur.w < fw || filters == 0 || fh == 0 || fw == 0 {
                        return Err(NetError::shape(name, format!("at least {fh} x {fw}"), cur));
                    }
                    Shape::new(cur.h - fh + 1, cur.w - fw + 1, filters)
                }
                LayerSpec::MaxPool2d { pool: [ph, pw] } => {
                    if ph == 0 || pw == 0 || cur.h < ph || cur.w < pw {
                        return Err(NetError::shape(name, format!("at least {ph} x {pw}"), cur));
                    }
                    Shape::new(cur.h / ph, cur.w / pw, cur.c)
                }
                LayerSpec::BatchNorm { epsilon, momentum } => {
                    if !(epsilon > 0.0) || !(0.0..1.0).contains(&momentum) {
                        return Err(NetError::InvalidSpec(format!("{name}: bad epsilon/momentum")));
                    }
                    cur
                }
                LayerSpec::Flatten => Shape::flat(cur.len()),
                LayerSpec::Dense { units, .. } => {
                    if !cur.is_flat() {
                        return Err(NetError::shape(name, "flat input", cur));
                    }
                    Shape::flat(units)
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(NetError::InvalidSpec(format!("{name}: dropout rate {rate}")));
                    }
                    cur
                }
            };
            shapes.push(cur);
        }
        Ok(shapes)
    }

    /// Structural checks: shapes chain, softmax only on a final dense layer
    /// sized to the class list.
    pub fn validate(&self) -> Result<(), NetError> {
        let shapes = self.output_shapes()?;
        match self.layers.last() {
            Some(LayerSpec::Dense { units, activation: Activation::Softmax }) if *units == self.class_names.len() => {}
            _ => {
                return Err(NetError::InvalidSpec(
                    "last layer must be a softmax dense layer with one unit per class".into(),
                ))
            }
        }
        let softmax_count = self
            .layers
            .iter()
            .filter(|l| {
                matches!(
                    l,
                    LayerSpec::Dense { activation: Activation::Softmax, .. }
                        | LayerSpec::Conv2d { activation: Activation::Softmax, .. }
                )
            })
            .count();
        if softmax_count != 1 {
            return Err(NetError::InvalidSpec("softmax is only allowed on the output layer".into()));
        }
        debug_assert_eq!(shapes.last().map(|s| s.len()), Some(self.class_names.len()));
        Ok(())
    }

    pub fn layer_params(&self) -> Result<Vec<LayerParams>, NetError> {
        let shapes = self.output_shapes()?;
        let mut input = self.input;
        let mut out = Vec::with_capacity(self.layers.len());
        for (layer, shape) in self.layers.iter().zip(&shapes) {
            let p = match *layer {
                LayerSpec::Conv2d { filters, kernel: [fh, fw], .. } => LayerParams {
                    trainable: fh * fw * input.c * filters + filters,
                    non_trainable: 0,
                },
                LayerSpec::BatchNorm { .. } => LayerParams {
                    trainable: 2 * input.c,
                    non_trainable: 2 * input.c,
                },
                LayerSpec::Dense { units, .. } => LayerParams {
                    trainable: input.c * units + units,
                    non_trainable: 0,
                },
                _ => LayerParams { trainable: 0, non_trainable: 0 },
            };
            out.push(p);
            input = *shape;
        }
        Ok(out)
    }
}
