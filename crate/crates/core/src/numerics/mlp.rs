use crate::error::Result;
use crate::numerics::activation::Activation;
use crate::numerics::adam::Parameter;
use crate::numerics::array::Array;
use crate::numerics::linear::Linear;
use crate::numerics::rng::RngState;

/// Fully connected stack: hidden layers with a shared activation, linear
/// output layer.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub hidden_act: Activation,
}

/// Intermediate values from a forward pass, needed for backward.
pub struct MlpCache {
    /// Input to each layer (pre-matmul).
    inputs: Vec<Array>,
    /// Pre-activation output of each hidden layer.
    pre_acts: Vec<Array>,
}

impl Mlp {
    /// `dims` = [in, hidden..., out].
    pub fn new(name: &str, dims: &[usize], hidden_act: Activation, rng: &mut RngState) -> Mlp {
        assert!(dims.len() >= 2, "mlp needs at least input and output dims");
        let layers = (0..dims.len() - 1)
            .map(|i| Linear::new(&format!("{name}.l{i}"), dims[i], dims[i + 1], rng))
            .collect();
        Mlp { layers, hidden_act }
    }

    pub fn forward(&self, x: &Array) -> Result<(Array, MlpCache)> {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre_acts: Vec::with_capacity(self.layers.len().saturating_sub(1)),
        };
        let mut cur = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            cache.inputs.push(cur.clone());
            let pre = layer.forward(&cur)?;
            if i < last {
                cache.pre_acts.push(pre.clone());
                cur = self.hidden_act.forward(&pre);
            } else {
                cur = pre;
            }
        }
        Ok((cur, cache))
    }

    /// Plain forward without building a cache, for inference.
    pub fn infer(&self, x: &Array) -> Result<Array> {
        let mut cur = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let pre = layer.forward(&cur)?;
            cur = if i < last { self.hidden_act.forward(&pre) } else { pre };
        }
        Ok(cur)
    }

    /// Accumulates parameter gradients, returns gradient w.r.t. the input.
    pub fn backward(&mut self, cache: &MlpCache, dy: &Array) -> Result<Array> {
        let last = self.layers.len() - 1;
        let mut grad = dy.clone();
        for i in (0..self.layers.len()).rev() {
            if i < last {
                grad = self.hidden_act.backward(&cache.pre_acts[i], &grad);
            }
            grad = self.layers[i].backward(&cache.inputs[i], &grad)?;
        }
        Ok(grad)
    }

    pub fn params(&self) -> Vec<&Parameter> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}
