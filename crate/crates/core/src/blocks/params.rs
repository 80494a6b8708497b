use indexmap::IndexMap;

use crate::tensor::{Float, Rng, Tape, Tensor, Var};
use crate::{Error, Result};

/// How a parameter is initialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Normal with std `√(2 / fan_in)`.
    HeNormal { fan_in: usize },
    Zeros,
    Ones,
}

/// Declared name, shape and initializer of one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub dims: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    /// Weight and bias of a dense `k×k` convolution named `prefix`.
    pub fn conv(prefix: &str, cout: usize, cin: usize, k: usize) -> [ParamSpec; 2] {
        [
            ParamSpec { name: format!("{prefix}.weight"), dims: vec![cout, cin, k, k], init: Init::HeNormal { fan_in: cin * k * k } },
            ParamSpec { name: format!("{prefix}.bias"), dims: vec![cout], init: Init::Zeros },
        ]
    }

    /// Weight and bias of a depthwise `k×k` convolution over `c` channels.
    pub fn dwconv(prefix: &str, c: usize, k: usize) -> [ParamSpec; 2] {
        [
            ParamSpec { name: format!("{prefix}.weight"), dims: vec![c, 1, k, k], init: Init::HeNormal { fan_in: k * k } },
            ParamSpec { name: format!("{prefix}.bias"), dims: vec![c], init: Init::Zeros },
        ]
    }

    /// Affine parameters of a channel layer norm.
    pub fn layernorm(prefix: &str, c: usize) -> [ParamSpec; 2] {
        [
            ParamSpec { name: format!("{prefix}.gamma"), dims: vec![c], init: Init::Ones },
            ParamSpec { name: format!("{prefix}.beta"), dims: vec![c], init: Init::Zeros },
        ]
    }
}

/// Named, ordered collection of trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    tensors: IndexMap<String, Tensor<T>>,
}

impl<T: Float> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Float> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { tensors: IndexMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::Contract(format!("duplicate parameter `{name}`")));
        }
        self.tensors.insert(name, t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Same names in the same order with bit-identical values.
    pub fn bit_eq(&self, other: &ParamStore<T>) -> bool {
        self.len() == other.len()
            && self.tensors.iter().zip(&other.tensors).all(|((ka, a), (kb, b))| ka == kb && a.bit_eq(b))
    }

    pub fn cast<U: Float>(&self) -> ParamStore<U> {
        ParamStore { tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect() }
    }
}

/// Draws every declared parameter in declaration order from one seeded stream.
pub fn init_params<T: Float>(specs: &[ParamSpec], seed: u64) -> Result<ParamStore<T>> {
    let mut rng = Rng::new(seed);
    let mut store = ParamStore::new();
    for spec in specs {
        let t = match spec.init {
            Init::Zeros => Tensor::zeros(spec.dims.clone())?,
            Init::Ones => Tensor::ones(spec.dims.clone())?,
            Init::HeNormal { fan_in } => {
                let std = (2.0 / fan_in as f64).sqrt();
                let data = (0..spec.numel()).map(|_| T::of(std * rng.normal())).collect();
                Tensor::new(spec.dims.clone(), data)?
            }
        };
        store.insert(spec.name.clone(), t)?;
    }
    Ok(store)
}

/// Per-parameter gradients, keyed like the [`ParamStore`] they belong to.
pub type Grads<T> = IndexMap<String, Tensor<T>>;

/// A tape bound to a read-only [`ParamStore`].
///
/// Parameters are copied onto the tape the first time a block asks for them,
/// so one store can back any number of independent graphs.
pub struct Graph<'p, T: Float> {
    pub tape: Tape<T>,
    params: &'p ParamStore<T>,
    bound: IndexMap<String, Var>,
    track: bool,
}

impl<'p, T: Float> Graph<'p, T> {
    /// Graph whose parameters receive gradients.
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Graph { tape: Tape::new(), params, bound: IndexMap::new(), track: true }
    }

    /// Graph for inference; parameters are recorded as constants.
    pub fn inference(params: &'p ParamStore<T>) -> Self {
        Graph { tape: Tape::new(), params, bound: IndexMap::new(), track: false }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn param(&mut self, name: &str) -> Result<Var> {
        if let Some(&v) = self.bound.get(name) {
            return Ok(v);
        }
        let t = self
            .params
            .get(name)
            .ok_or_else(|| Error::Contract(format!("parameter `{name}` is not in the store")))?
            .clone();
        let v = if self.track { self.tape.leaf(t) } else { self.tape.constant(t) };
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.tape.constant(t)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        self.tape.value(v)
    }

    /// Names of the parameters the forward pass has touched, in first-use order.
    pub fn bound_names(&self) -> impl Iterator<Item = &str> {
        self.bound.keys().map(String::as_str)
    }

    /// Dense convolution with parameters `{prefix}.weight` / `{prefix}.bias`.
    pub fn conv(&mut self, prefix: &str, x: Var, stride: usize, pad: usize) -> Result<Var> {
        let w = self.param(&format!("{prefix}.weight"))?;
        let b = self.param(&format!("{prefix}.bias"))?;
        self.tape.conv2d(x, w, Some(b), stride, pad)
    }

    /// Same-resolution depthwise convolution with parameters under `prefix`.
    pub fn dwconv(&mut self, prefix: &str, x: Var) -> Result<Var> {
        let w = self.param(&format!("{prefix}.weight"))?;
        let b = self.param(&format!("{prefix}.bias"))?;
        let k = self.tape.value(w).dims().get(2).copied().unwrap_or(1);
        self.tape.dwconv2d(x, w, Some(b), k.saturating_sub(1) / 2)
    }

    pub fn layernorm(&mut self, prefix: &str, x: Var) -> Result<Var> {
        let g = self.param(&format!("{prefix}.gamma"))?;
        let b = self.param(&format!("{prefix}.beta"))?;
        self.tape.layernorm_c(x, g, b)
    }

    pub fn backward(&mut self, loss: Var) -> Result<()> {
        self.tape.backward(loss)
    }

    /// Gradients of every bound parameter. Parameters the loss did not reach
    /// get an explicit zero gradient.
    pub fn grads(&self) -> Grads<T> {
        self.bound
            .iter()
            .map(|(name, &v)| {
                let g = self.tape.grad(v).unwrap_or_else(|| self.tape.value(v).zeros_like());
                (name.clone(), g)
            })
            .collect()
    }
}
