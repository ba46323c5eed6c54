//! Multi-modal recurrent network: a bidirectional GRU over the nightly window,
//! a dense static branch, concatenation, optional dense trunk, and a softmax head.

use std::collections::BTreeMap;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numgrad::{NamedTensors, Scalar, Tape, Tensor, Var};

use super::config::{FeatureSchema, ModelConfig, WINDOW_LEN};

pub type ParamSet<S> = NamedTensors<S>;

/// Prefix shared by the classification head tensors.
pub const HEAD_PREFIX: &str = "head.";
pub const HEAD_WEIGHT: &str = "head.w";
pub const HEAD_BIAS: &str = "head.b";

pub const DIRECTIONS: [&str; 2] = ["fwd", "bwd"];
const GATES: [&str; 3] = ["z", "r", "h"];

pub fn is_head(name: &str) -> bool {
    name.starts_with(HEAD_PREFIX)
}

/// Data a network reads from one night: a `9×T` matrix and `S` statics.
pub trait ModelInput {
    fn temporal(&self) -> &Tensor<f64>;
    fn statics(&self) -> &[f64];
}

/// Validated pairing of a [`ModelConfig`] with input dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    config: ModelConfig,
    temporal_dim: usize,
    static_dim: usize,
}

/// Inference output for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub logits: Vec<f64>,
    pub representation: Vec<f64>,
}

/// Time-step matrices for a batch, converted to the network scalar.
#[derive(Debug, Clone)]
pub struct Batch<S> {
    steps: Vec<Tensor<S>>,
    statics: Option<Tensor<S>>,
    len: usize,
}

impl<S: Scalar> Batch<S> {
    pub fn from_inputs<I: ModelInput + ?Sized>(inputs: &[&I], arch: &Architecture) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::input("empty batch"));
        }
        let (t, s) = (arch.temporal_dim, arch.static_dim);
        let m = inputs.len();
        let mut steps = vec![Vec::with_capacity(m * t); WINDOW_LEN];
        let mut statics = Vec::with_capacity(m * s);
        for input in inputs {
            let window = input.temporal();
            if window.dims() != [WINDOW_LEN, t] {
                return Err(Error::shape(format!(
                    "temporal window {:?} does not match schema {WINDOW_LEN}×{t}",
                    window.dims()
                )));
            }
            if input.statics().len() != s {
                return Err(Error::shape(format!(
                    "{} statics for a schema with {s}",
                    input.statics().len()
                )));
            }
            for (step, row) in steps.iter_mut().zip(window.data().chunks(t)) {
                step.extend(row.iter().map(|&v| S::of(v)));
            }
            statics.extend(input.statics().iter().map(|&v| S::of(v)));
        }
        let steps = steps
            .into_iter()
            .map(|d| Tensor::matrix(m, t, d))
            .collect::<Result<Vec<_>>>()?;
        let statics = if s > 0 {
            Some(Tensor::matrix(m, s, statics)?)
        } else {
            None
        };
        Ok(Batch {
            steps,
            statics,
            len: m,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Tape handles for every parameter tensor.
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::shape(format!("parameter {name:?} missing")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// Registers `params` on the tape, as differentiable leaves or as constants.
pub fn bind<'a, S: Scalar>(tape: &mut Tape<'a, S>, params: &'a ParamSet<S>, differentiable: bool) -> Bound {
    let vars = params
        .iter()
        .map(|(name, t)| {
            let v = if differentiable {
                tape.param(t)
            } else {
                tape.constant_ref(t)
            };
            (name.to_owned(), v)
        })
        .collect();
    Bound { vars }
}

/// Handles to the representation and logits of a batch.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub representation: Var,
    pub logits: Var,
}

struct GruVars {
    w: [Var; 3],
    u: [Var; 3],
    b: [Var; 3],
}

impl GruVars {
    fn lookup(bound: &Bound, direction: &str) -> Result<Self> {
        let get = |kind: &str, gate: &str| bound.var(&gru_name(direction, kind, gate));
        Ok(GruVars {
            w: [get("w", "z")?, get("w", "r")?, get("w", "h")?],
            u: [get("u", "z")?, get("u", "r")?, get("u", "h")?],
            b: [get("b", "z")?, get("b", "r")?, get("b", "h")?],
        })
    }
}

fn gru_name(direction: &str, kind: &str, gate: &str) -> String {
    format!("gru.{direction}.{kind}_{gate}")
}

/// One GRU update on the tape; `x: m×T`, `h: m×H`.
///
/// `z = σ(x·W_z + h·U_z + b_z)`, `r = σ(x·W_r + h·U_r + b_r)`,
/// `h̃ = tanh(x·W_h + (r⊙h)·U_h + b_h)`, `h' = (1 − z)⊙h + z⊙h̃`.
fn gru_step<S: Scalar>(tape: &mut Tape<'_, S>, x: Var, h: Var, p: &GruVars) -> Result<Var> {
    let gate = |tape: &mut Tape<'_, S>, i: usize, hidden: Var| -> Result<Var> {
        let xi = tape.affine(x, p.w[i], Some(p.b[i]))?;
        let hi = tape.matmul(hidden, p.u[i])?;
        tape.add(xi, hi)
    };
    let z_pre = gate(tape, 0, h)?;
    let z = tape.sigmoid(z_pre)?;
    let r_pre = gate(tape, 1, h)?;
    let r = tape.sigmoid(r_pre)?;
    let rh = tape.mul(r, h)?;
    let c_pre = gate(tape, 2, rh)?;
    let candidate = tape.tanh(c_pre)?;
    let delta = tape.sub(candidate, h)?;
    let step = tape.mul(z, delta)?;
    tape.add(h, step)
}

impl Architecture {
    pub fn new(config: ModelConfig, schema: &FeatureSchema) -> Result<Self> {
        Self::from_dims(config, schema.temporal_dim(), schema.static_dim())
    }

    pub fn from_dims(config: ModelConfig, temporal_dim: usize, static_dim: usize) -> Result<Self> {
        config.validate()?;
        if temporal_dim == 0 {
            return Err(Error::Config("at least one temporal feature is required".into()));
        }
        Ok(Architecture {
            config,
            temporal_dim,
            static_dim,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn temporal_dim(&self) -> usize {
        self.temporal_dim
    }

    pub fn static_dim(&self) -> usize {
        self.static_dim
    }

    pub fn has_static_branch(&self) -> bool {
        self.static_dim > 0
    }

    /// Flattened BiGRU width plus the static branch output width.
    pub fn rep_dim(&self) -> usize {
        let gru = 2 * WINDOW_LEN * self.config.gru_hidden;
        let statics = if self.has_static_branch() {
            *self.config.static_widths.last().expect("validated non-empty")
        } else {
            0
        };
        gru + statics
    }

    /// Width of the vector the head reads: the last trunk layer, else the representation.
    pub fn head_input_dim(&self) -> usize {
        self.config
            .trunk_widths
            .last()
            .copied()
            .unwrap_or_else(|| self.rep_dim())
    }

    pub fn with_head_classes(&self, classes: usize) -> Result<Self> {
        let mut config = self.config.clone();
        config.head_classes = classes;
        Self::from_dims(config, self.temporal_dim, self.static_dim)
    }

    /// Name and shape of every parameter tensor, in a fixed order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let (t, h) = (self.temporal_dim, self.config.gru_hidden);
        let mut out = Vec::new();
        for dir in DIRECTIONS {
            for gate in GATES {
                out.push((gru_name(dir, "w", gate), vec![t, h]));
                out.push((gru_name(dir, "u", gate), vec![h, h]));
                out.push((gru_name(dir, "b", gate), vec![h]));
            }
        }
        if self.has_static_branch() {
            let mut fan_in = self.static_dim;
            for (i, &w) in self.config.static_widths.iter().enumerate() {
                out.push((format!("static.{i}.w"), vec![fan_in, w]));
                out.push((format!("static.{i}.b"), vec![w]));
                fan_in = w;
            }
        }
        let mut fan_in = self.rep_dim();
        for (i, &w) in self.config.trunk_widths.iter().enumerate() {
            out.push((format!("trunk.{i}.w"), vec![fan_in, w]));
            out.push((format!("trunk.{i}.b"), vec![w]));
            fan_in = w;
        }
        out.push((HEAD_WEIGHT.to_owned(), vec![fan_in, self.config.head_classes]));
        out.push((HEAD_BIAS.to_owned(), vec![self.config.head_classes]));
        out
    }

    /// Glorot-uniform weights, zero biases; a pure function of `seed`.
    pub fn init_params<S: Scalar>(&self, seed: u64) -> ParamSet<S> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.layout()
            .into_iter()
            .map(|(name, dims)| {
                let t = init_tensor(&dims, &mut rng);
                (name, t)
            })
            .collect()
    }

    /// Ok when `params` has exactly this architecture's tensors, modulo head width.
    pub fn check_params<S: Scalar>(&self, params: &ParamSet<S>) -> Result<()> {
        let layout = self.layout();
        if layout.len() != params.len() {
            return Err(Error::shape(format!(
                "expected {} parameter tensors, found {}",
                layout.len(),
                params.len()
            )));
        }
        for (name, dims) in layout {
            let t = params.require(&name)?;
            let ok = if is_head(&name) {
                t.dims()[0] == dims[0] && t.dims().len() == dims.len()
            } else {
                t.dims() == dims.as_slice()
            };
            if !ok {
                return Err(Error::shape(format!(
                    "{name}: expected {dims:?}, found {:?}",
                    t.dims()
                )));
            }
        }
        Ok(())
    }

    /// Records the forward pass for `batch` on `tape`.
    pub fn build<'a, S: Scalar>(
        &self,
        tape: &mut Tape<'a, S>,
        bound: &Bound,
        batch: &'a Batch<S>,
    ) -> Result<ForwardVars> {
        let m = batch.len;
        let h = self.config.gru_hidden;
        let xs: Vec<Var> = batch.steps.iter().map(|x| tape.constant_ref(x)).collect();

        let mut per_step: Vec<[Option<Var>; 2]> = vec![[None, None]; WINDOW_LEN];
        for (d, dir) in DIRECTIONS.iter().enumerate() {
            let p = GruVars::lookup(bound, dir)?;
            let mut hidden = tape.constant(Tensor::zeros(&[m, h]));
            let order: Vec<usize> = if d == 0 {
                (0..WINDOW_LEN).collect()
            } else {
                (0..WINDOW_LEN).rev().collect()
            };
            for t in order {
                hidden = gru_step(tape, xs[t], hidden, &p)?;
                per_step[t][d] = Some(hidden);
            }
        }
        // Time-major flattening: [fwd_1, bwd_1, fwd_2, bwd_2, ..., bwd_9].
        let mut parts: Vec<Var> = per_step
            .iter()
            .flat_map(|pair| pair.iter().map(|v| v.expect("both directions ran")))
            .collect();

        if let Some(statics) = &batch.statics {
            let mut s = tape.constant_ref(statics);
            let depth = self.config.static_widths.len();
            for i in 0..depth {
                let w = bound.var(&format!("static.{i}.w"))?;
                let b = bound.var(&format!("static.{i}.b"))?;
                s = tape.affine(s, w, Some(b))?;
                if i + 1 < depth {
                    s = tape.relu(s)?;
                }
            }
            parts.push(s);
        } else if self.has_static_branch() {
            return Err(Error::shape("batch lacks statics for a static branch"));
        }

        let concat = tape.concat_cols(&parts)?;
        let representation = if self.config.normalize_representation {
            tape.normalize_rows(concat)?
        } else {
            concat
        };

        let mut z = representation;
        for i in 0..self.config.trunk_widths.len() {
            let w = bound.var(&format!("trunk.{i}.w"))?;
            let b = bound.var(&format!("trunk.{i}.b"))?;
            z = tape.affine(z, w, Some(b))?;
            z = tape.relu(z)?;
        }
        let logits = tape.affine(z, bound.var(HEAD_WEIGHT)?, Some(bound.var(HEAD_BIAS)?))?;
        Ok(ForwardVars {
            representation,
            logits,
        })
    }

    /// Logits and representation for one night.
    pub fn forward<S: Scalar, I: ModelInput + ?Sized>(
        &self,
        input: &I,
        params: &ParamSet<S>,
    ) -> Result<(Vec<S>, Vec<S>)> {
        let batch = Batch::from_inputs(&[input], self)?;
        let mut tape = Tape::new();
        let bound = bind(&mut tape, params, false);
        let out = self.build(&mut tape, &bound, &batch)?;
        Ok((
            tape.value(out.logits).data().to_vec(),
            tape.value(out.representation).data().to_vec(),
        ))
    }

    /// Batched inference without gradient bookkeeping.
    pub fn infer<S: Scalar, I: ModelInput>(
        &self,
        params: &ParamSet<S>,
        inputs: &[I],
        batch_size: usize,
    ) -> Result<Vec<Inference>> {
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(batch_size.max(1)) {
            let refs: Vec<&I> = chunk.iter().collect();
            let batch = Batch::from_inputs(&refs, self)?;
            let mut tape = Tape::new();
            let bound = bind(&mut tape, params, false);
            let vars = self.build(&mut tape, &bound, &batch)?;
            let logits = tape.value(vars.logits);
            let reps = tape.value(vars.representation);
            for i in 0..chunk.len() {
                out.push(Inference {
                    logits: logits.row(i).iter().map(|v| v.as_f64()).collect(),
                    representation: reps.row(i).iter().map(|v| v.as_f64()).collect(),
                });
            }
        }
        Ok(out)
    }
}

fn init_tensor<S: Scalar>(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor<S> {
    if dims.len() == 1 {
        return Tensor::zeros(dims);
    }
    let (fan_in, fan_out) = (dims[0], dims[1]);
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
    let len = fan_in * fan_out;
    let data = (0..len).map(|_| S::of(dist.sample(rng))).collect();
    Tensor::new(dims.to_vec(), data).expect("layout dims are consistent")
}

/// Copies `params` with a freshly initialized head of `new_classes` outputs.
pub fn replace_head<S: Scalar>(params: &ParamSet<S>, new_classes: usize, seed: u64) -> Result<ParamSet<S>> {
    if new_classes < 2 {
        return Err(Error::input("a head needs at least two classes"));
    }
    let fan_in = params.require(HEAD_WEIGHT)?.dims()[0];
    let mut out: ParamSet<S> = params
        .iter()
        .filter(|(name, _)| !is_head(name))
        .map(|(name, t)| (name.to_owned(), t.clone()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.insert(HEAD_WEIGHT, init_tensor(&[fan_in, new_classes], &mut rng));
    out.insert(HEAD_BIAS, Tensor::zeros(&[new_classes]));
    Ok(out)
}

/// Single GRU step for one hidden vector; `dir` names the parameter direction.
pub fn gru_cell<S: Scalar>(x_t: &[S], h_prev: &[S], params: &ParamSet<S>, dir: &str) -> Result<Vec<S>> {
    let mut tape = Tape::new();
    let bound = bind(&mut tape, params, false);
    let p = GruVars::lookup(&bound, dir)?;
    let x = tape.constant(Tensor::matrix(1, x_t.len(), x_t.to_vec())?);
    let h = tape.constant(Tensor::matrix(1, h_prev.len(), h_prev.to_vec())?);
    let out = gru_step(&mut tape, x, h, &p)?;
    Ok(tape.value(out).data().to_vec())
}

/// Bidirectional GRU over one `9×T` window; row `t` is `[h_fwd_t ; h_bwd_t]`.
pub fn bigru_forward<S: Scalar>(window: &Tensor<S>, params: &ParamSet<S>) -> Result<Tensor<S>> {
    let (steps, t) = window.as_matrix()?;
    if steps != WINDOW_LEN || window.dims().len() != 2 {
        return Err(Error::shape(format!(
            "window must have {WINDOW_LEN} steps, got dims {:?}",
            window.dims()
        )));
    }
    let mut tape = Tape::new();
    let bound = bind(&mut tape, params, false);
    let hidden = params.require(&gru_name("fwd", "u", "z"))?.dims()[0];
    let xs: Vec<Var> = (0..WINDOW_LEN)
        .map(|i| tape.constant(Tensor::matrix(1, t, window.row(i).to_vec()).expect("row")))
        .collect();
    let mut out = vec![S::zero(); WINDOW_LEN * 2 * hidden];
    for (d, dir) in DIRECTIONS.iter().enumerate() {
        let p = GruVars::lookup(&bound, dir)?;
        let mut h = tape.constant(Tensor::zeros(&[1, hidden]));
        let order: Vec<usize> = if d == 0 {
            (0..WINDOW_LEN).collect()
        } else {
            (0..WINDOW_LEN).rev().collect()
        };
        for step in order {
            h = gru_step(&mut tape, xs[step], h, &p)?;
            let offset = step * 2 * hidden + d * hidden;
            out[offset..offset + hidden].copy_from_slice(tape.value(h).data());
        }
    }
    Tensor::matrix(WINDOW_LEN, 2 * hidden, out)
}
