use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensornet::{default_groups, ConvSpec, NamedTensors, Tape, Tensor, Var, NORM_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Group normalization, largest divisor of the width that is ≤ 8 groups.
    Group,
    Instance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    /// Filters of the first encoder stage; doubled after every pooling.
    pub base_width: usize,
    pub norm: NormKind,
    pub input_channels: usize,
    pub output_channels: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            base_width: 8,
            norm: NormKind::Group,
            input_channels: 4,
            output_channels: 3,
        }
    }
}

/// Number of encoder stages; three poolings sit between them.
pub const STAGES: usize = 4;
/// Spatial dims must be divisible by this.
pub const SPATIAL_MULTIPLE: usize = 8;
pub const AUX_HEADS: usize = 4;

impl ArchConfig {
    /// Full-size network, 48 channels in the first stage.
    pub fn full_width() -> Self {
        ArchConfig {
            base_width: 48,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_width < 2 {
            return Err(Error::InvalidArgument("base_width must be >= 2".into()));
        }
        if self.input_channels == 0 || self.output_channels == 0 {
            return Err(Error::InvalidArgument("channel counts must be >= 1".into()));
        }
        Ok(())
    }

    /// Encoder stage widths: w, 2w, 4w, 8w.
    pub fn encoder_widths(&self) -> [usize; STAGES] {
        std::array::from_fn(|i| self.base_width << i)
    }
}

/// One convolution of the network and whether norm + ReLU follow it.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub conv: ConvSpec,
    pub normalized: bool,
}

/// Every convolution in build order.
pub fn layer_plan(cfg: &ArchConfig) -> Vec<LayerSpec> {
    let w = cfg.encoder_widths();
    let mut plan = Vec::new();
    let mut block = |name: String, conv: ConvSpec| {
        plan.push(LayerSpec {
            name,
            conv,
            normalized: true,
        })
    };
    let mut prev = cfg.input_channels;
    for (s, &width) in w.iter().enumerate() {
        block(format!("enc{}.conv1", s + 1), ConvSpec::k3(prev, width));
        block(format!("enc{}.conv2", s + 1), ConvSpec::k3(width, width));
        prev = width;
    }
    let deep = w[3];
    block("bottleneck.dil1".into(), ConvSpec::dilated(deep, deep));
    block("bottleneck.dil2".into(), ConvSpec::dilated(deep, deep));
    // single conv at the lowest decoder stage after concatenating the dilated
    // branch with the stage-4 output
    block("dec4.conv1".into(), ConvSpec::k3(2 * deep, deep));
    let mut below = deep;
    for s in (0..3).rev() {
        let width = w[s];
        block(
            format!("dec{}.conv1", s + 1),
            ConvSpec::k3(below + width, width),
        );
        block(format!("dec{}.conv2", s + 1), ConvSpec::k3(width, width));
        below = width;
    }
    let out = cfg.output_channels;
    let head = |name: &str, c: usize| LayerSpec {
        name: name.into(),
        conv: ConvSpec::k1(c, out),
        normalized: false,
    };
    plan.push(head("head.main", w[0]));
    plan.push(head("head.aux1", deep));
    plan.push(head("head.aux2", deep));
    plan.push(head("head.aux3", w[2]));
    plan.push(head("head.aux4", w[1]));
    plan
}

/// Named parameter tensors in build order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ArchConfig,
    entries: NamedTensors,
}

impl ModelParams {
    /// Wrap tensors, checking names and shapes against the architecture.
    pub fn from_named(config: ArchConfig, entries: NamedTensors) -> Result<Self> {
        let expected = expected_shapes(&config);
        if entries.len() != expected.len() {
            return Err(Error::Shape(format!(
                "architecture needs {} parameter tensors, checkpoint has {}",
                expected.len(),
                entries.len()
            )));
        }
        for ((name, t), (en, ed)) in entries.iter().zip(&expected) {
            if name != en || t.dims() != *ed {
                return Err(Error::Shape(format!(
                    "parameter {name} {:?} does not match architecture entry {en} {:?}",
                    t.dims(),
                    ed
                )));
            }
        }
        Ok(ModelParams { config, entries })
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.entries.iter().map(|(_, t)| t)
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar parameter count.
    pub fn parameter_count(&self) -> usize {
        self.tensors().map(Tensor::numel).sum()
    }

    pub fn into_named(self) -> NamedTensors {
        self.entries
    }

    /// Put every tensor on `tape`, as trainable leaves or constants.
    pub fn load(&self, tape: &mut Tape, trainable: bool) -> ParamVars {
        let vars = self
            .entries
            .iter()
            .map(|(n, t)| {
                let v = if trainable {
                    tape.param(t.clone())
                } else {
                    tape.constant(t.clone())
                };
                (n.clone(), v)
            })
            .collect::<Vec<_>>();
        ParamVars {
            index: vars
                .iter()
                .enumerate()
                .map(|(i, (n, _))| (n.clone(), i))
                .collect(),
            vars: vars.into_iter().map(|(_, v)| v).collect(),
        }
    }
}

impl ModelParams {
    /// Name tape variables that already hold this model's tensors, in entry order.
    pub fn bind(&self, vars: &[Var]) -> Result<ParamVars> {
        if vars.len() != self.entries.len() {
            return Err(Error::Shape(format!(
                "model has {} parameter tensors, got {} variables",
                self.entries.len(),
                vars.len()
            )));
        }
        Ok(ParamVars {
            index: self
                .entries
                .iter()
                .enumerate()
                .map(|(i, (n, _))| (n.clone(), i))
                .collect(),
            vars: vars.to_vec(),
        })
    }
}

/// Tape handles for a loaded [`ModelParams`], in the same order.
pub struct ParamVars {
    vars: Vec<Var>,
    index: HashMap<String, usize>,
}

impl ParamVars {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| Error::Shape(format!("missing parameter {name}")))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

fn expected_shapes(cfg: &ArchConfig) -> Vec<(String, [usize; 5])> {
    let mut out = Vec::new();
    for l in layer_plan(cfg) {
        out.push((format!("{}.weight", l.name), l.conv.weight_dims()));
        out.push((format!("{}.bias", l.name), l.conv.bias_dims()));
        if l.normalized {
            let c = [l.conv.out_channels, 1, 1, 1, 1];
            out.push((format!("{}.norm.gamma", l.name), c));
            out.push((format!("{}.norm.beta", l.name), c));
        }
    }
    out
}

/// Fresh parameters: weights ~ U(-1/√fan_in, 1/√fan_in), zero biases, unit
/// norm scales and zero norm shifts.
pub fn build_model(cfg: &ArchConfig, rng: &mut Rng) -> Result<ModelParams> {
    cfg.validate()?;
    let mut entries = Vec::new();
    for l in layer_plan(cfg) {
        let wd = l.conv.weight_dims();
        let fan_in = (wd[1] * wd[2] * wd[3] * wd[4]) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let n: usize = wd.iter().product();
        let w = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        entries.push((format!("{}.weight", l.name), Tensor::new(wd, w)?));
        entries.push((
            format!("{}.bias", l.name),
            Tensor::zeros(l.conv.bias_dims()),
        ));
        if l.normalized {
            let c = l.conv.out_channels;
            entries.push((
                format!("{}.norm.gamma", l.name),
                Tensor::vector(vec![1.0; c]),
            ));
            entries.push((
                format!("{}.norm.beta", l.name),
                Tensor::vector(vec![0.0; c]),
            ));
        }
    }
    ModelParams::from_named(*cfg, entries)
}

/// Main head plus the four deep-supervision heads, all at input resolution
/// and post-sigmoid.
#[derive(Debug, Clone, Copy)]
pub struct UNetOutputs {
    pub main: Var,
    pub aux: [Var; AUX_HEADS],
}

impl UNetOutputs {
    pub fn all(&self) -> [Var; AUX_HEADS + 1] {
        [
            self.main,
            self.aux[0],
            self.aux[1],
            self.aux[2],
            self.aux[3],
        ]
    }
}

struct Builder<'a> {
    cfg: &'a ArchConfig,
    p: &'a ParamVars,
}

impl Builder<'_> {
    fn conv(&self, tape: &mut Tape, name: &str, x: Var, spec: ConvSpec) -> Result<Var> {
        let w = self.p.get(&format!("{name}.weight"))?;
        let b = self.p.get(&format!("{name}.bias"))?;
        tape.conv3d(x, w, Some(b), spec)
    }

    /// conv → norm → ReLU
    fn block(&self, tape: &mut Tape, name: &str, x: Var, spec: ConvSpec) -> Result<Var> {
        let y = self.conv(tape, name, x, spec)?;
        let gamma = self.p.get(&format!("{name}.norm.gamma"))?;
        let beta = self.p.get(&format!("{name}.norm.beta"))?;
        let y = match self.cfg.norm {
            NormKind::Group => {
                tape.group_norm(y, default_groups(spec.out_channels), gamma, beta, NORM_EPS)?
            }
            NormKind::Instance => tape.instance_norm(y, gamma, beta, NORM_EPS)?,
        };
        Ok(tape.relu(y))
    }

    /// 1x1x1 conv → sigmoid → trilinear upsample by `factor`.
    fn head(&self, tape: &mut Tape, name: &str, x: Var, factor: usize) -> Result<Var> {
        let c = tape.value(x).channels();
        let y = self.conv(tape, name, x, ConvSpec::k1(c, self.cfg.output_channels))?;
        let y = tape.sigmoid(y);
        if factor == 1 {
            Ok(y)
        } else {
            tape.upsample_trilinear(y, factor)
        }
    }
}

/// Run the network on `x` of dims `[b, input_channels, Z, Y, X]`.
pub fn forward(
    cfg: &ArchConfig,
    params: &ParamVars,
    tape: &mut Tape,
    x: Var,
) -> Result<UNetOutputs> {
    let dims = tape.value(x).dims();
    if dims[1] != cfg.input_channels {
        return Err(Error::Shape(format!(
            "network expects {} input channels, got {}",
            cfg.input_channels, dims[1]
        )));
    }
    if dims[2..].iter().any(|d| d % SPATIAL_MULTIPLE != 0) {
        return Err(Error::Shape(format!(
            "spatial dims {:?} must be divisible by {SPATIAL_MULTIPLE}",
            &dims[2..]
        )));
    }
    let b = Builder { cfg, p: params };
    let w = cfg.encoder_widths();

    let mut skips = Vec::with_capacity(STAGES);
    let mut h = x;
    let mut prev = cfg.input_channels;
    for (s, &width) in w.iter().enumerate() {
        if s > 0 {
            h = tape.maxpool3d(h)?;
        }
        h = b.block(
            tape,
            &format!("enc{}.conv1", s + 1),
            h,
            ConvSpec::k3(prev, width),
        )?;
        h = b.block(
            tape,
            &format!("enc{}.conv2", s + 1),
            h,
            ConvSpec::k3(width, width),
        )?;
        skips.push(h);
        prev = width;
    }
    let deep = w[3];
    let d = b.block(tape, "bottleneck.dil1", h, ConvSpec::dilated(deep, deep))?;
    let d = b.block(tape, "bottleneck.dil2", d, ConvSpec::dilated(deep, deep))?;
    let aux1 = b.head(tape, "head.aux1", d, 8)?;
    let cat = tape.concat_channels(skips[3], d)?;
    let mut h = b.block(tape, "dec4.conv1", cat, ConvSpec::k3(2 * deep, deep))?;
    let aux2 = b.head(tape, "head.aux2", h, 8)?;

    let mut aux_rest = Vec::with_capacity(2);
    let mut below = deep;
    for s in (0..3).rev() {
        let width = w[s];
        let up = tape.upsample2x(h)?;
        let cat = tape.concat_channels(up, skips[s])?;
        h = b.block(
            tape,
            &format!("dec{}.conv1", s + 1),
            cat,
            ConvSpec::k3(below + width, width),
        )?;
        h = b.block(
            tape,
            &format!("dec{}.conv2", s + 1),
            h,
            ConvSpec::k3(width, width),
        )?;
        match s {
            2 => aux_rest.push(b.head(tape, "head.aux3", h, 4)?),
            1 => aux_rest.push(b.head(tape, "head.aux4", h, 2)?),
            _ => {}
        }
        below = width;
    }
    let main = b.head(tape, "head.main", h, 1)?;
    Ok(UNetOutputs {
        main,
        aux: [aux1, aux2, aux_rest[0], aux_rest[1]],
    })
}

/// Convenience: forward pass with frozen parameters, returning the main output.
pub fn predict(params: &ModelParams, x: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let vars = params.load(&mut tape, false);
    let xv = tape.constant(x.clone());
    let out = forward(&params.config, &vars, &mut tape, xv)?;
    Ok(tape.value(out.main).clone())
}
