use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::prior::{CausalPrior, WeightTable};
use crate::data::AttributeSchema;
use crate::error::{Error, Result};
use crate::numerics::{Activation, Conv2d, Dense, ParamSet, Tape, Tensor, Trainable, Var};
use crate::rng::{self, purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputKind {
    Image { channels: usize, height: usize, width: usize },
    Vector { dim: usize },
}

impl InputKind {
    pub fn item_shape(&self) -> Vec<usize> {
        match *self {
            InputKind::Image { channels, height, width } => alloc::vec![channels, height, width],
            InputKind::Vector { dim } => alloc::vec![dim],
        }
    }
}

/// Layer widths. Images go through two conv-tanh-pool blocks, vectors through one dense tanh layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: InputKind,
    pub conv_channels: [usize; 2],
    pub kernel: usize,
    pub dense_width: usize,
    pub g_hidden: usize,
    pub g_out: usize,
    pub t_hidden: usize,
    pub t_out: usize,
    /// Every branch uses branch 1's discriminator for each target attribute.
    pub shared_d: bool,
}

impl Architecture {
    pub fn for_input(input: InputKind) -> Self {
        Self {
            input,
            conv_channels: [8, 16],
            kernel: 5,
            dense_width: 128,
            g_hidden: 64,
            g_out: 32,
            t_hidden: 64,
            t_out: 32,
            shared_d: false,
        }
    }

    /// Width of f_c.
    pub fn feature_width(&self) -> Result<usize> {
        match self.input {
            InputKind::Image { height, width, .. } => {
                if height < 4 || width < 4 {
                    return Err(Error::Dimension(format!("image {height}×{width} too small for two pooling stages")));
                }
                Ok(self.conv_channels[1] * (height / 2 / 2) * (width / 2 / 2))
            }
            InputKind::Vector { .. } => Ok(self.dense_width),
        }
    }
}

#[derive(Debug, Clone)]
enum Backbone {
    Conv(Conv2d, Conv2d),
    Dense(Dense),
}

/// One hidden tanh layer followed by a tanh output layer.
#[derive(Debug, Clone, Copy)]
pub struct Mlp {
    pub hidden: Dense,
    pub out: Dense,
}

impl Mlp {
    fn new(params: &mut ParamSet, name: &str, dims: [usize; 3], rng: &mut rng::Rng) -> Result<Self> {
        Ok(Self {
            hidden: Dense::new(params, &format!("{name}.hidden"), dims[0], dims[1], rng)?,
            out: Dense::new(params, &format!("{name}.out"), dims[1], dims[2], rng)?,
        })
    }

    fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let h = self.hidden.forward(tape, x, Activation::Tanh)?;
        self.out.forward(tape, h, Activation::Tanh)
    }

    fn ids(&self) -> Trainable {
        let mut ids = self.hidden.ids();
        ids.extend(self.out.ids());
        ids
    }
}

/// Stage-1 outputs: shared features, branch features and the full discriminator grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchOutputs {
    pub fc: Tensor,
    pub f: Vec<Tensor>,
    /// `d[j][j2]`: softmax over attribute `j2` computed from branch `j`.
    pub d: Vec<Vec<Tensor>>,
}

/// Stage-2 outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveOutputs {
    pub s: Vec<Tensor>,
    pub u: Tensor,
    pub r: Vec<Tensor>,
}

/// Which inference stack produces class scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stack {
    /// P, G_1, D_11.
    Stage1,
    /// P, G_1, T_1, R_1.
    Stage2,
}

/// The full two-stage network with its weights and prior.
#[derive(Debug, Clone)]
pub struct ModelGraph {
    pub schema: AttributeSchema,
    pub arch: Architecture,
    pub params: ParamSet,
    pub weights: WeightTable,
    pub prior: CausalPrior,
    backbone: Backbone,
    g: Vec<Mlp>,
    d: Vec<Vec<Dense>>,
    t: Vec<Mlp>,
    r: Vec<Dense>,
}

impl ModelGraph {
    /// Builds a freshly initialized graph; initial values depend only on `seed`.
    pub fn new(
        schema: AttributeSchema,
        arch: Architecture,
        weights: WeightTable,
        prior: CausalPrior,
        seed: u64,
    ) -> Result<Self> {
        let width = schema.width();
        weights.validate(width)?;
        if prior.width() != width {
            return Err(Error::Dimension(format!("prior is {0}×{0}, schema has {width} attributes", prior.width())));
        }
        let mut rng = rng::stream(seed, purpose::INIT);
        let mut params = ParamSet::new();
        let backbone = match arch.input {
            InputKind::Image { channels, .. } => {
                let [c1, c2] = arch.conv_channels;
                let (k, pad) = (arch.kernel, arch.kernel / 2);
                if k % 2 == 0 {
                    return Err(Error::Config(format!("kernel {k} must be odd")));
                }
                Backbone::Conv(
                    Conv2d::new(&mut params, "p.conv1", channels, c1, k, 1, pad, &mut rng)?,
                    Conv2d::new(&mut params, "p.conv2", c1, c2, k, 1, pad, &mut rng)?,
                )
            }
            InputKind::Vector { dim } => Backbone::Dense(Dense::new(&mut params, "p.dense", dim, arch.dense_width, &mut rng)?),
        };
        let fc = arch.feature_width()?;
        let mut g = Vec::with_capacity(width);
        for j in 0..width {
            g.push(Mlp::new(&mut params, &format!("g{}", j + 1), [fc, arch.g_hidden, arch.g_out], &mut rng)?);
        }
        let mut d: Vec<Vec<Dense>> = Vec::with_capacity(width);
        for j in 0..width {
            let mut row = Vec::with_capacity(width);
            for j2 in 0..width {
                if arch.shared_d && j > 0 {
                    row.push(d[0][j2]);
                } else {
                    row.push(Dense::new(&mut params, &format!("d{}_{}", j + 1, j2 + 1), arch.g_out, schema.k(j2), &mut rng)?);
                }
            }
            d.push(row);
        }
        let mut t = Vec::with_capacity(width);
        for j in 0..width {
            t.push(Mlp::new(&mut params, &format!("t{}", j + 1), [arch.g_out, arch.t_hidden, arch.t_out], &mut rng)?);
        }
        let mut r = Vec::with_capacity(width);
        for j in 0..width {
            r.push(Dense::new(&mut params, &format!("r{}", j + 1), arch.t_out, schema.k(j), &mut rng)?);
        }
        Ok(Self { schema, arch, params, weights, prior, backbone, g, d, t, r })
    }

    pub fn width(&self) -> usize {
        self.schema.width()
    }

    pub fn p_ids(&self) -> Trainable {
        match &self.backbone {
            Backbone::Conv(a, b) => a.ids().union(&b.ids()).copied().collect(),
            Backbone::Dense(l) => l.ids(),
        }
    }

    pub fn g_ids(&self, j: usize) -> Trainable {
        self.g[j].ids()
    }

    pub fn d_ids(&self, j: usize, j2: usize) -> Trainable {
        self.d[j][j2].ids()
    }

    pub fn t_ids(&self, j: usize) -> Trainable {
        self.t[j].ids()
    }

    pub fn r_ids(&self, j: usize) -> Trainable {
        self.r[j].ids()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let expected = self.arch.input.item_shape();
        if x.rank() != expected.len() + 1 || x.shape()[1..] != expected[..] {
            return Err(Error::Dimension(format!("input {:?} does not match item shape {expected:?}", x.shape())));
        }
        Ok(())
    }

    /// Records f_c = P(x).
    pub fn tape_p(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        self.check_input(tape.value(x))?;
        match &self.backbone {
            Backbone::Conv(c1, c2) => {
                let h = c1.forward(tape, x)?;
                let h = tape.tanh(h)?;
                let h = tape.max_pool2(h)?;
                let h = c2.forward(tape, h)?;
                let h = tape.tanh(h)?;
                let h = tape.max_pool2(h)?;
                tape.flatten(h)
            }
            Backbone::Dense(l) => l.forward(tape, x, Activation::Tanh),
        }
    }

    pub fn tape_g(&self, tape: &mut Tape<'_>, fc: Var, j: usize) -> Result<Var> {
        self.g[j].forward(tape, fc)
    }

    pub fn tape_d(&self, tape: &mut Tape<'_>, f: Var, j: usize, j2: usize) -> Result<Var> {
        self.d[j][j2].forward(tape, f, Activation::Softmax)
    }

    pub fn tape_t(&self, tape: &mut Tape<'_>, f: Var, j: usize) -> Result<Var> {
        if tape.value(f).rank() != 2 || tape.value(f).shape()[1] != self.arch.g_out {
            return Err(Error::Dimension(format!(
                "branch feature {:?} for transform {} expects width {}",
                tape.value(f).shape(),
                j + 1,
                self.arch.g_out
            )));
        }
        self.t[j].forward(tape, f)
    }

    pub fn tape_r(&self, tape: &mut Tape<'_>, u: Var, j: usize) -> Result<Var> {
        self.r[j].forward(tape, u, Activation::Softmax)
    }

    pub fn forward_stage1(&self, x: &Tensor) -> Result<BranchOutputs> {
        let mut tape = Tape::new(&self.params);
        let xi = tape.input(x.clone());
        let fc = self.tape_p(&mut tape, xi)?;
        let mut f = Vec::new();
        let mut d = Vec::new();
        for j in 0..self.width() {
            let fj = self.tape_g(&mut tape, fc, j)?;
            let mut row = Vec::new();
            for j2 in 0..self.width() {
                let v = self.tape_d(&mut tape, fj, j, j2)?;
                row.push(tape.value(v).clone());
            }
            f.push(tape.value(fj).clone());
            d.push(row);
        }
        Ok(BranchOutputs { fc: tape.value(fc).clone(), f, d })
    }

    /// Class scores from P, G_1 and D_11.
    pub fn infer_stage1(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new(&self.params);
        let xi = tape.input(x.clone());
        let fc = self.tape_p(&mut tape, xi)?;
        let f1 = self.tape_g(&mut tape, fc, 0)?;
        let d = self.tape_d(&mut tape, f1, 0, 0)?;
        Ok(tape.value(d).clone())
    }

    /// s_j = T_j(f_j), u = Σ_j s_j in ascending j, r_j = R_j(u).
    pub fn forward_stage2(&self, features: &[Tensor]) -> Result<AdditiveOutputs> {
        if features.len() != self.width() {
            return Err(Error::Dimension(format!("{} feature blocks for {} branches", features.len(), self.width())));
        }
        let mut tape = Tape::new(&self.params);
        let mut s = Vec::new();
        for (j, f) in features.iter().enumerate() {
            let fi = tape.input(f.clone());
            s.push(self.tape_t(&mut tape, fi, j)?);
        }
        let u = tape.add_all(&s)?;
        let mut r = Vec::new();
        for j in 0..self.width() {
            let v = self.tape_r(&mut tape, u, j)?;
            r.push(tape.value(v).clone());
        }
        Ok(AdditiveOutputs { s: s.iter().map(|&v| tape.value(v).clone()).collect(), u: tape.value(u).clone(), r })
    }

    /// Class scores from P, G_1, T_1 and R_1, with u reduced to s_1.
    pub fn infer_stage2(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new(&self.params);
        let xi = tape.input(x.clone());
        let fc = self.tape_p(&mut tape, xi)?;
        let f1 = self.tape_g(&mut tape, fc, 0)?;
        let s1 = self.tape_t(&mut tape, f1, 0)?;
        let r1 = self.tape_r(&mut tape, s1, 0)?;
        Ok(tape.value(r1).clone())
    }

    pub fn infer(&self, stack: Stack, x: &Tensor) -> Result<Tensor> {
        match stack {
            Stack::Stage1 => self.infer_stage1(x),
            Stack::Stage2 => self.infer_stage2(x),
        }
    }

    /// Branch features f_j and each branch's own-attribute softmax D_jj(f_j).
    pub fn donor_outputs(&self, x: &Tensor) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
        let mut tape = Tape::new(&self.params);
        let xi = tape.input(x.clone());
        let fc = self.tape_p(&mut tape, xi)?;
        let mut f = Vec::new();
        let mut conf = Vec::new();
        for j in 0..self.width() {
            let fj = self.tape_g(&mut tape, fc, j)?;
            let dj = self.tape_d(&mut tape, fj, j, j)?;
            f.push(tape.value(fj).clone());
            conf.push(tape.value(dj).clone());
        }
        Ok((f, conf))
    }
}
