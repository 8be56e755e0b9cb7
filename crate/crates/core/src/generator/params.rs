use crate::autodiff::{Bindings, ParamSet, Tape, Tensor, Var};
use crate::error::{contract, Result};
use crate::rng::Prng;
use crate::scalar::Scalar;

/// Layer sizes of the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeneratorDims {
    /// Fixed vocabulary size, reserved ids included.
    pub vocab_size: usize,
    pub d_emb: usize,
    /// Encoder hidden size per direction.
    pub d_hidden: usize,
    pub d_dec: usize,
    pub d_att: usize,
    /// Width of the first output projection.
    pub d_out: usize,
}

impl GeneratorDims {
    /// `(name, shape, is_bias)` for every parameter, sorted by name.
    pub fn layout(&self) -> Vec<(&'static str, Vec<usize>, bool)> {
        let GeneratorDims {
            vocab_size: v,
            d_emb: e,
            d_hidden: h,
            d_dec: d,
            d_att: a,
            d_out: o,
        } = *self;
        let mut l = vec![
            ("attn.b", vec![1, a], true),
            ("attn.v", vec![a, 1], false),
            ("attn.wh", vec![2 * h, a], false),
            ("attn.ws", vec![d, a], false),
            ("bridge.c.b", vec![1, d], true),
            ("bridge.c.w", vec![2 * h, d], false),
            ("bridge.h.b", vec![1, d], true),
            ("bridge.h.w", vec![2 * h, d], false),
            ("dec.b", vec![1, 4 * d], true),
            ("dec.w", vec![e + d, 4 * d], false),
            ("emb", vec![v, e], false),
            ("enc.bw.b", vec![1, 4 * h], true),
            ("enc.bw.w", vec![e + h, 4 * h], false),
            ("enc.fw.b", vec![1, 4 * h], true),
            ("enc.fw.w", vec![e + h, 4 * h], false),
            ("out.b", vec![1, o], true),
            ("out.b2", vec![1, v], true),
            ("out.v", vec![d + 2 * h, o], false),
            ("out.v2", vec![o, v], false),
            ("ptr.b", vec![1, 1], true),
            ("ptr.wc", vec![2 * h, 1], false),
            ("ptr.ws", vec![d, 1], false),
            ("ptr.wx", vec![e, 1], false),
        ];
        l.sort_by_key(|(n, _, _)| *n);
        l
    }

    /// Recovers the sizes from parameter shapes and checks every parameter.
    pub fn infer<S: Scalar>(params: &ParamSet<S>) -> Result<Self> {
        let shape = |name: &str| -> Result<Vec<usize>> { Ok(params.require(name)?.shape().to_vec()) };
        let two = |name: &str| -> Result<(usize, usize)> {
            match shape(name)?.as_slice() {
                [r, c] => Ok((*r, *c)),
                s => contract(format!("parameter {name} has shape {s:?}, expected rank 2")),
            }
        };
        let (v, e) = two("emb")?;
        let (_, h4) = two("enc.fw.w")?;
        let (_, d4) = two("dec.w")?;
        let (_, a) = two("attn.wh")?;
        let (_, o) = two("out.v")?;
        let dims = GeneratorDims {
            vocab_size: v,
            d_emb: e,
            d_hidden: h4 / 4,
            d_dec: d4 / 4,
            d_att: a,
            d_out: o,
        };
        dims.check(params)?;
        Ok(dims)
    }

    /// Errors naming the first parameter whose shape disagrees with these sizes.
    pub fn check<S: Scalar>(&self, params: &ParamSet<S>) -> Result<()> {
        let layout = self.layout();
        for (name, expect, _) in &layout {
            let got = params.require(name)?.shape();
            if got != expect.as_slice() {
                return contract(format!("parameter {name} has shape {got:?}, expected {expect:?}"));
            }
        }
        if params.len() != layout.len() {
            let extra = params
                .names()
                .find(|n| !layout.iter().any(|(l, _, _)| l == n))
                .unwrap_or("?");
            return contract(format!("unexpected generator parameter {extra}"));
        }
        Ok(())
    }

    /// Weights uniform in `(-0.1, 0.1)` drawn in sorted name order, biases zero.
    pub fn init<S: Scalar>(&self, rng: &mut Prng) -> ParamSet<S> {
        let mut ps = ParamSet::new();
        for (name, shape, bias) in self.layout() {
            let t = if bias {
                Tensor::zeros(&shape)
            } else {
                Tensor::uniform(&shape, -0.1, 0.1, rng)
            };
            ps.insert(name, t.with_grad()).expect("layout names are unique");
        }
        ps
    }
}

/// Tape handles for every generator parameter.
#[derive(Clone, Copy, Debug)]
pub struct GenVars {
    pub dims: GeneratorDims,
    pub emb: Var,
    pub enc_fw_w: Var,
    pub enc_fw_b: Var,
    pub enc_bw_w: Var,
    pub enc_bw_b: Var,
    pub bridge_h_w: Var,
    pub bridge_h_b: Var,
    pub bridge_c_w: Var,
    pub bridge_c_b: Var,
    pub dec_w: Var,
    pub dec_b: Var,
    pub attn_wh: Var,
    pub attn_ws: Var,
    pub attn_b: Var,
    pub attn_v: Var,
    pub out_v: Var,
    pub out_b: Var,
    pub out_v2: Var,
    pub out_b2: Var,
    pub ptr_wc: Var,
    pub ptr_ws: Var,
    pub ptr_wx: Var,
    pub ptr_b: Var,
}

impl GenVars {
    pub fn from_bindings(dims: GeneratorDims, b: &Bindings) -> Result<Self> {
        Ok(GenVars {
            dims,
            emb: b.get("emb")?,
            enc_fw_w: b.get("enc.fw.w")?,
            enc_fw_b: b.get("enc.fw.b")?,
            enc_bw_w: b.get("enc.bw.w")?,
            enc_bw_b: b.get("enc.bw.b")?,
            bridge_h_w: b.get("bridge.h.w")?,
            bridge_h_b: b.get("bridge.h.b")?,
            bridge_c_w: b.get("bridge.c.w")?,
            bridge_c_b: b.get("bridge.c.b")?,
            dec_w: b.get("dec.w")?,
            dec_b: b.get("dec.b")?,
            attn_wh: b.get("attn.wh")?,
            attn_ws: b.get("attn.ws")?,
            attn_b: b.get("attn.b")?,
            attn_v: b.get("attn.v")?,
            out_v: b.get("out.v")?,
            out_b: b.get("out.b")?,
            out_v2: b.get("out.v2")?,
            out_b2: b.get("out.b2")?,
            ptr_wc: b.get("ptr.wc")?,
            ptr_ws: b.get("ptr.ws")?,
            ptr_wx: b.get("ptr.wx")?,
            ptr_b: b.get("ptr.b")?,
        })
    }
}

/// Generator parameters together with their sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator<S> {
    pub dims: GeneratorDims,
    pub params: ParamSet<S>,
}

impl<S: Scalar> Generator<S> {
    pub fn new(dims: GeneratorDims, rng: &mut Prng) -> Self {
        Generator {
            dims,
            params: dims.init(rng),
        }
    }

    pub fn from_params(params: ParamSet<S>) -> Result<Self> {
        let dims = GeneratorDims::infer(&params)?;
        Ok(Generator { dims, params })
    }

    pub fn bind(&self, tape: &mut Tape<S>) -> Result<(GenVars, Bindings)> {
        let b = tape.bind(&self.params);
        Ok((GenVars::from_bindings(self.dims, &b)?, b))
    }
}
