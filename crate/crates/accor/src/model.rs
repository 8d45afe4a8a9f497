//! The classification network: a three-layer complex-valued CNN backbone
//! with average pooling, a learned projection that realifies features into
//! 256-dimensional tokens, one multi-head self-attention layer with a
//! residual connection, and an affine classifier head.
//!
//! The pre-classifier embeddings (mean over attended tokens) are exposed
//! alongside the logits; the contrastive loss consumes them.

use crate::ctensor::{mix_seed, BnBatchStats, BnMode, CTensor, Cplx, NodeId, Tape};
use crate::error::{Error, Result};
use crate::signal::IQFrame;
use crate::wire::{self, Reader};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ACCORCP1";
pub const CHECKPOINT_VERSION: u16 = 1;

/// How backbone features become attention tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenMode {
    /// One token per retained spatial position after a partial pool.
    SpatialTokens,
    /// A single token from a global pool; attention degenerates to a
    /// per-token map. Kept for a literal reading of the architecture.
    SingleToken,
}

impl TokenMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenMode::SpatialTokens => "spatial_tokens",
            TokenMode::SingleToken => "single_token",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "spatial_tokens" => Ok(TokenMode::SpatialTokens),
            "single_token" => Ok(TokenMode::SingleToken),
            other => Err(Error::config(format!("unknown token mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub conv_channels: [usize; 3],
    pub kernel_size: usize,
    pub input_channels: usize,
    pub embed_dim: usize,
    pub attention_heads: usize,
    pub n_classes: usize,
    pub token_mode: TokenMode,
    /// Pool window applied after the third conv layer (spatial-token mode).
    pub pool_window: usize,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
}

impl ModelConfig {
    pub fn default_for(n_classes: usize) -> Self {
        ModelConfig {
            conv_channels: [32, 64, 128],
            kernel_size: 5,
            input_channels: crate::signal::N_VIRTUAL,
            embed_dim: 256,
            attention_heads: 16,
            n_classes,
            token_mode: TokenMode::SpatialTokens,
            pool_window: 10,
            bn_epsilon: 1e-5,
            bn_momentum: 0.1,
        }
    }

    /// Small configuration for gradient checks and unit tests.
    pub fn tiny(n_classes: usize) -> Self {
        ModelConfig {
            conv_channels: [4, 4, 4],
            kernel_size: 3,
            input_channels: 4,
            embed_dim: 8,
            attention_heads: 2,
            n_classes,
            token_mode: TokenMode::SpatialTokens,
            pool_window: 4,
            bn_epsilon: 1e-5,
            bn_momentum: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.embed_dim % 2 != 0 {
            return Err(Error::config("embed_dim must be a positive even number"));
        }
        if self.attention_heads == 0 || self.embed_dim % self.attention_heads != 0 {
            return Err(Error::config(format!(
                "embed_dim {} must be divisible by attention_heads {}",
                self.embed_dim, self.attention_heads
            )));
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(Error::config("kernel_size must be odd (same-padding backbone)"));
        }
        if self.conv_channels.iter().any(|&c| c == 0) || self.input_channels == 0 {
            return Err(Error::config("channel counts must be positive"));
        }
        if self.n_classes < 2 {
            return Err(Error::config("n_classes must be at least 2"));
        }
        if self.pool_window == 0 {
            return Err(Error::config("pool_window must be >= 1"));
        }
        if !(self.bn_epsilon > 0.0) || !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) {
            return Err(Error::config("bn_epsilon/bn_momentum out of range"));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> Vec<(String, String)> {
        vec![
            (
                "conv_channels".into(),
                format!(
                    "{},{},{}",
                    self.conv_channels[0], self.conv_channels[1], self.conv_channels[2]
                ),
            ),
            ("kernel_size".into(), self.kernel_size.to_string()),
            ("input_channels".into(), self.input_channels.to_string()),
            ("embed_dim".into(), self.embed_dim.to_string()),
            ("attention_heads".into(), self.attention_heads.to_string()),
            ("n_classes".into(), self.n_classes.to_string()),
            ("token_mode".into(), self.token_mode.as_str().into()),
            ("pool_window".into(), self.pool_window.to_string()),
            ("bn_epsilon".into(), self.bn_epsilon.to_string()),
            ("bn_momentum".into(), self.bn_momentum.to_string()),
        ]
    }

    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_usize = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::config(format!("'{v}' is not a count for key '{key}'")))
        };
        let parse_f64 = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("'{v}' is not a number for key '{key}'")))
        };
        match key {
            "conv_channels" => {
                let parts: Vec<&str> = value.split(',').map(|s| s.trim()).collect();
                if parts.len() != 3 {
                    return Err(Error::config("conv_channels needs exactly 3 values"));
                }
                for (i, p) in parts.iter().enumerate() {
                    self.conv_channels[i] = parse_usize(p)?;
                }
            }
            "kernel_size" => self.kernel_size = parse_usize(value)?,
            "input_channels" => self.input_channels = parse_usize(value)?,
            "embed_dim" => self.embed_dim = parse_usize(value)?,
            "attention_heads" => self.attention_heads = parse_usize(value)?,
            "n_classes" => self.n_classes = parse_usize(value)?,
            "token_mode" => self.token_mode = TokenMode::parse(value.trim())?,
            "pool_window" => self.pool_window = parse_usize(value)?,
            "bn_epsilon" => self.bn_epsilon = parse_f64(value)?,
            "bn_momentum" => self.bn_momentum = parse_f64(value)?,
            other => {
                return Err(Error::UnknownConfigKey {
                    section: "model".into(),
                    key: other.into(),
                })
            }
        }
        Ok(())
    }

    pub fn from_kv(pairs: &[(String, String)]) -> Result<Self> {
        let mut cfg = ModelConfig::default_for(10);
        for (k, v) in pairs {
            cfg.apply_kv(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct ConvLayer {
    pub weight: CTensor,
    pub bias: CTensor,
}

#[derive(Debug, Clone)]
pub struct BnLayer {
    /// `scale.re` multiplies the real plane, `scale.im` the imaginary plane.
    pub scale: CTensor,
    pub shift: CTensor,
    pub running_mean_re: Vec<f64>,
    pub running_mean_im: Vec<f64>,
    pub running_var_re: Vec<f64>,
    pub running_var_im: Vec<f64>,
}

/// Parameter container for the full network.
#[derive(Debug, Clone)]
pub struct AccorNetwork {
    pub config: ModelConfig,
    pub convs: Vec<ConvLayer>,
    pub bns: Vec<BnLayer>,
    pub proj_weight: CTensor,
    pub proj_bias: CTensor,
    pub wq: CTensor,
    pub bq: CTensor,
    pub wk: CTensor,
    pub bk: CTensor,
    pub wv: CTensor,
    pub bv: CTensor,
    pub wo: CTensor,
    pub bo: CTensor,
    pub clf_weight: CTensor,
    pub clf_bias: CTensor,
}

/// Tape handles for one insertion of the parameters, in canonical order.
pub struct ParamNodes {
    pub all: Vec<NodeId>,
    pub convs: Vec<(NodeId, NodeId)>,
    pub bns: Vec<(NodeId, NodeId)>,
    pub proj: (NodeId, NodeId),
    pub attn: [(NodeId, NodeId); 4],
    pub clf: (NodeId, NodeId),
}

/// Graph handles returned by one forward pass.
pub struct ForwardOut {
    pub logits: NodeId,
    pub embeddings: NodeId,
    /// Batch statistics per BN layer (training mode only).
    pub bn_stats: Vec<BnBatchStats>,
}

fn complex_gaussian(rng: &mut ChaCha20Rng, shape: &[usize], component_sd: f64) -> CTensor {
    let n: usize = shape.iter().product();
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        re.push(a * component_sd);
        im.push(b * component_sd);
    }
    CTensor::from_planes(shape, re, im).unwrap()
}

fn real_gaussian(rng: &mut ChaCha20Rng, shape: &[usize], sd: f64) -> CTensor {
    let n: usize = shape.iter().product();
    let mut re = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = StandardNormal.sample(rng);
        re.push(a * sd);
    }
    CTensor::from_real(shape, re).unwrap()
}

impl AccorNetwork {
    /// Initialize all parameters from a seed.
    ///
    /// Complex kernels draw independent re/im components at variance
    /// 1/fan_in (total complex variance 2/fan_in, matching real He
    /// scaling); real maps draw at variance 1/fan_in with a zero imaginary
    /// plane; BN scales start at one and shifts at zero.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(seed, 0x4d4f44454c)); // "MODEL"

        let mut convs = Vec::new();
        let mut bns = Vec::new();
        let mut c_in = config.input_channels;
        for &c_out in &config.conv_channels {
            let fan_in = (c_in * config.kernel_size) as f64;
            let weight = complex_gaussian(
                &mut rng,
                &[c_out, c_in, config.kernel_size],
                (1.0 / fan_in).sqrt(),
            );
            let bias = CTensor::zeros(&[c_out]);
            convs.push(ConvLayer { weight, bias });

            let scale = CTensor::from_cplx(&[c_out], &vec![Cplx::new(1.0, 1.0); c_out])?;
            let shift = CTensor::zeros(&[c_out]);
            bns.push(BnLayer {
                scale,
                shift,
                running_mean_re: vec![0.0; c_out],
                running_mean_im: vec![0.0; c_out],
                running_var_re: vec![1.0; c_out],
                running_var_im: vec![1.0; c_out],
            });
            c_in = c_out;
        }

        let half = config.embed_dim / 2;
        let proj_fan = config.conv_channels[2] as f64;
        let proj_weight = complex_gaussian(
            &mut rng,
            &[config.conv_channels[2], half],
            (1.0 / proj_fan).sqrt(),
        );
        let proj_bias = CTensor::zeros(&[half]);

        let d = config.embed_dim;
        let sd = (1.0 / d as f64).sqrt();
        let wq = real_gaussian(&mut rng, &[d, d], sd);
        let wk = real_gaussian(&mut rng, &[d, d], sd);
        let wv = real_gaussian(&mut rng, &[d, d], sd);
        let wo = real_gaussian(&mut rng, &[d, d], sd);
        let (bq, bk, bv, bo) = (
            CTensor::zeros(&[d]),
            CTensor::zeros(&[d]),
            CTensor::zeros(&[d]),
            CTensor::zeros(&[d]),
        );

        let clf_weight = real_gaussian(&mut rng, &[d, config.n_classes], sd);
        let clf_bias = CTensor::zeros(&[config.n_classes]);

        Ok(AccorNetwork {
            config,
            convs,
            bns,
            proj_weight,
            proj_bias,
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
            clf_weight,
            clf_bias,
        })
    }

    /// Named views of every parameter tensor, in canonical order.
    pub fn param_refs(&self) -> Vec<(String, &CTensor)> {
        let mut out = Vec::new();
        for (i, (conv, bn)) in self.convs.iter().zip(&self.bns).enumerate() {
            out.push((format!("conv{i}.weight"), &conv.weight));
            out.push((format!("conv{i}.bias"), &conv.bias));
            out.push((format!("bn{i}.scale"), &bn.scale));
            out.push((format!("bn{i}.shift"), &bn.shift));
        }
        out.push(("proj.weight".into(), &self.proj_weight));
        out.push(("proj.bias".into(), &self.proj_bias));
        out.push(("attn.wq".into(), &self.wq));
        out.push(("attn.bq".into(), &self.bq));
        out.push(("attn.wk".into(), &self.wk));
        out.push(("attn.bk".into(), &self.bk));
        out.push(("attn.wv".into(), &self.wv));
        out.push(("attn.bv".into(), &self.bv));
        out.push(("attn.wo".into(), &self.wo));
        out.push(("attn.bo".into(), &self.bo));
        out.push(("clf.weight".into(), &self.clf_weight));
        out.push(("clf.bias".into(), &self.clf_bias));
        out
    }

    pub fn param_refs_mut(&mut self) -> Vec<(String, &mut CTensor)> {
        let mut out: Vec<(String, &mut CTensor)> = Vec::new();
        for (i, (conv, bn)) in self.convs.iter_mut().zip(self.bns.iter_mut()).enumerate() {
            out.push((format!("conv{i}.weight"), &mut conv.weight));
            out.push((format!("conv{i}.bias"), &mut conv.bias));
            out.push((format!("bn{i}.scale"), &mut bn.scale));
            out.push((format!("bn{i}.shift"), &mut bn.shift));
        }
        out.push(("proj.weight".into(), &mut self.proj_weight));
        out.push(("proj.bias".into(), &mut self.proj_bias));
        out.push(("attn.wq".into(), &mut self.wq));
        out.push(("attn.bq".into(), &mut self.bq));
        out.push(("attn.wk".into(), &mut self.wk));
        out.push(("attn.bk".into(), &mut self.bk));
        out.push(("attn.wv".into(), &mut self.wv));
        out.push(("attn.bv".into(), &mut self.bv));
        out.push(("attn.wo".into(), &mut self.wo));
        out.push(("attn.bo".into(), &mut self.bo));
        out.push(("clf.weight".into(), &mut self.clf_weight));
        out.push(("clf.bias".into(), &mut self.clf_bias));
        out
    }

    pub fn n_parameters(&self) -> usize {
        self.param_refs().iter().map(|(_, t)| 2 * t.len()).sum()
    }

    /// Insert all parameters as tracked leaves of a fresh tape.
    pub fn insert_params(&self, tape: &mut Tape) -> ParamNodes {
        let refs = self.param_refs();
        let all: Vec<NodeId> = refs.iter().map(|(_, t)| tape.param((*t).clone())).collect();
        let layers = self.convs.len();
        let mut convs = Vec::new();
        let mut bns = Vec::new();
        for i in 0..layers {
            convs.push((all[4 * i], all[4 * i + 1]));
            bns.push((all[4 * i + 2], all[4 * i + 3]));
        }
        let base = 4 * layers;
        ParamNodes {
            convs,
            bns,
            proj: (all[base], all[base + 1]),
            attn: [
                (all[base + 2], all[base + 3]),
                (all[base + 4], all[base + 5]),
                (all[base + 6], all[base + 7]),
                (all[base + 8], all[base + 9]),
            ],
            clf: (all[base + 10], all[base + 11]),
            all,
        }
    }

    /// Full forward pass on a batch of range profiles shaped
    /// (batch, input_channels, range_bins).
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &ParamNodes,
        input: NodeId,
        training: bool,
    ) -> Result<ForwardOut> {
        let shape = tape.value(input).shape().to_vec();
        if shape.len() != 3 || shape[1] != self.config.input_channels {
            return Err(Error::usage(format!(
                "forward expects (batch, {}, bins), got {:?}",
                self.config.input_channels, shape
            )));
        }
        let batch = shape[0];
        if batch == 0 {
            return Err(Error::usage("forward requires a non-empty batch"));
        }
        let pad = (self.config.kernel_size - 1) / 2;

        let mut h = input;
        let mut bn_stats = Vec::new();
        for layer in 0..3 {
            let (w, b) = params.convs[layer];
            h = tape.conv1d(h, w, b, 1, pad)?;
            let (scale, shift) = params.bns[layer];
            let bn = &self.bns[layer];
            let mode = if training {
                BnMode::Train
            } else {
                BnMode::Infer {
                    mean_re: bn.running_mean_re.clone(),
                    mean_im: bn.running_mean_im.clone(),
                    var_re: bn.running_var_re.clone(),
                    var_im: bn.running_var_im.clone(),
                }
            };
            let (out, stats) = tape.batch_norm(h, scale, shift, self.config.bn_epsilon, mode)?;
            if let Some(s) = stats {
                bn_stats.push(s);
            }
            h = tape.crelu(out)?;
        }

        let spatial = tape.value(h).shape()[2];
        let window = match self.config.token_mode {
            TokenMode::SpatialTokens => self.config.pool_window.min(spatial),
            TokenMode::SingleToken => spatial,
        };
        let pooled = tape.avg_pool1d(h, window)?;
        let t = tape.value(pooled).shape()[2];

        let tokens_c = tape.channels_to_tokens(pooled)?;
        let projected = tape.matmul(tokens_c, params.proj.0)?;
        let projected = tape.add_rows(projected, params.proj.1)?;
        let tokens = tape.realify(projected)?;

        let attended = self.attention_block(tape, params, tokens, batch, t)?;
        let embeddings = tape.mean_pool_rows(attended, t)?;

        let logits = tape.matmul(embeddings, params.clf.0)?;
        let logits = tape.add_rows(logits, params.clf.1)?;

        Ok(ForwardOut {
            logits,
            embeddings,
            bn_stats,
        })
    }

    /// Multi-head self-attention with a residual connection over a stacked
    /// token matrix of shape (batch·t, embed_dim). Tokens attend within
    /// their own sample only; no positional encoding, so the block is
    /// permutation-equivariant over each sample's tokens.
    pub fn attention_block(
        &self,
        tape: &mut Tape,
        params: &ParamNodes,
        tokens: NodeId,
        batch: usize,
        t: usize,
    ) -> Result<NodeId> {
        let d = self.config.embed_dim;
        let heads = self.config.attention_heads;
        let dh = d / heads;
        let shape = tape.value(tokens).shape().to_vec();
        if shape != [batch * t, d] {
            return Err(Error::usage(format!(
                "attention_block expects ({}, {d}) tokens, got {:?}",
                batch * t,
                shape
            )));
        }

        let (wq, bq) = params.attn[0];
        let (wk, bk) = params.attn[1];
        let (wv, bv) = params.attn[2];
        let (wo, bo) = params.attn[3];

        let q = tape.matmul(tokens, wq)?;
        let q = tape.add_rows(q, bq)?;
        let k = tape.matmul(tokens, wk)?;
        let k = tape.add_rows(k, bk)?;
        let v = tape.matmul(tokens, wv)?;
        let v = tape.add_rows(v, bv)?;

        let scale = Cplx::new(1.0 / (dh as f64).sqrt(), 0.0);
        let mut per_sample = Vec::with_capacity(batch);
        for b in 0..batch {
            let (r0, r1) = (b * t, (b + 1) * t);
            let qb = tape.slice_rows(q, r0, r1)?;
            let kb = tape.slice_rows(k, r0, r1)?;
            let vb = tape.slice_rows(v, r0, r1)?;
            let mut head_outs = Vec::with_capacity(heads);
            for hi in 0..heads {
                let (c0, c1) = (hi * dh, (hi + 1) * dh);
                let qh = tape.slice_cols(qb, c0, c1)?;
                let kh = tape.slice_cols(kb, c0, c1)?;
                let vh = tape.slice_cols(vb, c0, c1)?;
                let kt = tape.transpose2d(kh)?;
                let scores = tape.matmul(qh, kt)?;
                let scaled = tape.scale(scores, scale)?;
                let weights = tape.softmax_rows(scaled)?;
                head_outs.push(tape.matmul(weights, vh)?);
            }
            per_sample.push(tape.concat_cols(&head_outs)?);
        }
        let attn = tape.concat_rows(&per_sample)?;
        let out = tape.matmul(attn, wo)?;
        let out = tape.add_rows(out, bo)?;
        tape.add(tokens, out)
    }

    /// Inference-mode forward on a value-level batch; returns
    /// (logits, embeddings) as plain tensors.
    pub fn infer(&self, profiles: &CTensor) -> Result<(CTensor, CTensor)> {
        let mut tape = Tape::new();
        let params = self.insert_params_frozen(&mut tape);
        let input = tape.leaf(profiles.clone());
        let out = self.forward(&mut tape, &params, input, false)?;
        Ok((
            tape.value(out.logits).clone(),
            tape.value(out.embeddings).clone(),
        ))
    }

    /// Parameter leaves without gradient tracking, for inference graphs.
    fn insert_params_frozen(&self, tape: &mut Tape) -> ParamNodes {
        let refs = self.param_refs();
        let all: Vec<NodeId> = refs.iter().map(|(_, t)| tape.leaf((*t).clone())).collect();
        let layers = self.convs.len();
        let mut convs = Vec::new();
        let mut bns = Vec::new();
        for i in 0..layers {
            convs.push((all[4 * i], all[4 * i + 1]));
            bns.push((all[4 * i + 2], all[4 * i + 3]));
        }
        let base = 4 * layers;
        ParamNodes {
            convs,
            bns,
            proj: (all[base], all[base + 1]),
            attn: [
                (all[base + 2], all[base + 3]),
                (all[base + 4], all[base + 5]),
                (all[base + 6], all[base + 7]),
                (all[base + 8], all[base + 9]),
            ],
            clf: (all[base + 10], all[base + 11]),
            all,
        }
    }

    /// Stack per-frame range profiles into a forward-ready batch.
    pub fn profiles_from_frames(&self, frames: &[&IQFrame]) -> Result<CTensor> {
        if frames.is_empty() {
            return Err(Error::usage("empty frame batch"));
        }
        let (ch, n) = (frames[0].data.shape()[0], frames[0].data.shape()[1]);
        let mut out = CTensor::zeros(&[frames.len(), ch, n]);
        for (i, f) in frames.iter().enumerate() {
            let p = f.data.dft_1d()?;
            out.re_mut()[i * ch * n..(i + 1) * ch * n].copy_from_slice(p.re());
            out.im_mut()[i * ch * n..(i + 1) * ch * n].copy_from_slice(p.im());
        }
        Ok(out)
    }

    /// Update running BN statistics from one training step's batch stats.
    pub fn apply_bn_updates(&mut self, stats: &[BnBatchStats]) {
        let m = self.config.bn_momentum;
        for (layer, s) in stats.iter().enumerate() {
            let bn = &mut self.bns[layer];
            for c in 0..bn.running_mean_re.len() {
                bn.running_mean_re[c] = (1.0 - m) * bn.running_mean_re[c] + m * s.mean_re[c];
                bn.running_mean_im[c] = (1.0 - m) * bn.running_mean_im[c] + m * s.mean_im[c];
                bn.running_var_re[c] = (1.0 - m) * bn.running_var_re[c] + m * s.var_re[c];
                bn.running_var_im[c] = (1.0 - m) * bn.running_var_im[c] + m * s.var_im[c];
            }
        }
    }

    // ── checkpointing ───────────────────────────────────────────────────

    fn stat_tensors(&self) -> Vec<(String, CTensor)> {
        let mut out = Vec::new();
        for (i, bn) in self.bns.iter().enumerate() {
            out.push((
                format!("bn{i}.running_mean"),
                CTensor::from_planes(
                    &[bn.running_mean_re.len()],
                    bn.running_mean_re.clone(),
                    bn.running_mean_im.clone(),
                )
                .unwrap(),
            ));
            out.push((
                format!("bn{i}.running_var"),
                CTensor::from_planes(
                    &[bn.running_var_re.len()],
                    bn.running_var_re.clone(),
                    bn.running_var_im.clone(),
                )
                .unwrap(),
            ));
        }
        out
    }

    /// Serialize configuration, parameters and running statistics. Tensor
    /// payloads use the dataset float encoding (little-endian f32,
    /// interleaved re/im), so save→load round-trips bit-exactly at stored
    /// precision.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        w.write_all(CHECKPOINT_MAGIC)?;
        wire::write_u16(&mut w, CHECKPOINT_VERSION)?;

        let config_text: String = self
            .config
            .to_kv()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        wire::write_string(&mut w, &config_text)?;

        let named: Vec<(String, CTensor)> = self
            .param_refs()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .chain(self.stat_tensors())
            .collect();
        wire::write_u16(&mut w, named.len() as u16)?;
        for (name, tensor) in &named {
            wire::write_string(&mut w, name)?;
            wire::write_u8(&mut w, tensor.rank() as u8)?;
            for &d in tensor.shape() {
                wire::write_u32(&mut w, d as u32)?;
            }
            let mut vals = Vec::with_capacity(tensor.len() * 2);
            for i in 0..tensor.len() {
                vals.push(tensor.re()[i] as f32);
                vals.push(tensor.im()[i] as f32);
            }
            wire::write_f32_slice(&mut w, &vals)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<AccorNetwork> {
        let file = File::open(path)?;
        let mut r = Reader::new(BufReader::new(file));
        let magic = r.read_bytes(8)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::format("bad checkpoint magic"));
        }
        let version = r.read_u16()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let config_text = r.read_string()?;
        let mut pairs = Vec::new();
        for line in config_text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                pairs.push((k.trim().to_string(), v.trim().to_string()));
            }
        }
        let config = ModelConfig::from_kv(&pairs)?;
        let mut net = AccorNetwork::new(config, 0)?;

        let n_tensors = r.read_u16()? as usize;
        let mut loaded = std::collections::HashMap::new();
        for _ in 0..n_tensors {
            let name = r.read_string()?;
            let rank = r.read_u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.read_u32()? as usize);
            }
            let count: usize = shape.iter().product();
            let vals = r.read_f32_slice(count * 2)?;
            let mut re = Vec::with_capacity(count);
            let mut im = Vec::with_capacity(count);
            for pair in vals.chunks_exact(2) {
                re.push(pair[0] as f64);
                im.push(pair[1] as f64);
            }
            loaded.insert(name, CTensor::from_planes(&shape, re, im)?);
        }

        for (name, tensor) in net.param_refs_mut() {
            let stored = loaded
                .remove(&name)
                .ok_or_else(|| Error::format(format!("checkpoint missing tensor '{name}'")))?;
            if stored.shape() != tensor.shape() {
                return Err(Error::format(format!(
                    "checkpoint tensor '{name}' has shape {:?}, expected {:?}",
                    stored.shape(),
                    tensor.shape()
                )));
            }
            *tensor = stored;
        }
        for i in 0..net.bns.len() {
            let mean = loaded
                .remove(&format!("bn{i}.running_mean"))
                .ok_or_else(|| Error::format(format!("checkpoint missing bn{i}.running_mean")))?;
            let var = loaded
                .remove(&format!("bn{i}.running_var"))
                .ok_or_else(|| Error::format(format!("checkpoint missing bn{i}.running_var")))?;
            net.bns[i].running_mean_re = mean.re().to_vec();
            net.bns[i].running_mean_im = mean.im().to_vec();
            net.bns[i].running_var_re = var.re().to_vec();
            net.bns[i].running_var_im = var.im().to_vec();
        }
        if !loaded.is_empty() {
            let extra: Vec<String> = loaded.keys().cloned().collect();
            return Err(Error::format(format!(
                "checkpoint has unexpected tensors: {extra:?}"
            )));
        }
        Ok(net)
    }
}
