use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, Seq2SeqError};
use crate::nn::{
    bidirectional_backward, bidirectional_encode, gru_sequence_backward, gru_sequence_forward, mse_loss, repeat_vector,
    repeat_vector_backward, time_distributed_affine, time_distributed_affine_backward, Activation, AffineCache,
    AffineParams, BiEncoderCache, GruCellParams, GruSequenceCache, ParamTensors,
};
use crate::preprocess::SplitWindows;

/// Every trainable tensor of the forecaster. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqParams {
    pub enc_fwd: GruCellParams,
    /// Present only in the bidirectional model.
    pub enc_bwd: Option<GruCellParams>,
    pub decoder: GruCellParams,
    /// ReLU layer between decoder and output; absent when its width is 0.
    pub head: Option<AffineParams>,
    pub output: AffineParams,
}

impl Seq2SeqParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Self {
            enc_fwd: GruCellParams::zeros(cfg.feature_dim, cfg.enc_hidden),
            enc_bwd: cfg
                .bidirectional
                .then(|| GruCellParams::zeros(cfg.feature_dim, cfg.enc_hidden)),
            decoder: GruCellParams::zeros(cfg.context_dim(), cfg.dec_hidden),
            head: (cfg.head_hidden > 0).then(|| AffineParams::zeros(cfg.dec_hidden, cfg.head_hidden, Activation::Relu)),
            output: AffineParams::zeros(out_input_dim(cfg), cfg.target_dim, Activation::Identity),
        }
    }

    /// Seeded uniform init; draws in tensor order.
    pub fn init(cfg: &ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let enc_fwd = GruCellParams::init(cfg.feature_dim, cfg.enc_hidden, &mut rng);
        let enc_bwd = cfg
            .bidirectional
            .then(|| GruCellParams::init(cfg.feature_dim, cfg.enc_hidden, &mut rng));
        let decoder = GruCellParams::init(cfg.context_dim(), cfg.dec_hidden, &mut rng);
        let head = (cfg.head_hidden > 0)
            .then(|| AffineParams::init(cfg.dec_hidden, cfg.head_hidden, Activation::Relu, &mut rng));
        let output = AffineParams::init(out_input_dim(cfg), cfg.target_dim, Activation::Identity, &mut rng);
        Self {
            enc_fwd,
            enc_bwd,
            decoder,
            head,
            output,
        }
    }

    /// Whether every tensor has the shape `cfg` implies.
    pub fn matches(&self, cfg: &ModelConfig) -> bool {
        let z = Self::zeros(cfg);
        let shapes = |p: &Self| p.tensors().iter().map(|t| t.len()).collect::<Vec<_>>();
        shapes(self) == shapes(&z)
            && self.enc_fwd.input_weights.dim() == z.enc_fwd.input_weights.dim()
            && self.decoder.input_weights.dim() == z.decoder.input_weights.dim()
            && self.output.weight.dim() == z.output.weight.dim()
            && self.head.as_ref().map(|h| h.weight.dim()) == z.head.as_ref().map(|h| h.weight.dim())
    }
}

fn out_input_dim(cfg: &ModelConfig) -> usize {
    if cfg.head_hidden > 0 {
        cfg.head_hidden
    } else {
        cfg.dec_hidden
    }
}

impl ParamTensors for Seq2SeqParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.enc_fwd.tensors();
        if let Some(b) = &self.enc_bwd {
            v.extend(b.tensors());
        }
        v.extend(self.decoder.tensors());
        if let Some(h) = &self.head {
            v.extend(h.tensors());
        }
        v.extend(self.output.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.enc_fwd.tensors_mut();
        if let Some(b) = &mut self.enc_bwd {
            v.extend(b.tensors_mut());
        }
        v.extend(self.decoder.tensors_mut());
        if let Some(h) = &mut self.head {
            v.extend(h.tensors_mut());
        }
        v.extend(self.output.tensors_mut());
        v
    }
}

enum EncoderCache {
    Bi(BiEncoderCache),
    Uni(GruSequenceCache),
}

/// Forward intermediates for [`Seq2SeqModel::backward`].
pub struct Seq2SeqCache {
    encoder: EncoderCache,
    decoder: GruSequenceCache,
    head: Option<AffineCache>,
    output: AffineCache,
    lookback: usize,
    batch: usize,
}

/// Configuration plus parameters, operating in normalized units.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel {
    pub config: ModelConfig,
    pub params: Seq2SeqParams,
}

impl Seq2SeqModel {
    pub fn new(config: ModelConfig) -> Result<Self, Seq2SeqError> {
        config.validate()?;
        Ok(Self {
            params: Seq2SeqParams::init(&config),
            config,
        })
    }

    pub fn from_parts(config: ModelConfig, params: Seq2SeqParams) -> Result<Self, Seq2SeqError> {
        config.validate()?;
        if !params.matches(&config) {
            return Err(Seq2SeqError::Shape(
                "parameter shapes disagree with model config".into(),
            ));
        }
        Ok(Self { config, params })
    }

    fn check_input(&self, x: &ArrayView3<'_, f64>) -> Result<(), Seq2SeqError> {
        let (t, _, i) = x.dim();
        if t != self.config.lookback || i != self.config.feature_dim {
            return Err(Seq2SeqError::Shape(format!(
                "input is {t} steps x {i} features, model expects {} x {}",
                self.config.lookback, self.config.feature_dim
            )));
        }
        Ok(())
    }

    /// Batch forward: `x` is `lookback × B × features`, the result is
    /// `horizon × B × targets`.
    pub fn forward(&self, x: ArrayView3<'_, f64>) -> Result<(Array3<f64>, Seq2SeqCache), Seq2SeqError> {
        self.check_input(&x)?;
        let p = &self.params;
        let b = x.dim().1;
        let (context, encoder) = match &p.enc_bwd {
            Some(bwd) => {
                let (s, c) = bidirectional_encode(&p.enc_fwd, bwd, x)?;
                (s, EncoderCache::Bi(c))
            }
            None => {
                let h0 = Array2::zeros((b, self.config.enc_hidden));
                let (_, last, c) = gru_sequence_forward(&p.enc_fwd, x, h0.view())?;
                (last, EncoderCache::Uni(c))
            }
        };
        let repeated = repeat_vector(context.view(), self.config.horizon)?;
        let h0 = Array2::zeros((b, self.config.dec_hidden));
        let (dec_out, _, decoder) = gru_sequence_forward(&p.decoder, repeated.view(), h0.view())?;
        let (head_out, head) = match &p.head {
            Some(h) => {
                let (o, c) = time_distributed_affine(h, dec_out.view())?;
                (o, Some(c))
            }
            None => (dec_out, None),
        };
        let (y, output) = time_distributed_affine(&p.output, head_out.view())?;
        Ok((
            y,
            Seq2SeqCache {
                encoder,
                decoder,
                head,
                output,
                lookback: self.config.lookback,
                batch: b,
            },
        ))
    }

    /// Single window: `lookback × features` in, `horizon × targets` out.
    pub fn forward_window(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, Seq2SeqError> {
        let x3 = x.insert_axis(Axis(1));
        let (y, _) = self.forward(x3)?;
        Ok(y.index_axis_move(Axis(1), 0))
    }

    /// Gradients of every parameter given the upstream gradient on the
    /// output (`horizon × B × targets`).
    pub fn backward(&self, cache: &Seq2SeqCache, d_out: ArrayView3<'_, f64>) -> Result<Seq2SeqParams, Seq2SeqError> {
        let p = &self.params;
        let (g_output, d_head_out) = time_distributed_affine_backward(&p.output, &cache.output, d_out)?;
        let (g_head, d_dec_out) = match (&p.head, &cache.head) {
            (Some(h), Some(c)) => {
                let (g, d) = time_distributed_affine_backward(h, c, d_head_out.view())?;
                (Some(g), d)
            }
            _ => (None, d_head_out),
        };
        let (g_decoder, d_repeated, _) = gru_sequence_backward(&p.decoder, &cache.decoder, d_dec_out.view())?;
        let d_context = repeat_vector_backward(d_repeated.view());
        let (g_enc_fwd, g_enc_bwd) = match (&p.enc_bwd, &cache.encoder) {
            (Some(bwd), EncoderCache::Bi(c)) => {
                let (gf, gb, _) = bidirectional_backward(&p.enc_fwd, bwd, c, d_context.view())?;
                (gf, Some(gb))
            }
            (None, EncoderCache::Uni(c)) => {
                let mut d_hidden = Array3::zeros((cache.lookback, cache.batch, self.config.enc_hidden));
                d_hidden.index_axis_mut(Axis(0), cache.lookback - 1).assign(&d_context);
                let (gf, _, _) = gru_sequence_backward(&p.enc_fwd, c, d_hidden.view())?;
                (gf, None)
            }
            _ => unreachable!("encoder cache matches the parameter set that produced it"),
        };
        Ok(Seq2SeqParams {
            enc_fwd: g_enc_fwd,
            enc_bwd: g_enc_bwd,
            decoder: g_decoder,
            head: g_head,
            output: g_output,
        })
    }

    /// Batch MSE and its gradient with respect to every parameter.
    pub fn loss_and_grad(
        &self,
        x: ArrayView3<'_, f64>,
        y: ArrayView3<'_, f64>,
    ) -> Result<(f64, Seq2SeqParams), Seq2SeqError> {
        let (pred, cache) = self.forward(x)?;
        let (loss, d_out) = mse_loss(pred.view(), y)?;
        let grads = self.backward(&cache, d_out.view())?;
        Ok((loss, grads))
    }

    /// Batch MSE without gradients.
    pub fn loss(&self, x: ArrayView3<'_, f64>, y: ArrayView3<'_, f64>) -> Result<f64, Seq2SeqError> {
        let (pred, _) = self.forward(x)?;
        Ok(mse_loss(pred.view(), y)?.0)
    }
}

/// Picks windows `idx` from a split and lays them out time-major:
/// `(lookback × B × features, horizon × B × targets)`.
pub fn gather_batch(split: &SplitWindows, idx: &[usize]) -> (Array3<f64>, Array3<f64>) {
    let tm = |a: Array3<f64>| a.permuted_axes([1, 0, 2]).as_standard_layout().into_owned();
    (tm(split.x.select(Axis(0), idx)), tm(split.y.select(Axis(0), idx)))
}
