//! Stacked LSTM regressor trained by backpropagation through time and Adam.
//!
//! Each sample is a univariate window of `window_len` scaled values and the
//! target is the next value. Recurrent layers use the standard cell
//!
//! ```text
//! i = σ(x Wxi + h Whi + bi)    f = σ(x Wxf + h Whf + bf)
//! g = tanh(x Wxg + h Whg + bg) o = σ(x Wxo + h Who + bo)
//! c' = f ⊙ c + i ⊙ g           h' = o ⊙ tanh(c')
//! ```
//!
//! with gate columns stored in the order `[i, f, g, o]`. With `relu` enabled
//! the sequence handed to the next layer is `max(h, 0)` while the recurrence
//! itself keeps the raw `h`. The last hidden state of the top layer goes
//! through inverted dropout (training only) into a linear dense head.
//!
//! All weights live in one flat vector; [`TrainedLstm::tensors`] describes
//! how it is cut into matrices.

use std::io::{BufRead, Read as _};
use std::ops::Range;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{self, MarketDataError, ReturnSeries};
use crate::rng;

const CONTAINER_MAGIC: &str = "VOLLAB-LSTM";
const CONTAINER_VERSION: u32 = 1;
const FORGET_BIAS: f64 = 1.0;

#[derive(Debug, Error)]
pub enum LstmError {
    #[error("invalid LSTM configuration: {0}")]
    InvalidConfig(String),
    #[error("series of length {len} is too short for window {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("training values are constant; min-max scaling is undefined")]
    ConstantTrain,
    #[error("training values are empty")]
    EmptyTrain,
    #[error("input has {found} columns, model expects {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("{what} has {found} rows, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("dataset is empty")]
    EmptyData,
    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("model container: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    MarketData(#[from] MarketDataError),
}

pub type Result<T> = std::result::Result<T, LstmError>;

/// What the network learns to predict one day ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// The next daily return.
    Return,
    /// The next value of the trailing `window`-day realized volatility.
    RealizedVol { window: usize },
}

impl Target {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Return => "return",
            Self::RealizedVol { .. } => "realized-vol",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub window_len: usize,
    pub layer_sizes: Vec<usize>,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// ReLU on each recurrent layer's output sequence.
    pub relu: bool,
    pub target: Target,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            window_len: 5,
            layer_sizes: vec![512, 256, 128],
            dropout: 0.2,
            batch_size: 64,
            epochs: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            relu: true,
            target: Target::Return,
            seed: 42,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LstmError::InvalidConfig(m));
        if self.window_len == 0 {
            return bad("window_len must be at least 1".into());
        }
        if self.layer_sizes.is_empty() || self.layer_sizes.contains(&0) {
            return bad(format!("layer sizes must be positive, got {:?}", self.layer_sizes));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            ));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0) {
            return bad("Adam requires 0 <= beta1, beta2 < 1 and epsilon > 0".into());
        }
        if let Target::RealizedVol { window } = self.target {
            if window < 2 {
                return bad(format!("realized-vol target window must be at least 2, got {window}"));
            }
        }
        Ok(())
    }
}

/// `x ↦ (x − min)/(max − min)` with bounds taken from training data only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: f64,
    pub max: f64,
}

impl MinMaxScaler {
    pub const IDENTITY: Self = Self { min: 0.0, max: 1.0 };

    pub fn fit(train: &[f64]) -> Result<Self> {
        if train.is_empty() {
            return Err(LstmError::EmptyTrain);
        }
        let min = train.iter().copied().fold(f64::INFINITY, f64::min);
        let max = train.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > min) {
            return Err(LstmError::ConstantTrain);
        }
        Ok(Self { min, max })
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn invert(&self, y: f64) -> f64 {
        y * (self.max - self.min) + self.min
    }
}

/// Fits a scaler on `train` and applies it to both partitions. Values of
/// `other` outside the training range are extrapolated, not clipped.
pub fn scale_fit_apply(train: &[f64], other: &[f64]) -> Result<(Vec<f64>, Vec<f64>, MinMaxScaler)> {
    let scaler = MinMaxScaler::fit(train)?;
    let a = train.iter().map(|&x| scaler.apply(x)).collect();
    let b = other.iter().map(|&x| scaler.apply(x)).collect();
    Ok((a, b, scaler))
}

/// Stride-1 windows: row `i` holds `values[i .. i+window_len]` and the target
/// is `values[i+window_len]`, all in scaled units.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub inputs: Array2<f64>,
    pub targets: Array1<f64>,
    pub target_dates: Vec<NaiveDate>,
    pub window_len: usize,
    pub scaler: MinMaxScaler,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Rows picked by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> WindowedDataset {
        WindowedDataset {
            inputs: self.inputs.select(Axis(0), indices),
            targets: self.targets.select(Axis(0), indices),
            target_dates: indices.iter().map(|&i| self.target_dates[i]).collect(),
            window_len: self.window_len,
            scaler: self.scaler,
        }
    }
}

/// Windows over unscaled values.
pub fn build_windows(series: &ReturnSeries, window_len: usize) -> Result<WindowedDataset> {
    windows_from(series.dates(), series.values(), window_len, MinMaxScaler::IDENTITY)
}

/// Windows over `values` after applying `scaler`.
pub fn windows_from(
    dates: &[NaiveDate],
    values: &[f64],
    window_len: usize,
    scaler: MinMaxScaler,
) -> Result<WindowedDataset> {
    if window_len == 0 {
        return Err(LstmError::InvalidConfig("window_len must be at least 1".into()));
    }
    if values.len() <= window_len {
        return Err(LstmError::SeriesTooShort {
            len: values.len(),
            window: window_len,
        });
    }
    let scaled: Vec<f64> = values.iter().map(|&x| scaler.apply(x)).collect();
    let n = values.len() - window_len;
    let inputs = Array2::from_shape_fn((n, window_len), |(i, j)| scaled[i + j]);
    Ok(WindowedDataset {
        inputs,
        targets: Array1::from(scaled[window_len..].to_vec()),
        target_dates: dates[window_len..].to_vec(),
        window_len,
        scaler,
    })
}

/// The univariate series the network sees for `target`: the returns
/// themselves, or their trailing realized volatility.
pub fn target_series(returns: &ReturnSeries, target: Target) -> Result<(Vec<NaiveDate>, Vec<f64>)> {
    match target {
        Target::Return => Ok((returns.dates().to_vec(), returns.values().to_vec())),
        Target::RealizedVol { window } => {
            let vol = market_data::realized_volatility(returns, window)?;
            Ok((vol.dates, vol.values))
        }
    }
}

/// Scaled training and validation windows for a date split.
///
/// The scaler is fitted on the training part of the target series. The
/// validation windows may reach back into the training tail for their
/// inputs, so every target dated after `boundary` gets a sample.
pub fn prepare_datasets(
    returns: &ReturnSeries,
    boundary: NaiveDate,
    window_len: usize,
    target: Target,
) -> Result<(WindowedDataset, WindowedDataset)> {
    let (dates, values) = target_series(returns, target)?;
    let cut = dates.partition_point(|d| *d <= boundary);
    let scaler = MinMaxScaler::fit(&values[..cut])?;
    let train = windows_from(&dates[..cut], &values[..cut], window_len, scaler)?;
    let start = cut.saturating_sub(window_len);
    let valid = windows_from(&dates[start..], &values[start..], window_len, scaler)?;
    Ok((train, valid))
}

/// Name and shape of one weight tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    fn size(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerSlots {
    input: usize,
    hidden: usize,
    wx: usize,
    wh: usize,
    b: usize,
}

impl LayerSlots {
    fn wx_range(&self) -> Range<usize> {
        self.wx..self.wx + self.input * 4 * self.hidden
    }

    fn wh_range(&self) -> Range<usize> {
        self.wh..self.wh + self.hidden * 4 * self.hidden
    }

    fn b_range(&self) -> Range<usize> {
        self.b..self.b + 4 * self.hidden
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    layers: Vec<LayerSlots>,
    head_w: Range<usize>,
    head_b: usize,
    len: usize,
}

impl Layout {
    fn new(layer_sizes: &[usize]) -> Self {
        let mut offset = 0;
        let mut input = 1;
        let mut layers = Vec::with_capacity(layer_sizes.len());
        for &hidden in layer_sizes {
            let wx = offset;
            let wh = wx + input * 4 * hidden;
            let b = wh + hidden * 4 * hidden;
            offset = b + 4 * hidden;
            layers.push(LayerSlots {
                input,
                hidden,
                wx,
                wh,
                b,
            });
            input = hidden;
        }
        let head_w = offset..offset + input;
        let head_b = head_w.end;
        Self {
            layers,
            head_w,
            head_b,
            len: head_b + 1,
        }
    }

    fn tensors(&self) -> Vec<TensorSpec> {
        let mut out = Vec::new();
        for (l, s) in self.layers.iter().enumerate() {
            let h4 = 4 * s.hidden;
            out.push(TensorSpec {
                name: format!("layer{l}.wx"),
                shape: vec![s.input, h4],
            });
            out.push(TensorSpec {
                name: format!("layer{l}.wh"),
                shape: vec![s.hidden, h4],
            });
            out.push(TensorSpec {
                name: format!("layer{l}.b"),
                shape: vec![h4],
            });
        }
        out.push(TensorSpec {
            name: "head.w".into(),
            shape: vec![self.head_w.len()],
        });
        out.push(TensorSpec {
            name: "head.b".into(),
            shape: vec![1],
        });
        out
    }

    fn top_hidden(&self) -> usize {
        self.head_w.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedLstm {
    pub config: LstmConfig,
    pub scaler: MinMaxScaler,
    pub loss_history: Vec<EpochLoss>,
    params: Vec<f64>,
    layout: Layout,
}

/// Gate pre-activations and outputs of one time step, batch-major.
struct StepCache {
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    c: Array2<f64>,
    tanh_c: Array2<f64>,
    h: Array2<f64>,
}

struct LayerCache {
    inputs: Vec<Array2<f64>>,
    steps: Vec<StepCache>,
}

/// Result of a forward pass with everything BPTT needs.
pub struct ForwardPass {
    pub predictions: Array1<f64>,
    /// Top-layer features after the output activation, before dropout.
    pub features: Array2<f64>,
    /// What the dense head actually saw (features with dropout applied).
    pub head_input: Array2<f64>,
    mask: Option<Array2<f64>>,
    layers: Vec<LayerCache>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Inverted dropout mask: each entry is `1/(1−rate)` with probability
/// `1−rate` and 0 otherwise.
pub fn dropout_mask(rate: f64, rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    draw_mask(rate, rows, cols, &mut rng::seeded(seed))
}

fn draw_mask<R: Rng>(rate: f64, rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    Array2::from_shape_simple_fn((rows, cols), || if rng.random::<f64>() < keep { scale } else { 0.0 })
}

impl TrainedLstm {
    /// Fresh network. Each gate block of `[x; h] → gate` is drawn uniform in
    /// `±√(6/(fan_in + fan_out))` with `fan_in = input + hidden` and
    /// `fan_out = hidden`; the head uses `fan_in = hidden`, `fan_out = 1`.
    /// Forget-gate biases start at 1, all other biases at 0.
    pub fn init(config: &LstmConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config.layer_sizes);
        let mut params = vec![0.0; layout.len];
        let mut rng = rng::substream(seed, 0);
        for s in &layout.layers {
            let bound = layer_bound(s);
            for r in [s.wx_range(), s.wh_range()] {
                for p in &mut params[r] {
                    *p = rng.random_range(-bound..bound);
                }
            }
            params[s.b + s.hidden..s.b + 2 * s.hidden].fill(FORGET_BIAS);
        }
        let bound = head_bound(layout.top_hidden());
        for p in &mut params[layout.head_w.clone()] {
            *p = rng.random_range(-bound..bound);
        }
        Ok(Self {
            config: config.clone(),
            scaler: MinMaxScaler::IDENTITY,
            loss_history: Vec::new(),
            params,
            layout,
        })
    }

    /// A network whose every weight and bias is zero.
    pub fn zeros(config: &LstmConfig) -> Result<Self> {
        let mut m = Self::init(config, 0)?;
        m.params.fill(0.0);
        Ok(m)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(LstmError::LengthMismatch {
                what: "parameter vector",
                expected: self.params.len(),
                found: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layout.len
    }

    pub fn tensors(&self) -> Vec<TensorSpec> {
        self.layout.tensors()
    }

    /// Initialization bound of every weight, in flat order (0 for biases).
    pub fn init_bounds(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.layout.len];
        for s in &self.layout.layers {
            let bound = layer_bound(s);
            out[s.wx_range()].fill(bound);
            out[s.wh_range()].fill(bound);
        }
        out[self.layout.head_w.clone()].fill(head_bound(self.layout.top_hidden()));
        out
    }

    /// Flat indices of the forget-gate biases.
    pub fn forget_bias_indices(&self) -> Vec<usize> {
        self.layout
            .layers
            .iter()
            .flat_map(|s| s.b + s.hidden..s.b + 2 * s.hidden)
            .collect()
    }

    fn view2(&self, r: Range<usize>, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((rows, cols), &self.params[r]).expect("layout shape")
    }

    fn view1(&self, r: Range<usize>) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[r])
    }

    /// Runs the batch `inputs` (rows are samples, columns time steps).
    /// Passing a mask of shape `(rows, top hidden)` selects training mode.
    pub fn forward(&self, inputs: ArrayView2<f64>, mask: Option<&Array2<f64>>) -> Result<ForwardPass> {
        let window = self.config.window_len;
        if inputs.ncols() != window {
            return Err(LstmError::ShapeMismatch {
                expected: window,
                found: inputs.ncols(),
            });
        }
        let batch = inputs.nrows();
        if let Some(m) = mask {
            if m.dim() != (batch, self.layout.top_hidden()) {
                return Err(LstmError::ShapeMismatch {
                    expected: self.layout.top_hidden(),
                    found: m.ncols(),
                });
            }
        }
        let mut seq: Vec<Array2<f64>> = (0..window).map(|t| inputs.slice(s![.., t..t + 1]).to_owned()).collect();
        let mut layers = Vec::with_capacity(self.layout.layers.len());
        for slots in &self.layout.layers {
            let hd = slots.hidden;
            let wx = self.view2(slots.wx_range(), slots.input, 4 * hd);
            let wh = self.view2(slots.wh_range(), hd, 4 * hd);
            let b = self.view1(slots.b_range());
            let mut h = Array2::<f64>::zeros((batch, hd));
            let mut c = Array2::<f64>::zeros((batch, hd));
            let mut steps = Vec::with_capacity(window);
            let mut out = Vec::with_capacity(window);
            for x in &seq {
                let mut z = x.dot(&wx) + h.dot(&wh);
                z += &b;
                let i = z.slice(s![.., 0..hd]).mapv(sigmoid);
                let f = z.slice(s![.., hd..2 * hd]).mapv(sigmoid);
                let g = z.slice(s![.., 2 * hd..3 * hd]).mapv(f64::tanh);
                let o = z.slice(s![.., 3 * hd..]).mapv(sigmoid);
                c = &f * &c + &i * &g;
                let tanh_c = c.mapv(f64::tanh);
                h = &o * &tanh_c;
                out.push(if self.config.relu {
                    h.mapv(|v| v.max(0.0))
                } else {
                    h.clone()
                });
                steps.push(StepCache {
                    i,
                    f,
                    g,
                    o,
                    c: c.clone(),
                    tanh_c,
                    h: h.clone(),
                });
            }
            layers.push(LayerCache { inputs: seq, steps });
            seq = out;
        }
        let features = seq.pop().expect("window_len >= 1");
        let head_input = match mask {
            Some(m) => &features * m,
            None => features.clone(),
        };
        let w = self.view1(self.layout.head_w.clone());
        let predictions = head_input.dot(&w) + self.params[self.layout.head_b];
        Ok(ForwardPass {
            predictions,
            features,
            head_input,
            mask: mask.cloned(),
            layers,
        })
    }

    /// Gradient of a loss with respect to every parameter given
    /// `d loss / d prediction` for each row of the pass.
    fn backward(&self, pass: &ForwardPass, dpred: ArrayView1<f64>) -> Vec<f64> {
        let mut grad = vec![0.0; self.layout.len];
        let w = self.view1(self.layout.head_w.clone());
        let gw = pass.head_input.t().dot(&dpred);
        grad[self.layout.head_w.clone()].copy_from_slice(gw.as_slice().expect("contiguous"));
        grad[self.layout.head_b] = dpred.sum();

        let batch = dpred.len();
        let mut d_top = Array2::from_shape_fn((batch, w.len()), |(r, k)| dpred[r] * w[k]);
        if let Some(m) = &pass.mask {
            d_top *= m;
        }
        let window = self.config.window_len;
        let mut d_out: Vec<Option<Array2<f64>>> = vec![None; window];
        d_out[window - 1] = Some(d_top);

        for (l, slots) in self.layout.layers.iter().enumerate().rev() {
            let cache = &pass.layers[l];
            let hd = slots.hidden;
            let wx = self.view2(slots.wx_range(), slots.input, 4 * hd);
            let wh = self.view2(slots.wh_range(), hd, 4 * hd);
            let mut dwx = Array2::<f64>::zeros((slots.input, 4 * hd));
            let mut dwh = Array2::<f64>::zeros((hd, 4 * hd));
            let mut db = Array1::<f64>::zeros(4 * hd);
            let mut dh_next = Array2::<f64>::zeros((batch, hd));
            let mut dc_next = Array2::<f64>::zeros((batch, hd));
            let mut d_in: Vec<Option<Array2<f64>>> = vec![None; window];
            let zeros = Array2::<f64>::zeros((batch, hd));
            for t in (0..window).rev() {
                let st = &cache.steps[t];
                let mut dh = dh_next;
                if let Some(ext) = &d_out[t] {
                    if self.config.relu {
                        dh += &(ext * &st.h.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }));
                    } else {
                        dh += ext;
                    }
                }
                let (c_prev, h_prev) = if t > 0 {
                    (&cache.steps[t - 1].c, &cache.steps[t - 1].h)
                } else {
                    (&zeros, &zeros)
                };
                let d_o = &dh * &st.tanh_c;
                let dc = &dh * &st.o * &st.tanh_c.mapv(|v| 1.0 - v * v) + &dc_next;
                let d_i = &dc * &st.g;
                let d_g = &dc * &st.i;
                let d_f = &dc * c_prev;
                dc_next = &dc * &st.f;
                let mut dz = Array2::<f64>::zeros((batch, 4 * hd));
                dz.slice_mut(s![.., 0..hd])
                    .assign(&(&d_i * &st.i.mapv(|v| v * (1.0 - v))));
                dz.slice_mut(s![.., hd..2 * hd])
                    .assign(&(&d_f * &st.f.mapv(|v| v * (1.0 - v))));
                dz.slice_mut(s![.., 2 * hd..3 * hd])
                    .assign(&(&d_g * &st.g.mapv(|v| 1.0 - v * v)));
                dz.slice_mut(s![.., 3 * hd..])
                    .assign(&(&d_o * &st.o.mapv(|v| v * (1.0 - v))));
                dwx += &cache.inputs[t].t().dot(&dz);
                dwh += &h_prev.t().dot(&dz);
                db += &dz.sum_axis(Axis(0));
                if l > 0 {
                    d_in[t] = Some(dz.dot(&wx.t()));
                }
                dh_next = dz.dot(&wh.t());
            }
            for (r, g) in [(slots.wx_range(), dwx.iter()), (slots.wh_range(), dwh.iter())] {
                for (dst, v) in grad[r].iter_mut().zip(g) {
                    *dst = *v;
                }
            }
            grad[slots.b_range()].copy_from_slice(db.as_slice().expect("contiguous"));
            d_out = d_in;
        }
        grad
    }

    /// `scale · mean((pred − y)²)` over the batch and its gradient.
    pub fn loss_and_gradient(
        &self,
        inputs: ArrayView2<f64>,
        targets: ArrayView1<f64>,
        mask: Option<&Array2<f64>>,
        scale: f64,
    ) -> Result<(f64, Vec<f64>)> {
        if targets.len() != inputs.nrows() {
            return Err(LstmError::LengthMismatch {
                what: "targets",
                expected: inputs.nrows(),
                found: targets.len(),
            });
        }
        let pass = self.forward(inputs, mask)?;
        let err = &pass.predictions - &targets;
        let n = err.len() as f64;
        let loss = scale * err.mapv(|e| e * e).sum() / n;
        let dpred = err.mapv(|e| 2.0 * scale * e / n);
        Ok((loss, self.backward(&pass, dpred.view())))
    }

    /// Loss without gradient, used by finite differences.
    pub fn loss(&self, inputs: ArrayView2<f64>, targets: ArrayView1<f64>) -> Result<f64> {
        let pass = self.forward(inputs, None)?;
        let err = &pass.predictions - &targets;
        Ok(err.mapv(|e| e * e).mean().unwrap_or(0.0))
    }

    /// Evaluation-mode MSE on a dataset, in its scaled units.
    pub fn evaluate(&self, data: &WindowedDataset) -> Result<f64> {
        if data.is_empty() {
            return Err(LstmError::EmptyData);
        }
        self.loss(data.inputs.view(), data.targets.view())
    }

    /// Evaluation-mode predictions mapped back through the model's scaler.
    pub fn predict(&self, data: &WindowedDataset) -> Result<Vec<f64>> {
        Ok(self
            .predict_scaled(data)?
            .iter()
            .map(|&y| self.scaler.invert(y))
            .collect())
    }

    /// Evaluation-mode predictions in scaled units.
    pub fn predict_scaled(&self, data: &WindowedDataset) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(data.len());
        let chunk = self.config.batch_size.max(1);
        let mut start = 0;
        while start < data.len() {
            let end = (start + chunk).min(data.len());
            let pass = self.forward(data.inputs.slice(s![start..end, ..]), None)?;
            out.extend(pass.predictions.iter());
            start = end;
        }
        Ok(out)
    }

    /// Mini-batch Adam training for `config.epochs` epochs.
    ///
    /// Epoch `e` (1-based) shuffles with stream `e` of the configured seed and
    /// draws its dropout masks from the same stream, so a run is fully
    /// determined by the seed and the data. The recorded training loss is the
    /// sample-weighted mean of the training-mode batch losses.
    pub fn train(mut self, data: &WindowedDataset, validation: Option<&WindowedDataset>) -> Result<Self> {
        self.config.validate()?;
        if data.is_empty() {
            return Err(LstmError::EmptyData);
        }
        if data.window_len != self.config.window_len {
            return Err(LstmError::ShapeMismatch {
                expected: self.config.window_len,
                found: data.window_len,
            });
        }
        self.scaler = data.scaler;
        let cfg = self.config.clone();
        let top = self.layout.top_hidden();
        let mut m = vec![0.0; self.layout.len];
        let mut v = vec![0.0; self.layout.len];
        let mut step = 0i32;
        let mut order: Vec<usize> = (0..data.len()).collect();
        let first_epoch = self.loss_history.len() + 1;
        for epoch in first_epoch..first_epoch + cfg.epochs {
            let mut rng = rng::substream(cfg.seed, epoch as u64);
            order.sort_unstable();
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for (batch_no, idx) in order.chunks(cfg.batch_size).enumerate() {
                let inputs = data.inputs.select(Axis(0), idx);
                let targets = data.targets.select(Axis(0), idx);
                let mask = (cfg.dropout > 0.0).then(|| draw_mask(cfg.dropout, idx.len(), top, &mut rng));
                let (loss, grad) = self.loss_and_gradient(inputs.view(), targets.view(), mask.as_ref(), 1.0)?;
                if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(LstmError::NonFiniteLoss {
                        epoch,
                        batch: batch_no + 1,
                    });
                }
                total += loss * idx.len() as f64;
                step += 1;
                let c1 = 1.0 - cfg.beta1.powi(step);
                let c2 = 1.0 - cfg.beta2.powi(step);
                for (((p, g), m), v) in self.params.iter_mut().zip(&grad).zip(&mut m).zip(&mut v) {
                    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                    *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
                }
            }
            let val_loss = match validation {
                Some(val) if !val.is_empty() => Some(self.evaluate(val)?),
                _ => None,
            };
            self.loss_history.push(EpochLoss {
                epoch,
                train_loss: total / data.len() as f64,
                val_loss,
            });
        }
        Ok(self)
    }

    /// Serializes to the versioned container: a magic line, one JSON header
    /// line (config, scaler, loss history, tensor shapes), then every
    /// parameter as little-endian `f64` in flat order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = ContainerHeader {
            config: self.config.clone(),
            scaler: self.scaler,
            loss_history: self.loss_history.clone(),
            tensors: self.tensors(),
        };
        let mut out = format!("{CONTAINER_MAGIC} {CONTAINER_VERSION}\n").into_bytes();
        out.extend(serde_json::to_vec(&header).expect("header serializes"));
        out.push(b'\n');
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |m: &str| LstmError::Format(m.to_string());
        let mut reader = bytes;
        let mut magic = String::new();
        reader.read_line(&mut magic)?;
        let expected = format!("{CONTAINER_MAGIC} {CONTAINER_VERSION}");
        if magic.trim_end() != expected {
            return Err(fmt(&format!(
                "expected header '{expected}', found '{}'",
                magic.trim_end()
            )));
        }
        let mut json = Vec::new();
        reader.read_until(b'\n', &mut json)?;
        let header: ContainerHeader = serde_json::from_slice(&json).map_err(|e| fmt(&format!("bad header: {e}")))?;
        header.config.validate()?;
        let layout = Layout::new(&header.config.layer_sizes);
        if header.tensors != layout.tensors() {
            return Err(fmt("tensor shapes do not match the configured layers"));
        }
        let expected_len: usize = header.tensors.iter().map(TensorSpec::size).sum();
        let mut raw = Vec::new();
        reader.read_to_end(&mut raw)?;
        if raw.len() != expected_len * 8 {
            return Err(fmt(&format!(
                "expected {} weight bytes, found {}",
                expected_len * 8,
                raw.len()
            )));
        }
        let params: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(fmt("non-finite weight"));
        }
        Ok(Self {
            config: header.config,
            scaler: header.scaler,
            loss_history: header.loss_history,
            params,
            layout,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// `epoch,train_loss,val_loss` with an empty cell when no validation set
    /// was given.
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for e in &self.loss_history {
            let val = e.val_loss.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, val));
        }
        s
    }
}

fn layer_bound(s: &LayerSlots) -> f64 {
    (6.0 / ((s.input + s.hidden) + s.hidden) as f64).sqrt()
}

fn head_bound(hidden: usize) -> f64 {
    (6.0 / (hidden + 1) as f64).sqrt()
}

#[derive(Serialize, Deserialize)]
struct ContainerHeader {
    config: LstmConfig,
    scaler: MinMaxScaler,
    loss_history: Vec<EpochLoss>,
    tensors: Vec<TensorSpec>,
}

/// Outcome of comparing BPTT against central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_rel_error: f64,
    pub checked: usize,
}

/// Compares the analytic MSE gradient with central differences of step `h`
/// on `n_weights` distinct weights chosen with `seed` (all of them if the
/// network is smaller). Relative error is `|a − n| / max(|a|, |n|, 1e-6)`;
/// the floor keeps components whose size is comparable to the difference
/// quotient's round-off (about `1e-16 · loss / h`) from dominating.
/// Dropout is never applied.
pub fn gradient_check(
    model: &TrainedLstm,
    inputs: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    n_weights: usize,
    h: f64,
    seed: u64,
) -> Result<GradientCheck> {
    let (_, analytic) = model.loss_and_gradient(inputs, targets, None, 1.0)?;
    let mut indices: Vec<usize> = (0..model.num_params()).collect();
    indices.shuffle(&mut rng::seeded(seed));
    indices.truncate(n_weights);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for &k in &indices {
        let orig = model.params[k];
        probe.params[k] = orig + h;
        let up = probe.loss(inputs, targets)?;
        probe.params[k] = orig - h;
        let down = probe.loss(inputs, targets)?;
        probe.params[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(GradientCheck {
        max_rel_error: worst,
        checked: indices.len(),
    })
}
