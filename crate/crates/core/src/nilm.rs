//! Sequence-to-point NILM adversary.
//!
//! A small 1-D CNN reads an odd-length window of aggregate power and
//! predicts one appliance's power at the window centre. Thresholding that
//! prediction gives the attacker's on/off guess for every minute.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{fan_in_uniform, Adam};
use crate::seed::{self, Stream};

/// Default on/off decision threshold, kW.
pub const ON_THRESHOLD_KW: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seq2PointSpec {
    /// Window length m; must be odd.
    pub sequence_length: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    /// Odd kernel width; stride 1 with `kernel / 2` zero padding keeps the length.
    pub kernel: usize,
}

impl Default for Seq2PointSpec {
    fn default() -> Self {
        Self {
            sequence_length: 5,
            conv1_channels: 16,
            conv2_channels: 32,
            kernel: 5,
        }
    }
}

impl Seq2PointSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sequence_length == 0 || self.sequence_length % 2 == 0 {
            return Err(Error::Config(format!(
                "nilm sequence_length must be odd (got {})",
                self.sequence_length
            )));
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::Config("nilm kernel must be odd".into()));
        }
        if self.conv1_channels == 0 || self.conv2_channels == 0 {
            return Err(Error::Config("nilm channel counts must be >= 1".into()));
        }
        Ok(())
    }

    fn padding(&self) -> usize {
        self.kernel / 2
    }

    fn layout(&self) -> Layout {
        let (c1, c2, k) = (self.conv1_channels, self.conv2_channels, self.kernel);
        let w1 = 0;
        let b1 = w1 + c1 * k;
        let w2 = b1 + c1;
        let b2 = w2 + c2 * c1 * k;
        let wf = b2 + c2;
        let bf = wf + c2;
        Layout {
            w1,
            b1,
            w2,
            b2,
            wf,
            bf,
            len: bf + 1,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().len
    }
}

#[derive(Clone, Copy, Debug)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wf: usize,
    bf: usize,
    len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NilmTrainConfig {
    /// Minibatch gradient steps.
    pub iterations: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for NilmTrainConfig {
    fn default() -> Self {
        Self {
            iterations: 100_000,
            lr_initial: 0.005,
            lr_final: 0.001,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl NilmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(Error::Config("nilm iterations and batch_size must be >= 1".into()));
        }
        if !(self.lr_initial > 0.0 && self.lr_final > 0.0) {
            return Err(Error::Config("nilm learning rates must be positive".into()));
        }
        Ok(())
    }

    /// Linear decay from `lr_initial` at the first step to `lr_final` at the last.
    pub fn learning_rate(&self, iteration: usize) -> f64 {
        if self.iterations <= 1 {
            return self.lr_initial;
        }
        let f = iteration as f64 / (self.iterations - 1) as f64;
        self.lr_initial + (self.lr_final - self.lr_initial) * f
    }
}

/// One window per index of `series`, centred on it; positions beyond either
/// end repeat the boundary value.
pub fn make_windows(series: &[f64], m: usize) -> Result<Vec<Vec<f64>>> {
    if m % 2 == 0 {
        return Err(Error::Config(format!("window length must be odd (got {m})")));
    }
    if series.is_empty() {
        return Err(Error::Data("cannot window an empty series".into()));
    }
    Ok((0..series.len())
        .map(|t| {
            let mut w = vec![0.0; m];
            fill_window(series, t, &mut w);
            w
        })
        .collect())
}

fn fill_window(series: &[f64], center: usize, out: &mut [f64]) {
    let half = (out.len() / 2) as isize;
    let last = series.len() as isize - 1;
    for (j, slot) in out.iter_mut().enumerate() {
        let idx = (center as isize + j as isize - half).clamp(0, last);
        *slot = series[idx as usize];
    }
}

/// Strict threshold: `prediction > threshold` means on.
pub fn classify(prediction: f64, threshold: f64) -> bool {
    prediction > threshold
}

/// The CNN over normalized inputs; `NilmModel` adds the unit scaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seq2PointNet {
    pub spec: Seq2PointSpec,
    params: Vec<f64>,
}

/// Intermediate activations of one forward pass.
#[derive(Clone, Debug, Default)]
pub struct ConvTape {
    x: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    pooled: Vec<f64>,
    dh1: Vec<f64>,
}

impl Seq2PointNet {
    pub fn new<R: Rng + ?Sized>(spec: Seq2PointSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let l = spec.layout();
        let (c1, c2, k) = (spec.conv1_channels, spec.conv2_channels, spec.kernel);
        let mut params = vec![0.0; l.len];
        fan_in_uniform(rng, k, &mut params[l.w1..l.w2]);
        fan_in_uniform(rng, c1 * k, &mut params[l.w2..l.wf]);
        fan_in_uniform(rng, c2, &mut params[l.wf..]);
        Ok(Self { spec, params })
    }

    pub fn from_params(spec: Seq2PointSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::Mismatch(format!(
                "nilm network expects {} parameters, got {}",
                spec.param_count(),
                params.len()
            )));
        }
        Ok(Self { spec, params })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Forward pass on a window of any length >= 1, recording activations.
    pub fn forward_tape(&self, x: &[f64], tape: &mut ConvTape) -> f64 {
        let s = &self.spec;
        let l = s.layout();
        let (c1, c2, k, pad) = (s.conv1_channels, s.conv2_channels, s.kernel, s.padding());
        let n = x.len();
        let p = &self.params;
        tape.x.clear();
        tape.x.extend_from_slice(x);
        tape.h1.clear();
        tape.h1.resize(c1 * n, 0.0);
        tape.h2.clear();
        tape.h2.resize(c2 * n, 0.0);
        tape.pooled.clear();
        tape.pooled.resize(c2, 0.0);

        for c in 0..c1 {
            let w = &p[l.w1 + c * k..l.w1 + (c + 1) * k];
            for t in 0..n {
                let mut acc = p[l.b1 + c];
                for (j, wj) in w.iter().enumerate() {
                    if let Some(i) = (t + j).checked_sub(pad).filter(|&i| i < n) {
                        acc += wj * x[i];
                    }
                }
                tape.h1[c * n + t] = acc.max(0.0);
            }
        }
        for c in 0..c2 {
            let mut sum = 0.0;
            for t in 0..n {
                let mut acc = p[l.b2 + c];
                for ci in 0..c1 {
                    let w = &p[l.w2 + (c * c1 + ci) * k..l.w2 + (c * c1 + ci + 1) * k];
                    let h = &tape.h1[ci * n..(ci + 1) * n];
                    for (j, wj) in w.iter().enumerate() {
                        if let Some(i) = (t + j).checked_sub(pad).filter(|&i| i < n) {
                            acc += wj * h[i];
                        }
                    }
                }
                let a = acc.max(0.0);
                tape.h2[c * n + t] = a;
                sum += a;
            }
            tape.pooled[c] = sum / n as f64;
        }
        let mut y = p[l.bf];
        for c in 0..c2 {
            y += p[l.wf + c] * tape.pooled[c];
        }
        y
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.forward_tape(x, &mut ConvTape::default())
    }

    /// Accumulates `dy · d(output)/d(params)` for the pass in `tape`.
    pub fn backward(&self, tape: &mut ConvTape, dy: f64, grads: &mut [f64]) {
        let s = &self.spec;
        let l = s.layout();
        let (c1, c2, k, pad) = (s.conv1_channels, s.conv2_channels, s.kernel, s.padding());
        let n = tape.x.len();
        let p = &self.params;
        grads[l.bf] += dy;
        tape.dh1.clear();
        tape.dh1.resize(c1 * n, 0.0);
        for c in 0..c2 {
            grads[l.wf + c] += dy * tape.pooled[c];
            let dpool = dy * p[l.wf + c] / n as f64;
            for t in 0..n {
                if tape.h2[c * n + t] <= 0.0 {
                    continue;
                }
                grads[l.b2 + c] += dpool;
                for ci in 0..c1 {
                    let wo = l.w2 + (c * c1 + ci) * k;
                    for j in 0..k {
                        if let Some(i) = (t + j).checked_sub(pad).filter(|&i| i < n) {
                            grads[wo + j] += dpool * tape.h1[ci * n + i];
                            tape.dh1[ci * n + i] += dpool * p[wo + j];
                        }
                    }
                }
            }
        }
        for c in 0..c1 {
            for t in 0..n {
                if tape.h1[c * n + t] <= 0.0 {
                    continue;
                }
                let d = tape.dh1[c * n + t];
                grads[l.b1 + c] += d;
                for j in 0..k {
                    if let Some(i) = (t + j).checked_sub(pad).filter(|&i| i < n) {
                        grads[l.w1 + c * k + j] += d * tape.x[i];
                    }
                }
            }
        }
    }

    /// Mean squared error over `(window, target)` pairs and its gradient.
    pub fn mse_and_grad(&self, windows: &[&[f64]], targets: &[f64], grads: &mut Vec<f64>) -> f64 {
        grads.clear();
        grads.resize(self.params.len(), 0.0);
        let mut tape = ConvTape::default();
        let n = windows.len() as f64;
        let mut loss = 0.0;
        for (w, &y) in windows.iter().zip(targets) {
            let err = self.forward_tape(w, &mut tape) - y;
            loss += err * err / n;
            self.backward(&mut tape, 2.0 * err / n, grads);
        }
        loss
    }
}

pub const CHECKPOINT_FORMAT: &str = "loadshape-seq2point";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained attacker for one appliance, with its unit scaling and threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NilmModel {
    pub format: String,
    pub version: u32,
    pub appliance: String,
    /// Aggregate kW are divided by this before entering the network.
    pub input_scale: f64,
    /// Network output is multiplied by this to give kW.
    pub output_scale: f64,
    pub threshold: f64,
    pub seed: u64,
    pub net: Seq2PointNet,
}

impl NilmModel {
    pub fn new(appliance: &str, net: Seq2PointNet, input_scale: f64, output_scale: f64, seed: u64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            appliance: appliance.into(),
            input_scale,
            output_scale,
            threshold: ON_THRESHOLD_KW,
            seed,
            net,
        }
    }

    pub fn sequence_length(&self) -> usize {
        self.net.spec.sequence_length
    }

    /// Appliance power (kW) at the centre of `window`.
    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        if window.len() != self.sequence_length() {
            return Err(Error::LengthMismatch {
                what: "nilm window",
                left: window.len(),
                right: self.sequence_length(),
            });
        }
        let scaled: Vec<f64> = window.iter().map(|v| v / self.input_scale).collect();
        Ok(self.net.forward(&scaled) * self.output_scale)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.format != CHECKPOINT_FORMAT || m.version != CHECKPOINT_VERSION {
            return Err(Error::Mismatch(format!(
                "expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}",
                m.format, m.version
            )));
        }
        Seq2PointNet::from_params(m.net.spec.clone(), m.net.params.clone())?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

#[derive(Clone, Debug)]
pub struct NilmTraining {
    pub model: NilmModel,
    /// Minibatch loss (normalized units) of every iteration.
    pub losses: Vec<f64>,
}

/// Fits a Seq2Point model mapping `aggregate` windows to `appliance` power.
/// Uses the `nilm-init` and `nilm-batch` streams of `cfg.seed`.
pub fn train_nilm(
    appliance_name: &str,
    aggregate: &[f64],
    appliance: &[f64],
    spec: &Seq2PointSpec,
    cfg: &NilmTrainConfig,
) -> Result<NilmTraining> {
    spec.validate()?;
    cfg.validate()?;
    if aggregate.len() != appliance.len() {
        return Err(Error::LengthMismatch {
            what: "aggregate vs appliance series",
            left: aggregate.len(),
            right: appliance.len(),
        });
    }
    let positive_max = |s: &[f64]| {
        let m = s.iter().copied().fold(0.0, f64::max);
        if m > 0.0 {
            m
        } else {
            1.0
        }
    };
    let input_scale = positive_max(aggregate);
    let output_scale = positive_max(appliance);
    let scaled: Vec<f64> = aggregate.iter().map(|v| v / input_scale).collect();
    let targets: Vec<f64> = appliance.iter().map(|v| v / output_scale).collect();
    let m = spec.sequence_length;
    let windows: Vec<f64> = make_windows(&scaled, m)?.concat();

    let mut init_rng = seed::rng(cfg.seed, Stream::NilmInit);
    let mut batch_rng = seed::rng(cfg.seed, Stream::NilmBatch);
    let mut net = Seq2PointNet::new(spec.clone(), &mut init_rng)?;
    let mut adam = Adam::new(net.params.len());
    let mut grads = Vec::new();
    let mut losses = Vec::with_capacity(cfg.iterations);
    let mut batch_w: Vec<&[f64]> = Vec::with_capacity(cfg.batch_size);
    let mut batch_y = Vec::with_capacity(cfg.batch_size);
    for it in 0..cfg.iterations {
        batch_w.clear();
        batch_y.clear();
        for _ in 0..cfg.batch_size {
            let t = batch_rng.random_range(0..targets.len());
            batch_w.push(&windows[t * m..(t + 1) * m]);
            batch_y.push(targets[t]);
        }
        let loss = net.mse_and_grad(&batch_w, &batch_y, &mut grads);
        if !loss.is_finite() {
            return Err(Error::Numerical {
                step: it as u64,
                msg: format!("nilm loss for {appliance_name} is {loss}"),
            });
        }
        losses.push(loss);
        adam.step(&mut net.params, &grads, cfg.learning_rate(it));
    }
    Ok(NilmTraining {
        model: NilmModel::new(appliance_name, net, input_scale, output_scale, cfg.seed),
        losses,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackOutput {
    pub predicted_kw: Vec<f64>,
    pub predicted_on: Vec<bool>,
}

/// Runs the attacker over a meter series, one decision per minute.
pub fn attack(model: &NilmModel, series: &[f64]) -> Result<AttackOutput> {
    let windows = make_windows(series, model.sequence_length())?;
    let predicted_kw = windows
        .iter()
        .map(|w| model.predict(w))
        .collect::<Result<Vec<_>>>()?;
    let predicted_on = predicted_kw
        .iter()
        .map(|&p| classify(p, model.threshold))
        .collect();
    Ok(AttackOutput {
        predicted_kw,
        predicted_on,
    })
}

pub fn write_loss_csv(losses: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "loss"])?;
    for (i, l) in losses.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn windows_with_edge_replication() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        let w = make_windows(&s, 5).unwrap();
        assert_eq!(w.len(), 5);
        assert_eq!(w[2], vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(w[0], vec![1.0, 1.0, 1.0, 2.0, 3.0]);
        assert_eq!(w[4], vec![3.0, 4.0, 5.0, 5.0, 5.0]);
        let w1 = make_windows(&s, 1).unwrap();
        assert!(w1.iter().zip(s).all(|(w, v)| w == &vec![v]));
        assert!(make_windows(&s, 4).is_err());
        assert!(make_windows(&[], 3).is_err());
    }

    #[test]
    fn classify_is_strict() {
        assert!(classify(0.6, 0.5));
        assert!(!classify(0.5, 0.5));
        assert!(!classify(0.0, 0.5));
    }

    #[test]
    fn zero_weights_predict_zero() {
        let spec = Seq2PointSpec::default();
        let net = Seq2PointNet::from_params(spec.clone(), vec![0.0; spec.param_count()]).unwrap();
        let m = NilmModel::new("kettle", net, 3.0, 2.5, 0);
        assert_eq!(m.predict(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), 0.0);
        assert!(matches!(m.predict(&[1.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn hand_computed_single_channel_forward() {
        let spec = Seq2PointSpec {
            sequence_length: 3,
            conv1_channels: 1,
            conv2_channels: 1,
            kernel: 3,
        };
        // w1 = [1, 2, -1], b1 = 0.5, w2 = [0, 1, 1], b2 = -1, wf = 2, bf = 0.25
        let params = vec![1.0, 2.0, -1.0, 0.5, 0.0, 1.0, 1.0, -1.0, 2.0, 0.25];
        let net = Seq2PointNet::from_params(spec, params).unwrap();
        let x = [1.0, 3.0, 2.0];
        // conv1 (zero pad): t0 = 0*1 + 1*2 + 3*(-1) + .5 = -0.5 -> 0
        //                   t1 = 1*1 + 3*2 + 2*(-1) + .5 = 5.5
        //                   t2 = 3*1 + 2*2 + 0 + .5 = 7.5
        // conv2: t0 = 0*0 + 0*1 + 5.5*1 - 1 = 4.5
        //        t1 = 0 + 5.5 + 7.5 - 1 = 12
        //        t2 = 5.5*0 + 7.5 + 0 - 1 = 6.5
        // pool = 23 / 3 ; y = 2 * 23/3 + 0.25
        let y = net.forward(&x);
        assert_close!(y, 2.0 * 23.0 / 3.0 + 0.25, 1e-12);
    }

    #[test]
    fn constant_window_output_independent_of_length_position() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Seq2PointNet::new(Seq2PointSpec::default(), &mut rng).unwrap();
        for m in [1, 3, 5, 7] {
            let y = net.forward(&vec![0.7; m]);
            assert!(y.is_finite());
        }
        let a = net.forward(&[0.4; 5]);
        let mut shifted = [0.4; 5];
        shifted.rotate_left(2);
        assert_eq!(a, net.forward(&shifted));
    }

    #[test]
    fn lr_decays_linearly() {
        let cfg = NilmTrainConfig {
            iterations: 5,
            ..Default::default()
        };
        assert_eq!(cfg.learning_rate(0), 0.005);
        assert_close!(cfg.learning_rate(2), 0.003, 1e-15);
        assert_close!(cfg.learning_rate(4), 0.001, 1e-15);
    }

    #[test]
    fn length_mismatch_rejected() {
        let r = train_nilm(
            "k",
            &[1.0, 2.0],
            &[1.0],
            &Seq2PointSpec::default(),
            &NilmTrainConfig::default(),
        );
        assert!(matches!(r, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Seq2PointNet::new(Seq2PointSpec::default(), &mut rng).unwrap();
        let m = NilmModel::new("toaster", net, 4.1, 1.2, 5);
        let back = NilmModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
