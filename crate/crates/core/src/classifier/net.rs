use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::score::{MetricId, QualityScore};
use crate::stats::quantile;

use super::features::{FeatureVector, FEATURE_LEN};

pub const MODEL_MAGIC: &[u8; 5] = b"FPQN1";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Initial weights are drawn uniformly from `[-init_range, init_range]`.
    pub init_range: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![16, 8],
            epochs: 3000,
            learning_rate: 0.01,
            seed: 7,
            init_range: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    // row-major, one row per output unit
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z = row.iter().zip(x).fold(self.biases[o], |acc, (w, v)| w.mul_add(*v, acc));
            out.push(z);
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// Feed-forward regressor: tanh hidden layers, linear scalar output.
/// Inputs are z-scored with statistics fixed at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityNet {
    layers: Vec<Layer>,
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
    bin_edges: [f64; 4],
}

impl QualityNet {
    /// Randomly initialised network with layer widths `sizes`
    /// (input first, output last, output must be 1).
    pub fn new(sizes: &[usize], seed: u64, init_range: f64) -> Result<Self> {
        validate_sizes(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let weights = (0..inputs * outputs)
                    .map(|_| rng.random_range(-init_range..=init_range))
                    .collect();
                let biases = (0..outputs)
                    .map(|_| rng.random_range(-init_range..=init_range))
                    .collect();
                Layer {
                    inputs,
                    outputs,
                    weights,
                    biases,
                }
            })
            .collect();
        Ok(QualityNet {
            layers,
            feature_mean: vec![0.0; sizes[0]],
            feature_std: vec![1.0; sizes[0]],
            bin_edges: [0.2, 0.4, 0.6, 0.8],
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn bin_edges(&self) -> [f64; 4] {
        self.bin_edges
    }

    pub fn set_bin_edges(&mut self, edges: [f64; 4]) -> Result<()> {
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "bin edges must be finite and strictly increasing: {edges:?}"
            )));
        }
        self.bin_edges = edges;
        Ok(())
    }

    pub fn standardization(&self) -> (&[f64], &[f64]) {
        (&self.feature_mean, &self.feature_std)
    }

    pub fn set_standardization(&mut self, mean: Vec<f64>, std: Vec<f64>) -> Result<()> {
        if mean.len() != self.input_len() || std.len() != self.input_len() {
            return Err(Error::InvalidParameter("standardization length mismatch".into()));
        }
        if mean.iter().chain(&std).any(|v| !v.is_finite()) || std.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidParameter(
                "standardization must be finite with positive std".into(),
            ));
        }
        self.feature_mean = mean;
        self.feature_std = std;
        Ok(())
    }

    /// Weights then biases, layer by layer.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.biases);
        }
        p
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::InvalidParameter(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.feature_mean.iter().zip(&self.feature_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    // Activations per layer; the first entry is the standardized input.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(self.standardize(x));
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            l.forward(acts.last().unwrap(), &mut z);
            if i != last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    /// Raw network output for a feature array of length [`Self::input_len`].
    pub fn output_raw(&self, x: &[f64]) -> f64 {
        self.activations(x).last().unwrap()[0]
    }

    pub fn output(&self, v: &FeatureVector) -> f64 {
        self.output_raw(&v.to_array())
    }

    /// Mean squared error over the batch and its gradient with respect to
    /// [`Self::parameters`].
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[f64]) -> (f64, Vec<f64>) {
        let n = xs.len().max(1) as f64;
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
            .collect();
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let acts = self.activations(x);
            let out = acts.last().unwrap()[0];
            let err = out - y;
            loss += err * err;
            // dL/dz for the output layer
            let mut delta = vec![2.0 * err / n];
            for li in (0..self.layers.len()).rev() {
                let l = &self.layers[li];
                let input = &acts[li];
                let (gw, gb) = &mut grads[li];
                for o in 0..l.outputs {
                    gb[o] += delta[o];
                    for i in 0..l.inputs {
                        gw[o * l.inputs + i] += delta[o] * input[i];
                    }
                }
                if li == 0 {
                    break;
                }
                // back through tanh of the previous layer
                delta = (0..l.inputs)
                    .map(|i| {
                        let s: f64 = (0..l.outputs).map(|o| l.weights[o * l.inputs + i] * delta[o]).sum();
                        s * (1.0 - input[i] * input[i])
                    })
                    .collect();
            }
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for (gw, gb) in grads {
            flat.extend(gw);
            flat.extend(gb);
        }
        (loss / n, flat)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let sizes = self.sizes();
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for s in &sizes {
            out.extend_from_slice(&(*s as u32).to_le_bytes());
        }
        let floats = self
            .feature_mean
            .iter()
            .chain(&self.feature_std)
            .chain(&self.bin_edges)
            .copied()
            .chain(self.parameters());
        for v in floats {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::ModelFormat(msg.to_string());
        let rest = bytes
            .strip_prefix(MODEL_MAGIC.as_slice())
            .ok_or_else(|| bad("bad magic"))?;
        let mut cur = Reader { buf: rest };
        let n = cur.u32()? as usize;
        if !(2..=16).contains(&n) {
            return Err(bad("implausible layer count"));
        }
        let sizes = (0..n)
            .map(|_| cur.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        if sizes[0] != FEATURE_LEN {
            return Err(bad("input width does not match the feature vector"));
        }
        validate_sizes(&sizes).map_err(|e| bad(&e.to_string()))?;
        let mut net = QualityNet::new(&sizes, 0, 0.0)?;
        let mean = cur.f64s(sizes[0])?;
        let std = cur.f64s(sizes[0])?;
        let edges = cur.f64s(4)?;
        let params = cur.f64s(net.param_count())?;
        if !cur.buf.is_empty() {
            return Err(bad("trailing bytes"));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        net.set_standardization(mean, std).map_err(|e| bad(&e.to_string()))?;
        net.set_bin_edges([edges[0], edges[1], edges[2], edges[3]])
            .map_err(|e| bad(&e.to_string()))?;
        net.set_parameters(&params)?;
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.buf.len() < N {
            return Err(Error::ModelFormat("truncated model file".into()));
        }
        let (head, tail) = self.buf.split_at(N);
        self.buf = tail;
        Ok(head.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.take::<8>().map(f64::from_le_bytes)).collect()
    }
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.iter().any(|&s| s == 0 || s > 4096) || *sizes.last().unwrap() != 1 {
        return Err(Error::InvalidParameter(format!(
            "layer sizes must be positive and end in a single output: {sizes:?}"
        )));
    }
    Ok(())
}

/// Quintile cut points of `predictions`, forced strictly increasing.
pub fn quintile_edges(predictions: &[f64]) -> Result<[f64; 4]> {
    if predictions.is_empty() || predictions.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidParameter(
            "predictions must be finite and non-empty".into(),
        ));
    }
    let mut sorted = predictions.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut edges = [0.2, 0.4, 0.6, 0.8].map(|q| quantile(&sorted, q).unwrap());
    for i in 1..4 {
        if edges[i] <= edges[i - 1] {
            edges[i] = edges[i - 1].next_up();
        }
    }
    Ok(edges)
}

/// Level in 1..=5: one plus the number of edges strictly below `output`.
pub fn level_for(output: f64, edges: &[f64; 4]) -> u8 {
    1 + edges.iter().filter(|&&e| e < output).count() as u8
}

/// Fits the network to `(features, separation)` pairs by full-batch Adam on
/// the mean squared error, then sets the level edges at the quintiles of the
/// training predictions. Returns the network and the final training loss.
pub fn train_quality_net(samples: &[(FeatureVector, f64)], config: &TrainConfig) -> Result<(QualityNet, f64)> {
    if samples.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "need at least 10 training samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|(_, y)| !y.is_finite()) {
        return Err(Error::InvalidParameter("training targets must be finite".into()));
    }
    if !(config.learning_rate > 0.0) || !(config.init_range >= 0.0) {
        return Err(Error::InvalidParameter(
            "learning rate and init range must be positive".into(),
        ));
    }
    let mut sizes = vec![FEATURE_LEN];
    sizes.extend(&config.hidden);
    sizes.push(1);
    let mut net = QualityNet::new(&sizes, config.seed, config.init_range)?;

    let xs: Vec<Vec<f64>> = samples.iter().map(|(v, _)| v.to_array().to_vec()).collect();
    let ys: Vec<f64> = samples.iter().map(|(_, y)| *y).collect();
    let n = xs.len() as f64;
    let mean: Vec<f64> = (0..FEATURE_LEN)
        .map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n)
        .collect();
    let std: Vec<f64> = (0..FEATURE_LEN)
        .map(|j| {
            let var = xs.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    net.set_standardization(mean, std)?;

    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut params = net.parameters();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    for t in 1..=config.epochs {
        let (l, g) = net.loss_and_gradient(&xs, &ys);
        if !l.is_finite() {
            return Err(Error::Diverged(format!("loss became non-finite at epoch {t}")));
        }
        let c1 = 1.0 - decay_pow(b1, t);
        let c2 = 1.0 - decay_pow(b2, t);
        for k in 0..params.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            params[k] -= config.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
        }
        net.set_parameters(&params)?;
    }
    let preds: Vec<f64> = xs.iter().map(|x| net.output_raw(x)).collect();
    if preds.iter().any(|p| !p.is_finite()) {
        return Err(Error::Diverged("non-finite prediction after training".into()));
    }
    let final_loss = preds.iter().zip(&ys).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / n;
    net.set_bin_edges(quintile_edges(&preds)?)?;
    Ok((net, final_loss))
}

fn decay_pow(b: f64, t: usize) -> f64 {
    b.powi(t.min(i32::MAX as usize) as i32)
}

/// Classifier quality for one feature vector: level in 1..=5 with value
/// `level / 5`.
pub fn predict_quality(net: &QualityNet, v: &FeatureVector) -> Result<QualityScore> {
    let out = net.output(v);
    if !out.is_finite() {
        return Err(Error::Diverged("network output is not finite".into()));
    }
    Ok(QualityScore::with_level(MetricId::QN, level_for(out, &net.bin_edges)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_features(rng: &mut ChaCha8Rng) -> FeatureVector {
        let minutiae = rng.random_range(0..80usize);
        let mut q_above = [0usize; 5];
        let mut prev = minutiae;
        for q in &mut q_above {
            *q = rng.random_range(0..=prev);
            prev = *q;
        }
        let mut pct = [0.0; 4];
        let mut left = 1.0;
        for p in &mut pct {
            *p = rng.random_range(0.0..=left);
            left -= *p;
        }
        FeatureVector {
            foreground: rng.random_range(10..200),
            minutiae,
            q_above,
            block_q_pct: pct,
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = QualityNet::new(&[FEATURE_LEN, 6, 4, 1], 11, 0.5).unwrap();
        net.set_standardization(vec![20.0; FEATURE_LEN], vec![15.0; FEATURE_LEN])
            .unwrap();
        let xs: Vec<Vec<f64>> = (0..12).map(|_| random_features(&mut rng).to_array().to_vec()).collect();
        let ys: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (_, grad) = net.loss_and_gradient(&xs, &ys);
        let p0 = net.parameters();
        let eps = 1e-4;
        for k in 0..p0.len() {
            let mut p = p0.clone();
            p[k] += eps;
            net.set_parameters(&p).unwrap();
            let lp = net.loss_and_gradient(&xs, &ys).0;
            p[k] -= 2.0 * eps;
            net.set_parameters(&p).unwrap();
            let lm = net.loss_and_gradient(&xs, &ys).0;
            let numeric = (lp - lm) / (2.0 * eps);
            let scale = numeric.abs().max(grad[k].abs()).max(1e-3);
            assert!(
                (numeric - grad[k]).abs() / scale < 1e-5,
                "param {k}: {numeric} vs {}",
                grad[k]
            );
        }
    }

    #[test]
    fn learns_linear_teacher() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..FEATURE_LEN).map(|_| rng.random_range(-1.0..1.0)).collect();
        let feats: Vec<FeatureVector> = (0..200).map(|_| random_features(&mut rng)).collect();
        // teacher acts on roughly unit-scale features
        let scale = [100.0, 40.0, 40.0, 30.0, 20.0, 15.0, 10.0, 0.5, 0.5, 0.5, 0.5];
        let samples: Vec<(FeatureVector, f64)> = feats
            .iter()
            .map(|f| {
                let x = f.to_array();
                let o = 0.3 + x.iter().zip(&a).zip(&scale).map(|((x, a), s)| a * x / s).sum::<f64>();
                (*f, o)
            })
            .collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let var = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / ys.len() as f64;
        let (net, mse) = train_quality_net(&samples, &TrainConfig::default()).unwrap();
        assert!(mse < 0.05 * var, "mse {mse} var {var}");
        let edges = net.bin_edges();
        assert!(edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<_> = (0..30)
            .map(|_| (random_features(&mut rng), rng.random_range(0.0..5.0)))
            .collect();
        let cfg = TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        };
        let (a, la) = train_quality_net(&samples, &cfg).unwrap();
        let (b, lb) = train_quality_net(&samples, &cfg).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(la.to_bits(), lb.to_bits());
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples: Vec<_> = (0..20)
            .map(|_| (random_features(&mut rng), rng.random_range(0.0..5.0)))
            .collect();
        let (net, _) = train_quality_net(
            &samples,
            &TrainConfig {
                epochs: 50,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let bytes = net.to_bytes();
        assert_eq!(&bytes[..5], b"FPQN1");
        let back = QualityNet::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        for (p, q) in net.parameters().iter().zip(back.parameters()) {
            assert_eq!(p.to_bits(), q.to_bits());
        }
        for (f, _) in &samples {
            assert_eq!(net.output(f).to_bits(), back.output(f).to_bits());
            assert_eq!(predict_quality(&net, f).unwrap(), predict_quality(&back, f).unwrap());
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.fpqn");
        net.save(&path).unwrap();
        assert_eq!(QualityNet::load(&path).unwrap(), net);
    }

    #[test]
    fn corrupt_model_files() {
        let net = QualityNet::new(&[FEATURE_LEN, 4, 1], 0, 0.5).unwrap();
        let bytes = net.to_bytes();
        assert!(matches!(QualityNet::from_bytes(b"nope"), Err(Error::ModelFormat(_))));
        assert!(matches!(
            QualityNet::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::ModelFormat(_))
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(QualityNet::from_bytes(&extra), Err(Error::ModelFormat(_))));
        let mut nan = bytes.clone();
        let at = bytes.len() - 8;
        nan[at..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(QualityNet::from_bytes(&nan), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn edges_are_strictly_increasing_even_with_ties() {
        let e = quintile_edges(&[1.0; 10]).unwrap();
        assert!(e.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(e[0], 1.0);
    }

    #[test]
    fn level_binning() {
        let e = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(level_for(-5.0, &e), 1);
        assert_eq!(level_for(0.0, &e), 1);
        assert_eq!(level_for(0.5, &e), 2);
        assert_eq!(level_for(3.5, &e), 5);
    }

    #[test]
    fn fits_constant_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples: Vec<_> = (0..40).map(|_| (random_features(&mut rng), 2.5)).collect();
        let (net, _) = train_quality_net(&samples, &TrainConfig::default()).unwrap();
        for (f, c) in &samples {
            assert!((net.output(f) - c).abs() < 0.01, "{}", net.output(f));
        }
    }

    #[test]
    fn too_few_samples() {
        let f = FeatureVector {
            foreground: 1,
            minutiae: 0,
            q_above: [0; 5],
            block_q_pct: [0.0; 4],
        };
        assert!(matches!(
            train_quality_net(&[(f, 1.0); 9], &TrainConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    proptest! {
        #[test]
        fn level_is_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let e = [-1.0, 0.0, 1.0, 2.0];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(level_for(lo, &e) <= level_for(hi, &e));
        }

        #[test]
        fn quintile_levels_are_balanced(preds in prop::collection::vec(-100.0f64..100.0, 25..200)) {
            let e = quintile_edges(&preds).unwrap();
            let mut counts = [0usize; 5];
            for p in &preds {
                counts[usize::from(level_for(*p, &e)) - 1] += 1;
            }
            let n = preds.len() as f64;
            for c in counts {
                prop_assert!((c as f64) <= 0.2 * n + 2.0);
            }
        }
    }
}
