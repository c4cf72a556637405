use crate::error::{Error, Result};
use crate::numcore::{AdamW, AdamWConfig, Matrix, SeededRng};

pub const PROBE_LR: f32 = 1e-2;
pub const PROBE_MAX_STEPS: usize = 2000;
pub const HOLDOUT_FRACTION: f64 = 0.2;
/// Training stops early once every gradient entry is below this.
const GRAD_TOL: f32 = 1e-6;

/// Vectors with protected-attribute class labels `0..n_classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeDataset {
    pub x: Matrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl ProbeDataset {
    /// Labels may be any integers; they are remapped to dense class indices in
    /// ascending order.
    pub fn new(x: Matrix, labels: &[usize]) -> Result<Self> {
        if labels.len() != x.rows() {
            return Err(Error::shape("probe_dataset", format!("{} labels for {} rows", labels.len(), x.rows())));
        }
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::DegenerateLabels(format!("need at least 2 classes, found {}", classes.len())));
        }
        let dense: Vec<usize> =
            labels.iter().map(|l| classes.binary_search(l).expect("label collected above")).collect();
        let mut counts = vec![0usize; classes.len()];
        for &l in &dense {
            counts[l] += 1;
        }
        if let Some(c) = counts.iter().position(|&n| n < 2) {
            return Err(Error::DegenerateLabels(format!(
                "class {} has {} example(s), need at least 2",
                classes[c], counts[c]
            )));
        }
        Ok(ProbeDataset { x, labels: dense, n_classes: classes.len() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Same labels over different vectors.
    pub fn with_x(&self, x: Matrix) -> Result<Self> {
        if x.rows() != self.x.rows() {
            return Err(Error::shape("probe_dataset", "row count changed"));
        }
        Ok(ProbeDataset { x, labels: self.labels.clone(), n_classes: self.n_classes })
    }

    /// Stratified split: about 20% of each class is held out, at least one.
    pub fn split(&self, rng: &mut SeededRng) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for c in 0..self.n_classes {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == c).collect();
            rng.shuffle(&mut idx);
            let n_test = ((idx.len() as f64 * HOLDOUT_FRACTION).round() as usize).clamp(1, idx.len() - 1);
            test.extend_from_slice(&idx[..n_test]);
            train.extend_from_slice(&idx[n_test..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        (train, test)
    }
}

/// Fraction of `labels` in the most common class.
pub fn majority_rate(labels: &[usize], n_classes: usize) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        counts[l] += 1;
    }
    *counts.iter().max().unwrap_or(&0) as f64 / labels.len() as f64
}

/// A trained linear classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    /// c'×d: one row for two classes, one row per class otherwise.
    pub weights: Matrix,
    pub bias: Matrix,
    /// Held-out accuracy.
    pub accuracy: f64,
    /// Majority-class rate on the held-out split.
    pub majority: f64,
    pub steps: usize,
}

impl Probe {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let mut z = x.matmul_t(&self.weights)?;
        z.add_row_broadcast(&self.bias)?;
        Ok(z.iter_rows().map(|r| if r.len() == 1 { usize::from(r[0] > 0.0) } else { argmax(r) }).collect())
    }
}

fn argmax(r: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in r.iter().enumerate() {
        if v > r[best] {
            best = i;
        }
    }
    best
}

fn sigmoid(z: f32) -> f32 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// d(mean cross-entropy)/d logits, in place.
fn logit_grad(z: &mut Matrix, labels: &[usize]) {
    let n = labels.len() as f32;
    let c = z.cols();
    for (r, &y) in labels.iter().enumerate() {
        let row = z.row_mut(r);
        if c == 1 {
            row[0] = (sigmoid(row[0]) - y as f32) / n;
        } else {
            let m = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            for (k, v) in row.iter_mut().enumerate() {
                *v = (*v / s - if k == y { 1.0 } else { 0.0 }) / n;
            }
        }
    }
}

/// Multinomial logistic regression fitted with AdamW on 80% of the data;
/// accuracy is measured on the held-out rest.
pub fn train_probe(data: &ProbeDataset, seed: u64) -> Result<Probe> {
    let mut rng = SeededRng::new(seed);
    let (train_idx, test_idx) = data.split(&mut rng);
    let x = data.x.select_rows(&train_idx);
    let y: Vec<usize> = train_idx.iter().map(|&i| data.labels[i]).collect();
    let d = x.cols();
    let c = if data.n_classes == 2 { 1 } else { data.n_classes };

    let mut w = Matrix::zeros(d, c);
    let mut b = Matrix::zeros(1, c);
    let mut opt = AdamW::new(AdamWConfig::with_lr(PROBE_LR));
    let mut steps = 0;
    while steps < PROBE_MAX_STEPS {
        let mut z = x.matmul(&w)?;
        z.add_row_broadcast(&b)?;
        logit_grad(&mut z, &y);
        let gw = x.t_matmul(&z)?;
        let gb = z.column_sums();
        steps += 1;
        if gw.max_abs().max(gb.max_abs()) < GRAD_TOL {
            break;
        }
        opt.step(&mut [&mut w, &mut b], &[&gw, &gb])?;
        if !w.is_finite() {
            return Err(Error::Evaluation("probe training diverged".into()));
        }
    }

    let mut probe = Probe { weights: w.transpose(), bias: b, accuracy: 0.0, majority: 0.0, steps };
    let test_y: Vec<usize> = test_idx.iter().map(|&i| data.labels[i]).collect();
    let pred = probe.predict(&data.x.select_rows(&test_idx))?;
    let correct = pred.iter().zip(&test_y).filter(|(p, t)| p == t).count();
    probe.accuracy = correct as f64 / test_y.len() as f64;
    probe.majority = majority_rate(&test_y, data.n_classes);
    Ok(probe)
}
