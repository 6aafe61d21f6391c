//! Softmax classifiers with hand-written gradients.

use rand::seq::index::sample as sample_idx;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Arch {
    /// Multinomial logistic regression.
    Logreg { inputs: usize, classes: usize },
    /// One hidden ReLU layer.
    Mlp {
        inputs: usize,
        hidden: usize,
        classes: usize,
    },
}

impl Arch {
    pub fn param_count(&self) -> usize {
        match *self {
            Arch::Logreg { inputs, classes } => classes * (inputs + 1),
            Arch::Mlp {
                inputs,
                hidden,
                classes,
            } => hidden * (inputs + 1) + classes * (hidden + 1),
        }
    }

    pub fn inputs(&self) -> usize {
        match *self {
            Arch::Logreg { inputs, .. } | Arch::Mlp { inputs, .. } => inputs,
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            Arch::Logreg { classes, .. } | Arch::Mlp { classes, .. } => classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch: Arch,
    pub w: Vec<f64>,
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
}

/// `out = W x + b` with `W` row-major `rows x cols` followed by `b`.
fn affine(params: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    let (w, b) = params.split_at(rows * cols);
    for r in 0..rows {
        out[r] = b[r]
            + w[r * cols..(r + 1) * cols]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum::<f64>();
    }
}

/// Accumulates `dW += g x^T`, `db += g`, and optionally `dx = W^T g`.
fn affine_back(
    params: &[f64],
    grad: &mut [f64],
    rows: usize,
    cols: usize,
    x: &[f64],
    g: &[f64],
    dx: Option<&mut [f64]>,
) {
    let (dw, db) = grad.split_at_mut(rows * cols);
    for r in 0..rows {
        db[r] += g[r];
        for (d, xi) in dw[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *d += g[r] * xi;
        }
    }
    if let Some(dx) = dx {
        dx.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..rows {
            for (d, w) in dx.iter_mut().zip(&params[r * cols..(r + 1) * cols]) {
                *d += g[r] * w;
            }
        }
    }
}

impl Model {
    /// Logistic regression starts at zero; the MLP uses He-scaled uniform
    /// weights and zero biases.
    pub fn init<R: Rng + ?Sized>(arch: Arch, rng: &mut R) -> Self {
        let mut w = vec![0.0; arch.param_count()];
        if let Arch::Mlp {
            inputs,
            hidden,
            classes,
        } = arch
        {
            let fill = |w: &mut [f64], fan_in: usize, rng: &mut R| {
                let a = (6.0 / fan_in as f64).sqrt();
                w.iter_mut().for_each(|v| *v = rng.gen_range(-a..a));
            };
            fill(&mut w[..hidden * inputs], inputs, rng);
            let off = hidden * (inputs + 1);
            fill(&mut w[off..off + classes * hidden], hidden, rng);
        }
        Self { arch, w }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Class probabilities for one input.
    pub fn probs(&self, x: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.arch.classes()];
        match self.arch {
            Arch::Logreg { inputs, classes } => affine(&self.w, classes, inputs, x, &mut z),
            Arch::Mlp {
                inputs,
                hidden,
                classes,
            } => {
                let (l1, l2) = self.w.split_at(hidden * (inputs + 1));
                let mut h = vec![0.0; hidden];
                affine(l1, hidden, inputs, x, &mut h);
                h.iter_mut().for_each(|v| *v = v.max(0.0));
                affine(l2, classes, hidden, &h, &mut z);
            }
        }
        softmax_in_place(&mut z);
        z
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let p = self.probs(x);
        (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap_or(0)
    }

    /// Mean cross-entropy over `idx` and its gradient.
    pub fn loss_grad(&self, data: &Dataset, idx: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.w.len()];
        let mut loss = 0.0;
        let classes = self.arch.classes();
        let mut z = vec![0.0; classes];
        for &i in idx {
            let x = data.row(i);
            let y = data.labels[i] as usize;
            match self.arch {
                Arch::Logreg { inputs, classes } => {
                    affine(&self.w, classes, inputs, x, &mut z);
                    softmax_in_place(&mut z);
                    loss -= z[y].max(1e-300).ln();
                    z[y] -= 1.0;
                    affine_back(&self.w, &mut grad, classes, inputs, x, &z, None);
                }
                Arch::Mlp {
                    inputs,
                    hidden,
                    classes,
                } => {
                    let split = hidden * (inputs + 1);
                    let (l1, l2) = self.w.split_at(split);
                    let mut h = vec![0.0; hidden];
                    affine(l1, hidden, inputs, x, &mut h);
                    h.iter_mut().for_each(|v| *v = v.max(0.0));
                    affine(l2, classes, hidden, &h, &mut z);
                    softmax_in_place(&mut z);
                    loss -= z[y].max(1e-300).ln();
                    z[y] -= 1.0;
                    let (g1, g2) = grad.split_at_mut(split);
                    let mut dh = vec![0.0; hidden];
                    affine_back(l2, g2, classes, hidden, &h, &z, Some(&mut dh));
                    for (d, hv) in dh.iter_mut().zip(&h) {
                        if *hv <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    affine_back(l1, g1, hidden, inputs, x, &dh, None);
                }
            }
        }
        let n = idx.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    pub fn loss(&self, data: &Dataset) -> f64 {
        let idx: Vec<usize> = (0..data.len()).collect();
        let mut total = 0.0;
        for i in idx {
            let p = self.probs(data.row(i));
            total -= p[data.labels[i] as usize].max(1e-300).ln();
        }
        total / data.len().max(1) as f64
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = (0..data.len())
            .filter(|&i| self.predict(data.row(i)) == data.labels[i] as usize)
            .count();
        hits as f64 / data.len() as f64
    }
}

/// `iters` minibatch SGD steps from `model`; returns `w_local - w`.
pub fn local_train<R: Rng + ?Sized>(
    model: &Model,
    data: &Dataset,
    lr: f64,
    iters: usize,
    batch: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut local = model.clone();
    if data.is_empty() {
        return vec![0.0; model.dim()];
    }
    for _ in 0..iters {
        let idx = if batch >= data.len() {
            (0..data.len()).collect()
        } else {
            sample_idx(rng, data.len(), batch).into_vec()
        };
        let (_, g) = local.loss_grad(data, &idx);
        for (w, g) in local.w.iter_mut().zip(&g) {
            *w -= lr * g;
        }
    }
    local.w.iter().zip(&model.w).map(|(a, b)| a - b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flsim::data::gaussian_mixture;
    use crate::rng::substream;

    fn check_gradient(arch: Arch, seed: u64) {
        let mut rng = substream(seed, &[]);
        let data = gaussian_mixture(6, arch.inputs(), arch.classes(), 1.0, &mut rng);
        let mut m = Model::init(arch, &mut rng);
        m.w.iter_mut().for_each(|v| *v += rng.gen_range(-0.5..0.5));
        let idx: Vec<usize> = (0..data.len()).collect();
        let (_, g) = m.loss_grad(&data, &idx);
        let h = 1e-5;
        for i in 0..m.w.len() {
            let mut p = m.clone();
            p.w[i] += h;
            let mut q = m.clone();
            q.w[i] -= h;
            let fd = (p.loss_grad(&data, &idx).0 - q.loss_grad(&data, &idx).0) / (2.0 * h);
            let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-3);
            assert!(rel < 1e-5, "param {i}: analytic {} numeric {fd}", g[i]);
        }
    }

    #[test]
    fn logreg_gradient_matches_finite_differences() {
        for s in 0..3 {
            check_gradient(Arch::Logreg { inputs: 4, classes: 3 }, s);
        }
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        for s in 0..3 {
            check_gradient(
                Arch::Mlp {
                    inputs: 4,
                    hidden: 5,
                    classes: 3,
                },
                10 + s,
            );
        }
    }

    #[test]
    fn full_batch_single_step_is_a_gradient_step() {
        let mut rng = substream(3, &[]);
        let data = gaussian_mixture(20, 3, 2, 2.0, &mut rng);
        let m = Model::init(Arch::Logreg { inputs: 3, classes: 2 }, &mut rng);
        let u = local_train(&m, &data, 0.5, 1, 64, &mut rng);
        let (_, g) = m.loss_grad(&data, &(0..20).collect::<Vec<_>>());
        for (a, b) in u.iter().zip(&g) {
            assert!((a + 0.5 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_degenerate_set_gives_zero_update() {
        // single class: softmax over one output is constant
        let data = Dataset::new(vec![1.0, 2.0], vec![0, 0], 1, 1).unwrap();
        let m = Model::init(Arch::Logreg { inputs: 1, classes: 1 }, &mut substream(0, &[]));
        let u = local_train(&m, &data, 0.1, 3, 64, &mut substream(1, &[]));
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn logreg_learns_separable_mixture() {
        let mut rng = substream(4, &[]);
        let data = gaussian_mixture(400, 5, 3, 3.0, &mut rng);
        let mut m = Model::init(Arch::Logreg { inputs: 5, classes: 3 }, &mut rng);
        for _ in 0..100 {
            let u = local_train(&m, &data, 0.2, 1, 64, &mut rng);
            m.w.iter_mut().zip(&u).for_each(|(w, u)| *w += u);
        }
        assert!(m.accuracy(&data) > 0.9);
    }
}
