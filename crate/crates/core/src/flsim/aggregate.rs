//! Plaintext aggregation rules.

use crate::discriminator::DiscriminatorPoly;
use crate::quant::l2_norm;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn fedavg(updates: &[Vec<f64>]) -> Vec<f64> {
    let d = updates.first().map_or(0, Vec::len);
    let mut out = vec![0.0; d];
    for u in updates {
        out.iter_mut().zip(u).for_each(|(o, v)| *o += v);
    }
    let n = updates.len().max(1) as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// `|u0| * sum ts_i u_i/|u_i| / sum ts_i` with `ts_i = score(cos(u_i, u0))`.
/// A zero denominator yields the zero vector.
fn trust_weighted(updates: &[Vec<f64>], u0: &[f64], score: impl Fn(f64) -> f64) -> Vec<f64> {
    let n0 = l2_norm(u0);
    let mut num = vec![0.0; u0.len()];
    let mut den = 0.0;
    for u in updates {
        let nu = l2_norm(u);
        if nu == 0.0 || n0 == 0.0 {
            den += score(0.0);
            continue;
        }
        let ts = score(dot(u, u0) / (nu * n0));
        den += ts;
        num.iter_mut().zip(u).for_each(|(o, v)| *o += ts * v / nu);
    }
    if den == 0.0 {
        return vec![0.0; u0.len()];
    }
    num.iter_mut().for_each(|o| *o *= n0 / den);
    num
}

pub fn fltrust_relu(updates: &[Vec<f64>], u0: &[f64]) -> Vec<f64> {
    trust_weighted(updates, u0, |c| c.max(0.0))
}

pub fn fltrust_poly_real(updates: &[Vec<f64>], u0: &[f64], h: &DiscriminatorPoly) -> Vec<f64> {
    trust_weighted(updates, u0, |c| h.eval_real(c))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the update Krum selects with `f` assumed Byzantine.
pub fn krum_index(updates: &[Vec<f64>], f: usize) -> usize {
    let n = updates.len();
    let m = n.saturating_sub(f + 2).max(1);
    let mut best = (f64::INFINITY, 0);
    for i in 0..n {
        let mut d: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| sq_dist(&updates[i], &updates[j]))
            .collect();
        d.sort_by(f64::total_cmp);
        let score: f64 = d.iter().take(m).sum();
        if score < best.0 {
            best = (score, i);
        }
    }
    best.1
}

pub fn krum(updates: &[Vec<f64>], f: usize) -> Vec<f64> {
    updates[krum_index(updates, f)].clone()
}

/// Coordinate-wise mean after dropping the `f` largest and `f` smallest.
pub fn trimmed_mean(updates: &[Vec<f64>], f: usize) -> Vec<f64> {
    let n = updates.len();
    let d = updates.first().map_or(0, Vec::len);
    let f = f.min(n.saturating_sub(1) / 2);
    let mut col = vec![0.0; n];
    (0..d)
        .map(|j| {
            col.iter_mut().zip(updates).for_each(|(c, u)| *c = u[j]);
            col.sort_by(f64::total_cmp);
            let kept = &col[f..n - f];
            kept.iter().sum::<f64>() / kept.len() as f64
        })
        .collect()
}
