//! Datasets: MNIST from IDX files, a synthetic Gaussian mixture, and the
//! grouped non-i.i.d. partition.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::Rng;

use super::FlError;

pub const DATA_DIR_ENV: &str = "LOBYITFL_DATA_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Row-major, `len() * dim` values.
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
    pub dim: usize,
    pub classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<u8>, dim: usize, classes: usize) -> Result<Self, FlError> {
        if features.len() != labels.len() * dim {
            return Err(FlError::Data(format!(
                "{} features for {} samples of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(FlError::Data(format!("label {l} out of range for {classes} classes")));
        }
        Ok(Self {
            features,
            labels,
            dim,
            classes,
        })
    }

    pub fn empty(dim: usize, classes: usize) -> Self {
        Self {
            features: Vec::new(),
            labels: Vec::new(),
            dim,
            classes,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, x: &[f64], label: u8) {
        debug_assert_eq!(x.len(), self.dim);
        self.features.extend_from_slice(x);
        self.labels.push(label);
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        let mut out = Dataset::empty(self.dim, self.classes);
        for &i in idx {
            out.push(self.row(i), self.labels[i]);
        }
        out
    }

    pub fn take(&self, n: usize) -> Dataset {
        self.select(&(0..n.min(self.len())).collect::<Vec<_>>())
    }

    /// Averages `factor x factor` blocks of square images.
    pub fn pool(&self, factor: usize) -> Result<Dataset, FlError> {
        if factor <= 1 {
            return Ok(self.clone());
        }
        let side = (self.dim as f64).sqrt() as usize;
        if side * side != self.dim || !side.is_multiple_of(factor) {
            return Err(FlError::Data(format!("cannot pool dimension {} by {factor}", self.dim)));
        }
        let out_side = side / factor;
        let mut out = Dataset::empty(out_side * out_side, self.classes);
        let norm = (factor * factor) as f64;
        let mut buf = vec![0.0; out_side * out_side];
        for i in 0..self.len() {
            buf.iter_mut().for_each(|v| *v = 0.0);
            for (p, v) in self.row(i).iter().enumerate() {
                let (r, c) = (p / side, p % side);
                buf[(r / factor) * out_side + c / factor] += v / norm;
            }
            out.push(&buf, self.labels[i]);
        }
        Ok(out)
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_be_bytes(b))
}

fn open_idx(path: &Path) -> Result<Box<dyn Read>, FlError> {
    let f = File::open(path).map_err(|e| FlError::Data(format!("{}: {e}", path.display())))?;
    let r = BufReader::new(f);
    Ok(if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(r))
    } else {
        Box::new(r)
    })
}

fn find(dir: &Path, stem: &str) -> Result<PathBuf, FlError> {
    [format!("{stem}.gz"), stem.to_string()]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.exists())
        .ok_or_else(|| FlError::Data(format!("{stem} not found in {}", dir.display())))
}

/// Reads an IDX image file (magic 0x803) and label file (magic 0x801),
/// keeping at most `limit` samples. Pixels are scaled to `[0, 1]`.
pub fn read_idx(images: &Path, labels: &Path, limit: Option<usize>) -> Result<Dataset, FlError> {
    let bad = |what: &str| FlError::Data(format!("malformed IDX: {what}"));
    let io = |e: std::io::Error| FlError::Data(e.to_string());
    let mut img = open_idx(images)?;
    if read_u32(&mut img).map_err(io)? != 0x803 {
        return Err(bad("image magic"));
    }
    let count = read_u32(&mut img).map_err(io)? as usize;
    let rows = read_u32(&mut img).map_err(io)? as usize;
    let cols = read_u32(&mut img).map_err(io)? as usize;
    let mut lab = open_idx(labels)?;
    if read_u32(&mut lab).map_err(io)? != 0x801 {
        return Err(bad("label magic"));
    }
    if read_u32(&mut lab).map_err(io)? as usize != count {
        return Err(bad("image and label counts differ"));
    }
    let n = limit.map_or(count, |l| l.min(count));
    let mut pixels = vec![0u8; n * rows * cols];
    img.read_exact(&mut pixels).map_err(io)?;
    let mut ls = vec![0u8; n];
    lab.read_exact(&mut ls).map_err(io)?;
    let features = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    Dataset::new(features, ls, rows * cols, 10)
}

/// Directory holding the MNIST files: `dir` if given, else
/// `$LOBYITFL_DATA_DIR/mnist` or `$LOBYITFL_DATA_DIR`, else `./data/mnist`.
pub fn mnist_dir(dir: Option<&Path>) -> Result<PathBuf, FlError> {
    if let Some(d) = dir {
        return Ok(d.to_path_buf());
    }
    let Some(root) = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from) else {
        let local = PathBuf::from("data/mnist");
        return if local.is_dir() {
            Ok(local)
        } else {
            Err(FlError::Data(format!(
                "no dataset directory given, {DATA_DIR_ENV} unset and ./data/mnist missing"
            )))
        };
    };
    let nested = root.join("mnist");
    Ok(if nested.is_dir() { nested } else { root })
}

/// `(train, test)` from the standard file names.
pub fn load_mnist(dir: &Path, train: Option<usize>, test: Option<usize>) -> Result<(Dataset, Dataset), FlError> {
    let tr = read_idx(
        &find(dir, "train-images-idx3-ubyte")?,
        &find(dir, "train-labels-idx1-ubyte")?,
        train,
    )?;
    let te = read_idx(
        &find(dir, "t10k-images-idx3-ubyte")?,
        &find(dir, "t10k-labels-idx1-ubyte")?,
        test,
    )?;
    Ok((tr, te))
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// `n` samples from `classes` isotropic Gaussians with unit variance and
/// means drawn with scale `spread`.
pub fn gaussian_mixture<R: Rng + ?Sized>(n: usize, dim: usize, classes: usize, spread: f64, rng: &mut R) -> Dataset {
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| spread * normal(rng)).collect())
        .collect();
    let mut out = Dataset::empty(dim, classes);
    for _ in 0..n {
        let l = rng.gen_range(0..classes);
        let x: Vec<f64> = means[l].iter().map(|m| m + normal(rng)).collect();
        out.push(&x, l as u8);
    }
    out
}

/// Same class means as a `gaussian_mixture` call with the same rng state,
/// split into train and test.
pub fn gaussian_split<R: Rng + ?Sized>(
    train: usize,
    test: usize,
    dim: usize,
    classes: usize,
    spread: f64,
    rng: &mut R,
) -> (Dataset, Dataset) {
    let all = gaussian_mixture(train + test, dim, classes, spread, rng);
    let idx: Vec<usize> = (0..all.len()).collect();
    (all.select(&idx[..train]), all.select(&idx[train..]))
}

/// Splits `data` over `n` clients. There are `classes` groups; a sample
/// with label `l` goes to group `l` with probability `gamma`, otherwise to
/// one of the other groups uniformly. Clients are assigned to groups
/// round-robin and a group's samples are dealt uniformly to its clients.
pub fn partition<R: Rng + ?Sized>(data: &Dataset, n: usize, gamma: f64, rng: &mut R) -> Vec<Dataset> {
    let groups = data.classes;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); groups];
    for c in 0..n {
        members[c % groups].push(c);
    }
    let mut idx: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &l) in data.labels.iter().enumerate() {
        let l = l as usize;
        let mut g = if groups == 1 || rng.gen::<f64>() < gamma {
            l
        } else {
            let o = rng.gen_range(0..groups - 1);
            if o >= l {
                o + 1
            } else {
                o
            }
        };
        // with fewer clients than groups, fold empty groups onto others
        while members[g].is_empty() {
            g = (g + 1) % groups;
        }
        let c = *members[g].choose(rng).expect("non-empty group");
        idx[c].push(i);
    }
    idx.iter().map(|ix| data.select(ix)).collect()
}

/// `k` samples drawn uniformly without replacement.
pub fn sample<R: Rng + ?Sized>(data: &Dataset, k: usize, rng: &mut R) -> Dataset {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(rng);
    idx.truncate(k);
    data.select(&idx)
}
