//! Seeded test matrices and the two random selector models: Bernoulli masks
//! (`R`, i.i.d. flags with mean `δ`) and fixed-cardinality masks (`R_s`,
//! uniform over all supports of size `s`).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{normalize_columns, DenseMatrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleKind {
    /// i.i.d. standard normal entries, columns scaled to unit norm.
    GaussianUnit { n: usize, p: usize },
    /// `[I | C]` with `C` the orthonormal DCT-II basis; `n × 2n`.
    SpikesSines { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    #[serde(flatten)]
    pub kind: EnsembleKind,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn gaussian_unit(n: usize, p: usize, seed: u64) -> Self {
        Self {
            kind: EnsembleKind::GaussianUnit { n, p },
            seed,
        }
    }

    pub fn spikes_sines(n: usize) -> Self {
        Self {
            kind: EnsembleKind::SpikesSines { n },
            seed: 0,
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleKind::GaussianUnit { n, p } => write!(f, "gaussian_unit:n={n},p={p}"),
            EnsembleKind::SpikesSines { n } => write!(f, "spikes_sines:n={n}"),
        }
    }
}

/// Parses `gaussian_unit:n=..,p=..` and `spikes_sines:n=..`.
impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParameter(format!("generator {s:?}: {msg}"));
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let mut n = None;
        let mut p = None;
        for kv in args.split(',').filter(|t| !t.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {kv:?}")))?;
            let v: usize = v
                .trim()
                .parse()
                .map_err(|_| bad(format!("{k} must be a positive integer")))?;
            match k.trim() {
                "n" => n = Some(v),
                "p" => p = Some(v),
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        match name.trim() {
            "gaussian_unit" => match (n, p) {
                (Some(n), Some(p)) => Ok(EnsembleKind::GaussianUnit { n, p }),
                _ => Err(bad("gaussian_unit needs n and p".into())),
            },
            "spikes_sines" => match (n, p) {
                (Some(n), None) => Ok(EnsembleKind::SpikesSines { n }),
                _ => Err(bad("spikes_sines takes only n".into())),
            },
            other => Err(bad(format!("unknown generator {other:?}"))),
        }
    }
}

/// Builds the matrix described by `spec`. Deterministic in `spec`.
pub fn gen_matrix(spec: &EnsembleSpec) -> Result<DenseMatrix> {
    match spec.kind {
        EnsembleKind::GaussianUnit { n, p } => {
            if n == 0 || p == 0 {
                return Err(Error::InvalidParameter(format!(
                    "gaussian_unit needs n, p >= 1, got n={n}, p={p}"
                )));
            }
            let mut r = rng::stream(spec.seed, "gaussian_unit", 0);
            let data: Vec<f64> = (0..n * p).map(|_| r.sample(StandardNormal)).collect();
            normalize_columns(&DenseMatrix::new(n, p, data)?)
        }
        EnsembleKind::SpikesSines { n } => {
            if n == 0 {
                return Err(Error::InvalidParameter("spikes_sines needs n >= 1".into()));
            }
            let dct = dct_basis(n);
            let mut data = vec![0.0; n * 2 * n];
            for i in 0..n {
                data[i * 2 * n + i] = 1.0;
                for k in 0..n {
                    data[i * 2 * n + n + k] = dct[i * n + k];
                }
            }
            DenseMatrix::new(n, 2 * n, data)
        }
    }
}

/// Row-major `n×n` matrix whose column `k` is the `k`-th orthonormal DCT-II
/// basis vector: `√(1/n)` for `k = 0`, `√(2/n)·cos(π(2i+1)k / 2n)` otherwise.
pub fn dct_basis(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let scale = if k == 0 {
                (1.0 / nf).sqrt()
            } else {
                (2.0 / nf).sqrt()
            };
            out[i * n + k] = scale * (PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SelectorModel {
    Bernoulli { delta: f64 },
    UniformS { s: usize },
}

/// Diagonal of a random 0/1 selector matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorSample {
    pub mask: Vec<bool>,
    pub model: SelectorModel,
    pub seed: u64,
}

impl SelectorSample {
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    /// Sorted indices of the selected positions.
    pub fn indices(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &on)| on.then_some(i))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&on| on).count()
    }
}

pub fn sample_bernoulli(p: usize, delta: f64, seed: u64) -> Result<SelectorSample> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in [0, 1], got {delta}"
        )));
    }
    let mut r = rng::from_seed(seed);
    let mask = (0..p).map(|_| r.random::<f64>() < delta).collect();
    Ok(SelectorSample {
        mask,
        model: SelectorModel::Bernoulli { delta },
        seed,
    })
}

/// Exactly `s` ones, uniform over all `C(p, s)` supports (partial
/// Fisher–Yates on the index array).
pub fn sample_uniform_subset(p: usize, s: usize, seed: u64) -> Result<SelectorSample> {
    if s > p {
        return Err(Error::InvalidParameter(format!(
            "cardinality s={s} exceeds dimension p={p}"
        )));
    }
    let mut r = rng::from_seed(seed);
    let mut idx: Vec<usize> = (0..p).collect();
    for i in 0..s {
        let j = r.random_range(i..p);
        idx.swap(i, j);
    }
    let mut mask = vec![false; p];
    for &i in &idx[..s] {
        mask[i] = true;
    }
    Ok(SelectorSample {
        mask,
        model: SelectorModel::UniformS { s },
        seed,
    })
}

/// `R H R′` as a full `p×p` matrix.
pub fn mask_bilateral(
    h: &DenseMatrix,
    left: &SelectorSample,
    right: &SelectorSample,
) -> Result<DenseMatrix> {
    if h.rows() != left.len() || h.cols() != right.len() {
        return Err(Error::Dimension(format!(
            "masks of length {} and {} do not fit a {}x{} matrix",
            left.len(),
            right.len(),
            h.rows(),
            h.cols()
        )));
    }
    let mut out = DenseMatrix::zeros(h.rows(), h.cols());
    for (i, &li) in left.mask.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &rj) in right.mask.iter().enumerate() {
            if rj {
                out.set(i, j, h.get(i, j))?;
            }
        }
    }
    Ok(out)
}
