//! Dense real matrices and the three norms used throughout: the operator
//! norm `‖M‖`, the largest column norm `‖M‖₁→₂` and the largest absolute
//! entry `‖M‖_max`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default relative tolerance for [`spectral_norm`].
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap for [`spectral_norm`].
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Allowed deviation `| ‖X_j‖₂ − 1 |` for a column to count as unit norm.
pub const UNIT_COLUMN_TOL: f64 = 1e-10;

const POWER_START_SEED: u64 = 0x005e_ed0f_9017;

/// Row-major dense matrix with finite entries and positive dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// The three norms of a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub spectral: f64,
    pub max_col_l2: f64,
    pub max_abs: f64,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix must be nonempty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "entry ({}, {}) is not finite",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be nonempty");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Dimension(format!(
                "row {i} has {} entries, expected {p}",
                rows[i].len()
            )));
        }
        Self::new(n, p, rows.concat())
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let p = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        if let Some(j) = cols.iter().position(|c| c.len() != n) {
            return Err(Error::Dimension(format!(
                "column {j} has {} entries, expected {n}",
                cols[j].len()
            )));
        }
        let mut data = vec![0.0; n * p];
        for (j, c) in cols.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                data[i * p + j] = x;
            }
        }
        Self::new(n, p, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Writes an entry. Non-finite values are rejected.
    pub fn set(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "entry ({i}, {j}) is not finite"
            )));
        }
        self.data[i * self.cols + j] = value;
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, x) in sq.iter_mut().zip(self.row(i)) {
                *s += x * x;
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// Entrywise difference `self − other`.
    pub fn sub(&self, other: &DenseMatrix) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "cannot subtract {}x{} from {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// The submatrix on the given rows and columns, in the order given.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        check_range(rows, self.rows, "row")?;
        check_range(cols, self.cols, "column")?;
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            let r = self.row(i);
            data.extend(cols.iter().map(|&j| r[j]));
        }
        Self::new(rows.len(), cols.len(), data)
    }

    /// `X_T`: the columns indexed by `cols`.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let all: Vec<usize> = (0..self.rows).collect();
        self.submatrix(&all, cols)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_col_l2(&self) -> f64 {
        self.column_norms().into_iter().fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|i| (i + 1..self.cols).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

fn check_range(idx: &[usize], bound: usize, what: &str) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::Dimension(format!("empty {what} index set")));
    }
    match idx.iter().find(|&&i| i >= bound) {
        Some(i) => Err(Error::Dimension(format!(
            "{what} index {i} out of range for dimension {bound}"
        ))),
        None => Ok(()),
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// `XᵗX`.
pub fn gram(x: &DenseMatrix) -> DenseMatrix {
    let p = x.cols;
    let mut g = vec![0.0; p * p];
    for i in 0..x.rows {
        let r = x.row(i);
        for (a, &ra) in r.iter().enumerate() {
            if ra == 0.0 {
                continue;
            }
            let dst = &mut g[a * p..(a + 1) * p];
            for (b, &rb) in r.iter().enumerate().skip(a) {
                dst[b] += ra * rb;
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[a * p + b] = g[b * p + a];
        }
    }
    DenseMatrix {
        rows: p,
        cols: p,
        data: g,
    }
}

/// `XXᵗ`.
fn outer_gram(x: &DenseMatrix) -> DenseMatrix {
    let n = x.rows;
    let mut g = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let v = dot(x.row(a), x.row(b));
            g[a * n + b] = v;
            g[b * n + a] = v;
        }
    }
    DenseMatrix {
        rows: n,
        cols: n,
        data: g,
    }
}

/// Fails on the first column whose norm is not 1 within [`UNIT_COLUMN_TOL`].
pub fn check_unit_columns(x: &DenseMatrix) -> Result<()> {
    for (index, norm) in x.column_norms().into_iter().enumerate() {
        if (norm - 1.0).abs() > UNIT_COLUMN_TOL {
            return Err(Error::NonUnitColumn {
                index,
                norm,
                tol: UNIT_COLUMN_TOL,
            });
        }
    }
    Ok(())
}

/// Scales every column to unit l2 norm.
pub fn normalize_columns(x: &DenseMatrix) -> Result<DenseMatrix> {
    let norms = x.column_norms();
    if let Some(index) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroColumn { index });
    }
    let mut out = x.clone();
    for i in 0..x.rows {
        for (j, n) in norms.iter().enumerate() {
            out.data[i * x.cols + j] /= n;
        }
    }
    Ok(out)
}

/// The hollow Gram matrix `H = XᵗX − I` of a matrix with unit columns.
///
/// The diagonal is set to exactly zero: with unit columns it only carries
/// rounding noise, and keeping it would break `‖H‖_max = μ(X)`.
pub fn hollow_gram(x: &DenseMatrix) -> Result<DenseMatrix> {
    check_unit_columns(x)?;
    let mut h = gram(x);
    for j in 0..h.cols {
        h.data[j * h.cols + j] = 0.0;
    }
    Ok(h)
}

/// `H[T,T]` for a square `H` and a sorted set of distinct indices `T`.
pub fn extract_principal(h: &DenseMatrix, t: &[usize]) -> Result<DenseMatrix> {
    if !h.is_square() {
        return Err(Error::Dimension(format!(
            "principal submatrix of a non-square {}x{} matrix",
            h.rows, h.cols
        )));
    }
    if t.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "index set must be strictly increasing".into(),
        ));
    }
    h.submatrix(t, t)
}

/// Operator norm by power iteration on the Gram matrix of the smaller side.
///
/// The returned value satisfies `|σ − ‖M‖| ≤ tol·max(1, ‖M‖)` under the
/// geometric-convergence estimate used as the stopping rule (the Rayleigh
/// quotient increments must predict a remaining error below tolerance on two
/// consecutive steps).
pub fn spectral_norm(m: &DenseMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    check_tol(tol, max_iter)?;
    if m.max_abs() == 0.0 {
        return Ok(0.0);
    }
    if m.rows == 1 || m.cols == 1 {
        return Ok(l2(&m.data));
    }
    let g = if m.rows >= m.cols {
        gram(m)
    } else {
        outer_gram(m)
    };
    let rho = dominant_psd_eigenvalue(&g, max_iter, |rho| {
        let sigma = rho.max(0.0).sqrt();
        (2.0 * tol * sigma.max(1.0) * sigma).max(tol * tol)
    })
    .map_err(|e| match e {
        Error::NotConverged {
            iterations,
            estimate,
            residual,
        } => Error::NotConverged {
            iterations,
            estimate: estimate.max(0.0).sqrt(),
            residual,
        },
        other => other,
    })?;
    Ok(rho.max(0.0).sqrt())
}

/// [`spectral_norm`] with the default tolerance and iteration cap.
pub fn spectral_norm_default(m: &DenseMatrix) -> Result<f64> {
    spectral_norm(m, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// Operator norm of a symmetric positive semi-definite matrix, by power
/// iteration on the matrix itself.
pub fn psd_norm(s: &DenseMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    check_tol(tol, max_iter)?;
    if !s.is_square() {
        return Err(Error::Dimension("psd_norm needs a square matrix".into()));
    }
    if s.max_abs() == 0.0 {
        return Ok(0.0);
    }
    if s.rows == 1 {
        return Ok(s.data[0].abs());
    }
    dominant_psd_eigenvalue(s, max_iter, |rho| tol * rho.max(1.0))
}

fn check_tol(tol: f64, max_iter: usize) -> Result<()> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidParameter(format!(
            "need tol > 0 and max_iter > 0, got {tol} and {max_iter}"
        )));
    }
    Ok(())
}

/// Largest eigenvalue of a symmetric PSD matrix. `tol_for` maps the current
/// estimate to the admissible absolute error.
///
/// Power iteration runs until the stopping rule holds. If the observed
/// contraction ratio stays near one (a clustered top of the spectrum) or the
/// iteration budget runs out, the last iterate seeds a fully reorthogonalised
/// Lanczos run whose top Ritz value is found by Sturm bisection.
fn dominant_psd_eigenvalue(
    g: &DenseMatrix,
    max_iter: usize,
    tol_for: impl Fn(f64) -> f64,
) -> Result<f64> {
    let k = g.rows;
    let mut last = (0usize, 0.0, f64::INFINITY);
    // One restart from a second deterministic start if the iterate collapses.
    for attempt in 0..2u64 {
        let mut r = rng::stream(POWER_START_SEED, "power-start", attempt);
        let mut v: Vec<f64> = (0..k).map(|_| r.random_range(-1.0..1.0)).collect();
        let n0 = l2(&v);
        v.iter_mut().for_each(|x| *x /= n0);

        let mut prev_rho: Option<f64> = None;
        let mut prev_delta: Option<f64> = None;
        let mut calm = 0;
        let mut collapsed = false;
        for it in 1..=max_iter {
            let w = g.mul_vec(&v);
            let rho = dot(&v, &w);
            let wn = l2(&w);
            if !(wn > 0.0) || !wn.is_finite() {
                collapsed = true;
                break;
            }
            let residual = w
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - rho * b).powi(2))
                .sum::<f64>()
                .sqrt();
            v = w.into_iter().map(|x| x / wn).collect();
            last = (it, rho, residual);

            if residual <= 4.0 * f64::EPSILON * rho {
                return Ok(rho);
            }
            if let Some(p) = prev_rho {
                let delta = rho - p;
                let noise = 8.0 * f64::EPSILON * rho.abs().max(f64::MIN_POSITIVE);
                let mut ratio = None;
                let remaining = if delta.abs() <= noise {
                    0.0
                } else {
                    match prev_delta {
                        Some(pd) if pd > noise => {
                            let q = delta / pd;
                            ratio = Some(q);
                            if q <= 0.0 {
                                delta.abs()
                            } else if q < 1.0 {
                                delta * q / (1.0 - q)
                            } else {
                                f64::INFINITY
                            }
                        }
                        _ => f64::INFINITY,
                    }
                };
                let tol = tol_for(rho);
                if delta.abs() <= tol && remaining <= tol {
                    calm += 1;
                    if calm >= 2 {
                        return Ok(rho);
                    }
                } else {
                    calm = 0;
                    if it >= STAGNATION_MIN_ITER && ratio.is_some_and(|q| q >= STAGNATION_RATIO) {
                        break;
                    }
                }
                prev_delta = Some(delta);
            }
            prev_rho = Some(rho);
        }
        if !collapsed {
            if let Some(rho) = lanczos_top(g, &v) {
                return Ok(rho.max(last.1));
            }
            break;
        }
    }
    Err(Error::NotConverged {
        iterations: last.0,
        estimate: last.1,
        residual: last.2,
    })
}

const STAGNATION_MIN_ITER: usize = 32;
const STAGNATION_RATIO: f64 = 0.9;

/// Top eigenvalue of the Krylov space of `g` started at unit vector `v0`,
/// run to breakdown or full dimension.
fn lanczos_top(g: &DenseMatrix, v0: &[f64]) -> Option<f64> {
    let k = g.rows;
    let scale = g.max_abs() * k as f64;
    let mut basis: Vec<Vec<f64>> = vec![v0.to_vec()];
    let mut alpha = Vec::with_capacity(k);
    let mut beta: Vec<f64> = Vec::with_capacity(k);
    for j in 0..k {
        let mut w = g.mul_vec(&basis[j]);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bn = l2(&w);
        if !bn.is_finite() {
            return None;
        }
        if j + 1 == k || bn <= 1e-13 * scale {
            break;
        }
        beta.push(bn);
        basis.push(w.into_iter().map(|x| x / bn).collect());
    }
    Some(tridiagonal_top(&alpha, &beta))
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `a` and off-diagonal `b`, by bisection on the Sturm count.
fn tridiagonal_top(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let off = |i: usize| {
        let l = if i > 0 { b[i - 1].abs() } else { 0.0 };
        let r = if i + 1 < n { b[i].abs() } else { 0.0 };
        l + r
    };
    let mut lo = (0..n).map(|i| a[i] - off(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n)
        .map(|i| a[i] + off(i))
        .fold(f64::NEG_INFINITY, f64::max);
    // Number of eigenvalues strictly below x.
    let below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..n {
            let b2 = if i > 0 { b[i - 1] * b[i - 1] } else { 0.0 };
            d = a[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) < n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn norms(m: &DenseMatrix) -> Result<NormReport> {
    Ok(NormReport {
        spectral: spectral_norm_default(m)?,
        max_col_l2: m.max_col_l2(),
        max_abs: m.max_abs(),
    })
}

/// Flags a numerically rank-deficient matrix from a Cholesky attempt on the
/// Gram matrix of its smaller side. Rank never enters a bound, so this is a
/// warning only.
pub fn rank_warning(x: &DenseMatrix) -> Option<String> {
    let g = if x.rows >= x.cols {
        gram(x)
    } else {
        outer_gram(x)
    };
    let k = g.rows;
    let scale = (0..k).map(|i| g.get(i, i)).fold(0.0, f64::max);
    if scale == 0.0 {
        return Some("matrix is zero".into());
    }
    let mut l = vec![0.0f64; k * k];
    let mut min_pivot = f64::INFINITY;
    for j in 0..k {
        let d = g.get(j, j) - (0..j).map(|c| l[j * k + c].powi(2)).sum::<f64>();
        min_pivot = min_pivot.min(d);
        if d <= 1e-12 * scale {
            return Some(format!(
                "Gram matrix looks singular (Cholesky pivot {d:e} at index {j}); \
                 the matrix is probably not full rank"
            ));
        }
        let ljj = d.sqrt();
        l[j * k + j] = ljj;
        for i in j + 1..k {
            let s = g.get(i, j) - (0..j).map(|c| l[i * k + c] * l[j * k + c]).sum::<f64>();
            l[i * k + j] = s / ljj;
        }
    }
    None
}

/// Parses the CSV matrix format: one row per line, comma-separated decimals,
/// with an optional leading `# rows=<n> cols=<p>` line. Ragged rows are
/// rejected with the offending line number (1-based).
pub fn parse_csv(text: &str) -> Result<DenseMatrix> {
    let mut declared: Option<(usize, usize)> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if !rows.is_empty() || declared.is_some() {
                return Err(parse_err(line_no, "header must be the first line"));
            }
            declared = Some(parse_header(rest, line_no)?);
            continue;
        }
        let values = line
            .split(',')
            .enumerate()
            .map(|(c, tok)| {
                let tok = tok.trim();
                tok.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        parse_err(
                            line_no,
                            format!("field {} {tok:?} is not a finite number", c + 1),
                        )
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(parse_err(
                    line_no,
                    format!("ragged row: {} fields, expected {w}", values.len()),
                ))
            }
            _ => {}
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no matrix rows"));
    }
    if let Some((n, p)) = declared {
        if n != rows.len() || Some(p) != width {
            return Err(parse_err(
                1,
                format!(
                    "header declares {n}x{p} but data is {}x{}",
                    rows.len(),
                    width.unwrap_or(0)
                ),
            ));
        }
    }
    DenseMatrix::from_rows(&rows)
}

fn parse_header(rest: &str, line: usize) -> Result<(usize, usize)> {
    let mut n = None;
    let mut p = None;
    for kv in rest.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("malformed header field {kv:?}")))?;
        let v: usize = v
            .parse()
            .map_err(|_| parse_err(line, format!("malformed header value {v:?}")))?;
        match k {
            "rows" => n = Some(v),
            "cols" => p = Some(v),
            _ => return Err(parse_err(line, format!("unknown header key {k:?}"))),
        }
    }
    match (n, p) {
        (Some(n), Some(p)) => Ok((n, p)),
        _ => Err(parse_err(line, "header needs rows=<n> cols=<p>")),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Writes the CSV matrix format, header included. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn to_csv(m: &DenseMatrix) -> String {
    let mut out = format!("# rows={} cols={}\n", m.rows, m.cols);
    for i in 0..m.rows {
        let line: Vec<String> = m.row(i).iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
