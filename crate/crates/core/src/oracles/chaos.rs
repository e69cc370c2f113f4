use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::map_indices;
use crate::rng;
use crate::sum::CompensatedSum;

/// Largest `p` accepted by [`chaos_moments_exact`].
pub const MAX_ENUMERATION_P: usize = 22;
/// `Eξ⁴ ≤ 9 (Eξ²)²`.
pub const CHAOS_RATIO_BOUND: f64 = 9.0;
/// The hypercontractivity constant `((q−1)/(p−1))^{d q/2}` at `d = 2`,
/// `p = 2`, `q = 4`: a looser envelope for the same ratio.
pub const GENERIC_RATIO_BOUND: f64 = 81.0;

/// `ξ = Σ_{i<j} x_ij η_i η_j` with i.i.d. Rademacher signs `η`.
/// Only the strictly upper-triangular coefficients are stored, packed by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosInstance {
    p: usize,
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosMoments {
    pub m2: f64,
    pub m4: f64,
}

impl ChaosMoments {
    /// `m4 / m2²`, or `None` for the zero chaos.
    pub fn ratio(&self) -> Option<f64> {
        (self.m2 > 0.0).then(|| self.m4 / (self.m2 * self.m2))
    }

    /// `9 m2² − m4`, nonnegative by the moment inequality.
    pub fn gap(&self) -> f64 {
        CHAOS_RATIO_BOUND * self.m2 * self.m2 - self.m4
    }
}

impl ChaosInstance {
    pub fn zeros(p: usize) -> Self {
        Self {
            p,
            coeffs: vec![0.0; p * p.saturating_sub(1) / 2],
        }
    }

    /// Coefficients i.i.d. uniform on `[-1, 1]`.
    pub fn random(p: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, "chaos-instance", p as u64);
        let mut inst = Self::zeros(p);
        inst.coeffs
            .iter_mut()
            .for_each(|c| *c = r.random_range(-1.0..=1.0));
        inst
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.p);
        i * (2 * self.p - i - 1) / 2 + (j - i - 1)
    }

    /// `x_ij` for `i ≠ j` (symmetric access), zero on the diagonal. 0-based.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.coeffs[self.slot(i, j)],
            std::cmp::Ordering::Greater => self.coeffs[self.slot(j, i)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    /// Sets `x_ij`, `i < j`, 0-based.
    pub fn set(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if i >= j || j >= self.p {
            return Err(Error::InvalidParameter(format!(
                "coefficient ({i}, {j}) is not strictly upper-triangular for p={}",
                self.p
            )));
        }
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "coefficient ({i}, {j}) is not finite"
            )));
        }
        let k = self.slot(i, j);
        self.coeffs[k] = value;
        Ok(())
    }

    /// Parses `i,j,x_ij` triples with 1-based indices, one per line; `#`
    /// starts a comment line. `p` defaults to the largest index seen.
    pub fn parse_triples(text: &str, p: Option<usize>) -> Result<Self> {
        let mut triples = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::Parse {
                line: line_no,
                message: m,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(err(format!(
                    "expected i,j,x but got {} fields",
                    fields.len()
                )));
            }
            let i: usize = fields[0]
                .parse()
                .map_err(|_| err(format!("bad index {:?}", fields[0])))?;
            let j: usize = fields[1]
                .parse()
                .map_err(|_| err(format!("bad index {:?}", fields[1])))?;
            let x: f64 = fields[2]
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| err(format!("bad coefficient {:?}", fields[2])))?;
            if i == 0 || j == 0 {
                return Err(err("indices are 1-based".into()));
            }
            if i == j {
                return Err(err(format!("diagonal coefficient ({i}, {j})")));
            }
            triples.push((line_no, i.min(j) - 1, i.max(j) - 1, x));
        }
        let seen_p = triples.iter().map(|t| t.2 + 1).max().unwrap_or(0);
        let p = p.unwrap_or(seen_p);
        if seen_p > p {
            return Err(Error::InvalidParameter(format!(
                "index {seen_p} exceeds declared p={p}"
            )));
        }
        let mut inst = Self::zeros(p);
        let mut filled = vec![false; inst.coeffs.len()];
        for (line, i, j, x) in triples {
            let k = inst.slot(i, j);
            if filled[k] {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate coefficient ({}, {})", i + 1, j + 1),
                });
            }
            filled[k] = true;
            inst.coeffs[k] = x;
        }
        Ok(inst)
    }

    /// `ξ(η)` for the sign vector whose bit `k` set means `η_k = −1`.
    fn eval(&self, signs: u32) -> f64 {
        let eta = |k: usize| if signs >> k & 1 == 1 { -1.0 } else { 1.0 };
        let mut xi = 0.0;
        let mut k = 0;
        for i in 0..self.p {
            let mut inner = 0.0;
            for j in i + 1..self.p {
                inner += self.coeffs[k] * eta(j);
                k += 1;
            }
            xi += eta(i) * inner;
        }
        xi
    }
}

/// Exact `(Eξ², Eξ⁴)` by summing over all sign vectors.
///
/// `ξ(η) = ξ(−η)`, so only the half with `η_{p−1} = +1` is enumerated. The
/// half is cut into fixed chunks, each summed with compensation, and chunk
/// sums are merged in order; the result does not depend on threading.
pub fn chaos_moments_exact(inst: &ChaosInstance) -> Result<ChaosMoments> {
    let p = inst.p;
    if p > MAX_ENUMERATION_P {
        return Err(Error::InvalidParameter(format!(
            "enumeration needs p <= {MAX_ENUMERATION_P}, got {p}"
        )));
    }
    if p < 2 {
        return Ok(ChaosMoments { m2: 0.0, m4: 0.0 });
    }
    let half: u32 = 1 << (p - 1);
    const CHUNK: u32 = 1 << 12;
    let chunks = half.div_ceil(CHUNK);
    let partials = map_indices(chunks as usize, |c| {
        let (mut s2, mut s4) = (CompensatedSum::default(), CompensatedSum::default());
        let start = c as u32 * CHUNK;
        for signs in start..(start + CHUNK).min(half) {
            let xi2 = inst.eval(signs).powi(2);
            s2.add(xi2);
            s4.add(xi2 * xi2);
        }
        (s2, s4)
    });
    let (s2, s4) = partials.into_iter().fold(
        (CompensatedSum::default(), CompensatedSum::default()),
        |(a2, a4), (b2, b4)| (a2.merge(b2), a4.merge(b4)),
    );
    let n = f64::from(half);
    Ok(ChaosMoments {
        m2: s2.value() / n,
        m4: s4.value() / n,
    })
}

/// Closed-form moments.
///
/// `Eξ² = Σ x_ij²`. For the fourth moment the only surviving terms are even
/// powers (`3(Σx²)² − 2Σx⁴`) and products over four distinct pairs covering
/// every index exactly twice, i.e. rectangles of the symmetric coefficient
/// matrix with disjoint row and column pairs. Each 4-set `a<b<c<d` carries
/// three such rectangles (row pairs `{a,b}`, `{a,c}`, `{a,d}`), each counted
/// `4!` times.
pub fn chaos_moments_formula(inst: &ChaosInstance) -> ChaosMoments {
    let p = inst.p;
    let mut sq = CompensatedSum::default();
    let mut quart = CompensatedSum::default();
    for &x in &inst.coeffs {
        sq.add(x * x);
        quart.add(x.powi(4));
    }
    let m2 = sq.value();
    let mut rect = CompensatedSum::default();
    let x = |i, j| inst.get(i, j);
    for a in 0..p {
        for b in a + 1..p {
            for c in b + 1..p {
                for d in c + 1..p {
                    let ab_cd = x(a, b) * x(c, d);
                    let ac_bd = x(a, c) * x(b, d);
                    let ad_bc = x(a, d) * x(b, c);
                    rect.add(ac_bd * ad_bc + ab_cd * (ad_bc + ac_bd));
                }
            }
        }
    }
    let m4 = 3.0 * m2 * m2 - 2.0 * quart.value() + 24.0 * rect.value();
    ChaosMoments { m2, m4 }
}
