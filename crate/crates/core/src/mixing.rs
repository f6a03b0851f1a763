//! Exact α-mixing coefficients of finite block laws, Cesàro averages and the
//! environment-to-response transfer bound.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::finite::HiddenChain;
use crate::process::EnvironmentSpec;

pub mod toy;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BlockMeta {
    pub j: i64,
    pub gap: usize,
    pub past_len: usize,
    pub future_len: usize,
}

/// Joint law of a past block (rows) and a future block (columns).
#[derive(Clone, Debug)]
pub struct BlockLaw {
    pub table: Vec<Vec<f64>>,
    pub past_labels: Vec<Vec<usize>>,
    pub future_labels: Vec<Vec<usize>>,
    pub meta: BlockMeta,
}

impl BlockLaw {
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        let rows = table.len();
        let cols = table.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || table.iter().any(|r| r.len() != cols) {
            return invalid("block law must be a non-empty rectangular table");
        }
        if table.iter().flatten().any(|p| !(*p >= 0.0)) {
            return invalid("block law has a negative entry");
        }
        let total: f64 = table.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("block law sums to {total}"));
        }
        Ok(BlockLaw {
            past_labels: (0..rows).map(|i| vec![i]).collect(),
            future_labels: (0..cols).map(|i| vec![i]).collect(),
            table,
            meta: BlockMeta::default(),
        })
    }

    /// Independent blocks with the given marginals.
    pub fn product(past: &[f64], future: &[f64]) -> Result<Self> {
        Self::new(past.iter().map(|a| future.iter().map(|b| a * b).collect()).collect())
    }

    /// Split a joint law over symbol tuples into its first `split` coordinates and the rest.
    pub fn from_joint(joint: &[(Vec<usize>, f64)], split: usize, meta: BlockMeta) -> Result<Self> {
        let mut rows: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut cols: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for (t, _) in joint {
            let n = rows.len();
            rows.entry(t[..split].to_vec()).or_insert(n);
            let n = cols.len();
            cols.entry(t[split..].to_vec()).or_insert(n);
        }
        let mut table = vec![vec![0.0; cols.len()]; rows.len()];
        for (t, p) in joint {
            table[rows[&t[..split]]][cols[&t[split..]]] += p;
        }
        let mut law = Self::new(table)?;
        law.past_labels = vec![Vec::new(); rows.len()];
        for (k, i) in rows {
            law.past_labels[i] = k;
        }
        law.future_labels = vec![Vec::new(); cols.len()];
        for (k, i) in cols {
            law.future_labels[i] = k;
        }
        law.meta = meta;
        Ok(law)
    }

    pub fn past_marginal(&self) -> Vec<f64> {
        self.table.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn future_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.table[0].len()];
        for r in &self.table {
            for (mi, p) in m.iter_mut().zip(r) {
                *mi += p;
            }
        }
        m
    }

    /// Largest |p(a,b) - p(a)p(b)|.
    pub fn independence_defect(&self) -> f64 {
        let (pa, pb) = (self.past_marginal(), self.future_marginal());
        let mut d: f64 = 0.0;
        for (i, r) in self.table.iter().enumerate() {
            for (j, p) in r.iter().enumerate() {
                d = d.max((p - pa[i] * pb[j]).abs());
            }
        }
        d
    }

    /// Law of ((A1, A2), (B1, B2)) when (A2, B2) is independent of (A1, B1).
    pub fn join_independent(&self, other: &BlockLaw) -> Result<BlockLaw> {
        let (r1, c1) = (self.table.len(), self.table[0].len());
        let (r2, c2) = (other.table.len(), other.table[0].len());
        let mut table = vec![vec![0.0; c1 * c2]; r1 * r2];
        for a1 in 0..r1 {
            for a2 in 0..r2 {
                for b1 in 0..c1 {
                    for b2 in 0..c2 {
                        table[a1 * r2 + a2][b1 * c2 + b2] = self.table[a1][b1] * other.table[a2][b2];
                    }
                }
            }
        }
        BlockLaw::new(table)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AtomLimit {
    /// Atoms allowed on the side whose subsets are enumerated.
    pub enumerated: usize,
    /// Atoms allowed on the other side.
    pub other: usize,
}

impl Default for AtomLimit {
    fn default() -> Self {
        AtomLimit { enumerated: 12, other: 1 << 16 }
    }
}

/// α = sup_{G,H} |P(G∩H) - P(G)P(H)| over unions of atoms.
///
/// For a fixed future event H the best past event collects the atoms with
/// positive P(a∩H) - P(a)P(H); the positive and negative parts have equal
/// mass, so enumerating H over the smaller side is enough.
pub fn alpha_finite_exact(law: &BlockLaw) -> Result<f64> {
    alpha_finite_exact_with(law, AtomLimit::default())
}

pub fn alpha_finite_exact_with(law: &BlockLaw, limit: AtomLimit) -> Result<f64> {
    let pa = law.past_marginal();
    let pb = law.future_marginal();
    let rows: Vec<usize> = (0..pa.len()).filter(|i| pa[*i] > 0.0).collect();
    let cols: Vec<usize> = (0..pb.len()).filter(|j| pb[*j] > 0.0).collect();
    // Orient so that the enumerated side is the smaller one.
    let (enum_side, other_side, get): (Vec<usize>, Vec<usize>, Box<dyn Fn(usize, usize) -> f64>) =
        if cols.len() <= rows.len() {
            (cols, rows, Box::new(|o, e| law.table[o][e]))
        } else {
            (rows, cols, Box::new(|o, e| law.table[e][o]))
        };
    if enum_side.len() > limit.enumerated {
        return Err(Error::AtomLimit { atoms: enum_side.len(), limit: limit.enumerated });
    }
    if other_side.len() > limit.other {
        return Err(Error::AtomLimit { atoms: other_side.len(), limit: limit.other });
    }
    let b = enum_side.len();
    let cells: Vec<Vec<f64>> = other_side.iter().map(|o| enum_side.iter().map(|e| get(*o, *e)).collect()).collect();
    let m_other: Vec<f64> = cells.iter().map(|r| r.iter().sum()).collect();
    let m_enum: Vec<f64> = (0..b).map(|k| cells.iter().map(|r| r[k]).sum()).collect();
    let mut best: f64 = 0.0;
    // H and its complement give the same value; fix the last atom outside H.
    let masks = if b == 0 { 0 } else { 1usize << (b - 1) };
    for mask in 1..masks.max(1) {
        let ph: f64 = (0..b).filter(|k| mask >> k & 1 == 1).map(|k| m_enum[k]).sum();
        let mut val = 0.0;
        for (r, pa) in cells.iter().zip(&m_other) {
            let joint: f64 = (0..b).filter(|k| mask >> k & 1 == 1).map(|k| r[k]).sum();
            let d = joint - pa * ph;
            if d > 0.0 {
                val += d;
            }
        }
        best = best.max(val);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    LowerBound,
    TransferBound,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::LowerBound => "lower-bound",
            Provenance::TransferBound => "transfer-bound",
        }
    }
}

/// α_j(n) for j in `js` and gaps n = 1..=max_gap.
#[derive(Clone, Debug, Serialize)]
pub struct DependenceTable {
    pub js: Vec<i64>,
    pub alpha: Vec<Vec<f64>>,
    pub provenance: Vec<Vec<Provenance>>,
}

impl DependenceTable {
    /// A table given directly by its sup over j (one row, labelled j = 0).
    pub fn from_sup(sup: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if sup.iter().any(|a| !(0.0..=0.25 + 1e-12).contains(a)) {
            return Err(Error::OutOfRange("mixing coefficients lie in [0, 1/4]".into()));
        }
        let n = sup.len();
        Ok(DependenceTable { js: vec![0], alpha: vec![sup], provenance: vec![vec![provenance; n]] })
    }

    pub fn max_gap(&self) -> usize {
        self.alpha.first().map_or(0, Vec::len)
    }

    pub fn sup_alpha(&self, n: usize) -> Result<f64> {
        if n == 0 || n > self.max_gap() {
            return Err(Error::Coverage(format!("gap {n} (table covers 1..={})", self.max_gap())));
        }
        Ok(self.alpha.iter().map(|r| r[n - 1]).fold(0.0, f64::max))
    }

    pub fn sup_curve(&self) -> Vec<f64> {
        (1..=self.max_gap()).map(|n| self.sup_alpha(n).unwrap()).collect()
    }

    pub fn all_exact(&self) -> bool {
        self.provenance.iter().flatten().all(|p| *p == Provenance::Exact)
    }

    /// CSV `j,n,alpha,provenance`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,n,alpha,provenance\n");
        for (row, j) in self.js.iter().enumerate() {
            for n in 1..=self.max_gap() {
                let _ = writeln!(out, "{j},{n},{},{}", self.alpha[row][n - 1], self.provenance[row][n - 1].as_str());
            }
        }
        out
    }
}

/// α between two index sets of a finite hidden chain.
pub fn alpha_between(chain: &HiddenChain, past: &[i64], future: &[i64], meta: BlockMeta) -> Result<f64> {
    if past.is_empty() || future.is_empty() {
        return Ok(0.0);
    }
    let idx: Vec<i64> = past.iter().chain(future).copied().collect();
    let joint = chain.joint_symbols(&idx)?;
    alpha_finite_exact(&BlockLaw::from_joint(&joint, past.len(), meta)?)
}

/// Fill α_j(n) with past block Y_{j-L+1..j} (clipped at 0) and future block Y_{j+n..j+n+L-1}.
pub fn alpha_table(spec: &EnvironmentSpec, max_gap: usize, block_len: usize, js: &[i64]) -> Result<DependenceTable> {
    if block_len == 0 || max_gap == 0 {
        return invalid("block length and max gap must be positive");
    }
    if !spec.is_finite() {
        return invalid("alpha tables need a finite-alphabet spec");
    }
    let chain = HiddenChain::from_spec(spec)?;
    let cells: Vec<(usize, usize)> = (0..js.len()).flat_map(|r| (1..=max_gap).map(move |n| (r, n))).collect();
    let values: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(r, n)| {
            let j = js[r];
            let past: Vec<i64> = ((j - block_len as i64 + 1).max(0)..=j).collect();
            let future: Vec<i64> = (j + n as i64..j + (n + block_len) as i64).collect();
            let meta = BlockMeta { j, gap: n, past_len: past.len(), future_len: future.len() };
            alpha_between(&chain, &past, &future, meta)
        })
        .collect();
    let provenance_of = |n: usize| match spec {
        EnvironmentSpec::MovingSum { order, .. } if n <= *order => Provenance::LowerBound,
        _ => Provenance::Exact,
    };
    let mut alpha = vec![vec![0.0; max_gap]; js.len()];
    let mut provenance = vec![vec![Provenance::Exact; max_gap]; js.len()];
    for (&(r, n), v) in cells.iter().zip(values) {
        alpha[r][n - 1] = v?;
        provenance[r][n - 1] = provenance_of(n);
    }
    Ok(DependenceTable { js: js.to_vec(), alpha, provenance })
}

/// (1/n) Σ_{k=1..n} sup_j α_j(k).
pub fn cesaro_mixing(table: &DependenceTable, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::OutOfRange("cesaro average needs n ≥ 1".into()));
    }
    let mut s = 0.0;
    for k in 1..=n {
        s += table.sup_alpha(k)?;
    }
    Ok(s / n as f64)
}

/// Coupling-condition bound b(n), n = 0, 1, ..., valid for n ≥ threshold.
#[derive(Clone, Debug, Serialize)]
pub struct CouplingBoundSeq {
    pub b: Vec<f64>,
    pub threshold: usize,
}

impl CouplingBoundSeq {
    pub fn new(b: Vec<f64>, threshold: usize) -> Result<Self> {
        if b.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::OutOfRange("coupling bounds lie in [0, 1]".into()));
        }
        Ok(CouplingBoundSeq { b, threshold })
    }

    pub fn at(&self, n: usize) -> Result<f64> {
        self.b.get(n).copied().ok_or_else(|| Error::Coverage(format!("coupling bound at n={n}")))
    }
}

/// α^Ỹ(r+1) + b(n-r); the usual choice is r = ⌊n/2⌋.
pub fn transfer_bound(alpha_env: &DependenceTable, b: &CouplingBoundSeq, n: usize, r: usize) -> Result<f64> {
    if n <= b.threshold || r > n - b.threshold {
        return Err(Error::OutOfRange(format!("need n > {} and r ≤ n - {}, got n={n}, r={r}", b.threshold, b.threshold)));
    }
    Ok(alpha_env.sup_alpha(r + 1)? + b.at(n - r)?)
}

pub fn default_split(n: usize) -> usize {
    n / 2
}

/// Returns (α(A1∨A2, B1∨B2), α(A1, B1)) for a second pair independent of the first and
/// internally independent; the two must agree.
pub fn sigma_composition_check(first: &BlockLaw, second: &BlockLaw) -> Result<(f64, f64)> {
    let defect = second.independence_defect();
    if defect > 1e-10 {
        return Err(Error::NotIndependent(defect));
    }
    let joined = first.join_independent(second)?;
    let lhs = alpha_finite_exact(&joined)?;
    let rhs = alpha_finite_exact(first)?;
    if (lhs - rhs).abs() > 1e-12 {
        return Err(Error::RemarkViolated { lhs, rhs });
    }
    Ok((lhs, rhs))
}
