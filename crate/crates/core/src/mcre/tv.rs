use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

use super::coupling::TailCurve;

/// Bins: optionally an exact atom at 0, then `bins` equal cells on [lo, hi),
/// with one underflow and one overflow cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Binning {
    pub zero_atom: bool,
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Binning {
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Self {
        Binning { zero_atom: false, lo, hi, bins }
    }

    /// Atom at 0 plus cells on (0, hi).
    pub fn with_zero_atom(hi: f64, bins: usize) -> Self {
        Binning { zero_atom: true, lo: 0.0, hi, bins }
    }

    pub fn cells(&self) -> usize {
        self.bins + 2 + self.zero_atom as usize
    }

    pub fn index(&self, x: f64) -> usize {
        let base = self.zero_atom as usize;
        if self.zero_atom && x == 0.0 {
            return 0;
        }
        if x < self.lo {
            return base;
        }
        if x >= self.hi {
            return base + self.bins + 1;
        }
        let k = ((x - self.lo) / (self.hi - self.lo) * self.bins as f64) as usize;
        base + 1 + k.min(self.bins - 1)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Histogram {
    pub binning: Binning,
    pub counts: Vec<usize>,
    pub total: usize,
}

impl Histogram {
    pub fn new(binning: Binning, xs: &[f64]) -> Self {
        let mut counts = vec![0; binning.cells()];
        for x in xs {
            counts[binning.index(*x)] += 1;
        }
        Histogram { binning, counts, total: xs.len() }
    }
}

/// Plug-in TV (half L1 between cell frequencies) with a conservative standard error
/// ½ Σ_b sqrt(p1(1−p1)/N1 + p2(1−p2)/N2).
pub fn histogram_tv(a: &Histogram, b: &Histogram) -> Result<(f64, f64)> {
    if a.binning != b.binning {
        return Err(Error::Binning);
    }
    let (na, nb) = (a.total as f64, b.total as f64);
    let mut tv = 0.0;
    let mut se = 0.0;
    for (ca, cb) in a.counts.iter().zip(&b.counts) {
        let (pa, pb) = (*ca as f64 / na, *cb as f64 / nb);
        tv += (pa - pb).abs();
        se += (pa * (1.0 - pa) / na + pb * (1.0 - pb) / nb).sqrt();
    }
    Ok((0.5 * tv, 0.5 * se))
}

#[derive(Clone, Debug, Serialize)]
pub struct TvPoint {
    pub n: usize,
    pub bound: f64,
    pub bound_se: f64,
    pub tv: Option<f64>,
    pub tv_se: Option<f64>,
    /// tv ≤ bound + 4·sqrt(tv_se² + bound_se²).
    pub within: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TvReport {
    pub points: Vec<TvPoint>,
}

impl TvReport {
    pub fn all_within(&self) -> bool {
        self.points.iter().all(|p| p.within != Some(false))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,bound,bound_se,tv,tv_se,within\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for p in &self.points {
            let w = p.within.map(|b| (b as u8).to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{w}", p.n, p.bound, p.bound_se, opt(p.tv), opt(p.tv_se));
        }
        out
    }
}

/// Bound curve 2·P̂(τ > n), with plug-in TV where histogram pairs are given.
pub fn tv_bound_report(tail: &TailCurve, pairs: &[(usize, Histogram, Histogram)]) -> Result<TvReport> {
    let mut points: Vec<TvPoint> = tail
        .p
        .iter()
        .zip(&tail.stderr)
        .enumerate()
        .map(|(n, (p, se))| TvPoint { n, bound: 2.0 * p, bound_se: 2.0 * se, tv: None, tv_se: None, within: None })
        .collect();
    for (n, ha, hb) in pairs {
        let pt = points.get_mut(*n).ok_or_else(|| Error::OutOfRange(format!("time {n} beyond the tail curve")))?;
        let (tv, se) = histogram_tv(ha, hb)?;
        pt.tv = Some(tv);
        pt.tv_se = Some(se);
        pt.within = Some(tv <= pt.bound + 4.0 * (se * se + pt.bound_se * pt.bound_se).sqrt());
    }
    Ok(TvReport { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn binning_cells() {
        let b = Binning::with_zero_atom(2.0, 4);
        assert_eq!(b.cells(), 7);
        assert_eq!(b.index(0.0), 0);
        assert_eq!(b.index(1e-9), 2);
        assert_eq!(b.index(1.99), 5);
        assert_eq!(b.index(5.0), 6);
        assert_eq!(b.index(-1.0), 1);
    }

    #[test]
    fn identical_laws_give_small_tv() {
        let mut r = derive_stream(1, 1);
        let a: Vec<f64> = (0..50_000).map(|_| r.uniform()).collect();
        let b: Vec<f64> = (0..50_000).map(|_| r.uniform()).collect();
        let bin = Binning::uniform(0.0, 1.0, 20);
        let (tv, se) = histogram_tv(&Histogram::new(bin.clone(), &a), &Histogram::new(bin, &b)).unwrap();
        assert!(tv < 4.0 * se, "{tv} {se}");
    }

    #[test]
    fn incompatible_binnings_rejected() {
        let a = Histogram::new(Binning::uniform(0.0, 1.0, 10), &[0.5]);
        let b = Histogram::new(Binning::uniform(0.0, 1.0, 11), &[0.5]);
        assert!(matches!(histogram_tv(&a, &b), Err(Error::Binning)));
    }

    #[test]
    fn never_coupled_bound_is_two() {
        let tail = TailCurve::from_taus(&[None; 10], 5);
        let rep = tv_bound_report(&tail, &[]).unwrap();
        assert!(rep.points.iter().all(|p| p.bound == 2.0));
    }
}
