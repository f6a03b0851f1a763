//! Exact laws of finite-alphabet processes through a hidden Markov representation.
//!
//! Every finite spec is a function of a (possibly time-inhomogeneous) finite
//! Markov chain: i.i.d. and Markov specs are their own chain, a moving sum of
//! order m is driven by the window of its last m+1 base draws, and a scripted
//! spec is an independent sequence.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::process::EnvironmentSpec;

const MAX_HIDDEN: usize = 4096;

#[derive(Clone, Debug)]
enum Dynamics {
    /// Time-homogeneous with `init` the law at index 0; `stationary` if `init` is invariant.
    Homogeneous { init: Vec<f64>, trans: Vec<Vec<f64>>, stationary: bool },
    /// Independent hidden states with per-index laws (clamped at the ends).
    Independent { laws: Vec<Vec<f64>> },
}

#[derive(Clone, Debug)]
pub struct HiddenChain {
    pub alphabet: Vec<f64>,
    /// Symbol index emitted by each hidden state.
    pub emit: Vec<usize>,
    dynamics: Dynamics,
}

fn symbol_of(alphabet: &[f64], v: f64) -> usize {
    alphabet
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map(|(i, _)| i)
        .unwrap()
}

fn vec_mat(v: &[f64], m: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; m[0].len()];
    for (i, vi) in v.iter().enumerate() {
        if *vi == 0.0 {
            continue;
        }
        for (o, mij) in out.iter_mut().zip(&m[i]) {
            *o += vi * mij;
        }
    }
    out
}

impl HiddenChain {
    /// General homogeneous chain; `init` is the law of the hidden state at index 0.
    pub fn homogeneous(alphabet: Vec<f64>, emit: Vec<usize>, init: Vec<f64>, trans: Vec<Vec<f64>>) -> Result<Self> {
        let k = init.len();
        if emit.len() != k || trans.len() != k || trans.iter().any(|r| r.len() != k) {
            return invalid("hidden chain dimensions disagree");
        }
        if emit.iter().any(|e| *e >= alphabet.len()) {
            return invalid("emission outside alphabet");
        }
        let next = vec_mat(&init, &trans);
        let stationary = next.iter().zip(&init).all(|(a, b)| (a - b).abs() < 1e-14);
        Ok(HiddenChain { alphabet, emit, dynamics: Dynamics::Homogeneous { init, trans, stationary } })
    }

    pub fn from_spec(spec: &EnvironmentSpec) -> Result<Self> {
        spec.validate()?;
        let alphabet = spec.alphabet().ok_or_else(|| Error::InvalidSpec("spec is not finite-valued".into()))?;
        match spec {
            EnvironmentSpec::Iid { law } => {
                let (vals, probs) = law.atoms().unwrap();
                let emit = vals.iter().map(|v| symbol_of(&alphabet, *v)).collect();
                let trans = vec![probs.clone(); probs.len()];
                Self::homogeneous(alphabet, emit, probs, trans)
            }
            EnvironmentSpec::FiniteMarkov { alphabet: declared, transition, initial } => {
                let emit = (0..declared.len()).collect();
                Self::homogeneous(declared.clone(), emit, initial.clone(), transition.clone())
            }
            EnvironmentSpec::MovingSum { order, base } => {
                let (vals, probs) = base.atoms().unwrap();
                let k = vals.len();
                let w = order + 1;
                let n = k.checked_pow(w as u32).filter(|n| *n <= MAX_HIDDEN).ok_or_else(|| {
                    Error::OutOfRange(format!("moving-sum window has more than {MAX_HIDDEN} states"))
                })?;
                // Window (z_{t-m}, ..., z_t) encoded base k, oldest digit most significant.
                let digits = |mut code: usize| {
                    let mut d = vec![0; w];
                    for slot in d.iter_mut().rev() {
                        *slot = code % k;
                        code /= k;
                    }
                    d
                };
                let mut init = vec![0.0; n];
                let mut emit = vec![0; n];
                let mut trans = vec![vec![0.0; n]; n];
                for code in 0..n {
                    let d = digits(code);
                    init[code] = d.iter().map(|i| probs[*i]).product();
                    emit[code] = symbol_of(&alphabet, d.iter().map(|i| vals[*i]).sum());
                    let shifted = (code % k.pow(*order as u32)) * k;
                    for (z, p) in probs.iter().enumerate() {
                        trans[code][shifted + z] += p;
                    }
                }
                Self::homogeneous(alphabet, emit, init, trans)
            }
            EnvironmentSpec::Scripted { laws } => {
                let k = alphabet.len();
                let laws = laws
                    .iter()
                    .map(|l| {
                        let (vals, probs) = l.atoms().unwrap();
                        let mut v = vec![0.0; k];
                        for (x, p) in vals.iter().zip(&probs) {
                            v[symbol_of(&alphabet, *x)] += p;
                        }
                        v
                    })
                    .collect();
                Ok(HiddenChain { emit: (0..k).collect(), alphabet, dynamics: Dynamics::Independent { laws } })
            }
        }
    }

    pub fn n_hidden(&self) -> usize {
        self.emit.len()
    }

    /// Law of the hidden state at `index`.
    pub fn law_at(&self, index: i64) -> Result<Vec<f64>> {
        match &self.dynamics {
            Dynamics::Homogeneous { init, trans, stationary } => {
                if *stationary {
                    return Ok(init.clone());
                }
                if index < 0 {
                    return Err(Error::OutOfRange(format!("index {index} precedes a non-stationary chain's start")));
                }
                let mut v = init.clone();
                for _ in 0..index {
                    v = vec_mat(&v, trans);
                }
                Ok(v)
            }
            Dynamics::Independent { laws } => Ok(laws[index.clamp(0, laws.len() as i64 - 1) as usize].clone()),
        }
    }

    /// Push a (sub-probability) vector over hidden states from index `from` to `to > from`.
    pub fn propagate(&self, v: &[f64], from: i64, to: i64) -> Result<Vec<f64>> {
        match &self.dynamics {
            Dynamics::Homogeneous { trans, .. } => {
                let mut out = v.to_vec();
                for _ in from..to {
                    out = vec_mat(&out, trans);
                }
                Ok(out)
            }
            Dynamics::Independent { .. } => {
                let mass: f64 = v.iter().sum();
                Ok(self.law_at(to)?.into_iter().map(|p| p * mass).collect())
            }
        }
    }

    /// Joint law of the emitted symbols at strictly increasing `indices`.
    pub fn joint_symbols(&self, indices: &[i64]) -> Result<Vec<(Vec<usize>, f64)>> {
        if indices.is_empty() {
            return Ok(vec![(Vec::new(), 1.0)]);
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("indices must be strictly increasing");
        }
        let mut layer: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
        layer.insert(Vec::new(), self.law_at(indices[0])?);
        let mut prev = indices[0];
        for (pos, &idx) in indices.iter().enumerate() {
            let mut next = BTreeMap::new();
            for (tuple, v) in layer {
                let v = if pos == 0 { v } else { self.propagate(&v, prev, idx)? };
                for s in 0..self.alphabet.len() {
                    let masked: Vec<f64> =
                        v.iter().zip(&self.emit).map(|(p, e)| if *e == s { *p } else { 0.0 }).collect();
                    if masked.iter().any(|p| *p > 0.0) {
                        let mut t = tuple.clone();
                        t.push(s);
                        next.insert(t, masked);
                    }
                }
            }
            layer = next;
            prev = idx;
        }
        Ok(layer.into_iter().map(|(t, v)| (t, v.iter().sum())).collect())
    }

    /// log E[∏_l g_l(Y_{i_l})] for strictly increasing indices and nonnegative weights
    /// given per symbol. Returns `-inf` when the expectation is zero.
    pub fn log_expect_product(&self, indices: &[i64], weights: &[Vec<f64>]) -> Result<f64> {
        if indices.len() != weights.len() {
            return invalid("one weight vector per index required");
        }
        if indices.is_empty() {
            return Ok(0.0);
        }
        let mut log_scale = 0.0;
        let mut v = self.law_at(indices[0])?;
        for (pos, (&idx, w)) in indices.iter().zip(weights).enumerate() {
            if pos > 0 {
                v = self.propagate(&v, indices[pos - 1], idx)?;
            }
            for (p, e) in v.iter_mut().zip(&self.emit) {
                *p *= w[*e];
            }
            let s: f64 = v.iter().sum();
            if s == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            log_scale += s.ln();
            v.iter_mut().for_each(|p| *p /= s);
        }
        Ok(log_scale)
    }

    /// Marginal law of the emitted symbol at `index`.
    pub fn symbol_law(&self, index: i64) -> Result<Vec<f64>> {
        let h = self.law_at(index)?;
        let mut out = vec![0.0; self.alphabet.len()];
        for (p, e) in h.iter().zip(&self.emit) {
            out[*e] += p;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::Law;

    #[test]
    fn moving_sum_marginal_and_pair() {
        let spec = EnvironmentSpec::MovingSum { order: 1, base: Law::Bernoulli { p: 0.5 } };
        let hc = HiddenChain::from_spec(&spec).unwrap();
        assert_eq!(hc.symbol_law(3).unwrap(), vec![0.25, 0.5, 0.25]);
        let joint = hc.joint_symbols(&[0, 1]).unwrap();
        // P(Y0 = 0, Y1 = 0) = P(Z_{-1} = Z_0 = Z_1 = 0) = 1/8.
        let p00 = joint.iter().find(|(t, _)| t == &vec![0, 0]).unwrap().1;
        assert_eq!(p00, 0.125);
        // (Y0 = 0, Y1 = 2) is impossible.
        assert!(joint.iter().all(|(t, _)| t != &vec![0, 2]));
    }

    #[test]
    fn product_expectation_felsmann() {
        let spec = EnvironmentSpec::MovingSum { order: 1, base: Law::Bernoulli { p: 0.5 } };
        let hc = HiddenChain::from_spec(&spec).unwrap();
        let w = vec![vec![3.0, 0.0, 0.0]; 10];
        let idx: Vec<i64> = (1..=10).collect();
        let v = hc.log_expect_product(&idx, &w).unwrap().exp();
        assert!((v / (0.5 * 1.5f64.powi(10)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn markov_law_moves_from_initial() {
        let spec = EnvironmentSpec::FiniteMarkov {
            alphabet: vec![0.0, 1.0],
            transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            initial: vec![1.0, 0.0],
        };
        let hc = HiddenChain::from_spec(&spec).unwrap();
        assert_eq!(hc.symbol_law(3).unwrap(), vec![0.0, 1.0]);
        assert!(hc.law_at(-1).is_err());
    }
}
