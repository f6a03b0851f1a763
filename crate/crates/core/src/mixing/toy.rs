//! A binary response driven by a two-state Markov environment:
//! X_{t+1} = 1{ε_{t+1} < p[X_t][Y_t]}. Every law here is computed exactly.

use serde::{Deserialize, Serialize};

use super::{alpha_between, BlockMeta, CouplingBoundSeq, DependenceTable, Provenance};
use crate::error::Result;
use crate::finite::HiddenChain;
use crate::process::{EnvValue, IterationMap, StateSpace, StateValue};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdToy {
    pub y_transition: [[f64; 2]; 2],
    pub y_initial: [f64; 2],
    /// p[x][y] = P(X_{t+1} = 1 | X_t = x, Y_t = y).
    pub p: [[f64; 2]; 2],
    pub x0: usize,
    /// Anchor x of the coupling condition.
    pub anchor: usize,
    pub horizon: usize,
}

impl Default for ThresholdToy {
    fn default() -> Self {
        ThresholdToy {
            y_transition: [[0.9, 0.1], [0.1, 0.9]],
            y_initial: [0.5, 0.5],
            p: [[0.2, 0.7], [0.5, 0.9]],
            x0: 0,
            anchor: 0,
            horizon: 5,
        }
    }
}

impl IterationMap for ThresholdToy {
    fn update(&self, x: &StateValue, y: &EnvValue, u: f64) -> StateValue {
        let (xi, yi) = (x.x() as usize, y.value() as usize);
        StateValue::scalar((u < self.p[xi][yi]) as u8 as f64)
    }

    fn state_space(&self) -> StateSpace {
        StateSpace::NonNegative
    }
}

impl ThresholdToy {
    /// Hidden state h = 2y + x for the pair (Y_t, X_t), emitting X_t.
    pub fn response_chain(&self) -> Result<HiddenChain> {
        let mut init = vec![0.0; 4];
        for y in 0..2 {
            init[2 * y + self.x0] = self.y_initial[y];
        }
        let mut trans = vec![vec![0.0; 4]; 4];
        for y in 0..2 {
            for x in 0..2 {
                let q = self.p[x][y];
                for y2 in 0..2 {
                    trans[2 * y + x][2 * y2 + 1] += self.y_transition[y][y2] * q;
                    trans[2 * y + x][2 * y2] += self.y_transition[y][y2] * (1.0 - q);
                }
            }
        }
        HiddenChain::homogeneous(vec![0.0, 1.0], vec![0, 1, 0, 1], init, trans)
    }

    pub fn environment_chain(&self) -> Result<HiddenChain> {
        HiddenChain::homogeneous(
            vec![0.0, 1.0],
            vec![0, 1],
            self.y_initial.to_vec(),
            self.y_transition.iter().map(|r| r.to_vec()).collect(),
        )
    }

    /// α^X(n) = max_j α(σ(X_0..X_j), σ(X_{j+n}..X_H)).
    pub fn alpha_response(&self, n: usize) -> Result<f64> {
        let chain = self.response_chain()?;
        let h = self.horizon as i64;
        let mut best: f64 = 0.0;
        for j in 0..=(h - n as i64) {
            let past: Vec<i64> = (0..=j).collect();
            let future: Vec<i64> = (j + n as i64..=h).collect();
            let meta = BlockMeta { j, gap: n, past_len: past.len(), future_len: future.len() };
            best = best.max(alpha_between(&chain, &past, &future, meta)?);
        }
        Ok(best)
    }

    /// α^Ỹ(k) = max_j α(σ(Ỹ_0..Ỹ_{j-1}), σ(Ỹ_{j+k-1}..Ỹ_{H-1})) for k = 1..=H+1.
    ///
    /// Ỹ_t = (Y_t, ε_{t+1}) and the noise coordinates are independent of
    /// everything else, so the coefficient reduces to that of Y.
    pub fn alpha_environment(&self) -> Result<DependenceTable> {
        let chain = self.environment_chain()?;
        let h = self.horizon as i64;
        let mut sup = Vec::new();
        for k in 1..=h + 1 {
            let mut best: f64 = 0.0;
            for j in 1..=h {
                let past: Vec<i64> = (0..j).collect();
                let future: Vec<i64> = (j + k - 1..h).collect();
                let meta = BlockMeta { j, gap: k as usize, past_len: past.len(), future_len: future.len() };
                best = best.max(alpha_between(&chain, &past, &future, meta)?);
            }
            sup.push(best);
        }
        DependenceTable::from_sup(sup, Provenance::Exact)
    }

    /// b(k) = max_j P(Z^{X_j}_{j,j+k} ≠ Z^{anchor}_{j,j+k}) under shared noise, k = 0..=H.
    pub fn coupling_bound(&self) -> Result<CouplingBoundSeq> {
        let chain = self.response_chain()?;
        let h = self.horizon;
        let mut b = Vec::with_capacity(h + 1);
        for k in 0..=h {
            let mut best: f64 = 0.0;
            for j in 0..=(h - k) {
                let law = chain.law_at(j as i64)?;
                // Joint state (y, a, b) indexed 4y + 2a + b.
                let mut v = [0.0; 8];
                for y in 0..2 {
                    for a in 0..2 {
                        v[4 * y + 2 * a + self.anchor] += law[2 * y + a];
                    }
                }
                for _ in 0..k {
                    let mut next = [0.0; 8];
                    for y in 0..2 {
                        for a in 0..2 {
                            for bb in 0..2 {
                                let m = v[4 * y + 2 * a + bb];
                                if m == 0.0 {
                                    continue;
                                }
                                let (pa, pb) = (self.p[a][y], self.p[bb][y]);
                                let moves = [
                                    (1, 1, pa.min(pb)),
                                    (1, 0, (pa - pb).max(0.0)),
                                    (0, 1, (pb - pa).max(0.0)),
                                    (0, 0, 1.0 - pa.max(pb)),
                                ];
                                for y2 in 0..2 {
                                    for (a2, b2, q) in moves {
                                        next[4 * y2 + 2 * a2 + b2] += m * self.y_transition[y][y2] * q;
                                    }
                                }
                            }
                        }
                    }
                    v = next;
                }
                let differ: f64 = (0..2).map(|y| v[4 * y + 1] + v[4 * y + 2]).sum();
                best = best.max(differ);
            }
            b.push(best.clamp(0.0, 1.0));
        }
        CouplingBoundSeq::new(b, 0)
    }
}
