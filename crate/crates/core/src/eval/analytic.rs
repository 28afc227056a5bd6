//! Exact long-run reward rates for tabular policies on matrix games.
//!
//! A pair of stateless policies that see the previous joint action turns the
//! game into a Markov chain over `{start} ∪ joint actions`, where entering
//! state `(a1, a2)` pays `payoff(a1, a2)`. The long-run rate from the start
//! state is the absorption-weighted average of each recurrent class's
//! stationary expected payoff.

use alloc::vec;
use alloc::vec::Vec;

use crate::env::MatrixGame;
use crate::policy::{Architecture, PolicyParams};
use crate::pomg::Seat;
use crate::{Error, Result};

/// Exact per-player long-run rate of a policy pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticRate {
    pub rates: [f64; 2],
    /// Long-run fraction of turns spent in each joint action (`a1 * n + a2`).
    pub occupancy: Vec<f64>,
}

/// Transition probabilities below this are treated as impossible, so that
/// saturated softmax policies behave as the deterministic policies they stand
/// for instead of leaking mass over ~1e20 turns.
pub const NEGLIGIBLE: f64 = 1e-15;

/// Transition matrix of the chain; the last state is the start state.
pub fn transition_matrix(game: &MatrixGame, p1: &PolicyParams, p2: &PolicyParams) -> Result<Vec<Vec<f64>>> {
    let n = game.action_count();
    let states = n * n + 1;
    for p in [p1, p2] {
        let fits = matches!(p.architecture(), Architecture::Tabular { inputs, actions } if *inputs == states && *actions == n);
        if !fits {
            return Err(Error::invalid("policy", "analytic rates need tabular policies over the matrix observation"));
        }
    }
    let mut obs = vec![0.0; states];
    let mut probs_at = |p: &PolicyParams, index: usize| -> Result<Vec<f64>> {
        obs.fill(0.0);
        obs[index] = 1.0;
        Ok(p.forward(&obs)?.probs().to_vec())
    };
    let mut matrix = vec![vec![0.0; states]; states];
    for (s, row) in matrix.iter_mut().enumerate() {
        let previous = (s < n * n).then(|| [s / n, s % n]);
        let pi1 = probs_at(p1, game.observation_index(Seat::First, previous))?;
        let pi2 = probs_at(p2, game.observation_index(Seat::Second, previous))?;
        for a1 in 0..n {
            for a2 in 0..n {
                let q = pi1[a1] * pi2[a2];
                row[a1 * n + a2] = if q < NEGLIGIBLE { 0.0 } else { q };
            }
        }
        let total: f64 = row.iter().sum();
        for q in row.iter_mut() {
            *q /= total;
        }
    }
    Ok(matrix)
}

/// States reachable from each state through positive-probability moves.
fn reachability(p: &[Vec<f64>]) -> Vec<Vec<bool>> {
    let n = p.len();
    let mut reach: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j || p[i][j] > 0.0).collect()).collect();
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

/// Closed communicating classes.
fn recurrent_classes(p: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let reach = reachability(p);
    let n = p.len();
    let mut assigned = vec![false; n];
    let mut classes = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &class {
            assigned[j] = true;
        }
        let closed = class.iter().all(|&s| (0..n).all(|j| p[s][j] == 0.0 || class.contains(&j)));
        if closed {
            classes.push(class);
        }
    }
    classes
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub(crate) fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| libm::fabs(a[i][col]).total_cmp(&libm::fabs(a[j][col])))
            .expect("non-empty");
        if libm::fabs(a[pivot][col]) < 1e-300 {
            return Err(Error::invalid("chain", "singular linear system"));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Ok(x)
}

/// Stationary distribution of the chain restricted to a closed class.
fn stationary(p: &[Vec<f64>], class: &[usize]) -> Result<Vec<f64>> {
    let m = class.len();
    // balance equations pi (P - I) = 0, with the last one replaced by sum(pi) = 1
    let mut a = vec![vec![0.0; m]; m];
    for (r, &j) in class.iter().enumerate() {
        for (c, &i) in class.iter().enumerate() {
            a[r][c] = p[i][j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    a[m - 1] = vec![1.0; m];
    let mut b = vec![0.0; m];
    b[m - 1] = 1.0;
    solve(a, b)
}

/// Probability of ending up in `class` from every state.
fn absorption(p: &[Vec<f64>], class: &[usize], classes: &[Vec<usize>]) -> Result<Vec<f64>> {
    let n = p.len();
    let recurrent: Vec<bool> = (0..n).map(|s| classes.iter().any(|c| c.contains(&s))).collect();
    let transient: Vec<usize> = (0..n).filter(|&s| !recurrent[s]).collect();
    let mut h: Vec<f64> = (0..n).map(|s| if class.contains(&s) { 1.0 } else { 0.0 }).collect();
    if transient.is_empty() {
        return Ok(h);
    }
    // (I - P_TT) h_T = P_T,class 1
    let m = transient.len();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for (r, &i) in transient.iter().enumerate() {
        for (c, &j) in transient.iter().enumerate() {
            a[r][c] = if i == j { 1.0 } else { 0.0 } - p[i][j];
        }
        b[r] = class.iter().map(|&j| p[i][j]).sum();
    }
    let x = solve(a, b)?;
    for (r, &i) in transient.iter().enumerate() {
        h[i] = x[r];
    }
    Ok(h)
}

/// Long-run rate of `p1` against `p2` starting from the beginning of the game.
pub fn analytic_rate(game: &MatrixGame, p1: &PolicyParams, p2: &PolicyParams) -> Result<AnalyticRate> {
    let p = transition_matrix(game, p1, p2)?;
    let n = game.action_count();
    let start = n * n;
    let classes = recurrent_classes(&p);
    let mut occupancy = vec![0.0; n * n];
    for class in &classes {
        let weight = absorption(&p, class, &classes)?[start];
        if weight == 0.0 {
            continue;
        }
        let pi = stationary(&p, class)?;
        for (&s, &w) in class.iter().zip(&pi) {
            occupancy[s] += weight * w;
        }
    }
    let mut rates = [0.0; 2];
    for (s, &w) in occupancy.iter().enumerate() {
        let r = game.payoff(s / n, s % n);
        rates[0] += w * r[0];
        rates[1] += w * r[1];
    }
    Ok(AnalyticRate { rates, occupancy })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(a: usize) -> PolicyParams {
        PolicyParams::constant(5, 2, a, 50.0).unwrap()
    }

    /// Cooperate at the start, then copy the partner's previous move.
    pub(crate) fn tit_for_tat() -> PolicyParams {
        // own-perspective index: mine * 2 + theirs
        let c = vec![50.0, 0.0];
        let d = vec![0.0, 50.0];
        PolicyParams::tabular(&[c.clone(), d.clone(), c.clone(), d, c]).unwrap()
    }

    #[test]
    fn deterministic_pairs() {
        let g = MatrixGame::prisoners_dilemma();
        assert_eq!(analytic_rate(&g, &constant(0), &constant(0)).unwrap().rates, [2.0, 2.0]);
        assert_eq!(analytic_rate(&g, &constant(0), &constant(1)).unwrap().rates, [0.0, 3.0]);
        assert_eq!(analytic_rate(&g, &constant(1), &constant(1)).unwrap().rates, [1.0, 1.0]);
    }

    #[test]
    fn tit_for_tat_against_defector_settles_on_mutual_defection() {
        let g = MatrixGame::prisoners_dilemma();
        let r = analytic_rate(&g, &tit_for_tat(), &constant(1)).unwrap();
        assert!((r.rates[0] - 1.0).abs() < 1e-12 && (r.rates[1] - 1.0).abs() < 1e-12, "{:?}", r.rates);
    }

    #[test]
    fn reducible_chain_keeps_start_dependence() {
        // both copy the partner exactly: from the start (C, C) forever
        let g = MatrixGame::prisoners_dilemma();
        let tft = tit_for_tat();
        let r = analytic_rate(&g, &tft, &tft).unwrap();
        assert!((r.rates[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_against_cooperator() {
        let g = MatrixGame::prisoners_dilemma();
        let half = PolicyParams::zeros(Architecture::Tabular { inputs: 5, actions: 2 }).unwrap();
        let r = analytic_rate(&g, &half, &constant(0)).unwrap();
        assert!((r.rates[0] - 2.5).abs() < 1e-12);
        assert!((r.rates[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solver() {
        let x = solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }
}
