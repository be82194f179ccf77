//! Exact ground truth: policy evaluation, the constrained comparator behind
//! the regret metric, and brute-force verifiers for tiny instances.
//!
//! Everything here reads the true transition kernel and is therefore
//! simulator-side only.

use std::sync::Arc;

use crate::error::{CmdpError, Result};
use crate::model::{CmdpInstance, PolicyTable, Table};

/// Exact values of one policy under one signal. `v` has `H + 1` layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DpResult {
    pub v: Vec<Vec<f64>>,
    pub q: Table,
}

impl DpResult {
    pub fn initial_value(&self, inst: &CmdpInstance) -> f64 {
        self.v[0][inst.initial_state()]
    }
}

/// Backward recursion `Q_h = l_h + P_h V_{h+1}`, `V_h = <pi_h, Q_h>`.
pub fn dp_evaluate(inst: &CmdpInstance, policy: &PolicyTable, signal: &Table) -> DpResult {
    let (hz, ns, na) = (inst.horizon(), inst.num_states(), inst.num_actions());
    let mut v = vec![vec![0.0; ns]; hz + 1];
    let mut q = vec![vec![vec![0.0; na]; ns]; hz];
    for h in (0..hz).rev() {
        for s in 0..ns {
            let mut acc = 0.0;
            for a in 0..na {
                let next: f64 = inst.transitions(h, s, a).iter().map(|(n, p)| p * v[h + 1][*n]).sum();
                q[h][s][a] = signal[h][s][a] + next;
                acc += policy.prob(h, s, a) * q[h][s][a];
            }
            v[h][s] = acc;
        }
    }
    DpResult { v, q }
}

// a later action must beat the incumbent by this much to win a tie
const TIE_TOL: f64 = 1e-12;

/// Deterministic policy maximizing `reward + lam * g` by backward DP.
/// Ties go to the lowest action index.
pub fn lagrangian_greedy(inst: &CmdpInstance, reward: &Table, lam: f64) -> PolicyTable {
    let g = inst.constraint();
    greedy_for(inst, |h, s, a| reward[h][s][a] + lam * g[h][s][a])
}

/// Deterministic policy maximizing `V^g`.
pub fn constraint_greedy(inst: &CmdpInstance) -> PolicyTable {
    let g = inst.constraint();
    greedy_for(inst, |h, s, a| g[h][s][a])
}

fn greedy_for(inst: &CmdpInstance, signal: impl Fn(usize, usize, usize) -> f64) -> PolicyTable {
    let (hz, ns, na) = (inst.horizon(), inst.num_states(), inst.num_actions());
    let mut v_next = vec![0.0; ns];
    let mut choice = vec![vec![0usize; ns]; hz];
    for h in (0..hz).rev() {
        let mut v = vec![0.0; ns];
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            for a in 0..na {
                let q = signal(h, s, a) + inst.transitions(h, s, a).iter().map(|(n, p)| p * v_next[*n]).sum::<f64>();
                if q > best + TIE_TOL {
                    best = q;
                    choice[h][s] = a;
                }
            }
            v[s] = best;
        }
        v_next = v;
    }
    PolicyTable::deterministic(&choice, na)
}

/// Optimal constrained policy as a mixture of two deterministic policies.
#[derive(Debug, Clone)]
pub struct ComparatorResult {
    pub policy_lo: PolicyTable,
    pub policy_hi: PolicyTable,
    /// Probability of playing `policy_hi`.
    pub mix_weight: f64,
    pub value_r: f64,
    pub value_g: f64,
    pub lambda_star: f64,
    /// Slater margin `max_pi V^g(s1) - b`.
    pub gamma: f64,
}

impl ComparatorResult {
    /// Value of the mixture under an arbitrary reward table.
    pub fn value_under(&self, inst: &CmdpInstance, reward: &Table) -> f64 {
        let hi = dp_evaluate(inst, &self.policy_hi, reward).initial_value(inst);
        if self.mix_weight >= 1.0 {
            return hi;
        }
        let lo = dp_evaluate(inst, &self.policy_lo, reward).initial_value(inst);
        self.mix_weight * hi + (1.0 - self.mix_weight) * lo
    }
}

fn values(inst: &CmdpInstance, policy: &PolicyTable, reward: &Table) -> (f64, f64) {
    let r = dp_evaluate(inst, policy, reward).initial_value(inst);
    let g = dp_evaluate(inst, policy, inst.constraint()).initial_value(inst);
    (r, g)
}

const MAX_BISECTIONS: usize = 200;

/// Solves `max V^r subject to V^g(s1) >= b` by bisection on the Lagrange
/// multiplier. `tol` bounds the final multiplier bracket and sets the
/// search ceiling `2H / tol`.
pub fn constrained_comparator(inst: &CmdpInstance, reward: &Table, tol: f64) -> Result<ComparatorResult> {
    if !(tol > 0.0) {
        return Err(CmdpError::InvalidParameter {
            name: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    let b = inst.threshold();
    let g_policy = constraint_greedy(inst);
    let (_, max_g) = values(inst, &g_policy, reward);
    if max_g < b {
        return Err(CmdpError::Infeasible {
            max_value: max_g,
            threshold: b,
        });
    }
    let gamma = max_g - b;

    let unconstrained = lagrangian_greedy(inst, reward, 0.0);
    let (r0, g0) = values(inst, &unconstrained, reward);
    if g0 >= b {
        return Ok(ComparatorResult {
            policy_lo: unconstrained.clone(),
            policy_hi: unconstrained,
            mix_weight: 1.0,
            value_r: r0,
            value_g: g0,
            lambda_star: 0.0,
            gamma,
        });
    }

    let lam_max = 2.0 * inst.horizon() as f64 / tol;
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut hi_policy = lagrangian_greedy(inst, reward, hi);
    let mut hi_vals = values(inst, &hi_policy, reward);
    while hi_vals.1 < b {
        lo = hi;
        hi *= 2.0;
        if hi > lam_max {
            hi = lam_max;
            hi_policy = g_policy.clone();
            hi_vals = values(inst, &hi_policy, reward);
            break;
        }
        hi_policy = lagrangian_greedy(inst, reward, hi);
        hi_vals = values(inst, &hi_policy, reward);
    }
    let mut lo_policy = lagrangian_greedy(inst, reward, lo);
    let mut lo_vals = values(inst, &lo_policy, reward);
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let policy = lagrangian_greedy(inst, reward, mid);
        let vals = values(inst, &policy, reward);
        if vals.1 >= b {
            hi = mid;
            hi_policy = policy;
            hi_vals = vals;
        } else {
            lo = mid;
            lo_policy = policy;
            lo_vals = vals;
        }
    }

    let (r_hi, g_hi) = hi_vals;
    let (r_lo, g_lo) = lo_vals;
    let w = ((b - g_lo) / (g_hi - g_lo)).clamp(0.0, 1.0);
    Ok(ComparatorResult {
        policy_lo: lo_policy,
        policy_hi: hi_policy,
        mix_weight: w,
        value_r: w * r_hi + (1.0 - w) * r_lo,
        value_g: w * g_hi + (1.0 - w) * g_lo,
        lambda_star: 0.5 * (lo + hi),
        gamma,
    })
}

/// Upper limit on the number of deterministic policies enumerated.
pub const MAX_ENUMERATION: u128 = 100_000;

/// Values `(V^r(s1), V^g(s1))` of every deterministic Markov policy.
pub fn enumerate_deterministic(inst: &CmdpInstance, reward: &Table) -> Result<Vec<(f64, f64)>> {
    let (hz, ns, na) = (inst.horizon(), inst.num_states(), inst.num_actions());
    let count = (na as u128).checked_pow((hz * ns) as u32).unwrap_or(u128::MAX);
    if count > MAX_ENUMERATION {
        return Err(CmdpError::TooLarge(count));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut choice = vec![vec![0usize; ns]; hz];
    for code in 0..count {
        let mut rest = code;
        for layer in choice.iter_mut() {
            for c in layer.iter_mut() {
                *c = (rest % na as u128) as usize;
                rest /= na as u128;
            }
        }
        let policy = PolicyTable::deterministic(&choice, na);
        out.push(values(inst, &policy, reward));
    }
    Ok(out)
}

/// Best feasible value over all mixtures of two deterministic policies,
/// found by exhaustive enumeration.
pub fn brute_force_comparator(inst: &CmdpInstance, reward: &Table) -> Result<f64> {
    let b = inst.threshold();
    let all = enumerate_deterministic(inst, reward)?;
    let (feasible, infeasible): (Vec<_>, Vec<_>) = all.into_iter().partition(|(_, g)| *g >= b);
    let mut best = feasible.iter().map(|(r, _)| *r).fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err(CmdpError::Infeasible {
            max_value: infeasible.iter().map(|(_, g)| *g).fold(f64::NEG_INFINITY, f64::max),
            threshold: b,
        });
    }
    // a mixture only helps if the infeasible side earns more reward
    for &(r_f, g_f) in &feasible {
        for &(r_i, g_i) in &infeasible {
            if r_i <= r_f {
                continue;
            }
            let w = (b - g_i) / (g_f - g_i);
            best = best.max(w * r_f + (1.0 - w) * r_i);
        }
    }
    Ok(best)
}

/// Cumulative `Regret(k')` and `Violation(k')` curves from exact
/// per-episode values.
pub fn metrics(v_star_r: &[f64], v_true_r: &[f64], v_true_g: &[f64], threshold: f64) -> (Vec<f64>, Vec<f64>) {
    let mut regret = Vec::with_capacity(v_true_r.len());
    let mut violation = Vec::with_capacity(v_true_r.len());
    let (mut reg, mut gap) = (0.0, 0.0);
    for ((star, r), g) in v_star_r.iter().zip(v_true_r).zip(v_true_g) {
        reg += star - r;
        gap += threshold - g;
        regret.push(reg);
        violation.push(gap.max(0.0));
    }
    (regret, violation)
}

/// Memoizes the comparator's value per distinct reward table.
#[derive(Debug)]
pub struct ComparatorValues<'a> {
    inst: &'a CmdpInstance,
    comparator: &'a ComparatorResult,
    cache: Vec<(Arc<Table>, f64)>,
}

impl<'a> ComparatorValues<'a> {
    pub fn new(inst: &'a CmdpInstance, comparator: &'a ComparatorResult) -> Self {
        Self {
            inst,
            comparator,
            cache: Vec::new(),
        }
    }

    pub fn at_episode(&mut self, k: usize) -> f64 {
        let table = self.inst.reward_table(k);
        if let Some((_, v)) = self.cache.iter().find(|(t, _)| Arc::ptr_eq(t, table)) {
            return *v;
        }
        let v = self.comparator.value_under(self.inst, table);
        self.cache.push((Arc::clone(table), v));
        v
    }
}
