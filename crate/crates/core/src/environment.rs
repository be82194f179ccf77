//! Concrete instances and seeded rollouts.
//!
//! The benchmark is a survival chain: from `s < H` the agent either advances
//! to `s + 1` or drops into the absorbing state `H + 1`, where reward is 1
//! and the constraint signal is 0. Rewards on the chain alternate between
//! favouring and penalizing "aggressive" actions every `block_length`
//! episodes.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CmdpError, Result};
use crate::model::{
    validate_instance, CmdpInstance, EpisodeRecord, FeatureMap, PolicyTable, RewardSchedule, Table,
};

/// Parameters of the alternating-reward survival chain.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkParams {
    pub horizon: usize,
    pub dim: usize,
    pub threshold: f64,
    pub block_length: usize,
    pub p0: f64,
    pub slope: f64,
    pub reward_scale: f64,
    /// Scale `c` in `theta*_h = c * (p0, -slope, ..., -slope)`.
    pub theta_scale: f64,
    /// Declared bound `B` on `||theta*_h||_2`.
    pub param_bound: f64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self {
            horizon: 10,
            dim: 5,
            threshold: 6.0,
            block_length: 10,
            p0: 0.95,
            slope: 0.01,
            reward_scale: 0.4,
            theta_scale: 2.3,
            param_bound: 3.0,
        }
    }
}

impl BenchmarkParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(CmdpError::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if self.dim < 2 {
            return bad("d", "must be at least 2");
        }
        if self.dim > 17 {
            return bad("d", "at most 2^16 actions are supported");
        }
        if self.horizon < 1 {
            return bad("H", "must be at least 1");
        }
        if self.block_length < 1 {
            return bad("block_length", "must be at least 1");
        }
        let spread = self.slope * (self.dim - 1) as f64;
        if !(self.p0 - spread > 0.0 && self.p0 + spread < 1.0) {
            return bad("p0", "p0 -/+ slope*(d-1) must stay inside (0, 1)");
        }
        if !(self.theta_scale > 0.0 && self.param_bound > 0.0) {
            return bad("theta_scale", "theta_scale and B must be positive");
        }
        if !(0.0..=1.0).contains(&self.reward_scale) {
            return bad("reward_scale", "must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn num_actions(&self) -> usize {
        1 << (self.dim - 1)
    }
}

/// Sign vector of action `index`; the first coordinate is most significant,
/// so index 0 is all `-1` and the last index is all `+1`.
pub fn sign_action(index: usize, len: usize) -> Vec<f64> {
    (0..len)
        .map(|j| if index >> (len - 1 - j) & 1 == 1 { 1.0 } else { -1.0 })
        .collect()
}

/// Builds the alternating-reward survival chain and checks it with
/// [`validate_instance`].
pub fn build_benchmark_instance(p: &BenchmarkParams) -> Result<CmdpInstance> {
    p.validate()?;
    let hz = p.horizon;
    let d = p.dim;
    let na = p.num_actions();
    let ns = hz + 2;
    let c = p.theta_scale;

    let mut theta = DVector::from_element(d, -p.slope);
    theta[0] = p.p0;
    theta *= c;
    let absorb_phi = &theta / theta.norm_squared();

    let actions: Vec<Vec<f64>> = (0..na).map(|i| sign_action(i, d - 1)).collect();
    let mut entries = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for action in &actions {
            if s < hz {
                let mut advance = DVector::zeros(d);
                let mut drop = DVector::zeros(d);
                advance[0] = 1.0 / c;
                drop[0] = (1.0 - p.p0) / p.p0 / c;
                for (j, x) in action.iter().enumerate() {
                    advance[j + 1] = x / c;
                    drop[j + 1] = -x / c;
                }
                entries.push(vec![(s + 1, advance), (hz + 1, drop)]);
            } else {
                entries.push(vec![(s, absorb_phi.clone())]);
            }
        }
    }
    let features = FeatureMap::new(d, ns, na, entries)?;

    let share: Vec<f64> = actions
        .iter()
        .map(|a| a.iter().map(|x| (x + 1.0) / (2.0 * (d - 1) as f64)).sum())
        .collect();
    let layer = |chain: &dyn Fn(usize) -> f64, absorbing_h: f64, absorbing_fail: f64| -> Vec<Vec<f64>> {
        (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| match s {
                        _ if s < hz => chain(a),
                        _ if s == hz => absorbing_h,
                        _ => absorbing_fail,
                    })
                    .collect()
            })
            .collect()
    };
    let even: Table = vec![layer(&|a| p.reward_scale * share[a], 0.0, 1.0); hz];
    let odd: Table = vec![layer(&|a| p.reward_scale * (1.0 - share[a]), 0.0, 1.0); hz];
    let constraint: Table = vec![layer(&|a| share[a], 0.0, 0.0); hz];

    let inst = CmdpInstance::new(
        hz,
        features,
        vec![theta; hz],
        p.param_bound,
        RewardSchedule::Alternating {
            block_length: p.block_length,
            even: Arc::new(even),
            odd: Arc::new(odd),
        },
        constraint,
        p.threshold,
        0,
    )?;
    let report = validate_instance(&inst, 64, &mut ChaCha8Rng::seed_from_u64(0x5eed));
    if !report.passed() {
        return Err(CmdpError::InvalidInstance(report.failures.join("; ")));
    }
    Ok(inst)
}

/// Constraint threshold of the tiny instance; binding for the reward-greedy policy.
pub const TINY_THRESHOLD: f64 = 1.5;

/// Fixed `H = 3`, `|S| = 4`, `|A| = 2`, `d = 2` instance used as an
/// enumeration testbed. Transitions mix two base kernels,
/// `P_h = w_h P1 + (1 - w_h) P2`, with `phi = (P1, P2) / sqrt(2)`.
pub fn build_tiny_instance() -> CmdpInstance {
    const NS: usize = 4;
    const NA: usize = 2;
    const HZ: usize = 3;
    let base1 = |s: usize, a: usize| -> Vec<(usize, f64)> {
        match a {
            0 => vec![((s + 1) % NS, 1.0)],
            _ => vec![(s, 0.5), ((s + 2) % NS, 0.5)],
        }
    };
    let base2 = |s: usize, a: usize| -> Vec<(usize, f64)> {
        match a {
            0 => vec![(s, 0.6), ((s + 3) % NS, 0.4)],
            _ => vec![((s + 1) % NS, 1.0)],
        }
    };
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut entries = Vec::with_capacity(NS * NA);
    for s in 0..NS {
        for a in 0..NA {
            let mut support: Vec<(usize, DVector<f64>)> = Vec::new();
            let mut add = |next: usize, coord: usize, p: f64| {
                if let Some((_, phi)) = support.iter_mut().find(|(n, _)| *n == next) {
                    phi[coord] += p * scale;
                } else {
                    let mut phi = DVector::zeros(2);
                    phi[coord] = p * scale;
                    support.push((next, phi));
                }
            };
            for (next, p) in base1(s, a) {
                add(next, 0, p);
            }
            for (next, p) in base2(s, a) {
                add(next, 1, p);
            }
            entries.push(support);
        }
    }
    let features = FeatureMap::new(2, NS, NA, entries).expect("tiny feature map is well formed");
    let theta_star = [0.8, 0.5, 0.2]
        .iter()
        .map(|w| DVector::from_vec(vec![w / scale, (1.0 - w) / scale]))
        .collect();

    let reward_row = [[0.9, 0.2], [0.7, 0.1], [0.5, 0.3], [0.3, 0.0]];
    let constraint_row = [[0.1, 0.8], [0.2, 0.9], [0.0, 0.6], [0.3, 0.7]];
    let to_table = |rows: &[[f64; 2]; 4]| -> Table {
        vec![rows.iter().map(|r| r.to_vec()).collect(); HZ]
    };

    CmdpInstance::new(
        HZ,
        features,
        theta_star,
        2.0,
        RewardSchedule::Fixed(Arc::new(to_table(&reward_row))),
        to_table(&constraint_row),
        TINY_THRESHOLD,
        0,
    )
    .expect("tiny instance is well formed")
}

/// Counter-style RNG: episode `k` of seed `s` always draws from the same
/// ChaCha stream, independent of what ran before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn episode(&self, k: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        rng
    }
}

// tolerance on sampled transition mass before a rollout refuses to continue
const ROLLOUT_MASS_TOL: f64 = 1e-9;

fn sample_index<R: Rng + ?Sized>(rng: &mut R, weights: impl Iterator<Item = (usize, f64)> + Clone) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for (idx, w) in weights {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(idx);
        if u < acc {
            return idx;
        }
    }
    // u landed in the rounding gap above the cumulative mass
    last.expect("distribution has positive mass")
}

/// Samples one episode under `policy` and attaches the rewards of episode `k`.
pub fn rollout(
    inst: &CmdpInstance,
    policy: &PolicyTable,
    k: usize,
    rng: &RngStream,
) -> Result<EpisodeRecord> {
    let hz = inst.horizon();
    if policy.horizon() != hz {
        return Err(CmdpError::InvalidParameter {
            name: "policy",
            reason: format!("horizon {} does not match instance horizon {hz}", policy.horizon()),
        });
    }
    let mut gen = rng.episode(k);
    let mut states = Vec::with_capacity(hz + 1);
    let mut actions = Vec::with_capacity(hz);
    let mut s = inst.initial_state();
    states.push(s);
    for h in 0..hz {
        let row = policy.row(h, s);
        let a = sample_index(&mut gen, row.iter().copied().enumerate());
        let tr = inst.transitions(h, s, a);
        let mass: f64 = tr.iter().map(|(_, p)| p).sum();
        if (mass - 1.0).abs() > ROLLOUT_MASS_TOL {
            return Err(CmdpError::CorruptTransition { h, s, a, mass });
        }
        s = sample_index(&mut gen, tr.iter().copied());
        actions.push(a);
        states.push(s);
    }
    Ok(EpisodeRecord {
        k,
        states,
        actions,
        revealed_rewards: Arc::clone(inst.reward_table(k)),
    })
}
