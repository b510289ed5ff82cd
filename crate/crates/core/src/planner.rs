//! Layer-wise N:M assignment.
//!
//! Each layer draws a pattern from a small candidate set; the per-layer cost
//! `alpha * |N - k*O| + beta * |M - h*(1 - ND)|` pulls N toward the outlier
//! presence O and M toward the outlier clustering (1 - ND). The constrained
//! mode minimizes total cost subject to a mean-sparsity target.
//!
//! Candidate sparsities are all multiples of 1/8, so the constrained problem
//! is solved exactly by dynamic programming over (layer index, total sparsity
//! in eighths) instead of an external ILP solver. Selection is pinned:
//! smallest deviation from the target total first, then minimum cost, then
//! the layer-order lexicographically smallest assignment comparing (M, N).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::PatternChoice;

/// Planner view of a layer: its name plus normalized outlier statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanInput {
    pub name: String,
    pub o: f64,
    pub nd: f64,
}

impl From<&crate::analysis::LayerAnalysis> for PlanInput {
    fn from(a: &crate::analysis::LayerAnalysis) -> Self {
        Self {
            name: a.name.clone(),
            o: a.o,
            nd: a.nd,
        }
    }
}

impl From<&crate::analysis::LayerAnalysisRecord> for PlanInput {
    fn from(a: &crate::analysis::LayerAnalysisRecord) -> Self {
        Self {
            name: a.name.clone(),
            o: a.o,
            nd: a.nd,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub h: f64,
    pub target_sparsity: Option<f64>,
    pub candidate_set: Vec<PatternChoice>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 4.0,
            k: 8.0,
            h: 8.0,
            target_sparsity: None,
            candidate_set: PatternChoice::candidate_set(),
        }
    }
}

impl PlannerConfig {
    fn validate(&self) -> Result<()> {
        if self.candidate_set.is_empty() {
            return Err(Error::Planner("empty candidate set".into()));
        }
        for p in &self.candidate_set {
            if !p.is_valid() {
                return Err(Error::InvalidPattern { n: p.n, m: p.m });
            }
        }
        if let Some(t) = self.target_sparsity {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Planner(format!("target sparsity {t} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Candidates ordered by (M, N); the order pins all tie-breaking.
    fn sorted_candidates(&self) -> Vec<PatternChoice> {
        let mut set = self.candidate_set.clone();
        set.sort_by_key(|p| (p.m, p.n));
        set.dedup();
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    Constrained,
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub layer: String,
    #[serde(flatten)]
    pub pattern: PatternChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityPlan {
    pub mode: PlanMode,
    pub target: Option<f64>,
    pub achieved_sparsity: f64,
    pub objective_value: f64,
    pub deviation_from_target: f64,
    pub assignments: Vec<Assignment>,
}

impl SparsityPlan {
    pub fn pattern_for(&self, layer: &str) -> Option<PatternChoice> {
        self.assignments
            .iter()
            .find(|a| a.layer == layer)
            .map(|a| a.pattern)
    }
}

/// `alpha * |N - k*O| + beta * |M - h*(1 - ND)|`.
pub fn layer_cost(choice: PatternChoice, o: f64, nd: f64, cfg: &PlannerConfig) -> f64 {
    cfg.alpha * (f64::from(choice.n) - cfg.k * o).abs()
        + cfg.beta * (f64::from(choice.m) - cfg.h * (1.0 - nd)).abs()
}

fn cost_table(inputs: &[PlanInput], candidates: &[PatternChoice], cfg: &PlannerConfig) -> Vec<Vec<f64>> {
    inputs
        .iter()
        .map(|layer| {
            candidates
                .iter()
                .map(|&c| layer_cost(c, layer.o, layer.nd, cfg))
                .collect()
        })
        .collect()
}

fn plan_from_choices(
    inputs: &[PlanInput],
    choices: &[PatternChoice],
    mode: PlanMode,
    target: Option<f64>,
) -> SparsityPlan {
    let total_eighths: u32 = choices.iter().map(|p| p.sparsity_eighths()).sum();
    let achieved = f64::from(total_eighths) / (8.0 * inputs.len() as f64);
    let deviation = target.map_or(0.0, |t| (achieved - t).abs());
    SparsityPlan {
        mode,
        target,
        achieved_sparsity: achieved,
        objective_value: 0.0, // filled by caller
        deviation_from_target: deviation,
        assignments: inputs
            .iter()
            .zip(choices)
            .map(|(layer, &pattern)| Assignment {
                layer: layer.name.clone(),
                pattern,
            })
            .collect(),
    }
}

/// Per-layer independent cost minimization; ties resolve to the (M, N)
/// lexicographically smallest candidate.
pub fn plan_unconstrained(inputs: &[PlanInput], cfg: &PlannerConfig) -> Result<SparsityPlan> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::Planner("no layers to plan".into()));
    }
    let candidates = cfg.sorted_candidates();
    let costs = cost_table(inputs, &candidates, cfg);
    let mut choices = Vec::with_capacity(inputs.len());
    let mut layer_minima = Vec::with_capacity(inputs.len());
    for layer_costs in &costs {
        let (best_idx, best_cost) = layer_costs
            .iter()
            .enumerate()
            .fold((0usize, f64::INFINITY), |(bi, bc), (i, &c)| {
                if c < bc {
                    (i, c)
                } else {
                    (bi, bc)
                }
            });
        choices.push(candidates[best_idx]);
        layer_minima.push(best_cost);
    }
    let mut plan = plan_from_choices(inputs, &choices, PlanMode::Unconstrained, None);
    // Sum last-layer-first, matching the constrained DP's suffix
    // composition, so objectives of the two modes compare exactly.
    plan.objective_value = layer_minima.iter().rev().fold(0.0, |acc, &c| c + acc);
    Ok(plan)
}

/// Exact constrained solve via DP over total sparsity in eighths.
///
/// If the exact target total is unachievable, the nearest achievable total is
/// used and the deviation reported. Two equidistant totals tie-break on
/// cost, then on the lexicographic assignment order.
pub fn plan_constrained(inputs: &[PlanInput], cfg: &PlannerConfig) -> Result<SparsityPlan> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::Planner("no layers to plan".into()));
    }
    let target = cfg
        .target_sparsity
        .ok_or_else(|| Error::Planner("constrained mode requires a target sparsity".into()))?;
    let candidates = cfg.sorted_candidates();
    let costs = cost_table(inputs, &candidates, cfg);
    let eighths: Vec<u32> = candidates.iter().map(|p| p.sparsity_eighths()).collect();
    let layer_count = inputs.len();
    let max_eighths = *eighths.iter().max().unwrap() as usize;
    let max_total = max_eighths * layer_count;

    // suffix[l][t]: minimum cost of layers l.. using exactly t eighths.
    let mut suffix = vec![vec![f64::INFINITY; max_total + 1]; layer_count + 1];
    suffix[layer_count][0] = 0.0;
    for l in (0..layer_count).rev() {
        for t in 0..=max_total {
            let mut best = f64::INFINITY;
            for (ci, &e) in eighths.iter().enumerate() {
                let e = e as usize;
                if e <= t && suffix[l + 1][t - e].is_finite() {
                    let c = costs[l][ci] + suffix[l + 1][t - e];
                    if c < best {
                        best = c;
                    }
                }
            }
            suffix[l][t] = best;
        }
    }

    let target_total = target * 8.0 * layer_count as f64;
    let mut best_dev = f64::INFINITY;
    for (t, c) in suffix[0].iter().enumerate() {
        if c.is_finite() {
            best_dev = best_dev.min((t as f64 - target_total).abs());
        }
    }
    if !best_dev.is_finite() {
        return Err(Error::Planner("no achievable sparsity total".into()));
    }
    let nearest_totals: Vec<usize> = (0..=max_total)
        .filter(|&t| suffix[0][t].is_finite() && (t as f64 - target_total).abs() == best_dev)
        .collect();

    // Reconstruct the lexicographically smallest optimal assignment for a
    // fixed total by scanning candidates in (M, N) order.
    let reconstruct = |total: usize| -> Vec<PatternChoice> {
        let mut rem = total;
        let mut choices = Vec::with_capacity(layer_count);
        for l in 0..layer_count {
            let mut picked = None;
            for (ci, &e) in eighths.iter().enumerate() {
                let e = e as usize;
                if e <= rem
                    && suffix[l + 1][rem - e].is_finite()
                    && costs[l][ci] + suffix[l + 1][rem - e] == suffix[l][rem]
                {
                    picked = Some((ci, e));
                    break;
                }
            }
            let (ci, e) = picked.expect("DP reconstruction must find a candidate");
            choices.push(candidates[ci]);
            rem -= e;
        }
        debug_assert_eq!(rem, 0);
        choices
    };

    let mut best: Option<(f64, Vec<PatternChoice>, usize)> = None;
    for &t in &nearest_totals {
        let cost = suffix[0][t];
        let choices = reconstruct(t);
        let better = match &best {
            None => true,
            Some((bc, bchoices, _)) => {
                cost < *bc
                    || (cost == *bc
                        && choices
                            .iter()
                            .map(|p| (p.m, p.n))
                            .lt(bchoices.iter().map(|p| (p.m, p.n))))
            }
        };
        if better {
            best = Some((cost, choices, t));
        }
    }
    let (objective, choices, _) = best.unwrap();
    let mut plan = plan_from_choices(inputs, &choices, PlanMode::Constrained, Some(target));
    plan.objective_value = objective;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(values: &[(f64, f64)]) -> Vec<PlanInput> {
        values
            .iter()
            .enumerate()
            .map(|(i, &(o, nd))| PlanInput {
                name: format!("layer{i}"),
                o,
                nd,
            })
            .collect()
    }

    fn cfg_with_target(target: Option<f64>) -> PlannerConfig {
        PlannerConfig {
            target_sparsity: target,
            ..PlannerConfig::default()
        }
    }

    /// Exhaustive 9^L reference: minimize deviation from the target total
    /// first, then cost accumulated left-to-right, then (M, N) lexicographic
    /// assignment order. Mirrors the pinned selection semantics. Returns
    /// (achieved sparsity, cost, assignment).
    fn brute_force(inputs: &[PlanInput], cfg: &PlannerConfig) -> (f64, f64, Vec<PatternChoice>) {
        let mut candidates = cfg.candidate_set.clone();
        candidates.sort_by_key(|p| (p.m, p.n));
        let target_total =
            cfg.target_sparsity.unwrap() * 8.0 * inputs.len() as f64;
        let mut best: Option<(f64, f64, u32, Vec<PatternChoice>)> = None;
        let mut stack = vec![0usize; inputs.len()];
        loop {
            // Sum costs last-layer-first: the DP composes suffix sums, so
            // the same association makes the float objectives comparable
            // with exact equality.
            let mut cost = 0.0;
            let mut total = 0u32;
            for (l, &ci) in stack.iter().enumerate().rev() {
                cost = layer_cost(candidates[ci], inputs[l].o, inputs[l].nd, cfg) + cost;
                total += candidates[ci].sparsity_eighths();
            }
            let dev = (f64::from(total) - target_total).abs();
            let assignment: Vec<PatternChoice> = stack.iter().map(|&ci| candidates[ci]).collect();
            let better = match &best {
                None => true,
                Some((bd, bc, _, ba)) => {
                    dev < *bd
                        || (dev == *bd && cost < *bc)
                        || (dev == *bd
                            && cost == *bc
                            && assignment
                                .iter()
                                .map(|p| (p.m, p.n))
                                .lt(ba.iter().map(|p| (p.m, p.n))))
                }
            };
            if better {
                best = Some((dev, cost, total, assignment));
            }
            // Odometer increment over candidate indices.
            let mut pos = stack.len();
            loop {
                if pos == 0 {
                    let (_, cost, total, a) = best.unwrap();
                    let achieved = f64::from(total) / (8.0 * inputs.len() as f64);
                    return (achieved, cost, a);
                }
                pos -= 1;
                stack[pos] += 1;
                if stack[pos] < candidates.len() {
                    break;
                }
                stack[pos] = 0;
            }
        }
    }

    #[test]
    fn layer_cost_worked_values() {
        let cfg = PlannerConfig::default();
        assert_eq!(
            layer_cost(PatternChoice::new(8, 8).unwrap(), 1.0, 0.0, &cfg),
            0.0
        );
        assert_eq!(
            layer_cost(PatternChoice::new(1, 2).unwrap(), 1.0, 1.0, &cfg),
            15.0
        );
        assert_eq!(
            layer_cost(PatternChoice::new(2, 8).unwrap(), 0.25, 1.0, &cfg),
            32.0
        );
    }

    #[test]
    fn constrained_two_layer_instance_matches_brute_force() {
        // O = [1.0, 0.25], ND = [1.0, 0.0], S = 0.5. The 8/8 total forces a
        // half-sparsity pattern on both layers; layer 0's cheapest is 1:2 at
        // cost 15 and layer 1's is 4:8 at cost |4 - 2| = 2, so the optimum is
        // [(1,2), (4,8)] with objective 17 (frozen from the exhaustive 9^2
        // enumeration below).
        let ins = inputs(&[(1.0, 1.0), (0.25, 0.0)]);
        let cfg = cfg_with_target(Some(0.5));
        let plan = plan_constrained(&ins, &cfg).unwrap();
        let (achieved, cost, assignment) = brute_force(&ins, &cfg);
        assert_eq!(plan.objective_value, cost);
        assert_eq!(plan.achieved_sparsity, achieved);
        assert_eq!(
            plan.assignments.iter().map(|a| a.pattern).collect::<Vec<_>>(),
            assignment
        );
        assert_eq!(plan.objective_value, 17.0);
        assert_eq!(
            assignment,
            vec![
                PatternChoice::new(1, 2).unwrap(),
                PatternChoice::new(4, 8).unwrap()
            ]
        );
        assert_eq!(plan.achieved_sparsity, 0.5);
    }

    #[test]
    fn constrained_single_layer_dense_target() {
        // Zero-sparsity candidates cost 10 (2:2), 20 (4:4), 40 (8:8).
        let ins = inputs(&[(0.0, 1.0)]);
        let cfg = cfg_with_target(Some(0.0));
        let plan = plan_constrained(&ins, &cfg).unwrap();
        assert_eq!(plan.assignments[0].pattern, PatternChoice::new(2, 2).unwrap());
        assert_eq!(plan.objective_value, 10.0);
        assert_eq!(plan.achieved_sparsity, 0.0);
        assert_eq!(plan.deviation_from_target, 0.0);
    }

    #[test]
    fn dp_matches_brute_force_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for trial in 0..100 {
            let layer_count = rng.random_range(1..=5);
            let ins: Vec<PlanInput> = (0..layer_count)
                .map(|i| PlanInput {
                    name: format!("l{i}"),
                    o: rng.random_range(0.0..=1.0),
                    nd: rng.random_range(0.0..=1.0),
                })
                .collect();
            let target = [0.5, 0.6, 0.75][trial % 3];
            let cfg = cfg_with_target(Some(target));
            let plan = plan_constrained(&ins, &cfg).unwrap();
            let (achieved, cost, assignment) = brute_force(&ins, &cfg);
            assert_eq!(plan.objective_value, cost, "trial {trial}");
            assert_eq!(plan.achieved_sparsity, achieved, "trial {trial}");
            assert_eq!(
                plan.assignments.iter().map(|a| a.pattern).collect::<Vec<_>>(),
                assignment,
                "trial {trial}"
            );
        }
    }

    #[test]
    fn unconstrained_worked_instance() {
        let ins = inputs(&[(1.0, 1.0), (0.25, 0.0)]);
        let cfg = PlannerConfig::default();
        let plan = plan_unconstrained(&ins, &cfg).unwrap();
        assert_eq!(plan.assignments[0].pattern, PatternChoice::new(2, 2).unwrap());
        assert_eq!(plan.assignments[1].pattern, PatternChoice::new(2, 8).unwrap());
        assert_eq!(plan.objective_value, 14.0);
        assert_eq!(plan.achieved_sparsity, 0.375);
    }

    #[test]
    fn identical_layers_get_identical_assignments() {
        let ins = inputs(&[(0.4, 0.7); 6]);
        let plan = plan_unconstrained(&ins, &PlannerConfig::default()).unwrap();
        let first = plan.assignments[0].pattern;
        assert!(plan.assignments.iter().all(|a| a.pattern == first));
    }

    #[test]
    fn unconstrained_objective_bounds_constrained() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        for _ in 0..50 {
            let layer_count = rng.random_range(1..=8);
            let ins: Vec<PlanInput> = (0..layer_count)
                .map(|i| PlanInput {
                    name: format!("l{i}"),
                    o: rng.random_range(0.0..=1.0),
                    nd: rng.random_range(0.0..=1.0),
                })
                .collect();
            let cfg = cfg_with_target(Some(0.5));
            let constrained = plan_constrained(&ins, &cfg).unwrap();
            let unconstrained = plan_unconstrained(&ins, &cfg).unwrap();
            assert!(unconstrained.objective_value <= constrained.objective_value);
        }
    }

    #[test]
    fn per_layer_sparsities_are_quantized() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(47);
        let ins: Vec<PlanInput> = (0..8)
            .map(|i| PlanInput {
                name: format!("l{i}"),
                o: rng.random_range(0.0..=1.0),
                nd: rng.random_range(0.0..=1.0),
            })
            .collect();
        let plan = plan_constrained(&ins, &cfg_with_target(Some(0.6))).unwrap();
        let mut total = 0u32;
        for a in &plan.assignments {
            assert!(matches!(a.pattern.sparsity_eighths(), 0 | 4 | 6 | 7));
            total += a.pattern.sparsity_eighths();
        }
        assert_eq!(
            plan.achieved_sparsity,
            f64::from(total) / (8.0 * ins.len() as f64)
        );
    }

    #[test]
    fn infeasible_target_reports_deviation() {
        // One layer: achievable sparsities are {0, 1/2, 3/4, 7/8}; target
        // 0.3 resolves to the nearest total (4 eighths = 0.5).
        let ins = inputs(&[(0.5, 0.5)]);
        let plan = plan_constrained(&ins, &cfg_with_target(Some(0.3))).unwrap();
        assert_eq!(plan.achieved_sparsity, 0.5);
        assert!((plan.deviation_from_target - 0.2).abs() < 1e-12);
    }

    #[test]
    fn planner_is_deterministic() {
        let ins = inputs(&[(0.9, 0.1), (0.3, 0.8), (0.5, 0.5)]);
        let cfg = cfg_with_target(Some(0.6));
        let a = plan_constrained(&ins, &cfg).unwrap();
        let b = plan_constrained(&ins, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn n_choice_is_monotone_in_o_when_beta_zero() {
        let cfg = PlannerConfig {
            beta: 0.0,
            ..PlannerConfig::default()
        };
        let mut last_n = 0u8;
        for step in 0..=100 {
            let o = step as f64 / 100.0;
            let plan = plan_unconstrained(
                &[PlanInput {
                    name: "l".into(),
                    o,
                    nd: 0.5,
                }],
                &cfg,
            )
            .unwrap();
            let n = plan.assignments[0].pattern.n;
            assert!(n >= last_n, "N dropped from {last_n} to {n} at O={o}");
            last_n = n;
        }
    }

    #[test]
    fn plan_json_shape() {
        let ins = inputs(&[(1.0, 1.0)]);
        let plan = plan_unconstrained(&ins, &PlannerConfig::default()).unwrap();
        let json = serde_json::to_value(&plan).unwrap();
        assert_eq!(json["mode"], "unconstrained");
        assert!(json["assignments"][0]["N"].is_u64());
        assert!(json["assignments"][0]["M"].is_u64());
        assert_eq!(json["assignments"][0]["layer"], "layer0");
        let back: SparsityPlan = serde_json::from_value(json).unwrap();
        assert_eq!(back, plan);
    }
}
