//! Sparse approximation of a goal vector over a dictionary of atoms.
//!
//! Two solvers share one solution type: greedy orthogonal matching pursuit
//! and cyclic coordinate-descent LASSO with elastic-net mixing. An exhaustive
//! subset search serves as the exact oracle on small instances.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::kb::FactDictionary;
use crate::linalg::{axpy, dot, least_squares, nonneg_least_squares, norm, normal_system, solve_normal, AtomMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Omp,
    Lasso,
    /// Exhaustive subset search; only used to label oracle solutions.
    Exhaustive,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "omp" => Ok(Self::Omp),
            "lasso" => Ok(Self::Lasso),
            other => Err(Error::InvalidArgument(format!("unknown solver method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub method: Method,
    /// Hard cap on support size.
    pub max_atoms: usize,
    pub lambda: f64,
    /// 1.0 is pure L1, 0.0 pure ridge.
    pub elastic_net_alpha: f64,
    pub nonnegative: bool,
    /// Weights with magnitude below this are pruned after optimization.
    pub weight_floor: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Lasso,
            max_atoms: 20,
            lambda: 0.2,
            elastic_net_alpha: 1.0,
            nonnegative: true,
            weight_floor: 0.05,
            max_iterations: 1000,
            convergence_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn omp() -> Self {
        Self { method: Method::Omp, ..Self::default() }
    }

    pub fn lasso() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_owned()));
        if self.max_atoms == 0 {
            return bad("max_atoms must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a nonnegative number");
        }
        if !(0.0..=1.0).contains(&self.elastic_net_alpha) {
            return bad("elastic_net_alpha must lie in [0, 1]");
        }
        if !(self.weight_floor >= 0.0 && self.weight_floor.is_finite()) {
            return bad("weight_floor must be a nonnegative number");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol.is_finite()) {
            return bad("convergence_tol must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseSolution {
    /// Atom index to weight; only weights that survived the floor.
    pub weights: BTreeMap<usize, f64>,
    /// `|goal - sum_j w_j * atom_j|`
    pub residual_norm: f64,
    /// OMP: atoms added. LASSO: coordinate sweeps. Exhaustive: supports tried.
    pub iterations: usize,
    /// False when LASSO stopped at `max_iterations` before reaching tolerance.
    pub converged: bool,
    pub config: SolverConfig,
}

impl SparseSolution {
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights.keys().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, j: usize) -> Option<f64> {
        self.weights.get(&j).copied()
    }

    /// Diagnostic dump: `fact,weight,head,predicate,tail`, one row per predicate.
    pub fn write_csv<W: Write>(&self, dict: &FactDictionary, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["fact", "weight", "head", "predicate", "tail"])?;
        for (&j, &weight) in &self.weights {
            let f = dict.fact(j);
            for p in &f.predicates {
                w.write_record([j.to_string().as_str(), &weight.to_string(), &f.head, p, &f.tail])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_inputs(atoms: &AtomMatrix, goal: &[f64]) -> Result<()> {
    if atoms.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    if goal.len() != atoms.dim() {
        return Err(Error::DimensionMismatch { expected: atoms.dim(), found: goal.len() });
    }
    Ok(())
}

/// Dispatches on `config.method`.
pub fn solve(atoms: &AtomMatrix, goal: &[f64], config: &SolverConfig) -> Result<SparseSolution> {
    match config.method {
        Method::Omp => solve_omp(atoms, goal, config),
        Method::Lasso => solve_lasso(atoms, goal, config),
        Method::Exhaustive => brute_force_sparse(atoms, goal, config.max_atoms),
    }
}

/// Applies the floor, then keeps the `cap` largest magnitudes (ties to the
/// lower index), and recomputes the residual from what is left.
fn finish(
    atoms: &AtomMatrix,
    goal: &[f64],
    dense: impl IntoIterator<Item = (usize, f64)>,
    cap: usize,
    iterations: usize,
    converged: bool,
    config: &SolverConfig,
) -> SparseSolution {
    let mut kept: Vec<(usize, f64)> =
        dense.into_iter().filter(|&(_, w)| w != 0.0 && w.abs() >= config.weight_floor).collect();
    if kept.len() > cap {
        kept.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        kept.truncate(cap);
    }
    let weights: BTreeMap<usize, f64> = kept.into_iter().collect();
    let residual_norm = atoms.residual_norm(goal, &weights);
    SparseSolution { weights, residual_norm, iterations, converged, config: *config }
}

/// Orthogonal matching pursuit.
///
/// Each step adds the unselected atom whose normalized correlation with the
/// residual is largest (largest positive when nonnegative), with ties going
/// to the lowest index, then refits all selected weights by least squares
/// (nonnegative least squares when configured). Stops at `max_atoms`
/// selections, when the residual falls below `convergence_tol`, or when no
/// atom reduces the residual.
pub fn solve_omp(atoms: &AtomMatrix, goal: &[f64], config: &SolverConfig) -> Result<SparseSolution> {
    config.validate()?;
    check_inputs(atoms, goal)?;
    let n = atoms.len();
    let inv_norms: Vec<f64> =
        (0..n).map(|j| if atoms.sq_norm(j) > 0.0 { 1.0 / atoms.sq_norm(j).sqrt() } else { 0.0 }).collect();

    let mut selected: Vec<usize> = Vec::new();
    let mut is_selected = vec![false; n];
    let mut weights: Vec<f64> = Vec::new();
    let mut residual = goal.to_vec();
    let mut res_norm = norm(goal);
    let mut iterations = 0;

    while selected.len() < config.max_atoms.min(n) && res_norm > config.convergence_tol {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if is_selected[j] || inv_norms[j] == 0.0 {
                continue;
            }
            let c = dot(atoms.column(j), &residual) * inv_norms[j];
            let score = if config.nonnegative { c } else { c.abs() };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, score)) = best else { break };
        if score <= 1e-12 * res_norm {
            break;
        }

        let pos = selected.partition_point(|&s| s < j);
        let mut candidate = selected.clone();
        candidate.insert(pos, j);
        let w = if config.nonnegative {
            nonneg_least_squares(atoms, goal, &candidate)
        } else {
            least_squares(atoms, goal, &candidate)
        };
        let new_norm = atoms.residual_norm(goal, candidate.iter().zip(&w));
        // no strict improvement, or NaN
        if new_norm.partial_cmp(&res_norm) != Some(std::cmp::Ordering::Less) {
            break;
        }
        selected = candidate;
        is_selected[j] = true;
        weights = w;
        residual = goal.to_vec();
        for (&s, &ws) in selected.iter().zip(&weights) {
            axpy(-ws, atoms.column(s), &mut residual);
        }
        res_norm = new_norm;
        iterations += 1;
    }

    Ok(finish(atoms, goal, selected.into_iter().zip(weights), config.max_atoms, iterations, true, config))
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent on
/// `0.5 |goal - D w|^2 + lambda * (alpha |w|_1 + (1 - alpha) / 2 |w|^2)`.
///
/// Full sweeps alternate with sweeps over the current nonzero set; the run
/// converges when a full sweep moves no coordinate by `convergence_tol` or
/// more. Non-convergence is reported through `converged`, not as an error.
pub fn solve_lasso(atoms: &AtomMatrix, goal: &[f64], config: &SolverConfig) -> Result<SparseSolution> {
    config.validate()?;
    check_inputs(atoms, goal)?;
    let n = atoms.len();
    let l1 = config.lambda * config.elastic_net_alpha;
    let l2 = config.lambda * (1.0 - config.elastic_net_alpha);

    let mut w = vec![0.0; n];
    let mut residual = goal.to_vec();

    let update = |j: usize, w: &mut [f64], residual: &mut [f64]| -> f64 {
        let sq = atoms.sq_norm(j);
        if sq == 0.0 {
            return 0.0;
        }
        let col = atoms.column(j);
        let rho = dot(col, residual) + sq * w[j];
        let mut next = soft_threshold(rho, l1) / (sq + l2);
        if config.nonnegative && next < 0.0 {
            next = 0.0;
        }
        let delta = next - w[j];
        if delta != 0.0 {
            axpy(-delta, col, residual);
            w[j] = next;
        }
        delta.abs()
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        iterations += 1;
        let mut max_delta = 0.0_f64;
        for j in 0..n {
            max_delta = max_delta.max(update(j, &mut w, &mut residual));
        }
        if max_delta < config.convergence_tol {
            converged = true;
            break;
        }
        let active: Vec<usize> = (0..n).filter(|&j| w[j] != 0.0).collect();
        while iterations < config.max_iterations {
            iterations += 1;
            let mut d = 0.0_f64;
            for &j in &active {
                d = d.max(update(j, &mut w, &mut residual));
            }
            if d < config.convergence_tol {
                break;
            }
        }
    }

    Ok(finish(atoms, goal, w.into_iter().enumerate(), config.max_atoms, iterations, converged, config))
}

/// Largest violation of the LASSO optimality conditions at `weights`
/// (pure L1, signed): `|a_j . r| <= lambda` on zero weights and
/// `a_j . r = lambda * sign(w_j)` on active ones.
pub fn lasso_kkt_violation(atoms: &AtomMatrix, goal: &[f64], weights: &BTreeMap<usize, f64>, lambda: f64) -> f64 {
    let fit = atoms.combine(weights);
    let residual: Vec<f64> = goal.iter().zip(&fit).map(|(g, f)| g - f).collect();
    (0..atoms.len())
        .map(|j| {
            let c = dot(atoms.column(j), &residual);
            match weights.get(&j) {
                Some(&wj) if wj != 0.0 => (c - lambda * wj.signum()).abs(),
                _ => (c.abs() - lambda).max(0.0),
            }
        })
        .fold(0.0, f64::max)
}

pub const BRUTE_FORCE_MAX_ATOMS: usize = 64;
pub const BRUTE_FORCE_MAX_K: usize = 4;

/// Exact sparse approximation by trying every support of size `<= max_k`
/// with an unconstrained least-squares fit on each. Ties go to the smaller
/// support, then the lexicographically lower index tuple.
pub fn brute_force_sparse(atoms: &AtomMatrix, goal: &[f64], max_k: usize) -> Result<SparseSolution> {
    if atoms.len() > BRUTE_FORCE_MAX_ATOMS || max_k > BRUTE_FORCE_MAX_K {
        return Err(Error::Guard(format!(
            "exhaustive search limited to {BRUTE_FORCE_MAX_ATOMS} atoms and k <= {BRUTE_FORCE_MAX_K} \
             (got {} atoms, k = {max_k})",
            atoms.len()
        )));
    }
    if goal.len() != atoms.dim() {
        return Err(Error::DimensionMismatch { expected: atoms.dim(), found: goal.len() });
    }
    let n = atoms.len();
    let all: Vec<usize> = (0..n).collect();
    let (gram, rhs) = normal_system(atoms, goal, &all);

    let mut best_support: Vec<usize> = Vec::new();
    let mut best_weights: Vec<f64> = Vec::new();
    let mut best_norm = norm(goal);
    let mut tried = 1;

    let mut support: Vec<usize> = Vec::with_capacity(max_k);
    for k in 1..=max_k.min(n) {
        support.clear();
        support.extend(0..k);
        loop {
            tried += 1;
            let mut g = vec![0.0; k * k];
            for (a, &i) in support.iter().enumerate() {
                for (b, &j) in support.iter().enumerate() {
                    g[a * k + b] = gram[i * n + j];
                }
            }
            let r: Vec<f64> = support.iter().map(|&i| rhs[i]).collect();
            let w = solve_normal(&g, &r);
            let res = atoms.residual_norm(goal, support.iter().zip(&w));
            if res < best_norm {
                best_norm = res;
                best_support.clone_from(&support);
                best_weights = w;
            }
            if !next_combination(&mut support, n) {
                break;
            }
        }
    }

    let config = SolverConfig {
        method: Method::Exhaustive,
        max_atoms: max_k.max(1),
        weight_floor: 0.0,
        ..SolverConfig::default()
    };
    let weights: BTreeMap<usize, f64> =
        best_support.into_iter().zip(best_weights).filter(|&(_, w)| w != 0.0).collect();
    let residual_norm = atoms.residual_norm(goal, &weights);
    Ok(SparseSolution { weights, residual_norm, iterations: tried, converged: true, config })
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::random_unit;
    use crate::linalg::add;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity(n: usize) -> AtomMatrix {
        AtomMatrix::from_columns(
            n,
            (0..n).map(|i| {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                v
            }),
        )
        .unwrap()
    }

    fn random_atoms(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> AtomMatrix {
        AtomMatrix::from_columns(dim, (0..n).map(|_| random_unit(rng, dim))).unwrap()
    }

    fn random_goal(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn floorless(mut c: SolverConfig) -> SolverConfig {
        c.weight_floor = 0.0;
        c
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        for bad in [
            SolverConfig { max_atoms: 0, ..Default::default() },
            SolverConfig { lambda: -0.1, ..Default::default() },
            SolverConfig { elastic_net_alpha: 1.5, ..Default::default() },
            SolverConfig { convergence_tol: 0.0, ..Default::default() },
            SolverConfig { max_iterations: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        assert_eq!("OMP".parse::<Method>().unwrap(), Method::Omp);
        assert!("lars".parse::<Method>().is_err());
    }

    #[test]
    fn omp_exact_single_atom() {
        let atoms = identity(6);
        let goal = atoms.column(3).to_vec();
        let sol = solve_omp(&atoms, &goal, &SolverConfig::omp()).unwrap();
        assert_eq!(sol.weights, BTreeMap::from([(3, 1.0)]));
        assert_eq!(sol.residual_norm, 0.0);
    }

    #[test]
    fn omp_orthogonal_goal_gives_empty_support() {
        let atoms = AtomMatrix::from_columns(3, [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let goal = vec![0.0, 0.0, 2.5];
        for cfg in [SolverConfig::omp(), SolverConfig { nonnegative: false, ..SolverConfig::omp() }] {
            let sol = solve_omp(&atoms, &goal, &cfg).unwrap();
            assert!(sol.is_empty());
            assert_eq!(sol.residual_norm, 2.5);
        }
    }

    #[test]
    fn omp_input_errors() {
        let atoms = identity(3);
        assert!(matches!(solve_omp(&atoms, &[1.0], &SolverConfig::omp()), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            solve_omp(&AtomMatrix::new(3), &[1.0, 0.0, 0.0], &SolverConfig::omp()),
            Err(Error::EmptyDictionary)
        ));
        assert!(matches!(
            solve_lasso(&AtomMatrix::new(3), &[1.0, 0.0, 0.0], &SolverConfig::lasso()),
            Err(Error::EmptyDictionary)
        ));
    }

    #[test]
    fn omp_breaks_correlation_ties_by_lowest_index() {
        let atoms = AtomMatrix::from_columns(2, [vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let cfg = SolverConfig { max_atoms: 1, ..SolverConfig::omp() };
        let sol = solve_omp(&atoms, &[1.0, 1.0], &cfg).unwrap();
        assert_eq!(sol.support().collect::<Vec<_>>(), [0]);
    }

    #[test]
    fn omp_nonnegative_never_selects_anticorrelated_atoms() {
        let atoms = AtomMatrix::from_columns(2, [vec![-1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let sol = solve_omp(&atoms, &[1.0, 1.0], &SolverConfig::omp()).unwrap();
        assert_eq!(sol.weights, BTreeMap::from([(1, 1.0)]));
        let signed = solve_omp(&atoms, &[1.0, 1.0], &SolverConfig { nonnegative: false, ..SolverConfig::omp() }).unwrap();
        assert_eq!(signed.weights, BTreeMap::from([(0, -1.0), (1, 1.0)]));
    }

    #[test]
    fn omp_recovers_planted_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let atoms = random_atoms(&mut rng, 200, 64);
        let goal = add(atoms.column(17), atoms.column(150));
        let sol = solve_omp(&atoms, &goal, &SolverConfig::omp()).unwrap();
        assert_eq!(sol.support().collect::<Vec<_>>(), [17, 150]);
        assert!(sol.residual_norm < 1e-12);
    }

    #[test]
    fn omp_residual_is_monotone_in_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let atoms = random_atoms(&mut rng, 40, 20);
            let goal = random_goal(&mut rng, 20);
            for nonnegative in [true, false] {
                let mut last = f64::INFINITY;
                for l in 1..=12 {
                    let cfg = floorless(SolverConfig { max_atoms: l, nonnegative, ..SolverConfig::omp() });
                    let sol = solve_omp(&atoms, &goal, &cfg).unwrap();
                    assert!(sol.residual_norm <= last, "L={l}: {} > {last}", sol.residual_norm);
                    assert!(sol.weights.len() <= l);
                    last = sol.residual_norm;
                }
            }
        }
    }

    // Closed form max(0, d.g - lambda) for one unit atom, checked first against a grid search.
    #[test]
    fn lasso_single_atom_soft_threshold() {
        let objective = |w: f64| 0.5 * (1.0 - w).powi(2) + 0.2 * w.abs();
        let grid_best = (0..=200_000)
            .map(|i| i as f64 * 1e-5)
            .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
            .unwrap();
        assert!((grid_best - 0.8).abs() <= 1e-5);

        let atoms = AtomMatrix::from_columns(3, [vec![0.6, 0.0, 0.8]]).unwrap();
        let goal = atoms.column(0).to_vec();
        let sol = solve_lasso(&atoms, &goal, &SolverConfig::lasso()).unwrap();
        assert!((sol.weights[&0] - 0.8).abs() < 1e-12);
        assert!((sol.residual_norm - 0.2).abs() < 1e-12);
        assert!(sol.converged);
    }

    #[test]
    fn lasso_unpenalized_exact_fit() {
        let atoms = identity(5);
        let goal = atoms.column(2).to_vec();
        let sol = solve_lasso(&atoms, &goal, &SolverConfig { lambda: 0.0, ..SolverConfig::lasso() }).unwrap();
        assert_eq!(sol.weights, BTreeMap::from([(2, 1.0)]));
        assert_eq!(sol.residual_norm, 0.0);
    }

    #[test]
    fn lasso_ridge_mixing_shrinks_further() {
        let atoms = identity(2);
        let goal = vec![1.0, 0.0];
        let cfg = SolverConfig { elastic_net_alpha: 0.5, ..SolverConfig::lasso() };
        let sol = solve_lasso(&atoms, &goal, &cfg).unwrap();
        // (1 - 0.1) / (1 + 0.1)
        assert!((sol.weights[&0] - 0.9 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn lasso_reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let atoms = random_atoms(&mut rng, 60, 10);
        let goal = random_goal(&mut rng, 10);
        let cfg = SolverConfig { max_iterations: 1, lambda: 0.01, nonnegative: false, ..SolverConfig::lasso() };
        let sol = solve_lasso(&atoms, &goal, &cfg).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn lasso_support_cap_keeps_largest() {
        let atoms = identity(4);
        let goal = vec![1.0, 3.0, 2.0, 0.5];
        let cfg = SolverConfig { max_atoms: 2, ..SolverConfig::lasso() };
        let sol = solve_lasso(&atoms, &goal, &cfg).unwrap();
        assert_eq!(sol.support().collect::<Vec<_>>(), [1, 2]);
    }

    #[test]
    fn lasso_recovers_planted_five() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let atoms = random_atoms(&mut rng, 1000, 300);
        let planted = [3, 99, 400, 777, 901];
        let mut goal = vec![0.0; 300];
        for &j in &planted {
            goal = add(&goal, atoms.column(j));
        }
        let sol = solve_lasso(&atoms, &goal, &SolverConfig::lasso()).unwrap();
        for j in planted {
            assert!(sol.weights.contains_key(&j));
        }
    }

    #[test]
    fn lasso_kkt_holds_signed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let atoms = random_atoms(&mut rng, 30, 15);
            let goal = random_goal(&mut rng, 15);
            let cfg = SolverConfig { nonnegative: false, weight_floor: 0.0, max_atoms: 30, ..SolverConfig::lasso() };
            let sol = solve_lasso(&atoms, &goal, &cfg).unwrap();
            assert!(sol.converged);
            let v = lasso_kkt_violation(&atoms, &goal, &sol.weights, cfg.lambda);
            assert!(v <= 10.0 * cfg.convergence_tol, "{v}");
        }
    }

    #[test]
    fn lasso_residual_shrinks_with_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let atoms = random_atoms(&mut rng, 40, 20);
            let goal = random_goal(&mut rng, 20);
            let mut last = 0.0;
            for lambda in [0.4, 0.2, 0.1, 0.05] {
                let cfg = SolverConfig { lambda, weight_floor: 0.0, max_atoms: 40, ..SolverConfig::lasso() };
                let r = solve_lasso(&atoms, &goal, &cfg).unwrap().residual_norm;
                assert!(r <= last + 1e-9 || last == 0.0, "lambda {lambda}: {r} > {last}");
                last = r;
            }
        }
    }

    #[test]
    fn brute_force_planted_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let atoms = random_atoms(&mut rng, 10, 12);
        let goal = add(atoms.column(2), atoms.column(5));
        let sol = brute_force_sparse(&atoms, &goal, 2).unwrap();
        assert_eq!(sol.support().collect::<Vec<_>>(), [2, 5]);
        assert!((sol.weights[&2] - 1.0).abs() < 1e-9 && (sol.weights[&5] - 1.0).abs() < 1e-9);
        assert!(sol.residual_norm < 1e-9);
    }

    #[test]
    fn brute_force_zero_budget_and_guards() {
        let atoms = identity(3);
        let sol = brute_force_sparse(&atoms, &[1.0, 2.0, 2.0], 0).unwrap();
        assert!(sol.is_empty());
        assert_eq!(sol.residual_norm, 3.0);
        assert!(matches!(brute_force_sparse(&atoms, &[1.0, 0.0, 0.0], 5), Err(Error::Guard(_))));
        let big = identity(65);
        assert!(matches!(brute_force_sparse(&big, &[0.0; 65], 1), Err(Error::Guard(_))));
    }

    #[test]
    fn brute_force_dominates_omp_with_equal_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let atoms = random_atoms(&mut rng, 20, 10);
            let goal = random_goal(&mut rng, 10);
            let oracle = brute_force_sparse(&atoms, &goal, 2).unwrap();
            for nonnegative in [true, false] {
                let cfg = floorless(SolverConfig { max_atoms: 2, nonnegative, ..SolverConfig::omp() });
                let omp = solve_omp(&atoms, &goal, &cfg).unwrap();
                assert!(oracle.residual_norm <= omp.residual_norm);
                let lasso = solve_lasso(&atoms, &goal, &SolverConfig { max_atoms: 2, nonnegative, ..SolverConfig::lasso() }).unwrap();
                assert!(oracle.residual_norm <= lasso.residual_norm);
            }
        }
    }

    #[test]
    fn solution_csv_dump() {
        use crate::embeddings::load_embeddings;
        use crate::kb::{build_dictionary, Triple};
        let store = load_embeddings("3 2\na 1 0\nb 0 1\nc 1 1\n".as_bytes(), false).unwrap();
        let dict = build_dictionary(
            &store,
            &[Triple::new("a", "r", "b").unwrap(), Triple::new("b", "s", "c").unwrap()],
            None,
        )
        .unwrap();
        let sol = SparseSolution {
            weights: BTreeMap::from([(1, 0.5)]),
            residual_norm: 0.0,
            iterations: 1,
            converged: true,
            config: SolverConfig::default(),
        };
        let mut buf = Vec::new();
        sol.write_csv(&dict, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "fact,weight,head,predicate,tail\n1,0.5,b,s,c\n");
    }

    proptest! {
        #[test]
        fn solutions_respect_invariants(seed in 0u64..200, nonnegative: bool, omp: bool) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let atoms = random_atoms(&mut rng, 30, 12);
            let goal = random_goal(&mut rng, 12);
            let cfg = SolverConfig {
                method: if omp { Method::Omp } else { Method::Lasso },
                max_atoms: 5,
                nonnegative,
                lambda: 0.05,
                ..SolverConfig::default()
            };
            let a = solve(&atoms, &goal, &cfg).unwrap();
            let b = solve(&atoms, &goal, &cfg).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.weights.len() <= cfg.max_atoms);
            for &w in a.weights.values() {
                prop_assert!(w.abs() >= cfg.weight_floor);
                if nonnegative {
                    prop_assert!(w >= 0.0);
                }
            }
            let recomputed = atoms.residual_norm(&goal, &a.weights);
            prop_assert!((recomputed - a.residual_norm).abs() <= 1e-9);
        }
    }
}
