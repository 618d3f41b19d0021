//! NSGA-II over box-bounded real genomes with three maximized objectives.
//!
//! The loop follows the classic elitist scheme: binary tournament on
//! (rank, crowding), SBX crossover, polynomial mutation, then truncation of
//! the merged parent+offspring pool by front index and crowding distance.
//! Convergence is tracked through the hypervolume of an unbounded
//! non-dominated archive, which can only grow.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of objectives handled by the optimizer.
pub const N_OBJ: usize = 3;

pub type ObjectiveVec = [f64; N_OBJ];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Vec<f64>,
    pub objectives: ObjectiveVec,
    /// Index of the non-domination front, 0 being the best.
    pub rank: usize,
    pub crowding: f64,
}

impl Individual {
    pub fn new(genome: Vec<f64>, objectives: ObjectiveVec) -> Self {
        Self {
            genome,
            objectives,
            rank: 0,
            crowding: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EAConfig {
    pub population_size: usize,
    pub generations: usize,
    /// SBX distribution index.
    pub eta_c: f64,
    /// Polynomial mutation distribution index.
    pub eta_m: f64,
    /// Per-gene mutation probability; `None` means `1 / genome length`.
    pub mutation_prob: Option<f64>,
    pub crossover_prob: f64,
    pub seed: u64,
    /// Generations over which hypervolume progress is measured.
    pub plateau_window: usize,
    /// Relative hypervolume gain over the window below which the run stops.
    /// Zero or negative disables early stopping.
    pub plateau_tol: f64,
    /// Hypervolume reference point; derived from the initial population when absent.
    pub reference_point: Option<ObjectiveVec>,
}

impl Default for EAConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            generations: 40,
            eta_c: 15.0,
            eta_m: 20.0,
            mutation_prob: None,
            crossover_prob: 0.9,
            seed: 0,
            plateau_window: 10,
            plateau_tol: 1e-4,
            reference_point: None,
        }
    }
}

impl EAConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 || self.population_size % 2 != 0 {
            return Err(Error::Config(format!(
                "population_size must be even and >= 4, got {}",
                self.population_size
            )));
        }
        if !(self.eta_c > 0.0 && self.eta_m > 0.0) {
            return Err(Error::Config("distribution indices must be > 0".into()));
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.crossover_prob) {
            return Err(Error::Config("crossover_prob must lie in [0, 1]".into()));
        }
        if let Some(p) = self.mutation_prob {
            if !unit.contains(&p) {
                return Err(Error::Config("mutation_prob must lie in [0, 1]".into()));
            }
        }
        if self.plateau_window == 0 {
            return Err(Error::Config("plateau_window must be >= 1".into()));
        }
        Ok(())
    }
}

/// A set of mutually non-dominated individuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub members: Vec<Individual>,
    pub reference_point: ObjectiveVec,
}

impl ParetoFront {
    pub fn objectives(&self) -> Vec<ObjectiveVec> {
        self.members.iter().map(|m| m.objectives).collect()
    }

    pub fn hypervolume(&self) -> Result<f64> {
        hypervolume_3d(&self.objectives(), self.reference_point)
    }

    /// True when no member dominates another.
    pub fn is_mutually_nondominated(&self) -> bool {
        let objs = self.objectives();
        objs.iter().enumerate().all(|(i, a)| {
            objs.iter()
                .enumerate()
                .all(|(j, b)| i == j || !dominates(a, b).unwrap_or(true))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub hypervolume: f64,
    pub front_size: usize,
    pub archive_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub front: ParetoFront,
    pub history: Vec<GenerationRecord>,
    pub population: Vec<Individual>,
    /// Generations actually run (may be below the limit after a plateau).
    pub generations_run: usize,
    pub converged: bool,
}

/// Pareto dominance for maximization.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::Evaluation("objective vectors differ in length".into()));
    }
    if a.iter().chain(b.iter()).any(|v| v.is_nan()) {
        return Err(Error::Evaluation("NaN objective value".into()));
    }
    let mut strictly = false;
    for (x, y) in a.iter().zip(b.iter()) {
        if x < y {
            return Ok(false);
        }
        if x > y {
            strictly = true;
        }
    }
    Ok(strictly)
}

fn dom(a: &ObjectiveVec, b: &ObjectiveVec) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Partitions `objs` into fronts of indices. Front 0 is the non-dominated set.
pub fn fast_nondominated_sort(objs: &[ObjectiveVec]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut dom_count = vec![0usize; n];
    let mut fronts = vec![Vec::new()];

    for p in 0..n {
        for q in (p + 1)..n {
            if dom(&objs[p], &objs[q]) {
                dominated_by_me[p].push(q);
                dom_count[q] += 1;
            } else if dom(&objs[q], &objs[p]) {
                dominated_by_me[q].push(p);
                dom_count[p] += 1;
            }
        }
    }
    for (p, c) in dom_count.iter().enumerate() {
        if *c == 0 {
            fronts[0].push(p);
        }
    }

    let mut i = 0;
    while !fronts[i].is_empty() {
        let mut next = Vec::new();
        for &p in &fronts[i] {
            for &q in &dominated_by_me[p] {
                dom_count[q] -= 1;
                if dom_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(next);
        i += 1;
    }
    fronts.pop();
    fronts
}

/// Crowding distance of each member of a single front.
pub fn crowding_distance(front: &[ObjectiveVec]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..N_OBJ {
        order.sort_by(|&a, &b| front[a][m].total_cmp(&front[b][m]).then(a.cmp(&b)));
        let lo = front[order[0]][m];
        let hi = front[order[n - 1]][m];
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        for k in 1..n - 1 {
            let gap = front[order[k + 1]][m] - front[order[k - 1]][m];
            dist[order[k]] += gap / range;
        }
    }
    dist
}

/// Sorts `pop` into fronts and fills in each member's rank and crowding.
pub fn assign_rank_and_crowding(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let objs: Vec<ObjectiveVec> = pop.iter().map(|i| i.objectives).collect();
    let fronts = fast_nondominated_sort(&objs);
    for (r, front) in fronts.iter().enumerate() {
        let fobjs: Vec<ObjectiveVec> = front.iter().map(|&i| objs[i]).collect();
        let cd = crowding_distance(&fobjs);
        for (&i, d) in front.iter().zip(cd) {
            pop[i].rank = r;
            pop[i].crowding = d;
        }
    }
    fronts
}

/// `Less` when `a` is the preferred parent.
fn crowded_compare(a: &Individual, b: &Individual) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then_with(|| b.crowding.partial_cmp(&a.crowding).unwrap_or(Ordering::Equal))
}

/// Binary tournament: returns the index of the winner of two uniform draws.
pub fn tournament_select<R: Rng + ?Sized>(pop: &[Individual], rng: &mut R) -> usize {
    let a = rng.gen_range(0..pop.len());
    let b = rng.gen_range(0..pop.len());
    tournament_winner(pop, a, b)
}

/// Lower rank wins, then larger crowding, then the first candidate.
pub fn tournament_winner(pop: &[Individual], first: usize, second: usize) -> usize {
    match crowded_compare(&pop[first], &pop[second]) {
        Ordering::Greater => second,
        _ => first,
    }
}

/// SBX spread factor for a uniform draw `u` in `[0, 1)`.
pub fn sbx_spread(u: f64, eta_c: f64) -> f64 {
    let e = 1.0 / (eta_c + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(e)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(e)
    }
}

/// Children of one gene pair for a given spread factor.
pub fn sbx_children(x1: f64, x2: f64, beta: f64) -> (f64, f64) {
    (
        0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2),
        0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2),
    )
}

pub fn sbx_crossover<R: Rng + ?Sized>(
    parent_a: &[f64],
    parent_b: &[f64],
    eta_c: f64,
    bounds: &[(f64, f64)],
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let mut a = Vec::with_capacity(parent_a.len());
    let mut b = Vec::with_capacity(parent_b.len());
    for ((&x1, &x2), &(lo, hi)) in parent_a.iter().zip(parent_b).zip(bounds) {
        let beta = sbx_spread(rng.gen::<f64>(), eta_c);
        let (c1, c2) = sbx_children(x1, x2, beta);
        a.push(c1.clamp(lo, hi));
        b.push(c2.clamp(lo, hi));
    }
    (a, b)
}

/// Bounded polynomial mutation of each gene with probability `prob`.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    genome: &mut [f64],
    eta_m: f64,
    prob: f64,
    bounds: &[(f64, f64)],
    rng: &mut R,
) {
    for (x, &(lo, hi)) in genome.iter_mut().zip(bounds) {
        if rng.gen::<f64>() >= prob {
            continue;
        }
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        let d1 = (*x - lo) / span;
        let d2 = (hi - *x) / span;
        let u: f64 = rng.gen();
        let pow = 1.0 / (eta_m + 1.0);
        let dq = if u < 0.5 {
            let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta_m + 1.0);
            v.powf(pow) - 1.0
        } else {
            let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta_m + 1.0);
            1.0 - v.powf(pow)
        };
        *x = (*x + dq * span).clamp(lo, hi);
    }
}

/// Keeps the best `n` of `pool` by front index, truncating the last admitted
/// front by descending crowding distance.
pub fn environmental_selection(mut pool: Vec<Individual>, n: usize) -> Vec<Individual> {
    let fronts = assign_rank_and_crowding(&mut pool);
    let mut keep: Vec<usize> = Vec::with_capacity(n);
    for front in fronts {
        if keep.len() + front.len() <= n {
            keep.extend(front);
        } else {
            let mut last = front;
            last.sort_by(|&a, &b| {
                pool[b]
                    .crowding
                    .partial_cmp(&pool[a].crowding)
                    .unwrap_or(Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let missing = n - keep.len();
            keep.extend(last.into_iter().take(missing));
        }
        if keep.len() == n {
            break;
        }
    }
    let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
    keep.into_iter()
        .map(|i| slots[i].take().expect("index selected once"))
        .collect()
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct Key(f64);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Exact hypervolume dominated by `points` relative to `reference`
/// (maximization). Sweeps the third objective while maintaining a 2-D
/// staircase of the first two.
pub fn hypervolume_3d(points: &[ObjectiveVec], reference: ObjectiveVec) -> Result<f64> {
    let mut shifted = Vec::with_capacity(points.len());
    for p in points {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("non-finite point {p:?}")));
        }
        if !p.iter().zip(&reference).all(|(v, r)| v >= r) {
            return Err(Error::Domain(format!(
                "point {p:?} does not dominate reference {reference:?}"
            )));
        }
        shifted.push([p[0] - reference[0], p[1] - reference[1], p[2] - reference[2]]);
    }
    shifted.sort_by(|a, b| b[2].total_cmp(&a[2]));

    let mut stairs: BTreeMap<Key, f64> = BTreeMap::new();
    let mut area = 0.0;
    let mut volume = 0.0;
    for (i, p) in shifted.iter().enumerate() {
        area += insert_staircase(&mut stairs, p[0], p[1]);
        let z_next = shifted.get(i + 1).map_or(0.0, |q| q[2]);
        volume += area * (p[2] - z_next);
    }
    Ok(volume)
}

/// Inserts `(x, y)` into a staircase keyed by ascending x with descending y
/// and returns the area gained.
fn insert_staircase(stairs: &mut BTreeMap<Key, f64>, x: f64, y: f64) -> f64 {
    if x <= 0.0 || y <= 0.0 {
        return 0.0;
    }
    if let Some((_, &yr)) = stairs.range(Key(x)..).next() {
        if yr >= y {
            return 0.0;
        }
    }
    let h_right = stairs
        .range((std::ops::Bound::Excluded(Key(x)), std::ops::Bound::Unbounded))
        .next()
        .map_or(0.0, |(_, &v)| v);

    let mut removed = Vec::new();
    let mut left_key = 0.0;
    for (k, &v) in stairs.range(..=Key(x)).rev() {
        if v <= y {
            removed.push((k.0, v));
        } else {
            left_key = k.0;
            break;
        }
    }
    removed.reverse();

    let mut gain = 0.0;
    let mut prev = left_key;
    for &(k, v) in &removed {
        gain += (k - prev) * (y - v);
        prev = k;
        stairs.remove(&Key(k));
    }
    gain += (x - prev) * (y - h_right);
    stairs.insert(Key(x), y);
    gain
}

/// Non-dominated archive of every evaluated point.
#[derive(Debug, Clone, Default)]
struct Archive {
    members: Vec<ObjectiveVec>,
}

impl Archive {
    fn offer(&mut self, p: ObjectiveVec) {
        if self.members.iter().any(|a| dom(a, &p) || *a == p) {
            return;
        }
        self.members.retain(|a| !dom(&p, a));
        self.members.push(p);
    }

    fn hypervolume(&self, reference: ObjectiveVec) -> f64 {
        let inside: Vec<ObjectiveVec> = self
            .members
            .iter()
            .copied()
            .filter(|p| p.iter().zip(&reference).all(|(v, r)| v >= r))
            .collect();
        hypervolume_3d(&inside, reference).unwrap_or(0.0)
    }
}

fn derive_reference(pop: &[Individual]) -> ObjectiveVec {
    let mut r = [0.0; N_OBJ];
    for (m, slot) in r.iter_mut().enumerate() {
        let lo = pop.iter().map(|i| i.objectives[m]).fold(f64::INFINITY, f64::min);
        let hi = pop.iter().map(|i| i.objectives[m]).fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let margin = if range > 0.0 {
            0.1 * range
        } else {
            (0.1 * lo.abs()).max(1.0)
        };
        *slot = lo - margin;
    }
    r
}

fn evaluate_all<F>(genomes: Vec<Vec<f64>>, evaluate: &F) -> Result<Vec<Individual>>
where
    F: Fn(&[f64]) -> Result<ObjectiveVec> + Sync,
{
    #[cfg(feature = "parallel")]
    let objs: Vec<Result<ObjectiveVec>> = {
        use rayon::prelude::*;
        genomes.par_iter().map(|g| evaluate(g)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let objs: Vec<Result<ObjectiveVec>> = genomes.iter().map(|g| evaluate(g)).collect();

    genomes
        .into_iter()
        .zip(objs)
        .map(|(g, o)| {
            let o = o?;
            if o.iter().any(|v| !v.is_finite()) {
                return Err(Error::Evaluation(format!(
                    "non-finite objectives {o:?} at genome {g:?}"
                )));
            }
            Ok(Individual::new(g, o))
        })
        .collect()
}

/// Runs NSGA-II on `evaluate` over the box `bounds`.
///
/// The random stream is consumed only by the sequential operator phase, so
/// parallel evaluation does not affect results.
pub fn evolve<F>(bounds: &[(f64, f64)], evaluate: &F, config: &EAConfig) -> Result<EvolutionResult>
where
    F: Fn(&[f64]) -> Result<ObjectiveVec> + Sync,
{
    config.validate()?;
    if bounds.is_empty() {
        return Err(Error::Config("genome must have at least one gene".into()));
    }
    if bounds.iter().any(|(lo, hi)| !(lo <= hi)) {
        return Err(Error::Config("every bound needs lower <= upper".into()));
    }
    let n = config.population_size;
    let mut_prob = config.mutation_prob.unwrap_or(1.0 / bounds.len() as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let genomes: Vec<Vec<f64>> = (0..n)
        .map(|_| bounds.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.gen::<f64>()).collect())
        .collect();
    let mut pop = evaluate_all(genomes, evaluate)?;
    assign_rank_and_crowding(&mut pop);

    let reference = config.reference_point.unwrap_or_else(|| derive_reference(&pop));
    let mut archive = Archive::default();
    for ind in &pop {
        archive.offer(ind.objectives);
    }
    let mut history = vec![GenerationRecord {
        generation: 0,
        hypervolume: archive.hypervolume(reference),
        front_size: pop.iter().filter(|i| i.rank == 0).count(),
        archive_size: archive.members.len(),
    }];

    let mut converged = false;
    let mut generations_run = 0;
    for gen in 1..=config.generations {
        let mut children = Vec::with_capacity(n);
        while children.len() < n {
            let pa = &pop[tournament_select(&pop, &mut rng)].genome;
            let pb = &pop[tournament_select(&pop, &mut rng)].genome;
            let (mut ca, mut cb) = if rng.gen::<f64>() < config.crossover_prob {
                sbx_crossover(pa, pb, config.eta_c, bounds, &mut rng)
            } else {
                (pa.clone(), pb.clone())
            };
            polynomial_mutation(&mut ca, config.eta_m, mut_prob, bounds, &mut rng);
            polynomial_mutation(&mut cb, config.eta_m, mut_prob, bounds, &mut rng);
            children.push(ca);
            children.push(cb);
        }
        children.truncate(n);

        let offspring = evaluate_all(children, evaluate)?;
        for ind in &offspring {
            archive.offer(ind.objectives);
        }
        let mut pool = pop;
        pool.extend(offspring);
        pop = environmental_selection(pool, n);

        history.push(GenerationRecord {
            generation: gen,
            hypervolume: archive.hypervolume(reference),
            front_size: pop.iter().filter(|i| i.rank == 0).count(),
            archive_size: archive.members.len(),
        });
        generations_run = gen;

        if config.plateau_tol > 0.0 && gen >= config.plateau_window {
            let now = history[gen].hypervolume;
            let then = history[gen - config.plateau_window].hypervolume;
            if now - then <= config.plateau_tol * then.abs() {
                converged = true;
                break;
            }
        }
    }

    let mut members: Vec<Individual> = Vec::new();
    for ind in pop.iter().filter(|i| i.rank == 0) {
        if !members.iter().any(|m| m.genome == ind.genome) {
            members.push(ind.clone());
        }
    }

    Ok(EvolutionResult {
        front: ParetoFront {
            members,
            reference_point: reference,
        },
        history,
        population: pop,
        generations_run,
        converged,
    })
}
