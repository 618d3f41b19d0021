//! Global sensitivity analysis: Morris elementary-effects screening and
//! variance-based Sobol indices estimated on a Saltelli design.
//!
//! Sampling uses a seeded ChaCha8 stream rather than a low-discrepancy
//! sequence; reports carry that fact in their `sampling` field.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sd::{self, ExogenousSeries, ModelCoefficients, PolicyBounds, PolicyVector, SimState, POLICY_NAMES};

pub const SAMPLING_NOTE: &str = "pseudo-random (ChaCha8, seeded)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub low: f64,
    pub high: f64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, low: f64, high: f64) -> Self {
        Self {
            name: name.into(),
            low,
            high,
        }
    }

    fn map(&self, unit: f64) -> f64 {
        self.low + (self.high - self.low) * unit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub params: Vec<Parameter>,
}

impl ParameterSpace {
    pub fn new(params: Vec<Parameter>) -> Result<Self> {
        let s = Self { params };
        s.validate()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::Config("parameter space is empty".into()));
        }
        for (i, p) in self.params.iter().enumerate() {
            if !(p.low.is_finite() && p.high.is_finite() && p.low < p.high) {
                return Err(Error::Config(format!(
                    "parameter {} needs low < high, got [{}, {}]",
                    p.name, p.low, p.high
                )));
            }
            if self.params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::Config(format!("duplicate parameter {}", p.name)));
            }
        }
        Ok(())
    }

    /// The seven policy levers over the given bounds.
    pub fn policy(bounds: &PolicyBounds) -> Self {
        let params = POLICY_NAMES
            .iter()
            .enumerate()
            .map(|(i, n)| Parameter::new(*n, bounds.lower[i], bounds.upper[i]))
            .collect();
        Self { params }
    }

    /// Policy levers plus the five behavioural coefficients that most
    /// shape the outputs: 12 parameters in total.
    pub fn default_model(bounds: &PolicyBounds, coeffs: &ModelCoefficients) -> Self {
        let mut s = Self::policy(bounds);
        let around = |name: &str, v: f64, lo_f: f64, hi_f: f64| {
            let (a, b) = (v * lo_f, v * hi_f);
            Parameter::new(name, a.min(b), a.max(b))
        };
        s.params.push(around("price_elasticity", coeffs.price_elasticity, 2.0, 0.2));
        s.params.push(around("glacier_effectiveness", coeffs.glacier_effectiveness, 0.5, 1.5));
        s.params.push(around("waste_effectiveness", coeffs.waste_effectiveness, 0.5, 1.5));
        s.params.push(around("co2_impact", coeffs.co2_impact, 0.5, 1.5));
        s.params.push(around("gov_base_share", coeffs.gov_base_share, 0.67, 1.33));
        s
    }

    fn map_unit(&self, unit: &[f64]) -> Vec<f64> {
        self.params.iter().zip(unit).map(|(p, u)| p.map(*u)).collect()
    }
}

// ---------------------------------------------------------------- Morris

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorrisTrajectory {
    /// k + 1 points in unit space.
    pub unit_points: Vec<Vec<f64>>,
    /// The same points mapped to parameter bounds.
    pub points: Vec<Vec<f64>>,
    /// Parameter moved between point j and j + 1.
    pub moved: Vec<usize>,
    /// Signed unit-space step between point j and j + 1.
    pub steps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorrisDesign {
    pub names: Vec<String>,
    pub levels: usize,
    pub delta: f64,
    pub trajectories: Vec<MorrisTrajectory>,
}

impl MorrisDesign {
    /// All points, trajectory by trajectory.
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.trajectories.iter().flat_map(|t| t.points.iter().cloned()).collect()
    }
}

/// Randomized one-at-a-time trajectories on a `levels`-point grid.
pub fn morris_sample(space: &ParameterSpace, r: usize, levels: usize, seed: u64) -> Result<MorrisDesign> {
    space.validate()?;
    if levels < 4 || levels % 2 != 0 {
        return Err(Error::Config(format!("levels must be even and >= 4, got {levels}")));
    }
    if r == 0 {
        return Err(Error::Config("at least one trajectory is required".into()));
    }
    let k = space.dim();
    let jump = levels / 2;
    let denom = (levels - 1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut trajectories = Vec::with_capacity(r);
    for _ in 0..r {
        // Start from a level that leaves room for a jump in the chosen direction.
        let mut grid: Vec<usize> = Vec::with_capacity(k);
        let mut up: Vec<bool> = Vec::with_capacity(k);
        for _ in 0..k {
            let base = rng.gen_range(0..jump);
            let dir_up = rng.gen::<bool>();
            grid.push(if dir_up { base } else { base + jump });
            up.push(dir_up);
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);

        let unit = |g: &[usize]| g.iter().map(|&l| l as f64 / denom).collect::<Vec<f64>>();
        let mut unit_points = vec![unit(&grid)];
        let mut steps = Vec::with_capacity(k);
        for &i in &order {
            let signed = if up[i] {
                grid[i] += jump;
                jump as f64 / denom
            } else {
                grid[i] -= jump;
                -(jump as f64) / denom
            };
            unit_points.push(unit(&grid));
            steps.push(signed);
        }
        let points = unit_points.iter().map(|u| space.map_unit(u)).collect();
        trajectories.push(MorrisTrajectory {
            unit_points,
            points,
            moved: order,
            steps,
        });
    }

    Ok(MorrisDesign {
        names: space.names(),
        levels,
        delta: jump as f64 / denom,
        trajectories,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorrisResult {
    pub names: Vec<String>,
    /// Mean absolute elementary effect.
    pub mu_star: Vec<f64>,
    pub mu: Vec<f64>,
    /// Sample standard deviation of the elementary effects.
    pub sigma: Vec<f64>,
    pub trajectories: usize,
}

/// Elementary-effect statistics from outputs aligned with [`MorrisDesign::points`].
pub fn morris_indices(design: &MorrisDesign, outputs: &[f64]) -> Result<MorrisResult> {
    let k = design.names.len();
    let expected = design.trajectories.len() * (k + 1);
    if outputs.len() != expected {
        return Err(Error::Analysis(format!(
            "expected {expected} outputs, got {}",
            outputs.len()
        )));
    }
    let mut effects: Vec<Vec<f64>> = vec![Vec::with_capacity(design.trajectories.len()); k];
    for (t, traj) in design.trajectories.iter().enumerate() {
        let f = &outputs[t * (k + 1)..(t + 1) * (k + 1)];
        for (j, (&i, &step)) in traj.moved.iter().zip(&traj.steps).enumerate() {
            effects[i].push((f[j + 1] - f[j]) / step);
        }
    }

    let mut mu_star = Vec::with_capacity(k);
    let mut mu = Vec::with_capacity(k);
    let mut sigma = Vec::with_capacity(k);
    for (i, ee) in effects.iter().enumerate() {
        if ee.is_empty() {
            return Err(Error::Analysis(format!(
                "no elementary effects for {}",
                design.names[i]
            )));
        }
        let n = ee.len() as f64;
        let m = ee.iter().sum::<f64>() / n;
        let ms = ee.iter().map(|e| e.abs()).sum::<f64>() / n;
        let var = if ee.len() > 1 {
            ee.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        mu.push(m);
        mu_star.push(ms);
        sigma.push(var.sqrt());
    }
    Ok(MorrisResult {
        names: design.names.clone(),
        mu_star,
        mu,
        sigma,
        trajectories: design.trajectories.len(),
    })
}

// ----------------------------------------------------------------- Sobol

/// Saltelli design: base matrices `a`, `b` and their column-swapped hybrids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaltelliDesign {
    pub names: Vec<String>,
    pub n: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    /// `ab[i]` is `a` with column `i` taken from `b`.
    pub ab: Vec<Vec<Vec<f64>>>,
    /// `ba[i]` is `b` with column `i` taken from `a`.
    pub ba: Vec<Vec<Vec<f64>>>,
}

impl SaltelliDesign {
    pub fn k(&self) -> usize {
        self.names.len()
    }

    /// Evaluation order: A, B, AB_1..AB_k, BA_1..BA_k; `n·(2k+2)` points.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.n * (2 * self.k() + 2));
        out.extend(self.a.iter().cloned());
        out.extend(self.b.iter().cloned());
        for m in &self.ab {
            out.extend(m.iter().cloned());
        }
        for m in &self.ba {
            out.extend(m.iter().cloned());
        }
        out
    }
}

pub fn saltelli_sample(space: &ParameterSpace, n: usize, seed: u64) -> Result<SaltelliDesign> {
    space.validate()?;
    if n < 2 {
        return Err(Error::Config(format!("base sample size must be >= 2, got {n}")));
    }
    let k = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let u: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
                space.map_unit(&u)
            })
            .collect()
    };
    let a = draw(&mut rng);
    let b = draw(&mut rng);
    let hybrid = |base: &[Vec<f64>], donor: &[Vec<f64>], col: usize| -> Vec<Vec<f64>> {
        base.iter()
            .zip(donor)
            .map(|(r, d)| {
                let mut row = r.clone();
                row[col] = d[col];
                row
            })
            .collect()
    };
    let ab = (0..k).map(|i| hybrid(&a, &b, i)).collect();
    let ba = (0..k).map(|i| hybrid(&b, &a, i)).collect();
    Ok(SaltelliDesign {
        names: space.names(),
        n,
        a,
        b,
        ab,
        ba,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolResult {
    pub names: Vec<String>,
    pub first_order: Vec<f64>,
    pub total: Vec<f64>,
    /// Bootstrap 95% percentile intervals.
    pub first_order_ci: Vec<(f64, f64)>,
    pub total_ci: Vec<(f64, f64)>,
    pub n: usize,
    pub bootstrap: usize,
}

impl SobolResult {
    pub fn first_order_half_width(&self, i: usize) -> f64 {
        0.5 * (self.first_order_ci[i].1 - self.first_order_ci[i].0)
    }

    pub fn total_half_width(&self, i: usize) -> f64 {
        0.5 * (self.total_ci[i].1 - self.total_ci[i].0)
    }
}

struct SobolBlocks<'a> {
    fa: &'a [f64],
    fb: &'a [f64],
    fab: Vec<&'a [f64]>,
    fba: Vec<&'a [f64]>,
}

/// First-order (Saltelli 2010 form) and total (Jansen) estimates over the
/// given rows, averaged over the A-based and B-based hybrids.
fn estimate(blocks: &SobolBlocks<'_>, rows: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = rows.len() as f64;
    let mean = rows.iter().map(|&j| blocks.fa[j] + blocks.fb[j]).sum::<f64>() / (2.0 * m);
    let var = rows
        .iter()
        .map(|&j| (blocks.fa[j] - mean).powi(2) + (blocks.fb[j] - mean).powi(2))
        .sum::<f64>()
        / (2.0 * m - 1.0);
    if !(var > 0.0) {
        return None;
    }
    let k = blocks.fab.len();
    let mut first = Vec::with_capacity(k);
    let mut total = Vec::with_capacity(k);
    for i in 0..k {
        let (fab, fba) = (blocks.fab[i], blocks.fba[i]);
        let mut s1 = 0.0;
        let mut st = 0.0;
        for &j in rows {
            let (fa, fb) = (blocks.fa[j], blocks.fb[j]);
            s1 += fb * (fab[j] - fa) + fa * (fba[j] - fb);
            st += (fa - fab[j]).powi(2) + (fb - fba[j]).powi(2);
        }
        first.push(s1 / (2.0 * m) / var);
        total.push(st / (4.0 * m) / var);
    }
    Some((first, total))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Sobol indices from outputs aligned with [`SaltelliDesign::points`].
pub fn sobol_indices(
    design: &SaltelliDesign,
    outputs: &[f64],
    bootstrap: usize,
    seed: u64,
) -> Result<SobolResult> {
    let (n, k) = (design.n, design.k());
    if outputs.len() != n * (2 * k + 2) {
        return Err(Error::Analysis(format!(
            "expected {} outputs, got {}",
            n * (2 * k + 2),
            outputs.len()
        )));
    }
    if let Some(pos) = outputs.iter().position(|v| !v.is_finite()) {
        return Err(Error::Analysis(format!("non-finite output at design row {pos}")));
    }
    let block = |b: usize| &outputs[b * n..(b + 1) * n];
    let blocks = SobolBlocks {
        fa: block(0),
        fb: block(1),
        fab: (0..k).map(|i| block(2 + i)).collect(),
        fba: (0..k).map(|i| block(2 + k + i)).collect(),
    };

    let all: Vec<usize> = (0..n).collect();
    let (first, total) = estimate(&blocks, &all).ok_or_else(|| {
        Error::Analysis("output variance is zero; all Sobol indices are undefined".into())
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_B007);
    let mut boot_first: Vec<Vec<f64>> = vec![Vec::with_capacity(bootstrap); k];
    let mut boot_total: Vec<Vec<f64>> = vec![Vec::with_capacity(bootstrap); k];
    let mut rows = vec![0usize; n];
    for _ in 0..bootstrap {
        for r in rows.iter_mut() {
            *r = rng.gen_range(0..n);
        }
        if let Some((f, t)) = estimate(&blocks, &rows) {
            for i in 0..k {
                boot_first[i].push(f[i]);
                boot_total[i].push(t[i]);
            }
        }
    }
    let interval = |samples: &mut Vec<f64>, point: f64| -> (f64, f64) {
        if samples.is_empty() {
            return (point, point);
        }
        samples.sort_by(f64::total_cmp);
        (percentile(samples, 0.025), percentile(samples, 0.975))
    };
    let first_order_ci = (0..k).map(|i| interval(&mut boot_first[i], first[i])).collect();
    let total_ci = (0..k).map(|i| interval(&mut boot_total[i], total[i])).collect();

    Ok(SobolResult {
        names: design.names.clone(),
        first_order: first,
        total,
        first_order_ci,
        total_ci,
        n,
        bootstrap,
    })
}

// ------------------------------------------------------ model wiring

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    F1,
    F2,
    F3,
}

impl Output {
    pub const ALL: [Output; 3] = [Output::F1, Output::F2, Output::F3];

    pub fn label(&self) -> &'static str {
        match self {
            Output::F1 => "f1",
            Output::F2 => "f2",
            Output::F3 => "f3",
        }
    }

    fn index(&self) -> usize {
        match self {
            Output::F1 => 0,
            Output::F2 => 1,
            Output::F3 => 2,
        }
    }
}

/// Which outputs to tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputSelector {
    F1,
    F2,
    F3,
    All,
}

impl OutputSelector {
    pub fn outputs(&self) -> Vec<Output> {
        match self {
            OutputSelector::F1 => vec![Output::F1],
            OutputSelector::F2 => vec![Output::F2],
            OutputSelector::F3 => vec![Output::F3],
            OutputSelector::All => Output::ALL.to_vec(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(Self::F1),
            "f2" => Ok(Self::F2),
            "f3" => Ok(Self::F3),
            "all" => Ok(Self::All),
            _ => Err(Error::Config(format!("unknown output selector '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Morris,
    Sobol,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "morris" => Ok(Self::Morris),
            "sobol" => Ok(Self::Sobol),
            _ => Err(Error::Config(format!("unknown sensitivity method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GsaConfig {
    pub trajectories: usize,
    pub levels: usize,
    pub base_samples: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for GsaConfig {
    fn default() -> Self {
        Self {
            trajectories: 20,
            levels: 4,
            base_samples: 1024,
            bootstrap: 200,
            seed: 0,
        }
    }
}

/// The fixed inputs a sensitivity run perturbs around.
#[derive(Debug, Clone)]
pub struct ModelContext {
    pub exog: ExogenousSeries,
    pub coeffs: ModelCoefficients,
    pub policy: PolicyVector,
    pub init: SimState,
}

impl ModelContext {
    /// Objectives with the named parameters overridden by `values`.
    pub fn evaluate(&self, names: &[String], values: &[f64]) -> Result<[f64; 3]> {
        let mut policy = self.policy;
        let mut coeffs = self.coeffs;
        for (name, &v) in names.iter().zip(values) {
            if let Some(slot) = policy.field_mut(name) {
                *slot = v;
            } else {
                coeffs.set(name, v)?;
            }
        }
        let (_, obj) = sd::simulate(&policy, &self.exog, &coeffs, &self.init)?;
        let out = obj.to_array();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!(
                "non-finite outputs {out:?} at {:?}",
                names.iter().zip(values).collect::<Vec<_>>()
            )));
        }
        Ok(out)
    }

    fn evaluate_many(&self, names: &[String], points: &[Vec<f64>]) -> Result<Vec<[f64; 3]>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            points.par_iter().map(|p| self.evaluate(names, p)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            points.iter().map(|p| self.evaluate(names, p)).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorrisRow {
    pub parameter: String,
    pub mu_star: f64,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolRow {
    pub parameter: String,
    pub first_order: f64,
    pub total: f64,
    pub first_order_ci: (f64, f64),
    pub total_ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum SensitivityTable {
    Morris { output: Output, rows: Vec<MorrisRow> },
    Sobol { output: Output, rows: Vec<SobolRow> },
}

/// Parameters × (f1, f2, f3) matrix of the headline measure
/// (μ* for Morris, total index for Sobol).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityMatrix {
    pub measure: String,
    pub parameters: Vec<String>,
    pub outputs: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Each column divided by its largest absolute entry.
    pub normalized: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub method: Method,
    pub sampling: String,
    pub evaluations: usize,
    /// Ranked by descending headline measure.
    pub tables: Vec<SensitivityTable>,
    pub matrix: SensitivityMatrix,
}

fn build_matrix(measure: &str, names: &[String], per_output: &[Vec<f64>]) -> SensitivityMatrix {
    let k = names.len();
    let values: Vec<Vec<f64>> = (0..k).map(|i| per_output.iter().map(|c| c[i]).collect()).collect();
    let maxes: Vec<f64> = per_output
        .iter()
        .map(|c| c.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        .collect();
    let normalized = values
        .iter()
        .map(|row| {
            row.iter()
                .zip(&maxes)
                .map(|(v, m)| if *m > 0.0 { v / m } else { 0.0 })
                .collect()
        })
        .collect();
    SensitivityMatrix {
        measure: measure.to_string(),
        parameters: names.to_vec(),
        outputs: Output::ALL.iter().map(|o| o.label().to_string()).collect(),
        values,
        normalized,
    }
}

/// Runs Morris or Sobol analysis of the simulation objectives over `space`.
pub fn analyze_model(
    ctx: &ModelContext,
    space: &ParameterSpace,
    selector: OutputSelector,
    method: Method,
    config: &GsaConfig,
) -> Result<SensitivityReport> {
    space.validate()?;
    let names = space.names();
    match method {
        Method::Morris => {
            let design = morris_sample(space, config.trajectories, config.levels, config.seed)?;
            let points = design.points();
            let outs = ctx.evaluate_many(&names, &points)?;
            let mut results = Vec::with_capacity(3);
            for o in Output::ALL {
                let col: Vec<f64> = outs.iter().map(|v| v[o.index()]).collect();
                results.push(morris_indices(&design, &col)?);
            }
            let tables = selector
                .outputs()
                .into_iter()
                .map(|o| {
                    let r = &results[o.index()];
                    let mut rows: Vec<MorrisRow> = (0..names.len())
                        .map(|i| MorrisRow {
                            parameter: names[i].clone(),
                            mu_star: r.mu_star[i],
                            mu: r.mu[i],
                            sigma: r.sigma[i],
                        })
                        .collect();
                    rows.sort_by(|a, b| b.mu_star.total_cmp(&a.mu_star));
                    SensitivityTable::Morris { output: o, rows }
                })
                .collect();
            let cols: Vec<Vec<f64>> = results.iter().map(|r| r.mu_star.clone()).collect();
            Ok(SensitivityReport {
                method,
                sampling: SAMPLING_NOTE.to_string(),
                evaluations: points.len(),
                tables,
                matrix: build_matrix("mu_star", &names, &cols),
            })
        }
        Method::Sobol => {
            let design = saltelli_sample(space, config.base_samples, config.seed)?;
            let points = design.points();
            let outs = ctx.evaluate_many(&names, &points)?;
            let mut results: Vec<Option<SobolResult>> = Vec::with_capacity(3);
            let wanted = selector.outputs();
            for o in Output::ALL {
                let col: Vec<f64> = outs.iter().map(|v| v[o.index()]).collect();
                match sobol_indices(&design, &col, config.bootstrap, config.seed) {
                    Ok(r) => results.push(Some(r)),
                    // A constant unselected output only blanks its matrix column.
                    Err(Error::Analysis(_)) if !wanted.contains(&o) => results.push(None),
                    Err(e) => return Err(e),
                }
            }
            let tables = wanted
                .iter()
                .map(|o| {
                    let r = results[o.index()].as_ref().expect("selected outputs are estimated");
                    let mut rows: Vec<SobolRow> = (0..names.len())
                        .map(|i| SobolRow {
                            parameter: names[i].clone(),
                            first_order: r.first_order[i],
                            total: r.total[i],
                            first_order_ci: r.first_order_ci[i],
                            total_ci: r.total_ci[i],
                        })
                        .collect();
                    rows.sort_by(|a, b| b.total.total_cmp(&a.total));
                    SensitivityTable::Sobol { output: *o, rows }
                })
                .collect();
            let cols: Vec<Vec<f64>> = results
                .iter()
                .map(|r| match r {
                    Some(r) => r.total.clone(),
                    None => vec![0.0; names.len()],
                })
                .collect();
            Ok(SensitivityReport {
                method,
                sampling: SAMPLING_NOTE.to_string(),
                evaluations: points.len(),
                tables,
                matrix: build_matrix("total_index", &names, &cols),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_space(k: usize) -> ParameterSpace {
        ParameterSpace::new((0..k).map(|i| Parameter::new(format!("x{}", i + 1), 0.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn space_validation() {
        assert!(ParameterSpace::new(vec![Parameter::new("a", 1.0, 1.0)]).is_err());
        assert!(ParameterSpace::new(vec![Parameter::new("a", 0.0, 1.0), Parameter::new("a", 0.0, 2.0)]).is_err());
        assert!(ParameterSpace::new(vec![]).is_err());
    }

    #[test]
    fn morris_trajectory_shape() {
        let d = morris_sample(&unit_space(2), 5, 4, 1).unwrap();
        assert!((d.delta - 2.0 / 3.0).abs() < 1e-15);
        for t in &d.trajectories {
            assert_eq!(t.points.len(), 3);
            for j in 0..2 {
                let diff: Vec<usize> = (0..2)
                    .filter(|&c| t.unit_points[j][c] != t.unit_points[j + 1][c])
                    .collect();
                assert_eq!(diff, vec![t.moved[j]]);
                let delta = t.unit_points[j + 1][t.moved[j]] - t.unit_points[j][t.moved[j]];
                assert!((delta.abs() - 2.0 / 3.0).abs() < 1e-12);
            }
            for p in &t.unit_points {
                assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn morris_grid_errors() {
        assert!(morris_sample(&unit_space(2), 5, 3, 1).is_err());
        assert!(morris_sample(&unit_space(2), 5, 2, 1).is_err());
        assert!(morris_sample(&unit_space(2), 0, 4, 1).is_err());
    }

    #[test]
    fn morris_linear_and_constant() {
        let d = morris_sample(&unit_space(2), 20, 4, 7).unwrap();
        let lin: Vec<f64> = d.points().iter().map(|x| 2.0 * x[0] + x[1]).collect();
        let r = morris_indices(&d, &lin).unwrap();
        assert!((r.mu_star[0] - 2.0).abs() < 1e-12);
        assert!((r.mu_star[1] - 1.0).abs() < 1e-12);
        assert!(r.sigma.iter().all(|s| *s < 1e-10));

        let flat = vec![3.0; lin.len()];
        let r = morris_indices(&d, &flat).unwrap();
        assert!(r.mu_star.iter().chain(&r.sigma).all(|v| *v == 0.0));
    }

    #[test]
    fn morris_detects_interaction() {
        let d = morris_sample(&unit_space(2), 20, 4, 9).unwrap();
        let prod: Vec<f64> = d.points().iter().map(|x| x[0] * x[1]).collect();
        let r = morris_indices(&d, &prod).unwrap();
        assert!(r.sigma[0] > 0.0);
    }

    #[test]
    fn saltelli_shape() {
        let d = saltelli_sample(&unit_space(7), 512, 3).unwrap();
        assert_eq!(d.points().len(), 8192);
        assert_ne!(d.a, d.b);
        for i in 0..7 {
            for (row, (a, b)) in d.ab[i].iter().zip(d.a.iter().zip(&d.b)) {
                for c in 0..7 {
                    if c == i {
                        assert_eq!(row[c], b[c]);
                    } else {
                        assert_eq!(row[c], a[c]);
                    }
                }
            }
        }
    }

    #[test]
    fn sobol_zero_variance_is_error() {
        let d = saltelli_sample(&unit_space(2), 16, 3).unwrap();
        let y = vec![1.0; d.points().len()];
        assert!(matches!(sobol_indices(&d, &y, 10, 0), Err(Error::Analysis(_))));
    }

    #[test]
    fn sobol_absent_variable_has_no_total_effect() {
        let d = saltelli_sample(&unit_space(3), 2048, 21).unwrap();
        let y: Vec<f64> = d.points().iter().map(|x| (6.0 * x[0]).sin() + x[0]).collect();
        let r = sobol_indices(&d, &y, 50, 1).unwrap();
        assert!(r.total[1].abs() < 1e-12 && r.total[2].abs() < 1e-12);
        assert!((r.total[0] - 1.0).abs() < 0.05);
    }

    #[test]
    fn selector_and_method_parsing() {
        assert_eq!(OutputSelector::parse("all").unwrap().outputs().len(), 3);
        assert!(OutputSelector::parse("f4").is_err());
        assert!(Method::parse("fast").is_err());
        assert_eq!(Method::parse("sobol").unwrap(), Method::Sobol);
    }
}
