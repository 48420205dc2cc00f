//! Synthetic neighborhoods around an instance, labeled by the black box.
//!
//! Two generators: i.i.d. uniform sampling over the schema's domain, and a
//! genetic search that evolves one population towards records close to `x`
//! with the same black-box label and another towards close records with the
//! opposite label.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::blackbox::Oracle;
use crate::data::{FeatureKind, FeatureSchema, Label, Record, Value};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Uniform,
    Genetic,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Method::Uniform),
            "genetic" => Ok(Method::Genetic),
            other => Err(Error::Config(format!("unknown neighborhood method `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaParams {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub elitism_count: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams { population_size: 500, generations: 20, crossover_prob: 0.7, mutation_prob: 0.2, elitism_count: 5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborhoodConfig {
    /// Synthetic records, not counting the instance itself.
    pub size: usize,
    pub method: Method,
    pub ga: GaParams,
    pub seed: u64,
}

impl Default for NeighborhoodConfig {
    fn default() -> Self {
        NeighborhoodConfig { size: 1000, method: Method::Genetic, ga: GaParams::default(), seed: 0 }
    }
}

impl NeighborhoodConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 10 {
            return Err(Error::Config(format!("neighborhood size {} is below 10", self.size)));
        }
        let ga = &self.ga;
        for (name, p) in [("crossover_prob", ga.crossover_prob), ("mutation_prob", ga.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        if ga.population_size == 0 || ga.population_size < ga.elitism_count {
            return Err(Error::Config(format!(
                "population_size {} must be positive and at least elitism_count {}",
                ga.population_size, ga.elitism_count
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborhoodWarning {
    /// The opposite-label search never found a record the black box labels
    /// differently from `x`.
    LocallyConstant,
}

/// Best fitness of each population, one entry per generation (index 0 is
/// the initial population).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GaTrace {
    pub best_same: Vec<f64>,
    pub best_diff: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighborhood {
    pub records: Vec<Record>,
    pub labels: Vec<Label>,
    pub origin: Record,
    pub origin_label: Label,
    pub warning: Option<NeighborhoodWarning>,
    pub trace: Option<GaTrace>,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Fraction of records sharing the instance's label.
    pub fn class_balance(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&l| l == self.origin_label).count() as f64 / self.labels.len() as f64
    }

    pub fn mean_distance(&self, schema: &FeatureSchema) -> f64 {
        let total: f64 = self.records.iter().map(|z| distance(schema, &self.origin, z)).sum();
        total / self.records.len().max(1) as f64
    }
}

/// Mixed distance in [0, 1]: mean over features of categorical mismatch or
/// range-normalized absolute difference (clipped to 1).
pub fn distance(schema: &FeatureSchema, x: &Record, z: &Record) -> f64 {
    let m = schema.len();
    if m == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for (i, f) in schema.features().iter().enumerate() {
        total += match (x.get(i), z.get(i)) {
            (Value::Cat(a), Value::Cat(b)) => (a != b) as u8 as f64,
            (Value::Num(a), Value::Num(b)) => {
                let range = f.range().unwrap_or(0.0);
                let diff = (a - b).abs();
                if range > 0.0 {
                    (diff / range).min(1.0)
                } else if diff == 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            _ => 1.0,
        };
    }
    total / m as f64
}

fn sample_value(f: &FeatureKind, rng: &mut ChaCha8Rng) -> Value {
    match f {
        FeatureKind::Categorical { values } => Value::Cat(rng.gen_range(0..values.len()) as u32),
        FeatureKind::Continuous { min, max } => {
            if max > min {
                Value::Num(rng.gen_range(*min..=*max))
            } else {
                Value::Num(*min)
            }
        }
    }
}

/// Uniform sampling over the schema's domain.
pub fn gen_uniform(x: &Record, schema: &FeatureSchema, cfg: &NeighborhoodConfig, oracle: &dyn Oracle) -> Result<Neighborhood> {
    cfg.validate()?;
    schema.check(x)?;
    let mut rng = rng::stream(cfg.seed, "neigh.uniform", 0);
    let mut records = Vec::with_capacity(cfg.size + 1);
    while records.len() < cfg.size {
        let mut z = x.clone();
        // the instance enters exactly once, so redraw exact copies of it
        for _ in 0..16 {
            z = Record::new(schema.features().iter().map(|f| sample_value(&f.kind, &mut rng)).collect());
            if &z != x {
                break;
            }
        }
        records.push(z);
    }
    let origin_label = oracle.predict(x)?;
    let mut labels = oracle.predict_batch(&records)?;
    records.push(x.clone());
    labels.push(origin_label);
    Ok(Neighborhood { records, labels, origin: x.clone(), origin_label, warning: None, trace: None })
}

struct Evolution<'a> {
    schema: &'a FeatureSchema,
    x: &'a Record,
    x_label: Label,
    oracle: &'a dyn Oracle,
    cache: HashMap<Record, Label>,
    sigma: Vec<f64>,
    ga: GaParams,
}

impl Evolution<'_> {
    fn label_all(&mut self, pop: &[Record]) -> Result<()> {
        let mut queued = std::collections::HashSet::new();
        let mut fresh: Vec<Record> = Vec::new();
        for z in pop {
            if !self.cache.contains_key(z) && queued.insert(z) {
                fresh.push(z.clone());
            }
        }
        if !fresh.is_empty() {
            let labels = self.oracle.predict_batch(&fresh)?;
            for (z, l) in fresh.into_iter().zip(labels) {
                self.cache.insert(z, l);
            }
        }
        Ok(())
    }

    fn fitness(&self, z: &Record, same: bool) -> f64 {
        let label = self.cache[z];
        let hit = if same { label == self.x_label } else { label != self.x_label };
        let clone_penalty = (z == self.x) as u8 as f64;
        hit as u8 as f64 + (1.0 - distance(self.schema, self.x, z)) - clone_penalty
    }

    fn mutate(&self, z: &mut Record, prob: f64, rng: &mut ChaCha8Rng) {
        for (i, f) in self.schema.features().iter().enumerate() {
            if !rng.gen_bool(prob) {
                continue;
            }
            match &f.kind {
                FeatureKind::Categorical { .. } => z.set(i, sample_value(&f.kind, rng)),
                FeatureKind::Continuous { min, max } => {
                    let v = z.get(i).as_num();
                    let jitter = if self.sigma[i] > 0.0 {
                        Normal::new(0.0, self.sigma[i]).expect("positive sigma").sample(rng)
                    } else {
                        0.0
                    };
                    z.set(i, Value::Num((v + jitter).clamp(*min, *max)));
                }
            }
        }
    }

    fn tournament<'p>(&self, pop: &'p [Record], fit: &[f64], rng: &mut ChaCha8Rng) -> &'p Record {
        let mut best = rng.gen_range(0..pop.len());
        for _ in 0..2 {
            let c = rng.gen_range(0..pop.len());
            if fit[c] > fit[best] {
                best = c;
            }
        }
        &pop[best]
    }

    /// Runs one population; returns the final population sorted by fitness
    /// (best first) and the per-generation best fitness.
    fn run(&mut self, same: bool, rng: &mut ChaCha8Rng) -> Result<(Vec<Record>, Vec<f64>)> {
        let n = self.ga.population_size;
        // Half perturbed copies of x, half drawn from the whole domain: with
        // Gaussian steps alone, a boundary a few sigmas away is never found.
        let mut pop: Vec<Record> = (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    let mut z = self.x.clone();
                    self.mutate(&mut z, self.ga.mutation_prob, rng);
                    z
                } else {
                    Record::new(self.schema.features().iter().map(|f| sample_value(&f.kind, rng)).collect())
                }
            })
            .collect();
        let mut trace = Vec::with_capacity(self.ga.generations + 1);
        for generation in 0..=self.ga.generations {
            self.label_all(&pop)?;
            let fit: Vec<f64> = pop.iter().map(|z| self.fitness(z, same)).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| fit[b].total_cmp(&fit[a]));
            trace.push(fit[order[0]]);
            if generation == self.ga.generations {
                let sorted = order.into_iter().map(|i| pop[i].clone()).collect();
                return Ok((sorted, trace));
            }
            let mut next: Vec<Record> = order[..self.ga.elitism_count].iter().map(|&i| pop[i].clone()).collect();
            while next.len() < n {
                let mut a = self.tournament(&pop, &fit, rng).clone();
                let mut b = self.tournament(&pop, &fit, rng).clone();
                if rng.gen_bool(self.ga.crossover_prob) {
                    for i in 0..a.len() {
                        if rng.gen_bool(0.5) {
                            let (va, vb) = (a.get(i), b.get(i));
                            a.set(i, vb);
                            b.set(i, va);
                        }
                    }
                }
                self.mutate(&mut a, self.ga.mutation_prob, rng);
                self.mutate(&mut b, self.ga.mutation_prob, rng);
                next.push(a);
                if next.len() < n {
                    next.push(b);
                }
            }
            pop = next;
        }
        unreachable!("loop returns on the last generation")
    }

    /// `count` records from the best of `ranked`, distinct and never `x`;
    /// cycles when the population holds fewer distinct records.
    fn pick(&self, ranked: &[Record], count: usize, rng: &mut ChaCha8Rng) -> Vec<Record> {
        let mut distinct: Vec<Record> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for z in ranked {
            if z != self.x && seen.insert(z.clone()) {
                distinct.push(z.clone());
            }
        }
        if distinct.is_empty() {
            // every individual is a clone of x: fall back to forced mutation
            for _ in 0..count.max(1) * 16 {
                if distinct.len() >= count.max(1) {
                    break;
                }
                let mut z = self.x.clone();
                self.mutate(&mut z, 1.0, rng);
                if &z != self.x {
                    distinct.push(z);
                }
            }
        }
        if distinct.is_empty() {
            return Vec::new();
        }
        (0..count).map(|i| distinct[i % distinct.len()].clone()).collect()
    }
}

/// Genetic neighborhood: half the records from the same-label population,
/// half from the opposite-label one, plus `x`.
pub fn gen_genetic(x: &Record, schema: &FeatureSchema, cfg: &NeighborhoodConfig, oracle: &dyn Oracle) -> Result<Neighborhood> {
    cfg.validate()?;
    schema.check(x)?;
    let x_label = oracle.predict(x)?;
    let sigma = schema.features().iter().map(|f| 0.05 * f.range().unwrap_or(0.0)).collect();
    let mut evo = Evolution { schema, x, x_label, oracle, cache: HashMap::new(), sigma, ga: cfg.ga };
    evo.cache.insert(x.clone(), x_label);

    let mut rng_same = rng::stream(cfg.seed, "neigh.ga.same", 0);
    let mut rng_diff = rng::stream(cfg.seed, "neigh.ga.diff", 0);
    let (same_pop, best_same) = evo.run(true, &mut rng_same)?;
    let (diff_pop, best_diff) = evo.run(false, &mut rng_diff)?;

    let found_other = diff_pop.iter().any(|z| evo.cache[z] != x_label);
    let n_same = cfg.size - cfg.size / 2;
    let mut records = evo.pick(&same_pop, n_same, &mut rng_same);
    records.extend(evo.pick(&diff_pop, cfg.size / 2, &mut rng_diff));
    evo.label_all(&records)?;
    let mut labels: Vec<Label> = records.iter().map(|z| evo.cache[z]).collect();
    records.push(x.clone());
    labels.push(x_label);

    // shuffle so the surrogate never sees population order
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut rng::stream(cfg.seed, "neigh.ga.shuffle", 0));
    let records: Vec<Record> = order.iter().map(|&i| records[i].clone()).collect();
    labels = order.iter().map(|&i| labels[i]).collect();

    Ok(Neighborhood {
        records,
        labels,
        origin: x.clone(),
        origin_label: x_label,
        warning: (!found_other).then_some(NeighborhoodWarning::LocallyConstant),
        trace: Some(GaTrace { best_same, best_diff }),
    })
}

pub fn generate(x: &Record, schema: &FeatureSchema, cfg: &NeighborhoodConfig, oracle: &dyn Oracle) -> Result<Neighborhood> {
    match cfg.method {
        Method::Uniform => gen_uniform(x, schema, cfg, oracle),
        Method::Genetic => gen_genetic(x, schema, cfg, oracle),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::{ConstantModel, ThresholdModel};
    use crate::data::Feature;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            Feature::continuous("x1", 0.0, 1.0),
            Feature::continuous("x2", 0.0, 1.0),
            Feature::categorical("c", &["a", "b", "c"]),
        ])
        .unwrap()
    }

    fn small(method: Method, seed: u64) -> NeighborhoodConfig {
        NeighborhoodConfig {
            size: 200,
            method,
            ga: GaParams { population_size: 100, generations: 10, ..GaParams::default() },
            seed,
        }
    }

    fn x() -> Record {
        Record::new(vec![Value::Num(0.45), Value::Num(0.5), Value::Cat(1)])
    }

    #[test]
    fn config_validation() {
        let mut c = small(Method::Uniform, 0);
        c.size = 9;
        assert!(c.validate().is_err());
        let mut c = small(Method::Genetic, 0);
        c.ga.mutation_prob = 1.5;
        assert!(c.validate().is_err());
        let mut c = small(Method::Genetic, 0);
        c.ga.elitism_count = 101;
        assert!(c.validate().is_err());
    }

    #[test]
    fn distance_bounds() {
        let s = schema();
        assert_eq!(distance(&s, &x(), &x()), 0.0);
        let far = Record::new(vec![Value::Num(1.0), Value::Num(0.0), Value::Cat(0)]);
        let d = distance(&s, &x(), &far);
        assert!((d - (0.55 + 0.5 + 1.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_is_seeded_and_includes_x_once() {
        let s = schema();
        let o = ThresholdModel { feature: 0, threshold: 0.5 };
        let a = gen_uniform(&x(), &s, &small(Method::Uniform, 3), &o).unwrap();
        let b = gen_uniform(&x(), &s, &small(Method::Uniform, 3), &o).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 201);
        assert_eq!(a.records.iter().filter(|r| **r == x()).count(), 1);
    }

    #[test]
    fn constant_oracle_uniform_balance() {
        let n = gen_uniform(&x(), &schema(), &small(Method::Uniform, 1), &ConstantModel(1)).unwrap();
        assert_eq!(n.class_balance(), 1.0);
    }

    #[test]
    fn genetic_near_boundary_is_balanced() {
        let s = schema();
        let o = ThresholdModel { feature: 0, threshold: 0.5 };
        let n = gen_genetic(&x(), &s, &small(Method::Genetic, 5), &o).unwrap();
        assert_eq!(n.len(), 201);
        assert_eq!(n.warning, None);
        let b = n.class_balance();
        assert!((0.3..=0.7).contains(&b), "balance {b}");
        assert_eq!(n.records.iter().filter(|r| **r == x()).count(), 1);
        for r in &n.records {
            s.check(r).unwrap();
            for i in 0..2 {
                assert!((0.0..=1.0).contains(&r.get(i).as_num()));
            }
        }
    }

    #[test]
    fn constant_oracle_warns() {
        let n = gen_genetic(&x(), &schema(), &small(Method::Genetic, 2), &ConstantModel(0)).unwrap();
        assert_eq!(n.warning, Some(NeighborhoodWarning::LocallyConstant));
        assert_eq!(n.class_balance(), 1.0);
        let trace = n.trace.unwrap();
        assert!(trace.best_diff.iter().all(|&f| f <= 1.0));
    }

    #[test]
    fn elitism_keeps_best_fitness_monotone() {
        let o = ThresholdModel { feature: 0, threshold: 0.5 };
        let n = gen_genetic(&x(), &schema(), &small(Method::Genetic, 9), &o).unwrap();
        let t = n.trace.unwrap();
        assert_eq!(t.best_same.len(), 11);
        for w in t.best_same.windows(2).chain(t.best_diff.windows(2)) {
            assert!(w[1] >= w[0], "{w:?}");
        }
    }
}
