//! WebAssembly bindings for the demo page. Every call returns a JSON string
//! so the page needs no generated type glue beyond the function shims.
//!
//! The black box is a forest trained on a two-feature toy concept: a disc
//! of approved points with a notch cut out of it, so rules need a few boxes.

use std::sync::Arc;

use rand::Rng;
use rulelens::blackbox::{relabel, train_forest, ForestModel, ForestParams, Oracle};
use rulelens::data::{Feature, FeatureSchema, Label, LabeledDataset, Record, Value};
use rulelens::global::{build_dendrogram, choose, collect_local, explanation_from, instance_seed, score_cuts, LocalConfig};
use rulelens::neighborhood::{generate, GaParams, Method, NeighborhoodConfig};
use rulelens::rng;
use rulelens::rule::format_rule;
use rulelens::surrogate::{explain_neighborhood, SurrogateParams};
use serde_json::{json, Value as Json};
use wasm_bindgen::prelude::*;

const SIDE: f64 = 10.0;

fn concept(x: f64, y: f64) -> Label {
    let in_disc = (x - 5.0).powi(2) + (y - 5.0).powi(2) < 12.0;
    let notch = x > 5.0 && (y - 5.0).abs() < 1.0;
    (in_disc && !notch) as Label
}

fn point(x: f64, y: f64) -> Record {
    Record::new(vec![Value::Num(x), Value::Num(y)])
}

fn coords(r: &Record) -> [f64; 2] {
    [r.get(0).as_num(), r.get(1).as_num()]
}

/// A trained toy black box and the records it was trained on.
#[wasm_bindgen]
pub struct Demo {
    data: LabeledDataset,
    model: ForestModel,
    seed: u64,
}

#[wasm_bindgen]
impl Demo {
    /// `records` points drawn uniformly over the square, forest of 30 trees.
    #[wasm_bindgen(constructor)]
    pub fn new(records: usize, seed: u32) -> Result<Demo, JsError> {
        let seed = seed as u64;
        let schema = Arc::new(
            FeatureSchema::new(vec![Feature::continuous("x", 0.0, SIDE), Feature::continuous("y", 0.0, SIDE)])
                .map_err(err)?
                .with_target("approved")
                .with_class_names("no", "yes"),
        );
        let mut g = rng::stream(seed, "demo.data", 0);
        let round = |v: f64| (v * 10.0).round() / 10.0;
        let recs: Vec<Record> =
            (0..records.max(2)).map(|_| point(round(g.gen_range(0.0..SIDE)), round(g.gen_range(0.0..SIDE)))).collect();
        let labels = recs.iter().map(|r| concept(r.get(0).as_num(), r.get(1).as_num())).collect();
        let data = LabeledDataset::new(schema, recs, labels).map_err(err)?;
        let model = train_forest(&data, &ForestParams { n_trees: 30, max_depth: 12, seed }).map_err(err)?;
        Ok(Demo { data, model, seed })
    }

    /// Training points with their black-box labels, plus a `res`×`res` grid
    /// of black-box labels for shading the background.
    pub fn landscape(&self, res: usize) -> Result<String, JsError> {
        let res = res.clamp(2, 200);
        let step = SIDE / res as f64;
        let mut grid = Vec::with_capacity(res * res);
        for j in 0..res {
            for i in 0..res {
                let z = point((i as f64 + 0.5) * step, (j as f64 + 0.5) * step);
                grid.push(self.model.predict(&z).map_err(err)?);
            }
        }
        let labels = self.model.predict_batch(self.data.records()).map_err(err)?;
        let points: Vec<Json> =
            self.data.records().iter().zip(labels).map(|(r, l)| json!({"xy": coords(r), "label": l})).collect();
        Ok(json!({"side": SIDE, "res": res, "grid": grid, "points": points}).to_string())
    }

    /// Neighborhood around `(x, y)` and the local explanation fitted to it.
    /// `method` is `uniform` or `genetic`.
    pub fn explain(&self, x: f64, y: f64, method: &str, size: usize, seed: u32) -> Result<String, JsError> {
        let method: Method = method.parse().map_err(err)?;
        let cfg = NeighborhoodConfig {
            size: size.clamp(10, 5000),
            method,
            ga: GaParams { population_size: 200, generations: 10, ..GaParams::default() },
            seed: seed as u64,
        };
        let schema = self.data.schema();
        let origin = point(x.clamp(0.0, SIDE), y.clamp(0.0, SIDE));
        let n = generate(&origin, schema, &cfg, &self.model).map_err(err)?;
        let e = explain_neighborhood(&n, schema, &SurrogateParams::default());
        let points: Vec<Json> = n.records.iter().zip(&n.labels).map(|(r, l)| json!({"xy": coords(r), "label": l})).collect();
        let cfs: Vec<Json> = e
            .counterfactuals
            .iter()
            .map(|c| json!({"rule": format_rule(&c.rule, schema), "changes": c.changes}))
            .collect();
        Ok(json!({
            "label": e.label,
            "rule": format_rule(&e.rule, schema),
            "counterfactuals": cfs,
            "fidelity": e.fidelity,
            "mean_distance": n.mean_distance(schema),
            "class_balance": n.class_balance(),
            "flags": e.flags(),
            "points": points,
        })
        .to_string())
    }

    /// Explains every training record, builds the dendrogram and scores every
    /// horizontal cut. Returns the cut curve and the selected rule set.
    pub fn globalize(&self, size: usize) -> Result<String, JsError> {
        let relabeled = relabel(&self.model, &self.data).map_err(err)?;
        let cfg = LocalConfig {
            neighborhood: NeighborhoodConfig {
                size: size.clamp(10, 2000),
                ga: GaParams { population_size: 100, generations: 8, ..GaParams::default() },
                seed: instance_seed(self.seed, 0),
                ..NeighborhoodConfig::default()
            },
            surrogate: SurrogateParams::default(),
            jobs: 1,
        };
        let local = collect_local(&self.model, &relabeled, &cfg).map_err(err)?;
        let d = build_dendrogram(&local.rules, &relabeled).map_err(err)?;
        let cuts = score_cuts(&d, &relabeled);
        let best = choose(&cuts);
        let global = explanation_from(&d, &relabeled, &cuts[best]);
        let schema = relabeled.schema();
        let curve: Vec<Json> = cuts
            .iter()
            .map(|c| {
                let h = if c.height.is_finite() { Some(c.height) } else { None };
                json!({"height": h, "rules": c.nodes.len(), "q": c.q, "fidelity": c.fidelity})
            })
            .collect();
        let rules: Vec<String> = global.rules.iter().map(|r| format_rule(r, schema)).collect();
        Ok(json!({
            "local_rules": local.rules.len(),
            "flagged": local.flagged,
            "cuts": curve,
            "selected": best,
            "rules": rules,
            "default": schema.class_name(global.default_class),
        })
        .to_string())
    }
}

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}
