use std::fmt::Write as _;
use std::io::{BufReader, BufWriter};
use std::net::TcpListener;
use std::path::Path;
use std::time::Instant;

use rulelens::blackbox::{relabel, serve, CountingOracle, Oracle};
use rulelens::data::{format_num, LabeledDataset};
use rulelens::global::{
    build_dendrogram, choose, collect_local, explanation_from, fidelity, instance_seed, q_bic, score_cuts, LocalConfig,
};
use rulelens::rule::{format_rule, parse_rules, Rule};
use rulelens::surrogate::explain;
use rulelens::synth;

use crate::config::RunConfig;
use crate::error::{read, usage, write, Result};
use crate::oracle::{builtin_forest, load, split};

fn load_data(cfg: &RunConfig) -> Result<LabeledDataset> {
    let (data, schema) = cfg.data_paths()?;
    Ok(LabeledDataset::load(data, schema)?)
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key} = {value}");
}

/// Returns a report for stdout and, when an output directory is set, saves
/// it there too.
fn emit(cfg: &RunConfig, name: &str, text: String) -> Result<String> {
    if cfg.out.is_some() {
        write(&cfg.out_dir()?.join(name), &text)?;
    }
    Ok(text)
}

pub fn train(cfg: &RunConfig) -> Result<String> {
    let data = load_data(cfg)?;
    let model = builtin_forest(&data, &cfg.forest)?;
    let (tr, ho) = split(data.len(), cfg.forest.seed);
    let out = cfg.out_dir()?;
    write(&out.join("model.txt"), &model.dump())?;
    let mut report = String::new();
    kv(&mut report, "trees", model.n_trees());
    kv(&mut report, "max_depth", cfg.forest.max_depth);
    kv(&mut report, "features_per_split", model.features_per_split());
    kv(&mut report, "seed", cfg.seed);
    kv(&mut report, "train_records", tr.len());
    kv(&mut report, "holdout_records", ho.len());
    kv(&mut report, "train_accuracy", format_num(model.accuracy(&data.subset(&tr))));
    if !ho.is_empty() {
        kv(&mut report, "holdout_accuracy", format_num(model.accuracy(&data.subset(&ho))));
    }
    emit(cfg, "train_report.txt", report)
}

pub fn explain_one(cfg: &RunConfig, index: Option<usize>, record: Option<&str>) -> Result<String> {
    let data = load_data(cfg)?;
    let schema = data.schema();
    let oracle = load(&cfg.oracle, &data, &cfg.forest)?;
    let mut n = cfg.neighborhood;
    let x = match (index, record) {
        (Some(i), None) => {
            let x = data.records().get(i).ok_or_else(|| usage(format!("index {i} out of range (0..{})", data.len())))?;
            n.seed = instance_seed(cfg.seed, i);
            x.clone()
        }
        (None, Some(text)) => {
            let fields: Vec<&str> = text.split(',').map(str::trim).collect();
            schema.parse_record(&fields)?
        }
        _ => return Err(usage("give exactly one of --index or --record")),
    };
    let e = explain(oracle.as_ref(), schema, &x, &n, &cfg.surrogate)?;
    if e.locally_constant {
        eprintln!("warning: locally constant black box: no record with another label was found near the instance");
    }
    if e.unfaithful_at_x {
        eprintln!("warning: the surrogate disagrees with the black box at the instance");
    }
    emit(cfg, "explanation.txt", e.dump(schema))
}

fn local_config(cfg: &RunConfig) -> LocalConfig {
    LocalConfig { neighborhood: cfg.neighborhood, surrogate: cfg.surrogate, jobs: cfg.jobs }
}

fn rule_file(header: &str, rules: &[Rule], data: &LabeledDataset) -> String {
    let mut s = format!("{header}\n");
    for r in rules {
        s.push_str(&format_rule(r, data.schema()));
        s.push('\n');
    }
    s
}

pub fn explain_all(cfg: &RunConfig) -> Result<String> {
    let data = load_data(cfg)?;
    let oracle = load(&cfg.oracle, &data, &cfg.forest)?;
    let local = collect_local(oracle.as_ref(), &data, &local_config(cfg))?;
    let out = cfg.out_dir()?;
    let mut text = String::new();
    for (i, e) in local.explanations.iter().enumerate() {
        let _ = writeln!(text, "## record {i}");
        text.push_str(&e.dump(data.schema()));
    }
    write(&out.join("explanations.txt"), &text)?;
    let header = format!("# local rules k={} flagged={}", local.rules.len(), local.flagged);
    write(&out.join("local_rules.txt"), &rule_file(&header, &local.rules, &data))?;
    let mut m = String::new();
    kv(&mut m, "explanations", local.explanations.len());
    kv(&mut m, "flagged", local.flagged);
    kv(&mut m, "local_rules", local.rules.len());
    Ok(m)
}

pub fn globalize(cfg: &RunConfig) -> Result<String> {
    let started = Instant::now();
    let data = load_data(cfg)?;
    let oracle = CountingOracle::new(load(&cfg.oracle, &data, &cfg.forest)?);
    let relabeled = relabel(&oracle, &data)?;
    let local = collect_local(&oracle, &relabeled, &local_config(cfg))?;
    let local_done = started.elapsed();
    let dendrogram = build_dendrogram(&local.rules, &relabeled)?;
    let cuts = score_cuts(&dendrogram, &relabeled);
    let best = choose(&cuts);
    let global = explanation_from(&dendrogram, &relabeled, &cuts[best]);
    let schema = relabeled.schema();

    let out = cfg.out_dir()?;
    let header = format!("# local rules k={} flagged={}", local.rules.len(), local.flagged);
    write(&out.join("local_rules.txt"), &rule_file(&header, &local.rules, &relabeled))?;
    write(&out.join("global_rules.txt"), &global.to_rule_file(schema))?;
    write(&out.join("dendrogram.dot"), &dendrogram.to_dot(schema))?;
    let mut csv = String::from("height,rules,q,fidelity\n");
    for c in &cuts {
        let _ = writeln!(csv, "{},{},{},{}", format_num(c.height), c.nodes.len(), format_num(c.q), format_num(c.fidelity));
    }
    write(&out.join("cuts.csv"), &csv)?;

    let all_leaves = &cuts[0];
    let (k, preds) = global.complexity();
    let mut m = String::new();
    kv(&mut m, "records", relabeled.len());
    kv(&mut m, "seed", cfg.seed);
    kv(&mut m, "flagged_explanations", local.flagged);
    kv(&mut m, "local_rules", local.rules.len());
    kv(&mut m, "local_fidelity", format_num(all_leaves.fidelity));
    kv(&mut m, "local_q", format_num(all_leaves.q));
    kv(&mut m, "global_rules", k);
    kv(&mut m, "global_predicates", preds);
    kv(&mut m, "global_fidelity", format_num(global.fidelity));
    kv(&mut m, "global_q", format_num(global.q));
    kv(&mut m, "cut_height", format_num(global.height));
    kv(&mut m, "default", schema.class_name(global.default_class));
    kv(&mut m, "oracle_queries", oracle.queries());
    write(&out.join("metrics.txt"), &m)?;
    // kept apart so the other outputs stay byte-identical between runs
    let total = started.elapsed();
    let timing = format!("local_seconds = {:.3}\ntotal_seconds = {:.3}\n", local_done.as_secs_f64(), total.as_secs_f64());
    write(&out.join("timing.txt"), &timing)?;
    Ok(m)
}

fn read_rules(path: &Path, data: &LabeledDataset) -> Result<Vec<Rule>> {
    let rules = parse_rules(&read(path)?, data.schema())?;
    if rules.is_empty() {
        return Err(usage(format!("{}: no rules", path.display())));
    }
    Ok(rules)
}

pub fn evaluate(cfg: &RunConfig, rules_path: &Path) -> Result<String> {
    let data = load_data(cfg)?;
    let oracle = load(&cfg.oracle, &data, &cfg.forest)?;
    let relabeled = relabel(oracle.as_ref(), &data)?;
    let rules = read_rules(rules_path, &relabeled)?;
    let default = relabeled.majority_label();
    let covered = relabeled.records().iter().filter(|r| rules.iter().any(|rule| rule.covers(r))).count();
    let mut m = String::new();
    kv(&mut m, "records", relabeled.len());
    kv(&mut m, "rules", rules.len());
    kv(&mut m, "predicates", rules.iter().map(Rule::len).sum::<usize>());
    kv(&mut m, "coverage", format_num(covered as f64 / relabeled.len().max(1) as f64));
    kv(&mut m, "fidelity", format_num(fidelity(&rules, default, &relabeled)));
    kv(&mut m, "q", format_num(q_bic(&rules, &relabeled)?));
    kv(&mut m, "default", relabeled.schema().class_name(default));
    emit(cfg, "evaluation.txt", m)
}

pub fn export_dot(cfg: &RunConfig, rules_path: &Path) -> Result<String> {
    let data = load_data(cfg)?;
    let oracle = load(&cfg.oracle, &data, &cfg.forest)?;
    let relabeled = relabel(oracle.as_ref(), &data)?;
    let rules = read_rules(rules_path, &relabeled)?;
    let d = build_dendrogram(&rules, &relabeled)?;
    emit(cfg, "dendrogram.dot", d.to_dot(relabeled.schema()))
}

/// Answers the wire protocol on stdin/stdout, or on a TCP address one
/// connection at a time.
pub fn serve_oracle(cfg: &RunConfig, listen: Option<&str>) -> Result<String> {
    let data = load_data(cfg)?;
    let oracle = load(&cfg.oracle, &data, &cfg.forest)?;
    let schema = data.schema();
    match listen {
        None => {
            let stdin = std::io::stdin();
            serve(oracle.as_ref(), schema, stdin.lock(), std::io::stdout().lock())?;
        }
        Some(addr) => {
            let listener = TcpListener::bind(addr).map_err(rulelens::Error::Io)?;
            eprintln!("listening on {}", listener.local_addr().map_err(rulelens::Error::Io)?);
            for stream in listener.incoming() {
                let stream = stream.map_err(rulelens::Error::Io)?;
                let reader = BufReader::new(stream.try_clone().map_err(rulelens::Error::Io)?);
                if let Err(e) = serve(oracle.as_ref() as &dyn Oracle, schema, reader, BufWriter::new(stream)) {
                    eprintln!("connection closed: {e}");
                }
            }
        }
    }
    Ok(String::new())
}

/// Writes the synthetic credit table and its schema.
pub fn synth_data(rows: usize, seed: u64, out: &Path) -> Result<String> {
    std::fs::create_dir_all(out).map_err(|source| crate::error::CliError::Io { path: out.to_path_buf(), source })?;
    let data = synth::credit_dataset(rows, seed);
    write(&out.join("credit.csv"), &data.to_csv()?)?;
    write(&out.join("credit.schema"), &data.schema().to_sidecar())?;
    Ok(format!("wrote {} records to {}\n", rows, out.join("credit.csv").display()))
}
