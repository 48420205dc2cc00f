//! Run settings from flags and an optional `key = value` config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use rulelens::blackbox::ForestParams;
use rulelens::neighborhood::{GaParams, Method, NeighborhoodConfig};
use rulelens::surrogate::SurrogateParams;

use crate::error::{read, usage, Result};
use crate::oracle::OracleSpec;

/// Flags shared by every command. Each one may also be given in the config
/// file under the same name; flags win.
#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Config file of `key = value` lines using the flag names as keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV file with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Schema sidecar for the CSV file.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// builtin | model:<dump> | tcp:<host:port> | cmd:<argv> | threshold:<feature>:<t> | constant:<class>
    #[arg(long)]
    pub oracle: Option<String>,
    /// Root seed; every random choice is derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Neighborhood generator: uniform or genetic.
    #[arg(long)]
    pub neigh: Option<String>,
    /// Synthetic records per neighborhood.
    #[arg(long)]
    pub size: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Trees in the builtin forest.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Genetic population size.
    #[arg(long)]
    pub population: Option<usize>,
    /// Genetic generations.
    #[arg(long)]
    pub generations: Option<usize>,
}

const KEYS: &[&str] =
    &["data", "schema", "oracle", "seed", "neigh", "size", "out", "jobs", "trees", "population", "generations"];

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub oracle: OracleSpec,
    pub seed: u64,
    pub neighborhood: NeighborhoodConfig,
    pub surrogate: SurrogateParams,
    pub forest: ForestParams,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

impl RunConfig {
    pub fn data_paths(&self) -> Result<(&Path, &Path)> {
        let data = self.data.as_deref().ok_or_else(|| usage("missing --data"))?;
        let schema = self.schema.as_deref().ok_or_else(|| usage("missing --schema"))?;
        Ok((data, schema))
    }

    pub fn out_dir(&self) -> Result<&Path> {
        let out = self.out.as_deref().ok_or_else(|| usage("missing --out"))?;
        std::fs::create_dir_all(out).map_err(|source| crate::error::CliError::Io { path: out.to_path_buf(), source })?;
        Ok(out)
    }
}

/// Parses the config file format: `key = value` lines, `#` comments.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| usage(format!("config line {}: expected key = value", i + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(usage(format!("config line {}: unknown key `{k}`", i + 1)));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn pick<T: FromStr>(flag: Option<T>, file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match file.get(key) {
        Some(v) => v.parse().map(Some).map_err(|_| usage(format!("config: bad value `{v}` for `{key}`"))),
        None => Ok(None),
    }
}

/// Config-file paths are taken relative to the config file.
fn pick_path(flag: Option<PathBuf>, file: &BTreeMap<String, String>, key: &str, base: &Path) -> Option<PathBuf> {
    flag.or_else(|| file.get(key).map(|v| base.join(v)))
}

pub fn resolve(c: &Common) -> Result<RunConfig> {
    let (file, base) = match &c.config {
        Some(p) => (parse_config(&read(p)?)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (BTreeMap::new(), PathBuf::new()),
    };
    let seed: u64 = pick(c.seed, &file, "seed")?.ok_or_else(|| usage("missing --seed (runs must be reproducible)"))?;
    let oracle: OracleSpec = pick(c.oracle.clone(), &file, "oracle")?.unwrap_or_else(|| "builtin".into()).parse()?;
    let method = match pick(c.neigh.clone(), &file, "neigh")? {
        Some(m) => m.parse::<Method>().map_err(|_| usage(format!("unknown neighborhood method `{m}`")))?,
        None => Method::Genetic,
    };
    let defaults = NeighborhoodConfig::default();
    let mut ga = GaParams::default();
    if let Some(p) = pick(c.population, &file, "population")? {
        ga.population_size = p;
    }
    if let Some(g) = pick(c.generations, &file, "generations")? {
        ga.generations = g;
    }
    let neighborhood = NeighborhoodConfig {
        size: pick(c.size, &file, "size")?.unwrap_or(defaults.size),
        method,
        ga,
        seed,
    };
    neighborhood.validate()?;
    let forest = ForestParams { n_trees: pick(c.trees, &file, "trees")?.unwrap_or(100), seed, ..ForestParams::default() };
    Ok(RunConfig {
        data: pick_path(c.data.clone(), &file, "data", &base),
        schema: pick_path(c.schema.clone(), &file, "schema", &base),
        oracle,
        seed,
        neighborhood,
        surrogate: SurrogateParams::default(),
        forest,
        out: pick_path(c.out.clone(), &file, "out", &base),
        jobs: pick(c.jobs, &file, "jobs")?.unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("rulelens-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(&path, "# demo\nseed = 7\nsize = 200\nneigh = uniform\ndata = d.csv\n").unwrap();
        let c = Common { config: Some(path), size: Some(300), ..Common::default() };
        let r = resolve(&c).unwrap();
        assert_eq!(r.seed, 7);
        assert_eq!(r.neighborhood.size, 300);
        assert_eq!(r.neighborhood.method, Method::Uniform);
        assert_eq!(r.data, Some(dir.join("d.csv")));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn bad_config_lines() {
        assert!(parse_config("seed 3").is_err());
        assert!(parse_config("colour = red").is_err());
        assert_eq!(parse_config("  jobs=2 \n\n").unwrap()["jobs"], "2");
    }

    #[test]
    fn seed_is_required() {
        assert!(resolve(&Common::default()).is_err());
    }
}
