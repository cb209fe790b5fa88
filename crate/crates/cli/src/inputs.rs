//! File loading and writing shared by the subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use publicspeak::corpus::{parse_corpus, Corpus};
use publicspeak::evaluate::ExperimentConfig;
use publicspeak::featurize::{load_predicate_tables, LocaleConfig, PredicateTable};

use crate::{DataFlags, Global, SolverFlags, Usage};

/// Reads an input file. A missing or unreadable input is a usage error.
pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Usage(format!("cannot read {}: {e}", path.display())).into())
}

/// Writes `bytes` to `path`, or to stdout for `-`.
pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if path == Path::new("-") {
        use std::io::Write;
        let mut out = std::io::stdout().lock();
        out.write_all(bytes)?;
        return Ok(out.flush()?);
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let bytes = read(path)?;
    parse_corpus(&bytes).with_context(|| format!("corpus {}", path.display()))
}

/// Files in `dir` with one of `exts`, sorted by name.
pub fn files_with(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Usage(format!("cannot read directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().and_then(|e| e.to_str()).is_some_and(|e| exts.contains(&e)))
        .collect();
    files.sort();
    Ok(files)
}

/// Locale configurations by city, from one file or a directory of files.
pub fn load_locales(path: &Path) -> Result<BTreeMap<String, LocaleConfig>> {
    let files = if path.is_dir() {
        files_with(path, &["toml", "json"])?
    } else if path.exists() {
        vec![path.to_path_buf()]
    } else {
        return Err(Usage(format!("locale path {} does not exist", path.display())).into());
    };
    let mut out = BTreeMap::new();
    for f in files {
        let l = LocaleConfig::load(&f).with_context(|| format!("locale {}", f.display()))?;
        if out.insert(l.city.clone(), l).is_some() {
            return Err(Usage(format!("two locale files for the same city ({})", f.display())).into());
        }
    }
    Ok(out)
}

pub fn load_tables(paths: &[PathBuf]) -> Result<BTreeMap<String, PredicateTable>> {
    let mut out: BTreeMap<String, PredicateTable> = BTreeMap::new();
    for p in paths {
        let bytes = read(p)?;
        for t in load_predicate_tables(&bytes).with_context(|| format!("predicate tables {}", p.display()))? {
            match out.get_mut(&t.meeting_id) {
                Some(existing) => existing.atoms.extend(t.atoms),
                None => {
                    out.insert(t.meeting_id.clone(), t);
                }
            }
        }
    }
    Ok(out)
}

/// Corpus, locales and tables, with every city covered by a locale.
pub struct Data {
    pub corpus: Corpus,
    pub locales: BTreeMap<String, LocaleConfig>,
    pub tables: BTreeMap<String, PredicateTable>,
}

pub fn load_data(flags: &DataFlags) -> Result<Data> {
    let corpus = load_corpus(&flags.corpus)?;
    let locales = load_locales(&flags.locales)?;
    if let Some(city) = corpus.cities.iter().find(|c| !locales.contains_key(*c)) {
        return Err(Usage(format!("no locale configuration for city {city}")).into());
    }
    let tables = load_tables(&flags.tables)?;
    Ok(Data { corpus, locales, tables })
}

/// The config file (if any) with `--seed` and solver flags applied on top.
pub fn effective_config(global: &Global, solver: &SolverFlags) -> Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        None => ExperimentConfig::default(),
        Some(p) => {
            let bytes = read(p)?;
            let text = String::from_utf8(bytes).map_err(|e| Usage(format!("{}: {e}", p.display())))?;
            let parsed = if p.extension().and_then(|e| e.to_str()) == Some("json") {
                serde_json::from_str(&text).map_err(|e| Usage(format!("config {}: {e}", p.display())))?
            } else {
                toml::from_str(&text).map_err(|e| Usage(format!("config {}: {e}", p.display())))?
            };
            parsed
        }
    };
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    let sv = &mut cfg.solver;
    if let Some(v) = solver.rho {
        sv.rho = v;
    }
    if let Some(v) = solver.max_iters {
        sv.max_iterations = v;
    }
    if let Some(v) = solver.eps_abs {
        sv.eps_abs = v;
    }
    if let Some(v) = solver.eps_rel {
        sv.eps_rel = v;
    }
    sv.seed = cfg.seed;
    Ok(cfg)
}

pub fn to_json_pretty<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}
