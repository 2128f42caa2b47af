//! Output artifacts. Every file name carries the first 12 hex digits of the
//! run's config hash, and every file embeds the full hash: CSVs on a leading
//! `# config_hash: <hex>` line, JSON in a top-level `config_hash` field.
//! A `<command>-<hash12>-manifest.json` lists the files of one run.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

const HASH_PREFIX: &str = "# config_hash: ";
const SHORT_HASH: usize = 12;

/// SHA-256 of the compact JSON encoding, in lowercase hex.
pub fn config_hash(value: &Value) -> String {
    let bytes = serde_json::to_vec(value).expect("JSON values always serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub tool: String,
    pub tool_version: String,
    pub files: Vec<String>,
}

pub struct Artifacts {
    dir: PathBuf,
    command: &'static str,
    hash: String,
    files: Vec<String>,
}

/// Renders one JSON scalar as a CSV field: null is empty, numbers use the
/// shortest representation that round-trips.
fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

impl Artifacts {
    pub fn new(dir: &Path, command: &'static str, hash: String) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            hash,
            files: Vec::new(),
        })
    }

    fn name(&self, suffix: &str) -> String {
        format!("{}-{}-{suffix}", self.command, &self.hash[..SHORT_HASH])
    }

    fn write(&mut self, name: String, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(&name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        if !self.files.contains(&name) {
            self.files.push(name);
        }
        Ok(path)
    }

    /// Writes `rows` under `columns`, pulling each column by key.
    pub fn write_table(&mut self, suffix: &str, columns: &[&str], rows: &[Map<String, Value>]) -> Result<PathBuf> {
        let mut out = format!("{HASH_PREFIX}{}\n", self.hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(columns)?;
            for row in rows {
                w.write_record(columns.iter().map(|c| cell(row.get(*c))))?;
            }
            w.flush()?;
        }
        self.write(self.name(suffix), &out)
    }

    /// Writes a JSON object with `config_hash` as its first field.
    pub fn write_json(&mut self, suffix: &str, body: Map<String, Value>) -> Result<PathBuf> {
        let mut doc = Map::new();
        doc.insert("config_hash".into(), Value::from(self.hash.clone()));
        doc.extend(body);
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        self.write(self.name(suffix), text.as_bytes())
    }

    pub fn finish(mut self, config_path: Option<&Path>) -> Result<PathBuf> {
        let manifest_name = self.name("manifest.json");
        let manifest = RunManifest {
            config_hash: self.hash.clone(),
            command: self.command.to_string(),
            config_path: config_path.map(Path::to_path_buf),
            output_dir: self.dir.clone(),
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            files: self.files.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        self.write(manifest_name, text.as_bytes())
    }
}

/// The hash a file claims to belong to, if it carries one.
fn embedded_hash(path: &Path) -> Result<Option<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "csv") {
        return Ok(text.lines().next().and_then(|l| l.strip_prefix(HASH_PREFIX)).map(str::to_string));
    }
    if path.extension().is_some_and(|e| e == "json") {
        let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(v.get("config_hash").and_then(Value::as_str).map(str::to_string));
    }
    Ok(None)
}

/// Checks that every hashed file in `dir` agrees with its own name and with
/// the manifest that lists it, and that manifests list only present files.
pub fn audit_dir(dir: &Path) -> Result<()> {
    if !dir.exists() {
        return Ok(());
    }
    let mut problems = Vec::new();
    let mut listed = std::collections::HashMap::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    for path in entries.iter().filter(|p| p.to_string_lossy().ends_with("-manifest.json")) {
        let m: RunManifest = serde_json::from_str(&fs::read_to_string(path)?)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        for f in &m.files {
            if !dir.join(f).exists() {
                problems.push(format!("{f}: listed in {} but missing", path.display()));
            }
            listed.insert(f.clone(), m.config_hash.clone());
        }
    }
    for path in &entries {
        let Some(found) = embedded_hash(path)? else { continue };
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let in_name = name.split('-').nth(1).unwrap_or("");
        if !found.starts_with(in_name) || in_name.len() != SHORT_HASH {
            problems.push(format!("{name}: embeds hash {found}, which does not match its name"));
        }
        match listed.get(&name) {
            Some(h) if *h == found => {}
            Some(h) => problems.push(format!("{name}: embeds hash {found}, manifest says {h}")),
            None if !name.ends_with("-manifest.json") => {
                problems.push(format!("{name}: not listed in any manifest"))
            }
            None => {}
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        bail!("stale or mismatched output directory {}:\n  {}", dir.display(), problems.join("\n  "))
    }
}
