#![allow(dead_code)]

use std::path::{Path, PathBuf};

use hmc_core::config::RunConfig;
use hmc_core::io::write_text;
use hmc_core::synthetic::Instance;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Small walk, embedding and grid settings for fast end-to-end runs.
pub const FAST: &str = r#"
[classes]
min_size = 5
max_size = 300

[cv]
folds = 3

[walk]
walk_length = 10
walks_per_node = 2

[embedding]
dimension = 8
epochs = 1

[classifier]
learning_rates = [0.1]
l2_strengths = [0.1]
epochs = [20]
"#;

/// Writes `inst` plus an `hmc.toml` built from `extra` into `dir`.
pub fn write_instance(dir: &Path, inst: &Instance, extra: &str) -> PathBuf {
    write_text(&dir.join("edges.tsv"), &inst.edges_tsv()).unwrap();
    write_text(&dir.join("hierarchy.tsv"), &inst.hierarchy_tsv()).unwrap();
    write_text(&dir.join("annotations.tsv"), &inst.annotations_tsv()).unwrap();
    let toml = format!(
        "[input]\nedges = \"edges.tsv\"\nannotations = \"annotations.tsv\"\nhierarchy = \"hierarchy.tsv\"\n{extra}"
    );
    let path = dir.join("hmc.toml");
    write_text(&path, &toml).unwrap();
    path
}

pub fn load(path: &Path) -> RunConfig {
    RunConfig::load(path).unwrap()
}

/// Copies a fixture directory (inputs and config only) into `dir`.
pub fn copy_fixture(name: &str, dir: &Path) -> PathBuf {
    for entry in std::fs::read_dir(fixture(name)).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            std::fs::copy(entry.path(), dir.join(entry.file_name())).unwrap();
        }
    }
    dir.join("hmc.toml")
}

/// Every file under `root`, relative path and contents, sorted.
pub fn snapshot(root: &Path, skip: &[&str]) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, skip: &[&str], out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, skip, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                if !skip.iter().any(|s| rel.ends_with(s)) {
                    out.push((rel, std::fs::read(&path).unwrap()));
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, skip, &mut out);
    out.sort();
    out
}
