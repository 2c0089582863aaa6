#![allow(dead_code)]

pub mod dsl_checks;
pub mod scoring_oracle;
pub mod trees;

use std::path::PathBuf;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}
