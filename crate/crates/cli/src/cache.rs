//! On-disk cache of Gaussian null samples, keyed by everything they depend
//! on: number of series, length, grid, number of draws and seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mstrend_core::multiscale::GaussianNull;
use mstrend_core::{LocationScaleGrid, WeightBank};

use crate::report::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    pub n: usize,
    pub len: usize,
    pub grid_hash: String,
    pub mc_draws: usize,
    pub seed: u64,
}

impl CacheKey {
    pub fn new(n: usize, len: usize, grid: &LocationScaleGrid, mc_draws: usize, seed: u64) -> Self {
        Self {
            n,
            len,
            grid_hash: grid_hash(grid),
            mc_draws,
            seed,
        }
    }

    fn file_name(&self) -> String {
        let key = serde_json::to_string(self).expect("key serializes");
        format!("null_{}.json", &sha256_hex(key.as_bytes())[..24])
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: CacheKey,
    null: GaussianNull,
}

/// SHA-256 over the exact bit patterns of the grid points.
pub fn grid_hash(grid: &LocationScaleGrid) -> String {
    let mut bytes = Vec::with_capacity(grid.len() * 16);
    for p in grid.points() {
        bytes.extend_from_slice(&p.u().to_bits().to_le_bytes());
        bytes.extend_from_slice(&p.h().to_bits().to_le_bytes());
    }
    sha256_hex(&bytes)
}

/// Returns the cached sample for `key` or simulates and stores it. A cache
/// file whose key does not match exactly is ignored and overwritten.
pub fn null_distribution(
    dir: Option<&Path>,
    key: &CacheKey,
    bank: &WeightBank,
) -> anyhow::Result<GaussianNull> {
    let path: Option<PathBuf> = dir.map(|d| d.join(key.file_name()));
    if let Some(path) = &path {
        if let Ok(text) = std::fs::read_to_string(path) {
            if let Ok(entry) = serde_json::from_str::<CacheEntry>(&text) {
                if &entry.key == key {
                    return Ok(entry.null);
                }
            }
        }
    }
    let null = GaussianNull::simulate(key.n, bank, key.mc_draws, key.seed)?;
    if let (Some(dir), Some(path)) = (dir, &path) {
        std::fs::create_dir_all(dir)?;
        let entry = CacheEntry {
            key: key.clone(),
            null: null.clone(),
        };
        std::fs::write(path, serde_json::to_string(&entry)?)?;
    }
    Ok(null)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_hit_returns_identical_sample() {
        let dir = tempfile::tempdir().unwrap();
        let grid = LocationScaleGrid::from_product(&[0.3, 0.5, 0.7], &[0.1, 0.2]).unwrap();
        let bank = WeightBank::new(40, &grid).unwrap();
        let key = CacheKey::new(3, 40, &grid, 150, 4);
        let first = null_distribution(Some(dir.path()), &key, &bank).unwrap();
        let second = null_distribution(Some(dir.path()), &key, &bank).unwrap();
        assert_eq!(first, second);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let uncached = null_distribution(None, &key, &bank).unwrap();
        assert_eq!(first, uncached);
    }

    #[test]
    fn grid_hash_distinguishes_grids() {
        let a = LocationScaleGrid::from_product(&[0.5], &[0.1]).unwrap();
        let b = LocationScaleGrid::from_product(&[0.5], &[0.2]).unwrap();
        assert_ne!(grid_hash(&a), grid_hash(&b));
    }
}
