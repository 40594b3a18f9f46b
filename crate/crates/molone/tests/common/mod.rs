#![allow(dead_code)]

use molone_core::acquisition::BatchConfig;
use molone_core::engine::EngineConfig;

/// A shortened protocol that keeps every stage of the loop.
pub fn quick_engine() -> EngineConfig {
    EngineConfig {
        stages: 2,
        rounds_per_stage: 3,
        pair_pool: 64,
        batch: BatchConfig {
            q: 2,
            draws: 32,
            pool: 32,
            starts: 4,
            ..BatchConfig::default()
        },
        ..EngineConfig::default()
    }
}
