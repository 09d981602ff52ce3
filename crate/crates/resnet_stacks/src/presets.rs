//! Named model layouts.
//!
//! The CIFAR-scale presets follow the standard four-stage channel plan
//! 64-128-256-512 with a 3×3 stem. Taylor-multistep presets keep that plan
//! and choose per-stage block counts so the main-path depth matches the
//! preset name; stages shallower than four blocks fall back to Euler
//! stacking (the three-state history cannot be seeded there).

use crate::config::{ModelConfig, SchemeKind, StageConfig};

fn cifar_stages(blocks: [usize; 4]) -> Vec<StageConfig> {
    let channels = [64, 128, 256, 512];
    let strides = [1, 2, 2, 2];
    (0..4)
        .map(|i| StageConfig {
            channels: channels[i],
            blocks: blocks[i],
            stride: strides[i],
        })
        .collect()
}

fn cifar(scheme: SchemeKind, blocks: [usize; 4]) -> ModelConfig {
    ModelConfig {
        scheme,
        in_channels: 3,
        stem_channels: 64,
        stages: cifar_stages(blocks),
        classes: 10,
        seed: 0,
        tau: 1.0,
    }
}

/// Small three-stage layout for 16×16 synthetic data; every stage is deep
/// enough (4 blocks) to run Taylor-multistep wiring.
fn smoke(scheme: SchemeKind) -> ModelConfig {
    ModelConfig {
        scheme,
        in_channels: 3,
        stem_channels: 8,
        stages: vec![
            StageConfig { channels: 8, blocks: 4, stride: 1 },
            StageConfig { channels: 12, blocks: 4, stride: 2 },
            StageConfig { channels: 16, blocks: 4, stride: 2 },
        ],
        classes: 4,
        seed: 0,
        tau: 1.0,
    }
}

pub const PRESET_NAMES: [&str; 10] = [
    "preactresnet18-cifar",
    "preactresnet34-cifar",
    "tmresnet22-cifar",
    "tmresnet36-cifar",
    "rkresnet-ie-18",
    "rkresnet-rk2-18",
    "rkresnet-rk3-18",
    "rkresnet-rk4-18",
    "smoke-euler",
    "smoke-tm",
];

pub fn preset(name: &str) -> Option<ModelConfig> {
    match name {
        "preactresnet18-cifar" => Some(cifar(SchemeKind::Euler, [2, 2, 2, 2])),
        "preactresnet34-cifar" => Some(cifar(SchemeKind::Euler, [3, 4, 6, 3])),
        "tmresnet22-cifar" => Some(cifar(SchemeKind::Tm, [4, 2, 2, 2])),
        "tmresnet36-cifar" => Some(cifar(SchemeKind::Tm, [4, 4, 6, 3])),
        "rkresnet-ie-18" => Some(cifar(SchemeKind::Ie, [2, 2, 2, 2])),
        "rkresnet-rk2-18" => Some(cifar(SchemeKind::Rk2, [2, 2, 2, 2])),
        "rkresnet-rk3-18" => Some(cifar(SchemeKind::Rk3, [2, 2, 2, 2])),
        "rkresnet-rk4-18" => Some(cifar(SchemeKind::Rk4, [2, 2, 2, 2])),
        "smoke-euler" => Some(smoke(SchemeKind::Euler)),
        "smoke-tm" => Some(smoke(SchemeKind::Tm)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_names_match_layouts() {
        assert_eq!(preset("preactresnet18-cifar").unwrap().nominal_depth(), 18);
        assert_eq!(preset("preactresnet34-cifar").unwrap().nominal_depth(), 34);
        assert_eq!(preset("tmresnet22-cifar").unwrap().nominal_depth(), 22);
        assert_eq!(preset("tmresnet36-cifar").unwrap().nominal_depth(), 36);
        assert_eq!(preset("rkresnet-rk4-18").unwrap().nominal_depth(), 18);
    }

    #[test]
    fn every_preset_validates() {
        for name in PRESET_NAMES {
            preset(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn unknown_preset_is_none() {
        assert!(preset("resnet9000").is_none());
    }
}
