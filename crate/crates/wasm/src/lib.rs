//! Browser demo bindings: three interactive views over the covering-set
//! laboratory, exposed as plain-data functions (JSON strings in, RGBA
//! buffers out) so the page needs no framework and no web-sys glue.

use wasm_bindgen::prelude::*;

use coverlab_core::content::{g_lower, hausdorff_content_upper, GLowerStrategy};
use coverlab_core::dyadic::{example_two_cubes, fat_cantor, DyadicSet};
use coverlab_core::energy::EnergyEngine;
use coverlab_core::gauge::Gauge;
use coverlab_core::sim::{
    box_dimension_estimate, geometric_blocks, sample_centers, trial_seed, truncated_limsup,
    DisplacementFamily, EstimatorMode, GeneratorSchedule, LimsupChain, SamplingDistribution,
};

fn covering_chain(alpha: f64, seed: u32, n_max: u64, l_max: u8) -> Result<LimsupChain, String> {
    let sched = GeneratorSchedule::balls(2, 0.5, alpha / 2.0, n_max).map_err(|e| e.to_string())?;
    let disp = DisplacementFamily::translation();
    let centers = sample_centers(
        &SamplingDistribution::Uniform { dim: 2 },
        n_max,
        trial_seed(seed as u64, 0),
    )
    .map_err(|e| e.to_string())?;
    let blocks = geometric_blocks(&sched, 4, 2.0, l_max).map_err(|e| e.to_string())?;
    truncated_limsup(&centers, &sched, &disp, &blocks).map_err(|e| e.to_string())
}

/// Simulate a planar random covering with balls `r_n = 0.5 n^{-alpha/2}` and
/// report the per-block counts and the box-dimension estimate as JSON.
#[wasm_bindgen]
pub fn covering_summary(alpha: f64, seed: u32, n_max: u32, l_max: u8) -> String {
    let run = || -> Result<String, String> {
        let chain = covering_chain(alpha, seed, n_max as u64, l_max)?;
        let est = box_dimension_estimate(
            &chain,
            EstimatorMode::GuardedChain { full_threshold: 0.98, saturation_skip: 0.5 },
        )
        .map_err(|e| e.to_string())?;
        let blocks: Vec<serde_json::Value> = (0..chain.stages.len())
            .map(|j| {
                serde_json::json!({
                    "n_end": chain.boundaries[j + 1],
                    "level": chain.levels[j],
                    "stage_cells": chain.stages[j].count_positive_cells(chain.levels[j]),
                    "chain_cells": chain.chain[j].count_positive_cells(chain.levels[j]),
                    "stage_measure": chain.stages[j].measure(),
                    "occupancy": chain.block_occupancy[j],
                })
            })
            .collect();
        Ok(serde_json::json!({
            "alpha": alpha,
            "expected_dimension": (2.0 / alpha).min(2.0),
            "estimate": est.value,
            "r_squared": est.r_squared,
            "survival": chain.survival(),
            "blocks": blocks,
        })
        .to_string())
    };
    run().unwrap_or_else(|e| serde_json::json!({ "error": e }).to_string())
}

fn paint(set: &DyadicSet, size: usize, rgba: &mut [u8], color: [u8; 4]) {
    let level = set.level();
    let n = 1usize << level;
    let scale = size as f64 / n as f64;
    for idx in set.iter_indices() {
        let (x0, y0) = (idx[0] as f64 * scale, idx[1] as f64 * scale);
        let (x1, y1) = ((idx[0] + 1) as f64 * scale, (idx[1] + 1) as f64 * scale);
        for py in y0 as usize..(y1.ceil() as usize).min(size) {
            for px in x0 as usize..(x1.ceil() as usize).min(size) {
                let o = 4 * ((size - 1 - py) * size + px);
                rgba[o..o + 4].copy_from_slice(&color);
            }
        }
    }
}

/// RGBA image (size × size) of one block of the covering simulation: the
/// stage union in light blue, the surviving nested chain in dark.
#[wasm_bindgen]
pub fn covering_render(alpha: f64, seed: u32, block: usize, size: usize, n_max: u32, l_max: u8) -> Vec<u8> {
    let mut rgba = vec![0u8; 4 * size * size];
    for px in rgba.chunks_exact_mut(4) {
        px.copy_from_slice(&[250, 250, 252, 255]);
    }
    if let Ok(chain) = covering_chain(alpha, seed, n_max as u64, l_max) {
        let j = block.min(chain.stages.len() - 1);
        paint(&chain.stages[j], size, &mut rgba, [165, 200, 235, 255]);
        paint(&chain.chain[j], size, &mut rgba, [25, 55, 110, 255]);
    }
    rgba
}

/// Number of blocks the covering simulation produces for these parameters.
#[wasm_bindgen]
pub fn covering_blocks(alpha: f64, seed: u32, n_max: u32, l_max: u8) -> usize {
    covering_chain(alpha, seed, n_max as u64, l_max).map(|c| c.stages.len()).unwrap_or(0)
}

fn two_cubes_parts(ratio: f64, level: u8) -> Result<(DyadicSet, f64, f64, DyadicSet), String> {
    let r1 = 0.05;
    let rho = (0.5 / ratio).min(0.99);
    let a = example_two_cubes(2, r1, r1 * ratio, rho, 4, level).map_err(|e| e.to_string())?;
    let engine = EnergyEngine::new(Gauge::power(2, 1.0).map_err(|e| e.to_string())?);
    let g = engine.g_value(&a).map_err(|e| e.to_string())?;
    let strategy = GLowerStrategy {
        max_piece_level: Some(2),
        min_piece_cells: 32,
        thinning_ps: vec![],
        ..GLowerStrategy::default()
    };
    let big = g_lower(&a, &engine, &strategy).map_err(|e| e.to_string())?;
    Ok((a, g, big.value, big.witness))
}

/// The cube-plus-diffuse-cube example: g, the G lower bound, and the
/// amplification G/g at t = 1, as JSON.
#[wasm_bindgen]
pub fn two_cubes_summary(ratio: f64, level: u8) -> String {
    match two_cubes_parts(ratio, level) {
        Ok((a, g, big, witness)) => serde_json::json!({
            "ratio": ratio,
            "measure": a.measure(),
            "g": g,
            "g_lower": big,
            "amplification": big / g,
            "witness_cells": witness.cell_count(),
        })
        .to_string(),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

/// RGBA image of the two-cube set with the g-maximising witness highlighted.
#[wasm_bindgen]
pub fn two_cubes_render(ratio: f64, level: u8, size: usize) -> Vec<u8> {
    let mut rgba = vec![0u8; 4 * size * size];
    for px in rgba.chunks_exact_mut(4) {
        px.copy_from_slice(&[250, 250, 252, 255]);
    }
    if let Ok((a, _, _, witness)) = two_cubes_parts(ratio, level) {
        paint(&a, size, &mut rgba, [170, 170, 180, 255]);
        paint(&witness, size, &mut rgba, [200, 60, 40, 255]);
    }
    rgba
}

/// Net Hausdorff content vs the certified G lower bound of a fat Cantor set
/// across the exponent range, as a JSON curve.
#[wasm_bindgen]
pub fn content_curve(gap: f64, stages: u8, level: u8, points: usize) -> String {
    let run = || -> Result<String, String> {
        let gaps = vec![gap.clamp(0.01, 0.8); stages.clamp(1, 6) as usize];
        let set = fat_cantor(&gaps, level.clamp(4, 14)).map_err(|e| e.to_string())?;
        let mut curve = Vec::new();
        for i in 1..points.max(3) {
            let t = i as f64 / points.max(3) as f64;
            let gauge = Gauge::power(1, t).map_err(|e| e.to_string())?;
            let engine = EnergyEngine::new(gauge.clone());
            let content = hausdorff_content_upper(&set, &gauge);
            let g = g_lower(&set, &engine, &GLowerStrategy::default())
                .map_err(|e| e.to_string())?;
            curve.push(serde_json::json!({ "t": t, "content": content, "g_lower": g.value }));
        }
        Ok(serde_json::json!({
            "measure": set.measure(),
            "cells": set.cell_count(),
            "curve": curve,
        })
        .to_string())
    };
    run().unwrap_or_else(|e| serde_json::json!({ "error": e }).to_string())
}

/// One-dimensional strip render of a fat Cantor set (height rows repeated).
#[wasm_bindgen]
pub fn cantor_render(gap: f64, stages: u8, level: u8, width: usize, height: usize) -> Vec<u8> {
    let mut rgba = vec![0u8; 4 * width * height];
    for px in rgba.chunks_exact_mut(4) {
        px.copy_from_slice(&[250, 250, 252, 255]);
    }
    let gaps = vec![gap.clamp(0.01, 0.8); stages.clamp(1, 6) as usize];
    if let Ok(set) = fat_cantor(&gaps, level.clamp(4, 14)) {
        let n = 1usize << set.level();
        let scale = width as f64 / n as f64;
        for idx in set.iter_indices() {
            let x0 = (idx[0] as f64 * scale) as usize;
            let x1 = (((idx[0] + 1) as f64 * scale).ceil() as usize).min(width);
            for y in 0..height {
                for x in x0..x1 {
                    let o = 4 * (y * width + x);
                    rgba[o..o + 4].copy_from_slice(&[25, 55, 110, 255]);
                }
            }
        }
    }
    rgba
}
