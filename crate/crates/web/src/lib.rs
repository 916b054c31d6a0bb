//! Browser bindings: formula translation, reward heatmaps and the gridworld
//! oracle, all exchanged as JSON strings.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use ltl_rl::automata::{translate_fragment, Ldba};
use ltl_rl::env::{CarAction, CarState, Workspace};
use ltl_rl::harness::{tabular_oracle, GridMove, Gridworld};
use ltl_rl::ltl::parse_ltl;
use ltl_rl::product::ProductEnv;
use ltl_rl::shaping::{annotate, RewardParams};

fn ldba_of(ltl: &str) -> Result<Ldba, String> {
    let f = parse_ltl(ltl).map_err(|e| e.to_string())?;
    translate_fragment(&f).map_err(|e| e.to_string())
}

/// `{hoa, annotated}` for a formula of the translatable fragment.
pub fn translate_json(ltl: &str) -> Result<String, String> {
    let a = ldba_of(ltl)?;
    let names: Vec<String> = (0..a.num_states()).map(|q| a.state_name(q).unwrap_or_default().to_string()).collect();
    Ok(json!({ "hoa": a.to_hoa(), "annotated": annotate(&a).to_json(), "names": names }).to_string())
}

/// Reward of one step from every cell centre of an `n × n` raster, with the
/// automaton in state `q` and a fresh visit vector.
pub fn reward_heatmap_json(workspace: &str, ltl: &str, q: usize, n: usize, r_g: f64, r_n: f64, r_d: f64) -> Result<String, String> {
    let w = Workspace::from_json(workspace).map_err(|e| e.to_string())?;
    let a = ldba_of(ltl)?;
    if q >= a.num_states() {
        return Err(format!("automaton has {} states", a.num_states()));
    }
    let n = n.clamp(2, 200);
    let b = w.bounds;
    let params = RewardParams { r_g, r_n, r_d, d_max: b.diagonal() };
    let env = ProductEnv::new(w.clone(), &a, params, 1);
    let (dx, dy) = ((b.x[1] - b.x[0]) / n as f64, (b.y[1] - b.y[0]) / n as f64);
    let mut values = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let s = CarState::new(b.x[0] + (i as f64 + 0.5) * dx, b.y[0] + (j as f64 + 0.5) * dy, 0.0);
            values.push(env.step(&env.reset_at(s, q), CarAction::new(0.0, 0.0)).reward);
        }
    }
    let regions: Vec<Value> = w.regions.iter().map(|r| json!({ "name": r.name, "rect": r.rect })).collect();
    Ok(json!({
        "n": n,
        "x": b.x,
        "y": b.y,
        "values": values,
        "regions": regions,
        "states": a.num_states(),
        "traps": annotate(&a).traps().iter().collect::<Vec<_>>(),
    })
    .to_string())
}

/// Oracle outcome for the initial automaton state: per-cell satisfaction,
/// reachability, value and greedy move.
pub fn grid_oracle_json(grid: &str, ltl: &str, r_g: f64, r_n: f64, r_d: f64, gamma: f64) -> Result<String, String> {
    let gw = Gridworld::from_json(grid).map_err(|e| e.to_string())?;
    let a = ldba_of(ltl)?;
    let ann = gw.annotate(&a).map_err(|e| e.to_string())?;
    let params = RewardParams { r_g, r_n, r_d, d_max: (gw.width + gw.height) as f64 };
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err("gamma must lie in (0, 1)".into());
    }
    let res = tabular_oracle(&gw, &ann, &params, gamma, 1e-9).map_err(|e| e.to_string())?;
    let q0 = a.initial();
    let cells: Vec<Value> = (0..gw.num_cells())
        .map(|c| {
            let (x, y) = gw.coords(c);
            if gw.is_wall(c) {
                return json!({ "x": x, "y": y, "wall": true });
            }
            let i = res.index.index(c, q0, (1u32 << res.index.sets) - 1);
            let mv = res.policy[i].map(|m| match m {
                GridMove::Up => "up",
                GridMove::Right => "right",
                GridMove::Down => "down",
                GridMove::Left => "left",
            });
            json!({
                "x": x,
                "y": y,
                "wall": false,
                "satisfied": res.satisfied[i],
                "reachable": res.reachable[i],
                "value": res.values[i],
                "move": mv,
            })
        })
        .collect();
    Ok(json!({
        "width": gw.width,
        "height": gw.height,
        "labels": gw.labels,
        "cells": cells,
        "matches_ground_truth": res.matches_ground_truth(),
        "sweeps": res.sweeps,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn translate(ltl: &str) -> Result<String, JsValue> {
    translate_json(ltl).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn reward_heatmap(workspace: &str, ltl: &str, q: usize, n: usize, r_g: f64, r_n: f64, r_d: f64) -> Result<String, JsValue> {
    reward_heatmap_json(workspace, ltl, q, n, r_g, r_n, r_d).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn grid_oracle(grid: &str, ltl: &str, r_g: f64, r_n: f64, r_d: f64, gamma: f64) -> Result<String, JsValue> {
    grid_oracle_json(grid, ltl, r_g, r_n, r_d, gamma).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHI1: &str = "F (a & F b)";

    fn workspace() -> String {
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/workspaces/example1.json")).unwrap()
    }

    #[test]
    fn translation_carries_hoa_and_annotation() {
        let v: Value = serde_json::from_str(&translate_json(PHI1).unwrap()).unwrap();
        assert!(v["hoa"].as_str().unwrap().contains("States: 3"));
        assert_eq!(v["names"][0], "F (a & F b)");
        assert!(translate_json("X a").is_err());
    }

    #[test]
    fn heatmap_rewards_goal_region() {
        let v: Value = serde_json::from_str(&reward_heatmap_json(&workspace(), PHI1, 0, 20, 50.0, -0.1, -5.0).unwrap()).unwrap();
        let vals: Vec<f64> = v["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(vals.len(), 400);
        // cell centre (-2.75, -2.75) lies in region a
        assert_eq!(vals[4 * 20 + 4], 50.0);
        assert!(vals.iter().all(|&r| r == 50.0 || (r <= 0.0 && r >= -0.1 * 200f64.sqrt())));
        assert!(reward_heatmap_json(&workspace(), PHI1, 9, 20, 50.0, -0.1, -5.0).is_err());
    }

    #[test]
    fn oracle_on_the_phi1_grid() {
        let grid = r#"{"width": 5, "height": 5, "labels": {"a": [[0, 0]], "b": [[4, 4]]}}"#;
        let v: Value = serde_json::from_str(&grid_oracle_json(grid, PHI1, 50.0, -0.1, -10.0, 0.99).unwrap()).unwrap();
        assert_eq!(v["matches_ground_truth"], true);
        assert!(v["cells"].as_array().unwrap().iter().all(|c| c["satisfied"] == true));
        assert!(grid_oracle_json("{}", PHI1, 50.0, -0.1, -10.0, 0.99).is_err());
    }
}
