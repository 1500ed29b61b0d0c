"""Writes the bundled toy catalog and task under data/toy/."""

import json
import math
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "data" / "toy"


def rect(length, width, cx=0.0, cy=0.0):
    hl, hw = length / 2, width / 2
    return [[cx - hl, cy - hw], [cx + hl, cy - hw], [cx + hl, cy + hw], [cx - hl, cy + hw]]


def aabb(x0, x1, y0, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def limits(v, a, d, r):
    return {"v_max_mps": v, "a_max_mps2": a, "d_max_mps2": d, "turn_radius_min_m": r}


def body(id_, length, width, height, lim, payload, aux, rng, fixed, op):
    fp = rect(length, width)
    return {
        "id": id_,
        "footprint": fp,
        "height_profile": [{"footprint": fp, "height_m": height}],
        "limits": lim,
        "mount_points": [
            {"name": "roof", "position_m": [0.0, 0.0, height + 0.05]},
            {"name": "front", "position_m": [length / 2, 0.0, 0.6]},
            {"name": "rear", "position_m": [-length / 2, 0.0, 0.6]},
            {"name": "left", "position_m": [0.0, width / 2, 0.9]},
            {"name": "right", "position_m": [0.0, -width / 2, 0.9]},
        ],
        "payload_max_kg": payload,
        "aux_power_w": aux,
        "driving_range_m": rng,
        "fixed_cost_chf": fixed,
        "op_cost_chf_per_m": op,
    }


def coeffs(**kw):
    base = {k: 0.0 for k in ["bias", "distance", "bearing", "visible_fraction", "hits", "night", "rain", "size"]}
    base.update(kw)
    return base


def pipeline(id_, kind, fov_h, fov_v, rng, res, price, mass, power, gflops, fnr, fpr):
    return {
        "id": id_,
        "sensor_kind": kind,
        "fov_h_rad": fov_h,
        "fov_v_rad": fov_v,
        "range_max_m": rng,
        "resolution": res,
        "price_chf": price,
        "mass_kg": mass,
        "power_w": power,
        "detector_gflops": gflops,
        "calib": {"fnr": fnr, "fpr": fpr, "pseudo_count": 400.0},
    }


def planner(id_, kind, horizon, budget, gflops_per_check):
    return {
        "id": id_,
        "kind": kind,
        "horizon_s": horizon,
        "replan_period_s": 0.5,
        "primitive_duration_s": 0.5,
        "budget": budget,
        "check_spacing_s": 0.25,
        "goal_bias": 0.05,
        "seed": 0,
        "gflops_per_check": gflops_per_check,
        "max_time_s": 40.0,
        "stuck_limit": 8,
    }


def catalog():
    return {
        "schema_version": 1,
        "bodies": [
            body("car", 4.8, 1.8, 1.4, limits(16.0, 3.0, 6.0, 5.0), 12.0, 120.0, 4.0e5, 25000.0, 0.12),
            body("van", 4.4, 2.1, 2.2, limits(14.0, 2.5, 5.0, 6.0), 60.0, 600.0, 2.5e5, 32000.0, 0.15),
        ],
        "pipelines": [
            pipeline(
                "lidar_hi", "lidar", 2 * math.pi, 0.5, 40.0, [240, 12], 8000.0, 1.2, 22.0, 2.0,
                coeffs(bias=-3.2, distance=0.05, visible_fraction=-1.0, hits=-0.3, rain=0.6, size=-0.5),
                coeffs(bias=-4.0, distance=0.03, rain=0.5),
            ),
            pipeline(
                "lidar_lo", "lidar", 2 * math.pi, 0.4, 25.0, [120, 8], 3000.0, 0.8, 12.0, 1.0,
                coeffs(bias=-2.6, distance=0.08, visible_fraction=-1.0, hits=-0.3, rain=0.8, size=-0.5),
                coeffs(bias=-3.6, distance=0.04, rain=0.6),
            ),
            pipeline(
                "cam_wide", "camera", 2.0944, 0.8, 30.0, [96, 36], 400.0, 0.3, 5.0, 4.0,
                coeffs(bias=-2.8, distance=0.07, bearing=0.5, visible_fraction=-1.0, hits=-0.2, night=1.2, rain=0.4, size=-0.6),
                coeffs(bias=-3.5, distance=0.04, night=0.4, rain=0.3),
            ),
            pipeline(
                "cam_narrow", "camera", 0.8727, 0.5, 45.0, [96, 36], 600.0, 0.3, 5.0, 3.0,
                coeffs(bias=-3.2, distance=0.05, bearing=0.8, visible_fraction=-1.0, hits=-0.2, night=1.2, rain=0.4, size=-0.6),
                coeffs(bias=-3.8, distance=0.03, night=0.4, rain=0.3),
            ),
        ],
        "computers": [
            {"id": "cpu_small", "gflops": 6.0, "memory_gb": 4.0, "price_chf": 250.0, "mass_kg": 0.4, "power_w": 10.0},
            {"id": "cpu_mid", "gflops": 20.0, "memory_gb": 16.0, "price_chf": 900.0, "mass_kg": 1.5, "power_w": 45.0},
            {"id": "gpu_big", "gflops": 80.0, "memory_gb": 32.0, "price_chf": 3200.0, "mass_kg": 4.0, "power_w": 160.0},
        ],
        "planners": [
            planner("lattice", "lattice_astar", 1.0, 40, 0.002),
            planner("rrt_star", "rrt_star", 2.0, 80, 0.004),
        ],
        "yaw_options_rad": [k * math.pi / 4 for k in range(-4, 4)],
        "pitch_options_rad": [0.0],
        "grid": {"r_min_m": 3.0, "r_max_m": 30.0, "n_radial": 5, "n_angular": 12, "n_theta": 4},
        "epsilon": 0.2,
        "n_traj": {"car": 3, "pedestrian": 3},
        "speed_step_kmh": 1.0,
        "n_weights": 12,
    }


def appearance(l, w, h, refl, tone, weight):
    return {"appearance": {"length_m": l, "width_m": w, "height_m": h, "reflectivity": refl, "tone": tone}, "weight": weight}


def scenario(id_, light, weather, speed_kmh, seeds):
    full = {"regions": [{"polygon": aabb(-60.0, 140.0, -8.0, 8.0), "heading_lo_rad": -math.pi, "heading_hi_rad": math.pi}]}
    return {
        "id": id_,
        "workspace": {"x_min_m": -10.0, "x_max_m": 70.0, "y_min_m": -8.0, "y_max_m": 8.0, "obstacles": []},
        "start": {"x": 0.0, "y": 0.0, "theta": 0.0},
        "goal": aabb(40.0, 50.0, -6.0, 6.0),
        "env": {"light": light, "weather": weather},
        "nominal_speed_mps": speed_kmh / 3.6,
        "priors": {"car": full, "pedestrian": full},
        "lambdas": {"car": 0.5, "pedestrian": 0.5},
        "behavior": {"segments": 3, "segment_duration_s": 3.0, "curvature_fraction": 0.1},
        "seeds": seeds,
    }


def task():
    return {
        "schema_version": 1,
        "classes": [
            {
                "id": "car",
                "limits": limits(15.0, 3.0, 6.0, 5.0),
                "appearances": [appearance(4.5, 1.8, 1.5, 0.5, "dark", 1.0), appearance(4.2, 1.7, 1.4, 0.8, "light", 1.0)],
            },
            {
                "id": "pedestrian",
                "limits": limits(2.0, 1.0, 2.0, 0.0),
                "appearances": [appearance(0.6, 0.6, 1.75, 0.4, "dark", 1.0)],
            },
        ],
        "scenarios": [
            scenario("road_day", "day", "dry", 30.0, [1, 2, 3]),
            scenario("road_night", "night", "rain", 30.0, [1, 2]),
        ],
        "instances": [],
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "catalog.json").write_text(json.dumps(catalog(), indent=2) + "\n")
    (OUT / "task.json").write_text(json.dumps(task(), indent=2) + "\n")


if __name__ == "__main__":
    main()
