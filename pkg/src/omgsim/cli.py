"""Command-line front end.

Every workflow in the library is reachable as a subcommand driven by a JSON
configuration document (all physical quantities carry their unit in the key
name), with presets for the standard experiments.  Outputs are written
atomically and are byte-identical for identical configuration and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import benchmarking, budget, drive, hilbert, readout, shelving, tomography
from .errors import ValidationError

TAU = 2 * math.pi


# ---------------------------------------------------------------------------
# Config schemas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Key:
    type: type
    default: object = None
    minimum: float | None = None
    maximum: float | None = None
    choices: tuple | None = None
    required: bool = False


def _seq_key():
    return Key(str, "mpp", choices=("pi", "corpse90", "mpp"))


SCHEMAS: dict[str, dict[str, Key]] = {
    "shelve": {
        "sequence": _seq_key(),
        "trap_freq_khz": Key(float, 8.7, minimum=1e-9),
        "rabi_khz": Key(float, 80.0, minimum=1e-9),
        "n_max": Key(int, 11, minimum=1),
        "recoil_projection": Key(float, 0.5, minimum=0.0, maximum=1.0),
        "initial_nbar": Key(float, 0.05, minimum=0.0),
        "n_shelves": Key(int, 10, minimum=1),
        "dephase": Key(bool, True),
        "wait_time_ms": Key(float, 2.0, minimum=0.0),
        "rng_seed": Key(int, 0),
    },
    "phase-space": {
        "sequence": _seq_key(),
        "trap_freq_khz": Key(float, 10.0, minimum=1e-9),
        "rabi_khz": Key(float, 80.0, minimum=1e-9),
        "n_max": Key(int, 11, minimum=1),
        "recoil_projection": Key(float, 1.0, minimum=0.0, maximum=1.0),
        "initial_nbar": Key(float, 0.0, minimum=0.0),
        "samples_per_segment": Key(int, 32, minimum=2),
        "rng_seed": Key(int, 0),
    },
    "rabi-scan": {
        "sequence": _seq_key(),
        "trap_freq_khz": Key(float, 10.0, minimum=1e-9),
        "n_max": Key(int, 11, minimum=1),
        "recoil_projection": Key(float, 1.0, minimum=0.0, maximum=1.0),
        "rabi_min_khz": Key(float, 40.0, minimum=1e-9),
        "rabi_max_khz": Key(float, 120.0, minimum=1e-9),
        "rabi_step_khz": Key(float, 2.0, minimum=1e-9),
        "rng_seed": Key(int, 0),
    },
    "rb": {
        "kind": Key(str, "nuclear", choices=("nuclear", "metastable", "optical")),
        "depths": Key(list, list(benchmarking.DEFAULT_DEPTHS)),
        "circuits_per_depth": Key(int, 40, minimum=1),
        "shots": Key(int, 100, minimum=1),
        "rng_seed": Key(int, 0),
        "intensity_rms": Key(float, 0.008, minimum=0.0),
        "site_offset": Key(float, 0.003, minimum=0.0),
        "theta_x_deg": Key(float, 0.9, minimum=0.0, maximum=10.0),
        "detuning_hz": Key(float, 0.0),
        "scatter_rate_per_s": Key(float, None, minimum=0.0),
        "gate_duration_us": Key(float, 10.0, minimum=1e-9),
        "initial_nbar": Key(float, 0.05, minimum=0.0),
        "trap_freq_khz": Key(float, 10.0, minimum=1e-9),
        "rabi_khz": Key(float, 80.0, minimum=1e-9),
        "recoil_projection": Key(float, 0.5, minimum=0.0, maximum=1.0),
        "n_max": Key(int, None, minimum=1),
    },
    "suppression": {
        "sequence": _seq_key(),
        "trap_freq_khz": Key(float, 10.0, minimum=1e-9),
        "rabi_khz": Key(float, 80.0, minimum=1e-9),
        "n_max": Key(int, 11, minimum=1),
        "recoil_projection": Key(float, 1.0, minimum=0.0, maximum=1.0),
        "light_shift_min_mhz": Key(float, 0.02, minimum=0.0),
        "light_shift_max_mhz": Key(float, 5.0, minimum=1e-9),
        "n_points": Key(int, 25, minimum=2),
        "rng_seed": Key(int, 0),
    },
    "qpt": {
        "dataset_path": Key(str, None),
        "ideal_theta1_deg": Key(float, 90.0),
        "ideal_theta2_deg": Key(float, -90.0),
        "max_iter": Key(int, 10000, minimum=1),
        "tol": Key(float, 1e-10, minimum=0.0),
        "rng_seed": Key(int, 0),
    },
    "readout-fidelity": {
        "counts_path": Key(str, None),
        "epsilon_op": Key(float, None, minimum=0.0, maximum=0.499999),
        "epsilon_inf": Key(float, None, minimum=0.0, maximum=0.999999),
        "epsilon_iloss": Key(float, None, minimum=0.0, maximum=0.999999),
        "rng_seed": Key(int, 0),
    },
    "thermometry": {
        "mode": Key(str, "release-recapture", choices=("release-recapture", "sideband")),
        "trap_depth_uk": Key(float, 400.0, minimum=1e-9),
        "waist_um": Key(float, 0.78, minimum=1e-9),
        "wavelength_nm": Key(float, 759.0, minimum=1e-9),
        "temperature_uk": Key(float, 3.0, minimum=0.0),
        "n_samples": Key(int, 100000, minimum=1),
        "t_max_us": Key(float, 60.0, minimum=0.0),
        "n_times": Key(int, 25, minimum=2),
        "gravity": Key(bool, True),
        "fit": Key(bool, False),
        "fit_min_uk": Key(float, 1.0, minimum=0.0),
        "fit_max_uk": Key(float, 6.0, minimum=1e-9),
        "fit_step_uk": Key(float, 0.5, minimum=1e-9),
        "red_height": Key(float, None, minimum=0.0),
        "blue_height": Key(float, None, minimum=0.0),
        "trap_freq_khz": Key(float, 58.0, minimum=1e-9),
        "rng_seed": Key(int, 0),
    },
    "budget": {
        "table": Key(str, "a2", choices=budget.BUNDLED_TABLES),
        "case": Key(str, None),
        "check": Key(bool, False),
        "rng_seed": Key(int, 0),
    },
}

PRESETS: dict[str, dict] = {
    "heating-pi": {
        "command": "shelve",
        "config": {"sequence": "pi"},
        "description": "heating and transfer error per repeated pi-pulse shelve, dephased waits",
    },
    "heating-mpp": {
        "command": "shelve",
        "config": {"sequence": "mpp"},
        "description": "heating and transfer error per repeated motional-preserving shelve",
    },
    "phase-space-pi": {
        "command": "phase-space",
        "config": {"sequence": "pi"},
        "description": "phase-space trajectory of the motional state under a plain pi-pulse",
    },
    "phase-space-mpp": {
        "command": "phase-space",
        "config": {"sequence": "mpp"},
        "description": "closed-loop phase-space trajectory under the motional-preserving pulse",
    },
    "rabi-scan-mpp": {
        "command": "rabi-scan",
        "config": {"sequence": "mpp"},
        "description": "transfer infidelity and residual heating of the MPP versus Rabi frequency",
    },
    "rabi-scan-pi": {
        "command": "rabi-scan",
        "config": {"sequence": "pi"},
        "description": "transfer infidelity and residual heating of a pi-pulse versus Rabi frequency",
    },
    "rb-nuclear-g": {
        "command": "rb",
        "config": {"kind": "nuclear"},
        "description": "ground-manifold nuclear-qubit randomized benchmarking at measured noise",
    },
    "rb-nuclear-theta-low": {
        "command": "rb",
        "config": {"kind": "nuclear", "theta_x_deg": 0.1},
        "description": "nuclear RB at the lower beam-orthogonality bound",
    },
    "rb-nuclear-theta-high": {
        "command": "rb",
        "config": {"kind": "nuclear", "theta_x_deg": 1.7},
        "description": "nuclear RB at the upper beam-orthogonality bound",
    },
    "rb-metastable": {
        "command": "rb",
        "config": {"kind": "metastable", "scatter_rate_per_s": 130.0},
        "description": "metastable-qubit RB, dominated by intermediate-state scattering",
    },
    "rb-optical": {
        "command": "rb",
        "config": {"kind": "optical"},
        "description": "optical-qubit RB with full spin-motion propagation",
    },
    "suppression-mpp": {
        "command": "suppression",
        "config": {"sequence": "mpp"},
        "description": "clock-excitation suppression versus light shift, with Lorentzian envelope",
    },
    "qpt-sample": {
        "command": "qpt",
        "config": {},
        "description": "process tomography of the bundled mid-circuit-measurement dataset",
    },
    "readout-sample": {
        "command": "readout-fidelity",
        "config": {},
        "description": "detection-fidelity and reset-probability estimators on the bundled counts",
    },
    "thermometry-gmc": {
        "command": "thermometry",
        "config": {"fit": True},
        "description": "release-and-recapture curve at 3 uK with temperature-grid fit",
    },
    "thermometry-sideband": {
        "command": "thermometry",
        "config": {"mode": "sideband", "red_height": 0.047619047619047616, "blue_height": 1.0},
        "description": "mean occupation and temperature from the red/blue sideband ratio",
    },
    "budget-ground-mcm-ancilla": {
        "command": "budget",
        "config": {"table": "a2", "case": "ground-mcm-ancilla"},
        "description": "contrast-loss budget for ground-state mid-circuit measurement, ancilla",
    },
    "budget-ground-mcm-data": {
        "command": "budget",
        "config": {"table": "a2", "case": "ground-mcm-data"},
        "description": "contrast-loss budget for ground-state mid-circuit measurement, data qubit",
    },
    "budget-check-a1": {
        "command": "budget",
        "config": {"table": "a1", "check": True},
        "description": "regression check of every printed row in the state-detection budgets",
    },
    "budget-check-a2": {
        "command": "budget",
        "config": {"table": "a2", "check": True},
        "description": "regression check of every printed row in the mid-circuit contrast budgets",
    },
}


def validate_config(command: str, doc: dict) -> list[dict]:
    """Schema and range validation; returns machine-readable diagnostics."""
    diags = []
    if command not in SCHEMAS:
        return [{"key": "command", "message": f"unknown command {command!r}"}]
    schema = SCHEMAS[command]
    for key, value in doc.items():
        if key == "command":
            if value != command:
                diags.append({"key": "command", "message": f"config is for {value!r}, not {command!r}"})
            continue
        if key not in schema:
            diags.append({"key": key, "message": "unknown key"})
            continue
        spec = schema[key]
        if value is None:
            continue
        if spec.type is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if spec.type is not list and (not isinstance(value, spec.type) or isinstance(value, bool) != (spec.type is bool)):
            diags.append({"key": key, "message": f"expected {spec.type.__name__}"})
            continue
        if spec.type is list and not isinstance(value, list):
            diags.append({"key": key, "message": "expected list"})
            continue
        if spec.minimum is not None and value < spec.minimum:
            diags.append({"key": key, "message": f"must be >= {spec.minimum}"})
        if spec.maximum is not None and value > spec.maximum:
            diags.append({"key": key, "message": f"must be <= {spec.maximum}"})
        if spec.choices is not None and value not in spec.choices:
            diags.append({"key": key, "message": f"must be one of {spec.choices}"})
    for key, spec in schema.items():
        if spec.required and key not in doc:
            diags.append({"key": key, "message": "required key missing"})
    return diags


def resolve_config(command: str, doc: dict) -> dict:
    diags = validate_config(command, doc)
    if diags:
        raise ValidationError(json.dumps({"diagnostics": diags}, sort_keys=True))
    out = {k: spec.default for k, spec in SCHEMAS[command].items()}
    for k, v in doc.items():
        if k != "command":
            spec = SCHEMAS[command][k]
            if spec.type is float and v is not None:
                v = float(v)
            out[k] = v
    return out


def _worker_count() -> int:
    raw = os.environ.get("OMGSIM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _pmap(fn, items):
    """Order-preserving map, threaded when OMGSIM_THREADS allows."""
    workers = _worker_count()
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Command implementations: each returns (rows, header, json_doc)
# ---------------------------------------------------------------------------

def _run_shelve(cfg):
    params = shelving.shelving_experiment_params(
        trap_frequency=TAU * cfg["trap_freq_khz"] * 1e3,
        rabi=TAU * cfg["rabi_khz"] * 1e3,
        n_max=cfg["n_max"],
        recoil_projection=cfg["recoil_projection"],
    )
    config = shelving.ShelvingConfig(
        seq=drive.sequence_for_label(cfg["sequence"]),
        params=params,
        wait_time=cfg["wait_time_ms"] * 1e-3,
        n_shelves=cfg["n_shelves"],
        dephase_between=cfg["dephase"],
        initial_nbar=cfg["initial_nbar"],
    )
    res = shelving.shelving_error(config)
    rows = [
        (int(c), g, n)
        for c, g, n in zip(res.counts, res.ground_population, res.nbar)
    ]
    doc = {
        "error_per_shelve": res.error_per_shelve,
        "dnbar_per_shelve": res.dnbar_per_shelve,
        "max_top_level": res.max_top_level,
        "truncation_exceeded": res.truncation_exceeded,
        "curve": [{"shelve_count": r[0], "ground_population": r[1], "nbar": r[2]} for r in rows],
    }
    return rows, ("shelve_count", "ground_population", "nbar"), doc


def _run_phase_space(cfg):
    params = shelving.shelving_experiment_params(
        trap_frequency=TAU * cfg["trap_freq_khz"] * 1e3,
        rabi=TAU * cfg["rabi_khz"] * 1e3,
        n_max=cfg["n_max"],
        recoil_projection=cfg["recoil_projection"],
    )
    state = hilbert.thermal_state(params.fock, cfg["initial_nbar"], "g")
    seq = drive.sequence_for_label(cfg["sequence"])
    traj = drive.phase_space_trajectory(state, seq, params, cfg["samples_per_segment"])
    rows = [(t * 1e6, x, p) for t, x, p in traj]
    end = traj[-1]
    doc = {
        "endpoint_distance_zp": float(math.hypot(end[1], end[2])),
        "trajectory": [{"t_us": r[0], "x_zp": r[1], "p_zp": r[2]} for r in rows],
    }
    return rows, ("t_us", "x_zp", "p_zp"), doc


def _run_rabi_scan(cfg):
    params = shelving.shelving_experiment_params(
        trap_frequency=TAU * cfg["trap_freq_khz"] * 1e3,
        rabi=TAU * cfg["rabi_min_khz"] * 1e3,
        n_max=cfg["n_max"],
        recoil_projection=cfg["recoil_projection"],
    )
    n_steps = int(round((cfg["rabi_max_khz"] - cfg["rabi_min_khz"]) / cfg["rabi_step_khz"]))
    rabis_khz = [cfg["rabi_min_khz"] + i * cfg["rabi_step_khz"] for i in range(n_steps + 1)]
    seq_label = cfg["sequence"]

    def one(rabi_khz):
        pt = drive.scan_optimal_rabi(params, [TAU * rabi_khz * 1e3], seq_label)[0]
        return (rabi_khz, pt[1], pt[2])

    rows = _pmap(one, rabis_khz)
    best = min(rows, key=lambda r: r[2])
    doc = {
        "minimum_nbar_rabi_khz": best[0],
        "minimum_nbar": best[2],
        "infidelity_at_minimum": best[1],
        "scan": [{"rabi_khz": r[0], "transfer_infidelity": r[1], "final_nbar": r[2]} for r in rows],
    }
    return rows, ("rabi_khz", "transfer_infidelity", "final_nbar"), doc


def _run_rb(cfg):
    kind = cfg["kind"]
    table_kind = "optical" if kind == "optical" else "nuclear"
    circuits = benchmarking.generate_rb_sequences(
        cfg["depths"], cfg["circuits_per_depth"], cfg["rng_seed"], kind=table_kind
    )
    if kind == "optical":
        params = benchmarking.optical_rb_params(
            cfg["initial_nbar"],
            trap_frequency=TAU * cfg["trap_freq_khz"] * 1e3,
            rabi=TAU * cfg["rabi_khz"] * 1e3,
            recoil_projection=cfg["recoil_projection"],
            n_max=cfg["n_max"],
        )
        result = benchmarking.simulate_rb_optical(
            circuits, params, cfg["initial_nbar"], shots=cfg["shots"], rng_seed=cfg["rng_seed"]
        )
    else:
        scatter = cfg["scatter_rate_per_s"]
        if scatter is None:
            scatter = 130.0 if kind == "metastable" else benchmarking.NoiseModel().scatter_rate
        noise = benchmarking.NoiseModel(
            intensity_rms=cfg["intensity_rms"],
            site_offset=cfg["site_offset"],
            theta_x_deg=cfg["theta_x_deg"],
            detuning=TAU * cfg["detuning_hz"],
            scatter_rate=scatter,
            rng_seed=cfg["rng_seed"],
        )
        gateset = benchmarking.NativeGateSet("nuclear", cfg["gate_duration_us"] * 1e-6)
        result = benchmarking.simulate_rb_nuclear(circuits, noise, shots=cfg["shots"], gateset=gateset)
    rows = list(zip(result.depths.tolist(), result.success_prob, result.success_stderr))
    return rows, ("depth", "mean", "stderr"), result.to_dict()


def _run_suppression(cfg):
    params = shelving.shelving_experiment_params(
        trap_frequency=TAU * cfg["trap_freq_khz"] * 1e3,
        rabi=TAU * cfg["rabi_khz"] * 1e3,
        n_max=cfg["n_max"],
        recoil_projection=cfg["recoil_projection"],
    )
    seq = drive.sequence_for_label(cfg["sequence"])
    lo, hi = cfg["light_shift_min_mhz"], cfg["light_shift_max_mhz"]
    shifts = np.geomspace(max(lo, 1e-6), hi, cfg["n_points"]) if lo > 0 else np.linspace(lo, hi, cfg["n_points"])

    def one(shift_mhz):
        res = shelving.suppression_error(params, TAU * shift_mhz * 1e6, seq)
        return (float(shift_mhz), res.simulated, res.lorentzian_envelope)

    rows = _pmap(one, shifts)
    doc = {"scan": [
        {"light_shift_mhz": r[0], "excitation_probability": r[1], "lorentzian_envelope": r[2]}
        for r in rows
    ]}
    return rows, ("light_shift_mhz", "excitation_probability", "lorentzian_envelope"), doc


def _run_qpt(cfg):
    if cfg["dataset_path"]:
        with open(cfg["dataset_path"]) as f:
            doc = json.load(f)
    else:
        from importlib import resources

        doc = json.loads((resources.files("omgsim") / "data" / "qpt_sample.json").read_text())
    data = tomography.TomographyDataset.from_json_dict(doc)
    proc, trace = tomography.reconstruct_process(data, max_iter=cfg["max_iter"], tol=cfg["tol"])
    ideal = tomography.ideal_mcm_process(
        math.radians(cfg["ideal_theta1_deg"]), math.radians(cfg["ideal_theta2_deg"])
    )
    survival = float(np.mean(data.survival))
    report = tomography.FidelityReport.from_process(proc, ideal.chi, survival=survival)
    chi = proc.chi
    out = report.to_dict()
    out["survival"] = survival
    out["chi"] = [[[float(x.real), float(x.imag)] for x in row] for row in chi]
    out["log_likelihood"] = trace.tolist()
    out["iterations"] = len(trace)
    rows = [(report.f_p, report.f_av, report.f_av_loss_scaled)]
    return rows, ("f_p", "f_av", "f_av_loss_scaled"), out


def _run_readout(cfg):
    from importlib import resources

    if cfg["counts_path"]:
        with open(cfg["counts_path"]) as f:
            text = f.read()
        eps = {"epsilon_op": 0.0, "epsilon_inf": 0.0, "epsilon_iloss": 0.0}
    else:
        data_dir = resources.files("omgsim") / "data"
        text = (data_dir / "readout_counts.csv").read_text()
        eps = json.loads((data_dir / "readout_counts.json").read_text())
    for key in eps:
        if cfg[key] is not None:
            eps[key] = cfg[key]
    table = readout.CountsTable.from_csv(text, **eps)
    pg0, pg1 = readout.detection_fidelities(table)
    rg0, rg1 = readout.reset_probabilities(table)
    doc = {
        "detection_fidelity_g0": {"value": pg0.value, "sigma": pg0.sigma},
        "detection_fidelity_g1": {"value": pg1.value, "sigma": pg1.sigma},
        "reset_probability_g0": {"value": rg0.value, "sigma": rg0.sigma},
        "reset_probability_g1": {"value": rg1.value, "sigma": rg1.sigma},
        "epsilons": eps,
    }
    rows = [
        ("detection_fidelity_g0", pg0.value, pg0.sigma),
        ("detection_fidelity_g1", pg1.value, pg1.sigma),
        ("reset_probability_g0", rg0.value, rg0.sigma),
        ("reset_probability_g1", rg1.value, rg1.sigma),
    ]
    return rows, ("estimator", "value", "sigma"), doc


def _run_thermometry(cfg):
    if cfg["mode"] == "sideband":
        if cfg["red_height"] is None or cfg["blue_height"] is None:
            raise ValidationError(
                json.dumps({"diagnostics": [{"key": "red_height", "message": "required in sideband mode"}]})
            )
        nbar = readout.nbar_from_sidebands(cfg["red_height"], cfg["blue_height"])
        omega = TAU * cfg["trap_freq_khz"] * 1e3
        doc = {
            "nbar": nbar,
            "temperature_uk_mean_energy": readout.nbar_to_temperature(nbar, omega) * 1e6,
            "temperature_uk_bose": readout.nbar_to_temperature(nbar, omega, "bose") * 1e6,
        }
        rows = [(nbar, doc["temperature_uk_mean_energy"], doc["temperature_uk_bose"])]
        return rows, ("nbar", "temperature_uk_mean_energy", "temperature_uk_bose"), doc
    trap = readout.TrapGeometry.from_depth_uk(
        cfg["trap_depth_uk"], waist=cfg["waist_um"] * 1e-6, wavelength=cfg["wavelength_nm"] * 1e-9
    )
    times = tuple(np.linspace(0.0, cfg["t_max_us"] * 1e-6, cfg["n_times"]))
    config = readout.ThermometryConfig(
        trap,
        cfg["temperature_uk"] * 1e-6,
        release_times=times,
        n_samples=cfg["n_samples"],
        rng_seed=cfg["rng_seed"],
        gravity=cfg["gravity"],
    )
    curve = readout.release_recapture(config)
    rows = [(t * 1e6, p) for t, p in curve]
    doc = {
        "radial_freq_khz": trap.radial_frequency() / TAU / 1e3,
        "axial_freq_khz": trap.axial_frequency() / TAU / 1e3,
        "curve": [{"t_release_us": r[0], "p_recapture": r[1]} for r in rows],
    }
    if cfg["fit"]:
        grid = np.arange(cfg["fit_min_uk"], cfg["fit_max_uk"] + 1e-12, cfg["fit_step_uk"]) * 1e-6
        fit = readout.fit_temperature(
            curve[:, 0], curve[:, 1], replace(config, rng_seed=cfg["rng_seed"] + 1), grid
        )
        doc["fit_temperature_uk"] = fit.temperature * 1e6
        doc["fit_grid_uk"] = (fit.grid * 1e6).tolist()
        doc["fit_sse"] = fit.sse.tolist()
    return rows, ("t_release_us", "p_recapture"), doc


def _run_budget(cfg):
    table = cfg["table"]
    if cfg["check"] or not cfg["case"]:
        checks = budget.check_bundled_table(table)
        rows = [
            (c.case, c.row, c.computed, c.computed_sigma, c.printed, int(c.flagged))
            for c in checks
        ]
        doc = {
            "table": table,
            "rows": [c._asdict() for c in checks],
            "flagged": [f"{c.case}/{c.row}" for c in checks if c.flagged],
        }
        return rows, ("case", "row", "computed_pct", "computed_sigma_pct", "printed_pct", "flagged"), doc
    bud, printed = budget.bundled_case(table, cfg["case"])
    totals = {cat: budget.total(bud, cat) for cat in bud.categories()}
    grand = budget.total(bud)
    doc = {
        "table": table,
        "case": cfg["case"],
        "label": bud.label,
        "subtotals_pct": {cat: {"value": t.value, "sigma": t.sigma} for cat, t in totals.items()},
        "total_estimate_pct": grand.value,
        "total_sigma_pct": grand.sigma,
        "printed": {k: {"value": v[0], "sigma": v[1]} for k, v in printed.items()},
        "text_table": budget.render_text_table(bud, printed),
    }
    if bud.measured_value is not None:
        rep = budget.compare(bud)
        doc["measured_pct"] = bud.measured_value
        doc["comparison"] = rep._asdict()
    rows = [(cat, t.value, t.sigma) for cat, t in totals.items()]
    rows.append(("total", grand.value, grand.sigma))
    return rows, ("category", "value_pct", "sigma_pct"), doc


RUNNERS = {
    "shelve": _run_shelve,
    "phase-space": _run_phase_space,
    "rabi-scan": _run_rabi_scan,
    "rb": _run_rb,
    "suppression": _run_suppression,
    "qpt": _run_qpt,
    "readout-fidelity": _run_readout,
    "thermometry": _run_thermometry,
    "budget": _run_budget,
}


# ---------------------------------------------------------------------------
# Output plumbing
# ---------------------------------------------------------------------------

def _format_cell(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _render_csv(rows, header) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _render_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, default=_json_default) + "\n"


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".omgsim-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_override(text: str):
    if "=" not in text:
        raise ValidationError(
            json.dumps({"diagnostics": [{"key": text, "message": "override must be key=value"}]})
        )
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def run(command: str, config_path: str | None = None, overrides=(), *,
        seed: int | None = None, output: str | None = None,
        out_format: str = "csv", strict: bool = False, preset: str | None = None) -> int:
    """Execute one subcommand; returns the process exit code."""
    doc: dict = {}
    if preset:
        if preset not in PRESETS or PRESETS[preset]["command"] != command:
            sys.stderr.write(
                _render_json({"diagnostics": [{"key": "preset", "message": f"no preset {preset!r} for {command}"}]})
            )
            return 1
        doc.update(PRESETS[preset]["config"])
    if config_path:
        try:
            with open(config_path) as f:
                doc.update(json.load(f))
        except (OSError, json.JSONDecodeError) as exc:
            sys.stderr.write(_render_json({"diagnostics": [{"key": config_path, "message": str(exc)}]}))
            return 1
    for item in overrides:
        try:
            key, value = _parse_override(item)
        except ValidationError as exc:
            sys.stderr.write(str(exc) + "\n")
            return 1
        doc[key] = value
    if seed is not None:
        doc["rng_seed"] = seed
    try:
        cfg = resolve_config(command, doc)
    except ValidationError as exc:
        sys.stderr.write(str(exc) + "\n")
        return 1

    caught: list[warnings.WarningMessage] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows, header, out_doc = RUNNERS[command](cfg)
    for w in caught:
        sys.stderr.write(f"warning: {w.message}\n")

    if out_format == "json":
        text = _render_json(out_doc)
    elif out_format == "table" and "text_table" in out_doc:
        text = out_doc["text_table"]
    else:
        text = _render_csv(rows, header)
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        _write_atomic(output, text)
    if strict and caught:
        return 2
    return 0


def validate(config_path: str) -> int:
    """Validate a config document without executing it."""
    try:
        with open(config_path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(_render_json({"diagnostics": [{"key": config_path, "message": str(exc)}]}))
        return 1
    command = doc.get("command")
    if command is None:
        sys.stderr.write(_render_json({"diagnostics": [{"key": "command", "message": "config must name its command"}]}))
        return 1
    diags = validate_config(command, doc)
    sys.stdout.write(_render_json({"diagnostics": diags}))
    return 1 if diags else 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omgsim",
        description="Simulations and estimators for mid-circuit operations on omg-architecture qubits",
    )
    parser.add_argument("--list-presets", action="store_true", help="list presets and exit")
    sub = parser.add_subparsers(dest="command")
    for command in RUNNERS:
        p = sub.add_parser(command)
        p.add_argument("--config", help="JSON configuration document")
        p.add_argument("--preset", help="named preset configuration")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override one config key")
        p.add_argument("--seed", type=int, help="root RNG seed")
        p.add_argument("--output", "-o", help="output path ('-' for stdout)")
        p.add_argument("--format", dest="out_format", choices=("csv", "json", "table"),
                       default="csv", help="output format")
        p.add_argument("--strict", action="store_true",
                       help="exit with status 2 if the run produced warnings")
        if command == "budget":
            p.add_argument("--table", help="bundled table id")
            p.add_argument("--case", help="case within the table")
    v = sub.add_parser("validate")
    v.add_argument("config", help="JSON configuration document to check")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.list_presets:
        for name in sorted(PRESETS):
            info = PRESETS[name]
            sys.stdout.write(f"{name:<28} {info['command']:<18} {info['description']}\n")
        return 0
    if not args.command:
        parser.print_help()
        return 1
    if args.command == "validate":
        return validate(args.config)
    overrides = list(args.overrides)
    if args.command == "budget":
        if getattr(args, "table", None):
            overrides.append(f"table={args.table}")
        if getattr(args, "case", None):
            overrides.append(f"case={args.case}")
    return run(
        args.command,
        config_path=args.config,
        overrides=overrides,
        seed=args.seed,
        output=args.output,
        out_format=args.out_format,
        strict=args.strict,
        preset=args.preset,
    )


if __name__ == "__main__":
    sys.exit(main())
