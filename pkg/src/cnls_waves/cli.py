"""Command-line entry point.

A single JSON config document describes a scenario; command-line flags
override config fields.  Unknown config keys are rejected.  Exit code is 0
unless a verification criterion failed (or a scenario aborted).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .io import write_summary
from .scenarios import (
    ScenarioConfig,
    run_asymptotics,
    run_diagram,
    run_eigenloci,
    run_geneig,
)

_SCHEMA = {
    "scenario": str,
    "model": {"omega": float, "s": float, "beta2": float},
    "domain": {"x_minus": float, "x_plus": float},
    "mesh": {"ntst": int, "ncol": int},
    "newton": {"residual_tol": float, "max_iterations": int, "damping": float},
    "continuation": {
        "initial_step": float, "min_step": float, "max_step": float, "max_steps": int,
    },
    "ells": list,
    "beta1_range": list,
    "seed_amplitude": float,
    "out_dir": str,
}


def _plain(obj):
    """Recursively convert numpy scalars/containers into JSON-ready types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return obj.item()
    return obj


def _check_keys(doc: dict, schema: dict, path: str = "") -> None:
    for key, value in doc.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ValueError(f"unknown config key '{where}'")
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ValueError(f"config key '{where}' must be an object")
            _check_keys(value, expected, where)
        elif expected is float:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValueError(f"config key '{where}' must be a number")
        elif expected is int:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"config key '{where}' must be an integer")
        elif not isinstance(value, expected):
            raise ValueError(f"config key '{where}' has wrong type")


def load_config(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    _check_keys(doc, _SCHEMA)
    return doc


def build_scenario_config(doc: dict, args: argparse.Namespace) -> ScenarioConfig:
    scenario = args.scenario or doc.get("scenario")
    if scenario is None:
        raise ValueError("no scenario given (use --scenario or the config file)")
    kwargs: dict = {"scenario": scenario}
    model = doc.get("model", {})
    for key in ("omega", "s", "beta2"):
        if key in model:
            kwargs[key] = float(model[key])
    domain = doc.get("domain", {})
    if "x_minus" in domain:
        kwargs["x_minus"] = float(domain["x_minus"])
    if "x_plus" in domain:
        kwargs["x_plus"] = float(domain["x_plus"])
    mesh = doc.get("mesh", {})
    if "ntst" in mesh:
        kwargs["ntst"] = int(mesh["ntst"])
    if "ncol" in mesh:
        kwargs["ncol"] = int(mesh["ncol"])
    newton = doc.get("newton", {})
    if "residual_tol" in newton:
        kwargs["newton_tol"] = float(newton["residual_tol"])
    if "max_iterations" in newton:
        kwargs["newton_max_iter"] = int(newton["max_iterations"])
    if "damping" in newton:
        kwargs["newton_damping"] = float(newton["damping"])
    cont = doc.get("continuation", {})
    for src, dst in (("initial_step", "initial_step"), ("min_step", "min_step"),
                     ("max_step", "max_step"), ("max_steps", "max_steps")):
        if src in cont:
            kwargs[dst] = cont[src]
    if "ells" in doc:
        kwargs["ells"] = tuple(int(e) for e in doc["ells"])
    if "beta1_range" in doc:
        lo, hi = doc["beta1_range"]
        kwargs["beta1_min"], kwargs["beta1_max"] = float(lo), float(hi)
    if "seed_amplitude" in doc:
        kwargs["seed_amplitude"] = float(doc["seed_amplitude"])
    if "out_dir" in doc:
        kwargs["out_dir"] = str(doc["out_dir"])

    # CLI overrides
    if args.out_dir is not None:
        kwargs["out_dir"] = args.out_dir
    if args.seed_ell is not None:
        kwargs["ells"] = tuple(args.seed_ell)
    if args.beta1_range is not None:
        kwargs["beta1_min"], kwargs["beta1_max"] = args.beta1_range
    return ScenarioConfig(**kwargs)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cnls-waves",
        description="Solitary-wave branches, bifurcations and spectral data "
                    "for the coupled nonlinear Schrodinger equations.",
    )
    parser.add_argument("--scenario",
                        choices=["diagram", "asymptotics", "eigenloci", "geneig", "verify"])
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out-dir", help="output directory (default: out)")
    parser.add_argument("--seed-ell", type=int, nargs="+",
                        help="branch indices to seed (overrides config)")
    parser.add_argument("--beta1-range", type=float, nargs=2, metavar=("LO", "HI"),
                        help="principal coupling range")
    args = parser.parse_args(argv)

    doc = load_config(args.config) if args.config else {}
    try:
        cfg = build_scenario_config(doc, args)
    except (ValueError, TypeError) as exc:
        parser.error(str(exc))
        return 2

    if cfg.scenario == "diagram":
        run_diagram(cfg)
    elif cfg.scenario == "asymptotics":
        run_asymptotics(cfg)
    elif cfg.scenario == "eigenloci":
        run_eigenloci(cfg)
    elif cfg.scenario == "geneig":
        run_geneig(cfg)
    elif cfg.scenario == "verify":
        from .verify import run_acceptance

        results = run_acceptance(cfg)
        report = []
        failed = 0
        for r in results:
            state = "PASS" if r.passed else "FAIL"
            print(f"[{state}] criterion {r.number}: {r.name} -- {r.detail}")
            report.append({
                "number": r.number, "name": r.name, "passed": r.passed,
                "detail": r.detail, "measured": _plain(r.measured),
            })
            failed += 0 if r.passed else 1
        out = Path(cfg.out_dir) / "verify"
        write_summary(out / "report.json", {"criteria": report, "failed": failed})
        print(f"{len(results) - failed}/{len(results)} criteria passed")
        return 0 if failed == 0 else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
