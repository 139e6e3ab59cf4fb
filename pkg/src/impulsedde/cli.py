"""Command-line front end.

Subcommands map one-to-one onto the library workflows:

    simulate              trajectory CSV (left/right rows at jumps)
    fundamental           X(t, s) samples on a product grid, CSV
    verify-representation variation-of-constants residuals, JSON
    certify               stability certificate, JSON; exit 0/2
    estimate-rate         exponential-rate fit, JSON
    scenario              scripted pipeline vs. stored expectations

System configs are strict JSON (unknown keys are errors, shape problems
name the offending field); three builtin scenario names resolve to packaged
configs.  CSV artifacts are RFC-4180 with a header row and %.12e numbers;
JSON artifacts have a fixed key order and map non-finite numbers to null.
Exit codes: 0 success/Certified, 2 NotCertified, 3 unreadable config,
4 schema or validation failure, 5 numerical blow-up, 1 any other error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .system import (
    ConstantLag,
    DelayTerm,
    FrozenTime,
    ImpulseSchedule,
    MatrixTable,
    SystemSpec,
    VectorTable,
    validate,
    vec_norm,
)
from .integrate import (
    NumericalError,
    StepControl,
    fundamental_grid,
    solve,
)
from .represent import RepresentationInput, represent_solution
from .stability import certify, estimate_rate, gronwall_bound

__all__ = [
    "SchemaError",
    "RunConfig",
    "load_spec",
    "dump_spec",
    "run",
    "main",
]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CERTIFIED = 2
EXIT_UNREADABLE = 3
EXIT_SCHEMA = 4
EXIT_NUMERICAL = 5

BUILTIN_SCENARIOS = (
    "paper-sec2-destabilize",
    "paper-sec4-frozen",
    "paper-sec5-stabilize",
)


class SchemaError(ValueError):
    """Config rejected; `path` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path or "<root>"
        super().__init__(f"{self.path}: {message}")


# ---------------------------------------------------------------------------
# strict config parsing


def _check_keys(obj, path: str, required, optional):
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    for key in obj:
        if key not in required and key not in optional:
            raise SchemaError(f"{path}.{key}" if path else key, "unknown key")
    for key in required:
        if key not in obj:
            raise SchemaError(path, f"missing required key '{key}'")


def _num(x, path: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaError(path, "expected a number")
    return float(x)


def _num_list(x, path: str) -> list:
    if not isinstance(x, list):
        raise SchemaError(path, "expected an array of numbers")
    return [_num(v, f"{path}[{i}]") for i, v in enumerate(x)]


def _vector(x, path: str, n: int) -> list:
    v = _num_list(x, path)
    if len(v) != n:
        raise SchemaError(path, f"expected a vector of length {n}, got {len(v)}")
    return v


def _matrix(x, path: str, n: int) -> list:
    if not isinstance(x, list) or len(x) != n:
        raise SchemaError(path, f"expected an {n} x {n} matrix")
    return [_vector(row, f"{path}[{i}]", n) for i, row in enumerate(x)]


def _breaks(x, path: str) -> list:
    b = _num_list(x, path)
    if not b:
        raise SchemaError(path, "expected at least one break")
    if any(v >= w for v, w in zip(b, b[1:])):
        raise SchemaError(path, "breaks must be strictly increasing")
    return b


def _table(x, path: str, n: int, element):
    _check_keys(x, path, required=("breaks", "values"), optional=())
    breaks = _breaks(x["breaks"], f"{path}.breaks")
    vals = x["values"]
    if not isinstance(vals, list) or len(vals) != len(breaks):
        raise SchemaError(f"{path}.values",
                          f"expected one value per break ({len(breaks)})")
    return breaks, [element(v, f"{path}.values[{i}]", n)
                    for i, v in enumerate(vals)]


def _coefficient(x, path: str, n: int):
    if isinstance(x, dict):
        breaks, values = _table(x, path, n, _matrix)
        return MatrixTable(breaks, values)
    return np.asarray(_matrix(x, path, n))


def _vector_table(x, path: str, n: int) -> VectorTable:
    breaks, values = _table(x, path, n, _vector)
    return VectorTable(breaks, values)


def _term(x, path: str, n: int) -> DelayTerm:
    _check_keys(x, path, required=("coefficient",), optional=("lag", "frozen"))
    has_lag, has_frozen = "lag" in x, "frozen" in x
    if has_lag == has_frozen:
        raise SchemaError(path, "expected exactly one of 'lag' or 'frozen'")
    coef = _coefficient(x["coefficient"], f"{path}.coefficient", n)
    if has_lag:
        return DelayTerm(coef, ConstantLag(_num(x["lag"], f"{path}.lag")))
    return DelayTerm(coef, FrozenTime(_num(x["frozen"], f"{path}.frozen")))


def _impulses(x, path: str, n: int, horizon: float) -> ImpulseSchedule:
    if isinstance(x, dict) and "periodic" in x:
        _check_keys(x, path, required=("periodic",), optional=())
        p = x["periodic"]
        _check_keys(p, f"{path}.periodic", required=("period", "matrix"),
                    optional=("offset",))
        period = _num(p["period"], f"{path}.periodic.period")
        if period <= 0:
            raise SchemaError(f"{path}.periodic.period", "must be positive")
        matrix = _matrix(p["matrix"], f"{path}.periodic.matrix", n)
        offset = (_vector(p["offset"], f"{path}.periodic.offset", n)
                  if "offset" in p else None)
        return ImpulseSchedule.periodic(period, matrix, horizon=horizon,
                                        offset=offset, dim=n)
    _check_keys(x, path, required=("points", "matrices"), optional=("offsets",))
    points = _num_list(x["points"], f"{path}.points")
    mats = x["matrices"]
    if not isinstance(mats, list) or len(mats) != len(points):
        raise SchemaError(f"{path}.matrices",
                          f"expected one matrix per point ({len(points)})")
    matrices = [_matrix(m, f"{path}.matrices[{i}]", n)
                for i, m in enumerate(mats)]
    offsets = None
    if "offsets" in x:
        offs = x["offsets"]
        if not isinstance(offs, list) or len(offs) != len(points):
            raise SchemaError(f"{path}.offsets",
                              f"expected one offset per point ({len(points)})")
        offsets = [_vector(v, f"{path}.offsets[{i}]", n)
                   for i, v in enumerate(offs)]
    return ImpulseSchedule(points, matrices, offsets, n)


def _parse_spec(obj, horizon_override: float = None) -> SystemSpec:
    _check_keys(obj, "", required=("dim",),
                optional=("horizon", "terms", "impulses", "forcing", "phi",
                          "x0"))
    if isinstance(obj["dim"], bool) or not isinstance(obj["dim"], int):
        raise SchemaError("dim", "expected a positive integer")
    n = obj["dim"]
    if n < 1:
        raise SchemaError("dim", "expected a positive integer")
    horizon = _num(obj["horizon"], "horizon") if "horizon" in obj else 1.0
    if horizon_override is not None:
        horizon = float(horizon_override)
    terms = []
    if "terms" in obj:
        if not isinstance(obj["terms"], list):
            raise SchemaError("terms", "expected an array of terms")
        terms = [_term(t, f"terms[{i}]", n)
                 for i, t in enumerate(obj["terms"])]
    impulses = (_impulses(obj["impulses"], "impulses", n, horizon)
                if "impulses" in obj else None)
    forcing = (_vector_table(obj["forcing"], "forcing", n)
               if "forcing" in obj else None)
    phi = _vector_table(obj["phi"], "phi", n) if "phi" in obj else None
    x0 = _vector(obj["x0"], "x0", n) if "x0" in obj else None
    return SystemSpec(dim=n, terms=terms, impulses=impulses, forcing=forcing,
                      phi=phi, x0=x0, horizon=horizon)


def _read_json_file(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _resolve_config(path_or_name: str):
    """Raw JSON object for a config path or builtin scenario name."""
    if path_or_name in BUILTIN_SCENARIOS:
        text = (resources.files("impulsedde") / "scenarios"
                / f"{path_or_name}.json").read_text(encoding="utf-8")
        return json.loads(text)
    return _read_json_file(path_or_name)


def _spec_part(raw):
    """Extract the spec object from a bare config or a scenario wrapper."""
    if isinstance(raw, dict) and "spec" in raw:
        _check_keys(raw, "", required=("spec", "checks"),
                    optional=("description",))
        return raw["spec"]
    return raw


def load_spec(path: str, horizon: float = None) -> SystemSpec:
    """Parse a JSON config (or builtin scenario name) into a SystemSpec.

    Unknown keys and wrong shapes are schema errors naming the field.  A
    horizon override re-expands periodic impulse schedules to the new end
    time.
    """
    raw = _resolve_config(path)
    return _parse_spec(_spec_part(raw), horizon_override=horizon)


def dump_spec(spec: SystemSpec) -> dict:
    """Canonical JSON form of a spec; load_spec(dump_spec(s)) round-trips."""

    def coef(c):
        if isinstance(c, MatrixTable):
            return {"breaks": c.breaks.tolist(), "values": c.values.tolist()}
        return np.asarray(c).tolist()

    out = {"dim": spec.dim, "horizon": spec.horizon}
    out["terms"] = [
        {"coefficient": coef(t.coefficient),
         **({"lag": t.delay.theta} if isinstance(t.delay, ConstantLag)
            else {"frozen": t.delay.c})}
        for t in spec.terms
    ]
    if len(spec.impulses):
        out["impulses"] = {
            "points": spec.impulses.points.tolist(),
            "matrices": spec.impulses.matrices.tolist(),
            "offsets": spec.impulses.offsets.tolist(),
        }
    for key, sig in (("forcing", spec.forcing), ("phi", spec.phi)):
        if sig is not None:
            out[key] = {"breaks": sig.breaks.tolist(),
                        "values": sig.values.tolist()}
    if spec.x0 is not None:
        out["x0"] = spec.x0.tolist()
    return out


# ---------------------------------------------------------------------------
# artifacts


def _fmt(x: float) -> str:
    return "%.12e" % x


def _sanitize(obj):
    """JSON-ready copy: numpy to lists, non-finite floats to None."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) + 0.0 if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_sanitize(obj), fh, indent=2)
        fh.write("\n")


def _write_trajectory_csv(path: str, traj, dim: int) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(dim)] + ["is_jump"])
        for k, t in enumerate(traj.t_nodes):
            if k in traj.jump_nodes:
                w.writerow([_fmt(t)] + [_fmt(v) for v in traj.y_pre[k]]
                           + ["left"])
                w.writerow([_fmt(t)] + [_fmt(v) for v in traj.y_post[k]]
                           + ["right"])
            else:
                w.writerow([_fmt(t)] + [_fmt(v) for v in traj.y_post[k]]
                           + ["0"])


def _write_fundamental_csv(path: str, fm, spec: SystemSpec,
                           tight: bool = None) -> None:
    n = fm.samples.shape[-1]
    header = ["t", "s"] + [f"X_{i + 1}_{j + 1}"
                           for i in range(n) for j in range(n)]
    if tight is not None:
        header.append("bound")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for a, t in enumerate(fm.t_grid):
            for b, s in enumerate(fm.s_grid):
                row = [_fmt(t), _fmt(s)]
                row += [_fmt(v) for v in fm.samples[a, b].ravel()]
                if tight is not None:
                    bound = (gronwall_bound(spec, float(s), float(t), tight)
                             if s <= t else 0.0)
                    row.append(_fmt(bound))
                w.writerow(row)


# ---------------------------------------------------------------------------
# command plumbing


@dataclass(frozen=True)
class RunConfig:
    """One CLI invocation: the command plus every flag that shapes it."""

    command: str
    spec_path: str
    dt: float = 1e-3
    horizon: float = None
    out: str = "."
    s_grid: str = None
    t_grid: str = None
    window: str = None
    tight: bool = False


def _parse_grid(text: str, flag: str) -> np.ndarray:
    try:
        a, b, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise SchemaError(flag, f"expected 'start:stop:step', got '{text}'")
    if step <= 0 or b < a:
        raise SchemaError(flag, f"expected stop >= start and step > 0, got '{text}'")
    count = int(math.floor((b - a) / step + 1e-9))
    pts = a + step * np.arange(count + 1)
    if pts[-1] < b - 1e-9 * max(1.0, abs(b)):
        return pts
    return np.linspace(a, b, count + 1)

def _parse_window(text: str):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise SchemaError("--window", f"expected 'tmin:tmax', got '{text}'")
    return lo, hi


def _out_path(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def _default_window(spec: SystemSpec):
    """[2*rho, horizon]: skips transient-dominated pairs when gaps exist."""
    pts = spec.impulses.points
    if len(pts) >= 2:
        rho = float(np.diff(pts).max())
        lo = min(2.0 * rho, spec.horizon)
        return lo, spec.horizon
    return 0.0, spec.horizon


def _load_and_validate(cfg: RunConfig) -> SystemSpec:
    spec = load_spec(cfg.spec_path, horizon=cfg.horizon)
    bad = validate(spec)
    if bad:
        raise SchemaError("spec", "; ".join(bad))
    return spec


def _cmd_simulate(cfg: RunConfig) -> int:
    spec = _load_and_validate(cfg)
    traj = solve(spec, StepControl(cfg.dt))
    path = _out_path(cfg, "trajectory.csv")
    _write_trajectory_csv(path, traj, spec.dim)
    end = traj.y_post[-1]
    print(f"wrote {path} ({len(traj.t_nodes)} nodes, "
          f"|x({spec.horizon:g})| = {vec_norm(end):.6g})")
    return EXIT_OK


def _grids(cfg: RunConfig, spec: SystemSpec, t_points: int):
    h = spec.horizon
    s = (_parse_grid(cfg.s_grid, "--s-grid") if cfg.s_grid
         else np.linspace(0.0, h / 2.0, 5))
    t = (_parse_grid(cfg.t_grid, "--t-grid") if cfg.t_grid
         else np.linspace(0.0, h, t_points))
    return s, t


def _cmd_fundamental(cfg: RunConfig) -> int:
    spec = _load_and_validate(cfg)
    s_grid, t_grid = _grids(cfg, spec, t_points=21)
    fm = fundamental_grid(spec, s_grid, t_grid, StepControl(cfg.dt))
    path = _out_path(cfg, "fundamental.csv")
    _write_fundamental_csv(path, fm, spec, tight=cfg.tight if cfg.tight else None)
    print(f"wrote {path} ({len(t_grid)} x {len(s_grid)} samples)")
    return EXIT_OK


def _cmd_verify_representation(cfg: RunConfig) -> int:
    spec = _load_and_validate(cfg)
    if cfg.t_grid:
        targets = _parse_grid(cfg.t_grid, "--t-grid")
    else:
        targets = np.linspace(0.0, spec.horizon, 9)
    grid = StepControl(cfg.dt)
    rep = represent_solution(RepresentationInput(
        spec, tuple(float(t) for t in targets), grid=grid))
    traj = solve(spec, grid)
    residuals = []
    for k, t in enumerate(targets):
        ref = traj.value(float(t), side="right")
        residuals.append(vec_norm(rep[k] - ref) / (1.0 + vec_norm(ref)))
    doc = {
        "target_times": [float(t) for t in targets],
        "residuals": residuals,
        "max_residual": max(residuals),
        "dt": cfg.dt,
    }
    path = _out_path(cfg, "representation.json")
    _write_json(path, doc)
    print(f"wrote {path} (max residual {doc['max_residual']:.6g})")
    return EXIT_OK


def _cmd_certify(cfg: RunConfig) -> int:
    spec = load_spec(cfg.spec_path, horizon=cfg.horizon)
    cert = certify(spec)
    doc = {
        "gamma": cert.gamma,
        "zeta": cert.zeta,
        "rho": cert.rho,
        "alpha": cert.alpha,
        "lhs": cert.lhs,
        "delta": cert.delta,
        "verdict": cert.verdict,
        "reasons": list(cert.reasons),
    }
    path = _out_path(cfg, "certificate.json")
    _write_json(path, doc)
    if cert.verdict == "Certified":
        print(f"Certified (lhs = {cert.lhs:.6g}, gamma = {cert.gamma:.6g})")
        return EXIT_OK
    print("NotCertified: " + "; ".join(cert.reasons))
    print("note: the test is sufficient only; NotCertified does not "
          "assert instability")
    return EXIT_NOT_CERTIFIED


def _cmd_estimate_rate(cfg: RunConfig) -> int:
    spec = _load_and_validate(cfg)
    s_grid, t_grid = _grids(cfg, spec, t_points=41)
    window = (_parse_window(cfg.window) if cfg.window
              else _default_window(spec))
    fm = fundamental_grid(spec, s_grid, t_grid, StepControl(cfg.dt))
    rate = estimate_rate(fm, window)
    doc = {
        "N": rate.N,
        "nu": rate.nu,
        "window": list(rate.fit_window),
        "residual": rate.residual,
        "n_samples": rate.n_samples,
    }
    path = _out_path(cfg, "rate.json")
    _write_json(path, doc)
    print(f"wrote {path} (nu = {rate.nu:.6g}, N = {rate.N:.6g}, "
          f"{rate.n_samples} samples)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# scenarios: scripted pipelines checked against stored expectations


def _scenario_doc(path_or_name: str):
    raw = _resolve_config(path_or_name)
    _check_keys(raw, "", required=("spec", "checks"), optional=("description",))
    if not isinstance(raw["checks"], list) or not raw["checks"]:
        raise SchemaError("checks", "expected a non-empty array")
    return raw


def _check_norm_constant_on(spec, traj, c, path):
    _check_keys(c, path, required=("kind", "from", "to", "value", "tol"),
                optional=("samples",))
    lo, hi = _num(c["from"], f"{path}.from"), _num(c["to"], f"{path}.to")
    n_samples = c.get("samples", 100)
    ts = np.linspace(lo, hi, n_samples, endpoint=False)
    worst = max(abs(vec_norm(traj.value(float(t))) - _num(c["value"], path))
                for t in ts)
    return worst <= _num(c["tol"], f"{path}.tol"), f"max | |x|-const | = {worst:.3e}"


def _check_abs_value_at(spec, traj, c, path):
    _check_keys(c, path, required=("kind", "t", "value", "tol"), optional=())
    got = vec_norm(traj.value(_num(c["t"], f"{path}.t")))
    gap = abs(got - _num(c["value"], f"{path}.value"))
    return gap <= _num(c["tol"], f"{path}.tol"), f"|x({c['t']:g})| = {got:.12g}"


def _check_max_deviation(spec, traj, c, path):
    _check_keys(c, path, required=("kind", "value", "until", "tol"),
                optional=())
    until = _num(c["until"], f"{path}.until")
    value = _num(c["value"], f"{path}.value")
    keep = traj.t_nodes <= until + 1e-12
    worst = float(np.max(np.abs(traj.y_post[keep] - value)))
    return worst <= _num(c["tol"], f"{path}.tol"), f"max |x-{value:g}| = {worst:.3e}"


def _check_certified(spec, traj, c, path):
    _check_keys(c, path, required=("kind", "expect"), optional=())
    cert = certify(spec)
    want = "Certified" if c["expect"] else "NotCertified"
    return cert.verdict == want, f"verdict = {cert.verdict}"


def _check_lhs(spec, traj, c, path):
    _check_keys(c, path, required=("kind", "value", "tol"), optional=())
    cert = certify(spec)
    gap = abs(cert.lhs - _num(c["value"], f"{path}.value"))
    return gap <= _num(c["tol"], f"{path}.tol"), f"lhs = {cert.lhs!r}"


def _check_rate_sign(spec, traj, c, path):
    _check_keys(c, path, required=("kind", "expect", "s_grid", "t_grid",
                                   "window"), optional=("dt",))
    if c["expect"] not in ("positive", "negative"):
        raise SchemaError(f"{path}.expect", "expected 'positive' or 'negative'")
    fm = fundamental_grid(spec,
                          _parse_grid(c["s_grid"], f"{path}.s_grid"),
                          _parse_grid(c["t_grid"], f"{path}.t_grid"),
                          StepControl(_num(c.get("dt", 1e-3), f"{path}.dt")))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rate = estimate_rate(fm, _parse_window(c["window"]))
    ok = rate.nu > 0 if c["expect"] == "positive" else rate.nu < 0
    return ok, f"nu = {rate.nu:.6g}"


_CHECKS = {
    "norm-constant-on": _check_norm_constant_on,
    "abs-value-at": _check_abs_value_at,
    "max-deviation-from-constant": _check_max_deviation,
    "certified": _check_certified,
    "lhs": _check_lhs,
    "rate-sign": _check_rate_sign,
}


def _cmd_scenario(cfg: RunConfig) -> int:
    doc = _scenario_doc(cfg.spec_path)
    spec = _parse_spec(doc["spec"])
    bad = validate(spec)
    if bad:
        raise SchemaError("spec", "; ".join(bad))
    needs_traj = any(isinstance(c, dict) and c.get("kind") in
                     ("norm-constant-on", "abs-value-at",
                      "max-deviation-from-constant")
                     for c in doc["checks"])
    traj = solve(spec, StepControl(cfg.dt)) if needs_traj else None
    name = doc.get("description", cfg.spec_path)
    print(f"scenario: {name}")
    failures = 0
    for i, c in enumerate(doc["checks"]):
        path = f"checks[{i}]"
        if not isinstance(c, dict) or "kind" not in c:
            raise SchemaError(path, "expected an object with a 'kind'")
        if c["kind"] not in _CHECKS:
            raise SchemaError(f"{path}.kind", f"unknown check kind '{c['kind']}'")
        ok, detail = _CHECKS[c["kind"]](spec, traj, c, path)
        print(f"  [{i + 1}] {c['kind']}: {'PASS' if ok else 'FAIL'} ({detail})")
        failures += 0 if ok else 1
    if failures:
        print(f"{failures} of {len(doc['checks'])} checks failed")
        return EXIT_ERROR
    print(f"all {len(doc['checks'])} checks passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry points


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fundamental": _cmd_fundamental,
    "verify-representation": _cmd_verify_representation,
    "certify": _cmd_certify,
    "estimate-rate": _cmd_estimate_rate,
    "scenario": _cmd_scenario,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the exit code, never raises."""
    try:
        return _COMMANDS[cfg.command](cfg)
    except KeyError:
        print(f"error: unknown command '{cfg.command}'", file=sys.stderr)
        return EXIT_ERROR
    except (FileNotFoundError, IsADirectoryError, PermissionError,
            json.JSONDecodeError, UnicodeDecodeError) as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return EXIT_UNREADABLE
    except SchemaError as e:
        print(f"error: invalid config: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except NumericalError as e:
        print(f"error: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="impulsedde",
        description="Simulate, bound and certify linear impulsive delay systems.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_text, *, grids=False, window=False, tight=False,
            dt=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("spec", help="config path or builtin scenario name")
        if dt:
            p.add_argument("--dt", type=float, default=1e-3,
                           help="integration step (default 1e-3)")
        p.add_argument("--horizon", type=float, default=None,
                       help="override the config horizon")
        p.add_argument("--out", default=".",
                       help="output directory (default .)")
        if grids:
            p.add_argument("--s-grid", default=None, metavar="A:B:STEP",
                           help="restart times s")
            p.add_argument("--t-grid", default=None, metavar="A:B:STEP",
                           help="observation times t")
        if window:
            p.add_argument("--window", default=None, metavar="TMIN:TMAX",
                           help="fit window in t-s (default 2*rho:horizon)")
        if tight:
            p.add_argument("--tight", action="store_true",
                           help="use the product of ||B_i|| in the envelope "
                                "column (valid when every B_i is nonsingular)")
        return p

    add("simulate", "integrate the full problem, write trajectory.csv")
    add("fundamental", "sample X(t,s) on a grid, write fundamental.csv",
        grids=True, tight=True)
    p = add("verify-representation",
            "compare the variation-of-constants form against integration")
    p.add_argument("--t-grid", default=None, metavar="A:B:STEP",
                   help="target times (default 9 even samples)")
    add("certify", "evaluate the stability certificate, write certificate.json",
        dt=False)
    add("estimate-rate", "fit N e^{-nu (t-s)} to sampled ||X(t,s)||",
        grids=True, window=True)
    add("scenario", "run a scripted scenario against stored expectations")
    return ap


def main(argv=None) -> int:
    ns = _build_parser().parse_args(argv)
    cfg = RunConfig(command=ns.command, spec_path=ns.spec,
                    dt=getattr(ns, "dt", 1e-3), horizon=ns.horizon,
                    out=ns.out, s_grid=getattr(ns, "s_grid", None),
                    t_grid=getattr(ns, "t_grid", None),
                    window=getattr(ns, "window", None),
                    tight=getattr(ns, "tight", False))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
