"""Command-line interface: JSON config in, CSV/JSON/NDJSON results out.

Every run writes ``manifest.json`` to the output directory.  Its
``run_hash`` depends only on the validated inputs and the package version,
so rerunning a manifest reproduces identical data files.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .basic_state import BasicState, solve_basic_state
from .errors import AnnuflowError, ConfigurationError, ParameterError
from .params import PhysicalConfig, to_dimensionless
from .stability import default_m_range, dispersion, growth_rate, reconstruct_3d
from .threshold import SWEEP_AXES, convergence_study, find_threshold, sweep

log = logging.getLogger("annuflow")

COMMANDS = ("basic-state", "dispersion", "threshold", "sweep", "convergence", "export-fields")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3
MAX_ORDER = 64


@dataclass
class RunConfig:
    physical: PhysicalConfig
    resolution: tuple = (25, 13)
    coupled: bool = False
    m_range: tuple | None = None
    search: tuple = (1.0, 20.0)
    tol: float = 0.02
    sweep_axis: str | None = None
    sweep_values: list = field(default_factory=list)
    conv_delta_stars: list = field(default_factory=list)
    conv_expansions: list = field(default_factory=list)
    export_target: str = "basic"
    export_plane: str = "meridional"
    export_phase: float = 0.0
    export_z0: float = 1.0
    export_density: int = 41
    export_m: int | None = None
    threads: int = 1

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.to_dict() if isinstance(v, PhysicalConfig) else v
        return json.loads(json.dumps(out, default=list))


def _number(block, key, default, positive=False, integer=False):
    value = block.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParameterError(key, f"must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ParameterError(key, f"must be an integer, got {value!r}")
    if not math.isfinite(value) or (positive and value <= 0):
        raise ParameterError(key, f"must be {'positive and ' if positive else ''}finite, got {value!r}")
    return int(value) if integer else float(value)


def _pair(raw, key, integer=False):
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise ParameterError(key, f"must be a two-element list, got {raw!r}")
    return tuple(_number({key: v}, key, None, integer=integer) for v in raw)


def parse_config(data: dict) -> RunConfig:
    """Validate a config dict against every module precondition."""
    if not isinstance(data, dict):
        raise ConfigurationError("config root must be a JSON object")
    phys = dict(data.get("physical", {}))
    delta_star = phys.pop("delta_star", None)
    known = {f.name for f in fields(PhysicalConfig)}
    unknown = set(phys) - known
    if unknown:
        raise ConfigurationError(f"unknown physical keys: {sorted(unknown)}")
    cfg = PhysicalConfig(**{k: _number(phys, k, None) for k in phys})
    if delta_star is not None:
        cfg = cfg.with_delta_star(_number({"delta_star": delta_star}, "delta_star", None, positive=True))
    cfg.validate()

    rc = RunConfig(physical=cfg)
    N, M = _pair(data.get("resolution", [25, 13]), "resolution", integer=True)
    if not (2 <= N <= MAX_ORDER and 5 <= M <= MAX_ORDER):
        raise ConfigurationError(f"resolution {N}x{M} outside supported range N in [2, {MAX_ORDER}], M in [5, {MAX_ORDER}]")
    rc.resolution = (N, M)
    rc.coupled = bool(data.get("coupled", False))
    if rc.coupled:
        rc.physical = cfg.with_dT(cfg.dT, coupled=True)
    if "m_range" in data:
        lo, hi = _pair(data["m_range"], "m_range", integer=True)
        if not 0 <= lo <= hi:
            raise ParameterError("m_range", f"need 0 <= lo <= hi, got {[lo, hi]}")
        rc.m_range = (lo, hi)
    if "search" in data:
        lo, hi = _pair(data["search"], "search")
        if not 0 < lo < hi:
            raise ParameterError("search", f"need 0 < lo < hi, got {[lo, hi]}")
        rc.search = (lo, hi)
    rc.tol = _number(data, "tol", rc.tol, positive=True)
    rc.threads = _number(data, "threads", 1, integer=True)

    sw = data.get("sweep")
    if sw is not None:
        axis = sw.get("axis")
        if axis not in SWEEP_AXES:
            raise ParameterError("sweep.axis", f"must be one of {sorted(SWEEP_AXES)}, got {axis!r}")
        values = sw.get("values")
        if not isinstance(values, list) or not values:
            raise ParameterError("sweep.values", "must be a non-empty list")
        rc.sweep_axis = axis
        rc.sweep_values = [_number({"sweep.values": v}, "sweep.values", None, positive=axis == "delta_star") for v in values]
    conv = data.get("convergence")
    if conv is not None:
        ds = conv.get("delta_star")
        ex = conv.get("expansions")
        if not isinstance(ds, list) or not ds:
            raise ParameterError("convergence.delta_star", "must be a non-empty list")
        if not isinstance(ex, list) or len(ex) < 2:
            raise ParameterError("convergence.expansions", "needs at least two [N, M] pairs")
        rc.conv_delta_stars = [_number({"convergence.delta_star": v}, "convergence.delta_star", None, positive=True) for v in ds]
        rc.conv_expansions = [_pair(e, "convergence.expansions", integer=True) for e in ex]
        for n, m in rc.conv_expansions:
            if not (2 <= n <= MAX_ORDER and 5 <= m <= MAX_ORDER):
                raise ConfigurationError(f"expansion {n}x{m} outside supported range")
    ex = data.get("export", {})
    rc.export_target = ex.get("target", "basic")
    if rc.export_target not in ("basic", "mode"):
        raise ParameterError("export.target", f"must be 'basic' or 'mode', got {rc.export_target!r}")
    rc.export_plane = ex.get("plane", "meridional")
    if rc.export_plane not in ("meridional", "surface"):
        raise ParameterError("export.plane", f"must be 'meridional' or 'surface', got {rc.export_plane!r}")
    if rc.export_target == "basic" and rc.export_plane != "meridional":
        raise ParameterError("export.plane", "basic states are axisymmetric; only 'meridional' applies")
    rc.export_phase = _number(ex, "phase", 0.0)
    rc.export_z0 = _number(ex, "z0", 1.0)
    if not -1.0 <= rc.export_z0 <= 1.0:
        raise ParameterError("export.z0", f"must lie in [-1, 1], got {rc.export_z0}")
    rc.export_density = _number(ex, "density", 41, positive=True, integer=True)
    if rc.export_density < 2:
        raise ParameterError("export.density", "must be at least 2")
    rc.export_m = _number(ex, "m", None, integer=True)
    if rc.export_m is not None and rc.export_m < 0:
        raise ParameterError("export.m", "must be non-negative")
    return rc


def run_hash(rc: RunConfig) -> str:
    payload = json.dumps({"config": rc.to_dict(), "version": __version__}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header: list, rows, run_id: str) -> None:
    """Comma-separated, '.' decimals, full double precision, header row after a hash comment."""
    buf = io.StringIO()
    buf.write(f"# run_hash={run_id}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        values = [row[h] for h in header] if isinstance(row, dict) else row
        w.writerow([_fmt(v) for v in values])
    path.write_text(buf.getvalue())


def write_json(path: Path, obj: dict, run_id: str) -> None:
    path.write_text(json.dumps({"run_hash": run_id, **obj}, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o)}")


def meridional_rows(state: BasicState, density: int) -> list:
    """Basic-state fields on a uniform grid of mapped (r, z), endpoints included."""
    from .spectral import resample

    r = np.linspace(-1.0, 1.0, density)
    z = np.linspace(-1.0, 1.0, density)
    sampled = {k: resample(f, r, z) for k, f in state.fields().items()}
    rho = state.group.rho(r)
    rows = []
    for i in range(density):
        for j in range(density):
            rows.append([r[i], z[j], sampled["u_r"][i, j], sampled["u_z"][i, j],
                         sampled["p"][i, j], sampled["theta"][i, j], rho[i]])
    return rows


MERIDIONAL_HEADER = ["r", "z", "u_r", "u_z", "p", "theta", "rho"]


def export_fields(obj, out: Path, run_id: str, plane: str = "meridional", density: int = 41,
                  phase: float = 0.0, z0: float = 1.0, name: str = "fields") -> Path:
    """Write a basic state or a mode to CSV on the requested plane."""
    out = Path(out)
    path = out / f"{name}.csv"
    if isinstance(obj, BasicState):
        if plane != "meridional":
            raise ValueError("basic states are axisymmetric; only the meridional plane applies")
        write_csv(path, MERIDIONAL_HEADER, meridional_rows(obj, density), run_id)
        return path
    data = reconstruct_3d(obj, plane=plane, phase=phase, z0=z0, density=density)
    if plane == "surface":
        rows = [[x, y, v] for x, y, v in zip(data["x"].ravel(), data["y"].ravel(), data["value"].ravel())]
        write_csv(path, ["x", "y", "value"], rows, run_id)
    else:
        names = ["u_r", "u_phi", "u_z", "p", "theta"]
        rows = []
        for i, r in enumerate(data["r"]):
            for j, z in enumerate(data["z"]):
                rows.append([r, z] + [data[k][i, j] for k in names] + [data["rho"][i]])
        write_csv(path, ["r", "z"] + names + ["rho"], rows, run_id)
    return path


class _NDJSONHandler(logging.Handler):
    def __init__(self, stream):
        super().__init__()
        self.stream = stream

    def emit(self, record):
        self.stream.write(json.dumps({"t": round(record.relativeCreated / 1000.0, 6),
                                      "level": record.levelname, "logger": record.name,
                                      "message": record.getMessage()}) + "\n")


def _m_range(rc: RunConfig, delta_star: float):
    if rc.m_range is None:
        return default_m_range(delta_star)
    return range(rc.m_range[0], rc.m_range[1] + 1)


def _threshold_kwargs(rc: RunConfig, delta_star=None):
    N, M = rc.resolution
    kw = dict(tol=rc.tol, N=N, M=M, coupled=rc.coupled, threads=rc.threads)
    if rc.m_range is not None:
        kw["m_range"] = _m_range(rc, delta_star)
    return kw


def _cmd_basic_state(rc, out, rid, manifest):
    N, M = rc.resolution
    state = solve_basic_state(rc.physical, N, M)
    manifest["results"] = state.summary()
    write_json(out / "basic_state.json", {"summary": state.summary(), "history": state.history}, rid)
    export_fields(state, out, rid, density=rc.export_density, name="fields")


def _cmd_dispersion(rc, out, rid, manifest):
    N, M = rc.resolution
    state = solve_basic_state(rc.physical, N, M)
    curve = dispersion(state, _m_range(rc, state.group.delta_star), threads=rc.threads)
    top = curve.argmax()
    manifest["results"] = {"basic_state": state.summary(), "m_max": top.m,
                           "lambda_max": [top.leading.real, top.leading.imag], "kind": top.kind}
    write_csv(out / "dispersion.csv", ["m", "re", "im", "kind", "error"], curve.to_rows(), rid)


def _cmd_threshold(rc, out, rid, manifest):
    res = find_threshold(rc.physical, rc.search, **_threshold_kwargs(rc, to_dimensionless(rc.physical).delta_star))
    d = res.to_dict()
    manifest["results"] = {k: d[k] for k in ("dT_c", "m_c", "lambda_c", "kind", "R_c", "Ma_c", "borderline")}
    write_json(out / "threshold.json", d, rid)
    write_csv(out / "dispersion_at_threshold.csv", ["m", "re", "im", "kind", "error"], res.scan.to_rows(), rid)


def _cmd_sweep(rc, out, rid, manifest):
    if rc.sweep_axis is None:
        raise ConfigurationError("sweep command needs a 'sweep' block")
    kw = _threshold_kwargs(rc, to_dimensionless(rc.physical).delta_star)
    rows = sweep(rc.sweep_axis, rc.sweep_values, rc.physical, rc.search, **kw)
    table = [r.to_row() for r in rows]
    header = ["axis", "value", "dT_c", "m_c", "re", "im", "kind", "R_c", "error"]
    write_csv(out / "sweep.csv", header, table, rid)
    manifest["results"] = {"rows": len(table), "failed": sum(1 for r in rows if r.error)}


def _cmd_convergence(rc, out, rid, manifest):
    if not rc.conv_expansions:
        raise ConfigurationError("convergence command needs a 'convergence' block")
    kw = _threshold_kwargs(rc)
    kw.pop("N"), kw.pop("M")
    table = convergence_study(rc.conv_delta_stars, rc.conv_expansions, rc.physical, rc.search, **kw)
    cols = [f"{n}x{m}" for n, m in table.expansions]
    write_csv(out / "convergence.csv", ["delta_star"] + cols, table.to_rows(), rid)
    rel = {str(ds): table.relative_differences(ds) for ds in table.delta_stars}
    manifest["results"] = {"relative_differences": rel}
    write_json(out / "convergence.json", {"table": table.to_rows(), "relative_differences": rel}, rid)


def _cmd_export_fields(rc, out, rid, manifest):
    N, M = rc.resolution
    state = solve_basic_state(rc.physical, N, M)
    manifest["results"] = {"basic_state": state.summary()}
    if rc.export_target == "basic":
        export_fields(state, out, rid, density=rc.export_density, name="fields")
        return
    if rc.export_m is None:
        curve = dispersion(state, _m_range(rc, state.group.delta_star), threads=rc.threads)
        m = curve.argmax().m
    else:
        m = rc.export_m
    mode = growth_rate(state, m)
    manifest["results"]["mode"] = {"m": m, "lambda": [mode.leading.real, mode.leading.imag], "kind": mode.kind}
    export_fields(mode, out, rid, plane=rc.export_plane, density=rc.export_density,
                  phase=rc.export_phase, z0=rc.export_z0, name=f"mode_m{m}_{rc.export_plane}")


HANDLERS = {
    "basic-state": _cmd_basic_state,
    "dispersion": _cmd_dispersion,
    "threshold": _cmd_threshold,
    "sweep": _cmd_sweep,
    "convergence": _cmd_convergence,
    "export-fields": _cmd_export_fields,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="annuflow", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--threads", type=int, default=None, help="worker threads for m scans (0 = auto)")
    p.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return p


def _fail(manifest: dict, exc: Exception, status: int, what: str) -> int:
    manifest["error"] = f"{type(exc).__name__}: {exc}"
    print(f"annuflow: {what}: {exc}", file=sys.stderr)
    return status


def run_command(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"annuflow: output directory {out} is not writable: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    manifest = {
        "command": args.command,
        "config_path": str(args.config),
        "versions": {"annuflow": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }
    started = time.perf_counter()
    status, rid = EXIT_OK, None
    log_stream = open(out / "log.ndjson", "w")
    handler = _NDJSONHandler(log_stream)
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(args.log_level)
    console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("annuflow")
    root.addHandler(handler)
    root.addHandler(console)
    root.setLevel(logging.DEBUG)
    root.propagate = False
    try:
        try:
            data = json.loads(Path(args.config).read_text())
            rc = parse_config(data)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config: {exc}") from exc
        if args.threads is not None:
            rc.threads = args.threads if args.threads > 0 else (os.cpu_count() or 1)
        rid = run_hash(rc)
        manifest["run_hash"] = rid
        manifest["inputs"] = rc.to_dict()
        manifest["derived"] = to_dimensionless(rc.physical).to_dict()
        HANDLERS[args.command](rc, out, rid, manifest)
    except (ParameterError, ConfigurationError) as exc:
        status = _fail(manifest, exc, EXIT_VALIDATION, "invalid input")
    except (AnnuflowError, ArithmeticError, np.linalg.LinAlgError) as exc:
        status = _fail(manifest, exc, EXIT_NUMERIC, "numerical failure")
    except ValueError as exc:
        status = _fail(manifest, exc, EXIT_VALIDATION, "invalid input")
    finally:
        root.removeHandler(handler)
        root.removeHandler(console)
        root.propagate = True
        log_stream.close()
        manifest["status"] = status
        manifest["timings"] = {"wall_seconds": time.perf_counter() - started}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default) + "\n")
    return status


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
