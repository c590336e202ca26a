"""Critical temperature difference and azimuthal mode by bisection on max Re(lambda)."""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field, replace

from .basic_state import BasicState, continue_in_dT, solve_basic_state
from .errors import AnnuflowError, BracketError
from .params import PhysicalConfig, to_dimensionless
from .stability import DispersionCurve, classify, default_m_range, dispersion

log = logging.getLogger(__name__)

DEFAULT_TOL = 0.02
DEFAULT_TOL_GROWTH = 0.1
DEFAULT_PROBE_STEP = 1.0
REFINE_WINDOW = 2


class BasicStateCache:
    """Converged basic states along one dT line, reached by warm-started continuation."""

    def __init__(self, cfg: PhysicalConfig, N: int, M: int, coupled: bool = False, max_step: float = 0.5):
        self.cfg = cfg
        self.N, self.M = N, M
        self.coupled = coupled
        self.max_step = max_step
        self._keys: list[float] = []
        self._states: dict[float, BasicState] = {}

    def __len__(self):
        return len(self._keys)

    def _nearest(self, dT):
        i = bisect.bisect_left(self._keys, dT)
        candidates = self._keys[max(0, i - 1):i + 1]
        return min(candidates, key=lambda k: abs(k - dT)) if candidates else None

    def get(self, dT: float) -> BasicState:
        if dT in self._states:
            return self._states[dT]
        near = self._nearest(dT)
        if near is None:
            state = solve_basic_state(self.cfg.with_dT(dT, coupled=self.coupled), self.N, self.M)
        else:
            steps = max(1, math.ceil(abs(dT - near) / self.max_step))
            state = continue_in_dT(self._states[near], dT, steps, coupled=self.coupled)
        bisect.insort(self._keys, dT)
        self._states[dT] = state
        return state


@dataclass
class ThresholdResult:
    dT_c: float
    m_c: int
    lambda_c: complex
    kind: str
    bracket: tuple
    scan: DispersionCurve
    R_c: float = math.nan
    Ma_c: float = math.nan
    borderline: bool = False
    growth_ok: bool = True
    steps: list = field(default_factory=list)
    N: int = 0
    M: int = 0

    def to_dict(self) -> dict:
        return {
            "dT_c": self.dT_c,
            "m_c": self.m_c,
            "lambda_c": [self.lambda_c.real, self.lambda_c.imag],
            "kind": self.kind,
            "bracket": list(self.bracket),
            "R_c": self.R_c,
            "Ma_c": self.Ma_c,
            "borderline": self.borderline,
            "growth_ok": self.growth_ok,
            "resolution": [self.N, self.M],
            "steps": self.steps,
            "scan": self.scan.to_rows(),
        }


class _GrowthFunction:
    """F(dT) = max over m of Re(lambda), with a coarse-then-fine m scan."""

    def __init__(self, cache: BasicStateCache, m_range, threads: int, method: str):
        self.cache = cache
        self.ms = sorted(set(m_range))
        self.threads = threads
        self.method = method

    def curve(self, dT: float, full: bool = False) -> DispersionCurve:
        state = self.cache.get(dT)
        if full:
            return dispersion(state, self.ms, threads=self.threads, method=self.method)
        coarse = dispersion(state, self.ms[::2], threads=self.threads, method=self.method)
        best = coarse.argmax().m
        lo, hi = best - REFINE_WINDOW, best + REFINE_WINDOW
        extra = [m for m in self.ms if lo <= m <= hi and m not in coarse.ms]
        if not extra:
            return coarse
        return coarse.merged(dispersion(state, extra, threads=self.threads, method=self.method))

    def __call__(self, dT: float):
        curve = self.curve(dT)
        top = curve.argmax()
        return top.leading.real, top, curve


def find_threshold(cfg: PhysicalConfig, search=(1.0, 20.0), tol: float = DEFAULT_TOL, N: int = 25,
                   M: int = 13, coupled: bool = False, m_range=None, threads: int = 1,
                   tol_growth: float = DEFAULT_TOL_GROWTH, method: str = "reduced",
                   check_borderline: bool = True, probe_step: float | None = DEFAULT_PROBE_STEP) -> ThresholdResult:
    """Bisect ``dT`` on the sign of the maximal growth rate.

    ``cfg.dT`` is ignored; ``cfg.dT_h`` stays fixed unless ``coupled``.
    The bracket is located by marching up from ``search[0]`` in steps of
    ``probe_step`` until F changes sign, so the lowest crossing on the probe
    grid is found and the basic state is never continued far past it.  An
    unstable window narrower than ``probe_step`` can fall between probes.
    If F is already non-negative at ``search[0]`` a BracketError is raised.
    ``probe_step=None``
    uses the two search endpoints directly.  The returned ``dT_c``
    interpolates F linearly inside the final bracket, and ``m_c`` comes from
    a full m scan there.
    """
    cfg.validate()
    lo, hi = map(float, search)
    if not 0 < lo < hi:
        raise BracketError(f"search interval must satisfy 0 < lo < hi, got {search!r}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    group0 = to_dimensionless(cfg)
    ms = list(m_range) if m_range is not None else list(default_m_range(group0.delta_star))
    cache = BasicStateCache(cfg, N, M, coupled=coupled)
    F = _GrowthFunction(cache, ms, threads, method)
    steps = []

    def evaluate(dT):
        f, top, _ = F(dT)
        steps.append({"dT": dT, "max_growth": f, "m": top.m, "im": top.leading.imag})
        log.info("threshold step dT=%.5f max Re=%.5f at m=%d", dT, f, top.m)
        return f, top

    start, end = lo, hi
    f_lo, _ = evaluate(lo)
    f_start = f_lo
    if probe_step is None:
        f_hi, _ = evaluate(hi)
    elif f_lo >= 0:
        raise BracketError(f"max growth rate already non-negative at the lower end {start}: F(lo)={f_lo:.4g}; "
                           "the threshold lies below the search interval", f_lo=f_lo)
    else:
        if not probe_step > 0:
            raise ValueError(f"probe_step must be positive, got {probe_step!r}")
        n_probe = max(1, math.ceil((end - start) / probe_step - 1e-9))
        for k in range(1, n_probe + 1):
            hi = start + (end - start) * k / n_probe
            f_hi, _ = evaluate(hi)
            if f_hi >= 0:
                break
            lo, f_lo = hi, f_hi
    if not (min(f_lo, f_hi) < 0 <= max(f_lo, f_hi)):
        raise BracketError(
            f"no sign change of max growth rate on [{start}, {end}]: F(lo)={f_start:.4g}, F(hi)={f_hi:.4g}",
            f_lo=f_start, f_hi=f_hi,
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid, _ = evaluate(mid)
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid

    def interpolate(a, fa, b, fb):
        return a - fa * (b - a) / (fb - fa)

    dT_c = interpolate(lo, f_lo, hi, f_hi)
    scan = F.curve(dT_c, full=True)
    top = scan.argmax()
    kind = classify(top.leading)
    borderline = False
    if check_borderline:
        # one more halving of the bracket must not change the bifurcation type
        mid = 0.5 * (lo + hi)
        f_mid, _ = evaluate(mid)
        if (f_mid < 0) == (f_lo < 0):
            a, fa, b, fb = mid, f_mid, hi, f_hi
        else:
            a, fa, b, fb = lo, f_lo, mid, f_mid
        _, top_fine, _ = F(interpolate(a, fa, b, fb))
        borderline = classify(top_fine.leading) != kind
    cfg_c = cfg.with_dT(dT_c, coupled=coupled)
    group_c = to_dimensionless(cfg_c)
    others_ok = all(p.leading.real <= top.leading.real + tol_growth for p in scan.valid())
    return ThresholdResult(
        dT_c=dT_c, m_c=top.m, lambda_c=complex(top.leading), kind=kind, bracket=(lo, hi), scan=scan,
        R_c=group_c.R, Ma_c=group_c.Ma, borderline=borderline,
        growth_ok=abs(top.leading.real) <= tol_growth and others_ok,
        steps=steps, N=N, M=M,
    )


SWEEP_AXES = {"B": "biot", "biot": "biot", "dT_h": "dT_h", "delta_star": "delta_star"}


def _apply_axis(cfg: PhysicalConfig, axis: str, value: float) -> PhysicalConfig:
    name = SWEEP_AXES.get(axis)
    if name is None:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    if name == "delta_star":
        return cfg.with_delta_star(value)
    return replace(cfg, **{name: value})


@dataclass
class SweepRow:
    axis: str
    value: float
    result: ThresholdResult | None = None
    error: str | None = None

    def to_row(self) -> dict:
        row = {"axis": self.axis, "value": self.value}
        r = self.result
        row.update({
            "dT_c": r.dT_c if r else math.nan,
            "m_c": r.m_c if r else "",
            "re": r.lambda_c.real if r else math.nan,
            "im": r.lambda_c.imag if r else math.nan,
            "kind": r.kind if r else "",
            "R_c": r.R_c if r else math.nan,
            "error": self.error or "",
        })
        return row


def sweep(axis: str, values, cfg: PhysicalConfig, search=(1.0, 20.0), **kwargs) -> list[SweepRow]:
    """One threshold per value, in input order; failures are recorded per row.

    ``search`` is one interval for every row or a list of intervals.
    """
    values = list(values)
    searches = search if _is_interval_list(search, len(values)) else [search] * len(values)
    rows = []
    for value, interval in zip(values, searches):
        try:
            cfg_v = _apply_axis(cfg, axis, value)
            res = find_threshold(cfg_v, interval, **kwargs)
            rows.append(SweepRow(axis, value, res))
        except AnnuflowError as exc:
            log.warning("sweep %s=%g failed: %s", axis, value, exc)
            rows.append(SweepRow(axis, value, error=f"{type(exc).__name__}: {exc}"))
    return rows


def _is_interval_list(search, n):
    try:
        return len(search) == n and all(len(s) == 2 for s in search)
    except TypeError:
        return False


@dataclass
class ConvergenceTable:
    delta_stars: list
    expansions: list
    cells: dict  # (delta_star, (N, M)) -> ThresholdResult or error string

    def threshold(self, delta_star, expansion):
        cell = self.cells[(delta_star, tuple(expansion))]
        return cell.dT_c if isinstance(cell, ThresholdResult) else math.nan

    def relative_differences(self, delta_star) -> list:
        """|T_k - T_(k-1)| / T_k between successive expansions."""
        ts = [self.threshold(delta_star, e) for e in self.expansions]
        return [abs(b - a) / b for a, b in zip(ts, ts[1:])]

    def to_rows(self) -> list:
        rows = []
        for ds in self.delta_stars:
            row = {"delta_star": ds}
            for e in self.expansions:
                row[f"{e[0]}x{e[1]}"] = self.threshold(ds, e)
            rows.append(row)
        return rows


def convergence_study(delta_stars, expansions, cfg: PhysicalConfig, search=(1.0, 20.0),
                      **kwargs) -> ConvergenceTable:
    expansions = [tuple(e) for e in expansions]
    if len(expansions) < 2:
        raise ValueError("a convergence study needs at least two expansions")
    cells = {}
    for ds in delta_stars:
        for N, M in expansions:
            try:
                cells[(ds, (N, M))] = find_threshold(cfg.with_delta_star(ds), search, N=N, M=M, **kwargs)
            except AnnuflowError as exc:
                log.warning("convergence cell delta*=%g %dx%d failed: %s", ds, N, M, exc)
                cells[(ds, (N, M))] = f"{type(exc).__name__}: {exc}"
    return ConvergenceTable(list(delta_stars), expansions, cells)
