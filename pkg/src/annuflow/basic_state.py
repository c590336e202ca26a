"""Steady axisymmetric convective state: linear guess, Newton, continuation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import (
    CollocationLayout,
    OperatorSet,
    basic_jacobian,
    basic_linear_system,
    basic_residual,
    build_layout,
    build_operators,
)
from .errors import NewtonDivergenceError, SingularMatrixError
from .linalg import solve_dense
from .params import DimensionlessGroup, PhysicalConfig, to_dimensionless
from .spectral import SpectralField2D

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-9
# Pressures scale with R; a double-precision residual stalls the correction
# near 1e-13*||x||, above NEWTON_TOL once R exceeds ~2e4.
EXTENDED = np.longdouble
DEFAULT_MAX_ITER = 25


@dataclass(eq=False)
class BasicState:
    u_r: SpectralField2D
    u_z: SpectralField2D
    p: SpectralField2D
    theta: SpectralField2D
    group: DimensionlessGroup
    cfg: PhysicalConfig | None = None
    iterations: int = 0
    final_residual: float = math.nan
    residual_norm: float = math.nan
    converged: bool = False
    history: list = field(default_factory=list)

    @property
    def N(self) -> int:
        return self.u_r.nr

    @property
    def M(self) -> int:
        return self.u_r.nz

    def fields(self) -> dict:
        return {"u_r": self.u_r, "u_z": self.u_z, "p": self.p, "theta": self.theta}

    def nodal(self) -> dict:
        return {k: f.values for k, f in self.fields().items()}

    def vector(self) -> np.ndarray:
        return np.concatenate([f.values.ravel() for f in self.fields().values()])

    def summary(self) -> dict:
        return {
            "N": self.N,
            "M": self.M,
            "R": self.group.R,
            "Ma": self.group.Ma,
            "B": self.group.B,
            "ratio_h": self.group.ratio_h,
            "delta_star": self.group.delta_star,
            "iterations": self.iterations,
            "final_correction_l2": self.final_residual,
            "residual_inf": self.residual_norm,
            "converged": self.converged,
            "max_abs_u": float(max(np.abs(self.u_r.values).max(), np.abs(self.u_z.values).max())),
        }


def _state_from_vector(x, group, layout, cfg=None, **diag) -> BasicState:
    parts = layout.split(x)
    N, M = layout.N, layout.M
    return BasicState(
        *(SpectralField2D(N, M, parts[k].copy()) for k in ("u_r", "u_z", "p", "theta")),
        group=group, cfg=cfg, **diag,
    )


def _setup(group, N, M, ops=None, layout=None):
    if layout is None:
        layout = build_layout(N, M, "basic")
    if ops is None:
        ops = build_operators(group, N, M)
    return ops, layout


def initial_guess(group: DimensionlessGroup, ops: OperatorSet, layout: CollocationLayout,
                  cfg: PhysicalConfig | None = None) -> BasicState:
    """Solve the problem with the energy advection terms dropped."""
    L, c = basic_linear_system(group, ops, layout)
    x = solve_dense(L, -c)
    F = basic_residual(x, group, ops, layout, (L, c))
    return _state_from_vector(x, group, layout, cfg, residual_norm=float(np.abs(F).max()))


def newton_solve(guess: BasicState, max_iter: int = DEFAULT_MAX_ITER, tol: float = NEWTON_TOL,
                 ops: OperatorSet | None = None, layout: CollocationLayout | None = None,
                 group: DimensionlessGroup | None = None) -> BasicState:
    """Plain Newton iteration from ``guess``; stops when ``||correction||_2 < tol``.

    ``group`` overrides the guess's parameters (warm starts at a new dT).
    """
    group = group or guess.group
    ops, layout = _setup(group, guess.N, guess.M, ops, layout)
    system = basic_linear_system(group, ops, layout)
    ext_system = tuple(a.astype(EXTENDED) for a in system)
    x = guess.vector().astype(float)
    history = []
    for it in range(1, max_iter + 1):
        F = basic_residual(x, group, ops, layout, ext_system, dtype=EXTENDED)
        J = basic_jacobian(x, group, ops, layout, system)
        dx = solve_dense(J, -F.astype(float))
        x = x + dx
        step = float(np.linalg.norm(dx))
        res = float(np.abs(F).max())
        history.append({"iteration": it, "correction_l2": step, "residual_inf": res})
        log.debug("newton it=%d correction=%.3e residual=%.3e", it, step, res)
        if not np.isfinite(step):
            break
        if step < tol:
            F = basic_residual(x, group, ops, layout, system)
            return _state_from_vector(
                x, group, layout, guess.cfg if group is guess.group else None,
                iterations=it, final_residual=step, residual_norm=float(np.abs(F).max()),
                converged=True, history=history,
            )
    last = history[-1]["correction_l2"] if history else math.nan
    raise NewtonDivergenceError(
        f"Newton did not converge in {max_iter} iterations (last correction {last:.3e})",
        last_correction=last,
        dT=guess.cfg.dT if guess.cfg is not None else None,
    )


def _cfg_at(cfg: PhysicalConfig, dT: float, hold: str) -> PhysicalConfig:
    if hold == "dT_h":
        return cfg.with_dT(dT)
    if hold == "ratio":
        return replace(cfg, dT=dT, dT_h=cfg.dT_h * dT / cfg.dT)
    if hold == "coupled":
        return cfg.with_dT(dT, coupled=True)
    raise ValueError(f"hold must be 'dT_h', 'ratio' or 'coupled', got {hold!r}")


def continue_in_dT(state: BasicState, target_dT: float, steps: int = 1, coupled: bool = False,
                   max_iter: int = DEFAULT_MAX_ITER, tol: float = NEWTON_TOL, hold: str | None = None,
                   max_halvings: int = 4) -> BasicState:
    """Walk ``dT`` to ``target_dT`` in equal steps, warm-starting Newton each time.

    ``dT_h`` is held fixed unless ``coupled`` (``dT_h`` tracks ``dT``) or
    ``hold="ratio"`` (``dT_h/dT`` fixed, used as a homotopy).  A failed step
    is retried as two half steps, at most ``max_halvings`` times deep.
    """
    if state.cfg is None:
        raise ValueError("continuation needs a state that carries its PhysicalConfig")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    hold = hold or ("coupled" if coupled else "dT_h")
    # geometry does not depend on dT, so one operator set serves the whole path
    ops, layout = _setup(state.group, state.N, state.M)

    def advance(current, dT, depth):
        cfg = _cfg_at(current.cfg, dT, hold)
        try:
            nxt = newton_solve(current, max_iter=max_iter, tol=tol, ops=ops, layout=layout,
                               group=to_dimensionless(cfg))
        except (NewtonDivergenceError, SingularMatrixError) as exc:
            if depth >= max_halvings:
                last = getattr(exc, "last_correction", None)
                raise NewtonDivergenceError("continuation failed", last_correction=last, dT=dT) from exc
            mid = advance(current, 0.5 * (current.cfg.dT + dT), depth + 1)
            return advance(mid, dT, depth + 1)
        nxt.cfg = cfg
        return nxt

    current = state
    for dT in np.linspace(state.cfg.dT, target_dT, steps + 1)[1:]:
        current = advance(current, float(dT), 0)
    return current


def solve_basic_state(cfg: PhysicalConfig, N: int = 25, M: int = 13, max_iter: int = DEFAULT_MAX_ITER,
                      tol: float = NEWTON_TOL, homotopy_start: float = 0.01,
                      homotopy_steps: int = 20) -> BasicState:
    """Linear guess plus Newton.

    If Newton diverges, both temperature differences are scaled down by
    ``homotopy_start`` (weak flow, same ``dT_h/dT``) and continued back up.
    """
    group = to_dimensionless(cfg)
    ops, layout = _setup(group, N, M)
    try:
        state = newton_solve(initial_guess(group, ops, layout, cfg), max_iter=max_iter, tol=tol,
                             ops=ops, layout=layout)
    except (NewtonDivergenceError, SingularMatrixError) as exc:
        log.info("direct Newton failed at dT=%g (%s); using homotopy", cfg.dT, exc)
        start_cfg = _cfg_at(cfg, cfg.dT * homotopy_start, "ratio")
        start_group = to_dimensionless(start_cfg)
        start = newton_solve(initial_guess(start_group, ops, layout, start_cfg),
                             max_iter=max_iter, tol=tol, ops=ops, layout=layout)
        start.cfg = start_cfg
        state = continue_in_dT(start, cfg.dT, homotopy_steps, hold="ratio", max_iter=max_iter, tol=tol)
    state.cfg = cfg
    return state
