"""Growth rates, eigenfunctions and dispersion curves per azimuthal mode."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import build_layout, build_operators, stability_pencil
from .basic_state import BasicState
from .errors import AnnuflowError, DomainError
from .linalg import DEFAULT_CUTOFF, FilteredSpectrum, generalized_eigs
from .params import DimensionlessGroup
from .spectral import SpectralField2D, resample

log = logging.getLogger(__name__)

OSCILLATORY_TOL = 1e-3
PERTURBATION_FIELDS = ("u_r", "u_phi", "u_z", "p", "theta")


def classify(lam: complex, tol: float = OSCILLATORY_TOL) -> str:
    return "oscillatory" if abs(lam.imag) > tol else "stationary"


def default_m_range(delta_star: float) -> range:
    # never narrower than 0..40: small-gap cases still reach m ~ 11
    return range(0, max(40, math.ceil(4 * delta_star)) + 1)


@dataclass(eq=False)
class ModeResult:
    m: int
    leading: complex
    spectrum: FilteredSpectrum
    eigenfunction: dict
    group: DimensionlessGroup
    degenerate: bool = False

    @property
    def growth(self) -> float:
        return self.leading.real

    @property
    def kind(self) -> str:
        return classify(self.leading)


def _normalize(vec: np.ndarray, layout) -> dict:
    parts = layout.split(vec)
    theta = parts["theta"]
    k = np.unravel_index(np.argmax(np.abs(theta)), theta.shape)
    scale = theta[k]
    if scale == 0:
        return parts
    return {name: arr / scale for name, arr in parts.items()}


def growth_rate(base: BasicState, m: int, method: str = "reduced",
                cutoff: float = DEFAULT_CUTOFF, ops=None) -> ModeResult:
    """Leading eigenvalue and normalized eigenfunction for azimuthal mode ``m``.

    Negative ``m`` is accepted and yields the complex-conjugate problem.
    The eigenfunction is scaled so that max|theta| = 1 and theta is real
    and positive at its maximum-modulus node.
    """
    if not base.converged:
        raise AnnuflowError("basic state is not converged")
    N, M = base.N, base.M
    ops = ops or build_operators(base.group, N, M)
    layout = build_layout(N, M, "stability", gauge=(m == 0))
    pencil = stability_pencil(base.nodal(), m, base.group, ops, layout)
    spectrum = generalized_eigs(pencil, cutoff=cutoff, method=method)
    if spectrum.empty:
        return ModeResult(m, complex(np.nan, np.nan), spectrum, {}, base.group, degenerate=True)
    lam = complex(spectrum.eigenvalues[0])
    parts = _normalize(spectrum.eigenvectors[:, 0], layout)
    eig = {name: SpectralField2D(N, M, parts[name]) for name in PERTURBATION_FIELDS}
    return ModeResult(m, lam, spectrum, eig, base.group)


@dataclass
class DispersionPoint:
    m: int
    leading: complex
    kind: str
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class DispersionCurve:
    points: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    @property
    def ms(self) -> list:
        return [p.m for p in self.points]

    def valid(self) -> list:
        return [p for p in self.points if not p.failed and np.isfinite(p.leading.real)]

    def argmax(self) -> DispersionPoint:
        ok = self.valid()
        if not ok:
            raise AnnuflowError("dispersion curve has no valid points")
        return max(ok, key=lambda p: (p.leading.real, -p.m))

    def max_growth(self) -> float:
        return self.argmax().leading.real

    def merged(self, other: DispersionCurve) -> DispersionCurve:
        by_m = {p.m: p for p in self.points}
        by_m.update({p.m: p for p in other.points})
        return DispersionCurve([by_m[m] for m in sorted(by_m)])

    def to_rows(self) -> list:
        return [
            {"m": p.m, "re": p.leading.real, "im": p.leading.imag, "kind": p.kind, "error": p.error or ""}
            for p in self.points
        ]


def _point(base, m, ops, method):
    try:
        res = growth_rate(base, m, method=method, ops=ops)
    except (AnnuflowError, np.linalg.LinAlgError) as exc:
        log.warning("mode m=%d failed: %s", m, exc)
        return DispersionPoint(m, complex(np.nan, np.nan), "failed", str(exc))
    if res.degenerate:
        return DispersionPoint(m, res.leading, "failed", "empty finite spectrum")
    return DispersionPoint(m, res.leading, res.kind)


def dispersion(base: BasicState, m_range=None, threads: int = 1, method: str = "reduced") -> DispersionCurve:
    """Leading growth rate for every ``m`` in ``m_range``; results ordered by ``m``."""
    ms = sorted(set(int(m) for m in (m_range if m_range is not None else default_m_range(base.group.delta_star))))
    ops = build_operators(base.group, base.N, base.M)
    if threads == 1 or len(ms) == 1:
        points = [_point(base, m, ops, method) for m in ms]
    else:
        with ThreadPoolExecutor(max_workers=threads or None) as pool:
            points = list(pool.map(lambda m: _point(base, m, ops, method), ms))
    return DispersionCurve(points)


def reconstruct_3d(mode: ModeResult, plane: str = "surface", phase: float = 0.0, z0: float = 1.0,
                   density: int = 64, field_name: str = "theta") -> dict:
    """Real perturbation field on a plot plane.

    ``plane="surface"`` samples Re[f(r, z0) exp(i m phi + i phase)] on a polar
    grid (``density`` radii x ``4*density`` angles) returned in Cartesian
    coordinates of the physical (dimensionless) annulus.  ``plane="meridional"``
    returns Re[f exp(i phase)] for every perturbation field on a uniform
    ``density x density`` grid of mapped (r, z).
    """
    if not -1.0 <= z0 <= 1.0:
        raise DomainError(f"z0 must lie in [-1, 1], got {z0!r}")
    if mode.degenerate:
        raise AnnuflowError("cannot reconstruct a degenerate mode")
    rot = np.exp(1j * phase)
    g = mode.group
    if plane == "surface":
        f = mode.eigenfunction[field_name]
        r = np.linspace(-1.0, 1.0, density)
        profile = resample(f, r, [z0])[:, 0]
        phi = np.linspace(0.0, 2 * np.pi, 4 * density, endpoint=False)
        rho = g.rho(r)
        values = np.real(profile[:, None] * np.exp(1j * mode.m * phi)[None, :] * rot)
        return {
            "rho": rho,
            "phi": phi,
            "x": rho[:, None] * np.cos(phi)[None, :],
            "y": rho[:, None] * np.sin(phi)[None, :],
            "value": values,
        }
    if plane == "meridional":
        r = np.linspace(-1.0, 1.0, density)
        z = np.linspace(-1.0, 1.0, density)
        out = {"r": r, "z": z, "rho": g.rho(r)}
        for name, f in mode.eigenfunction.items():
            out[name] = np.real(resample(f, r, z) * rot)
        return out
    raise ValueError(f"plane must be 'surface' or 'meridional', got {plane!r}")
