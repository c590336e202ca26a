"""Collocation layout and assembly of residuals, Jacobians and stability pencils.

Unknowns are nodal values on the (N+1) x (M+1) Gauss-Lobatto tensor grid,
stacked field by field.  Row ``slot*n + k`` holds the equation that owns
field slot ``slot`` at node ``k = i*(M+1) + j``.

Ownership rules:

* interior nodes carry the field equations (momentum, continuity, energy);
* the z = +1 and z = -1 edges, corners included, carry the surface and
  bottom conditions;
* the r = +1 and r = -1 edges carry the wall conditions at strictly
  interior z nodes only;
* the pressure slot on the boundary carries the normal momentum equation
  (bottom, walls) or continuity (free surface); at the two free-surface
  corners it carries the wall-normal momentum equation instead, because
  continuity there contains no pressure and would leave the corner
  pressures undetermined;
* when a gauge is requested, the pressure slot at node (N, 4) is replaced
  by ``p = 0``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AssemblyError, ConfigurationError
from .linalg import DensePencil
from .params import DimensionlessGroup
from .spectral import GaussLobattoGrid, diff_matrix, gauss_lobatto

BASIC_FIELDS = ("u_r", "u_z", "p", "theta")
STABILITY_FIELDS = ("u_r", "u_phi", "u_z", "p", "theta")
GAUGE_Z_INDEX = 4


@dataclass(frozen=True, eq=False)
class CollocationLayout:
    N: int
    M: int
    problem: str
    fields: tuple
    rgrid: GaussLobattoGrid
    zgrid: GaussLobattoGrid
    interior: np.ndarray
    top: np.ndarray
    bottom: np.ndarray
    outer: np.ndarray
    inner: np.ndarray
    gauge_node: int
    row_labels: tuple = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return (self.N + 1) * (self.M + 1)

    @property
    def size(self) -> int:
        return len(self.fields) * self.n_nodes

    def node(self, i: int, j: int) -> int:
        return i * (self.M + 1) + j

    def node_coords(self, k: int) -> tuple[float, float]:
        i, j = divmod(k, self.M + 1)
        return float(self.rgrid.points[i]), float(self.zgrid.points[j])

    def slot(self, name: str) -> slice:
        s = self.fields.index(name)
        return slice(s * self.n_nodes, (s + 1) * self.n_nodes)

    def split(self, x: np.ndarray) -> dict:
        """Nodal arrays of shape (N+1, M+1) for each field in ``x``."""
        x = np.asarray(x)
        if x.shape != (self.size,):
            raise AssemblyError(f"state vector has shape {x.shape}, layout expects ({self.size},)")
        shape = (self.N + 1, self.M + 1)
        return {name: x[self.slot(name)].reshape(shape) for name in self.fields}

    def join(self, fields: dict) -> np.ndarray:
        shape = (self.N + 1, self.M + 1)
        parts = []
        for name in self.fields:
            arr = np.asarray(fields[name])
            if arr.shape != shape:
                raise AssemblyError(f"field {name!r} has shape {arr.shape}, layout expects {shape}")
            parts.append(arr.ravel())
        return np.concatenate(parts)

    def describe_row(self, row: int) -> tuple[str, int]:
        """(equation label, node index) owning ``row``."""
        return self.row_labels[row], row % self.n_nodes


def build_layout(N: int, M: int, problem: str = "basic", gauge: bool | None = None) -> CollocationLayout:
    """Assign one equation per field slot at every node.

    ``gauge`` defaults to True for the basic problem and must be given
    explicitly (True only for m = 0) for stability layouts.
    """
    if problem not in ("basic", "stability"):
        raise ConfigurationError(f"problem must be 'basic' or 'stability', got {problem!r}")
    if M < GAUGE_Z_INDEX + 1:
        raise ConfigurationError(f"M={M}: the pressure gauge at z index {GAUGE_Z_INDEX} needs M >= 5")
    if N < 2:
        raise ConfigurationError(f"N={N}: need at least one interior radial node")
    if N < 6 or M < 6:
        warnings.warn(f"resolution {N}x{M} is below the tested range", stacklevel=2)
    if gauge is None:
        gauge = problem == "basic"
    rgrid, zgrid = gauss_lobatto(N), gauss_lobatto(M)
    I, J = np.meshgrid(np.arange(N + 1), np.arange(M + 1), indexing="ij")
    I, J = I.ravel(), J.ravel()
    top = J == M
    bottom = J == 0
    side = ~(top | bottom)
    outer = side & (I == N)
    inner = side & (I == 0)
    interior = side & ~(outer | inner)
    gauge_node = N * (M + 1) + GAUGE_Z_INDEX if gauge else -1

    fields = BASIC_FIELDS if problem == "basic" else STABILITY_FIELDS
    labels = []
    for name in fields:
        lab = np.empty(len(I), dtype=object)
        if name == "u_r":
            lab[interior] = "r_momentum"
            lab[top] = "marangoni_r"
            lab[bottom | outer | inner] = "dirichlet"
        elif name == "u_phi":
            lab[interior] = "phi_momentum"
            lab[top] = "marangoni_phi"
            lab[bottom | outer | inner] = "dirichlet"
        elif name == "u_z":
            lab[interior] = "z_momentum"
            lab[top | bottom | outer | inner] = "dirichlet"
        elif name == "p":
            lab[interior | top] = "continuity"
            lab[bottom] = "z_momentum"
            lab[outer | inner | (top & ((I == 0) | (I == N)))] = "r_momentum"
            if gauge:
                lab[gauge_node] = "gauge"
        else:
            lab[interior] = "energy"
            lab[top] = "robin"
            lab[bottom] = "theta_bottom"
            lab[inner] = "theta_inner"
            lab[outer] = "theta_outer"
        labels.extend(lab.tolist())
    return CollocationLayout(
        N=N, M=M, problem=problem, fields=fields, rgrid=rgrid, zgrid=zgrid,
        interior=interior, top=top, bottom=bottom, outer=outer, inner=inner,
        gauge_node=gauge_node, row_labels=tuple(labels),
    )


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """Dense operators on the flattened tensor grid.

    ``Ar`` is A*d/dr, ``Z`` is 2*d/dz, ``lap_star`` the axisymmetric
    Laplacian in mapped coordinates and ``g`` the metric coefficient at
    every node.
    """

    N: int
    M: int
    g: np.ndarray
    Ar: np.ndarray
    Z: np.ndarray
    lap_star: np.ndarray

    def lap_m(self, m: int) -> np.ndarray:
        if m == 0:
            return self.lap_star
        return self.lap_star - np.diag(m * m * self.g**2)


def build_operators(group: DimensionlessGroup, N: int, M: int) -> OperatorSet:
    rgrid, zgrid = gauss_lobatto(N), gauss_lobatto(M)
    Dr = diff_matrix(rgrid).entries
    Dz = diff_matrix(zgrid).entries
    Ir, Iz = np.eye(N + 1), np.eye(M + 1)
    A = group.A
    g = np.repeat(group.G(rgrid.points), M + 1)
    Ar = A * np.kron(Dr, Iz)
    Z = 2.0 * np.kron(Ir, Dz)
    lap = A * A * np.kron(Dr @ Dr, Iz) + g[:, None] * Ar + 4.0 * np.kron(Ir, Dz @ Dz)
    return OperatorSet(N, M, g, Ar, Z, lap)


def _check(layout: CollocationLayout, ops: OperatorSet):
    if (ops.N, ops.M) != (layout.N, layout.M):
        raise AssemblyError(
            f"operators built for {ops.N}x{ops.M} but layout is {layout.N}x{layout.M}"
        )


def _place(rows: np.ndarray, layout: CollocationLayout, slot: int, equations: dict):
    """Copy each equation's rows into ``rows`` where the layout assigns it."""
    n = layout.n_nodes
    labels = np.array(layout.row_labels[slot * n:(slot + 1) * n], dtype=object)
    for label in set(labels):
        mask = labels == label
        if label not in equations:
            raise AssemblyError(f"no assembly rule for equation {label!r}")
        rows[slot * n:(slot + 1) * n][mask] = equations[label][mask]


def basic_linear_system(group: DimensionlessGroup, ops: OperatorSet, layout: CollocationLayout):
    """Matrix ``L`` and vector ``c`` with residual ``L x + c + advection(x)``."""
    _check(layout, ops)
    if layout.problem != "basic":
        raise AssemblyError("basic_linear_system needs a basic layout")
    n = layout.n_nodes
    In = np.eye(n)
    O = np.zeros((n, n))
    G = np.diag(ops.g)
    lap = ops.lap_star
    r_nodes = np.repeat(layout.rgrid.points, layout.M + 1)

    def blocks(*bl):
        return np.hstack(bl)

    r_mom = blocks(G @ G - lap, O, ops.Ar, O)
    z_mom = blocks(O, -lap, ops.Z, -group.R * In)
    cont = blocks(G + ops.Ar, ops.Z, O, O)
    gauge = blocks(O, O, In, O)
    L = np.zeros((layout.size, layout.size))
    c = np.zeros(layout.size)
    _place(L, layout, 0, {
        "r_momentum": r_mom,
        "marangoni_r": blocks(ops.Z, O, O, group.Ma * ops.Ar),
        "dirichlet": blocks(In, O, O, O),
    })
    _place(L, layout, 1, {
        "z_momentum": z_mom,
        "dirichlet": blocks(O, In, O, O),
    })
    _place(L, layout, 2, {
        "continuity": cont,
        "z_momentum": z_mom,
        "r_momentum": r_mom,
        "gauge": gauge,
    })
    theta_id = blocks(O, O, O, In)
    _place(L, layout, 3, {
        "energy": blocks(O, O, O, -lap),
        "robin": blocks(O, O, O, ops.Z + group.B * In),
        "theta_bottom": theta_id,
        "theta_inner": theta_id,
        "theta_outer": theta_id,
    })
    c_z = np.full(n, group.b)
    c_theta = np.zeros(n)
    c_theta[layout.bottom] = -(1.0 - group.ratio_h * 0.5 * (r_nodes[layout.bottom] + 1.0))
    c_theta[layout.inner] = -1.0
    c_theta[layout.outer] = -(1.0 - group.ratio_h)
    labels = layout.row_labels
    for row in range(layout.size):
        if labels[row] == "z_momentum":
            c[row] = c_z[row % n]
    c[3 * n:] = c_theta
    return L, c


def _split(x, layout):
    return [v.ravel() for v in layout.split(x).values()]


def basic_residual(x: np.ndarray, group: DimensionlessGroup, ops: OperatorSet,
                   layout: CollocationLayout, system=None, dtype=np.float64) -> np.ndarray:
    """Residual of the steady axisymmetric equations at every layout row.

    ``system`` is an optional precomputed ``basic_linear_system`` result.
    With ``dtype=np.longdouble`` the residual is accumulated in extended
    precision, which lowers the roundoff floor set by large pressures.
    """
    L, c = system if system is not None else basic_linear_system(group, ops, layout)
    x = np.asarray(x, dtype=dtype)
    if L.dtype != dtype:
        L, c = L.astype(dtype), c.astype(dtype)
    Ar, Z = ops.Ar, ops.Z
    if Ar.dtype != dtype:
        Ar, Z = Ar.astype(dtype), Z.astype(dtype)
    ur, uz, p, th = _split(x, layout)
    F = L @ x + c
    n = layout.n_nodes
    k = layout.interior
    F[3 * n:][k] += ur[k] * (Ar[k] @ th) + uz[k] * (Z[k] @ th)
    return F


def basic_jacobian(x: np.ndarray, group: DimensionlessGroup, ops: OperatorSet,
                   layout: CollocationLayout, system=None) -> np.ndarray:
    L, _ = system if system is not None else basic_linear_system(group, ops, layout)
    ur, uz, p, th = _split(x, layout)
    n = layout.n_nodes
    J = L.copy()
    k = np.flatnonzero(layout.interior)
    rows = 3 * n + k
    J[rows, k] += (ops.Ar @ th)[k]
    J[rows, n + k] += (ops.Z @ th)[k]
    J[rows, 3 * n:] += ur[k, None] * ops.Ar[k] + uz[k, None] * ops.Z[k]
    return J


def stability_pencil(base_fields: dict, m: int, group: DimensionlessGroup, ops: OperatorSet,
                     layout: CollocationLayout) -> DensePencil:
    """Linearized perturbation problem for azimuthal mode ``m``.

    ``base_fields`` maps ``u_r``, ``u_z`` and ``theta`` to nodal arrays of the
    converged basic state.  Negative ``m`` gives the complex-conjugate pencil.
    """
    _check(layout, ops)
    if layout.problem != "stability":
        raise AssemblyError("stability_pencil needs a stability layout")
    if (m == 0) != (layout.gauge_node >= 0):
        raise AssemblyError("pressure gauge must be present exactly when m == 0")
    n = layout.n_nodes
    ur_b = np.asarray(base_fields["u_r"]).ravel()
    uz_b = np.asarray(base_fields["u_z"]).ravel()
    th_b = np.asarray(base_fields["theta"]).ravel()
    if not (len(ur_b) == len(uz_b) == len(th_b) == n):
        raise AssemblyError("basic-state fields do not match the stability grid")

    im = 1j * m if m else 0.0
    In = np.eye(n)
    O = np.zeros((n, n))
    g = ops.g
    G = np.diag(g)
    G2 = np.diag(g * g)
    lap = ops.lap_m(m)
    dtype = complex if m != 0 else float

    def blocks(*bl):
        return np.hstack(bl).astype(dtype, copy=False)

    r_mom = blocks(lap - G2, -2.0 * im * G2, O, -ops.Ar, O)
    phi_mom = blocks(2.0 * im * G2, lap - G2, O, -im * G, O)
    z_mom = blocks(O, O, lap, -ops.Z, group.R * In)
    cont = blocks(G + ops.Ar, im * G, ops.Z, O, O)
    energy = blocks(
        -np.diag(ops.Ar @ th_b), O, -np.diag(ops.Z @ th_b), O,
        lap - ur_b[:, None] * ops.Ar - uz_b[:, None] * ops.Z,
    )
    A = np.zeros((layout.size, layout.size), dtype=dtype)
    _place(A, layout, 0, {
        "r_momentum": r_mom,
        "marangoni_r": blocks(ops.Z, O, O, O, group.Ma * ops.Ar),
        "dirichlet": blocks(In, O, O, O, O),
    })
    _place(A, layout, 1, {
        "phi_momentum": phi_mom,
        "marangoni_phi": blocks(O, ops.Z, O, O, group.Ma * im * G),
        "dirichlet": blocks(O, In, O, O, O),
    })
    _place(A, layout, 2, {
        "z_momentum": z_mom,
        "dirichlet": blocks(O, O, In, O, O),
    })
    _place(A, layout, 3, {
        "continuity": cont,
        "z_momentum": z_mom,
        "r_momentum": r_mom,
        "gauge": blocks(O, O, O, In, O),
    })
    theta_id = blocks(O, O, O, O, In)
    _place(A, layout, 4, {
        "energy": energy,
        "robin": blocks(O, O, O, O, ops.Z + group.B * In),
        "theta_bottom": theta_id,
        "theta_inner": theta_id,
        "theta_outer": theta_id,
    })
    Bm = np.zeros((layout.size, layout.size), dtype=dtype)
    k = np.flatnonzero(layout.interior)
    Bm[4 * n + k, 4 * n + k] = 1.0
    return DensePencil(A, Bm)
