"""IMEX Euler time integration of the BS-DIB system and of the surface-only DIB model.

Diffusion is implicit and kinetics explicit, so every step solves four
linear systems whose matrices never change; they are factorised once.
Bulk unknowns are the shifted fields ``b - b0`` and ``q - q0`` on the
non-Dirichlet vertices.
"""

import logging
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .mesh import VertexTag
from .vem import assemble_global

log = logging.getLogger(__name__)

BSDIB_3D = "3d"
DIB_2D = "2d"
MODES = (BSDIB_3D, DIB_2D)


class DivergenceError(ArithmeticError):
    def __init__(self, step, component):
        super().__init__(f"non-finite {component} after step {step}")
        self.step = step
        self.component = component


class FactorizationError(RuntimeError):
    pass


@dataclass
class TimeSteppingConfig:
    tau: float
    T: float
    snapshot_every: int = None  # None: about 100 evenly spaced snapshots
    increment_norm: str = "L2"
    seed: int = 0
    noise_eta: float = 1e-2
    noise_theta: float = 1e-2
    store_bulk_snapshots: bool = False

    def __post_init__(self):
        if not (self.tau > 0 and self.T > 0):
            raise ValueError("tau and T must be positive")
        if self.increment_norm not in ("L2", "Linf"):
            raise ValueError(f"increment_norm must be 'L2' or 'Linf', got {self.increment_norm!r}")

    @property
    def n_steps(self):
        r = self.T / self.tau
        nearest = round(r)
        return int(nearest) if abs(r - nearest) <= 1e-9 * r else math.ceil(r)

    @property
    def snapshot_stride(self):
        if self.snapshot_every:
            return int(self.snapshot_every)
        return max(1, self.n_steps // 100)


@dataclass
class SimulationState:
    bt: np.ndarray
    qt: np.ndarray
    eta: np.ndarray
    theta: np.ndarray
    t: float = 0.0
    step_index: int = 0

    def copy(self):
        return SimulationState(self.bt.copy(), self.qt.copy(), self.eta.copy(), self.theta.copy(), self.t, self.step_index)


@dataclass
class IncrementSeries:
    values: np.ndarray
    times: np.ndarray
    norm: str = "L2"


class _Solver:
    """Reusable sparse LU of an SPD matrix (no pivoting, positive pivots checked)."""

    def __init__(self, A, name):
        A = sp.csc_matrix(A)
        if A.shape == (1, 1) or A.nnz == A.shape[0] and (A - sp.diags(A.diagonal())).nnz == 0:
            d = A.diagonal()
            if np.any(d <= 0):
                raise FactorizationError(f"{name}: non-positive diagonal")
            self._diag = d
            self._lu = None
            return
        self._diag = None
        try:
            self._lu = spla.splu(
                A,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise FactorizationError(f"{name}: {exc}") from None
        if np.any(self._lu.U.diagonal() <= 0):
            raise FactorizationError(f"{name}: matrix is not symmetric positive definite")

    def solve(self, rhs):
        if self._lu is None:
            return rhs / self._diag
        return self._lu.solve(rhs)


@dataclass
class FactorizedSystems:
    tau: float
    b: _Solver = None
    q: _Solver = None
    eta: _Solver = None
    theta: _Solver = None


def prepare_systems(ops, params, tau, mode=BSDIB_3D):
    """Factorise ``M + tau d A`` for every species (bulk ones only in 3D mode)."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    Mg = sp.diags(ops.M_gamma)
    eta = _Solver(Mg + tau * ops.A_gamma, "M_gamma + tau A_gamma")
    theta = eta if params.d_gamma == 1 else _Solver(Mg + params.d_gamma * tau * ops.A_gamma, "M_gamma + d_gamma tau A_gamma")
    out = FactorizedSystems(tau=tau, eta=eta, theta=theta)
    if mode == BSDIB_3D:
        Mo = sp.diags(ops.M_omega)
        out.b = _Solver(Mo + tau * ops.A_omega, "M_omega + tau A_omega")
        out.q = out.b if params.d_omega == 1 else _Solver(Mo + params.d_omega * tau * ops.A_omega, "M_omega + d_omega tau A_omega")
    return out


class _Workspace:
    def __init__(self, n_omega, n_gamma):
        self.rb = np.empty(n_omega)
        self.rq = np.empty(n_omega)
        self.re = np.empty(n_gamma)
        self.rt = np.empty(n_gamma)


_EMPTY = np.zeros(0)
# increments below this are round-off, never a divergence signal
_INCREMENT_FLOOR = 1e-12


def imex_step(state, systems, ops, params, mode=BSDIB_3D, packed=None, work=None, backend=None):
    """Advance ``state`` by one IMEX Euler step of length ``systems.tau``; returns the new state."""
    k = backend or kernels
    packed = params.packed() if packed is None else packed
    coupled = mode == BSDIB_3D
    if work is None:
        work = _Workspace(len(state.bt) if coupled else 0, len(state.eta))
    tau = systems.tau
    if coupled:
        k.imex_rhs(state.bt, state.qt, state.eta, state.theta, ops.M_omega, ops.M_gamma, packed, tau, True,
                   work.rb, work.rq, work.re, work.rt)
        bt = systems.b.solve(work.rb)
        qt = systems.q.solve(work.rq)
    else:
        k.imex_rhs(_EMPTY, _EMPTY, state.eta, state.theta, _EMPTY, ops.M_gamma, packed, tau, False,
                   _EMPTY, _EMPTY, work.re, work.rt)
        bt, qt = state.bt, state.qt
    eta = systems.eta.solve(work.re)
    theta = params.alpha + systems.theta.solve(work.rt)
    n = state.step_index + 1
    for name, v in (("eta", eta), ("theta", theta), ("b", bt), ("q", qt)):
        if not np.all(np.isfinite(v)):
            raise DivergenceError(n, name)
    return SimulationState(bt, qt, eta, theta, n * tau, n)


def initial_state(ops, params, config, mode=BSDIB_3D):
    """Bulk at ``(b0, q0)``; surface at the equilibrium plus uniform noise of the configured amplitude."""
    rng = np.random.default_rng(config.seed)
    ng = ops.n_gamma
    eta = 0.0 + config.noise_eta * rng.random(ng)
    theta = params.alpha + config.noise_theta * (2.0 * rng.random(ng) - 1.0)
    nb = ops.n_omega if mode == BSDIB_3D else 0
    return SimulationState(np.zeros(nb), np.zeros(nb), eta, theta)


@dataclass
class Snapshot:
    step: int
    t: float
    eta: np.ndarray
    theta: np.ndarray
    b: np.ndarray = None
    q: np.ndarray = None


@dataclass
class SimulationResult:
    mode: str
    params: object
    config: TimeSteppingConfig
    mesh: object
    ops: object
    state: SimulationState
    increments: IncrementSeries
    snapshots: list
    timings: dict = field(default_factory=dict)

    @property
    def eta(self):
        return self.state.eta

    @property
    def theta(self):
        return self.state.theta

    def bulk_fields(self):
        """Physical ``(b, q)`` on every mesh vertex, Dirichlet values included (3D runs only)."""
        if self.mode != BSDIB_3D:
            return None, None
        nv = self.mesh.n_vertices
        b = np.full(nv, self.params.b0)
        q = np.full(nv, self.params.q0)
        b[: len(self.state.bt)] += self.state.bt
        q[: len(self.state.qt)] += self.state.qt
        return b, q


def increment_norm(delta, weights, norm):
    if norm == "Linf":
        return float(np.abs(delta).max())
    return float(np.sqrt(np.dot(weights, delta * delta)))


def run_simulation(mesh, params, config, mode=BSDIB_3D, ops=None, state=None, backend=None, progress=None):
    """Integrate from the random initial data to ``T``.

    Returns a :class:`SimulationResult` with the final shifted state, the
    per-step increment of ``eta`` and the surface snapshots.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    timings = {}
    t0 = time.perf_counter()
    if ops is None:
        ops = assemble_global(mesh)
    timings["assembly"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    systems = prepare_systems(ops, params, config.tau, mode)
    timings["factorization"] = time.perf_counter() - t0

    if state is None:
        state = initial_state(ops, params, config, mode)
    n_steps = config.n_steps
    stride = config.snapshot_stride
    packed = params.packed()
    work = _Workspace(ops.n_omega if mode == BSDIB_3D else 0, ops.n_gamma)
    incs = np.empty(n_steps)

    def snap(s):
        sn = Snapshot(s.step_index, s.t, s.eta.copy(), s.theta.copy())
        if config.store_bulk_snapshots and mode == BSDIB_3D:
            sn.b = s.bt + params.b0
            sn.q = s.qt + params.q0
        return sn

    snapshots = [snap(state)]
    t0 = time.perf_counter()
    for n in range(n_steps):
        new = imex_step(state, systems, ops, params, mode, packed, work, backend)
        incs[n] = increment_norm(new.eta - state.eta, ops.M_gamma, config.increment_norm)
        state = new
        if state.step_index % stride == 0 or n == n_steps - 1:
            snapshots.append(snap(state))
        if progress is not None:
            progress(state)
    timings["time_stepping"] = time.perf_counter() - t0

    if n_steps > 1 and incs[-1] > max(incs[0], _INCREMENT_FLOOR):
        msg = f"final increment {incs[-1]:.3e} exceeds the initial one {incs[0]:.3e}: possible divergence"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        log.warning(msg)
    series = IncrementSeries(incs, config.tau * np.arange(1, n_steps + 1), config.increment_norm)
    return SimulationResult(mode, params, config, mesh, ops, state, series, snapshots, timings)


def steady_state_diagnostics(series):
    """Summary of an increment series: final value, decade-decay time, monotonicity, settling."""
    v = np.asarray(series.values, dtype=float)
    if v.size == 0:
        raise ValueError("empty increment series")
    t = np.asarray(series.times, dtype=float)
    running_max = np.maximum.accumulate(v)
    below = np.flatnonzero(v <= 0.1 * v[0]) if v[0] > 0 else np.array([], dtype=int)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = v[1:] / v[:-1]
    ratios = ratios[np.isfinite(ratios)]
    return {
        "initial": float(v[0]),
        "final": float(v[-1]),
        "max": float(v.max()),
        "final_over_max": float(v[-1] / v.max()) if v.max() > 0 else 0.0,
        "decade_decay_time": float(t[below[0]]) if below.size else None,
        "monotone_nonincreasing": bool(np.all(np.diff(v) <= 0)),
        "monotone_nondecreasing": bool(np.all(np.diff(v) >= 0)),
        "settled": bool(v[-1] < 0.01 * running_max[-1]) if running_max[-1] > 0 else True,
        "median_ratio": float(np.median(ratios)) if ratios.size else None,
    }


def pattern_indicators(field, weights=None):
    """Mean, weighted standard deviation, extrema, weighted mean and skewness of a surface field.

    ``weights`` are the lumped surface masses (uniform when omitted).
    """
    x = np.asarray(field, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()
    wm = float(np.dot(w, x))
    d = x - wm
    var = float(np.dot(w, d * d))
    std = math.sqrt(var)
    skew = float(np.dot(w, d**3)) / std**3 if std > 0 else 0.0
    return {
        "mean": float(x.mean()),
        "std": std,
        "min": float(x.min()),
        "max": float(x.max()),
        "mass_weighted_mean": wm,
        "skewness": skew,
    }


def plane_std_profile(mesh, values):
    """Standard deviation of ``values`` (one per vertex) over every horizontal vertex plane.

    Returns ``(z, std)`` sorted by height.
    """
    z = mesh.vertices[:, 2]
    levels = np.unique(np.round(z / mesh.L, 12))
    zs, stds = [], []
    for lev in levels:
        sel = np.abs(z / mesh.L - lev) <= 1e-10
        zs.append(float(z[sel].mean()))
        stds.append(float(np.std(values[sel])))
    return np.array(zs), np.array(stds)


def interior_plane_profile(mesh, values):
    """:func:`plane_std_profile` without the Dirichlet top plane."""
    z, s = plane_std_profile(mesh, values)
    keep = np.abs(z - mesh.L) > 1e-10 * mesh.L
    return z[keep], s[keep]


def top_vertex_mask(mesh):
    return mesh.vertex_tags == VertexTag.ON_GAMMA_T
