"""Model constants, reaction kinetics and no-diffusion stability of the BS-DIB system.

The surface kinetics follow the DIB morphochemical model::

    f3 = rho [A1 b (1 - theta) eta - A2 eta^3 - B (theta - alpha)]
    f4 = rho [C q (1 + k2 eta)(1 - theta)(1 - gamma (1 - theta))
              - D (1 + k3 eta) theta (1 + gamma theta)]

and the bulk kinetics relax ``b`` and ``q`` linearly towards ``b0`` and ``q0``.
"""

import dataclasses
import math
from dataclasses import dataclass

import numpy as np


class ParameterError(ValueError):
    pass


def derived_D(C, alpha, gamma, q0=1.0):
    """Value of ``D`` that makes ``(b0, q0, 0, alpha)`` an equilibrium."""
    return q0 * C * (1 - alpha) * (1 - gamma + gamma * alpha) / (alpha * (1 + gamma * alpha))


@dataclass(frozen=True)
class ModelParameters:
    B: float
    C: float
    A2: float = 1.0
    gamma: float = 0.0
    psi_eta: float = 0.0
    psi_theta: float = 0.0
    d_omega: float = 1.0
    d_gamma: float = 20.0
    k_b: float = 1.0
    k_q: float = 1.0
    b0: float = 1.0
    q0: float = 1.0
    rho: float = 1.0
    alpha: float = 0.5
    A1: float = 10.0
    k2: float = 2.5
    k3: float = 1.5
    D: float = None  # None selects derived_D

    def __post_init__(self):
        if self.D is None:
            object.__setattr__(self, "D", derived_D(self.C, self.alpha, self.gamma, self.q0))
        for f in dataclasses.fields(self):
            v = float(getattr(self, f.name))
            object.__setattr__(self, f.name, v)
            if not math.isfinite(v):
                raise ParameterError(f"{f.name} must be finite, got {v}")
        if not 0 <= self.gamma < 1:
            raise ParameterError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0 < self.alpha < 1:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        for name in ("d_omega", "d_gamma", "k_b", "k_q", "b0", "q0", "rho", "A1", "A2", "B", "C", "k2", "k3", "D"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("psi_eta", "psi_theta"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative, got {getattr(self, name)}")

    @property
    def D_is_derived(self):
        return math.isclose(self.D, derived_D(self.C, self.alpha, self.gamma, self.q0), rel_tol=1e-15)

    def replace(self, **changes):
        if ("C" in changes or "gamma" in changes or "alpha" in changes or "q0" in changes) and "D" not in changes:
            if self.D_is_derived:
                changes["D"] = None
        return dataclasses.replace(self, **changes)

    def packed(self):
        """Float array in the order expected by the IMEX kernels."""
        return np.array(
            [
                self.k_b, self.k_q, self.b0, self.q0, self.rho, self.alpha, self.gamma,
                self.A1, self.A2, self.B, self.C, self.D, self.k2, self.k3,
                self.psi_eta, self.d_omega * self.psi_theta,
            ],
            dtype=np.float64,
        )

    def as_dict(self):
        return dataclasses.asdict(self)


PARAMETER_NAMES = tuple(f.name for f in dataclasses.fields(ModelParameters))


def f1(p, b):
    return -p.k_b * (b - p.b0)


def f2(p, q):
    return -p.k_q * (q - p.q0)


def f3(p, b, eta, theta):
    return p.rho * (p.A1 * b * (1 - theta) * eta - p.A2 * eta**3 - p.B * (theta - p.alpha))


def f4(p, q, eta, theta):
    om = 1 - theta
    return p.rho * (
        p.C * q * (1 + p.k2 * eta) * om * (1 - p.gamma * om)
        - p.D * (1 + p.k3 * eta) * theta * (1 + p.gamma * theta)
    )


def f1_tilde(p, bt):
    return f1(p, bt + p.b0)


def f2_tilde(p, qt):
    return f2(p, qt + p.q0)


def f3_tilde(p, bt, eta, theta):
    return f3(p, bt + p.b0, eta, theta)


def f4_tilde(p, qt, eta, theta):
    return f4(p, qt + p.q0, eta, theta)


def surface_kinetics(p, eta, theta, surface_only=True, b=None, q=None):
    """``(f3, f4)``; with ``surface_only`` the bulk traces are frozen at ``b0, q0`` (2D DIB)."""
    if surface_only:
        b, q = p.b0, p.q0
    return f3(p, b, eta, theta), f4(p, q, eta, theta)


def kinetics(p, xi):
    """Full kinetic vector field ``F(b, q, eta, theta)``."""
    b, q, eta, theta = xi
    return np.array([f1(p, b), f2(p, q), f3(p, b, eta, theta), f4(p, q, eta, theta)])


@dataclass(frozen=True)
class Equilibrium:
    b: float
    q: float
    eta: float
    theta: float

    def as_array(self):
        return np.array([self.b, self.q, self.eta, self.theta])


def equilibrium(p):
    """The homogeneous equilibrium ``(b0, q0, 0, alpha)``; exact when ``D`` is derived."""
    return Equilibrium(p.b0, p.q0, 0.0, p.alpha)


def numeric_jacobian(p, xi=None, step=1e-5):
    """Central finite-difference Jacobian of the kinetics."""
    xi = equilibrium(p).as_array() if xi is None else np.asarray(xi, dtype=float)
    J = np.empty((4, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = step
        J[:, j] = (kinetics(p, xi + e) - kinetics(p, xi - e)) / (2 * step)
    return J


def jacobian_at_equilibrium(p, closed_form=True):
    """Jacobian of the kinetics at the equilibrium, blocks ``[[J_omega, 0], [J_h, J_gamma]]``.

    The closed form holds for ``gamma = 0``; otherwise pass ``closed_form=False``
    to get a finite-difference Jacobian.
    """
    if not closed_form:
        return numeric_jacobian(p)
    if p.gamma != 0:
        raise ParameterError("closed-form Jacobian requires gamma = 0; use closed_form=False")
    r, a = p.rho, p.alpha
    J = np.zeros((4, 4))
    J[0, 0] = -p.k_b
    J[1, 1] = -p.k_q
    J[3, 1] = r * p.C * (1 - a)
    J[2, 2] = r * p.b0 * p.A1 * (1 - a)
    J[2, 3] = -r * p.B
    J[3, 2] = r * p.q0 * p.C * (p.k2 - p.k3) * (1 - a)
    J[3, 3] = -r * p.q0 * p.C / a
    return J


def blocks(J):
    """Split a 4x4 Jacobian into ``(J_omega, J_h, J_gamma)``."""
    return J[:2, :2], J[2:, :2], J[2:, 2:]


@dataclass
class StabilityReport:
    trace_J_gamma: float
    det_J_gamma: float
    eigenvalues: np.ndarray
    condition_B: bool
    condition_C: bool
    stable: bool
    stable_numeric: bool
    B_threshold: float
    C_threshold: float

    def lines(self):
        ev = ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in self.eigenvalues)
        return [
            f"trace_J_gamma = {self.trace_J_gamma:.12g}",
            f"det_J_gamma = {self.det_J_gamma:.12g}",
            f"eigenvalues = {ev}",
            f"condition_B (B > {self.B_threshold:.12g}) = {self.condition_B}",
            f"condition_C (C > {self.C_threshold:.12g}) = {self.condition_C}",
            f"stable = {self.stable}",
            f"stable_numeric = {self.stable_numeric}",
        ]


def stability_thresholds(p):
    """``(B_min, C_min)``: stability without diffusion iff ``B > B_min`` and ``C > C_min`` (gamma = 0)."""
    return p.A1 * p.b0 / (p.alpha * (p.k2 - p.k3)), p.b0 / p.q0 * p.A1 * p.alpha * (1 - p.alpha)


def stability_check(p):
    """Stability of the equilibrium in the absence of diffusion (gamma = 0)."""
    if p.gamma != 0:
        raise ParameterError("the stability criterion is stated for gamma = 0")
    if p.k2 <= p.k3:
        raise ParameterError("criterion degenerates for k2 <= k3")
    J = jacobian_at_equilibrium(p)
    _, _, Jg = blocks(J)
    Bmin, Cmin = stability_thresholds(p)
    ev = np.linalg.eigvals(J)
    cb, cc = bool(p.B > Bmin), bool(p.C > Cmin)
    return StabilityReport(
        trace_J_gamma=float(np.trace(Jg)),
        det_J_gamma=float(np.linalg.det(Jg)),
        eigenvalues=ev,
        condition_B=cb,
        condition_C=cc,
        stable=cb and cc,
        stable_numeric=bool(np.all(ev.real < 0)),
        B_threshold=Bmin,
        C_threshold=Cmin,
    )


def parse_value(name, text, lineno=None):
    where = f"line {lineno}: " if lineno is not None else ""
    if name == "D" and text.strip().lower() == "auto":
        return None
    try:
        return float(text)
    except ValueError:
        raise ParameterError(f"{where}{name} expects a number, got {text.strip()!r}") from None


def read_key_values(text):
    """Parse ``name = value`` lines; ``#`` starts a comment. Yields ``(lineno, key, value)``."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"line {lineno}: expected 'name = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ParameterError(f"line {lineno}: expected 'name = value', got {raw.strip()!r}")
        yield lineno, key, value


def load_parameters(text):
    """Build :class:`ModelParameters` from a key-value parameter file's contents."""
    values = {}
    for lineno, key, value in read_key_values(text):
        if key == "psi":
            values["psi_eta"] = values["psi_theta"] = parse_value(key, value, lineno)
            continue
        if key not in PARAMETER_NAMES:
            raise ParameterError(f"line {lineno}: unknown parameter {key!r}")
        values[key] = parse_value(key, value, lineno)
    for req in ("B", "C"):
        if req not in values:
            raise ParameterError(f"missing required parameter {req!r}")
    return ModelParameters(**values)
