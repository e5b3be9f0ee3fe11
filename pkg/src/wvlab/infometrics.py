"""Classical and quantum Fisher information, SNR, the post-selection
information budget, and the standard scaling bounds.

The post-selected quantities are evaluated with exact conditioning kernels:
for U = exp(-i g A x M) and selection states (i, f), the conditioned meter is
K(m) = sum_k u_k e^{-i a_k g m} acting multiplicatively in the eigenbasis of
the meter generator M (momentum p or photon number n), with
u_k = <f|v_k><v_k|i>. Its g-derivative kernel is J(m) = sum_k u_k a_k m
e^{-i a_k g m}, so p_f, dp_f/dg and the conditioned-state QFI are all plain
quadratures -- no weak-coupling approximation anywhere.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .coupling import CouplingConfig, Generator
from .errors import EmptyPostselection, StepTooLarge, UnsupportedDimension, ZeroVariance
from .meter import (
    FockMeter,
    FockState,
    GaussianMeter,
    GridMeter,
    SampledDistribution,
    coherent_coeffs,
)
from .qsys import SystemState

PROBABILITY_FLOOR = 1e-14  # outcomes below this are excluded from FI sums
SLD_EIGENVALUE_CUTOFF = 1e-12


# ---------------------------------------------------------------------------
# parameterized outcome distributions


@dataclass
class ParamDistribution:
    """Family g -> outcome distribution.

    Discrete: `evaluator(g)` returns a probability vector over `labels`.
    Continuous: `evaluator(g)` returns density samples on the fixed uniform
    `grid`. An optional analytic `derivative(g)` short-circuits the
    finite-difference machinery in `classical_fisher`.
    """

    kind: str  # "discrete" | "continuous"
    evaluator: Callable[[float], np.ndarray]
    grid: np.ndarray | None = None
    labels: np.ndarray | None = None
    derivative: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in ("discrete", "continuous"):
            raise ValueError("kind must be 'discrete' or 'continuous'")
        if self.kind == "continuous":
            if self.grid is None:
                raise ValueError("continuous distribution needs a grid")
            self.grid = np.asarray(self.grid, dtype=float)
        elif self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=float)

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0]) if self.kind == "continuous" else 1.0

    def probabilities(self, g: float) -> np.ndarray:
        p = np.asarray(self.evaluator(g), dtype=float)
        if p.min() < -1e-12:
            raise ValueError(f"negative probability {p.min():.3e} at g={g!r}")
        total = p.sum() * self.spacing
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"distribution sums to {total!r} at g={g!r}")
        return np.clip(p, 0.0, None)

    def outcome_values(self) -> np.ndarray:
        if self.kind == "continuous":
            return self.grid
        if self.labels is None:
            raise ValueError("discrete distribution has no numeric labels")
        return self.labels

    def mean_std(self, g: float) -> tuple[float, float]:
        x = self.outcome_values()
        w = self.probabilities(g) * self.spacing
        w = w / w.sum()
        m = float(np.sum(x * w))
        v = float(np.sum((x - m) ** 2 * w))
        return m, math.sqrt(max(v, 0.0))


def binary_selection_distribution(p_of_g: Callable[[float], float]) -> ParamDistribution:
    """The {p_f, 1 - p_f} statistics of post-selection as a distribution."""

    def evaluate(g: float) -> np.ndarray:
        p = float(p_of_g(g))
        return np.array([p, 1.0 - p])

    return ParamDistribution("discrete", evaluate, labels=np.array([1.0, 0.0]))


# ---------------------------------------------------------------------------
# classical Fisher information


class FisherMethod(enum.Enum):
    ANALYTIC = "analytic"
    CENTRAL_DIFFERENCE = "central_difference"


@dataclass(frozen=True)
class FisherReport:
    fi: float
    method: FisherMethod
    step: float

    def __post_init__(self):
        if self.fi < -1e-9:
            raise ValueError(f"Fisher information {self.fi!r} < -1e-9")
        object.__setattr__(self, "fi", max(self.fi, 0.0))

    def to_dict(self) -> dict:
        return {"fi": self.fi, "method": self.method.value, "step": self.step}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def default_step(g: float) -> float:
    """Central-difference step balancing truncation against roundoff."""
    return max(1e-6, 1e-4 * abs(g))


def classical_fisher(
    dist: ParamDistribution, g: float, h: float | None = None
) -> FisherReport:
    """F_g = sum_x (d_g P)^2 / P (integral for densities).

    Uses the supplied analytic derivative when available; otherwise central
    differences at steps h and h/2 combined by one Richardson extrapolation.
    Outcomes with P < 1e-14 are excluded.
    """
    p0 = dist.probabilities(g)
    if dist.derivative is not None:
        dp = np.asarray(dist.derivative(g), dtype=float)
        method, step = FisherMethod.ANALYTIC, 0.0
    else:
        step = h if h is not None else default_step(g)
        try:
            d1 = (dist.probabilities(g + step) - dist.probabilities(g - step)) / (
                2 * step
            )
            d2 = (
                dist.probabilities(g + step / 2) - dist.probabilities(g - step / 2)
            ) / step
        except ValueError as exc:
            raise StepTooLarge(
                f"two-sided probe at step {step!r} left the valid domain"
            ) from exc
        dp = (4 * d2 - d1) / 3
        method = FisherMethod.CENTRAL_DIFFERENCE
    mask = p0 > PROBABILITY_FLOOR
    fi = float(np.sum(dp[mask] ** 2 / p0[mask]) * dist.spacing)
    return FisherReport(fi, method, step)


def snr(dist: ParamDistribution, g: float, nu: int, x0: float) -> float:
    """sqrt(nu) |<x> - x0| / std(x) under the distribution at g."""
    if nu < 1:
        raise ValueError("nu must be >= 1")
    mean, std = dist.mean_std(g)
    if std <= 0:
        raise ZeroVariance("outcome distribution has zero variance")
    return math.sqrt(nu) * abs(mean - x0) / std


# ---------------------------------------------------------------------------
# quantum Fisher information


def _family_vector(state) -> np.ndarray:
    """Flatten a state into a Euclidean-normalized complex vector."""
    if isinstance(state, GridMeter):
        return state.amplitudes * math.sqrt(state.spacing)
    if isinstance(state, FockState):
        return state.coeffs
    if isinstance(state, SystemState):
        return state.amplitudes
    return np.asarray(state, dtype=complex).reshape(-1)


def qfi_pure(family: Callable[[float], object], g: float, h: float = 1e-6) -> float:
    """4 [ <d psi|d psi> - |<d psi|psi>|^2 ] with a central-difference derivative.

    The family must return normalized states (vectors, SystemState, GridMeter
    or FockState); each evaluation is re-normalized defensively.
    """

    def vec(x: float) -> np.ndarray:
        v = _family_vector(family(x))
        return v / np.linalg.norm(v)

    psi = vec(g)
    dpsi = (vec(g + h) - vec(g - h)) / (2 * h)
    term1 = float(np.real(np.vdot(dpsi, dpsi)))
    term2 = abs(np.vdot(dpsi, psi)) ** 2
    return 4.0 * (term1 - term2)


def qfi_mixed(family: Callable[[float], np.ndarray], g: float, h: float = 1e-6) -> float:
    """QFI of a density-matrix family via the symmetric logarithmic derivative.

    Builds L = sum_{jk} 2 (d rho)_{jk} / (lambda_j + lambda_k) |j><k| over
    eigenvalue pairs with lambda_j + lambda_k > 1e-12 and returns Tr(L rho L).
    """
    rho = np.asarray(family(g), dtype=complex)
    drho = (np.asarray(family(g + h), dtype=complex) - np.asarray(family(g - h), dtype=complex)) / (2 * h)
    lam, vecs = np.linalg.eigh(rho)
    d_eig = vecs.conj().T @ drho @ vecs
    denom = lam[:, None] + lam[None, :]
    sld = np.zeros_like(d_eig)
    ok = denom > SLD_EIGENVALUE_CUTOFF
    sld[ok] = 2.0 * d_eig[ok] / denom[ok]
    rho_eig = np.diag(lam.astype(complex))
    return float(np.real(np.trace(sld @ rho_eig @ sld)))


# ---------------------------------------------------------------------------
# meter-generator moments and conditioning kernels


def _generator_weights(meter, cfg: CouplingConfig, points: int = 4096):
    """(values m, probability weights w) of the meter generator's spectrum."""
    if cfg.generator is Generator.MOMENTUM_KICK:
        if isinstance(meter, GaussianMeter):
            sp = 1.0 / (2 * meter.sigma)
            p = np.linspace(
                meter.mean_p - 8 * sp, meter.mean_p + 8 * sp, points, endpoint=False
            )
            w = np.exp(-((p - meter.mean_p) ** 2) / (2 * sp**2)) / math.sqrt(
                2 * np.pi * sp**2
            )
            w = w / (w.sum())
            return p, w
        if isinstance(meter, GridMeter):
            mom = meter.momentum()
            w = np.abs(mom.amplitudes) ** 2
            return mom.q_grid, w / w.sum()
        raise UnsupportedDimension("momentum generator needs Gaussian or grid meter")
    if isinstance(meter, FockMeter):
        w = meter.number_probabilities()
    elif isinstance(meter, FockState):
        w = meter.number_probabilities()
    else:
        raise UnsupportedDimension("photon-number generator needs a Fock meter")
    n = np.arange(w.size, dtype=float)
    return n, w / w.sum()


def generator_moments(meter, cfg: CouplingConfig) -> tuple[float, float]:
    """(mean, variance) of the coupling generator in the initial meter."""
    if cfg.generator is Generator.MOMENTUM_KICK and isinstance(meter, GaussianMeter):
        return meter.mean_p, meter.var_p()
    m, w = _generator_weights(meter, cfg)
    mean = float(np.sum(m * w))
    return mean, float(np.sum(m**2 * w) - mean**2)


def qfi_joint(pre: SystemState, meter, cfg: CouplingConfig) -> float:
    """QFI of the joint state: 4 [ <A^2>_s <M^2>_m - <A>_s^2 <M>_m^2 ]
    (equivalently 4 [ <A^2> Var(M) + Var(A) <M>^2 ])."""
    amps = pre.amplitudes
    a1 = float(np.real(np.vdot(amps, cfg.a.matrix @ amps)))
    a2 = float(np.real(np.vdot(amps, cfg.a.matrix @ cfg.a.matrix @ amps)))
    m_mean, m_var = generator_moments(meter, cfg)
    return 4.0 * (a2 * (m_var + m_mean**2) - a1**2 * m_mean**2)


@dataclass(frozen=True)
class _Kernels:
    values: np.ndarray  # generator spectrum m
    weights: np.ndarray  # |phi(m)|^2 weights
    k: np.ndarray  # K(m) = sum_k u_k exp(-i a_k g m)
    j: np.ndarray  # J(m) = sum_k u_k a_k m exp(-i a_k g m)

    def p_f(self) -> float:
        return float(np.sum(np.abs(self.k) ** 2 * self.weights))

    def dp_dg(self) -> float:
        # p' = 2 Im <K|J> for the unnormalized kernels
        return 2.0 * float(np.imag(np.sum(np.conj(self.k) * self.j * self.weights)))

    def qfi_conditioned(self) -> float:
        p = self.p_f()
        if p <= PROBABILITY_FLOOR:
            raise EmptyPostselection(f"p_f = {p:.3e}")
        jj = float(np.sum(np.abs(self.j) ** 2 * self.weights))
        jk = complex(np.sum(np.conj(self.j) * self.k * self.weights))
        return 4.0 * (jj / p - abs(jk) ** 2 / p**2)


def _conditioning_kernels(
    pre: SystemState, post: SystemState, cfg: CouplingConfig, meter
) -> _Kernels:
    eigvals, eigvecs = cfg.a.eig()
    u = np.array(
        [
            np.vdot(post.amplitudes, eigvecs[:, k])
            * np.vdot(eigvecs[:, k], pre.amplitudes)
            for k in range(eigvals.size)
        ]
    )
    m, w = _generator_weights(meter, cfg)
    phases = np.exp(-1j * np.outer(eigvals, m) * cfg.g)
    k = u @ phases
    j = (u * eigvals) @ (phases * m[None, :])
    return _Kernels(m, w, k, j)


def qfi_postselected(
    pre: SystemState, post: SystemState, cfg: CouplingConfig, meter
) -> tuple[float, float]:
    """(p_f, Q_f): success probability and QFI of the conditioned meter.

    Q_f = 4 [ <J'J> - |<J'K>|^2 ] with J and K the exact conditioning kernels
    scaled by 1/sqrt(p_f); identical to the QFI of the normalized conditioned
    meter family (the p_f variation cancels exactly).
    """
    kern = _conditioning_kernels(pre, post, cfg, meter)
    p = kern.p_f()
    if p <= PROBABILITY_FLOOR:
        raise EmptyPostselection(f"p_f = {p:.3e}")
    return p, kern.qfi_conditioned()


def selection_probability(
    pre: SystemState, post: SystemState, cfg: CouplingConfig, meter
) -> tuple[float, float]:
    """(p_f, dp_f/dg) with the derivative evaluated analytically."""
    kern = _conditioning_kernels(pre, post, cfg, meter)
    return kern.p_f(), kern.dp_dg()


def selection_fisher(
    pre: SystemState, post: SystemState, cfg: CouplingConfig, meter
) -> float:
    """F_p = (dp_f/dg)^2 / (p_f (1 - p_f)): FI of the selection statistics."""
    p, dp = selection_probability(pre, post, cfg, meter)
    if p <= PROBABILITY_FLOOR or p >= 1.0 - PROBABILITY_FLOOR:
        return 0.0
    return dp**2 / (p * (1.0 - p))


# ---------------------------------------------------------------------------
# information budget


@dataclass(frozen=True)
class InfoBudget:
    """Split of the joint-state QFI across the post-selection POVM:
    q_jt = p_f q_f + p_r q_r + f_p within 1e-6 relative."""

    q_jt: float
    p_f_q_f: float
    p_r_q_r: float
    f_p: float

    def __post_init__(self):
        parts = self.p_f_q_f + self.p_r_q_r + self.f_p
        if abs(parts - self.q_jt) > 1e-6 * max(abs(self.q_jt), 1e-30):
            raise ValueError(
                f"budget identity violated: {parts!r} vs q_jt = {self.q_jt!r}"
            )

    @property
    def residual(self) -> float:
        return abs(self.p_f_q_f + self.p_r_q_r + self.f_p - self.q_jt) / abs(self.q_jt)

    def to_dict(self) -> dict:
        return {
            "q_jt": self.q_jt,
            "pf_qf": self.p_f_q_f,
            "pr_qr": self.p_r_q_r,
            "f_p": self.f_p,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def info_budget(
    pre: SystemState, post: SystemState, cfg: CouplingConfig, meter
) -> InfoBudget:
    """Assemble {Q_jt, p_f Q_f, p_r Q_r, F_p} for a qubit selection.

    The failure arm uses the unique state orthogonal to `post`, so the POVM is
    the rank-1 pair of the two-arm post-selection.
    """
    if pre.dim != 2:
        raise UnsupportedDimension("info_budget requires a qubit system")
    q_jt = qfi_joint(pre, meter, cfg)
    p_f, q_f = qfi_postselected(pre, post, cfg, meter)
    post_r = post.orthogonal_qubit()
    try:
        p_r, q_r = qfi_postselected(pre, post_r, cfg, meter)
    except EmptyPostselection:
        p_r, q_r = 0.0, 0.0
    f_p = selection_fisher(pre, post, cfg, meter)
    return InfoBudget(q_jt, p_f * q_f, p_r * q_r, f_p)


# ---------------------------------------------------------------------------
# scaling bounds


def scaling_bounds(n: int, h_min: float, h_max: float) -> tuple[float, float]:
    """(Q_SQL, Q_HL) = (N (h_max-h_min)^2, N^2 (h_max-h_min)^2) for N probes."""
    if n < 1:
        raise ValueError("N must be >= 1")
    if not h_max > h_min:
        raise ValueError("h_max must exceed h_min")
    spread2 = (h_max - h_min) ** 2
    return n * spread2, n**2 * spread2


def tmsv_phase_variance(nbar: float) -> float:
    """Two-mode squeezed-vacuum phase bound Var(phi) = 1 / [8 (nbar^2 + nbar)]."""
    if nbar <= 0:
        raise ValueError("nbar must be positive")
    return 1.0 / (8.0 * (nbar**2 + nbar))
