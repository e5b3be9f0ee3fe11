"""Noise and detector-imperfection models with their Fisher-information yields.

Covers time-correlated measurement noise (white floor + exponential memory),
beam-jitter closed forms for conventional vs imaginary-weak-value deflection
measurements, detector pixelation, and saturating photodetectors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, toeplitz
from scipy.stats import norm as _norm
from scipy.stats import poisson as _poisson

from .errors import ResolutionTooCoarse, SingularCovariance, UnsupportedCombination
from .infometrics import ParamDistribution, classical_fisher
from .meter import SampledDistribution


# ---------------------------------------------------------------------------
# time-correlated noise (white floor + exponential memory)


@dataclass(frozen=True)
class CorrelatedNoiseModel:
    """C_{k,l} = a delta_{k,l} + c exp(-|k-l| dt / tau_c) over N measurements."""

    a: float
    c: float
    dt: float
    tau_c: float
    n: int

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("white-noise floor a must be positive")
        if self.c < 0:
            raise ValueError("correlated variance c must be nonnegative")
        if self.dt <= 0 or self.tau_c <= 0:
            raise ValueError("dt and tau_c must be positive")
        if self.n < 1:
            raise ValueError("N must be >= 1")

    @property
    def ratio(self) -> float:
        """Decay per step, dt / tau_c."""
        return self.dt / self.tau_c

    def thinned(self, p_f: float) -> "CorrelatedNoiseModel":
        """Noise model seen by the p_f-fraction of post-selected samples."""
        n_kept = max(1, round(self.n * p_f))
        return CorrelatedNoiseModel(self.a, self.c, self.dt / p_f, self.tau_c, n_kept)


def covariance(model: CorrelatedNoiseModel) -> np.ndarray:
    """Dense N x N covariance matrix; symmetric positive definite."""
    lags = np.arange(model.n)
    row = model.c * np.exp(-lags * model.ratio)
    mat = toeplitz(row)
    mat[np.diag_indices(model.n)] += model.a
    return mat


def spd_cholesky(mat: np.ndarray):
    """Cholesky factor of a symmetric positive-definite matrix, retrying once
    with a trace-scaled jitter before declaring the matrix singular."""
    try:
        return cho_factor(mat)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.trace(mat) / mat.shape[0]
        try:
            return cho_factor(mat + jitter * np.eye(mat.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise SingularCovariance("covariance not positive definite") from exc


def cm_fisher_correlated(model: CorrelatedNoiseModel) -> float:
    """F_CM = sum_{k,l} [C^{-1}]_{k,l}, via a Cholesky solve of C y = 1."""
    mat = covariance(model)
    y = cho_solve(spd_cholesky(mat), np.ones(model.n))
    return float(y.sum())


def amr_variance_exact(model: CorrelatedNoiseModel) -> float:
    """Exact variance of the plain sample mean: sum(C) / N^2."""
    lags = np.arange(1, model.n)
    s = model.n * (model.a + model.c) + 2 * model.c * np.sum(
        (model.n - lags) * np.exp(-lags * model.ratio)
    )
    return float(s) / model.n**2


class AmrRegime(enum.Enum):
    WHITE = "white"
    SLOW_CM = "slow_cm"
    SLOW_WVA_UNCORRELATED = "slow_wva_1"  # p_f below dt/tau: thinning whitens
    SLOW_WVA_CORRELATED = "slow_wva_2"  # p_f above dt/tau: still correlated


@dataclass(frozen=True)
class AmrInfo:
    value: float
    regime: AmrRegime
    p_f_threshold: float  # dt / tau_c, the boundary the regime choice used


def amr_information(
    model: CorrelatedNoiseModel,
    scheme: str = "cm",
    p_f: float | None = None,
    weak_value: float | None = None,
) -> AmrInfo:
    """Closed-form information of the averaging estimator per regime.

    CM: N/(a+c) in the white limit (tau <= dt), N/(a+Nc) in the slow limit.
    WVA (requires the trade-off p_f w^2 = 1): N/(a+c) in the white limit and
    in the slow limit with p_f below dt/tau (thinning de-correlates);
    w^2 p_f N / (a + p_f N c) when the kept samples stay correlated.
    The regime threshold (p_f vs dt/tau) is explicit in the result.
    """
    thr = model.ratio
    white = model.tau_c <= model.dt
    if scheme == "cm":
        if white:
            return AmrInfo(model.n / (model.a + model.c), AmrRegime.WHITE, thr)
        return AmrInfo(
            model.n / (model.a + model.n * model.c), AmrRegime.SLOW_CM, thr
        )
    if scheme != "wva":
        raise ValueError("scheme must be 'cm' or 'wva'")
    if p_f is None or weak_value is None:
        raise ValueError("WVA needs p_f and weak_value")
    if abs(p_f * weak_value**2 - 1.0) > 1e-6:
        raise ValueError(
            "optimal real WVA requires the trade-off p_f <A>_w^2 = 1 "
            f"(got {p_f * weak_value ** 2!r})"
        )
    if white or p_f <= thr:
        regime = AmrRegime.WHITE if white else AmrRegime.SLOW_WVA_UNCORRELATED
        return AmrInfo(model.n / (model.a + model.c), regime, thr)
    kept = p_f * model.n
    value = weak_value**2 * kept / (model.a + kept * model.c)
    return AmrInfo(value, AmrRegime.SLOW_WVA_CORRELATED, thr)


# ---------------------------------------------------------------------------
# beam-jitter noise (deflection measurement, CM vs imaginary WVA)


@dataclass(frozen=True)
class BeamGeometry:
    """Gaussian-beam deflection setup: wavenumber k0, propagation l1 then l2,
    lens focal length f, beam waist sigma, N detected photons."""

    k0: float
    l1: float
    l2: float
    f: float
    sigma: float
    n: int

    def __post_init__(self):
        for name in ("k0", "l1", "l2", "f", "sigma"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n < 1:
            raise ValueError("N must be >= 1")

    @property
    def diffraction_factor(self) -> float:
        """(l1 + l2) / (2 k0 sigma^2): how much beam spreading suppresses
        angular jitter in the imaginary-WVA readout."""
        return (self.l1 + self.l2) / (2 * self.k0 * self.sigma**2)


class JitterCase(enum.Enum):
    ANGULAR = "angular_b0"
    DISPLACEMENT = "displacement_q0"
    DETECTOR = "detector_d0"


def jitter_fisher(
    case: JitterCase, geometry: BeamGeometry, noise_std: float, scheme: str
) -> float:
    """Closed-form FI about the deflection for the supported combinations.

    scheme is "cm" or "imaginary_wva". The (cm, displacement) pair has no
    closed form in the source analysis and raises UnsupportedCombination.
    """
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    base = 4.0 * geometry.n * geometry.sigma**2
    s = geometry.sigma
    if scheme == "cm":
        if case is JitterCase.ANGULAR:
            return base / (1.0 + (2 * s * noise_std) ** 2)
        if case is JitterCase.DETECTOR:
            return base / (1.0 + (2 * geometry.k0 * s * noise_std / geometry.f) ** 2)
        raise UnsupportedCombination(
            "no closed form for CM with displacement noise; not invented"
        )
    if scheme != "imaginary_wva":
        raise ValueError("scheme must be 'cm' or 'imaginary_wva'")
    if case is JitterCase.ANGULAR:
        d = geometry.diffraction_factor
        return base / (1.0 + d**2 * (1.0 + (2 * s * noise_std) ** 2))
    if case is JitterCase.DISPLACEMENT:
        return 4.0 * geometry.n * (s**2 + noise_std**2)
    return base / (1.0 + noise_std**2 / s**2)


# ---------------------------------------------------------------------------
# pixelation


@dataclass(frozen=True)
class PixelatedDetector:
    """Arrayed detector with pixel width r and boundary misalignment h in [0, r)."""

    r: float
    h: float = 0.0

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("pixel width must be positive")
        if not 0 <= self.h < self.r:
            raise ValueError("misalignment h must lie in [0, r)")

    def edges(self, lo: float, hi: float) -> np.ndarray:
        """Pixel boundaries (n - 1/2) r + h covering [lo, hi]."""
        n_lo = math.floor((lo - self.h) / self.r - 0.5)
        n_hi = math.ceil((hi - self.h) / self.r + 0.5)
        ns = np.arange(n_lo, n_hi + 1)
        return (ns - 0.5) * self.r + self.h


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability masses over integer pixel indices."""

    labels: np.ndarray
    probs: np.ndarray


def pixelate(dist: SampledDistribution, det: PixelatedDetector) -> DiscreteDistribution:
    """Bin a sampled density into pixels; mass-preserving within 1e-10.

    Uses the linearly interpolated CDF so pixel masses telescope exactly to
    the grid total. Requires at least 8 grid samples per pixel.
    """
    dq = dist.spacing
    if det.r < 8 * dq:
        raise ResolutionTooCoarse(
            f"pixel width {det.r!r} < 8 grid steps ({8 * dq!r})"
        )
    grid, dens = dist.grid, dist.density
    # cumulative trapezoid over the grid; cdf[i] is mass up to grid[i]
    inc = 0.5 * (dens[1:] + dens[:-1]) * dq
    cdf = np.concatenate([[0.0], np.cumsum(inc)])
    edges = det.edges(grid[0], grid[-1])
    cdf_at = np.interp(edges, grid, cdf)
    masses = np.diff(cdf_at)
    labels = np.round((edges[:-1] + det.r / 2 - det.h) / det.r).astype(int)
    total_grid = cdf[-1]
    if abs(masses.sum() - total_grid) > 1e-10:
        raise AssertionError("pixelation lost probability mass")
    return DiscreteDistribution(labels, masses / total_grid)


def _pixelated_family(
    density_of_g, det: PixelatedDetector, grid: np.ndarray, g0: float
) -> ParamDistribution:
    # pixel edges frozen once so every g (and every scheme compared against
    # this one) sees the identical misalignment h
    frozen_edges = det.edges(grid[0], grid[-1])

    def evaluate(g: float) -> np.ndarray:
        dens = density_of_g(g)
        inc = 0.5 * (dens[1:] + dens[:-1]) * (grid[1] - grid[0])
        cdf = np.concatenate([[0.0], np.cumsum(inc)])
        cdf_at = np.interp(frozen_edges, grid, cdf)
        masses = np.diff(cdf_at)
        return masses / masses.sum()

    return ParamDistribution("discrete", evaluate)


def pixelated_fisher_ratio(
    scheme: str,
    g: float,
    sigma: float,
    det: PixelatedDetector,
    selection,
) -> float:
    """p_f F(pixelated WVA) / F(pixelated CM) with identical misalignment h.

    `selection` is (pre, post, A) as SystemState/Observable objects. For the
    real scheme the ratio collapses to Re(<f|A|i>)^2 / lambda_max^2 <= 1; for
    the imaginary scheme it is the ratio alpha_p / alpha_q of pixelation
    degradation factors, approaching 1 for fine pixels.
    """
    from .qsys import weak_value as _wv  # local import to avoid cycles

    pre, post, a = selection
    w = _wv(pre, post, a)
    lam_max = float(np.max(np.abs(np.linalg.eigvalsh(a.matrix))))
    p_f = abs(np.vdot(post.amplitudes, pre.amplitudes)) ** 2

    if scheme == "real_wva":
        nu_wva, width = w.real, sigma
    elif scheme == "imaginary_wva":
        # detection happens in the conjugate variable: width 1/(2 sigma),
        # shift rate Im(w)/(2 sigma^2) per unit g
        nu_wva, width = w.imag / (2 * sigma**2), 1.0 / (2 * sigma)
    else:
        raise ValueError("scheme must be 'real_wva' or 'imaginary_wva'")

    def gauss_family(nu: float, wd: float):
        grid = np.linspace(-10 * wd, 10 * wd, 8192)

        def density(x: float) -> np.ndarray:
            return np.exp(-((grid - nu * x) ** 2) / (2 * wd**2)) / math.sqrt(
                2 * math.pi * wd**2
            )

        return _pixelated_family(density, det, grid, g), grid

    fam_wva, _ = gauss_family(nu_wva, width)
    fam_cm, _ = gauss_family(lam_max, sigma)
    f_wva = classical_fisher(fam_wva, g).fi
    f_cm = classical_fisher(fam_cm, g).fi
    return p_f * f_wva / f_cm


def pixelation_info_ratio(
    sigma: float, det: PixelatedDetector, g: float = 0.0, points: int = 8192
) -> float:
    """alpha = F(pixelated) / F(ideal) for a Gaussian location family."""
    grid = np.linspace(-10 * sigma, 10 * sigma, points)

    def density(x: float) -> np.ndarray:
        return np.exp(-((grid - x) ** 2) / (2 * sigma**2)) / math.sqrt(
            2 * math.pi * sigma**2
        )

    fam = _pixelated_family(density, det, grid, g)
    return classical_fisher(fam, g).fi * sigma**2


# ---------------------------------------------------------------------------
# saturating detectors


@dataclass(frozen=True)
class SaturatingDetector:
    """Clipping photodetector: readout Gaussian of width readout_sigma around
    the photon number, quantized, clipped to [0, k_s]."""

    k_s: int
    eta: float = 1.0
    readout_sigma: float = 0.0
    quantization: float = 1.0

    def __post_init__(self):
        if self.k_s < 1:
            raise ValueError("saturation threshold must be >= 1")
        if not 0 < self.eta <= 1:
            raise ValueError("detection efficiency must lie in (0, 1]")
        if self.readout_sigma < 0:
            raise ValueError("readout noise must be nonnegative")
        if self.quantization <= 0:
            raise ValueError("quantization step must be positive")

    def readout_levels(self) -> np.ndarray:
        """The digitized ladder 0, Q, 2Q, ..., capped at k_s."""
        ks = np.arange(0.0, self.k_s, self.quantization)
        return np.append(ks, float(self.k_s))


def saturating_response(det: SaturatingDetector, n_in: int) -> DiscreteDistribution:
    """R(k | N): distribution of the readout for N incident photons.

    Gaussian readout centered at N, quantized to the detector ladder, with
    all mass at or above k_s accumulated at k_s (hard clip).
    """
    levels = det.readout_levels()
    if det.readout_sigma == 0:
        if n_in >= det.k_s:
            k = float(det.k_s)
        else:
            k = min(round(n_in / det.quantization) * det.quantization, float(det.k_s))
        idx = int(np.argmin(np.abs(levels - k)))
        probs = np.zeros(levels.size)
        probs[idx] = 1.0
        return DiscreteDistribution(levels, probs)
    # bin edges halfway between ladder points; +-inf at the ends implement
    # clipping at 0 and saturation at k_s
    edges = np.concatenate([[-np.inf], 0.5 * (levels[1:] + levels[:-1]), [np.inf]])
    cdf = _norm.cdf(edges, loc=n_in, scale=det.readout_sigma)
    probs = np.diff(cdf)
    return DiscreteDistribution(levels, probs)


def _response_matrix(det: SaturatingDetector, n_values: np.ndarray) -> np.ndarray:
    """Stack of R(k|N) rows for each N in n_values; shape (len(N), len(levels))."""
    levels = det.readout_levels()
    if det.readout_sigma == 0:
        out = np.zeros((n_values.size, levels.size))
        for i, n in enumerate(n_values):
            out[i] = saturating_response(det, int(n)).probs
        return out
    edges = np.concatenate([[-np.inf], 0.5 * (levels[1:] + levels[:-1]), [np.inf]])
    cdf = _norm.cdf(edges[None, :], loc=n_values[:, None], scale=det.readout_sigma)
    return np.diff(cdf, axis=1)


@dataclass(frozen=True)
class SaturatedFisherResult:
    total: float
    gammas: np.ndarray  # per-pixel equivalent-SNR factors Gamma(R, nbar_j)
    per_pixel: np.ndarray


def readout_distribution(
    det: SaturatingDetector, nbar: float, response: np.ndarray | None = None
) -> np.ndarray:
    """P(k) = sum_N R(k|N) Poisson(N; eta nbar) on the detector ladder.

    `response` optionally supplies a measured matrix with row N holding
    R(.|N); rows beyond the matrix reuse its last row (deep saturation).
    """
    mu = det.eta * nbar
    lo = max(0, int(mu - 10 * math.sqrt(mu) - 2))
    hi = int(mu + 10 * math.sqrt(mu) + 10)
    ns = np.arange(lo, hi + 1)
    pois = _poisson.pmf(ns, mu)
    if response is not None:
        rows = np.clip(ns, 0, response.shape[0] - 1)
        return pois @ response[rows]
    return pois @ _response_matrix(det, ns.astype(float))


def saturated_fisher(
    nbar_of_g,
    det: SaturatingDetector,
    g: float,
    h: float | None = None,
    response: np.ndarray | None = None,
) -> SaturatedFisherResult:
    """FI about g of the per-pixel readouts, F = sum_j FI[P(k_j | g)].

    `nbar_of_g` maps g to the array of mean photon numbers per pixel. Each
    per-pixel Gamma is the ratio of the pixel's FI to the shot-noise-limited
    value (eta / nbar_j)(d nbar_j / d g)^2; Gamma -> 1 for an ideal detector
    and -> 0 for strongly saturated pixels. A calibrated response matrix
    (e.g. from `load_response_csv`) overrides the parametric model.
    """
    step = h if h is not None else max(1e-6, 1e-4 * abs(g))
    nbar0 = np.asarray(nbar_of_g(g), dtype=float)
    nplus = np.asarray(nbar_of_g(g + step), dtype=float)
    nminus = np.asarray(nbar_of_g(g - step), dtype=float)
    dnbar = (nplus - nminus) / (2 * step)

    per_pixel = np.zeros(nbar0.size)
    gammas = np.zeros(nbar0.size)
    for j in range(nbar0.size):
        if nbar0[j] <= 0:
            continue
        pk0 = readout_distribution(det, nbar0[j], response)
        pkp = readout_distribution(det, nplus[j], response)
        pkm = readout_distribution(det, nminus[j], response)
        dpk = (pkp - pkm) / (2 * step)
        mask = pk0 > 1e-14
        per_pixel[j] = float(np.sum(dpk[mask] ** 2 / pk0[mask]))
        ideal = det.eta / nbar0[j] * dnbar[j] ** 2
        gammas[j] = per_pixel[j] / ideal if ideal > 0 else 0.0
    return SaturatedFisherResult(float(per_pixel.sum()), gammas, per_pixel)


def load_response_csv(path) -> np.ndarray:
    """Measured response matrix: rows = input photon number, columns = readout
    count, values = probability. Plain comma-separated with a header row."""
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return np.atleast_2d(data)


def covariance_to_csv(model: CorrelatedNoiseModel, path) -> None:
    """Dump the dense covariance matrix (header row k0..k{N-1})."""
    mat = covariance(model)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(f"k{i}" for i in range(model.n)) + "\n")
        for row in mat:
            fh.write(",".join(format(x, ".17g") for x in row) + "\n")
