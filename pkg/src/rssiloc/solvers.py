"""Closed-form position estimators.

Implements sphere-intersection trilateration, the pseudo-linear least
squares family (plain, weighted, and bias-compensated), and the hyperbolic
estimator built on squared-distance differences against the first anchor.

The pseudo-linear family subtracts the centroid circle equation from each
anchor's circle equation, giving the linear system 2*A*s = b with centered
design matrix A. The weight matrix W = P*Cov(b1)*P (P the centering
projector) is structurally rank deficient, so every "inverse" of W here is
a Moore-Penrose pseudo-inverse with a relative eigenvalue cutoff.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .exceptions import (CollinearAnchors, DegenerateWeightsWarning,
                         NoIntersection, NonPositiveDistance,
                         NotPositiveDefinite, RankDeficient, TooFewAnchors)
from .radio import shadowing_scale

SOLVER_NAMES = ("trilateration", "lls", "wls", "wls-bc",
                "hyperbolic", "hyperbolic-w")

# Relative eigenvalue cutoff for pseudo-inverting weight matrices.
WEIGHT_PINV_CUTOFF = 1e-10

# Relative floor below which hyperbolic covariance entries are unusable.
HYPERBOLIC_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class LinearSystem:
    """Centered linear system A*s = b/2 built from circle differences.

    design rows are (x_i - x_c, y_i - y_c); rhs entries are
    d_c - d_i^2 + k_i - k_c with k_i = x_i^2 + y_i^2. centroids stores
    (x_c, y_c, d_c, k_c) where d_c and k_c are means of d_i^2 and k_i.
    """

    design: np.ndarray
    rhs: np.ndarray
    centroids: Tuple[float, float, float, float]

    def __post_init__(self):
        col_sums = np.abs(self.design.sum(axis=0))
        scale = max(np.abs(self.design).max(), 1.0)
        if col_sums.max() > 1e-9 * scale * len(self.design):
            raise ValueError("design matrix is not centered")
        if not np.all(np.isfinite(self.rhs)):
            raise ValueError("non-finite rhs entries")


@dataclass(frozen=True)
class WeightModel:
    """Symmetric PSD weight matrix plus its pseudo-inverse cutoff."""

    w: np.ndarray
    regularization: float = WEIGHT_PINV_CUTOFF

    def __post_init__(self):
        w = self.w
        scale = np.abs(w).max()
        if scale > 0 and np.abs(w - w.T).max() > 1e-12 * scale:
            raise ValueError("weight matrix must be symmetric")
        eigs = np.linalg.eigvalsh((w + w.T) / 2.0)
        if eigs.size and eigs.min() < -1e-12 * max(eigs.max(), 0.0):
            raise ValueError("weight matrix must be positive semidefinite")


@dataclass(frozen=True)
class BiasTerms:
    """Expected bias contributions of the noisy pseudo-linear system.

    L is the design-noise term E[N^T W+ N], t the non-additive distance
    bias E[b] - b, and g the design/rhs cross term E[N^T W+ b]. u is the
    lognormal exponent constant ln(10) / (5*sqrt(2)*eta). All terms vanish
    when both noise sources are zero.
    """

    L: np.ndarray
    t: np.ndarray
    g: np.ndarray
    u: float


def trilaterate(anchors, radii, clamp_to_plane: bool = False) -> np.ndarray:
    """Intersect three spheres; returns the two candidate points (2, 3).

    Works in the canonical frame (first anchor at the origin, second on
    the +x axis, third in the xy-plane) and maps the two mirror-image
    solutions back to world coordinates. The candidates coincide when the
    target lies in the anchor plane.

    clamp_to_plane=True turns an inconsistent out-of-plane residual into a
    planar solution instead of an error, which is what noisy 2-D ranging
    needs.

    Raises:
        CollinearAnchors: the anchors do not define a plane.
        NoIntersection: the spheres miss each other beyond tolerance (only
            when clamp_to_plane is off).
    """
    pts = np.asarray(anchors, dtype=float)
    if pts.shape[1] == 2:
        pts = np.hstack([pts, np.zeros((len(pts), 1))])
    pts = pts[:3]
    r = np.asarray(radii, dtype=float)[:3]
    if np.any(r < 0):
        raise ValueError("radii must be >= 0")

    v2 = pts[1] - pts[0]
    v3 = pts[2] - pts[0]
    x2 = np.linalg.norm(v2)
    scale = max(x2, np.linalg.norm(v3))
    if x2 <= 1e-12 * scale or scale == 0.0:
        raise CollinearAnchors("first two anchors coincide")
    ex = v2 / x2
    x3 = v3 @ ex
    ey_raw = v3 - x3 * ex
    y3 = np.linalg.norm(ey_raw)
    if y3 <= 1e-9 * scale:
        raise CollinearAnchors("anchors are collinear")
    ey = ey_raw / y3
    ez = np.cross(ex, ey)

    x = (r[0] ** 2 - r[1] ** 2 + x2 ** 2) / (2.0 * x2)
    y = (r[0] ** 2 - r[2] ** 2 + x3 ** 2 + y3 ** 2 - 2.0 * x3 * x) / (2.0 * y3)
    zz = r[0] ** 2 - x ** 2 - y ** 2
    # Relative tolerance in r1 plus an absolute floor tied to the anchor
    # scale, so exact-geometry cases survive rounding even when r1 = 0.
    tol = 1e-9 * r[0] ** 2 + 1e-12 * scale ** 2
    if zz < -tol and not clamp_to_plane:
        raise NoIntersection(f"spheres do not intersect (deficit {zz:.3g})")
    z = math.sqrt(max(zz, 0.0))

    base = pts[0] + x * ex + y * ey
    return np.array([base + z * ez, base - z * ez])


def linearize(anchors, distances) -> LinearSystem:
    """Build the centered pseudo-linear system from anchors and ranges."""
    pts = np.asarray(anchors, dtype=float)
    d = np.asarray(distances, dtype=float)
    m = len(pts)
    if m < 3:
        raise TooFewAnchors(f"need at least 3 anchors, got {m}")
    if len(d) != m:
        raise ValueError("distances length must match anchor count")
    centroid = pts.mean(axis=0)
    k = (pts ** 2).sum(axis=1)
    k_c = k.mean()
    d2 = d ** 2
    d_c = d2.mean()
    design = pts - centroid
    rhs = d_c - d2 + k - k_c
    return LinearSystem(design=design, rhs=rhs,
                        centroids=(centroid[0], centroid[1], d_c, k_c))


def _require_full_rank(design: np.ndarray):
    if np.linalg.matrix_rank(design) < 2:
        raise RankDeficient("anchors are collinear; design matrix rank < 2")


def lls_solve(sys: LinearSystem) -> np.ndarray:
    """Ordinary least squares minimizer of ||b - 2*A*s||^2."""
    _require_full_rank(sys.design)
    sol, *_ = np.linalg.lstsq(2.0 * sys.design, sys.rhs, rcond=None)
    return sol


def build_weights(anchors, distances, sigmas_a, sigmas_p, eta: float) -> WeightModel:
    """Covariance-based weight matrix for the pseudo-linear system.

    Per-anchor rhs variance is Var(k_i) + Var(d_i^2) with
    Var(k_i) = 4*sigma_a^2*(sigma_a^2 + x_i^2 + y_i^2) and the lognormal
    Var(d_i^2) = d_i^4 * (exp(8*sb^2) - exp(4*sb^2)), sb the shadowing std
    scaled by ln(10)/(10*eta). The centering projector is applied on both
    sides. Noisy anchor coordinates and noisy distances are the inputs
    here; the true values are not available to an estimator.
    """
    pts = np.asarray(anchors, dtype=float)
    d = np.asarray(distances, dtype=float)
    if np.any(d <= 0):
        raise NonPositiveDistance("distances must be > 0")
    if eta <= 0:
        raise ValueError("eta must be > 0")
    m = len(pts)
    sa = np.broadcast_to(np.asarray(sigmas_a, dtype=float), (m,))
    sp = np.broadcast_to(np.asarray(sigmas_p, dtype=float), (m,))
    var_k = 4.0 * sa ** 2 * (sa ** 2 + (pts ** 2).sum(axis=1))
    sb2 = shadowing_scale(sp, eta) ** 2
    var_d2 = np.exp(4.0 * np.log(d)) * (np.exp(8.0 * sb2) - np.exp(4.0 * sb2))
    proj = np.eye(m) - np.full((m, m), 1.0 / m)
    w = proj @ np.diag(var_k + var_d2) @ proj
    return WeightModel(w=(w + w.T) / 2.0)


def _weight_inverse(weights: WeightModel) -> Tuple[np.ndarray, bool]:
    """Pseudo-inverse of W, or the identity when W is numerically zero."""
    w = weights.w
    if not np.any(w != 0.0):
        return np.eye(len(w)), True
    return np.linalg.pinv(w, rcond=weights.regularization, hermitian=True), False


def wls_solve(sys: LinearSystem, weights: WeightModel) -> np.ndarray:
    """Weighted least squares with pseudo-inverted weight matrix.

    A numerically zero W degrades gracefully: the solver emits
    DegenerateWeightsWarning and returns the ordinary LS estimate.
    """
    _require_full_rank(sys.design)
    w_inv, degenerate = _weight_inverse(weights)
    if degenerate:
        warnings.warn("weight matrix is numerically zero; using ordinary LS",
                      DegenerateWeightsWarning, stacklevel=2)
    a = sys.design
    normal = a.T @ w_inv @ a
    if np.linalg.matrix_rank(normal) < 2:
        raise RankDeficient("weighted normal matrix is singular")
    return 0.5 * np.linalg.solve(normal, a.T @ w_inv @ sys.rhs)


def build_bias_terms(anchors, distances, sigmas_a, sigmas_p, eta: float,
                     weights: WeightModel) -> BiasTerms:
    """Expected bias of the weighted pseudo-linear estimator.

    Uses the consolidated exact expectations: with Q = P W+ P,
    L = diag(sum_i Q_ii sa_i^2) per coordinate and
    g = 2 * (sum_i Q_ii x_i sa_i^2, sum_i Q_ii y_i sa_i^2). The rhs bias is
    t_i = -c_i d_i^2 + mean_j(c_j d_j^2) + 2*(sa_i^2 - mean sa^2) with
    c_i = u^2 sp_i^2 + u^4 sp_i^4 / 2 from the second-order expansion of
    the lognormal mean of d_i^2.
    """
    pts = np.asarray(anchors, dtype=float)
    d = np.asarray(distances, dtype=float)
    m = len(pts)
    sa = np.broadcast_to(np.asarray(sigmas_a, dtype=float), (m,))
    sp = np.broadcast_to(np.asarray(sigmas_p, dtype=float), (m,))
    u = math.log(10.0) / (5.0 * math.sqrt(2.0) * eta)

    w_inv, _ = _weight_inverse(weights)
    proj = np.eye(m) - np.full((m, m), 1.0 / m)
    q_diag = np.diag(proj @ w_inv @ proj)

    var_a = sa ** 2
    l_diag = float((q_diag * var_a).sum())
    big_l = np.diag([l_diag, l_diag])

    c = u ** 2 * sp ** 2 + 0.5 * u ** 4 * sp ** 4
    cd2 = c * d ** 2
    t = -cd2 + cd2.mean() + 2.0 * (var_a - var_a.mean())

    g = 2.0 * np.array([(q_diag * pts[:, 0] * var_a).sum(),
                        (q_diag * pts[:, 1] * var_a).sum()])
    return BiasTerms(L=big_l, t=t, g=g, u=u)


def bias_compensated_solve(sys: LinearSystem, weights: WeightModel,
                           bias: BiasTerms,
                           include_cross_term: bool = False) -> np.ndarray:
    """Weighted LS with the expected bias terms subtracted.

    Solves (A^T W+ A - L) s = (A^T W+ (b - t) [- g]) / 2. The cross term g
    is off by default, matching the closed form actually used; enabling it
    additionally removes the design/rhs noise correlation.

    Raises:
        NotPositiveDefinite: the compensated normal matrix lost positive
            definiteness, meaning the correction exceeds the information
            available; callers should fall back to wls_solve.
    """
    _require_full_rank(sys.design)
    w_inv, degenerate = _weight_inverse(weights)
    if degenerate:
        warnings.warn("weight matrix is numerically zero; using ordinary LS",
                      DegenerateWeightsWarning, stacklevel=2)
    a = sys.design
    normal = a.T @ w_inv @ a - bias.L
    try:
        np.linalg.cholesky(normal)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(
            "bias correction exceeds information in the weighted system")
    rhs = a.T @ w_inv @ (sys.rhs - bias.t)
    if include_cross_term:
        rhs = rhs - bias.g
    return 0.5 * np.linalg.solve(normal, rhs)


def hyperbolic_solve(anchors, distances, sigma: float = 0.0, eta: float = 2.0,
                     weighted: bool = False) -> np.ndarray:
    """Squared-distance-difference estimator anchored at the first beacon.

    Rows n = 2..M of the system are [2*a_n, 2*b_n] * s =
    a_n^2 + b_n^2 - d_n^2 + d_1^2 in the frame translated so the first
    anchor sits at the origin. The weighted variant uses the rhs covariance
    R = Var(d_1^2) * ones + diag(Var(d_n^2)) with lognormal variances; when
    the variances are degenerate (sigma = 0 or wildly unbalanced) R falls
    back to the identity, which reproduces the unweighted solution.
    """
    pts = np.asarray(anchors, dtype=float)
    d = np.asarray(distances, dtype=float)
    m = len(pts)
    if m < 3:
        raise TooFewAnchors(f"need at least 3 anchors, got {m}")
    origin = pts[0]
    rel = pts - origin
    mat = 2.0 * rel[1:]
    if np.linalg.matrix_rank(mat) < 2:
        raise RankDeficient("anchors are collinear")
    rhs = (rel[1:] ** 2).sum(axis=1) - d[1:] ** 2 + d[0] ** 2

    if not weighted:
        sol, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
        return origin + sol

    if np.any(d <= 0):
        raise NonPositiveDistance("distances must be > 0")
    sb2 = shadowing_scale(sigma, eta) ** 2
    var = d ** 4 * (np.exp(8.0 * sb2) - np.exp(4.0 * sb2))
    vmax = var.max()
    if vmax <= 0.0 or np.any(var < HYPERBOLIC_VAR_FLOOR * vmax):
        cov = np.eye(m - 1)
    else:
        cov = np.full((m - 1, m - 1), var[0]) + np.diag(var[1:])
    cov_inv = np.linalg.inv(cov)
    normal = mat.T @ cov_inv @ mat
    if np.linalg.matrix_rank(normal) < 2:
        raise RankDeficient("weighted normal matrix is singular")
    return origin + np.linalg.solve(normal, mat.T @ cov_inv @ rhs)


def estimate_position(solver: str, anchors, distances, *, sigmas_a=0.0,
                      sigmas_p=0.0, eta: float = 2.0,
                      include_cross_term: bool = False) -> np.ndarray:
    """Dispatch a solver by name; returns a 2-D position estimate.

    Trilateration uses the first three anchors in the anchor plane.
    wls-bc falls back to plain WLS if the compensated system is not
    positive definite.
    """
    if solver not in SOLVER_NAMES:
        raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVER_NAMES}")
    anchors = np.asarray(anchors, dtype=float)
    distances = np.asarray(distances, dtype=float)

    if solver == "trilateration":
        candidates = trilaterate(anchors[:3], distances[:3],
                                 clamp_to_plane=True)
        return candidates[0][:2]
    if solver == "hyperbolic":
        return hyperbolic_solve(anchors, distances)
    if solver == "hyperbolic-w":
        sigma = float(np.mean(sigmas_p))
        return hyperbolic_solve(anchors, distances, sigma=sigma, eta=eta,
                                weighted=True)

    system = linearize(anchors, distances)
    if solver == "lls":
        return lls_solve(system)
    weights = build_weights(anchors, distances, sigmas_a, sigmas_p, eta)
    if solver == "wls":
        return wls_solve(system, weights)
    bias = build_bias_terms(anchors, distances, sigmas_a, sigmas_p, eta, weights)
    try:
        return bias_compensated_solve(system, weights, bias,
                                      include_cross_term=include_cross_term)
    except NotPositiveDefinite:
        return wls_solve(system, weights)
