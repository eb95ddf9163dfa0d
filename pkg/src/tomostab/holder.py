"""Conditional Holder-stability fits and finite-dimensional Lipschitz checks.

Two settings share the same quadratic-linearization structure.  In finite
dimensions, polynomial maps of degree at most three admit an exact
remainder bound from their coefficient table, so the local lower Lipschitz
inequality ``|x - x0| <= 2*C0*|A(x) - A(x0)|`` can be verified on an
explicitly computable ball.  On the grid, a rank-one quadratic extension of
the normal operator plays the role of a nonlinear forward map; sampling it
at controlled smoothness (a cap on the H3 norm) exposes the conditional
estimate ``||f - f0|| <= C_hat * K^(1/4) * ||A(f) - A(f0)||^(3/4)`` and its
breakdown for weights with invisible directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .grid_spectral import GridFunction, sobolev_norm
from .stability import (
    OperatorMatrix,
    assemble_normal_matrix,
    stability_constant,
    stability_minimizer,
)
from .xray import WeightSpec, RaySet

__all__ = [
    "FinDimMap",
    "FinDimCheck",
    "TestMap",
    "HolderSample",
    "HolderReport",
    "RemainderEstimate",
    "findim_lipschitz_check",
    "random_cubic_map",
    "make_test_map",
    "mollifier_bump",
    "modulated_bump",
    "remainder_bound_estimate",
    "holder_fit",
]

# Interpolation exponents of the five-space scaffold: the input pair is
# (L2, L2, H3) with mu1 = 1, the data pair is (L2, H1, H4) where the H1 norm
# interpolates as L2^(3/4) * H4^(1/4), so mu2 = 3/4.
MU1 = 1.0
MU2 = 0.75


@dataclass(frozen=True)
class FinDimMap:
    """Polynomial map R^n -> R^m of degree <= 3 with a marked base point.

    ``quad`` and ``cubic`` coefficient tensors are symmetrized over their
    argument axes on construction, making the closed-form differential
    ``A + 2*quad(x) + 3*cubic(x, x)`` exact.
    """

    linear: np.ndarray
    quad: np.ndarray | None = None
    cubic: np.ndarray | None = None
    constant: np.ndarray | None = None
    x0: np.ndarray | None = None

    def __post_init__(self) -> None:
        A = np.asarray(self.linear, dtype=float)
        if A.ndim != 2:
            raise InvalidInputError("linear part must be an (m, n) matrix")
        m, n = A.shape
        object.__setattr__(self, "linear", A)
        if self.quad is not None:
            Q = np.asarray(self.quad, dtype=float)
            if Q.shape != (m, n, n):
                raise InvalidInputError(f"quad tensor must have shape {(m, n, n)}")
            Q = 0.5 * (Q + Q.transpose(0, 2, 1))
            object.__setattr__(self, "quad", Q)
        if self.cubic is not None:
            C = np.asarray(self.cubic, dtype=float)
            if C.shape != (m, n, n, n):
                raise InvalidInputError(f"cubic tensor must have shape {(m, n, n, n)}")
            C = (
                C
                + C.transpose(0, 1, 3, 2)
                + C.transpose(0, 2, 1, 3)
                + C.transpose(0, 2, 3, 1)
                + C.transpose(0, 3, 1, 2)
                + C.transpose(0, 3, 2, 1)
            ) / 6.0
            object.__setattr__(self, "cubic", C)
        c = np.zeros(m) if self.constant is None else np.asarray(self.constant, float)
        if c.shape != (m,):
            raise InvalidInputError(f"constant part must have shape ({m},)")
        object.__setattr__(self, "constant", c)
        base = np.zeros(n) if self.x0 is None else np.asarray(self.x0, float)
        if base.shape != (n,):
            raise InvalidInputError(f"base point must have shape ({n},)")
        object.__setattr__(self, "x0", base)

    @property
    def dims(self) -> tuple[int, int]:
        m, n = self.linear.shape
        return m, n

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.constant + self.linear @ x
        if self.quad is not None:
            out = out + np.einsum("ijk,j,k->i", self.quad, x, x)
        if self.cubic is not None:
            out = out + np.einsum("ijkl,j,k,l->i", self.cubic, x, x, x)
        return out

    def differential(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        D = self.linear.copy()
        if self.quad is not None:
            D = D + 2.0 * np.einsum("ijk,k->ij", self.quad, x)
        if self.cubic is not None:
            D = D + 3.0 * np.einsum("ijkl,k,l->ij", self.cubic, x, x)
        return D

    def remainder_constant(self, radius: float) -> float:
        """Exact bound C with |A(x0+d) - A(x0) - A'(x0)d| <= C |d|^2 on |d| <= radius.

        The remainder is quad-plus-cubic in d with effective quadratic tensor
        ``quad + 3*cubic(x0)``; Frobenius norms give the stacked
        Cauchy-Schwarz bound.
        """
        m, n = self.dims
        Q_eff = np.zeros((m, n, n))
        if self.quad is not None:
            Q_eff += self.quad
        if self.cubic is not None:
            Q_eff += 3.0 * np.einsum("ijkl,l->ijk", self.cubic, self.x0)
        q = float(np.linalg.norm(Q_eff))
        c = 0.0 if self.cubic is None else float(np.linalg.norm(self.cubic))
        return q + c * float(radius)


@dataclass(frozen=True)
class FinDimCheck:
    """Outcome of sampling the local lower Lipschitz inequality."""

    ok: bool
    reason: str
    sigma_min: float
    c0: float
    remainder_bound: float
    radius_used: float
    max_ratio: float
    bound: float


def findim_lipschitz_check(
    fmap: FinDimMap, radius: float, samples: int = 200, seed: int = 0
) -> FinDimCheck:
    """Sample |x - x0| / |A(x) - A(x0)| inside the admissible ball.

    The ball radius is clipped to 1/(2*C0*C_x0) with C0 = 1/sigma_min of the
    differential at x0 and C_x0 the exact quadratic-remainder bound, which
    guarantees the ratio stays below 2*C0.  A singular differential yields a
    failed-hypothesis report rather than an exception.
    """
    if radius <= 0 or not np.isfinite(radius):
        raise InvalidParameterError(f"radius must be positive, got {radius}")
    if samples < 1:
        raise InvalidParameterError(f"need at least one sample, got {samples}")
    m, n = fmap.dims
    D0 = fmap.differential(fmap.x0)
    svals = np.linalg.svd(D0, compute_uv=False)
    sigma = float(svals[-1]) if m >= n else 0.0
    scale = float(svals[0]) if svals.size else 0.0
    if sigma <= 1e-12 * max(scale, 1.0):
        return FinDimCheck(
            ok=False,
            reason="differential at the base point is singular",
            sigma_min=sigma,
            c0=math.inf,
            remainder_bound=fmap.remainder_constant(radius),
            radius_used=0.0,
            max_ratio=math.nan,
            bound=math.inf,
        )
    c0 = 1.0 / sigma
    cx0 = fmap.remainder_constant(radius)
    admissible = radius if cx0 == 0.0 else min(radius, 1.0 / (2.0 * c0 * cx0))
    rng = np.random.default_rng(seed)
    y0 = fmap.evaluate(fmap.x0)
    max_ratio = 0.0
    for _ in range(samples):
        direction = rng.standard_normal(n)
        direction /= np.linalg.norm(direction)
        r = admissible * rng.uniform(0.05, 1.0)
        x = fmap.x0 + r * direction
        gap = float(np.linalg.norm(fmap.evaluate(x) - y0))
        if gap == 0.0:
            return FinDimCheck(
                ok=False,
                reason="map failed to separate a sampled point from the base",
                sigma_min=sigma,
                c0=c0,
                remainder_bound=cx0,
                radius_used=admissible,
                max_ratio=math.inf,
                bound=2.0 * c0,
            )
        max_ratio = max(max_ratio, r / gap)
    bound = 2.0 * c0
    return FinDimCheck(
        ok=max_ratio <= bound * (1.0 + 1e-12),
        reason="",
        sigma_min=sigma,
        c0=c0,
        remainder_bound=cx0,
        radius_used=admissible,
        max_ratio=max_ratio,
        bound=bound,
    )


def random_cubic_map(seed: int, n: int = 4, m: int = 6, sigma_floor: float = 0.5) -> FinDimMap:
    """Seeded cubic map whose differential at 0 has sigma_min >= sigma_floor."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((m, n))
    U, _, Vt = np.linalg.svd(raw, full_matrices=False)
    svals = rng.uniform(sigma_floor + 0.1, 2.0, size=n)
    A = (U * svals) @ Vt
    Q = 0.3 * rng.standard_normal((m, n, n))
    C = 0.1 * rng.standard_normal((m, n, n, n))
    return FinDimMap(linear=A, quad=Q, cubic=C)


def mollifier_bump(grid, center, radius: float) -> GridFunction:
    """Classic compactly supported smooth bump exp(1 - 1/(1 - r^2))."""
    xg, yg = grid.node_mesh()
    rho_sq = ((xg - center[0]) ** 2 + (yg - center[1]) ** 2) / radius**2
    values = np.zeros_like(xg)
    inside = rho_sq < 1.0
    values[inside] = np.exp(1.0 - 1.0 / (1.0 - rho_sq[inside]))
    return GridFunction(grid=grid, values=values)


def modulated_bump(grid, center, radius: float, freq: np.ndarray) -> GridFunction:
    """Mollifier bump carrying a plane-wave oscillation along ``freq``."""
    base = mollifier_bump(grid, center, radius)
    xg, yg = grid.node_mesh()
    carrier = np.cos(freq[0] * xg + freq[1] * yg)
    return GridFunction(grid=grid, values=base.values * carrier)


@dataclass(frozen=True)
class TestMap:
    """Quadratic extension A(f) = N_w f + (f, a) N_w f of the normal operator.

    ``profile`` (the fixed unit-L2 coupling profile a) and ``f0`` (the base
    point) are vectors over the matrix column nodes.  The linearization at
    f0 and the quadratic remainder (d, a) * N_w d are exact.
    """

    opmat: OperatorMatrix
    profile: np.ndarray
    f0: np.ndarray

    def __post_init__(self) -> None:
        ncols = self.opmat.col_indices.size
        if self.profile.shape != (ncols,) or self.f0.shape != (ncols,):
            raise InvalidInputError(
                f"profile and f0 must be column-node vectors of length {ncols}"
            )
        h = self.opmat.grid.h
        if abs(h * np.linalg.norm(self.profile) - 1.0) > 1e-9:
            raise InvalidInputError("coupling profile must have unit L2 norm")

    def coupling(self, f: np.ndarray) -> float:
        return float(self.opmat.grid.h ** 2 * (self.profile @ f))

    def apply(self, f: np.ndarray) -> np.ndarray:
        return (1.0 + self.coupling(f)) * (self.opmat.matrix @ f)

    def linearization_matrix(self) -> np.ndarray:
        M = self.opmat.matrix
        h2 = self.opmat.grid.h ** 2
        return (1.0 + self.coupling(self.f0)) * M + np.outer(
            M @ self.f0, h2 * self.profile
        )

    def data_norm(self, rows_vec: np.ndarray) -> float:
        return float(self.opmat.grid.h * np.linalg.norm(rows_vec))

    def input_norm(self, cols_vec: np.ndarray) -> float:
        return float(self.opmat.grid.h * np.linalg.norm(cols_vec))

    def to_grid_function(self, cols_vec: np.ndarray) -> GridFunction:
        g = self.opmat.grid
        full = np.zeros(g.N * g.N)
        full[self.opmat.col_indices] = cols_vec
        return GridFunction(grid=g, values=full.reshape(g.N, g.N))


def make_test_map(
    w: WeightSpec,
    grid,
    rays: RaySet,
    f0: np.ndarray | None = None,
    opmat: OperatorMatrix | None = None,
) -> TestMap:
    """Build the test map with a centered-bump coupling profile."""
    if opmat is None:
        opmat = assemble_normal_matrix(w, grid, rays)
    prof_fn = mollifier_bump(grid, (0.0, 0.0), 0.8)
    prof = prof_fn.values.ravel()[opmat.col_indices]
    norm = grid.h * np.linalg.norm(prof)
    if norm == 0.0:
        raise InvalidInputError("coupling profile vanished on the input nodes")
    prof = prof / norm
    base = np.zeros(opmat.col_indices.size) if f0 is None else np.asarray(f0, float)
    return TestMap(opmat=opmat, profile=prof, f0=base)


def _plain_sample(tmap: TestMap, rng: np.random.Generator) -> np.ndarray:
    """Random unit-L2 smooth bump restricted to the input nodes."""
    grid = tmap.opmat.grid
    center = rng.uniform(-0.35, 0.35, size=2)
    radius = rng.uniform(0.25, 0.6)
    bump = mollifier_bump(grid, center, radius)
    vec = bump.values.ravel()[tmap.opmat.col_indices]
    norm = grid.h * np.linalg.norm(vec)
    if norm < 1e-300:
        raise InvalidInputError("sample bump vanished on the input nodes")
    return vec / norm


@dataclass(frozen=True)
class RemainderEstimate:
    """max ||A(f0+d) - A(f0) - A'(f0)d|| / ||d||^2 per displacement scale."""

    scales: tuple[float, ...]
    c_hats: tuple[float, ...]


def remainder_bound_estimate(
    tmap: TestMap,
    f0: np.ndarray | None,
    scales: list[float],
    samples: int = 5,
    seed: int = 0,
) -> RemainderEstimate:
    """Estimate the quadratic-remainder constant along shrinking displacements.

    The same seeded directions are reused at every scale, so an exactly
    quadratic remainder yields scale-independent estimates.
    """
    if any(s <= 0 or not np.isfinite(s) for s in scales):
        raise InvalidParameterError(f"scales must be positive, got {scales}")
    base = tmap.f0 if f0 is None else np.asarray(f0, float)
    work = TestMap(opmat=tmap.opmat, profile=tmap.profile, f0=base)
    rng = np.random.default_rng(seed)
    dirs = [_plain_sample(work, rng) for _ in range(samples)]
    A_lin = work.linearization_matrix()
    y0 = work.apply(base)
    c_hats = []
    for s in scales:
        worst = 0.0
        for v in dirs:
            d = s * v
            resid = work.apply(base + d) - y0 - A_lin @ d
            worst = max(worst, work.data_norm(resid) / work.input_norm(d) ** 2)
        c_hats.append(worst)
    return RemainderEstimate(scales=tuple(float(s) for s in scales), c_hats=tuple(c_hats))


@dataclass(frozen=True)
class HolderSample:
    """One probe of the conditional estimate."""

    scale: float
    lhs: float
    rhs: float
    is_probe: bool


@dataclass(frozen=True)
class HolderReport:
    """Fitted conditional-stability quantities for the test map.

    ``c_hat`` is the smallest single constant making
    ``lhs <= c_hat * K^(2-mu1-mu2) * rhs^(mu1*mu2)`` hold over all samples;
    ``chain_constant`` plays the same role for the two-term bound
    ``lhs <= C * K^(2-mu1-mu2) * (rhs^(mu1*mu2) + lhs^(2*mu1*mu2))``.
    ``slope`` is the log-log fit of lhs against rhs over the scale-swept
    samples.
    """

    input_space: str
    smooth_space: str
    data_space: str
    mu1: float
    mu2: float
    K: float
    sigma_lin: float
    hypothesis_ok: bool
    samples: tuple[HolderSample, ...]
    c_hat: float
    slope: float
    chain_constant: float


def holder_fit(
    tmap: TestMap,
    K: float,
    scales: list[float],
    samples: int = 6,
    seed: int = 0,
) -> HolderReport:
    """Sample the conditional Holder estimate at smoothness level K.

    Plain smooth bumps are swept over the displacement scales (each sample
    rescaled, if needed, to keep the H3 norm of f0 + d below K).  On top of
    the random sweep, one extra sample per scale displaces the base point
    along the least-stable direction of the linearization: random bumps are
    generically visible, so without that probe the fitted constant would
    never feel a degenerating weight.  Probe samples carry ``is_probe=True``
    and are kept out of the slope fit but included in the ``c_hat`` maximum.
    """
    if K <= 0 or not np.isfinite(K):
        raise InvalidParameterError(f"smoothness budget K must be positive, got {K}")
    if any(s <= 0 or not np.isfinite(s) for s in scales):
        raise InvalidParameterError(f"scales must be positive, got {scales}")
    grid = tmap.opmat.grid
    exponent = MU1 * MU2
    k_factor = K ** (2.0 - MU1 - MU2)

    A_lin = tmap.linearization_matrix()
    lin_op = OperatorMatrix(
        matrix=A_lin,
        grid=grid,
        rays=tmap.opmat.rays,
        weight=tmap.opmat.weight,
        row_indices=tmap.opmat.row_indices,
        col_indices=tmap.opmat.col_indices,
        weight_fingerprint=tmap.opmat.weight_fingerprint + "+linearized",
    )
    sigma_lin = stability_constant(lin_op).sigma_min
    if sigma_lin <= 0.0:
        return HolderReport(
            input_space="L2(support disk)",
            smooth_space="H3(support disk)",
            data_space="L2(acquisition disk)",
            mu1=MU1,
            mu2=MU2,
            K=K,
            sigma_lin=sigma_lin,
            hypothesis_ok=False,
            samples=(),
            c_hat=math.inf,
            slope=math.nan,
            chain_constant=math.inf,
        )

    f0_fn = tmap.to_grid_function(tmap.f0)
    h3_f0 = sobolev_norm(f0_fn, 3.0)
    budget = 0.98 * K - h3_f0
    if budget <= 0:
        raise InvalidParameterError(
            f"base point already exhausts the H3 budget ({h3_f0:.3f} vs K={K})"
        )
    rng = np.random.default_rng(seed)
    y0 = tmap.apply(tmap.f0)
    worst_dir = stability_minimizer(lin_op)
    records: list[HolderSample] = []

    for s in scales:
        for _ in range(samples):
            v = _plain_sample(tmap, rng)
            d = s * v
            h3 = sobolev_norm(tmap.to_grid_function(d), 3.0)
            if h3 > budget:
                d = d * (budget / h3)
            f = tmap.f0 + d
            lhs = tmap.input_norm(d)
            rhs = tmap.data_norm(tmap.apply(f) - y0)
            records.append(HolderSample(scale=float(s), lhs=lhs, rhs=rhs, is_probe=False))

        d = s * worst_dir
        h3 = sobolev_norm(tmap.to_grid_function(d), 3.0)
        if h3 > budget:
            d = d * (budget / h3)
        f = tmap.f0 + d
        lhs = tmap.input_norm(d)
        rhs = tmap.data_norm(tmap.apply(f) - y0)
        records.append(HolderSample(scale=float(s), lhs=lhs, rhs=rhs, is_probe=True))

    c_hat = 0.0
    chain = 0.0
    for rec in records:
        denom = k_factor * rec.rhs**exponent
        c_hat = max(c_hat, rec.lhs / denom) if denom > 0 else math.inf
        denom2 = k_factor * (rec.rhs**exponent + rec.lhs ** (2.0 * exponent))
        chain = max(chain, rec.lhs / denom2) if denom2 > 0 else math.inf

    sweep = [r for r in records if not r.is_probe and r.lhs > 0 and r.rhs > 0]
    if len(sweep) >= 2:
        xs = np.log([r.rhs for r in sweep])
        ys = np.log([r.lhs for r in sweep])
        slope = float(np.polyfit(xs, ys, 1)[0])
    else:
        slope = math.nan

    return HolderReport(
        input_space="L2(support disk)",
        smooth_space="H3(support disk)",
        data_space="L2(acquisition disk)",
        mu1=MU1,
        mu2=MU2,
        K=K,
        sigma_lin=sigma_lin,
        hypothesis_ok=True,
        samples=tuple(records),
        c_hat=c_hat,
        slope=slope,
        chain_constant=chain,
    )
