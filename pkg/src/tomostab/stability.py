"""Discrete stability measurements for the normal operator.

The central object is the dense matrix of the normal operator restricted to
nodes of the support disk (columns) and of the acquisition disk (rows).  Its
smallest generalized singular value, measured from the discrete H1 norm of
the output against the L2 norm of the input, quantifies how much of the
input survives the transform: uniformly positive values across resolutions
certify stable inversion, decay to zero flags invisible directions.

A coherent-state probe reads off the operator's leading symbol pointwise by
applying the matrix to localized wave packets, and a perturbation scan
tracks how the stability constant moves under small weight changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import (
    InvalidInputError,
    InvalidParameterError,
    NumericFailureError,
    ResolutionError,
    TooLargeError,
)
from .grid_spectral import Grid, GridFunction, make_grid
from .xray import (
    OMEGA_RADIUS,
    RaySet,
    WeightSpec,
    adjoint_cell_normalizer,
    forward,
    forward_matrix,
    omega1_interior_mask,
    omega_node_mask,
    principal_symbol,
)

__all__ = [
    "OperatorMatrix",
    "StabilityEntry",
    "StabilityReport",
    "PerturbationScan",
    "ProbeReport",
    "IdentityCheckResult",
    "MAX_MATRIX_SIDE",
    "assemble_normal_matrix",
    "h1_gradient_operator",
    "stability_constant",
    "stability_minimizer",
    "stability_sweep",
    "default_sweep_rays",
    "perturbation_scan",
    "coherent_state",
    "minimal_resolution",
    "symbol_probe",
    "injectivity_identity_check",
]

MAX_MATRIX_SIDE = 4000

# Eigensolver residual tolerance, relative to the Frobenius scale of the
# assembled quadratic form.
_EIG_RESIDUAL_RTOL = 1e-8


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense normal-operator matrix with its discretization context.

    ``matrix[i, j]`` is the value of the normal operator applied to the j-th
    nodal basis function, read at the i-th output node.  ``row_indices`` and
    ``col_indices`` are flat (row-major) node indices into the grid: rows
    run over interior nodes of the acquisition disk, columns over nodes of
    the support disk.
    """

    matrix: np.ndarray
    grid: Grid
    rays: RaySet
    weight: WeightSpec
    row_indices: np.ndarray
    col_indices: np.ndarray
    weight_fingerprint: str = field(default="")

    def __post_init__(self) -> None:
        if self.matrix.shape != (self.row_indices.size, self.col_indices.size):
            raise InvalidInputError(
                f"matrix shape {self.matrix.shape} does not match "
                f"{self.row_indices.size} rows / {self.col_indices.size} cols"
            )
        if not self.weight_fingerprint:
            object.__setattr__(self, "weight_fingerprint", self.weight.fingerprint())


def assemble_normal_matrix(
    w: WeightSpec, grid: Grid, rays: RaySet
) -> OperatorMatrix:
    """Assemble the restricted normal operator as a dense matrix.

    Refuses node sets larger than :data:`MAX_MATRIX_SIDE` per side; the
    dense spectral factorizations downstream are meant for laboratory-scale
    studies, not production reconstruction grids.
    """
    row_mask = omega1_interior_mask(grid)
    col_mask = omega_node_mask(grid)
    row_idx = np.flatnonzero(row_mask.ravel())
    col_idx = np.flatnonzero(col_mask.ravel())
    if row_idx.size > MAX_MATRIX_SIDE or col_idx.size > MAX_MATRIX_SIDE:
        raise TooLargeError(
            f"matrix would be {row_idx.size} x {col_idx.size}; the dense "
            f"budget is {MAX_MATRIX_SIDE} per side -- reduce the grid "
            f"resolution N (node counts grow like N^2)"
        )
    S = forward_matrix(w, grid, rays).tocsc()
    S_rows = S[:, row_idx]
    S_cols = S[:, col_idx]
    weighted = sp.diags(rays.mu) @ S_cols
    mat = (S_rows.T @ weighted).toarray() / grid.h**2
    # Same boundary-ring renormalization as the matrix-free adjoint, so the
    # assembled matrix and normal_compose agree column by column.
    gamma = adjoint_cell_normalizer(w, grid, rays)
    mat *= gamma[row_idx][:, None]
    return OperatorMatrix(
        matrix=mat,
        grid=grid,
        rays=rays,
        weight=w,
        row_indices=row_idx,
        col_indices=col_idx,
    )


def h1_gradient_operator(grid: Grid, row_indices: np.ndarray) -> sp.csr_matrix:
    """Sparse map stacking node values and central-difference gradients.

    Output blocks are [values; d/dx; d/dy] on the given node set, with
    neighbors outside the set treated as zero, so that
    ``h * ||B u||_2`` is the discrete H1 norm of u on the node set.
    """
    N, h = grid.N, grid.h
    R = row_indices.size
    local = -np.ones(N * N, dtype=np.intp)
    local[row_indices] = np.arange(R)
    ii = row_indices // N
    jj = row_indices % N

    rows_d: list[np.ndarray] = []
    cols_d: list[np.ndarray] = []
    vals_d: list[np.ndarray] = []

    def add_diff(block: int, di: int, dj: int, coeff: float) -> None:
        ni = ii + di
        nj = jj + dj
        ok = (ni >= 0) & (ni < N) & (nj >= 0) & (nj < N)
        neighbor = np.where(ok, local[np.clip(ni, 0, N - 1) * N + np.clip(nj, 0, N - 1)], -1)
        ok &= neighbor >= 0
        rows_d.append(block * R + np.flatnonzero(ok))
        cols_d.append(neighbor[ok])
        vals_d.append(np.full(int(ok.sum()), coeff))

    # identity block
    rows_d.append(np.arange(R))
    cols_d.append(np.arange(R))
    vals_d.append(np.ones(R))
    # d/dx block
    add_diff(1, 1, 0, 1.0 / (2 * h))
    add_diff(1, -1, 0, -1.0 / (2 * h))
    # d/dy block
    add_diff(2, 0, 1, 1.0 / (2 * h))
    add_diff(2, 0, -1, -1.0 / (2 * h))

    return sp.coo_matrix(
        (np.concatenate(vals_d), (np.concatenate(rows_d), np.concatenate(cols_d))),
        shape=(3 * R, R),
    ).tocsr()


@dataclass(frozen=True)
class StabilityEntry:
    """Stability measurement at one resolution: sigma_min and 1/sigma_min."""

    resolution: int
    sigma_min: float
    c_estimate: float
    eig_residual: float


def _stability_eig(opmat: OperatorMatrix) -> tuple[float, np.ndarray, float]:
    """Bottom eigenpair of ``(M^T G_H1 M) f = mu * G_L2 f``.

    Returns ``(mu_min, v, residual)`` where ``v`` has unit discrete L2 norm
    (``h * |v|_2 = 1``).
    """
    h = opmat.grid.h
    B = h1_gradient_operator(opmat.grid, opmat.row_indices)
    BM = B @ opmat.matrix
    A = (h * h) * (BM.T @ BM)
    G = (h * h) * np.eye(A.shape[0])
    try:
        mu, vecs = scipy.linalg.eigh(A, G)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - backend failure
        raise NumericFailureError(f"generalized eigensolve failed: {exc}") from exc
    mu_min = float(mu[0])
    v = vecs[:, 0]
    residual = float(np.linalg.norm(A @ v - mu_min * (G @ v)))
    scale = max(float(np.linalg.norm(A, "fro")), 1e-300)
    if residual > _EIG_RESIDUAL_RTOL * scale:
        raise NumericFailureError(
            f"eigenpair residual {residual:.3e} exceeds "
            f"{_EIG_RESIDUAL_RTOL:.1e} * scale ({scale:.3e})"
        )
    return mu_min, v, residual


def stability_constant(opmat: OperatorMatrix) -> StabilityEntry:
    """Smallest generalized singular value of the operator matrix.

    Solves the symmetric generalized eigenproblem
    ``(M^T G_H1 M) f = mu * G_L2 f`` with the discrete H1 Gram on the output
    nodes and the L2 Gram ``h^2 I`` on the input nodes; returns
    ``sigma_min = sqrt(mu_min)`` and the reciprocal stability constant.
    """
    mu_min, _, residual = _stability_eig(opmat)
    sigma = math.sqrt(max(mu_min, 0.0))
    c_est = math.inf if sigma == 0.0 else 1.0 / sigma
    return StabilityEntry(
        resolution=opmat.grid.N,
        sigma_min=sigma,
        c_estimate=c_est,
        eig_residual=residual,
    )


def stability_minimizer(opmat: OperatorMatrix) -> np.ndarray:
    """Input-node vector attaining the smallest stability quotient.

    The returned vector has unit discrete L2 norm and spans the direction the
    operator amplifies least — the empirical worst case for any conditional
    estimate built on top of it.  The sign is fixed by making the
    largest-magnitude component positive, so repeated runs agree.
    """
    _, v, _ = _stability_eig(opmat)
    lead = np.argmax(np.abs(v))
    if v[lead] < 0:
        v = -v
    return v


@dataclass(frozen=True)
class StabilityReport:
    """Stability constants across a resolution sweep for one weight."""

    weight_fingerprint: str
    entries: tuple[StabilityEntry, ...]

    @property
    def sigma_mins(self) -> list[float]:
        return [e.sigma_min for e in self.entries]


def default_sweep_rays(grid: Grid) -> RaySet:
    """Ray family refined in lockstep with the grid (6N angles and offsets)."""
    return RaySet(
        n_angles=6 * grid.N, n_offsets=6 * grid.N, t_step=grid.h / 2
    )


def stability_sweep(
    w: WeightSpec,
    resolutions: tuple[int, ...] = (16, 24, 32),
    L: float = 4.0,
) -> StabilityReport:
    """Measure the stability constant at each resolution (rays refine too)."""
    entries = []
    for N in resolutions:
        grid = make_grid(L, N)
        opmat = assemble_normal_matrix(w, grid, default_sweep_rays(grid))
        entries.append(stability_constant(opmat))
    return StabilityReport(
        weight_fingerprint=w.fingerprint(), entries=tuple(entries)
    )


@dataclass(frozen=True)
class PerturbationScan:
    """sigma_min as a function of a weight perturbation amplitude.

    ``slope`` is the least-squares-through-origin fit of
    ``|sigma_min(eps) - sigma_min(0)|`` against eps, a finite Lipschitz-type
    rate certifying that the stability constant moves continuously with the
    weight.
    """

    sigma0: float
    eps_values: tuple[float, ...]
    sigma_values: tuple[float, ...]
    deviations: tuple[float, ...]
    slope: float


def perturbation_scan(
    w0: WeightSpec,
    delta: WeightSpec,
    eps_list: list[float],
    grid: Grid,
    rays: RaySet,
) -> PerturbationScan:
    """Scan sigma_min of the normal matrix for the weights w0 + eps*delta."""
    eps_arr = [float(e) for e in eps_list]
    if any(not np.isfinite(e) or e < 0 for e in eps_arr):
        raise InvalidParameterError(
            f"perturbation amplitudes must be finite and >= 0, got {eps_list}"
        )
    sigma0 = stability_constant(assemble_normal_matrix(w0, grid, rays)).sigma_min
    sigmas = []
    for eps in eps_arr:
        if eps == 0.0:
            sigmas.append(sigma0)
            continue
        blended = WeightSpec.blend(w0, delta, eps)
        sigmas.append(
            stability_constant(assemble_normal_matrix(blended, grid, rays)).sigma_min
        )
    devs = [abs(s - sigma0) for s in sigmas]
    pos = [(e, d) for e, d in zip(eps_arr, devs) if e > 0]
    denom = sum(e * e for e, _ in pos)
    slope = sum(e * d for e, d in pos) / denom if denom > 0 else 0.0
    return PerturbationScan(
        sigma0=sigma0,
        eps_values=tuple(eps_arr),
        sigma_values=tuple(sigmas),
        deviations=tuple(devs),
        slope=slope,
    )


def minimal_resolution(L: float, lam: float) -> int:
    """Smallest even node count resolving the packet envelope (lam*h^2 <= 1)."""
    n = math.ceil(L * math.sqrt(lam))
    return n + (n % 2)


def coherent_state(
    grid: Grid, x0: np.ndarray, xi0: np.ndarray, lam: float
) -> GridFunction:
    """Gaussian wave packet (lam/pi)^(1/2) exp(i lam x.xi0 - lam|x-x0|^2 / 2).

    The packet is L2-normalized in the continuum; its discrete norm matches
    to high accuracy once the envelope is resolved (lam * h^2 <= 1, enforced)
    and the center keeps a 3/sqrt(lam) margin from the support boundary.
    """
    _check_packet_params(x0, xi0, lam)
    if lam * grid.h**2 > 1.0 + 1e-12:
        raise ResolutionError(
            f"lam * h^2 = {lam * grid.h ** 2:.3f} > 1; need N >= "
            f"{minimal_resolution(grid.L, lam)} at L = {grid.L}"
        )
    return _packet(grid, x0, xi0, lam)


def _check_packet_params(x0: np.ndarray, xi0: np.ndarray, lam: float) -> None:
    x0 = np.asarray(x0, dtype=float)
    xi0 = np.asarray(xi0, dtype=float)
    if not np.isfinite(lam) or lam <= 0:
        raise InvalidParameterError(f"packet frequency must be positive, got {lam}")
    if abs(float(np.hypot(xi0[0], xi0[1])) - 1.0) > 1e-9:
        raise InvalidParameterError("xi0 must be a unit covector")
    margin = OMEGA_RADIUS - float(np.hypot(x0[0], x0[1]))
    if margin < 3.0 / math.sqrt(lam):
        raise InvalidParameterError(
            f"center must keep distance 3/sqrt(lam) = {3.0 / math.sqrt(lam):.4f} "
            f"from the support boundary; margin is {margin:.4f}"
        )


def _packet(grid: Grid, x0: np.ndarray, xi0: np.ndarray, lam: float) -> GridFunction:
    """Build the packet without the envelope-resolution guard.

    Used by :func:`symbol_probe`, which deliberately samples past the Nyquist
    limit and reports the aliased readings with ``carrier_resolved=False``.
    """
    x0 = np.asarray(x0, dtype=float)
    xi0 = np.asarray(xi0, dtype=float)
    _check_packet_params(x0, xi0, lam)
    xg, yg = grid.node_mesh()
    phase = lam * (xg * xi0[0] + yg * xi0[1])
    dist_sq = (xg - x0[0]) ** 2 + (yg - x0[1]) ** 2
    values = math.sqrt(lam / math.pi) * np.exp(1j * phase - lam * dist_sq / 2.0)
    return GridFunction(grid=grid, values=values)


@dataclass(frozen=True)
class ProbeReport:
    """Symbol readings lam * ||M f_lam|| / ||f_lam|| along a frequency sweep.

    ``carrier_resolved`` flags, per frequency, whether the oscillation
    lam*|xi0| sits below the grid Nyquist limit pi/h; beyond it the sampled
    packet aliases to a lower frequency and the reading no longer tracks the
    continuum symbol.
    """

    x0: tuple[float, float]
    xi0: tuple[float, float]
    lambdas: tuple[float, ...]
    measured: tuple[float, ...]
    analytic: float
    rel_errors: tuple[float, ...]
    carrier_resolved: tuple[bool, ...]
    weight_fingerprint: str


def symbol_probe(
    opmat: OperatorMatrix, x0: np.ndarray, xi0: np.ndarray, lambdas: list[float]
) -> ProbeReport:
    """Probe the operator's leading symbol with coherent states.

    For each packet frequency the measured value is
    ``lam * ||M f_lam||_L2 / ||f_lam||_L2`` with both norms over the matrix
    node sets; the analytic reference is :func:`principal_symbol` at
    (x0, xi0).
    """
    lams = [float(v) for v in lambdas]
    if any(b <= a for a, b in zip(lams, lams[1:])) or not lams:
        raise InvalidInputError(
            f"frequency list must be nonempty and strictly increasing, got {lambdas}"
        )
    grid = opmat.grid
    analytic = principal_symbol(opmat.weight, np.asarray(x0, float), np.asarray(xi0, float))
    nyquist = math.pi / grid.h
    measured = []
    resolved = []
    for lam in lams:
        f = _packet(grid, np.asarray(x0, float), np.asarray(xi0, float), lam)
        fvec = f.values.ravel()[opmat.col_indices]
        nf = float(np.linalg.norm(fvec))
        if nf == 0.0:
            raise InvalidInputError("coherent state vanished on the input nodes")
        mf = opmat.matrix @ fvec
        measured.append(lam * float(np.linalg.norm(mf)) / nf)
        resolved.append(lam <= nyquist)
    if analytic > 0.0:
        rel = [abs(m - analytic) / analytic for m in measured]
    else:
        rel = [0.0 if m == 0.0 else math.inf for m in measured]
    return ProbeReport(
        x0=(float(x0[0]), float(x0[1])),
        xi0=(float(xi0[0]), float(xi0[1])),
        lambdas=tuple(lams),
        measured=tuple(measured),
        analytic=analytic,
        rel_errors=tuple(rel),
        carrier_resolved=tuple(resolved),
        weight_fingerprint=opmat.weight_fingerprint,
    )


@dataclass(frozen=True)
class IdentityCheckResult:
    """Largest relative gap in <Nf, f> = ||forward f||^2 over random trials."""

    max_deviation: float
    deviations: tuple[float, ...]


def injectivity_identity_check(
    opmat: OperatorMatrix,
    trials: int = 20,
    seed: int = 0,
    rays: RaySet | None = None,
) -> IdentityCheckResult:
    """Check the quadratic-form identity tying the normal operator to the data.

    For seeded random inputs supported on the matrix columns, compares
    ``<M f, f>_L2`` against the squared boundary-measure norm of the forward
    data.  The two agree to roundoff because the adjoint is an exact
    transpose; a mismatched ray family is rejected.
    """
    if trials < 1:
        raise InvalidParameterError(f"need at least one trial, got {trials}")
    if rays is not None and rays.cache_key() != opmat.rays.cache_key():
        raise InvalidInputError(
            "ray family does not match the one the matrix was assembled with"
        )
    grid = opmat.grid
    h = grid.h
    # column nodes sit inside the acquisition disk, so they appear among rows
    row_pos = -np.ones(grid.N * grid.N, dtype=np.intp)
    row_pos[opmat.row_indices] = np.arange(opmat.row_indices.size)
    cols_in_rows = row_pos[opmat.col_indices]
    if np.any(cols_in_rows < 0):
        raise InvalidInputError("input nodes are not covered by the output nodes")

    rng = np.random.default_rng(seed)
    devs = []
    for _ in range(trials):
        fcols = rng.standard_normal(opmat.col_indices.size)
        full = np.zeros(grid.N * grid.N)
        full[opmat.col_indices] = fcols
        f = GridFunction(grid=grid, values=full.reshape(grid.N, grid.N))
        lhs = h * h * float(fcols @ (opmat.matrix @ fcols)[cols_in_rows])
        sino = forward(opmat.weight, f, opmat.rays)
        rhs = sino.dsigma_norm() ** 2
        devs.append(abs(lhs - rhs) / max(rhs, 1e-300))
    return IdentityCheckResult(max_deviation=max(devs), deviations=tuple(devs))
