"""Random instance generators for tests, diagnostics and parameter sweeps.

Everything here is deterministic given a :class:`numpy.random.Generator`
(or an integer seed for :func:`sweep_instance`), so runs are reproducible
bit for bit.  Three families are provided:

* unstructured instances (:func:`wishart`, :func:`positive_block`,
  :func:`random_direction`) for sweeps and property tests;
* parameterised 2x2 blocks (:func:`coupled_block`,
  :func:`random_coupled_block`, :func:`decoupled_block`) whose scale-free
  coordinates are prescribed exactly, matching the scalar recursions in
  :mod:`wrdyn.oracle`;
* planted ambient instances (:func:`planted_split_instance`) with a known
  reducing split and a known limit, for end-to-end checks of the
  classification pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import structure
from .errors import InvalidStart

__all__ = [
    "KIND_COLLAPSE",
    "KIND_COUPLED",
    "KIND_DECOUPLED",
    "ENSEMBLE_WISHART",
    "ENSEMBLE_COUPLED_BLOCK",
    "PlantedInstance",
    "haar_unitary",
    "positive_block",
    "wishart",
    "random_direction",
    "coupled_block",
    "random_coupled_block",
    "decoupled_block",
    "planted_split_instance",
    "wishart_instance",
    "coupled_block_instance",
    "sweep_instance",
]

# Active-part flavours for planted instances.
KIND_COLLAPSE = "collapse2"
KIND_COUPLED = "coupled2"
KIND_DECOUPLED = "decoupled2"

# Named ensembles for parameter sweeps.
ENSEMBLE_WISHART = "wishart"
ENSEMBLE_COUPLED_BLOCK = "coupled-block"


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    if dim < 1:
        raise InvalidStart(f"dimension must be >= 1, got {dim}")
    G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(G)
    # Fix the phases so the distribution is Haar rather than QR-skewed.
    phases = np.diag(R).copy()
    phases /= np.abs(phases)
    return Q * phases


def positive_block(
    dim: int,
    rng: np.random.Generator,
    lam_range: Tuple[float, float] = (0.2, 1.0),
) -> np.ndarray:
    """Random strictly positive Hermitian matrix with spectrum in ``lam_range``."""
    lo, hi = lam_range
    if not (0.0 < lo <= hi):
        raise InvalidStart(f"eigenvalue range must satisfy 0 < lo <= hi, got {lam_range}")
    U = haar_unitary(dim, rng)
    lam = rng.uniform(lo, hi, size=dim)
    return (U * lam) @ U.conj().T


def wishart(dim: int, rng: np.random.Generator, floor: float = 1e-6) -> np.ndarray:
    """PSD matrix ``G G* / dim`` with a small multiple of the identity added.

    The floor keeps the spectrum bounded away from zero so inverse-based
    diagnostics are well defined at the start of a run.
    """
    if floor < 0.0:
        raise InvalidStart(f"spectral floor must be >= 0, got {floor}")
    G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return G @ G.conj().T / dim + floor * np.eye(dim)


def random_direction(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random complex unit vector."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def coupled_block(xi: float, zeta: float, d: float) -> np.ndarray:
    """2x2 real block with prescribed scale-free coordinates.

    Relative to the first basis vector, the returned block has coupling
    ratio exactly ``xi``, root-determinant ratio exactly ``zeta`` and
    transverse diagonal exactly ``d``::

        d * [[xi^2 + zeta^2, xi],
             [xi,            1 ]]
    """
    if d <= 0.0:
        raise InvalidStart(f"transverse diagonal must be > 0, got {d}")
    if xi < 0.0 or zeta < 0.0:
        raise InvalidStart(f"scale-free coordinates must be >= 0, got xi={xi}, zeta={zeta}")
    return d * np.array([[xi * xi + zeta * zeta, xi], [xi, 1.0]])


def random_coupled_block(
    rng: np.random.Generator,
    xi_range: Tuple[float, float] = (0.3, 1.5),
    zeta_range: Tuple[float, float] = (0.1, 0.6),
    d_range: Tuple[float, float] = (0.5, 1.5),
) -> np.ndarray:
    """Random strictly positive coupled 2x2 block (see :func:`coupled_block`)."""
    xi = rng.uniform(*xi_range)
    zeta = rng.uniform(*zeta_range)
    d = rng.uniform(*d_range)
    if xi <= 0.0 or zeta <= 0.0:
        raise InvalidStart("coupled blocks need strictly positive xi and zeta ranges")
    return coupled_block(xi, zeta, d)


def decoupled_block(defect: float, transverse: float) -> np.ndarray:
    """2x2 diagonal block ``diag(defect, transverse)`` (zero coupling)."""
    if defect < 0.0 or transverse < 0.0:
        raise InvalidStart("decoupled block entries must be >= 0")
    return np.diag([float(defect), float(transverse)])


@dataclass(frozen=True)
class PlantedInstance:
    """Ambient instance with a known reducing split and a known limit.

    ``matrix`` and ``direction`` are expressed in a random unitary frame;
    ``expected_limit`` is the exact limit in that same frame and
    ``expected_kind`` names the classification the analysis should reach
    (one of the ``structure`` module's kind labels).  ``frozen_dim`` and
    ``tau`` record the planted geometry.
    """

    matrix: np.ndarray
    direction: np.ndarray
    expected_limit: np.ndarray
    expected_kind: str
    frozen_dim: int
    tau: float


def planted_split_instance(
    rng: np.random.Generator,
    frozen_dim: int,
    active_kind: str,
    tau: float = 0.5,
) -> PlantedInstance:
    """Build an instance whose limit is known in closed form.

    The ambient space splits into a frozen part of dimension ``frozen_dim``
    (a strictly positive block the dynamics never touches) and a seed part
    carrying the direction.  ``active_kind`` selects the seed geometry:

    * :data:`KIND_COLLAPSE` — a coupled 2x2 seed fully weighted by the
      direction (the whole seed block dies; limit contribution zero);
    * :data:`KIND_COUPLED` — a kernel direction plus a coupled 2x2 block
      carrying weight ``tau`` (the seed block dies; limit contribution
      zero);
    * :data:`KIND_DECOUPLED` — a kernel direction plus a diagonal 2x2
      block carrying weight ``tau`` (only the weighted diagonal entry
      dies; the other survives).

    For :data:`KIND_DECOUPLED` the surviving diagonal direction is never
    reached by the dynamics, so it is itself reducing: analysis reports it
    as part of the frozen subspace (detected frozen dimension is
    ``frozen_dim + 1``).  The remaining two-dimensional part (kernel
    direction plus weighted diagonal) carries the direction with full
    weight and the direction is not an eigenvector there, so that part is
    classified as a noncommuting two-dimensional collapse.

    The whole construction is conjugated by a Haar unitary so nothing is
    axis-aligned, and the direction is exactly unit length.
    """
    if frozen_dim < 1:
        raise InvalidStart(f"frozen part must have dimension >= 1, got {frozen_dim}")
    if not (0.0 < tau < 1.0):
        raise InvalidStart(f"weight must lie in (0, 1), got {tau}")

    F = positive_block(frozen_dim, rng, lam_range=(0.5, 2.0))
    block = random_coupled_block(rng)

    if active_kind == KIND_COLLAPSE:
        seed_dim = 2
        seed_block = block
        u_seed = np.array([1.0, 0.0])
        limit_seed = np.zeros((2, 2))
        expected_kind = structure.KIND_DIM2_COLLAPSE
    elif active_kind == KIND_COUPLED:
        seed_dim = 3
        seed_block = np.zeros((3, 3))
        seed_block[1:, 1:] = block
        u_seed = np.concatenate(([np.sqrt(1.0 - tau)], np.sqrt(tau) * np.array([1.0, 0.0])))
        limit_seed = np.zeros((3, 3))
        expected_kind = structure.KIND_ACTIVE_DIM2
    elif active_kind == KIND_DECOUPLED:
        seed_dim = 3
        defect = rng.uniform(0.4, 1.2)
        transverse = rng.uniform(0.4, 1.2)
        seed_block = np.zeros((3, 3))
        seed_block[1:, 1:] = decoupled_block(defect, transverse)
        u_seed = np.concatenate(([np.sqrt(1.0 - tau)], np.sqrt(tau) * np.array([1.0, 0.0])))
        limit_seed = np.zeros((3, 3))
        limit_seed[2, 2] = transverse
        expected_kind = structure.KIND_DIM2_COLLAPSE
    else:
        raise InvalidStart(f"unknown active kind {active_kind!r}")

    dim = frozen_dim + seed_dim
    R = np.zeros((dim, dim), dtype=np.complex128)
    R[:frozen_dim, :frozen_dim] = F
    R[frozen_dim:, frozen_dim:] = seed_block
    L = np.zeros_like(R)
    L[:frozen_dim, :frozen_dim] = F
    L[frozen_dim:, frozen_dim:] = limit_seed
    u = np.zeros(dim, dtype=np.complex128)
    u[frozen_dim:] = u_seed

    V = haar_unitary(dim, rng)
    u_rot = V @ u
    u_rot = u_rot / np.linalg.norm(u_rot)
    return PlantedInstance(
        matrix=V @ R @ V.conj().T,
        direction=u_rot,
        expected_limit=V @ L @ V.conj().T,
        expected_kind=expected_kind,
        frozen_dim=frozen_dim,
        tau=float(tau),
    )


def wishart_instance(
    dim: int, tau_target: float, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Wishart matrix plus a direction with weight ``tau_target`` off its top mode.

    The matrix is strictly positive, so the direction always lies inside the
    starting support; ``tau_target`` only shapes the draw, splitting the
    direction between the dominant eigenvector (weight ``1 - tau_target``)
    and a random unit vector in its orthogonal complement.
    """
    if not (0.0 < tau_target < 1.0):
        raise InvalidStart(f"weight target must lie in (0, 1), got {tau_target}")
    R = wishart(dim, rng)
    _, V = np.linalg.eigh(R)
    v_top = V[:, -1]
    g = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    g = g - v_top * (v_top.conj() @ g)
    norm_g = np.linalg.norm(g)
    if norm_g < 1e-12:
        g = V[:, 0]
        norm_g = 1.0
    u = np.sqrt(1.0 - tau_target) * v_top + np.sqrt(tau_target) * g / norm_g
    return R, u / np.linalg.norm(u)


def coupled_block_instance(
    dim: int, tau_target: float, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Planted-split instance sized to the requested ambient dimension.

    Dimension 3 plants a fully weighted coupled 2x2 seed next to a frozen
    line; dimensions >= 4 plant a kernel direction plus a coupled 2x2 block
    carrying weight ``tau_target`` next to a frozen block.
    """
    if dim < 3:
        raise InvalidStart(f"coupled-block instances need dimension >= 3, got {dim}")
    if dim == 3:
        inst = planted_split_instance(rng, frozen_dim=1, active_kind=KIND_COLLAPSE, tau=tau_target)
    else:
        inst = planted_split_instance(
            rng, frozen_dim=dim - 3, active_kind=KIND_COUPLED, tau=tau_target
        )
    return inst.matrix, inst.direction


def sweep_instance(
    ensemble: str, dim: int, tau_target: float, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Deterministic (matrix, direction) pair for sweep worker processes.

    The generator is seeded from ``(seed, dim, tau_target)`` so every grid
    point of a sweep is reproducible independently of execution order.
    """
    rng = np.random.default_rng([seed, dim, int(round(tau_target * 1e9))])
    if ensemble == ENSEMBLE_WISHART:
        return wishart_instance(dim, tau_target, rng)
    if ensemble == ENSEMBLE_COUPLED_BLOCK:
        return coupled_block_instance(dim, tau_target, rng)
    raise InvalidStart(f"unknown ensemble {ensemble!r}")
