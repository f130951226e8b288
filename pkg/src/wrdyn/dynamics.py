"""Iteration engine: R -> R^{1/2} (I - uu*) R^{1/2} with certified traces.

The engine records one :class:`StepRecord` per visited iterate, detects when
the support (numerical range) stops changing, extracts the active block on
that support, and from then on certifies every step against the identity
checkers. A run ends by convergence (the step decrement is the gap
``<u, R_n u>`` exactly, since the decrement is rank one), by reaching
``max_iter``, or by numerical breakdown.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import identities, matcore
from .errors import (
    DimensionMismatch,
    EmptySupport,
    InvalidDirection,
    NumericalBreakdown,
    WeightTooLarge,
)

logger = logging.getLogger("wrdyn.dynamics")

EPS = float(np.finfo(np.float64).eps)

RANK_TOL_DEFAULT = matcore.RANK_TOL_DEFAULT
CONV_TOL_DEFAULT = 1e-11
COUPLING_TOL_DEFAULT = 1e-10
STAB_WINDOW_DEFAULT = 3
MAX_ITER_DEFAULT = 10_000

#: traces store full eigenvalue lists only up to this dimension
EIGENVALUE_STORE_LIMIT = 32

#: conditioning guard for inverse/determinant certificates: checks run only
#: while lambda_min(T) >= max(1e3 * eps * ||T_start||, INV_COND_GUARD * ||T||)
INV_COND_GUARD = 1e-7


def _unit_direction(u) -> np.ndarray:
    x = np.asarray(u, dtype=np.complex128)
    if x.ndim != 1:
        raise DimensionMismatch(f"direction must be a vector, got shape {x.shape}")
    nrm = np.linalg.norm(x)
    if abs(nrm - 1.0) > 1e-12:
        raise InvalidDirection(f"direction norm {nrm!r} is not 1 within 1e-12")
    return x / nrm


def wr_step(R, u, rank_tol: float = RANK_TOL_DEFAULT) -> np.ndarray:
    """One application of the map: R - vv* with v = R^{1/2} u."""
    A = matcore.hermitian_part(R)
    x = _unit_direction(u)
    if A.shape[0] != x.shape[0]:
        raise DimensionMismatch("matrix and direction dimensions differ")
    v = matcore.psd_sqrt(A, rank_tol) @ x
    return matcore.hermitian_part(A - np.outer(v, v.conj()))


def weighted_step(T, w, rank_tol: float = RANK_TOL_DEFAULT) -> np.ndarray:
    """Stabilized step on a block: T - vv* with v = T^{1/2} w, |w| <= 1.

    An exactly zero ``w`` returns ``T`` unchanged (the map is the identity).
    """
    A = matcore.hermitian_part(T)
    x = np.asarray(w, dtype=np.complex128)
    if A.shape[0] != x.shape[0]:
        raise DimensionMismatch("block and direction dimensions differ")
    weight = float(np.vdot(x, x).real)
    if weight > 1.0 + 1e-12:
        raise WeightTooLarge(f"squared weight {weight} exceeds 1")
    if not x.any():
        return A.copy()
    v = matcore.psd_sqrt(A, rank_tol) @ x
    return matcore.hermitian_part(A - np.outer(v, v.conj()))


def step_gap(R, u) -> float:
    """The step decrement <u, R u> (trace loss, and exact decrement norm)."""
    A = np.asarray(R, dtype=np.complex128)
    x = np.asarray(u, dtype=np.complex128)
    return float(np.vdot(x, A @ x).real)


@dataclass
class WRConfig:
    """Validated input of a run."""

    matrix: np.ndarray
    direction: np.ndarray
    rank_tol: float = RANK_TOL_DEFAULT
    conv_tol: float = CONV_TOL_DEFAULT
    coupling_tol: float = COUPLING_TOL_DEFAULT
    stab_window: int = STAB_WINDOW_DEFAULT
    max_iter: int = MAX_ITER_DEFAULT
    keep_iterates: bool = False
    compute_residuals: bool = True

    def __post_init__(self):
        for name in ("rank_tol", "conv_tol", "coupling_tol"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.stab_window < 1:
            raise ValueError("stab_window must be at least 1")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        A = matcore.require_hermitian(np.asarray(self.matrix, dtype=np.complex128))
        self.matrix = matcore.as_psd(A, self.rank_tol)
        self.direction = _unit_direction(self.direction)
        if self.matrix.shape[0] != self.direction.shape[0]:
            raise DimensionMismatch("matrix and direction dimensions differ")


@dataclass
class StepRecord:
    """Scalars recorded for one iterate (eigenvalue list only in low dimension)."""

    n: int
    eigenvalues: Optional[np.ndarray]
    lambda_min: float
    lambda_max: float
    det: float
    rank: int
    trace: float
    gap: float
    block_coords: Optional[identities.BlockCoordinates] = None
    block_det: Optional[float] = None
    residuals: dict = field(default_factory=dict)


@dataclass
class ActiveBlock:
    """The dynamics compressed onto the stabilized support.

    ``basis`` has orthonormal columns spanning the support, ``start`` is the
    first step index whose support persisted, ``block`` the compressed iterate
    there, ``weight_vector`` the compressed direction, ``tau`` its squared
    norm, and ``defect_direction`` its normalization (None for tau ~ 0).
    """

    basis: np.ndarray
    start: int
    block: np.ndarray
    weight_vector: np.ndarray
    tau: float
    rho: float
    defect_direction: Optional[np.ndarray]


@dataclass
class WRTrace:
    """Everything a run produced."""

    records: list[StepRecord]
    limit_estimate: Optional[np.ndarray]
    converged: bool
    converged_at: Optional[int]
    stabilized_at: Optional[int]
    active: Optional[ActiveBlock]
    max_iter_exceeded: bool
    run_residuals: dict[str, float]
    inverse_checks_stopped_at: Optional[int]
    iterates: Optional[list[np.ndarray]] = None

    @property
    def steps(self) -> int:
        return self.records[-1].n if self.records else 0


class _ResidualTracker:
    """Per-step certification of the stabilized block dynamics."""

    def __init__(
        self,
        active: ActiveBlock,
        coupling_tol: float,
        rank_tol: float = RANK_TOL_DEFAULT,
    ):
        self.e = active.defect_direction
        self.tau = active.tau
        self.rho = active.rho
        self.start = active.start
        self.dim_e = active.basis.shape[1]
        self.rank_tol = rank_tol
        self.norm_start = matcore.opnorm(active.block)
        self.det_floor = 1e3 * EPS * max(self.norm_start, EPS)
        coords0 = identities.block_coordinates(active.block, self.e)
        self.trB_start = coords0.transverse_trace
        self.a_start = coords0.defect_diag
        self.B_start = coords0.transverse
        self.decoupled = coords0.coupling_norm <= coupling_tol * max(
            1.0, self.norm_start
        )
        self.stats_start: Optional[identities.InverseStats] = None
        self.sum_y2 = 0.0
        self.store_coords = self.dim_e <= EIGENVALUE_STORE_LIMIT
        self.inverse_stopped: Optional[int] = None
        self._prev = None  # (coords, det, block, trusted)

    def _trusted(self, lam_min: float, lam_max: float) -> bool:
        # The second clause keeps the predicate at least as strict as the
        # positivity gate inside the inverse-based checks, so a block that
        # collapses to zero stops being checked instead of failing hard.
        return lam_min >= max(
            self.det_floor, INV_COND_GUARD * lam_max
        ) and lam_min > self.rank_tol * max(1.0, lam_max)

    def process(self, record: StepRecord, T: np.ndarray, root: Optional[np.ndarray]):
        n = record.n
        root_block = root if root is not None else matcore.psd_sqrt(T)
        coords = identities.block_coordinates(T, self.e, root=root_block)
        w = np.linalg.eigvalsh(T)
        det = float(np.prod(w))
        trusted = self._trusted(w[0], abs(w[-1]))
        res: dict[str, float] = {}

        res["offdiag_cs"] = identities.check_offdiag_collapse([coords], self.norm_start)
        if self._prev is not None:
            prev_coords, prev_det, prev_T, prev_trusted = self._prev
            self.sum_y2 += prev_coords.root_coupling_sq
            res["a_recursion"] = identities.check_a_recursion(
                prev_coords, coords, self.tau
            )
            res["B_decrement"] = identities.check_B_decrement(
                prev_coords, coords, self.tau
            )
            res["summability"] = abs(
                self.tau * self.sum_y2 - (self.trB_start - coords.transverse_trace)
            ) / max(1.0, abs(self.trB_start))
            if trusted and prev_trusted:
                res["det_decay"] = identities.check_det_decay(prev_det, det, self.tau)
                res["inv_update"] = identities.check_inverse_update(
                    prev_T, T, self.e, self.tau, rank_tol=self.rank_tol
                )
        if trusted:
            stats = identities.inverse_stats(T, self.e, rank_tol=self.rank_tol)
            if self.stats_start is None:
                self.stats_start = stats
            res["beta_bound"] = max(
                0.0,
                identities.defect_inverse_floor(
                    self.stats_start, self.tau, self.norm_start, n - self.start
                )
                - stats.inv_defect,
            )
            res["s_bound"] = max(
                0.0,
                identities.trace_inverse_floor(
                    self.stats_start, self.tau, self.norm_start, n - self.start
                )
                - stats.inv_trace,
            )
            res["lambda_min_bound"] = max(
                0.0, stats.lambda_min - self.dim_e / stats.inv_trace
            )
        elif self.inverse_stopped is None:
            self.inverse_stopped = n
            logger.info("inverse-side checks stopped at step %d (conditioning)", n)
        if self.decoupled:
            ev = self.e
            predicted = (self.rho ** (n - self.start)) * self.a_start * np.outer(
                ev, ev.conj()
            ) + self.B_start
            res["transverse_persistence"] = matcore.opnorm(T - predicted) / max(
                1.0, self.norm_start
            )

        record.block_coords = coords if self.store_coords else None
        record.block_det = det
        record.residuals = res
        self._prev = (coords, det, T, trusted)


def _build_active(
    R: np.ndarray,
    u: np.ndarray,
    basis: np.ndarray,
    start: int,
    rank_tol: float,
    validate: bool = True,
) -> ActiveBlock:
    block = matcore.compress(R, basis)
    u_e = basis.conj().T @ u
    tau = float(np.vdot(u_e, u_e).real)
    if validate:
        stepped_block = weighted_step(block, u_e, rank_tol)
        compressed_step = matcore.compress(wr_step(R, u, rank_tol), basis)
        dev = matcore.opnorm(stepped_block - compressed_step)
        if dev > 1e-9 * max(1.0, matcore.opnorm(block)):
            raise NumericalBreakdown(
                f"compressed step deviates by {dev:.3e}: support not stabilized"
            )
    direction = u_e / np.sqrt(tau) if tau > rank_tol else None
    return ActiveBlock(
        basis=basis,
        start=start,
        block=block,
        weight_vector=u_e,
        tau=tau,
        rho=1.0 - tau,
        defect_direction=direction,
    )


def extract_active_block(R, u, rank_tol: float = RANK_TOL_DEFAULT) -> ActiveBlock:
    """Compress a stabilized iterate onto its support.

    Validates the extraction by checking that one weighted step on the block
    matches the compressed ambient step. Raises :class:`EmptySupport` for the
    zero iterate.
    """
    A = matcore.hermitian_part(R)
    x = _unit_direction(u)
    basis = matcore.range_basis(A, rank_tol)
    if basis.shape[1] == 0:
        raise EmptySupport("iterate has numerical rank 0")
    return _build_active(A, x, basis, start=0, rank_tol=rank_tol)


def detect_stabilization(
    iterates: Sequence[np.ndarray],
    rank_tol: float = RANK_TOL_DEFAULT,
    stab_window: int = STAB_WINDOW_DEFAULT,
) -> Optional[int]:
    """Smallest index N from which rank and range persist to the end.

    Persistence means: every later iterate has the rank of iterate N and its
    range stays within principal-angle sine ``sqrt(rank_tol)`` of range(R_N).
    The persistent tail must be at least ``stab_window`` iterates long.
    """
    mats = [matcore.hermitian_part(M) for M in iterates]
    if not mats:
        return None
    ranks = [matcore.numerical_rank(M, rank_tol) for M in mats]
    bases = [matcore.range_basis(M, rank_tol) for M in mats]
    sine_tol = float(np.sqrt(rank_tol))
    for start in range(len(mats)):
        if len(mats) - start < stab_window:
            break
        if any(r != ranks[start] for r in ranks[start + 1 :]):
            continue
        if all(
            matcore.subspace_sine(bases[start], bases[n]) <= sine_tol
            for n in range(start + 1, len(mats))
        ):
            return start
    return None


def iterate(cfg: WRConfig) -> WRTrace:
    """Run the dynamics to convergence, ``max_iter``, or breakdown.

    The run has two phases.  Before the support stabilizes, the full ambient
    matrix is iterated.  Once stabilization is declared, the window is
    replayed on the compressed block from the stabilization point and the
    engine iterates the block alone from then on: restriction commutes with
    the step (validated at extraction), directions outside the support stay
    exactly inert instead of reinjecting square-root roundoff, and each step
    costs a block-sized eigendecomposition instead of an ambient one.
    Records keep ambient semantics throughout (eigenvalues are padded with
    the exact zeros of the shed directions).
    """
    R = cfg.matrix.copy()
    u = cfg.direction
    dim = R.shape[0]
    sine_tol = float(np.sqrt(cfg.rank_tol))
    store_eigs = dim <= EIGENVALUE_STORE_LIMIT

    records: list[StepRecord] = []
    iterates_list: Optional[list[np.ndarray]] = [] if cfg.keep_iterates else None

    stabilized_at: Optional[int] = None
    active: Optional[ActiveBlock] = None
    tracker: Optional[_ResidualTracker] = None
    window: deque[tuple[int, np.ndarray]] = deque(maxlen=cfg.stab_window)
    cand: Optional[int] = None
    cand_rank = -1
    cand_basis: Optional[np.ndarray] = None

    # block-phase state (set at stabilization)
    T: Optional[np.ndarray] = None
    u_act: Optional[np.ndarray] = None
    pad = 0

    converged = False
    converged_at: Optional[int] = None
    max_iter_exceeded = False
    limit: Optional[np.ndarray] = None
    norm_r0: Optional[float] = None

    def embed(Tb: np.ndarray) -> np.ndarray:
        return matcore.hermitian_part(active.basis @ Tb @ active.basis.conj().T)

    def ambient_record(n: int, w: np.ndarray, gap: float) -> StepRecord:
        thresh = cfg.rank_tol * max(1.0, w[-1])
        return StepRecord(
            n=n,
            eigenvalues=w.copy() if store_eigs else None,
            lambda_min=float(w[0]),
            lambda_max=float(w[-1]),
            det=float(np.prod(np.clip(w, 0.0, None))),
            rank=int(np.count_nonzero(w > thresh)),
            trace=float(w.sum()),
            gap=gap,
        )

    def block_record(n: int, w_blk: np.ndarray, Tb: np.ndarray) -> StepRecord:
        w_amb = np.sort(np.concatenate([np.zeros(pad), w_blk])) if pad else w_blk
        return ambient_record(n, w_amb, step_gap(Tb, u_act))

    def block_root(w_blk: np.ndarray, vecs: np.ndarray, Tb: np.ndarray) -> np.ndarray:
        if _diagonal_like(Tb):
            return matcore.psd_sqrt(Tb, cfg.rank_tol)
        return matcore.hermitian_part(
            (vecs * np.sqrt(np.clip(w_blk, 0.0, None))) @ vecs.conj().T
        )

    def finalize() -> WRTrace:
        run_res: dict[str, float] = {}
        for rec in records:
            for key, val in rec.residuals.items():
                run_res[key] = max(run_res.get(key, 0.0), val)
        return WRTrace(
            records=records,
            limit_estimate=limit,
            converged=converged,
            converged_at=converged_at,
            stabilized_at=stabilized_at,
            active=active,
            max_iter_exceeded=max_iter_exceeded,
            run_residuals=run_res,
            inverse_checks_stopped_at=(
                tracker.inverse_stopped if tracker is not None else None
            ),
            iterates=iterates_list,
        )

    logger.info(
        "iterate: dim=%d rank_tol=%g conv_tol=%g max_iter=%d",
        dim,
        cfg.rank_tol,
        cfg.conv_tol,
        cfg.max_iter,
    )

    n = 0
    while True:
        in_block = T is not None
        if in_block:
            dec = matcore.eigh(T)
        else:
            dec = matcore.eigh(R)
        w = dec.eigenvalues
        if norm_r0 is None:
            norm_r0 = float(np.abs(w).max()) if w.size else 0.0
        if w[0] < -cfg.rank_tol * max(1.0, w[-1]):
            exc = NumericalBreakdown(
                f"iterate {n} has eigenvalue {w[0]:.3e} below the clamp band"
            )
            limit = None
            exc.trace = finalize()
            raise exc

        rec = block_record(n, w, T) if in_block else ambient_record(n, w, step_gap(R, u))
        records.append(rec)
        if iterates_list is not None:
            iterates_list.append(embed(T) if in_block else R.copy())
        logger.debug("step %d: rank=%d gap=%.3e", n, rec.rank, rec.gap)

        # --- online support-stabilization detection -----------------------
        if stabilized_at is None and rec.rank > 0:
            thresh = cfg.rank_tol * max(1.0, w[-1])
            keep = np.flatnonzero(w > thresh)
            basis = dec.vectors[:, keep[::-1]]
            if (
                cand is None
                or rec.rank != cand_rank
                or matcore.subspace_sine(cand_basis, basis) > sine_tol
            ):
                cand, cand_rank, cand_basis = n, rec.rank, basis
            window.append((n, R.copy()))
            if n - cand + 1 >= cfg.stab_window:
                u_cand = cand_basis.conj().T @ u
                tau = float(np.vdot(u_cand, u_cand).real)
                if 1.0 - tau <= cfg.rank_tol:
                    # direction numerically inside the range: a drop is
                    # imminent, restart detection
                    logger.debug("step %d: stabilization rejected, tau=%.3g", n, tau)
                    cand = cand_basis = None
                    cand_rank = -1
                else:
                    start_R = dict(window)[cand]
                    active = _build_active(
                        start_R, u, cand_basis, cand, cfg.rank_tol
                    )
                    stabilized_at = cand
                    logger.info(
                        "support stabilized at N=%d: dim=%d tau=%.6g",
                        cand,
                        active.basis.shape[1],
                        active.tau,
                    )
                    if cfg.compute_residuals and active.tau > cfg.rank_tol:
                        tracker = _ResidualTracker(
                            active, cfg.coupling_tol, rank_tol=cfg.rank_tol
                        )
                    # switch to the block phase: replay the detection window
                    # on the compressed block so every record from the
                    # stabilization point reflects the restricted dynamics
                    u_act = active.weight_vector
                    pad = dim - active.basis.shape[1]
                    T = active.block.copy()
                    for idx in range(cand, n):
                        root_re = matcore.psd_sqrt(T, cfg.rank_tol)
                        if tracker is not None:
                            tracker.process(records[idx], T, root_re)
                        v_re = root_re @ u_act
                        T = matcore.hermitian_part(T - np.outer(v_re, v_re.conj()))
                        records[idx + 1] = block_record(
                            idx + 1, np.linalg.eigvalsh(T), T
                        )
                        if iterates_list is not None:
                            iterates_list[idx + 1] = embed(T)
                    rec = records[n]
                    in_block = True
                    dec = matcore.eigh(T)
                    w = dec.eigenvalues
                    window.clear()

        if n == cfg.max_iter:
            if not converged:
                max_iter_exceeded = True
            limit = embed(T) if in_block else R.copy()
            logger.info("max_iter=%d reached without convergence", cfg.max_iter)
            if tracker is not None:
                tracker.process(rec, T, root=None)
            break

        # --- one step -------------------------------------------------------
        if in_block:
            root = block_root(w, dec.vectors, T)
            if tracker is not None:
                tracker.process(rec, T, root=root)
            v = root @ u_act
            decrement = float(np.vdot(v, v).real)
            state_next = matcore.hermitian_part(T - np.outer(v, v.conj()))
        else:
            root = block_root(w, dec.vectors, R)
            v = root @ u
            decrement = float(np.vdot(v, v).real)
            state_next = matcore.hermitian_part(R - np.outer(v, v.conj()))

        if rec.gap <= cfg.conv_tol and decrement <= cfg.conv_tol * max(1.0, norm_r0):
            converged = True
            converged_at = n
            if in_block:
                T = state_next
                final_rec = block_record(n + 1, np.linalg.eigvalsh(T), T)
                limit = embed(T)
            else:
                R = state_next
                final_rec = ambient_record(
                    n + 1, np.linalg.eigvalsh(R), step_gap(R, u)
                )
                limit = R.copy()
            records.append(final_rec)
            if iterates_list is not None:
                iterates_list.append(embed(T) if in_block else R.copy())
            if tracker is not None:
                tracker.process(final_rec, T, root=None)
            logger.info("converged at n=%d (gap %.3e)", n, rec.gap)
            break

        if in_block:
            T = state_next
        else:
            R = state_next
        n += 1

    return finalize()


def _diagonal_like(A: np.ndarray) -> bool:
    off = A.copy()
    np.fill_diagonal(off, 0.0)
    return not off.any()


def iterate_weighted(T0, w, **config_kwargs) -> WRTrace:
    """Run a stabilized block directly by embedding it over a one-dim kernel.

    The ambient instance is ``0 (+) T0`` with direction
    ``sqrt(1 - |w|^2) e_0 (+) w``, whose support is the block from step 0, so
    the trace's active block is ``T0`` itself with weight ``|w|^2``.
    """
    T = matcore.hermitian_part(T0)
    x = np.asarray(w, dtype=np.complex128)
    k = T.shape[0]
    if x.shape != (k,):
        raise DimensionMismatch("block and direction dimensions differ")
    tau = float(np.vdot(x, x).real)
    if tau > 1.0 + 1e-12:
        raise WeightTooLarge(f"squared weight {tau} exceeds 1")
    R0 = np.zeros((k + 1, k + 1), dtype=np.complex128)
    R0[1:, 1:] = T
    u = np.zeros(k + 1, dtype=np.complex128)
    u[0] = np.sqrt(max(0.0, 1.0 - tau))
    u[1:] = x
    u = u / np.linalg.norm(u)
    cfg = WRConfig(matrix=R0, direction=u, **config_kwargs)
    return iterate(cfg)
