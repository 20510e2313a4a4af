"""Outer reconstruction loop: BB quadratic subproblems with reweighted prox.

Each outer iteration approximates the data-fit Hessian by a positive scalar
``alpha_j`` (Barzilai-Borwein), forms ``q_j = f_j - grad F(f_j) / alpha_j``,
and solves the quadratic subproblem

    f_{j+1} = argmin_{f >= 0}  0.5 * ||f - q_j||^2 + (tau / alpha_j) * pen(f)

where ``pen`` is the reweighted convex surrogate of the configured penalty,
with weights refreshed from the current iterate.  The BB scalar is the
curvature estimate ``alpha = (s.u)/(s.s)`` from successive iterate and
gradient differences, clamped to ``[alpha_min, alpha_max]`` and falling
back to ``alpha_init`` on non-positive curvature.  The outer loop is
nonmonotone by design; the returned image is never worse (in penalized
objective) than the starting point.

Iterates are recorded in an :class:`IterationTrace` which serializes to CSV
with header ``iter,phi,datafit,penalty,alpha,relchange,rmse,seconds``.  The
``penalty`` column is the full term ``tau * pen(f)``, so ``phi = datafit +
penalty`` holds row by row.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .blur import blur_adjoint
from .errors import DegenerateStepError, DomainError, ShapeError
from .image import as_signal, require_same_shape, rmse
from .likelihoods import DataFit
from .regularizers import (
    LP_NORM,
    Penalty,
    ProxConfig,
    compute_weights,
    fgp_weighted_tv,
    prox_weighted_lp,
)


@dataclass(frozen=True)
class SolverConfig:
    """Outer-loop budget, BB safeguards, and the inner prox configuration.

    ``monotone_safeguard`` (off by default) adds an acceptance test on outer
    iterates: a step whose penalized objective rises is retried with the BB
    scalar inflated by ``backtrack_factor`` (shorter step) until it falls or
    ``alpha_max`` is reached.  The plain iteration is nonmonotone.
    """

    max_outer_iters: int = 200
    rel_change_tol: float = 1e-6
    alpha_min: float = 1e-6
    alpha_max: float = 1e6
    alpha_init: float = 1.0
    monotone_safeguard: bool = False
    backtrack_factor: float = 4.0
    prox: ProxConfig = field(default_factory=ProxConfig)

    def __post_init__(self):
        if self.max_outer_iters < 1:
            raise DomainError("max_outer_iters must be >= 1")
        if not self.rel_change_tol > 0:
            raise DomainError("rel_change_tol must be > 0")
        if not (0 < self.alpha_min <= self.alpha_init <= self.alpha_max):
            raise DomainError(
                "need 0 < alpha_min <= alpha_init <= alpha_max, got "
                f"{self.alpha_min}, {self.alpha_init}, {self.alpha_max}"
            )
        if not self.backtrack_factor > 1:
            raise DomainError("backtrack_factor must be > 1")


@dataclass
class IterationTrace:
    """Per-outer-iteration records of one reconstruction run."""

    iters: list = field(default_factory=list)
    phi: list = field(default_factory=list)
    datafit: list = field(default_factory=list)
    penalty: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    relchange: list = field(default_factory=list)  # None for the first row
    rmse: list = field(default_factory=list)  # None when no truth supplied
    seconds: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def add(self, j, phi, datafit, penalty, alpha, relchange, err, seconds):
        self.iters.append(int(j))
        self.phi.append(float(phi))
        self.datafit.append(float(datafit))
        self.penalty.append(float(penalty))
        self.alpha.append(float(alpha))
        self.relchange.append(None if relchange is None else float(relchange))
        self.rmse.append(None if err is None else float(err))
        self.seconds.append(float(seconds))

    def __len__(self) -> int:
        return len(self.iters)

    @property
    def final_phi(self) -> float:
        return self.phi[-1]

    def to_csv(self, path, include_seconds: bool = True) -> None:
        """Serialize the trace; ``include_seconds=False`` leaves the wall-time
        column empty so the file is byte-reproducible."""
        with open(path, "w", encoding="ascii") as fh:
            fh.write("iter,phi,datafit,penalty,alpha,relchange,rmse,seconds\n")
            for row in zip(
                self.iters,
                self.phi,
                self.datafit,
                self.penalty,
                self.alpha,
                self.relchange,
                self.rmse,
                self.seconds if include_seconds else [None] * len(self.iters),
            ):
                fields = [str(row[0])]
                fields += ["" if v is None else repr(v) for v in row[1:]]
                fh.write(",".join(fields) + "\n")


def bb_step(s: np.ndarray, u: np.ndarray, cfg: SolverConfig) -> float:
    """BB curvature scalar from iterate difference ``s`` and gradient
    difference ``u``: ``clamp((s.u)/(s.s), alpha_min, alpha_max)``.

    Non-positive curvature (``s.u <= 0``) falls back to ``alpha_init``; an
    exactly zero ``s`` raises :class:`DegenerateStepError` (the caller
    treats that as convergence).
    """
    s = np.asarray(s, dtype=np.float64).ravel()
    u = np.asarray(u, dtype=np.float64).ravel()
    if s.shape != u.shape:
        raise ShapeError(f"s and u have mismatched sizes {s.size} vs {u.size}")
    ss = float(np.dot(s, s))
    if ss == 0.0:
        raise DegenerateStepError("iterate difference is exactly zero")
    su = float(np.dot(s, u))
    if su <= 0.0:
        return cfg.alpha_init
    return float(np.clip(su / ss, cfg.alpha_min, cfg.alpha_max))


def default_initializer(fit: DataFit) -> np.ndarray:
    """Warm start: adjoint of the counts, clipped, rescaled to total counts."""
    back = np.maximum(blur_adjoint(fit.operator, fit.counts), 0.0)
    total = float(fit.counts.sum())
    back_total = float(back.sum())
    if total > 0 and back_total > 0:
        back *= total / back_total
    return back


def reconstruct(
    fit: DataFit,
    penalty: Penalty,
    cfg: Optional[SolverConfig] = None,
    f0: Optional[np.ndarray] = None,
    truth: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, IterationTrace]:
    """Run the outer loop; returns the reconstruction and its trace.

    Every iterate is nonnegative.  The returned image satisfies
    ``phi(returned) <= phi(f0)``: if the last iterate ended above the
    starting objective (possible for the nonmonotone BB iteration), the
    best recorded iterate is returned instead and
    ``trace.diagnostics["returned_best_iterate"]`` is set.
    """
    if cfg is None:
        cfg = SolverConfig()
    f = as_signal(f0, name="f0").copy() if f0 is not None else default_initializer(fit)
    require_same_shape(f, fit.counts, "f0 and counts")
    if truth is not None:
        truth = as_signal(truth, name="truth")
        require_same_shape(truth, fit.counts, "truth and counts")

    trace = IterationTrace()
    trace.diagnostics["all_zero_counts"] = bool(fit.counts.max() == 0)
    trace.diagnostics["inner_iterations"] = []
    trace.diagnostics["prox_converged"] = []
    trace.diagnostics["backtracks"] = 0
    trace.diagnostics["returned_best_iterate"] = False

    start = time.perf_counter()

    def phi_parts(img):
        pen = penalty.tau * penalty.value(img)
        dat = fit.objective(img)
        return dat + pen, dat, pen

    def record(j, img, parts, alpha, rel):
        phi, dat, pen = parts
        err = None if truth is None else rmse(img, truth)
        trace.add(j, phi, dat, pen, alpha, rel, err, time.perf_counter() - start)

    grad = fit.gradient(f)
    parts = phi_parts(f)
    initial_phi = parts[0]
    best_phi, best_f = parts[0], f
    min_pixel = float(f.min())

    alpha = cfg.alpha_init
    rel = None
    dual = None
    weights = None
    for j in range(cfg.max_outer_iters):
        if penalty.is_tv and (weights is None or j % cfg.prox.reweight_every == 0):
            weights = compute_weights(penalty.kind, penalty.p, f, cfg.prox.eps_w)

        # One prox step from f; the safeguard retries with a larger alpha
        # (shorter step) while the objective rises.
        alpha_used = alpha
        while True:
            q = f - grad / alpha_used
            if penalty.kind == LP_NORM:
                f_new = prox_weighted_lp(
                    q, penalty.tau / alpha_used, penalty.p, f, cfg.prox.eps_w
                )
            else:
                res = fgp_weighted_tv(
                    q,
                    penalty.tau / alpha_used,
                    penalty.kind,
                    weights,
                    cfg.prox,
                    dual_init=dual,
                )
                f_new = res.image
            new_parts = phi_parts(f_new)
            if (
                not cfg.monotone_safeguard
                or new_parts[0] <= parts[0]
                or alpha_used >= cfg.alpha_max
            ):
                break
            alpha_used = min(alpha_used * cfg.backtrack_factor, cfg.alpha_max)
            trace.diagnostics["backtracks"] += 1
        if penalty.is_tv:
            dual = res.dual
            trace.diagnostics["inner_iterations"].append(res.iterations)
            trace.diagnostics["prox_converged"].append(res.converged)

        record(j, f, parts, alpha_used, rel)

        s = f_new - f
        grad_new = fit.gradient(f_new)
        try:
            alpha = bb_step(s, grad_new - grad, cfg)
        except DegenerateStepError:
            rel = 0.0
            break
        rel = float(np.linalg.norm(s) / max(np.linalg.norm(f), 1.0))
        f, grad, parts = f_new, grad_new, new_parts
        min_pixel = min(min_pixel, float(f.min()))
        if parts[0] < best_phi:
            best_phi, best_f = parts[0], f
        if rel <= cfg.rel_change_tol:
            break
    record(len(trace), f, parts, alpha, rel)

    if parts[0] > initial_phi:
        trace.diagnostics["returned_best_iterate"] = True
        result, result_phi = best_f, best_phi
    else:
        result, result_phi = f, parts[0]
    trace.diagnostics["phi_initial"] = initial_phi
    trace.diagnostics["phi_final"] = result_phi
    trace.diagnostics["min_iterate_pixel"] = min_pixel
    trace.diagnostics["final_floor_pixels"] = int(fit.floor_mask(result).sum())
    return result, trace
