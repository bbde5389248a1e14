"""Proximal point and Bregman ADMM solvers for the (fused) GW discrepancy."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .graph import Coupling, Graph, ShapeError, assemble_cost_const, gw_cost



class SolverKind(str, Enum):
    PPA = "ppa"
    BADMM = "badmm"


DEFAULT_GAMMA = {SolverKind.PPA: 0.01, SolverKind.BADMM: 1.0}


class NumericalError(ArithmeticError):
    """Overflow or NaN inside a solver iteration."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


class DegenerateScalingError(NumericalError):
    """A kernel row or column that should carry mass vanished."""


@dataclass(frozen=True)
class SolverConfig:
    """Settings shared by both GWD solvers.

    ``init_coupling`` replaces the product initialization (mainly a testing
    hook). ``jitter`` perturbs the product initialization to break exact
    symmetries; it draws from ``seed`` and is inactive at 0.
    ``sinkhorn_sweeps`` > 1 repeats the PPA scaling sweep inside each
    proximal step (1 is the plain one-sweep update).
    """

    kind: SolverKind = SolverKind.PPA
    gamma: float | None = None
    inner_iters: int = 50
    init_coupling: np.ndarray | None = None
    jitter: float = 0.0
    seed: int = 0
    sinkhorn_sweeps: int = 1
    feature_weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SolverKind(self.kind))
        if self.gamma is None:
            object.__setattr__(self, "gamma", DEFAULT_GAMMA[self.kind])
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.inner_iters < 0:
            raise ValueError("inner_iters must be nonnegative")
        if self.sinkhorn_sweeps < 1:
            raise ValueError("sinkhorn_sweeps must be at least 1")
        if self.jitter < 0:
            raise ValueError("jitter must be nonnegative")
        if self.init_coupling is not None:
            plan = self.init_coupling.plan if isinstance(self.init_coupling, Coupling) else self.init_coupling
            object.__setattr__(self, "init_coupling", np.asarray(plan, dtype=float))

    def replace(self, **changes) -> "SolverConfig":
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if "kind" in changes and "gamma" not in changes:
            kw["gamma"] = None
        kw.update(changes)
        return SolverConfig(**kw)


@dataclass(frozen=True)
class SolverResult:
    coupling: Coupling
    sq_discrepancy: float
    cost_trace: np.ndarray
    primal_residual: float | None = None
    aux_plan: np.ndarray | None = field(default=None, repr=False)

    @property
    def discrepancy(self) -> float:
        """Square root of the squared discrepancy (pseudometric value)."""
        return float(np.sqrt(self.sq_discrepancy))


def _initial_plan(p, q, config: SolverConfig) -> np.ndarray:
    if config.init_coupling is not None:
        plan = np.array(config.init_coupling, dtype=float)
        if plan.shape != (p.size, q.size):
            raise ShapeError(f"init_coupling has shape {plan.shape}, expected {(p.size, q.size)}")
        return plan
    plan = np.outer(p, q)
    if config.jitter > 0:
        rng = np.random.default_rng(config.seed)
        plan = plan + rng.uniform(0.0, config.jitter * min(p.min(), q.min()), size=plan.shape)
        plan *= (q / plan.sum(axis=0))[None, :]
        plan *= (p / plan.sum(axis=1))[:, None]
    return plan


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _check(log_kernel, iteration):
    # max() propagates NaN and +inf; an all -inf kernel is degenerate as well
    if not np.isfinite(log_kernel.max()):
        raise NumericalError("non-finite kernel (gamma too small for the costs?)", iteration)


def _cost(lin, plan):
    return max(float(np.sum(lin * plan)), 0.0)


def _normalize(log_kernel, log_dist, axis, what, iteration):
    """Log-scaling that makes the sums of ``exp(log_kernel)`` along ``axis``
    equal ``exp(log_dist)``."""
    top = log_kernel.max(axis=axis)
    target = log_dist
    if not np.all(np.isfinite(top)):
        empty = np.isneginf(top)
        if np.any(empty & np.isfinite(log_dist)):
            raise DegenerateScalingError(f"zero {what} in kernel", iteration)
        top = np.where(empty, 0.0, top)
        target = np.where(empty, -np.inf, log_dist)
    shifted = log_kernel - (top[None, :] if axis == 0 else top[:, None])
    return target - top - np.log(np.exp(shifted).sum(axis=axis))


def _setup(source: Graph, target: Graph, config: SolverConfig, feature_dist):
    return (
        assemble_cost_const(source, target, feature_dist, config.feature_weight),
        source.adjacency,
        target.adjacency,
        source.node_dist,
        target.node_dist,
    )


def _result(source, target, cost_const, plan, trace, **extra) -> SolverResult:
    coupling = Coupling(plan, source.node_dist, target.node_dist)
    return SolverResult(coupling, gw_cost(source, target, cost_const, coupling), np.asarray(trace), **extra)


def gwd_ppa(source: Graph, target: Graph, config: SolverConfig | None = None, feature_dist=None) -> SolverResult:
    """M-step proximal point approximation of the GW coupling.

    Each step linearizes the quadratic cost at the current plan, takes a
    KL-proximal step and applies one Sinkhorn-Knopp sweep (columns, then
    rows), so every iterate has exact row marginals.

    Parameters
    ----------
    source, target : Graph
    config : SolverConfig, optional
        Defaults to ``SolverConfig(kind="ppa")``.
    feature_dist : array-like, shape (ns, nt), optional
        Node-feature cost for the fused discrepancy.

    Returns
    -------
    SolverResult
    """
    config = config or SolverConfig(kind=SolverKind.PPA)
    cost_const, cs, ct, p, q = _setup(source, target, config, feature_dist)
    plan = _initial_plan(p, q, config)
    log_p, log_q = _log(p), _log(q)
    log_plan, log_a = _log(plan), log_p
    lin = cost_const - 2.0 * cs @ plan @ ct.T
    trace = [_cost(lin, plan)]
    for m in range(config.inner_iters):
        log_phi = log_plan - lin / config.gamma
        _check(log_phi, m)
        for _ in range(config.sinkhorn_sweeps):
            log_b = _normalize(log_phi + log_a[:, None], log_q, 0, "column", m)
            log_a = _normalize(log_phi + log_b[None, :], log_p, 1, "row", m)
        log_plan = log_a[:, None] + log_phi + log_b[None, :]
        plan = np.exp(log_plan)
        lin = cost_const - 2.0 * cs @ plan @ ct.T
        trace.append(_cost(lin, plan))
    return _result(source, target, cost_const, plan, trace)


def gwd_badmm(source: Graph, target: Graph, config: SolverConfig | None = None, feature_dist=None) -> SolverResult:
    """M-step Bregman ADMM approximation of the GW coupling.

    The plan is split into ``T`` (row marginals enforced) and ``S`` (column
    marginals enforced), tied together by the dual variable ``Z``. The
    returned coupling is ``T``; ``S`` and the primal residual ``|T - S|_1``
    are kept on the result for diagnostics.
    """
    config = config or SolverConfig(kind=SolverKind.BADMM)
    cost_const, cs, ct, p, q = _setup(source, target, config, feature_dist)
    plan = _initial_plan(p, q, config)
    log_p, log_q = _log(p), _log(q)
    log_plan = _log(plan)
    aux = plan
    dual = np.zeros_like(plan)
    gamma = config.gamma
    trace = [gw_cost(source, target, cost_const, plan)]
    cs_t = cs.T
    for m in range(config.inner_iters):
        log_phi1 = log_plan + (2.0 * cs_t @ plan @ ct + dual) / gamma
        _check(log_phi1, m)
        log_aux = log_phi1 + _normalize(log_phi1, log_q, 0, "column", m)[None, :]
        aux = np.exp(log_aux)
        log_phi2 = log_aux - (cost_const - 2.0 * cs @ aux @ ct.T + dual) / gamma
        _check(log_phi2, m)
        log_plan = log_phi2 + _normalize(log_phi2, log_p, 1, "row", m)[:, None]
        plan = np.exp(log_plan)
        dual = dual + gamma * (plan - aux)
        trace.append(gw_cost(source, target, cost_const, plan))
    residual = float(np.abs(plan - aux).sum())
    return _result(source, target, cost_const, plan, trace, primal_residual=residual, aux_plan=aux)


def gwd(source: Graph, target: Graph, config: SolverConfig | None = None, feature_dist=None) -> SolverResult:
    """Dispatch to the solver named by ``config.kind``."""
    config = config or SolverConfig()
    if config.kind is SolverKind.PPA:
        return gwd_ppa(source, target, config, feature_dist)
    return gwd_badmm(source, target, config, feature_dist)
