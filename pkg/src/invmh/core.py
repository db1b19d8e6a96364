"""Involutive Metropolis-Hastings kernels on extended phase space.

A kernel is the triple (target, auxiliary kernel, involution).  One step
samples an auxiliary variable ``v``, applies an involution ``S`` to the pair
``(q, v)`` and accepts the position part of the image with probability
``1 ∧ exp(log_rn)``, where ``log_rn`` is the log Radon-Nikodym derivative of
the pushforward of the extended measure under ``S`` with respect to itself.
Every sampler in this package is expressed in this form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "ConfigurationError",
    "IntegrationError",
    "ExtendedPoint",
    "TargetPotential",
    "AuxiliaryKernel",
    "Involution",
    "InvolutiveKernel",
    "StepResult",
    "ChainResult",
    "accept_prob",
    "mh_step",
    "run_chain",
    "involution_from_proposal_map",
    "generic_log_rn",
    "classic_mh_kernel",
    "mixture_step",
]


class ConfigurationError(ValueError):
    """A kernel or chain was assembled from inconsistent pieces."""


class IntegrationError(RuntimeError):
    """Base class for failures inside a proposal map (divergence, implicit
    solver breakdown).  Samplers convert these into rejections."""


class ExtendedPoint(NamedTuple):
    """A point ``(q, v)`` of the extended phase space."""

    q: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class TargetPotential:
    """Negative log unnormalized density of the measure being sampled.

    ``eval`` returns a finite value or ``+inf`` (zero density); it must never
    return NaN.  ``grad`` is optional and, where provided, should match finite
    differences of ``eval`` (validated by the test suite, not at runtime).
    """

    eval: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class AuxiliaryKernel:
    """The law of the auxiliary variable ``v`` given the position ``q``.

    ``sample(q, rng)`` draws one ``v``.  ``log_density_terms(q, v)`` is the
    contribution of the auxiliary law to the extended log-density: for
    finite-dimensional kernels the (unnormalized) conditional log-density of
    ``v`` given ``q``; for Hilbert-space kernels the log-density with respect
    to the Gaussian reference.  Constants independent of ``(q, v)`` may be
    dropped since only differences enter acceptance ratios.
    """

    sample: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    log_density_terms: Callable[[np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class Involution:
    """An involution of extended phase space with its log Radon-Nikodym
    derivative.

    ``apply(apply(z)) == z`` up to tolerance, and
    ``log_rn(z) + log_rn(apply(z)) == 0`` wherever both are finite.
    ``apply_and_log_rn``, when provided, computes both in one pass; chains use
    it to avoid integrating a trajectory twice per step.
    """

    apply: Callable[[ExtendedPoint], ExtendedPoint]
    log_rn: Callable[[ExtendedPoint], float]
    apply_and_log_rn: Callable[[ExtendedPoint], tuple[ExtendedPoint, float]] | None = None

    def step(self, z: ExtendedPoint) -> tuple[ExtendedPoint, float]:
        if self.apply_and_log_rn is not None:
            return self.apply_and_log_rn(z)
        return self.apply(z), self.log_rn(z)


@dataclass(frozen=True)
class InvolutiveKernel:
    """Immutable bundle defining one Metropolis step.

    ``dim``, when set, is the position dimension and is checked against the
    state passed to :func:`mh_step`.
    """

    target: TargetPotential
    aux: AuxiliaryKernel
    involution: Involution
    dim: int | None = None
    name: str = field(default="", compare=False)


@dataclass(frozen=True)
class StepResult:
    """Outcome of one Metropolis step.

    ``accepted`` implies ``next is proposal``; otherwise ``next`` is the
    input state.  ``proposal`` may carry non-finite entries when the proposal
    map diverged (such steps are always rejected).
    """

    proposal: np.ndarray
    alpha: float
    accepted: bool
    next: np.ndarray


def accept_prob(log_rn: float) -> float:
    """Acceptance probability ``1 ∧ exp(log_rn)``, computed in log space.

    NaN and ``-inf`` map to 0 (reject-on-undefined); any nonnegative input
    maps to 1 without overflow.
    """
    log_rn = float(log_rn)
    if math.isnan(log_rn):
        return 0.0
    if log_rn >= 0.0:
        return 1.0
    return math.exp(log_rn)


def mh_step(kernel: InvolutiveKernel, q: np.ndarray, rng: np.random.Generator) -> StepResult:
    """One involutive Metropolis-Hastings step from position ``q``.

    Consumes exactly one auxiliary draw and one uniform per call, regardless
    of the outcome, so chains are reproducible and replayable.  Integration
    failures inside the involution are converted into rejections.
    """
    q = np.asarray(q, dtype=float)
    if kernel.dim is not None and q.shape != (kernel.dim,):
        raise ConfigurationError(
            f"state has shape {q.shape}, kernel expects ({kernel.dim},)"
        )
    v = kernel.aux.sample(q, rng)
    z = ExtendedPoint(q, np.asarray(v, dtype=float))
    # Overflow inside a proposal map produces inf/nan and a rejection, not a
    # crash; suppress the noise accordingly.
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            image, log_rn = kernel.involution.step(z)
            proposal = np.asarray(image.q, dtype=float)
            alpha = accept_prob(log_rn)
        except IntegrationError:
            proposal = q
            alpha = 0.0
    if not np.all(np.isfinite(proposal)):
        alpha = 0.0
    u = rng.uniform()
    accepted = u < alpha
    return StepResult(
        proposal=proposal,
        alpha=alpha,
        accepted=accepted,
        next=proposal if accepted else q,
    )


@dataclass(frozen=True)
class ChainResult:
    """A realized chain: ``positions[0]`` is the start, ``positions[k + 1]``
    the state after step ``k``; ``alphas[k]`` / ``accepted[k]`` summarize
    step ``k``."""

    positions: np.ndarray
    alphas: np.ndarray
    accepted: np.ndarray

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if self.accepted.size else 0.0

    def __len__(self) -> int:
        return self.positions.shape[0]


def run_chain(
    kernel: InvolutiveKernel,
    q0: np.ndarray,
    n_steps: int,
    rng: np.random.Generator,
) -> ChainResult:
    """Run ``n_steps`` Metropolis steps from ``q0``.

    Deterministic given (kernel, q0, rng state).  The starting point must
    have finite potential.
    """
    if n_steps < 0:
        raise ConfigurationError("n_steps must be nonnegative")
    q = np.asarray(q0, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        start_value = kernel.target.eval(q)
    if not np.isfinite(start_value):
        raise ConfigurationError("chain started at a point of zero target density")
    d = q.shape[0]
    positions = np.empty((n_steps + 1, d))
    alphas = np.empty(n_steps)
    accepted = np.zeros(n_steps, dtype=bool)
    positions[0] = q
    for k in range(n_steps):
        result = mh_step(kernel, q, rng)
        q = result.next
        positions[k + 1] = q
        alphas[k] = result.alpha
        accepted[k] = result.accepted
    return ChainResult(positions=positions, alphas=alphas, accepted=accepted)


def involution_from_proposal_map(
    proposal_map: Callable[[np.ndarray, np.ndarray], np.ndarray],
    invert_in_v: Callable[[np.ndarray, np.ndarray], np.ndarray],
) -> Callable[[ExtendedPoint], ExtendedPoint]:
    """Build the unique involution with position part ``proposal_map``.

    ``proposal_map(q, v)`` must be one-to-one in ``v`` for each ``q`` and
    ``invert_in_v(q, q_new)`` must return the ``v`` with
    ``proposal_map(q, v) == q_new``.  The returned map is
    ``S(q, v) = (F(q, v), F(F(q, v), .)^{-1}(q))``; inconsistent inputs are
    only detectable through the involution property itself.
    """

    def apply(z: ExtendedPoint) -> ExtendedPoint:
        q_new = np.asarray(proposal_map(z.q, z.v), dtype=float)
        v_new = np.asarray(invert_in_v(q_new, z.q), dtype=float)
        return ExtendedPoint(q_new, v_new)

    return apply


def generic_log_rn(
    ext_log_density: Callable[[np.ndarray, np.ndarray], float],
    apply_s: Callable[[ExtendedPoint], ExtendedPoint],
    z: ExtendedPoint,
    max_dim: int = 10,
) -> float:
    """Brute-force log Radon-Nikodym derivative of ``S`` pushforward.

    Evaluates ``log rho(S(z)) - log rho(z) + log |det grad S(z)|`` with the
    Jacobian obtained by central finite differences.  This is the oracle
    against which every closed-form ``log_rn`` in the package is checked; it
    is restricted to flattened dimension ``<= max_dim``.
    """
    from .integrators import numerical_logdet_jacobian

    image = apply_s(z)
    forward = ext_log_density(image.q, image.v)
    backward = ext_log_density(z.q, z.v)
    if not math.isfinite(forward) or not math.isfinite(backward):
        # Zero-density endpoints: the ratio alone decides (Jacobian moot).
        return forward - backward
    logdet = numerical_logdet_jacobian(apply_s, z, max_dim=max_dim)
    return forward - backward + logdet


def classic_mh_kernel(
    log_p: Callable[[np.ndarray], float],
    log_proposal_density: Callable[[np.ndarray, np.ndarray], float],
    proposal_sampler: Callable[[np.ndarray, np.random.Generator], np.ndarray],
    dim: int | None = None,
) -> InvolutiveKernel:
    """Classical Metropolis-Hastings as an involutive kernel.

    The auxiliary space is a copy of the state space, the involution is the
    swap ``S(q, v) = (v, q)``, and the acceptance probability reduces to the
    Hastings ratio ``1 ∧ [p(v) s(v, q)] / [p(q) s(q, v)]`` where ``s`` is the
    proposal density (supplied in log form).
    """

    def log_rn(z: ExtendedPoint) -> float:
        forward = log_p(z.v) + log_proposal_density(z.v, z.q)
        backward = log_p(z.q) + log_proposal_density(z.q, z.v)
        return forward - backward

    involution = Involution(
        apply=lambda z: ExtendedPoint(z.v, z.q),
        log_rn=log_rn,
    )
    return InvolutiveKernel(
        target=TargetPotential(eval=lambda q: -float(log_p(q))),
        aux=AuxiliaryKernel(
            sample=proposal_sampler,
            log_density_terms=lambda q, v: float(log_proposal_density(q, v)),
        ),
        involution=involution,
        dim=dim,
        name="classic_mh",
    )


def mixture_step(
    kernels: Sequence[InvolutiveKernel],
    weights: Callable[[np.ndarray], np.ndarray],
    q: np.ndarray,
    rng: np.random.Generator,
) -> StepResult:
    """One step of the state-dependent mixture of involutive kernels.

    A component ``j`` is drawn from ``weights(q)``; its acceptance ratio
    carries the extra factor ``weights(q_new)[j] / weights(q)[j]`` so that
    the compound kernel stays reversible.  Constant weights reduce to the
    plain per-kernel step.
    """
    if len(kernels) == 0:
        raise ConfigurationError("mixture requires at least one kernel")
    q = np.asarray(q, dtype=float)
    w = np.asarray(weights(q), dtype=float)
    if w.shape != (len(kernels),) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ConfigurationError("weights(q) must be a probability vector over the kernels")
    j = int(rng.choice(len(kernels), p=w))
    kernel = kernels[j]
    v = kernel.aux.sample(q, rng)
    z = ExtendedPoint(q, np.asarray(v, dtype=float))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        try:
            image, log_rn = kernel.involution.step(z)
            proposal = np.asarray(image.q, dtype=float)
            w_prop = np.asarray(weights(proposal), dtype=float)[j]
            log_kappa_ratio = np.log(w_prop) - np.log(w[j])
            alpha = accept_prob(log_rn + float(log_kappa_ratio))
        except IntegrationError:
            proposal = q
            alpha = 0.0
    if not np.all(np.isfinite(proposal)):
        alpha = 0.0
    u = rng.uniform()
    accepted = u < alpha
    return StepResult(
        proposal=proposal,
        alpha=alpha,
        accepted=accepted,
        next=proposal if accepted else q,
    )
