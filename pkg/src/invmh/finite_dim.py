"""Involutive kernels for densities on R^d: random walk, MALA, HMC with
quadratic / relativistic / position-dependent kinetic energies, and fully
parameterized surrogate-dynamics HMC.

Each constructor wires a proposal integrator, the matching auxiliary law and
the closed-form log Radon-Nikodym derivative into an
:class:`~invmh.core.InvolutiveKernel`.  For volume-preserving integrators the
log-RN is the energy difference ``H(z) - H(S(z))``; the general path adds the
numerically computed ``log |det grad S_hat|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    AuxiliaryKernel,
    ConfigurationError,
    ExtendedPoint,
    Involution,
    InvolutiveKernel,
    TargetPotential,
)
from .integrators import (
    DivergenceError,
    SurrogateField,
    leapfrog,
    momentum_flip,
    numerical_logdet_jacobian,
    palindromic_compose,
    stormer_verlet,
)

__all__ = [
    "HmcConfig",
    "JumpKinetic",
    "PositionMetric",
    "SamplerError",
    "gaussian_jump",
    "gaussian_momentum",
    "diagonal_quadratic_metric",
    "rwmc",
    "mala",
    "mala_log_accept_ratio",
    "hmc",
    "relativistic_hmc",
    "relativistic_kinetic",
    "relativistic_kinetic_grad",
    "rmhmc",
    "surrogate_hmc",
]


class SamplerError(RuntimeError):
    """An auxiliary sampler failed (e.g. rejection cap exhausted)."""


@dataclass(frozen=True)
class HmcConfig:
    """Step-size and trajectory-length parameters shared by the HMC-family
    constructors.

    ``delta`` sets the leapfrog pair ``(delta/2, delta)``; ``delta1`` and
    ``delta2`` override the kick and drift steps individually.  ``mass`` is
    a diagonal (1-d) or dense SPD (2-d) mass matrix, identity when omitted.
    """

    delta: float
    n: int = 1
    delta1: float | None = None
    delta2: float | None = None
    mass: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("number of integrator iterations must be >= 1")
        if self.delta1 is None and self.delta <= 0:
            raise ConfigurationError("step size delta must be positive")

    def steps(self) -> tuple[float, float]:
        d1 = self.delta / 2.0 if self.delta1 is None else self.delta1
        d2 = self.delta if self.delta2 is None else self.delta2
        return float(d1), float(d2)


class _Mass:
    """Factorized mass matrix: sampling via the factor, inverse application
    precomputed once."""

    def __init__(self, mass: np.ndarray | None, dim: int):
        self.dim = dim
        if mass is None:
            self.kind = "identity"
            return
        mass = np.asarray(mass, dtype=float)
        if mass.ndim == 1:
            if mass.shape != (dim,) or np.any(mass <= 0):
                raise ConfigurationError("diagonal mass must be positive with matching dimension")
            self.kind = "diagonal"
            self.diag = mass
            self.sqrt_diag = np.sqrt(mass)
        elif mass.ndim == 2:
            if mass.shape != (dim, dim):
                raise ConfigurationError("dense mass must be (d, d)")
            try:
                self.chol = np.linalg.cholesky(mass)
            except np.linalg.LinAlgError as exc:
                raise ConfigurationError("mass matrix is not positive definite") from exc
            self.kind = "dense"
            self.inv = np.linalg.inv(mass)
        else:
            raise ConfigurationError("mass must be a vector or a matrix")

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        xi = rng.standard_normal(self.dim)
        if self.kind == "identity":
            return xi
        if self.kind == "diagonal":
            return self.sqrt_diag * xi
        return self.chol @ xi

    def inv_apply(self, v: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return v
        if self.kind == "diagonal":
            return v / self.diag
        return self.inv @ v

    def half_quad(self, v: np.ndarray) -> float:
        return 0.5 * float(v @ self.inv_apply(v))


def gaussian_momentum(dim: int, mass: np.ndarray | None = None) -> AuxiliaryKernel:
    """Position-independent Gaussian momentum law N(0, M)."""
    m = _Mass(mass, dim)
    return AuxiliaryKernel(
        sample=lambda q, rng: m.sample(rng),
        log_density_terms=lambda q, v: -m.half_quad(v),
    )


def _energy_involution(
    hamiltonian: Callable[[ExtendedPoint], float],
    integrator: Callable[[ExtendedPoint], ExtendedPoint],
    logdet: Callable[[ExtendedPoint], float] | None = None,
) -> Involution:
    """Involution ``S = flip . integrator`` with energy-difference log-RN.

    ``logdet`` supplies ``log |det grad integrator|`` for schemes that are
    not certified volume-preserving.
    """

    def apply(z: ExtendedPoint) -> ExtendedPoint:
        return momentum_flip(integrator(z))

    def apply_and_log_rn(z: ExtendedPoint) -> tuple[ExtendedPoint, float]:
        image = apply(z)
        value = hamiltonian(z) - hamiltonian(image)
        if logdet is not None:
            value += logdet(z)
        return image, value

    return Involution(
        apply=apply,
        log_rn=lambda z: apply_and_log_rn(z)[1],
        apply_and_log_rn=apply_and_log_rn,
    )


# ---------------------------------------------------------------------------
# Random walk


@dataclass(frozen=True)
class JumpKinetic:
    """Jump law of the random walk: density proportional to exp(-kinetic)."""

    kinetic: Callable[[np.ndarray], float]
    sample: Callable[[np.random.Generator], np.ndarray]


def gaussian_jump(dim: int, scale=1.0) -> JumpKinetic:
    """Isotropic (or per-coordinate) Gaussian jump kinetic."""
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (dim,)).copy()
    if np.any(scale <= 0):
        raise ConfigurationError("jump scale must be positive")
    return JumpKinetic(
        kinetic=lambda v: 0.5 * float(np.sum((v / scale) ** 2)),
        sample=lambda rng: scale * rng.standard_normal(dim),
    )


def rwmc(
    target: TargetPotential,
    dim: int,
    jump: JumpKinetic | None = None,
    scale=1.0,
) -> InvolutiveKernel:
    """Random walk Metropolis via the involution ``S(q, v) = (q + v, -v)``.

    The acceptance ratio is
    ``1 ∧ exp(U(q) - U(q + v) + K(v) - K(-v))``; for symmetric jump kinetics
    the K terms cancel and the classical Metropolis rule remains.
    """
    if jump is None:
        jump = gaussian_jump(dim, scale)

    def apply(z: ExtendedPoint) -> ExtendedPoint:
        return ExtendedPoint(z.q + z.v, -z.v)

    def apply_and_log_rn(z: ExtendedPoint) -> tuple[ExtendedPoint, float]:
        image = apply(z)
        value = (
            target.eval(z.q)
            - target.eval(image.q)
            + jump.kinetic(z.v)
            - jump.kinetic(-z.v)
        )
        return image, value

    involution = Involution(
        apply=apply,
        log_rn=lambda z: apply_and_log_rn(z)[1],
        apply_and_log_rn=apply_and_log_rn,
    )
    aux = AuxiliaryKernel(
        sample=lambda q, rng: jump.sample(rng),
        log_density_terms=lambda q, v: -jump.kinetic(v),
    )
    return InvolutiveKernel(target=target, aux=aux, involution=involution, dim=dim, name="rwmc")


# ---------------------------------------------------------------------------
# MALA and HMC with quadratic kinetic energy


def _require_grad(target: TargetPotential) -> Callable[[np.ndarray], np.ndarray]:
    if target.grad is None:
        raise ConfigurationError("this sampler requires a target gradient")
    return target.grad


def _quadratic_hmc_kernel(
    target: TargetPotential, cfg: HmcConfig, dim: int, name: str
) -> InvolutiveKernel:
    grad = _require_grad(target)
    mass = _Mass(cfg.mass, dim)
    d1, d2 = cfg.steps()
    f1 = mass.inv_apply
    f2 = lambda q: -np.asarray(grad(q), dtype=float)

    def hamiltonian(z: ExtendedPoint) -> float:
        return target.eval(z.q) + mass.half_quad(z.v)

    involution = _energy_involution(
        hamiltonian, lambda z: leapfrog(cfg.n, d1, d2, f1, f2, z)
    )
    aux = AuxiliaryKernel(
        sample=lambda q, rng: mass.sample(rng),
        log_density_terms=lambda q, v: -mass.half_quad(v),
    )
    return InvolutiveKernel(target=target, aux=aux, involution=involution, dim=dim, name=name)


def mala(target: TargetPotential, delta: float, dim: int) -> InvolutiveKernel:
    """Metropolis-adjusted Langevin: one leapfrog step of the unit-mass
    Hamiltonian composed with the momentum flip.

    The proposal is the explicit Euler-Maruyama move
    ``q - (delta^2/2) grad U(q) + delta v`` with ``v ~ N(0, I)``, and the
    energy-difference acceptance coincides with the classical MALA ratio.
    """
    cfg = HmcConfig(delta=delta, n=1)
    return _quadratic_hmc_kernel(target, cfg, dim, name="mala")


def mala_log_accept_ratio(
    target: TargetPotential, delta: float, q: np.ndarray, q_tilde: np.ndarray
) -> float:
    """Classical MALA log acceptance ratio written in terms of the current
    and proposed positions (the two-argument Hastings form)."""
    grad = _require_grad(target)
    dsq = delta * delta
    forward = q_tilde - q + 0.5 * dsq * np.asarray(grad(q), dtype=float)
    backward = q - q_tilde + 0.5 * dsq * np.asarray(grad(q_tilde), dtype=float)
    return (
        target.eval(q)
        - target.eval(q_tilde)
        + float(forward @ forward) / (2.0 * dsq)
        - float(backward @ backward) / (2.0 * dsq)
    )


def hmc(target: TargetPotential, cfg: HmcConfig, dim: int) -> InvolutiveKernel:
    """Hamiltonian Monte Carlo with quadratic kinetic energy N(0, M).

    Leapfrog trajectories of ``H = U(q) + <M^{-1} v, v>/2``; since the
    integrator is volume-preserving and H is even in ``v``, the acceptance
    probability is ``1 ∧ exp(H(z) - H(S_hat(z)))``."""
    return _quadratic_hmc_kernel(target, cfg, dim, name="hmc")


# ---------------------------------------------------------------------------
# Relativistic kinetic energy


def relativistic_kinetic(m: float, c: float, v: np.ndarray) -> float:
    """``m c^2 sqrt(|v|^2 / (m^2 c^2) + 1)``; equals ``m c^2`` at rest."""
    r2 = float(np.sum(np.asarray(v) ** 2))
    return m * c * c * math.sqrt(r2 / (m * m * c * c) + 1.0)


def relativistic_kinetic_grad(m: float, c: float, v: np.ndarray) -> np.ndarray:
    """Gradient of the relativistic kinetic energy, an odd function of ``v``
    approaching ``v / m`` in the ``c -> inf`` limit."""
    v = np.asarray(v, dtype=float)
    r2 = float(np.sum(v**2))
    return v / (m * math.sqrt(r2 / (m * m * c * c) + 1.0))


def _relativistic_momentum_sampler(
    dim: int, m: float, c: float, max_attempts: int = 1000
) -> Callable[[np.random.Generator], np.ndarray]:
    """Exact sampler for the density 1/Z exp(-K(v)) by rejection.

    In terms of the radius, ``K = c sqrt(m^2 c^2 + r^2)``.  Envelope:
    uniform direction with Gamma(dim, 1/kappa) radius, kappa = c/sqrt(2).
    Since ``sqrt(a^2 + r^2) >= (a + r)/sqrt(2)``, the log ratio
    ``kappa r - c sqrt(m^2 c^2 + r^2)`` is maximized at ``r = m c`` with
    value ``-m c^2 / sqrt(2)``, giving an exact closed-form bound.
    """
    kappa = c / math.sqrt(2.0)
    log_bound = -m * c * c / math.sqrt(2.0)

    def sample(rng: np.random.Generator) -> np.ndarray:
        for _ in range(max_attempts):
            r = rng.gamma(dim, 1.0 / kappa)
            direction = rng.standard_normal(dim)
            norm = float(np.linalg.norm(direction))
            if norm == 0.0 or r == 0.0:
                continue
            log_accept = kappa * r - c * math.sqrt((m * c) ** 2 + r * r) - log_bound
            u = rng.uniform()
            if math.log(max(u, 1e-300)) < log_accept:
                return (r / norm) * direction
        raise SamplerError(
            f"relativistic momentum sampler exhausted {max_attempts} rejection attempts"
        )

    return sample


def relativistic_hmc(
    target: TargetPotential, m: float, c: float, cfg: HmcConfig, dim: int
) -> InvolutiveKernel:
    """HMC with the relativistic kinetic energy (bounded velocity field).

    The drift field is the kinetic gradient ``grad K``, an odd function, so
    the leapfrog stays momentum-flip reversible and the energy-difference
    acceptance applies with ``H = U + K``."""
    if m <= 0 or c <= 0:
        raise ConfigurationError("relativistic parameters m, c must be positive")
    grad = _require_grad(target)
    d1, d2 = cfg.steps()
    f1 = lambda v: relativistic_kinetic_grad(m, c, v)
    f2 = lambda q: -np.asarray(grad(q), dtype=float)

    def hamiltonian(z: ExtendedPoint) -> float:
        return target.eval(z.q) + relativistic_kinetic(m, c, z.v)

    involution = _energy_involution(
        hamiltonian, lambda z: leapfrog(cfg.n, d1, d2, f1, f2, z)
    )
    sampler = _relativistic_momentum_sampler(dim, m, c)
    aux = AuxiliaryKernel(
        sample=lambda q, rng: sampler(rng),
        log_density_terms=lambda q, v: -relativistic_kinetic(m, c, v),
    )
    return InvolutiveKernel(
        target=target, aux=aux, involution=involution, dim=dim, name="relativistic_hmc"
    )


# ---------------------------------------------------------------------------
# Riemannian-manifold HMC (position-dependent mass)


@dataclass(frozen=True)
class PositionMetric:
    """Position-dependent SPD mass matrix with the derivative terms the
    implicit integrator needs.

    ``matrix(q)`` returns either a positive vector (diagonal metric) or a
    dense SPD matrix.  ``grad_quad_form(q, v)`` is
    ``grad_q (1/2) <M(q)^{-1} v, v>`` and ``grad_half_logdet(q)`` is
    ``grad_q (1/2) log det M(q)``; no automatic differentiation is done.
    """

    matrix: Callable[[np.ndarray], np.ndarray]
    grad_quad_form: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_half_logdet: Callable[[np.ndarray], np.ndarray]


def diagonal_quadratic_metric() -> PositionMetric:
    """The metric ``M(q) = diag(1 + q_i^2)`` with analytic derivatives."""
    return PositionMetric(
        matrix=lambda q: 1.0 + q**2,
        grad_quad_form=lambda q, v: -(v**2) * q / (1.0 + q**2) ** 2,
        grad_half_logdet=lambda q: q / (1.0 + q**2),
    )


class _MetricOps:
    """Evaluate M(q) once and expose the solves the trajectory needs.

    Raises :class:`DivergenceError` when M(q) stops being SPD at a point
    visited by the integrator (the step is then rejected)."""

    def __init__(self, value: np.ndarray):
        value = np.asarray(value, dtype=float)
        if value.ndim == 1:
            if np.any(value <= 0) or not np.all(np.isfinite(value)):
                raise DivergenceError("metric lost positive definiteness")
            self.diag = value
            self.dense = None
        else:
            try:
                self.chol = np.linalg.cholesky(value)
            except np.linalg.LinAlgError as exc:
                raise DivergenceError("metric lost positive definiteness") from exc
            self.dense = value
            self.diag = None
            self.inv = np.linalg.inv(value)

    def inv_apply(self, v: np.ndarray) -> np.ndarray:
        if self.diag is not None:
            return v / self.diag
        return self.inv @ v

    def half_quad(self, v: np.ndarray) -> float:
        return 0.5 * float(v @ self.inv_apply(v))

    def half_logdet(self) -> float:
        if self.diag is not None:
            return 0.5 * float(np.sum(np.log(self.diag)))
        return float(np.sum(np.log(np.diag(self.chol))))

    def sample(self, rng: np.random.Generator, dim: int) -> np.ndarray:
        xi = rng.standard_normal(dim)
        if self.diag is not None:
            return np.sqrt(self.diag) * xi
        return self.chol @ xi


def rmhmc(
    target: TargetPotential,
    metric: PositionMetric,
    delta: float,
    n: int,
    dim: int,
) -> InvolutiveKernel:
    """Riemannian-manifold HMC: N(0, M(q)) momenta and the generalized
    Stormer-Verlet integrator for the non-separable dynamics.

    ``H = U(q) + <M(q)^{-1} v, v>/2 + log det M(q) / 2``; the implicit
    scheme is momentum-flip reversible and volume-preserving for this
    Hamiltonian structure, so the energy form of the acceptance applies.
    Implicit-solver failures and loss of positive definiteness along the
    trajectory reject the step.
    """
    grad = _require_grad(target)
    if delta <= 0 or n < 1:
        raise ConfigurationError("rmhmc requires delta > 0 and n >= 1")
    diagonal = np.asarray(metric.matrix(np.zeros(dim))).ndim == 1

    def f2(q: np.ndarray, v: np.ndarray) -> np.ndarray:
        return -(
            np.asarray(grad(q), dtype=float)
            + np.asarray(metric.grad_quad_form(q, v), dtype=float)
            + np.asarray(metric.grad_half_logdet(q), dtype=float)
        )

    if diagonal:
        # Fast path: the metric is a positive vector, all solves are
        # elementwise.  This is the hot loop of the implicit integrator.
        def _diag(q: np.ndarray) -> np.ndarray:
            m = np.asarray(metric.matrix(q), dtype=float)
            if not m.min() > 0:
                raise DivergenceError("metric lost positive definiteness")
            return m

        def f1(q: np.ndarray, v: np.ndarray) -> np.ndarray:
            return v / _diag(q)

        def hamiltonian(z: ExtendedPoint) -> float:
            m = _diag(z.q)
            return (
                target.eval(z.q)
                + 0.5 * float(np.sum(z.v**2 / m))
                + 0.5 * float(np.sum(np.log(m)))
            )

        def sample(q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
            try:
                m = _diag(q)
            except DivergenceError as exc:
                raise ConfigurationError(
                    "metric is not positive definite at the current state"
                ) from exc
            return np.sqrt(m) * rng.standard_normal(dim)

        def log_density_terms(q: np.ndarray, v: np.ndarray) -> float:
            m = _diag(q)
            return -0.5 * float(np.sum(v**2 / m)) - 0.5 * float(np.sum(np.log(m)))

    else:

        def f1(q: np.ndarray, v: np.ndarray) -> np.ndarray:
            return _MetricOps(metric.matrix(q)).inv_apply(v)

        def hamiltonian(z: ExtendedPoint) -> float:
            ops = _MetricOps(metric.matrix(z.q))
            return target.eval(z.q) + ops.half_quad(z.v) + ops.half_logdet()

        def sample(q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
            try:
                ops = _MetricOps(metric.matrix(q))
            except DivergenceError as exc:
                raise ConfigurationError(
                    "metric is not positive definite at the current state"
                ) from exc
            return ops.sample(rng, dim)

        def log_density_terms(q: np.ndarray, v: np.ndarray) -> float:
            ops = _MetricOps(metric.matrix(q))
            return -ops.half_quad(v) - ops.half_logdet()

    involution = _energy_involution(
        hamiltonian, lambda z: stormer_verlet(n, delta, f1, f2, z)
    )
    aux = AuxiliaryKernel(sample=sample, log_density_terms=log_density_terms)
    return InvolutiveKernel(target=target, aux=aux, involution=involution, dim=dim, name="rmhmc")


# ---------------------------------------------------------------------------
# Fully parameterized surrogate dynamics


def surrogate_hmc(
    target: TargetPotential,
    aux: AuxiliaryKernel,
    cfg: HmcConfig,
    f1=None,
    f2=None,
    fields: SurrogateField | None = None,
    scheme: str = "leapfrog",
    stages=None,
    volume_preserving: bool = True,
    dim: int | None = None,
    jacobian_cap: int = 10,
    name: str = "surrogate_hmc",
) -> InvolutiveKernel:
    """HMC-style kernel with arbitrary surrogate force fields.

    ``scheme`` selects the integrator: ``"leapfrog"`` (separable ``f1(v)``,
    ``f2(q)``), ``"stormer_verlet"`` (two-argument ``f1(q, v)``,
    ``f2(q, v)``) or ``"palindrome"`` (explicit ``stages`` of (flow, t),
    repeated ``cfg.n`` times).  Forces may be passed as bare callables, in
    which case the caller vouches for the parity of ``f1`` (odd for
    momentum-flip reversibility), or as a :class:`SurrogateField` whose
    declared parity is spot-checked at construction.

    With ``volume_preserving=True`` the acceptance uses the energy
    difference of ``H(q, v) = U(q) - aux.log_density_terms(q, v)``; the
    surrogate fields may then disagree with ``grad H`` arbitrarily, the
    accept-reject step corrects the bias.  Otherwise the Jacobian factor is
    computed by finite differences, which requires ``dim`` and
    ``2 * dim <= jacobian_cap``.
    """
    if fields is not None:
        if f1 is not None or f2 is not None:
            raise ConfigurationError("pass either fields or f1/f2, not both")
        f1, f2 = fields.f1, fields.f2
        if fields.f1_odd and dim is not None:
            if not fields.check_f1_odd(dim, np.random.default_rng(0)):
                raise ConfigurationError("declared parity f1(-v) = -f1(v) fails a spot check")
    d1, d2 = cfg.steps()
    if scheme == "leapfrog":
        if f1 is None or f2 is None:
            raise ConfigurationError("leapfrog scheme requires f1 and f2")
        integrator = lambda z: leapfrog(cfg.n, d1, d2, f1, f2, z)
    elif scheme == "stormer_verlet":
        if f1 is None or f2 is None:
            raise ConfigurationError("stormer_verlet scheme requires f1 and f2")
        integrator = lambda z: stormer_verlet(cfg.n, cfg.delta, f1, f2, z)
    elif scheme == "palindrome":
        if not stages:
            raise ConfigurationError("palindrome scheme requires stages")
        integrator = palindromic_compose(stages, n=cfg.n)
    else:
        raise ConfigurationError(f"unknown scheme {scheme!r}")

    def hamiltonian(z: ExtendedPoint) -> float:
        return target.eval(z.q) - aux.log_density_terms(z.q, z.v)

    logdet = None
    if not volume_preserving:
        if dim is None:
            raise ConfigurationError("the numerical-Jacobian path requires dim")
        if 2 * dim > jacobian_cap:
            raise ConfigurationError(
                f"dimension {dim} exceeds the Jacobian cap ({jacobian_cap} total coordinates)"
            )
        logdet = lambda z: numerical_logdet_jacobian(integrator, z, max_dim=jacobian_cap)

    involution = _energy_involution(hamiltonian, integrator, logdet=logdet)
    return InvolutiveKernel(target=target, aux=aux, involution=involution, dim=dim, name=name)
