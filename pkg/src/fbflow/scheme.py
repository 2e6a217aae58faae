"""Iteration engines: the forward-backward scheme and its baselines.

One step of the forward-backward (FB) scheme is

    nu    = (I - gamma grad F) # mu        (forward / gradient half-step)
    mu'   = jko_{gamma H}(nu)              (backward / proximal half-step)

Baselines share the same driver:

- ``forward``: pure forward Euler, valid only for zero internal energy;
- ``lmc``: gradient step followed by exact heat flow (Gaussian noise on
  particles, variance recursion in closed form on Gaussians) -- the
  unadjusted Langevin iteration, kept as a biased comparison point;
- ``backward``: full JKO of E_F + H on the quantile grid.

Every run with ``gamma >= 1/L`` is rejected outright: all convergence
guarantees and diagnostics assume ``gamma < 1/L``, and the one demonstration
that needs to cross the threshold (loss of monotonicity of the forward map)
goes through :func:`forward_map_values` which applies no guard.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import jko as _jko
from .functionals import (
    InternalEnergy,
    Potential,
    energy_value,
    objective,
    potential_energy,
)
from .measures import (
    GaussianMeasure,
    ParticleCloud,
    QuantileMeasure,
    empirical_moments,
    gaussian_to_quantile,
    make_rng,
)
from .wasserstein import w2_gaussian, w2_quantile

__all__ = [
    "SchemeConfig",
    "TrajectoryRecord",
    "TrajectoryLog",
    "forward_map_values",
    "forward_step",
    "forward_euler_step",
    "fb_step",
    "lmc_step",
    "run",
]

Measure = Union[GaussianMeasure, QuantileMeasure, ParticleCloud]

SCHEME_KINDS = ("fb", "forward", "lmc", "backward")
REPRESENTATIONS = ("gaussian", "quantile", "particles")


def forward_map_values(F: Potential, gamma: float, x: np.ndarray) -> np.ndarray:
    """Raw values of the forward map ``x - gamma F'(x)`` on a 1D grid.

    No step-size guard: this is the probe used to show the map stops being
    monotone (hence stops being an OT map) once ``gamma`` exceeds ``1/L``.
    """
    x = np.asarray(x, dtype=float)
    return x - gamma * F.grad(x)


def _check_step_size(F: Potential, gamma: float, allow_unstable: bool = False):
    if gamma <= 0:
        raise ValueError("step size must be positive")
    if not allow_unstable and gamma >= 1.0 / F.L:
        raise ValueError(
            f"step size {gamma} violates gamma < 1/L = {1.0 / F.L}; "
            "all guarantees assume the strict inequality"
        )


def forward_step(F: Potential, gamma: float, mu: Measure,
                 allow_unstable: bool = False) -> Measure:
    """Pushforward of ``mu`` by ``I - gamma grad F``.

    Exact per representation: affine image for Gaussians with a quadratic
    potential, pointwise for particles, node-wise for quantiles (the map has
    derivative >= 1 - gamma L > 0, so node values stay strictly increasing).
    """
    _check_step_size(F, gamma, allow_unstable)
    if isinstance(mu, GaussianMeasure):
        if F.kind != "quadratic":
            raise ValueError("Gaussian forward step needs a quadratic potential")
        mean = mu.mean - gamma * F.alpha * (mu.mean - F.anchor)
        factor = 1.0 - gamma * F.alpha
        return GaussianMeasure(mean, (factor * mu.std) ** 2)
    if isinstance(mu, QuantileMeasure):
        return QuantileMeasure(forward_map_values(F, gamma, mu.values))
    if isinstance(mu, ParticleCloud):
        return ParticleCloud(mu.points - gamma * F.grad(mu.points))
    raise TypeError(f"unsupported measure type {type(mu).__name__}")


def forward_euler_step(F: Potential, H: InternalEnergy, gamma: float,
                       mu: Measure) -> Measure:
    """Forward Euler step for the whole objective; only valid when H = 0."""
    if not H.is_zero:
        raise ValueError(
            "forward Euler requires zero internal energy: the entropy's "
            "Wasserstein gradient is not pointwise-evaluable here"
        )
    return forward_step(F, gamma, mu)


def fb_step(
    F: Potential,
    H: InternalEnergy,
    gamma: float,
    mu: Measure,
    jko_tol: float = _jko.DEFAULT_KKT_TOL,
    jko_max_iter: int = _jko.DEFAULT_MAX_ITER,
) -> tuple[Measure, Measure]:
    """One forward-backward step; returns the intermediate ``nu`` and the
    new iterate (the intermediate feeds the half-step diagnostics)."""
    nu = forward_step(F, gamma, mu)
    if H.is_zero:
        return nu, nu
    if isinstance(nu, GaussianMeasure):
        if H.kind != "entropy":
            raise ValueError("Gaussian backward step is closed-form only for entropy")
        return nu, _jko.jko_entropy_gaussian(nu, gamma)
    if isinstance(nu, QuantileMeasure):
        out, _ = _jko.jko_quantile(H, nu, gamma, tol=jko_tol, max_iter=jko_max_iter)
        return nu, out
    if isinstance(nu, ParticleCloud):
        if H.kind != "entropy":
            raise ValueError("particle backward step supports only entropy")
        return nu, _jko.jko_affine_particles(nu, gamma)
    raise TypeError(f"unsupported measure type {type(nu).__name__}")


def lmc_step(F: Potential, gamma: float, mu: Measure,
             rng: Optional[np.random.Generator] = None) -> Measure:
    """Gradient step plus exact heat flow (the unadjusted Langevin update)."""
    _check_step_size(F, gamma)
    if isinstance(mu, GaussianMeasure):
        if F.kind != "quadratic":
            raise ValueError("Gaussian LMC step needs a quadratic potential")
        mean = mu.mean - gamma * F.alpha * (mu.mean - F.anchor)
        var = (1.0 - gamma * F.alpha) ** 2 * mu.variances + 2.0 * gamma
        return GaussianMeasure(mean, var)
    if isinstance(mu, ParticleCloud):
        if rng is None:
            raise ValueError("particle LMC needs an explicit generator")
        noise = rng.standard_normal(mu.points.shape)
        pts = mu.points - gamma * F.grad(mu.points) + np.sqrt(2.0 * gamma) * noise
        return ParticleCloud(pts)
    raise TypeError("LMC supports Gaussian and particle representations")


@dataclass(frozen=True)
class SchemeConfig:
    """Everything needed to reproduce a run.

    ``target`` is the measure the trajectory is compared against; pass the
    Gibbs measure for quadratic potential + entropy, or None when no ground
    truth is known (then W^2 and gap columns stay empty).
    """

    kind: str
    gamma: float
    n_iters: int
    potential: Potential
    energy: InternalEnergy
    initial: Measure
    target: Optional[GaussianMeasure] = None
    seed: int = 0
    snapshot_every: int = 10
    jko_tol: float = _jko.DEFAULT_KKT_TOL
    jko_max_iter: int = _jko.DEFAULT_MAX_ITER

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.n_iters < 1:
            raise ValueError("n_iters must be >= 1")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if self.kind == "backward":
            if self.gamma <= 0:
                raise ValueError("step size must be positive")
            if not isinstance(self.initial, QuantileMeasure):
                raise ValueError("backward scheme runs on the quantile grid")
        else:
            _check_step_size(self.potential, self.gamma)
        if self.kind == "forward" and not self.energy.is_zero:
            raise ValueError("forward scheme requires zero internal energy")
        if self.kind == "lmc" and self.energy.kind != "entropy":
            raise ValueError("LMC targets the entropy flow; energy must be entropy")

    @property
    def representation(self) -> str:
        if isinstance(self.initial, GaussianMeasure):
            return "gaussian"
        if isinstance(self.initial, QuantileMeasure):
            return "quantile"
        return "particles"


@dataclass(frozen=True)
class TrajectoryRecord:
    """Per-iteration summary, plus full states on snapshot iterations."""

    n: int
    mean: np.ndarray
    variance: np.ndarray
    w2_to_target: Optional[float]
    objective: Optional[float]
    measure: Optional[Measure] = None
    nu: Optional[Measure] = None


@dataclass
class TrajectoryLog:
    """Record of a run; ``error`` is set when a step aborted the run."""

    config: SchemeConfig
    records: list[TrajectoryRecord] = field(default_factory=list)
    target_in_rep: Optional[Measure] = None
    model_mismatch: bool = False
    error: Optional[str] = None

    def w2_series(self) -> np.ndarray:
        return np.array([np.nan if r.w2_to_target is None else r.w2_to_target
                         for r in self.records])

    def objective_series(self) -> np.ndarray:
        return np.array([np.nan if r.objective is None else r.objective
                         for r in self.records])

    def measures(self) -> list[Measure]:
        """Full iterates; raises if the snapshot policy dropped any."""
        out = []
        for r in self.records:
            if r.measure is None:
                raise ValueError(
                    "full state missing at iteration "
                    f"{r.n}; rerun with snapshot_every=1"
                )
            out.append(r.measure)
        return out

    def intermediates(self) -> list[Measure]:
        """Forward half-step states nu_1..nu_N; raises when missing."""
        out = []
        for r in self.records[1:]:
            if r.nu is None:
                raise ValueError(
                    f"intermediate state missing at iteration {r.n}; "
                    "rerun with snapshot_every=1 and an fb scheme"
                )
            out.append(r.nu)
        return out


def _summaries(mu: Measure) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(mu, GaussianMeasure):
        return mu.mean.copy(), mu.variances.copy()
    if isinstance(mu, QuantileMeasure):
        return np.array([mu.mean()]), np.array([mu.variance()])
    return empirical_moments(mu)


def _w2_to_target(mu: Measure, target: Measure) -> float:
    if isinstance(mu, GaussianMeasure):
        return w2_gaussian(mu, target)
    if isinstance(mu, QuantileMeasure):
        return w2_quantile(mu, target)
    # Gaussian-family estimate for particle clouds: moment-matched closed
    # form, consistent with the affine particle implementation.
    mean, var = empirical_moments(mu)
    return w2_gaussian(GaussianMeasure(mean, var), target)


def _objective_value(F: Potential, H: InternalEnergy, mu: Measure) -> Optional[float]:
    if isinstance(mu, (GaussianMeasure, QuantileMeasure)):
        try:
            return objective(F, H, mu)
        except ValueError:
            return None
    # particles: exact potential average plus a Gaussian-moment estimate of
    # the internal energy (the affine scheme keeps the cloud in that family)
    try:
        pot = potential_energy(F, mu)
    except ValueError:
        return None
    if H.is_zero:
        return pot
    if H.kind != "entropy":
        return None
    mean, var = empirical_moments(mu)
    return pot + energy_value(H, GaussianMeasure(mean, var))


def _resolve_target(config: SchemeConfig) -> Optional[Measure]:
    if config.target is None:
        return None
    if config.representation == "quantile":
        return gaussian_to_quantile(config.target, config.initial.m)
    return config.target


def run(config: SchemeConfig) -> TrajectoryLog:
    """Execute the configured scheme and log every iterate.

    Deterministic given the seed.  A proximal solver failure aborts the run
    with the partial log preserved and the error recorded on the log.
    """
    F, H, gamma = config.potential, config.energy, config.gamma
    target = _resolve_target(config)
    log = TrajectoryLog(config=config, target_in_rep=target)
    log.model_mismatch = (
        config.representation == "particles"
        and config.kind == "fb"
        and not H.is_zero
        and F.kind != "quadratic"
    )
    rng = make_rng(config.seed)
    full_every = 1 if config.representation == "gaussian" else config.snapshot_every

    mu = config.initial

    def record(n: int, mu: Measure, nu: Optional[Measure]):
        mean, var = _summaries(mu)
        keep = (n % full_every == 0) or (n == config.n_iters)
        log.records.append(TrajectoryRecord(
            n=n,
            mean=mean,
            variance=var,
            w2_to_target=None if target is None else _w2_to_target(mu, target),
            objective=_objective_value(F, H, mu),
            measure=mu if keep else None,
            nu=nu if keep else None,
        ))

    record(0, mu, None)
    for n in range(1, config.n_iters + 1):
        try:
            if config.kind == "fb":
                nu, mu = fb_step(F, H, gamma, mu,
                                 jko_tol=config.jko_tol,
                                 jko_max_iter=config.jko_max_iter)
            elif config.kind == "forward":
                mu = forward_euler_step(F, H, gamma, mu)
                nu = mu
            elif config.kind == "lmc":
                mu = lmc_step(F, gamma, mu, rng=rng)
                nu = None
            else:  # backward
                mu, _ = _jko.jko_backward_full(
                    F, H, mu, gamma,
                    tol=config.jko_tol, max_iter=config.jko_max_iter)
                nu = None
        except _jko.SolverFailure as exc:
            log.error = f"iteration {n}: {exc}"
            break
        record(n, mu, nu)
    return log
