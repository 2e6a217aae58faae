"""The backward (proximal) step: JKO operators per representation.

``jko_{gamma H}(nu) = argmin_mu H(mu) + W^2(mu, nu) / (2 gamma)``

Three realizations:

- Gaussian + negative entropy: closed form.  Stationarity with the affine
  Gaussian OT map gives ``s^2 - sigma s - gamma = 0`` per coordinate, so the
  output standard deviation is ``(sigma + sqrt(sigma^2 + 4 gamma)) / 2`` and
  the mean is unchanged.
- Quantile grid + {entropy, power entropy, zero}: the discretized problem is
  a strictly convex program in the quantile vector, solved by damped Newton
  with a tridiagonal Hessian.  The log/power barrier diverges on the
  monotonicity boundary, so feasibility-preserving damping converges
  globally.
- Particle cloud: the affine moment-matched update.  Exact only for Gaussian
  families; callers pairing it with a non-quadratic potential get a
  model-mismatch flag in the run report.

A solve that exhausts its iteration budget raises :class:`SolverFailure`
(this surfaces a prox-solvability violation rather than silently shrinking
the step size).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solveh_banded

from .functionals import InternalEnergy, Potential, quantile_energy_terms
from .measures import GaussianMeasure, ParticleCloud, QuantileMeasure, empirical_moments

__all__ = [
    "JkoReport",
    "SolverFailure",
    "jko_entropy_gaussian",
    "jko_quantile",
    "jko_backward_full",
    "jko_affine_particles",
    "DEFAULT_KKT_TOL",
    "DEFAULT_MAX_ITER",
]

DEFAULT_KKT_TOL = 1e-10
DEFAULT_MAX_ITER = 200


class SolverFailure(RuntimeError):
    """The proximal subproblem solver did not reach its tolerance."""


@dataclass(frozen=True)
class JkoReport:
    """Certificate for one proximal solve.

    ``kkt_residual`` is the max-norm of the stationarity condition; on
    success it certifies that the optimal transport map back to the input is
    the identity plus gamma times the energy subgradient.
    """

    iterations: int
    kkt_residual: float
    objective_decrease: float


def jko_entropy_gaussian(g: GaussianMeasure, gamma: float) -> GaussianMeasure:
    """Closed-form entropy JKO of a diagonal Gaussian."""
    if gamma <= 0:
        raise ValueError("step size must be positive")
    s = 0.5 * (g.std + np.sqrt(g.variances + 4.0 * gamma))
    return GaussianMeasure(g.mean.copy(), s * s)


def _energy_grad(H: InternalEnergy, q: np.ndarray) -> np.ndarray:
    """Gradient of the discretized internal energy w.r.t. the quantile vector."""
    m = q.size
    d = np.diff(q)
    g = np.zeros(m)
    if H.kind == "entropy":
        inv = 1.0 / (m * d)
        g[:-1] += inv
        g[1:] -= inv
    elif H.kind == "power":
        p = H.exponent
        t = (m * d) ** (-p)
        g[:-1] += t
        g[1:] -= t
    else:
        raise ValueError(f"no quantile gradient for energy kind {H.kind!r}")
    return g


def _energy_hess_banded(H: InternalEnergy, q: np.ndarray) -> np.ndarray:
    """Tridiagonal Hessian of the discretized energy, in banded (2, M) form."""
    m = q.size
    d = np.diff(q)
    if H.kind == "entropy":
        w = 1.0 / (m * d * d)
    else:
        p = H.exponent
        w = p * m * (m * d) ** (-p - 1.0)
    ab = np.zeros((2, m))
    ab[0, 1:] = -w            # superdiagonal
    ab[1, :-1] += w           # diagonal
    ab[1, 1:] += w
    return ab


def _solve_quantile_prox(
    H: InternalEnergy,
    nu: QuantileMeasure,
    gamma: float,
    tol: float,
    max_iter: int,
    F: Optional[Potential] = None,
) -> tuple[QuantileMeasure, JkoReport]:
    """Damped Newton on Phi(Q) = [E_F(Q)] + H(Q) + |Q - Qnu|^2 / (2 gamma M)."""
    if gamma <= 0:
        raise ValueError("step size must be positive")
    m = nu.m
    q_nu = nu.values

    def phi(q: np.ndarray) -> float:
        val = float(np.sum(quantile_energy_terms(H, q)))
        val += float(np.dot(q - q_nu, q - q_nu)) / (2.0 * gamma * m)
        if F is not None:
            val += float(np.mean(F.value(q[:, None] if F.kind == "quadratic" else q)))
        return val

    def grad(q: np.ndarray) -> np.ndarray:
        g = _energy_grad(H, q) + (q - q_nu) / (gamma * m)
        if F is not None:
            g = g + F.grad(q) / m
        return g

    def hess_banded(q: np.ndarray) -> np.ndarray:
        ab = _energy_hess_banded(H, q)
        ab[1] += 1.0 / (gamma * m)
        if F is not None:
            if F.kind == "quadratic":
                ab[1] += F.alpha[0] / m
            else:
                # central difference of the user gradient; diagonal term only
                h = 1e-6 * (1.0 + np.abs(q))
                ab[1] += np.maximum((F.grad(q + h) - F.grad(q - h)) / (2 * h), 0.0) / m
        return ab

    scale = max(1.0, float(np.abs(q_nu).max()))
    q = q_nu.copy()
    phi_start = phi(q)
    phi_cur = phi_start
    for it in range(max_iter + 1):
        g = grad(q)
        kkt = float(np.abs(g).max())
        if kkt <= tol * scale:
            report = JkoReport(iterations=it, kkt_residual=kkt,
                               objective_decrease=phi_start - phi_cur)
            return QuantileMeasure(q), report
        if it == max_iter:
            break
        step = solveh_banded(hess_banded(q), -g, lower=False)
        t = 1.0
        while True:
            q_new = q + t * step
            if np.all(np.diff(q_new) > 0):
                phi_new = phi(q_new)
                if phi_new <= phi_cur:
                    break
            t *= 0.5
            if t < 1e-18:
                raise SolverFailure("line search collapsed in quantile prox solve")
        q, phi_cur = q_new, phi_new
    raise SolverFailure(
        f"quantile prox solve did not reach tolerance in {max_iter} iterations "
        f"(kkt residual {kkt:.3e}, threshold {tol * scale:.3e})"
    )


def jko_quantile(
    H: InternalEnergy,
    nu: QuantileMeasure,
    gamma: float,
    tol: float = DEFAULT_KKT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[QuantileMeasure, JkoReport]:
    """Proximal step of the internal energy on a quantile grid.

    Minimizes ``H(Q) + sum_i (Q_i - Qnu_i)^2 / (2 gamma M)``; in quantile
    coordinates the fidelity term is exactly W^2/(2 gamma).  The KKT
    tolerance is relative to ``max(1, |Qnu|_inf)``.
    """
    if H.is_zero:
        if gamma <= 0:
            raise ValueError("step size must be positive")
        return nu, JkoReport(iterations=0, kkt_residual=0.0, objective_decrease=0.0)
    return _solve_quantile_prox(H, nu, gamma, tol, max_iter)


def jko_backward_full(
    F: Potential,
    H: InternalEnergy,
    nu: QuantileMeasure,
    gamma: float,
    tol: float = DEFAULT_KKT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[QuantileMeasure, JkoReport]:
    """JKO of the full objective G = E_F + H (all-backward baseline)."""
    if F.kind == "quadratic" and F.dim != 1:
        raise ValueError("quantile JKO is 1D")
    if F.strong_convexity < 0:
        raise ValueError("full backward step requires convex F")
    if H.is_zero and F.kind == "quadratic":
        # separable quadratic prox, node-wise closed form
        if gamma <= 0:
            raise ValueError("step size must be positive")
        a = F.alpha[0]
        c = F.anchor[0]
        q = (nu.values + gamma * a * c) / (1.0 + gamma * a)
        return (QuantileMeasure(q),
                JkoReport(iterations=0, kkt_residual=0.0, objective_decrease=0.0))
    if H.is_zero:
        raise ValueError("full backward step with zero energy needs a quadratic F")
    return _solve_quantile_prox(H, nu, gamma, tol, max_iter, F=F)


def jko_affine_particles(c: ParticleCloud, gamma: float) -> ParticleCloud:
    """Affine moment-matched entropy JKO of a particle cloud.

    Rescales each coordinate about its empirical mean so the empirical
    standard deviation follows the Gaussian closed form.  Exact only under
    the Gaussian-family assumption.
    """
    if gamma <= 0:
        raise ValueError("step size must be positive")
    mean, var = empirical_moments(c)
    if np.any(var <= 0):
        raise ValueError("zero empirical variance: affine step undefined")
    sd = np.sqrt(var)
    s = 0.5 * (sd + np.sqrt(var + 4.0 * gamma))
    pts = mean + (s / sd) * (c.points - mean)
    return ParticleCloud(pts)
