"""Every guarantee of the scheme, checked numerically on one trajectory.

The diagnostics module turns each inequality the scheme satisfies into a
per-iteration residual that must stay nonpositive: objective descent, the
discrete evolution variational inequality (full and both half-steps), the
sublinear and linear rates, convexity of the entropy along generalized
geodesics, and the sharper descent bound with the gradient-mapping norm.

Run:  python3 demos/inequality_checks.py
"""

from fbflow import (
    GaussianMeasure,
    InternalEnergy,
    Potential,
    SchemeConfig,
    diagnostics,
    gaussian_to_quantile,
    gibbs_target,
    make_rng,
    run,
)

F = Potential.diagonal_quadratic([1.0])
H = InternalEnergy.negative_entropy()
target = gibbs_target(F)


def show(report):
    print(f"  {report.name:<22} {'ok' if report.passed else 'VIOLATED':<9}"
          f"worst residual {report.worst:+.3e}  (tol {report.tolerance:.1e})")


print("closed-form Gaussian run, 60 iterations:")
log = run(SchemeConfig(kind="fb", gamma=0.1, n_iters=60, potential=F,
                       energy=H, initial=GaussianMeasure([10.0], [100.0**2]),
                       target=target))
show(diagnostics.descent_check(log))
show(diagnostics.evi_check(log, target, lam=F.lam))
prox, grad = diagnostics.half_step_evi_checks(log, target, lam=F.lam)
show(prox)
show(grad)
show(diagnostics.rate_check_convex(log))
strong, rho = diagnostics.rate_check_strongly_convex(log, lam=F.lam)
show(strong)
print(f"  fitted contraction     {rho:.4f}  (bound {1 - 0.1 * F.lam})")

print("\nsame run on the quantile grid (M = 1024):")
qlog = run(SchemeConfig(
    kind="fb", gamma=0.1, n_iters=60, potential=F, energy=H,
    initial=gaussian_to_quantile(GaussianMeasure([10.0], [100.0**2]), 1024),
    target=target, snapshot_every=1))
show(diagnostics.descent_check(qlog))
show(diagnostics.evi_check(qlog, target, lam=F.lam))
sharp, g_norm = diagnostics.descent_residual_1d(qlog)
show(sharp)
print(f"  gradient-mapping norm  {g_norm[0]:.3e} -> {g_norm[-1]:.3e}")

print("\nentropy along generalized geodesics (10 random grid triples):")
rng = make_rng(11)


def rand_grid():
    g = GaussianMeasure([rng.uniform(-3, 3)], [rng.uniform(0.3, 4.0)])
    return gaussian_to_quantile(g, 1024)


worst = max(
    diagnostics.geodesic_convexity_probe(H, rand_grid(), rand_grid(),
                                         rand_grid()).worst
    for _ in range(10))
print(f"  convexity residual     worst {worst:+.3e}  (must be <= 0)")
