"""Configuration-driven experiment runner.

Commands:

- ``fbflow run <config>``: execute one scheme, write a trajectory CSV, print
  a one-line summary.
- ``fbflow compare <config>``: run several schemes against the same problem,
  write a side-by-side CSV with a final stationary-bias row.
- ``fbflow validate [--scope <name>]``: run the inequality diagnostics
  battery end to end; nonzero exit iff a check fails.
- ``fbflow presets``: list the built-in experiment presets.

Config files are flat ``key = value`` text, one assignment per line, ``#``
comments allowed.  Unknown keys are rejected.  Recognized keys::

    scheme          fb | forward | lmc | backward
    schemes         comma list, compare command only
    representation  gaussian | quantile | particles
    potential.kind  quadratic
    potential.alpha scalar or comma list of per-coordinate curvatures
    potential.anchor scalar or comma list
    energy          entropy | power:<m> | zero
    gamma           step size
    iters           iteration count
    dim             ambient dimension
    particles.n     cloud size (particles representation)
    quantile.m      grid node count (quantile representation)
    init.mean       initial Gaussian mean (scalar, broadcast over dim)
    init.std        initial Gaussian standard deviation
    target          auto | none | <mean>,<variance>
    seed            RNG seed
    snapshot_every  full-state logging stride
    out_path        CSV destination

Exit codes: 0 success, 1 failed validation check, 2 config parse error,
3 precondition violation, 4 solver failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import diagnostics as diag
from .functionals import InternalEnergy, Potential, gibbs_target, objective
from .jko import SolverFailure, jko_entropy_gaussian, jko_quantile
from .measures import (
    GaussianMeasure,
    gaussian_to_quantile,
    make_rng,
    sample_gaussian,
)
from .scheme import SchemeConfig, TrajectoryLog, forward_map_values, run
from .wasserstein import check_monotone, ot_map_1d, w2_gaussian, w2_quantile

__all__ = ["main", "PRESETS", "parse_config", "build_scheme_config", "write_trajectory_csv"]


class ConfigError(ValueError):
    """Malformed configuration file."""


_KNOWN_KEYS = {
    "scheme", "schemes", "representation", "potential.kind", "potential.alpha",
    "potential.anchor", "energy", "gamma", "iters", "dim", "particles.n",
    "quantile.m", "init.mean", "init.std", "target", "seed", "snapshot_every",
    "out_path",
}

_DEFAULTS = {
    "scheme": "fb",
    "representation": "gaussian",
    "potential.kind": "quadratic",
    "potential.alpha": "1",
    "potential.anchor": "0",
    "energy": "entropy",
    "gamma": "0.1",
    "iters": "200",
    "dim": "1",
    "particles.n": "100000",
    "quantile.m": "4096",
    "init.mean": "0",
    "init.std": "1",
    "target": "auto",
    "seed": "0",
    "snapshot_every": "1",
    "out_path": "trajectory.csv",
}

PRESETS = {
    "paper-sec5": {
        "scheme": "fb", "representation": "gaussian", "energy": "entropy",
        "gamma": "0.1", "iters": "200", "dim": "1",
        "init.mean": "10", "init.std": "100", "target": "auto",
        "out_path": "paper-sec5.csv",
    },
    "paper-sec5-quantile": {
        "scheme": "fb", "representation": "quantile", "energy": "entropy",
        "gamma": "0.1", "iters": "200", "dim": "1", "quantile.m": "4096",
        "init.mean": "10", "init.std": "100", "target": "auto",
        "out_path": "paper-sec5-quantile.csv",
    },
    "paper-sec5-particles": {
        "scheme": "fb", "representation": "particles", "energy": "entropy",
        "gamma": "0.1", "iters": "200", "dim": "1", "particles.n": "100000",
        "init.mean": "10", "init.std": "100", "target": "auto", "seed": "42",
        "out_path": "paper-sec5-particles.csv",
    },
    "paper-appendix-d1000": {
        "scheme": "fb", "representation": "gaussian", "energy": "entropy",
        "gamma": "0.1", "iters": "200", "dim": "1000",
        "init.mean": "10", "init.std": "100", "target": "auto",
        "out_path": "paper-appendix-d1000.csv",
    },
}

PRESET_NOTES = {
    "paper-sec5": "1D Gaussian FB run: quadratic potential, entropy, "
                  "gamma=0.1, start N(10, 100^2), target N(0, 1)",
    "paper-sec5-quantile": "same run on the quantile grid, M=4096",
    "paper-sec5-particles": "same run with 10^5 particles, seed 42",
    "paper-appendix-d1000": "product-Gaussian run in dimension 1000",
}


def parse_config(text: str) -> dict[str, str]:
    """Parse the flat key=value grammar; unknown keys are rejected."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        out[key] = value
    return out


def _floats(value: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in value.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {value!r}") from exc


def _int(cfg: dict, key: str) -> int:
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"bad integer for {key!r}: {cfg[key]!r}") from exc


def _float(cfg: dict, key: str) -> float:
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"bad number for {key!r}: {cfg[key]!r}") from exc


def _build_energy(spec: str) -> InternalEnergy:
    if spec == "entropy":
        return InternalEnergy.negative_entropy()
    if spec == "zero":
        return InternalEnergy.zero()
    if spec.startswith("power:"):
        try:
            return InternalEnergy.power(float(spec.split(":", 1)[1]))
        except ValueError as exc:
            raise ConfigError(f"bad power energy {spec!r}") from exc
    raise ConfigError(f"unknown energy {spec!r}")


def build_scheme_config(cfg: dict[str, str],
                        scheme_override: Optional[str] = None) -> SchemeConfig:
    """Turn a parsed config mapping into a validated SchemeConfig."""
    merged = dict(_DEFAULTS)
    merged.update(cfg)
    dim = _int(merged, "dim")
    if dim < 1:
        raise ConfigError("dim must be >= 1")

    if merged["potential.kind"] != "quadratic":
        raise ConfigError("config files support only the quadratic potential")
    alpha = _floats(merged["potential.alpha"])
    anchor = _floats(merged["potential.anchor"])
    if alpha.size == 1:
        alpha = np.full(dim, alpha[0])
    if anchor.size == 1:
        anchor = np.full(dim, anchor[0])
    if alpha.size != dim or anchor.size != dim:
        raise ConfigError("potential.alpha/anchor must be scalar or length dim")
    potential = Potential.diagonal_quadratic(alpha, anchor)

    energy = _build_energy(merged["energy"])

    init = GaussianMeasure(np.full(dim, _float(merged, "init.mean")),
                           np.full(dim, _float(merged, "init.std") ** 2))

    target_spec = merged["target"]
    if target_spec == "auto":
        target = gibbs_target(potential) if energy.kind == "entropy" else None
    elif target_spec == "none":
        target = None
    else:
        parts = _floats(target_spec)
        if parts.size != 2:
            raise ConfigError("explicit target must be '<mean>,<variance>'")
        target = GaussianMeasure(np.full(dim, parts[0]), np.full(dim, parts[1]))

    representation = merged["representation"]
    seed = _int(merged, "seed")
    if representation == "gaussian":
        initial = init
    elif representation == "quantile":
        if dim != 1:
            raise ConfigError("quantile representation is 1D")
        initial = gaussian_to_quantile(init, _int(merged, "quantile.m"))
    elif representation == "particles":
        initial = sample_gaussian(init, _int(merged, "particles.n"), make_rng(seed))
    else:
        raise ConfigError(f"unknown representation {representation!r}")

    return SchemeConfig(
        kind=scheme_override or merged["scheme"],
        gamma=_float(merged, "gamma"),
        n_iters=_int(merged, "iters"),
        potential=potential,
        energy=energy,
        initial=initial,
        target=target,
        seed=seed,
        snapshot_every=_int(merged, "snapshot_every"),
    )


def _fmt(x: Optional[float]) -> str:
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else f"{x:.17g}"


CSV_HEADER = ("iter,w2_to_target,objective,objective_gap,"
              "descent_residual,evi_residual,contraction_ratio")


def write_trajectory_csv(log: TrajectoryLog, path: Path) -> None:
    """Trajectory CSV: one row per logged iteration, 17 significant digits."""
    cfg = log.config
    w2 = log.w2_series()
    g = log.objective_series()
    g_star = None
    if log.target_in_rep is not None:
        try:
            g_star = objective(cfg.potential, cfg.energy, log.target_in_rep)
        except (ValueError, TypeError):
            g_star = None
    evi_res = _evi_residuals_for_csv(log, w2, g, g_star)
    lines = [CSV_HEADER]
    for i, rec in enumerate(log.records):
        w2_i = None if np.isnan(w2[i]) else float(w2[i])
        g_i = None if np.isnan(g[i]) else float(g[i])
        gap = None if (g_i is None or g_star is None) else g_i - g_star
        descent = None
        if i > 0 and not (np.isnan(g[i]) or np.isnan(g[i - 1])):
            descent = float(g[i] - g[i - 1])
        ratio = None
        if i > 0 and not (np.isnan(w2[i]) or np.isnan(w2[i - 1])) and w2[i - 1] > 0:
            ratio = float(w2[i] / w2[i - 1])
        evi = evi_res[i] if evi_res is not None and i > 0 else None
        lines.append(",".join([
            str(rec.n), _fmt(w2_i), _fmt(g_i), _fmt(gap),
            _fmt(descent), _fmt(evi), _fmt(ratio),
        ]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _evi_residuals_for_csv(log, w2, g, g_star) -> Optional[list]:
    """Discrete EVI residuals against the target, when computable."""
    cfg = log.config
    if g_star is None or np.any(np.isnan(w2)) or np.any(np.isnan(g)):
        return None
    lam = cfg.potential.lam
    res = [None]
    for i in range(1, len(log.records)):
        res.append(float(w2[i] - (1.0 - cfg.gamma * lam) * w2[i - 1]
                         + 2.0 * cfg.gamma * (g[i] - g_star)))
    return res


def _load_config_arg(arg: str) -> dict[str, str]:
    if arg in PRESETS and not Path(arg).exists():
        return dict(PRESETS[arg])
    path = Path(arg)
    if not path.exists():
        raise ConfigError(f"no such config file or preset: {arg}")
    return parse_config(path.read_text(encoding="utf-8"))


def cmd_run(args) -> int:
    try:
        cfg_map = _load_config_arg(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        config = build_scheme_config(cfg_map)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 3
    log = run(config)
    out_path = Path(args.out or cfg_map.get("out_path", _DEFAULTS["out_path"]))
    write_trajectory_csv(log, out_path)
    if log.error is not None:
        print(f"solver failure: {log.error}", file=sys.stderr)
        print(f"partial trajectory written to {out_path}", file=sys.stderr)
        return 4
    final = log.records[-1]
    w2_txt = _fmt(final.w2_to_target) or "n/a"
    g = log.objective_series()
    gap_txt = "n/a"
    if log.target_in_rep is not None and not np.isnan(g[-1]):
        try:
            gap_txt = _fmt(g[-1] - objective(config.potential, config.energy,
                                             log.target_in_rep))
        except (ValueError, TypeError):
            pass
    descent_ok = bool(np.all(np.diff(g[~np.isnan(g)]) <= diag.default_tolerance(
        config.representation, float(abs(g[0])) if not np.isnan(g[0]) else 1.0)))
    print(f"{config.kind} run finished: final_w2={w2_txt} final_gap={gap_txt} "
          f"descent={'pass' if descent_ok else 'FAIL'} csv={out_path}")
    return 0


def cmd_compare(args) -> int:
    try:
        cfg_map = _load_config_arg(args.config)
        schemes = [s.strip() for s in cfg_map.pop("schemes", "fb,lmc").split(",")]
        if len(schemes) < 2:
            raise ConfigError("compare needs at least two schemes")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    logs = {}
    try:
        for kind in schemes:
            logs[kind] = run(build_scheme_config(cfg_map, scheme_override=kind))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 3
    for kind, log in logs.items():
        if log.error is not None:
            print(f"solver failure in {kind}: {log.error}", file=sys.stderr)
            return 4
    out_path = Path(args.out or cfg_map.get("out_path", "compare.csv"))
    header = ["iter"]
    for kind in schemes:
        header += [f"w2_to_target_{kind}", f"objective_{kind}"]
    lines = [",".join(header)]
    n_rows = min(len(log.records) for log in logs.values())
    series = {k: (logs[k].w2_series(), logs[k].objective_series()) for k in schemes}
    for i in range(n_rows):
        row = [str(i)]
        for kind in schemes:
            w2, g = series[kind]
            row += [_fmt(None if np.isnan(w2[i]) else float(w2[i])),
                    _fmt(None if np.isnan(g[i]) else float(g[i]))]
        lines.append(",".join(row))
    bias_row = ["stationary_bias"]
    summary = []
    for kind in schemes:
        w2, _ = series[kind]
        last = None if np.isnan(w2[-1]) else float(w2[-1])
        bias_row += [_fmt(last), ""]
        summary.append(f"{kind}={_fmt(last) or 'n/a'}")
    lines.append(",".join(bias_row))
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"long-run w2 to target: {' '.join(summary)} csv={out_path}")
    return 0


# --- validation battery -----------------------------------------------------

def _benchmark_potential():
    return Potential.diagonal_quadratic([1.0])


def _benchmark_config(representation: str, n_iters: int = 200, m: int = 2048,
                 n_particles: int = 20000) -> SchemeConfig:
    F = _benchmark_potential()
    init = GaussianMeasure([10.0], [100.0**2])
    if representation == "quantile":
        initial = gaussian_to_quantile(init, m)
    elif representation == "particles":
        initial = sample_gaussian(init, n_particles, make_rng(42))
    else:
        initial = init
    return SchemeConfig(kind="fb", gamma=0.1, n_iters=n_iters, potential=F,
                        energy=InternalEnergy.negative_entropy(),
                        initial=initial, target=gibbs_target(F), seed=42,
                        snapshot_every=1)


def _validate_brenier() -> list[tuple[str, bool, float]]:
    F = Potential.diagonal_quadratic([2.0])  # L = 2
    grid = np.linspace(-5.0, 5.0, 101)
    ok_low = check_monotone(forward_map_values(F, 0.99 / F.L, grid))
    ok_high = not check_monotone(forward_map_values(F, 1.01 / F.L, grid))
    a = gaussian_to_quantile(GaussianMeasure([0.0], [1.0]), 1024)
    b = gaussian_to_quantile(GaussianMeasure([1.0], [4.0]), 1024)
    fwd = ot_map_1d(a, b)
    # round trip at the nodes: mapping a->b then b->a restores a's nodes
    roundtrip = float(np.max(np.abs(ot_map_1d(b, a) - a.values)))
    w2_err = abs(w2_quantile(a, b) - w2_gaussian(GaussianMeasure([0.0], [1.0]),
                                                 GaussianMeasure([1.0], [4.0])))
    return [
        ("forward-map-monotone-below-threshold", ok_low, 0.0),
        ("forward-map-nonmonotone-above-threshold", ok_high, 0.0),
        ("ot-map-roundtrip-identity", roundtrip <= 1e-9, roundtrip),
        ("ot-map-monotone", check_monotone(fwd), 0.0),
        ("w2-quantile-vs-gaussian-closed-form", w2_err <= 5e-3, w2_err),
    ]


def _validate_jko() -> list[tuple[str, bool, float]]:
    rng = make_rng(7)
    worst_w2 = 0.0
    worst_kkt = 0.0
    H = InternalEnergy.negative_entropy()
    for _ in range(10):
        sigma = rng.uniform(0.5, 5.0)
        gamma = rng.uniform(0.01, 1.0)
        mean = rng.uniform(-3.0, 3.0)
        g = GaussianMeasure([mean], [sigma**2])
        grid = gaussian_to_quantile(g, 4096)
        out_q, report = jko_quantile(H, grid, gamma)
        oracle = gaussian_to_quantile(jko_entropy_gaussian(g, gamma), 4096)
        worst_w2 = max(worst_w2, w2_quantile(out_q, oracle))
        scale = max(1.0, float(np.abs(grid.values).max()))
        worst_kkt = max(worst_kkt, report.kkt_residual / scale)
    return [
        ("jko-gaussian-quantile-agreement", worst_w2 <= 1e-4, worst_w2),
        ("jko-kkt-residual", worst_kkt <= 1e-10, worst_kkt),
    ]


def _validate_descent() -> list[tuple[str, bool, float]]:
    results = []
    F = _benchmark_potential()
    for gamma in (0.01, 0.1, 0.5):
        for sigma0 in (0.1, 1.0, 100.0):
            cfg = SchemeConfig(kind="fb", gamma=gamma, n_iters=60, potential=F,
                               energy=InternalEnergy.negative_entropy(),
                               initial=GaussianMeasure([10.0], [sigma0**2]),
                               target=gibbs_target(F), snapshot_every=1)
            report = diag.descent_check(run(cfg))
            results.append((f"descent-gaussian-g{gamma}-s{sigma0}",
                            report.passed, report.worst))
    for energy in (InternalEnergy.negative_entropy(), InternalEnergy.power(2.0)):
        init = gaussian_to_quantile(GaussianMeasure([10.0], [1.0]), 1024)
        cfg = SchemeConfig(kind="fb", gamma=0.1, n_iters=60, potential=F,
                           energy=energy, initial=init, snapshot_every=1)
        report = diag.descent_check(run(cfg))
        results.append((f"descent-quantile-{energy.kind}", report.passed, report.worst))
    return results


def _validate_evi() -> list[tuple[str, bool, float]]:
    results = []
    log = run(_benchmark_config("gaussian"))
    target = log.config.target
    lam = log.config.potential.lam
    report = diag.evi_check(log, target, lam)
    results.append(("evi-gaussian-target", report.passed, report.worst))
    rng = make_rng(3)
    worst = -np.inf
    ok = True
    for _ in range(5):
        pi = GaussianMeasure([rng.uniform(-5, 5)], [rng.uniform(0.2, 5.0)])
        rep = diag.evi_check(log, pi, lam)
        ok = ok and rep.passed
        worst = max(worst, rep.worst)
    results.append(("evi-gaussian-random-pi", ok, worst))
    prox, grad = diag.half_step_evi_checks(log, target, lam)
    results.append(("evi-half-step-prox", prox.passed, prox.worst))
    results.append(("evi-half-step-grad", grad.passed, grad.worst))
    qlog = run(_benchmark_config("quantile", n_iters=120, m=1024))
    rep = diag.evi_check(qlog, target, lam)
    results.append(("evi-quantile-target", rep.passed, rep.worst))
    return results


def _validate_rates() -> list[tuple[str, bool, float]]:
    results = []
    log = run(_benchmark_config("gaussian"))
    lam = log.config.potential.lam
    convex = diag.rate_check_convex(log)
    results.append(("rate-convex", convex.passed, convex.worst))
    strong, rho = diag.rate_check_strongly_convex(log, lam)
    results.append(("rate-strongly-convex", strong.passed, strong.worst))
    results.append(("rate-contraction-fitted", rho <= 1.0 - log.config.gamma * lam,
                    rho))
    return results


def _validate_geodesic() -> list[tuple[str, bool, float]]:
    rng = make_rng(11)
    H = InternalEnergy.negative_entropy()
    worst = -np.inf
    ok = True
    for _ in range(10):
        def rand_grid():
            g = GaussianMeasure([rng.uniform(-3, 3)], [rng.uniform(0.3, 4.0)])
            return gaussian_to_quantile(g, 1024)
        rep = diag.geodesic_convexity_probe(H, rand_grid(), rand_grid(), rand_grid())
        ok = ok and rep.passed
        worst = max(worst, rep.worst)
    return [("geodesic-convexity-entropy", ok, worst)]


_VALIDATE_SCOPES = {
    "brenier": _validate_brenier,
    "jko": _validate_jko,
    "descent": _validate_descent,
    "evi": _validate_evi,
    "rates": _validate_rates,
    "geodesic": _validate_geodesic,
}


def cmd_validate(args) -> int:
    scopes = list(_VALIDATE_SCOPES) if args.scope is None else [args.scope]
    if args.scope is not None and args.scope not in _VALIDATE_SCOPES:
        print(f"unknown scope {args.scope!r}; available: "
              f"{', '.join(_VALIDATE_SCOPES)}", file=sys.stderr)
        return 2
    all_ok = True
    for scope in scopes:
        for name, ok, worst in _VALIDATE_SCOPES[scope]():
            all_ok = all_ok and ok
            print(f"{'PASS' if ok else 'FAIL'} {name} worst_residual={worst:.3e}")
    return 0 if all_ok else 1


def cmd_presets(_args) -> int:
    for name in PRESETS:
        print(f"{name}: {PRESET_NOTES[name]}")
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fbflow",
        description="Forward-backward Wasserstein gradient flow experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one scheme from a config or preset")
    p_run.add_argument("config", help="config file path or preset name")
    p_run.add_argument("--out", help="override the CSV output path")
    p_run.set_defaults(func=cmd_run)
    p_cmp = sub.add_parser("compare", help="run several schemes side by side")
    p_cmp.add_argument("config", help="config file path or preset name")
    p_cmp.add_argument("--out", help="override the CSV output path")
    p_cmp.set_defaults(func=cmd_compare)
    p_val = sub.add_parser("validate", help="run the diagnostics battery")
    p_val.add_argument("--scope", help="restrict to one scope: "
                       + ", ".join(_VALIDATE_SCOPES))
    p_val.set_defaults(func=cmd_validate)
    p_pre = sub.add_parser("presets", help="list built-in presets")
    p_pre.set_defaults(func=cmd_presets)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
