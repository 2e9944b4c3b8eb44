"""Command-line entry point: config ingestion, experiment dispatch, artifacts.

Exit codes: 0 pass, 2 experiment failure, 1 usage or configuration error.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import asymptotics as asy
from .forces import ForceError, force_from_json
from .grid import FourierVectorField, build_grid, to_fourier
from .io import FormatError, read_field, write_csv, write_field, write_json
from .landau import LandauError, LandauParams, c_from_beta, landau_fourier, landau_residual, sample_on_grid
from .norms import Annulus, NormError, default_band, interpolation_gap, pm_norm
from .operators import OperatorError, TimeGrid, leray_apply, riesz_constant, singular_zero_mode
from .solver import ContractionCertificate, ContractionError, solve_cauchy, solve_stationary

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2

COMMANDS = ("solve-cauchy", "solve-stationary", "landau", "verify-norms", "rate-farfield", "rate-stability",
            "rate-convergence", "riesz")

DEFAULTS = {
    "grid": {"n": 64, "box_length": 16.0, "dealias_fraction": 2.0 / 3.0},
    "timegrid": {"t_min": 1e-2, "t_max": 1e2, "ratio": 2.0**0.25},
    "solver": {"tol": 1e-10, "max_iter": 60},
    "output_dir": "pmflow-out",
    "seed": 0,
}

# short flags accepted on the command line, mapped to dotted config keys
ALIASES = {
    "c": "landau.c", "beta1": "landau.beta1", "annulus": "landau.annulus", "h": "landau.h",
    "n": "grid.n", "L": "grid.box_length", "q": "experiment.q", "b": "experiment.b",
    "delta": "experiment.delta", "out": "output_dir", "tol": "solver.tol",
}


class UsageError(ValueError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("pmflow").joinpath("run_config.schema.json").read_text())


def _parse_value(tokens: list[str]):
    vals = []
    for tok in tokens:
        try:
            vals.append(json.loads(tok))
        except json.JSONDecodeError:
            vals.append(tok)
    return vals[0] if len(vals) == 1 else vals


def parse_overrides(extra: list[str]) -> dict:
    """``--key v [v ...]`` pairs into {dotted.key: value}."""
    out, key, buf = {}, None, []
    for tok in extra:
        if tok.startswith("--") and len(tok) > 2 and not _is_number(tok):
            if key is not None:
                out[key] = _parse_value(buf) if buf else True
            key, buf = tok[2:], []
        elif key is None:
            raise UsageError(f"unexpected argument {tok!r}")
        else:
            buf.append(tok)
    if key is not None:
        out[key] = _parse_value(buf) if buf else True
    return out


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _set_dotted(cfg: dict, key: str, value):
    parts = ALIASES.get(key, key).replace("-", "_").split(".")
    node = cfg
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise UsageError(f"cannot override {key}: {p} is not a section")
    node[parts[-1]] = value


def _merge(base: dict, top: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in top.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def build_config(command: str, config_path: str | None, overrides: dict) -> dict:
    cfg = _merge(DEFAULTS, COMMAND_DEFAULTS.get(command, {}))
    if config_path:
        try:
            cfg = _merge(cfg, json.loads(Path(config_path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {config_path}: {exc}") from exc
    for k, v in overrides.items():
        _set_dotted(cfg, k, v)
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        pointer = "/" + "/".join(str(p) for p in e.absolute_path)
        raise UsageError(f"config error at {pointer}: {e.message}")
    cfg["format_version"] = 1
    return cfg


COMMAND_DEFAULTS = {
    "solve-cauchy": {"datum": {"kind": "homogeneous", "params": {"eps": 0.5}},
                     "force": {"kind": "dirac", "beta": [0.5, 0.0, 0.0]}},
    "solve-stationary": {"force": {"kind": "dirac", "beta": [0.5, 0.0, 0.0]}},
    "landau": {"landau": {"annulus": [0.5, 2.0], "h": 1e-3},
               "experiment": {"tolerances": {"residual": 1e-5, "divergence": 1e-6}}},
    "verify-norms": {"experiment": {"b": 0.0, "q": 2.0, "samples": 50}},
    "rate-farfield": {"datum": {"kind": "homogeneous", "params": {"eps": 0.5}},
                      "force": {"kind": "dirac", "beta": [0.5, 0.0, 0.0]},
                      "experiment": {"norm": "lq", "q": 2.0, "window": list(asy.FARFIELD_WINDOW),
                                     "tolerances": {"exponent": 0.05}}},
    "rate-stability": {"force": {"kind": "gaussian_mixture", "masses": [[0.5, 0, 0]], "centers": [[0, 0, 0]],
                                 "widths": [0.5]},
                       "force2": {"kind": "dirac", "beta": [0.5, 0.0, 0.0]},
                       "experiment": {"b": 1.5, "q": 2.5, "tolerances": {"exponent": 0.05}}},
    "rate-convergence": {"datum": {"kind": "zero"},
                         "datum2": {"kind": "band_limited", "params": {"amplitude": 0.2, "band": [0.5, 2.0]}},
                         "force": {"kind": "dirac", "beta": [0.5, 0.0, 0.0]},
                         "force2": {"kind": "dirac", "beta": [0.5, 0.0, 0.0]},
                         "experiment": {"delta": 0.5, "q": 4.0, "tolerances": {"exponent": 0.1}}},
    "riesz": {"experiment": {"b": 2.0}},
}


# --------------------------------------------------------------------------
# config -> objects


def make_grid(cfg):
    g = cfg["grid"]
    return build_grid(int(g["n"]), float(g["box_length"]), float(g.get("dealias_fraction", 2.0 / 3.0)))


def make_timegrid(cfg) -> TimeGrid:
    t = cfg["timegrid"]
    return TimeGrid.geometric(float(t["t_min"]), float(t["t_max"]), float(t["ratio"]))


def make_datum(desc: dict | None, grid):
    desc = desc or {"kind": "zero"}
    p = desc.get("params", {})
    kind = desc["kind"]
    if kind == "zero":
        return FourierVectorField.zeros(grid), None
    if kind == "homogeneous":
        eps = float(p.get("eps", 0.5))
        a = eps * np.asarray(p.get("direction", (1.0, 0.0, 0.0)), dtype=float)
        return asy.homogeneous_datum(grid, eps, p.get("direction", (1.0, 0.0, 0.0))), a
    if kind == "band_limited":
        lo, hi = p.get("band", (0.5, 2.0))
        r = grid.xi_abs
        bump = np.zeros(grid.shape)
        m = (r > lo) & (r < hi)
        bump[m] = np.exp(-1.0 / ((r[m] - lo) * (hi - r[m])))
        d = np.asarray(p.get("direction", (0.0, 1.0, 0.0)), dtype=float)
        amp = float(p.get("amplitude", 0.2)) * d[:, None, None, None] * bump[None].astype(complex)
        return FourierVectorField(grid, leray_apply(grid, amp), solenoidal=True), None
    if kind == "file":
        f = read_field(p["path"], grid.dealias_fraction)
        if f.grid != grid:
            raise UsageError("datum file grid differs from the configured grid")
        return f, None
    raise UsageError(f"unknown datum kind {kind!r}")


def _solve_kw(cfg, homogeneous, grid):
    # homogeneous: the vector eps * a of a degree -2 datum, or None
    s = cfg.get("solver", {})
    kw = {"tol": float(s.get("tol", 1e-10)), "max_iter": int(s.get("max_iter", 60))}
    if homogeneous is not None:
        kw["leading_power"] = s.get("leading_power", 0.5)
        kw["zero_mode"] = singular_zero_mode(grid, homogeneous)
    elif s.get("leading_power") is not None:
        kw["leading_power"] = s["leading_power"]
    return kw


# --------------------------------------------------------------------------
# commands


def _out(cfg) -> Path:
    return Path(cfg["output_dir"])


def cmd_solve_cauchy(cfg) -> tuple[int, str]:
    grid, tg = make_grid(cfg), make_timegrid(cfg)
    u0, hom = make_datum(cfg.get("datum"), grid)
    f = force_from_json(cfg.get("force", {"kind": "zero"}), grid)
    out = _out(cfg)
    try:
        sol = solve_cauchy(u0, f, grid, tg, **_solve_kw(cfg, hom, grid))
    except ContractionError as exc:
        cert = exc.certificate or ContractionCertificate(math.nan, math.nan)
        write_json(out / "certificate.json", {"error": str(exc), "certificate": cert.to_json()})
        return EXIT_FAIL, f"solve-cauchy: {exc}; smallness_ok={cert.smallness_ok}"
    cert = sol.certificate
    band = default_band(grid)
    rows = [(t, pm_norm(sol.field.snapshot(i), 2.0, band),
             pm_norm(FourierVectorField(grid, sol.bilinear_part(i)), 0.0, band)) for i, t in enumerate(tg.nodes)]
    write_csv(out / "snapshot_norms.csv", ["t", "pm2_u", "pm0_bilinear"], rows)
    write_field(out / "u_final.pmns", sol.field.snapshot(len(tg) - 1))
    write_json(out / "certificate.json", {"certificate": cert.to_json(), "config_hash": asy.config_hash(cfg)})
    ok = cert.converged and cert.smallness_ok
    return (EXIT_OK if ok else EXIT_FAIL), (f"solve-cauchy: converged={cert.converged} smallness_ok="
                                             f"{cert.smallness_ok} iterations={len(cert.iteration_residuals)}")


def cmd_solve_stationary(cfg) -> tuple[int, str]:
    grid = make_grid(cfg)
    g = force_from_json(cfg.get("force", {"kind": "zero"}), grid)
    out = _out(cfg)
    tol = float(cfg.get("solver", {}).get("tol", 1e-12))
    try:
        sol = solve_stationary(g, grid, tol=tol)
    except ContractionError as exc:
        cert = exc.certificate or ContractionCertificate(math.nan, math.nan)
        write_json(out / "certificate.json", {"error": str(exc), "certificate": cert.to_json()})
        return EXIT_FAIL, f"solve-stationary: {exc}; smallness_ok={cert.smallness_ok}"
    write_field(out / "w.pmns", sol.field)
    write_json(out / "certificate.json", {"certificate": sol.certificate.to_json(), "constant": sol.constant,
                                          "config_hash": asy.config_hash(cfg)})
    ok = sol.certificate.converged and sol.certificate.smallness_ok
    return (EXIT_OK if ok else EXIT_FAIL), (f"solve-stationary: smallness_ok={sol.certificate.smallness_ok} "
                                             f"measured C={sol.constant:.4g}")


def cmd_landau(cfg) -> tuple[int, str]:
    lc = cfg["landau"]
    if "beta1" in lc and "c" in lc:
        raise UsageError("give either landau.c or landau.beta1, not both")
    params = LandauParams(c_from_beta(float(lc["beta1"])) if "beta1" in lc else float(lc.get("c", 2.0)))
    r_min, r_max = lc.get("annulus", (0.5, 2.0))
    h = float(lc.get("h", 1e-3))
    res = landau_residual(params, float(r_min), float(r_max), h)
    out = _out(cfg)
    write_csv(out / "residual.csv", ["h", "momentum", "divergence"],
              [(h, res.residual_h, res.divergence_h), (h / 2, res.residual_h2, res.divergence_h2),
               (0.0, res.residual, res.divergence)])
    grid = make_grid(cfg)
    beta1 = params.beta1
    sample = sample_on_grid(grid, [beta1, 0.0, 0.0])
    write_field(out / "landau_sampled.pmns", to_fourier(sample.field))
    write_field(out / "landau_fourier.pmns", landau_fourier(grid, beta1))
    tols = cfg.get("experiment", {}).get("tolerances", {})
    ok = res.residual <= tols.get("residual", 1e-5) and res.divergence <= tols.get("divergence", 1e-6)
    write_json(out / "landau.json", {"c": params.c, "beta1": beta1, "residual": res.residual,
                                     "divergence": res.divergence, "observed_order": res.observed_order,
                                     "masked_points": int(sample.mask.sum()), "passed": bool(ok)})
    return (EXIT_OK if ok else EXIT_FAIL), (f"landau: c={params.c:.6g} beta1={beta1:.6g} residual={res.residual:.3g} "
                                             f"divergence={res.divergence:.3g} order={res.observed_order:.2f}")


def cmd_verify_norms(cfg) -> tuple[int, str]:
    from .families import random_family

    grid = make_grid(cfg)
    ex = cfg.get("experiment", {})
    b, q = float(ex.get("b", 0.0)), float(ex.get("q", 2.0))
    fields = random_family(grid, int(cfg.get("seed", 0)), int(ex.get("samples", 50)))
    ratios = [interpolation_gap(f, b, q) for f in fields]
    out = _out(cfg)
    write_csv(out / "interpolation.csv", ["index", "ratio"], [(i, r) for i, r in enumerate(ratios)])
    ok = all(math.isfinite(r) and r > 0 for r in ratios)
    write_json(out / "interpolation.json", {"b": b, "q": q, "max_ratio": max(ratios), "min_ratio": min(ratios),
                                            "passed": ok, "config_hash": asy.config_hash(cfg)})
    return (EXIT_OK if ok else EXIT_FAIL), f"verify-norms: b={b} q={q} max ratio={max(ratios):.4g}"


def _region(cfg):
    r = cfg.get("region")
    return None if r is None else Annulus(float(r[0]), float(r[1]))


def cmd_rate_farfield(cfg) -> tuple[int, str]:
    grid, tg = make_grid(cfg), make_timegrid(cfg)
    u0, hom = make_datum(cfg.get("datum"), grid)
    f = force_from_json(cfg.get("force", {"kind": "zero"}), grid)
    ex = cfg.get("experiment", {})
    self_similar = cfg.get("datum", {}).get("kind") in ("homogeneous", "zero") and f.kind in ("dirac", "zero")
    pm_b = float(ex["b"]) if ex.get("norm") == "pm" else None
    rep = asy.run_farfield_rate(u0, f, float(ex.get("q", 2.0)) if pm_b is None else None, grid, tg, _region(cfg),
                                pm_b=pm_b, window=tuple(ex.get("window", asy.FARFIELD_WINDOW)),
                                self_similar=self_similar, tolerance=float(ex.get("tolerances", {}).get("exponent", 0.05)),
                                config=_hashable(cfg), **_solve_kw(cfg, hom, grid))
    rep.write(_out(cfg), "rate_farfield")
    return (EXIT_OK if rep.passed else EXIT_FAIL), "rate-farfield: " + rep.summary()


def cmd_rate_stability(cfg) -> tuple[int, str]:
    grid = make_grid(cfg)
    ex = cfg.get("experiment", {})
    g1 = force_from_json(cfg["force"], grid)
    g2 = force_from_json(cfg.get("force2", cfg["force"]), grid)
    rep = asy.run_stationary_stability(g1, g2, float(ex.get("b", 1.5)), float(ex.get("q", 2.5)), grid,
                                       region=_region(cfg), tolerance=float(ex.get("tolerances", {}).get("exponent", 0.05)),
                                       config=_hashable(cfg))
    rep.write(_out(cfg), "rate_stability")
    return (EXIT_OK if rep.passed else EXIT_FAIL), "rate-stability: " + rep.summary()


def cmd_rate_convergence(cfg) -> tuple[int, str]:
    grid, tg = make_grid(cfg), make_timegrid(cfg)
    u01, e1 = make_datum(cfg.get("datum"), grid)
    u02, e2 = make_datum(cfg.get("datum2", cfg.get("datum")), grid)
    f1 = force_from_json(cfg.get("force", {"kind": "zero"}), grid)
    f2 = force_from_json(cfg.get("force2", cfg.get("force", {"kind": "zero"})), grid)
    ex = cfg.get("experiment", {})
    if e1 is not None or e2 is not None:
        raise UsageError("rate-convergence expects non-homogeneous data")
    kw = _solve_kw(cfg, None, grid)
    rep = asy.run_convergence_rate(u01, u02, f1, f2, float(ex.get("delta", 0.5)), float(ex.get("q", 4.0)), grid, tg,
                                   _region(cfg), tolerance=float(ex.get("tolerances", {}).get("exponent", 0.1)),
                                   config=_hashable(cfg), **kw)
    rep.write(_out(cfg), "rate_convergence")
    decay = rep.extra.get("passed_decay")
    ok = rep.passed and decay is not False
    return (EXIT_OK if ok else EXIT_FAIL), f"rate-convergence: {rep.summary()}; weighted decay={decay}"


def cmd_riesz(cfg) -> tuple[int, str]:
    b = float(cfg.get("experiment", {}).get("b", 2.0))
    val = riesz_constant(b)
    out = _out(cfg)
    write_csv(out / "riesz.csv", ["b", "C"], [(b, val)])
    write_json(out / "riesz.json", {"b": b, "C": val})
    return EXIT_OK, f"riesz: C({b:g}) = {val:.10g}"


def _hashable(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k != "output_dir"}


HANDLERS = {
    "solve-cauchy": cmd_solve_cauchy,
    "solve-stationary": cmd_solve_stationary,
    "landau": cmd_landau,
    "verify-norms": cmd_verify_norms,
    "rate-farfield": cmd_rate_farfield,
    "rate-stability": cmd_rate_stability,
    "rate-convergence": cmd_rate_convergence,
    "riesz": cmd_riesz,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pmflow", description=__doc__.splitlines()[0], allow_abbrev=False,
                                epilog="Any other --key value pair overrides a config key (dotted paths allowed).")
    p.add_argument("command", help=" | ".join(COMMANDS))
    p.add_argument("--config", help="JSON run configuration")
    return p


def run_command(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command not in HANDLERS:
        print(f"pmflow: unknown subcommand {args.command!r}; expected one of {', '.join(COMMANDS)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = build_config(args.command, args.config, parse_overrides(extra))
        code, line = HANDLERS[args.command](cfg)
    except (UsageError, ForceError, LandauError, NormError, OperatorError, FormatError, KeyError, ValueError) as exc:
        print(f"pmflow {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(line)
    return code


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
