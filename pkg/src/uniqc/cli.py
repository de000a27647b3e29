"""Experiment driver.

Every subcommand writes one JSON report (stdout or ``--out``). Reports carry
explicit pass/fail verdicts for the bounds they exercise; the exit status is

    0  all checks passed
    2  invalid configuration or usage
    3  a bound was violated
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .classical import ck_decode, ck_encode, ck_mass, ck_set, shannon_entropy, simulate_codec, typical_set
from .errors import ConfigError, EnumerationTooLarge
from .io import encode_complex, load_constraints, load_ensemble, write_rate_csv
from .jaynes import jaynes_compression_check, max_entropy_state
from .protocol import BLOCK_CAP
from .qsource import ENUMERATION_CAP, density_of
from .schumacher import sj_fidelity_exact, sj_fidelity_mc
from .universal import (
    ENUMERATION_CAP as UPSILON_CAP,
    build_upsilon,
    contains_rotated_ck,
    export_basis,
    random_unitary_span_rank,
    rate_curve,
    sym_dim,
    universal_fidelity,
)
from .numerics import haar_unitary

COMMANDS = ("entropy", "typical", "ck", "codec", "sj", "upsilon", "universal", "jaynes", "rate-curve")
STOCHASTIC_MODES = ("mc", "monte_carlo")
CODEC_ROUNDTRIP_CAP = 2**16


# ---------------------------------------------------------------- validation


def _int_list(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    if isinstance(value, str):
        return [int(v) for v in value.split(",") if v.strip()]
    return [int(value)]


def _float_list(value) -> list[float]:
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(v) for v in str(value).split(",") if v.strip()]


def validate_config(command: str, cfg: dict) -> dict:
    """Fill defaults, coerce types and range-check a command's parameters.

    Raises ConfigError carrying every problem found.
    """
    errors: list[str] = []
    out = {"command": command}
    if command not in COMMANDS:
        raise ConfigError([f"unknown command {command!r}; choose from {', '.join(COMMANDS)}"])

    def need(key):
        if cfg.get(key) is None:
            errors.append(f"--{key.replace('_', '-')} is required for '{command}'")
            return False
        return True

    def take(key, conv, default=None):
        raw = cfg.get(key, default)
        if raw is None:
            return None
        try:
            out[key] = conv(raw)
        except (TypeError, ValueError):
            errors.append(f"--{key}: cannot parse {raw!r}")
            return None
        return out[key]

    delta = take("delta", float, 0.1)
    if delta is not None and delta <= 0:
        errors.append(f"--delta must be > 0 (got {delta})")
    tol = take("tol", float, 1e-9)
    if tol is not None and tol <= 0:
        errors.append(f"--tol must be > 0 (got {tol})")
    eps = take("epsilon", float)
    if eps is not None and not 0 < eps < 1:
        errors.append(f"--epsilon must lie in (0, 1) (got {eps})")
    seed = take("seed", int)

    ns: list[int] = []
    if command in ("typical", "ck", "codec", "sj", "upsilon", "universal", "rate-curve") and need("n"):
        ns = take("n", _int_list) or []
        if not ns or any(n < 1 for n in ns):
            errors.append("--n must be positive integer(s)")
        elif command not in ("codec", "rate-curve") and len(ns) > 1:
            errors.append(f"'{command}' takes a single --n")
        if command not in ("codec", "rate-curve") and ns:
            out["n"] = ns[0]
    elif command == "jaynes" and cfg.get("n") is not None:
        ns = [take("n", int)]

    d = None
    if command in ("ck", "codec", "upsilon", "rate-curve") and need("d"):
        d = take("d", int)
        if d is not None and d < 1:
            errors.append("--d must be >= 1")

    ensemble = None
    if command in ("sj", "universal") or (command == "entropy" and cfg.get("ensemble")):
        if need("ensemble"):
            out["ensemble"] = str(cfg["ensemble"])
            try:
                ensemble = load_ensemble(out["ensemble"])
                d = ensemble.d
            except (OSError, ValueError, KeyError) as exc:
                errors.append(f"--ensemble {out['ensemble']}: {exc}")

    probs = None
    if command in ("typical", "codec") or (command == "entropy" and not cfg.get("ensemble")):
        need("probs")
    if cfg.get("probs") is not None:
        probs = take("probs", _float_list)
        if probs is not None:
            if any(p < 0 for p in probs) or abs(sum(probs) - 1) > 1e-12:
                errors.append("--probs must be non-negative and sum to 1")
            if d is not None and command in ("ck", "codec") and len(probs) != d:
                errors.append(f"--probs has {len(probs)} entries but d={d}")

    if command in ("ck", "codec", "upsilon", "universal", "rate-curve") and need("S"):
        s = take("S", float)
        if s is not None and d is not None and not 0 <= s <= math.log2(d) + 1e-12:
            errors.append(f"--S must lie in the admissible range [0, log2 d] = [0, {math.log2(d):.6g}] (got {s})")

    if command in ("sj", "universal"):
        mode = take("mode", str)
        if mode is not None and mode not in ("exact",) + STOCHASTIC_MODES:
            errors.append(f"--mode must be 'exact' or 'mc' (got {mode!r})")
        take("samples", int, 10000)
        if out.get("samples") is not None and out["samples"] < 100:
            errors.append("--samples must be >= 100")
        if ensemble is not None and ns:
            n = ns[0]
            count = int(np.count_nonzero(ensemble.unravel().probs > 0))
            exact_ok = count**n <= BLOCK_CAP
            if mode is None:
                mode = out["mode"] = "exact" if exact_ok else "mc"
            if mode == "exact" and not exact_ok:
                errors.append(
                    f"n={n} needs {count}**{n} block terms, beyond the exact-enumeration cap {BLOCK_CAP}; "
                    "rerun with --mode mc --seed <int>"
                )
            cap = UPSILON_CAP if command == "universal" else ENUMERATION_CAP
            if d is not None and d**n > cap:
                errors.append(f"block dimension {d}**{n} exceeds the cap {cap}")
        if out.get("mode") in STOCHASTIC_MODES:
            out["mode"] = "mc"
            if seed is None:
                errors.append(f"--seed is required for Monte Carlo runs of '{command}'")

    if command == "codec":
        take("blocks", int, 100000)
        if out["blocks"] is not None and out["blocks"] < 1:
            errors.append("--blocks must be positive")
        if seed is None:
            errors.append("--seed is required for 'codec' (Monte Carlo)")

    if command in ("upsilon", "rate-curve") and d is not None:
        for n in ns:
            if d**n > UPSILON_CAP:
                errors.append(f"block dimension {d}**{n} exceeds the cap {UPSILON_CAP}")

    if command == "upsilon":
        take("oracle", int, 0)
        take("unitaries", int, 0)
        if (out.get("oracle") or out.get("unitaries")) and seed is None:
            errors.append("--seed is required when sampling unitaries (--oracle / --unitaries)")
        if cfg.get("export"):
            out["export"] = str(cfg["export"])

    if command == "jaynes" and need("constraints"):
        out["constraints"] = str(cfg["constraints"])
        try:
            load_constraints(out["constraints"])
        except (OSError, ValueError, KeyError) as exc:
            errors.append(f"--constraints {out['constraints']}: {exc}")
        trials = cfg.get("trials") or []
        if isinstance(trials, str):
            trials = [t for t in trials.split(",") if t]
        out["trials"] = [str(t) for t in trials]
        if out["trials"] and cfg.get("n") is None:
            errors.append("--n is required when --trials are given")

    if command in ("codec", "rate-curve"):
        out["n"] = ns
    if errors:
        raise ConfigError(errors)
    return out


# ---------------------------------------------------------------- commands


def _mass_floor(mass, cfg):
    eps = cfg.get("epsilon")
    return None if eps is None else bool(mass > 1 - eps)


def cmd_entropy(cfg):
    if cfg.get("ensemble"):
        e = load_ensemble(cfg["ensemble"])
        s = density_of(e).entropy
        h = shannon_entropy(e.probs)
        res = {"von_neumann_entropy": s, "signal_shannon_entropy": h, "d": e.d}
        checks = {"entropy_in_range": 0 <= s <= math.log2(e.d) + 1e-12}
        if e.is_pure:
            checks["von_neumann_le_shannon"] = s <= h + 1e-9
        return res, checks, None
    h = shannon_entropy(cfg["probs"])
    return {"shannon_entropy": h}, {"entropy_in_range": 0 <= h <= math.log2(len(cfg["probs"])) + 1e-12}, None


def cmd_typical(cfg):
    ts = typical_set(cfg["probs"], cfg["n"], cfg["delta"], explicit=False)
    h = ts.source.entropy
    bound = 2.0 ** (cfg["n"] * (h + cfg["delta"]))
    res = {
        "entropy": h,
        "size": ts.size,
        "size_bound": bound,
        "mass": ts.mass,
        "member_types": [list(t.counts) for t in ts.member_types],
    }
    return res, {"size_bound": ts.size <= bound, "mass_floor": _mass_floor(ts.mass, cfg)}, None


def cmd_ck(cfg):
    n, d, S, delta = cfg["n"], cfg["d"], cfg["S"], cfg["delta"]
    ck = ck_set(d, n, S, delta)
    res = {
        "entropy_budget": ck.entropy_budget,
        "member_types": [list(t.counts) for t in ck.member_types],
        "total_size": ck.total_size,
        "size_bound": ck.size_bound,
        "rate": ck.rate,
    }
    checks = {
        "members_within_budget": all(t.entropy <= ck.entropy_budget + 1e-12 for t in ck.member_types),
        "size_bound": ck.total_size <= ck.size_bound,
        # the 2^(n(S+delta)) claim is only in force once the polynomial factor fits in the reserved slack
        "exponential_size": ck.total_size <= 2.0 ** (n * (S + delta)) if (n + 1) ** d <= 2.0 ** (n * delta / 2) else None,
    }
    if cfg.get("probs") is not None:
        res["mass"] = ck_mass(ck, cfg["probs"])
        checks["mass_floor"] = _mass_floor(res["mass"], cfg)
    return res, checks, None


def _codec_cell(args):
    d, n, S, delta, probs, blocks, seed_seq = args
    ck = ck_set(d, n, S, delta)
    roundtrip = None
    if ck.total_size <= CODEC_ROUNDTRIP_CAP:
        roundtrip = all(
            ck_decode(ck, k) == x and ck_encode(ck, x) == (k, False) for k, x in enumerate(ck.sequences())
        )
    trial = simulate_codec(ck, probs, blocks, seed_seq)
    if trial.stderr > 0:
        consistent = abs(trial.error_rate - trial.expected_error) <= 3 * trial.stderr
    else:
        consistent = abs(trial.error_rate - trial.expected_error) <= 1e-12
    rate_bound = S + delta / 2 + d * math.log2(n + 1) / n
    cell = {
        "n": n,
        "total_size": ck.total_size,
        "rate": ck.rate,
        "rate_bound": rate_bound,
        "mass": 1 - trial.expected_error,
        "blocks": blocks,
        "errors": trial.errors,
        "error_rate": trial.error_rate,
        "stderr": trial.stderr,
    }
    checks = {"roundtrip": roundtrip, "mc_matches_mass": consistent, "rate_bound": ck.rate <= rate_bound}
    return cell, checks


def _workers(cfg) -> int:
    w = cfg.get("workers") or os.environ.get("UNIQC_WORKERS") or 1
    return max(1, int(w))


def _map_cells(fn, cells, cfg):
    workers = _workers(cfg)
    if workers == 1 or len(cells) == 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells))


def _merge_checks(per_cell, label):
    out = {}
    for key, checks in per_cell:
        for name, ok in checks.items():
            out[f"{name}[{label}={key}]"] = ok
    return out


def cmd_codec(cfg):
    ns = cfg["n"]
    streams = np.random.SeedSequence(cfg["seed"]).spawn(len(ns))
    cells = [(cfg["d"], n, cfg["S"], cfg["delta"], cfg["probs"], cfg["blocks"], s) for n, s in zip(ns, streams)]
    outs = _map_cells(_codec_cell, cells, cfg)
    return {"cells": [c for c, _ in outs]}, _merge_checks([(c["n"], k) for c, k in outs], "n"), None


def _fidelity_checks(rep, cfg, rate_cap=None):
    checks = {"fidelity_lower_bound": rep.bound_holds, "mass_floor": _mass_floor(rep.mass, cfg)}
    if rate_cap is not None:
        checks["rate_bound"] = rep.rate_qubits_per_signal <= rate_cap + 1e-12
    return checks


def cmd_sj(cfg):
    e = load_ensemble(cfg["ensemble"])
    if cfg["mode"] == "exact":
        rep = sj_fidelity_exact(e, cfg["n"], cfg["delta"])
    else:
        rep = sj_fidelity_mc(e, cfg["n"], cfg["delta"], cfg["samples"], cfg["seed"])
    s = density_of(e).entropy
    res = {"entropy": s, **rep.to_dict()}
    return res, _fidelity_checks(rep, cfg, s + cfg["delta"]), None


def cmd_upsilon(cfg):
    d, n, S, delta = cfg["d"], cfg["n"], cfg["S"], cfg["delta"]
    ups = build_upsilon(d, n, S, delta, tol=cfg["tol"])
    xi_residual = float(np.max(ups.residual_norms(ups.ck_vectors())))
    res = {
        "dim": ups.dim,
        "xi_dim": ups.xi_dim,
        "rate": ups.rate,
        "dim_bound": ups.dim_bound,
        "sym_dim": sym_dim(d, n),
        "xi_max_residual": xi_residual,
    }
    checks = {
        "dim_bound": ups.satisfies_dim_bound,
        "xi_contained": xi_residual <= 1e-9,
        "zero_entropy_is_symmetric_subspace": ups.dim == sym_dim(d, n) if S == 0 else None,
    }
    if cfg.get("unitaries"):
        rng = np.random.default_rng(np.random.SeedSequence(cfg["seed"]).spawn(2)[0])
        worst = max(contains_rotated_ck(ups, haar_unitary(d, rng)) for _ in range(cfg["unitaries"]))
        res["rotated_max_residual"] = worst
        checks["rotated_ck_contained"] = worst <= 1e-8
    if cfg.get("oracle"):
        oracle_seed = int(np.random.SeedSequence(cfg["seed"]).spawn(2)[1].generate_state(1)[0])
        rank = random_unitary_span_rank(d, n, S, delta, cfg["oracle"], seed=oracle_seed, tol=cfg["tol"])
        res["oracle_rank"] = rank
        checks["oracle_rank_matches"] = rank == ups.dim
    if cfg.get("export"):
        export_basis(ups, cfg["export"])
        res["export"] = cfg["export"]
    return res, checks, None


def cmd_universal(cfg):
    e = load_ensemble(cfg["ensemble"])
    ups = build_upsilon(e.d, cfg["n"], cfg["S"], cfg["delta"], tol=cfg["tol"])
    rho = density_of(e)
    mode = cfg["mode"]
    rep = universal_fidelity(e, ups, mode, cfg.get("samples"), cfg.get("seed"))
    res = {
        "entropy": rho.entropy,
        "guarantee_applies": rho.entropy <= cfg["S"] + 1e-9,
        "dim_bound": ups.dim_bound,
        **rep.to_dict(),
    }
    checks = _fidelity_checks(rep, cfg)
    checks["dim_bound"] = ups.satisfies_dim_bound
    return res, checks, None


def cmd_jaynes(cfg):
    c, d = load_constraints(cfg["constraints"])
    r = max_entropy_state(c, d)
    res = {
        "jaynes_entropy": r.entropy,
        "state": encode_complex(r.state.matrix),
        "dual_params": [float(x) for x in r.dual_params],
        "residuals": [float(x) for x in r.residuals],
        "boundary": r.boundary,
        "iterations": r.iterations,
    }
    checks = {"constraints_met": bool(np.all(r.residuals <= 1e-8))}
    if cfg["trials"]:
        trials = [load_ensemble(p) for p in cfg["trials"]]
        chk = jaynes_compression_check(c, trials, cfg["n"], cfg["delta"], d)
        res["compression"] = {
            "dim": chk.dim,
            "rate": chk.rate,
            "trials": [t.__dict__ for t in chk.trials],
        }
        checks["trial_entropy_le_jaynes"] = all(t.entropy_ok for t in chk.trials)
        checks["fidelity_lower_bound"] = all(t.bound_holds for t in chk.trials)
    return res, checks, None


def _rate_cell(args):
    d, S, delta, n = args
    return rate_curve(d, S, delta, [n])[0]


def cmd_rate_curve(cfg):
    cells = [(cfg["d"], cfg["S"], cfg["delta"], n) for n in cfg["n"]]
    rows = _map_cells(_rate_cell, cells, cfg)
    d, S, delta = cfg["d"], cfg["S"], cfg["delta"]
    checks = {}
    for r in rows:
        checks[f"rate_le_bound[n={r.n}]"] = r.rate <= r.bound
        checks[f"dim_bound[n={r.n}]"] = r.dim <= (r.n + 1) ** (d * d) * 2.0 ** (r.n * (S + delta))
    return {"rows": [r._asdict() for r in rows]}, checks, rows


HANDLERS = {
    "entropy": cmd_entropy,
    "typical": cmd_typical,
    "ck": cmd_ck,
    "codec": cmd_codec,
    "sj": cmd_sj,
    "upsilon": cmd_upsilon,
    "universal": cmd_universal,
    "jaynes": cmd_jaynes,
    "rate-curve": cmd_rate_curve,
}


# ---------------------------------------------------------------- argv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uniqc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"uniqc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file whose keys override the flags")
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        p.add_argument("--seed", type=int)
        p.add_argument("--delta", type=float)
        p.add_argument("--epsilon", type=float, help="report whether the captured mass exceeds 1 - epsilon")
        p.add_argument("--workers", type=int, help="parallel grid cells (default: $UNIQC_WORKERS or 1)")
        p.add_argument("--no-timing", action="store_true", help="omit wall-clock time for byte-stable reports")
        return p

    p = common(sub.add_parser("entropy", help="Shannon / von Neumann entropy"))
    p.add_argument("--probs")
    p.add_argument("--ensemble")

    p = common(sub.add_parser("typical", help="weakly typical set of an i.i.d. source"))
    p.add_argument("--probs")
    p.add_argument("--n")

    for name, helptext in (("ck", "Csiszar-Korner universal set"), ("codec", "CK block codec simulation")):
        p = common(sub.add_parser(name, help=helptext))
        p.add_argument("--d", type=int)
        p.add_argument("--n")
        p.add_argument("--S", type=float)
        p.add_argument("--probs")
        if name == "codec":
            p.add_argument("--blocks", type=int)

    for name, helptext in (("sj", "typical-subspace protocol fidelity"), ("universal", "universal protocol fidelity")):
        p = common(sub.add_parser(name, help=helptext))
        p.add_argument("--ensemble")
        p.add_argument("--n")
        p.add_argument("--mode", choices=["exact", "mc"])
        p.add_argument("--samples", type=int)
        if name == "universal":
            p.add_argument("--S", type=float)
            p.add_argument("--tol", type=float)

    p = common(sub.add_parser("upsilon", help="build the universal subspace"))
    p.add_argument("--d", type=int)
    p.add_argument("--n")
    p.add_argument("--S", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--oracle", type=int, help="also rank-check against this many Haar unitaries")
    p.add_argument("--unitaries", type=int, help="containment check against this many Haar unitaries")
    p.add_argument("--export", help="write the basis as JSON")

    p = common(sub.add_parser("jaynes", help="max-entropy reconstruction"))
    p.add_argument("--constraints")
    p.add_argument("--trials", help="comma-separated ensemble files consistent with the constraints")
    p.add_argument("--n", type=int)

    p = common(sub.add_parser("rate-curve", help="rate of Upsilon against its bound over n"))
    p.add_argument("--d", type=int)
    p.add_argument("--S", type=float)
    p.add_argument("--n")
    p.add_argument("--csv", help="write n,dim_upsilon,rate,bound rows here")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    raw = {k: v for k, v in vars(args).items() if v is not None and k != "command"}
    if args.config:
        try:
            with open(args.config) as fh:
                raw.update(json.load(fh))
        except (OSError, ValueError) as exc:
            print(f"error: --config {args.config}: {exc}", file=sys.stderr)
            return 2
    try:
        cfg = validate_config(args.command, raw)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"error: {msg}", file=sys.stderr)
        return 2
    for key in ("out", "csv", "workers"):
        if raw.get(key) is not None:
            cfg.setdefault("_" + key, raw[key])
    cfg["workers"] = raw.get("workers")

    start = time.perf_counter()
    try:
        results, checks, rows = HANDLERS[args.command](cfg)
    except EnumerationTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - start

    echo = {k: v for k, v in cfg.items() if not k.startswith("_") and k != "workers"}
    report = {
        "tool": "uniqc",
        "version": __version__,
        "command": args.command,
        "config": echo,
        "seed": cfg.get("seed"),
        "results": results,
        "checks": checks,
        "all_checks_passed": all(v is not False for v in checks.values()),
        "wall_clock_s": None if raw.get("no_timing") else elapsed,
    }
    text = json.dumps(report, indent=2, default=_json_default)
    if raw.get("out"):
        with open(raw["out"], "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if rows is not None and raw.get("csv"):
        write_rate_csv(rows, raw["csv"])
    return 0 if report["all_checks_passed"] else 3


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
