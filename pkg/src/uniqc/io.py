"""JSON / CSV formats. Complex numbers are always written as [re, im] pairs."""

from __future__ import annotations

import csv
import json
from typing import Iterable

import numpy as np

from .jaynes import ConstraintSet
from .qsource import Ensemble


def decode_complex(obj) -> np.ndarray:
    """Nested lists ending in [re, im] pairs -> complex array (last axis consumed)."""
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise ValueError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def encode_complex(a) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def ensemble_from_json(doc: dict) -> Ensemble:
    """``{"d": 2, "signals": [{"prob": p, "state": ...}, ...]}``.

    ``state`` is an amplitude list (pure signal) or a d x d matrix (mixed).
    """
    d = int(doc["d"])
    probs, states = [], []
    for sig in doc["signals"]:
        state = decode_complex(sig["state"])
        if state.shape not in ((d,), (d, d)):
            raise ValueError(f"signal state has shape {state.shape}, expected ({d},) or ({d}, {d})")
        probs.append(float(sig["prob"]))
        states.append(state)
    return Ensemble(probs, states)


def ensemble_to_json(e: Ensemble) -> dict:
    signals = []
    for p, v, rho in zip(e.probs, e.vectors, e.states):
        signals.append({"prob": float(p), "state": encode_complex(v if v is not None else rho.matrix)})
    return {"d": e.d, "signals": signals}


def load_ensemble(path) -> Ensemble:
    with open(path) as fh:
        return ensemble_from_json(json.load(fh))


def constraints_from_json(doc: dict) -> tuple[ConstraintSet, int]:
    """``{"d": 2, "observables": [matrix, ...], "means": [real, ...]}``."""
    d = int(doc["d"])
    obs = [decode_complex(o) for o in doc.get("observables", [])]
    for o in obs:
        if o.shape != (d, d):
            raise ValueError(f"observable has shape {o.shape}, expected ({d}, {d})")
    return ConstraintSet(tuple(obs), tuple(doc.get("means", []))), d


def load_constraints(path) -> tuple[ConstraintSet, int]:
    with open(path) as fh:
        return constraints_from_json(json.load(fh))


def write_rate_csv(rows: Iterable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "dim_upsilon", "rate", "bound"])
        for r in rows:
            w.writerow([r.n, r.dim, repr(float(r.rate)), repr(float(r.bound))])
