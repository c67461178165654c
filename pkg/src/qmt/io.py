"""JSON formats for measures, models, and run reports.

Decoherence functional:
    {"labels": [...], "matrix": [[[re, im], ...], ...]}
row-major, row index = bra atom, column index = ket atom.  Plain numbers are
accepted in place of [re, im] pairs for real entries.

Classical measure:
    {"labels": [...], "weights": [...]}

Structured screening model:
    {"atoms": [{"alpha": "a", "i": 1, "beta": "b", "j": -1, "c": "c0"}, ...],
     "weights": [...]}            for a classical model, or
    {"atoms": [...], "matrix": [[[re, im], ...], ...]}   for a quantal one.
The atom list must cover the full product of settings, outcomes and past
cells; any ordering is accepted and mapped onto the canonical layout.

Setting weights:
    {"ab": 0.25, "a'b": 0.25, "ab'": 0.25, "a'b'": 0.25}
"""

from __future__ import annotations

import json
from typing import Union

import numpy as np

from .errors import InvalidMeasure
from .measure import ClassicalMeasure, DecoherenceFunctional
from .screening import SettingWeights, StructuredModel, space_for_past, _atom_index
from .space import SampleSpace


def _entry_to_json(z: complex):
    if z.imag == 0.0:
        return z.real
    return [z.real, z.imag]


def _entry_from_json(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(v[0], v[1])
    raise InvalidMeasure(f"matrix entry must be a number or [re, im], got {v!r}")


def df_to_json(df: DecoherenceFunctional) -> dict:
    return {
        "labels": list(df.space.labels),
        "matrix": [[_entry_to_json(z) for z in row] for row in df.matrix],
    }


def df_from_json(obj: dict, validate: bool = True) -> DecoherenceFunctional:
    labels = obj.get("labels")
    matrix = obj.get("matrix")
    if labels is None or matrix is None:
        raise InvalidMeasure("decoherence functional JSON needs 'labels' and 'matrix'")
    space = SampleSpace(tuple(labels))
    m = np.array([[_entry_from_json(v) for v in row] for row in matrix], dtype=complex)
    return DecoherenceFunctional(space, m, validate=validate)


def classical_to_json(m: ClassicalMeasure) -> dict:
    return {"labels": list(m.space.labels), "weights": [float(w) for w in m.weights]}


def classical_from_json(obj: dict) -> ClassicalMeasure:
    labels = obj.get("labels")
    weights = obj.get("weights")
    if labels is None or weights is None:
        raise InvalidMeasure("classical measure JSON needs 'labels' and 'weights'")
    return ClassicalMeasure(SampleSpace(tuple(labels)), np.asarray(weights, dtype=float))


def setting_weights_to_json(w: SettingWeights) -> dict:
    return {"ab": w.ab, "a'b": w.a1b, "ab'": w.ab1, "a'b'": w.a1b1}


def setting_weights_from_json(obj: dict) -> SettingWeights:
    try:
        return SettingWeights(obj["ab"], obj["a'b"], obj["ab'"], obj["a'b'"])
    except KeyError as exc:
        raise InvalidMeasure(f"setting weights JSON missing key {exc}") from exc


def structured_model_to_json(m: StructuredModel) -> dict:
    atoms = []
    for label in m.space.labels:
        # labels look like "a+b-|c0" or "a'+b'-|c0"
        head, c = label.split("|", 1)
        k = 2 if head.startswith("a'") else 1
        alpha = head[:k]
        i = 1 if head[k] == "+" else -1
        rest = head[k + 1:]
        kb = 2 if rest.startswith("b'") else 1
        beta = rest[:kb]
        j = 1 if rest[kb] == "+" else -1
        atoms.append({"alpha": alpha, "i": i, "beta": beta, "j": j, "c": c})
    out: dict = {"atoms": atoms}
    if m.is_classical:
        out["weights"] = [float(w) for w in m.measure.weights]
    else:
        out["matrix"] = [[_entry_to_json(z) for z in row] for row in m.measure.matrix]
    return out


def structured_model_from_json(obj: dict) -> StructuredModel:
    atoms = obj.get("atoms")
    if not atoms:
        raise InvalidMeasure("structured model JSON needs a nonempty 'atoms' list")
    past = []
    for a in atoms:
        if a["c"] not in past:
            past.append(a["c"])
    n_cells = len(past)
    if len(atoms) != 16 * n_cells:
        raise InvalidMeasure(
            f"expected {16 * n_cells} atoms for {n_cells} past cells, got {len(atoms)}")
    # position of each listed atom inside the canonical layout
    perm = np.full(16 * n_cells, -1, dtype=int)
    for pos, a in enumerate(atoms):
        idx = _atom_index(n_cells, a["alpha"], int(a["i"]), a["beta"], int(a["j"]),
                          past.index(a["c"]))
        if perm[idx] != -1:
            raise InvalidMeasure(f"duplicate atom {a!r}")
        perm[idx] = pos
    space = space_for_past(past)
    if "weights" in obj:
        w = np.asarray(obj["weights"], dtype=float)
        if w.shape != (16 * n_cells,):
            raise InvalidMeasure("weights length does not match the atom list")
        return StructuredModel(past, ClassicalMeasure(space, w[perm]))
    if "matrix" in obj:
        m = np.array([[_entry_from_json(v) for v in row] for row in obj["matrix"]],
                     dtype=complex)
        if m.shape != (16 * n_cells, 16 * n_cells):
            raise InvalidMeasure("matrix shape does not match the atom list")
        return StructuredModel(past, DecoherenceFunctional(space, m[np.ix_(perm, perm)]))
    raise InvalidMeasure("structured model JSON needs 'weights' or 'matrix'")


def load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def dump_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def to_jsonable(value):
    """Recursively convert numpy scalars/arrays and tuples for json.dump."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value
