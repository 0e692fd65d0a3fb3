"""File formats: network JSON, measure JSON, trap-environment JSON, CSV tables.

Network files round-trip bit-exactly: floats are emitted with Python's
shortest round-trip repr.  Trap weights are written as decimal strings with
17 significant digits; distances and table values use 15 significant digits.
"""

from __future__ import annotations

import csv
import io
import json

from .errors import TrapnetsError
from .measures import DiscreteMeasure, PointMeasure
from .networks import ElectricalNetwork, build_network
from .traps import ScaleTriple, TrapEnvironment


def network_to_json(net: ElectricalNetwork, coords: dict | None = None) -> str:
    payload = {
        "vertices": list(net.vertex_ids),
        "edges": [[u, v, w] for u, v, w in sorted(net.edges())],
        "root": net.root,
    }
    if coords is not None:
        payload["coords"] = {str(v): list(c) for v, c in coords.items()}
    return json.dumps(payload, indent=None, separators=(",", ":"))


def network_from_json(text: str) -> ElectricalNetwork:
    payload = json.loads(text)
    try:
        return build_network(payload["vertices"],
                             [tuple(e) for e in payload["edges"]],
                             payload["root"])
    except KeyError as exc:
        raise TrapnetsError(f"network JSON missing field {exc}") from exc


def coords_from_json(text: str) -> dict | None:
    payload = json.loads(text)
    raw = payload.get("coords")
    if raw is None:
        return None
    return {int(v): tuple(c) for v, c in raw.items()}


def measure_to_json(measure) -> str:
    if isinstance(measure, DiscreteMeasure):
        rows = [{"point": p, "weight": w} for p, w in measure.atoms.items()]
    elif isinstance(measure, PointMeasure):
        if measure.marked:
            rows = [{"point": a[0], "mark": a[1], "weight": a[2]} for a in measure.atoms]
        else:
            rows = [{"point": a[0], "weight": a[1]} for a in measure.atoms]
    else:
        raise TrapnetsError("unsupported measure type")
    return json.dumps(rows, separators=(",", ":"))


def discrete_measure_from_json(text: str, carrier) -> DiscreteMeasure:
    rows = json.loads(text)
    atoms: dict = {}
    for row in rows:
        atoms[row["point"]] = atoms.get(row["point"], 0.0) + float(row["weight"])
    return DiscreteMeasure(carrier, atoms)


def point_measure_from_json(text: str, carrier) -> PointMeasure:
    rows = json.loads(text)
    marked = bool(rows) and "mark" in rows[0]
    if marked:
        atoms = tuple((r["point"], float(r["mark"]), float(r["weight"])) for r in rows)
    else:
        atoms = tuple((r["point"], float(r["weight"])) for r in rows)
    return PointMeasure(carrier, atoms, marked=marked)


def environment_to_json(env: TrapEnvironment, seed: int | None = None) -> str:
    payload = {
        "network": json.loads(network_to_json(env.network)),
        "weights": {str(v): format(env.nu.atoms[v], ".17g") for v in env.network.vertex_ids},
        "scale": [env.scale.a, env.scale.b, env.scale.c],
        "seed": seed,
    }
    return json.dumps(payload, separators=(",", ":"))


def environment_from_json(text: str, carrier=None) -> TrapEnvironment:
    payload = json.loads(text)
    net = network_from_json(json.dumps(payload["network"]))
    atoms = {int(v): float(w) for v, w in payload["weights"].items()}
    nu = DiscreteMeasure(carrier, atoms)
    a, b, c = payload["scale"]
    return TrapEnvironment(net, nu, ScaleTriple(a, b, c))


def plane_tree_to_json(tree) -> str:
    """Parent-array encoding (depth-first order) with the label sequence."""
    return json.dumps({"parent": list(tree.parent), "labels": list(tree.labels)},
                      separators=(",", ":"))


def plane_tree_from_json(text: str):
    from .ensembles import PlaneTree

    payload = json.loads(text)
    return PlaneTree(tuple(payload["parent"]), tuple(payload["labels"]))


def pointset_to_json(points) -> str:
    return json.dumps([list(p) for p in points], separators=(",", ":"))


def pointset_from_json(text: str) -> tuple:
    return tuple(tuple(p) for p in json.loads(text))


def format_value(x: float) -> str:
    return format(x, ".15g")


def surface_to_csv(surface) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["s", "t", "value"])
    for s, t, v in surface.rows():
        writer.writerow([format_value(s), format_value(t), format_value(v)])
    return buf.getvalue()


def kernel_to_csv(kernel) -> str:
    matrix = kernel.matrix
    if matrix.shape[0] > 100:
        raise TrapnetsError("kernel dumps are limited to 100 states")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    ids = kernel.generator.net.vertex_ids
    writer.writerow(["state"] + [str(v) for v in ids])
    for v, row in zip(ids, matrix):
        writer.writerow([str(v)] + [format_value(x) for x in row])
    return buf.getvalue()


def path_to_csv(path) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["state", "duration"])
    for s, d in zip(path.states, path.durations):
        writer.writerow([str(s), format_value(d)])
    return buf.getvalue()
