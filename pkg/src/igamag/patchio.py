"""Patch exchange format: JSON with nested arrays, stable across versions.

One file holds a list of patches (degrees, knot vectors, control points,
weights, region tag), the detected interface adjacency records, and the
boundary tags.  See FORMATS.md for the documented schema.
"""

from __future__ import annotations

import json

import numpy as np

from .multipatch import Interface, MultiPatchDomain
from .splines import KnotVector, NurbsPatch

__all__ = ["write_domain", "read_domain", "patch_to_dict", "patch_from_dict"]

FORMAT_NAME = "igamag-patches"
FORMAT_VERSION = 1


def patch_to_dict(patch):
    return {
        "degrees": [patch.kv_u.degree, patch.kv_v.degree],
        "knots_u": patch.kv_u.knots.tolist(),
        "knots_v": patch.kv_v.knots.tolist(),
        "control_points": patch.control_net.tolist(),
        "weights": patch.weights.tolist(),
    }


def patch_from_dict(d):
    kv_u = KnotVector(d["degrees"][0], d["knots_u"])
    kv_v = KnotVector(d["degrees"][1], d["knots_v"])
    return NurbsPatch(kv_u, kv_v, np.asarray(d["control_points"]), np.asarray(d["weights"]))


def write_domain(path, domain):
    """Serialize a multipatch domain (geometry, adjacency, tags, regions)."""
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "patches": [
            dict(patch_to_dict(p), region=domain.regions[i])
            for i, p in enumerate(domain.patches)
        ],
        "interfaces": [
            {
                "patch_a": i.patch_a,
                "side_a": i.side_a,
                "patch_b": i.patch_b,
                "side_b": i.side_b,
                "reversed": i.reversed,
            }
            for i in domain.interfaces
        ],
        "boundaries": [
            {"patch": p, "side": s, "tag": tag}
            for (p, s), tag in sorted(domain.boundary_tags.items())
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_domain(path):
    """Inverse of :func:`write_domain`."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT_NAME:
        raise ValueError(f"not a {FORMAT_NAME} file: {path}")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {doc.get('version')}")
    patches = [patch_from_dict(d) for d in doc["patches"]]
    regions = [d.get("region", "default") for d in doc["patches"]]
    interfaces = [
        Interface(d["patch_a"], d["side_a"], d["patch_b"], d["side_b"], d["reversed"])
        for d in doc["interfaces"]
    ]
    tags = {(d["patch"], d["side"]): d["tag"] for d in doc["boundaries"]}
    return MultiPatchDomain(patches, interfaces, tags, regions=regions)
