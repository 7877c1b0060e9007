"""JSON documents for expansions.

A document is one JSON object::

    {"schema_version": 1, "d": 2, "order": 4,
     "signature": {"n": 1, "N": 5, "ell": -1, "variant": "hat"},
     "terms": [{"k": 1, "j": 1, "basis": [{"l": 1, "m": 1, "coeff": -0.886}]}]}

Vector fields use ``"components": [terms, terms, ...]`` instead of ``"terms"``.
Floats are written with Python's shortest round-trip representation, so
parsing a written document reproduces every coefficient bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .expansion import AsymExpansion, Grade, SpaceSignature, VectorExpansion
from .sphere import SUPPORTED_DIMS, SphereFn, basis_labels

SCHEMA_VERSION = 1
_TOP_KEYS = {"schema_version", "d", "order", "signature", "terms", "components", "compact_part"}
_SIG_KEYS = {"n", "N", "ell", "variant"}
_TERM_KEYS = {"k", "j", "basis"}
_BASIS_KEYS = {"l", "m", "coeff"}


class DocumentError(ValueError):
    """Malformed expansion document."""


@dataclass(frozen=True, eq=False)
class ExpansionDocument:
    d: int
    value: object  # AsymExpansion or VectorExpansion
    signature: SpaceSignature | None = None
    compact_part: str | None = None

    @property
    def is_vector(self):
        return isinstance(self.value, VectorExpansion)

    # -- writing ----------------------------------------------------------
    def to_dict(self):
        out = {"schema_version": SCHEMA_VERSION, "d": self.d}
        order = self.value.components[0].order if self.is_vector else self.value.order
        out["order"] = order
        if self.signature is not None:
            s = self.signature
            out["signature"] = {"n": s.n, "N": s.N, "ell": s.ell, "variant": s.variant}
        if self.is_vector:
            out["components"] = [_terms_to_list(c) for c in self.value]
        else:
            out["terms"] = _terms_to_list(self.value)
        if self.compact_part is not None:
            out["compact_part"] = self.compact_part
        return out

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    # -- reading ----------------------------------------------------------
    @classmethod
    def loads(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise DocumentError("document must be a JSON object")
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise DocumentError(f"unknown fields: {sorted(unknown)}")
        if data.get("schema_version") != SCHEMA_VERSION:
            raise DocumentError(f"unsupported schema_version {data.get('schema_version')!r}")
        d = data.get("d")
        if d not in SUPPORTED_DIMS:
            raise DocumentError(f"d must be one of {SUPPORTED_DIMS}")
        order = data.get("order")
        if order is not None and not isinstance(order, int):
            raise DocumentError("order must be an integer or null")
        sig = None
        if data.get("signature") is not None:
            s = data["signature"]
            if not isinstance(s, dict) or set(s) != _SIG_KEYS:
                raise DocumentError(f"signature needs exactly the keys {sorted(_SIG_KEYS)}")
            try:
                sig = SpaceSignature(int(s["n"]), int(s["N"]), int(s["ell"]), str(s["variant"]), d)
            except (TypeError, ValueError) as exc:
                raise DocumentError(f"bad signature: {exc}") from exc
        has_t, has_c = "terms" in data, "components" in data
        if has_t == has_c:
            raise DocumentError("exactly one of 'terms' or 'components' is required")
        if has_t:
            value = AsymExpansion(d, _terms_from_list(data["terms"], d), order)
        else:
            comps = data["components"]
            if not isinstance(comps, list) or len(comps) != d:
                raise DocumentError(f"'components' must list {d} term lists")
            value = VectorExpansion(tuple(AsymExpansion(d, _terms_from_list(t, d), order) for t in comps))
        cp = data.get("compact_part")
        if cp is not None and not isinstance(cp, str):
            raise DocumentError("compact_part must be a path string")
        return cls(d, value, sig, cp)


def _terms_to_list(u):
    out = []
    for g, f in u.items():
        basis = [
            {"l": l, "m": m, "coeff": float(c)}
            for (l, m), c in zip(basis_labels(f.d, f.L), f.coeffs)
            if c != 0.0
        ]
        out.append({"k": g.k, "j": g.j, "basis": basis})
    return out


def _terms_from_list(items, d):
    if not isinstance(items, list):
        raise DocumentError("terms must be a list")
    terms = {}
    for item in items:
        if not isinstance(item, dict) or set(item) != _TERM_KEYS:
            raise DocumentError(f"each term needs exactly the keys {sorted(_TERM_KEYS)}")
        k, j = item["k"], item["j"]
        if not isinstance(k, int) or not isinstance(j, int) or j < 0:
            raise DocumentError(f"bad grade ({k!r}, {j!r})")
        entries = {}
        if not isinstance(item["basis"], list):
            raise DocumentError("basis must be a list")
        for b in item["basis"]:
            if not isinstance(b, dict) or set(b) != _BASIS_KEYS:
                raise DocumentError(f"each basis entry needs exactly the keys {sorted(_BASIS_KEYS)}")
            l, m, c = b["l"], b["m"], b["coeff"]
            if not isinstance(l, int) or not isinstance(m, int) or l < 0 or abs(m) > l:
                raise DocumentError(f"bad basis label ({l!r}, {m!r})")
            if d == 2 and l > 0 and abs(m) != l:
                raise DocumentError(f"d=2 labels have |m| = l, got ({l}, {m})")
            if not isinstance(c, (int, float)) or isinstance(c, bool) or not math.isfinite(c):
                raise DocumentError(f"bad coefficient {c!r}")
            if (l, m) in entries:
                raise DocumentError(f"duplicate basis label ({l}, {m})")
            entries[(l, m)] = float(c)
        g = Grade(k, j)
        if g in terms:
            raise DocumentError(f"duplicate grade {tuple(g)}")
        terms[g] = SphereFn.from_labels(d, entries) if entries else SphereFn.zero(d)
    return terms


def read_document(path):
    with open(path, encoding="utf-8") as fh:
        return ExpansionDocument.loads(fh.read())


def write_document(doc, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(doc.dumps())
