"""Problem instances: generation, validation, and the GIPLAB v1 file format.

An instance is the data (A, b, c) of the binary program

    max c @ x   s.t.   A @ x <= b,   x in {0,1}^n

with A (m x n) and c drawn with i.i.d. standard normal entries and b chosen
by a :class:`BSpec`.  Instances are immutable after construction and freely
shareable across workers.

The on-disk format is a self-describing UTF-8 text document::

    GIPLAB v1
    <m> <n>
    <b-spec descriptor>
    <seed token or ->
    <m lines of b>
    <n lines of c>
    <m rows of A, n whitespace-separated entries each>

Numbers are rendered as shortest round-trip decimals, so serialization is
bit-exact and diffable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timezone

import numpy as np

from .rng import RngHandle, gaussian_matrix

__all__ = [
    "BSpec",
    "InstanceMeta",
    "Instance",
    "InstanceFormatError",
    "generate",
    "validate_b",
    "serialize",
    "deserialize",
    "write_instance",
    "read_instance",
]

MAGIC = "GIPLAB v1"


class InstanceFormatError(ValueError):
    """Raised on malformed instance documents; the message names the field."""


@dataclass(frozen=True)
class BSpec:
    """Right-hand-side recipe: zeros, scaled_ones(beta), gaussian, or explicit."""

    kind: str
    values: tuple[float, ...] | None = None

    _KINDS = ("zeros", "gaussian", "scaled_ones", "explicit")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown b_spec kind: {self.kind!r}")
        needs_values = self.kind in ("scaled_ones", "explicit")
        if needs_values and not self.values:
            raise ValueError(f"b_spec {self.kind!r} requires values")
        if not needs_values and self.values is not None:
            raise ValueError(f"b_spec {self.kind!r} takes no values")
        if self.values is not None and not all(np.isfinite(self.values)):
            raise ValueError("b_spec values must be finite")

    @classmethod
    def zeros(cls) -> "BSpec":
        return cls("zeros")

    @classmethod
    def gaussian(cls) -> "BSpec":
        return cls("gaussian")

    @classmethod
    def scaled_ones(cls, beta) -> "BSpec":
        return cls("scaled_ones", tuple(float(v) for v in np.atleast_1d(beta)))

    @classmethod
    def explicit(cls, values) -> "BSpec":
        return cls("explicit", tuple(float(v) for v in np.atleast_1d(values)))

    def descriptor(self) -> str:
        if self.values is None:
            return self.kind
        return self.kind + " " + " ".join(repr(v) for v in self.values)

    @classmethod
    def parse(cls, text: str) -> "BSpec":
        parts = text.split()
        if not parts:
            raise InstanceFormatError("empty b_spec descriptor")
        kind = parts[0]
        if kind not in cls._KINDS:
            raise InstanceFormatError(f"unknown b_spec kind: {kind!r}")
        if kind in ("zeros", "gaussian"):
            if len(parts) > 1:
                raise InstanceFormatError(f"b_spec {kind!r} takes no values")
            return cls(kind)
        try:
            values = tuple(float(tok) for tok in parts[1:])
        except ValueError as exc:
            raise InstanceFormatError(f"bad b_spec value: {exc}") from None
        return cls(kind, values)

    def build_b(self, m: int, n: int, rng: RngHandle | None) -> np.ndarray:
        if self.kind == "zeros":
            return np.zeros(m)
        if self.kind == "gaussian":
            if rng is None:
                raise ValueError("gaussian b_spec needs an rng")
            return rng.gen.standard_normal(m)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (m,):
            raise ValueError(
                f"b_spec {self.kind!r} has {values.size} values, expected {m}"
            )
        if self.kind == "scaled_ones":
            return values * n
        return values.copy()


@dataclass(frozen=True)
class InstanceMeta:
    """Provenance: generator identity token, b recipe, creation timestamp."""

    seed: str | None
    b_spec: str
    created_at: str | None = None


@dataclass(frozen=True, eq=False)
class Instance:
    m: int
    n: int
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    meta: InstanceMeta

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("instance dimensions must be >= 1")
        if self.A.shape != (self.m, self.n):
            raise ValueError("A has inconsistent shape")
        if self.b.shape != (self.m,):
            raise ValueError("b has inconsistent shape")
        if self.c.shape != (self.n,):
            raise ValueError("c has inconsistent shape")
        for name in ("A", "b", "c"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

    def with_column(self, i: int, c_i: float, a_col: np.ndarray) -> "Instance":
        """Copy of the instance with objective/constraint column i replaced."""
        a = self.A.copy()
        a[:, i] = a_col
        c = self.c.copy()
        c[i] = c_i
        return replace(self, A=a, c=c)


def generate(m: int, n: int, b_spec: BSpec, rng: RngHandle) -> Instance:
    """Fresh instance: A then c from the stream, then b per the recipe.

    The draw order (A row-major, then c, then b if random) is part of the
    reproducibility contract.
    """
    a = gaussian_matrix(m, n, rng)
    c = rng.gen.standard_normal(n)
    b = b_spec.build_b(m, n, rng)
    meta = InstanceMeta(
        seed=rng.key,
        b_spec=b_spec.descriptor(),
        created_at=datetime.now(timezone.utc).isoformat(),
    )
    return Instance(m=m, n=n, A=a, b=b, c=c, meta=meta)


def validate_b(instance: Instance) -> bool:
    """True iff the negative part of b has 2-norm at most n/10."""
    neg = np.minimum(instance.b, 0.0)
    return bool(np.linalg.norm(neg) <= instance.n / 10.0)


def serialize(instance: Instance) -> bytes:
    lines = [MAGIC, f"{instance.m} {instance.n}", instance.meta.b_spec]
    lines.append(instance.meta.seed if instance.meta.seed is not None else "-")
    lines.extend(repr(float(v)) for v in instance.b)
    lines.extend(repr(float(v)) for v in instance.c)
    for row in instance.A:
        lines.append(" ".join(repr(float(v)) for v in row))
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_float(tok: str, what: str) -> float:
    try:
        value = float(tok)
    except ValueError:
        raise InstanceFormatError(f"bad {what}: {tok!r}") from None
    if not np.isfinite(value):
        raise InstanceFormatError(f"non-finite {what}: {tok!r}")
    return value


def deserialize(data: bytes) -> Instance:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise InstanceFormatError("document is not UTF-8 text") from None
    lines = text.splitlines()
    if not lines:
        raise InstanceFormatError("empty document (missing header)")
    if lines[0].strip() != MAGIC:
        raise InstanceFormatError(f"bad header line: {lines[0]!r}")
    if len(lines) < 4:
        raise InstanceFormatError("truncated document (missing dimensions)")
    dims = lines[1].split()
    if len(dims) != 2:
        raise InstanceFormatError(f"bad dimension line: {lines[1]!r}")
    try:
        m, n = int(dims[0]), int(dims[1])
    except ValueError:
        raise InstanceFormatError(f"bad dimension line: {lines[1]!r}") from None
    if m < 1 or n < 1:
        raise InstanceFormatError(f"dimensions must be positive: {lines[1]!r}")
    b_spec_text = lines[2].strip()
    BSpec.parse(b_spec_text)  # validates the descriptor
    seed_tok = lines[3].strip()
    seed = None if seed_tok == "-" else seed_tok

    body = lines[4:]
    if len(body) < m + n:
        raise InstanceFormatError(
            f"truncated document: expected {m + n} vector lines, got {len(body)}"
        )
    b = np.array([_parse_float(body[i].strip(), f"b[{i}]") for i in range(m)])
    c = np.array(
        [_parse_float(body[m + i].strip(), f"c[{i}]") for i in range(n)]
    )
    # A is row-major and whitespace-separated; any line layout is accepted
    toks = " ".join(body[m + n :]).split()
    if len(toks) != m * n:
        raise InstanceFormatError(
            f"A: expected {m * n} entries, got {len(toks)}"
        )
    a = np.empty((m, n))
    for pos, tok in enumerate(toks):
        a[pos // n, pos % n] = _parse_float(tok, f"A[{pos // n},{pos % n}]")
    meta = InstanceMeta(seed=seed, b_spec=b_spec_text)
    return Instance(m=m, n=n, A=a, b=b, c=c, meta=meta)


def write_instance(path, instance: Instance) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(instance))


def read_instance(path) -> Instance:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
