"""Image minimization by dependency closure.

The keep-set is everything reachable along link-dependency edges from the
entrypoints plus whatever the runtime trace touched. Cycles are fine.
Sizes are reported in decimal megabytes (10^6 bytes).
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .model import InvariantError, ParseError, SpecReferenceError

MB = 10**6


class SlimError(ValueError):
    pass


@dataclass(frozen=True)
class ImageModel:
    files: dict[str, int]  # path -> size in bytes
    deps: tuple[tuple[str, str], ...] = ()
    entrypoints: tuple[str, ...] = ()

    def __post_init__(self):
        for path, size in self.files.items():
            if size < 0:
                raise InvariantError(f"files[{path}]", "size must be >= 0")
        for i, (a, b) in enumerate(self.deps):
            for p in (a, b):
                if p not in self.files:
                    raise SpecReferenceError(f"deps[{i}]", f"unknown path {p!r}")
        for i, p in enumerate(self.entrypoints):
            if p not in self.files:
                raise SpecReferenceError(f"entrypoints[{i}]", f"unknown path {p!r}")

    @property
    def size(self) -> int:
        return sum(self.files.values())

    @classmethod
    def from_dict(cls, raw) -> "ImageModel":
        if not isinstance(raw, dict):
            raise ParseError("", "image document must be an object")
        for key in raw:
            if key not in ("files", "deps", "entrypoints"):
                raise ParseError(key, f"unknown key {key!r}")
        files: dict[str, int] = {}
        for i, f in enumerate(raw.get("files", [])):
            if not isinstance(f, dict) or set(f) != {"path", "size"}:
                raise ParseError(f"files[{i}]", "expected {path, size}")
            if not isinstance(f["size"], int) or isinstance(f["size"], bool):
                raise ParseError(f"files[{i}].size", "expected an integer")
            if f["path"] in files:
                raise InvariantError(f"files[{i}]", f"duplicate path {f['path']!r}")
            files[f["path"]] = f["size"]
        deps = []
        for i, e in enumerate(raw.get("deps", [])):
            if not isinstance(e, list) or len(e) != 2:
                raise ParseError(f"deps[{i}]", "expected [from, to]")
            deps.append((e[0], e[1]))
        return cls(files, tuple(deps), tuple(raw.get("entrypoints", [])))

    @classmethod
    def loads(cls, text: str) -> "ImageModel":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise ParseError("", f"malformed JSON: {e.msg}") from None


@dataclass(frozen=True)
class RuntimeTrace:
    accessed: frozenset[str] = frozenset()

    @classmethod
    def loads(cls, text: str) -> "RuntimeTrace":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError("", f"malformed JSON: {e.msg}") from None
        if not isinstance(raw, dict) or set(raw) - {"accessed"}:
            raise ParseError("", "trace document must be {\"accessed\": [...]}")
        return cls(frozenset(raw.get("accessed", [])))


@dataclass(frozen=True)
class SlimReport:
    kept: frozenset[str]
    removed: frozenset[str]
    original_size: int
    slimmed_size: int
    reduction_percent: Decimal
    unknown_trace_paths: tuple[str, ...] = ()

    @property
    def ratio(self) -> float:
        """How many times smaller the slimmed image is."""
        return self.original_size / self.slimmed_size if self.slimmed_size else float("inf")

    def to_dict(self) -> dict:
        return {
            "kept": sorted(self.kept),
            "removed": sorted(self.removed),
            "original_size": self.original_size,
            "slimmed_size": self.slimmed_size,
            "reduction_percent": float(self.reduction_percent),
            "unknown_trace_paths": list(self.unknown_trace_paths),
        }

    def table(self) -> str:
        rows = [
            ("original", f"{self.original_size / MB:.1f} MB", f"{len(self.kept) + len(self.removed)} files"),
            ("slimmed", f"{self.slimmed_size / MB:.1f} MB", f"{len(self.kept)} files"),
            ("removed", f"{(self.original_size - self.slimmed_size) / MB:.1f} MB", f"{len(self.removed)} files"),
        ]
        out = [f"{a:<10}{b:>14}  {c}" for a, b, c in rows]
        out.append(f"reduction {self.reduction_percent}%")
        for p in self.unknown_trace_paths:
            out.append(f"unknown trace path: {p}")
        return "\n".join(out) + "\n"


def compute_keep_set(image: ImageModel, trace: RuntimeTrace = RuntimeTrace()) -> set[str]:
    adj: dict[str, list[str]] = {}
    for a, b in image.deps:
        adj.setdefault(a, []).append(b)
    seeds = set(image.entrypoints) | (set(trace.accessed) & image.files.keys())
    keep = set(seeds)
    todo = deque(sorted(seeds))
    while todo:
        for nxt in adj.get(todo.popleft(), ()):
            if nxt not in keep:
                keep.add(nxt)
                todo.append(nxt)
    return keep


def reduction_percent(original: int, slimmed: int) -> Decimal:
    if original <= 0:
        raise SlimError("original image size is 0; reduction is undefined")
    pct = (Decimal(1) - Decimal(slimmed) / Decimal(original)) * 100
    return pct.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)


def slim_report(image: ImageModel, keep: set[str], trace: RuntimeTrace | None = None) -> SlimReport:
    stray = set(keep) - image.files.keys()
    if stray:
        raise SlimError(f"keep-set names paths outside the image: {sorted(stray)}")
    original = image.size
    slimmed = sum(image.files[p] for p in keep)
    unknown = tuple(sorted(trace.accessed - image.files.keys())) if trace else ()
    return SlimReport(
        kept=frozenset(keep),
        removed=frozenset(image.files.keys() - keep),
        original_size=original,
        slimmed_size=slimmed,
        reduction_percent=reduction_percent(original, slimmed),
        unknown_trace_paths=unknown,
    )
