"""Spectral data for Fourier components of the Kohn Laplacian.

A ``SpectrumTable`` is a finite list of (degree, eigenvalue, multiplicity)
lines plus a tail policy describing everything beyond the listed lines: either
``finite`` (nothing omitted) or a quadratic growth law with certified bounds.

The built-in model is the unit circle bundle of the dual of the degree-1
positive line bundle over the projective line (the Hopf fibration of the
3-sphere).  Normalization convention, fixed once and used consistently by the
geometry side: the circle generator has unit length and the horizontal metric
is the Levi form itself, so the constant Levi eigenvalue is 1 and the total
volume is 4 pi^2.  In this convention the candidate closed forms are

    degree 0:  lambda_k = k (k + m + 1),  multiplicity m + 2k + 1,  k >= 0
    degree 1:  the nonzero degree-0 lines with identical multiplicities

with an (m+1)-dimensional kernel in degree 0.  The closed form is gated by an
independent Galerkin oracle (see ``crtorsion.oracle``) before acceptance tests
rely on it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Tuple

import numpy as np

from .density import LeviSpectrum
from .errors import DomainError, EmptyDegreeError, ParseError, UnsupportedTailError
from .tails import QuadraticLaw, tail_bound, trust_floor

CP1_LEVI_EIGENVALUE = 1.0
CP1_VOLUME = 4.0 * math.pi ** 2


class SpectrumLine(NamedTuple):
    q: int
    lam: float
    mult: int


class TraceValue(NamedTuple):
    """A spectral sum together with the certified bound on the omitted tail."""

    value: float
    tail_bound: float


@dataclass(frozen=True)
class FiniteTail:
    """No spectrum beyond the listed lines."""

    kind: str = field(default="finite", init=False)


@dataclass(frozen=True)
class QuadraticTail:
    """Lines k >= k_next follow ``law`` in each degree of ``degrees``.

    ``covers_all_lines`` records that the *listed* lines of those degrees obey
    the same law from k = k_first on, which licenses closed-form expansion
    coefficients for the full trace.
    """

    k_next: int
    law: QuadraticLaw
    degrees: Tuple[int, ...]
    covers_all_lines: bool = False
    k_first: int = 1
    kind: str = field(default="quadratic", init=False)


@dataclass(frozen=True)
class SpectrumTable:
    lines: Tuple[SpectrumLine, ...]
    n: int
    m: int = 0
    tail: FiniteTail | QuadraticTail = field(default_factory=FiniteTail)

    @classmethod
    def from_lines(
        cls,
        lines: Iterable[Tuple[int, float, int]],
        n: int,
        m: int = 0,
        tail: FiniteTail | QuadraticTail | None = None,
    ) -> "SpectrumTable":
        merged: dict = {}
        for q, lam, mult in lines:
            q = int(q)
            lam = float(lam)
            mult = int(mult)
            if not 0 <= q <= n:
                raise DomainError(f"degree {q} outside [0, {n}]")
            if lam < 0:
                raise DomainError(f"negative eigenvalue {lam}")
            if mult < 1:
                raise DomainError(f"multiplicity {mult} < 1")
            key = (q, lam)
            merged[key] = merged.get(key, 0) + mult
        ordered = tuple(
            SpectrumLine(q, lam, merged[(q, lam)])
            for (q, lam) in sorted(merged)
        )
        return cls(ordered, n, m, tail if tail is not None else FiniteTail())

    # -- cached numeric views -------------------------------------------

    @cached_property
    def _arrays(self):
        qs = np.array([l.q for l in self.lines], dtype=float)
        lams = np.array([l.lam for l in self.lines], dtype=float)
        mults = np.array([l.mult for l in self.lines], dtype=float)
        nweight = ((-1.0) ** qs) * qs
        return qs, lams, mults, nweight

    @property
    def min_nonzero_eigenvalue(self) -> float:
        _, lams, _, _ = self._arrays
        nz = lams[lams > 0]
        if nz.size == 0:
            raise EmptyDegreeError("spectrum has no nonzero eigenvalues")
        return float(nz.min())

    def supertrace_N_kernel(self) -> float:
        """STr[N] restricted to the zero modes (t-independent)."""
        qs, lams, mults, w = self._arrays
        sel = lams == 0.0
        return float(np.sum(w[sel] * mults[sel]))


def heat_supertrace_N(
    spec: SpectrumTable, t: float, nonzero_only: bool
) -> TraceValue:
    """sum over lines of (-1)^q q mult e^{-lam t}, with certified tail bound.

    ``nonzero_only`` drops the zero modes (the projector-complement trace).
    For a quadratic tail policy the omitted-tail bound is attached; the value
    itself contains only the listed lines.
    """
    if t <= 0:
        raise DomainError("heat_supertrace_N requires t > 0")
    qs, lams, mults, w = spec._arrays
    sel = lams > 0.0 if nonzero_only else np.ones_like(lams, dtype=bool)
    x = lams[sel] * t
    value = float(np.sum(w[sel] * mults[sel] * np.exp(-np.minimum(x, 745.0)) * (x < 745.0)))
    bound = _supertrace_tail_bound(spec, t)
    return TraceValue(value, bound)


def trace_degree(
    spec: SpectrumTable, q: int, t: float, nonzero_only: bool = True
) -> TraceValue:
    """Plain degree-q heat trace with tail bound."""
    if t <= 0:
        raise DomainError("trace_degree requires t > 0")
    qs, lams, mults, _ = spec._arrays
    sel = qs == q
    if nonzero_only:
        sel = sel & (lams > 0.0)
    x = lams[sel] * t
    value = float(np.sum(mults[sel] * np.exp(-np.minimum(x, 745.0)) * (x < 745.0)))
    bound = 0.0
    if isinstance(spec.tail, QuadraticTail) and q in spec.tail.degrees:
        bound = tail_bound(spec.tail.law, spec.tail.k_next, t)
    return TraceValue(value, bound)


def _supertrace_tail_bound(spec: SpectrumTable, t: float) -> float:
    if isinstance(spec.tail, FiniteTail):
        return 0.0
    if not isinstance(spec.tail, QuadraticTail):  # pragma: no cover
        raise UnsupportedTailError(f"unknown tail policy {spec.tail!r}")
    weight = sum(q for q in spec.tail.degrees if q >= 1)
    if weight == 0:
        return 0.0
    return weight * tail_bound(spec.tail.law, spec.tail.k_next, t)


def supertrace_trust_floor(spec: SpectrumTable, tol: float) -> float:
    """Smallest t at which the truncated super trace is certified to ``tol``."""
    if isinstance(spec.tail, FiniteTail):
        return 0.0
    weight = max(1, sum(q for q in spec.tail.degrees if q >= 1))
    return trust_floor(spec.tail.law, spec.tail.k_next, tol / weight)


def spectral_gap(spec: SpectrumTable, q: int) -> float:
    """Smallest nonzero eigenvalue in degree q."""
    candidates = [l.lam for l in spec.lines if l.q == q and l.lam > 0]
    if not candidates:
        raise EmptyDegreeError(f"no nonzero eigenvalue in degree {q}")
    return min(candidates)


def decay_certificate(spec: SpectrumTable) -> Tuple[float, float]:
    """(C, c) with |STr[N e^{-t Box} perp]| <= C e^{-c t} for t >= 1.

    Uses c = lambda_min / 2: each term e^{-lam t} <= e^{-lam_min t/2} e^{-lam/2}
    for t >= 1, so C = sum q mult e^{-lam/2} plus the tail bound at t = 1/2.
    """
    qs, lams, mults, _ = spec._arrays
    sel = lams > 0.0
    lam_min = spec.min_nonzero_eigenvalue
    c = lam_min / 2.0
    C = float(np.sum(qs[sel] * mults[sel] * np.exp(-lams[sel] / 2.0)))
    C += _supertrace_tail_bound(spec, 0.5)
    return C, c


# ---------------------------------------------------------------------------
# Built-in circle-bundle model
# ---------------------------------------------------------------------------


def cp1_spectrum(m: int, k_max: int) -> SpectrumTable:
    """Fourier-component Kohn Laplacian spectrum on the circle bundle model.

    Closed forms (validated by the Galerkin oracle): degree-0 eigenvalues
    k(k+m+1) with multiplicity m+2k+1 for k = 0..k_max (k = 0 is the
    (m+1)-dimensional kernel), degree-1 equal to the nonzero degree-0 lines.
    The omitted k > k_max lines are recorded as a quadratic tail law.
    """
    if m < 0:
        raise DomainError("m must be >= 0")
    if k_max < 1:
        raise DomainError("k_max must be >= 1")
    lines = [(0, 0.0, m + 1)]
    for k in range(1, k_max + 1):
        lam = float(k) * (k + m + 1)
        mult = m + 2 * k + 1
        lines.append((0, lam, mult))
        lines.append((1, lam, mult))
    law = QuadraticLaw(a2=1.0, a1=float(m + 1), a0=0.0, m1=2.0, m0=float(m + 1))
    tail = QuadraticTail(
        k_next=k_max + 1, law=law, degrees=(0, 1), covers_all_lines=True, k_first=1
    )
    return SpectrumTable.from_lines(lines, n=1, m=m, tail=tail)


@dataclass(frozen=True)
class GeometryModel:
    """Homogeneous geometry data feeding densities and the asymptotic RHS."""

    n: int
    levi: LeviSpectrum
    volume: float
    rank_e: int

    def __post_init__(self):
        if self.volume <= 0:
            raise DomainError("volume must be positive")
        if self.rank_e < 1:
            raise DomainError("rank_e must be >= 1")
        if self.levi.n != self.n:
            raise DomainError("levi.n must equal n")


def cp1_geometry(rank_e: int = 1) -> GeometryModel:
    """Geometry of the circle-bundle model in the package convention."""
    return GeometryModel(
        n=1,
        levi=LeviSpectrum(1, (CP1_LEVI_EIGENVALUE,)),
        volume=CP1_VOLUME,
        rank_e=rank_e,
    )


def load_geometry(path_or_stream) -> GeometryModel:
    """Read the geometry JSON format: n, eigenvalues, volume, rank_e."""
    if hasattr(path_or_stream, "read"):
        data = json.load(path_or_stream)
    else:
        with open(path_or_stream, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    try:
        n = int(data["n"])
        eigenvalues = tuple(float(a) for a in data["eigenvalues"])
        volume = float(data["volume"])
        rank_e = int(data["rank_e"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"invalid geometry file: {exc}") from exc
    return GeometryModel(n, LeviSpectrum(n, eigenvalues), volume, rank_e)


def dump_geometry(model: GeometryModel) -> str:
    return json.dumps(
        {
            "n": model.n,
            "eigenvalues": [float(a) for a in model.levi.eigenvalues],
            "volume": model.volume,
            "rank_e": model.rank_e,
        },
        indent=2,
    )


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def ingest_spectrum(source, n: int, m: int = 0) -> SpectrumTable:
    """Parse the CSV spectrum format: header ``q,lambda,mult``, UTF-8,
    ``#``-comments ignored; validates, merges duplicates, sorts.
    """
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    elif hasattr(source, "read"):
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    else:
        raise DomainError(f"unsupported spectrum source {type(source)!r}")
    rows = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if not header_seen:
            cols = [c.strip().lower() for c in stripped.split(",")]
            if cols != ["q", "lambda", "mult"]:
                raise ParseError(lineno, f"expected header 'q,lambda,mult', got {stripped!r}")
            header_seen = True
            continue
        parts = [c.strip() for c in stripped.split(",")]
        if len(parts) != 3:
            raise ParseError(lineno, f"expected 3 columns, got {len(parts)}")
        try:
            q = int(parts[0])
            lam = float(parts[1])
            mult = int(parts[2])
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from exc
        if not 0 <= q <= n:
            raise ParseError(lineno, f"degree {q} outside [0, {n}]")
        if lam < 0:
            raise ParseError(lineno, f"negative eigenvalue {lam}")
        if mult < 1:
            raise ParseError(lineno, f"multiplicity {mult} must be positive")
        rows.append((q, lam, mult))
    if not header_seen:
        raise ParseError(1, "missing header 'q,lambda,mult'")
    return SpectrumTable.from_lines(rows, n=n, m=m, tail=FiniteTail())
