"""Torsion pipeline: expansion coefficients, the regularized log-determinant
derivative by two independent routes, the asymptotic right-hand side, and
m-sweep reports.

Route 1 (heat kernel): the four-term formula at z = 0 of the Mellin transform
of the degree-weighted heat super trace, delegated to ``mellin_at_zero`` with
theta(z) = -M[STr N e^{-t Box} perp](z).

Route 2 (direct): term-wise -log(lambda) over the listed lines plus analytic
continuation of the quadratic-law tail through Hurwitz zeta values.

The two routes share nothing numerically beyond the spectrum itself; their
agreement within the combined error budget is enforced on every report.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

from .errors import (
    ArityError,
    DomainError,
    EmptyDegreeError,
    TwoPathMismatchError,
    UnsupportedTailError,
)
from .mellin import GAMMA_PRIME_1, MellinInput, MellinResult, QuadratureConfig, mellin_at_zero
from .series import FitResult, fit_half_powers
from .spectra import (
    FiniteTail,
    GeometryModel,
    QuadraticTail,
    SpectrumTable,
    decay_certificate,
    heat_supertrace_N,
    supertrace_trust_floor,
)
from .tails import em_heat_series, zeta_log_tail

TWO_PI = 2.0 * math.pi

#: Default number of half-power slots (exponents -n .. -n + j_max/2).
DEFAULT_JMAX_EXTRA = 8


# ---------------------------------------------------------------------------
# Expansion coefficients of the heat super trace
# ---------------------------------------------------------------------------


def _covered_by_law(spec: SpectrumTable, line) -> bool:
    """Whether a listed line is one of the quadratic-law lines k_first..k_next-1.

    Matched by inverting the quadratic with a relative tolerance, so tables
    rebuilt through a rescaled law still match despite float rounding.
    """
    tail = spec.tail
    if not (isinstance(tail, QuadraticTail) and tail.covers_all_lines):
        return False
    if line.q not in tail.degrees:
        return False
    law = tail.law
    disc = law.a1 * law.a1 + 4.0 * law.a2 * (line.lam - law.a0)
    if disc < 0:
        return False
    k = round((-law.a1 + math.sqrt(disc)) / (2.0 * law.a2))
    if not tail.k_first <= k < tail.k_next:
        return False
    return abs(law.lam(k) - line.lam) <= 1e-9 * (1.0 + abs(line.lam))


def closed_form_bhat(spec: SpectrumTable, j_max: int | None = None) -> List[float]:
    """Exact expansion coefficients of STr[N e^{-t Box}] on the ladder
    t^{-n}, t^{-n+1/2}, ..., computed without fitting.

    Finite tables get the Taylor coefficients of the finite sum (no singular
    part).  Tables whose quadratic tail law covers all listed lines get the
    Euler-Maclaurin closed form of the full law sum, plus Taylor terms of any
    lines outside the law.  Anything else must go through ``extract_bhat``.
    """
    n = spec.n
    if j_max is None:
        j_max = 2 * n + DEFAULT_JMAX_EXTRA
    coeffs = [0.0] * (j_max + 1)
    trunc = (j_max - 2 * n) / 2.0 + 0.5  # first exponent beyond the ladder

    if isinstance(spec.tail, QuadraticTail) and spec.tail.covers_all_lines:
        law = spec.tail.law
        series = em_heat_series(law, spec.tail.k_first, trunc)
        for q in spec.tail.degrees:
            if q < 1:
                continue
            w = q if q % 2 == 0 else -q
            for j in range(j_max + 1):
                e = -n + j / 2.0
                if e < series.base_order or 2 * e >= series.trunc2:
                    continue
                coeffs[j] += w * series.coefficient(e)
    elif isinstance(spec.tail, QuadraticTail):
        raise UnsupportedTailError(
            "tail law does not cover the listed lines; use extract_bhat"
        )

    for line in spec.lines:
        if line.q == 0 or _covered_by_law(spec, line):
            continue
        w = line.q if line.q % 2 == 0 else -line.q
        # e^{-lam t} Taylor lands on integer exponents p >= 0, i.e. j = 2n + 2p
        p = 0
        while 2 * n + 2 * p <= j_max:
            term = (-line.lam) ** p / math.factorial(p) if p else 1.0
            coeffs[2 * n + 2 * p] += w * line.mult * term
            p += 1
    return coeffs


def extract_bhat(
    spec: SpectrumTable,
    n: int,
    num_terms: int,
    t_grid: Sequence[float],
    tail_rel_tol: float = 1e-9,
) -> FitResult:
    """Fit the expansion coefficients from sampled super traces.

    The grid must lie where the truncation tail bound is negligible relative
    to the sampled values; violating grids raise DomainError.
    """
    if num_terms > 2 * n + 2 + DEFAULT_JMAX_EXTRA:
        raise ArityError(f"num_terms {num_terms} beyond supported ladder")
    samples = []
    scale = 0.0
    for t in t_grid:
        tv = heat_supertrace_N(spec, float(t), False)
        samples.append((float(t), tv.value))
        scale = max(scale, abs(tv.value))
        if tv.tail_bound > tail_rel_tol * (abs(tv.value) + 1.0):
            raise DomainError(
                f"t = {t:.3g} lies below the trusted floor of the truncated "
                f"table (tail bound {tv.tail_bound:.2e})"
            )
    return fit_half_powers(samples, -n, num_terms)


# ---------------------------------------------------------------------------
# Route 1: heat-kernel / Mellin path
# ---------------------------------------------------------------------------


def _mellin_input_full(
    spec: SpectrumTable, n: int, bhat: Sequence[float], cfg: QuadratureConfig
) -> MellinInput:
    kernel = spec.supertrace_N_kernel()
    expansion = list(float(b) for b in bhat)
    expansion[2 * n] = expansion[2 * n] - kernel
    floor = supertrace_trust_floor(spec, tol=min(1e-13, cfg.abs_tol * 1e-2))

    def f_perp(t: float) -> float:
        return heat_supertrace_N(spec, t, True).value

    try:
        C, c = decay_certificate(spec)
    except EmptyDegreeError:
        C, c = 0.0, 1.0
    return MellinInput(f_perp, n, tuple(expansion), (C, c), floor)


def theta_prime_zero_result(
    spec: SpectrumTable,
    n: int,
    bhat: Sequence[float],
    cfg: QuadratureConfig | None = None,
    gamma_prime_1: float = GAMMA_PRIME_1,
) -> MellinResult:
    """Heat-kernel route with error estimate: theta'(0) = -M'[...](0)."""
    if len(bhat) < 2 * n + 1:
        raise ArityError(
            f"bhat must supply the ladder through t^0: need {2 * n + 1} "
            f"coefficients, got {len(bhat)}"
        )
    cfg = cfg or QuadratureConfig()
    inp = _mellin_input_full(spec, n, bhat, cfg)
    res = mellin_at_zero(inp, cfg, gamma_prime_1=gamma_prime_1)
    return MellinResult(res.value0, -res.derivative0, res.error_estimate)


def theta_prime_zero(
    spec: SpectrumTable,
    n: int,
    bhat: Sequence[float],
    cfg: QuadratureConfig | None = None,
    gamma_prime_1: float = GAMMA_PRIME_1,
) -> float:
    """theta'(0) along the heat-kernel route (four-term formula)."""
    return theta_prime_zero_result(spec, n, bhat, cfg, gamma_prime_1).derivative0


# ---------------------------------------------------------------------------
# Route 2: direct zeta continuation
# ---------------------------------------------------------------------------


def theta_prime_zero_direct_result(
    spec: SpectrumTable, tail_terms: int = 2000
) -> Tuple[float, float]:
    """(theta'(0), error bound) via term-wise continuation.

    Listed lines contribute (-1)^q q mult log(lambda) exactly; a quadratic
    tail adds the continued remainder through Hurwitz zeta values.  When the
    tail law covers the listed lines, the continuation starts at the first law
    index instead: splitting at a large k_next would pit two huge opposite
    contributions against each other and lose ~eps * k_next^2 log(k_next) to
    cancellation, while the law-anchored form is cancellation-free (and
    independent of the table truncation, which tests verify separately).
    """
    terms = []
    err = 0.0
    if isinstance(spec.tail, QuadraticTail):
        law = spec.tail.law
        k_anchor = spec.tail.k_first if spec.tail.covers_all_lines else spec.tail.k_next
        _, deriv, zerr = zeta_log_tail(law, k_anchor, max_terms=max(tail_terms, 16))
        for q in spec.tail.degrees:
            if q < 1:
                continue
            w = -(q if q % 2 == 0 else -q)  # (-1)^{q+1} q
            terms.append(w * deriv)
            err += abs(w) * zerr
    elif not isinstance(spec.tail, FiniteTail):
        raise UnsupportedTailError(f"unsupported tail policy {spec.tail!r}")
    for line in spec.lines:
        if line.lam <= 0.0 or line.q == 0 or _covered_by_law(spec, line):
            continue
        w = line.q if line.q % 2 == 0 else -line.q
        terms.append(w * line.mult * math.log(line.lam))
    total = math.fsum(terms)
    scale = math.fsum(abs(x) for x in terms)
    return total, err + 8e-16 * (scale + 1.0)


def theta_prime_zero_direct(spec: SpectrumTable, tail_terms: int = 2000) -> float:
    return theta_prime_zero_direct_result(spec, tail_terms)[0]


# ---------------------------------------------------------------------------
# Asymptotic right-hand side
# ---------------------------------------------------------------------------


def torsion_rhs(model: GeometryModel, m: int) -> float:
    """Closed form of the asymptotic prediction for constant curvature data:

        (rank / 4 pi) m^n sum_j log(m a_j / 2 pi) det(R / 2 pi) vol .
    """
    if m < 1:
        raise DomainError("m must be >= 1")
    model.levi.require_strongly_pseudoconvex("torsion_rhs")
    det_norm = 1.0
    for a in model.levi.eigenvalues:
        det_norm *= float(a) / TWO_PI
    log_sum = sum(math.log(m * float(a) / TWO_PI) for a in model.levi.eigenvalues)
    return (
        model.rank_e
        / (4.0 * math.pi)
        * float(m) ** model.n
        * log_sum
        * det_norm
        * model.volume
    )


# ---------------------------------------------------------------------------
# Rescaled quantities and the m-sweep
# ---------------------------------------------------------------------------


def _rescaled_theta_tilde(
    spec: SpectrumTable,
    n: int,
    bhat: Sequence[float],
    m: int,
    cfg: QuadratureConfig,
) -> Tuple[float, float, float]:
    """(theta~(0), theta~'(0), error) from the rescaled trace m^{-n} S(t/m).

    The substitution t -> t/m turns the expansion coefficient of t^{-n+j/2}
    into bhat_j m^{-j/2} (up to the overall m^{-n}).
    """
    kernel = spec.supertrace_N_kernel()
    scale = float(m) ** (-n)
    expansion = [float(b) * float(m) ** (-0.5 * j) for j, b in enumerate(bhat)]
    expansion[2 * n] -= kernel * scale
    floor = supertrace_trust_floor(spec, tol=min(1e-13, cfg.abs_tol * 1e-2))
    floor_rescaled = min(floor * m, 0.5)

    def f_tilde(t: float) -> float:
        return scale * heat_supertrace_N(spec, t / m, True).value

    C, c = _decay_certificate_from(spec, t_min=1.0 / m)
    inp = MellinInput(
        f_tilde, n, tuple(expansion), (scale * C, c / m), floor_rescaled
    )
    res = mellin_at_zero(inp, cfg)
    return -res.value0, -res.derivative0, res.error_estimate


def _decay_certificate_from(spec: SpectrumTable, t_min: float) -> Tuple[float, float]:
    """(C, c) with |STr N e^{-t Box} perp| <= C e^{-c t} for t >= t_min."""
    import numpy as np

    qs, lams, mults, _ = spec._arrays
    sel = lams > 0.0
    lam_min = spec.min_nonzero_eigenvalue
    c = lam_min / 2.0
    C = float(np.sum(qs[sel] * mults[sel] * np.exp(-lams[sel] * t_min / 2.0)))
    from .spectra import _supertrace_tail_bound

    C += _supertrace_tail_bound(spec, t_min / 2.0)
    return C, c


@dataclass(frozen=True)
class TorsionReport:
    """One m-slice of the sweep; two-path consistency is enforced on build."""

    m: int
    theta_prime_0: float
    theta_prime_0_direct: float
    bhat: Tuple[float, ...]
    rhs: float
    residual: float
    error_budget: float
    theta_tilde_0: float = 0.0
    theta_tilde_prime_0: float = 0.0
    scaling_identity_gap: float = 0.0
    supertrace_N_kernel: float = 0.0

    def __post_init__(self):
        gap = abs(self.theta_prime_0 - self.theta_prime_0_direct)
        if not gap <= self.error_budget:
            raise TwoPathMismatchError(
                f"m={self.m}: |heat - direct| = {gap:.3e} exceeds the error "
                f"budget {self.error_budget:.3e}"
            )


def torsion_report(
    spec: SpectrumTable,
    model: GeometryModel,
    m: int,
    cfg: QuadratureConfig | None = None,
    bhat: Sequence[float] | None = None,
) -> TorsionReport:
    """Build the full report for one Fourier weight."""
    cfg = cfg or QuadratureConfig()
    n = model.n
    if bhat is None:
        bhat = closed_form_bhat(spec)
    heat = theta_prime_zero_result(spec, n, bhat, cfg)
    direct, err_direct = theta_prime_zero_direct_result(spec)
    budget = 3.0 * (heat.error_estimate + err_direct) + 1e-9 * (1.0 + abs(direct))
    rhs = torsion_rhs(model, m)
    mn = float(m) ** n
    tilde0, tilde_prime0, err_tilde = _rescaled_theta_tilde(spec, n, bhat, m, cfg)
    gap = abs(heat.derivative0 / mn + math.log(m) * tilde0 - tilde_prime0)
    return TorsionReport(
        m=m,
        theta_prime_0=heat.derivative0,
        theta_prime_0_direct=direct,
        bhat=tuple(float(b) for b in bhat),
        rhs=rhs,
        residual=(heat.derivative0 - rhs) / mn,
        error_budget=budget,
        theta_tilde_0=tilde0,
        theta_tilde_prime_0=tilde_prime0,
        scaling_identity_gap=gap,
        supertrace_N_kernel=spec.supertrace_N_kernel(),
    )


def asympt_sweep(
    model: GeometryModel,
    spectrum_source: Callable[[int], SpectrumTable],
    ms: Sequence[int],
    cfg: QuadratureConfig | None = None,
) -> List[TorsionReport]:
    """One TorsionReport per m, ms strictly increasing."""
    ms = list(ms)
    if not ms or any(b <= a for a, b in zip(ms, ms[1:])):
        raise DomainError("ms must be a nonempty strictly increasing sequence")
    cfg = cfg or QuadratureConfig()
    return [torsion_report(spectrum_source(m), model, m, cfg) for m in ms]


def residual_trend_ok(reports: Sequence[TorsionReport], last: int = 3) -> bool:
    """Strict decrease of |residual| over the final ``last`` reports."""
    rs = [abs(r.residual) for r in reports[-last:]]
    return all(b < a for a, b in zip(rs, rs[1:]))


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------

CSV_COLUMNS = (
    "m",
    "theta_prime_0",
    "theta_prime_0_direct",
    "rhs",
    "residual",
    "error_budget",
)


def _fmt(x: float) -> str:
    return format(x, ".17g")


def reports_to_csv(reports: Sequence[TorsionReport], metadata: dict | None = None) -> str:
    buf = io.StringIO()
    for line in _metadata_lines(metadata):
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in sorted(reports, key=lambda r: r.m):
        writer.writerow(
            [
                r.m,
                _fmt(r.theta_prime_0),
                _fmt(r.theta_prime_0_direct),
                _fmt(r.rhs),
                _fmt(r.residual),
                _fmt(r.error_budget),
            ]
        )
    return buf.getvalue()


def reports_to_json(reports: Sequence[TorsionReport], metadata: dict | None = None) -> str:
    payload = {
        "metadata": metadata or {},
        "reports": [
            {
                "m": r.m,
                "theta_prime_0": r.theta_prime_0,
                "theta_prime_0_direct": r.theta_prime_0_direct,
                "bhat": list(r.bhat),
                "rhs": r.rhs,
                "residual": r.residual,
                "error_budget": r.error_budget,
                "theta_tilde_0": r.theta_tilde_0,
                "theta_tilde_prime_0": r.theta_tilde_prime_0,
                "scaling_identity_gap": r.scaling_identity_gap,
                "supertrace_N_kernel": r.supertrace_N_kernel,
            }
            for r in sorted(reports, key=lambda r: r.m)
        ],
    }
    return json.dumps(payload, indent=2)


def _metadata_lines(metadata: dict | None) -> List[str]:
    if not metadata:
        return []
    return [f"{k}: {json.dumps(v, sort_keys=True, default=str)}" for k, v in sorted(metadata.items())]
