"""Independent validation of the circle-bundle closed-form spectrum.

The degree-0 Fourier component of the Kohn Laplacian on the 3-sphere model is
diagonalized by Rayleigh-Ritz in a monomial dictionary.  Writing points of the
sphere as (z1, z2) with |z1|^2 + |z2|^2 = 1, the weight-m subspace is spanned
by monomials z^alpha zbar^beta with |alpha| - |beta| = m.  Two structural
facts make the computation exact up to roundoff:

* inner products on the sphere couple (alpha, beta) with (alpha', beta') only
  when alpha - beta = alpha' - beta' (componentwise), so the problem splits
  into blocks indexed by the difference vector d;
* within a block of difference d and antiholomorphic degree at most K, the
  span restricted to the sphere is exactly the sum of the true eigenspace
  lines with k <= K, so the projected eigenproblem returns exact eigenvalues
  (the dictionary is redundant; the metric null space is removed first).

Monomial moments: the sphere average of z^g zbar^g is proportional to
g1! g2! / (|g| + 1)!.

The quadratic form is ||Zbar u||^2 with Zbar = z2 d/dzbar1 - z1 d/dzbar2,
normalized so that the model's Levi eigenvalue is 1; the expected eigenvalues
are k (k + m + 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

from .density import LeviSpectrum, model_density_coeffs
from .errors import DomainError
from .series import fit_half_powers
from .spectra import CP1_VOLUME, cp1_spectrum, trace_degree


@lru_cache(maxsize=None)
def _log_factorial(n: int) -> float:
    return math.lgamma(n + 1)


def _moment_log(g1: int, g2: int) -> float:
    """log of g1! g2! / (g1+g2+1)!  (sphere moment up to the volume factor)."""
    return _log_factorial(g1) + _log_factorial(g2) - _log_factorial(g1 + g2 + 1)


def _zbar_terms(alpha: Tuple[int, int], beta: Tuple[int, int]):
    """Zbar applied to z^alpha zbar^beta as a list of (coeff, alpha', beta')."""
    out = []
    if beta[0] > 0:
        out.append((beta[0], (alpha[0], alpha[1] + 1), (beta[0] - 1, beta[1])))
    if beta[1] > 0:
        out.append((-beta[1], (alpha[0] + 1, alpha[1]), (beta[0], beta[1] - 1)))
    return out


def galerkin_block_eigenvalues(
    m: int, K: int, d1_offset: int = 0, null_tol: float = 1e-10
) -> np.ndarray:
    """Sorted eigenvalues of the degree-0 block with difference vector
    d = (m + d1_offset, -d1_offset), antiholomorphic degree <= K."""
    if m < 0 or K < 1:
        raise DomainError("need m >= 0 and K >= 1")
    d = (m + d1_offset, -d1_offset)
    basis = []
    for tot in range(K + 1):
        for b1 in range(tot + 1):
            b2 = tot - b1
            alpha = (b1 + d[0], b2 + d[1])
            if alpha[0] >= 0 and alpha[1] >= 0:
                basis.append(((b1, b2), alpha))
    if not basis:
        return np.array([])
    nb = len(basis)
    # normalize each monomial to unit sphere norm
    norms = np.array(
        [0.5 * _moment_log(b[0] + a[0], b[1] + a[1]) for (b, a) in basis]
    )
    gram = np.empty((nb, nb))
    quad = np.zeros((nb, nb))
    for i, (bi, ai) in enumerate(basis):
        ti = _zbar_terms(ai, bi)
        for j, (bj, aj) in enumerate(basis):
            g = (ai[0] + bj[0], ai[1] + bj[1])
            gram[i, j] = math.exp(_moment_log(g[0], g[1]) - norms[i] - norms[j])
            tj = _zbar_terms(aj, bj)
            acc = 0.0
            for ci, a2i, b2i in ti:
                for cj, a2j, b2j in tj:
                    if (
                        a2i[0] + b2j[0] == a2j[0] + b2i[0]
                        and a2i[1] + b2j[1] == a2j[1] + b2i[1]
                    ):
                        gg = (a2i[0] + b2j[0], a2i[1] + b2j[1])
                        acc += ci * cj * math.exp(
                            _moment_log(gg[0], gg[1]) - norms[i] - norms[j]
                        )
            quad[i, j] = acc
    w, v = np.linalg.eigh(gram)
    keep = w > null_tol * w.max()
    proj = v[:, keep] / np.sqrt(w[keep])
    reduced = proj.T @ quad @ proj
    return np.sort(np.linalg.eigvalsh(reduced))


@dataclass(frozen=True)
class OracleReport:
    eigenvalue_rel_error: float
    kernel_dims: Tuple[int, ...]
    kernel_dims_expected: Tuple[int, ...]
    heat_coeff_rel_errors: Tuple[float, float]
    passed: bool


def validate_eigenvalues(m: int, num_eigs: int = 10, basis_factor: int = 4) -> float:
    """Max relative error of the first ``num_eigs`` Galerkin eigenvalues
    against k(k+m+1), using a basis truncation ``basis_factor`` times deeper.
    """
    K = basis_factor * num_eigs
    eigs = galerkin_block_eigenvalues(m, K)
    expected = np.array([k * (k + m + 1.0) for k in range(K + 1)])
    take = min(num_eigs, len(eigs))
    err = 0.0
    for i in range(take):
        denom = max(expected[i], 1.0)
        err = max(err, abs(eigs[i] - expected[i]) / denom)
    return err


def validate_kernel_dimension(m: int, K: int = 6, zero_tol: float = 1e-8) -> int:
    """Count zero modes across all difference-vector blocks.

    Blocks with d1_offset outside [-2, m+2] are provably empty of zero modes in
    this range check; the expected total is m + 1.
    """
    count = 0
    for off in range(-2, m + 3):
        eigs = galerkin_block_eigenvalues(m, K, d1_offset=-off + 0)
        count += int(np.sum(np.abs(eigs) < zero_tol))
    return count


def validate_heat_coefficients(
    m: int, k_max: int | None = None
) -> Tuple[float, float]:
    """Relative errors of the fitted t^{-1}, t^0 coefficients of the rescaled
    degree-0 heat trace against the model-density prediction.

    The rescaled trace m^{-1} Tr^(0)[e^{-(t/m) Box}] should match
    vol * (2 pi)^{-2} * a/(1 - e^{-a t}) with a = 1 as m grows; in this
    convention the t^{-1} coefficient is 1 and the t^0 coefficient is 1/2.
    """
    if k_max is None:
        k_max = max(2048, 4 * m)
    spec = cp1_spectrum(m, k_max)
    grid = np.geomspace(5e-3, 0.3, 48)
    samples = []
    for t in grid:
        tv = trace_degree(spec, 0, t / m, nonzero_only=False)
        if tv.tail_bound > 1e-10:
            raise DomainError("heat-coefficient grid extends below trust floor")
        samples.append((float(t), tv.value / m))
    fit = fit_half_powers(samples, -1, 5)
    density = model_density_coeffs(LeviSpectrum(1, (1.0,)), 1, 2)
    empty = density[frozenset()]
    target_m1 = CP1_VOLUME * empty.coefficient(-1)
    target_0 = CP1_VOLUME * empty.coefficient(0)
    return (
        abs(fit[0] - target_m1) / abs(target_m1),
        abs(fit[2] - target_0) / abs(target_0),
    )


def validate_cp1(
    m_eigs: Tuple[int, ...] = (1, 5),
    m_kernel: Tuple[int, ...] = (0, 1, 2, 3, 4, 5, 6, 7, 8),
    m_heat: int = 64,
    num_eigs: int = 10,
    basis_factor: int = 4,
    eig_tol: float = 1e-6,
    heat_tol: float = 0.02,
) -> OracleReport:
    """Full validation gate for the closed-form circle-bundle spectrum."""
    eig_err = max(validate_eigenvalues(m, num_eigs, basis_factor) for m in m_eigs)
    dims = tuple(validate_kernel_dimension(m) for m in m_kernel)
    dims_expected = tuple(m + 1 for m in m_kernel)
    heat_errs = validate_heat_coefficients(m_heat)
    passed = (
        eig_err < eig_tol
        and dims == dims_expected
        and max(heat_errs) < heat_tol
    )
    return OracleReport(eig_err, dims, dims_expected, heat_errs, passed)
