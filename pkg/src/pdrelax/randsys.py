"""Random partially dissipative systems and an eigenpair oracle for the SK condition.

The oracle works directly from the definition: SK fails at ``omega`` when
some real eigenvector of ``M_omega`` lies in the kernel of ``L``.  For an
eigenvalue of multiplicity ``k`` with eigenbasis ``V`` (n x k) this happens
exactly when ``L V`` has a zero singular value, so the smallest such
singular value over all eigenvalue clusters is a margin that is zero when
SK fails and positive otherwise.

Draws whose margin or eigenvalue gaps sit in an ambiguous band are
rejected: there the answer depends on the rounding of the tolerances
rather than on the system.
"""

from dataclasses import dataclass

import numpy as np

from .sk_analysis import omega_samples
from .system_model import PartiallyDissipativeSystem

CLUSTER_TOL = 1e-8
MARGIN_ZERO = 1e-9
MARGIN_SAFE = 1e-3
GAP_SAFE = 1e-3
KINDS = ("generic", "a21-kernel", "angle-kernel", "narrow-a21", "common-eigvec")


@dataclass(frozen=True)
class OracleResult:
    sk_holds: bool
    margin: float
    min_gap: float

    @property
    def ambiguous(self):
        return (MARGIN_ZERO < self.margin < MARGIN_SAFE) or (0.0 < self.min_gap < GAP_SAFE)


def _clusters(w, scale):
    groups, start = [], 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > CLUSTER_TOL * scale:
            groups.append((start, i))
            start = i
    return groups


def sk_oracle(system, omegas=None):
    """Brute-force SK decision over real eigenpairs of ``M_omega``."""
    omegas = omega_samples(system.d) if omegas is None else np.atleast_2d(omegas)
    L = system.L
    margin, min_gap = np.inf, np.inf
    for omega in omegas:
        M = np.tensordot(omega, system.A_bar, axes=(0, 0))
        w, V = np.linalg.eigh(M)
        scale = max(1.0, float(np.max(np.abs(w))))
        groups = _clusters(w, scale)
        for a, b in groups:
            sv = np.linalg.svd(L @ V[:, a:b], compute_uv=False)
            margin = min(margin, float(sv[-1]) if sv.size == b - a else 0.0)
        for (a0, b0), (a1, _) in zip(groups, groups[1:]):
            min_gap = min(min_gap, float(w[a1] - w[b0 - 1]) / scale)
    scaleL = max(1.0, float(np.linalg.norm(L, 2)))
    margin /= scaleL
    return OracleResult(sk_holds=margin > MARGIN_ZERO, margin=margin,
                        min_gap=min_gap if np.isfinite(min_gap) else 0.0)


def _sym(rng, n):
    X = rng.standard_normal((n, n))
    return 0.5 * (X + X.T)


def _blocks_to_A(A11, A12, A22):
    top = np.concatenate([A11, A12], axis=1)
    bottom = np.concatenate([A12.T, A22], axis=1)
    return np.concatenate([top, bottom], axis=0)


def _unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def random_system(rng, kind="generic", d=None, n=None, n1=None, a11_zero=False):
    """Symmetric fluxes, ``L = diag(0, L2)`` with ``L2`` positive (not necessarily symmetric).

    ``kind`` selects a construction:

    * ``generic``: independent Gaussian blocks (SK holds almost surely).
    * ``a21-kernel``: a fixed ``phi1`` with ``A21^k phi1 = 0`` for every k.
    * ``angle-kernel``: for d=2, ``A21(omega0) phi1 = 0`` at one sampled direction only.
    * ``narrow-a21``: ``n2 < n1`` (SK fails when ``A11 = 0``).
    * ``common-eigvec``: ``phi1`` is an eigenvector of every ``A11^k`` and ``A21^k phi1 = 0``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    if d is None:
        d = 2 if kind == "angle-kernel" else int(rng.integers(1, 3))
    if n is None:
        n = int(rng.integers(3 if kind == "narrow-a21" else 2, 5))
    if n1 is None:
        if kind == "narrow-a21":
            n1 = int(rng.integers(n // 2 + 1, n)) if n > 2 else 1
        else:
            n1 = int(rng.integers(1, n))
    n2 = n - n1
    A11 = [np.zeros((n1, n1)) if a11_zero else _sym(rng, n1) for _ in range(d)]
    A21 = [rng.standard_normal((n2, n1)) for _ in range(d)]
    A22 = [_sym(rng, n2) for _ in range(d)]
    phi1 = _unit(rng, n1)
    P = np.eye(n1) - np.outer(phi1, phi1)
    if kind in ("a21-kernel", "common-eigvec"):
        A21 = [B @ P for B in A21]
    if kind == "common-eigvec" and not a11_zero:
        A11 = [rng.standard_normal() * np.outer(phi1, phi1) + P @ S @ P for S in A11]
    if kind == "angle-kernel":
        omegas = omega_samples(2)
        i = int(rng.choice([k for k in range(len(omegas)) if abs(omegas[k][1]) > 0.2]))
        w1, w2 = omegas[i]
        target = -(w1 / w2) * (A21[0] @ phi1)
        A21[1] = A21[1] + np.outer(target - A21[1] @ phi1, phi1)
        if not a11_zero:
            A11 = [P @ S @ P for S in A11]
            lam = rng.standard_normal(2)
            A11[0] = A11[0] + lam[0] * np.outer(phi1, phi1)
            A11[1] = A11[1] + lam[1] * np.outer(phi1, phi1)
    A_bar = np.stack([_blocks_to_A(A11[k], A21[k].T, A22[k]) for k in range(d)])
    G = rng.standard_normal((n2, n2))
    K = rng.standard_normal((n2, n2))
    L2 = G @ G.T / n2 + 0.5 * np.eye(n2) + 0.5 * (K - K.T)
    L = np.zeros((n, n))
    L[n1:, n1:] = L2
    return PartiallyDissipativeSystem(A_bar=A_bar, T=None, L=L, n1=n1)


def system_stream(seed, count, a11_zero=False, weights=None):
    """``count`` unambiguous random systems with their oracle results.

    Returns ``(systems, oracle_results, rejected)``.
    """
    rng = np.random.default_rng(seed)
    kinds = [k for k in KINDS if not (k == "common-eigvec" and a11_zero)]
    if weights is None:
        weights = {"generic": 0.5}
    rest = 1.0 - sum(weights.get(k, 0.0) for k in kinds)
    others = [k for k in kinds if k not in weights]
    p = np.array([weights.get(k, rest / len(others)) for k in kinds])
    p = p / p.sum()
    systems, results, rejected = [], [], 0
    while len(systems) < count:
        kind = kinds[int(rng.choice(len(kinds), p=p))]
        s = random_system(rng, kind, a11_zero=a11_zero)
        r = sk_oracle(s)
        if r.ambiguous:
            rejected += 1
            continue
        systems.append(s)
        results.append(r)
    return systems, results, rejected
