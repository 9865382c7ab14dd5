"""NumPy implementations of the hot kernels.

Same signatures and results as the compiled ``_ckernels`` module; used when
the extension is not built or when ``OPSYNTH_PURE_PYTHON=1``.
"""

import math

import numpy as np


def apply_pair(psi, blocks):
    """Apply per-total-photon blocks to the last two axes of ``psi``.

    psi    : complex (S, T+1, T+1); axis 0 enumerates spectator configurations.
    blocks : complex (T+1, T+1, T+1); blocks[s, :s+1, :s+1] acts on |k, s-k>.
    """
    T = psi.shape[1] - 1
    out = np.zeros_like(psi)
    for s in range(T + 1):
        k = np.arange(s + 1)
        out[:, k, s - k] = psi[:, k, s - k] @ blocks[s, : s + 1, : s + 1].T
    return out


def sqrt_factorials(n):
    return np.exp(0.5 * np.array([math.lgamma(k + 1) for k in range(n + 1)]))


def mixing_coefficients(n_a, n_b):
    # coefficients of x^(lam-l) y^l in (x - i y)^n_a (y - i x)^n_b
    u = np.array([math.comb(n_a, i) * (-1j) ** i for i in range(n_a + 1)])
    w = np.array([math.comb(n_b, p) * (-1j) ** (n_b - p) for p in range(n_b + 1)])
    return np.convolve(u, w)


def event_distribution(rho, chi, t, r, phi, total_cutoff):
    """Photocount probabilities P[n_a, n_b, n_c] for a pure reference ``chi``.

    rho  : signal density matrix (D+1, D+1)
    chi  : reference amplitudes at phase 0; levels past its end count as empty
    phi  : phase-shifter setting
    Entries with n_a + n_b + n_c > total_cutoff are left at zero.
    """
    D = rho.shape[0] - 1
    T = total_cutoff
    K = chi.shape[0]
    sf = sqrt_factorials(T + D + 1)
    cchi = np.zeros(T + 1, dtype=complex)
    n = min(K, T + 1)
    cchi[:n] = np.conj(chi[:n] * np.exp(1j * np.arange(n) * phi))
    t_pow = t ** np.arange(D + 1)
    out = np.zeros((T + 1, T + 1, D + 1))
    for na in range(T + 1):
        for nb in range(T + 1 - na):
            lam = na + nb
            n_top = min(D, T - lam)
            l = np.arange(lam + 1)
            base = (mixing_coefficients(na, nb) * 2.0 ** (-0.5 * lam) / (sf[na] * sf[nb])
                    * sf[lam - l] * cchi[lam - l] * (-1j * r) ** l)
            if not np.any(base):
                continue
            N = np.arange(n_top + 1)[:, None]
            m = N + l[None, :]
            amp = base[None, :] * t_pow[N] * sf[m] / sf[N]
            amp = np.where(m <= D, amp, 0.0)
            mc = np.minimum(m, D)
            sub = rho[mc[:, :, None], mc[:, None, :]]
            out[na, nb, : n_top + 1] = np.einsum("nk,nkl,nl->n", amp.conj(), sub, amp).real
    return out
