# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; mirrors ``_pykernels`` loop for loop."""

import numpy as np

from libc.math cimport exp, lgamma, sqrt, cos, sin


def apply_pair(const double complex[:, :, ::1] psi, const double complex[:, :, ::1] blocks):
    cdef Py_ssize_t S = psi.shape[0]
    cdef Py_ssize_t T1 = psi.shape[1]
    out = np.zeros((S, T1, T1), dtype=np.complex128)
    cdef double complex[:, :, ::1] o = out
    cdef Py_ssize_t x, s, kp, k
    cdef double complex acc
    cdef bint nonzero
    for x in range(S):
        for s in range(T1):
            nonzero = False
            for k in range(s + 1):
                if psi[x, k, s - k] != 0:
                    nonzero = True
                    break
            if not nonzero:
                continue
            for kp in range(s + 1):
                acc = 0
                for k in range(s + 1):
                    acc = acc + blocks[s, kp, k] * psi[x, k, s - k]
                o[x, kp, s - kp] = acc
    return out


cdef inline double complex _neg_i_pow(Py_ssize_t n):
    cdef Py_ssize_t m = n % 4
    if m == 0:
        return 1
    if m == 1:
        return -1j
    if m == 2:
        return -1
    return 1j


def event_distribution(const double complex[:, ::1] rho, const double complex[::1] chi,
                       double t, double r, double phi, int total_cutoff):
    cdef Py_ssize_t D = rho.shape[0] - 1
    cdef Py_ssize_t T = total_cutoff
    cdef Py_ssize_t K = chi.shape[0]
    cdef Py_ssize_t nsf = T + D + 2
    cdef Py_ssize_t i, p, l, lp, na, nb, lam, n_top, N, m, mp

    sf_arr = np.empty(nsf)
    cdef double[::1] sf = sf_arr
    for i in range(nsf):
        sf[i] = exp(0.5 * lgamma(i + 1.0))

    binom_arr = np.zeros((T + 1, T + 1))
    cdef double[:, ::1] binom = binom_arr
    for i in range(T + 1):
        binom[i, 0] = 1.0
        for p in range(1, i + 1):
            binom[i, p] = binom[i - 1, p - 1] + (binom[i - 1, p] if p <= i - 1 else 0.0)

    cchi_arr = np.zeros(T + 1, dtype=np.complex128)
    cdef double complex[::1] cchi = cchi_arr
    for i in range(min(K, T + 1)):
        cchi[i] = (chi[i] * (cos(i * phi) + 1j * sin(i * phi))).conjugate()

    rpow_arr = np.empty(T + 1)
    cdef double[::1] rpow = rpow_arr
    rpow[0] = 1.0
    for i in range(1, T + 1):
        rpow[i] = rpow[i - 1] * r

    out = np.zeros((T + 1, T + 1, D + 1))
    cdef double[:, :, ::1] o = out
    base_arr = np.zeros(T + 1, dtype=np.complex128)
    amp_arr = np.zeros(T + 1, dtype=np.complex128)
    cdef double complex[::1] base = base_arr
    cdef double complex[::1] amp = amp_arr
    cdef double complex c, acc, row
    cdef double scale, tN
    cdef bint any_nonzero

    for na in range(T + 1):
        for nb in range(T + 1 - na):
            lam = na + nb
            n_top = D if D < T - lam else T - lam
            scale = 2.0 ** (-0.5 * lam) / (sf[na] * sf[nb])
            any_nonzero = False
            for l in range(lam + 1):
                # c_l = sum_i C(na, i) (-i)^i C(nb, l-i) (-i)^(nb-(l-i))
                c = 0
                for i in range(na + 1):
                    p = l - i
                    if p < 0 or p > nb:
                        continue
                    c = c + binom[na, i] * binom[nb, p] * _neg_i_pow(i + nb - p)
                base[l] = c * scale * sf[lam - l] * cchi[lam - l] * _neg_i_pow(l) * rpow[l]
                if base[l] != 0:
                    any_nonzero = True
            if not any_nonzero:
                continue
            tN = 1.0
            for N in range(n_top + 1):
                for l in range(lam + 1):
                    m = N + l
                    if m <= D:
                        amp[l] = base[l] * tN * sf[m] / sf[N]
                    else:
                        amp[l] = 0
                acc = 0
                for l in range(lam + 1):
                    m = N + l
                    if m > D or amp[l] == 0:
                        continue
                    row = 0
                    for lp in range(lam + 1):
                        mp = N + lp
                        if mp > D:
                            break
                        row = row + rho[m, mp] * amp[lp]
                    acc = acc + amp[l].conjugate() * row
                o[na, nb, N] = acc.real
                tN = tN * t
    return out
