# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled consensus ADMM loop.

Same packed-slot contract as hlmrf._kernel_py.run_admm; see that module
for the layout description. Arrays are modified in place.
"""

import numpy as np

from libc.math cimport fabs, sqrt


def run_admm(
    double[::1] consensus,
    double[::1] local,
    double[::1] mult,
    const long long[::1] slot_var,
    const long long[::1] pot_off,
    const double[::1] pot_const,
    const double[::1] pot_lam,
    const signed char[::1] pot_exp,
    const double[::1] pot_nsq,
    const long long[::1] con_off,
    const double[::1] con_const,
    const unsigned char[::1] con_eq,
    const double[::1] con_nsq,
    const double[::1] slot_coef,
    const double[::1] lin_b,
    double rho,
    long long max_iter,
    double primal_tol,
    double dual_tol,
):
    cdef Py_ssize_t n = consensus.shape[0]
    cdef Py_ssize_t m = pot_const.shape[0]
    cdef Py_ssize_t r = con_const.shape[0]
    cdef Py_ssize_t total = local.shape[0]
    cdef Py_ssize_t sc = con_off[r]  # linear slots start here

    cdef double[::1] prev = np.empty(n, dtype=np.float64)
    cdef double[::1] sums = np.empty(n, dtype=np.float64)
    counts_arr = np.bincount(np.asarray(slot_var), minlength=n).astype(np.float64)
    cdef double[::1] counts = counts_arr

    cdef double inv_sqrt_total = 1.0
    if total > 0:
        inv_sqrt_total = 1.0 / sqrt(<double> total)

    cdef Py_ssize_t it, i, j, k, t, s, e
    cdef double lz, cv, step, a, zt, yt, v, d
    cdef double primal = 0.0, dual = 0.0, primal_sq, dual_sq, viol
    cdef bint converged = False
    cdef long long iteration = 0

    for it in range(1, max_iter + 1):
        iteration = it
        for i in range(n):
            prev[i] = consensus[i]

        for j in range(m):
            s = pot_off[j]
            e = pot_off[j + 1]
            lz = pot_const[j]
            for t in range(s, e):
                yt = consensus[slot_var[t]]
                a = mult[t] + rho * (local[t] - yt)
                mult[t] = a
                zt = yt - a / rho
                local[t] = zt
                lz += slot_coef[t] * zt
            if lz > 0.0 and pot_nsq[j] > 0.0:
                if pot_exp[j] == 1:
                    step = pot_lam[j] / rho
                    if lz < step * pot_nsq[j]:
                        step = lz / pot_nsq[j]
                else:
                    step = 2.0 * pot_lam[j] * lz / (rho + 2.0 * pot_lam[j] * pot_nsq[j])
                for t in range(s, e):
                    local[t] -= step * slot_coef[t]

        for k in range(r):
            s = con_off[k]
            e = con_off[k + 1]
            cv = con_const[k]
            for t in range(s, e):
                yt = consensus[slot_var[t]]
                a = mult[t] + rho * (local[t] - yt)
                mult[t] = a
                zt = yt - a / rho
                local[t] = zt
                cv += slot_coef[t] * zt
            if con_eq[k] or cv < 0.0:
                step = cv / con_nsq[k]
                for t in range(s, e):
                    local[t] -= step * slot_coef[t]

        for t in range(sc, total):
            yt = consensus[slot_var[t]]
            a = mult[t] + rho * (local[t] - yt)
            mult[t] = a
            local[t] = yt - a / rho - lin_b[t - sc] / rho

        for i in range(n):
            sums[i] = 0.0
        for t in range(total):
            sums[slot_var[t]] += local[t] + mult[t] / rho
        dual_sq = 0.0
        for i in range(n):
            if counts[i] > 0.0:
                v = sums[i] / counts[i]
                if v < 0.0:
                    v = 0.0
                elif v > 1.0:
                    v = 1.0
                consensus[i] = v
            d = consensus[i] - prev[i]
            dual_sq += d * d
        primal_sq = 0.0
        for t in range(total):
            d = local[t] - consensus[slot_var[t]]
            primal_sq += d * d
        primal = sqrt(primal_sq) * inv_sqrt_total
        dual = rho * sqrt(dual_sq) * inv_sqrt_total

        if primal <= primal_tol and dual <= dual_tol:
            viol = 0.0
            for k in range(r):
                cv = con_const[k]
                for t in range(con_off[k], con_off[k + 1]):
                    cv += slot_coef[t] * consensus[slot_var[t]]
                if con_eq[k]:
                    v = fabs(cv)
                else:
                    v = -cv if cv < 0.0 else 0.0
                if v > viol:
                    viol = v
            if viol <= primal_tol:
                converged = True
                break

    return int(iteration), primal, dual, converged
