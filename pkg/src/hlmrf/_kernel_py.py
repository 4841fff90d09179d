"""Pure-numpy consensus ADMM loop.

Fallback used when the compiled extension (``hlmrf._kernel``) is not
built. Both kernels share one packed layout: local copies and Lagrange
multipliers live in a flat slot array ordered [potential slots |
constraint slots | linear-bias slots], with ``slot_var`` mapping each
slot to its consensus variable. All arrays are modified in place.
"""

from __future__ import annotations

import numpy as np


def run_admm(
    consensus,
    local,
    mult,
    slot_var,
    pot_off,
    pot_const,
    pot_lam,
    pot_exp,
    pot_nsq,
    con_off,
    con_const,
    con_eq,
    con_nsq,
    slot_coef,
    lin_b,
    rho,
    max_iter,
    primal_tol,
    dual_tol,
):
    n = consensus.size
    m = pot_const.size
    r = con_const.size
    sp = int(pot_off[m])
    sc = int(con_off[r])  # absolute end of the constraint section
    total = local.size
    inv_sqrt_total = 1.0 / np.sqrt(max(total, 1))

    slot_pot = np.repeat(np.arange(m, dtype=np.int64), np.diff(pot_off))
    slot_con = np.repeat(np.arange(r, dtype=np.int64), np.diff(con_off))
    counts = np.bincount(slot_var, minlength=n)
    has_copy = counts > 0
    inv_counts = 1.0 / np.maximum(counts, 1)

    pcoef = slot_coef[:sp]
    ccoef = slot_coef[sp:sc]
    con_is_eq = con_eq.astype(bool)
    con_var = slot_var[sp:sc]
    nsq_safe = np.where(pot_nsq > 0.0, pot_nsq, 1.0)
    lin_step = pot_lam / rho
    lin_room = lin_step * pot_nsq  # hinge-active p=1 solution leaves the active side iff lz < this
    sq_scale = 2.0 * pot_lam / (rho + 2.0 * pot_lam * pot_nsq)

    primal = 0.0
    dual = 0.0
    iteration = 0
    for iteration in range(1, int(max_iter) + 1):
        yb = consensus[slot_var]
        mult += rho * (local - yb)
        z = yb - mult / rho

        if m:
            lz = np.bincount(slot_pot, weights=pcoef * z[:sp], minlength=m) + pot_const
            active = (lz > 0.0) & (pot_nsq > 0.0)
            is_sq = pot_exp == 2
            step = np.where(active & ~is_sq, np.where(lz < lin_room, lz / nsq_safe, lin_step), 0.0)
            step = np.where(active & is_sq, sq_scale * lz, step)
            local[:sp] = z[:sp] - step[slot_pot] * pcoef
        if r:
            cz = z[sp:sc]
            cv = np.bincount(slot_con, weights=ccoef * cz, minlength=r) + con_const
            cstep = np.where(con_is_eq | (cv < 0.0), cv / con_nsq, 0.0)
            local[sp:sc] = cz - cstep[slot_con] * ccoef
        if lin_b.size:
            local[sc:] = z[sc:] - lin_b / rho

        sums = np.bincount(slot_var, weights=local + mult / rho, minlength=n)
        new_consensus = np.where(
            has_copy, np.clip(sums * inv_counts, 0.0, 1.0), consensus
        )
        dual = rho * float(np.linalg.norm(new_consensus - consensus)) * inv_sqrt_total
        consensus[:] = new_consensus
        primal = float(np.linalg.norm(local - consensus[slot_var])) * inv_sqrt_total

        if primal <= primal_tol and dual <= dual_tol:
            if r:
                cvy = (
                    np.bincount(slot_con, weights=ccoef * consensus[con_var], minlength=r)
                    + con_const
                )
                viol = float(
                    np.where(con_is_eq, np.abs(cvy), np.maximum(-cvy, 0.0)).max()
                )
            else:
                viol = 0.0
            if viol <= primal_tol:
                return iteration, primal, dual, True

    return iteration, primal, dual, False
