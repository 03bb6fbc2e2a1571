"""Dense views of a subproblem's constraint rows, for derivative and sampling tests."""

import numpy as np

from sarcover.oracle import fd_check
from sarcover.problem import check_feasibility


def row_values(sub, v):
    return np.concatenate([b.g for b in sub.rows(v, False)])


def row_jacobian(sub, v):
    n = sub.n_vars
    out = []
    for b in sub.rows(v, True):
        jac = np.zeros((len(b.g), n))
        np.add.at(jac, (np.repeat(np.arange(len(b.g)), b.idx.shape[1]), b.idx.ravel()),
                  b.grad.ravel())
        out.append(jac)
    return np.vstack(out)


def row_hessians(sub, v):
    n = sub.n_vars
    out = []
    for b in sub.rows(v, True):
        m, w = b.idx.shape
        hess = np.zeros((m, n, n))
        if b.hess is not None:
            rows = np.repeat(np.arange(m), w * w)
            ii = np.repeat(b.idx, w, axis=1).ravel()
            jj = np.tile(b.idx, (1, w)).ravel()
            np.add.at(hess, (rows, ii, jj), b.hess.ravel())
        out.append(hess)
    return np.concatenate(out)


def derivative_errors(sub, v, rel_step=1e-4):
    """Worst finite-difference error of the row gradients and of the row Hessians."""
    n = sub.n_vars
    e_grad = fd_check(lambda w: row_values(sub, w), lambda w: row_jacobian(sub, w), v, rel_step)
    e_hess = fd_check(lambda w: row_jacobian(sub, w).ravel(),
                      lambda w: row_hessians(sub, w).reshape(-1, n), v, rel_step)
    return e_grad, e_hess


def random_point(sub, rng, spread=0.3):
    """A point in the simple-bound box near the reference (not necessarily feasible)."""
    s, plan = sub.s, sub.plan
    z = np.clip(sub.it.z_ref * (1 + spread * rng.uniform(-1, 1, plan.n_sweeps)),
                s.z_min * 1.001, s.z_max * 0.999)
    if sub.tie_alt:
        z[:] = z[0]
    p_sar = rng.uniform(0.05, 0.95, plan.n_sweeps) * s.p_sar_max
    p_com = rng.uniform(0.05, 0.95, plan.n_slots) * s.p_com_max
    if sub.tie_p:
        p_sar[:] = p_sar[0]
    if sub.tie_pc:
        p_com[:] = p_com[0]
    if not sub.slacks:
        return sub.pack(z, p_sar, p_com)
    x = sub.unpack(sub.pack(z, p_sar, p_com))["x"]
    t, u = sub._tight_tu(z, x)
    grow = lambda a: a * (1 + rng.uniform(0.01, 0.3, a.shape))
    return sub.pack(z, p_sar, p_com, grow(z ** 2), grow(t), grow(u))


def subproblem_feasible(sub, v, tol=0.0):
    A, b = sub.dense_rows()
    return (all(np.all(blk.g <= tol) for blk in sub.rows(v, False))
            and bool(np.all(A @ v + b <= tol)))


def sample_restriction(sub, rng, count, spread=0.2):
    """Draw subproblem-feasible points and audit them against the original constraints.

    Returns (number checked, number failing the original audit at 1e-8).
    Radar and backhaul powers are set at (1e-12 above) or somewhat above
    the surrogate requirement, so many samples sit on the surrogate boundary.
    """
    s, plan = sub.s, sub.plan
    checked = failed = 0
    for _ in range(50 * count):
        if checked >= count:
            break
        z = np.clip(sub.it.z_ref * (1 + spread * rng.uniform(-1, 1, plan.n_sweeps)),
                    s.z_min, s.z_max)
        if sub.tie_alt:
            z[:] = z[0]
        p_sar = np.minimum(z ** 3 / s.sar.beta * (1 + rng.choice([1e-12, 0.3 * rng.random()])),
                           s.p_sar_max)
        v = sub.pack(z, p_sar, np.zeros(plan.n_slots))
        nat = sub.natural_values(v)
        need = np.maximum(nat["c8"], 0.0) / s.comm.gamma
        p_com = need * (1 + rng.choice([1e-12, 0.2 * rng.random()]))
        if sub.tie_pc:
            p_com[:] = p_com.max()
        v = sub.pack(z, p_sar, p_com)
        if not subproblem_feasible(sub, v):
            continue
        checked += 1
        rep = check_feasibility(s, plan, sub.decision_vector(v), 1e-8)
        failed += not rep.feasible
    return checked, failed
