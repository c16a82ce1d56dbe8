"""Successive approximations for z' = T z + f on the mesh, anchored at a node.

The integral map z -> z0 + int_xi^x (T z + f) is discretized with the
endpoint-corrected trapezoid rule

    int_cell h ~ dx/2 (h_i + h_{i+1}) + dx^2/12 (h'_i - h'_{i+1}),

where h' = T' z + T z' + f' uses the ODE itself for z' and the cell slope
for T'.  The rule is exact for cubics, so the discrete fixed point is
fourth-order accurate.  For large |int T| the partial sums of the Picard
series suffer cancellation; the same discrete equations are then solved by
forward substitution, which yields the identical fixed point.
"""

import numpy as np

from .exceptions import ConvergenceError, ValidationError

# Above this value of int |T| the iteration is replaced by substitution.
MARCH_THRESHOLD = 20.0


def _as_3d(arr, n):
    arr = np.asarray(arr, dtype=complex)
    return arr[..., None] if arr.ndim == 2 else arr


def anchor_index(xi, N):
    s = xi * N
    i = int(round(s))
    if abs(s - i) > 1e-9 or not 0 <= i <= N:
        raise ValidationError(f"anchor {xi!r} is not a mesh node of [0, 1]")
    return i


def tau_total(T, dx):
    """int_0^1 |T| with the max-row-sum matrix norm (trapezoid)."""
    rows = np.max(np.sum(np.abs(T), axis=2), axis=1)
    return float(0.5 * dx * np.sum(rows[1:] + rows[:-1]))


def _cell_integrals(T, Tp, f, fp, z, dx):
    h = T @ z + f
    zp = h
    dh_left = Tp @ z[:-1] + T[:-1] @ zp[:-1] + fp
    dh_right = Tp @ z[1:] + T[1:] @ zp[1:] + fp
    return 0.5 * dx * (h[:-1] + h[1:]) + dx * dx / 12.0 * (dh_left - dh_right)


def _accumulate(I, z0, i0):
    N = I.shape[0]
    z = np.empty((N + 1,) + z0.shape, dtype=complex)
    z[i0] = z0
    if i0 < N:
        z[i0 + 1:] = z0 + np.cumsum(I[i0:], axis=0)
    if i0 > 0:
        z[:i0] = z0 - np.cumsum(I[:i0][::-1], axis=0)[::-1]
    return z


def _iterate(T, Tp, f, fp, z0, i0, dx, tol, max_iter):
    N = T.shape[0] - 1
    z = np.broadcast_to(z0, (N + 1,) + z0.shape).astype(complex)
    for it in range(1, max_iter + 1):
        znew = _accumulate(_cell_integrals(T, Tp, f, fp, z, dx), z0, i0)
        incr = np.max(np.abs(znew - z))
        z = znew
        if incr < tol * max(1.0, np.max(np.abs(z))):
            return z, it
    raise ConvergenceError(f"Picard iteration did not converge in {max_iter} iterations (tau too large for mesh)")


def _march(T, Tp, f, fp, z0, i0, dx):
    N = T.shape[0] - 1
    n = T.shape[1]
    eye = np.eye(n)
    c2 = dx * dx / 12.0
    Tl, Tr = T[:-1], T[1:]
    left = eye + 0.5 * dx * Tl + c2 * (Tp + Tl @ Tl)
    right = eye - 0.5 * dx * Tr + c2 * (Tp + Tr @ Tr)
    src = 0.5 * dx * (f[:-1] + f[1:]) + c2 * (Tl @ f[:-1] - Tr @ f[1:])
    z = np.empty((N + 1,) + z0.shape, dtype=complex)
    z[i0] = z0
    if i0 < N:
        G = np.linalg.solve(right[i0:], left[i0:])
        c = np.linalg.solve(right[i0:], src[i0:])
        cur = z0
        for q in range(N - i0):
            cur = G[q] @ cur + c[q]
            z[i0 + 1 + q] = cur
    if i0 > 0:
        G = np.linalg.solve(left[:i0], right[:i0])
        c = np.linalg.solve(left[:i0], src[:i0])
        cur = z0
        for i in range(i0 - 1, -1, -1):
            cur = G[i] @ cur - c[i]
            z[i] = cur
    return z


def picard_solve(T, z0, xi=0.0, f=None, tol=1e-13, max_iter=200, mode="auto"):
    """Solve z = z0 + int_xi^x (T z + f) on the mesh of T.

    Args:
        T: nodal matrix values, shape (N + 1, n, n).
        z0: initial value at the anchor, shape (n,) or (n, m).
        xi: anchor, must be a mesh node.
        f: optional nodal source, shape (N + 1, n) or (N + 1, n, m).
        mode: "iterate", "march" or "auto" (iterate unless int |T| is large).

    Returns:
        (z, info) with z of shape (N + 1, n) or (N + 1, n, m) and info a dict
        holding the mode used and the iteration count.
    """
    T = np.asarray(T, dtype=complex)
    N, n = T.shape[0] - 1, T.shape[1]
    dx = 1.0 / N
    z0 = np.asarray(z0, dtype=complex)
    vector = z0.ndim == 1
    z0m = z0[:, None] if vector else z0
    if f is None:
        fm = np.zeros((N + 1, n, z0m.shape[1]), dtype=complex)
    else:
        fm = np.asarray(f, dtype=complex)
        fm = fm[..., None] if fm.ndim == 2 else fm
    Tp = (T[1:] - T[:-1]) / dx
    fp = (fm[1:] - fm[:-1]) / dx
    i0 = anchor_index(xi, N)
    tau = tau_total(T, dx)
    if mode == "auto":
        mode = "iterate" if tau <= MARCH_THRESHOLD else "march"
    if mode == "iterate":
        z, its = _iterate(T, Tp, fm, fp, z0m, i0, dx, tol, max_iter)
    elif mode == "march":
        z, its = _march(T, Tp, fm, fp, z0m, i0, dx), 0
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    if vector:
        z = z[..., 0]
    return z, {"mode": mode, "iterations": its, "tau": tau}
