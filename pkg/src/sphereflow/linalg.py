"""Dense symmetric eigensolver: Householder tridiagonalization + implicit QL."""

import math

import numpy as np

__all__ = ["tridiagonalize", "tridiagonal_ql", "eigh"]


def tridiagonalize(a):
    """Reduce symmetric ``a`` to tridiagonal form, ``a = Q T Q^T``.

    Returns
    -------
    d : ndarray
        Diagonal of ``T``.
    e : ndarray
        Sub-diagonal of ``T``, length ``n - 1``.
    q : ndarray
        Orthogonal accumulation of the Householder reflections.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    n = a.shape[0]
    vs = []
    for k in range(n - 2):
        x = a[k + 1:, k]
        norm = math.sqrt(float(x @ x))
        if norm == 0.0 or norm == abs(x[0]) and np.all(x[1:] == 0):
            vs.append(None)
            continue
        alpha = -math.copysign(norm, x[0])
        v = x.copy()
        v[0] -= alpha
        v /= math.sqrt(float(v @ v))
        sub = a[k + 1:, k + 1:]
        p = sub @ v
        w = p - (v @ p) * v
        sub -= 2.0 * (np.outer(v, w) + np.outer(w, v))
        a[k + 1:, k] = 0.0
        a[k, k + 1:] = 0.0
        a[k + 1, k] = a[k, k + 1] = alpha
        vs.append(v)

    q = np.eye(n)
    for k in range(n - 3, -1, -1):
        v = vs[k]
        if v is None:
            continue
        blk = q[k + 1:, k + 1:]
        blk -= 2.0 * np.outer(v, v @ blk)
    return np.diag(a).copy(), np.diag(a, -1).copy(), q


def tridiagonal_ql(d, e, z=None, max_iter=60):
    """Eigen-decompose a symmetric tridiagonal matrix by implicit-shift QL.

    ``z`` (default identity) is right-multiplied by the accumulated rotations,
    so passing the ``Q`` of :func:`tridiagonalize` yields eigenvectors of the
    original matrix.  Output is unsorted.
    """
    n = len(d)
    d = [float(v) for v in d]
    e = [float(v) for v in e] + [0.0]
    # rows of zt are the columns of z; row rotations touch contiguous memory
    zt = np.eye(n) if z is None else np.array(z, dtype=np.float64).T.copy()
    eps = np.finfo(np.float64).eps
    hypot = math.hypot

    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise np.linalg.LinAlgError("QL iteration did not converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi = zt[i].copy()
                zt[i] *= c
                zt[i] -= s * zt[i + 1]
                zt[i + 1] *= c
                zt[i + 1] += s * zi
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.array(d), zt.T


def eigh(a):
    """Eigenvalues (ascending) and orthonormal eigenvectors of symmetric ``a``."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if a.shape[0] == 0:
        return np.empty(0), np.empty((0, 0))
    if a.shape[0] == 1:
        return a[0].copy(), np.ones((1, 1))
    d, e, q = tridiagonalize(a)
    w, v = tridiagonal_ql(d, e, q)
    order = np.argsort(w, kind="stable")
    return w[order], np.ascontiguousarray(v[:, order])
