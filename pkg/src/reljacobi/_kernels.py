"""Numeric inner loops, compiled with numba when available.

Every kernel has a plain-numpy reference implementation (``*_py``). When numba
imports and ``RELJACOBI_DISABLE_NUMBA`` is unset (or ``0``), the public names
are bound to ``@njit`` versions written as explicit loops; otherwise they are
bound to the numpy versions. ``BACKEND`` records which one is active.
"""

import os

import numpy as np

# ---------------------------------------------------------------------------
# numpy reference path


def nested_cyclic_py(J, dJ, ia, ib, ic):
    # R[m,n,l] = [[a,b],c] + [[b,c],a] + [[c,a],b] on coordinate functions,
    # with [[z_a,z_b],z_c] = dJ[a,b,d] J[d,c].
    t1 = np.einsum("mnd,dl->mnl", dJ[np.ix_(ia, ib)], J[:, ic])
    t2 = np.einsum("nld,dm->mnl", dJ[np.ix_(ib, ic)], J[:, ia])
    t3 = np.einsum("lmd,dn->mnl", dJ[np.ix_(ic, ia)], J[:, ib])
    return t1 + t2 + t3


def christoffel_py(g_inv, dg):
    # dg[a,b,c] = d_c g_ab ; returns Gamma[m,s,l] = Gamma^m_{sl}
    low = dg.transpose(0, 1, 2) + dg.transpose(0, 2, 1) - dg.transpose(2, 0, 1)
    return 0.5 * np.einsum("ma,asl->msl", g_inv, low)


def christoffel_grad_py(g_inv, dg_inv, dg, d2g):
    # dg_inv[m,a,c] = d_c g^ma ; d2g[a,b,c,e] = d_e d_c g_ab
    low = dg.transpose(0, 1, 2) + dg.transpose(0, 2, 1) - dg.transpose(2, 0, 1)
    dlow = d2g.transpose(0, 1, 2, 3) + d2g.transpose(0, 2, 1, 3) - d2g.transpose(2, 0, 1, 3)
    return 0.5 * (np.einsum("mae,asl->msle", dg_inv, low) + np.einsum("ma,asle->msle", g_inv, dlow))


def riemann_py(gamma, dgamma):
    # R^r_{s m n} = d_m G^r_{ns} - d_n G^r_{ms} + G^r_{ml} G^l_{ns} - G^r_{nl} G^l_{ms}
    d = np.einsum("rnsm->rsmn", dgamma)
    gg = np.einsum("rml,lns->rsmn", gamma, gamma)
    return d - d.transpose(0, 1, 3, 2) + gg - gg.transpose(0, 1, 3, 2)


def rk4_linear_py(A, z0, dt, nsteps):
    out = np.empty((nsteps + 1, z0.shape[0]))
    out[0] = z0
    z = z0.copy()
    for i in range(nsteps):
        k1 = A @ z
        k2 = A @ (z + 0.5 * dt * k1)
        k3 = A @ (z + 0.5 * dt * k2)
        k4 = A @ (z + dt * k3)
        z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = z
    return out


# ---------------------------------------------------------------------------
# numba path


def _build_numba():
    from numba import njit

    @njit(cache=True)
    def nested_cyclic(J, dJ, ia, ib, ic):
        n = J.shape[0]
        na, nb, nc = ia.shape[0], ib.shape[0], ic.shape[0]
        R = np.zeros((na, nb, nc))
        for m in range(na):
            a = ia[m]
            for k in range(nb):
                b = ib[k]
                for l in range(nc):
                    c = ic[l]
                    s = 0.0
                    for d in range(n):
                        s += dJ[a, b, d] * J[d, c] + dJ[b, c, d] * J[d, a] + dJ[c, a, d] * J[d, b]
                    R[m, k, l] = s
        return R

    @njit(cache=True)
    def christoffel(g_inv, dg):
        G = np.zeros((4, 4, 4))
        for m in range(4):
            for s in range(4):
                for l in range(s, 4):
                    acc = 0.0
                    for a in range(4):
                        acc += g_inv[m, a] * (dg[a, s, l] + dg[a, l, s] - dg[s, l, a])
                    G[m, s, l] = 0.5 * acc
                    G[m, l, s] = 0.5 * acc
        return G

    @njit(cache=True)
    def christoffel_grad(g_inv, dg_inv, dg, d2g):
        dG = np.zeros((4, 4, 4, 4))
        for m in range(4):
            for s in range(4):
                for l in range(4):
                    for e in range(4):
                        acc = 0.0
                        for a in range(4):
                            acc += dg_inv[m, a, e] * (dg[a, s, l] + dg[a, l, s] - dg[s, l, a])
                            acc += g_inv[m, a] * (d2g[a, s, l, e] + d2g[a, l, s, e] - d2g[s, l, a, e])
                        dG[m, s, l, e] = 0.5 * acc
        return dG

    @njit(cache=True)
    def riemann(gamma, dgamma):
        R = np.zeros((4, 4, 4, 4))
        for r in range(4):
            for s in range(4):
                for m in range(4):
                    for n in range(4):
                        acc = dgamma[r, n, s, m] - dgamma[r, m, s, n]
                        for l in range(4):
                            acc += gamma[r, m, l] * gamma[l, n, s] - gamma[r, n, l] * gamma[l, m, s]
                        R[r, s, m, n] = acc
        return R

    # explicit matvec: numba's matmul would pull in SciPy's BLAS bindings
    @njit(cache=True)
    def _matvec(A, v, out):
        n = v.shape[0]
        for r in range(n):
            acc = 0.0
            for c in range(n):
                acc += A[r, c] * v[c]
            out[r] = acc

    @njit(cache=True)
    def rk4_linear(A, z0, dt, nsteps):
        n = z0.shape[0]
        out = np.empty((nsteps + 1, n))
        out[0] = z0
        z = z0.copy()
        k1, k2, k3, k4, tmp = np.empty(n), np.empty(n), np.empty(n), np.empty(n), np.empty(n)
        for i in range(nsteps):
            _matvec(A, z, k1)
            for j in range(n):
                tmp[j] = z[j] + 0.5 * dt * k1[j]
            _matvec(A, tmp, k2)
            for j in range(n):
                tmp[j] = z[j] + 0.5 * dt * k2[j]
            _matvec(A, tmp, k3)
            for j in range(n):
                tmp[j] = z[j] + dt * k3[j]
            _matvec(A, tmp, k4)
            for j in range(n):
                z[j] += (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            out[i + 1] = z
        return out

    return nested_cyclic, christoffel, christoffel_grad, riemann, rk4_linear


def _numba_requested() -> bool:
    return os.environ.get("RELJACOBI_DISABLE_NUMBA", "0").strip().lower() in ("", "0", "false", "no")


NUMBA_AVAILABLE = False
if _numba_requested():
    try:
        (
            nested_cyclic_nb,
            christoffel_nb,
            christoffel_grad_nb,
            riemann_nb,
            rk4_linear_nb,
        ) = _build_numba()
        NUMBA_AVAILABLE = True
    except ImportError:
        pass

if NUMBA_AVAILABLE:
    BACKEND = "numba"
    nested_cyclic = nested_cyclic_nb
    christoffel = christoffel_nb
    christoffel_grad = christoffel_grad_nb
    riemann = riemann_nb
    rk4_linear = rk4_linear_nb
else:
    BACKEND = "numpy"
    nested_cyclic = nested_cyclic_py
    christoffel = christoffel_py
    christoffel_grad = christoffel_grad_py
    riemann = riemann_py
    rk4_linear = rk4_linear_py
