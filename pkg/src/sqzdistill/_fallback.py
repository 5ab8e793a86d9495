"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def bs_table(cutoff):
    dim = cutoff + 1
    coef = np.zeros((dim, dim, 2 * cutoff + 1))
    coef[0, 0, 0] = 1.0

    def raise_from(prev, total, sign, norm):
        s = np.arange(total + 1)
        new = np.zeros(2 * cutoff + 1)
        new[: total] += sign * np.sqrt(total - s[:-1]) * prev[: total]
        new[1 : total + 1] += np.sqrt(s[1:]) * prev[: total]
        return new / norm

    for m in range(1, dim):
        coef[0, m] = raise_from(coef[0, m - 1], m, -1.0, np.sqrt(2.0 * m))
    for n in range(1, dim):
        for m in range(dim):
            coef[n, m] = raise_from(coef[n - 1, m], n + m, 1.0, np.sqrt(2.0 * n))
    return coef


def gaussify_contract(rho, table, povm):
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    cutoff = dim - 1
    out = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(dim)
    for s, w in enumerate(np.asarray(povm, dtype=float)[: 2 * cutoff + 1]):
        if w == 0.0:
            continue
        # m = s + t - n for output level t and input level n of the first copy
        m = s + idx[:, None] - idx[None, :]
        valid = (m >= 0) & (m <= cutoff)
        mc = np.clip(m, 0, cutoff)
        g = np.where(valid, table[idx[None, :], mc, s], 0.0)
        gr = g[:, :, None] * rho[None, :, :]
        partner = rho[mc[:, :, None, None], mc[None, None, :, :]]
        out += w * np.einsum("tnk,uk,tnuk->tu", gr, g, partner, optimize=True)
    return out


def husimi_batch(rho, alphas):
    rho = np.asarray(rho, dtype=complex)
    alphas = np.asarray(alphas, dtype=complex).ravel()
    dim = rho.shape[0]
    out = np.empty(alphas.shape[0])
    for start in range(0, alphas.shape[0], 65536):
        al = alphas[start : start + 65536]
        v = np.empty((al.shape[0], dim), dtype=complex)
        v[:, 0] = np.exp(-0.5 * np.abs(al) ** 2)
        for n in range(1, dim):
            v[:, n] = v[:, n - 1] * al / np.sqrt(n)
        out[start : start + 65536] = ((v.conj() @ rho) * v).sum(axis=1).real
    return out
