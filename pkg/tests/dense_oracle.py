"""Dense state-vector oracle for the logical channel of one small code block."""

import numpy as np

from qecdiag.channels import SIGMA, chi_to_ptm, ptm_to_chi
from qecdiag.codes import StabilizerCode, DecoderTable


def _embed(op, j, n):
    mats = [np.eye(2)] * n
    mats[j] = op
    out = np.array([[1.0 + 0j]])
    for mat in mats:
        out = np.kron(out, mat)
    return out


def encoder(code: StabilizerCode) -> np.ndarray:
    dim = 2**code.n
    proj = np.eye(dim, dtype=complex)
    for g in code.stabilizer_gens:
        proj = proj @ (np.eye(dim) + g.to_matrix()) / 2
    proj = proj @ (np.eye(dim) + code.logical_z[0].to_matrix()) / 2
    vals, vecs = np.linalg.eigh(proj)
    zero = vecs[:, np.argmax(vals)]
    one = code.logical_x[0].to_matrix() @ zero
    return np.stack([zero, one], axis=1)


def apply_product_channel(chis, rho):
    n = len(chis)
    for j in range(n):
        ops = [_embed(s, j, n) for s in SIGMA]
        rho = sum(chis[j][p, q] * ops[p] @ rho @ ops[q]
                  for p in range(4) for q in range(4) if abs(chis[j][p, q]) > 0)
    return rho


def dense_conditional(code: StabilizerCode, decoder: DecoderTable, chis, s):
    """(prob, logical chi) of syndrome ``s`` by brute-force simulation."""
    dim = 2**code.n
    m = code.n - code.k
    v = encoder(code)
    proj = np.eye(dim, dtype=complex)
    for i, g in enumerate(code.stabilizer_gens):
        sign = -1 if (s >> (m - 1 - i)) & 1 else 1
        proj = proj @ (np.eye(dim) + sign * g.to_matrix()) / 2
    rec = decoder.recoveries[s].to_matrix()
    ptm = np.zeros((4, 4))
    for t in range(4):
        rho = v @ SIGMA[t] @ v.conj().T
        out = apply_product_channel(chis, rho)
        out = rec @ proj @ out @ proj @ rec.conj().T
        logical = v.conj().T @ out @ v
        for u in range(4):
            ptm[u, t] = np.trace(SIGMA[u] @ logical).real / 2
    prob = ptm[0, 0]
    if prob <= 0:
        return 0.0, None
    return prob, ptm_to_chi(ptm / prob)
