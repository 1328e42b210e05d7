"""Flattening conventions for 3x3 tensors and symmetric 6-vectors.

One convention binds the whole project: 3x3 matrices flatten row-major
(``vec9``), and symmetric matrices are stored as plain 6-vectors ordered
(Sxx, Syy, Szz, Sxy, Sxz, Syz) with no sqrt(2) weighting.  The factor-2
duplication of off-diagonal entries lives inside gradients, Hessians and
the rotation-block construction, never in the stored vector.
"""

from __future__ import annotations

import numpy as np

# (row, col) of each 6-vector slot in the upper triangle
SYM_INDEX = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))

# diag(1,1,1,2,2,2): Frobenius weights of the symmetric basis matrices
SYM_WEIGHTS = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])

# vec6 of the identity
SYM_IDENTITY = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])


def sym_basis() -> np.ndarray:
    """The six symmetric basis matrices E_i, shape (6, 3, 3).

    Diagonal slots carry a single 1; off-diagonal slots carry a 1 in both
    mirror positions, matching the plain-entry vec6 convention.
    """
    E = np.zeros((6, 3, 3))
    for a, (i, j) in enumerate(SYM_INDEX):
        E[a, i, j] = 1.0
        E[a, j, i] = 1.0
    return E


def vec9(M: np.ndarray) -> np.ndarray:
    """Row-major flatten of one or more 3x3 matrices: (..., 3, 3) -> (..., 9)."""
    M = np.asarray(M)
    return M.reshape(M.shape[:-2] + (9,))


def mat3(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vec9`: (..., 9) -> (..., 3, 3)."""
    v = np.asarray(v)
    return v.reshape(v.shape[:-1] + (3, 3))


def vec6(S: np.ndarray) -> np.ndarray:
    """Extract the 6 independent entries of symmetric matrices: (..., 3, 3) -> (..., 6)."""
    S = np.asarray(S)
    rows = [i for i, _ in SYM_INDEX]
    cols = [j for _, j in SYM_INDEX]
    return S[..., rows, cols]


def sym_mat(s: np.ndarray) -> np.ndarray:
    """Rebuild symmetric matrices from 6-vectors: (..., 6) -> (..., 3, 3)."""
    s = np.asarray(s)
    S = np.zeros(s.shape[:-1] + (3, 3), dtype=s.dtype)
    for a, (i, j) in enumerate(SYM_INDEX):
        S[..., i, j] = s[..., a]
        S[..., j, i] = s[..., a]
    return S
