"""MatrixMarket coordinate I/O (thin layer over ``scipy.io``)."""

from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp


def write_matrix(path, M, symmetric=None):
    """Write ``M`` in coordinate format.

    Symmetric matrices get the ``real symmetric`` header and only their lower
    triangle is stored. ``symmetric=None`` detects exact symmetry.
    """
    A = sp.coo_matrix(M)
    if symmetric is None:
        symmetric = A.shape[0] == A.shape[1] and (abs(A - A.T) > 0).nnz == 0
    scipy.io.mmwrite(str(path), A, field="real", symmetry="symmetric" if symmetric else "general",
                     precision=17)
    return Path(path)


def read_matrix(path, dense=False):
    A = scipy.io.mmread(str(path))
    if sp.issparse(A):
        A = A.tocsr()
        return A.toarray() if dense else A
    return np.asarray(A, dtype=float)
