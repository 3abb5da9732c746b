"""Vector-valued affine forms with parameter-affine coefficients.

An :class:`AffVec` represents ``f(x; theta) = L(theta) x + k(theta)`` for a
block of ``m`` rows, where every coefficient of ``L`` and ``k`` is itself
affine in the flattened parameter entries ``theta``.  Coefficients are stored
against *basis keys*: ``None`` for the constant part and ``(param_id, j)``
for the entry ``theta[param_id][j]``.  Columns are grouped per variable under
opaque sortable keys.

All operations preserve that structure exactly, which is what makes cached
canonicalization templates possible: re-binding parameters never changes the
sparsity pattern, only the numbers.
"""

import numpy as np


class AffVec:
    """A block of rows, affine in variables and in parameter entries.

    :param m: number of rows.
    :param lin: ``{col_key: {basis: ndarray (m, group_size)}}``.
    :param const: ``{basis: ndarray (m,)}``.
    """

    __slots__ = ("m", "lin", "const")

    def __init__(self, m, lin=None, const=None):
        self.m = m
        self.lin = lin if lin is not None else {}
        self.const = const if const is not None else {}

    # -- constructors --------------------------------------------------------

    @staticmethod
    def constant(vec):
        vec = np.asarray(vec, dtype=float).ravel()
        return AffVec(vec.shape[0], const={None: vec})

    @staticmethod
    def variable(col_key, size):
        return AffVec(size, lin={col_key: {None: np.eye(size)}})

    @staticmethod
    def parameter(param_id, size):
        const = {}
        for j in range(size):
            e = np.zeros(size)
            e[j] = 1.0
            const[(param_id, j)] = e
        return AffVec(size, const=const)

    # -- elementwise algebra ---------------------------------------------------

    def broadcast_to(self, m):
        """Tile a single-row block to m rows; no-op when sizes already agree."""
        if self.m == m:
            return self
        if self.m != 1:
            raise ValueError(f"cannot broadcast {self.m} rows to {m}")
        lin = {
            ck: {b: np.repeat(arr, m, axis=0) for b, arr in forms.items()}
            for ck, forms in self.lin.items()
        }
        const = {b: np.repeat(arr, m) for b, arr in self.const.items()}
        return AffVec(m, lin, const)

    def __add__(self, other):
        m = max(self.m, other.m)
        a = self.broadcast_to(m)
        b = other.broadcast_to(m)
        lin = {ck: dict(forms) for ck, forms in a.lin.items()}
        for ck, forms in b.lin.items():
            dest = lin.setdefault(ck, {})
            for basis, arr in forms.items():
                dest[basis] = dest[basis] + arr if basis in dest else arr
        const = dict(a.const)
        for basis, arr in b.const.items():
            const[basis] = const[basis] + arr if basis in const else arr
        return AffVec(m, lin, const)

    def __neg__(self):
        lin = {
            ck: {b: -arr for b, arr in forms.items()}
            for ck, forms in self.lin.items()
        }
        const = {b: -arr for b, arr in self.const.items()}
        return AffVec(self.m, lin, const)

    def __sub__(self, other):
        return self + (-other)

    def scale_scalar(self, c):
        """Multiply every row by a numeric scalar."""
        c = float(c)
        lin = {
            ck: {b: c * arr for b, arr in forms.items()}
            for ck, forms in self.lin.items()
        }
        const = {b: c * arr for b, arr in self.const.items()}
        return AffVec(self.m, lin, const)

    def matmul(self, mat):
        """Left-multiply by a numeric matrix of shape (p, m)."""
        mat = np.asarray(mat, dtype=float)
        lin = {
            ck: {b: mat @ arr for b, arr in forms.items()}
            for ck, forms in self.lin.items()
        }
        const = {b: mat @ arr for b, arr in self.const.items()}
        return AffVec(mat.shape[0], lin, const)

    def scale_param_scalar(self, param_id):
        """Multiply by a scalar parameter; the block must be parameter-free."""
        self._require_param_free()
        lin = {
            ck: {(param_id, 0): arr for b, arr in forms.items()}
            for ck, forms in self.lin.items()
        }
        const = {(param_id, 0): arr for b, arr in self.const.items()}
        return AffVec(self.m, lin, const)

    def scale_param_column(self, param_id, size):
        """Multiply a scalar block by an (size, 1) parameter, row j scaled by entry j."""
        if self.m != 1:
            raise ValueError("column-parameter scaling needs a scalar operand")
        self._require_param_free()
        lin = {}
        for ck, forms in self.lin.items():
            row = forms[None]
            out = {}
            for j in range(size):
                arr = np.zeros((size, row.shape[1]))
                arr[j, :] = row[0, :]
                out[(param_id, j)] = arr
            lin[ck] = out
        const = {}
        if None in self.const:
            k = self.const[None][0]
            for j in range(size):
                e = np.zeros(size)
                e[j] = k
                const[(param_id, j)] = e
        return AffVec(size, lin, const)

    def _require_param_free(self):
        if any(b is not None for b in self.const) or any(
            b is not None for forms in self.lin.values() for b in forms
        ):
            raise ValueError("operand already depends on parameters")

    # -- row selection ---------------------------------------------------------

    def index(self, i):
        lin = {
            ck: {b: arr[i : i + 1, :] for b, arr in forms.items()}
            for ck, forms in self.lin.items()
        }
        const = {b: arr[i : i + 1] for b, arr in self.const.items()}
        return AffVec(1, lin, const)

    def sum_rows(self):
        lin = {
            ck: {b: arr.sum(axis=0, keepdims=True) for b, arr in forms.items()}
            for ck, forms in self.lin.items()
        }
        const = {b: np.array([arr.sum()]) for b, arr in self.const.items()}
        return AffVec(1, lin, const)

    @staticmethod
    def concat(blocks):
        """Stack blocks vertically, preserving block order."""
        m = sum(b.m for b in blocks)
        sizes = {}
        for blk in blocks:
            for ck, forms in blk.lin.items():
                for arr in forms.values():
                    sizes[ck] = arr.shape[1]
                    break
        lin = {}
        const = {}
        offset = 0
        for blk in blocks:
            for ck, forms in blk.lin.items():
                dest = lin.setdefault(ck, {})
                for basis, arr in forms.items():
                    full = dest.get(basis)
                    if full is None:
                        full = np.zeros((m, sizes[ck]))
                        dest[basis] = full
                    full[offset : offset + blk.m, :] = arr
            for basis, arr in blk.const.items():
                full = const.get(basis)
                if full is None:
                    full = np.zeros(m)
                    const[basis] = full
                full[offset : offset + blk.m] = arr
            offset += blk.m
        return AffVec(m, lin, const)
