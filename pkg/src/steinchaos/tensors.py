"""Symmetric tensors over a finite-dimensional Gram-metric space.

The abstract Hilbert space of an isonormal Gaussian family is modelled as
R^d equipped with an explicit positive semidefinite matrix G, so that
<e_i, e_j> = G[i, j].  Orthonormal models (G = I) and correlated models
(e.g. fractional-Brownian increment grids) share one code path.

Symmetric order-q tensors are stored sparsely as a map from the sorted
multi-index (i_1 <= ... <= i_q) to the coefficient of the *symmetrized*
basis tensor: if T is the full tensor, the stored value for the sorted
index J equals the sum of T over all distinct orderings of J.  Dense
expansion happens only inside contraction kernels, which keeps storage
polynomial while orders stay small (q <= ~6).
"""

from __future__ import annotations

import itertools
import json
import math
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "TensorError",
    "InvalidOrderError",
    "InvalidContractionError",
    "SpaceMismatchError",
    "OrderMismatchError",
    "GramSpace",
    "SymKernel",
    "tensor_power",
    "symmetrize",
    "contract",
    "gram_inner",
    "raw_norm_sq",
]

# Relative PSD tolerance for Gram validation; Cholesky jitter never exceeds
# 1e-12 (scaled by the largest diagonal entry).
PSD_RTOL = 1e-10
MAX_JITTER = 1e-12


class TensorError(Exception):
    """Base class for tensor-algebra failures."""


class InvalidOrderError(TensorError):
    """Raised for negative or otherwise impossible tensor orders."""


class InvalidContractionError(TensorError):
    """Raised when the contraction index r is outside [0, min(p, q)]."""


class SpaceMismatchError(TensorError):
    """Raised when two kernels do not live over the same Gram space."""


class OrderMismatchError(TensorError):
    """Raised when an inner product pairs kernels of different orders."""


def multiindex_multiplicity(index: tuple[int, ...]) -> int:
    """Number of distinct orderings of a sorted multi-index."""
    q = len(index)
    count = math.factorial(q)
    for _, group in itertools.groupby(index):
        count //= math.factorial(sum(1 for _ in group))
    return count


def distinct_permutations(index: tuple[int, ...]):
    """Yield the distinct orderings of a multi-index (no q! blowup)."""
    pool = sorted(index)
    q = len(pool)
    out: list[int] = []

    def rec():
        if len(out) == q:
            yield tuple(out)
            return
        prev = None
        for i, v in enumerate(pool):
            if v is None or v == prev:
                continue
            prev = v
            pool[i] = None
            out.append(v)
            yield from rec()
            out.pop()
            pool[i] = v

    yield from rec()


class GramSpace:
    """Finite-dimensional model of the Hilbert space: R^d with metric G."""

    __slots__ = ("dim", "gram", "_chol", "_is_identity")

    def __init__(self, gram: np.ndarray | Iterable[Iterable[float]]):
        g = np.array(gram, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 1:
            raise TensorError(f"gram must be a square matrix, got shape {g.shape}")
        if not np.array_equal(g, g.T):
            raise TensorError("gram matrix must be exactly symmetric")
        scale = float(np.abs(g).max()) or 1.0
        eigmin = float(np.linalg.eigvalsh(g).min())
        if eigmin < -PSD_RTOL * scale:
            raise TensorError(
                f"gram matrix is not positive semidefinite: min eigenvalue {eigmin:g}"
            )
        self.dim = int(g.shape[0])
        self.gram = g
        self.gram.setflags(write=False)
        self._chol: np.ndarray | None = None
        self._is_identity = bool(np.array_equal(g, np.eye(self.dim)))

    @classmethod
    def standard(cls, dim: int) -> "GramSpace":
        """Orthonormal model: G = I_dim."""
        return cls(np.eye(int(dim)))

    @property
    def is_identity(self) -> bool:
        return self._is_identity

    def cholesky(self) -> np.ndarray:
        """Lower-triangular L with L L^T = G.

        Numerically borderline matrices get a diagonal jitter of at most
        1e-12 (relative to the largest diagonal entry).
        """
        if self._chol is None:
            scale = float(np.abs(np.diag(self.gram)).max()) or 1.0
            jitter = 0.0
            while True:
                try:
                    self._chol = np.linalg.cholesky(
                        self.gram + jitter * scale * np.eye(self.dim)
                    )
                    break
                except np.linalg.LinAlgError:
                    jitter = 1e-16 if jitter == 0.0 else jitter * 10.0
                    if jitter > MAX_JITTER:
                        raise TensorError(
                            "Cholesky failed within the permitted jitter budget"
                        ) from None
        return self._chol

    def same_as(self, other: "GramSpace") -> bool:
        return self is other or (
            self.dim == other.dim and np.array_equal(self.gram, other.gram)
        )

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        tag = "identity" if self._is_identity else "general"
        return f"GramSpace(dim={self.dim}, {tag})"


def _check_same_space(f: "SymKernel", g: "SymKernel") -> None:
    if not f.space.same_as(g.space):
        raise SpaceMismatchError("kernels live over different Gram spaces")


class SymKernel:
    """Symmetric order-q tensor over a GramSpace.

    ``coeffs[J]`` is the coefficient of the symmetrized basis tensor for the
    sorted multi-index J; equivalently the sum of the full tensor over all
    distinct orderings of J.  Values are immutable after construction.
    """

    __slots__ = ("space", "order", "coeffs", "_dense")

    def __init__(
        self,
        space: GramSpace,
        order: int,
        coeffs: Mapping[tuple[int, ...], float],
        *,
        drop_zeros: bool = True,
    ):
        if order < 0:
            raise InvalidOrderError(f"order must be >= 0, got {order}")
        self.space = space
        self.order = int(order)
        cleaned: dict[tuple[int, ...], float] = {}
        for index, value in coeffs.items():
            idx = tuple(int(i) for i in index)
            if len(idx) != order:
                raise TensorError(f"multi-index {idx} has length != order {order}")
            if any(i < 0 or i >= space.dim for i in idx):
                raise TensorError(f"multi-index {idx} out of range [0, {space.dim})")
            if tuple(sorted(idx)) != idx:
                raise TensorError(f"multi-index {idx} is not sorted")
            v = float(value)
            if v != 0.0 or not drop_zeros:
                cleaned[idx] = v
        self.coeffs = cleaned
        self._dense: np.ndarray | None = None

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------

    @classmethod
    def zero(cls, space: GramSpace, order: int) -> "SymKernel":
        return cls(space, order, {})

    @classmethod
    def scalar(cls, space: GramSpace, value: float) -> "SymKernel":
        return cls(space, 0, {(): float(value)}, drop_zeros=False)

    @classmethod
    def from_dense(cls, space: GramSpace, dense: np.ndarray) -> "SymKernel":
        """Build from an already-symmetric dense array of shape (d,) * q."""
        arr = np.asarray(dense, dtype=float)
        if arr.ndim == 0:
            return cls.scalar(space, float(arr))
        if any(s != space.dim for s in arr.shape):
            raise TensorError(f"dense shape {arr.shape} incompatible with dim {space.dim}")
        q = arr.ndim
        coeffs: dict[tuple[int, ...], float] = {}
        for index in itertools.combinations_with_replacement(range(space.dim), q):
            v = float(arr[index])
            if v != 0.0:
                coeffs[index] = v * multiindex_multiplicity(index)
        return cls(space, q, coeffs)

    # ------------------------------------------------------------------
    # views
    # ------------------------------------------------------------------

    def to_dense(self) -> np.ndarray:
        """Full tensor of shape (d,) * order (scalar array for order 0)."""
        if self._dense is None:
            if self.order == 0:
                self._dense = np.array(self.coeffs.get((), 0.0))
            else:
                arr = np.zeros((self.space.dim,) * self.order)
                for index, value in self.coeffs.items():
                    entry = value / multiindex_multiplicity(index)
                    for perm in distinct_permutations(index):
                        arr[perm] = entry
                self._dense = arr
            self._dense.setflags(write=False)
        return self._dense

    def norm(self) -> float:
        return math.sqrt(max(gram_inner(self, self), 0.0))

    # ------------------------------------------------------------------
    # linear structure
    # ------------------------------------------------------------------

    def _binary(self, other: "SymKernel", sign: float) -> "SymKernel":
        _check_same_space(self, other)
        if self.order != other.order:
            raise OrderMismatchError("cannot add kernels of different orders")
        merged = dict(self.coeffs)
        for index, value in other.coeffs.items():
            merged[index] = merged.get(index, 0.0) + sign * value
        return SymKernel(self.space, self.order, merged)

    def __add__(self, other: "SymKernel") -> "SymKernel":
        return self._binary(other, 1.0)

    def __sub__(self, other: "SymKernel") -> "SymKernel":
        return self._binary(other, -1.0)

    def __mul__(self, scalar: float) -> "SymKernel":
        s = float(scalar)
        return SymKernel(
            self.space, self.order, {k: s * v for k, v in self.coeffs.items()}
        )

    __rmul__ = __mul__

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"SymKernel(order={self.order}, nnz={len(self.coeffs)})"

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "dim": self.space.dim,
            "order": self.order,
            "entries": [[list(k), v] for k, v in sorted(self.coeffs.items())],
            "gram": self.space.gram.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: dict, space: GramSpace | None = None) -> "SymKernel":
        if space is None:
            space = GramSpace(obj["gram"])
        if space.dim != int(obj["dim"]):
            raise TensorError("kernel dim does not match the supplied space")
        coeffs = {tuple(idx): val for idx, val in obj["entries"]}
        return cls(space, int(obj["order"]), coeffs)

    @classmethod
    def from_json(cls, text: str, space: GramSpace | None = None) -> "SymKernel":
        return cls.from_json_obj(json.loads(text), space)


# ----------------------------------------------------------------------
# operations
# ----------------------------------------------------------------------


def tensor_power(space: GramSpace, h: np.ndarray, q: int) -> SymKernel:
    """q-fold tensor power h ⊗ ... ⊗ h; symmetric by construction."""
    if q < 0:
        raise InvalidOrderError(f"tensor power needs q >= 0, got {q}")
    vec = np.asarray(h, dtype=float)
    if vec.shape != (space.dim,):
        raise TensorError(f"vector shape {vec.shape} incompatible with dim {space.dim}")
    if q == 0:
        return SymKernel.scalar(space, 1.0)
    support = [i for i in range(space.dim) if vec[i] != 0.0]
    coeffs: dict[tuple[int, ...], float] = {}
    for index in itertools.combinations_with_replacement(support, q):
        prod = 1.0
        for i in index:
            prod *= vec[i]
        coeffs[index] = prod * multiindex_multiplicity(index)
    return SymKernel(space, q, coeffs)


def symmetrize(space: GramSpace, raw: np.ndarray) -> SymKernel:
    """Average a raw order-q tensor over all q! index permutations.

    Uses the coset recursion S_k = (1/k) sum_i (i, k-1) S_{k-1}: once the
    first k-1 axes are symmetric, averaging the k-th axis into each position
    finishes the job in O(q^2) transposes instead of q!.
    """
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 0:
        return SymKernel.scalar(space, float(arr))
    q = arr.ndim
    sym = arr
    for k in range(2, q + 1):
        acc = sym.copy()
        for i in range(k - 1):
            acc += np.swapaxes(sym, i, k - 1)
        sym = acc / k
    return SymKernel.from_dense(space, sym)


def _apply_gram(space: GramSpace, arr: np.ndarray, naxes: int) -> np.ndarray:
    """Multiply the trailing `naxes` axes of arr by G, preserving axis order."""
    out = arr
    total = arr.ndim
    for _ in range(naxes):
        # tensordot consumes axis (total - naxes) and appends the transformed
        # axis at the end, so repeating walks through the original tail axes.
        out = np.tensordot(out, space.gram, axes=([total - naxes], [0]))
    return out


def contract(f: SymKernel, g: SymKernel, r: int) -> np.ndarray:
    """r-th contraction f ⊗_r g, pairing r slots through the Gram metric.

    Returns the raw (generally non-symmetric) dense tensor of order
    p + q - 2r; a plain float for full contractions.  r = 0 is the tensor
    product; r = p = q is the scalar inner product.
    """
    _check_same_space(f, g)
    if r < 0 or r > min(f.order, g.order):
        raise InvalidContractionError(
            f"contraction index {r} outside [0, {min(f.order, g.order)}]"
        )
    a = f.to_dense()
    b = g.to_dense()
    if r == 0:
        out = np.multiply.outer(a, b)
    else:
        a_metric = _apply_gram(f.space, a, r)
        out = np.tensordot(a_metric, b, axes=(list(range(f.order - r, f.order)),
                                              list(range(g.order - r, g.order))))
    if out.ndim == 0:
        return float(out)
    return out


def gram_inner(f: SymKernel, g: SymKernel) -> float:
    """<f, g> in the induced metric of the order-q tensor power."""
    _check_same_space(f, g)
    if f.order != g.order:
        raise OrderMismatchError(
            f"inner product needs equal orders, got {f.order} and {g.order}"
        )
    if f.order == 0:
        return f.coeffs.get((), 0.0) * g.coeffs.get((), 0.0)
    return float(contract(f, g, f.order))


def raw_norm_sq(space: GramSpace, raw: np.ndarray) -> float:
    """Squared norm of a raw dense tensor under the induced Gram metric."""
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 0:
        return float(arr) ** 2
    transformed = _apply_gram(space, arr, arr.ndim)
    return float(np.tensordot(arr, transformed, axes=arr.ndim))
