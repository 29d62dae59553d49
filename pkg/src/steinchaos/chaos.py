"""Multiple Wiener-Ito integrals over the finite Gaussian model.

A square-integrable functional with finite chaos expansion is represented
as F = c0 + sum_i I_{q_i}(f_i) with symmetric kernels f_i of strictly
increasing orders.  Everything a fixed chaos admits in closed form is
implemented here: pathwise evaluation through Hermite polynomials, the
multiplication formula, the chaos expansion of <DF, -DL^{-1}F> and of
||DF||^2, the Ornstein-Uhlenbeck semigroup action, and an exact moment
oracle by Wick expansion.

Evaluation maps the symmetrized basis tensor of a multi-index with
multiplicities (m_1, ..., m_k) to the product of monic Hermite polynomials
of the coordinates; for a non-identity Gram matrix the kernels are first
rotated into an orthonormalizing frame through a Cholesky factor, so the
Hermite mapping stays exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import wick
from .tensors import (
    GramSpace,
    SymKernel,
    contract,
    gram_inner,
    symmetrize,
)

__all__ = [
    "ChaosError",
    "ComplexityError",
    "ChaosVector",
    "hermite",
    "eval_chaos",
    "exact_moment",
    "multiply",
    "product",
    "malliavin_inner",
    "derivative_norm_sq",
    "ou_semigroup",
]

# E[F^s] enumerates Wick pairings of a degree-(deg * s) polynomial; this caps
# the enumeration at a size that stays under a second.
DEGREE_GUARD = 16


class ChaosError(Exception):
    """Base class for chaos-calculus failures."""


class ComplexityError(ChaosError):
    """Raised when the Wick oracle would exceed the degree guard."""


def _monic_hermite_values(q: int, x: np.ndarray) -> np.ndarray:
    """He_q(x) by the stable three-term recurrence (vectorized)."""
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if q == 0:
        return prev
    cur = x.copy()
    for n in range(1, q):
        prev, cur = cur, x * cur - n * prev
    return cur


def hermite(q: int, x: float | np.ndarray) -> float | np.ndarray:
    """Hermite polynomial with the 1/q! normalization: H_2(x) = (x^2-1)/2."""
    if q < 0:
        raise ChaosError(f"Hermite order must be >= 0, got {q}")
    vals = _monic_hermite_values(q, np.asarray(x, dtype=float)) / math.factorial(q)
    return float(vals) if np.ndim(x) == 0 else vals


@dataclass(frozen=True)
class ChaosVector:
    """Finite chaos expansion c0 + sum I_{q_i}(f_i), one term per order."""

    space: GramSpace
    constant: float
    terms: tuple[SymKernel, ...]

    def __post_init__(self):
        orders = [k.order for k in self.terms]
        if any(q < 1 for q in orders):
            raise ChaosError("chaos terms must have order >= 1")
        if sorted(orders) != orders or len(set(orders)) != len(orders):
            raise ChaosError("terms must have strictly increasing orders")
        for k in self.terms:
            if not k.space.same_as(self.space):
                raise ChaosError("all kernels must live over the shared space")

    @classmethod
    def build(
        cls,
        space: GramSpace,
        constant: float = 0.0,
        kernels: dict[int, SymKernel] | list[SymKernel] | None = None,
    ) -> "ChaosVector":
        items = []
        if kernels:
            values = kernels.values() if isinstance(kernels, dict) else kernels
            for k in values:
                if k.coeffs:
                    items.append(k)
        items.sort(key=lambda k: k.order)
        return cls(space, float(constant), tuple(items))

    @classmethod
    def single(cls, kernel: SymKernel) -> "ChaosVector":
        """The single multiple integral I_q(f)."""
        return cls.build(kernel.space, 0.0, [kernel])

    # ------------------------------------------------------------------

    def kernel_of_order(self, q: int) -> SymKernel | None:
        for k in self.terms:
            if k.order == q:
                return k
        return None

    @property
    def max_order(self) -> int:
        return self.terms[-1].order if self.terms else 0

    def second_moment(self) -> float:
        """E[F^2] from chaos orthogonality."""
        return self.constant**2 + sum(
            math.factorial(k.order) * gram_inner(k, k) for k in self.terms
        )

    def __add__(self, other: "ChaosVector") -> "ChaosVector":
        if not self.space.same_as(other.space):
            raise ChaosError("chaos vectors live over different spaces")
        merged: dict[int, SymKernel] = {k.order: k for k in self.terms}
        for k in other.terms:
            merged[k.order] = merged[k.order] + k if k.order in merged else k
        return ChaosVector.build(self.space, self.constant + other.constant, merged)

    def __mul__(self, scalar: float) -> "ChaosVector":
        s = float(scalar)
        return ChaosVector.build(
            self.space, s * self.constant, [s * k for k in self.terms]
        )

    __rmul__ = __mul__

    def __sub__(self, other: "ChaosVector") -> "ChaosVector":
        return self + (-1.0) * other

    # ------------------------------------------------------------------

    def _orthonormal_kernel(self, kernel: SymKernel) -> SymKernel:
        """Coefficients of the kernel in the Cholesky-orthonormalized frame."""
        if self.space.is_identity:
            return kernel
        L = self.space.cholesky()
        arr = kernel.to_dense()
        q = kernel.order
        for _ in range(q):
            arr = np.tensordot(arr, L, axes=([0], [0]))
        iid_space = GramSpace.standard(self.space.dim)
        return SymKernel.from_dense(iid_space, arr)

    def eval(self, xi: np.ndarray) -> float | np.ndarray:
        """Pathwise value at standard-normal coordinates of the orthonormal frame."""
        pts = np.asarray(xi, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        if pts.shape[1] != self.space.dim:
            raise ChaosError(
                f"coordinate dimension {pts.shape[1]} != model dimension {self.space.dim}"
            )
        total = np.full(pts.shape[0], self.constant)
        for kernel in self.terms:
            ortho = self._orthonormal_kernel(kernel)
            for index, coeff in ortho.coeffs.items():
                factor = np.full(pts.shape[0], coeff)
                for var, group in itertools.groupby(index):
                    mult = sum(1 for _ in group)
                    factor = factor * _monic_hermite_values(mult, pts[:, var])
                total += factor
        return float(total[0]) if single else total

    def to_polynomial(self) -> wick.Poly:
        """Polynomial in the i.i.d. coordinates of the orthonormal frame."""
        d = self.space.dim
        poly = wick.poly_const(d, self.constant)
        for kernel in self.terms:
            ortho = self._orthonormal_kernel(kernel)
            for index, coeff in ortho.coeffs.items():
                term = wick.poly_const(d, coeff)
                for var, group in itertools.groupby(index):
                    mult = sum(1 for _ in group)
                    term = wick.poly_mul(term, wick.monic_hermite_poly(d, var, mult))
                poly = wick.poly_add(poly, term)
        return poly

    # ------------------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "constant": self.constant,
            "terms": [
                {"order": k.order, "kernel": k.to_json_obj()} for k in self.terms
            ],
        }

    @classmethod
    def from_json_obj(cls, obj: dict, space: GramSpace) -> "ChaosVector":
        kernels = [
            SymKernel.from_json_obj(t["kernel"], space) for t in obj["terms"]
        ]
        return cls.build(space, float(obj["constant"]), kernels)


def eval_chaos(F: ChaosVector, xi: np.ndarray) -> float | np.ndarray:
    return F.eval(xi)


def exact_moment(F: ChaosVector, s: int) -> float:
    """Exact E[F^s] through Wick expansion of the coordinate polynomial."""
    if s < 0:
        raise ChaosError(f"moment order must be >= 0, got {s}")
    if s == 0:
        return 1.0
    degree = F.max_order
    if degree * s > DEGREE_GUARD:
        raise ComplexityError(
            f"degree {degree} * power {s} exceeds the Wick guard {DEGREE_GUARD}"
        )
    poly = wick.poly_pow(F.to_polynomial(), s)
    return wick.poly_gaussian_expectation(poly)


def _single_term(F: ChaosVector) -> SymKernel:
    if F.constant != 0.0 or len(F.terms) != 1:
        raise ChaosError("operand must be a single multiple integral I_q(f)")
    return F.terms[0]


def multiply(F: ChaosVector, G: ChaosVector) -> ChaosVector:
    """Chaos expansion of I_p(f) I_q(g) by the multiplication formula."""
    f, g = _single_term(F), _single_term(G)
    if not f.space.same_as(g.space):
        raise ChaosError("operands live over different spaces")
    p, q = f.order, g.order
    constant = 0.0
    kernels: dict[int, SymKernel] = {}
    for r in range(min(p, q) + 1):
        coeff = math.factorial(r) * math.comb(p, r) * math.comb(q, r)
        raw = contract(f, g, r)
        order = p + q - 2 * r
        if order == 0:
            constant += coeff * raw
        else:
            term = coeff * symmetrize(f.space, raw)
            kernels[order] = kernels[order] + term if order in kernels else term
    return ChaosVector.build(f.space, constant, kernels)


def product(F: ChaosVector, G: ChaosVector) -> ChaosVector:
    """Product of two general chaos vectors, distributed term by term."""
    if not F.space.same_as(G.space):
        raise ChaosError("operands live over different spaces")
    out = ChaosVector.build(F.space, F.constant * G.constant)
    for k in F.terms:
        out = out + G.constant * ChaosVector.single(k)
    for k in G.terms:
        out = out + F.constant * ChaosVector.single(k)
    for kf in F.terms:
        for kg in G.terms:
            out = out + multiply(ChaosVector.single(kf), ChaosVector.single(kg))
    return out


def _pairing_expansion(F: ChaosVector, weight) -> ChaosVector:
    """Shared expansion sum_{i,j} w(q_i) sum_r c_r I_{q_i+q_j-2r}(f_i x_r f_j).

    weight(q_i, q_j) supplies the leading factor: q_i for <DF, -DL^{-1}F>,
    q_i * q_j for ||DF||^2.  The r = q_i diagonal terms are the constants.
    """
    constant = 0.0
    kernels: dict[int, SymKernel] = {}
    for fi in F.terms:
        for fj in F.terms:
            qi, qj = fi.order, fj.order
            for r in range(1, min(qi, qj) + 1):
                coeff = (
                    weight(qi, qj)
                    * math.factorial(r - 1)
                    * math.comb(qi - 1, r - 1)
                    * math.comb(qj - 1, r - 1)
                )
                raw = contract(fi, fj, r)
                order = qi + qj - 2 * r
                if order == 0:
                    constant += coeff * raw
                else:
                    term = coeff * symmetrize(F.space, raw)
                    kernels[order] = (
                        kernels[order] + term if order in kernels else term
                    )
    return ChaosVector.build(F.space, constant, kernels)


def malliavin_inner(F: ChaosVector) -> ChaosVector:
    """Chaos expansion of <DF, -DL^{-1}F> for a centered chaos vector.

    For a single chaos I_q(f) this equals q^{-1} ||DF||^2, with constant
    term q! ||f||^2; for sums, the mixed contractions f_i x_r f_j enter with
    weight q_i (r-1)! binom(q_i-1, r-1) binom(q_j-1, r-1).
    """
    if F.constant != 0.0:
        raise ChaosError("malliavin_inner requires a centered input (constant 0)")
    return _pairing_expansion(F, lambda qi, qj: qi)


def derivative_norm_sq(F: ChaosVector) -> ChaosVector:
    """Chaos expansion of ||DF||^2 (constant term sum q_i q_i! ||f_i||^2)."""
    if F.constant != 0.0:
        raise ChaosError("derivative_norm_sq requires a centered input")
    return _pairing_expansion(F, lambda qi, qj: qi * qj)


def ou_semigroup(F: ChaosVector, z: float) -> ChaosVector:
    """Ornstein-Uhlenbeck action: the order-q term is scaled by e^{-qz}."""
    if z < 0:
        raise ChaosError(f"semigroup time must be >= 0, got {z}")
    return ChaosVector.build(
        F.space,
        F.constant,
        [math.exp(-k.order * z) * k for k in F.terms],
    )
