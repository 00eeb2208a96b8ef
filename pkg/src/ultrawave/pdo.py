"""Hierarchical operators diagonal in the wavelet basis.

An operator here is determined by a nonnegative kernel value per internal
ball, applied through the minimal ball containing each pair of points:

    (T f)(x) = sum_y T(sup(x, y)) (f(x) - f(y)) nu(y)

Constants are annihilated, and every wavelet is an exact eigenvector: the
eigenvalue attached to a ball combines the kernel value there with one term
per strict ancestor, weighted by the measure that ancestor adds around the
ball.  On a finite tree the ancestor sum is finite, so no summability
condition arises.

``dense_operator`` builds the full leaf-by-leaf matrix straight from the
pair definition, with no reference to wavelets or the eigenvalue sum; it is
the independent oracle ``verify_spectrum`` uses to certify the closed form.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .ball_tree import BallTree
from .wavelet import WaveletBasis


@dataclass(frozen=True)
class SupKernel:
    """Nonnegative kernel value per internal ball."""

    values: Mapping[str, float]

    def __getitem__(self, ball_id: str) -> float:
        return self.values[ball_id]


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalue per internal ball; the constant element has eigenvalue 0."""

    eigenvalues: Mapping[str, float]
    constant_eigenvalue: float = 0.0

    def for_basis(self, basis: WaveletBasis) -> np.ndarray:
        """Eigenvalue per basis element, in basis order (constant last)."""
        return np.array(
            [self.eigenvalues[w.ball] for w in basis.wavelets]
            + [self.constant_eigenvalue]
        )


@dataclass(frozen=True)
class DenseOperator:
    """Leaf-by-leaf matrix realization of the operator.

    Rows sum to zero (constants are killed) and the matrix is self-adjoint
    under the measure-weighted inner product: nu(x) M[x,y] = nu(y) M[y,x].
    """

    matrix: np.ndarray

    def apply(self, values) -> np.ndarray:
        return self.matrix @ np.asarray(values)


def make_kernel(tree: BallTree, values: Mapping[str, float]) -> SupKernel:
    """Validate a kernel: nonnegative and covering every internal ball."""
    cleaned: dict[str, float] = {}
    for ball_id, value in values.items():
        ball = tree.ball(ball_id)
        if ball.is_leaf:
            raise ValueError(f"kernel value given for leaf ball {ball_id!r}")
        v = float(value)
        if not np.isfinite(v) or v < 0:
            raise ValueError(f"kernel value for ball {ball_id!r} must be >= 0, got {v}")
        cleaned[ball_id] = v
    missing = [b for b in tree.internal if b not in cleaned]
    if missing:
        raise ValueError(f"kernel is missing internal balls: {missing[:5]!r}")
    return SupKernel(values=cleaned)


def constant_kernel(tree: BallTree, value: float = 1.0) -> SupKernel:
    return make_kernel(tree, {b: value for b in tree.internal})


def vladimirov_kernel(tree: BallTree, alpha: float) -> SupKernel:
    """Fractional-differentiation style preset: T(I) = diameter(I)**(-alpha-1).

    On a regular p-ary tree this reproduces the scaling of p-adic
    fractional differentiation of order ``alpha``.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return make_kernel(
        tree, {b: tree.ball(b).diameter ** (-alpha - 1.0) for b in tree.internal}
    )


def load_kernel(path, tree: BallTree) -> SupKernel:
    """Read a kernel file: either a JSON object mapping ball id to value, or
    ``{"preset": "vladimirov", "alpha": number}``."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("kernel file must contain a JSON object")
    if "preset" in doc:
        if doc["preset"] != "vladimirov":
            raise ValueError(f"unknown kernel preset: {doc['preset']!r}")
        return vladimirov_kernel(tree, float(doc["alpha"]))
    return make_kernel(tree, doc)


def eigenvalue(tree: BallTree, kernel: SupKernel, ball_id: str) -> float:
    """Wavelet eigenvalue for one internal ball.

    T(I) nu(I) plus, for each strict ancestor J, the kernel value at J times
    the measure J adds beyond its child on the path down to I.  Terms are
    accumulated from the root downward.
    """
    ball = tree.ball(ball_id)
    if ball.is_leaf:
        raise ValueError(f"eigenvalues attach to internal balls, got leaf {ball_id!r}")
    path = [ball_id]
    while path[-1] != tree.root:
        path.append(tree.ball(path[-1]).parent)
    path.reverse()
    lam = 0.0
    for outer, inner in zip(path, path[1:]):
        lam += kernel[outer] * (tree.ball(outer).measure - tree.ball(inner).measure)
    lam += kernel[ball_id] * ball.measure
    return lam


def spectrum(tree: BallTree, kernel: SupKernel) -> Spectrum:
    """Eigenvalues of every internal ball in one root-down sweep."""
    eigs: dict[str, float] = {}
    stack: list[tuple[str, float]] = [(tree.root, 0.0)]
    while stack:
        node, ancestors = stack.pop()
        ball = tree.ball(node)
        if ball.is_leaf:
            continue
        t = kernel[node]
        eigs[node] = ancestors + t * ball.measure
        for child in ball.children:
            stack.append((child, ancestors + t * (ball.measure - tree.ball(child).measure)))
    return Spectrum(eigenvalues=eigs)


def dense_operator(tree: BallTree, kernel: SupKernel) -> DenseOperator:
    """Leaf matrix from the pair definition.

    M[x, y] = -T(sup(x, y)) nu(y) off the diagonal and the negated row sum
    on it.  Exact for leaf functions: within a single leaf f(x) - f(y)
    vanishes, so no quadrature is involved.
    """
    n = tree.n_leaves
    sup_kernel = np.zeros((n, n))
    # depth-first preorder visits parents before children, so the deepest
    # common ball wins each pair entry
    for ball_id in tree.internal:
        sl = tree.leaf_slice(ball_id)
        sup_kernel[sl, sl] = kernel[ball_id]
    weighted = sup_kernel * tree.leaf_measures
    matrix = -weighted
    np.fill_diagonal(matrix, weighted.sum(axis=1) - weighted.diagonal())
    return DenseOperator(matrix=matrix)


def symmetrized(tree: BallTree, matrix: np.ndarray) -> np.ndarray:
    """Conjugate by diag(sqrt(nu)).

    Maps an operator self-adjoint under the measure-weighted inner product
    to a symmetric matrix; the output is explicitly symmetrized to absorb
    last-bit asymmetry.
    """
    r = np.sqrt(tree.leaf_measures)
    sym = matrix * (r[:, None] / r[None, :])
    return 0.5 * (sym + sym.T)


@dataclass(frozen=True)
class SpectrumVerification:
    """Cross-check of the analytic eigenvalues against the dense matrix."""

    max_residual: float
    residual_tol: float
    multiset_max_diff: float
    multiset_tol: float
    operator_norm: float

    @property
    def residual_ok(self) -> bool:
        return self.max_residual <= self.residual_tol

    @property
    def multiset_ok(self) -> bool:
        return self.multiset_max_diff <= self.multiset_tol

    @property
    def passed(self) -> bool:
        return self.residual_ok and self.multiset_ok

    def to_dict(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "residual_tol": self.residual_tol,
            "multiset_max_diff": self.multiset_max_diff,
            "multiset_tol": self.multiset_tol,
            "operator_norm": self.operator_norm,
            "passed": self.passed,
        }


def verify_spectrum(
    tree: BallTree,
    kernel: SupKernel,
    basis: WaveletBasis,
    spec: Spectrum,
    residual_tol: float = 1e-10,
    multiset_tol: float = 1e-8,
) -> SpectrumVerification:
    """Check every basis element against the dense matrix.

    Two independent comparisons: the eigenrelation residual
    ||M psi - lambda psi|| / max(1, ||M|| ||psi||) per basis element, and
    equality of the numerically computed eigenvalue multiset with the
    analytic multiset (each ball's eigenvalue repeated once per wavelet,
    plus 0 for the constant).
    """
    if basis.tree is not tree and basis.tree.leaves != tree.leaves:
        raise ValueError("basis was built for a different tree")
    dense = dense_operator(tree, kernel)
    numeric = np.sort(np.linalg.eigvalsh(symmetrized(tree, dense.matrix)))
    analytic = [spec.constant_eigenvalue]
    for ball_id in tree.internal:
        arity = len(tree.ball(ball_id).children)
        analytic.extend([spec.eigenvalues[ball_id]] * (arity - 1))
    analytic = np.sort(np.array(analytic))
    if analytic.shape != numeric.shape:
        raise ValueError(
            f"eigenvalue count mismatch: {analytic.size} analytic vs {numeric.size} dense"
        )
    multiset_max_diff = float(np.max(np.abs(numeric - analytic), initial=0.0))
    operator_norm = float(np.max(np.abs(numeric), initial=0.0))

    lam = spec.for_basis(basis)
    vectors = basis.matrix.T
    residual = dense.matrix @ vectors - vectors * lam
    residual_norms = np.sqrt(tree.leaf_measures @ residual**2)
    vector_norms = np.sqrt(tree.leaf_measures @ vectors**2)
    scale = np.maximum(1.0, operator_norm * vector_norms)
    max_residual = float(np.max(residual_norms / scale, initial=0.0))
    return SpectrumVerification(
        max_residual=max_residual,
        residual_tol=residual_tol,
        multiset_max_diff=multiset_max_diff,
        multiset_tol=multiset_tol,
        operator_norm=operator_norm,
    )


def write_spectrum(path, tree: BallTree, spec: Spectrum) -> None:
    """Export as CSV columns ball_id, p_I, lambda (internal balls, tree order)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ball_id", "p_I", "lambda"])
        for ball_id in tree.internal:
            writer.writerow(
                [
                    ball_id,
                    len(tree.ball(ball_id).children),
                    repr(float(spec.eigenvalues[ball_id])),
                ]
            )


def read_spectrum(path) -> dict[str, float]:
    """Read a spectrum CSV back as a ball id to eigenvalue mapping."""
    values: dict[str, float] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            values[row["ball_id"]] = float(row["lambda"])
    return values
