"""Orthonormal wavelet bases on measured ball trees.

For each internal ball the functions that are constant on its children and
have zero measure-weighted mean form a space of dimension (number of
children - 1); these spaces are orthogonal across balls, and together with
the normalized constant they span all leaf functions.

Inside each ball we pick a weighted Helmert family: wavelet j takes a
common positive value on the first j children, a negative value on child
j+1, and zero elsewhere, the two values fixed by the zero-mean and
unit-norm constraints.  For a two-child ball with equal masses this is the
classical Haar pair (+1, -1); any other orthonormal choice inside a ball
spans the same space and leaves every operator in :mod:`.pdo` diagonal.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .ball_tree import BallTree

#: Index label used for the constant basis element in coefficient CSVs.
CONSTANT_LABEL = "const"


@dataclass(frozen=True)
class Wavelet:
    """One basis element: mean zero, unit norm, supported in ``ball``.

    ``index`` runs from 1 to (children of ball) - 1.  The vector holds real
    leaf values in canonical leaf order and is constant on each child.
    """

    ball: str
    index: int
    vector: np.ndarray


class WaveletBasis:
    """Orthonormal basis of leaf functions: wavelets plus the constant.

    The basis is ordered by internal ball in depth-first order, then by
    wavelet index, with the constant element last.  ``labels`` mirrors that
    order as ``(ball_id, index)`` pairs, the constant labelled
    ``(root_id, "const")``.
    """

    def __init__(self, tree: BallTree, wavelets: list[Wavelet], constant: np.ndarray):
        self.tree = tree
        self.wavelets = tuple(wavelets)
        self.constant = constant
        self.labels: tuple[tuple[str, int | str], ...] = tuple(
            [(w.ball, w.index) for w in self.wavelets] + [(tree.root, CONSTANT_LABEL)]
        )
        rows = [w.vector for w in self.wavelets] + [constant]
        self._matrix = np.vstack(rows)
        self._matrix.flags.writeable = False
        self._weighted = self._matrix * tree.leaf_measures

    @property
    def size(self) -> int:
        return len(self.wavelets) + 1

    @property
    def matrix(self) -> np.ndarray:
        """Basis vectors as rows, shape (size, n_leaves), constant last."""
        return self._matrix

    def analyze(self, values) -> np.ndarray:
        """Expansion coefficients of a leaf function, one per basis element."""
        v = self.tree.as_leaf_values(values)
        return self._weighted @ v

    def synthesize(self, coefficients) -> np.ndarray:
        """Leaf function with the given expansion coefficients."""
        c = np.asarray(coefficients, dtype=complex)
        if c.shape != (self.size,):
            raise ValueError(f"expected {self.size} coefficients, got shape {c.shape}")
        return self._matrix.T @ c

    def gram(self) -> np.ndarray:
        """Measure-weighted Gram matrix; identity for a correct basis."""
        return self._weighted @ self._matrix.T


def build_basis(tree: BallTree) -> WaveletBasis:
    """Construct the wavelet basis of a tree.

    Deterministic: the same tree always yields bitwise-identical vectors.
    """
    n = tree.n_leaves
    wavelets: list[Wavelet] = []
    for ball_id in tree.internal:
        children = tree.ball(ball_id).children
        masses = [tree.ball(c).measure for c in children]
        head = masses[0]
        for j in range(1, len(children)):
            tail = masses[j]
            total = head + tail
            pos = math.sqrt(tail / (head * total))
            neg = -math.sqrt(head / (tail * total))
            vector = np.zeros(n)
            for child in children[:j]:
                vector[tree.leaf_slice(child)] = pos
            vector[tree.leaf_slice(children[j])] = neg
            vector.flags.writeable = False
            wavelets.append(Wavelet(ball=ball_id, index=j, vector=vector))
            head = total
    constant = np.full(n, 1.0 / math.sqrt(tree.total_measure))
    constant.flags.writeable = False
    return WaveletBasis(tree, wavelets, constant)


def mean(tree: BallTree, values) -> complex:
    """Measure-weighted integral of a leaf function."""
    return complex(tree.as_leaf_values(values) @ tree.leaf_measures)


def write_coefficients(path, basis: WaveletBasis, coefficients) -> None:
    """Export coefficients as CSV columns ball_id, index, re, im."""
    c = np.asarray(coefficients, dtype=complex)
    if c.shape != (basis.size,):
        raise ValueError(f"expected {basis.size} coefficients, got shape {c.shape}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ball_id", "index", "re", "im"])
        for (ball_id, index), value in zip(basis.labels, c):
            writer.writerow(
                [ball_id, index, repr(float(value.real)), repr(float(value.imag))]
            )


def read_coefficients(path, basis: WaveletBasis) -> np.ndarray:
    """Read a coefficient CSV back into basis order."""
    by_label: dict[tuple[str, int | str], complex] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            index: int | str = row["index"]
            if index != CONSTANT_LABEL:
                index = int(index)
            by_label[(row["ball_id"], index)] = complex(
                float(row["re"]), float(row["im"])
            )
    missing = [label for label in basis.labels if label not in by_label]
    if missing:
        raise ValueError(f"coefficient file is missing basis elements: {missing[:5]!r}")
    return np.array([by_label[label] for label in basis.labels])
