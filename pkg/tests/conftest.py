import pytest

import ultrawave as uw


@pytest.fixture
def binary_tree():
    """Uniform binary tree of depth 2, total measure 1."""
    return uw.build_tree(uw.padic_preset(2, 2, 1.0))


@pytest.fixture
def binary_kernel(binary_tree):
    """Kernel 1 at the root and 2 on both level-1 balls."""
    return uw.make_kernel(binary_tree, {"r": 1.0, "r.0": 2.0, "r.1": 2.0})


@pytest.fixture
def lopsided_tree():
    """Two leaves with masses 1/3 and 2/3."""
    spec = uw.TreeSpec(
        balls=(
            uw.BallSpec("root", None, 1.0),
            uw.BallSpec("a", "root", 0.5),
            uw.BallSpec("b", "root", 0.5),
        ),
        leaf_measures={"a": 1.0 / 3.0, "b": 2.0 / 3.0},
    )
    return uw.build_tree(spec)
