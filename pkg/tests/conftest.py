import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from urysohn import validate_space
from urysohn.logic import (
    AbsDiff,
    Const,
    Dist,
    Inf,
    Max,
    Min,
    Prod,
    Sup,
    TruncAdd,
    TruncSub,
)


@pytest.fixture
def two_point():
    return validate_space([[0.0, 0.3], [0.3, 0.0]])


@pytest.fixture
def two_point_04():
    return validate_space([[0.0, 0.4], [0.4, 0.0]])


def random_quantifier_free(rng, scope, depth):
    """Random quantifier-free formula over the variables in ``scope``."""
    if depth <= 0 or rng.uniform() < 0.2:
        if scope and rng.uniform() < 0.7:
            return Dist(str(rng.choice(scope)), str(rng.choice(scope)))
        return Const(round(float(rng.uniform()), 3))
    kind = int(rng.integers(0, 6))
    if kind == 0:
        return Min(tuple(random_quantifier_free(rng, scope, depth - 1) for _ in range(int(rng.integers(1, 4)))))
    if kind == 1:
        return Max(tuple(random_quantifier_free(rng, scope, depth - 1) for _ in range(int(rng.integers(1, 4)))))
    if kind == 2:
        return Prod(tuple(random_quantifier_free(rng, scope, depth - 1) for _ in range(int(rng.integers(2, 4)))))
    if kind == 3:
        return TruncAdd(random_quantifier_free(rng, scope, depth - 1), random_quantifier_free(rng, scope, depth - 1))
    if kind == 4:
        return TruncSub(random_quantifier_free(rng, scope, depth - 1), random_quantifier_free(rng, scope, depth - 1))
    return AbsDiff(random_quantifier_free(rng, scope, depth - 1), random_quantifier_free(rng, scope, depth - 1))


def random_sentence(rng, max_quantifiers=4, depth=3, prenex=False):
    """Random closed formula with at most ``max_quantifiers`` quantifiers.

    Prenex mode keeps all quantifiers at the front (the printable fragment);
    otherwise quantifiers may sit inside connectives.
    """
    n_q = int(rng.integers(1, max_quantifiers + 1))
    names = [f"v{i}" for i in range(n_q)]
    if prenex:
        body = random_quantifier_free(rng, names, depth)
        for name in reversed(names):
            body = Sup(name, body) if rng.uniform() < 0.5 else Inf(name, body)
        return body
    return _nested_quantified(rng, names, [], depth)


def _nested_quantified(rng, pending, scope, depth):
    if not pending:
        return random_quantifier_free(rng, scope, depth)
    name = pending[0]
    inner = scope + [name]
    if len(pending) == 1 or rng.uniform() < 0.5:
        body = _nested_quantified(rng, pending[1:], inner, depth)
    else:
        # Push the remaining quantifiers inside a connective.
        body = Min(
            (
                random_quantifier_free(rng, inner, depth - 1),
                _nested_quantified(rng, pending[1:], inner, depth - 1),
            )
        )
    return (Sup if rng.uniform() < 0.5 else Inf)(name, body)
