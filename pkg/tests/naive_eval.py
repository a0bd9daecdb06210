"""Independent reference implementations used as test oracles.

Everything here is deliberately written in plain Python with none of the
library's evaluation machinery: full recursion with fresh environment dicts,
no early exits, list-of-lists distance matrices, and literal triple loops.
Only the AST node classes are shared, as data definitions.
"""

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


def naive_eval(formula, rows, env):
    """Direct recursive interpreter over a list-of-lists distance matrix."""
    n = len(rows)
    if isinstance(formula, Const):
        return formula.value
    if isinstance(formula, Dist):
        return rows[env[formula.left]][env[formula.right]]
    if isinstance(formula, Min):
        return min(naive_eval(item, rows, env) for item in formula.items)
    if isinstance(formula, Max):
        return max(naive_eval(item, rows, env) for item in formula.items)
    if isinstance(formula, Prod):
        out = 1.0
        for item in formula.factors:
            out = out * naive_eval(item, rows, env)
        return out
    if isinstance(formula, TruncAdd):
        return min(1.0, naive_eval(formula.left, rows, env) + naive_eval(formula.right, rows, env))
    if isinstance(formula, TruncSub):
        return max(0.0, naive_eval(formula.left, rows, env) - naive_eval(formula.right, rows, env))
    if isinstance(formula, AbsDiff):
        return abs(naive_eval(formula.left, rows, env) - naive_eval(formula.right, rows, env))
    if isinstance(formula, Sup):
        return max(
            naive_eval(formula.body, rows, {**env, formula.var: p}) for p in range(n)
        )
    if isinstance(formula, Inf):
        return min(
            naive_eval(formula.body, rows, {**env, formula.var: p}) for p in range(n)
        )
    raise TypeError(f"unknown node {formula!r}")


def brute_force_violation_count(matrix, tol=1e-12, pseudometric=True):
    """Count invariant failures by exhaustive loops over entries and triples."""
    n = len(matrix)
    bad = 0
    for i in range(n):
        if matrix[i][i] != 0.0:
            bad += 1
        for j in range(n):
            if matrix[i][j] != matrix[j][i]:
                bad += 1
            if not (0.0 <= matrix[i][j] <= 1.0):
                bad += 1
            if not pseudometric and i != j and matrix[i][j] == 0.0:
                bad += 1
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if matrix[i][k] > matrix[i][j] + matrix[j][k] + tol:
                    bad += 1
    return bad


def brute_force_katetov(matrix, r, tol=1e-12):
    """Exhaustive pairwise check of the one-point-extension condition."""
    n = len(matrix)
    for i in range(n):
        if not (0.0 <= r[i] <= 1.0):
            return False
    for i in range(n):
        for j in range(n):
            if abs(r[i] - r[j]) > matrix[i][j] + tol:
                return False
            if matrix[i][j] > r[i] + r[j] + tol:
                return False
    return True
