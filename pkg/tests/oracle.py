"""Straight-line MDR reimplementation used as a test oracle.

Plain Python loops, dicts and exact fractions; nothing here imports the
package's kernels, masks or batching.
"""

from __future__ import annotations

import math
from fractions import Fraction

MISSING = 3


def table(ga, gb, status, include):
    """{(a, b): [cases, controls]} over included patients with both genotypes."""
    cells = {(a, b): [0, 0] for a in range(3) for b in range(3)}
    for a, b, s, inc in zip(ga, gb, status, include):
        if not inc or a == MISSING or b == MISSING:
            continue
        if s == 1:
            cells[(int(a), int(b))][0] += 1
        else:
            cells[(int(a), int(b))][1] += 1
    return cells


def risk(cells, n_cases, n_controls, empty_high=False, tie_high=False):
    t = Fraction(n_cases, n_controls)
    labels = {}
    for key, (cases, controls) in cells.items():
        if cases == 0 and controls == 0:
            labels[key] = empty_high
        elif controls == 0:
            labels[key] = True
        else:
            r = Fraction(cases, controls)
            labels[key] = r > t or (r == t and tie_high)
    return labels


def error(labels, ga, gb, status, test):
    wrong = total = 0
    for a, b, s, inc in zip(ga, gb, status, test):
        if not inc or a == MISSING or b == MISSING:
            continue
        total += 1
        predicted = 1 if labels[(int(a), int(b))] else 0
        if predicted != s:
            wrong += 1
    if total == 0:
        raise ZeroDivisionError("empty test fold")
    return wrong / total


def pair_errors(ga, gb, status, folds, k, empty_high=False, tie_high=False):
    n_cases = sum(1 for s in status if s == 1)
    n_controls = len(status) - n_cases
    out = []
    for f in range(k):
        train = [fold != f for fold in folds]
        test = [fold == f for fold in folds]
        cells = table(ga, gb, status, train)
        labels = risk(cells, n_cases, n_controls, empty_high, tie_high)
        out.append(error(labels, ga, gb, status, test))
    return out


def cross_pairs(sizes):
    out = []
    for i in range(len(sizes)):
        for j in range(i, len(sizes)):
            for a in range(sizes[i]):
                for b in range(sizes[j]):
                    out.append((i, a, j, b))
    return out


def distinct_pairs(sizes):
    flat = [(f, i) for f, m in enumerate(sizes) for i in range(m)]
    return [flat[u] + flat[v] for u in range(len(flat)) for v in range(u + 1, len(flat))]


def rank(pairs, fold_errors, top_fraction):
    """Returns (ranked pairs, {pair: consistency})."""
    n = len(pairs)
    k = len(fold_errors[0])
    m = min(n, max(1, math.ceil(round(top_fraction * n, 9))))
    consistency = {p: 0 for p in pairs}
    for f in range(k):
        ordered = sorted(range(n), key=lambda i: (fold_errors[i][f], pairs[i]))
        for i in ordered[:m]:
            consistency[pairs[i]] += 1
    means = [sum(e) / k for e in fold_errors]
    ranked = sorted(range(n), key=lambda i: (-consistency[pairs[i]], means[i], pairs[i]))
    return [pairs[i] for i in ranked], consistency
