"""Two-level logic minimization: Quine-McCluskey with Petrick's method.

Cubes are tuples over {0, 1, 2} with one slot per variable (2 = don't care),
most significant variable first. Don't-care minterms may be absorbed by
implicants but never need to be covered.
"""

from __future__ import annotations

from itertools import combinations
from typing import Dict, Iterable, List, Sequence, Tuple

from .ir import BooleanEqnsIr, KMapIr

Cube = Tuple[int, ...]


def minterm_bits(value: int, n_vars: int) -> Cube:
    return tuple((value >> (n_vars - 1 - i)) & 1 for i in range(n_vars))


def cube_covers(cube: Cube, minterm: Cube) -> bool:
    return all(c == 2 or c == m for c, m in zip(cube, minterm))


def _try_merge(a: Cube, b: Cube):
    diff = -1
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            if x == 2 or y == 2 or diff >= 0:
                return None
            diff = i
    if diff < 0:
        return None
    return a[:diff] + (2,) + a[diff + 1:]


def prime_implicants(n_vars: int, on_set: Iterable[int],
                     dc_set: Iterable[int] = ()) -> List[Cube]:
    """All prime implicants of the function, DC minterms included in merging."""
    on_set = sorted(set(on_set))
    dc_set = sorted(set(dc_set) - set(on_set))
    level = {minterm_bits(m, n_vars) for m in on_set + dc_set}
    primes = set()
    while level:
        merged = set()
        next_level = set()
        for a, b in combinations(sorted(level), 2):
            c = _try_merge(a, b)
            if c is not None:
                merged.add(a)
                merged.add(b)
                next_level.add(c)
        primes.update(level - merged)
        level = next_level
    on_bits = [minterm_bits(m, n_vars) for m in on_set]
    return sorted(p for p in primes if any(cube_covers(p, m) for m in on_bits))


def minimum_cover(primes: Sequence[Cube], on_set: Iterable[int],
                  n_vars: int) -> List[Cube]:
    """Smallest prime subset covering every ON minterm (Petrick, exact).

    Ties in cover size break toward the lexicographically smallest selection
    of implicants, so the result is deterministic.
    """
    on_bits = [minterm_bits(m, n_vars) for m in sorted(set(on_set))]
    if not on_bits:
        return []
    coverage = []
    for m in on_bits:
        idxs = frozenset(i for i, p in enumerate(primes) if cube_covers(p, m))
        if not idxs:
            raise ValueError(f"minterm {m} covered by no prime implicant")
        coverage.append(idxs)
    for size in range(1, len(primes) + 1):
        candidates = [subset for subset in combinations(range(len(primes)), size)
                      if all(set(subset) & idxs for idxs in coverage)]
        if candidates:
            best = min(candidates, key=lambda s: tuple(primes[i] for i in s))
            return [primes[i] for i in best]
    raise ValueError("no cover found")  # unreachable given the coverage check


def cube_to_expression(cube: Cube, variables: Sequence[str]) -> str:
    """Render one product term with word operators (AND/NOT)."""
    literals = []
    for value, name in zip(cube, variables):
        if value == 1:
            literals.append(name)
        elif value == 0:
            literals.append(f"NOT {name}")
    if not literals:
        return "1"
    return " AND ".join(literals)


def cover_to_expression(cover: Sequence[Cube], variables: Sequence[str]) -> str:
    if not cover:
        return "0"
    terms = [cube_to_expression(c, variables) for c in cover]
    if len(terms) == 1:
        return terms[0]
    return " OR ".join(f"({t})" if " " in t else t for t in terms)


def kmap_on_dc_sets(kmap: KMapIr) -> Tuple[List[int], List[int]]:
    """Flatten the grid into ON and DC minterm lists.

    The minterm index concatenates row bits (high) and column bits (low).
    """
    n_cols_bits = len(kmap.col_vars)
    on, dc = [], []
    for r, row in enumerate(kmap.cells):
        for c, value in enumerate(row):
            minterm = (r << n_cols_bits) | c
            if value == "1":
                on.append(minterm)
            elif value == "X":
                dc.append(minterm)
    return on, dc


def minimize_kmap(kmap: KMapIr, output_name: str = "f") -> BooleanEqnsIr:
    """Minimal sum-of-products equation for the map's single output."""
    kmap.validate()
    variables = kmap.variables
    on, dc = kmap_on_dc_sets(kmap)
    n_vars = len(variables)
    if not on:
        expression = "0"
    else:
        primes = prime_implicants(n_vars, on, dc)
        cover = minimum_cover(primes, on, n_vars)
        expression = cover_to_expression(cover, variables)
    return BooleanEqnsIr(
        inputs=tuple(variables),
        outputs=(output_name,),
        expressions={output_name: expression},
    )
