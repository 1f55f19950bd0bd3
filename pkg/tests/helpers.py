"""Shared generators and brute-force oracles for the test suite."""

import itertools
import math

from odrelease import AttributeSchema, Histogram, RepairSpec

ATTR_NAMES = ("a0", "a1", "a2", "a3")


def random_full_support_case(rng, binary_xy=False, max_labels=5):
    """Random small histogram plus spec satisfying full conditional support.

    For every active conditioning stratum z, a subset of X labels and a
    subset of Y labels is chosen and every (x, y) pair in their product gets
    at least one positively counted bucket, so the factorization's support
    is a per-stratum product as the repair guarantees require.  With
    binary_xy=True, X and Y get two labels each and both X labels appear in
    every stratum (so overlap holds everywhere).
    """
    n_attrs = int(rng.integers(2, 5))
    names = ATTR_NAMES[:n_attrs]
    sizes = {}
    for name in names:
        sizes[name] = int(rng.integers(2, max_labels + 1))
    order = list(rng.permutation(n_attrs))
    x_name, y_name = names[order[0]], names[order[1]]
    rest = [names[i] for i in order[2:]]
    n_z = int(rng.integers(0, len(rest) + 1))
    z_names = tuple(sorted(rest[:n_z]))
    if binary_xy:
        sizes[x_name] = 2
        sizes[y_name] = 2

    schema = AttributeSchema(
        tuple((name, tuple(f"v{j}" for j in range(sizes[name]))) for name in names)
    )
    spec = RepairSpec(x_name, y_name, z_names)

    xi = schema.position(x_name)
    yi = schema.position(y_name)
    zi = [schema.position(n) for n in z_names]
    ui = [i for i in range(n_attrs) if i != xi and i != yi and i not in zi]

    z_domains = [schema.domains[i] for i in zi]
    u_domains = [schema.domains[i] for i in ui]
    all_strata = list(itertools.product(*z_domains)) if zi else [()]
    n_active = int(rng.integers(1, len(all_strata) + 1))
    strata = [all_strata[i] for i in rng.choice(len(all_strata), size=n_active, replace=False)]

    counts = {}
    for zkey in strata:
        x_labels = list(schema.domains[xi])
        y_labels = list(schema.domains[yi])
        if binary_xy:
            sx = x_labels
        else:
            kx = int(rng.integers(1, len(x_labels) + 1))
            sx = [x_labels[i] for i in rng.choice(len(x_labels), size=kx, replace=False)]
        ky = int(rng.integers(1, len(y_labels) + 1))
        sy = [y_labels[i] for i in rng.choice(len(y_labels), size=ky, replace=False)]
        u_cells = list(itertools.product(*u_domains)) if ui else [()]
        for x_lab, y_lab in itertools.product(sx, sy):
            ku = int(rng.integers(1, len(u_cells) + 1))
            chosen = [u_cells[i] for i in rng.choice(len(u_cells), size=ku, replace=False)]
            for ucell in chosen:
                key = [None] * n_attrs
                key[xi] = x_lab
                key[yi] = y_lab
                for pos, lab in zip(zi, zkey):
                    key[pos] = lab
                for pos, lab in zip(ui, ucell):
                    key[pos] = lab
                counts[tuple(key)] = int(rng.integers(1, 16))
    return Histogram(schema, counts), spec


def ranking_of(h, union_keys):
    """Count-descending ranking over union_keys, ties broken by key."""
    return sorted(union_keys, key=lambda k: (-h.get(k, 0), k))


def pwkt_bruteforce(ref_ranking, other_ranking, weight=lambda i: 1.0 / i):
    """Sum of (w(i)+w(j))/2 over discordant pairs by direct enumeration."""
    pos_ref = {k: i + 1 for i, k in enumerate(ref_ranking)}
    pos_other = {k: i + 1 for i, k in enumerate(other_ranking)}
    terms = []
    items = list(ref_ranking)
    for a in range(len(items)):
        for b in range(a + 1, len(items)):
            u, v = items[a], items[b]
            if (pos_ref[u] - pos_ref[v]) * (pos_other[u] - pos_other[v]) < 0:
                terms.append(0.5 * (weight(pos_ref[u]) + weight(pos_ref[v])))
    return math.fsum(terms)


def ladder_histograms(m):
    """Reference with counts m..1 and its exact reversal, distinct counts."""
    schema = AttributeSchema((("item", tuple(f"i{j:02d}" for j in range(m))),))
    ref = Histogram(schema, {(f"i{j:02d}",): m - j for j in range(m)})
    rev = Histogram(schema, {(f"i{j:02d}",): j + 1 for j in range(m)})
    return ref, rev


def full_reversal_closed_form(m):
    """Sum over all pairs i < j of (1/i + 1/j)/2."""
    return math.fsum(
        0.5 * (1.0 / i + 1.0 / j) for i in range(1, m + 1) for j in range(i + 1, m + 1)
    )
