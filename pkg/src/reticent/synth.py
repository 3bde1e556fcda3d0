"""Seeded random scenarios for property tests and acceptance runs."""
from __future__ import annotations

import numpy as np

from .mechanisms import MYERSON, indicative_states_check, strong_regularity_check, virtual_value_table
from .model import JointPrior, Scenario, StateSpace, TypePrior, ValueKernel


def _space(rng, n, max_states, max_residual):
    sizes = (int(rng.integers(1, max_residual + 1)),) + tuple(
        int(rng.integers(1, max_states + 1)) for _ in range(n))
    labels = tuple(tuple(f"s{k}" for k in range(s)) for s in sizes)
    return StateSpace(sizes, labels)


def _prior(rng, space, independent: bool):
    g0 = rng.dirichlet(np.ones(space.sizes[0]))
    if independent:
        rest = np.ones(())
        for s in space.sizes[1:]:
            rest = np.multiply.outer(rest, rng.dirichlet(np.ones(s)))
    else:
        rest = rng.dirichlet(np.full(int(np.prod(space.sizes[1:])), 0.7)).reshape(space.sizes[1:])
    probs = np.multiply.outer(g0, rest)
    return JointPrior(space, probs / probs.sum())


def _types(rng, n, max_types):
    supports, masses = [], []
    for _ in range(n):
        k = int(rng.integers(1, max_types + 1))
        supports.append(tuple(f"t{j}" for j in range(k)))
        masses.append(rng.dirichlet(np.full(k, 2.0)))
    return TypePrior(tuple(supports), tuple(masses))


def random_private_value(seed: int, max_bidders: int = 4, max_states: int = 3, max_types: int = 3,
                         max_residual: int = 2, independent: bool = False) -> Scenario:
    """Values depend on the own type, own state and residual state only."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_bidders + 1))
    space = _space(rng, n, max_states, max_residual)
    prior = _prior(rng, space, independent)
    types = _types(rng, n, max_types)
    tables = []
    for i in range(n):
        shape = [len(types.supports[i]), space.sizes[0]] + [1] * n
        shape[i + 2] = space.sizes[i + 1]
        raw = rng.uniform(0.0, 10.0, size=shape)
        tables.append(np.broadcast_to(raw, (shape[0],) + space.sizes).copy())
    kernel = ValueKernel(tuple(tables), private_value=True)
    kind = "independent" if independent else "correlated"
    return Scenario(space, prior, types, kernel, f"random-private-{kind}-{seed}")


def random_interdependent(seed: int, max_bidders: int = 3, max_states: int = 2,
                          max_types: int = 2, max_residual: int = 2) -> Scenario:
    """Values may depend on every coordinate of the information profile."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_bidders + 1))
    space = _space(rng, n, max_states, max_residual)
    prior = _prior(rng, space, False)
    types = _types(rng, n, max_types)
    tables = tuple(rng.uniform(0.0, 10.0, size=(len(types.supports[i]),) + space.sizes)
                   for i in range(n))
    return Scenario(space, prior, types, ValueKernel(tables), f"random-interdependent-{seed}")


def separable_scenario(space, prior, types, base, cvr, name="") -> Scenario:
    tables, factors = [], []
    n = space.n_bidders
    for i in range(n):
        b = np.asarray(base[i], dtype=float)
        c = np.asarray(cvr[i], dtype=float)
        shape = [1] * (n + 2)
        shape[0] = b.size
        own = [1] * (n + 2)
        own[i + 2] = c.size
        tables.append(np.broadcast_to(b.reshape(shape) * c.reshape(own), (b.size,) + space.sizes).copy())
        factors.append((b, c))
    kernel = ValueKernel(tuple(tables), private_value=True, separable=tuple(factors))
    return Scenario(space, prior, types, kernel, name)


def random_separable(seed: int, max_bidders: int = 3, max_states: int = 3, max_types: int = 3,
                     max_residual: int = 2, require_regular: bool = True,
                     max_tries: int = 500) -> Scenario:
    """Value = positive type base times positive own-state rate.

    With ``require_regular`` the draw is repeated until strong regularity
    (after ironing) and indicative states both hold.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        n = int(rng.integers(1, max_bidders + 1))
        space = _space(rng, n, max_states, max_residual)
        prior = _prior(rng, space, False)
        types = _types(rng, n, max_types)
        base = [np.sort(rng.uniform(0.5, 10.0, size=len(types.supports[i]))) for i in range(n)]
        cvr = [rng.uniform(0.05, 1.0, size=space.sizes[i + 1]) for i in range(n)]
        sc = separable_scenario(space, prior, types, base, cvr, f"random-separable-{seed}")
        if not require_regular:
            return sc
        if (strong_regularity_check(virtual_value_table(sc), ironed=True)
                and indicative_states_check(MYERSON, sc)):
            return sc
    raise RuntimeError(f"no strongly regular draw within {max_tries} tries (seed {seed})")
