"""Simulated two-sample scenarios.

Each scenario names a pair of generative laws.  Continuous samples are put
on the rectangle spanned by the pooled data; table samples are drawn
retrospectively (controls, then cases) from a simulated population.
Appending ``-null`` to a name draws both samples from the first law.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from ..numerics import as_generator
from ..space import CONTINUOUS, TABLE, Dataset, SampleSpace

NULL_SUFFIX = "-null"
DEFAULT_POPULATION = 200_000


@dataclass(frozen=True)
class ScenarioSpec:
    """A named pair of laws.

    ``draw(gen, n1, n2, null)`` returns raw point arrays; tables use cell
    values 1/2.
    """

    name: str
    kind: str
    dims: int
    draw: Callable
    n1: int
    n2: int
    null: bool = False
    bounds: tuple | None = None

    def null_variant(self) -> "ScenarioSpec":
        name = self.name if self.null else self.name + NULL_SUFFIX
        return replace(self, name=name, null=True)


def _bn(gen, n, mean, sd, corr=0.0):
    cov = np.array([[sd[0] ** 2, corr * sd[0] * sd[1]], [corr * sd[0] * sd[1], sd[1] ** 2]])
    return gen.multivariate_normal(mean, cov, size=n)


def _mix(gen, n, weights, parts):
    """Mixture draw: ``parts`` are callables ``(gen, m) -> array``."""
    comp = gen.choice(len(weights), size=n, p=weights)
    out = [None] * len(parts)
    for k, part in enumerate(parts):
        out[k] = part(gen, int(np.sum(comp == k)))
    res = np.empty((n,) + out[0].shape[1:])
    for k in range(len(parts)):
        res[comp == k] = out[k]
    return res


def _pair(law1, law2):
    def draw(gen, n1, n2, null):
        x1 = law1(gen, n1)
        x2 = law1(gen, n2) if null else law2(gen, n2)
        return x1, x2

    return draw


def _continuous(name, dims, law1, law2, n, bounds=None):
    return ScenarioSpec(name, CONTINUOUS, dims, _pair(law1, law2), n, n, bounds=bounds)


# -- binary predictor populations ----------------------------------------


def response_probability(x: np.ndarray) -> np.ndarray:
    """``P(Y = 1 | x)`` for 0/1 predictors (columns 3, 7 and 10 are used)."""
    x3, x7, x10 = x[:, 2], x[:, 6], x[:, 9]
    hot = ((x3 == 1) & (x7 == 1)) | ((x7 == 0) & (x10 == 0))
    return np.where(hot, 0.3, 0.1)


def simulate_population(p: int, markov: bool, size: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Predictors (0/1) and responses for a simulated population.

    With ``markov`` the first ``min(8, p)`` predictors form a chain that
    keeps its previous value with probability 0.7; the rest are fair coins.
    """
    if p < 10:
        raise ValueError("the response rule needs at least 10 predictors")
    gen = as_generator(rng)
    x = (gen.random((size, p)) < 0.5).astype(np.int8)
    if markov:
        stay = gen.random((size, 7)) < 0.7
        for t in range(1, 8):
            x[:, t] = np.where(stay[:, t - 1], x[:, t - 1], 1 - x[:, t - 1])
    y = (gen.random(size) < response_probability(x)).astype(np.int8)
    return x, y


def retrospective_sample(x: np.ndarray, y: np.ndarray, n_controls: int, n_cases: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Sample controls (``y = 0``) and cases (``y = 1``) without replacement."""
    gen = as_generator(rng)
    controls = np.flatnonzero(y == 0)
    cases = np.flatnonzero(y == 1)
    if n_controls > len(controls) or n_cases > len(cases):
        raise ValueError("population too small for the requested sample sizes")
    i0 = gen.choice(controls, size=n_controls, replace=False)
    i1 = gen.choice(cases, size=n_cases, replace=False)
    return x[i0], x[i1]


def _table_scenario(name, markov, p, population, n):
    def draw(gen, n1, n2, null):
        x, y = simulate_population(p, markov, population, gen)
        if null:
            a, _ = retrospective_sample(x, y, n1 + n2, 0, gen)
            x1, x2 = a[:n1], a[n1:]
        else:
            x1, x2 = retrospective_sample(x, y, n1, n2, gen)
        return x1 + 1, x2 + 1

    return ScenarioSpec(name, TABLE, p, draw, n, n)


def _builders():
    def beta(a, b, shift=0.0):
        return lambda g, n: (shift + g.beta(a, b, n)).reshape(-1, 1)

    def normal(sd):
        return lambda g, n: g.normal(0.0, sd, n).reshape(-1, 1)

    def bn(mean, sd, corr=0.0):
        return lambda g, n: _bn(g, n, mean, sd, corr)

    return {
        "1d-location": lambda o: _continuous("1d-location", 1, beta(4, 6), beta(4, 6, 0.2), 20),
        "1d-local": lambda o: _continuous(
            "1d-local",
            1,
            lambda g, n: g.random(n).reshape(-1, 1),
            lambda g, n: _mix(g, n, [0.5, 0.5], [beta(20, 10), beta(10, 20)]),
            30,
        ),
        "1d-dispersion": lambda o: _continuous("1d-dispersion", 1, normal(1.0), normal(2.0), 40),
        "2d-location": lambda o: _continuous("2d-location", 2, bn([1, 0], [2, 2]), bn([0, 1], [2, 2]), 50),
        "2d-subset": lambda o: _continuous(
            "2d-subset",
            2,
            bn([0, 0], [0.3, 0.3]),
            lambda g, n: _mix(g, n, [0.8, 0.2], [bn([0, 0], [0.3, 0.3]), bn([0.5, 0.5], [0.3, 0.3])]),
            100,
        ),
        "2d-dispersion": lambda o: _continuous("2d-dispersion", 2, bn([0, 0], [1, 1]), bn([0, 0], [0.5, 0.5]), 50),
        "2d-local": lambda o: _continuous(
            "2d-local",
            2,
            bn([0, 0], [1, 1], 0.25),
            lambda g, n: _mix(g, n, [0.5, 0.5], [bn([0.5, 0.5], [0.4, 0.4]), bn([-0.5, -0.5], [0.4, 0.4])]),
            50,
        ),
        "table-indep": lambda o: _table_scenario(
            "table-indep", False, o.get("p", 15), o.get("population", DEFAULT_POPULATION), 500
        ),
        "table-markov": lambda o: _table_scenario(
            "table-markov", True, o.get("p", 15), o.get("population", DEFAULT_POPULATION), 500
        ),
        "dist-beta": lambda o: _continuous("dist-beta", 1, beta(2, 5), beta(20, 15), 1000),
        "dist-bvn-mixture": lambda o: _continuous(
            "dist-bvn-mixture",
            2,
            bn([0, 0], [2, 2]),
            lambda g, n: _mix(g, n, [0.5, 0.5], [bn([1, 1], [1, 1]), bn([-1, -1], [1, 1])]),
            1000,
        ),
    }


_BUILDERS = _builders()
SCENARIOS = tuple(_BUILDERS)


def get_scenario(name: str, **options) -> ScenarioSpec:
    """Look up a scenario by name.

    Options ``p`` (number of predictors) and ``population`` apply to the
    table scenarios.
    """
    null = name.endswith(NULL_SUFFIX)
    base = name[: -len(NULL_SUFFIX)] if null else name
    if base not in _BUILDERS:
        raise ValueError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")
    spec = _BUILDERS[base](options)
    return spec.null_variant() if null else spec


def generate_scenario(spec: ScenarioSpec, n1: int | None = None, n2: int | None = None, rng=None) -> tuple[Dataset, Dataset]:
    """Draw the two samples of ``spec`` and wrap them as datasets."""
    n1 = spec.n1 if n1 is None else n1
    n2 = spec.n2 if n2 is None else n2
    if n1 < 1 or n2 < 1:
        raise ValueError("sample sizes must be at least 1")
    if rng is None:
        raise ValueError("a random stream or generator is required")
    gen = as_generator(rng)
    x1, x2 = spec.draw(gen, n1, n2, spec.null)
    if spec.kind == TABLE:
        space = SampleSpace.table(spec.dims)
    elif spec.bounds is not None:
        space = SampleSpace.rectangle(spec.bounds)
    else:
        space = SampleSpace.from_data(x1, x2)
    return Dataset.from_points(space, x1), Dataset.from_points(space, x2)
