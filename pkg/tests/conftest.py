import json

import numpy as np
import pytest

from sigcert import Box, Polyhedron, Signomial, default_backend


@pytest.fixture(scope="session")
def backend():
    return default_backend()


@pytest.fixture()
def toy_signomial():
    """exp(1.5 x1) - exp(x2) - exp(-x2)."""
    return Signomial([[1.5, 0.0], [0.0, 1.0], [0.0, -1.0]], [1.0, -1.0, -1.0])


@pytest.fixture()
def toy_set():
    """The segment {x1 = 1, -1 <= x2 <= 1} as opposing polyhedron rows."""
    return Polyhedron(
        [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
        [1.0, -1.0, 1.0, 1.0],
    )


@pytest.fixture()
def amgm_signomial():
    """exp(x) + exp(-x), minimized at 2."""
    return Signomial([[1.0], [-1.0]], [1.0, 1.0])


def random_box_instance(rng, max_terms=4, max_dim=2, exp_range=2.0):
    """Random signomial + bounded box in [-2, 2], dyadic exponents.

    Dyadic exponents keep lattice sums bitwise exact, so float dedup in the
    exponent lattice behaves identically to exact arithmetic.  ``exp_range``
    bounds the exponent magnitudes (and with them the conditioning of the
    modulated programs).
    """
    n = int(rng.integers(1, max_dim + 1))
    steps = int(round(2 * exp_range))
    while True:
        terms = int(rng.integers(2, max_terms + 1))
        exps = rng.integers(-steps, steps + 1, size=(terms, n)) * 0.5
        if len({tuple(r) for r in exps}) == terms:
            break
    coeffs = rng.uniform(-2.0, 2.0, size=terms)
    lo = rng.uniform(-2.0, 1.0, size=n)
    hi = lo + rng.uniform(0.25, 2.0, size=n)
    hi = np.minimum(hi, 2.0)
    return Signomial(exps, coeffs), Box(lo, hi)


@pytest.fixture(scope="session")
def make_random_instance():
    return random_box_instance


def write_problem(path, signomial, cset, options=None):
    from sigcert import set_to_json_dict

    payload = {
        "signomial": signomial.to_json_dict(),
        "set": set_to_json_dict(cset),
    }
    if options:
        payload["options"] = options
    path.write_text(json.dumps(payload, indent=2))
    return str(path)


@pytest.fixture()
def problem_writer():
    return write_problem
