from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from af2.bounds import Bounds
from af2.logic import parse_theory
from af2.terms import Abs, App, Free, Term, lam


@pytest.fixture(scope="session")
def bounds() -> Bounds:
    return Bounds()


@pytest.fixture(scope="session")
def pred_theory():
    return parse_theory("fun 0/0.\nfun s/1.\nfun p/1.\neq p(0) = 0.\neq p(s x) = x.\n")


@pytest.fixture(scope="session")
def empty_theory():
    return parse_theory("fun 0/0.\n")


@pytest.fixture(scope="session")
def nat_theory():
    return parse_theory("fun 0/0.\nfun s/1.\n")


VAR_NAMES = ["a", "b", "c", "u", "v"]


def random_term(rng: random.Random, size: int, scope: list[str] | None = None) -> Term:
    """Random term of roughly the requested size with free and bound vars."""
    scope = scope if scope is not None else []
    if size <= 1:
        pool = scope + VAR_NAMES
        return Free(rng.choice(pool))
    shape = rng.random()
    if shape < 0.4:
        name = f"x{rng.randrange(4)}"
        body = random_term(rng, size - 1, scope + [name])
        return lam(name, body)
    left = rng.randrange(1, size - 1) if size > 2 else 1
    return App(random_term(rng, left, scope), random_term(rng, size - 1 - left, scope))
