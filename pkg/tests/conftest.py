import functools

import pytest

from servicediff import (canonical_quality, derive_virtual_functions, inverse_congestion_quality,
                         make_power_distribution, payg_transform, solve_fixed)


@functools.lru_cache(maxsize=None)
def virtuals(alpha=1.0, quality="canonical"):
    model = {"canonical": canonical_quality, "inverse": inverse_congestion_quality,
             "payg": lambda: payg_transform(canonical_quality())}[quality]()
    return derive_virtual_functions(make_power_distribution(alpha), model)


@functools.lru_cache(maxsize=None)
def fixed(capacity, alpha=1.0, quality="canonical"):
    return solve_fixed(virtuals(alpha, quality), capacity)


@pytest.fixture(scope="session")
def uniform():
    return virtuals()


@pytest.fixture(scope="session")
def solved():
    """Cached fixed-capacity solves keyed by capacity (uniform, canonical)."""
    return fixed
