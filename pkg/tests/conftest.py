from functools import lru_cache

import pytest

from lockfem import alfeld_split, build_dof_map, build_uniform_mesh
from lockfem.assembly import assemble_saddle_system


@lru_cache(maxsize=None)
def alfeld_mesh(n):
    return alfeld_split(build_uniform_mesh(n))


@lru_cache(maxsize=None)
def dofmap(pair, n):
    return build_dof_map(alfeld_mesh(n), pair)


@lru_cache(maxsize=None)
def saddle(pair, n):
    return assemble_saddle_system(dofmap(pair, n))


@pytest.fixture(params=["TH", "SV", "MINI", "CR"])
def pair_name(request):
    return request.param
