from .orbits import (
    OrbitTable,
    enumerate_dynamic_orbits,
    enumerate_static_orbits,
    read_orbit_table,
    write_orbit_table,
)
from .counting import (
    KERNEL,
    brute_force_count,
    brute_force_static_count,
    count_dynamic_orbits,
    count_static_orbits,
    read_gdvm,
    write_gdvm,
)

__all__ = [
    "OrbitTable",
    "enumerate_dynamic_orbits",
    "enumerate_static_orbits",
    "read_orbit_table",
    "write_orbit_table",
    "KERNEL",
    "count_dynamic_orbits",
    "brute_force_count",
    "count_static_orbits",
    "brute_force_static_count",
    "read_gdvm",
    "write_gdvm",
]
