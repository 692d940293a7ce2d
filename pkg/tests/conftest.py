import numpy as np
import pytest

from edgehard import GenConfig, generate


def small_cfg(seed, **kw):
    """3x3, three levels: fast gap-0 solves with hardening genuinely in play."""
    base = dict(seed=seed, num_areas=3, num_nodes=3, num_levels=3,
                demand_range=(3, 6), capacity_pool=(5, 7, 9),
                budget=3.0, uncertainty_budget_diu=2.0, uncertainty_budget_ddu=2.0,
                base_harden_cost_range=(0.3, 0.7), harden_cost_step=0.2,
                delay_penalty=0.3, delay_min_range=(2.0, 6.0),
                delay_dev_range=(2.0, 8.0), delay_cap=20.0,
                unmet_fraction_cap=0.3)
    base.update(kw)
    return GenConfig(**base)


def tiny_cfg(seed, **kw):
    """2x2, two levels, demand <= 6: inside the brute-force guard."""
    base = dict(seed=seed, num_areas=2, num_nodes=2, num_levels=2,
                demand_range=(2, 6), capacity_pool=(4, 6),
                budget=2.0, uncertainty_budget_diu=1.5, uncertainty_budget_ddu=1.5,
                base_harden_cost_range=(0.3, 0.7), harden_cost_step=0.2,
                impact_level1=0.2, impact_step=0.5,
                delay_penalty=0.3, delay_min_range=(2.0, 6.0),
                delay_dev_range=(2.0, 8.0), delay_cap=20.0,
                unmet_fraction_cap=0.4)
    base.update(kw)
    return GenConfig(**base)


def one_link_instance(**kw):
    """Single area, single node instance with every parameter explicit."""
    from edgehard.instance import Instance
    base = dict(num_areas=1, num_nodes=1, num_levels=1,
                demand=[2], capacity=[4], unmet_penalty=[40.0],
                delay_penalty=0.1, unmet_fraction_cap=[0.5], delay_cap=[15.0],
                budget=10.0, harden_cost=[[[1.0]]], harden_impact=[[[0.5]]],
                workload_impact=[[0.0]], delay_min=[[1.0]], delay_dev=[[0.0]],
                uncertainty_budget_diu=1.0, uncertainty_budget_ddu=1.0)
    base.update(kw)
    return Instance(**base)


@pytest.fixture
def small_instance():
    return generate(small_cfg(0))


@pytest.fixture
def tiny_instance():
    return generate(tiny_cfg(0))
