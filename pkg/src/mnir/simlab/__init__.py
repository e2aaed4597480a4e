"""Simulation lab: generators and Monte Carlo verification runs."""
from .config import (COLLAPSED, RANDOM_EFFECTS, SimConfig, load_config,
                     parse_config)
from .generate import (Draw, draw_corpus, forward_response, simulate_collapsed,
                       simulate_random_effects)
from .report import McReport
from .verify import (efficiency_compare, efficient_covariance, verify_prop1,
                     verify_prop2)

__all__ = [
    "COLLAPSED",
    "RANDOM_EFFECTS",
    "SimConfig",
    "load_config",
    "parse_config",
    "Draw",
    "draw_corpus",
    "forward_response",
    "simulate_collapsed",
    "simulate_random_effects",
    "McReport",
    "verify_prop1",
    "verify_prop2",
    "efficiency_compare",
    "efficient_covariance",
]
