"""Single-item auctions with bidders who reveal information strategically."""
from .mechanisms import MYERSON, VICKREY, Outcome
from .meta import (ReticentMechanism, auctioneer_posterior, by_name, expected_vickrey, regulate,
                   simulated_myerson)
from .model import (InconsistentSignals, JointPrior, Scenario, SignalingScheme, StateSpace,
                    TypePrior, ValueKernel, make_scheme)
from .scenario_io import bundled, load_scenario

__all__ = [
    "MYERSON", "VICKREY", "Outcome", "ReticentMechanism", "auctioneer_posterior", "by_name",
    "expected_vickrey", "regulate", "simulated_myerson", "InconsistentSignals", "JointPrior",
    "Scenario", "SignalingScheme", "StateSpace", "TypePrior", "ValueKernel", "make_scheme",
    "bundled", "load_scenario",
]
