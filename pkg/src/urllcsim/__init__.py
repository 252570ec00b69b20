"""System-level URLLC capacity of factory-hall 5G deployments."""
__version__ = "0.1.0"

from .config import RunConfig, load_config  # noqa: E402
from .engine import CapacityResult, Simulator, capacity_search  # noqa: E402
from .linkmodel import LinkAbstraction, McsEntry  # noqa: E402
from .reliability import dl_reliability, harq_oracle, ul_reliability  # noqa: E402

__all__ = ["RunConfig", "load_config", "Simulator", "CapacityResult", "capacity_search",
           "LinkAbstraction", "McsEntry", "dl_reliability", "ul_reliability", "harq_oracle",
           "__version__"]
