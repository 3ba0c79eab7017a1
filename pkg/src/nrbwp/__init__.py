"""5G NR bandwidth-part modeling: numerologies, carriers, BWPs, UEs, a gNB
scheduler and a deterministic discrete-event simulator."""
from .bwp import BwpConfig, BwpSet, BwpStateMachine, Direction, RetuneProfile, Spectrum
from .carrier import CarrierConfig, SsBlockInfo
from .numerology import FrequencyRange, Numerology
from .scenario import Scenario, UeSpec, dump_scenario, parse_scenario, parse_scenario_text
from .sim import Report, run
from .trace import verify_trace
from .ue import UeProfile

__all__ = ["BwpConfig", "BwpSet", "BwpStateMachine", "CarrierConfig", "Direction", "FrequencyRange",
           "Numerology", "Report", "RetuneProfile", "Scenario", "Spectrum", "SsBlockInfo", "UeProfile",
           "UeSpec", "dump_scenario", "parse_scenario", "parse_scenario_text", "run", "verify_trace"]
