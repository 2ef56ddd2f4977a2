# [Purpose] Exception types raised by the hub-grid services
# [Comment] Every error carries enough context to be reported without a traceback

from typing import List, Optional


class HubGridError(Exception):
    """[Purpose] Root of all domain errors raised by this package"""


class ConfigError(HubGridError):
    """
    [Purpose] Configuration could not be validated
    [Fields]
    - messages: every problem found, not just the first one
    """

    def __init__(self, messages: List[str]):
        self.messages = list(messages)
        super().__init__("; ".join(self.messages) if self.messages else "invalid configuration")


class NetworkError(HubGridError):
    """[Purpose] Invalid topology: missing endpoint, island without slack, singular admittance"""


class PowerFlowError(HubGridError):
    """[Purpose] Newton power flow diverged or the injections are infeasible"""

    def __init__(self, message: str, iterations: int = 0, mismatch: float = float("nan")):
        self.iterations = iterations
        self.mismatch = mismatch
        super().__init__(f"{message} (iterations={iterations}, mismatch={mismatch:.3e} pu)")


class InitializationError(HubGridError):
    """[Purpose] No equilibrium could be assigned to the devices"""


class SimulationError(HubGridError):
    """[Purpose] Time integration failed; carries scenario context when known"""

    def __init__(
        self,
        message: str,
        time: Optional[float] = None,
        scenario: Optional[str] = None,
        mode: Optional[str] = None,
    ):
        self.time = time
        self.scenario = scenario
        self.mode = mode
        context = []
        if scenario:
            context.append(f"scenario={scenario}")
        if mode:
            context.append(f"mode={mode}")
        if time is not None:
            context.append(f"t={time:.6f} s")
        suffix = f" [{', '.join(context)}]" if context else ""
        super().__init__(f"{message}{suffix}")


class ChannelError(HubGridError):
    """[Purpose] A trace lacks a channel the computation needs"""


class MismatchError(HubGridError):
    """[Purpose] Two traces or runs are not comparable (different scenario or configuration)"""
