"""rmode_sim: MF DGNSS R-Mode signal simulator.

Synthesises the beacon composite (MSK data plus two CW ranging tones), passes
it through a single-hop skywave channel with optional AWGN, and measures the
result against closed-form predictions.
"""

__version__ = "0.1.0"

from rmode_sim.core import SignalBuffer, add_signals, check_aligned, scale_signal  # noqa: E402
from rmode_sim.errors import RModeError  # noqa: E402

__all__ = [
    "__version__",
    "SignalBuffer",
    "add_signals",
    "check_aligned",
    "scale_signal",
    "RModeError",
]
