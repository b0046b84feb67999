"""Engine backend selection.

The scheduler kernel exists twice: interpreted (`adl._engine`) and as a C
extension compiled from the same source file (`adl._engine_c`).  The
compiled one wins when importable; set ADL_PURE_ENGINE=1 to force the
interpreted kernel.  Both produce bit-identical traces; the benchmark
suite checks that.
"""

import os

if os.environ.get("ADL_PURE_ENGINE"):
    from adl import _engine as _backend
else:
    try:
        from adl import _engine_c as _backend  # type: ignore[no-redef]
    except ImportError:
        from adl import _engine as _backend

BACKEND = "compiled" if _backend.__name__.endswith("_engine_c") else "pure"

Engine = _backend.Engine
AdlFault = _backend.AdlFault
first_action = _backend.first_action

PROGRESSED = _backend.PROGRESSED
QUIESCENT = _backend.QUIESCENT
TERMINATED = _backend.TERMINATED
TIMED_OUT = _backend.TIMED_OUT
