"""Hot loops with a compiled core and a pure-Python fallback.

The compiled module is used when it imports; set ``DUALCONN_PURE_PYTHON=1``
to force the fallback.
"""

import os

from . import _sch_py

if os.environ.get("DUALCONN_PURE_PYTHON"):
    _compiled = None
else:
    try:
        from . import _sch as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
run_window = _compiled.run_window if _compiled is not None else _sch_py.run_window
run_window_py = _sch_py.run_window
run_window_compiled = _compiled.run_window if _compiled is not None else None
