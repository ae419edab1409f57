"""Queueing toolkit for speculative (timeout-and-reroute) load balancing.

Exact load and response formulas, a deterministic discrete-event simulator
for five dispatch schemes, and fluid-limit drain checks. Everything lives in
the compiled core; this package just re-exports it.
"""

try:
    # installed layout: the extension sits inside this package
    from ._specq import *  # noqa: F401,F403
    from ._specq import __doc__  # noqa: F401
except ImportError:
    # in-tree build: the extension sits next to the package on sys.path
    from _specq import *  # noqa: F401,F403
    from _specq import __doc__  # noqa: F401

__version__ = "0.1.0"
