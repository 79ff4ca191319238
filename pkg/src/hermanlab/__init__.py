"""hermanlab: Herman curves in unicritical and antipode-preserving rational families."""
import warnings

__version__ = "0.1.0"
SCHEMA_VERSION = 1

# numba probes an outdated TBB on some systems and falls back on its own
warnings.filterwarnings("ignore", message="The TBB threading layer")
