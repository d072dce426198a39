import sys
from pathlib import Path

# Allow running these tests from a source checkout without installing
# the server package.
_SRC = Path(__file__).resolve().parents[1] / "src"
if str(_SRC) not in sys.path:
    sys.path.insert(0, str(_SRC))
