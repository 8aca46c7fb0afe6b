"""
wtapool - equilibria of winners-take-all pools.

Entry point for running the command-line interface without installing the
package (``python main.py symmetric-eq --n 3 --c 1.5``).
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent / "src"))

from wtapool.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
