import sys
from pathlib import Path

# flat top-level packages (core, propagators, ...) import from the repository root
sys.path.insert(0, str(Path(__file__).parent))
