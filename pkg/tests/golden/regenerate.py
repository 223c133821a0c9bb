"""Rewrite the golden MPS files. Run only after an intended format change:

    python3 tests/golden/regenerate.py
"""

import os
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.dirname(HERE))

from eanm.formulations import build_model  # noqa: E402
from eanm.milp import export_lp_file  # noqa: E402
from golden_cases import CASES  # noqa: E402

if __name__ == "__main__":
    for name, (make_instance, variant) in CASES.items():
        model, _ = build_model(make_instance(), variant)
        size = export_lp_file(model, os.path.join(HERE, f"{name}.mps"))
        print(f"{name}.mps: {size} bytes")
