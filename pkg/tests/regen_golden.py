"""Rewrite tests/golden/*.sh from the fixture pods.

Run by hand after an intended change to script rendering, then review the diff:

    python3 tests/regen_golden.py
"""

from helpers import GOLDEN, POD_FIXTURES, exported_script, golden_path

if __name__ == "__main__":
    GOLDEN.mkdir(exist_ok=True)
    for path in POD_FIXTURES:
        golden_path(path).write_bytes(exported_script(path).encode())
        print(golden_path(path))
