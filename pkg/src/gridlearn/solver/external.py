"""File-exchange backend: write MPS, run a configured command, parse output.

The command template receives ``{input}`` and ``{output}`` placeholders.
Exit-code contract: 0 means the output file is present and carries the
status; any other exit code is a backend failure (stderr is attached to the
raised error).  A ready-to-use command is

    python -m gridlearn.solver.reference_backend {input} {output}

which solves LPs/MILPs with an independent optimizer.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from pathlib import Path

from .errors import BackendFailure
from .mps import export_mps, parse_solution
from .types import Solution, SolverOptions

__all__ = ["solve_external", "DEFAULT_EXTERNAL_CMD"]

DEFAULT_EXTERNAL_CMD = ("python3 -m gridlearn.solver.reference_backend "
                        "{input} {output}")


def solve_external(prob, opts: SolverOptions) -> Solution:
    cmd_template = opts.external_cmd or DEFAULT_EXTERNAL_CMD
    with tempfile.TemporaryDirectory(prefix="gridlearn_") as tmp:
        inp = Path(tmp) / "problem.mps"
        out = Path(tmp) / "solution.txt"
        inp.write_text(export_mps(prob), encoding="utf-8")
        argv = [a.format(input=str(inp), output=str(out))
                for a in shlex.split(cmd_template)]
        try:
            run = subprocess.run(argv, capture_output=True, text=True,
                                 timeout=opts.time_limit)
        except OSError as e:
            raise BackendFailure(f"cannot launch external solver: {e}") from e
        except subprocess.TimeoutExpired as e:
            raise BackendFailure(f"external solver timed out: {e}") from e
        if run.returncode != 0:
            raise BackendFailure(
                f"external solver exited {run.returncode}: {run.stderr[-2000:]}")
        if not out.exists():
            raise BackendFailure("external solver produced no output file")
        return parse_solution(out.read_text(encoding="utf-8"), prob)
