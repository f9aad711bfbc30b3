"""Co-optimization of robot design parameters, motor selection, and
contact-implicit trajectories.

Thin convenience layer over the compiled core: JSON documents in, parsed
dictionaries out.
"""

import json
from pathlib import Path

try:
    from ._core import (InfeasibleTorque, SchemaError, problem_info,
                        result_csv, select_motor)
    from ._core import optimize as _optimize_json
    from ._core import validate as _validate
except ImportError:  # in-tree builds put the extension directly on sys.path
    from _core import (InfeasibleTorque, SchemaError, problem_info,
                       result_csv, select_motor)
    from _core import optimize as _optimize_json
    from _core import validate as _validate

__all__ = [
    "InfeasibleTorque",
    "SchemaError",
    "optimize",
    "optimize_files",
    "problem_info",
    "result_csv",
    "select_motor",
    "validate",
]


def optimize(robot_json, task_json, motors_json="", **kwargs):
    """Runs the pipeline on JSON spec strings; returns the result as a dict."""
    return json.loads(_optimize_json(robot_json, task_json, motors_json,
                                     **kwargs))


def optimize_files(robot_path, task_path, motors_path=None, **kwargs):
    """Same as optimize(), reading the specs from files."""
    motors = Path(motors_path).read_text() if motors_path else ""
    return optimize(Path(robot_path).read_text(),
                    Path(task_path).read_text(), motors, **kwargs)


def validate(result, robot_json, task_json, motors_json="", tol=1e-6):
    """Audits a result (dict or JSON string) against the constraints."""
    if not isinstance(result, str):
        result = json.dumps(result)
    return _validate(result, robot_json, task_json, motors_json, tol)
