"""Line-of-action extraction, muscle dynamics, motion tracking, and
marker retargeting for planar limb models."""

import json as _json

from ._core import (
    DemoFixtures,
    InputError,
    LimbModel,
    LimbState,
    MocapClip,
    MuscleParams,
    RetargetResult,
    SolverError,
    TrackingProblem,
    Trajectory,
    demo_clip,
    demo_limb,
    demo_problem,
    extract_loa_json,
    flv,
    load_clip,
    load_model,
    load_problem,
    marker_positions,
    mass_matrix,
    rest_state,
    retarget,
    save_model,
    solve_tracking,
    step,
    step_activation,
    tau_smoothed,
    tau_switched,
    total_energy,
    tracking_error,
    write_demo_fixtures,
)

__version__ = "0.1.0"


def extract_loa(muscle_mesh, bones, **kwargs):
    """Run line-of-action extraction and return the tendon record as a dict.

    ``bones`` is a list of ``(name, mesh_path)`` pairs. Keyword arguments are
    forwarded to :func:`extract_loa_json`.
    """
    return _json.loads(extract_loa_json(muscle_mesh, bones, **kwargs))
