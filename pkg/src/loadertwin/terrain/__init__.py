"""Particle soil bed and dig-cycle simulation."""
from .contact import (POST_CALIBRATION, PRE_CALIBRATION, ContactForce, TerrainParams,
                      hertz_mindlin_contact, restitution_damping)
from .dem import (DEFAULT_BUCKET, BucketProfile, SimState, compute_forces, fill_bed, make_state,
                  stable_dt, step)
from .dig import BucketPose, DigScenario, dig_trajectory, pose_trace, run_dig_cycle

__all__ = [
    "BucketPose", "BucketProfile", "ContactForce", "DEFAULT_BUCKET", "DigScenario",
    "POST_CALIBRATION", "PRE_CALIBRATION", "SimState", "TerrainParams", "compute_forces",
    "dig_trajectory", "fill_bed", "hertz_mindlin_contact", "make_state", "pose_trace",
    "restitution_damping", "run_dig_cycle", "stable_dt", "step",
]
