"""geodispose: learned pose/depth proposals verified by point-to-plane ICP.

Learned proposals are ingested from interchange files, refined by RGB-D ICP,
explicitly accepted or rejected, and evaluated with stride-swept relative
pose error.
"""

from .core_geometry import (RigidMotion, Twist, UnitQuaternion, apply,
                            compose, invert, rotation_angle_deg, se3_exp,
                            se3_log)
from .depth_geometry import (CameraIntrinsics, DepthMap, PointCloud,
                             align_depth_to_intrinsics, backproject,
                             estimate_normals, subsample)
from .icp_disposal import (Disposition, IcpConfig, IcpResult, Objective,
                           RejectReason, Verdict, dispose, run_icp)
from .pipeline import (FallbackPolicy, FramePair, PairOutcome,
                       TrajectoryEstimate, evaluate_pairs, run_pair,
                       run_sequence)
from .proposals import (DepthSource, PerturbationConfig, PoseProposal,
                        ProposalManifest, ProposalSource, get_depth,
                        get_proposal, load_manifest, read_gddf, write_gddf,
                        write_manifest)
from .evaluation import (InclusionPolicy, RpeSample, RpeSummary, emit_table,
                         percentile_95, rpe, summarize)

__version__ = "0.1.0"
