from .cluster import (
    ClusterConfig,
    ClusterOutcome,
    Coordinator,
    DistributionMode,
    WorkerReport,
    coordinate,
    run_local_cluster,
    work,
)
from .protocol import PROTOCOL_VERSION, Kind

__all__ = [
    "PROTOCOL_VERSION",
    "ClusterConfig",
    "ClusterOutcome",
    "Coordinator",
    "DistributionMode",
    "Kind",
    "WorkerReport",
    "coordinate",
    "run_local_cluster",
    "work",
]
