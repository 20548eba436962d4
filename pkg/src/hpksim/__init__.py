"""Desk-scale simulator of Kubernetes workloads running on a Slurm cluster
through a single virtual kubelet."""

from .engine import Engine, EngineConfig
from .model import parse_manifest
from .translator import build_script

__all__ = ["Engine", "EngineConfig", "build_script", "parse_manifest"]
__version__ = "0.1.0"
