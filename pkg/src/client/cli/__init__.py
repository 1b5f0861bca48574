"""
NocPerf CLI
"""
from .nocperf import app, main

__all__ = ["app", "main"]
