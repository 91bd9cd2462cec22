"""Benchmark harness and CLI."""
from .experiments import BenchRecord, ExperimentSpec, StateSpec, default_spec, run_experiment

__all__ = ["BenchRecord", "ExperimentSpec", "StateSpec", "default_spec", "run_experiment"]
