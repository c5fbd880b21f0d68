"""Bandit core: arm models, cold start, exploitation and the two-stage runner."""

from rcbandit.bandit.rcb import Environment, InflationClock, OracleMode, RcbParams, RcbRunner, RunResult

__all__ = ["Environment", "InflationClock", "OracleMode", "RcbParams", "RcbRunner", "RunResult"]
