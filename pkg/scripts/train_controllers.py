#!/usr/bin/env python3
"""Regenerate the goal controllers referenced by a scenario file.

Equivalent to `reachsynth train <scenario>`; kept as a script so the
experiment workflow is reproducible without the console entry point.

Note: verification margins in a shipped scenario are measured against the
committed weight files; retraining produces an equally valid controller set
whose reach tubes may sit differently relative to the obstacle faces.
"""
import sys

from reachsynth.cli import main

if __name__ == "__main__":
    scenario = sys.argv[1] if len(sys.argv) > 1 else "scenarios/goal_sequencing.toml"
    sys.exit(main(["train", scenario]))
