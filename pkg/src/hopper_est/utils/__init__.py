"""hopper-est utilities package.

This module contains helpers shared by services and commands:
- results: Standardized result/error payload builders.
- files: Output-directory guard and atomic file writes.
- filters: Trial selection by commanded height or name.
"""
