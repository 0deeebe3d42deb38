"""hopper-est - IMU-only vertical state estimation for hopping robots.

This package simulates a vertical two-mass hopper, synthesizes dual-range
accelerometer streams, estimates hop phase and vertical state with a bank of
Kalman filters driven by inferred measurement updates, trains the estimator
parameters with a genetic algorithm and scores the results.
"""
