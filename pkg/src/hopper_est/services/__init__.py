"""hopper-est services: dynamics, sensing, estimation, training and metrics."""
