"""Trial selection helpers.

Contains functions to narrow a dataset to trials by commanded height or name.
"""

import fnmatch
from collections.abc import Sequence

from ..services.dataset import HEIGHT_DECIMALS, Dataset


def apply_filters(
    ds: Dataset,
    heights: Sequence[float] | None = None,
    names: Sequence[str] | None = None,
) -> Dataset:
    """Keep trials whose commanded height or name matches.

    If no filters are provided, returns the dataset unchanged.

    Args:
        ds: Dataset to filter
        heights: Commanded heights in meters (matched after rounding)
        names: Trial names or shell-style patterns (e.g. ``"h3_*"``)

    Returns:
        Filtered dataset

    Raises:
        ValueError: If filters result in zero matching trials
    """
    if not heights and not names:
        return ds

    trials = list(ds.trials)
    original_count = len(trials)

    if heights:
        wanted = {round(float(h), HEIGHT_DECIMALS) for h in heights}
        trials = [
            log for log in trials
            if round(log.commanded_height(), HEIGHT_DECIMALS) in wanted
        ]

    if names:
        trials = [
            log for log in trials
            if any(fnmatch.fnmatchcase(log.name, pattern) for pattern in names)
        ]

    if not trials:
        raise ValueError(
            f"No trials matched the provided filters. "
            f"Original dataset had {original_count} trials."
        )

    return Dataset(tuple(trials), subset_spec=ds.subset_spec)


__all__: list[str] = ["apply_filters"]
