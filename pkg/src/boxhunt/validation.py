"""Input validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

from .scene import Dataset, Scene


def as_dataset(X) -> Dataset:
    """Coerce estimator input into a Dataset: accepts a Dataset or any iterable
    of Scene objects."""
    if isinstance(X, Dataset):
        return X
    if isinstance(X, Scene):
        return Dataset((X,))
    try:
        scenes = tuple(X)
    except TypeError:
        raise TypeError(f"expected a Dataset or an iterable of Scene, got {type(X).__name__}")
    for item in scenes:
        if not isinstance(item, Scene):
            raise TypeError(f"expected Scene elements, got {type(item).__name__}")
    return Dataset(scenes)


def require_annotated(dataset: Dataset, class_name: str) -> Dataset:
    """Filter to ``class_name`` and reject datasets left empty by the filter."""
    from .scene import filter_by_class

    filtered = filter_by_class(dataset, class_name)
    if len(filtered) == 0:
        raise ValueError(f"no scene carries an annotation of class {class_name!r}")
    return filtered
