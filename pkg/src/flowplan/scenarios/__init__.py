"""Bundled example scenarios."""

from importlib import resources


def load(name: str) -> str:
    """Text of a bundled scenario, e.g. ``load("corridor")``."""
    return (
        resources.files(__package__).joinpath(f"{name}.txt").read_text("utf-8")
    )


def names() -> list[str]:
    return sorted(
        p.name[:-4]
        for p in resources.files(__package__).iterdir()
        if p.name.endswith(".txt")
    )
