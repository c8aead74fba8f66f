"""Fixture specifications: which networks get trained, and to what accuracy."""

from __future__ import annotations

from dataclasses import dataclass

ACTIVATIONS = ("relu", "tanh", "sigmoid", "arctan")


@dataclass(frozen=True)
class FixtureSpec:
    """One trained fixture: an m-layer MLP with m-1 equal-width hidden layers.

    `layers` counts affine layers, so layers=3, width=64 is the 3x[64]
    configuration (input -> 64 -> 64 -> 10).  Training is full-batch and
    deterministic for a given seed; `accuracy_floor` is the test accuracy the
    run must reach or the build fails loudly.
    """

    name: str
    layers: int
    width: int
    activation: str
    seed: int
    lr: float = 3e-3
    epochs: int = 500
    accuracy_floor: float = 0.90

    def __post_init__(self):
        if self.layers < 2:
            raise ValueError("a fixture needs at least one hidden layer")
        if self.width < 1:
            raise ValueError("hidden width must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 < self.accuracy_floor <= 1.0:
            raise ValueError("accuracy_floor must lie in (0, 1]")
        if self.epochs < 1 or self.lr <= 0:
            raise ValueError("epochs and lr must be positive")

    @property
    def arch(self) -> str:
        return f"{self.layers}x[{self.width}]"

    @property
    def hidden(self) -> tuple[int, ...]:
        return (self.width,) * (self.layers - 1)

    # Export paths, relative to the chosen output directory.
    @property
    def net_file(self) -> str:
        return f"{self.name}.net.json"

    @property
    def eval_file(self) -> str:
        return f"{self.name}.eval.json"

    @property
    def certify_file(self) -> str:
        return f"{self.name}.certify.json"

    @property
    def golden_file(self) -> str:
        return f"golden/{self.name}.certify-l2.json"


def _defaults() -> tuple[FixtureSpec, ...]:
    small = [
        FixtureSpec(f"{act}_2x20", layers=2, width=20, activation=act,
                    seed=11, epochs=600, accuracy_floor=0.85)
        for act in ACTIVATIONS
    ]
    big = [
        FixtureSpec(f"{act}_3x64", layers=3, width=64, activation=act,
                    seed=7, epochs=500, accuracy_floor=0.90)
        for act in ACTIVATIONS
    ]
    return tuple(small + big)


DEFAULT_SPECS = _defaults()
