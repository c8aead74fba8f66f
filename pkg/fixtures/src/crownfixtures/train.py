"""Full-batch training of small float64 MLPs."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .data import load_split
from .specs import FixtureSpec

_ACT_MODULES = {"relu": nn.ReLU, "tanh": nn.Tanh, "sigmoid": nn.Sigmoid}


class Atan(nn.Module):
    def forward(self, x):
        return torch.atan(x)


def build_model(spec: FixtureSpec, n_in: int, n_out: int) -> nn.Sequential:
    act = _ACT_MODULES.get(spec.activation, Atan)
    dims = [n_in, *spec.hidden, n_out]
    mods = []
    for i, (a, b) in enumerate(zip(dims, dims[1:])):
        mods.append(nn.Linear(a, b, dtype=torch.float64))
        if i < len(dims) - 2:
            mods.append(act())
    return nn.Sequential(*mods)


@torch.no_grad()
def torch_logits(model: nn.Module, x) -> np.ndarray:
    """Float64 logits for a (batch, n_in) array."""
    model.eval()
    z = torch.as_tensor(np.asarray(x, dtype=np.float64))
    return model(z).numpy()


def accuracy(model: nn.Module, x, y) -> float:
    pred = torch_logits(model, x).argmax(axis=1)
    return float((pred == np.asarray(y)).mean())


def train_model(spec: FixtureSpec, data=None) -> tuple[nn.Sequential, float]:
    """Train one fixture; returns (model, test_accuracy).

    Deterministic for a given spec: seeded init, full-batch Adam steps, single
    compute thread.  Raises RuntimeError if the test accuracy misses the
    spec's floor after the epoch budget.
    """
    if data is None:
        data = load_split()
    x_train, y_train, x_test, y_test = data
    xt = torch.as_tensor(x_train, dtype=torch.float64)
    yt = torch.as_tensor(y_train, dtype=torch.long)
    saved_threads = torch.get_num_threads()
    torch.manual_seed(spec.seed)
    torch.set_num_threads(1)  # reduction order changes with threads; pin it
    try:
        model = build_model(spec, x_train.shape[1], int(y_train.max()) + 1)
        opt = torch.optim.Adam(model.parameters(), lr=spec.lr)
        loss_fn = nn.CrossEntropyLoss()
        model.train()
        for _ in range(spec.epochs):
            opt.zero_grad()
            loss = loss_fn(model(xt), yt)
            loss.backward()
            opt.step()
        acc = accuracy(model, x_test, y_test)
    finally:
        torch.set_num_threads(saved_threads)
    if acc < spec.accuracy_floor:
        raise RuntimeError(
            f"fixture {spec.name}: test accuracy {acc:.4f} is below the floor "
            f"{spec.accuracy_floor:.2f} after {spec.epochs} epochs")
    return model, acc
