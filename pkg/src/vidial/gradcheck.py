"""Finite-difference verification of the training gradients.

The reverse-mode gradients of the sequence loss are compared against
central differences computed in float64. Parameters are bucketed into
groups (embedding tables, visual projection, encoder stack, decoder stack,
output head) and a fixed number of randomly chosen coordinates is probed
per group, spread over the group's tensors. Coordinates where both sides
are essentially zero (< 1e-8) count as error 0, so unused table rows do
not fabricate relative errors.
"""

import copy

import numpy as np
import torch

from .assembly import ContextAssembly
from .model import DialogModel

ZERO_CUTOFF = 1e-8

GROUP_PREFIXES = (
    ("encoder.", "encoder"),
    ("decoder.", "decoder"),
    ("visual_proj", "visual_proj"),
    ("out_proj", "output"),
)


def parameter_group(name: str) -> str:
    for prefix, group in GROUP_PREFIXES:
        if name.startswith(prefix):
            return group
    return "embeddings"


def _to_double(model: DialogModel) -> DialogModel:
    m64 = copy.deepcopy(model).double()
    m64.eval()
    return m64


def analytic_gradients(model, assembly: ContextAssembly, target_ids):
    """Reverse-mode gradients of sequence_nll w.r.t. every named parameter."""
    model.zero_grad(set_to_none=True)
    loss = model.sequence_nll(assembly, target_ids)
    loss.backward()
    grads = {}
    for name, p in model.named_parameters():
        grads[name] = torch.zeros_like(p) if p.grad is None else p.grad.detach().clone()
    model.zero_grad(set_to_none=True)
    return grads


def relative_error(a: float, n: float) -> float:
    scale = max(abs(a), abs(n))
    if scale < ZERO_CUTOFF:
        return 0.0
    return abs(a - n) / scale


def grad_check(
    model: DialogModel,
    assembly: ContextAssembly,
    target_ids,
    epsilon: float = 1e-4,
    coords_per_group: int = 200,
    seed: int = 0,
    analytic: dict | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs on a float64 copy of the model; the original is untouched.
    ``analytic`` overrides the computed gradients (used to prove the check
    actually fails when a gradient is wrong).
    """
    m64 = _to_double(model)
    computed = analytic_gradients(m64, assembly, target_ids)
    if analytic is not None:
        computed = {k: v.double() for k, v in analytic.items()}

    groups: dict[str, list[tuple[str, torch.Tensor]]] = {}
    for name, param in m64.named_parameters():
        groups.setdefault(parameter_group(name), []).append((name, param))

    rng = np.random.default_rng(seed)
    worst = 0.0
    with torch.no_grad():
        for members in groups.values():
            sizes = np.array([p.numel() for _, p in members])
            total = int(sizes.sum())
            picks = (
                np.arange(total)
                if total <= coords_per_group
                else rng.choice(total, size=coords_per_group, replace=False)
            )
            offsets = np.concatenate([[0], np.cumsum(sizes)])
            for flat_idx in picks:
                member = int(np.searchsorted(offsets, flat_idx, side="right")) - 1
                name, param = members[member]
                c = int(flat_idx - offsets[member])
                flat = param.view(-1)
                grad = computed[name].view(-1)
                orig = flat[c].item()
                flat[c] = orig + epsilon
                hi = m64.sequence_nll(assembly, target_ids).item()
                flat[c] = orig - epsilon
                lo = m64.sequence_nll(assembly, target_ids).item()
                flat[c] = orig
                numeric = (hi - lo) / (2.0 * epsilon)
                worst = max(worst, relative_error(grad[c].item(), numeric))
    return worst
