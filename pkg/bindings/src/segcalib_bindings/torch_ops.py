"""Torch autograd wrapper for the mL1-ACE loss.

The loss and its analytic gradient are computed outside the torch graph;
this module only splices them in via a custom ``autograd.Function``. The
gradient is with respect to the probability map — apply softmax in the
graph before calling, so torch owns the logits chain.
"""

from __future__ import annotations

import torch

from . import py_ace_loss


class AceLossFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, probs: torch.Tensor, labels: torch.Tensor,
                bins: int) -> torch.Tensor:
        value, grad = py_ace_loss(
            probs.detach().cpu().numpy(),
            labels.detach().cpu().numpy(),
            bins,
        )
        ctx.save_for_backward(
            torch.as_tensor(grad, dtype=probs.dtype, device=probs.device)
        )
        return probs.new_tensor(value)

    @staticmethod
    def backward(ctx, grad_output):
        (grad,) = ctx.saved_tensors
        return grad_output * grad, None, None


def ace_loss(probs: torch.Tensor, labels: torch.Tensor,
             bins: int = 20) -> torch.Tensor:
    """Differentiable mL1-ACE of a (C, *spatial) probability tensor."""
    return AceLossFunction.apply(probs, labels, bins)
