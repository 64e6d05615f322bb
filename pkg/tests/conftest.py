import numpy as np
import pytest

from segcalib import BinConfig


@pytest.fixture
def hand_fixture():
    """The 4-voxel single-channel fixture with M=2: ACE = ECE = MCE = 0.2."""
    probs = np.array([[0.2, 0.4, 0.7, 0.9]])
    labels = np.array([0, 1, 1, 1])
    return probs, labels, BinConfig(2)


def random_case(rng, num_voxels, num_classes, simplex=True):
    """Random probability map (simplex-normalized when C >= 2) plus labels."""
    if simplex and num_classes >= 2:
        logits = rng.standard_normal((num_classes, num_voxels)) * 2
        exp = np.exp(logits - logits.max(axis=0))
        probs = exp / exp.sum(axis=0)
    else:
        probs = rng.uniform(0, 1, size=(num_classes, num_voxels))
    labels = rng.integers(0, max(num_classes, 2), size=num_voxels)
    return probs, labels
