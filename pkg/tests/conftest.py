import numpy as np
import pytest

from nccalign import (
    ShiftRange,
    SyntheticSpec,
    make_synthetic_stereo,
    partition_template,
    quadrant_pattern,
)

QUADRANT_SHIFTS = [(3, 5), (-4, 2), (6, -7), (-2, -6)]


@pytest.fixture(scope="session")
def quadrant_pair():
    """512x512 quadrant pair with shifts <= +/-8 and 1% texture noise.

    The quadrant shifts point inward per quadrant, so no generated pixel is
    edge-clamped and every 64px block lies inside a single region.
    """
    spec = SyntheticSpec(
        width=512,
        height=512,
        regions=quadrant_pattern(512, 512, QUADRANT_SHIFTS),
        texture_seed=7,
        noise_floor=0.01,
    )
    template, reference, truth = make_synthetic_stereo(spec)
    grid = partition_template(template, 64, 0.0)
    return {
        "template": template,
        "reference": reference,
        "truth": truth,
        "grid": grid,
        "shifts": ShiftRange.symmetric(8),
    }


def random_image(seed: int, height: int, width: int) -> np.ndarray:
    """Seeded uniform texture; healthy variance for NCC property tests."""
    return np.random.default_rng(seed).random((height, width))
