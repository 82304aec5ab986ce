"""Network architectures for learning the block rules.

The core stack is a 2x2 stride-2 convolution (one feature per block, 16
channels: enough to one-hot the 16 block states), a 2x2 stride-2 transposed
convolution back to cell resolution, and a 1x1 segmentation head with a
sigmoid.  The offset-partition variants wrap this core either in torus
shifts or in a zero-pad / crop pair, mirroring the two edge schemes of the
exact automaton.
"""

from __future__ import annotations

import numpy as np

from ..ca import EdgeMode, Phase
from ..nn.layers import (
    BypassLayer,
    ConvLayer,
    Crop1Layer,
    DeconvLayer,
    Network,
    Pad1Layer,
    ReLULayer,
    SigmoidLayer,
    UnwrapShiftLayer,
    WrapShiftLayer,
)

HIDDEN_CHANNELS = 16
DECODE_CHANNELS = 8


def build_model(phase: Phase, edge: EdgeMode, bypass_endpoints: bool = False,
                seed: int = 0, rng: np.random.Generator | None = None) -> Network:
    """Build the rule-learning network for one partition and edge scheme.

    With ``bypass_endpoints`` the activations after the first and last
    hidden layers become identity maps.  A purely affine stack cannot
    represent the block rule (its output bits are not linearly separable in
    the block bits), so this variant keeps one ReLU by routing the block
    features through an extra 1x1 stage between the bypassed endpoints.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    encode = ConvLayer.create(rng, 1, HIDDEN_CHANNELS, size=2, stride=2)
    if bypass_endpoints:
        mix = ConvLayer.create(rng, HIDDEN_CHANNELS, HIDDEN_CHANNELS,
                               size=1, stride=1)
        decode = DeconvLayer.create(rng, HIDDEN_CHANNELS, DECODE_CHANNELS,
                                    size=2, stride=2)
        head = ConvLayer.create(rng, DECODE_CHANNELS, 1, size=1, stride=1)
        core = [encode, BypassLayer(), mix, ReLULayer(), decode,
                BypassLayer(), head, SigmoidLayer()]
    else:
        decode = DeconvLayer.create(rng, HIDDEN_CHANNELS, DECODE_CHANNELS,
                                    size=2, stride=2)
        head = ConvLayer.create(rng, DECODE_CHANNELS, 1, size=1, stride=1)
        core = [encode, ReLULayer(), decode, ReLULayer(), head, SigmoidLayer()]
    if phase is Phase.ALIGNED:
        return Network(core)
    if edge is EdgeMode.TORUS_WRAP:
        return Network([WrapShiftLayer(), *core, UnwrapShiftLayer()])
    return Network([Pad1Layer(), *core, Crop1Layer()])
