"""Evolutionary search over symmetric convolutional autoencoders.

A one-parent evolution strategy mutates grid-encoded encoder architectures,
trains every candidate from scratch with ADAM on an MSE objective, and scores
it by mean validation PSNR on inpainting or denoising tasks.
"""

__version__ = "0.1.0"

from .genotype import (
    EncoderSpec,
    Genotype,
    NodeType,
    NodeTypeTable,
    build_type_table,
    decode,
    minimal_genotype,
    mutate_child,
    neutral_modify,
    point_mutation,
    random_genotype,
)
from .network import (
    CaeSpec,
    LayerKind,
    LayerSpec,
    TaskMode,
    arch_to_string,
    architecture_validator,
    expand,
    param_count,
    parse_arch,
    trace_shapes,
)

__all__ = [
    "CaeSpec",
    "EncoderSpec",
    "Genotype",
    "LayerKind",
    "LayerSpec",
    "NodeType",
    "NodeTypeTable",
    "TaskMode",
    "arch_to_string",
    "architecture_validator",
    "build_type_table",
    "decode",
    "expand",
    "minimal_genotype",
    "mutate_child",
    "neutral_modify",
    "param_count",
    "parse_arch",
    "point_mutation",
    "random_genotype",
    "trace_shapes",
]
