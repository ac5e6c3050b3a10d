"""Compressed-CNN weight codec and dataflow simulator."""

from .conv import (ACTIVATIONS, LayerShape, QuantParams, WeightTensor,
                   apply_activation, direct_conv, quantize_tensor,
                   reference_output, saturate, scalar_matrix_conv)
from .energy import CostTable, EnergyReport, compare_designs, energy_from_report
from .errors import ConfigError, CorruptionError
from .rle import (EncodedLayer, EncodingParams, choose_encoding_params,
                  decode_layer, encode_layer, read_codr_file,
                  size_scnn_baseline, size_ucnn_baseline, write_codr_file)
from .sim import AddressTrace, MemoryCounter, SimReport, run_layer
from .synth import SyntheticSpec, gen_synthetic_weights, synth_input_features
from .transform import (TilePlan, TilingConfig, UnifiedStream, WeightVector,
                        build_weight_vectors, partition_into_tiles,
                        reconstruct_weight_vector, unify_weight_vector)

__version__ = "0.1.0"
