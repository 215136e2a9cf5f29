"""tencodec: lossy dense-tensor compression with a neural TT decomposition.

The pipeline folds a tensor to a higher order, reorders slices within each
mode so similar ones are adjacent, and trains a small recurrent model that
emits tensor-train cores per entry. Artifacts store only the model weights
and the mode permutations.
"""

from .errors import DivergedError, DomainError, FormatError
from .tensor import DenseTensor, PermutationSet, fitness, smoothness, \
    load_tensor, save_tensor
from .folding import FoldingSpec, auto_folding_spec, fold_index, unfold_index, \
    is_padding
from .model import NttdHyper, NttdParams, Adam, param_count, \
    generate_random_nttd_tensor
from .reorder import init_orders_tsp, propose_pairs_lsh, evaluate_swap, \
    update_orders
from .ttd import TTCores, tt_svd, tt_reconstruct, tt_reconstruct_full, \
    tt_param_count, variant_n
from .codec import CompressedArtifact, serialize, deserialize, save_artifact, \
    load_artifact, report_size
from .trainer import TrainConfig, TrainReport, compress, reconstruct_full, \
    reconstruct_entry

__version__ = "0.1.0"

__all__ = [
    "DivergedError", "DomainError", "FormatError",
    "DenseTensor", "PermutationSet", "fitness", "smoothness",
    "load_tensor", "save_tensor",
    "FoldingSpec", "auto_folding_spec", "fold_index", "unfold_index",
    "is_padding",
    "NttdHyper", "NttdParams", "Adam", "param_count",
    "generate_random_nttd_tensor",
    "init_orders_tsp", "propose_pairs_lsh", "evaluate_swap", "update_orders",
    "TTCores", "tt_svd", "tt_reconstruct", "tt_reconstruct_full",
    "tt_param_count", "variant_n",
    "CompressedArtifact", "serialize", "deserialize", "save_artifact",
    "load_artifact", "report_size",
    "TrainConfig", "TrainReport", "compress", "reconstruct_full",
    "reconstruct_entry",
    "__version__",
]
