"""Visual-context dialog generation with mutual text-visual dependency.

Three context-fusion models over a shared encoder-decoder backbone, a
reversed utterance model and visual-match discriminators for N-best
reranking, corpus metrics, an adversarial evaluator, and a deterministic
synthetic corpus to verify all of it on.
"""

__version__ = "0.1.0"

from .assembly import assemble, assemble_cv, assemble_fv, assemble_nv, assemble_utterance
from .beam import Hypothesis, beam_nbest
from .checkpoint import load_checkpoint, save_checkpoint
from .config import MODE_CV, MODE_FV, MODE_NV, ModelConfig, tiny_config
from .data import Dataset, Episode, Turn, load_dataset
from .featio import (
    CoarseFeatureStore,
    ObjectFeatureStore,
    load_coarse_features,
    load_object_features,
    write_coarse_features,
    write_object_features,
)
from .gradcheck import grad_check
from .metrics import bleu_n, dist_n, evaluate_all, rouge_n_f
from .mi import (
    DiscConfig,
    MiDiscriminator,
    backward_score,
    disc_loss,
    mean_pool_objects,
    q2_score,
    q_score,
    sample_negatives,
    train_discriminator,
)
from .model import DialogModel
from .rerank import DecodeConfig, MiConfig, RerankWeights, generate_split, rerank
from .synthetic import SyntheticSpec, generate_synthetic, write_synthetic
from .training import OptimConfig, next_token_accuracy, train_backward, train_forward
from .vocab import Vocabulary, build_vocab, encode_text
