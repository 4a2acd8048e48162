"""Memory-augmented attention architecture for video description.

A temporal encoder mixes each frame's convolutional map with location
attention and threads the result through an LSTM; a per-word attention
with an LSTM memory retrieves frame content while a recurrent decoder
emits the caption.  Everything runs on float64 NumPy with a built-in
reverse-mode autodiff, so gradients are checkable against finite
differences.
"""

from .tensor import Tensor, backward, matmul, softmax, log_softmax, tanh, sigmoid
from .tensor import add, hadamard, scale, tensor_sum, index_select, concat
from .tensor import stack_rows, transpose
from .cells import CellState, LstmCell, StackedLstm, lstm_step, stacked_step
from .tem import Tem, TemConfig, location_attention, tem_forward
from .iam import Iam, IamState, attention_update, memory_update
from .decoder import DecodeStep, Decoder, decode_step
from .model import (
    AblationVariant,
    CaptionModel,
    Generation,
    ModelConfig,
    build_model,
    forward_teacher_forced,
    generate,
)
from .training import (
    Adam,
    Checkpoint,
    TrainConfig,
    TrainResult,
    Trainer,
    adam_step,
    clip_gradients,
    load_checkpoint,
    model_from_checkpoint,
    nll_loss,
    save_checkpoint,
    teacher_forced_accuracy,
    train,
)
from .data import (
    BOS,
    EOS,
    PAD,
    UNK,
    SyntheticSpec,
    VideoSample,
    Vocabulary,
    generate_synthetic,
    load_features,
    preprocess_caption,
    sample_frames,
    save_features,
    tokenize,
    write_caption_sidecar,
)
from .metrics import EvalPair, bleu, cider, cider_scores
from .config import RunConfig, load_run_config
from .errors import (
    DimensionError,
    FormatError,
    MemcapError,
    NumericError,
    UsageError,
)

__version__ = "0.1.0"
