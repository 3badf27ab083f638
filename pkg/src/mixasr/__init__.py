"""mixasr: joint multi-talker and target-talker speech recognition.

A frozen encoder-decoder ASR foundation model (toy-scale built in) gains
multi-talker ability from a temporal convolutional separator inserted in
its encoder, target-talker ability from a small identifier over
enrollment-aligned frames, and task adaptation from a soft prompt in the
decoder prefix. Only those attachments train, under a PIT objective.
"""

__version__ = "0.1.0"

from .audio import AudioClip, read_wav, time_stretch_to_limit, trim_enrollment, write_wav
from .errors import MixasrError
from .features import FeatureExtractor, FeatureMap
from .foundation import DecoderPrefix, FoundationConfig, FoundationModel, Vocabulary
from .identifier import TargetTalkerIdentifier, select_target_branch, split_prefix
from .model import Batch, JointModel, ParameterPartition, partition_parameters
from .objective import (
    LossBundle,
    PermutationAssignment,
    TaskMode,
    find_permutation,
    pit_asr_loss,
    sample_task_mode,
    total_loss,
    tti_loss,
)
from .prompt import SoftPrompt, init_prompt
from .scoring import (
    ErrorCounts,
    ScoringUnit,
    edit_distance,
    min_permutation_error_rate,
    normalize_text,
    target_talker_error_rate,
    tti_accuracy,
)
from .separator import Sidecar, SidecarConfig, apply_masks, receptive_field
from .simulate import (
    MixtureExample,
    Reference,
    SourceUtterance,
    assemble_joint_input,
    simulate_delayed,
    simulate_left_aligned,
)
