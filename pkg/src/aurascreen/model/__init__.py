"""Toy-scale neural stack: pair encoder, affinity head and student scorer."""

from .autodiff import Var, backward
from .featurize import TeacherFeaturizer
from .gradcheck import NonFiniteGradient, gradcheck, relative_error
from .params import (
    ShapeMismatch,
    StudentConfig,
    TeacherConfig,
    init_student_params,
    init_teacher_params,
    load_checkpoint,
    read_protein_embedding,
    round_to_f32,
    save_checkpoint,
    write_protein_embedding,
)
from .student import StudentInput, aurofast_forward, input_grad_norms, student_forward
from .teacher import (
    FitnessOutput,
    NonFiniteActivation,
    TokenReps,
    ZeroLigandTokens,
    ZeroProteinTokens,
    affinity_head,
    as_vars,
    head_pair_mask,
    pair_encoder,
    teacher_forward,
    token_weights,
    trunk_embedding,
)

__all__ = [
    "FitnessOutput", "NonFiniteActivation", "NonFiniteGradient", "ShapeMismatch",
    "StudentConfig", "StudentInput", "TeacherConfig", "TeacherFeaturizer", "TokenReps",
    "Var", "ZeroLigandTokens", "ZeroProteinTokens", "affinity_head", "as_vars",
    "aurofast_forward", "backward", "gradcheck", "head_pair_mask", "init_student_params",
    "init_teacher_params", "input_grad_norms", "load_checkpoint", "pair_encoder",
    "read_protein_embedding", "relative_error", "round_to_f32", "save_checkpoint",
    "student_forward", "teacher_forward", "token_weights", "trunk_embedding",
    "write_protein_embedding",
]
