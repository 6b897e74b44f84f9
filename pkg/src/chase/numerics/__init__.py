"""Dense float64 math with explicit reverse-mode gradients."""

from .gradcheck import GradCheckReport, grad_check
from .layers import (
	GRUCache,
	affine_backward,
	affine_forward,
	apply_mask,
	dropout_mask,
	gru_cell_backward,
	gru_cell_forward,
	gru_sequence_backward,
	gru_sequence_forward,
	init_affine,
	init_gru,
	sigmoid,
	softmax,
	softplus,
)
from .losses import (
	binary_cross_entropy_with_logits,
	gaussian_nll,
	gaussian_nll_backward,
	softmax_cross_entropy,
)
from .optim import OptimizerState, adam_step
from .params import ParamSet, as_tensor, check_finite

__all__ = [
	"GRUCache",
	"GradCheckReport",
	"OptimizerState",
	"ParamSet",
	"adam_step",
	"affine_backward",
	"affine_forward",
	"apply_mask",
	"as_tensor",
	"binary_cross_entropy_with_logits",
	"check_finite",
	"dropout_mask",
	"gaussian_nll",
	"gaussian_nll_backward",
	"grad_check",
	"gru_cell_backward",
	"gru_cell_forward",
	"gru_sequence_backward",
	"gru_sequence_forward",
	"init_affine",
	"init_gru",
	"sigmoid",
	"softmax",
	"softplus",
	"softmax_cross_entropy",
]
