#pragma once

#include "fusion/tensor.hpp"

namespace fusion {

// Differentiable tensor primitives. Images and feature maps use layout
// (channels, height, width). All ops record backward rules on the active
// GradTape when any input needs gradients.

// input [C,H,W] * kernel [F,C,kh,kw] + bias [F] -> [F,H',W'], zero padding,
// H' = (H + 2*pad - kh)/stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride, int pad);

// input [C,H,W] * kernel [C,F,kh,kw] + bias [F] -> [F,H',W'],
// H' = (H-1)*stride - 2*pad + kh. Adjoint of conv2d with the same kernel.
Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                         int stride, int pad);

// max(v, slope*v) elementwise; at 0 the negative-branch slope applies.
Tensor leaky_relu(const Tensor& input, double slope);

// Per-channel normalization to zero mean / unit variance followed by an
// affine gain/shift, both [C].
Tensor instance_norm(const Tensor& input, const Tensor& gain, const Tensor& shift,
                     double eps = 1e-5);

// Non-overlapping k x k minimum pooling; k must divide H and W. Backward
// routes gradient to the window argmin (first in row-major order on ties).
Tensor min_pool2d(const Tensor& input, int k);

// [Ca,H,W] + [Cb,H,W] -> [Ca+Cb,H,W]
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Channels [c0, c1) of a [C,H,W] tensor.
Tensor slice_channels(const Tensor& input, int c0, int c1);

// Reflection padding (edge pixel not repeated); requires pad < H, W.
Tensor reflect_pad2d(const Tensor& input, int pad);

// Elementwise sum of same-shaped tensors.
Tensor add(const Tensor& a, const Tensor& b);

// Multiplication by a constant.
Tensor scale(const Tensor& input, double factor);

// Sum of all elements -> scalar.
Tensor sum(const Tensor& input);

// 0.5*(tanh(v)+1): squashes to (0,1).
Tensor tanh01(const Tensor& input);

// mean |a - b| over all elements -> scalar; sign subgradient (0 at equality).
Tensor mean_l1(const Tensor& a, const Tensor& b);

// mean (v - target)^2 over all elements -> scalar.
Tensor mean_sq(const Tensor& input, double target);

}  // namespace fusion
