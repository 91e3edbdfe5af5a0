#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "readnet/num/graph.hpp"

namespace readnet::num {

/// 1 keeps a position, 0 excludes it. An empty mask keeps everything.
using Mask = std::vector<std::uint8_t>;

Var matmul(const Var& a, const Var& b);
/// Elementwise; `b` may also be a 1xC row broadcast over the rows of `a`.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var concat(std::span<const Var> parts, int axis);
Var transpose(const Var& a);
Var row_select(const Var& a, std::span<const std::size_t> rows);
Var sum(const Var& a);

Var relu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
/// log(sigmoid(x)) evaluated without overflow.
Var log_sigmoid(const Var& a);

/// Softmax along `axis` (0 = down columns, 1 = across rows). Masked positions
/// along that axis get probability exactly 0; an all-masked line throws
/// "empty sequence".
Var softmax(const Var& a, int axis, const Mask& mask = {});
/// Row-wise log-softmax.
Var log_softmax(const Var& a);
/// Zero-mean, unit-variance normalization along `axis` (no gain/offset).
Var layer_norm(const Var& a, int axis, double eps = 1e-5);

}  // namespace readnet::num
