#pragma once

#include <string>
#include <vector>

#include "hkrm/matrix.hpp"

namespace hkrm {

// Named, non-owning view of one trainable tensor. Models hand these out in a
// fixed order; gradient lists use the same order.
struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
};

using ParamList = std::vector<ParamRef>;

// Gradients aligned index-for-index with a ParamList.
using GradList = std::vector<Matrix>;

GradList zeros_like(const ParamList& params);

// Sum of squares over every entry.
double squared_norm(const GradList& grads);

// out += scale * g, elementwise over aligned lists.
void accumulate(GradList& out, const GradList& g, double scale = 1.0);

}  // namespace hkrm
