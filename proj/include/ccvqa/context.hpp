#pragma once

#include <string>

namespace ccvqa {

inline constexpr const char* kParametricContextId = "parametric";

// A member of the context set: the parametric context or one retrieved section.
struct ContextDoc {
  std::string id;
  std::string text;
  bool parametric = false;
};

}  // namespace ccvqa
