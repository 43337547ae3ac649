#include "intentaug/fusion.hpp"

#include <sstream>

namespace intentaug {

ReductionSpec ReductionSpec::custom(double q) {
  if (!(q > 0)) throw ConfigError("reduction q must be positive, got " + std::to_string(q));
  return {Kind::custom, q};
}

ReductionSpec parse_reduction(std::string_view text, double q) {
  if (text == "sum") return ReductionSpec::sum();
  if (text == "mean") return ReductionSpec::mean();
  if (text == "custom" || text == "q") return ReductionSpec::custom(q);
  throw ConfigError("fusion.reduction must be 'sum', 'mean' or 'custom', got '" + std::string(text) + "'");
}

std::string to_string(const ReductionSpec& spec) {
  switch (spec.kind) {
    case ReductionSpec::Kind::sum: return "sum";
    case ReductionSpec::Kind::mean: return "mean";
    case ReductionSpec::Kind::custom: {
      std::ostringstream out;
      out << "custom(q=" << spec.q << ")";
      return out.str();
    }
  }
  return "sum";
}

Activation parse_activation(std::string_view text) {
  if (text == "tanh") return Activation::tanh;
  if (text == "identity") return Activation::identity;
  if (text == "relu") return Activation::relu;
  throw ConfigError("fusion.transform_activation must be 'tanh', 'identity' or 'relu', got '" + std::string(text) +
                    "'");
}

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
  }
  return "tanh";
}

FusionMethod parse_fusion_method(std::string_view text) {
  if (text == "none") return FusionMethod::none;
  if (text == "concat") return FusionMethod::concat;
  if (text == "add") return FusionMethod::add;
  if (text == "transform") return FusionMethod::transform;
  throw ConfigError("fusion.method must be one of none, concat, add, transform; got '" + std::string(text) + "'");
}

std::string_view to_string(FusionMethod method) {
  switch (method) {
    case FusionMethod::none: return "none";
    case FusionMethod::concat: return "concat";
    case FusionMethod::add: return "add";
    case FusionMethod::transform: return "transform";
  }
  return "none";
}

}  // namespace intentaug
