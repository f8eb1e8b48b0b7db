#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fivefold {

enum class VarietyId {
  X5,
  LGr3W_odd,
  LGr3Wbar,
  LGr3Wbar_lambda,
  F_flag,
  S_surface,
  Z_scroll,
  GrXi2W,
  GrLambda5W,
  Dlm,
  LGr2Wbar,
  Qdual_lambda,
  ZeroLocus_gr26,
  ZeroLocus_gr46,
  X4,
  Sigma,
};

inline constexpr std::array<VarietyId, 16> kAllVarieties = {
    VarietyId::X5,          VarietyId::LGr3W_odd,   VarietyId::LGr3Wbar,       VarietyId::LGr3Wbar_lambda,
    VarietyId::F_flag,      VarietyId::S_surface,   VarietyId::Z_scroll,       VarietyId::GrXi2W,
    VarietyId::GrLambda5W,  VarietyId::Dlm,         VarietyId::LGr2Wbar,       VarietyId::Qdual_lambda,
    VarietyId::ZeroLocus_gr26, VarietyId::ZeroLocus_gr46, VarietyId::X4,       VarietyId::Sigma,
};

inline std::string_view variety_name(VarietyId v) {
  switch (v) {
    case VarietyId::X5: return "X5";
    case VarietyId::LGr3W_odd: return "LGr3W_odd";
    case VarietyId::LGr3Wbar: return "LGr3Wbar";
    case VarietyId::LGr3Wbar_lambda: return "LGr3Wbar_lambda";
    case VarietyId::F_flag: return "F_flag";
    case VarietyId::S_surface: return "S_surface";
    case VarietyId::Z_scroll: return "Z_scroll";
    case VarietyId::GrXi2W: return "GrXi2W";
    case VarietyId::GrLambda5W: return "GrLambda5W";
    case VarietyId::Dlm: return "Dlm";
    case VarietyId::LGr2Wbar: return "LGr2Wbar";
    case VarietyId::Qdual_lambda: return "Qdual_lambda";
    case VarietyId::ZeroLocus_gr26: return "ZeroLocus_gr26";
    case VarietyId::ZeroLocus_gr46: return "ZeroLocus_gr46";
    case VarietyId::X4: return "X4";
    case VarietyId::Sigma: return "Sigma";
  }
  return "?";
}

inline std::optional<VarietyId> parse_variety(std::string_view s) {
  for (auto v : kAllVarieties)
    if (variety_name(v) == s) return v;
  return std::nullopt;
}

// Dimension of the subspaces a variety parameterizes and of their ambient
// space. Z is a flag variety; its points are (U3 in U4) in the 6-space.
struct VarietyShape {
  int k, n;
};

inline VarietyShape variety_shape(VarietyId v) {
  switch (v) {
    case VarietyId::X5:
    case VarietyId::LGr3W_odd:
    case VarietyId::X4: return {3, 7};
    case VarietyId::LGr3Wbar:
    case VarietyId::LGr3Wbar_lambda: return {3, 6};
    case VarietyId::F_flag:
    case VarietyId::Dlm:
    case VarietyId::LGr2Wbar:
    case VarietyId::ZeroLocus_gr26:
    case VarietyId::Sigma: return {2, 6};
    case VarietyId::S_surface:
    case VarietyId::ZeroLocus_gr46: return {4, 6};
    case VarietyId::Z_scroll: return {3, 6};
    case VarietyId::GrXi2W: return {2, 7};
    case VarietyId::GrLambda5W: return {5, 7};
    case VarietyId::Qdual_lambda: return {1, 7};
  }
  return {0, 0};
}

struct CountReport {
  VarietyId variety = VarietyId::X5;
  std::uint32_t q = 0;
  std::uint64_t observed = 0;
  std::optional<std::vector<long long>> expected_poly;
  std::optional<std::uint64_t> expected;
  bool pass = true;
  double seconds = 0;
};

}  // namespace fivefold
