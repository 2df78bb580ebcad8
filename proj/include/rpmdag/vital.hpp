#pragma once

#include <array>
#include <string_view>

namespace rpmdag {

enum class Vital { heart_rate, systolic_bp, diastolic_bp, glucose, respiration };

inline constexpr std::array<Vital, 5> kAllVitals{Vital::heart_rate, Vital::systolic_bp, Vital::diastolic_bp,
                                                 Vital::glucose, Vital::respiration};

constexpr std::string_view to_string(Vital v) {
  switch (v) {
    case Vital::heart_rate: return "heart_rate";
    case Vital::systolic_bp: return "systolic_bp";
    case Vital::diastolic_bp: return "diastolic_bp";
    case Vital::glucose: return "glucose";
    case Vital::respiration: return "respiration";
  }
  return "";
}

/// Canonical unit each vital is normalized to.
constexpr std::string_view canonical_unit(Vital v) {
  switch (v) {
    case Vital::heart_rate: return "bpm";
    case Vital::systolic_bp:
    case Vital::diastolic_bp: return "mmHg";
    case Vital::glucose: return "mg/dL";
    case Vital::respiration: return "breaths/min";
  }
  return "";
}

}  // namespace rpmdag
