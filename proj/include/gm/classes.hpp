#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "gm/error.hpp"
#include "gm/raster.hpp"

namespace gm {

/// Fixed class code table. Extra background classes (vegetation, sky, ...) fold into Background.
enum class FeatureClass : Label {
  Background = 0,
  Sidewalk = 1,
  Building = 2,
  TrafficSign = 3,
  TrafficLight = 4,
  Pole = 5,
};

inline constexpr std::array<FeatureClass, 5> kMappableClasses = {
    FeatureClass::Sidewalk, FeatureClass::Building, FeatureClass::TrafficSign,
    FeatureClass::TrafficLight, FeatureClass::Pole};

constexpr Label code(FeatureClass c) noexcept { return static_cast<Label>(c); }

constexpr bool is_mappable(FeatureClass c) noexcept { return c != FeatureClass::Background; }

constexpr bool is_known_code(Label value) noexcept { return value <= code(FeatureClass::Pole); }

constexpr std::string_view class_name(FeatureClass c) noexcept {
  switch (c) {
    case FeatureClass::Background: return "background";
    case FeatureClass::Sidewalk: return "sidewalk";
    case FeatureClass::Building: return "building";
    case FeatureClass::TrafficSign: return "traffic_sign";
    case FeatureClass::TrafficLight: return "traffic_light";
    case FeatureClass::Pole: return "pole";
  }
  return "background";
}

inline std::optional<FeatureClass> class_from_name(std::string_view name) noexcept {
  for (Label c = 0; c <= code(FeatureClass::Pole); ++c) {
    auto fc = static_cast<FeatureClass>(c);
    if (class_name(fc) == name) return fc;
  }
  return std::nullopt;
}

inline FeatureClass parse_class(std::string_view name) {
  auto c = class_from_name(name);
  if (!c) fail(ErrorCode::FormatError, "unknown feature class '" + std::string(name) + "'");
  return *c;
}

inline FeatureClass class_from_code(Label value) {
  if (!is_known_code(value)) {
    fail(ErrorCode::InvariantViolation, "label " + std::to_string(value) + " outside class table");
  }
  return static_cast<FeatureClass>(value);
}

using ClassSet = std::set<FeatureClass>;

}  // namespace gm
