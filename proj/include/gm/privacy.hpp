#pragma once

// Structural scan of JSON documents for raster or image payloads.

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gm/error.hpp"

namespace gm::privacy {

using Json = nlohmann::json;

inline constexpr std::size_t kMaxFlatNumericArray = 1024;
inline constexpr std::size_t kMaxOpaqueString = 512;

inline const std::vector<std::string_view>& forbidden_key_fragments() {
  static const std::vector<std::string_view> f = {"image", "img", "rgb", "photo", "pixels", "raster", "jpeg",
                                                  "jpg",   "png", "bitmap", "depth_map", "depthmap", "mask_data",
                                                  "frame_data", "video"};
  return f;
}

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool opaque_blob(const std::string& s) {
  if (lower(s.substr(0, 11)).starts_with("data:image")) return true;
  if (s.size() < kMaxOpaqueString) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '+' || c == '/' || c == '=' || c == '\n' || c == '\r';
  });
}

inline void scan(const Json& j, const std::string& path, std::vector<std::string>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      const std::string key = lower(k);
      for (auto frag : forbidden_key_fragments()) {
        if (key.find(frag) != std::string::npos) {
          out.push_back(path + "/" + k + ": image-like field name");
          break;
        }
      }
      scan(v, path + "/" + k, out);
    }
  } else if (j.is_array()) {
    const bool flat_numeric = !j.empty() && std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_number(); });
    if (flat_numeric && j.size() > kMaxFlatNumericArray) out.push_back(path + ": dense numeric array");
    if (j.is_binary()) out.push_back(path + ": binary payload");
    for (std::size_t i = 0; i < j.size(); ++i) scan(j[i], path + "/" + std::to_string(i), out);
  } else if (j.is_binary()) {
    out.push_back(path + ": binary payload");
  } else if (j.is_string() && opaque_blob(j.get_ref<const std::string&>())) {
    out.push_back(path + ": encoded binary string");
  }
}

}  // namespace detail

/// JSON-pointer-like paths of every field that looks like raster or image data.
inline std::vector<std::string> raster_fields(const Json& doc) {
  std::vector<std::string> out;
  detail::scan(doc, "", out);
  return out;
}

inline void require_no_raster(const Json& doc, std::string_view what) {
  const auto found = raster_fields(doc);
  if (!found.empty()) fail(ErrorCode::PrivacyViolation, std::string(what) + " carries image data at " + found.front());
}

}  // namespace gm::privacy
