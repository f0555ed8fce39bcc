#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unigs/core.hpp"

namespace unigs {

enum class BindMode { Center, Bbx8 };

const char* to_string(BindMode mode);
BindMode parse_bind_mode(const std::string& name);
inline int anchors_per_gaussian(BindMode mode) { return mode == BindMode::Center ? 1 : 8; }

// A point on the proxy mesh: face plus barycentrics (u, v, w) for the face's
// three vertices in order. `fallback` marks anchors whose target no camera
// ray reached; they hold the nearest surface point instead and report no
// hit face.
struct Anchor {
  std::int32_t face = 0;
  bool fallback = false;
  double u = 1.0, v = 0.0, w = 0.0;
  Vec3 corner_offset = Vec3::Zero();  // in the Gaussian's local frame

  std::optional<int> hit_face() const {
    return fallback ? std::nullopt : std::optional<int>(face);
  }
};

struct BindingTable {
  BindMode mode = BindMode::Center;
  std::uint64_t gaussian_count = 0;
  std::uint32_t mesh_face_count = 0;
  std::uint64_t mesh_hash = 0;
  double k_sigma = 3.0;
  std::vector<Anchor> anchors;  // gaussian-major

  int anchors_per_gaussian() const { return unigs::anchors_per_gaussian(mode); }
  std::span<const Anchor> anchors_of(std::size_t gaussian) const {
    const std::size_t k = static_cast<std::size_t>(anchors_per_gaussian());
    return {anchors.data() + gaussian * k, k};
  }
  std::size_t fallback_count() const;
};

// Empty when the table is self-consistent: anchor count, face range,
// barycentrics in [0,1] summing to 1 within 1e-6.
std::vector<std::string> validate_binding(const BindingTable& table);

Vec3 anchor_point(const Anchor& anchor, const TriMesh& mesh);

}  // namespace unigs
