#pragma once

#include <cstdint>
#include <string>

#include "lensless/core.hpp"

namespace lensless::bench {

enum class SceneKind { gradient, checkerboard, pink_noise, shapes };

std::string to_string(SceneKind kind);

/// Deterministic synthetic ground truth in [0, 1]. `kind` defaults to a
/// rotation through all kinds keyed on the seed.
RealImage procedural_scene(std::uint64_t seed, std::size_t height, std::size_t width,
                           std::size_t channels = 3);
RealImage procedural_scene(SceneKind kind, std::uint64_t seed, std::size_t height,
                           std::size_t width, std::size_t channels = 3);

/// splitmix64 step; derives independent stream seeds from (master, cell).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell);

}  // namespace lensless::bench
