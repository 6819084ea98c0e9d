#pragma once

#include <filesystem>

#include "trajevent/tape.hpp"

namespace trajevent {

// Versioned JSON manifest mapping parameter name -> shape -> values.
inline constexpr const char* kCheckpointFormat = "trajevent-checkpoint-v1";

void save_params(const autodiff::ParameterSet& params,
                 const std::filesystem::path& file);
autodiff::ParameterSet load_params(const std::filesystem::path& file);

}  // namespace trajevent
