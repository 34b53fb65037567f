#pragma once

#include <string>

#include "graphfair/diffusion.hpp"
#include "graphfair/link_predictor.hpp"

namespace graphfair {

// Versioned flat text weight files with a model-kind tag ("gcn" or
// "denoiser"). Denoiser files also carry the schedule, channel marginals and
// group distribution so sampling is self-contained.
void save_gcn(const GcnParams& params, const std::string& path);
GcnParams load_gcn(const std::string& path);

void save_denoiser(const diffusion::DenoiserParams& params, const std::string& path);
diffusion::DenoiserParams load_denoiser(const std::string& path);

// The kind tag of a weight file without loading the tensors.
std::string weights_kind(const std::string& path);

}  // namespace graphfair
