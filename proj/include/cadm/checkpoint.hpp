#pragma once

#include <string>

#include "cadm/config.hpp"
#include "cadm/predictor.hpp"
#include "cadm/training.hpp"

namespace cadm {

// Single-file binary checkpoint: run config (serialized text), epochs
// completed, the trainer's draw-stream state, then named parameter and
// velocity tensors. Everything needed to resume bit-exactly.
struct CheckpointMeta {
  RunConfig config;
  int epoch = 0;
  std::string rng_state;
};

void save_checkpoint(const std::string& path, const RunConfig& cfg, int epoch,
                     const std::string& rng_state,
                     const ParamStore<float>& params,
                     const MomentumSgd<float>& opt);

// Reads only the header (to size the model before a full load).
CheckpointMeta peek_checkpoint(const std::string& path);

// Restores tensors into an already-built store/optimizer; throws on bad
// magic/version, truncation, or name/shape mismatch.
CheckpointMeta load_checkpoint(const std::string& path,
                               ParamStore<float>& params,
                               MomentumSgd<float>& opt);

}  // namespace cadm
