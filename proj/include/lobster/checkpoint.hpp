#pragma once

#include <string>

#include "lobster/model.hpp"

namespace lobster {

/// Versioned binary container: magic "LOBS", format version, layer-spec
/// table, parameters as little-endian 64-bit floats (dense, or index/value
/// pairs of alive nonzeros when `sparse` is set), bit-packed masks, and an
/// embedded key=value config text. Round trips bit-exactly.
void save_checkpoint(const Model& model, const std::string& path,
                     const std::string& config_text = "", bool sparse = false);

struct LoadedCheckpoint {
    Model model;
    std::string config_text;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace lobster
